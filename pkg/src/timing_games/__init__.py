"""Equilibrium analysis of stochastic two-player timing games with extended mixed strategies."""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    ConsistencyError,
    DomainError,
    EmptyLimitError,
    LatticeError,
    ModelError,
    NumericalError,
    PreconditionError,
    ShapeError,
    TimingGameError,
    ValidationError,
)
from .grid import TimeGrid, first_hit
from .outcome import (
    OutcomeDistribution,
    StageProbabilities,
    mu_L,
    mu_M,
    repeated_stage_oracle,
    resolve_outcome,
    resolve_outcomes,
    right_limit_estimate,
    stage_outcome_measures,
)
from .strategy import (
    ExtendedStrategy,
    StoppingRule,
    StrategyFamily,
    check_time_consistency,
    pure_strategy,
    validate_strategy,
)
from .payoff import GameProcesses, batch_payoff, expected_payoff, mc_map, path_payoff, pure_payoff, stieltjes_changevar_oracle
from .lattice import MarkovLattice, drift_classify, gbm_lattice, hitting_time, snell_envelope
from .equilibrium import (
    EquilibriumReport,
    build_preemption_alpha,
    construct_spe,
    default_deviation_class,
    indifference_alpha,
    preemption_region,
    verify_equilibrium,
)
