"""Finite-horizon discrete Markov decision models with large state spaces:
a temporal-difference solver on spline bases, exact and period-by-period
baselines, trajectory simulation, and maximum-likelihood estimation."""

from .backend import COMPILED_AVAILABLE, active_backend, set_backend, use_backend
from .baselines import (
    KwSolution,
    MemoryCapExceeded,
    SequentialSolution,
    TimeCapExceeded,
    dense_solver_budget,
    exact_solve,
    kw_solve,
    memory_footprint,
    sequential_series_solve,
)
from .basis import SplineBasis, build_basis, project
from .config import ConfigError, ExperimentConfig, emit_config, load_config, parse_config
from .estimate import (
    EstimationResult,
    bellman_error_report,
    estimate_theta,
    log_likelihood,
)
from .logit import (
    EULER_GAMMA,
    action_values,
    bellman_operator,
    bellman_residual,
    bellman_rhs,
    choice_probabilities,
    conditional_eps_mean,
    log_sum_exp,
)
from .model import (
    ACTIONS,
    CareerModel,
    State,
    build_career_model,
    is_terminal,
    pack_state,
    reward,
    transition,
    unpack_state,
)
from .simulate import (
    Dataset,
    empirical_state_counts,
    load_dataset,
    save_dataset,
    simulate_dataset,
)
from .slstd import (
    DivergenceError,
    SlstdDiagnostics,
    SolverConfig,
    StepSchedule,
    TransitionPack,
    fixed_point_oracle,
    slstd_solve,
    slstd_step,
    value_hat,
)
from .values import SplineValues, TableValues

__version__ = "0.1.0"
