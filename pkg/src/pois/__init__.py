"""Policy optimization via importance sampling (action- and parameter-based POIS)."""
from .batch import Batch, Trajectory
from .envs import (
    LQG,
    CartPole,
    MountainCar,
    Pendulum,
    collect_trajectories,
    evaluate_policy,
    lqg_optimal_return,
    make_env,
)
from .estimators import (
    BoundConfig,
    DegenerateWeightsError,
    ess_estimate,
    ess_exact,
    is_estimate,
    is_lower_bound,
    lambda_from_delta,
    sn_estimate,
    sn_lower_bound,
)
from .gaussians import DiagGaussian, DivergenceUndefined, exp_renyi_divergence, renyi_divergence, weight_law
from .optimizer import (
    IterationRecord,
    LineSearchConfig,
    OptimizerConfig,
    offline_optimize,
    parabolic_line_search,
    run_apois,
    run_ppois,
)
from .policies import DeterministicLinearPolicy, GaussianHyperpolicy, LinearGaussianPolicy
from .surrogate import SurrogateEval, apois_surrogate, evaluate, ppois_surrogate, practical_surrogate

__version__ = "0.1.0"
