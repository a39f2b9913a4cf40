"""Clipped, normalized and warm-up gradient methods under strong growth.

Modules
-------
objectives   synthetic problem families with analytic constants
oracles      mini-batch stochastic gradients and noise-constant estimators
optimizers   ClipSGD, NSGD, SGD, warm-up GD and their step/batch rules
verify       checks of inequalities, identities and convergence envelopes
harness      config-driven seeded sweeps and CSV/JSON outputs
cli          the ``growthopt`` command
"""

from .errors import ConfigError, ContractViolation, DegeneratePointError, UnsupportedOperation
from .objectives import (
    ObjectiveSpec,
    SmoothnessProfile,
    build_exp_inner_product,
    build_interp_least_squares,
    build_pareto_quadratic,
    build_separable_logistic,
    eval_full,
    grad_component,
    grad_full,
    smoothness_constants,
)
from .optimizers import (
    OptimizerConfig,
    RunTrace,
    batch_floor,
    clip_direction,
    nsgd_direction,
    run,
    target_lambda,
    theorem_stepsize,
    warmup_stepsize,
)
from .oracles import (
    NoiseStats,
    OracleSample,
    estimate_p_moment,
    estimate_rho,
    minibatch_variance,
    sample_minibatch,
    sample_symmetric_pareto,
)
from .rng import make_rng

__version__ = "0.1.0"
