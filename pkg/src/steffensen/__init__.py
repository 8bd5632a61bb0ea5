"""Vector Steffensen fixed-point acceleration and image reverse filtering."""

from .errors import (
    ConfigError,
    ConvergenceError,
    DimensionError,
    DivergenceError,
    ImageIOError,
    MetricError,
    SingularError,
)
from .filters import FilterSpec, apply_filter, make_filter
from .methods import (
    GEOMETRIC_CASES,
    METHOD_IDS,
    AbcTriple,
    MethodSpec,
    StepResult,
    anderson2_step,
    compute_abc,
    geometric_step,
    hard_limit,
    lambda_for,
    parametric_steffensen_step,
    scalar_steffensen_step,
    vector_step,
    wynn_k2_scalar,
)
from .reverse import (
    BASELINES,
    IterationRecord,
    IterationTrace,
    ReverseProblem,
    RunConfig,
    baseline_step,
    contraction_probe,
    pct_improvement,
    phi_reverse,
    psnr,
    reverse_abc,
    run_reverse,
)
from .schedules import AfmState, ScheduleSpec, afm_advance, mu_at
from .vector_ops import brezinski_inverse, geometric_sandwich, inner, matrix_2norm

__version__ = "0.1.0"
