"""Semi-blind image reverse filtering driver.

Given an observation x0 = f(x*) and the callable (but otherwise unknown)
filter f, recovering x* is the fixed-point problem for

    phi(x) = x + (x0 - f(x)),

solved here by any of the vector acceleration methods, optionally with a
relaxation schedule and first-order momentum, or by the prior baselines
T (plain fixed-point), TDA, and S.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .errors import ConfigError, ConvergenceError, DimensionError, DivergenceError, MetricError
from .filters import FilterSpec, make_filter
from .methods import AbcTriple, MethodSpec, StepResult, vector_step
from .schedules import ACCEL_MODES, AfmState, ScheduleSpec, afm_advance, mu_at
from .vector_ops import SINGULAR_GUARD, matrix_2norm, norm2

PSNR_CAP_DB = 300.0

BASELINES = ("T", "TDA", "S")

# Looser spectral-norm tolerance for the S baseline: only the norm ratio
# enters the step, so three digits are plenty and much cheaper.
_S_NORM_TOL = 1e-6


@dataclass
class ReverseProblem:
    """Observation, black-box filter, and optional ground truth for metrics."""

    x0: np.ndarray
    filter: Union[FilterSpec, Callable[[np.ndarray], np.ndarray]]
    reference: np.ndarray | None = None

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=np.float64)
        if not np.all(np.isfinite(self.x0)):
            raise ConfigError("observation must be finite")
        if self.reference is not None:
            self.reference = np.asarray(self.reference, dtype=np.float64)
            if self.reference.shape != self.x0.shape:
                raise DimensionError("reference and observation shapes differ")

    @property
    def filter_fn(self) -> Callable[[np.ndarray], np.ndarray]:
        if isinstance(self.filter, FilterSpec):
            return make_filter(self.filter)
        return self.filter


@dataclass
class RunConfig:
    """Everything needed to execute one reverse-filtering run."""

    method: Union[MethodSpec, str]
    schedule: ScheduleSpec = field(default_factory=lambda: ScheduleSpec(kind="constant", mu=1.0))
    accelerator: str = "none"
    max_iters: int = 300
    divergence_psnr_floor: float = 1.0
    snapshot_stride: int = 100

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if self.snapshot_stride < 1:
            raise ConfigError("snapshot_stride must be >= 1")
        if self.accelerator not in ACCEL_MODES:
            raise ConfigError(f"unknown accelerator {self.accelerator!r}")
        if isinstance(self.method, str) and self.method not in BASELINES:
            self.method = MethodSpec(self.method)


@dataclass
class IterationRecord:
    n: int
    psnr_db: float | None
    pct: float | None
    residual_norm: float
    lambda_raw: float
    lambda_clipped: float
    mu: float
    singular: bool


@dataclass
class IterationTrace:
    """Per-iteration metrics plus sparse iterate snapshots of one run."""

    records: list[IterationRecord]
    status: str                      # "completed" or "diverged"
    diverged_at: int | None
    psnr0: float | None
    snapshots: dict[int, np.ndarray]
    final_x: np.ndarray

    @property
    def final_pct(self) -> float | None:
        if not self.records:
            return None
        return self.records[-1].pct


def phi_reverse(x, problem: ReverseProblem) -> np.ndarray:
    """Fixed-point map x + (x0 - f(x)); exactly one filter call."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != problem.x0.shape:
        raise DimensionError("iterate and observation shapes differ")
    fx = problem.filter_fn(x)
    with np.errstate(over="ignore", invalid="ignore"):
        out = x + (problem.x0 - fx)
    if not np.all(np.isfinite(out)):
        raise DivergenceError("reverse map produced non-finite entries")
    return out


def reverse_abc(x, problem: ReverseProblem) -> AbcTriple:
    """Residual triple of the reverse map at ``x``; exactly two filter calls.

    a = x0 - f(x), b = x0 - f(x + a), c = a - b, with the map values
    reconstructed as phi(x) = x + a and phi(phi(x)) = phi(x) + b.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != problem.x0.shape:
        raise DimensionError("iterate and observation shapes differ")
    filt = problem.filter_fn
    with np.errstate(over="ignore", invalid="ignore"):
        a = problem.x0 - filt(x)
        phi_x = x + a
        b = problem.x0 - filt(phi_x)
        c = a - b
        phi_phi_x = phi_x + b
    for arr in (a, b, c, phi_x, phi_phi_x):
        if not np.all(np.isfinite(arr)):
            raise DivergenceError("filter output or residual is non-finite")
    return AbcTriple(a=a, b=b, c=c, phi_x=phi_x, phi_phi_x=phi_phi_x)


def psnr(x, ref) -> float:
    """Peak signal-to-noise ratio in dB for unit peak, capped at 300 dB."""
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.shape != ref.shape:
        raise DimensionError("psnr operands must have the same shape")
    mse = float(np.mean((x - ref) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, -10.0 * math.log10(mse))


def pct_improvement(psnr_n: float, psnr_0: float) -> float:
    """Percentage PSNR gain over the observation's PSNR."""
    if not (psnr_0 > 0.0):
        raise MetricError("pct improvement undefined for psnr_0 <= 0")
    return (psnr_n - psnr_0) / psnr_0 * 100.0


def _image_view(arr: np.ndarray) -> np.ndarray:
    return arr if arr.ndim == 2 else arr.reshape(1, -1)


def _spectral_norm(arr: np.ndarray) -> float:
    try:
        return matrix_2norm(_image_view(arr), tol=_S_NORM_TOL)
    except ConvergenceError as exc:
        return exc.best_estimate


def baseline_step(kind: str, x, t: AbcTriple) -> StepResult:
    """One step of a prior reverse-filtering baseline.

    T: x + a; TDA: x + c; S: x + (||a||_M / ||c||_M) c with matrix 2-norms
    taken over the image-shaped views.  A near-zero ||c||_M falls back to a
    zero step flagged singular.
    """
    if kind not in BASELINES:
        raise ConfigError(f"unknown baseline {kind!r}")
    x = np.asarray(x, dtype=np.float64)
    if kind == "T":
        return StepResult(x + t.a, 1.0, 1.0, None, False)
    if kind == "TDA":
        return StepResult(x + t.c, 1.0, 1.0, None, False)
    norm_a = _spectral_norm(t.a)
    norm_c = _spectral_norm(t.c)
    if norm_c < SINGULAR_GUARD * max(1.0, norm_a):
        return StepResult(x + 0.0 * t.c, 0.0, 0.0, None, True)
    lam = norm_a / norm_c
    return StepResult(x + lam * t.c, lam, lam, None, False)


def run_reverse(problem: ReverseProblem, config: RunConfig) -> IterationTrace:
    """Run one (method, schedule, accelerator) combination to completion.

    Divergence (non-finite iterate, or PSNR below the configured floor) ends
    the run with status "diverged"; it is a trace outcome, not an exception.
    Vector methods and the TDA/S baselines cost two filter calls per
    iteration, the T baseline one.
    """
    filt = problem.filter_fn
    ref = problem.reference
    psnr0 = psnr(problem.x0, ref) if ref is not None else None

    baseline = config.method if isinstance(config.method, str) else None
    x = np.array(problem.x0, dtype=np.float64, copy=True)
    state = AfmState(mode=config.accelerator)
    records: list[IterationRecord] = []
    snapshots: dict[int, np.ndarray] = {}
    status, diverged_at = "completed", None

    for n in range(config.max_iters):
        mu = 1.0 if baseline else mu_at(config.schedule, n)
        try:
            if baseline == "T":
                a = problem.x0 - filt(x)
                if not np.all(np.isfinite(a)):
                    raise DivergenceError("filter output is non-finite")
                residual = norm2(a)
                step = StepResult(x + a, 1.0, 1.0, None, False)
            else:
                t = reverse_abc(x, problem)
                residual = norm2(t.a)
                if baseline:
                    step = baseline_step(baseline, x, t)
                else:
                    step = vector_step(config.method, x, t, mu)
            x_next, state = afm_advance(state, step.next_x, x)
        except DivergenceError:
            status, diverged_at = "diverged", n
            break

        psnr_n = psnr(x_next, ref) if ref is not None else None
        pct = None
        if psnr_n is not None and psnr0 is not None and psnr0 > 0.0:
            pct = pct_improvement(psnr_n, psnr0)
        records.append(IterationRecord(
            n=n, psnr_db=psnr_n, pct=pct, residual_norm=residual,
            lambda_raw=step.lambda_raw, lambda_clipped=step.lambda_clipped,
            mu=mu, singular=step.singular,
        ))
        if n % config.snapshot_stride == 0:
            snapshots[n] = x_next.copy()
        x = x_next
        if psnr_n is not None and psnr_n < config.divergence_psnr_floor:
            status, diverged_at = "diverged", n
            break

    return IterationTrace(records=records, status=status, diverged_at=diverged_at,
                          psnr0=psnr0, snapshots=snapshots, final_x=x)


def contraction_probe(problem_x: ReverseProblem, problem_y: ReverseProblem,
                      xs, ys, method: Union[MethodSpec, str], mu: float = 1.0,
                      pairs=None) -> list[float]:
    """Empirical contraction ratios of one iteration map across two runs.

    For sampled iterate pairs (x_n, y_m) the ratio
    ||K(x_n) - K(y_m)|| / ||x_n - y_m|| is reported, where K is a single
    method step on the respective problem.  Pairs with a zero denominator
    are skipped.  Diagnostic only; nothing is asserted about the values.
    """
    spec = method if isinstance(method, MethodSpec) else MethodSpec(method)
    kx = [vector_step(spec, v, reverse_abc(v, problem_x), mu).next_x for v in xs]
    ky = [vector_step(spec, v, reverse_abc(v, problem_y), mu).next_x for v in ys]
    if pairs is None:
        pairs = [(i, j) for i in range(len(xs)) for j in range(len(ys))]
    ratios = []
    for i, j in pairs:
        den = norm2(np.asarray(xs[i], dtype=np.float64) - np.asarray(ys[j], dtype=np.float64))
        if den == 0.0:
            continue
        ratios.append(norm2(kx[i] - ky[j]) / den)
    return ratios
