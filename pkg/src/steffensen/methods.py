"""Steffensen-type fixed-point acceleration steps, scalar and vector.

The vector catalog covers twelve iterations built from the residuals of two
map evaluations,

    a = phi(x) - x,    b = phi(phi(x)) - phi(x),    c = a - b,

each of the form ``base + lambda * z`` where the base point is one of
``x``, ``phi(x)``, ``phi(phi(x))``, the update ``z`` is one of ``a, b, c``,
and ``lambda`` is a ratio of inner products of the residuals.  The EPS
method uses two scalars.  A hard limiter caps ``|lambda|`` at ``tau``; a
relaxation factor ``mu`` multiplies only the clipped scalar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import ConfigError, DivergenceError, SingularError
from .vector_ops import geometric_sandwich, guarded_denominator, inner

METHOD_IDS = ("A1", "A2", "A3", "A4", "B1", "B2", "B3", "B4", "C1", "C2", "C3", "EPS")

GEOMETRIC_CASES = (
    "A1.1-G", "A1.2-G", "A2.1-G", "A2.2-G", "A2.3-G",
    "A2.4-G", "A2.5-G", "A2.6-G", "A3.1-G", "A3.2-G",
)

# method -> (base point, update vector, numerator dot, denominator dot)
# Dot keys name inner products of the residuals, e.g. "ac" = a.c.
_CATALOG = {
    "A1": ("x", "a", "aa", "ac"),
    "A2": ("x", "a", "ac", "cc"),
    "A3": ("x", "a", "ab", "bc"),
    "A4": ("phi2", "a", "bb", "ac"),
    "B1": ("x", "b", "aa", "bc"),
    "B2": ("phi", "b", "ac", "cc"),
    "B3": ("phi", "b", "ab", "bc"),
    "B4": ("phi", "b", "aa", "ac"),
    "C1": ("x", "c", "aa", "cc"),
    "C2": ("phi", "c", "ab", "cc"),
    "C3": ("phi2", "c", "bb", "cc"),
}


@dataclass(frozen=True)
class MethodSpec:
    """One of the twelve vector methods plus its limiter bound."""

    method: str
    tau: float = 0.75

    def __post_init__(self):
        if self.method not in METHOD_IDS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHOD_IDS}")
        if not (self.tau > 0.0):
            raise ConfigError("tau must be positive (math.inf disables clipping)")


@dataclass(frozen=True)
class AbcTriple:
    """Residual vectors and map values of one acceleration step."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    phi_x: np.ndarray
    phi_phi_x: np.ndarray


@dataclass(frozen=True)
class StepResult:
    next_x: np.ndarray
    lambda_raw: float
    lambda_clipped: float
    eta: float | None
    singular: bool


def _as_spec(method: Union[str, MethodSpec]) -> MethodSpec:
    if isinstance(method, MethodSpec):
        return method
    return MethodSpec(method)


def _finite(arr: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(arr)))


def scalar_steffensen_step(phi: Callable[[float], float], x: float) -> float:
    """One Steffensen step for the scalar fixed-point iteration of ``phi``.

    Returns x - (phi(x) - x)^2 / (phi(phi(x)) - 2 phi(x) + x).
    """
    p = phi(x)
    pp = phi(p)
    den = pp - 2.0 * p + x
    if den == 0.0:
        raise SingularError("zero second difference in scalar step")
    return x - (p - x) ** 2 / den


def parametric_steffensen_step(phi: Callable[[float], float], x: float, mu: float) -> float:
    """Steffensen step applied to the relaxed map y + mu * (phi(y) - y).

    ``mu = 1`` reduces exactly to :func:`scalar_steffensen_step`.
    """
    if not (mu > 0.0):
        raise ConfigError("mu must be positive")
    if mu == 1.0:
        return scalar_steffensen_step(phi, x)

    def relaxed(y: float) -> float:
        return y + mu * (phi(y) - y)

    return scalar_steffensen_step(relaxed, x)


def wynn_k2_scalar(x_n: float, x_n1: float, x_n2: float) -> float:
    """Two-term epsilon extrapolation of a scalar sequence.

    Returns x_{n+1} + (x_{n+2} - x_{n+1})(x_{n+1} - x_n) / (2 x_{n+1} - x_{n+2} - x_n).
    """
    den = 2.0 * x_n1 - x_n2 - x_n
    if den == 0.0:
        raise SingularError("zero second difference in extrapolation")
    return x_n1 + (x_n2 - x_n1) * (x_n1 - x_n) / den


def compute_abc(phi: Callable[[np.ndarray], np.ndarray], x) -> AbcTriple:
    """Evaluate ``phi`` exactly twice and assemble the residual triple."""
    x = np.asarray(x, dtype=np.float64)
    phi_x = np.asarray(phi(x), dtype=np.float64)
    if not _finite(phi_x):
        raise DivergenceError("phi(x) contains non-finite entries")
    a = phi_x - x
    phi_phi_x = np.asarray(phi(phi_x), dtype=np.float64)
    if not _finite(phi_phi_x):
        raise DivergenceError("phi(phi(x)) contains non-finite entries")
    b = phi_phi_x - phi_x
    c = a - b
    if not (_finite(a) and _finite(c)):
        raise DivergenceError("residuals overflowed")
    return AbcTriple(a=a, b=b, c=c, phi_x=phi_x, phi_phi_x=phi_phi_x)


def _dots(t: AbcTriple) -> dict[str, float]:
    return {
        "aa": inner(t.a, t.a),
        "bb": inner(t.b, t.b),
        "cc": inner(t.c, t.c),
        "ab": inner(t.a, t.b),
        "ac": inner(t.a, t.c),
        "bc": inner(t.b, t.c),
    }


def _den_scale(key: str, d: dict[str, float]) -> float:
    u, v = key[0], key[1]
    return math.sqrt(d[u + u]) * math.sqrt(d[v + v])


def lambda_for(method: Union[str, MethodSpec], t: AbcTriple) -> tuple[float, float | None]:
    """Step scalar(s) of a method for the given residual triple.

    Returns ``(lam, None)`` for the eleven single-scalar methods and
    ``(lam, eta)`` for EPS.  Raises :class:`SingularError` when the
    denominator is below the singularity guard; callers normally fall back
    to a zero step in that case.
    """
    spec = _as_spec(method)
    d = _dots(t)
    if spec.method == "EPS":
        den = guarded_denominator(d["cc"], d["cc"])
        return d["aa"] / den, d["bb"] / den
    _, _, num_key, den_key = _CATALOG[spec.method]
    den = guarded_denominator(d[den_key], _den_scale(den_key, d))
    return d[num_key] / den, None


def hard_limit(lam: float, tau: float) -> float:
    """Clip a step scalar to sign(lam) * min(tau, |lam|)."""
    return math.copysign(min(tau, abs(lam)), lam)


def _base_point(key: str, x: np.ndarray, t: AbcTriple) -> np.ndarray:
    if key == "x":
        return x
    if key == "phi":
        return t.phi_x
    return t.phi_phi_x


def vector_step(method: Union[str, MethodSpec], x, t: AbcTriple, mu: float = 1.0) -> StepResult:
    """Apply one vector method step ``base + mu * clipped_lambda * z``.

    On a singular denominator the scalars fall back to zero, so the step
    degrades to the method's base point and the result is flagged singular.
    ``mu`` scales only the clipped scalar(s), never the base point.
    """
    spec = _as_spec(method)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != t.a.shape:
        raise ConfigError("triple does not match the iterate's shape")

    singular = False
    try:
        lam, eta = lambda_for(spec, t)
    except SingularError:
        lam, eta = 0.0, (0.0 if spec.method == "EPS" else None)
        singular = True

    lam_hat = hard_limit(lam, spec.tau)
    with np.errstate(over="ignore", invalid="ignore"):
        if spec.method == "EPS":
            eta_hat = hard_limit(eta, spec.tau)
            next_x = t.phi_x + (mu * lam_hat) * t.b - (mu * eta_hat) * t.a
            eta_out: float | None = eta_hat
        else:
            base_key, vec_key, _, _ = _CATALOG[spec.method]
            base = _base_point(base_key, x, t)
            z = getattr(t, {"a": "a", "b": "b", "c": "c"}[vec_key])
            next_x = base + (mu * lam_hat) * z
            eta_out = None

    if not _finite(next_x):
        raise DivergenceError("step produced non-finite entries")
    return StepResult(next_x=next_x, lambda_raw=lam, lambda_clipped=lam_hat,
                      eta=eta_out, singular=singular)


def geometric_step(case: str, x, t: AbcTriple) -> np.ndarray:
    """One step of a geometric-product vectorization case.

    Each case evaluates its expanded product formula literally; all ten
    collapse numerically onto the C1, C3, or EPS catalog methods.
    """
    if case not in GEOMETRIC_CASES:
        raise ConfigError(f"unknown geometric case {case!r}")
    x = np.asarray(x, dtype=np.float64)
    a, b, c = t.a, t.b, t.c
    d = _dots(t)
    cc = guarded_denominator(d["cc"], d["cc"])
    aa, bb, ab = d["aa"], d["bb"], d["ab"]

    if case == "A1.1-G":
        return x + (aa / cc) * c
    if case == "A1.2-G":
        return x + geometric_sandwich(a, c) / cc
    if case == "A2.1-G":
        return t.phi_x + (2.0 * ab * a - aa * b - bb * a) / cc
    if case == "A2.2-G":
        return t.phi_x + (aa * b - bb * a) / cc
    if case == "A2.3-G":
        return t.phi_x + (aa * b - bb * a) / cc
    if case == "A2.4-G":
        return t.phi_x + (aa * b - 2.0 * ab * b + bb * a) / cc
    if case == "A2.5-G":
        return t.phi_x + (aa * b - 2.0 * ab * b + bb * a) / cc
    if case == "A2.6-G":
        return t.phi_x + (2.0 * ab * a - bb * a - aa * b) / cc
    if case == "A3.1-G":
        return t.phi_phi_x + (bb / cc) * c
    return t.phi_phi_x + geometric_sandwich(b, c) / cc  # A3.2-G


def anderson2_step(x, t: AbcTriple) -> np.ndarray:
    """Depth-two Anderson mixing of the two map values.

    The mixing weight solves the one-dimensional residual least-squares
    problem: theta = -b.c / ||c||^2, and the step returns
    theta * phi(x) + (1 - theta) * phi(phi(x)).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != t.a.shape:
        raise ConfigError("triple does not match the iterate's shape")
    d = _dots(t)
    cc = guarded_denominator(d["cc"], d["cc"])
    theta = -d["bc"] / cc
    return theta * t.phi_x + (1.0 - theta) * t.phi_phi_x
