"""Dense real-vector arithmetic, pair-based vector inverses, and the matrix 2-norm.

Vectors are numpy float64 arrays.  Arrays of any shape are accepted and
treated as flat vectors; paired arguments must have identical shapes.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError, DimensionError, SingularError

# Catastrophic-division guard, relative to the scale of the denominator's
# factors.  Anything larger is left to the caller's hard limiter.
SINGULAR_GUARD = 1e-300


def as_vector(data) -> np.ndarray:
    """Coerce to a float64 array with at least one finite entry."""
    v = np.asarray(data, dtype=np.float64)
    if v.size == 0:
        raise DimensionError("vector must have at least one entry")
    if not np.all(np.isfinite(v)):
        raise DimensionError("vector entries must be finite")
    return v


def _check_same_shape(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape != y.shape:
        raise DimensionError(f"shape mismatch: {x.shape} vs {y.shape}")


def inner(x, y) -> float:
    """Inner product x.y of two equally-shaped arrays."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_same_shape(x, y)
    return float(np.vdot(x, y))


def norm2(x) -> float:
    """Euclidean norm of a flat vector view of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    return float(np.sqrt(np.vdot(x, x)))


def guarded_denominator(value: float, scale: float) -> float:
    """Return ``value`` unless it is singular relative to ``scale``.

    ``scale`` should be the product of the norms of the two factors that
    produced ``value``; a denominator below ``SINGULAR_GUARD * max(1, scale)``
    raises :class:`SingularError`.
    """
    if abs(value) < SINGULAR_GUARD * max(1.0, scale):
        raise SingularError(f"denominator {value!r} below singularity guard")
    return value


def brezinski_inverse(c, v) -> np.ndarray:
    """Inverse of ``c`` defined through the vector pair ``(v, c)``: v / (v.c).

    The result satisfies inner(result, c) == 1 whenever v.c is nonzero.
    Choosing ``v = c`` gives the Samelson inverse c / ||c||^2.
    """
    c = np.asarray(c, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _check_same_shape(c, v)
    d = float(np.vdot(v, c))
    guarded_denominator(d, norm2(v) * norm2(c))
    return v / d


def geometric_sandwich(x, y) -> np.ndarray:
    """Sandwich product xyx of the geometric product: 2 (x.y) x - ||x||^2 y."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_same_shape(x, y)
    d = float(np.vdot(x, y))
    n = float(np.vdot(x, x))
    return 2.0 * d * x - n * y


def matrix_2norm(m, tol: float = 1e-10, max_iter: int = 1000) -> float:
    """Largest singular value of a matrix, by power iteration on m^T m.

    The start vector is the deterministic normalized all-ones vector, so
    repeated calls are bit-identical.  Iteration stops once the relative
    change of the Rayleigh quotient drops below ``tol``; if ``max_iter``
    sweeps are not enough, :class:`ConvergenceError` is raised carrying the
    best estimate so far.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise DimensionError("expected a non-empty 2-D matrix")
    if not np.all(np.isfinite(m)):
        raise DimensionError("matrix entries must be finite")

    v = np.ones(m.shape[1]) / np.sqrt(m.shape[1])
    sigma_sq_prev = None
    sigma_sq = 0.0
    for _ in range(max_iter):
        w = m @ v
        sigma_sq = float(np.vdot(w, w))
        if sigma_sq == 0.0:
            return 0.0
        if sigma_sq_prev is not None and abs(sigma_sq - sigma_sq_prev) <= tol * sigma_sq:
            return float(np.sqrt(sigma_sq))
        sigma_sq_prev = sigma_sq
        v = m.T @ w
        nv = norm2(v)
        if nv == 0.0:
            return float(np.sqrt(sigma_sq))
        v = v / nv
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} sweeps",
        best_estimate=float(np.sqrt(sigma_sq)),
    )
