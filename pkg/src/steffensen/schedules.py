"""Relaxation-factor schedules and first-order momentum wrappers."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DivergenceError

SCHEDULE_KINDS = ("constant", "ed1", "ed2", "chebyshev")
ACCEL_MODES = ("none", "nesterov", "afm")

# Below this the Chebyshev reciprocal is treated as infinite, so the min()
# clamp pins the value at 2.
_CHEBYSHEV_EPS = 1e-12


@dataclass(frozen=True)
class ScheduleSpec:
    """Rule mapping the iteration index to the relaxation factor mu."""

    kind: str
    mu: float = 1.0      # constant value
    total: int = 1       # iteration budget N for the decaying schedules
    period: int = 64     # Chebyshev period P

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "constant" and not (self.mu > 0.0):
            raise ConfigError("constant mu must be positive")
        if self.kind in ("ed1", "ed2") and self.total < 1:
            raise ConfigError("total iteration count must be >= 1")
        if self.kind == "chebyshev" and self.period < 2:
            raise ConfigError("chebyshev period must be >= 2")


def mu_at(spec: ScheduleSpec, n: int) -> float:
    """Relaxation factor at iteration ``n`` (0-based).

    ed-1 decays from 2 toward 1, ed-2 from 2 toward 0, both over the budget
    ``total``.  The Chebyshev schedule is periodic in ``period`` and clamped
    to (0, 2]; the index is reduced modulo the period so repetition is exact.
    """
    if n < 0:
        raise ConfigError("iteration index must be >= 0")
    if spec.kind == "constant":
        return spec.mu
    if spec.kind == "ed1":
        return 1.0 + math.exp(-((2.0 * n / spec.total) ** 2))
    if spec.kind == "ed2":
        return 2.0 * math.exp(-((2.0 * n / spec.total) ** 2))
    k = (n + 1) % spec.period
    den = 1.0 + math.cos(2.0 * math.pi * k / spec.period)
    if den < _CHEBYSHEV_EPS:
        return 2.0
    return 2.0 * min(1.0, 1.0 / den)


@dataclass(frozen=True)
class AfmState:
    """Momentum carry-over between iterations; a plain value, never mutated."""

    mode: str = "afm"
    t_prev: float = 1.0
    u_prev: np.ndarray | None = None

    def __post_init__(self):
        if self.mode not in ACCEL_MODES:
            raise ConfigError(f"unknown acceleration mode {self.mode!r}")


def afm_advance(state: AfmState, u_next, x_n) -> tuple[np.ndarray, AfmState]:
    """Combine the raw step ``u_next`` with momentum and advance the state.

    With t' = (1 + sqrt(1 + 4 t^2)) / 2 and beta = (t - 1)/t', gamma = t/t',
    the accelerated iterate is

        x' = u_next + beta * (u_next - u_prev) + gamma * (u_next - x_n).

    Nesterov mode forces gamma = 0; mode "none" passes ``u_next`` through
    unchanged.  The first call has t = 1, hence beta = 0.
    """
    u_next = np.asarray(u_next, dtype=np.float64)
    x_n = np.asarray(x_n, dtype=np.float64)
    if u_next.shape != x_n.shape:
        raise ConfigError("u_next and x_n must have the same shape")

    if state.mode == "none":
        return u_next, replace(state, u_prev=u_next)

    t = state.t_prev
    t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
    beta = (t - 1.0) / t_next
    gamma = 0.0 if state.mode == "nesterov" else t / t_next
    u_prev = u_next if state.u_prev is None else state.u_prev

    with np.errstate(over="ignore", invalid="ignore"):
        x_next = u_next + beta * (u_next - u_prev) + gamma * (u_next - x_n)
    if not np.all(np.isfinite(x_next)):
        raise DivergenceError("momentum update produced non-finite entries")
    return x_next, AfmState(mode=state.mode, t_prev=t_next, u_prev=u_next)
