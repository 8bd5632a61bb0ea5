"""Deterministic grayscale image filters used as black-box maps.

All filters take and return float64 matrices, use symmetric (mirror)
padding, preserve constant images, and accept any finite input, including
values outside [0, 1]; quantization belongs to image I/O, not here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.ndimage import convolve1d

from .errors import ConfigError, DimensionError

# Kernel and window truncation, in standard deviations.
_TRUNCATE = 3.0

FILTER_KINDS = ("gaussian", "box", "guided", "bilateral")


@dataclass(frozen=True)
class FilterSpec:
    """Parameters of one built-in filter."""

    kind: str
    sigma: float = 0.0
    r: int = 0
    eps: float = 0.0
    sigma_s: float = 0.0
    sigma_r: float = 0.0

    def __post_init__(self):
        if self.kind == "gaussian":
            if not (self.sigma > 0.0):
                raise ConfigError("gaussian requires sigma > 0")
        elif self.kind == "box":
            if self.r < 1:
                raise ConfigError("box requires integer radius r >= 1")
        elif self.kind == "guided":
            if self.r < 1 or not (self.eps > 0.0):
                raise ConfigError("guided requires r >= 1 and eps > 0")
        elif self.kind == "bilateral":
            if not (self.sigma_s > 0.0 and self.sigma_r > 0.0):
                raise ConfigError("bilateral requires sigma_s > 0 and sigma_r > 0")
        else:
            raise ConfigError(f"unknown filter kind {self.kind!r}")

    @classmethod
    def gaussian(cls, sigma: float) -> "FilterSpec":
        return cls(kind="gaussian", sigma=float(sigma))

    @classmethod
    def box(cls, r: int) -> "FilterSpec":
        return cls(kind="box", r=int(r))

    @classmethod
    def guided(cls, r: int, eps: float) -> "FilterSpec":
        return cls(kind="guided", r=int(r), eps=float(eps))

    @classmethod
    def bilateral(cls, sigma_s: float, sigma_r: float) -> "FilterSpec":
        return cls(kind="bilateral", sigma_s=float(sigma_s), sigma_r=float(sigma_r))

    def label(self) -> str:
        """File-safe short name, e.g. ``gaussian_s1.0``."""
        if self.kind == "gaussian":
            return f"gaussian_s{self.sigma:g}"
        if self.kind == "box":
            return f"box_r{self.r}"
        if self.kind == "guided":
            return f"guided_r{self.r}_e{self.eps:g}"
        return f"bilateral_s{self.sigma_s:g}_r{self.sigma_r:g}"


def _as_image(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise DimensionError("expected a non-empty 2-D image")
    return img


def gaussian_blur(img, sigma: float, mode: str = "reflect") -> np.ndarray:
    """Separable Gaussian convolution, kernel truncated at 3 sigma.

    ``mode`` follows scipy.ndimage semantics; "reflect" is the symmetric
    padding used by the public filter interface, "wrap" gives periodic
    boundaries under which the image mean is preserved exactly.
    """
    img = _as_image(img)
    radius = int(math.ceil(_TRUNCATE * sigma))
    taps = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (taps / sigma) ** 2)
    kernel /= kernel.sum()
    out = convolve1d(img, kernel, axis=0, mode=mode)
    return convolve1d(out, kernel, axis=1, mode=mode)


def box_mean(img, r: int) -> np.ndarray:
    """Mean over the (2r+1)^2 window, symmetric padding, via integral image."""
    img = _as_image(img)
    k = 2 * r + 1
    padded = np.pad(img, r, mode="symmetric")
    s = padded.cumsum(axis=0).cumsum(axis=1)
    s = np.pad(s, ((1, 0), (1, 0)))
    h, w = img.shape
    total = s[k:k + h, k:k + w] - s[:h, k:k + w] - s[k:k + h, :w] + s[:h, :w]
    return total / (k * k)


def guided_self(img, r: int, eps: float) -> np.ndarray:
    """Edge-aware smoothing with the image acting as its own guide.

    Standard guided filter with guide p = I: per-window linear coefficients
    gain = var / (var + eps) and bias = (1 - gain) * mean are box-averaged
    before recombination.
    """
    img = _as_image(img)
    mean = box_mean(img, r)
    mean_sq = box_mean(img * img, r)
    var = mean_sq - mean * mean
    gain = var / (var + eps)
    bias = mean - gain * mean
    return box_mean(gain, r) * img + box_mean(bias, r)


def bilateral(img, sigma_s: float, sigma_r: float) -> np.ndarray:
    """Brute-force bilateral filter over a (2*ceil(3 sigma_s)+1)^2 window."""
    img = _as_image(img)
    radius = int(math.ceil(_TRUNCATE * sigma_s))
    padded = np.pad(img, radius, mode="symmetric")
    inv_s = -0.5 / (sigma_s * sigma_s)
    inv_r = -0.5 / (sigma_r * sigma_r)
    h, w = img.shape
    num = np.zeros_like(img)
    den = np.zeros_like(img)
    for di in range(-radius, radius + 1):
        for dj in range(-radius, radius + 1):
            shifted = padded[radius + di:radius + di + h, radius + dj:radius + dj + w]
            weight = math.exp(inv_s * (di * di + dj * dj)) * np.exp(inv_r * (shifted - img) ** 2)
            num += weight * shifted
            den += weight
    return num / den


def apply_filter(spec: FilterSpec, img) -> np.ndarray:
    """Apply one built-in filter; deterministic, same output for same input."""
    if not isinstance(spec, FilterSpec):
        raise ConfigError("expected a FilterSpec")
    if spec.kind == "gaussian":
        return gaussian_blur(img, spec.sigma)
    if spec.kind == "box":
        return box_mean(img, spec.r)
    if spec.kind == "guided":
        return guided_self(img, spec.r, spec.eps)
    return bilateral(img, spec.sigma_s, spec.sigma_r)


def make_filter(spec: FilterSpec) -> Callable[[np.ndarray], np.ndarray]:
    """Bind a spec into a plain image -> image callable."""
    if not isinstance(spec, FilterSpec):
        raise ConfigError("expected a FilterSpec")

    def filt(img: np.ndarray) -> np.ndarray:
        return apply_filter(spec, img)

    return filt
