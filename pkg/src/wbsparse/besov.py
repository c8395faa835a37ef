"""Exponential weights and the weighted Besov sequence quasinorm."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .index_calculus import IndexNorm, check_smoothness_bound
from .wavelets import CoefficientField

__all__ = [
    "ExponentialWeight",
    "DyadicBox",
    "BesovParams",
    "weight_measure",
    "box_weights",
    "sequence_quasinorm",
    "lpw_error",
]


@dataclass(frozen=True)
class ExponentialWeight:
    """w(x) = exp(rate * |x|_1); its translation growth constant equals ``rate``."""

    rate: float

    def __post_init__(self):
        if not self.rate >= 0 or not math.isfinite(self.rate):
            raise ValueError(f"weight rate must be finite and non-negative, got {self.rate}")

    @property
    def c_w(self) -> float:
        return self.rate

    def __call__(self, x) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        return np.exp(self.rate * np.abs(pts).sum(axis=1))


@dataclass(frozen=True)
class DyadicBox:
    """prod_i [2**-j_i * m_i, 2**-j_i * (m_i + 1))."""

    j: tuple[int, ...]
    m: tuple[int, ...]

    def __post_init__(self):
        if len(self.j) != len(self.m):
            raise ValueError("level and translation dimensions differ")
        if any(v < 0 for v in self.j):
            raise ValueError(f"levels must be non-negative, got {self.j}")

    @property
    def bounds(self) -> list[tuple[float, float]]:
        return [(m * 2.0**-j, (m + 1) * 2.0**-j) for j, m in zip(self.j, self.m)]

    @property
    def volume(self) -> float:
        return 2.0 ** -sum(self.j)


def _interval_integral(b: float, a, c) -> np.ndarray:
    """Integral of exp(b|x|) over [a, c]; vectorised over the endpoints."""
    a = np.asarray(a, dtype=float)
    c = np.asarray(c, dtype=float)
    if b == 0:
        return c - a
    lo_pos = np.maximum(a, 0.0)
    hi_pos = np.maximum(c, 0.0)
    lo_neg = np.minimum(a, 0.0)
    hi_neg = np.minimum(c, 0.0)
    # e^{b lo} (e^{b (hi - lo)} - 1) / b on the positive part, mirrored on the negative part.
    pos = np.exp(b * lo_pos) * np.expm1(b * (hi_pos - lo_pos)) / b
    neg = np.exp(-b * hi_neg) * np.expm1(b * (hi_neg - lo_neg)) / b
    return pos + neg


def box_weights(rate: float, j: Sequence[int], M: np.ndarray) -> np.ndarray:
    """w(Q_{j,m}) for every row m of the (K, d) translation array M."""
    M = np.atleast_2d(np.asarray(M))
    out = np.ones(M.shape[0])
    for i, ji in enumerate(j):
        width = 2.0 ** -int(ji)
        out *= _interval_integral(rate, M[:, i] * width, (M[:, i] + 1) * width)
    return out


def weight_measure(weight: ExponentialWeight, box: DyadicBox) -> float:
    """Exact weighted measure of a dyadic box."""
    return float(box_weights(weight.rate, box.j, np.array([box.m]))[0])


@dataclass(frozen=True)
class BesovParams:
    p: float
    q: float
    delta: IndexNorm
    weight: ExponentialWeight = field(default_factory=lambda: ExponentialWeight(0.0))
    L: int = 1
    dim: int | None = None
    # Exponential decay rate available from the wavelets; compact support means unlimited.
    decay_rate: float = math.inf

    def __post_init__(self):
        for name in ("p", "q"):
            v = getattr(self, name)
            if not v >= 1:
                raise ValueError(f"{name} must be >= 1 (got {v})")
        if self.L < 1:
            raise ValueError("L must be a positive integer")
        if not check_smoothness_bound(self.delta, self.L, 4, self.dim):
            raise ValueError(f"smoothness norm violates delta(j) < {self.L}|j|_1")
        c_w = self.weight.c_w
        if c_w > 0 and self.p > 1:
            needed = max(c_w / (self.p - 1), c_w / self.p)
            if not needed < self.decay_rate:
                warnings.warn(
                    f"weight growth {c_w} exceeds the wavelet decay budget {self.decay_rate} for p={self.p}",
                    RuntimeWarning,
                    stacklevel=2,
                )


def sequence_quasinorm(coeffs: CoefficientField, params: BesovParams) -> float:
    """Discrete weighted Besov quasinorm of a coefficient field.

    Per level k the inner term is ``S_k = sum_m |lambda|^p 2^{p|k|_1/2} w(Q_{k,m})``
    (sup over m of ``|lambda| 2^{|k|_1/2}`` when p is infinite); the levels are
    combined as ``(sum_k 2^{q delta(k)} S_k^{q/p})^{1/q}`` or a sup when q is infinite.
    """
    p, q = float(params.p), float(params.q)
    if p < 1 or q < 1:
        raise ValueError("p and q must be >= 1")
    if not len(coeffs):
        return 0.0
    levels = coeffs.by_level()
    keys = sorted(levels)
    deltas = params.delta.evaluate(np.array(keys))
    level_terms = []
    for key, delta in zip(keys, deltas):
        M, lam = levels[key]
        half = sum(key) / 2.0
        if math.isinf(p):
            inner = float(np.max(np.abs(lam))) * 2.0**half
        else:
            w = box_weights(params.weight.rate, key, M)
            s = float(np.sum(np.abs(lam) ** p * w)) * 2.0 ** (p * half)
            inner = s ** (1.0 / p)
        level_terms.append((delta, inner))
    if math.isinf(q):
        return max(2.0**delta * inner for delta, inner in level_terms)
    total = math.fsum(2.0 ** (q * delta) * inner**q for delta, inner in level_terms)
    return total ** (1.0 / q)


def _trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = h / 2
    return w


def lpw_error(
    f: Callable[[np.ndarray], np.ndarray],
    g: Callable[[np.ndarray], np.ndarray],
    p: float,
    weight: ExponentialWeight,
    box_radius: float,
    samples_per_axis: int,
    dim: int = 1,
    chunk: int = 1 << 20,
) -> float:
    """Trapezoid estimate of ||f - g||_{L^p_w} on [-box_radius, box_radius]^dim."""
    if samples_per_axis < 8:
        raise ValueError("samples_per_axis must be >= 8")
    if p < 1:
        raise ValueError("p must be >= 1")
    axis = np.linspace(-box_radius, box_radius, samples_per_axis)
    w1 = _trapezoid_weights(samples_per_axis, axis[1] - axis[0])
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    wq = np.ones(1)
    for _ in range(dim):
        wq = np.multiply.outer(wq, w1).ravel()
    diff = np.empty(pts.shape[0])
    for a in range(0, pts.shape[0], chunk):
        P = pts[a : a + chunk]
        diff[a : a + chunk] = np.abs(np.asarray(f(P), dtype=float) - np.asarray(g(P), dtype=float))
    if math.isinf(p):
        return float(diff.max())
    total = np.sum(diff**p * weight(pts) * wq)
    return float(total ** (1.0 / p))
