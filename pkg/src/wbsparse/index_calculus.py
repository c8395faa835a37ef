"""Smoothness norms on level multi-indices.

Three families are supported: a weighted l1 norm ``sum(s_i * j_i)``, a scaled
max norm ``s * max(j_i)`` and convex mixtures of two norms.  Every norm can be
evaluated on a single index or, vectorised, on an ``(n, d)`` integer array.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

__all__ = [
    "IndexNorm",
    "WeightedL1",
    "ScaledLinf",
    "Mix",
    "delta_eval",
    "check_smoothness_bound",
    "norm_from_json",
    "norm_to_json",
]


def _as_rows(j) -> np.ndarray:
    arr = np.asarray(j)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"expected a level index or an (n, d) array, got shape {arr.shape}")
    return arr


class IndexNorm:
    """Base class; subclasses implement ``evaluate`` on (n, d) arrays."""

    dim: int | None = None

    def evaluate(self, levels) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, j) -> float:
        return float(self.evaluate(_as_rows(j))[0])

    def _check_dim(self, arr: np.ndarray) -> None:
        if self.dim is not None and arr.shape[1] != self.dim:
            raise ValueError(f"norm of dimension {self.dim} applied to index of dimension {arr.shape[1]}")


@dataclass(frozen=True)
class WeightedL1(IndexNorm):
    s: tuple[float, ...]

    def __post_init__(self):
        s = tuple(float(v) for v in self.s)
        if not s:
            raise ValueError("weight vector must be non-empty")
        if any(v < 0 or not np.isfinite(v) for v in s):
            raise ValueError(f"weights must be finite and non-negative, got {s}")
        object.__setattr__(self, "s", s)

    @property
    def dim(self) -> int:
        return len(self.s)

    def evaluate(self, levels) -> np.ndarray:
        arr = _as_rows(levels)
        self._check_dim(arr)
        return np.abs(arr) @ np.asarray(self.s)


@dataclass(frozen=True)
class ScaledLinf(IndexNorm):
    """``s * max_i |j_i|``; has no intrinsic dimension."""

    s: float

    def __post_init__(self):
        s = float(self.s)
        if s < 0 or not np.isfinite(s):
            raise ValueError(f"scale must be finite and non-negative, got {s}")
        object.__setattr__(self, "s", s)

    @property
    def dim(self) -> None:
        return None

    def evaluate(self, levels) -> np.ndarray:
        arr = _as_rows(levels)
        if arr.shape[1] == 0:
            return np.zeros(arr.shape[0])
        return self.s * np.abs(arr).max(axis=1).astype(float)


@dataclass(frozen=True)
class Mix(IndexNorm):
    """Convex combination ``(1 - theta) * first + theta * second``."""

    theta: float
    first: IndexNorm
    second: IndexNorm

    def __post_init__(self):
        theta = float(self.theta)
        if not 0.0 < theta < 1.0:
            raise ValueError(f"theta must lie in (0, 1), got {theta}")
        object.__setattr__(self, "theta", theta)
        d1, d2 = self.first.dim, self.second.dim
        if d1 is not None and d2 is not None and d1 != d2:
            raise ValueError(f"cannot mix norms of dimensions {d1} and {d2}")

    @property
    def dim(self) -> int | None:
        return self.first.dim if self.first.dim is not None else self.second.dim

    def evaluate(self, levels) -> np.ndarray:
        arr = _as_rows(levels)
        self._check_dim(arr)
        return (1.0 - self.theta) * self.first.evaluate(arr) + self.theta * self.second.evaluate(arr)


def delta_eval(norm: IndexNorm, j: Sequence[int]) -> float:
    """Value of the smoothness norm at the level index ``j``."""
    arr = np.asarray(j)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"level index must be a non-empty vector, got {j!r}")
    return norm(arr)


def check_smoothness_bound(norm: IndexNorm, L: int, probe_radius: int, dim: int | None = None) -> bool:
    """True iff ``norm(j) < L * |j|_1`` for all nonzero j with ``|j|_inf <= probe_radius``.

    The three families are positively homogeneous, so the ratio ``norm(j) / |j|_1``
    is already maximal on the probed box.  A dimension-free norm (built only from
    ``ScaledLinf``) attains its largest ratio on unit vectors, so d = 1 is probed
    when no dimension is given.
    """
    if probe_radius < 1:
        raise ValueError("probe_radius must be >= 1")
    if dim is None:
        dim = norm.dim if norm.dim is not None else 1
    grid = np.array(list(itertools.product(range(probe_radius + 1), repeat=dim)))[1:]
    values = norm.evaluate(grid)
    return bool(np.all(values < L * grid.sum(axis=1)))


JsonNorm = dict


def norm_to_json(norm: IndexNorm) -> JsonNorm:
    if isinstance(norm, WeightedL1):
        return {"type": "weighted_l1", "s": list(norm.s)}
    if isinstance(norm, ScaledLinf):
        return {"type": "scaled_linf", "s": norm.s}
    if isinstance(norm, Mix):
        return {
            "type": "mix",
            "theta": norm.theta,
            "first": norm_to_json(norm.first),
            "second": norm_to_json(norm.second),
        }
    raise TypeError(f"cannot serialise {type(norm).__name__}")


def norm_from_json(obj: Union[JsonNorm, str], max_mix_depth: int | None = None) -> IndexNorm:
    """Build a norm from its JSON form.

    ``max_mix_depth`` limits how deeply ``mix`` nodes may nest (None: unlimited).
    """
    if isinstance(obj, str):
        import json

        obj = json.loads(obj)
    if not isinstance(obj, dict) or "type" not in obj:
        raise ValueError(f"norm description must be an object with a 'type' key, got {obj!r}")
    kind = obj["type"]
    if kind == "weighted_l1":
        return WeightedL1(tuple(obj["s"]))
    if kind == "scaled_linf":
        return ScaledLinf(obj["s"])
    if kind == "mix":
        if max_mix_depth is not None and max_mix_depth < 1:
            raise ValueError("mix nested deeper than allowed")
        child_depth = None if max_mix_depth is None else max_mix_depth - 1
        return Mix(
            obj["theta"],
            norm_from_json(obj["first"], child_depth),
            norm_from_json(obj["second"], child_depth),
        )
    raise ValueError(f"unknown norm type {kind!r}")
