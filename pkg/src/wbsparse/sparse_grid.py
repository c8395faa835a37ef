"""Sparse wavelet index sets driven by smoothness gap and exponential decay.

For a level j the gap ``D(j) = delta2(j) - delta1(j)`` and tolerance ``eps`` give
the threshold ``T(j) = -D(j) ln 2 - ln eps``.  The level is kept when ``T(j) >= 0``
and then holds every translation with ``b |m / 2^j|_1 <= T(j)``.  Dropping all other
coefficients costs at most ``max_j 2^{-D(j)} max_{m not kept} exp(-b |m / 2^j|_1)``
times the function's weighted norm, and that factor stays below ``eps``.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .index_calculus import IndexNorm, norm_from_json, norm_to_json
from .wavelets import CoefficientField, WaveletBasis, worker_count

__all__ = [
    "GridParams",
    "SparseGrid",
    "GridTruncationError",
    "GRID_TOL",
    "level_threshold",
    "build_grid",
    "error_bound",
    "truncate",
    "grid_centers",
    "center_rows",
    "centers_csv",
    "grid_to_json",
    "grid_from_json",
]

# Log-space slack for boundary ties (T == 0, or m exactly on the ball's surface).
GRID_TOL = 5e-13


class GridTruncationError(RuntimeError):
    """Admissible levels reach the level cap; the grid would be silently truncated."""


@dataclass(frozen=True)
class GridParams:
    dim: int
    delta1: IndexNorm
    delta2: IndexNorm
    b_w: float
    epsilon: float

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not self.b_w > 0:
            raise ValueError(f"b_w must be positive, got {self.b_w}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        probe = _cube(self.dim, 4)
        if np.any(self.gap(probe) < -1e-12):
            raise ValueError("delta2 must dominate delta1 on every level")

    def gap(self, levels) -> np.ndarray:
        return self.delta2.evaluate(levels) - self.delta1.evaluate(levels)

    def thresholds(self, levels) -> np.ndarray:
        return -self.gap(levels) * math.log(2.0) - math.log(self.epsilon)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "delta1": norm_to_json(self.delta1),
            "delta2": norm_to_json(self.delta2),
            "b_w": self.b_w,
            "epsilon": self.epsilon,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GridParams":
        return cls(
            dim=int(obj["dim"]),
            delta1=norm_from_json(obj["delta1"]),
            delta2=norm_from_json(obj["delta2"]),
            b_w=float(obj["b_w"]),
            epsilon=float(obj["epsilon"]),
        )


def _cube(dim: int, cap: int) -> np.ndarray:
    """All levels with |j|_inf <= cap, lexicographic, as an (n, dim) array."""
    return np.indices((cap + 1,) * dim).reshape(dim, -1).T


@dataclass(frozen=True, eq=False)
class SparseGrid:
    params: GridParams
    levels: dict  # level tuple -> (K, d) int array of translations, lexicographic
    level_cap: int = 32

    @property
    def total_points(self) -> int:
        return int(sum(len(v) for v in self.levels.values()))

    @cached_property
    def _members(self) -> frozenset:
        return frozenset((j, tuple(int(v) for v in m)) for j, M in self.levels.items() for m in M)

    def contains(self, j, m) -> bool:
        return (tuple(int(v) for v in j), tuple(int(v) for v in m)) in self._members

    def pairs(self) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
        return sorted(self._members)

    def __repr__(self) -> str:
        return f"SparseGrid(levels={len(self.levels)}, total_points={self.total_points})"


def level_threshold(params: GridParams, j: Sequence[int]) -> float:
    """T(j); negative means the level holds no translations."""
    return float(params.thresholds(np.asarray([j]))[0])


def _ball_budget(j: tuple[int, ...], T: float, b: float) -> tuple[int, int]:
    # |m / 2^j|_1 = n / 2^J with the integer n = sum |m_i| 2^(J - j_i).
    J = max(j)
    return J, math.floor((T + GRID_TOL) * 2.0**J / b)


def _ball_members(j: tuple[int, ...], T: float, b: float) -> np.ndarray:
    J, budget = _ball_budget(j, T, b)
    weights = [2 ** (J - ji) for ji in j]
    cands = np.zeros((1, 0), dtype=np.int64)
    used = np.zeros(1, dtype=np.int64)
    for w in weights:
        r = budget // w
        vals = np.arange(-r, r + 1, dtype=np.int64)
        new_used = used[:, None] + np.abs(vals)[None, :] * w
        rows, cols = np.nonzero(new_used <= budget)
        cands = np.hstack([cands[rows], vals[cols, None]])
        used = new_used[rows, cols]
    cands.setflags(write=False)
    return cands


def build_grid(params: GridParams, level_cap: int = 32, workers: int | None = None) -> SparseGrid:
    """Enumerate every admissible level and its translation set exactly.

    Raises GridTruncationError if a level with ``|j|_inf == level_cap`` is still
    admissible, since levels beyond the cap would then be lost.
    """
    if level_cap < 0:
        raise ValueError("level_cap must be >= 0")
    cube = _cube(params.dim, level_cap)
    T = params.thresholds(cube)
    keep = T >= -GRID_TOL
    on_face = cube.max(axis=1) == level_cap
    if np.any(keep & on_face):
        bad = tuple(int(v) for v in cube[np.argmax(keep & on_face)])
        raise GridTruncationError(
            f"level {bad} on the cap |j|_inf = {level_cap} is admissible; raise level_cap "
            "or use a smoothness gap that grows with the level"
        )
    todo = [(tuple(int(v) for v in j), float(t)) for j, t in zip(cube[keep], T[keep])]

    def members(item):
        j, t = item
        return j, _ball_members(j, t, params.b_w)

    n = worker_count(workers)
    if n > 1 and len(todo) > 1:
        with ThreadPoolExecutor(n) as pool:
            results = list(pool.map(members, todo))
    else:
        results = [members(item) for item in todo]
    levels = {j: M for j, M in sorted(results) if len(M)}
    return SparseGrid(params, levels, level_cap)


def error_bound(params: GridParams, grid: SparseGrid, p: float = 2.0) -> float:
    """``max_j 2^{-D(j)} max_{m not in G_j} exp(-b |m / 2^j|_1)``.

    Retained levels contribute through the closest excluded translation, which sits
    on the finest axis just outside the ball; empty levels contribute ``2^{-D(j)}``
    (m = 0 excluded).  Levels beyond the cap dominate a level on the cap face, so
    a gap that is nondecreasing in every coordinate bounds them by the cube values.
    ``p`` does not enter the factor for exponential weights.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    cube = _cube(params.dim, grid.level_cap)
    gap = params.gap(cube)
    T = params.thresholds(cube)
    shape = (grid.level_cap + 1,) * params.dim
    G = gap.reshape(shape)
    for axis in range(params.dim):
        if np.any(np.diff(G, axis=axis) < -1e-12):
            raise ValueError("smoothness gap decreases along an axis; tail of the bound is not controlled")
    best = 0.0
    for j, d, t in zip(cube, gap, T):
        key = tuple(int(v) for v in j)
        if key in grid.levels:
            J, budget = _ball_budget(key, float(t), params.b_w)
            r = (budget + 1) / 2.0**J
            term = 2.0**-d * math.exp(-params.b_w * r)
        else:
            term = 2.0**-d
        best = max(best, term)
    return best


def truncate(coeffs: CoefficientField, grid: SparseGrid) -> CoefficientField:
    """Keep only the entries whose (j, m) belongs to the grid."""
    if coeffs.dim != grid.params.dim:
        raise ValueError(f"field dimension {coeffs.dim} does not match grid dimension {grid.params.dim}")
    return coeffs.filtered(grid.contains)


def _support_length(basis) -> float:
    return float(basis.support_length) if isinstance(basis, WaveletBasis) else float(basis)


def center_rows(grid: SparseGrid, basis: WaveletBasis | float) -> list[tuple]:
    """Rows (x_1..x_d, j_1..j_d, m_1..m_d) sorted lexicographically.

    The center of psi_{j,m} is the midpoint of its support,
    ``2^{-s_i} (m_i + support_length / 2)`` with ``s_i = max(j_i - 1, 0)``.
    """
    half = _support_length(basis) / 2.0
    rows = []
    for j, M in grid.levels.items():
        scale = np.array([2.0 ** -max(v - 1, 0) for v in j])
        X = (M + half) * scale
        for x, m in zip(X.tolist(), M.tolist()):
            rows.append((*x, *j, *m))
    rows.sort()
    return rows


def grid_centers(grid: SparseGrid, basis: WaveletBasis | float) -> np.ndarray:
    """Support midpoints of all grid wavelets, (total_points, d), sorted."""
    d = grid.params.dim
    rows = center_rows(grid, basis)
    return np.array([r[:d] for r in rows], dtype=float).reshape(len(rows), d)


def centers_csv(grid: SparseGrid, basis: WaveletBasis | float) -> str:
    d = grid.params.dim
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"x{i}" for i in range(1, d + 1)] + [f"j{i}" for i in range(1, d + 1)] + [f"m{i}" for i in range(1, d + 1)])
    for row in center_rows(grid, basis):
        writer.writerow([repr(float(v)) for v in row[:d]] + [str(v) for v in row[d:]])
    return buf.getvalue()


def grid_to_json(grid: SparseGrid) -> dict:
    return {
        "params": grid.params.to_json(),
        "levels": [{"j": list(j), "members": M.tolist()} for j, M in grid.levels.items()],
        "total_points": grid.total_points,
    }


def grid_from_json(obj: dict, level_cap: int = 32) -> SparseGrid:
    params = GridParams.from_json(obj["params"])
    levels = {}
    for entry in obj["levels"]:
        M = np.array(entry["members"], dtype=np.int64).reshape(-1, params.dim)
        M.setflags(write=False)
        levels[tuple(entry["j"])] = M
    grid = SparseGrid(params, dict(sorted(levels.items())), level_cap)
    if grid.total_points != obj.get("total_points", grid.total_points):
        raise ValueError("total_points does not match the stored members")
    return grid
