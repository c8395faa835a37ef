"""Daubechies wavelets on R^d: filters, dyadic tables, analysis and synthesis.

Level convention for one coordinate of a tensor wavelet (stored level ``l``):

* ``l == 0``: the scaling function ``phi(x - m)``;
* ``l >= 1``: the wavelet ``2**((l-1)/2) * psi(2**(l-1) * x - m)``.

Together these functions form an orthonormal basis of L^2(R), and the tensor
products over coordinates one of L^2(R^d).
"""
from __future__ import annotations

import itertools
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Callable, Iterable, Iterator

import numpy as np

__all__ = [
    "WaveletBasis",
    "DyadicTable",
    "CoefficientField",
    "TabulationError",
    "UndersampledError",
    "build_basis",
    "tabulate",
    "eval_1d",
    "eval_level",
    "eval_tensor",
    "support_interval",
    "analyze",
    "reconstruct",
    "PRUNE_TOL",
    "worker_count",
]

PRUNE_TOL = 1e-14
WORKERS_ENV = "WBSPARSE_WORKERS"

# Published Hoelder exponent estimates of Daubechies-N scaling functions.
_HOLDER = {2: 0.550, 3: 1.088, 4: 1.618, 5: 1.969, 6: 2.189, 7: 2.460, 8: 2.761, 9: 3.074, 10: 3.361}


class TabulationError(RuntimeError):
    pass


class UndersampledError(ValueError):
    pass


def worker_count(workers: int | None = None) -> int:
    """Resolve a worker count; the environment variable caps it."""
    env = os.environ.get(WORKERS_ENV)
    cap = max(1, int(env)) if env else None
    if workers is None:
        workers = cap or 1
    workers = max(1, int(workers))
    return min(workers, cap) if cap else workers


@dataclass(frozen=True)
class WaveletBasis:
    family_order: int
    scaling_taps: tuple[float, ...]
    wavelet_taps: tuple[float, ...]
    support_length: float
    vanishing_moments: int
    regularity_hint: int

    @property
    def h(self) -> np.ndarray:
        return np.asarray(self.scaling_taps)

    @property
    def g(self) -> np.ndarray:
        return np.asarray(self.wavelet_taps)


def _daubechies_taps(N: int) -> np.ndarray:
    # Spectral factorisation: |Q(e^iw)|^2 = P(sin^2(w/2)), P(y) = sum_k C(N-1+k, k) y^k.
    # Each root y of P gives a pair z, 1/z of z^2 - (2 - 4y) z + 1; keep the one inside
    # the unit circle (extremal phase).
    coeffs = [comb(N - 1 + k, k) for k in range(N)]
    zeros = []
    for y in np.roots(coeffs[::-1]):
        pair = np.roots([1.0, -(2.0 - 4.0 * y), 1.0])
        zeros.append(pair[np.argmin(np.abs(pair))])
    q = np.real(np.poly(zeros)) if zeros else np.array([1.0])
    binom = np.array([comb(N, k) for k in range(N + 1)], dtype=float)
    h = np.convolve(binom, q)
    return h * (math.sqrt(2.0) / h.sum())


def build_basis(family_order: int) -> WaveletBasis:
    """Daubechies basis with ``family_order`` vanishing moments (2N taps)."""
    if not isinstance(family_order, (int, np.integer)) or not 2 <= family_order <= 10:
        raise ValueError(f"unsupported Daubechies order {family_order!r}; expected 2..10")
    N = int(family_order)
    h = _daubechies_taps(N)
    n = len(h)
    g = np.array([(-1) ** k * h[n - 1 - k] for k in range(n)])
    return WaveletBasis(
        family_order=N,
        scaling_taps=tuple(float(v) for v in h),
        wavelet_taps=tuple(float(v) for v in g),
        support_length=float(2 * N - 1),
        vanishing_moments=N,
        regularity_hint=int(math.floor(_HOLDER[N])),
    )


@dataclass(frozen=True, eq=False)
class DyadicTable:
    """phi and psi sampled on 2**-resolution * Z over [0, support_length]."""

    basis: WaveletBasis
    resolution: int
    phi_values: np.ndarray
    psi_values: np.ndarray

    @property
    def support_length(self) -> float:
        return self.basis.support_length

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.phi_values.size) / 2.0**self.resolution


def _integer_values(h: np.ndarray) -> np.ndarray:
    S = h.size - 1
    A = np.zeros((S + 1, S + 1))
    for n in range(S + 1):
        for l in range(S + 1):
            k = 2 * n - l
            if 0 <= k <= S:
                A[n, l] = math.sqrt(2.0) * h[k]
    w, v = np.linalg.eig(A)
    i = int(np.argmin(np.abs(w - 1.0)))
    if abs(w[i] - 1.0) > 1e-8:
        raise TabulationError("refinement matrix has no eigenvalue 1")
    vec = np.real(v[:, i])
    total = vec.sum()
    if abs(total) < 1e-12:
        raise TabulationError("integer samples of phi cannot be normalised")
    return vec / total


@lru_cache(maxsize=32)
def _tabulate_cached(basis: WaveletBasis, resolution: int) -> DyadicTable:
    h, g = basis.h, basis.g
    S = h.size - 1
    sq2 = math.sqrt(2.0)
    phi = _integer_values(h)
    # phi(i / 2^r) = sqrt2 * sum_k h_k phi((i - k 2^(r-1)) / 2^(r-1)): exact on dyadics.
    for r in range(1, resolution + 1):
        n = S * 2**r + 1
        new = np.zeros(n)
        step = 2 ** (r - 1)
        for k, hk in enumerate(h):
            lo = k * step
            m = min(n - lo, phi.size)
            new[lo : lo + m] += sq2 * hk * phi[:m]
        phi = new
    idx = np.arange(phi.size)
    psi = np.zeros(phi.size)
    for k, gk in enumerate(g):
        src = 2 * idx - k * 2**resolution
        ok = (src >= 0) & (src < phi.size)
        psi[ok] += sq2 * gk * phi[src[ok]]

    if resolution >= 1:
        res_phi = _two_scale_residual(phi, h, resolution, phi)
        res_psi = _two_scale_residual(psi, g, resolution, phi)
        if max(res_phi, res_psi) > 1e-9:
            raise TabulationError(
                f"two-scale relation violated after refinement (residual {max(res_phi, res_psi):.3g})"
            )
    phi.setflags(write=False)
    psi.setflags(write=False)
    return DyadicTable(basis, resolution, phi, psi)


def _two_scale_residual(values, taps, r, phi) -> float:
    # f(x) = sqrt2 * sum_k c_k phi(2x - k), checked at every tabulated x.
    idx = np.arange(values.size)
    rhs = np.zeros(values.size)
    for k, c in enumerate(taps):
        src = 2 * idx - k * 2**r
        ok = (src >= 0) & (src < phi.size)
        rhs[ok] += math.sqrt(2.0) * c * phi[src[ok]]
    return float(np.max(np.abs(values - rhs)))


def tabulate(basis: WaveletBasis, resolution: int = 12) -> DyadicTable:
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    return _tabulate_cached(basis, int(resolution))


def _lookup(values: np.ndarray, resolution: int, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    idx = np.rint(y * 2.0**resolution)
    ok = (idx >= 0) & (idx < values.size)
    out = np.zeros(y.shape)
    out[ok] = values[idx[ok].astype(np.int64)]
    return out


def eval_1d(table: DyadicTable, kind: str, k: int, m, x):
    """``2**(k/2) * f(2**k * x - m)`` with f = phi ('scaling') or psi ('wavelet').

    Values come from the nearest tabulated dyadic point.
    """
    if kind == "scaling":
        values = table.phi_values
    elif kind == "wavelet":
        values = table.psi_values
    else:
        raise ValueError(f"kind must be 'scaling' or 'wavelet', got {kind!r}")
    scale = 2.0**k
    out = math.sqrt(scale) * _lookup(values, table.resolution, scale * np.asarray(x, dtype=float) - np.asarray(m))
    return float(out) if out.ndim == 0 else out


def _level_kind(level: int) -> tuple[str, int]:
    if level < 0:
        raise ValueError(f"levels must be non-negative, got {level}")
    return ("scaling", 0) if level == 0 else ("wavelet", level - 1)


def eval_level(table: DyadicTable, level: int, m, x):
    """One tensor factor at stored level ``level`` (see module docstring)."""
    kind, k = _level_kind(level)
    return eval_1d(table, kind, k, m, x)


def support_interval(level: int, m: int, support_length: float) -> tuple[float, float]:
    s = 2.0 ** -max(level - 1, 0)
    return s * m, s * (m + support_length)


def eval_tensor(table: DyadicTable, j, m, x):
    """Tensor wavelet ``prod_i factor(j_i, m_i, x_i)``; x is (d,) or (n, d)."""
    j = tuple(int(v) for v in j)
    m = tuple(int(v) for v in m)
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if not (len(j) == len(m) == pts.shape[1]):
        raise ValueError(f"dimension mismatch: j={j}, m={m}, x has {pts.shape[1]} coordinates")
    out = np.ones(pts.shape[0])
    for i, (ji, mi) in enumerate(zip(j, m)):
        out *= eval_level(table, ji, mi, pts[:, i])
    return float(out[0]) if single else out


class CoefficientField:
    """Sparse map (level j, translation m) -> coefficient.

    Entries with ``|lambda| < PRUNE_TOL`` are never stored.
    """

    def __init__(self, dim: int, entries=None):
        if dim < 1:
            raise ValueError("dimension must be >= 1")
        self.dim = int(dim)
        self._data: dict[tuple[tuple[int, ...], tuple[int, ...]], float] = {}
        if entries:
            items = entries.items() if isinstance(entries, dict) else entries
            for (j, m), lam in items:
                self[j, m] = lam

    def __setitem__(self, key, value) -> None:
        j, m = key
        j = tuple(int(v) for v in j)
        m = tuple(int(v) for v in m)
        if len(j) != self.dim or len(m) != self.dim:
            raise ValueError(f"index ({j}, {m}) does not match dimension {self.dim}")
        if any(v < 0 for v in j):
            raise ValueError(f"levels must be non-negative, got {j}")
        value = float(value)
        if abs(value) < PRUNE_TOL:
            self._data.pop((j, m), None)
        else:
            self._data[(j, m)] = value

    def __getitem__(self, key) -> float:
        j, m = key
        return self._data.get((tuple(j), tuple(m)), 0.0)

    def __contains__(self, key) -> bool:
        j, m = key
        return (tuple(j), tuple(m)) in self._data

    def __len__(self) -> int:
        return len(self._data)

    def __iter__(self) -> Iterator[tuple[tuple[int, ...], tuple[int, ...]]]:
        return iter(sorted(self._data))

    def items(self) -> list[tuple[tuple[tuple[int, ...], tuple[int, ...]], float]]:
        return sorted(self._data.items())

    def by_level(self) -> dict[tuple[int, ...], tuple[np.ndarray, np.ndarray]]:
        """Level -> (translations (K, d) int array, coefficients (K,)), sorted."""
        groups: dict[tuple[int, ...], list] = {}
        for (j, m), lam in self.items():
            groups.setdefault(j, []).append((m, lam))
        return {
            j: (np.array([m for m, _ in rows], dtype=np.int64), np.array([lam for _, lam in rows]))
            for j, rows in groups.items()
        }

    def scaled(self, c: float) -> "CoefficientField":
        return CoefficientField(self.dim, {k: c * v for k, v in self._data.items()})

    def filtered(self, keep: Callable[[tuple, tuple], bool]) -> "CoefficientField":
        return CoefficientField(self.dim, {k: v for k, v in self._data.items() if keep(*k)})

    def __eq__(self, other) -> bool:
        return isinstance(other, CoefficientField) and self.dim == other.dim and self._data == other._data

    def __repr__(self) -> str:
        return f"CoefficientField(dim={self.dim}, entries={len(self)})"

    def to_records(self) -> list[dict]:
        return [{"j": list(j), "m": list(m), "lambda": lam} for (j, m), lam in self.items()]

    def to_json(self) -> str:
        return json.dumps(self.to_records())

    @classmethod
    def from_records(cls, records: Iterable[dict], dim: int | None = None) -> "CoefficientField":
        records = list(records)
        if dim is None:
            if not records:
                raise ValueError("dimension required for an empty coefficient list")
            dim = len(records[0]["j"])
        field = cls(dim)
        for rec in records:
            if not isinstance(rec, dict) or not {"j", "m", "lambda"} <= rec.keys():
                raise ValueError(f"malformed coefficient record {rec!r}")
            field[rec["j"], rec["m"]] = rec["lambda"]
        return field

    @classmethod
    def from_json(cls, text: str, dim: int | None = None) -> "CoefficientField":
        data = json.loads(text)
        if not isinstance(data, list):
            raise ValueError("coefficient file must hold a JSON array")
        return cls.from_records(data, dim)


def _axis_functions(table: DyadicTable, max_level: int, radius: float, quad_resolution: int):
    """Sample every 1D factor touching (-radius, radius) on the quadrature grid.

    Returns (rows, x, B) with rows[i] = (level, m) and B[i] the factor's samples at x.
    """
    S = table.support_length
    rows = []
    for level in range(max_level + 1):
        scale = 2 ** max(level - 1, 0)
        lo = math.floor(-radius * scale - S) + 1
        hi = math.ceil(radius * scale) - 1
        rows.extend((level, m) for m in range(lo, hi + 1))
    n_per_unit = 2**quad_resolution
    starts = [support_interval(l, m, S)[0] for l, m in rows]
    ends = [support_interval(l, m, S)[1] for l, m in rows]
    i0 = math.floor(min(starts) * n_per_unit)
    i1 = math.ceil(max(ends) * n_per_unit)
    x = np.arange(i0, i1 + 1) / n_per_unit
    B = np.empty((len(rows), x.size))
    for r, (level, m) in enumerate(rows):
        B[r] = eval_level(table, level, m, x)
    return rows, x, B


def analyze(
    f: Callable[[np.ndarray], np.ndarray],
    basis: WaveletBasis,
    max_level: int,
    domain_radius: float,
    quad_resolution: int | None = None,
    dim: int = 1,
    workers: int | None = None,
    block_points: int = 1 << 22,
) -> CoefficientField:
    """Coefficients <f, psi_{j,m}> by composite trapezoid quadrature.

    ``f`` is vectorised: it maps an (n, dim) array of points to n values.  Every
    level with ``|j|_inf <= max_level`` and every translation whose support meets
    the open box (-domain_radius, domain_radius)^dim is computed, with step
    ``2**-quad_resolution`` per axis (default ``max_level + 6``).
    """
    if max_level < 0:
        raise ValueError("max_level must be >= 0")
    if not domain_radius > 0:
        raise ValueError("domain_radius must be positive")
    if quad_resolution is None:
        quad_resolution = max_level + 6
    if quad_resolution < max_level + 2:
        raise UndersampledError(
            f"quad_resolution={quad_resolution} undersamples level {max_level} (need >= {max_level + 2})"
        )
    table = tabulate(basis, quad_resolution)
    rows, x, B = _axis_functions(table, max_level, domain_radius, quad_resolution)
    h = 2.0**-quad_resolution
    n = x.size
    # Each factor vanishes at both support ends, so the trapezoid rule reduces to h * sum.
    per_row = max(1, n ** (dim - 1))
    nb = max(1, block_points // per_row)
    blocks = [slice(a, min(a + nb, n)) for a in range(0, n, nb)]

    def partial(blk: slice) -> np.ndarray:
        axes = [x[blk]] + [x] * (dim - 1)
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=1)
        F = np.asarray(f(pts), dtype=float).reshape([a.size for a in axes])
        T = np.tensordot(B[:, blk], F, axes=([1], [0]))
        for _ in range(dim - 1):
            T = np.tensordot(T, B, axes=([1], [1]))
        return T

    nworkers = worker_count(workers)
    if nworkers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(nworkers) as pool:
            parts = list(pool.map(partial, blocks))
    else:
        parts = [partial(blk) for blk in blocks]
    acc = parts[0]
    for part in parts[1:]:
        acc = acc + part
    acc = acc * h**dim

    field = CoefficientField(dim)
    for idx in zip(*np.nonzero(np.abs(acc) >= PRUNE_TOL)):
        j = tuple(rows[i][0] for i in idx)
        m = tuple(rows[i][1] for i in idx)
        field[j, m] = acc[idx]
    return field


def reconstruct(coeffs: CoefficientField, table: DyadicTable, x):
    """Evaluate ``sum lambda * psi_{j,m}`` at x ((d,) or (n, d)).

    Per level and coordinate only the S = support_length translations whose support
    contains the point are visited, so the cost is n * S**d per stored level.
    """
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    d = coeffs.dim
    if pts.shape[1] != d:
        raise ValueError(f"points have {pts.shape[1]} coordinates, field has dimension {d}")
    out = np.zeros(pts.shape[0])
    S = int(table.support_length)
    for j, (M, lam) in coeffs.by_level().items():
        lo, hi = M.min(axis=0), M.max(axis=0)
        scales = np.array([2.0 ** _level_kind(level)[1] for level in j])
        # points outside the union of this level's supports get nothing
        sel = np.flatnonzero(np.all((pts * scales >= lo) & (pts * scales <= hi + S), axis=1))
        if not sel.size:
            continue
        P = pts[sel]
        dense = np.zeros(tuple(hi - lo + 1))
        dense[tuple((M - lo).T)] = lam
        cand, vals = [], []
        for i, level in enumerate(j):
            kind, k = _level_kind(level)
            scale = 2.0**k
            y = scale * P[:, i]
            base = np.floor(y).astype(np.int64)
            values = table.psi_values if kind == "wavelet" else table.phi_values
            # offset t covers y - m in [t, t + 1)
            cand.append([base - t for t in range(S)])
            vals.append([math.sqrt(scale) * _lookup(values, table.resolution, y - (base - t)) for t in range(S)])
        acc = np.zeros(sel.size)
        for offs in itertools.product(range(S), repeat=d):
            ms = [cand[i][t] - lo[i] for i, t in enumerate(offs)]
            inside = np.ones(sel.size, dtype=bool)
            for i, mi in enumerate(ms):
                inside &= (mi >= 0) & (mi < dense.shape[i])
            if not inside.any():
                continue
            term = dense[tuple(mi[inside] for mi in ms)]
            for i, t in enumerate(offs):
                term = term * vals[i][t][inside]
            acc[inside] += term
        out[sel] += acc
    return float(out[0]) if single else out
