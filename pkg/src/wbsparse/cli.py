"""Command line front end: ``wbsparse grid|approx|norm``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .besov import BesovParams, ExponentialWeight, lpw_error, sequence_quasinorm
from .index_calculus import IndexNorm, norm_from_json, norm_to_json
from .sparse_grid import (
    GridParams,
    GridTruncationError,
    build_grid,
    centers_csv,
    error_bound,
    grid_to_json,
    truncate,
)
from .wavelets import (
    CoefficientField,
    TabulationError,
    UndersampledError,
    analyze,
    build_basis,
    eval_tensor,
    reconstruct,
    tabulate,
)

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    dim: int = 2
    basis_order: int = 4
    delta1: dict = field(default_factory=lambda: {"type": "scaled_linf", "s": 0.0})
    delta2: dict = field(default_factory=lambda: {"type": "weighted_l1", "s": [1.0, 1.0]})
    epsilon: float = 0.1
    b_w: float = 1.0
    p: float = 2.0
    q: float = 2.0
    max_level: int = 3
    domain_radius: float = 4.0
    quad_resolution: int | None = None
    test_function: dict = field(default_factory=lambda: {"name": "exp_l1", "params": {"a": 1.0}})
    level_cap: int = 32
    L: int | None = None
    samples_per_axis: int = 129
    error_weight: float = 0.0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.dim, int) or self.dim < 1:
            raise ConfigError(f"dim must be a positive integer, got {self.dim!r}")
        if not isinstance(self.basis_order, int) or not 2 <= self.basis_order <= 10:
            raise ConfigError(f"basis_order must be an integer in 2..10, got {self.basis_order!r}")
        for name in ("epsilon", "b_w", "domain_radius"):
            if not _is_number(getattr(self, name)) or not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be a positive number")
        for name in ("p", "q"):
            if not _is_number(getattr(self, name)) or not getattr(self, name) >= 1:
                raise ConfigError(f"{name} must be >= 1")
        if not isinstance(self.max_level, int) or self.max_level < 0:
            raise ConfigError("max_level must be a non-negative integer")
        if self.quad_resolution is not None and not isinstance(self.quad_resolution, int):
            raise ConfigError("quad_resolution must be an integer or null")
        if not isinstance(self.level_cap, int) or self.level_cap < 0:
            raise ConfigError("level_cap must be a non-negative integer")
        if self.L is not None and (not isinstance(self.L, int) or self.L < 1):
            raise ConfigError("L must be a positive integer or null")
        if not isinstance(self.samples_per_axis, int) or self.samples_per_axis < 8:
            raise ConfigError("samples_per_axis must be an integer >= 8")
        if not _is_number(self.error_weight) or self.error_weight < 0:
            raise ConfigError("error_weight must be non-negative")
        tf = self.test_function
        if not isinstance(tf, dict) or tf.get("name") not in TEST_FUNCTIONS:
            raise ConfigError(f"test_function.name must be one of {sorted(TEST_FUNCTIONS)}")
        try:
            d1, d2 = self.norms()
            GridParams(self.dim, d1, d2, float(self.b_w), float(self.epsilon))
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"invalid smoothness norms: {exc}") from exc

    def norms(self) -> tuple[IndexNorm, IndexNorm]:
        # config files allow one level of mixing only
        return norm_from_json(self.delta1, max_mix_depth=1), norm_from_json(self.delta2, max_mix_depth=1)

    def grid_params(self) -> GridParams:
        d1, d2 = self.norms()
        return GridParams(self.dim, d1, d2, float(self.b_w), float(self.epsilon))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def exp_l1(a: float = 1.0, **_) -> Callable:
    return lambda x: np.exp(-a * np.abs(x).sum(axis=1))


def gaussian(a: float = 1.0, **_) -> Callable:
    return lambda x: np.exp(-a * (x**2).sum(axis=1))


def basis_element(j, m, table, **_) -> Callable:
    return lambda x: eval_tensor(table, j, m, x)


TEST_FUNCTIONS = {"exp_l1": exp_l1, "gaussian": gaussian, "basis_element": basis_element}


def make_test_function(cfg: RunConfig, table) -> Callable:
    tf = cfg.test_function
    params = dict(tf.get("params", {}))
    if tf["name"] == "basis_element":
        for key in ("j", "m"):
            if len(params.get(key, ())) != cfg.dim:
                raise ConfigError(f"basis_element needs '{key}' with {cfg.dim} entries")
        params["table"] = table
    try:
        return TEST_FUNCTIONS[tf["name"]](**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {tf['name']}: {exc}") from exc


def cmd_grid(cfg: RunConfig, workers: int | None = None) -> tuple[str, dict]:
    """Centers CSV text and grid JSON object for the configured grid."""
    params = cfg.grid_params()
    grid = build_grid(params, cfg.level_cap, workers=workers)
    basis = build_basis(cfg.basis_order)
    return centers_csv(grid, basis), grid_to_json(grid)


def cmd_approx(cfg: RunConfig, workers: int | None = None) -> dict:
    """analyze -> build_grid -> truncate -> reconstruct -> measure."""
    timing = {}
    t0 = time.perf_counter()
    basis = build_basis(cfg.basis_order)
    quad = cfg.quad_resolution if cfg.quad_resolution is not None else cfg.max_level + 6
    table = tabulate(basis, max(12, quad))
    f = make_test_function(cfg, table)
    coeffs = analyze(f, basis, cfg.max_level, cfg.domain_radius, quad, dim=cfg.dim, workers=workers)
    timing["analyze"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    params = cfg.grid_params()
    grid = build_grid(params, cfg.level_cap, workers=workers)
    bound = error_bound(params, grid, cfg.p)
    kept = truncate(coeffs, grid)
    timing["grid"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    L = cfg.L if cfg.L is not None else max(1, basis.vanishing_moments - 1)
    try:
        besov = BesovParams(cfg.p, cfg.q, params.delta2, ExponentialWeight(float(cfg.b_w)), L, cfg.dim)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    norm_full = sequence_quasinorm(coeffs, besov)
    norm_kept = sequence_quasinorm(kept, besov)
    measured = lpw_error(
        f,
        lambda x: reconstruct(kept, table, x),
        cfg.p,
        ExponentialWeight(float(cfg.error_weight)),
        cfg.domain_radius,
        cfg.samples_per_axis,
        dim=cfg.dim,
    )
    timing["measure"] = time.perf_counter() - t0

    needed = max((max(j) for j in grid.levels), default=0)
    return {
        "grid": {
            "total_points": grid.total_points,
            "levels_retained": len(grid.levels),
            "max_level_needed": needed,
            "levels_beyond_analysis": needed > cfg.max_level,
        },
        "epsilon": cfg.epsilon,
        "a_priori_bound": bound,
        "quasinorm_full": norm_full,
        "quasinorm_truncated": norm_kept,
        "bound_times_quasinorm": bound * norm_full,
        "measured_lpw_error": measured,
        "coefficients_full": len(coeffs),
        "coefficients_kept": len(kept),
        "timing": timing,
    }


def cmd_norm(
    coeff_path: str | Path, p: float, q: float, delta: dict | str, b_w: float, L: int = 3, dim: int | None = None
) -> float:
    try:
        text = Path(coeff_path).read_text()
        norm = norm_from_json(delta)
        records = json.loads(text)
        if not isinstance(records, list):
            raise ValueError("coefficient file must hold a JSON array")
        if not records:
            return 0.0
        coeffs = CoefficientField.from_records(records, dim)
        params = BesovParams(p, q, norm, ExponentialWeight(b_w), L, coeffs.dim)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    return sequence_quasinorm(coeffs, params)


def _parse_param(text: str) -> tuple[str, Any]:
    if "=" not in text:
        raise ConfigError(f"--param expects name=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wbsparse", description=__doc__.splitlines()[0])
    ap.add_argument("--workers", type=int, default=None, help="worker threads (capped by WBSPARSE_WORKERS)")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("grid", help="write wavelet centers CSV and grid JSON")
    g.add_argument("--config", required=True)
    g.add_argument("--out", help="output directory (centers.csv, grid.json); stdout CSV if omitted")

    a = sub.add_parser("approx", help="approximate a test function on the sparse grid")
    a.add_argument("--config", required=True)
    a.add_argument("--out", help="report path; stdout if omitted")
    a.add_argument("--function", choices=sorted(TEST_FUNCTIONS))
    a.add_argument("--param", action="append", default=[], metavar="NAME=VALUE")

    n = sub.add_parser("norm", help="sequence quasinorm of a coefficient file")
    n.add_argument("coeffs")
    n.add_argument("--p", type=float, default=2.0)
    n.add_argument("--q", type=float, default=2.0)
    n.add_argument("--delta", required=True, help="JSON smoothness norm")
    n.add_argument("--b-w", type=float, default=0.0)
    n.add_argument("--L", type=int, default=3)
    n.add_argument("--dim", type=int, default=None)
    return ap


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "grid":
            cfg = RunConfig.load(args.config)
            csv_text, grid_json = cmd_grid(cfg, args.workers)
            if args.out:
                out = Path(args.out)
                out.mkdir(parents=True, exist_ok=True)
                (out / "centers.csv").write_text(csv_text)
                (out / "grid.json").write_text(json.dumps(grid_json, indent=1) + "\n")
            else:
                sys.stdout.write(csv_text)
        elif args.command == "approx":
            cfg = RunConfig.load(args.config)
            data = cfg.to_dict()
            if args.function:
                data["test_function"] = {"name": args.function, "params": {}}
            for item in args.param:
                key, value = _parse_param(item)
                data["test_function"].setdefault("params", {})[key] = value
            cfg = RunConfig.from_dict(data)
            report = cmd_approx(cfg, args.workers)
            _write(args.out, json.dumps(report, indent=1) + "\n")
        else:
            value = cmd_norm(args.coeffs, args.p, args.q, args.delta, args.b_w, args.L, args.dim)
            print(f"{value:.12g}")
    except (TabulationError, UndersampledError, GridTruncationError) as exc:
        print(f"wbsparse: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        print(f"wbsparse: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
