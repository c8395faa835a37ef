import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from wbsparse.cli import ConfigError, RunConfig, cmd_approx, main
from wbsparse.wavelets import build_basis, eval_tensor, tabulate

GOLDEN = json.loads((Path(__file__).parent / "golden" / "sweep_counts.json").read_text())

SWEEP_CFG = {
    "dim": 2,
    "delta1": {"type": "scaled_linf", "s": 0.0},
    "delta2": {
        "type": "mix",
        "theta": 0.75,
        "first": {"type": "weighted_l1", "s": [1.0, 1.0]},
        "second": {"type": "scaled_linf", "s": 1.0},
    },
    "epsilon": 0.03,
    "b_w": 4.0,
}

WORKED = {"dim": 2, "epsilon": 0.5, "b_w": 1.0, "max_level": 1, "domain_radius": 4.0}


def write_config(tmp_path, name="cfg.json", **data):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


class TestGrid:
    def test_weight_sweep_count(self, tmp_path, capsys):
        code, out, _ = run(["grid", "--config", write_config(tmp_path, **SWEEP_CFG)], capsys)
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "x1,x2,j1,j2,m1,m2"
        assert len(lines) - 1 == GOLDEN["weight_sweep"]["total_points"]["4"]

    def test_empty_grid_header_only(self, tmp_path, capsys):
        cfg = dict(WORKED, epsilon=2.0, delta1={"type": "weighted_l1", "s": [1.0, 1.0]}, level_cap=6)
        code, out, _ = run(["grid", "--config", write_config(tmp_path, **cfg)], capsys)
        assert code == 0
        assert out == "x1,x2,j1,j2,m1,m2\n"

    def test_files_identical_across_runs_and_workers(self, tmp_path, capsys, monkeypatch):
        cfg = write_config(tmp_path, **dict(SWEEP_CFG, b_w=0.5))
        outputs = []
        for workers_env, flag in (("1", []), ("1", []), ("8", ["--workers", "8"]), ("3", [])):
            monkeypatch.setenv("WBSPARSE_WORKERS", workers_env)
            out_dir = tmp_path / f"out{len(outputs)}"
            assert main(flag + ["grid", "--config", cfg, "--out", str(out_dir)]) == 0
            outputs.append(((out_dir / "centers.csv").read_bytes(), (out_dir / "grid.json").read_bytes()))
        assert all(o == outputs[0] for o in outputs)
        grid = json.loads(outputs[0][1])
        assert grid["total_points"] == GOLDEN["weight_sweep"]["total_points"]["0.5"]

    @pytest.mark.parametrize(
        "bad",
        [
            {"epsilon": -1},
            {"dim": 0},
            {"basis_order": 1},
            {"p": 0.5},
            {"nonsense": 1},
            {"delta2": {"type": "l2"}},
            {"delta1": {"type": "weighted_l1", "s": [5.0, 5.0]}},
        ],
    )
    def test_invalid_config_exit_two(self, tmp_path, capsys, bad):
        code, _, err = run(["grid", "--config", write_config(tmp_path, **dict(WORKED, **bad))], capsys)
        assert code == 2
        assert err.strip()

    def test_missing_and_malformed_files(self, tmp_path, capsys):
        assert run(["grid", "--config", str(tmp_path / "missing.json")], capsys)[0] == 2
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert run(["grid", "--config", str(bad)], capsys)[0] == 2

    def test_cap_reached_exit_three(self, tmp_path, capsys):
        cfg = dict(WORKED, delta1={"type": "weighted_l1", "s": [1.0, 1.0]}, level_cap=5)
        assert run(["grid", "--config", write_config(tmp_path, **cfg)], capsys)[0] == 3


class TestApprox:
    def test_undersampled_exit_three(self, tmp_path, capsys):
        cfg = write_config(tmp_path, **dict(WORKED, max_level=3, quad_resolution=3))
        code, _, err = run(["approx", "--config", cfg], capsys)
        assert code == 3
        assert "numerical" in err

    def test_param_parsing(self, tmp_path, capsys):
        cfg = write_config(tmp_path, **WORKED)
        assert run(["approx", "--config", cfg, "--param", "bogus=1", "--function", "gaussian"], capsys)[0] == 0
        assert run(["approx", "--config", cfg, "--param", "novalue"], capsys)[0] == 2

    def test_basis_element_inside_grid(self, tmp_path, capsys):
        cfg = write_config(tmp_path, **WORKED)
        out = tmp_path / "report.json"
        argv = ["approx", "--config", cfg, "--function", "basis_element", "--param", "j=[1,0]", "--param", "m=[0,0]"]
        assert main(argv + ["--out", str(out)]) == 0
        report = json.loads(out.read_text())
        assert report["measured_lpw_error"] < 1e-3
        assert report["a_priori_bound"] < 0.5
        assert report["quasinorm_truncated"] <= report["quasinorm_full"]

    def test_basis_element_outside_grid(self):
        j0, m0 = [2, 2], [0, 0]
        cfg = RunConfig.from_dict(
            dict(WORKED, max_level=2, samples_per_axis=257, test_function={"name": "basis_element", "params": {"j": j0, "m": m0}})
        )
        report = cmd_approx(cfg)
        assert report["coefficients_kept"] == 0
        # oracle: trapezoid L2 norm of the single wavelet on the same box
        table = tabulate(build_basis(4), 12)
        axis = np.linspace(-4, 4, 1025)
        X, Y = np.meshgrid(axis, axis, indexing="ij")
        vals = eval_tensor(table, j0, m0, np.stack([X.ravel(), Y.ravel()], axis=1)).reshape(X.shape)
        w = np.full(axis.size, axis[1] - axis[0])
        w[[0, -1]] /= 2
        oracle = math.sqrt(float(w @ vals**2 @ w))
        assert oracle == pytest.approx(1.0, abs=1e-3)
        assert report["measured_lpw_error"] == pytest.approx(oracle, rel=1e-2)

    def test_gaussian_sweep(self):
        errors = []
        for eps in (0.1, 0.03, 0.01):
            cfg = RunConfig.from_dict(
                dict(WORKED, epsilon=eps, max_level=3, test_function={"name": "gaussian", "params": {"a": 1.0}})
            )
            report = cmd_approx(cfg)
            assert report["a_priori_bound"] < eps
            assert report["quasinorm_truncated"] <= report["quasinorm_full"]
            assert report["measured_lpw_error"] >= 0
            errors.append(report["measured_lpw_error"])
        assert errors[0] >= errors[1] >= errors[2]


class TestNorm:
    def write(self, tmp_path, records):
        path = tmp_path / "coeffs.json"
        path.write_text(json.dumps(records))
        return str(path)

    def test_empty(self, tmp_path, capsys):
        code, out, _ = run(["norm", self.write(tmp_path, []), "--delta", '{"type":"scaled_linf","s":1}'], capsys)
        assert code == 0 and float(out) == 0.0

    def test_single_entry(self, tmp_path, capsys):
        path = self.write(tmp_path, [{"j": [0, 0], "m": [0, 0], "lambda": 1.0}])
        code, out, _ = run(["norm", path, "--delta", '{"type":"weighted_l1","s":[1,1]}'], capsys)
        assert code == 0 and out.strip() == "1"

    def test_two_entries(self, tmp_path, capsys):
        path = self.write(tmp_path, [{"j": [0, 0], "m": [0, 0], "lambda": 1.0}, {"j": [1, 0], "m": [0, 0], "lambda": 1.0}])
        code, out, _ = run(["norm", path, "--p", "1", "--q", "1", "--delta", '{"type":"weighted_l1","s":[1,1]}'], capsys)
        assert code == 0
        assert out.strip() == f"{1 + math.sqrt(2):.12g}" == "2.41421356237"

    @pytest.mark.parametrize("text", ["{", '{"j": [0]}', '[{"j": [0], "m": [0]}]', '[{"j": [0, 1], "m": [0], "lambda": 1}]'])
    def test_malformed(self, tmp_path, capsys, text):
        path = tmp_path / "bad.json"
        path.write_text(text)
        code, _, err = run(["norm", str(path), "--delta", '{"type":"scaled_linf","s":1}'], capsys)
        assert code != 0 and err


class TestConfig:
    def test_roundtrip(self, tmp_path):
        cfg = RunConfig.from_dict(dict(SWEEP_CFG, quad_resolution=9, L=2))
        again = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert again == cfg and again.to_dict() == cfg.to_dict()

    def test_nested_mix_rejected(self):
        inner = SWEEP_CFG["delta2"]
        with pytest.raises(ConfigError):
            RunConfig.from_dict(dict(SWEEP_CFG, delta2={"type": "mix", "theta": 0.5, "first": inner, "second": inner}))


def test_console_entry_point(tmp_path):
    cfg = write_config(tmp_path, **WORKED)
    proc = subprocess.run([sys.executable, "-m", "wbsparse", "grid", "--config", cfg], capture_output=True, text=True)
    assert proc.returncode == 0
    assert len(proc.stdout.splitlines()) == 4
    proc = subprocess.run([sys.executable, "-m", "wbsparse", "grid", "--config", str(tmp_path / "nope.json")], capture_output=True, text=True)
    assert proc.returncode == 2
