from __future__ import annotations

import json
import subprocess
import sys

import numpy as np
import pytest

from cqed_wstate import io
from cqed_wstate.analysis import read_matrix
from cqed_wstate.cli import FIGURES, ConfigError, main, parse_run_config, parse_scan_config, parse_sweep_config


def write_cfg(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


class TestParsing:
    def test_run_config(self):
        job, n = parse_run_config({"protocol": "shortcut", "delta": 3, "tf": 35, "correction": 1.04})
        assert job == {"protocol": "shortcut", "delta": 3, "tf": 35, "correction": 1.04} and n == 4000

    @pytest.mark.parametrize("doc,key", [
        ({"protocol": "shortcut", "tf": -1}, "tf"),
        ({"protocol": "shortcut", "omega0": 1.0}, "omega0"),
        ({"protocol": "zeno", "branch": "x"}, "branch"),
        ({"protocol": "zeno", "omega1": 0}, "omega1"),
        ({"protocol": "shortcut", "n_atoms": 1}, "n_atoms"),
        ({"protocol": "shortcut", "gamma": -0.1}, "gamma"),
        ({"protocol": "shortcut", "delta": "3"}, "delta"),
        ({"protocol": "stirap"}, "protocol"),
        ({"protocol": "shortcut", "n_steps": 0}, "n_steps"),
    ])
    def test_rejections_name_the_key(self, doc, key):
        with pytest.raises(ConfigError, match=key):
            parse_run_config(doc)

    def test_sweep_config(self):
        spec = parse_sweep_config({"protocol": "shortcut", "axis1": "gamma", "axis1_range": [0, 0.1, 3],
                                   "axis2": "kappa", "axis2_range": [0, 0.1, 2], "delta": 1.0})
        assert spec.shape == (3, 2) and spec.fixed == {"delta": 1.0}

    @pytest.mark.parametrize("extra", [
        {},
        {"axis1": "gamma"},
        {"axis1": "gamma", "axis1_range": [0, 0.1, 0]},
        {"axis1": "gamma", "axis1_range": [0.1, 0, 3]},
        {"axis1": "omega0", "axis1_range": [0, 0.1, 3]},
    ])
    def test_bad_sweeps(self, extra):
        with pytest.raises(ConfigError):
            parse_sweep_config({"protocol": "shortcut", **extra})

    def test_scan_config(self):
        protocol, parameter, rel, fixed, n = parse_scan_config(
            {"protocol": "shortcut", "parameter": "nu", "relative_range": [-0.05, 0.05, 3], "T": 40})
        assert (protocol, parameter, rel, fixed) == ("shortcut", "nu", (-0.05, 0.05, 3), {"T": 40})
        with pytest.raises(ConfigError, match="parameter"):
            parse_scan_config({"protocol": "shortcut", "parameter": "omega0"})


class TestCommands:
    def test_run_minimal_shortcut(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, {"protocol": "shortcut", "delta": 3, "tf": 35, "correction": 1.04})
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "out")]) == 0
        doc = json.loads((tmp_path / "out" / "result.json").read_text())
        assert doc["final_fidelity"] >= 0.99
        assert (tmp_path / "out" / "trajectory.csv").exists()
        assert "final fidelity" in capsys.readouterr().out

    def test_run_n_atoms(self, tmp_path):
        cfg = write_cfg(tmp_path, {"protocol": "shortcut", "n_atoms": 4})
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "out"), "--steps", "1000"]) == 0
        cols = io.read_columns(tmp_path / "out" / "trajectory.csv")
        assert "psi9" in cols

    def test_config_errors_exit_2(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, {"protocol": "shortcut", "tf": -1})
        assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 2
        assert "tf" in capsys.readouterr().err
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 2
        assert main(["run", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2
        nested = write_cfg(tmp_path, {"protocol": "shortcut", "pulses": {"tf": 35}}, "n.json")
        assert main(["run", "--config", nested, "--out", str(tmp_path)]) == 2

    def test_numerical_failure_exit_3(self, tmp_path, capsys):
        # a pulse window that ends before the evolution does is fine; a failing integrator is not
        cfg = write_cfg(tmp_path, {"protocol": "adiabatic", "omega0": 1e6, "tf": 10})
        assert main(["run", "--config", cfg, "--out", str(tmp_path), "--steps", "10"]) == 3
        assert "numerical failure" in capsys.readouterr().err

    def test_sweep_workers_identical(self, tmp_path):
        cfg = write_cfg(tmp_path, {"protocol": "shortcut", "axis1": "gamma", "axis1_range": [0, 0.1, 3],
                                   "axis2": "kappa", "axis2_range": [0, 0.1, 2], "n_steps": 800})
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "w1"), "--workers", "1"]) == 0
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "w4"), "--workers", "4"]) == 0
        a, b = (tmp_path / "w1" / "matrix.csv").read_bytes(), (tmp_path / "w4" / "matrix.csv").read_bytes()
        assert a == b
        _, _, m = read_matrix(tmp_path / "w1" / "matrix.csv")
        assert m.shape == (3, 2)

    def test_empty_grid_rejected(self, tmp_path):
        cfg = write_cfg(tmp_path, {"protocol": "shortcut", "axis1": "gamma", "axis1_range": [0, 0.1, 0]})
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 2

    def test_scan(self, tmp_path):
        cfg = write_cfg(tmp_path, {"protocol": "shortcut", "parameter": "T", "relative_range": [-0.1, 0.1, 3]})
        assert main(["scan", "--config", cfg, "--out", str(tmp_path), "--steps", "800"]) == 0
        cols = io.read_columns(tmp_path / "curve.csv")
        assert list(cols) == ["dT/T", "fidelity"] and len(cols["fidelity"]) == 3

    def test_unknown_figure(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["figure", "fig10", "--out", str(tmp_path)])
        assert exc.value.code == 2

    def test_help_lists_figures(self):
        out = subprocess.run([sys.executable, "-m", "cqed_wstate", "figure", "--help"],
                             capture_output=True, text=True, check=True).stdout
        for fid in FIGURES:
            assert fid in out


class TestFigures:
    def test_fig2(self, tmp_path):
        assert main(["figure", "fig2", "--out", str(tmp_path)]) == 0
        cols = io.read_columns(tmp_path / "pulses.csv")
        t = cols["t_over_tf"]
        assert t[np.argmax(cols["omega_s_over_omega0"])] < t[np.argmax(cols["omega1_over_omega0"])]

    def test_fig4c(self, tmp_path):
        assert main(["figure", "fig4c", "--out", str(tmp_path), "--steps", "2000"]) == 0
        dark = io.read_columns(tmp_path / "dark_state.csv")
        assert list(dark) == ["t", "psi1", "psi3", "psi5", "psi7"]
        assert dark["psi1"][0] == pytest.approx(1.0, abs=1e-6)

    def test_fig5(self, tmp_path):
        assert main(["figure", "fig5", "--out", str(tmp_path), "--resolution", "3"]) == 0
        cols = io.read_columns(tmp_path / "curve.csv")
        peak = json.loads((tmp_path / "meta.json").read_text())["baseline"]
        assert peak - cols["fidelity"][-1] == pytest.approx(0.03, abs=0.015)

    def test_fig7a(self, tmp_path):
        assert main(["figure", "fig7a", "--out", str(tmp_path)]) == 0
        cols = io.read_columns(tmp_path / "trajectory.csv")
        for name in ("psi1", "psi5", "psi7"):
            assert cols[name][-1] == pytest.approx(1 / 3, abs=0.05)

    def test_fig7c(self, tmp_path):
        assert main(["figure", "fig7c", "--out", str(tmp_path), "--steps", "2000"]) == 0
        finals = json.loads((tmp_path / "result.json").read_text())["final_fidelity"]
        assert set(finals) == {"shortcut", "adiabatic", "zeno"}
        assert min(finals.values()) >= 0.98
        for name in finals:
            assert (tmp_path / f"{name}.csv").exists()

    def test_fig8_layout(self, tmp_path):
        assert main(["figure", "fig8", "--out", str(tmp_path), "--resolution", "3", "--steps", "800"]) == 0
        _, _, m = read_matrix(tmp_path / "matrix.csv")
        assert m.shape == (3, 3)
        assert (tmp_path / "scan_T" / "curve.csv").exists() and (tmp_path / "scan_nu" / "curve.csv").exists()
