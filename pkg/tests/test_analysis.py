from __future__ import annotations

import json
import math

import numpy as np
import pytest

from cqed_wstate import io
from cqed_wstate.analysis import (
    EXPERIMENTAL_GAMMA,
    EXPERIMENTAL_KAPPA,
    Axis,
    SweepSpec,
    decoherence_map,
    read_matrix,
    robustness_scan,
    sweep,
)
from cqed_wstate.protocols import run_job, run_shortcut

STEPS = 1000


class TestAxis:
    def test_values(self):
        np.testing.assert_allclose(Axis("tf", 10, 20, 3).values, [10, 15, 20])
        assert Axis("tf", 5, 5, 1).values.tolist() == [5.0]

    @pytest.mark.parametrize("args", [(1, 0, 3), (0, 1, 0), (0, 1, 1), (0, 1, 2.5)])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            Axis("tf", *args)


class TestSweepSpec:
    def test_jobs_order(self):
        spec = SweepSpec("shortcut", Axis("delta", 1, 2, 2), Axis("tf", 30, 40, 3))
        jobs = spec.jobs()
        assert spec.shape == (2, 3)
        assert [(j["delta"], j["tf"]) for j in jobs[:4]] == [(1, 30), (1, 35), (1, 40), (2, 30)]

    def test_registry(self):
        with pytest.raises(ValueError):
            SweepSpec("shortcut", Axis("omega0", 1, 2, 2))
        with pytest.raises(ValueError):
            SweepSpec("bogus", Axis("tf", 1, 2, 2))
        with pytest.raises(ValueError):
            SweepSpec("shortcut", Axis("tf", 1, 2, 2), Axis("tf", 3, 4, 2))
        with pytest.raises(KeyError):
            SweepSpec("shortcut", Axis("tf", 1, 2, 2), fixed={"omega0": 1.0})


class TestSweep:
    def test_single_cell_is_direct_run(self):
        res = sweep(SweepSpec("shortcut", Axis("delta", 3, 3, 1), Axis("tf", 35, 35, 1), n_steps=STEPS))
        assert res.fidelity.shape == (1, 1)
        assert res.fidelity[0, 0] == run_job({"protocol": "shortcut"}, STEPS).final_fidelity

    def test_csv_layout_and_determinism(self, tmp_path):
        spec = SweepSpec("adiabatic", Axis("omega0", 0.5, 1.0, 2), Axis("tf", 40, 80, 3), n_steps=STEPS)
        a = sweep(spec).write(tmp_path / "a")
        b = sweep(spec, workers=2).write(tmp_path / "b")
        assert a.read_bytes() == b.read_bytes()
        lines = a.read_text().splitlines()
        assert lines[0] == "omega0\\tf,40,60,80"
        assert lines[1].startswith("0.5,") and len(lines) == 3
        ax1, ax2, m = read_matrix(a)
        np.testing.assert_allclose(ax1, [0.5, 1.0])
        np.testing.assert_allclose(ax2, [40, 60, 80])
        assert m.shape == (2, 3) and np.all((m > 0) & (m <= 1))
        meta = json.loads((tmp_path / "a" / "meta.json").read_text())
        assert meta["protocol"] == "adiabatic" and meta["n_steps"] == STEPS
        assert "omega0" not in meta["fixed"] and "tf" not in meta["fixed"]
        assert not (tmp_path / "a" / "errors.json").exists()

    def test_failed_cell_is_nan(self, tmp_path):
        res = sweep(SweepSpec("zeno", Axis("tf", -10, 10, 3), n_steps=STEPS))
        assert math.isnan(res.fidelity[0]) and math.isnan(res.fidelity[1])
        assert res.fidelity[2] > 0
        assert set(res.errors) == {"0", "1"}
        res.write(tmp_path)
        cols = io.read_columns(tmp_path / "matrix.csv")
        assert list(cols) == ["tf", "fidelity"] and math.isnan(cols["fidelity"][0])
        assert json.loads((tmp_path / "errors.json").read_text())["0"].startswith("ValueError")


class TestRobustness:
    def test_zeno_tf(self):
        res = robustness_scan("zeno", "tf", (-0.1, 0.1, 3), n_steps=STEPS * 2)
        assert res.meta["nominal"] == pytest.approx(35.375, abs=1e-3)
        drop = res.meta["baseline"] - res.fidelity[-1]
        assert 0.015 <= drop <= 0.045
        assert res.axis1_name == "dtf/tf"

    def test_explicit_deviations(self):
        res = robustness_scan("shortcut", "T", [-0.1, 0.0, 0.1], n_steps=STEPS)
        assert res.fidelity[1] == res.meta["baseline"]
        with pytest.raises(ValueError):
            robustness_scan("shortcut", "T", [0.1, -0.1])

    def test_unknown_parameter(self):
        with pytest.raises(ValueError):
            robustness_scan("zeno", "delta")


class TestDecoherence:
    def test_grid_corner_and_point_values(self):
        res = decoherence_map(gamma=(0.0, 0.1, 2), kappa=(0.0, 0.1, 2), n_steps=STEPS)
        closed = run_shortcut(grid=None).final_fidelity
        assert res.fidelity[0, 0] == pytest.approx(closed, abs=1e-6)
        assert res.fidelity[1, 1] == pytest.approx(0.9112, abs=0.01)
        assert res.axis1_name == "gamma" and res.axis2_name == "kappa"

    def test_experimental_rates(self):
        f = run_job({"protocol": "shortcut", "gamma": EXPERIMENTAL_GAMMA, "kappa": EXPERIMENTAL_KAPPA}).final_fidelity
        assert f == pytest.approx(0.9901, abs=0.005)

    def test_negative_rate(self):
        with pytest.raises(ValueError):
            decoherence_map(gamma=(-0.1, 0.1, 3))
