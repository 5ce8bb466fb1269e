from __future__ import annotations

import math

import numpy as np
import pytest

from cqed_wstate import io
from cqed_wstate.backend import NAME, get_kernel
from cqed_wstate.core import SystemConfig, basis_vector, excited_index, f_index, ground_index, projector, w_state
from cqed_wstate.dynamics import (
    IntegrationError,
    LindbladSet,
    TimeGrid,
    Trajectory,
    evolve_lindblad,
    evolve_schrodinger,
    lindblad_ops,
)
from cqed_wstate.hamiltonians import TimeDependentOperator, hz_stack, system_operator
from cqed_wstate.protocols import zeno_analytic
from cqed_wstate.pulses import ShortcutParams, shortcut_schedule, zeno_schedule

compiled = pytest.mark.skipif(NAME != "cython", reason="compiled kernel not built")


def constant(H):
    H = np.asarray(H, dtype=complex)
    return TimeDependentOperator(lambda t: H, H.shape[0], lambda ts: np.broadcast_to(H, (len(ts), *H.shape)))


def shortcut_operator():
    cfg = SystemConfig(detuning=3.0)
    return cfg, system_operator(cfg, shortcut_schedule(ShortcutParams()))


class TestTimeGrid:
    def test_step(self):
        g = TimeGrid(0.0, 2.0, 8)
        assert g.h == 0.25
        assert len(g.times) == 9
        assert g.refined(2).n_steps == 16

    @pytest.mark.parametrize("args", [(1.0, 1.0, 10), (0.0, 1.0, 0), (0.0, 1.0, 2.5)])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            TimeGrid(*args)


class TestSchrodinger:
    def test_rabi_half_oscillation(self):
        om = 0.7
        H = constant([[0, om], [om, 0]])
        tr = evolve_schrodinger(H, [1, 0], TimeGrid(0.0, math.pi / (2 * om), 2000))
        assert tr.population(1)[-1] == pytest.approx(1.0, abs=1e-8)

    def test_zero_hamiltonian_is_identity(self):
        psi0 = w_state(SystemConfig())
        tr = evolve_schrodinger(constant(np.zeros((8, 8))), psi0, TimeGrid(0.0, 5.0, 10))
        np.testing.assert_array_equal(tr.states, np.broadcast_to(psi0, tr.states.shape))

    def test_constant_zeno_model_matches_closed_form(self):
        s = zeno_schedule(0.05)
        o1, os_ = s.params["omega1"], s.params["omega_s"]
        tr = evolve_schrodinger(constant(hz_stack(o1, os_)[0]), [1, 0, 0], TimeGrid(0.0, s.tf, 2000))
        ana = zeno_analytic(o1, os_, tr.times)
        np.testing.assert_allclose(tr.states[:, 0], ana["psi1"], atol=1e-6)
        np.testing.assert_allclose(tr.states[:, 1], ana["zeta"], atol=1e-6)
        np.testing.assert_allclose(tr.states[:, 2], ana["phi1"], atol=1e-6)

    def test_norm_and_absorbing_state(self):
        cfg, H = shortcut_operator()
        tr = evolve_schrodinger(H, basis_vector(8, 0), TimeGrid(0.0, 35.0))
        assert tr.monitors["norm_drift"] <= 1e-8
        assert np.all(tr.states[:, ground_index(3)] == 0)

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            evolve_schrodinger(constant(np.eye(2)), [1, 1], TimeGrid(0, 1, 4))

    def test_refinement_and_failure(self):
        om = 5.0
        H = constant([[0, om], [om, 0]])
        tr = evolve_schrodinger(H, [1, 0], TimeGrid(0.0, 10.0, 100), norm_tol=1e-6)
        assert tr.monitors["refinements"] >= 1
        assert len(tr.times) == 101 and tr.states.shape == (101, 2)
        with pytest.raises(IntegrationError):
            evolve_schrodinger(H, [1, 0], TimeGrid(0.0, 10.0, 20), max_doublings=1)
        loose = evolve_schrodinger(H, [1, 0], TimeGrid(0.0, 10.0, 20), refine=False)
        assert loose.monitors["norm_drift"] > 1e-8

    def test_rk4_order(self):
        _, H = shortcut_operator()
        psi0 = basis_vector(8, 0)

        def final(n):
            return evolve_schrodinger(H, psi0, TimeGrid(0.0, 35.0, n), refine=False).final

        ref = final(32000)
        errs = [np.linalg.norm(final(n) - ref) for n in (500, 1000, 2000)]
        for a, b in zip(errs, errs[1:]):
            assert 8 <= a / b <= 32


class TestLindblad:
    def test_exponential_decay(self):
        g = 0.3
        L = np.zeros((2, 2), complex)
        L[0, 1] = math.sqrt(g)
        tr = evolve_lindblad(constant(np.zeros((2, 2))), LindbladSet([L]), [0, 1], TimeGrid(0.0, 5.0, 2000))
        np.testing.assert_allclose(tr.population(1), np.exp(-g * tr.times), atol=1e-7)

    def test_closed_limit_matches_schrodinger(self):
        cfg, H = shortcut_operator()
        grid = TimeGrid(0.0, 35.0)
        psi = evolve_schrodinger(H, basis_vector(8, 0), grid)
        rho = evolve_lindblad(H, lindblad_ops(cfg, 0.0, 0.0), basis_vector(8, 0), grid)
        expected = np.einsum("ti,tj->tij", psi.states, psi.states.conj())
        assert np.max(np.abs(rho.states - expected)) <= 1e-7

    def test_monitors_on_decaying_run(self):
        cfg, H = shortcut_operator()
        tr = evolve_lindblad(H, lindblad_ops(cfg, 0.1, 0.1), basis_vector(8, 0), TimeGrid(0.0, 35.0))
        assert tr.monitors["trace_drift"] <= 1e-7
        assert tr.monitors["hermiticity"] <= 1e-9
        assert tr.monitors["min_eigenvalue"] >= -1e-6
        assert tr.population(ground_index(3))[-1] > 0

    @staticmethod
    def _purity(tr):
        return np.real(np.einsum("tij,tji->t", tr.states, tr.states))

    def test_purity_non_increasing_for_unital_channel(self):
        rng = np.random.default_rng(1)
        A = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        L = 0.2 * (A + A.conj().T)
        tr = evolve_lindblad(constant(np.zeros((8, 8))), LindbladSet([L]), w_state(SystemConfig()), TimeGrid(0, 5, 2000))
        assert np.all(np.diff(self._purity(tr)) <= 1e-12)

    def test_purity_recovers_under_model_decay(self):
        # decay into the absorbing states re-purifies, so purity has an interior minimum
        cfg = SystemConfig()
        tr = evolve_lindblad(constant(np.zeros((8, 8))), lindblad_ops(cfg, 0.5, 0.0),
                             basis_vector(8, excited_index(2)), TimeGrid(0, 30, 1000))
        pur = self._purity(tr)
        assert pur.min() == pytest.approx(1 / 3, abs=1e-3)
        assert pur[-1] == pytest.approx(0.5, abs=1e-3)

    def test_rejects_bad_density(self):
        with pytest.raises(ValueError):
            evolve_lindblad(constant(np.eye(2)), LindbladSet([]), np.eye(2), TimeGrid(0, 1, 4))


class TestLindbladOps:
    def test_count_and_actions(self):
        cfg = SystemConfig()
        g = 0.2
        ops = lindblad_ops(cfg, g, 0.05).operators
        assert len(ops) == 7
        psi2 = basis_vector(8, 1)
        np.testing.assert_allclose(ops[0] @ psi2, math.sqrt(g / 2) * basis_vector(8, 0))
        np.testing.assert_allclose(ops[1] @ psi2, math.sqrt(g / 2) * basis_vector(8, ground_index(3)))
        np.testing.assert_allclose(ops[2] @ basis_vector(8, excited_index(2)),
                                   math.sqrt(g / 2) * basis_vector(8, f_index(2)))
        np.testing.assert_allclose(ops[6] @ basis_vector(8, 2), math.sqrt(0.05) * basis_vector(8, ground_index(3)))
        for L in ops:
            np.testing.assert_array_equal(L @ basis_vector(8, ground_index(3)), 0)

    @pytest.mark.parametrize("n", [2, 4, 5])
    def test_generalizes(self, n):
        assert len(lindblad_ops(SystemConfig(n_atoms=n), 0.1, 0.1).operators) == 2 * n + 1

    def test_negative_rate(self):
        with pytest.raises(ValueError):
            lindblad_ops(SystemConfig(), -0.1, 0.0)

    def test_sparse_form(self):
        ops = lindblad_ops(SystemConfig(), 0.2, 0.1)
        rows, cols, vals, ptr, D = ops.sparse()
        assert len(ptr) == 8 and ptr[-1] == len(vals) == 7
        np.testing.assert_allclose(D, sum(L.conj().T @ L for L in ops.operators))


class TestKernels:
    def _problem(self):
        cfg, H = shortcut_operator()
        n = 400
        Hs = np.ascontiguousarray(H.sample(np.linspace(0, 35, 2 * n + 1)))
        rows, cols, vals, ptr, D = lindblad_ops(cfg, 0.1, 0.1).sparse()
        return Hs, n, 35.0 / n, (rows, cols, vals, ptr), D

    @compiled
    def test_compiled_matches_fallback(self):
        Hs, n, h, sp, D = self._problem()
        psi0 = basis_vector(8, 0)
        c, p = get_kernel("cython"), get_kernel("python")
        np.testing.assert_allclose(c.rk4_unitary(Hs, psi0, h, n, 4), p.rk4_unitary(Hs, psi0, h, n, 4), atol=1e-13)
        rho0 = projector(psi0)
        a = c.rk4_lindblad(Hs, D, *sp, rho0, h, n, 4)
        b = p.rk4_lindblad(Hs, D, *sp, rho0, h, n, 4)
        np.testing.assert_allclose(a, b, atol=1e-13)

    @pytest.mark.parametrize("name", ["python", pytest.param("cython", marks=compiled)])
    def test_shape_checks(self, name):
        k = get_kernel(name)
        Hs, n, h, sp, D = self._problem()
        with pytest.raises(ValueError):
            k.rk4_unitary(Hs, basis_vector(8, 0), h, n + 1)
        with pytest.raises(ValueError):
            k.rk4_unitary(Hs, basis_vector(8, 0), h, n, 3)

    def test_unknown_kernel(self):
        with pytest.raises(ValueError):
            get_kernel("fortran")

    def test_fallback_selected_by_environment(self):
        import subprocess
        import sys

        out = subprocess.run(
            [sys.executable, "-c", "from cqed_wstate.backend import NAME; print(NAME)"],
            env={"CQED_WSTATE_PURE": "1", "PATH": ""}, capture_output=True, text=True, check=True,
        )
        assert out.stdout.strip() == "python"


class TestTrajectoryExport:
    def test_csv(self, tmp_path):
        tr = Trajectory(np.array([0.0, 0.5]), np.array([[1, 0], [0, 1]], dtype=complex))
        tr.to_csv(tmp_path / "t.csv", {"p1": tr.population(1), "p0": tr.population(0)})
        text = (tmp_path / "t.csv").read_text().splitlines()
        assert text == ["t,p1,p0", "0,0,1", "0.5,1,0"]
        assert io.fmt(1 / 3) == "0.333333333333"
        assert io.fmt(float("nan")) == "nan"


class TestDivergence:
    def test_lindblad_blowup_reported(self):
        H = constant(1e6 * np.eye(2)[::-1])
        L = np.zeros((2, 2), complex)
        L[0, 1] = 1.0
        with pytest.raises(IntegrationError):
            evolve_lindblad(H, LindbladSet([L]), [1, 0], TimeGrid(0.0, 10.0, 10), max_doublings=1)
