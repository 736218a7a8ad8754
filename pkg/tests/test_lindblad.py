import math

import numpy as np
import pytest

from catsim import fockcore as fc
from catsim import lindblad as lb
from catsim.errors import StiffnessError


def decay_model(space, kappa=1.0):
    a = fc.mode_operators(space)[0]
    return lb.LindbladModel(dissipators=[lb.Dissipator(kappa, a)])


def pump_model(space, alpha, kappa2=1.0):
    a = fc.mode_operators(space)[0]
    return lb.LindbladModel(dissipators=[lb.Dissipator(kappa2, a @ a - alpha**2)])


class TestLiouvillianApply:
    def test_vacuum_is_dark(self):
        sp = fc.FockSpace(10)
        out = lb.liouvillian_apply(decay_model(sp), 0.0, fc.vacuum(sp).density_matrix())
        assert np.max(np.abs(out)) == 0.0

    def test_single_photon_decay(self):
        sp = fc.FockSpace(10)
        kappa = 0.7
        rho1 = fc.fock_ket(sp, 1).density_matrix()
        out = lb.liouvillian_apply(decay_model(sp, kappa), 0.0, rho1)
        expected = kappa * (fc.fock_ket(sp, 0).density_matrix().matrix - rho1.matrix)
        np.testing.assert_allclose(out, expected, atol=1e-14)

    def test_trace_preservation(self):
        sp = fc.FockSpace(12)
        rng = np.random.default_rng(5)
        mat = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
        rho = mat + mat.conj().T
        out = lb.liouvillian_apply(pump_model(sp, 1.2), 0.0, rho)
        assert abs(np.trace(out)) < 1e-12

    def test_compiled_rhs_matches_dense_oracle(self):
        rng = np.random.default_rng(7)
        sp = fc.FockSpace((6, 5))
        a = fc.mode_operators(sp, 0)[0]
        b, _, nb, _ = fc.mode_operators(sp, 1)
        eye = fc.identity(sp)
        rot = lb.ExpCoefficient(0.3 + 0.1j, 2.1, 0.4)
        ham = 0.8 * (a @ b.dag() + b @ a.dag()) + 0.2 * nb
        model = lb.LindbladModel(
            hamiltonian=[(1.0, ham)],
            dissipators=[
                lb.Dissipator(0.7, [(1.0, b @ b - 1.5 * eye), (rot, a - 1.2 * eye)]),
                lb.Dissipator(0.05, a),
            ],
        )
        rho = rng.normal(size=(sp.dim, sp.dim)) + 1j * rng.normal(size=(sp.dim, sp.dim))
        rho = rho + rho.conj().T
        rhs = lb._compile_rhs(model)
        out = np.empty((1, sp.dim, sp.dim), dtype=complex)
        rhs.rhs(0.37, rho[None], out)
        oracle = lb.liouvillian_apply(model, 0.37, rho)
        np.testing.assert_allclose(out[0], oracle, atol=1e-12)


class TestIntegrate:
    def test_decaying_coherent_state(self):
        sp = fc.FockSpace(26)
        kappa, alpha, t1 = 0.4, 2.0, 2.0
        res = lb.integrate(decay_model(sp, kappa), fc.coherent(sp, alpha), (0, t1), rtol=1e-9)
        target = fc.coherent(sp, alpha * math.exp(-kappa * t1 / 2))
        assert res.final.fidelity_with_ket(target) > 1 - 1e-6

    def test_pump_converges_to_even_cat(self):
        sp = fc.FockSpace(26)
        res = lb.integrate(pump_model(sp, 2.0), fc.vacuum(sp), (0, 10.0))
        assert res.final.fidelity_with_ket(fc.cat(sp, 2.0, +1)) > 1 - 1e-6
        assert res.diagnostics.trace_drift < 1e-8

    def test_detuning_rotates_coherent_state(self):
        sp = fc.FockSpace(26)
        delta, t1 = 0.7, 2.0
        n = fc.mode_operators(sp)[2]
        model = lb.LindbladModel(hamiltonian=[(1.0, delta * n)])
        res = lb.integrate(model, fc.coherent(sp, 2.0), (0, t1), rtol=1e-9)
        target = fc.coherent(sp, 2.0 * np.exp(-1j * delta * t1))
        assert res.final.fidelity_with_ket(target) > 1 - 1e-6

    def test_parity_conserved_by_pump(self):
        sp = fc.FockSpace(24)
        par = fc.mode_operators(sp)[3]
        start = fc.coherent(sp, 1.4)
        res = lb.integrate(
            pump_model(sp, 1.4), start, (0, 5.0), rtol=1e-9,
            sample_times=np.linspace(0, 5, 6), observables={"parity": par},
        )
        vals = np.real(res.expectations["parity"])
        assert np.max(np.abs(vals - vals[0])) < 1e-8

    def test_sampling_and_observables(self):
        sp = fc.FockSpace(18)
        n = fc.mode_operators(sp)[2]
        times = [0.0, 0.5, 1.0]
        res = lb.integrate(
            decay_model(sp), fc.coherent(sp, 1.0), (0, 1.0),
            sample_times=times, observables={"n": n},
        )
        np.testing.assert_allclose(res.times, times)
        expected = np.exp(-np.array(times))
        np.testing.assert_allclose(np.real(res.expectations["n"]), expected, atol=1e-7)

    def test_stored_states_are_valid_density_matrices(self):
        sp = fc.FockSpace(16)
        res = lb.integrate(pump_model(sp, 1.0), fc.vacuum(sp), (0, 1.0))
        rho = res.final
        assert abs(np.trace(rho.matrix) - 1) < 1e-9
        assert rho.min_eigenvalue() > -1e-8

    def test_time_dependent_coefficient(self):
        # H(t) = eps (a e^{i w t} + a^dag e^{-i w t}) on resonance-free drive:
        # compare against liouvillian_apply-driven reference at small size
        sp = fc.FockSpace(8)
        a, adag, _, _ = fc.mode_operators(sp)
        w = 3.0
        model = lb.LindbladModel(
            hamiltonian=[(lb.ExpCoefficient(0.2, w), a), (lb.ExpCoefficient(0.2, -w), adag)],
            dissipators=[lb.Dissipator(0.5, a)],
        )
        rho0 = fc.vacuum(sp).density_matrix()
        res = lb.integrate(model, rho0, (0, 1.0), rtol=1e-10)
        # reference: classical RK4 with the dense oracle
        mat = rho0.matrix.copy()
        h = 5e-4
        for i in range(2000):
            t = i * h
            k1 = lb.liouvillian_apply(model, t, mat)
            k2 = lb.liouvillian_apply(model, t + h / 2, mat + h / 2 * k1)
            k3 = lb.liouvillian_apply(model, t + h / 2, mat + h / 2 * k2)
            k4 = lb.liouvillian_apply(model, t + h, mat + h * k3)
            mat = mat + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        assert np.max(np.abs(res.final.matrix - mat)) < 1e-7

    def test_stiffness_error_carries_time(self):
        sp = fc.FockSpace(6)
        a = fc.mode_operators(sp)[0]

        class Explode:
            def __call__(self, t):
                return np.inf if t > 0.05 else 1.0

        model = lb.LindbladModel(dissipators=[lb.Dissipator(1.0, [(Explode(), a)])])
        with pytest.raises(StiffnessError) as err:
            lb.integrate(model, fc.fock_ket(sp, 2), (0, 1.0))
        assert err.value.t <= 1.0

    def test_hermiticity_contract_enforced(self):
        sp = fc.FockSpace(6)
        a = fc.mode_operators(sp)[0]
        model = lb.LindbladModel(hamiltonian=[(1.0, a)])  # not Hermitian
        with pytest.raises(ValueError, match="Hermitian"):
            lb.integrate(model, fc.vacuum(sp), (0, 1.0))


class TestSteadyState:
    def test_decay_reaches_vacuum(self):
        sp = fc.FockSpace(12)
        res = lb.steady_state(decay_model(sp))
        assert res.unique
        assert res.state.fidelity_with_ket(fc.vacuum(sp)) > 1 - 1e-10

    def test_two_photon_kernel_dimension_four(self):
        sp = fc.FockSpace(21)
        res = lb.steady_state(pump_model(sp, math.sqrt(2.0)))
        assert not res.unique
        assert res.kernel_dim == 4

    def test_driven_damped_coherent_steady_state(self):
        sp = fc.FockSpace(26)
        delta, eps, kappa = 0.3, 0.15, 1.0
        a, adag, n, _ = fc.mode_operators(sp)
        model = lb.LindbladModel(
            hamiltonian=[(1.0, delta * n + eps * (a + adag))],
            dissipators=[lb.Dissipator(kappa, a)],
        )
        res = lb.steady_state(model)
        target = fc.coherent(sp, -1j * eps / (1j * delta + kappa / 2))
        assert res.unique
        assert res.state.fidelity_with_ket(target) > 1 - 1e-8
        sup_norm = np.linalg.norm(lb.superoperator_matrix(model), 2)
        assert res.residual <= 1e-10 * sup_norm

    def test_liouvillian_zero_eigenvalue_multiplicity(self):
        sp = fc.FockSpace(21)
        sup = lb.superoperator_matrix(pump_model(sp, math.sqrt(2.0)))
        ev = np.linalg.eigvals(sup)
        near_zero = np.sum(np.abs(ev) < 1e-5 * np.max(np.abs(ev)))
        assert near_zero == 4


class TestApplyKraus:
    def test_identity_kraus(self):
        sp = fc.FockSpace(17)
        rho = fc.coherent(sp, 1.0).density_matrix()
        out = lb.apply_kraus([fc.identity(sp)], rho)
        np.testing.assert_allclose(out.matrix, rho.matrix, atol=1e-14)

    def test_completeness_warning(self):
        sp = fc.FockSpace(10)
        rho = fc.vacuum(sp).density_matrix()
        bad = [0.9 * fc.identity(sp)]
        with pytest.warns(UserWarning, match="deficit"):
            lb.apply_kraus(bad, rho)


def test_trajectory_csv(tmp_path):
    sp = fc.FockSpace(17)
    n = fc.mode_operators(sp)[2]
    res = lb.integrate(
        decay_model(sp), fc.coherent(sp, 1.0), (0, 1.0),
        sample_times=[0.0, 1.0], observables={"n": n},
    )
    path = tmp_path / "traj.csv"
    lb.trajectory_to_csv(res, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "t,n"
    assert len(lines) == 3
