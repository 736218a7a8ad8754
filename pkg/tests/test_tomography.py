import math

import numpy as np
import pytest

from catsim import catcode as cc
from catsim import lindblad as lb
from catsim import gates as gt
from catsim import tomography as tm


@pytest.fixture(scope="module")
def frame2():
    return cc.CatFrame(math.sqrt(2.0))


class TestChiMachinery:
    def test_identity_channel_chi(self):
        sup = tm.superoperator_from_unitary(np.eye(2))
        chi = tm.chi_from_superoperator(sup, 1)
        expected = np.zeros((4, 4))
        expected[0, 0] = 1.0
        np.testing.assert_allclose(chi, expected, atol=1e-14)

    def test_unitary_roundtrip(self):
        rng = np.random.default_rng(2)
        h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        h = h + h.conj().T
        w, v = np.linalg.eigh(h)
        u = (v * np.exp(1j * w)) @ v.conj().T
        sup = tm.superoperator_from_unitary(u)
        chi = tm.chi_from_superoperator(sup, 2)
        # reconstruct the superoperator from chi and compare
        mats = tm.pauli_matrices(2)
        rebuilt = sum(
            chi[i, j] * np.kron(mats[i], mats[j].conj())
            for i in range(16)
            for j in range(16)
        )
        np.testing.assert_allclose(rebuilt, sup, atol=1e-12)

    def test_error_matrix_perfect_gate(self):
        _, x, _, _ = tm.logical_paulis() if hasattr(tm, "logical_paulis") else (None,) * 4
        from catsim.gates import logical_paulis

        _, x, _, _ = logical_paulis()
        chi = tm.chi_from_superoperator(tm.superoperator_from_unitary(x), 1)
        chi_err = tm.error_matrix(chi, x)
        assert abs(chi_err[0, 0] - 1.0) < 1e-12
        assert np.sum(np.abs(chi_err)) == pytest.approx(1.0, abs=1e-10)

    def test_error_matrix_pure_z_flip(self):
        from catsim.gates import logical_paulis

        _, x, _, z = logical_paulis()
        ideal = x
        sup = tm.superoperator_from_unitary(z @ x)  # gate followed by Z flip
        chi_err = tm.error_matrix(tm.chi_from_superoperator(sup, 1), ideal)
        labels = tm.pauli_labels(1)
        assert abs(chi_err[labels.index("Z"), labels.index("Z")] - 1.0) < 1e-12


class TestKrausInjection:
    def test_cnot_roundtrip_exact(self):
        nbar, k1, t1 = 4.0, 1e-3, 2.0
        kraus = tm.cnot_loss_kraus(nbar, k1, t1)
        total = sum(m.conj().T @ m for m in kraus)
        assert np.max(np.abs(total - np.eye(4))) < 1e-12
        chi = tm.chi_from_superoperator(tm.superoperator_from_kraus(kraus), 2)
        em = tm.extract_error_model(chi, 2)
        p = nbar * k1 * t1
        assert abs(em.probabilities["ZI"] - p) < 1e-8
        assert abs(em.probabilities["IZ"] - p / 2) < 1e-8
        assert abs(em.probabilities["ZZ"] - p / 2) < 1e-8
        coh = em.coherences[("IZ", "ZZ")]
        assert abs(abs(coh) - p / math.pi) < 1e-8
        assert abs(coh.real) < 1e-10  # purely imaginary +-i p/pi

    def test_toffoli_roundtrip_exact(self):
        nbar, k1, t1 = 2.0, 1e-3, 3.0
        kraus = tm.toffoli_loss_kraus(nbar, k1, t1)
        total = sum(m.conj().T @ m for m in kraus)
        assert np.max(np.abs(total - np.eye(8))) < 1e-12
        chi = tm.chi_from_superoperator(tm.superoperator_from_kraus(kraus), 3)
        em = tm.extract_error_model(chi, 3)
        p = nbar * k1 * t1
        expected = {
            "ZII": p, "IZI": p, "IIZ": 0.625 * p,
            "ZIZ": 0.125 * p, "IZZ": 0.125 * p, "ZZZ": 0.125 * p,
        }
        for label, val in expected.items():
            assert abs(em.probabilities[label] - val) < 1e-8


class TestGateFidelity:
    def test_paper_formula(self):
        chi_err = np.zeros((16, 16), dtype=complex)
        labels = tm.pauli_labels(2)
        chi_err[0, 0] = 0.97
        chi_err[labels.index("ZI"), labels.index("ZI")] = 0.02
        chi_err[labels.index("IZ"), labels.index("IZ")] = 0.01
        f, _ = tm.gate_fidelity(chi_err)
        assert f == pytest.approx(math.sqrt(0.97))

    def test_minimized_fidelity_lower_bound(self):
        chi_err = np.zeros((4, 4), dtype=complex)
        chi_err[0, 0] = 0.98
        chi_err[3, 3] = 0.02  # pure Z noise
        f, fmin = tm.gate_fidelity(chi_err, minimize_over_states=True, seed=1)
        assert fmin is not None
        assert fmin <= f + 1e-12
        # worst product state for Z noise is an X eigenstate: F = sqrt(0.98)
        assert fmin == pytest.approx(math.sqrt(0.98), abs=1e-3)


class TestAnalyticModels:
    def test_cnot_headline_fidelity(self):
        model = tm.analytic_model("CNOT", nbar=7.0, kappa1=1e-3, kappa2=1.0)
        assert model.fidelity == pytest.approx(math.sqrt(1 - 1.13 * math.sqrt(1e-3)), abs=2e-4)
        assert model.gate_time == pytest.approx(0.282 / (7.0 * math.sqrt(1e-3)), rel=1e-6)

    def test_cnot_with_thermal_and_dephasing(self):
        base = tm.analytic_model("CNOT", nbar=7.0, kappa1=1e-3, kappa2=1.0)
        noisy = tm.analytic_model(
            "CNOT", nbar=7.0, kappa1=1e-3, kappa2=1.0, kappa_phi=1e-3, n_th=0.1,
            gate_time=base.gate_time,
        )
        assert noisy.fidelity < base.fidelity
        assert abs(noisy.fidelity - 0.978) < 0.004

    def test_z_optimal_time(self):
        # T* per the quoted closed form; the returned probability follows the
        # simulation-validated theta^2 non-adiabatic term evaluated at T*
        t_star = tm.optimal_gate_time("Z", nbar=4.0, kappa1=1e-3, kappa2=1.0, theta=math.pi)
        assert t_star == pytest.approx(math.sqrt(math.pi) / (4 * 8 * math.sqrt(1e-3)), rel=1e-12)
        assert t_star == pytest.approx(1.752, abs=5e-3)
        model = tm.analytic_model("Z", nbar=4.0, kappa1=1e-3, kappa2=1.0, theta=math.pi)
        expected = 4.0 * 1e-3 * t_star + math.pi**2 / (16 * 16 * t_star)
        assert model.probabilities["Z"] == pytest.approx(expected, rel=1e-9)

    def test_idle_probability(self):
        model = tm.analytic_model("idle", nbar=4.0, kappa1=1e-3, kappa2=1.0, gate_time=1.0)
        assert model.probabilities["Z"] == pytest.approx(4e-3)

    def test_zz_model_structure(self):
        model = tm.analytic_model(
            "ZZ", nbar=4.0, kappa1=1e-3, kappa2=1.0, theta=math.pi / 2, gate_time=2.0
        )
        assert model.probabilities["ZZ"] == pytest.approx(
            (math.pi / 2) ** 2 / (32 * 16 * 2.0)
        )
        assert model.probabilities["IZ"] == model.probabilities["ZI"]

    def test_toffoli_model(self):
        model = tm.analytic_model("TOFFOLI", nbar=2.0, kappa1=0.0 + 1e-12, kappa2=1.0, gate_time=3.0)
        p_na = 0.085 / (2.0 * 3.0)
        assert model.probabilities["ZII"] == pytest.approx(p_na, rel=1e-3)
        assert model.probabilities["ZZI"] == pytest.approx(p_na, rel=1e-3)


class TestCompareReport:
    def test_perfect_agreement(self):
        a = tm.PauliErrorModel(1, {"I": 0.99, "Z": 0.01})
        rep = tm.compare_report(a, a)
        assert rep.passed
        assert all(e.rel_deviation == 0 for e in rep.entries)

    def test_xy_threshold(self):
        sim = tm.PauliErrorModel(1, {"I": 0.98, "Z": 0.01, "X": 0.01})
        ana = tm.PauliErrorModel(1, {"I": 0.99, "Z": 0.01})
        rep = tm.compare_report(sim, ana, xy_relative_threshold=1e-4)
        assert not rep.passed
        assert rep.xy_weight == pytest.approx(0.01)

    def test_report_json(self):
        a = tm.PauliErrorModel(1, {"I": 0.99, "Z": 0.01})
        blob = tm.compare_report(a, a).to_json()
        assert blob["passed"] is True


class TestSimulatedTomography:
    def test_identity_schedule(self, frame2):
        sched = gt.GateSchedule(
            duration=1.0,
            model=lb.LindbladModel(dissipators=[cc.two_photon_pump(frame2)]),
            ideal_unitary=np.eye(2, dtype=complex),
            frames_in=(frame2,),
            frames_out=(frame2,),
            kind="identity",
        )
        pm = tm.process_tomography(sched)
        assert pm.chi[0, 0].real > 1 - 1e-6
        assert pm.leakage_max < 1e-6
        residue, mineig = pm.validate()
        assert residue < 1e-6
        assert mineig > -1e-6

    def test_z_gate_error_matrix(self, frame2):
        sched = gt.zeno_schedule("Z", math.pi, (frame2,), eps_drive=0.02)
        pm = tm.process_tomography(sched)
        chi_err = tm.error_matrix(pm, sched.ideal_unitary)
        em = tm.extract_error_model(chi_err, 1)
        p_na = math.pi**2 / (16 * frame2.nbar**2 * sched.duration)
        assert abs(em.probabilities["Z"] - p_na) / p_na < 0.2
        assert em.xy_weight() < 0.05 * em.probabilities["Z"]

    def test_x_gate_with_feedforward_is_clean(self, frame2):
        sched = gt.topological_schedule("X", 2.0, (frame2,), feedforward=True)
        pm = tm.process_tomography(sched)
        chi_err = tm.error_matrix(pm, sched.ideal_unitary)
        f, _ = tm.gate_fidelity(chi_err)
        assert f > 1 - 1e-6

    def test_x_gate_with_loss_matches_model(self, frame2):
        kappa1 = 1e-3
        sched = gt.topological_schedule("X", 2.0, (frame2,), feedforward=True)
        noise = [cc.noise_channel("loss", frame2, kappa=kappa1)]
        pm = tm.process_tomography(sched, noise=noise)
        chi_err = tm.error_matrix(pm, sched.ideal_unitary)
        em = tm.extract_error_model(chi_err, 1)
        model = tm.analytic_model("X", nbar=frame2.nbar, kappa1=kappa1, kappa2=1.0, gate_time=2.0)
        rep = tm.compare_report(em, model, rel_tol=0.2)
        assert rep.passed
