import math

import numpy as np
import pytest

from catsim import catcode as cc
from catsim import fockcore as fc
from catsim import lindblad as lb
from catsim import gates as gt


@pytest.fixture(scope="module")
def frame4():
    return cc.CatFrame(2.0)


@pytest.fixture(scope="module")
def frame2():
    return cc.CatFrame(math.sqrt(2.0))


class TestBiasRotation:
    def test_hadamard_fails(self):
        s = 1 / math.sqrt(2)
        assert not gt.bias_check_rotation(gt.RotationSpec((s, 0, s), math.pi)).preserving

    @pytest.mark.parametrize("theta", np.linspace(0, 2 * math.pi, 100))
    def test_z_rotation_any_angle(self, theta):
        assert gt.bias_check_rotation(gt.RotationSpec((0, 0, 1), theta)).preserving

    def test_x_pi_allowed_but_not_pi_half(self):
        assert gt.bias_check_rotation(gt.RotationSpec((1, 0, 0), math.pi)).preserving
        assert not gt.bias_check_rotation(gt.RotationSpec((1, 0, 0), math.pi / 2)).preserving

    @pytest.mark.parametrize("phi", [0.0, math.pi / 8, math.pi / 4])
    def test_inplane_pi_rotations(self, phi):
        axis = (math.cos(phi), math.sin(phi), 0.0)
        assert gt.bias_check_rotation(gt.RotationSpec(axis, math.pi)).preserving

    def test_error_coefficients_for_hadamard(self):
        s = 1 / math.sqrt(2)
        res = gt.bias_check_rotation(gt.RotationSpec((s, 0, s), math.pi))
        assert abs(res.coeff_y) > 0.5  # the Y conversion that breaks the bias

    def test_axis_must_be_unit(self):
        with pytest.raises(ValueError):
            gt.RotationSpec((1, 1, 0), math.pi)


class TestBiasControlled:
    @pytest.mark.parametrize(
        "letters,expected",
        [("ZX", True), ("ZZ", True), ("XX", False), ("ZZZ", True), ("ZZX", True), ("XZX", False)],
    )
    def test_table(self, letters, expected):
        assert gt.bias_check_controlled(letters) is expected

    def test_rejects_bad_letters(self):
        with pytest.raises(ValueError):
            gt.bias_check_controlled("ZY")


class TestZenoSchedules:
    def test_zero_angle_is_identity(self, frame4):
        sched = gt.zeno_schedule("Z", 0.0, (frame4,), eps_drive=0.02)
        assert sched.duration == 0.0
        np.testing.assert_array_equal(sched.ideal_unitary, np.eye(2))

    def test_duration_formulas(self, frame4):
        eps = 0.02
        z = gt.zeno_schedule("Z", math.pi, (frame4,), eps_drive=eps)
        assert z.duration == pytest.approx(math.pi / (4 * 2.0 * eps))
        zz = gt.zeno_schedule("ZZ", math.pi / 2, (frame4, frame4), eps_drive=eps)
        assert zz.duration == pytest.approx(math.pi / 2 / (4 * 4.0 * eps))
        cz = gt.zeno_schedule("CZ", math.pi, (frame4, frame4), eps_drive=eps)
        assert cz.duration == pytest.approx(math.pi / (8 * 2.0 * eps))

    def test_zeno_regime_guard(self, frame4):
        with pytest.raises(ValueError):
            gt.zeno_schedule("Z", math.pi, (frame4,), eps_drive=0.5, kappa2=1.0)
        with pytest.warns(UserWarning):
            gt.zeno_schedule("Z", math.pi, (frame4,), eps_drive=0.2, kappa2=1.0)

    def test_pump_always_on(self, frame4):
        sched = gt.zeno_schedule("ZZ", 1.0, (frame4, frame4), eps_drive=0.02)
        pumps = [d for d in sched.model.dissipators if d.label.startswith("pump")]
        assert len(pumps) == 2
        for t in np.linspace(0, sched.duration, 5):
            for d in pumps:
                assert d.rate > 0
                assert np.linalg.norm(d.jump_at(t).data) > 0

    def test_projected_drive_is_z_rotation(self, frame4):
        # P (eps a + eps* a^dag) P = 2 Re(alpha eps) Z + O(e^{-2 nbar})
        eps = 0.02
        a = frame4.mode_ops()[0]
        drive = eps * a.data + np.conj(eps) * a.data.conj().T
        p = frame4.projector.data
        proj = p @ drive @ p
        target = 2 * np.real(frame4.alpha * eps) * frame4.z_op.data
        assert np.linalg.norm(proj - target, 2) < 50 * math.exp(-2 * frame4.nbar)

    def test_z_gate_rabi_oscillates_cats(self, frame2):
        # Z(pi/2) drives |C+> to (|C+> - i|C->)/sqrt2 (Rabi between the cats)
        sched = gt.zeno_schedule("Z", math.pi / 2, (frame2,), eps_drive=0.02)
        res = lb.integrate(sched.model, frame2.cat_plus, (0, sched.duration), rtol=1e-9)
        target_vec = (frame2.cat_plus.amplitudes - 1j * frame2.cat_minus.amplitudes) / math.sqrt(2)
        target = fc.Ket(frame2.space, target_vec)
        assert res.final.fidelity_with_ket(target) > 1 - 5e-3


class TestTopologicalSchedules:
    def test_x_gate_swaps_coherent_states(self, frame2):
        sched = gt.topological_schedule("X", 2.0, (frame2,), feedforward=True)
        res = lb.integrate(sched.model, frame2.coh_plus, (0, sched.duration), rtol=1e-9)
        assert res.final.fidelity_with_ket(frame2.coh_minus) > 1 - 1e-6

    def test_x_gate_frame_identity(self, frame2):
        # conjugating the schedule generator by e^{i pi n t / T} gives the
        # static pump superoperator
        T = 2.0
        sched = gt.topological_schedule("X", T, (frame2,), feedforward=True)
        static = lb.LindbladModel(dissipators=[cc.two_photon_pump(frame2)])
        s_static = lb.superoperator_matrix(static)
        n = np.diag(np.arange(frame2.space.dim).astype(complex))
        eye = np.eye(frame2.space.dim)
        for t in (0.3 * T, 0.7 * T):
            s_t = lb.superoperator_matrix(sched.model, t)
            theta = math.pi * t / T
            w = np.diag(np.exp(-1j * theta * np.arange(frame2.space.dim)))
            g = np.kron(w, w.conj())
            frame_term = 1j * (math.pi / T) * (np.kron(eye, n) - np.kron(n, eye))
            rotated = frame_term + g @ s_t @ np.linalg.inv(g)
            assert np.max(np.abs(rotated - s_static)) < 1e-10

    def test_cnot_error_propagation_identity(self, frame2):
        # U(T-t) (a x I) U(t) = alpha Z1 CNOT + O(e^{-2 nbar}) on the manifold
        alpha = frame2.alpha
        space = fc.FockSpace((frame2.space.dim, frame2.space.dim))
        a = fc.mode_operators(space, 0)[0].data
        nb = fc.mode_operators(space, 1)[2].data
        z1 = np.kron(frame2.z_op.data, np.eye(frame2.space.dim))
        proj1 = np.kron(frame2.projector.data, frame2.projector.data)
        p0 = np.outer(frame2.logical_zero.amplitudes, frame2.logical_zero.amplitudes.conj())
        p1 = np.outer(frame2.logical_one.amplitudes, frame2.logical_one.amplitudes.conj())

        from scipy.linalg import expm

        def u_of(t, T=1.0):
            phase = expm(1j * math.pi * (t / T) * nb)
            return np.kron(p0, np.eye(frame2.space.dim)) + np.kron(p1, np.eye(frame2.space.dim)) @ phase

        cnot = u_of(1.0)
        for t in (0.0, 0.5, 1.0):
            lhs = u_of(1.0 - t) @ (a @ u_of(t))
            rhs = alpha * (z1 @ cnot)
            dev = np.linalg.norm((lhs - rhs) @ proj1, 2)
            assert dev < 60 * math.exp(-2 * frame2.nbar) * alpha

    def test_swap_maps_basis_products(self, frame2):
        sched = gt.topological_schedule("SWAP", 10.0, (frame2, frame2), feedforward=True)
        rho0 = fc.tensor_kets(frame2.coh_plus, frame2.coh_minus)
        res = lb.integrate(sched.model, rho0, (0, sched.duration), rtol=1e-8, atol=1e-11)
        target = fc.tensor_kets(frame2.coh_minus, frame2.coh_plus)
        assert res.final.fidelity_with_ket(target) > 1 - 1e-4

    def test_adiabaticity_warning_without_feedforward(self, frame2):
        with pytest.warns(UserWarning, match="non-adiabatic"):
            gt.topological_schedule("X", 0.5, (frame2,), feedforward=False)

    def test_phase_correction_values(self, frame2, frame4):
        cnot = gt.topological_schedule("CNOT", 1.0, (frame2, frame2))
        assert cnot.deterministic_phase_correction == pytest.approx(math.pi * frame2.nbar)
        x = gt.topological_schedule("X", 1.0, (frame4,))
        assert x.deterministic_phase_correction == 0.0

    def test_schedule_json_description(self, frame2):
        sched = gt.topological_schedule("CNOT", 1.0, (frame2, frame2))
        blob = sched.to_json()
        assert blob["kind"] == "topological_CNOT"
        assert len(blob["dissipators"]) == 2
        coeffs = blob["dissipators"][1]["terms"][1]["coefficient"]
        assert coeffs["type"] == "exp"


class TestPreparation:
    def test_cat_plus(self, frame2):
        res = gt.prepare("cat_plus", frame2)
        assert res.state.fidelity_with_ket(frame2.cat_plus) > 1 - 1e-6

    def test_cat_minus(self, frame2):
        res = gt.prepare("cat_minus", frame2)
        assert res.state.fidelity_with_ket(frame2.cat_minus) > 1 - 5e-3
        assert len(res.schedules) == 2

    def test_coherent_plus(self, frame2):
        res = gt.prepare("coherent_plus", frame2)
        assert res.pre_displacement is not None
        assert res.state.fidelity_with_ket(frame2.coh_plus) > 1 - 1e-6

    def test_coherent_phase_error_monotone(self, frame2):
        # phase-imprecise displacement leaves a |1_L> admixture growing with
        # the phase error
        pops = []
        for dphi in (0.0, 0.25, 0.5):
            disp = fc.displacement(frame2.space, frame2.alpha * np.exp(1j * dphi))
            vec = disp.data @ fc.vacuum(frame2.space).amplitudes
            rho0 = fc.DensityMatrix(frame2.space, np.outer(vec, vec.conj()), validate=False)
            model = lb.LindbladModel(dissipators=[cc.two_photon_pump(frame2)])
            rho = lb.integrate(model, rho0, (0, 10.0), rtol=1e-9).final
            pops.append(rho.fidelity_with_ket(frame2.logical_one))
        assert pops[0] < pops[1] < pops[2]

    def test_cat_plus_with_loss_has_parity_admixture(self, frame2):
        kappa1, t_prep = 1e-3, 5.0
        a = frame2.mode_ops()[0]
        model = lb.LindbladModel(
            dissipators=[cc.two_photon_pump(frame2), lb.Dissipator(kappa1, a)]
        )
        rho = lb.integrate(model, fc.vacuum(frame2.space), (0, t_prep), rtol=1e-10).final
        p_odd = rho.fidelity_with_ket(frame2.cat_minus)
        expected = frame2.nbar * kappa1 * t_prep
        assert 0.3 * expected < p_odd < 1.5 * expected


class TestParityMeasurement:
    def test_ideal_on_even_cat(self, frame2):
        meas = gt.parity_measurement(frame2, chi=2.0)
        p_plus, p_minus = meas.outcome_probabilities(frame2.cat_plus.density_matrix())
        assert p_plus == pytest.approx(1.0, abs=1e-12)
        assert meas.duration == pytest.approx(math.pi / 2.0)

    def test_on_coherent_state(self, frame2):
        meas = gt.parity_measurement(frame2, chi=1.0)
        p_plus, p_minus = meas.outcome_probabilities(frame2.coh_plus.density_matrix())
        expected = 0.5 * (1 + math.exp(-2 * frame2.nbar))
        assert abs(p_plus - expected) < 1e-6

    def test_ancilla_error_assignment(self, frame2):
        meas = gt.parity_measurement(frame2, chi=1.0, ancilla_error=0.015)
        p_plus, _ = meas.outcome_probabilities(frame2.cat_plus.density_matrix())
        assert p_plus == pytest.approx(0.985, abs=1e-9)

    def test_post_state_projects(self, frame2):
        meas = gt.parity_measurement(frame2, chi=1.0)
        post = meas.post_state(frame2.coh_plus.density_matrix(), +1)
        assert post.fidelity_with_ket(frame2.cat_plus) > 1 - 1e-9
