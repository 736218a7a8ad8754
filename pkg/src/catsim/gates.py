"""Bias-preservation checks and cat-qubit gate schedules.

Two gate families act on pump-stabilized cat qubits:

* dynamical-phase (Zeno) gates: a weak Hamiltonian projected onto the
  stabilized manifold accumulates a rotation generated by Z-type logical
  operators (Z, ZZ, ZZZ, CZ);
* topological gates: the dissipator's fixed points are moved through phase
  space (X, CNOT, Toffoli, SWAP), imparting an exact pi phase; an optional
  feed-forward Hamiltonian cancels the non-adiabatic phase-flip errors.

Every schedule keeps a two-photon-type dissipator active on each mode for
the whole duration, which is what preserves the exponential bit-flip
suppression while the gate runs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .catcode import CatFrame
from .errors import DimensionMismatchError
from .fockcore import DensityMatrix, FockSpace, Ket, Operator, identity, mode_operators, tensor_kets
from .lindblad import Dissipator, ExpCoefficient, LindbladModel, integrate

__all__ = [
    "RotationSpec",
    "BiasCheckResult",
    "GateSchedule",
    "bias_check_rotation",
    "bias_check_controlled",
    "zeno_schedule",
    "topological_schedule",
    "prepare",
    "PreparationResult",
    "parity_measurement",
    "ParityMeasurement",
    "logical_paulis",
    "logical_basis_kets",
]

# logical single-qubit operators in the cat basis (|C+>, |C->): the parity
# operator is the logical X, the cat-state swap is the logical Z
_LX = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
_LZ = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_LY = np.array([[0.0, 1j], [-1j, 0.0]], dtype=complex)
_LI = np.eye(2, dtype=complex)


def logical_paulis():
    """Single-qubit logical Paulis (I, X, Y, Z) in the cat basis."""
    return _LI.copy(), _LX.copy(), _LY.copy(), _LZ.copy()


def logical_basis_kets():
    """Computational |0_L>, |1_L> in the cat basis."""
    s = 1.0 / math.sqrt(2.0)
    return np.array([s, s], dtype=complex), np.array([s, -s], dtype=complex)


@dataclass(frozen=True)
class RotationSpec:
    """Bloch rotation by ``angle`` around the real unit vector ``axis``."""

    axis: tuple
    angle: float

    def __init__(self, axis, angle: float):
        axis = tuple(float(x) for x in axis)
        if len(axis) != 3 or abs(math.hypot(*axis) - 1.0) > 1e-12:
            raise ValueError("axis must be a real 3-vector of unit norm")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "angle", float(angle))


@dataclass
class BiasCheckResult:
    preserving: bool
    coeff_i: complex
    coeff_x: complex
    coeff_y: complex


def bias_check_rotation(spec: RotationSpec, atol: float = 1e-12) -> BiasCheckResult:
    """Does the rotation avoid converting Z errors into X or Y errors?

    A Z error propagates through R_n(theta) as Z times an extra unitary
    whose X and Y components must vanish:

        sin(theta) n_x + 2 sin^2(theta/2) n_y n_z = 0
        sin(theta) n_y - 2 sin^2(theta/2) n_x n_z = 0
    """
    nx, ny, nz = spec.axis
    th = spec.angle
    s = math.sin(th)
    s2 = 2.0 * math.sin(th / 2.0) ** 2
    cx = s * nx + s2 * ny * nz
    cy = s * ny - s2 * nx * nz
    ci = math.cos(th) + s2 * nz * nz
    preserving = abs(cx) <= atol and abs(cy) <= atol
    return BiasCheckResult(preserving, complex(ci), complex(-1j * cx), complex(-1j * cy))


def bias_check_controlled(letters) -> bool:
    """Multi-qubit controlled gates built from X/Z stay bias-preserving iff
    they contain at most one X slot (a Z error flips an X-controlled branch)."""
    letters = [str(x).upper() for x in letters]
    if any(l not in ("X", "Z") for l in letters):
        raise ValueError("control/target letters must be X or Z")
    return letters.count("X") <= 1


@dataclass
class GateSchedule:
    """A finite-duration Lindblad model with a declared target unitary.

    ideal_unitary is given in the logical cat basis (2^n x 2^n); the
    deterministic phase correction is the conditional geometric-phase angle
    accumulated by topological multi-qubit gates (pi * nbar for CNOT and
    Toffoli), to be undone as an ideal frame rotation before tomography or
    absorbed when nbar is an even integer.
    """

    duration: float
    model: LindbladModel
    ideal_unitary: np.ndarray
    frames_in: tuple
    frames_out: tuple
    deterministic_phase_correction: float = 0.0
    kind: str = ""
    parameters: dict = field(default_factory=dict)

    @property
    def n_qubits(self) -> int:
        return len(self.frames_in)

    def to_json(self):
        return {
            "kind": self.kind,
            "duration": self.duration,
            "n_qubits": self.n_qubits,
            "parameters": {k: _json_scalar(v) for k, v in self.parameters.items()},
            "deterministic_phase_correction": self.deterministic_phase_correction,
            "hamiltonian_terms": len(self.model.hamiltonian),
            "dissipators": [d.to_json() for d in self.model.dissipators],
        }


def _json_scalar(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


def _product_space(frames) -> FockSpace:
    return FockSpace(tuple(f.space.dim for f in frames))


def _mode_ladder(space, mode):
    return mode_operators(space, mode)[0]


def validate_schedule_endpoints(schedule: GateSchedule, rtol: float = 1e-4) -> float:
    """Check that the schedule's dissipator kernels at t=0 and t=T contain
    the declared cat manifolds.

    Returns the worst relative residual max ||L(t) v|| / ||L|| over the
    manifold product basis.  Truncation makes the cat states only
    approximate kernel vectors (edge-component mismatch of the pump
    operator), so the achievable residual scales with the coherent-state
    tail rather than reaching machine precision.
    """
    frames = schedule.frames_in
    space = schedule.model.space
    kets = []
    for occupation in np.ndindex(*(2,) * len(frames)):
        parts = [
            (fr.cat_plus if bit == 0 else fr.cat_minus) for fr, bit in zip(frames, occupation)
        ]
        kets.append(tensor_kets(*parts).amplitudes)
    worst = 0.0
    for t in (0.0, schedule.duration):
        for dis in schedule.model.dissipators:
            if dis.rate == 0.0 or not dis.label.startswith("pump"):
                continue
            ell = dis.jump_at(t).data
            scale = np.linalg.norm(ell, 2)
            for v in kets:
                worst = max(worst, float(np.linalg.norm(ell @ v)) / scale)
    if worst > rtol:
        raise ValueError(
            f"schedule endpoints leave the declared manifold (residual {worst:.2e})"
        )
    return worst


def _zeno_drive(kind, theta, frames, eps_drive, kappa2, space):
    """Weak-drive Hamiltonian, duration, and logical target for Zeno gates."""
    alpha = frames[0].alpha
    nbar = abs(alpha) ** 2
    root = math.sqrt(nbar)
    if kind == "Z":
        a = _mode_ladder(space, 0)
        # drive phase opposite to alpha's so alpha*eps is real positive
        eps = eps_drive * np.exp(-1j * np.angle(alpha))
        ham = eps * a + np.conj(eps) * a.dag()
        duration = theta / (4.0 * root * eps_drive)
        u = _rot(_LZ, theta)
    elif kind == "ZZ":
        a1, a2 = _mode_ladder(space, 0), _mode_ladder(space, 1)
        ham = eps_drive * (a1 @ a2.dag() + a1.dag() @ a2)
        duration = theta / (4.0 * nbar * eps_drive)
        u = _rot(np.kron(_LZ, _LZ), theta)
    elif kind == "ZZZ":
        a1, a2, a3 = (_mode_ladder(space, m) for m in range(3))
        h = eps_drive * (a1 @ a2 @ a3.dag())
        ham = h + h.dag()
        # projected rate 2 eps |alpha|^3, matching the Z and ZZ conventions
        duration = theta / (4.0 * root**3 * eps_drive)
        u = _rot(np.kron(np.kron(_LZ, _LZ), _LZ), theta)
    elif kind == "CZ":
        a1, a2 = _mode_ladder(space, 0), _mode_ladder(space, 1)
        ham = eps_drive * (
            -1.0 * (a1 + a1.dag() + a2 + a2.dag())
            + (1.0 / root) * (a1 @ a2.dag() + a1.dag() @ a2)
        )
        duration = math.pi / (8.0 * root * eps_drive)
        p1 = 0.5 * (_LI - _LZ)
        u = np.eye(4, dtype=complex) - 2.0 * np.kron(p1, p1)
    else:
        raise ValueError(f"unknown Zeno gate kind {kind!r}")
    return ham, duration, u


def _rot(generator, theta):
    w, v = np.linalg.eigh(generator)
    return (v * np.exp(-0.5j * theta * w)) @ v.conj().T


def zeno_schedule(kind: str, theta: float, frames, eps_drive: float, kappa2: float = 1.0,
                  validate: bool = True) -> GateSchedule:
    """Weak-Hamiltonian gate under always-on two-photon pumping.

    eps_drive is the drive amplitude (same units as kappa2); the Zeno
    approximation requires eps_drive/kappa2 <= 0.3 and degrades visibly
    above ~0.1 (warned).  Durations: Z: theta/(4 sqrt(nbar) eps),
    ZZ: theta/(4 nbar eps), ZZZ: theta/(4 nbar^{3/2} eps),
    CZ: pi/(8 sqrt(nbar) eps).
    """
    frames = tuple(frames)
    n_modes = {"Z": 1, "ZZ": 2, "ZZZ": 3, "CZ": 2}.get(kind)
    if n_modes is None:
        raise ValueError(f"unknown Zeno gate kind {kind!r}")
    if len(frames) != n_modes:
        raise ValueError(f"{kind} needs {n_modes} frame(s)")
    if eps_drive <= 0 or theta < 0:
        raise ValueError("need eps_drive > 0 and theta >= 0")
    ratio = eps_drive / kappa2
    if ratio > 0.3:
        raise ValueError(f"eps_drive/kappa2 = {ratio:.3f} breaks the Zeno regime (> 0.3)")
    if ratio > 0.1:
        warnings.warn(f"eps_drive/kappa2 = {ratio:.3f} > 0.1: Zeno error models degrade")

    space = _product_space(frames)
    dissipators = []
    for m, fr in enumerate(frames):
        a = _mode_ladder(space, m)
        dissipators.append(
            Dissipator(kappa2, a @ a - fr.alpha**2, label=f"pump_{m}")
        )
    if theta == 0.0:
        sched = GateSchedule(
            duration=0.0,
            model=LindbladModel(dissipators=dissipators),
            ideal_unitary=np.eye(2**n_modes, dtype=complex),
            frames_in=frames,
            frames_out=frames,
            kind=f"zeno_{kind}",
            parameters={"theta": 0.0, "eps_drive": eps_drive, "kappa2": kappa2},
        )
        return sched
    ham, duration, u = _zeno_drive(kind, theta, frames, eps_drive, kappa2, space)
    model = LindbladModel(hamiltonian=[(1.0, ham)], dissipators=dissipators)
    sched = GateSchedule(
        duration=duration,
        model=model,
        ideal_unitary=u,
        frames_in=frames,
        frames_out=frames,
        kind=f"zeno_{kind}",
        parameters={"theta": theta, "eps_drive": eps_drive, "kappa2": kappa2},
    )
    if validate:
        validate_schedule_endpoints(sched)
    return sched


def topological_schedule(kind: str, duration: float, frames, feedforward: bool = True,
                         kappa2: float = 1.0, validate: bool = True) -> GateSchedule:
    """Gate by continuous deformation of the pump's fixed points.

    The jump operators are the literal conditional polynomials (e.g. the
    CNOT target pump b^2 - alpha(a+alpha)/2 + alpha e^{2 i pi t/T}(a-alpha)/2),
    not switched single-mode pumps.  Without feed-forward the gate needs
    duration >= 1/kappa2 for adiabaticity; with feed-forward the X gate is
    exact at any duration and the conditional gates retain only a reduced
    non-adiabatic phase-flip error on the control(s).
    """
    frames = tuple(frames)
    n_modes = {"X": 1, "CNOT": 2, "TOFFOLI": 3, "SWAP": 2}.get(kind)
    if n_modes is None:
        raise ValueError(f"unknown topological gate kind {kind!r}")
    if len(frames) != n_modes:
        raise ValueError(f"{kind} needs {n_modes} frame(s)")
    if duration <= 0:
        raise ValueError("duration must be positive")
    if not feedforward and duration < 1.0 / kappa2:
        warnings.warn(
            f"duration {duration:.3g} < 1/kappa2 without feed-forward: "
            "non-adiabatic errors will be large"
        )
    alpha = frames[0].alpha
    if any(abs(f.alpha - alpha) > 1e-12 for f in frames):
        raise ValueError("all frames must share one alpha for these schedules")
    nbar = abs(alpha) ** 2
    space = _product_space(frames)
    eye = identity(space)
    omega = 2.0 * math.pi / duration
    ham_terms = []
    phase_correction = 0.0

    if kind == "X":
        a = _mode_ladder(space, 0)
        dis = [
            Dissipator(
                kappa2,
                [(1.0, a @ a), (ExpCoefficient(-(alpha**2), omega), eye)],
                label="pump_0",
            )
        ]
        if feedforward:
            n_op = mode_operators(space, 0)[2]
            ham_terms = [(1.0, -(math.pi / duration) * n_op)]
        u = _LX.copy()
    elif kind == "CNOT":
        a = _mode_ladder(space, 0)
        b = _mode_ladder(space, 1)
        dis = [
            Dissipator(kappa2, a @ a - alpha**2, label="pump_0"),
            Dissipator(
                kappa2,
                [
                    (1.0, b @ b - 0.5 * alpha * (a + alpha * eye)),
                    (ExpCoefficient(0.5 * alpha, omega), a - alpha * eye),
                ],
                label="pump_1",
            ),
        ]
        if feedforward:
            nb = mode_operators(space, 1)[2]
            h = (math.pi / (4.0 * alpha * duration)) * (
                (a - alpha * eye) @ (nb - nbar * eye)
            )
            ham_terms = [(1.0, h + h.dag())]
        p0 = 0.5 * (_LI + _LZ)
        p1 = 0.5 * (_LI - _LZ)
        u = np.kron(p0, _LI) + np.kron(p1, _LX)
        phase_correction = math.pi * nbar
    elif kind == "TOFFOLI":
        a = _mode_ladder(space, 0)
        b = _mode_ladder(space, 1)
        c = _mode_ladder(space, 2)
        ab = a @ b
        static = (
            c @ c
            + 0.25 * ab
            - 0.25 * alpha * (a + b)
            - 0.75 * alpha**2 * eye
        )
        rotating = (a - alpha * eye) @ (b - alpha * eye)
        dis = [
            Dissipator(kappa2, a @ a - alpha**2, label="pump_0"),
            Dissipator(kappa2, b @ b - alpha**2, label="pump_1"),
            Dissipator(
                kappa2,
                [(1.0, static), (ExpCoefficient(-0.25, omega), rotating)],
                label="pump_2",
            ),
        ]
        if feedforward:
            nc = mode_operators(space, 2)[2]
            h = (-math.pi / (8.0 * alpha**2 * duration)) * (
                (a - alpha * eye) @ (b - alpha * eye) @ (nc - nbar * eye)
            )
            ham_terms = [(1.0, h + h.dag())]
        p0 = 0.5 * (_LI + _LZ)
        p1 = 0.5 * (_LI - _LZ)
        u = (
            np.kron(np.kron(p0, p0), _LI)
            + np.kron(np.kron(p0, p1), _LI)
            + np.kron(np.kron(p1, p0), _LI)
            + np.kron(np.kron(p1, p1), _LX)
        )
        phase_correction = math.pi * nbar
    elif kind == "SWAP":
        a = _mode_ladder(space, 0)
        b = _mode_ladder(space, 1)
        ab = a @ b
        dis = [
            Dissipator(
                kappa2,
                [
                    (1.0, a @ a - 0.5 * ab - 0.5 * alpha**2 * eye),
                    (ExpCoefficient(1.0, omega), 0.5 * ab - 0.5 * alpha**2 * eye),
                ],
                label="pump_0",
            ),
            Dissipator(
                kappa2,
                [
                    (1.0, b @ b - 0.5 * ab - 0.5 * alpha**2 * eye),
                    (ExpCoefficient(1.0, -omega), 0.5 * ab - 0.5 * alpha**2 * eye),
                ],
                label="pump_1",
            ),
        ]
        if feedforward:
            na = mode_operators(space, 0)[2]
            nb = mode_operators(space, 1)[2]
            h = (-math.pi / (4.0 * alpha**2 * duration)) * (
                (na - nb) @ (alpha**2 * eye - ab)
            )
            ham_terms = [(1.0, h + h.dag())]
        u = np.eye(4, dtype=complex)[[0, 2, 1, 3]]
    model = LindbladModel(hamiltonian=ham_terms, dissipators=dis)
    sched = GateSchedule(
        duration=duration,
        model=model,
        ideal_unitary=u,
        frames_in=frames,
        frames_out=frames,
        deterministic_phase_correction=phase_correction,
        kind=f"topological_{kind}",
        parameters={"feedforward": feedforward, "kappa2": kappa2, "alpha": alpha},
    )
    if validate:
        validate_schedule_endpoints(sched)
    return sched


@dataclass
class PreparationResult:
    state: DensityMatrix
    schedules: tuple
    pre_displacement: Operator | None = None


def prepare(kind: str, frame: CatFrame, kappa2: float = 1.0, t_prep: float | None = None,
            rtol: float = 1e-9) -> PreparationResult:
    """State preparation on one cat qubit.

    cat_plus: pump on from vacuum (unique steady state is the even cat);
    cat_minus: cat_plus followed by a Zeno Z(pi);
    coherent_plus: displacement D(alpha) of the vacuum, then pump on.
    """
    if t_prep is None:
        t_prep = 10.0 / kappa2
    space = frame.space
    a = frame.mode_ops()[0]
    pump = Dissipator(kappa2, a @ a - frame.alpha**2, label="pump_0")
    model = LindbladModel(dissipators=[pump])
    pump_sched = GateSchedule(
        duration=t_prep,
        model=model,
        ideal_unitary=np.eye(2, dtype=complex),
        frames_in=(frame,),
        frames_out=(frame,),
        kind="prepare_pump",
        parameters={"kappa2": kappa2},
    )
    if kind == "cat_plus":
        rho = integrate(model, Ket(space, _vacuum_vec(space)), (0.0, t_prep), rtol=rtol).final
        return PreparationResult(rho, (pump_sched,))
    if kind == "cat_minus":
        base = prepare("cat_plus", frame, kappa2, t_prep, rtol)
        zgate = zeno_schedule("Z", math.pi, (frame,), eps_drive=0.05 * kappa2, kappa2=kappa2)
        rho = integrate(zgate.model, base.state, (0.0, zgate.duration), rtol=rtol).final
        return PreparationResult(rho, base.schedules + (zgate,))
    if kind == "coherent_plus":
        from .fockcore import displacement

        disp = displacement(space, frame.alpha)
        vec = disp.data @ _vacuum_vec(space)
        rho0 = DensityMatrix(space, np.outer(vec, vec.conj()), validate=False)
        rho = integrate(model, rho0, (0.0, t_prep), rtol=rtol).final
        return PreparationResult(rho, (pump_sched,), pre_displacement=disp)
    raise ValueError(f"unknown preparation kind {kind!r}")


def _vacuum_vec(space):
    v = np.zeros(space.dim, dtype=complex)
    v[0] = 1.0
    return v


@dataclass
class ParityMeasurement:
    """Photon-number parity readout through a dispersive ancilla.

    The entangling unitary |g><g| I + |e><e| e^{i pi n} over T = pi/chi maps
    parity onto the ancilla X basis; an ancilla flip probability mixes the
    outcome assignment.  The pump must be off while measuring.
    """

    frame: CatFrame
    chi: float
    ancilla_error: float
    povm_plus: Operator
    povm_minus: Operator

    @property
    def duration(self) -> float:
        return math.pi / self.chi

    def outcome_probabilities(self, rho: DensityMatrix):
        p_plus = float(np.real(np.trace(self.povm_plus.data @ rho.matrix)))
        p_minus = float(np.real(np.trace(self.povm_minus.data @ rho.matrix)))
        return p_plus, p_minus

    def post_state(self, rho: DensityMatrix, outcome: int) -> DensityMatrix:
        proj = _parity_projector(self.frame.space, +1 if outcome > 0 else -1)
        mat = proj @ rho.matrix @ proj
        tr = np.trace(mat).real
        if tr <= 0:
            raise ValueError("outcome has zero probability")
        return DensityMatrix(self.frame.space, mat / tr, validate=False)


def _parity_projector(space, parity):
    diag = ((-1.0) ** np.arange(space.dim)).real
    sel = (diag > 0) if parity > 0 else (diag < 0)
    return np.diag(sel.astype(complex))


def parity_measurement(frame: CatFrame, chi: float, ancilla_error: float = 0.0) -> ParityMeasurement:
    if chi <= 0:
        raise ValueError("chi must be positive")
    if not 0.0 <= ancilla_error < 1.0:
        raise ValueError("ancilla_error must be a probability")
    pe = _parity_projector(frame.space, +1)
    po = _parity_projector(frame.space, -1)
    p = ancilla_error
    return ParityMeasurement(
        frame=frame,
        chi=chi,
        ancilla_error=p,
        povm_plus=Operator(frame.space, (1 - p) * pe + p * po),
        povm_minus=Operator(frame.space, (1 - p) * po + p * pe),
    )
