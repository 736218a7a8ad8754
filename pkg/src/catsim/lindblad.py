"""Assembly and integration of (time-dependent) Lindblad master equations.

The master equation is

    drho/dt = -i [H(t), rho] + sum_k kappa_k D[L_k(t)] rho,
    D[L] rho = L rho L^dag - 1/2 L^dag L rho - 1/2 rho L^dag L,

with every time-dependent operator expressed as closed-form scalar
coefficients multiplying fixed matrices (all schedules in this toolkit are
analytic, e.g. exp(2 i pi t / T)).

Integration uses an explicit adaptive embedded Runge-Kutta 5(4)
(Dormand-Prince) acting on the density matrix directly; the vectorized
superoperator is built only for steady-state computations, where the dim^2
memory cost is acceptable.  The state is re-symmetrized after every
accepted step and positivity is monitored (not enforced) on stored states.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _banded
from .errors import DimensionMismatchError, StiffnessError
from .fockcore import DensityMatrix, FockSpace, Ket, Operator

__all__ = [
    "ExpCoefficient",
    "Dissipator",
    "LindbladModel",
    "TrajectoryResult",
    "IntegrationDiagnostics",
    "SteadyStateResult",
    "liouvillian_apply",
    "integrate",
    "integrate_many",
    "steady_state",
    "apply_kraus",
    "trajectory_to_csv",
]


@dataclass(frozen=True)
class ExpCoefficient:
    """amplitude * exp(i (rate t + phase)); the workhorse schedule coefficient."""

    amplitude: complex
    rate: float
    phase: float = 0.0

    def __call__(self, t: float) -> complex:
        return self.amplitude * cmath.exp(1j * (self.rate * t + self.phase))

    def to_json(self):
        return {
            "type": "exp",
            "amplitude": [self.amplitude.real, self.amplitude.imag],
            "rate": self.rate,
            "phase": self.phase,
        }


def _coeff_value(coeff, t: float) -> complex:
    if callable(coeff):
        return complex(coeff(t))
    return complex(coeff)


def _coeff_json(coeff):
    if hasattr(coeff, "to_json"):
        return coeff.to_json()
    if callable(coeff):
        return {"type": "callable", "repr": repr(coeff)}
    c = complex(coeff)
    return {"type": "constant", "value": [c.real, c.imag]}


@dataclass(frozen=True)
class Dissipator:
    """One rated decoherence channel with jump operator L(t) = sum_j f_j(t) K_j."""

    rate: float
    terms: tuple
    label: str = ""

    def __init__(self, rate: float, terms, label: str = ""):
        if rate < 0:
            raise ValueError("dissipator rate must be >= 0")
        if isinstance(terms, Operator):
            terms = [(1.0, terms)]
        terms = tuple((c, op) for c, op in terms)
        spaces = {op.space for _, op in terms}
        if len(spaces) != 1:
            raise DimensionMismatchError("all jump-operator terms must share one space")
        object.__setattr__(self, "rate", float(rate))
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "label", label)

    @property
    def space(self) -> FockSpace:
        return self.terms[0][1].space

    def jump_at(self, t: float) -> Operator:
        data = sum(_coeff_value(c, t) * op.data for c, op in self.terms)
        return Operator(self.space, data)

    def to_json(self):
        return {
            "rate": self.rate,
            "label": self.label,
            "terms": [
                {"coefficient": _coeff_json(c), "operator_shape": list(op.data.shape)}
                for c, op in self.terms
            ],
        }


@dataclass(frozen=True)
class LindbladModel:
    """Hamiltonian terms plus rated dissipators on a common space."""

    hamiltonian: tuple
    dissipators: tuple
    space: FockSpace = None

    def __init__(self, hamiltonian=(), dissipators=(), space: FockSpace = None):
        hamiltonian = tuple(
            (c, op) for c, op in ([(1.0, hamiltonian)] if isinstance(hamiltonian, Operator) else hamiltonian)
        )
        dissipators = tuple(dissipators)
        spaces = {op.space for _, op in hamiltonian} | {d.space for d in dissipators}
        if space is not None:
            spaces.add(space)
        if len(spaces) != 1:
            raise DimensionMismatchError("model parts live on different spaces")
        object.__setattr__(self, "hamiltonian", hamiltonian)
        object.__setattr__(self, "dissipators", dissipators)
        object.__setattr__(self, "space", spaces.pop())

    def hamiltonian_at(self, t: float) -> Operator:
        d = self.space.dim
        data = np.zeros((d, d), dtype=complex)
        for c, op in self.hamiltonian:
            data = data + _coeff_value(c, t) * op.data
        return Operator(self.space, data)

    def check_hermitian(self, times, atol: float = 1e-10) -> None:
        for t in times:
            h = self.hamiltonian_at(t).data
            dev = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
            if dev > atol:
                raise ValueError(f"H(t={t:.4g}) not Hermitian (max dev {dev:.2e})")

    def max_rate(self) -> float:
        return max((d.rate for d in self.dissipators), default=0.0)


@dataclass
class IntegrationDiagnostics:
    n_steps: int = 0
    n_rejected: int = 0
    n_rhs: int = 0
    trace_drift: float = 0.0
    min_eigenvalue: float | None = None
    tightened: bool = False
    final_step: float = 0.0


@dataclass
class TrajectoryResult:
    """Sampled states and/or expectation values along one integration."""

    times: np.ndarray
    states: list | None
    expectations: dict
    diagnostics: IntegrationDiagnostics

    @property
    def final(self) -> DensityMatrix:
        if self.states is None:
            raise ValueError("states were not stored for this trajectory")
        return self.states[-1]


def _as_rho_array(state) -> np.ndarray:
    if isinstance(state, DensityMatrix):
        return np.array(state.matrix)
    if isinstance(state, Ket):
        return np.outer(state.amplitudes, state.amplitudes.conj())
    return np.array(state, dtype=complex)


def liouvillian_apply(model: LindbladModel, t: float, rho) -> np.ndarray:
    """Right-hand side -i[H(t), rho] + sum_k kappa_k D[L_k(t)] rho (dense)."""
    r = _as_rho_array(rho)
    if r.shape != (model.space.dim,) * 2:
        raise DimensionMismatchError("state shape does not match model space")
    out = np.zeros_like(r)
    if model.hamiltonian:
        h = model.hamiltonian_at(t).data
        out += -1j * (h @ r - r @ h)
    for dis in model.dissipators:
        ell = dis.jump_at(t).data
        a = ell @ r
        ldl = ell.conj().T @ a
        out += dis.rate * (a @ ell.conj().T - 0.5 * (ldl + ldl.conj().T))
    return out


def _compile_rhs(model: LindbladModel):
    """Banded right-hand side where possible, dense fallback otherwise."""
    dim = model.space.dim
    ham_banded = []
    all_banded = True
    for c, op in model.hamiltonian:
        b = _banded.BandedOp.from_matrix(op.data)
        if b is None:
            all_banded = False
            break
        ham_banded.append((c, b))
    dis_banded = []
    if all_banded:
        for dis in model.dissipators:
            if dis.rate == 0.0:
                continue
            terms = []
            for c, op in dis.terms:
                b = _banded.BandedOp.from_matrix(op.data)
                if b is None:
                    all_banded = False
                    break
                terms.append((c, b))
            if not all_banded:
                break
            dis_banded.append((dis.rate, terms))
    if all_banded:
        return _banded.BandedRHS(ham_banded, dis_banded, dim)
    return _banded.DenseRHS(
        [(c, op.data) for c, op in model.hamiltonian],
        [
            (d.rate, [(c, op.data) for c, op in d.terms])
            for d in model.dissipators
            if d.rate > 0.0
        ],
        dim,
    )


# Dormand-Prince 5(4) tableau, rows zero-padded to the 7 stages
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = np.zeros((7, 7))
_DP_A[1, :1] = (1 / 5,)
_DP_A[2, :2] = (3 / 40, 9 / 40)
_DP_A[3, :3] = (44 / 45, -56 / 15, 32 / 9)
_DP_A[4, :4] = (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729)
_DP_A[5, :5] = (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656)
_DP_A[6, :6] = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
_DP_ERR = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)
# compact nonzero tableau entries for the fused stage kernels
_DP_STAGE_IDX = [np.flatnonzero(_DP_A[s]).astype(np.int64) for s in range(7)]
_DP_STAGE_COEF = [np.ascontiguousarray(_DP_A[s][i]) for s, i in enumerate(_DP_STAGE_IDX)]
_DP_ERR_IDX = np.flatnonzero(_DP_ERR).astype(np.int64)
_DP_ERR_COEF = np.ascontiguousarray(_DP_ERR[_DP_ERR_IDX])




def integrate_many(
    model: LindbladModel,
    initial_states,
    t_span,
    rtol: float = 1e-8,
    atol: float = 1e-12,
    sample_times=None,
    observables: dict | None = None,
    store_states: bool = True,
    positivity_floor: float = -1e-8,
    max_retries: int = 1,
):
    """Integrate several initial states in one pass (shared adaptive steps).

    All states see the same model; the step controller takes the worst
    per-state error.  Returns a list of TrajectoryResult in input order.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not (math.isfinite(t0) and math.isfinite(t1) and t1 >= t0):
        raise ValueError("t_span must be finite with t1 >= t0")
    model.check_hermitian([t0, 0.5 * (t0 + t1), t1])

    stack = np.array([_as_rho_array(s) for s in initial_states])
    if stack.shape[1:] != (model.space.dim,) * 2:
        raise DimensionMismatchError("initial state shape does not match model space")

    if sample_times is None:
        sample_times = [t1]
    sample_times = sorted(set(float(t) for t in sample_times) | {t1})
    if sample_times[0] < t0 or sample_times[-1] > t1:
        raise ValueError("sample times must lie within t_span")
    observables = observables or {}
    obs_items = [(name, op.data) for name, op in observables.items()]

    rhs_obj = _compile_rhs(model)
    rate = model.max_rate()
    h_init = 1e-3 / rate if rate > 0 else (t1 - t0) / 1000.0 or 1.0
    h_max = 0.05 / rate if rate > 0 else (t1 - t0) / 10.0 or 1.0

    for attempt in range(max_retries + 1):
        result = _run_dp45(rhs_obj, stack, t0, t1, sample_times, rtol, atol, h_init, h_max)
        samples, diag = result
        if not store_states:
            break
        # positivity monitor on final states only (full eigh per sample is
        # prohibitive for large multimode batches)
        min_eig = float(
            min(np.linalg.eigvalsh(samples[t1][i]).min() for i in range(stack.shape[0]))
        )
        diag.min_eigenvalue = min_eig
        if min_eig >= positivity_floor or attempt == max_retries:
            break
        rtol, atol = rtol * 0.1, atol * 0.1
        diag.tightened = True
    samples, diag = result

    results = []
    times = np.array(sample_times)
    for i in range(stack.shape[0]):
        exps = {
            name: np.array([np.trace(obs @ samples[t][i]) for t in sample_times])
            for name, obs in obs_items
        }
        states = None
        if store_states:
            states = [DensityMatrix(model.space, samples[t][i]) for t in sample_times]
        results.append(TrajectoryResult(times, states, exps, diag))
    return results


def _run_dp45(rhs_obj, stack, t0, t1, sample_times, rtol, atol, h_init, h_max):
    shape = stack.shape
    n_flat = stack.size
    rhs_obj.n_rhs = 0
    y = np.ascontiguousarray(stack, dtype=complex).copy()
    ynew = np.empty_like(y)
    kflat = np.zeros((7, n_flat), dtype=complex)
    kviews = [kflat[j].reshape(shape) for j in range(7)]
    diag = IntegrationDiagnostics()
    samples = {}
    trace0 = np.real(np.trace(stack, axis1=-2, axis2=-1))
    pending = list(sample_times)

    t = t0
    h = min(h_init, h_max, (t1 - t0) or h_init)
    if pending and pending[0] == t0:
        samples[t0] = y.copy()
        pending.pop(0)

    rhs_obj.rhs(t, y, kviews[0])
    h_floor = max(
        1e-14 * max(abs(t1 - t0), 1.0), 1e3 * np.finfo(float).eps * max(abs(t0), abs(t1))
    )
    eps_t = 1e-14 * max(abs(t1), 1.0)
    enorm_prev = 1.0
    while t < t1 - eps_t:
        target = pending[0] if pending else t1
        clipped = t + h >= target
        h_step = target - t if clipped else h
        for s in range(1, 7):
            _banded.rk_stage(ynew, y, kflat, _DP_STAGE_IDX[s], _DP_STAGE_COEF[s], h_step)
            rhs_obj.rhs(t + _DP_C[s] * h_step, ynew, kviews[s])
        # after the loop ynew holds the 5th-order solution (last A row = b)
        enorm = _banded.error_norm(
            y, ynew, kflat, _DP_ERR_IDX, _DP_ERR_COEF, h_step, rtol, atol
        )
        if np.isfinite(enorm) and enorm <= 1.0:
            t = target if clipped else t + h_step
            y, ynew = ynew, y
            _banded.symmetrize(y)  # Hermiticity drift is pure round-off
            kflat[0, :] = kflat[6, :]  # FSAL
            diag.n_steps += 1
            if pending and t >= pending[0] - eps_t:
                samples[pending.pop(0)] = y.copy()
            # PI step control keeps h near the stability boundary with few
            # rejections (plain I-control oscillates hard on stiff tails)
            e = max(enorm, 1e-10)
            factor = 0.9 * e ** -0.14 * max(enorm_prev, 1e-10) ** 0.08
            enorm_prev = e
        else:
            diag.n_rejected += 1
            factor = 0.9 * enorm ** -0.2 if np.isfinite(enorm) and enorm > 0 else 0.2
        h = min(h_max, h * min(5.0, max(0.2, factor)))
        if h < h_floor:
            raise StiffnessError(t, h)
    diag.n_rhs = rhs_obj.n_rhs
    diag.final_step = h
    traces = np.real(np.trace(y, axis1=-2, axis2=-1))
    diag.trace_drift = float(np.max(np.abs(traces - trace0)))
    for ts in sample_times:
        if ts not in samples:
            samples[ts] = y.copy()
    return samples, diag


def integrate(
    model: LindbladModel,
    rho0,
    t_span,
    rtol: float = 1e-8,
    atol: float = 1e-12,
    sample_times=None,
    observables: dict | None = None,
    store_states: bool = True,
) -> TrajectoryResult:
    """Integrate one initial state; see integrate_many for the contract."""
    return integrate_many(
        model,
        [rho0],
        t_span,
        rtol=rtol,
        atol=atol,
        sample_times=sample_times,
        observables=observables,
        store_states=store_states,
    )[0]


@dataclass
class SteadyStateResult:
    state: DensityMatrix | None
    kernel_dim: int
    basis: list
    residual: float
    unique: bool


def superoperator_matrix(model: LindbladModel, t: float = 0.0) -> np.ndarray:
    """Row-major vectorization of the Liouvillian: vec(A rho B) = (A kron B^T) vec(rho)."""
    d = model.space.dim
    eye = np.eye(d)
    sup = np.zeros((d * d, d * d), dtype=complex)
    if model.hamiltonian:
        h = model.hamiltonian_at(t).data
        sup += -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for dis in model.dissipators:
        ell = dis.jump_at(t).data
        ldl = ell.conj().T @ ell
        sup += dis.rate * (
            np.kron(ell, ell.conj())
            - 0.5 * np.kron(ldl, eye)
            - 0.5 * np.kron(eye, ldl.T)
        )
    return sup


def steady_state(
    model: LindbladModel, t: float = 0.0, kernel_rtol: float = 1e-5
) -> SteadyStateResult:
    """Null space of the matrixized Liouvillian, trace-normalized.

    A one-dimensional kernel yields the steady state; a degenerate kernel
    (e.g. the pure two-photon pump, whose kernel is four-dimensional on
    span{|alpha>, |-alpha>}) is returned as a basis with unique=False.
    """
    sup = superoperator_matrix(model, t)
    d = model.space.dim
    _, svals, vh = np.linalg.svd(sup)
    smax = svals[0] if svals.size else 0.0
    mask = svals <= kernel_rtol * smax
    kernel_vecs = vh[mask].conj()
    kdim = int(mask.sum())
    basis = [v.reshape(d, d) for v in kernel_vecs]
    if kdim == 1:
        mat = basis[0]
        mat = 0.5 * (mat + mat.conj().T)
        tr = np.trace(mat)
        if abs(tr) < 1e-12:
            # traceless kernel vector cannot be a state
            return SteadyStateResult(None, kdim, basis, float(svals[-1]), False)
        mat = mat / tr
        residual = float(np.linalg.norm(sup @ mat.reshape(-1)))
        state = DensityMatrix(model.space, mat, validate=False)
        return SteadyStateResult(state, 1, basis, residual, True)
    return SteadyStateResult(None, kdim, basis, float(svals[mask].max() if kdim else svals[-1]), False)


def apply_kraus(kraus, rho: DensityMatrix, completeness_atol: float = 1e-6) -> DensityMatrix:
    """Apply a Kraus map sum_k M_k rho M_k^dag.

    The completeness sum_k M_k^dag M_k = I is checked; a violation beyond
    the tolerance (possible under truncation) triggers a warning carrying
    the deficit norm rather than an error.
    """
    if not kraus:
        raise ValueError("empty Kraus set")
    space = kraus[0].space
    total = sum(op.data.conj().T @ op.data for op in kraus)
    deficit = float(np.max(np.abs(total - np.eye(space.dim))))
    if deficit > completeness_atol:
        warnings.warn(
            f"Kraus completeness deficit {deficit:.3e} exceeds {completeness_atol:.1e}",
            stacklevel=2,
        )
    r = rho.matrix
    out = np.zeros_like(r)
    for op in kraus:
        out += op.data @ r @ op.data.conj().T
    out = 0.5 * (out + out.conj().T)
    return DensityMatrix(space, out, validate=False)


def trajectory_to_csv(result: TrajectoryResult, path) -> None:
    """CSV export ``t,<observable>...`` with real parts of the recorded values."""
    names = list(result.expectations)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(["t"] + names) + "\n")
        for i, t in enumerate(result.times):
            row = [f"{t:.12g}"] + [
                f"{np.real(result.expectations[n][i]):.12g}" for n in names
            ]
            fh.write(",".join(row) + "\n")
