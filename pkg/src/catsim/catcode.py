"""Cat-qubit semantics: conserved-quantity readout, asymptotic recovery,
bit-flip metrics, noise-channel constructors and correctability checks.

The two-photon pump kappa2 D[a^2 - alpha^2] stabilizes the manifold spanned
by the cat states |C+->, |C-->.  Expectations of the conserved quantities
J_pp (even-photon projector) and J_pm (a Bessel-weighted ladder series)
in the *initial* state determine the asymptotic state on that manifold,
which is what makes bit-flip probabilities computable without waiting for
full relaxation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln, iv

from .errors import DimensionMismatchError
from .fockcore import (
    DensityMatrix,
    FockSpace,
    Ket,
    Operator,
    adequate_dim,
    cat,
    check_truncation,
    coherent,
    displacement,
    identity,
    mode_operators,
)
from .lindblad import Dissipator, LindbladModel, integrate

__all__ = [
    "CatFrame",
    "Invariants",
    "build_invariants",
    "coherent_cpm",
    "asymptotic_map",
    "AsymptoticResult",
    "bitflip_probability",
    "noise_channel",
    "two_photon_pump",
    "correctability_check",
    "CorrectabilityResult",
]


class CatFrame:
    """Cat-qubit parameterization: amplitude, truncation, logical operators.

    Computational basis along the X axis: |0>_c = (|C+> + |C->)/sqrt2 is
    exponentially close to |alpha>, |1>_c to |-alpha>.  Logical operators:

        X_c = |C+><C+| - |C-><C-|      (parity)
        Z_c = |C+><C-| + |C-><C+|      (cat-state swap, photon-loss action)
        Y_c = i|C+><C-| - i|C-><C+|

    All attributes are computed once at construction and never mutated.
    """

    def __init__(self, alpha: complex, dim: int | None = None, strict: bool = True):
        if dim is None:
            dim = adequate_dim(abs(alpha) ** 2)
        if strict:
            check_truncation(dim, alpha)
        self.alpha = complex(alpha)
        self.nbar = abs(alpha) ** 2
        self.space = FockSpace(dim)
        self.strict = strict
        self.coh_plus = _coherent_any(self.space, self.alpha, strict)
        self.coh_minus = _coherent_any(self.space, -self.alpha, strict)
        self.cat_plus = _cat_any(self.space, self.alpha, +1, strict)
        self.cat_minus = _cat_any(self.space, self.alpha, -1, strict)
        cp = self.cat_plus.amplitudes
        cm = self.cat_minus.amplitudes
        self.logical_zero = Ket(self.space, (cp + cm) / math.sqrt(2.0))
        self.logical_one = Ket(self.space, (cp - cm) / math.sqrt(2.0))
        pp = np.outer(cp, cp.conj())
        mm = np.outer(cm, cm.conj())
        pm = np.outer(cp, cm.conj())
        self.projector = Operator(self.space, pp + mm)
        self.identity_op = self.projector
        self.x_op = Operator(self.space, pp - mm)
        self.z_op = Operator(self.space, pm + pm.conj().T)
        self.y_op = Operator(self.space, 1j * pm - 1j * pm.conj().T)
        self._check_pauli_algebra()

    def _check_pauli_algebra(self, atol: float = 1e-10):
        p = self.projector.data
        x, y, z = self.x_op.data, self.y_op.data, self.z_op.data
        checks = [
            (x @ x - p, "X^2 = I"),
            (z @ z - p, "Z^2 = I"),
            (x @ z + z @ x, "XZ + ZX = 0"),
            (x @ y - 1j * z, "XY = iZ"),
            (p @ p - p, "projector idempotent"),
        ]
        for mat, label in checks:
            dev = np.max(np.abs(mat))
            if dev > atol:
                raise ValueError(f"cat-frame Pauli algebra violated ({label}): {dev:.2e}")

    def mode_ops(self):
        return mode_operators(self.space, 0)


def _coherent_any(space, alpha, strict):
    if strict:
        return coherent(space, alpha)
    n = np.arange(space.dim)
    if alpha == 0:
        amps = np.zeros(space.dim)
        amps[0] = 1.0
        return Ket(space, amps)
    logmag = n * math.log(abs(alpha)) - 0.5 * np.cumsum(np.log(np.maximum(n, 1)))
    amps = np.exp(logmag - abs(alpha) ** 2 / 2.0) * np.exp(1j * np.angle(alpha) * n)
    return Ket(space, amps / np.linalg.norm(amps))


def _cat_any(space, alpha, parity, strict):
    if strict:
        return cat(space, alpha, parity)
    plus = _coherent_any(space, alpha, False).amplitudes
    minus = _coherent_any(space, -alpha, False).amplitudes
    amps = (plus + parity * minus).copy()
    amps[np.arange(space.dim) % 2 != (0 if parity == +1 else 1)] = 0.0
    return Ket(space, amps / np.linalg.norm(amps))


@dataclass(frozen=True)
class Invariants:
    """Conserved quantities of the two-photon pump, truncated Bessel series."""

    frame: CatFrame
    j_pp: Operator
    j_pm: Operator
    j_z: Operator
    q_max: int
    tail: float


def _log_double_factorial(n: int) -> float:
    """ln n!! with the conventions (-1)!! = 0!! = 1."""
    if n <= 0:
        return 0.0
    if n % 2 == 0:
        k = n // 2
        return k * math.log(2.0) + gammaln(k + 1)
    # n = 2k+1: n!! = (2k+1)! / (2^k k!)
    k = (n - 1) // 2
    return gammaln(n + 1) - k * math.log(2.0) - gammaln(k + 1)


def _ladder_series_term(dim: int, q: int) -> np.ndarray:
    """The q-th ladder operator of the coherence invariant.

    q >= 0: f(n) P_even a^(2q+1) with f(m) = (m-1)!!/(m+2q)!!;
    q < 0:  P_even a^dag(2|q|-1) g(n) with g(k) = k!!/(k+2|q|-1)!!.
    """
    mat = np.zeros((dim, dim), dtype=complex)
    if q >= 0:
        step = 2 * q + 1
        for m in range(0, dim - step, 2):
            k = m + step
            logv = (
                _log_double_factorial(m - 1)
                - _log_double_factorial(m + 2 * q)
                + 0.5 * (gammaln(k + 1) - gammaln(m + 1))
            )
            mat[m, k] = math.exp(logv)
    else:
        p = -q
        step = 2 * p - 1
        for k in range(0, dim - step):
            m = k + step
            if m % 2 != 0:
                continue
            logv = (
                _log_double_factorial(k)
                - _log_double_factorial(k + 2 * p - 1)
                + 0.5 * (gammaln(m + 1) - gammaln(k + 1))
            )
            mat[m, k] = math.exp(logv)
    return mat


def build_invariants(frame: CatFrame, q_max: int | None = None, tol: float = 1e-12) -> Invariants:
    """Assemble J_pp (even projector) and the Bessel-weighted series J_pm.

    With q_max omitted the series is extended automatically until the
    weight tail I_q(nbar)/(2q+1) drops below ``tol`` relative to the q=0
    weight; an explicit q_max that fails this bound raises ValueError.
    """
    dim = frame.space.dim
    nbar = frame.nbar
    theta = np.angle(frame.alpha) if frame.alpha != 0 else 0.0

    def weight_mag(q):
        return iv(abs(q), nbar) / (2 * abs(q) + 1)

    lead = weight_mag(0)
    if q_max is None:
        q_max = 40
        while weight_mag(q_max + 1) > tol * lead and q_max < 400:
            q_max += 20
    if weight_mag(q_max + 1) > tol * lead:
        raise ValueError(
            f"q_max={q_max} leaves series tail {weight_mag(q_max + 1) / lead:.2e} > {tol:.1e}"
        )

    j_pp = np.zeros((dim, dim), dtype=complex)
    j_pp[np.arange(0, dim, 2), np.arange(0, dim, 2)] = 1.0

    prefac = math.sqrt(2.0 * nbar / math.sinh(2.0 * nbar)) if nbar > 0 else 0.0
    j_pm = np.zeros((dim, dim), dtype=complex)
    for q in range(-q_max, q_max + 1):
        w = ((-1.0) ** q / (2 * q + 1)) * iv(q, nbar) * np.exp(-1j * theta * (2 * q + 1))
        if abs(w) == 0.0:
            continue
        j_pm += w * _ladder_series_term(dim, q)
    j_pm *= prefac

    sp = frame.space
    return Invariants(
        frame=frame,
        j_pp=Operator(sp, j_pp),
        j_pm=Operator(sp, j_pm),
        j_z=Operator(sp, j_pm + j_pm.conj().T),
        q_max=q_max,
        tail=float(weight_mag(q_max + 1) / lead),
    )


def coherent_cpm(alpha: complex, beta: complex, tol: float = 1e-10) -> complex:
    """Closed-form asymptotic coherence for a coherent-state start.

    Adaptive quadrature of
        i alpha beta* e^{-|beta|^2} / sqrt(2 sinh 2|alpha|^2)
            * int_0^pi dphi e^{-i phi} I_0(|alpha^2 - beta^2 e^{2 i phi}|).
    """
    a2 = abs(alpha) ** 2
    pref = 1j * alpha * np.conj(beta) * math.exp(-abs(beta) ** 2)
    pref /= math.sqrt(2.0 * math.sinh(2.0 * a2))

    def integrand_re(phi):
        return np.real(
            np.exp(-1j * phi) * iv(0, abs(alpha**2 - beta**2 * np.exp(2j * phi)))
        )

    def integrand_im(phi):
        return np.imag(
            np.exp(-1j * phi) * iv(0, abs(alpha**2 - beta**2 * np.exp(2j * phi)))
        )

    re, _ = quad(integrand_re, 0.0, math.pi, epsabs=tol, epsrel=tol, limit=200)
    im, _ = quad(integrand_im, 0.0, math.pi, epsabs=tol, epsrel=tol, limit=200)
    return complex(pref * (re + 1j * im))


@dataclass
class AsymptoticResult:
    c_pp: float
    c_pm: complex
    rho_inf: DensityMatrix
    truncation_flag: bool


def asymptotic_map(frame: CatFrame, rho0, invariants: Invariants,
                   positivity_floor: float = -1e-8) -> AsymptoticResult:
    """Infinite-time image of the two-photon pump from conserved quantities.

    c_pp = tr(J_pp rho0) is the even-cat population, c_pm = tr(J_pm^dag rho0)
    the cat coherence; the asymptotic state is reassembled on span{C+, C-}.
    A reconstruction that is non-positive beyond the floor is flagged as an
    invariant-series truncation artifact (and clipped).
    """
    mat = rho0.matrix if isinstance(rho0, DensityMatrix) else np.asarray(rho0)
    if mat.shape != (frame.space.dim,) * 2:
        raise DimensionMismatchError("state does not live on the frame's space")
    c_pp = float(np.real(np.trace(invariants.j_pp.data @ mat)))
    c_pm = complex(np.trace(invariants.j_pm.data.conj().T @ mat))
    # tr(J_pm^dag rho) equals the |C+><C-| coefficient of the asymptotic state
    # (fixed by the closed-form coherent-state integral, which this toolkit
    # validates against its erf/erfi limits)
    two = np.array([[c_pp, c_pm], [np.conj(c_pm), 1.0 - c_pp]])
    evals = np.linalg.eigvalsh(two)
    flag = bool(evals[0] < positivity_floor)
    if flag:
        # clip: project onto the PSD cone and renormalize
        w, v = np.linalg.eigh(two)
        w = np.clip(w, 0.0, None)
        two = (v * w) @ v.conj().T
        two /= np.trace(two).real
    basis = np.stack([frame.cat_plus.amplitudes, frame.cat_minus.amplitudes])
    full = basis.T @ two @ basis.conj()
    full = 0.5 * (full + full.conj().T)
    return AsymptoticResult(c_pp, c_pm, DensityMatrix(frame.space, full, validate=False), flag)


def two_photon_pump(frame: CatFrame, kappa2: float = 1.0) -> Dissipator:
    """The stabilizing dissipator kappa2 D[a^2 - alpha^2] on the frame's space."""
    a = frame.mode_ops()[0]
    return Dissipator(kappa2, a @ a - frame.alpha**2, label="two_photon_pump")


def bitflip_probability(model: LindbladModel, frame: CatFrame, duration: float,
                        invariants: Invariants | None = None,
                        initial_state=None,
                        rtol: float = 1e-10, atol: float = 1e-14) -> float:
    """Bit-flip probability after evolving the computational zero for ``duration``.

    Readout through the conserved quantity: p = (1 - tr(J_Z rho(T))) / 2,
    i.e. the asymptotic population of |1>_c once pumping is left on.

    The default initial state is the exact logical zero (|C+> + |C->)/sqrt2.
    Passing ``frame.coh_plus`` instead models the displacement-based
    preparation; the coherent state carries an intrinsic J_Z deficit of
    e^{-4 nbar}/2 that then floors the measured probability.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    if invariants is None:
        invariants = build_invariants(frame)
    if initial_state is None:
        initial_state = frame.logical_zero
    res = integrate(model, initial_state, (0.0, duration), rtol=rtol, atol=atol,
                    store_states=True)
    jz = float(np.real(np.trace(invariants.j_z.data @ res.final.matrix)))
    return 0.5 * (1.0 - jz)


def _gauss_hermite_displacements(space, sigma: float, nodes: int):
    """Kraus family for an isotropic Gaussian displacement of std ``sigma``.

    2-D Gauss-Hermite grid; the weights sum to one exactly for any node
    count, so completeness never degrades with the discretization.
    """
    x, w = np.polynomial.hermite.hermgauss(nodes)
    ops = []
    for i in range(nodes):
        for j in range(nodes):
            weight = w[i] * w[j] / math.pi
            beta = math.sqrt(2.0) * sigma * (x[i] + 1j * x[j])
            ops.append(Operator(space, math.sqrt(weight) * displacement(space, beta).data))
    return ops


def noise_channel(kind: str, frame_or_space, **params):
    """Standard single-mode noise processes.

    kinds and parameters:
      loss(kappa)                      -> Dissipator on a;
                                          with as_kraus=True, delta_t=..:
                                          the finite-time jump-count family
      thermal(kappa, n_th)             -> Dissipator on a^dag at kappa*n_th
      dephasing(kappa_phi)             -> Dissipator on a^dag a
      gaussian_displacement(gamma, delta_t, nodes=21) -> Kraus family
      dispersive_thermal(chi, delta_t, n_th, tail=1e-12) -> Kraus family
        (the deterministic -chi*n_th rotation is absorbed in the phases)
    """
    space = frame_or_space.space if isinstance(frame_or_space, CatFrame) else frame_or_space
    a, adag, n, _ = mode_operators(space, 0)
    if kind == "loss":
        kappa = params["kappa"]
        if kappa < 0:
            raise ValueError("kappa must be >= 0")
        if params.get("as_kraus"):
            return _loss_kraus(space, kappa, params["delta_t"], params.get("k_max"))
        return Dissipator(kappa, a, label="loss")
    if kind == "thermal":
        kappa, n_th = params["kappa"], params["n_th"]
        if n_th < 0:
            raise ValueError("n_th must be >= 0")
        return Dissipator(kappa * n_th, adag, label="thermal")
    if kind == "dephasing":
        return Dissipator(params["kappa_phi"], n, label="dephasing")
    if kind == "gaussian_displacement":
        gamma, delta_t = params["gamma"], params["delta_t"]
        sigma = math.sqrt(gamma * delta_t)
        return _gauss_hermite_displacements(space, sigma, params.get("nodes", 21))
    if kind == "dispersive_thermal":
        chi, delta_t, n_th = params["chi"], params["delta_t"], params["n_th"]
        tail = params.get("tail", 1e-12)
        if n_th < 0:
            raise ValueError("n_th must be >= 0")
        diag = np.arange(space.dim)
        ops = []
        if n_th == 0:
            probs = [(0, 1.0)]
        else:
            r = n_th / (1.0 + n_th)
            probs = []
            k, cum = 0, 0.0
            while cum < 1.0 - tail:
                p = (r**k) / (1.0 + n_th)
                probs.append((k, p))
                cum += p
                k += 1
            # renormalize the truncated thermal distribution
            total = sum(p for _, p in probs)
            probs = [(k, p / total) for k, p in probs]
        for k, p in probs:
            phase = np.exp(1j * chi * delta_t * (k - n_th) * diag)
            ops.append(Operator(space, np.diag(math.sqrt(p) * phase)))
        return ops
    raise ValueError(f"unknown noise kind {kind!r}")


def _loss_kraus(space, kappa: float, delta_t: float, k_max: int | None):
    """Finite-time photon-loss family E_k = sqrt((1-e^{-k dt})^k / k!) e^{-k dt n/2} a^k."""
    a = mode_operators(space, 0)[0].data
    n = np.arange(space.dim)
    decay = np.exp(-0.5 * kappa * delta_t * n)
    eta = 1.0 - math.exp(-kappa * delta_t)
    if k_max is None:
        # Poisson-like weights; dim is always a safe upper bound
        k_max = space.dim
    ops = []
    ak = np.eye(space.dim, dtype=complex)
    for k in range(k_max + 1):
        coeff = math.exp(0.5 * (k * math.log(eta) - gammaln(k + 1))) if eta > 0 else (1.0 if k == 0 else 0.0)
        mat = coeff * (decay[:, None] * ak)
        ops.append(Operator(space, mat))
        ak = ak @ a
        if k > 0 and np.max(np.abs(ops[-1].data)) < 1e-16:
            break
    return ops


@dataclass
class CorrectabilityResult:
    c: np.ndarray
    m: np.ndarray
    z: np.ndarray
    epsilon: float
    correctable: bool
    phase_flip_component: bool


def correctability_check(frame: CatFrame, errors, atol: float = 1e-9) -> CorrectabilityResult:
    """Knill-Laflamme check restricted to the cat manifold.

    Decomposes P F_j^dag F_k P = c_jk P + m_jk X_c (+ z_jk Z_c-type part).
    The verdict is "correctable up to epsilon" with epsilon = max|m|; a
    significant off-diagonal (Z_c) component is reported separately, since
    it signals a phase-flip action rather than an uncorrectable bit-flip.
    """
    kets = np.stack([frame.cat_plus.amplitudes, frame.cat_minus.amplitudes])
    nerr = len(errors)
    c = np.zeros((nerr, nerr), dtype=complex)
    m = np.zeros((nerr, nerr), dtype=complex)
    z = np.zeros((nerr, nerr), dtype=complex)
    z_single = 0.0
    for j, fj in enumerate(errors):
        if fj.space != frame.space:
            raise DimensionMismatchError("error operators must live on the frame's space")
        # Z_c/Y_c content of the error itself (e.g. a acts as alpha Z_c)
        single = kets.conj() @ fj.data @ kets.T
        z_single = max(z_single, abs(single[0, 1]), abs(single[1, 0]))
        for k, fk in enumerate(errors):
            block = kets.conj() @ (fj.data.conj().T @ fk.data) @ kets.T
            c[j, k] = 0.5 * (block[0, 0] + block[1, 1])
            m[j, k] = 0.5 * (block[0, 0] - block[1, 1])
            z[j, k] = block[0, 1]
    eps = float(np.max(np.abs(m)))
    return CorrectabilityResult(
        c=c,
        m=m,
        z=z,
        epsilon=eps,
        correctable=eps <= max(atol, 1e-6),
        phase_flip_component=bool(max(z_single, float(np.max(np.abs(z)))) > 1e-8),
    )
