"""Truncated Fock-space linear algebra for bosonic-mode simulations.

Everything is a dense complex matrix over a photon-number basis
|0>, ..., |N-1| (tensor products of such bases for multimode systems).
States and operators are immutable after construction, so they can be
shared freely between threads and worker processes.

Conventions
-----------
* Tensor products are row-major (numpy ``kron`` order): the first mode is
  the slowest index.
* The displacement operator is D(alpha) = expm(alpha a^dag - alpha* a),
  computed as an exact matrix exponential so it stays unitary even at the
  truncation edge.
* The Wigner function uses the displaced-parity convention
  W(beta) = (2/pi) tr[D(-beta) rho D(beta) Pi] with beta = x + i p, which
  puts the vacuum at W(0) = 2/pi and normalizes the (x, p) integral to 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import DimensionMismatchError, TruncationError

HERMITIAN_ATOL = 1e-10
UNITARY_ATOL = 1e-9
KET_NORM_ATOL = 1e-10
TRACE_ATOL = 1e-9
EIG_FLOOR = -1e-8


def adequate_dim(nbar: float) -> int:
    """Smallest truncation that keeps coherent-state tails below ~1e-10.

    dim >= nbar + 6 sqrt(nbar) + 10, evaluated at mean photon number nbar.
    """
    return int(math.ceil(nbar + 6.0 * math.sqrt(nbar) + 10.0))


def check_truncation(dim: int, alpha: complex) -> None:
    """Raise TruncationError unless |alpha|^2 + 6|alpha| + 10 <= dim."""
    a = abs(alpha)
    required = a * a + 6.0 * a + 10.0
    if required > dim:
        raise TruncationError(
            f"amplitude |alpha|={a:.3f} needs dim >= {math.ceil(required)}, got {dim}"
        )


@dataclass(frozen=True)
class FockSpace:
    """A truncated Fock space, possibly a tensor product of modes."""

    modes: tuple[int, ...]

    def __init__(self, modes):
        if isinstance(modes, int):
            modes = (modes,)
        modes = tuple(int(m) for m in modes)
        if not modes or any(m < 2 for m in modes):
            raise ValueError(f"every mode needs dim >= 2, got {modes}")
        object.__setattr__(self, "modes", modes)

    @property
    def dim(self) -> int:
        return math.prod(self.modes)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def stride(self, mode: int) -> int:
        """Flat-index stride of one photon in the given mode."""
        return math.prod(self.modes[mode + 1:])

    def __repr__(self):
        return f"FockSpace{self.modes}"


def _as_matrix(data, dim: int) -> np.ndarray:
    arr = np.ascontiguousarray(data, dtype=complex)
    if arr.shape != (dim, dim):
        raise DimensionMismatchError(f"expected {dim}x{dim} matrix, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Operator:
    """Dense complex operator on a FockSpace."""

    space: FockSpace
    data: np.ndarray

    def __init__(self, space: FockSpace, data):
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "data", _as_matrix(data, space.dim))

    def dag(self) -> "Operator":
        return Operator(self.space, self.data.conj().T)

    def is_hermitian(self, atol: float = HERMITIAN_ATOL) -> bool:
        return bool(np.max(np.abs(self.data - self.data.conj().T)) <= atol)

    def is_unitary(self, atol: float = UNITARY_ATOL) -> bool:
        d = self.space.dim
        return bool(np.max(np.abs(self.data @ self.data.conj().T - np.eye(d))) <= atol)

    def _coerce(self, other):
        if isinstance(other, Operator):
            if other.space != self.space:
                raise DimensionMismatchError("operators on different spaces")
            return other.data
        return other

    def __matmul__(self, other):
        if isinstance(other, Ket):
            return Ket(self.space, self.data @ other.amplitudes, validate=False)
        return Operator(self.space, self.data @ self._coerce(other))

    def __add__(self, other):
        if np.isscalar(other):
            return Operator(self.space, self.data + other * np.eye(self.space.dim))
        return Operator(self.space, self.data + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        if np.isscalar(other):
            return self + (-other)
        return Operator(self.space, self.data - self._coerce(other))

    def __rsub__(self, other):
        return (-1.0 * self) + other

    def __mul__(self, scalar):
        return Operator(self.space, scalar * self.data)

    __rmul__ = __mul__

    def __neg__(self):
        return -1.0 * self


@dataclass(frozen=True)
class Ket:
    """Pure state (unit-norm vector) on a FockSpace."""

    space: FockSpace
    amplitudes: np.ndarray

    def __init__(self, space: FockSpace, amplitudes, validate: bool = True):
        arr = np.ascontiguousarray(amplitudes, dtype=complex).reshape(-1)
        if arr.shape != (space.dim,):
            raise DimensionMismatchError(
                f"expected vector of length {space.dim}, got {arr.shape}"
            )
        if validate and abs(np.linalg.norm(arr) - 1.0) > KET_NORM_ATOL:
            raise ValueError(f"ket norm {np.linalg.norm(arr):.12f} != 1")
        arr.setflags(write=False)
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "amplitudes", arr)

    def normalized(self) -> "Ket":
        return Ket(self.space, self.amplitudes / np.linalg.norm(self.amplitudes))

    def overlap(self, other: "Ket") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(self.space, np.outer(self.amplitudes, self.amplitudes.conj()))


class DensityMatrix:
    """Mixed state: Hermitian, unit trace, positive up to a small floor.

    The Hermiticity and trace checks run at construction; the eigenvalue
    floor is verified lazily through :meth:`min_eigenvalue` because a full
    diagonalization is expensive for large multimode spaces.
    """

    __slots__ = ("space", "matrix", "_min_eig")

    def __init__(self, space: FockSpace, matrix, validate: bool = True):
        arr = _as_matrix(matrix, space.dim)
        if validate:
            herm = np.max(np.abs(arr - arr.conj().T))
            if herm > 1e-8:
                raise ValueError(f"density matrix not Hermitian (max dev {herm:.2e})")
            tr = np.trace(arr)
            if abs(tr - 1.0) > TRACE_ATOL:
                raise ValueError(f"density matrix trace {tr:.12f} != 1")
        self.space = space
        self.matrix = arr
        self._min_eig = None

    def min_eigenvalue(self) -> float:
        if self._min_eig is None:
            self._min_eig = float(np.linalg.eigvalsh(self.matrix)[0])
        return self._min_eig

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def fidelity_with_ket(self, ket: Ket) -> float:
        """<psi|rho|psi> for a pure reference state."""
        v = ket.amplitudes
        return float(np.real(np.vdot(v, self.matrix @ v)))


def _single_mode_destroy(dim: int) -> np.ndarray:
    a = np.zeros((dim, dim), dtype=complex)
    ns = np.arange(1, dim)
    a[ns - 1, ns] = np.sqrt(ns)
    return a


def _embed(space: FockSpace, mode: int, block: np.ndarray) -> np.ndarray:
    mats = [np.eye(d, dtype=complex) for d in space.modes]
    mats[mode] = block
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def mode_operators(space: FockSpace, mode: int = 0):
    """Ladder, number and parity operators of one mode, embedded by identity.

    Returns (a, a_dag, n, parity). Within the truncation a|n> = sqrt(n)|n-1>;
    the commutator [a, a^dag] deviates from identity only on the last basis
    state of the mode.
    """
    if not 0 <= mode < space.n_modes:
        raise ValueError(f"mode {mode} out of range for {space}")
    d = space.modes[mode]
    a = _single_mode_destroy(d)
    n_diag = np.diag(np.arange(d, dtype=complex))
    parity = np.diag((-1.0 + 0j) ** np.arange(d))
    return (
        Operator(space, _embed(space, mode, a)),
        Operator(space, _embed(space, mode, a.conj().T)),
        Operator(space, _embed(space, mode, n_diag)),
        Operator(space, _embed(space, mode, parity)),
    )


def identity(space: FockSpace) -> Operator:
    return Operator(space, np.eye(space.dim, dtype=complex))


def fock_ket(space: FockSpace, occupations) -> Ket:
    """Basis ket |n_0, n_1, ...>."""
    if isinstance(occupations, int):
        occupations = (occupations,)
    occupations = tuple(occupations)
    if len(occupations) != space.n_modes:
        raise ValueError("one occupation number per mode required")
    idx = 0
    for mode, n in enumerate(occupations):
        if not 0 <= n < space.modes[mode]:
            raise ValueError(f"occupation {n} exceeds mode dim {space.modes[mode]}")
        idx += n * space.stride(mode)
    vec = np.zeros(space.dim, dtype=complex)
    vec[idx] = 1.0
    return Ket(space, vec)


def vacuum(space: FockSpace) -> Ket:
    return fock_ket(space, (0,) * space.n_modes)


def coherent(space: FockSpace, alpha: complex) -> Ket:
    """Coherent state |alpha> on a single-mode space, renormalized after truncation.

    Amplitudes exp(-|alpha|^2/2) alpha^n / sqrt(n!). The truncation-adequacy
    precondition |alpha|^2 + 6|alpha| + 10 <= dim is enforced.
    """
    if space.n_modes != 1:
        raise ValueError("coherent() expects a single-mode space; use tensor_kets")
    check_truncation(space.dim, alpha)
    n = np.arange(space.dim)
    # log-space evaluation avoids overflow of alpha^n for large n
    if alpha == 0:
        return vacuum(space)
    logmag = n * math.log(abs(alpha)) - 0.5 * np.cumsum(np.log(np.maximum(n, 1)))
    phase = np.exp(1j * np.angle(alpha) * n)
    amps = np.exp(logmag - abs(alpha) ** 2 / 2.0) * phase
    return Ket(space, amps / np.linalg.norm(amps))


def cat(space: FockSpace, alpha: complex, parity: int = +1) -> Ket:
    """Even (+) or odd (-) cat state N_pm (|alpha> +/- |-alpha>).

    The + cat has support only on even Fock states, the - cat only on odd.
    """
    if parity not in (+1, -1):
        raise ValueError("parity must be +1 or -1")
    if alpha == 0 and parity == -1:
        raise ValueError("odd cat is undefined at alpha = 0")
    plus = coherent(space, alpha).amplitudes
    minus = coherent(space, -alpha).amplitudes
    amps = plus + parity * minus
    # exact parity structure: zero out round-off on the wrong-parity entries
    wrong = np.arange(space.dim) % 2 != (0 if parity == +1 else 1)
    amps = amps.copy()
    amps[wrong] = 0.0
    return Ket(space, amps / np.linalg.norm(amps))


def displacement(space: FockSpace, alpha: complex) -> Operator:
    """Unitary displacement D(alpha) = expm(alpha a^dag - alpha* a) (single mode)."""
    if space.n_modes != 1:
        raise ValueError("displacement() expects a single-mode space")
    a = _single_mode_destroy(space.dim)
    gen = alpha * a.conj().T - np.conj(alpha) * a
    return Operator(space, expm(gen))


def tensor(*ops: Operator) -> Operator:
    """Kronecker product of operators; the result lives on the joined space."""
    if not ops:
        raise ValueError("tensor() needs at least one operator")
    modes = sum((op.space.modes for op in ops), ())
    data = ops[0].data
    for op in ops[1:]:
        data = np.kron(data, op.data)
    return Operator(FockSpace(modes), data)


def tensor_kets(*kets: Ket) -> Ket:
    modes = sum((k.space.modes for k in kets), ())
    amps = kets[0].amplitudes
    for k in kets[1:]:
        amps = np.kron(amps, k.amplitudes)
    return Ket(FockSpace(modes), amps)


def expect(op: Operator, state) -> complex:
    """tr(O rho) for a density matrix, <psi|O|psi> for a ket."""
    if isinstance(state, Ket):
        if state.space != op.space:
            raise DimensionMismatchError("operator and ket on different spaces")
        return complex(np.vdot(state.amplitudes, op.data @ state.amplitudes))
    if state.space != op.space:
        raise DimensionMismatchError("operator and state on different spaces")
    return complex(np.trace(op.data @ state.matrix))


def wigner(state, x_grid, p_grid) -> np.ndarray:
    """Wigner function on a rectangular (x, p) grid, beta = x + i p.

    Displaced-parity evaluation: W(beta) = (2/pi) tr[D(-beta) rho D(beta) Pi].
    Returns a real array of shape (len(x_grid), len(p_grid)).
    """
    space = state.space
    if space.n_modes != 1:
        raise ValueError("wigner() expects a single-mode state")
    x_grid = np.asarray(x_grid, dtype=float)
    p_grid = np.asarray(p_grid, dtype=float)
    beta_max = math.hypot(np.max(np.abs(x_grid)), np.max(np.abs(p_grid)))
    check_truncation(space.dim, beta_max)

    dim = space.dim
    a = _single_mode_destroy(dim)
    # D(r e^{i theta}) = P_theta expm(r (a^dag - a)) P_theta^dag with
    # P_theta = diag(e^{i theta n}); diagonalize the radial generator once.
    herm = 1j * (a.conj().T - a)
    evals, q = np.linalg.eigh(herm)
    ns = np.arange(dim)
    parity = (-1.0) ** ns

    ket = state.amplitudes if isinstance(state, Ket) else None
    rho = None if ket is not None else state.matrix

    out = np.empty((x_grid.size, p_grid.size))
    for i, x in enumerate(x_grid):
        for j, p in enumerate(p_grid):
            r = math.hypot(x, p)
            theta = math.atan2(p, x)
            radial = (q * np.exp(-1j * r * evals)) @ q.conj().T
            phases = np.exp(1j * theta * ns)
            disp = (phases[:, None] * radial) * phases.conj()[None, :]
            if ket is not None:
                v = disp.conj().T @ ket
                out[i, j] = (2.0 / math.pi) * float(
                    np.real(np.sum(parity * np.abs(v) ** 2))
                )
            else:
                m = disp.conj().T @ rho @ disp
                out[i, j] = (2.0 / math.pi) * float(
                    np.real(np.sum(parity * np.diagonal(m)))
                )
    return out


def wigner_to_csv(path, x_grid, p_grid, w: np.ndarray) -> None:
    """Write a Wigner grid as CSV with header ``x,p,w``, row-major over the grid."""
    x_grid = np.asarray(x_grid, dtype=float)
    p_grid = np.asarray(p_grid, dtype=float)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,p,w\n")
        for i, x in enumerate(x_grid):
            for j, p in enumerate(p_grid):
                fh.write(f"{x:.12g},{p:.12g},{w[i, j]:.12g}\n")
