"""Offset-diagonal ("banded") operator kernels for the integrator hot path.

Every jump operator and Hamiltonian used by the toolkit is a low-order
polynomial in mode ladder operators, so in the flattened tensor-product
basis it is supported on a handful of off-diagonals (offset k means matrix
entries M[r, r+k]).  Applying such an operator to a dense density matrix is
then a few strided multiply-adds, far cheaper than a dense matmul; this is
what makes two- and three-mode process tomography tractable on a small
machine.

The right-hand side is evaluated in the non-Hermitian-propagator form

    drho/dt = G rho + rho G^dag + sum_k kappa_k L_k rho L_k^dag,
    G = -i H - 1/2 sum_k kappa_k L_k^dag L_k,

which needs roughly half the memory passes of the textbook dissipator
grouping.  Kernels are JIT-compiled with numba when available, with a
vectorized-numpy fallback.  This module is internal: the public data model
stays dense (`Operator`); `lindblad.integrate` converts on entry and falls
back to dense matmuls for operators that are not banded.

All apply functions take batched states of shape (B, D, D).
"""

from __future__ import annotations

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is normally present
    HAVE_NUMBA = False

MAX_BAND_OFFSETS = 40


class BandedOp:
    """Operator stored as a sum of off-diagonals.

    data[i, r] is the matrix entry M[r, r + offsets[i]]; entries whose
    column index falls outside [0, D) are stored as zero and never touched.
    """

    __slots__ = ("dim", "offsets", "data")

    def __init__(self, dim: int, offsets, data):
        self.dim = dim
        self.offsets = np.ascontiguousarray(offsets, dtype=np.int64)
        self.data = np.ascontiguousarray(data, dtype=np.complex128)

    @classmethod
    def from_matrix(cls, mat: np.ndarray, max_offsets: int = MAX_BAND_OFFSETS):
        """Detect the off-diagonal support of a dense matrix.

        Returns None when the matrix occupies more than ``max_offsets``
        diagonals (caller should fall back to dense algebra).
        """
        dim = mat.shape[0]
        offsets = []
        for k in range(-dim + 1, dim):
            if np.any(np.diagonal(mat, k) != 0):
                offsets.append(k)
                if len(offsets) > max_offsets:
                    return None
        if not offsets:
            offsets = [0]
        data = np.zeros((len(offsets), dim), dtype=complex)
        for i, k in enumerate(offsets):
            diag = np.diagonal(mat, k)
            if k >= 0:
                data[i, : dim - k] = diag
            else:
                data[i, -k:] = diag
        return cls(dim, offsets, data)

    def to_matrix(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for i, k in enumerate(self.offsets):
            k = int(k)
            r0, r1 = _row_range(self.dim, k)
            rows = np.arange(r0, r1)
            out[rows, rows + k] = self.data[i, r0:r1]
        return out

    def dag(self) -> "BandedOp":
        """Conjugate transpose: offset k with data d -> offset -k, shifted conj(d)."""
        offsets = -self.offsets
        data = np.zeros_like(self.data)
        for i, k in enumerate(self.offsets):
            k = int(k)
            r0, r1 = _row_range(self.dim, k)
            # M[r, r+k] = d[r]  =>  M^dag[r+k, r] = conj(d[r])
            data[i, r0 + k : r1 + k] = np.conj(self.data[i, r0:r1])
        order = np.argsort(offsets)
        return BandedOp(self.dim, offsets[order], data[order])


def _row_range(dim: int, k: int) -> tuple[int, int]:
    return (max(0, -k), dim - max(0, k))


def banded_product(a: BandedOp, b: BandedOp) -> BandedOp:
    """C = A @ B for banded operators (offsets add pairwise)."""
    dim = a.dim
    prods: dict[int, np.ndarray] = {}
    for i, ka in enumerate(a.offsets):
        ka = int(ka)
        r0, r1 = _row_range(dim, ka)
        for j, kb in enumerate(b.offsets):
            kc = ka + int(kb)
            vec = prods.setdefault(kc, np.zeros(dim, dtype=complex))
            # C[r, r+kc] += A[r, r+ka] B[r+ka, r+ka+kb]; padded zeros guard edges
            vec[r0:r1] += a.data[i, r0:r1] * b.data[j, r0 + ka : r1 + ka]
    offsets = sorted(prods)
    data = np.stack([prods[k] for k in offsets]) if offsets else np.zeros((1, dim), complex)
    return BandedOp(dim, offsets or [0], data)


class TermSum:
    """Time-dependent banded operator  L(t) = sum_j f_j(t) K_j.

    The K_j are merged onto a common offset set once, so evaluating L(t)
    is a tiny tensor contraction over the coefficient vector.  Coefficients
    are complex scalars or callables t -> complex.
    """

    __slots__ = ("dim", "offsets", "stack", "coeffs", "_static", "_static_dag")

    def __init__(self, terms, dim: int):
        terms = list(terms)
        offsets = sorted({int(k) for _, op in terms for k in op.offsets})
        self.dim = dim
        self.offsets = np.asarray(offsets, dtype=np.int64)
        index = {k: i for i, k in enumerate(offsets)}
        self.stack = np.zeros((len(terms), len(offsets), dim), dtype=complex)
        self.coeffs = []
        for j, (coeff, op) in enumerate(terms):
            for i, k in enumerate(op.offsets):
                self.stack[j, index[int(k)], :] = op.data[i]
            self.coeffs.append(coeff)
        if not any(callable(c) for c in self.coeffs):
            vec = np.array([complex(c) for c in self.coeffs])
            self._static = BandedOp(dim, self.offsets, np.tensordot(vec, self.stack, axes=1))
            self._static_dag = self._static.dag()
        else:
            self._static = None
            self._static_dag = None

    def coefficient_vector(self, t: float) -> np.ndarray:
        return np.array(
            [complex(c(t)) if callable(c) else complex(c) for c in self.coeffs]
        )

    def at(self, t: float) -> tuple[BandedOp, BandedOp]:
        """(L(t), L(t)^dag)."""
        if self._static is not None:
            return self._static, self._static_dag
        vec = self.coefficient_vector(t)
        op = BandedOp(self.dim, self.offsets, np.tensordot(vec, self.stack, axes=1))
        return op, op.dag()


# ---------------------------------------------------------------------------
# apply kernels
# ---------------------------------------------------------------------------


def _np_apply_left(offsets, data, rho, out, accumulate, scale):
    if not accumulate:
        out[...] = 0.0
    dim = rho.shape[-1]
    for i, k in enumerate(offsets):
        k = int(k)
        r0, r1 = _row_range(dim, k)
        d = scale * data[i, r0:r1]
        out[..., r0:r1, :] += d[:, None] * rho[..., r0 + k : r1 + k, :]
    return out


def _np_apply_right(offsets, data, rho, out, accumulate, scale):
    if not accumulate:
        out[...] = 0.0
    dim = rho.shape[-1]
    for i, k in enumerate(offsets):
        k = int(k)
        r0, r1 = _row_range(dim, k)
        d = scale * data[i, r0:r1]
        out[..., :, r0 + k : r1 + k] += rho[..., :, r0:r1] * d[None, :]
    return out


def _np_rk_stage(out, y, kstack, idxs, coeffs, h):
    out[...] = y
    flat = out.reshape(-1)
    for j, c in zip(idxs, coeffs):
        flat += (h * c) * kstack[j]


def _np_error_norm(y, ynew, kstack, idxs, coeffs, h, rtol, atol):
    err = np.zeros(y.size, dtype=complex)
    for j, c in zip(idxs, coeffs):
        err += (h * c) * kstack[j]
    m = np.maximum(np.abs(y.reshape(-1)), np.abs(ynew.reshape(-1)))
    scale2 = atol * atol + (rtol * rtol) * m * m
    return float(np.sqrt(np.mean(np.abs(err) ** 2 / scale2)))


def _np_symmetrize(y):
    y += np.conj(np.swapaxes(y, -1, -2))
    y *= 0.5


if HAVE_NUMBA:
    _jit = numba.njit(cache=True, fastmath=True, parallel=True, nogil=True)

    @_jit
    def _nb_apply_left(offsets, data, rho, out, accumulate, scale):
        nb_, dim, _ = rho.shape
        m = offsets.shape[0]
        for br in numba.prange(nb_ * dim):
            b = br // dim
            r = br - b * dim
            orow = out[b, r]
            if not accumulate:
                for j in range(dim):
                    orow[j] = 0.0
            for i in range(m):
                src_r = r + offsets[i]
                if 0 <= src_r < dim:
                    c = scale * data[i, r]
                    if c != 0.0:
                        srow = rho[b, src_r]
                        for j in range(dim):
                            orow[j] += c * srow[j]

    @_jit
    def _nb_apply_right(offsets, data, rho, out, accumulate, scale):
        nb_, dim, _ = rho.shape
        m = offsets.shape[0]
        for bp in numba.prange(nb_ * dim):
            b = bp // dim
            p = bp - b * dim
            irow = rho[b, p]
            orow = out[b, p]
            if not accumulate:
                for j in range(dim):
                    orow[j] = 0.0
            for i in range(m):
                k = offsets[i]
                r0 = max(0, -k)
                r1 = dim - max(0, k)
                for r in range(r0, r1):
                    c = scale * data[i, r]
                    orow[r + k] += irow[r] * c

    @_jit
    def _nb_rk_stage(out, y, kstack, idxs, coeffs, h):
        n = y.shape[0]
        ns = idxs.shape[0]
        for i in numba.prange(n):
            s = y[i]
            for j in range(ns):
                s += (h * coeffs[j]) * kstack[idxs[j], i]
            out[i] = s

    @_jit
    def _nb_error_norm(y, ynew, kstack, idxs, coeffs, h, rtol, atol):
        # squared scale atol^2 + rtol^2 max(|y|^2,|ynew|^2): same step control
        # as the abs-based scale up to a factor <= sqrt(2), and sqrt-free
        n = y.shape[0]
        ns = idxs.shape[0]
        acc = 0.0
        a2 = atol * atol
        r2 = rtol * rtol
        for i in numba.prange(n):
            e = 0.0 + 0.0j
            for j in range(ns):
                e += (h * coeffs[j]) * kstack[idxs[j], i]
            yi = y[i]
            zi = ynew[i]
            m1 = yi.real * yi.real + yi.imag * yi.imag
            m2 = zi.real * zi.real + zi.imag * zi.imag
            if m2 > m1:
                m1 = m2
            acc += (e.real * e.real + e.imag * e.imag) / (a2 + r2 * m1)
        return np.sqrt(acc / n)

    @_jit
    def _nb_symmetrize(y):
        nb_, dim, _ = y.shape
        for bi in numba.prange(nb_ * dim):
            b = bi // dim
            i = bi - b * dim
            y[b, i, i] = complex(y[b, i, i].real, 0.0)
            for j in range(i + 1, dim):
                v = 0.5 * (y[b, i, j] + np.conj(y[b, j, i]))
                y[b, i, j] = v
                y[b, j, i] = np.conj(v)

    def apply_left(op, rho, out, accumulate=False, scale=1.0 + 0.0j):
        _nb_apply_left(op.offsets, op.data, rho, out, accumulate, complex(scale))
        return out

    def apply_right(op, rho, out, accumulate=False, scale=1.0 + 0.0j):
        _nb_apply_right(op.offsets, op.data, rho, out, accumulate, complex(scale))
        return out

    def rk_stage(out, y, kstack, idxs, coeffs, h):
        _nb_rk_stage(out.reshape(-1), y.reshape(-1), kstack, idxs, coeffs, h)

    def error_norm(y, ynew, kstack, idxs, coeffs, h, rtol, atol):
        return float(
            _nb_error_norm(
                y.reshape(-1), ynew.reshape(-1), kstack, idxs, coeffs, h, rtol, atol
            )
        )

    symmetrize = _nb_symmetrize
else:  # pragma: no cover - exercised only without numba
    def apply_left(op, rho, out, accumulate=False, scale=1.0 + 0.0j):
        return _np_apply_left(op.offsets, op.data, rho, out, accumulate, complex(scale))

    def apply_right(op, rho, out, accumulate=False, scale=1.0 + 0.0j):
        return _np_apply_right(op.offsets, op.data, rho, out, accumulate, complex(scale))

    def rk_stage(out, y, kstack, idxs, coeffs, h):
        _np_rk_stage(out, y, kstack, idxs, coeffs, h)

    def error_norm(y, ynew, kstack, idxs, coeffs, h, rtol, atol):
        return _np_error_norm(y, ynew, kstack, idxs, coeffs, h, rtol, atol)

    symmetrize = _np_symmetrize


# ---------------------------------------------------------------------------
# compiled right-hand sides
# ---------------------------------------------------------------------------


class BandedRHS:
    """drho/dt = G rho + rho G^dag + sum_k kappa_k L_k rho L_k^dag.

    G collects -iH and all -kappa/2 L^dag L contributions into one banded
    operator; its time-dependent pieces are pre-multiplied banded products
    K_j^dag K_j' whose scalar weights are refreshed at each evaluation.
    """

    def __init__(self, ham_terms, dissipators, dim):
        g_terms = []
        for coeff, bop in ham_terms:
            if callable(coeff):
                g_terms.append((_ScaledCoeff(-1j, coeff), bop))
            else:
                g_terms.append((-1j * complex(coeff), bop))
        self.jumps = []
        for rate, terms in dissipators:
            ts = TermSum(terms, dim)
            self.jumps.append((float(rate), ts))
            m = len(terms)
            for j in range(m):
                cj, kj = terms[j]
                kjd = kj.dag()
                for jp in range(m):
                    cjp, kjp = terms[jp]
                    prod = banded_product(kjd, kjp)
                    if callable(cj) or callable(cjp):
                        g_terms.append((_PairCoeff(-0.5 * rate, cj, cjp), prod))
                    else:
                        w = -0.5 * rate * np.conj(complex(cj)) * complex(cjp)
                        g_terms.append((w, prod))
        self.g_sum = TermSum(g_terms, dim)
        self.work = None
        self.n_rhs = 0

    def rhs(self, t, rho, out):
        if self.work is None or self.work.shape != rho.shape:
            self.work = np.empty_like(rho)
        g, gd = self.g_sum.at(t)
        apply_left(g, rho, out)
        apply_right(gd, rho, out, accumulate=True)
        for rate, ts in self.jumps:
            op, opd = ts.at(t)
            apply_left(op, rho, self.work)
            apply_right(opd, self.work, out, accumulate=True, scale=rate)
        self.n_rhs += 1
        return out


class _ScaledCoeff:
    __slots__ = ("scale", "inner")

    def __init__(self, scale, inner):
        self.scale = scale
        self.inner = inner

    def __call__(self, t):
        return self.scale * self.inner(t)


class _PairCoeff:
    """weight * conj(f_j(t)) * f_j'(t) for the L^dag L cross terms."""

    __slots__ = ("weight", "left", "right")

    def __init__(self, weight, left, right):
        self.weight = weight
        self.left = left
        self.right = right

    def __call__(self, t):
        lv = self.left(t) if callable(self.left) else complex(self.left)
        rv = self.right(t) if callable(self.right) else complex(self.right)
        return self.weight * np.conj(lv) * rv


class DenseRHS:
    """Dense-matrix fallback for models with non-banded operators."""

    def __init__(self, ham_terms, dissipators, dim):
        self.ham_terms = [(c, np.asarray(m)) for c, m in ham_terms]
        self.dissipators = [
            (rate, [(c, np.asarray(m)) for c, m in terms]) for rate, terms in dissipators
        ]
        self.n_rhs = 0

    @staticmethod
    def _assemble(terms, t):
        total = None
        for c, m in terms:
            val = complex(c(t)) if callable(c) else complex(c)
            total = val * m if total is None else total + val * m
        return total

    def rhs(self, t, rho, out):
        out[...] = 0.0
        if self.ham_terms:
            h = self._assemble(self.ham_terms, t)
            a = h @ rho
            out += -1j * a
            out += 1j * np.conj(np.swapaxes(a, -1, -2))
        for rate, terms in self.dissipators:
            ell = self._assemble(terms, t)
            a = ell @ rho
            c = ell.conj().T @ a
            out += rate * (a @ ell.conj().T)
            out -= (0.5 * rate) * (c + np.conj(np.swapaxes(c, -1, -2)))
        self.n_rhs += 1
        return out
