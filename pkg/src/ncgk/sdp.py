"""Semidefinite relaxations over vector-valued unitary/orthogonal matrices.

The variable is the Gram matrix ``G`` of the ``2 n^2`` vectors
``X[0,0], ..., X[n-1,n-1], Y[0,0], ..., Y[n-1,n-1]`` (``G[p, q] = <v_p, v_q>``).
Row and column Gram products of ``X`` are partial traces of the ``X`` block
of ``G``, so every constraint is of the form ``kron(E, I)`` or ``kron(I, E)``
restricted to a diagonal block. The solver exploits that structure when
forming the Schur complement.

Three relaxations are available:

``"unitary-complex"``
    ``XX* = X*X = YY* = Y*Y = I`` over complex vectors.
``"unitary-real"``
    The same constraints over real vectors (requires a real tensor).
``"nc-norm"``
    ``||XX*|| + ||X*X|| <= 2`` and likewise for ``Y``, modelled as
    ``XX* <= s I`` and ``X*X <= (2 - s) I``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import _ipm
from .errors import ConvergenceError, DomainError
from .tensor import Tensor4, as_vecmat, evaluate, gram_products, op_norm

DEFAULT_FEAS_TOL = 1e-8
DEFAULT_GAP_TOL = 1e-6
DEFAULT_MAX_ITER = 200
RANK_CUTOFF = 1e-10


class RelaxationMode(str, enum.Enum):
    UNITARY_COMPLEX = "unitary-complex"
    UNITARY_REAL = "unitary-real"
    NC_NORM = "nc-norm"


@dataclass
class GramSolution:
    """Relaxed optimum with a recovered vector-valued witness.

    Attributes
    ----------
    X, Y : ndarray, shape (n, n, d)
        Factor of the optimal Gram matrix, rescaled so every Gram product
        has norm at most one (or sum at most two in nc mode).
    value : float
        ``M(X, Y)``; ``X`` is phase-rotated so this is real and nonnegative.
    upper_bound : float
        Dual objective of a dual-feasible point; a certified upper bound on
        the relaxation value up to floating-point rounding.
    residuals : dict
        Constraint violations of the returned ``X`` and ``Y``.
    mode : RelaxationMode
    iterations : int
    """

    X: np.ndarray
    Y: np.ndarray
    value: float
    upper_bound: float
    residuals: dict
    mode: RelaxationMode
    iterations: int = 0
    primal_objective: float = float("nan")
    gram: np.ndarray = field(default=None, repr=False)


def hermitian_basis(n: int, complex_: bool) -> np.ndarray:
    """Orthonormal basis of Hermitian (or real symmetric) ``n x n`` matrices.

    Diagonal units come first, in order.
    """
    mats = []
    for i in range(n):
        E = np.zeros((n, n))
        E[i, i] = 1.0
        mats.append(E)
    r = 1.0 / np.sqrt(2.0)
    for i in range(n):
        for j in range(i + 1, n):
            E = np.zeros((n, n))
            E[i, j] = E[j, i] = r
            mats.append(E)
    if complex_:
        mats = [m.astype(np.complex128) for m in mats]
        for i in range(n):
            for j in range(i + 1, n):
                E = np.zeros((n, n), dtype=np.complex128)
                E[i, j] = 1j * r
                E[j, i] = -1j * r
                mats.append(E)
    return np.array(mats)


# Letters for the index pattern sum A[(i1,i2),(k1,k2)] W[k1,k2,l1,l2]
# B[(l1,l2),(p1,p2)] Zi[p1,p2,i1,i2]; "P" acts on the first factor of the
# Kronecker product, "Q" on the second.
def _kernel_subscripts(kind_a: str, kind_b: str) -> str:
    i1, i2, k1, k2, l1, l2, p1, p2 = "abcdefgh"
    if kind_a == "P":
        k2, act_a = i2, (i1, k1)
    else:
        k1, act_a = i1, (i2, k2)
    if kind_b == "P":
        p2, act_b = l2, (l1, p1)
    else:
        p1, act_b = l1, (l2, p2)
    return f"{k1}{k2}{l1}{l2},{p1}{p2}{i1}{i2}->{act_a[0]}{act_a[1]}{act_b[0]}{act_b[1]}"


_KERNELS = {(a, b): _kernel_subscripts(a, b) for a in "PQ" for b in "PQ"}


def _flat(basis):
    return basis.reshape(basis.shape[0], basis.shape[1] * basis.shape[2])


@dataclass
class _Family:
    side: int  # 0 for X, 1 for Y
    kind: str  # "P": row Gram XX*, "Q": column Gram
    basis: np.ndarray
    rows: np.ndarray


class _GramPart:
    """Partial-trace constraints on the Gram block."""

    def __init__(self, n: int, families: list):
        self.block = 0
        self.n = n
        self.families = families

    def _sl(self, side):
        nn = self.n * self.n
        return slice(side * nn, (side + 1) * nn)

    def _trace(self, G, side, kind):
        n = self.n
        G4 = G[self._sl(side), self._sl(side)].reshape(n, n, n, n)
        return np.einsum("ajbj->ab", G4) if kind == "P" else np.einsum("iaib->ab", G4)

    def apply(self, G, out):
        for f in self.families:
            T = self._trace(G, f.side, f.kind)
            out[f.rows] += np.real(_flat(f.basis) @ T.T.reshape(-1))

    def adjoint(self, y, out):
        eye = np.eye(self.n)
        for f in self.families:
            S = (y[f.rows] @ _flat(f.basis)).reshape(self.n, self.n)
            K = np.kron(S, eye) if f.kind == "P" else np.kron(eye, S)
            out[self._sl(f.side), self._sl(f.side)] += K

    def schur(self, G, Zi, H):
        n = self.n
        for fa in self.families:
            for fb in self.families:
                W4 = G[self._sl(fa.side), self._sl(fb.side)].reshape(n, n, n, n)
                Z4 = Zi[self._sl(fb.side), self._sl(fa.side)].reshape(n, n, n, n)
                K = np.einsum(_KERNELS[fa.kind, fb.kind], W4, Z4, optimize=True)
                T = _flat(fa.basis) @ K.reshape(n * n, n * n)
                H[np.ix_(fa.rows, fb.rows)] += np.real(T @ _flat(fb.basis).T)


@dataclass
class _Problem:
    op: _ipm.Operator
    b: np.ndarray
    C: list
    certificate: np.ndarray  # dual direction y_I with A^*(y_I) >= I on every block


def _build_problem(M: Tensor4, mode: RelaxationMode) -> _Problem:
    n = M.n
    nn = n * n
    cplx = mode != RelaxationMode.UNITARY_REAL
    dtype = np.complex128 if cplx else np.float64
    basis = hermitian_basis(n, cplx)
    nb = basis.shape[0]
    traces = np.real(np.einsum("aii->a", basis))
    nc = mode == RelaxationMode.NC_NORM

    families, b, cert = [], [], []
    row = 0
    for side in (0, 1):
        for kind in "PQ":
            E = basis
            if not nc and kind == "Q":
                # trace(XX*) = trace(X*X) makes one column constraint redundant
                E = basis[np.arange(nb) != n - 1]
            rows = np.arange(row, row + E.shape[0])
            row += E.shape[0]
            families.append(_Family(side, kind, E, rows))
            tr = np.real(np.einsum("aii->a", E))
            if nc:
                b.append(2.0 * tr if kind == "Q" else np.zeros(E.shape[0]))
                cert.append(2.0 * tr if kind == "Q" else tr)
            else:
                b.append(tr)
                cert.append(tr if kind == "P" else np.zeros(E.shape[0]))
    m = row
    blocks = [_ipm.BlockSpec("psd", 2 * nn)]
    parts = [_GramPart(n, families)]
    if nc:
        # slack blocks: XX* + S1 = s I, X*X + S2 = (2 - s) I, and s >= 0
        for f in families:
            blocks.append(_ipm.BlockSpec("psd", n))
            parts.append(_ipm.DensePart(len(blocks) - 1, f.rows, f.basis.astype(dtype)))
        blocks.append(_ipm.BlockSpec("lp", 2))
        lp_rows = np.concatenate([f.rows for f in families])
        lp_mat = np.zeros((lp_rows.size, 2))
        pos = 0
        for f in families:
            k = f.rows.size
            lp_mat[pos:pos + k, f.side] = -traces if f.kind == "P" else traces
            pos += k
        parts.append(_ipm.LPPart(len(blocks) - 1, lp_rows, lp_mat))
    op = _ipm.Operator(m, blocks, parts, dtype)

    Mm = M.matrix()
    if not cplx:
        Mm = Mm.real
    Cg = np.zeros((2 * nn, 2 * nn), dtype=dtype)
    Cg[:nn, nn:] = 0.5 * Mm.conj()
    Cg[nn:, :nn] = 0.5 * Mm.T
    C = op.zeros()
    C[0] = Cg
    return _Problem(op, np.concatenate(b), C, np.concatenate(cert))


def _factor(G: np.ndarray, n: int):
    lam, V = np.linalg.eigh(0.5 * (G + G.conj().T))
    keep = lam > RANK_CUTOFF * max(lam[-1], 0.0) if lam[-1] > 0 else np.zeros_like(lam, dtype=bool)
    if not keep.any():
        keep[-1] = True
        lam = np.maximum(lam, 0.0)
    F = V[:, keep] * np.sqrt(lam[keep])
    nn = n * n
    return F[:nn].reshape(n, n, -1), F[nn:].reshape(n, n, -1)


def gram_residuals(X, Y, mode: RelaxationMode) -> dict:
    out = {}
    for name, W in (("X", X), ("Y", Y)):
        A, B = gram_products(W)
        eye = np.eye(A.shape[0])
        if mode == RelaxationMode.NC_NORM:
            out[name] = max(0.0, op_norm(A) + op_norm(B) - 2.0)
        else:
            out[name + name + "*"] = op_norm(A - eye)
            out[name + "*" + name] = op_norm(B - eye)
    return out


def _rescale(W, mode):
    A, B = gram_products(W)
    if mode == RelaxationMode.NC_NORM:
        s = max(1.0, 0.5 * (op_norm(A) + op_norm(B)))
    else:
        s = max(1.0, op_norm(A), op_norm(B))
    return W / np.sqrt(s)


def solve_relaxation(M: Tensor4, mode="unitary-complex", feas_tol: float = DEFAULT_FEAS_TOL,
                     gap_tol: float = DEFAULT_GAP_TOL, max_iter: int = DEFAULT_MAX_ITER) -> GramSolution:
    """Solve one of the Gram relaxations of ``sup |M(X, Y)|``.

    Parameters
    ----------
    M : Tensor4
    mode : RelaxationMode or str
    feas_tol, gap_tol : float
        Stopping tolerances on relative infeasibility and duality gap.
    max_iter : int
        Iteration cap of the interior-point method.

    Returns
    -------
    GramSolution

    Raises
    ------
    DomainError
        If a real relaxation is requested for a complex tensor.
    ConvergenceError
        If the iteration cap is reached first.
    """
    mode = RelaxationMode(mode)
    if mode == RelaxationMode.UNITARY_REAL and not M.is_real:
        raise DomainError("the real relaxation needs a real tensor")
    n = M.n
    scale = float(np.linalg.norm(M.values))
    if scale == 0.0:
        eye = np.eye(n)[:, :, None].astype(np.float64 if mode == RelaxationMode.UNITARY_REAL else np.complex128)
        return GramSolution(eye.copy(), eye.copy(), 0.0, 0.0, gram_residuals(eye, eye, mode), mode, 0, 0.0)
    prob = _build_problem(M.scaled(1.0 / scale), mode)
    # Solve slightly tighter than asked so that the recovered witness meets
    # the requested tolerances after rescaling.
    res = _ipm.solve(prob.op, prob.b, prob.C, feas_tol=0.1 * feas_tol, gap_tol=0.1 * gap_tol,
                     max_iter=max_iter, raise_on_failure=False)
    if not res.converged and not (res.primal_infeas <= feas_tol and res.dual_infeas <= feas_tol
                                  and abs(res.primal - res.dual) <= gap_tol * (1 + abs(res.dual))):
        raise ConvergenceError(
            f"relaxation solver stopped after {res.iterations} iterations "
            f"(primal infeasibility {res.primal_infeas:.2e}, dual infeasibility {res.dual_infeas:.2e})",
            lower=res.primal * scale, upper=res.dual * scale, iterations=res.iterations)

    # certified bound: shift y along the certificate direction until A^*(y) - C >= 0
    Zc = [a - c for a, c in zip(prob.op.adjoint(res.y), prob.C)]
    shortfall = max(0.0, -min(_ipm.min_eig(z, s) for z, s in zip(Zc, prob.op.blocks)))
    upper = (float(prob.b @ res.y) + shortfall * float(prob.b @ prob.certificate)) * scale

    X, Y = _factor(res.X[0], n)
    if mode == RelaxationMode.UNITARY_REAL:
        X, Y = X.real, Y.real
    X, Y = _rescale(X, mode), _rescale(Y, mode)
    val = evaluate(M, X, Y)
    if abs(val) > 0:
        ph = np.conj(val) / abs(val)
        X = X * (ph.real if mode == RelaxationMode.UNITARY_REAL else ph)
    value = abs(val)
    return GramSolution(X, Y, value, max(upper, value), gram_residuals(X, Y, mode), mode,
                        res.iterations, res.primal * scale, res.X[0] * 1.0)


def embed_to_exact_unitary(X, Y, feas_tol: float = DEFAULT_FEAS_TOL):
    """Pad a pair of vector-valued contractions to exact vector-valued unitaries.

    With ``A = I - XX*`` and ``B = I - X*X`` (spectral decompositions
    ``sum lam_i u_i u_i*`` and ``sum mu_j v_j v_j*``, common trace ``s``),
    ``R`` appends the ``n^2`` components ``sqrt(lam_i mu_j / s) u_i v_j*``
    followed by ``n^2`` zero components. ``S`` is built the same way from
    ``Y`` but with the two padding groups swapped, so ``<R_ij, S_kl>`` equals
    ``<X_ij, Y_kl>`` and ``M(R, S) = M(X, Y)`` for every tensor ``M``.

    Returns
    -------
    R, S : ndarray, shape (n, n, d + 2 n^2)

    Raises
    ------
    DomainError
        If some Gram product has norm above ``1 + feas_tol``.
    """
    X = as_vecmat(X)
    Y = as_vecmat(Y, X.shape[0])
    n = X.shape[0]

    def clip(W):
        A, B = gram_products(W)
        s = max(op_norm(A), op_norm(B))
        if s > 1.0 + feas_tol:
            raise DomainError(f"Gram product norm {s:.3g} exceeds 1")
        return W / np.sqrt(s) if s > 1.0 else W

    def padding(W):
        A, B = gram_products(W)
        lam, U = np.linalg.eigh(np.eye(n) - A)
        mu, V = np.linalg.eigh(np.eye(n) - B)
        lam, mu = np.clip(lam, 0.0, None), np.clip(mu, 0.0, None)
        sigma = 0.5 * (lam.sum() + mu.sum())
        if sigma <= 0:
            return np.zeros((n, n, n * n), dtype=np.result_type(W, U, V))
        coef = np.sqrt(np.outer(lam, mu) / sigma)
        # P[a, b, i, j] = coef[i, j] * U[a, i] * conj(V[b, j])
        P = np.einsum("ij,ai,bj->abij", coef, U, V.conj())
        return P.reshape(n, n, n * n)

    X, Y = clip(X), clip(Y)
    PX, PY = padding(X), padding(Y)
    R = np.concatenate([X, PX, np.zeros_like(PY)], axis=2)
    S = np.concatenate([Y, np.zeros_like(PX), PY], axis=2)
    return R, S
