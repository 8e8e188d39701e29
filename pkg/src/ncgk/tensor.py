"""Four-index tensors, vector-valued matrices and dense linear-algebra helpers.

A ``Tensor4`` ``M`` of side ``n`` defines the sesquilinear form

    M(X, Y) = sum_{ijkl} M[i, j, k, l] <X[i, j], Y[k, l]>

on vector-valued matrices, where ``<x, y> = sum_r x_r conj(y_r)``. A
vector-valued matrix is stored as a plain ``ndarray`` of shape ``(n, n, d)``;
its ``r``-th component matrix is ``X[:, :, r]``.
"""

from __future__ import annotations

from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DomainError, ShapeError

#: Singular values or eigenvalues below this are treated as exact zeros.
ZERO_CUTOFF = 1e-12

_DENSE_CACHE_MAX_N = 16


class Tensor4:
    """Immutable sparse 4-tensor with a lazily built dense view.

    Parameters
    ----------
    n : int
        Side length; indices run over ``[0, n)``.
    indices : array_like of int, shape (nnz, 4)
        Index quadruples ``(i, j, k, l)``. Must be unique.
    values : array_like, shape (nnz,)
        Entry values.
    field : {"real", "complex"}, optional
        Scalar field. Inferred from ``values`` when omitted.

    Notes
    -----
    Values are kept as complex doubles; a real tensor has exactly zero
    imaginary parts. Instances never change after construction.
    """

    __slots__ = ("_n", "_field", "_idx", "_val", "_dense")

    def __init__(self, n: int, indices, values, field: Optional[str] = None):
        n = int(n)
        if n < 1:
            raise ShapeError(f"side length must be positive, got {n}")
        idx = np.asarray(indices, dtype=np.int64).reshape(-1, 4)
        val = np.asarray(values, dtype=np.complex128).reshape(-1)
        if idx.shape[0] != val.shape[0]:
            raise ShapeError("indices and values have different lengths")
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise ShapeError(f"tensor index out of range for n={n}")
        if not np.all(np.isfinite(val)):
            raise DomainError("tensor entries must be finite")
        if idx.shape[0]:
            flat = np.ravel_multi_index(idx.T, (n, n, n, n))
            if np.unique(flat).size != flat.size:
                raise DomainError("duplicate index quadruple")
            order = np.argsort(flat, kind="stable")
            idx, val = idx[order], val[order]
        if field is None:
            field = "real" if np.all(val.imag == 0) else "complex"
        if field not in ("real", "complex"):
            raise DomainError(f"unknown field {field!r}")
        if field == "real" and np.any(val.imag != 0):
            raise DomainError("real tensor has nonzero imaginary parts")
        idx.setflags(write=False)
        val.setflags(write=False)
        self._n = n
        self._field = field
        self._idx = idx
        self._val = val
        self._dense = None

    # construction -------------------------------------------------------

    @classmethod
    def from_dense(cls, array, field: Optional[str] = None) -> "Tensor4":
        """Build from a dense ``(n, n, n, n)`` array, keeping nonzero entries."""
        a = np.asarray(array)
        if a.ndim != 4 or len(set(a.shape)) != 1:
            raise ShapeError(f"expected an (n, n, n, n) array, got {a.shape}")
        if field == "real":
            if np.iscomplexobj(a) and np.any(a.imag != 0):
                raise DomainError("real tensor has nonzero imaginary parts")
            a = a.real
        nz = np.argwhere(a != 0)
        return cls(a.shape[0], nz, a[tuple(nz.T)], field=field)

    @classmethod
    def from_entries(cls, n: int, entries: Iterable[Sequence], field: Optional[str] = None) -> "Tensor4":
        """Build from ``(i, j, k, l, value)`` records."""
        rows = list(entries)
        if not rows:
            return cls(n, np.zeros((0, 4), dtype=np.int64), np.zeros(0), field=field or "real")
        idx = [tuple(int(x) for x in r[:4]) for r in rows]
        val = [complex(r[4]) for r in rows]
        return cls(n, idx, val, field=field)

    @classmethod
    def zeros(cls, n: int, field: str = "real") -> "Tensor4":
        return cls(n, np.zeros((0, 4), dtype=np.int64), np.zeros(0), field=field)

    # accessors ----------------------------------------------------------

    @property
    def n(self) -> int:
        return self._n

    @property
    def field(self) -> str:
        return self._field

    @property
    def indices(self) -> np.ndarray:
        return self._idx

    @property
    def values(self) -> np.ndarray:
        return self._val

    @property
    def nnz(self) -> int:
        return self._val.shape[0]

    @property
    def is_real(self) -> bool:
        return self._field == "real"

    def dense(self) -> np.ndarray:
        """Return the dense ``(n, n, n, n)`` complex array (read-only)."""
        if self._dense is not None:
            return self._dense
        n = self._n
        a = np.zeros((n, n, n, n), dtype=np.complex128)
        if self.nnz:
            a[tuple(self._idx.T)] = self._val
        a.setflags(write=False)
        if n <= _DENSE_CACHE_MAX_N:
            self._dense = a
        return a

    def matrix(self) -> np.ndarray:
        """Dense ``n^2 x n^2`` matrix with rows ``(i, j)`` and columns ``(k, l)``."""
        return self.dense().reshape(self._n ** 2, self._n ** 2)

    def is_hermitian(self, tol: float = 0.0) -> bool:
        """True iff ``M[i,j,k,l] == conj(M[j,i,l,k])`` up to ``tol``."""
        a = self.dense()
        return bool(np.max(np.abs(a - np.conj(a.transpose(1, 0, 3, 2))), initial=0.0) <= tol)

    # arithmetic ---------------------------------------------------------

    def _combine(self, other: "Tensor4", sign: float) -> "Tensor4":
        if other.n != self.n:
            raise ShapeError("tensor sides differ")
        n = self.n
        flat = np.concatenate([
            np.ravel_multi_index(self._idx.T, (n,) * 4) if self.nnz else np.zeros(0, np.int64),
            np.ravel_multi_index(other._idx.T, (n,) * 4) if other.nnz else np.zeros(0, np.int64),
        ])
        vals = np.concatenate([self._val, sign * other._val])
        keys, inv = np.unique(flat, return_inverse=True)
        summed = np.zeros(keys.shape[0], dtype=np.complex128)
        np.add.at(summed, inv, vals)
        keep = summed != 0
        idx = np.stack(np.unravel_index(keys[keep], (n,) * 4), axis=1)
        field = "real" if self.is_real and other.is_real else "complex"
        return Tensor4(n, idx, summed[keep], field=field)

    def __add__(self, other: "Tensor4") -> "Tensor4":
        return self._combine(other, 1.0)

    def __sub__(self, other: "Tensor4") -> "Tensor4":
        return self._combine(other, -1.0)

    def scaled(self, alpha: complex) -> "Tensor4":
        alpha = complex(alpha)
        field = self._field if alpha.imag == 0 else "complex"
        vals = self._val * alpha
        keep = vals != 0
        return Tensor4(self._n, self._idx[keep], vals[keep], field=field)

    def __mul__(self, alpha) -> "Tensor4":
        return self.scaled(alpha)

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor4":
        return self.scaled(-1.0)

    def __repr__(self) -> str:
        return f"Tensor4(n={self._n}, field={self._field!r}, nnz={self.nnz})"


# ---------------------------------------------------------------------------
# vector-valued matrices


def as_vecmat(X, n: Optional[int] = None) -> np.ndarray:
    """Validate and return ``X`` as an ``(n, n, d)`` array.

    A plain ``(n, n)`` matrix is promoted to ``d = 1``.
    """
    X = np.asarray(X)
    if X.ndim == 2:
        X = X[:, :, None]
    if X.ndim != 3 or X.shape[0] != X.shape[1]:
        raise ShapeError(f"expected an (n, n, d) vector-valued matrix, got shape {X.shape}")
    if n is not None and X.shape[0] != n:
        raise ShapeError(f"vector-valued matrix has side {X.shape[0]}, expected {n}")
    return X


def component(X, r: int) -> np.ndarray:
    """The ``r``-th component matrix ``X_r`` with ``(X_r)[i, j] = X[i, j][r]``."""
    return as_vecmat(X)[:, :, r]


def from_components(mats: Sequence[np.ndarray]) -> np.ndarray:
    """Stack component matrices into an ``(n, n, d)`` vector-valued matrix."""
    return np.stack([np.asarray(m) for m in mats], axis=-1)


def gram_products(X) -> tuple[np.ndarray, np.ndarray]:
    """Row and column Gram products of a vector-valued matrix.

    Returns
    -------
    XXs : ndarray
        ``sum_r X_r X_r^*``, i.e. ``XXs[i, j] = sum_k <X[i, k], X[j, k]>``.
    XsX : ndarray
        ``sum_r X_r^* X_r``. Entrywise this is the complex conjugate of
        ``sum_k <X[k, i], X[k, j]>``; both have the same spectrum and agree
        for real data.
    """
    X = as_vecmat(X)
    XXs = np.einsum("ikr,jkr->ij", X, X.conj())
    XsX = np.einsum("kir,kjr->ij", X.conj(), X)
    return XXs, XsX


def pair_with(X, z) -> np.ndarray:
    """Entrywise pairing ``<X, z>`` with ``<X, z>[j, k] = sum_r X[j, k, r] conj(z_r)``."""
    X = as_vecmat(X)
    z = np.asarray(z)
    if z.shape[-1] != X.shape[2]:
        raise ShapeError(f"vector dimension {X.shape[2]} does not match z of length {z.shape[-1]}")
    return np.einsum("jkr,...r->...jk", X, z.conj())


# ---------------------------------------------------------------------------
# forms


def evaluate(M: Tensor4, X, Y) -> complex:
    """Sesquilinear form ``sum M[i,j,k,l] <X[i,j], Y[k,l]>``."""
    X = as_vecmat(X, M.n)
    Y = as_vecmat(Y, M.n)
    if X.shape[2] != Y.shape[2]:
        raise ShapeError(f"vector dimensions differ: {X.shape[2]} vs {Y.shape[2]}")
    if M.nnz == 0:
        return 0j
    i, j, k, l = M.indices.T
    inner = np.einsum("er,er->e", X[i, j], Y[k, l].conj())
    return complex(np.dot(M.values, inner))


def evaluate_matrices(M: Tensor4, A, B):
    """``sum M[i,j,k,l] A[i,j] conj(B[k,l])``.

    ``A`` and ``B`` may carry matching leading batch dimensions, in which case
    an array of values is returned.
    """
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape[-2:] != (M.n, M.n) or B.shape[-2:] != (M.n, M.n):
        raise ShapeError(f"expected {M.n}x{M.n} matrices, got {A.shape} and {B.shape}")
    if M.nnz == 0:
        out = np.zeros(np.broadcast_shapes(A.shape[:-2], B.shape[:-2]), dtype=np.complex128)
        return complex(out) if out.ndim == 0 else out
    i, j, k, l = M.indices.T
    out = np.sum(M.values * A[..., i, j] * B[..., k, l].conj(), axis=-1)
    return complex(out) if np.ndim(out) == 0 else out


def frobenius(M: Tensor4) -> float:
    """Frobenius norm ``sqrt(sum |M[i,j,k,l]|^2)``."""
    return float(np.linalg.norm(M.values))


def grothendieck_embed(A) -> Tensor4:
    """Diagonal embedding ``M[i,i,j,j] = A[i,j]`` of a real matrix."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError("expected a square matrix")
    if np.iscomplexobj(A) and np.any(A.imag != 0):
        raise DomainError("grothendieck_embed expects a real matrix")
    A = A.real
    n = A.shape[0]
    ii, jj = np.nonzero(A)
    idx = np.stack([ii, ii, jj, jj], axis=1)
    return Tensor4(n, idx, A[ii, jj], field="real")


def haagerup_tensor(n: int) -> Tensor4:
    """Tensor with ``M[0, j, k, 0] = delta_jk``.

    Its value over unitary pairs is 1 while its nc-norm is at least
    ``2n / (n + 1)``.
    """
    idx = [(0, j, j, 0) for j in range(n)]
    return Tensor4(n, idx, np.ones(n), field="real")


def haagerup_witness(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Vector-valued pair reaching ``2n / (n + 1)`` on :func:`haagerup_tensor`."""
    c = np.sqrt(2.0 / (n + 1))
    X = np.zeros((n, n, n))
    Y = np.zeros((n, n, n))
    for j in range(n):
        X[0, j, j] = c
        Y[j, 0, j] = c
    return X, Y


def random_tensor(rng: np.random.Generator, n: int, field: str = "complex", density: float = 1.0) -> Tensor4:
    """Gaussian tensor with roughly ``density * n^4`` nonzero entries."""
    shape = (n, n, n, n)
    a = rng.standard_normal(shape)
    if field == "complex":
        a = a + 1j * rng.standard_normal(shape)
    if density < 1.0:
        mask = rng.random(shape) < density
        if not mask.any():
            mask[tuple(rng.integers(0, n, size=4))] = True
        a = a * mask
    return Tensor4.from_dense(a, field=field)


def random_hermitian_tensor(rng: np.random.Generator, n: int) -> Tensor4:
    """Gaussian tensor symmetrized so that ``M[i,j,k,l] = conj(M[j,i,l,k])``."""
    a = rng.standard_normal((n,) * 4) + 1j * rng.standard_normal((n,) * 4)
    a = 0.5 * (a + np.conj(a.transpose(1, 0, 3, 2)))
    return Tensor4.from_dense(a, field="complex")


# ---------------------------------------------------------------------------
# matrix predicates


def op_norm(A) -> float:
    """Largest singular value."""
    A = np.asarray(A)
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


def is_unitary(A, tol: float = 1e-8) -> bool:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        return False
    eye = np.eye(A.shape[0])
    return bool(np.max(np.abs(A @ A.conj().T - eye)) <= tol and np.max(np.abs(A.conj().T @ A - eye)) <= tol)


def is_orthogonal(A, tol: float = 1e-8) -> bool:
    A = np.asarray(A)
    if np.iscomplexobj(A) and np.max(np.abs(A.imag), initial=0.0) > tol:
        return False
    return is_unitary(np.real(A), tol)


def is_hermitian_matrix(A, tol: float = 1e-8) -> bool:
    A = np.asarray(A)
    return A.ndim == 2 and A.shape[0] == A.shape[1] and bool(np.max(np.abs(A - A.conj().T), initial=0.0) <= tol)


def is_contraction(A, tol: float = 1e-8) -> bool:
    return op_norm(A) <= 1.0 + tol


def has_orthonormal_rows(A, tol: float = 1e-8) -> bool:
    A = np.asarray(A)
    return bool(np.max(np.abs(A @ A.conj().T - np.eye(A.shape[0])), initial=0.0) <= tol)


# ---------------------------------------------------------------------------
# polar decomposition and powers


def polar(A) -> tuple[np.ndarray, np.ndarray]:
    """Polar decomposition ``A = Q P`` with ``Q`` unitary and ``P = |A|``.

    Computed from the SVD ``A = L S R^*`` as ``Q = L R^*``, ``P = R S R^*``.
    For rank-deficient ``A`` the unitary factor is still returned unitary.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError("polar expects a square matrix")
    L, s, Rh = np.linalg.svd(A)
    Q = L @ Rh
    P = (Rh.conj().T * s) @ Rh
    return Q, 0.5 * (P + P.conj().T)


def unitary_power(P, t: float) -> np.ndarray:
    """``P^{it}`` for Hermitian positive semidefinite ``P``.

    Eigenvalues below ``ZERO_CUTOFF`` get the value ``1`` so the result is
    always unitary.
    """
    P = np.asarray(P)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ShapeError("unitary_power expects a square matrix")
    scale = max(1.0, float(np.max(np.abs(P), initial=0.0)))
    if np.max(np.abs(P - P.conj().T), initial=0.0) > 1e-10 * scale:
        raise DomainError("unitary_power expects a Hermitian matrix")
    lam, U = np.linalg.eigh(0.5 * (P + P.conj().T))
    if lam.min(initial=0.0) < -1e-10 * scale:
        raise DomainError("unitary_power expects a positive semidefinite matrix")
    phase = positive_power(lam, t)
    return (U * phase) @ U.conj().T


def positive_power(lam, t) -> np.ndarray:
    """Elementwise ``lam^{it}`` with the value 1 on (near-)zero entries."""
    lam = np.asarray(lam, dtype=float)
    safe = np.where(lam > ZERO_CUTOFF, lam, 1.0)
    return np.exp(1j * np.asarray(t)[..., None] * np.log(safe)) if np.ndim(t) else np.exp(1j * t * np.log(safe))


def partial_contraction(M: Tensor4, B) -> np.ndarray:
    """``N[i, j] = sum_{kl} M[i,j,k,l] conj(B[k,l])`` so that ``M(A, B) = sum A * N``."""
    B = np.asarray(B)
    if B.shape != (M.n, M.n):
        raise ShapeError(f"expected a {M.n}x{M.n} matrix")
    N = np.zeros((M.n, M.n), dtype=np.complex128)
    if M.nnz:
        i, j, k, l = M.indices.T
        np.add.at(N, (i, j), M.values * B[k, l].conj())
    return N


def contract_best_response(M: Tensor4, B) -> np.ndarray:
    """Contraction ``A`` maximizing ``|M(A, B)|``.

    With ``N = partial_contraction(M, B) = L S R^*`` the maximizer is
    ``A = conj(L R^*)``, giving ``M(A, B) = trace(S)``, the nuclear norm of
    ``N``. The result is real when both ``M`` and ``B`` are real.
    """
    N = partial_contraction(M, B)
    real = M.is_real and not (np.iscomplexobj(B) and np.any(np.asarray(B).imag != 0))
    if real:
        N = N.real
    L, _, Rh = np.linalg.svd(N)
    A = (L @ Rh).conj()
    return A.real if real else A
