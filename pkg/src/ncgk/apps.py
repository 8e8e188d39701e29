"""Application problems reduced to the real orthogonal bilinear problem.

A bilinear form in two lists of rectangular matrix blocks is placed on the
block diagonals of two ``t x t`` matrices, giving a real tensor whose
optimum over orthogonal pairs equals the optimum of the form over lists
of Stiefel blocks (orthonormal rows or orthonormal columns). The solution
of the tensor problem is cut back into blocks and each block is pushed to
its Stiefel set without lowering the form.

Robust PCA (sum of projected Euclidean norms, or of projected l1 norms)
and generalized orthogonal Procrustes alignment are built on top.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, IngestError, ShapeError
from .round_real import (RealRoundingConfig, approximate_opt_real, greedy_signs,
                         rank_one_coefficients)
from .tensor import Tensor4, evaluate_matrices

#: Largest embedded side for which the Hermitian route runs by default.
HERMITIAN_ROUTE_MAX_SIDE = 4


@dataclass(frozen=True)
class BilinearForm:
    """``f((A_i), (B_j)) = sum alpha * A_i[r, s] * B_j[u, v]``.

    Attributes
    ----------
    left_shapes, right_shapes : tuple of (int, int)
        Block shapes of the two arguments.
    index : ndarray of int, shape (N, 6)
        Rows ``(i, r, s, j, u, v)``; repeated rows add up.
    alpha : ndarray, shape (N,)
    """

    left_shapes: tuple
    right_shapes: tuple
    index: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        ls = tuple((int(a), int(b)) for a, b in self.left_shapes)
        rs = tuple((int(a), int(b)) for a, b in self.right_shapes)
        if not ls or not rs:
            raise DomainError("a bilinear form needs at least one block on each side")
        if any(min(s) < 1 for s in ls + rs):
            raise DomainError("block shapes must be positive")
        idx = np.asarray(self.index, dtype=np.int64).reshape(-1, 6)
        alpha = np.asarray(self.alpha, dtype=float).reshape(-1)
        if idx.shape[0] != alpha.size:
            raise ShapeError("index and alpha lengths differ")
        if not np.all(np.isfinite(alpha)):
            raise DomainError("coefficients must be finite")
        if idx.size:
            i, r, s, j, u, v = idx.T
            lsh = np.array(ls)
            rsh = np.array(rs)
            bad = ((i < 0) | (i >= len(ls)) | (j < 0) | (j >= len(rs)))
            if bad.any():
                raise DomainError("block index out of range")
            if np.any((r < 0) | (r >= lsh[i, 0]) | (s < 0) | (s >= lsh[i, 1])
                      | (u < 0) | (u >= rsh[j, 0]) | (v < 0) | (v >= rsh[j, 1])):
                raise DomainError("entry index outside its block")
        object.__setattr__(self, "left_shapes", ls)
        object.__setattr__(self, "right_shapes", rs)
        object.__setattr__(self, "index", idx)
        object.__setattr__(self, "alpha", alpha)

    def __call__(self, left: Sequence[np.ndarray], right: Sequence[np.ndarray]) -> float:
        if len(left) != len(self.left_shapes) or len(right) != len(self.right_shapes):
            raise ShapeError("wrong number of blocks")
        for blocks, shapes in ((left, self.left_shapes), (right, self.right_shapes)):
            for b, sh in zip(blocks, shapes):
                if np.shape(b) != sh:
                    raise ShapeError(f"block of shape {np.shape(b)} where {sh} was expected")
        if not self.alpha.size:
            return 0.0
        a = np.array([left[i][r, s] for i, r, s in self.index[:, :3]])
        b = np.array([right[j][u, v] for j, u, v in self.index[:, 3:]])
        return float(np.sum(self.alpha * a * b))


@dataclass(frozen=True)
class BlockLayout:
    """Offsets of blocks on the diagonal of a ``t x t`` matrix."""

    shapes: tuple
    row_offsets: np.ndarray
    col_offsets: np.ndarray

    @classmethod
    def of(cls, shapes) -> "BlockLayout":
        sh = np.array(shapes, dtype=np.int64).reshape(-1, 2)
        rows = np.concatenate([[0], np.cumsum(sh[:, 0])[:-1]])
        cols = np.concatenate([[0], np.cumsum(sh[:, 1])[:-1]])
        return cls(tuple(map(tuple, sh.tolist())), rows, cols)

    @property
    def extent(self) -> tuple[int, int]:
        return int(sum(s[0] for s in self.shapes)), int(sum(s[1] for s in self.shapes))

    def place(self, blocks, t: int) -> np.ndarray:
        """Block-diagonal ``t x t`` matrix holding ``blocks``."""
        out = np.zeros((t, t))
        for b, (m, n), r0, c0 in zip(blocks, self.shapes, self.row_offsets, self.col_offsets):
            out[r0:r0 + m, c0:c0 + n] = b
        return out

    def cut(self, U) -> list:
        """Blocks of ``U`` at the layout positions."""
        return [np.array(U[r0:r0 + m, c0:c0 + n])
                for (m, n), r0, c0 in zip(self.shapes, self.row_offsets, self.col_offsets)]


@dataclass(frozen=True)
class BlockEmbedding:
    """Result of :func:`embed_bilinear`: the tensor and both block layouts."""

    tensor: Tensor4
    left: BlockLayout
    right: BlockLayout

    @property
    def t(self) -> int:
        return self.tensor.n


def embed_bilinear(f: BilinearForm):
    """Tensor ``M`` of side ``t`` with ``M(place(A), place(B)) = f(A, B)``.

    ``t`` is the largest of the summed block heights and widths on either
    side. Returns ``(M, left_layout, right_layout)``; the same triple is
    available as a :class:`BlockEmbedding` through :func:`block_embedding`.
    """
    emb = block_embedding(f)
    return emb.tensor, emb.left, emb.right


def block_embedding(f: BilinearForm) -> BlockEmbedding:
    left = BlockLayout.of(f.left_shapes)
    right = BlockLayout.of(f.right_shapes)
    t = max(*left.extent, *right.extent)
    if not f.alpha.size:
        return BlockEmbedding(Tensor4.zeros(t), left, right)
    i, r, s, j, u, v = f.index.T
    quad = np.stack([left.row_offsets[i] + r, left.col_offsets[i] + s,
                     right.row_offsets[j] + u, right.col_offsets[j] + v], axis=1)
    uniq, inv = np.unique(quad, axis=0, return_inverse=True)
    vals = np.zeros(len(uniq))
    np.add.at(vals, inv.reshape(-1), f.alpha)
    keep = vals != 0
    return BlockEmbedding(Tensor4(t, uniq[keep], vals[keep], field="real"), left, right)


def _rank_one_terms(layout: BlockLayout, blocks, t: int):
    """Thin SVD factors of every block, placed in ``R^t``.

    Returns the column stacks ``(x, y)`` of left and right singular
    vectors, the singular values, and for reconstruction a list of
    ``(E, Fh)`` per block.
    """
    xs, ys, svals, factors = [], [], [], []
    for b, (m, n), r0, c0 in zip(blocks, layout.shapes, layout.row_offsets, layout.col_offsets):
        E, s, Fh = np.linalg.svd(b, full_matrices=False)
        k = s.size
        x = np.zeros((t, k))
        y = np.zeros((t, k))
        x[r0:r0 + m] = E
        y[c0:c0 + n] = Fh.T
        xs.append(x)
        ys.append(y)
        svals.append(s)
        factors.append((E, Fh))
    return (np.hstack(xs), np.hstack(ys)), np.concatenate(svals), factors


def _rebuild(factors, signs):
    out, pos = [], 0
    for E, Fh in factors:
        k = E.shape[1]
        out.append((E * signs[pos:pos + k]) @ Fh)
        pos += k
    return out


def extract_blocks(U, V, emb: BlockEmbedding):
    """Cut ``U`` and ``V`` into blocks and push each block to its Stiefel set.

    Every block of a contraction is a contraction. The form is linear in
    each singular value of each block, so singular values are moved to
    ``+-1`` one at a time, never lowering the value (left blocks first, then
    right blocks). A block ``E diag(+-1) F^T`` built from a thin SVD has
    orthonormal rows or columns, whichever is shorter.

    Returns
    -------
    left, right : list of ndarray
    """
    t = emb.t
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    if U.shape != (t, t) or V.shape != (t, t):
        raise ShapeError(f"expected {t}x{t} matrices")
    lpair, s, lfac = _rank_one_terms(emb.left, emb.left.cut(U), t)
    rpair, w, rfac = _rank_one_terms(emb.right, emb.right.cut(V), t)
    K = rank_one_coefficients(emb.tensor, lpair, rpair)
    s, w, _ = greedy_signs(K, s, w)
    return _rebuild(lfac, s), _rebuild(rfac, w)


def is_stiefel(A, tol: float = 1e-8) -> bool:
    """Orthonormal rows (wide or square) or orthonormal columns (tall)."""
    A = np.asarray(A)
    m, n = A.shape
    G = A @ A.T if m <= n else A.T @ A
    return bool(np.max(np.abs(G - np.eye(min(m, n))), initial=0.0) <= tol)


def _default_config(t: int) -> RealRoundingConfig:
    routes = ("hermitian", "direct") if t <= HERMITIAN_ROUTE_MAX_SIDE else ("direct",)
    return RealRoundingConfig(routes=routes)


def solve_bilinear(f: BilinearForm, config: Optional[RealRoundingConfig] = None):
    """Stiefel blocks approximately maximizing ``f``.

    Returns
    -------
    left, right : list of ndarray
    value : float
        ``f(left, right)``.
    info : dict
        Tensor-level value and certified upper bound.
    """
    emb = block_embedding(f)
    config = config or _default_config(emb.t)
    pair = approximate_opt_real(emb.tensor, config)
    left, right = extract_blocks(pair.A, pair.B, emb)
    value = f(left, right)
    info = {"tensor_side": emb.t, "tensor_value": pair.value, "upper_bound": pair.upper_bound,
            "route": pair.info.get("route")}
    return left, right, value, info


# ---------------------------------------------------------------------------
# robust PCA


@dataclass(frozen=True)
class PointCloud:
    """``N`` points in ``R^n``, one per row."""

    points: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.points, dtype=float)
        if P.ndim != 2 or P.shape[0] < 1 or P.shape[1] < 1:
            raise ShapeError("points must form a nonempty 2-D array")
        if not np.all(np.isfinite(P)):
            raise DomainError("points must be finite")
        object.__setattr__(self, "points", P)

    @property
    def N(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @classmethod
    def from_csv(cls, text: str) -> "PointCloud":
        """Parse CSV text with one point per row (blank lines ignored)."""
        rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
        try:
            P = np.array([[float(c) for c in r] for r in rows])
        except ValueError as exc:
            raise IngestError(f"non-numeric CSV entry: {exc}") from None
        if P.ndim != 2 or not rows:
            raise IngestError("CSV rows must be nonempty and of equal length")
        try:
            return cls(P)
        except (ShapeError, DomainError) as exc:
            raise IngestError(str(exc)) from None


def r1_objective(points: PointCloud, Y) -> float:
    """``sum_i ||Y a_i||``: total length of the projected points."""
    return float(np.sum(np.linalg.norm(points.points @ np.asarray(Y).T, axis=1)))


def l1_objective(points: PointCloud, Y) -> float:
    """``sum_i sum_k |<a_i, y_k>|``."""
    return float(np.sum(np.abs(points.points @ np.asarray(Y).T)))


def _check_k(points: PointCloud, K: int):
    if not 1 <= K <= points.dim:
        raise DomainError(f"K must lie in [1, {points.dim}]")


def r1_pca_form(points: PointCloud, K: int) -> BilinearForm:
    """``f(Y, (z_i)) = sum_i <z_i, Y a_i>`` with ``Y`` of shape ``K x n`` and ``z_i`` of shape ``1 x K``."""
    _check_k(points, K)
    N, n = points.points.shape
    i, k, j = np.meshgrid(np.arange(N), np.arange(K), np.arange(n), indexing="ij")
    i, k, j = i.ravel(), k.ravel(), j.ravel()
    zero = np.zeros_like(i)
    idx = np.stack([zero, k, j, i, zero, k], axis=1)
    return BilinearForm(((K, n),), ((1, K),) * N, idx, points.points[i, j])


def l1_pca_form(points: PointCloud, K: int) -> BilinearForm:
    """``g(Y, (z_ik)) = sum_ik z_ik <y_k, a_i>`` with scalar blocks ``z_ik``."""
    _check_k(points, K)
    N, n = points.points.shape
    i, k, j = np.meshgrid(np.arange(N), np.arange(K), np.arange(n), indexing="ij")
    i, k, j = i.ravel(), k.ravel(), j.ravel()
    zero = np.zeros_like(i)
    idx = np.stack([zero, k, j, i * K + k, zero, zero], axis=1)
    return BilinearForm(((K, n),), ((1, 1),) * (N * K), idx, points.points[i, j])


@dataclass
class PCAResult:
    """Orthonormal rows ``Y`` with the recomputed objective.

    ``surrogate`` is the bilinear form value at the extracted blocks; the
    recomputed ``value`` is never smaller.
    """

    Y: np.ndarray
    value: float
    surrogate: float
    info: dict


def _pca(points, K, config, form, objective):
    f = form(points, K)
    left, _, surrogate, info = solve_bilinear(f, config)
    Y = left[0]
    return PCAResult(Y, objective(points, Y), surrogate, info)


def r1_pca(points: PointCloud, K: int, config: Optional[RealRoundingConfig] = None) -> PCAResult:
    """``K`` orthonormal directions approximately maximizing ``sum_i ||Y a_i||``."""
    return _pca(points, K, config, r1_pca_form, r1_objective)


def l1_pca(points: PointCloud, K: int, config: Optional[RealRoundingConfig] = None) -> PCAResult:
    """``K`` orthonormal directions approximately maximizing ``sum_ik |<a_i, y_k>|``."""
    return _pca(points, K, config, l1_pca_form, l1_objective)


# ---------------------------------------------------------------------------
# generalized orthogonal Procrustes


@dataclass(frozen=True)
class ProcrustesInstance:
    """``K`` point sets in ``R^d``; ``matrices[k]`` is ``d x n`` with one point per column."""

    matrices: tuple

    def __post_init__(self):
        mats = tuple(np.asarray(A, dtype=float) for A in self.matrices)
        if len(mats) < 2:
            raise DomainError("Procrustes alignment needs at least two point sets")
        shapes = {A.shape for A in mats}
        if len(shapes) != 1 or mats[0].ndim != 2:
            raise ShapeError("all point sets must be 2-D arrays of one shape")
        if not all(np.all(np.isfinite(A)) for A in mats):
            raise DomainError("entries must be finite")
        object.__setattr__(self, "matrices", mats)

    @property
    def K(self) -> int:
        return len(self.matrices)

    @property
    def d(self) -> int:
        return self.matrices[0].shape[0]


def procrustes_objective(inst: ProcrustesInstance, Us) -> float:
    """``||sum_k U_k A_k||_F^2``."""
    S = sum(U @ A for U, A in zip(Us, inst.matrices))
    return float(np.sum(S * S))


def procrustes_form(inst: ProcrustesInstance) -> BilinearForm:
    """``f((U_k), (V_l)) = <sum U_k A_k, sum V_l A_l>``.

    Its coefficients are ``alpha[k r s, l u v] = [r == u] (A_k A_l^T)[s, v]``.
    """
    K, d = inst.K, inst.d
    G = np.einsum("ksc,lvc->klsv", np.stack(inst.matrices), np.stack(inst.matrices))
    k, l, r, s, v = np.meshgrid(*(np.arange(x) for x in (K, K, d, d, d)), indexing="ij")
    k, l, r, s, v = (a.ravel() for a in (k, l, r, s, v))
    alpha = G[k, l, s, v]
    keep = alpha != 0
    idx = np.stack([k, r, s, l, r, v], axis=1)[keep]
    return BilinearForm(((d, d),) * K, ((d, d),) * K, idx, alpha[keep])


@dataclass
class ProcrustesResult:
    rotations: list
    value: float
    surrogate: float
    info: dict


def procrustes(inst: ProcrustesInstance, config: Optional[RealRoundingConfig] = None) -> ProcrustesResult:
    """Orthogonal ``U_1..U_K`` approximately maximizing ``||sum_k U_k A_k||_F^2``.

    The doubled form ``<sum U_k A_k, sum V_l A_l>`` is solved and whichever
    list scores higher on the single-list objective is returned; by
    Cauchy-Schwarz it scores at least the doubled value.
    """
    f = procrustes_form(inst)
    left, right, surrogate, info = solve_bilinear(f, config)
    vl, vr = procrustes_objective(inst, left), procrustes_objective(inst, right)
    Us = left if vl >= vr else right
    info = dict(info, side="left" if vl >= vr else "right")
    return ProcrustesResult(Us, max(vl, vr), surrogate, info)
