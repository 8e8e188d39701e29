"""Primal-dual interior-point method for block-diagonal semidefinite programs.

Problem form::

    maximize   <C, X>
    subject to A(X) = b,  X = diag(X_1, ..., X_p) with every X_q >= 0

and its dual::

    minimize   b . y
    subject to Z = A^*(y) - C >= 0

A block is either a Hermitian (or real symmetric) PSD matrix or a
nonnegative vector. The constraint operator is supplied as a list of
*parts*; each part acts on a single block and knows how to contribute to
``A(X)``, ``A^*(y)`` and the Schur complement
``H[a, b] = Re <A_a, X A_b Z^{-1}>`` of the HKM search direction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceError


@dataclass(frozen=True)
class BlockSpec:
    kind: str  # "psd" or "lp"
    size: int


def _inner(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.real(np.vdot(a, b)))


def _sym(K: np.ndarray) -> np.ndarray:
    return 0.5 * (K + K.conj().T)


class DensePart:
    """Constraint rows given by explicit Hermitian matrices on one PSD block."""

    def __init__(self, block: int, rows: Sequence[int], mats: np.ndarray):
        self.block = block
        self.rows = np.asarray(rows, dtype=np.int64)
        self.mats = np.asarray(mats)

    def apply(self, X, out):
        out[self.rows] += np.real(np.einsum("aij,ij->a", self.mats.conj(), X))

    def adjoint(self, y, out):
        out += np.einsum("a,aij->ij", y[self.rows], self.mats)

    def schur(self, X, Zi, H):
        WA = X @ self.mats @ Zi
        H[np.ix_(self.rows, self.rows)] += np.real(np.einsum("aij,bji->ab", self.mats, WA))


class LPPart:
    """Constraint rows acting linearly on a nonnegative-vector block."""

    def __init__(self, block: int, rows: Sequence[int], mat: np.ndarray):
        self.block = block
        self.rows = np.asarray(rows, dtype=np.int64)
        self.mat = np.asarray(mat, dtype=float)

    def apply(self, x, out):
        out[self.rows] += self.mat @ x

    def adjoint(self, y, out):
        out += self.mat.T @ y[self.rows]

    def schur(self, x, zi, H):
        H[np.ix_(self.rows, self.rows)] += (self.mat * (x * zi)) @ self.mat.T


class Operator:
    """Sum of parts; row count ``m``."""

    def __init__(self, m: int, blocks: List[BlockSpec], parts: list, dtype):
        self.m = m
        self.blocks = blocks
        self.parts = parts
        self.dtype = dtype

    def zeros(self):
        return [np.zeros((b.size, b.size), dtype=self.dtype) if b.kind == "psd" else np.zeros(b.size)
                for b in self.blocks]

    def apply(self, Xs) -> np.ndarray:
        out = np.zeros(self.m)
        for p in self.parts:
            p.apply(Xs[p.block], out)
        return out

    def adjoint(self, y):
        out = self.zeros()
        for p in self.parts:
            p.adjoint(y, out[p.block])
        return out

    def schur(self, Xs, Zis) -> np.ndarray:
        H = np.zeros((self.m, self.m))
        for p in self.parts:
            p.schur(Xs[p.block], Zis[p.block], H)
        return 0.5 * (H + H.T)


@dataclass
class IPMResult:
    X: list
    y: np.ndarray
    Z: list
    primal: float
    dual: float
    primal_infeas: float
    dual_infeas: float
    iterations: int
    converged: bool


def _block_inv(Z, spec):
    if spec.kind == "lp":
        return 1.0 / Z
    L = sla.cholesky(Z, lower=True)
    Li = sla.solve_triangular(L, np.eye(Z.shape[0], dtype=Z.dtype), lower=True)
    return Li.conj().T @ Li


def _max_step(X, dX, spec) -> float:
    if spec.kind == "lp":
        neg = dX < 0
        return float(np.min(-X[neg] / dX[neg])) if neg.any() else np.inf
    # smallest generalized eigenvalue of dX v = lam X v
    try:
        lam = sla.eigh(_sym(dX), X, eigvals_only=True, subset_by_index=[0, 0])[0]
    except np.linalg.LinAlgError:
        return 0.0
    return np.inf if lam >= 0 else -1.0 / lam


def min_eig(X, spec) -> float:
    if spec.kind == "lp":
        return float(np.min(X)) if X.size else np.inf
    return float(np.linalg.eigvalsh(_sym(X))[0]) if X.size else np.inf


def solve(op: Operator, b: np.ndarray, C: list, *, feas_tol: float = 1e-8, gap_tol: float = 1e-6,
          max_iter: int = 200, raise_on_failure: bool = True) -> IPMResult:
    """Mehrotra predictor-corrector iteration with the HKM direction.

    Stops when relative primal and dual infeasibility are below ``feas_tol``
    and the relative duality gap is below ``gap_tol``.
    """
    specs = op.blocks
    nu = sum(s.size for s in specs)
    b = np.asarray(b, dtype=float)
    bnorm = 1.0 + np.linalg.norm(b)
    cnorm = 1.0 + np.sqrt(sum(_inner(c, c) for c in C))

    X = [np.eye(s.size, dtype=op.dtype) if s.kind == "psd" else np.ones(s.size) for s in specs]
    Z = [x.copy() for x in X]
    y = np.zeros(op.m)
    best = None

    def residuals(X, y, Z):
        rp = b - op.apply(X)
        AY = op.adjoint(y)
        rd = [c + z - a for c, z, a in zip(C, Z, AY)]
        return rp, rd

    for it in range(max_iter + 1):
        rp, rd = residuals(X, y, Z)
        pobj = sum(_inner(c, x) for c, x in zip(C, X))
        dobj = float(b @ y)
        pinf = np.linalg.norm(rp) / bnorm
        dinf = np.sqrt(sum(_inner(r, r) for r in rd)) / cnorm
        gap = sum(_inner(x, z) for x, z in zip(X, Z))
        relgap = max(abs(pobj - dobj), gap) / (1.0 + abs(pobj) + abs(dobj))
        score = max(pinf / feas_tol, dinf / feas_tol, relgap / gap_tol)
        if best is None or score < best[0]:
            best = (score, [x.copy() for x in X], y.copy(), [z.copy() for z in Z], pobj, dobj, pinf, dinf)
        if pinf <= feas_tol and dinf <= feas_tol and relgap <= gap_tol:
            return IPMResult(X, y, Z, pobj, dobj, pinf, dinf, it, True)
        if it == max_iter:
            break
        mu = gap / nu
        try:
            Zi = [_block_inv(z, s) for z, s in zip(Z, specs)]
        except np.linalg.LinAlgError:
            break
        H = op.schur(X, Zi)
        try:
            cf = sla.cho_factor(H)
            solveH = lambda r: sla.cho_solve(cf, r)
        except np.linalg.LinAlgError:
            reg = 1e-14 * max(1.0, float(np.max(np.abs(np.diag(H)))))
            Hr = H + reg * np.eye(op.m)
            solveH = lambda r: np.linalg.lstsq(Hr, r, rcond=None)[0]

        XRZ = [x * r * zi if s.kind == "lp" else x @ r @ zi for x, r, zi, s in zip(X, rd, Zi, specs)]

        def direction(target, corr):
            # target: sigma * mu; corr: second-order term (list or None)
            R = []
            for q, s in enumerate(specs):
                t = target * Zi[q] - X[q] + XRZ[q]
                if corr is not None:
                    t = t - corr[q]
                R.append(t)
            dy = solveH(op.apply(R) - rp)
            AdY = op.adjoint(dy)
            dZ = [a - r for a, r in zip(AdY, rd)]
            dX = []
            for q, s in enumerate(specs):
                if s.kind == "lp":
                    d = target * Zi[q] - X[q] - X[q] * dZ[q] * Zi[q]
                    if corr is not None:
                        d = d - corr[q]
                else:
                    d = target * Zi[q] - X[q] - X[q] @ dZ[q] @ Zi[q]
                    if corr is not None:
                        d = d - corr[q]
                    d = _sym(d)
                dX.append(d)
            return dX, dy, dZ

        def steps(dX, dZ):
            ap = min([_max_step(x, d, s) for x, d, s in zip(X, dX, specs)] + [np.inf])
            ad = min([_max_step(z, d, s) for z, d, s in zip(Z, dZ, specs)] + [np.inf])
            return ap, ad

        dXa, dya, dZa = direction(0.0, None)
        ap, ad = steps(dXa, dZa)
        ap, ad = min(1.0, ap), min(1.0, ad)
        gap_aff = sum(_inner(x + ap * dx, z + ad * dz) for x, dx, z, dz in zip(X, dXa, Z, dZa))
        sigma = min(1.0, max(0.0, gap_aff / gap)) ** 3 if gap > 0 else 0.0
        corr = [dx * dz * zi if s.kind == "lp" else dx @ dz @ zi
                for dx, dz, zi, s in zip(dXa, dZa, Zi, specs)]
        dX, dy, dZ = direction(sigma * mu, corr)
        ap, ad = steps(dX, dZ)
        gamma = 0.9 + 0.09 * min(1.0, ap, ad)
        ap, ad = min(1.0, gamma * ap), min(1.0, gamma * ad)
        if ap < 1e-12 and ad < 1e-12:
            break
        X = [x + ap * d for x, d in zip(X, dX)]
        y = y + ad * dy
        Z = [z + ad * d for z, d in zip(Z, dZ)]
        X = [_sym(x) if s.kind == "psd" else x for x, s in zip(X, specs)]
        Z = [_sym(z) if s.kind == "psd" else z for z, s in zip(Z, specs)]

    _, X, y, Z, pobj, dobj, pinf, dinf = best
    result = IPMResult(X, y, Z, pobj, dobj, pinf, dinf, it, False)
    if raise_on_failure:
        raise ConvergenceError(
            f"interior-point method did not converge (primal infeasibility {pinf:.2e}, "
            f"dual infeasibility {dinf:.2e})", lower=pobj, upper=dobj, iterations=it)
    return result
