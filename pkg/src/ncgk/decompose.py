"""Greedy decomposition of a tensor into unitary product terms, and a
grid-search approximation scheme for dense instances.

:func:`decompose` writes ``M = sum_t alpha_t A_t (x) B_t + E``, i.e.
``M[i,j,k,l] = sum_t alpha_t A_t[i,j] B_t[k,l] + E[i,j,k,l]``, where each
step rounds the relaxation of the current residual to a unitary pair and
subtracts its projection. It stops once the certified relaxation bound of
the residual drops below ``eps`` times the first rounded value.

With few terms, ``M(X, Y)`` is close to ``sum_t alpha_t a_t conj(b_t)``
where ``a_t = sum A_t * X`` and ``b_t = sum conj(B_t) * Y`` are scalars in
the disc of radius ``n``. :func:`ptas_dense` grids the ``a`` values and,
for each reachable grid cell, maximizes over ``Y`` exactly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _ipm, sdp
from .errors import ConvergenceError, DomainError, ResourceError
from .round_complex import SecantSampler, round_complex_best_of
from .round_real import PipelineConfig, RealRoundingConfig, approximate_opt_real
from .tensor import Tensor4, contract_best_response, evaluate_matrices, frobenius, op_norm


@dataclass
class Decomposition:
    """Terms ``(alpha_t, A_t, B_t)`` and the residual ``E``.

    ``certificates[t]`` is ``(upper_bound, value)``: the certified relaxation
    bound of the residual before step ``t`` and the rounded value extracted
    at that step. The last entry, with value ``nan``, is the stopping
    certificate of the final residual.
    """

    terms: list
    residual: Tensor4
    certificates: list
    lower_bound: float
    eps: float
    energies: list = field(default_factory=list)

    @property
    def T(self) -> int:
        return len(self.terms)

    def term_bound(self, M: Tensor4) -> float:
        """``4 n^2 ||M||^2 / (eps (1 - eps) LB)^2``."""
        n = M.n
        return 4 * n ** 2 * frobenius(M) ** 2 / (self.eps * (1 - self.eps) * self.lower_bound) ** 2

    def reconstruct(self) -> np.ndarray:
        """Dense ``sum_t alpha_t A_t (x) B_t + E``."""
        out = self.residual.dense().copy()
        for alpha, A, B in self.terms:
            out += alpha * np.einsum("ij,kl->ijkl", A, B)
        return out


def _product(A, B):
    return np.einsum("ij,kl->ijkl", A, B)


def _round_step(R: Tensor4, real: bool, config):
    """Upper bound on the residual and a rounded pair ``(A, B, v)`` with ``v = R(A, B) >= 0``."""
    if real:
        pair = approximate_opt_real(R, config)
        A, B = pair.A, pair.B
        upper = pair.upper_bound
    else:
        sol = sdp.solve_relaxation(R, "unitary-complex", feas_tol=config.feas_tol, gap_tol=config.gap_tol)
        pair = round_complex_best_of(R, sol.X, sol.Y, config.trials, SecantSampler(config.seed),
                                     config.workers)
        A, B = pair.A, pair.B
        upper = sol.upper_bound
    v = evaluate_matrices(R, A, B)
    if abs(v) > 0:
        A = A * (np.conj(v) / abs(v))
        if real:
            A = A.real
    return upper, A, B, abs(v)


def decompose(M: Tensor4, eps: float, config: Optional[PipelineConfig] = None, real: Optional[bool] = None,
              max_terms: Optional[int] = None) -> Decomposition:
    """Greedy unitary-product decomposition with a certified residual.

    Each step solves the relaxation of the residual ``R``, rounds it to
    unitaries ``U, V`` with ``v = R(U, V)`` real and nonnegative, and
    subtracts ``(v / n^2) conj(U) (x) V``. This lowers ``||R||_2^2`` by
    exactly ``v^2 / n^2``. The loop stops when the residual's certified
    upper bound is at most ``eps * LB`` where ``LB`` is the first rounded
    value, a lower bound on the optimum of ``M``.

    Parameters
    ----------
    M : Tensor4
    eps : float
        In ``(0, 1/2]``.
    config : PipelineConfig, optional
        Rounding trials, seed and solver tolerances.
    real : bool, optional
        Use orthogonal pairs; defaults to ``M.is_real``. Requires a
        :class:`RealRoundingConfig` or uses the default one.
    max_terms : int, optional
        Hard cap on steps; defaults to twice the worst-case term bound.

    Raises
    ------
    ConvergenceError
        If a relaxation fails or the cap is reached; the partial
        decomposition is attached as ``partial``.
    """
    if not 0 < eps <= 0.5:
        raise DomainError("eps must lie in (0, 1/2]")
    if M.nnz == 0 or frobenius(M) == 0:
        raise DomainError("cannot decompose the zero tensor")
    real = M.is_real if real is None else real
    if real and not M.is_real:
        raise DomainError("orthogonal terms need a real tensor")
    if config is None:
        config = RealRoundingConfig(routes=("direct",)) if real else PipelineConfig()
    elif real and not isinstance(config, RealRoundingConfig):
        config = RealRoundingConfig(trials=config.trials, seed=config.seed, workers=config.workers,
                                    feas_tol=config.feas_tol, gap_tol=config.gap_tol, routes=("direct",))
    n = M.n
    R = np.array(M.dense())
    terms, certs = [], []
    energies = [float(np.sum(np.abs(R) ** 2))]
    lower = None
    cap = max_terms

    def snapshot():
        field_ = "real" if real else None
        E = R.real if real else R
        dec = Decomposition(list(terms), Tensor4.from_dense(E, field=field_), list(certs), lower or 0.0, eps,
                            list(energies))
        return dec

    while True:
        Rt = Tensor4.from_dense(R.real if real else R, field="real" if real else None)
        try:
            upper, A, B, v = _round_step(Rt, real, config)
        except ConvergenceError as exc:
            exc.partial = snapshot()
            raise
        if lower is None:
            lower = v
            if lower <= 0:
                raise DomainError("rounding found no positive value; the tensor is numerically zero")
            if cap is None:
                cap = 2 * math.ceil(4 * n ** 2 * energies[0] / (eps * (1 - eps) * lower) ** 2) + 1
        elif upper <= eps * lower:
            certs.append((float(upper), float("nan")))
            break
        if len(terms) >= cap:
            exc = ConvergenceError(f"decomposition did not reach its stopping rule within {cap} terms",
                                   lower=v, upper=upper, iterations=len(terms))
            exc.partial = snapshot()
            raise exc
        alpha = v / n ** 2
        At = np.conj(A)
        R = R - alpha * _product(At, B)
        terms.append((alpha, At, B))
        certs.append((float(upper), float(v)))
        energies.append(float(np.sum(np.abs(R) ** 2)))
    return snapshot()


# ---------------------------------------------------------------------------
# dense-instance approximation scheme


def _nuclear(C):
    return np.sum(np.linalg.svd(C, compute_uv=False), axis=-1)


def _disc_grid(radius: float, step: float) -> np.ndarray:
    """Complex grid points ``step * (p + i q)`` whose square cell meets the disc."""
    k = int(math.ceil(radius / step)) + 1
    p = np.arange(-k, k + 1) * step
    g = (p[:, None] + 1j * p[None, :]).ravel()
    # nearest point of each cell to the origin
    near = np.maximum(np.abs(g.real) - step, 0.0) + 1j * np.maximum(np.abs(g.imag) - step, 0.0)
    return g[np.abs(near) <= radius]


class _ReachSDP:
    """Minimize the box distance ``s`` from ``(sum A_t * X)_t`` to a target over contractions ``X``.

    Variables: ``G = [[P, X], [X^*, Q]] >= 0`` with ``P = Q = I``, plus
    nonnegative ``s`` and slacks ``w``.
    """

    def __init__(self, mats):
        self.mats = [np.asarray(A, dtype=np.complex128) for A in mats]
        T = len(self.mats)
        n = self.mats[0].shape[0]
        self.n, self.T = n, T
        basis = sdp.hermitian_basis(n, True)
        nb = basis.shape[0]
        m = 2 * nb + 4 * T
        cons = np.zeros((m, 2 * n, 2 * n), dtype=np.complex128)
        cons[:nb, :n, :n] = basis
        cons[nb:2 * nb, n:, n:] = basis
        self.b_fixed = np.concatenate([np.real(np.einsum("aii->a", basis))] * 2)
        for t, A in enumerate(self.mats):
            Pre = np.zeros((2 * n, 2 * n), dtype=np.complex128)
            Pre[:n, n:] = np.conj(A) / 2
            Pre[n:, :n] = A.T / 2
            Pim = np.zeros((2 * n, 2 * n), dtype=np.complex128)
            Pim[:n, n:] = 1j * np.conj(A) / 2
            Pim[n:, :n] = -1j * A.T / 2
            r = 2 * nb + 4 * t
            cons[r], cons[r + 1], cons[r + 2], cons[r + 3] = Pre, -Pre, Pim, -Pim
        lp = np.zeros((4 * T, 1 + 4 * T))
        lp[:, 0] = -1.0
        lp[:, 1:] = np.eye(4 * T)
        blocks = [_ipm.BlockSpec("psd", 2 * n), _ipm.BlockSpec("lp", 1 + 4 * T)]
        parts = [_ipm.DensePart(0, np.arange(m), cons), _ipm.LPPart(1, np.arange(2 * nb, m), lp)]
        self.op = _ipm.Operator(m, blocks, parts, np.complex128)
        c_lp = np.zeros(1 + 4 * T)
        c_lp[0] = -1.0
        self.C = [np.zeros((2 * n, 2 * n), dtype=np.complex128), c_lp]

    def solve(self, target):
        g = np.asarray(target)
        rhs = np.stack([g.real, -g.real, g.imag, -g.imag], axis=1).ravel()
        b = np.concatenate([self.b_fixed, rhs])
        res = _ipm.solve(self.op, b, self.C, feas_tol=1e-9, gap_tol=1e-8, max_iter=100, raise_on_failure=False)
        n = self.n
        X = res.X[0][:n, n:]
        nrm = op_norm(X)
        if nrm > 1:
            X = X / nrm
        a = np.array([np.sum(A * X) for A in self.mats])
        return float(np.max(np.abs(np.concatenate([(a - g).real, (a - g).imag])))), X, a


@dataclass
class PTASResult:
    """Outcome of :func:`ptas_dense`.

    ``grid_value`` is the largest grid value over reachable cells. ``value``
    is ``|M(X, Y)|`` for a unitary pair grown from the feasibility witness
    of that cell by alternating best responses, so it never exceeds the
    optimum.
    """

    value: float
    grid_value: float
    terms: int
    step: float
    cells: int
    sdp_calls: int
    lower_bound: float


def ptas_dense(M: Tensor4, kappa: float, eps: float, config: Optional[PipelineConfig] = None,
               max_cells: int = 2_000_000, max_sdp_calls: int = 5000, directions: int = 64,
               return_info: bool = False):
    """Approximate the unitary optimum of a dense tensor by grid search.

    The tensor is decomposed with :func:`decompose`; the scalars
    ``a_t = sum A_t * X`` are enumerated on a square grid of spacing
    ``eps * kappa * n / T`` over the disc of radius ``n``. Cells are
    screened with support-function tests and visited in decreasing order
    of their value, which for grid point ``a`` and the best ``Y`` is the
    nuclear norm of ``sum_t alpha_t a_t B_t``. The first cell for which a
    small semidefinite program finds a contraction ``X`` with every
    ``a_t(X)`` within one grid step of the cell center is the top reachable
    cell. The grid value can exceed the optimum by up to
    ``sqrt(2) * step * n * sum |alpha_t|`` plus the residual's share, so the
    returned value is ``|M(X, Y)|`` for a unitary pair obtained from that
    witness ``X`` by alternating best responses on the full tensor.

    Parameters
    ----------
    kappa : float
        Density parameter; rounding must certify ``Opt >= kappa n ||M||_2``.
    eps : float
        Accuracy, in ``(0, 1/2]``.
    max_cells, max_sdp_calls : int
        Work budgets.
    return_info : bool
        Return a :class:`PTASResult` instead of the value.

    Raises
    ------
    DomainError
        If the density certificate fails.
    ResourceError
        If the grid or the number of feasibility programs exceeds its budget.
    """
    if kappa <= 0:
        raise DomainError("kappa must be positive")
    if not 0 < eps <= 0.5:
        raise DomainError("eps must lie in (0, 1/2]")
    config = config or PipelineConfig()
    n = M.n
    norm = frobenius(M)
    dec = decompose(M, eps, config, real=False)
    if dec.lower_bound < kappa * n * norm * (1 - 1e-6):
        raise DomainError(f"rounded value {dec.lower_bound:.6g} is below kappa * n * ||M||_2 = "
                          f"{kappa * n * norm:.6g}; the instance is not dense enough")
    T = dec.T
    if T == 0:
        value = 0.0
        info = PTASResult(value, 0.0, 0, 0.0, 0, 0, dec.lower_bound)
        return info if return_info else value
    alpha = np.array([a for a, _, _ in dec.terms])
    As = [A for _, A, _ in dec.terms]
    Bs = np.stack([B for _, _, B in dec.terms])
    step = eps * kappa * n / T
    axis = _disc_grid(float(n), step)
    cells = axis.size ** T
    if cells > max_cells:
        raise ResourceError(f"grid has {cells} cells, above the budget of {max_cells}")
    grid = np.array(list(itertools.product(axis, repeat=T)))  # (cells, T)

    # screen with support functions of the reachable set {a(X) : ||X|| <= 1}
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(1,)))
    ang = np.exp(2j * np.pi * np.arange(32) / 32)
    dirs = [np.eye(T)[t] * w for t in range(T) for w in ang]
    dirs += list(rng.standard_normal((directions, T)) + 1j * rng.standard_normal((directions, T)))
    W = np.array(dirs)  # (D, T)
    support = _nuclear(np.einsum("dt,tij->dij", W.conj(), np.stack(As)))
    slack = step * (np.abs(W.real) + np.abs(W.imag)).sum(axis=1)
    reach = np.real(grid @ W.conj().T) - slack[None, :] <= support[None, :] * (1 + 1e-12)
    grid = grid[reach.all(axis=1)]
    # one more test per cell, along the direction in which its value grows fastest
    C = np.einsum("ct,tkl->ckl", grid * alpha, Bs)
    L, _, Rh = np.linalg.svd(C)
    Q = L @ Rh
    w = np.conj(alpha[None, :] * np.einsum("cij,tij->ct", Q.conj(), Bs))
    sup = _nuclear(np.einsum("ct,tij->cij", w.conj(), np.stack(As)))
    lo = np.real(np.sum(grid * w.conj(), axis=1)) - step * (np.abs(w.real) + np.abs(w.imag)).sum(axis=1)
    grid = grid[lo <= sup * (1 + 1e-12) + 1e-12]

    # grid values; b is optimized exactly: max over contractions Y of
    # |sum_t alpha_t a_t conj(b_t(Y))| is the nuclear norm of sum_t alpha_t a_t B_t
    vals = _nuclear(np.einsum("ct,tkl->ckl", grid * alpha, Bs))
    order = np.argsort(-vals, kind="stable")
    solver = _ReachSDP(As)
    calls = 0
    grid_value, X = 0.0, None
    for c in order:
        if calls >= max_sdp_calls:
            raise ResourceError(f"more than {max_sdp_calls} feasibility programs needed")
        calls += 1
        dist, Xc, _ = solver.solve(grid[c])
        if dist <= step * (1 + 1e-6):
            grid_value, X = float(vals[c]), Xc
            break
    value = _polish(M, X) if X is not None else 0.0
    info = PTASResult(value, grid_value, T, step, int(grid.shape[0]), calls, dec.lower_bound)
    return info if return_info else value


def _polish(M: Tensor4, X, rounds: int = 50):
    """Alternating exact best responses on ``|M(X, Y)|`` over unitaries, starting from ``X``."""
    Mm = M.matrix()
    n = M.n
    best = 0.0
    for _ in range(rounds):
        c = (X.reshape(-1) @ Mm).reshape(n, n)  # M(X, Y) = sum c * conj(Y)
        L, _, Rh = np.linalg.svd(c)
        Y = L @ Rh
        X = contract_best_response(M, Y)
        val = abs(evaluate_matrices(M, X, Y))
        if val <= best * (1 + 1e-13):
            best = max(best, val)
            break
        best = val
    return float(best)
