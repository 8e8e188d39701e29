"""Rounding into Hermitian contractions and real orthogonal pairs.

Two routes reach a pair of orthogonal matrices for a real tensor:

* the Hermitian route lifts ``M`` to a Hermitian tensor of side ``2n``,
  rounds its complex relaxation to unitaries, turns the eigenphases into
  real eigenvalues with the two-dimensional rounding of :mod:`ncgk.krivine`
  and reads off the real part of the off-diagonal block;
* the direct route signs the real relaxation with a random ``+-1`` vector,
  truncates singular values at ``sqrt(3)/2`` and completes the pair with a
  best response.

Either way the resulting contractions are pushed to orthogonal matrices by
:func:`to_orthogonal`, which never lowers the value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from . import sdp
from .errors import DomainError, ShapeError
from .krivine import KrivineCoefficients, krivine_coeffs, round_2d, truncation_order
from .round_complex import (RoundedPair, SecantSampler, round_complex, round_complex_best_of)
from .tensor import (Tensor4, as_vecmat, contract_best_response, evaluate_matrices, op_norm,
                     pair_with)

TAU = math.sqrt(3.0) / 2.0
ALIGN_CUTOFF = 1e-14
ROUTES = ("hermitian", "direct")


@dataclass(frozen=True)
class PipelineConfig:
    """Settings shared by the end-to-end solvers.

    Attributes
    ----------
    trials : int
        Independent rounding attempts; the best is kept.
    seed : int
        Seed of the rounding randomness.
    workers : int
        Thread count for batched rounding.
    feas_tol, gap_tol : float
        Tolerances of the relaxation solver.
    """

    trials: int = 64
    seed: int = 0
    workers: int = 1
    feas_tol: float = sdp.DEFAULT_FEAS_TOL
    gap_tol: float = sdp.DEFAULT_GAP_TOL

    def __post_init__(self):
        if self.trials < 1:
            raise DomainError("trials must be at least 1")
        if self.workers < 1:
            raise DomainError("workers must be at least 1")


@dataclass(frozen=True)
class RealRoundingConfig(PipelineConfig):
    """Settings for :func:`approximate_opt_real`.

    Attributes
    ----------
    tau : float
        Singular-value truncation level of the direct route; fixed at
        ``sqrt(3)/2``.
    eta : float
        Feasibility slack of the real relaxation.
    eps : float
        Accuracy of the two-dimensional rounding on the Hermitian route.
    routes : tuple of str
        Subset of ``("hermitian", "direct")``.
    """

    tau: float = TAU
    eta: float = sdp.DEFAULT_FEAS_TOL
    eps: float = 0.05
    routes: Sequence[str] = ROUTES

    def __post_init__(self):
        super().__post_init__()
        if abs(self.tau - TAU) > 1e-15:
            raise DomainError("tau is fixed at sqrt(3)/2")
        if not 0 < self.eta < 0.5:
            raise DomainError("eta must lie in (0, 1/2)")
        if self.eps <= 0:
            raise DomainError("eps must be positive")
        routes = tuple(self.routes)
        if not routes or any(r not in ROUTES for r in routes):
            raise DomainError(f"routes must be a nonempty subset of {ROUTES}")
        object.__setattr__(self, "routes", routes)


# ---------------------------------------------------------------------------
# Hermitian rounding


def _require_hermitian(M: Tensor4, tol: float = 1e-10):
    scale = max(1.0, float(np.max(np.abs(M.values), initial=0.0)))
    if not M.is_hermitian(tol * scale):
        raise DomainError("tensor is not Hermitian")


def _normal_eig(A):
    """Unitary eigenbasis and eigenvalues of a (numerically) normal matrix."""
    T, U = sla.schur(np.asarray(A, dtype=np.complex128), output="complex")
    return np.diag(T), U


def _unit(v):
    a = np.abs(v)
    return np.where(a > 0, v / np.where(a > 0, a, 1.0), 1.0)


def _hermitian_from_unitaries(M, A, B, eps, sampler, coeffs):
    v = evaluate_matrices(M, A, B)
    if abs(v) >= ALIGN_CUTOFF:
        A = A * (np.conj(v) / abs(v))
    xa, U = _normal_eig(A)
    xb, V = _normal_eig(B)
    lam, mu = round_2d(_unit(xa), _unit(xb), eps, sampler, coeffs)
    Ah = (U * lam) @ U.conj().T
    Bh = (V * mu) @ V.conj().T
    return 0.5 * (Ah + Ah.conj().T), 0.5 * (Bh + Bh.conj().T)


def _hermitian_pair(M, Ah, Bh, extra=None):
    val = evaluate_matrices(M, Ah, Bh).real
    info = {"signed_value": float(val)}
    if extra:
        info.update(extra)
    return RoundedPair(Ah, Bh, abs(float(val)), "hermitian-contraction", info=info)


def round_hermitian(M: Tensor4, X, Y, eps: float, sampler: SecantSampler,
                    coeffs: Optional[KrivineCoefficients] = None) -> RoundedPair:
    """Round a relaxed pair into Hermitian contractions ``A', B'``.

    A unitary pair from :func:`round_complex` is phase-aligned so that
    ``M(A, B)`` is real and nonnegative; the eigenphases of ``A`` and ``B``
    are then replaced by real numbers in ``[-1, 1]`` drawn jointly by the
    two-dimensional rounding.

    Returns
    -------
    RoundedPair
        ``value`` is ``|M(A', B')|``; ``info["signed_value"]`` keeps the
        sign. In expectation the signed value is at least about
        ``0.3536 * SDP`` for small ``eps``.
    """
    _require_hermitian(M)
    X = as_vecmat(X, M.n)
    Y = as_vecmat(Y, M.n)
    if coeffs is None:
        coeffs = krivine_coeffs(truncation_order(eps))
    rc = round_complex(M, X, Y, sampler.sample(X.shape[2]))
    Ah, Bh = _hermitian_from_unitaries(M, rc.A, rc.B, eps, sampler, coeffs)
    return _hermitian_pair(M, Ah, Bh)


def round_hermitian_values(M: Tensor4, X, Y, eps: float, trials: int, sampler: SecantSampler):
    """Signed values of ``trials`` independent Hermitian roundings, and the best pair.

    Trial ``i`` uses the child stream ``sampler.child(i)``.
    """
    _require_hermitian(M)
    if trials < 1:
        raise DomainError("trials must be at least 1")
    X = as_vecmat(X, M.n)
    Y = as_vecmat(Y, M.n)
    coeffs = krivine_coeffs(truncation_order(eps))
    values = np.empty(trials)
    best = None
    for row, i in enumerate(sampler.take_trials(trials)):
        child = sampler.child(i)
        rc = round_complex(M, X, Y, child.sample(X.shape[2]))
        Ah, Bh = _hermitian_from_unitaries(M, rc.A, rc.B, eps, child, coeffs)
        pair = _hermitian_pair(M, Ah, Bh, {"trial": i})
        values[row] = pair.info["signed_value"]
        if best is None or pair.value > best.value:
            best = pair
    return values, best


def round_hermitian_best_of(M: Tensor4, X, Y, eps: float, trials: int, sampler: SecantSampler) -> RoundedPair:
    return round_hermitian_values(M, X, Y, eps, trials, sampler)[1]


# ---------------------------------------------------------------------------
# direct real rounding


def truncate_singular_values(Y, tau: float = TAU):
    """``Y`` with every singular value replaced by ``min(s, tau)``.

    Works on stacks of matrices.
    """
    L, s, Rh = np.linalg.svd(Y)
    return L @ (np.minimum(s, tau)[..., :, None] * Rh)


def _check_real_inputs(M, X, Y):
    if not M.is_real:
        raise DomainError("direct rounding needs a real tensor")
    X = as_vecmat(X, M.n)
    Y = as_vecmat(Y, M.n)
    for W in (X, Y):
        if np.iscomplexobj(W) and np.any(W.imag != 0):
            raise DomainError("direct rounding needs real vector-valued matrices")
    return X.real, Y.real


def _direct_batch(M, X, Y, signs):
    """Best responses and truncated pairs for a stack of sign vectors."""
    n = M.n
    Ye = pair_with(Y, signs)  # (T, n, n)
    Yt = truncate_singular_values(Ye)
    Mm = M.matrix().real
    N = (Yt.reshape(len(signs), n * n) @ Mm.T).reshape(-1, n, n)
    L, _, Rh = np.linalg.svd(N)
    A = L @ Rh
    B = Yt / TAU
    return A, B, evaluate_matrices(M, A, B).real


def round_real_direct(M: Tensor4, X, Y, sampler: SecantSampler) -> RoundedPair:
    """Round a real relaxed pair with one random sign vector.

    Draws ``e`` uniformly from ``{-1, 1}^d``, truncates the singular values
    of ``Y_e = sum_r e_r Y_r`` at ``tau = sqrt(3)/2``, and returns the best
    response ``A`` to the truncated matrix together with
    ``B = trunc(Y_e) / tau``. Both are real contractions and
    ``M(A, B) >= 0``. In expectation the value is at least
    ``(1 - 2 eta)^2 / (3 sqrt 3)`` times the relaxation value when the
    relaxed pair is feasible up to ``eta``.
    """
    X, Y = _check_real_inputs(M, X, Y)
    e = sampler.signs(Y.shape[2])
    Yt = truncate_singular_values(pair_with(Y, e))
    A = contract_best_response(M, Yt)
    B = Yt / TAU
    val = evaluate_matrices(M, A, B).real
    return RoundedPair(A, B, abs(val), "contraction", info={"signed_value": float(val)})


def round_real_direct_values(M: Tensor4, X, Y, trials: int, sampler: SecantSampler, chunk: int = 512):
    """Values of ``trials`` independent direct roundings, and the best pair."""
    X, Y = _check_real_inputs(M, X, Y)
    if trials < 1:
        raise DomainError("trials must be at least 1")
    d = Y.shape[2]
    indices = sampler.take_trials(trials)
    values = np.empty(trials)
    best = None
    for start in range(0, trials, chunk):
        idx = indices[start:start + chunk]
        signs = np.stack([sampler.child(i).signs(d) for i in idx])
        A, B, vals = _direct_batch(M, X, Y, signs)
        values[start:start + len(idx)] = vals
        k = int(np.argmax(vals))
        if best is None or vals[k] > best.value:
            best = RoundedPair(A[k], B[k], float(vals[k]), "contraction",
                               info={"signed_value": float(vals[k]), "trial": idx[k]})
    return values, best


def round_real_direct_best_of(M: Tensor4, X, Y, trials: int, sampler: SecantSampler) -> RoundedPair:
    return round_real_direct_values(M, X, Y, trials, sampler)[1]


# ---------------------------------------------------------------------------
# contractions to orthogonal matrices


def greedy_signs(K, s, t):
    """Push every entry of ``s`` and then of ``t`` to ``+-1`` without lowering ``s @ K @ t``.

    Returns the new ``(s, t)`` and the value after each step (``len(s) +
    len(t) + 1`` entries). A zero coefficient selects ``+1``.
    """
    s = np.array(s, dtype=float)
    t = np.array(t, dtype=float)
    history = [float(s @ K @ t)]
    for i in range(s.size):
        s[i] = -1.0 if K[i] @ t < 0 else 1.0
        history.append(float(s @ K @ t))
    for j in range(t.size):
        t[j] = -1.0 if s @ K[:, j] < 0 else 1.0
        history.append(float(s @ K @ t))
    return s, t, history


def rank_one_coefficients(M: Tensor4, left, right):
    """``K[a, b] = M(x_a y_a^T, u_b v_b^T)`` for real rank-one terms.

    ``left = (x, y)`` holds the vectors as columns of two ``n x p`` arrays,
    ``right = (u, v)`` likewise with ``q`` columns.
    """
    x, y = left
    u, v = right
    if M.nnz == 0:
        return np.zeros((x.shape[1], u.shape[1]))
    p, q, r, w = M.indices.T
    return (M.values.real[:, None] * (x[p] * y[q])).T @ (u[r] * v[w])


def to_orthogonal(M: Tensor4, A, B, trace: bool = False):
    """Turn real contractions into orthogonal matrices without lowering ``M``.

    ``M(A, B)`` is linear in each singular value of ``A`` and of ``B``
    separately, so each one can be moved to whichever of ``-1`` or ``+1``
    does not decrease the value. Singular values of ``A`` are visited
    first, then those of ``B``; a zero coefficient picks ``+1``.

    Parameters
    ----------
    trace : bool
        Also return the value after every step (``2n + 1`` entries, the
        first being ``M(A, B)``).

    Returns
    -------
    U, V : ndarray
        Orthogonal matrices with ``M(U, V) >= M(A, B)``.
    values : list of float
        Only when ``trace`` is true.
    """
    if not M.is_real:
        raise DomainError("to_orthogonal needs a real tensor")
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != (M.n, M.n) or B.shape != (M.n, M.n):
        raise ShapeError(f"expected {M.n}x{M.n} matrices")
    if np.iscomplexobj(A) or np.iscomplexobj(B):
        if np.any(np.imag(A) != 0) or np.any(np.imag(B) != 0):
            raise DomainError("to_orthogonal needs real matrices")
        A, B = A.real, B.real
    if op_norm(A) > 1 + 1e-8 or op_norm(B) > 1 + 1e-8:
        raise DomainError("inputs must have operator norm at most 1")
    E, s, Fh = np.linalg.svd(A)
    G, t, Hh = np.linalg.svd(B)
    K = rank_one_coefficients(M, (E, Fh.T), (G, Hh.T))
    s, t, history = greedy_signs(K, s, t)
    U = (E * s) @ Fh
    V = (G * t) @ Hh
    return (U, V, history) if trace else (U, V)


# ---------------------------------------------------------------------------
# real <-> Hermitian tensor reductions


def real_to_hermitian_tensor(M: Tensor4) -> Tensor4:
    """Hermitian tensor ``H`` of side ``2n`` with ``H(A, B) = M(Re A12, Re B12)``.

    ``A12`` denotes the upper-right ``n x n`` block of a Hermitian ``A``.
    """
    if not M.is_real:
        raise DomainError("real_to_hermitian_tensor needs a real tensor")
    n = M.n
    if M.nnz == 0:
        return Tensor4.zeros(2 * n, field="complex")
    p, q, r, s = M.indices.T
    v = 0.25 * M.values.real
    blocks = [
        (p, q + n, r, s + n),
        (q + n, p, s + n, r),
        (p, q + n, s + n, r),
        (q + n, p, r, s + n),
    ]
    idx = np.concatenate([np.stack(b, axis=1) for b in blocks])
    return Tensor4(2 * n, idx, np.tile(v, 4), field="complex")


def embed_real_pair(S) -> np.ndarray:
    """Hermitian ``[[0, S], [S^T, 0]]`` for a real ``S``."""
    S = np.asarray(S)
    n = S.shape[0]
    Z = np.zeros((n, n))
    return np.block([[Z, S], [S.T, Z]]).astype(np.complex128)


def psi(A) -> np.ndarray:
    """Hermitian ``n x n`` image of a real ``2n x 2n`` matrix.

    With blocks ``A = [[A1, A2], [A3, A4]]``::

        psi(A) = (A1 + A1^T + A4 + A4^T) / 4 + i (A2 - A2^T + A3^T - A3) / 4

    ``psi`` is linear, does not increase the operator norm, and inverts
    ``X -> [[Re X, Im X], [-Im X, Re X]]`` on Hermitian ``X``.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] % 2:
        raise ShapeError("psi expects a square matrix of even side")
    if np.iscomplexobj(A):
        if np.any(A.imag != 0):
            raise DomainError("psi expects a real matrix")
        A = A.real
    n = A.shape[0] // 2
    A1, A2, A3, A4 = A[:n, :n], A[:n, n:], A[n:, :n], A[n:, n:]
    return (A1 + A1.T + A4 + A4.T) / 4 + 1j * (A2 - A2.T + A3.T - A3) / 4


def realify(X) -> np.ndarray:
    """``[[Re X, Im X], [-Im X, Re X]]``; :func:`psi` maps it back to Hermitian ``X``."""
    X = np.asarray(X)
    return np.block([[X.real, X.imag], [-X.imag, X.real]])


def _psi_matrix(n: int) -> np.ndarray:
    """``P[(p, q), (i, j)]`` with ``psi(A)[p, q] = sum P[(p, q), (i, j)] A[i, j]``."""
    m = 2 * n
    P = np.zeros((n, n, m, m), dtype=np.complex128)
    a = np.arange(n)
    pp, qq = np.meshgrid(a, a, indexing="ij")
    for (di, dj, ci, cj, w) in [
        (0, 0, pp, qq, 0.25), (0, 0, qq, pp, 0.25),  # A1, A1^T
        (n, n, pp, qq, 0.25), (n, n, qq, pp, 0.25),  # A4, A4^T
        (0, n, pp, qq, 0.25j), (0, n, qq, pp, -0.25j),  # A2, -A2^T
        (n, 0, qq, pp, 0.25j), (n, 0, pp, qq, -0.25j),  # A3^T, -A3
    ]:
        np.add.at(P, (pp, qq, ci + di, cj + dj), w)
    return P.reshape(n * n, m * m)


def hermitian_to_real_tensor(M: Tensor4, cutoff: float = 1e-14) -> Tensor4:
    """Real tensor ``R`` of side ``2n`` with ``R(A, B) = M(psi(A), psi(B))``.

    Entries below ``cutoff`` times the largest one are dropped.
    """
    _require_hermitian(M)
    n = M.n
    if M.nnz == 0:
        return Tensor4.zeros(2 * n)
    P = _psi_matrix(n)
    R = P.T @ M.matrix() @ P.conj()
    R = R.real
    big = float(np.max(np.abs(R), initial=0.0))
    R[np.abs(R) <= cutoff * big] = 0.0
    return Tensor4.from_dense(R.reshape((2 * n,) * 4), field="real")


# ---------------------------------------------------------------------------
# end-to-end solvers


def _orthogonal_pair(M, A, B, route, upper, extra):
    val = evaluate_matrices(M, A, B).real
    if val < 0:
        A = -A
    U, V = to_orthogonal(M, A, B)
    value = float(evaluate_matrices(M, U, V).real)
    info = {"route": route, "pre_orthogonal_value": abs(float(val))}
    info.update(extra)
    return RoundedPair(U, V, value, "orthogonal", upper_bound=upper, info=info)


def _hermitian_route(M, config):
    H = real_to_hermitian_tensor(M)
    sol = sdp.solve_relaxation(H, "unitary-complex", feas_tol=config.feas_tol, gap_tol=config.gap_tol)
    sampler = SecantSampler(config.seed)
    pair = round_hermitian_best_of(H, sol.X, sol.Y, config.eps, config.trials, sampler)
    n = M.n
    S = pair.A[:n, n:].real
    T = pair.B[:n, n:].real
    # H(A', B') = M(Re A12, Re B12), so the upper bound carries over
    return _orthogonal_pair(M, S, T, "hermitian", sol.upper_bound, {"relaxation_value": sol.value})


def _direct_route(M, config):
    sol = sdp.solve_relaxation(M, "unitary-real", feas_tol=config.eta, gap_tol=config.gap_tol)
    sampler = SecantSampler(config.seed)
    pair = round_real_direct_best_of(M, sol.X, sol.Y, config.trials, sampler)
    return _orthogonal_pair(M, pair.A, pair.B, "direct", sol.upper_bound, {"relaxation_value": sol.value})


def approximate_opt_real(M: Tensor4, config: Optional[RealRoundingConfig] = None) -> RoundedPair:
    """Orthogonal ``U, V`` approximately maximizing ``|M(U, V)|`` for a real tensor.

    Runs every route in ``config.routes`` and keeps the larger value. The
    returned ``upper_bound`` is the smaller certified relaxation bound among
    the routes that ran.
    """
    config = config or RealRoundingConfig()
    if not M.is_real:
        raise DomainError("approximate_opt_real needs a real tensor")
    runners = {"hermitian": _hermitian_route, "direct": _direct_route}
    results = [runners[r](M, config) for r in config.routes]
    best = max(results, key=lambda p: p.value)
    best.upper_bound = min(p.upper_bound for p in results)
    best.info["route_values"] = {p.info["route"]: p.value for p in results}
    return best


def approximate_opt_complex(M: Tensor4, config: Optional[PipelineConfig] = None) -> RoundedPair:
    """Unitary ``A, B`` approximately maximizing ``|M(A, B)|``."""
    config = config or PipelineConfig()
    sol = sdp.solve_relaxation(M, "unitary-complex", feas_tol=config.feas_tol, gap_tol=config.gap_tol)
    pair = round_complex_best_of(M, sol.X, sol.Y, config.trials, SecantSampler(config.seed), config.workers)
    pair.upper_bound = sol.upper_bound
    pair.info["relaxation_value"] = sol.value
    return pair
