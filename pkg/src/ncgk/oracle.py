"""Slow, independent reference computations used to check the algorithms.

Everything here favours transparency over speed: exhaustive grids over
tiny groups, exhaustive averages over all sign or fourth-root vectors, and
plain quadrature.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Union

import numpy as np
from scipy import integrate, optimize

from .errors import DomainError, ResourceError
from .tensor import Tensor4, as_vecmat, evaluate_matrices, gram_products, pair_with

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------------------
# O(2) and U(2) grids


def rotation(theta):
    """``[[cos, -sin], [sin, cos]]``; vectorized over ``theta``."""
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def reflection(theta):
    """``rotation(theta) @ diag(1, -1)``."""
    return rotation(theta) * np.array([1.0, -1.0])


def _o2(theta, family: int):
    return rotation(theta) if family == 0 else reflection(theta)


def _golden_max(f, lo: float, hi: float, iters: int = 40):
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def brute_opt_real(M: Tensor4, grid: int = 180, sweeps: int = 30) -> float:
    """``max |M(U, V)|`` over orthogonal ``U, V`` by exhaustive search (``n <= 2``).

    For ``n = 1`` the answer is ``|M[0,0,0,0]|`` (signs ``+-1``). For
    ``n = 2`` every pair of rotation/reflection families is scanned on a
    ``grid x grid`` angle grid; the best point is then refined by
    coordinate-wise golden-section search (``sweeps`` passes, one bracket
    of width two grid steps per angle).
    """
    if not M.is_real:
        raise DomainError("brute_opt_real needs a real tensor")
    n = M.n
    if n == 1:
        v = M.dense()[0, 0, 0, 0].real
        return float(max(abs(v * s * t) for s in (-1, 1) for t in (-1, 1)))
    if n != 2:
        raise DomainError("brute_opt_real supports n <= 2 only")
    if M.nnz == 0:
        return 0.0
    th = np.linspace(0.0, 2 * np.pi, grid, endpoint=False)
    best = (-1.0, 0, 0, 0.0, 0.0)
    for fu, fv in itertools.product((0, 1), repeat=2):
        U = _o2(th, fu)[:, None]
        V = _o2(th, fv)[None, :]
        vals = np.abs(evaluate_matrices(M, np.broadcast_to(U, (grid, grid, 2, 2)),
                                        np.broadcast_to(V, (grid, grid, 2, 2))))
        i, j = np.unravel_index(int(np.argmax(vals)), vals.shape)
        if vals[i, j] > best[0]:
            best = (float(vals[i, j]), fu, fv, th[i], th[j])
    value, fu, fv, a, b = best
    h = 2 * np.pi / grid

    def val(x, y):
        return abs(evaluate_matrices(M, _o2(x, fu), _o2(y, fv)))

    for _ in range(sweeps):
        a, va = _golden_max(lambda x: val(x, b), a - h, a + h)
        b, vb = _golden_max(lambda y: val(a, y), b - h, b + h)
        if vb <= value * (1 + 1e-15):
            value = max(value, vb)
            break
        value = vb
    return float(max(value, val(a, b)))


def brute_opt_complex_n1(M: Tensor4, grid: int = 360) -> float:
    """``max |M[0,0,0,0] a conj(b)|`` over unit phases ``a, b`` on a grid."""
    if M.n != 1:
        raise DomainError("brute_opt_complex_n1 needs n = 1")
    m = complex(M.dense()[0, 0, 0, 0])
    ph = np.exp(2j * np.pi * np.arange(grid) / grid)
    return float(np.max(np.abs(m * ph[:, None] * ph[None, :].conj())))


def su2(alpha, beta, gamma):
    """``[[e^{i a} cos g, e^{i b} sin g], [-e^{-i b} sin g, e^{-i a} cos g]]``."""
    alpha, beta, gamma = np.broadcast_arrays(alpha, beta, gamma)
    c, s = np.cos(gamma), np.sin(gamma)
    row0 = np.stack([np.exp(1j * alpha) * c, np.exp(1j * beta) * s], -1)
    row1 = np.stack([-np.exp(-1j * beta) * s, np.exp(-1j * alpha) * c], -1)
    return np.stack([row0, row1], -2)


def brute_opt_complex_n2(M: Tensor4, grid: int = 24, refine: int = 8) -> float:
    """``max |M(A, B)|`` over ``A, B`` in ``U(2)``.

    Global phases do not change ``|M(A, B)|``, and for fixed ``B`` the best
    ``A`` gives the nuclear norm of ``N[i,j] = sum_kl M[i,j,k,l] conj(B[k,l])``.
    The search therefore scans ``B`` over a ``grid^3`` grid of ``SU(2)``
    and polishes the ``refine`` best points with Nelder-Mead.
    """
    if M.n != 2:
        raise DomainError("brute_opt_complex_n2 needs n = 2")
    Mm = M.matrix()

    def values(B):
        N = (B.reshape(-1, 4).conj() @ Mm.T).reshape(-1, 2, 2)
        return np.sum(np.linalg.svd(N, compute_uv=False), axis=-1)

    a = np.linspace(0, 2 * np.pi, grid, endpoint=False)
    g = np.linspace(0, np.pi / 2, grid)
    A_, B_, G_ = np.meshgrid(a, a, g, indexing="ij")
    params = np.stack([A_.ravel(), B_.ravel(), G_.ravel()], 1)
    vals = values(su2(*params.T))
    best = float(vals.max())
    for k in np.argsort(-vals)[:refine]:
        res = optimize.minimize(lambda p: -values(su2(*p))[0], params[k], method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000})
        best = max(best, float(-res.fun))
    return best


# ---------------------------------------------------------------------------
# exhaustive expectations

Statistic = Union[str, Callable[[np.ndarray], np.ndarray]]

_STATISTICS = {
    "left-square": lambda W: np.einsum("...ij,...kj,...kl,...ml->...im", W, W.conj(), W, W.conj()),
    "right-square": lambda W: np.einsum("...ji,...jk,...lk,...lm->...im", W.conj(), W, W.conj(), W),
    "left-gram": lambda W: W @ np.swapaxes(W.conj(), -1, -2),
    "right-gram": lambda W: np.swapaxes(W.conj(), -1, -2) @ W,
    "matrix": lambda W: W,
}


def _statistic(statistic: Statistic):
    if callable(statistic):
        return statistic
    try:
        return _STATISTICS[statistic]
    except KeyError:
        raise DomainError(f"unknown statistic {statistic!r}; choose from {sorted(_STATISTICS)}") from None


def _average(W, alphabet, statistic, limit):
    W = as_vecmat(W)
    d = W.shape[2]
    count = len(alphabet) ** d
    if count > limit:
        raise ResourceError(f"{count} vectors exceed the enumeration limit {limit}")
    f = _statistic(statistic)
    total = None
    for chunk in _chunked(itertools.product(alphabet, repeat=d), 4096):
        z = np.array(chunk, dtype=np.complex128)
        s = np.sum(f(pair_with(W, z)), axis=0)
        total = s if total is None else total + s
    return total / count


def _chunked(it, size):
    buf = []
    for x in it:
        buf.append(x)
        if len(buf) == size:
            yield buf
            buf = []
    if buf:
        yield buf


def exhaustive_z_expectation(W, statistic: Statistic = "left-square", limit: int = 10 ** 6):
    """Exact average of ``statistic(W_z)`` over all ``z`` in ``{1, -1, i, -i}^d``.

    ``W_z = <W, z> = sum_r conj(z_r) W_r``. Named statistics:
    ``"left-square"`` ``(W_z W_z^*)^2``, ``"right-square"`` ``(W_z^* W_z)^2``,
    ``"left-gram"``, ``"right-gram"`` and ``"matrix"``; any callable on a
    stack of matrices also works.
    """
    return _average(W, (1, -1, 1j, -1j), statistic, limit)


def exhaustive_sign_expectation(X, statistic: Statistic = "left-square", limit: int = 10 ** 6):
    """Exact average of ``statistic(X_e)`` over all ``e`` in ``{-1, 1}^d``."""
    return _average(X, (1, -1), statistic, limit)


def exhaustive_pair_expectation(M: Tensor4, X, Y, limit: int = 10 ** 6) -> complex:
    """Exact average of ``M(X_z, Y_z)`` over all ``z`` with ``X_z = <X, z> / sqrt(2)``."""
    X = as_vecmat(X, M.n)
    Y = as_vecmat(Y, M.n)
    d = X.shape[2]
    if 4 ** d > limit:
        raise ResourceError(f"{4 ** d} vectors exceed the enumeration limit {limit}")
    z = np.array(list(itertools.product((1, -1, 1j, -1j), repeat=d)), dtype=np.complex128)
    vals = evaluate_matrices(M, pair_with(X, z) / math.sqrt(2), pair_with(Y, z) / math.sqrt(2))
    return complex(np.mean(vals))


def fourth_moment_identity(W, side: str = "left") -> np.ndarray:
    """Closed form of the average of ``(W_z W_z^*)^2`` (or ``(W_z^* W_z)^2``) over fourth roots.

    ``left``: ``(WW^*)^2 + sum_r W_r (W^*W - W_r^* W_r) W_r^*``;
    ``right``: ``(W^*W)^2 + sum_r W_r^* (WW^* - W_r W_r^*) W_r``,
    with ``WW^* = sum_r W_r W_r^*`` and ``W^*W = sum_r W_r^* W_r``.
    """
    W = as_vecmat(W)
    P, Q = gram_products(W)
    comps = np.moveaxis(W, 2, 0)
    H = lambda A: A.conj().T
    if side == "left":
        return P @ P + sum(Wr @ (Q - H(Wr) @ Wr) @ H(Wr) for Wr in comps)
    if side == "right":
        return Q @ Q + sum(H(Wr) @ (P - Wr @ H(Wr)) @ Wr for Wr in comps)
    raise DomainError("side must be 'left' or 'right'")


def sign_moment_bound(X, side: str = "left") -> np.ndarray:
    """``(XX^*)^2 + 2 ||X^*X|| XX^*`` (or the mirrored right-hand form)."""
    P, Q = gram_products(as_vecmat(X))
    if side == "left":
        return P @ P + 2 * np.linalg.norm(Q, 2) * P
    if side == "right":
        return Q @ Q + 2 * np.linalg.norm(P, 2) * Q
    raise DomainError("side must be 'left' or 'right'")


# ---------------------------------------------------------------------------
# quadrature


def secant_characteristic(a: float) -> float:
    """``int a^{it} (1/2) sech(pi t / 2) dt`` by adaptive quadrature (real part)."""
    if a <= 0:
        raise DomainError("a must be positive")
    la = math.log(a)

    def half_sech(t):
        e = math.exp(-0.5 * math.pi * t)
        return e / (1.0 + e * e)

    if la == 0.0:
        val, _ = integrate.quad(half_sech, 0.0, np.inf, epsabs=1e-13, epsrel=1e-12)
    else:
        val, _ = integrate.quad(half_sech, 0.0, np.inf, weight="cos", wvar=la, epsabs=1e-13, limlst=200)
    return 2.0 * val


def krivine_series_value(x: float, y: float, b, f, g, nodes: int = 10 ** 4) -> float:
    """``sqrt(2) sum_l b_l (1/2pi) int f(m x - t) g(t - m y) dt`` with ``m = 2l + 1``.

    The integral over one period is a rectangle rule with ``nodes`` points.
    """
    t = np.linspace(-np.pi, np.pi, nodes, endpoint=False)
    m = 2 * np.arange(len(b)) + 1
    avg = np.mean(f(m[:, None] * x - t[None, :]) * g(t[None, :] - m[:, None] * y), axis=1)
    return float(math.sqrt(2.0) * np.sum(np.asarray(b) * avg))
