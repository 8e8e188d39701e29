"""Hyperbolic-secant rounding of vector-valued unitaries to unitary pairs.

Given ``X, Y`` with ``XX* = X*X = YY* = Y*Y = I`` the rounding draws
``z`` uniformly from ``{1, -1, i, -i}^d`` and ``t`` from the density
``(1/2) sech(pi t / 2)``, forms ``X_z = <X, z> / sqrt(2)`` and
``Y_z = <Y, z> / sqrt(2)`` and returns

    A = U_z |X_z|^{it},    B = V_z |Y_z|^{-it}

where ``X_z = U_z |X_z|`` and ``Y_z = V_z |Y_z|`` are polar decompositions.
In expectation ``|M(A, B)|`` is at least about half the relaxation value.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, ResourceError, ShapeError
from .tensor import (Tensor4, as_vecmat, evaluate_matrices, pair_with, polar, positive_power,
                     unitary_power)

_U_CLAMP = 1e-12
_FOURTH_ROOTS = np.array([1, -1, 1j, -1j])


def secant_quantile(u):
    """Inverse CDF of the density ``(1/2) sech(pi t / 2)``."""
    u = np.clip(u, _U_CLAMP, 1.0 - _U_CLAMP)
    return (2.0 / np.pi) * np.log(np.tan(0.5 * np.pi * u))


def secant_density(t):
    """``(1/2) sech(pi t / 2)``, written to avoid overflow for large ``|t|``."""
    e = np.exp(-0.5 * np.pi * np.abs(np.asarray(t, dtype=float)))
    return e / (1.0 + e * e)


class SecantSampler:
    """Seeded source of rounding randomness.

    Draws from the sampler's own stream advance its state. Per-trial samples
    used by :func:`round_complex_best_of` come from independent child
    streams keyed by ``(seed, trial index)``, so a trial's randomness does not
    depend on how many trials run or in which order.

    Parameters
    ----------
    seed : int
        Nonnegative 64-bit seed.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self._rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed)))
        self._trial = 0

    @property
    def rng(self) -> np.random.Generator:
        return self._rng

    def secant(self, size=None):
        """Draw from the hyperbolic secant distribution."""
        u = self._rng.random(size)
        t = secant_quantile(u)
        return float(t) if size is None else t

    def fourth_roots(self, d: int) -> np.ndarray:
        return _FOURTH_ROOTS[self._rng.integers(0, 4, size=d)]

    def signs(self, d: int) -> np.ndarray:
        return self._rng.choice(np.array([-1.0, 1.0]), size=d)

    def uniform(self, low: float, high: float, size=None):
        return self._rng.uniform(low, high, size)

    def choice(self, k: int, p: np.ndarray, size=None):
        return self._rng.choice(k, size=size, p=p)

    def sample(self, d: int) -> "RoundingSample":
        """Draw ``z`` then ``t`` from this sampler's stream."""
        z = self.fourth_roots(d)
        return RoundingSample(z, self.secant())

    def child(self, index: int) -> "SecantSampler":
        """Independent sampler for trial ``index``."""
        c = SecantSampler.__new__(SecantSampler)
        c.seed = self.seed
        c._rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=(int(index),))))
        c._trial = 0
        return c

    def take_trials(self, count: int) -> range:
        """Reserve the next ``count`` trial indices."""
        start = self._trial
        self._trial += count
        return range(start, start + count)


def sample_secant(sampler: SecantSampler) -> float:
    """One draw from the hyperbolic secant distribution."""
    return sampler.secant()


@dataclass(frozen=True)
class RoundingSample:
    z: np.ndarray
    t: float

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.complex128)
        if z.ndim != 1 or not np.allclose(z ** 4, 1.0, atol=1e-12):
            raise DomainError("z must be a vector of fourth roots of unity")


@dataclass
class RoundedPair:
    """A feasible pair with its value ``|M(A, B)|``.

    ``mode`` is one of ``"unitary"``, ``"orthogonal"`` or
    ``"hermitian-contraction"``.
    """

    A: np.ndarray
    B: np.ndarray
    value: float
    mode: str
    upper_bound: Optional[float] = None
    info: dict = field(default_factory=dict)


def round_complex(M: Tensor4, X, Y, sample: RoundingSample) -> RoundedPair:
    """Round ``(X, Y)`` with the explicit randomness ``sample``."""
    X = as_vecmat(X, M.n)
    Y = as_vecmat(Y, M.n)
    z = np.asarray(sample.z)
    if X.shape[2] != z.size or Y.shape[2] != z.size:
        raise ShapeError("z length must equal the vector dimension of X and Y")
    Xz = pair_with(X, z) / np.sqrt(2.0)
    Yz = pair_with(Y, z) / np.sqrt(2.0)
    Uz, Px = polar(Xz)
    Vz, Py = polar(Yz)
    A = Uz @ unitary_power(Px, sample.t)
    B = Vz @ unitary_power(Py, -sample.t)
    return RoundedPair(A, B, abs(evaluate_matrices(M, A, B)), "unitary")


def _power_factors(W, t, floor: float = 0.0):
    """``L diag(s^{it}) R^*`` for a stack ``W = L diag(s) R^*``.

    ``t`` has the batch shape of ``W``; singular values are floored at
    ``floor`` before taking powers.
    """
    L, s, Rh = np.linalg.svd(W)
    if floor > 0:
        s = np.maximum(s, floor)
    ph = positive_power(s, t)
    return L @ (ph[..., :, None] * Rh)


def round_complex_batch(M: Tensor4, X, Y, zs, ts):
    """Vectorized :func:`round_complex` over many ``(z, t)`` draws.

    Returns
    -------
    A, B : ndarray, shape (T, n, n)
    values : ndarray, shape (T,)
    """
    X = as_vecmat(X, M.n)
    Y = as_vecmat(Y, M.n)
    zs = np.atleast_2d(zs)
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    Xz = pair_with(X, zs) / np.sqrt(2.0)
    Yz = pair_with(Y, zs) / np.sqrt(2.0)
    A = _power_factors(Xz, ts)
    B = _power_factors(Yz, -ts)
    return A, B, np.abs(evaluate_matrices(M, A, B))


def trial_samples(sampler: SecantSampler, indices, d: int):
    """``(z, t)`` arrays for the given trial indices (one child stream each)."""
    zs = np.empty((len(indices), d), dtype=np.complex128)
    ts = np.empty(len(indices))
    for row, i in enumerate(indices):
        s = sampler.child(i).sample(d)
        zs[row], ts[row] = s.z, s.t
    return zs, ts


def _chunks(seq, size):
    for start in range(0, len(seq), size):
        yield seq[start:start + size]


def round_complex_values(M: Tensor4, X, Y, trials: int, sampler: SecantSampler, workers: int = 1,
                         chunk: int = 256):
    """Values of ``trials`` independent roundings, plus the best pair.

    Returns
    -------
    values : ndarray, shape (trials,)
    best : RoundedPair
    """
    if trials < 1:
        raise DomainError("trials must be at least 1")
    X = as_vecmat(X, M.n)
    Y = as_vecmat(Y, M.n)
    d = X.shape[2]
    indices = sampler.take_trials(trials)

    def run(idx):
        zs, ts = trial_samples(sampler, idx, d)
        A, B, vals = round_complex_batch(M, X, Y, zs, ts)
        k = int(np.argmax(vals))
        return vals, (A[k], B[k], float(vals[k]))

    parts = list(_chunks(indices, chunk))
    if workers > 1 and len(parts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, parts))
    else:
        results = [run(p) for p in parts]
    values = np.concatenate([r[0] for r in results])
    # max() keeps the first maximizer, so ties resolve to the earliest trial
    A, B, v = max((r[1] for r in results), key=lambda x: x[2])
    pair = RoundedPair(A, B, v, "unitary", info={"trial": indices[int(np.argmax(values))]})
    return values, pair


def round_complex_best_of(M: Tensor4, X, Y, trials: int, sampler: SecantSampler, workers: int = 1) -> RoundedPair:
    """Best of ``trials`` independent roundings."""
    return round_complex_values(M, X, Y, trials, sampler, workers)[1]


# ---------------------------------------------------------------------------
# four-wise independent z family

_IRREDUCIBLE = {2: 0b111, 3: 0b1011, 4: 0b10011, 5: 0b100101, 6: 0b1000011, 7: 0b10000011,
                8: 0b100011011, 9: 0b1000010001, 10: 0b10000001001}


def _gf_mul_table(m: int) -> np.ndarray:
    q = 1 << m
    poly = _IRREDUCIBLE[m]
    a = np.arange(q)[:, None]
    b = np.arange(q)[None, :]
    out = np.zeros((q, q), dtype=np.int64)
    aa = np.broadcast_to(a, (q, q)).copy()
    bb = np.broadcast_to(b, (q, q)).copy()
    for _ in range(m):
        out ^= np.where(bb & 1, aa, 0)
        bb >>= 1
        aa <<= 1
        aa = np.where(aa & q, aa ^ poly, aa)
    return out


def fourwise_z_family(d: int, max_size: int = 1 << 24) -> np.ndarray:
    """All members of a 4-wise independent family over ``{1, -1, i, -i}^d``.

    Coordinates are indexed by distinct elements ``x_r`` of ``GF(2^m)`` with
    ``2^m >= max(d, 4)``. Each member is a cubic ``h`` over the field; bit 0
    of ``h(x_r)`` gives the sign ``sigma_r`` and bit 1 gives ``tau_r``, and
    ``z_r = sigma_r * i^{(1 - tau_r) / 2}``. Any four coordinates of a
    uniformly chosen member are independent and uniform.

    Returns
    -------
    ndarray, shape (2^{4m}, d)
    """
    if d < 1:
        raise DomainError("d must be positive")
    m = max(2, math.ceil(math.log2(max(d, 4))))
    if m not in _IRREDUCIBLE:
        raise ResourceError(f"dimension {d} is too large for an enumerable four-wise family")
    q = 1 << m
    if q ** 4 > max_size:
        raise ResourceError(f"four-wise family of size {q ** 4} exceeds the limit {max_size}")
    mul = _gf_mul_table(m)
    x = np.arange(d)
    powers = [np.ones(d, dtype=np.int64), x, mul[x, x], mul[mul[x, x], x]]
    coeffs = np.array(list(itertools.product(range(q), repeat=4)), dtype=np.int64)
    h = np.zeros((coeffs.shape[0], d), dtype=np.int64)
    for k in range(4):
        h ^= mul[coeffs[:, k][:, None], powers[k][None, :]]
    sigma = 1 - 2 * (h & 1)
    tau = 1 - 2 * ((h >> 1) & 1)
    return sigma * np.where(tau == 1, 1.0 + 0j, 1j)


def derandomized_grid(eps: float, d: int) -> np.ndarray:
    """Uniform ``t`` grid on ``[-log(1/eps), log(1/eps)]`` with
    ``ceil(log(1/eps) * max(1/eps^2, d/eps))`` points."""
    T = math.log(1.0 / eps)
    N = math.ceil(T * max(1.0 / eps ** 2, d / eps))
    return np.linspace(-T, T, N)


def round_complex_derandomized(M: Tensor4, X, Y, eps: float, max_evaluations: float = 5e8,
                               chunk: int = 32) -> RoundedPair:
    """Deterministic rounding: best pair over the four-wise ``z`` family and a ``t`` grid.

    Singular values of ``X_z`` and ``Y_z`` below ``eps`` are raised to
    ``eps`` before taking imaginary powers.
    """
    if not 0 < eps < 0.5:
        raise DomainError("eps must lie in (0, 1/2)")
    X = as_vecmat(X, M.n)
    Y = as_vecmat(Y, M.n)
    d = X.shape[2]
    family = fourwise_z_family(d)
    grid = derandomized_grid(eps, d)
    if family.shape[0] * grid.size * max(M.nnz, 1) > max_evaluations:
        raise ResourceError(
            f"derandomized search needs {family.shape[0]} x {grid.size} evaluations; too many")
    Xz = pair_with(X, family) / np.sqrt(2.0)
    Yz = pair_with(Y, family) / np.sqrt(2.0)
    Lx, sx, Rx = np.linalg.svd(Xz)
    Ly, sy, Ry = np.linalg.svd(Yz)
    sx, sy = np.maximum(sx, eps), np.maximum(sy, eps)
    best = (-1.0, 0, 0)
    logx, logy = np.log(sx), np.log(sy)
    for start in range(0, family.shape[0], chunk):
        sl = slice(start, start + chunk)
        phx = np.exp(1j * grid[None, :, None] * logx[sl, None, :])
        phy = np.exp(-1j * grid[None, :, None] * logy[sl, None, :])
        A = Lx[sl, None] @ (phx[..., :, None] * Rx[sl, None])
        B = Ly[sl, None] @ (phy[..., :, None] * Ry[sl, None])
        vals = np.abs(evaluate_matrices(M, A, B))
        k = np.unravel_index(int(np.argmax(vals)), vals.shape)
        if vals[k] > best[0]:
            best = (float(vals[k]), start + int(k[0]), int(k[1]))
    _, iz, it = best
    t = grid[it]
    A = Lx[iz] @ (np.exp(1j * t * logx[iz])[:, None] * Rx[iz])
    B = Ly[iz] @ (np.exp(-1j * t * logy[iz])[:, None] * Ry[iz])
    return RoundedPair(A, B, abs(evaluate_matrices(M, A, B)), "unitary",
                       info={"z": family[iz], "t": float(t), "family_size": family.shape[0],
                             "grid_size": grid.size})
