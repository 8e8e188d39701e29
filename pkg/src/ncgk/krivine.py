"""Krivine's series for the two-dimensional sign rounding.

The coefficients ``b_1, b_3, ...`` satisfy ``sum |b_m| = 1`` and

    cos(x - y) = sqrt(2) * sum_m b_m (1/2pi) int f(m x - t) g(t - m y) dt

over odd ``m``, with ``g(x) = sign(cos x)`` and ``f`` the even,
``pi``-antiperiodic function equal to 1 on ``[0, pi/4]`` and to a cubic on
``[pi/4, pi/2)``. Sampling a term with probability ``|b_m|`` gives random
signs ``lambda_j, mu_k`` in ``[-1, 1]`` whose correlation is
``cos(theta_j - phi_k) / sqrt(2)`` up to the truncated tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

#: Safe value of C in ``sum_{l > L} |b_{2l+1}| <= C / L`` for every ``L >= 1``.
#: Obtained with ``scripts/fit_krivine_tail.py`` (observed supremum 1.85e-2,
#: attained at L = 3) and rounded up.
TAIL_CONSTANT = 0.02


def krivine_a(L: int) -> np.ndarray:
    """``a_m`` for ``m = 0..2L+1`` (zero at even ``m``)."""
    a = np.zeros(2 * L + 2)
    ell = np.arange(L + 1)
    m = 2 * ell + 1
    sgn = np.where(ell % 2 == 0, 1.0, -1.0)
    a[m] = sgn * np.cos(m * np.pi / 4) * 16.0 / (np.pi ** 2 * m ** 4) * (1.0 / m - sgn * np.pi / 4)
    return a


def _b_full(L: int, a: np.ndarray) -> np.ndarray:
    N = 2 * L + 2
    b = np.zeros(N)
    acc = np.zeros(N)
    b[1] = math.sqrt(2.0) * (math.pi / 4) ** 3 / (3.0 * a[1])
    odd_a = a[3::2]  # a_3, a_5, ...
    for k in range(1, N, 2):
        if k > 1:
            b[k] = -acc[k] / a[1]
        # push a_d b_k into acc[d k] for odd d >= 3
        targets = np.arange(3 * k, N, 2 * k)
        if targets.size:
            acc[targets] += odd_a[:targets.size] * b[k]
    return b


def krivine_b(L: int) -> np.ndarray:
    """``b_{2l+1}`` for ``l = 0..L``."""
    return _b_full(L, krivine_a(L))[1::2]


@dataclass(frozen=True)
class KrivineCoefficients:
    """Truncated Krivine series.

    Attributes
    ----------
    L : int
        Truncation order; terms ``l = 0..L`` are kept.
    a, b : ndarray, shape (2L + 2,)
        ``a[m]`` and ``b[m]`` for ``m = 0..2L+1``; entries at even ``m`` are 0.
    p : float
        ``sum_{l <= L} |b_{2l+1}|``, the probability of drawing a kept term.
    tail_bound : float
        ``TAIL_CONSTANT / L``, an upper bound on ``1 - p``.
    """

    L: int
    a: np.ndarray
    b: np.ndarray
    p: float
    tail_bound: float

    @property
    def odd_b(self) -> np.ndarray:
        return self.b[1::2]


def krivine_coeffs(L: int) -> KrivineCoefficients:
    if L < 1:
        raise DomainError("truncation order must be at least 1")
    a = krivine_a(L)
    b = _b_full(L, a)
    return KrivineCoefficients(L, a, b, float(np.sum(np.abs(b))), TAIL_CONSTANT / L)


def truncation_order(eps: float) -> int:
    """``L = ceil(C / eps)``."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    return max(1, math.ceil(TAIL_CONSTANT / eps))


def krivine_g(x):
    """``sign(cos x)``."""
    return np.sign(np.cos(x))


def _f_base(t):
    # t in [0, pi/2]
    s = 0.5 * np.pi - t
    cubic = (6.0 / np.pi) * s - 0.5 * (4.0 / np.pi) ** 3 * s ** 3
    return np.where(t <= 0.25 * np.pi, 1.0, cubic)


def krivine_f(x):
    """Even, ``pi``-antiperiodic extension of the piecewise cubic."""
    y = np.abs(np.asarray(x, dtype=float))
    k = np.floor(y / np.pi)
    r = y - k * np.pi  # in [0, pi)
    sign = np.where(k % 2 == 0, 1.0, -1.0)
    val = np.where(r <= 0.5 * np.pi, _f_base(np.minimum(r, 0.5 * np.pi)),
                   -_f_base(np.minimum(np.pi - r, 0.5 * np.pi)))
    out = sign * val
    return float(out) if np.ndim(out) == 0 else out


def _phases(values, name):
    v = np.atleast_1d(np.asarray(values, dtype=np.complex128))
    if np.any(np.abs(np.abs(v) - 1.0) > 1e-8):
        raise DomainError(f"{name} must have unit modulus")
    return np.angle(v)


def round_2d_batch(xs, ys, eps: float, sampler, draws: int, coeffs: KrivineCoefficients | None = None):
    """``draws`` independent outputs of the two-dimensional rounding.

    Returns
    -------
    lam : ndarray, shape (draws, len(xs))
    mu : ndarray, shape (draws, len(ys))
    """
    theta = _phases(xs, "xs")
    phi = _phases(ys, "ys")
    if coeffs is None:
        coeffs = krivine_coeffs(truncation_order(eps))
    ob = coeffs.odd_b
    probs = np.append(np.abs(ob), max(0.0, 1.0 - np.sum(np.abs(ob))))
    probs = probs / probs.sum()
    t = sampler.uniform(-np.pi, np.pi, size=draws)
    pick = sampler.choice(probs.size, probs, size=draws)  # last index means "no term"
    live = pick < ob.size
    m = 2.0 * np.where(live, pick, 0) + 1.0
    sgn = np.sign(ob[np.where(live, pick, 0)])
    lam = sgn[:, None] * krivine_f(m[:, None] * theta[None, :] - t[:, None])
    mu = krivine_g(t[:, None] - m[:, None] * phi[None, :])
    lam[~live] = 0.0
    mu[~live] = 0.0
    return lam, mu


def round_2d(xs, ys, eps: float, sampler, coeffs: KrivineCoefficients | None = None):
    """One draw of ``(lambda, mu)`` for unit complex inputs ``xs`` and ``ys``."""
    lam, mu = round_2d_batch(xs, ys, eps, sampler, 1, coeffs)
    return lam[0], mu[0]
