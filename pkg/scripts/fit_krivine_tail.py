"""Estimate the constant C with sum_{l > L} |b_{2l+1}| <= C / L for all L >= 1.

Computes the coefficients up to ``--lmax`` (default 10^5), measures
``L * tail(L)`` where the tail beyond ``lmax`` is extrapolated from a power
law fitted to the last decade, and prints the supremum together with the
rounded-up value hard-coded in ``ncgk.krivine.TAIL_CONSTANT``.

Usage::

    python scripts/fit_krivine_tail.py [--lmax 100000]
"""

import argparse
import math

import numpy as np

from ncgk.krivine import TAIL_CONSTANT, krivine_b


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--lmax", type=int, default=100_000)
    args = parser.parse_args()

    b = np.abs(krivine_b(args.lmax))  # |b_{2l+1}| for l = 0..lmax
    ell = np.arange(b.size)

    # power-law fit |b_{2l+1}| ~ c * l^(-p) on the last decade (nonzero terms only)
    sel = (ell > args.lmax // 10) & (b > 0)
    slope, intercept = np.polyfit(np.log(ell[sel]), np.log(b[sel]), 1)
    p, c = -slope, math.exp(intercept)
    if p <= 1:
        raise SystemExit(f"fitted decay exponent {p:.3f} is not summable")
    # integral bound for the unseen tail sum_{l > lmax} c l^-p <= c lmax^(1-p) / (p - 1)
    far_tail = c * args.lmax ** (1 - p) / (p - 1)

    suffix = np.cumsum(b[::-1])[::-1]  # suffix[L] = sum_{l >= L} |b|
    tail = np.append(suffix[1:], 0.0) + far_tail  # sum_{l > L}
    L = ell[1:]
    ratio = L * tail[1:]
    k = int(np.argmax(ratio))

    print(f"partial sum up to l={args.lmax}: {b.sum():.12f}")
    print(f"fitted decay: |b_(2l+1)| ~ {c:.4g} * l^(-{p:.4f})")
    print(f"extrapolated tail beyond lmax: {far_tail:.3e}")
    print(f"sup_L L * tail(L) = {ratio[k]:.6g} at L = {L[k]}")
    for probe in (1, 2, 5, 10, 100, 1000, 10000):
        if probe < b.size:
            print(f"  L={probe:>6d}  tail={tail[probe]:.4e}  L*tail={probe * tail[probe]:.4e}")
    print(f"hard-coded TAIL_CONSTANT = {TAIL_CONSTANT}  (safe: {TAIL_CONSTANT >= ratio[k]})")


if __name__ == "__main__":
    main()
