"""Print F upper-tail probabilities by direct numerical integration.

The values are frozen into tests/test_stats.py; this script is the oracle
that produced them and shares nothing with fwscope.stats.

    python tools/freeze_f_tail.py
"""

from __future__ import annotations

import mpmath as mp

mp.mp.dps = 40

GRID = [
    (0.05, 1, 1), (0.5, 1, 5), (1.0, 2, 2), (1.5, 3, 10), (2.0, 1, 30),
    (2.5, 4, 20), (3.0, 2, 50), (4.0, 5, 5), (0.8, 10, 3), (1.2, 7, 40),
    (5.5, 3, 100), (10.0, 1, 8), (13.5, 1, 4), (0.3, 12, 12), (2.2, 20, 60),
    (7.0, 6, 15), (1.0, 1, 1000), (3.3, 2, 3), (25.0, 3, 25), (0.95, 50, 200),
]


def density(x, d1, d2):
    d1, d2 = mp.mpf(d1), mp.mpf(d2)
    return mp.sqrt((d1 * x) ** d1 * d2**d2 / (d1 * x + d2) ** (d1 + d2)) / (x * mp.beta(d1 / 2, d2 / 2))


def upper_tail(f, d1, d2):
    # integrate the lower part (finite interval, singular endpoint handled by tanh-sinh)
    lower = mp.quad(lambda x: density(x, d1, d2), [0, f])
    upper = mp.quad(lambda x: density(x, d1, d2), [f, mp.inf])
    # both halves, normalized by their sum to cancel quadrature bias
    return upper / (lower + upper)


if __name__ == "__main__":
    for f, d1, d2 in GRID:
        print(f"    ({f}, {d1}, {d2}, {mp.nstr(upper_tail(mp.mpf(f), d1, d2), 17)}),")
