"""High-precision reference values for the smoothed log-odds z-score.

z = (ln((y1+a)/(n1-y1+a)) - ln((y2+a)/(n2-y2+a))) / sqrt(1/(y1+a) + 1/(y2+a))
"""
from mpmath import mp, mpf, log, sqrt

mp.dps = 60

CASES = [
    (30, 1000, 10, 1000, 0.5),
    (10, 1000, 30, 1000, 0.5),
    (25, 500, 25, 500, 0.5),
    (150, 2000, 30, 2000, 0.5),
    (1, 4700000, 0, 4700000, 0.01),
    (0, 10, 10, 10, 1.0),
]

for y1, n1, y2, n2, a in CASES:
    a = mpf(a)
    d = log((y1 + a) / (n1 - y1 + a)) - log((y2 + a) / (n2 - y2 + a))
    z = d / sqrt(1 / (y1 + a) + 1 / (y2 + a))
    print(f"({y1}, {n1}, {y2}, {n2}, {float(a)!r}, {mp.nstr(z, 25)}),")
