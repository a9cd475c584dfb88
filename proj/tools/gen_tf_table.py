"""Generates the 5% tF critical-value table (Lee, McCrary, Moreira & Porter 2022).

For a first-stage threshold F, c(F) is the smallest critical value such that the
screened test "reject when F_hat > F and |t| > c" has worst-case size 0.05. The
worst case is attained at |corr| = 1, where with z ~ N(0, 1) and first-stage
location f0 the statistics are t_F = z + f0 and t = z * t_F / f0, so the
rejection event is a union of intervals in z with closed-form probability.
"""
import math
import sys

from scipy import optimize, stats

ALPHA = 0.05


def intervals_reject(f0, F, c):
    # |z (z + f0)| > c f0
    out = []
    disc = f0 * f0 + 4 * c * f0
    r1 = (-f0 - math.sqrt(disc)) / 2
    r2 = (-f0 + math.sqrt(disc)) / 2
    out.append((-math.inf, r1))
    out.append((r2, math.inf))
    if f0 > 4 * c:
        d2 = math.sqrt(f0 * f0 - 4 * c * f0)
        out.append(((-f0 - d2) / 2, (-f0 + d2) / 2))
    return out


def intersect(a, b):
    lo, hi = max(a[0], b[0]), min(a[1], b[1])
    return (lo, hi) if lo < hi else None


def rejection(f0, F, c):
    screen = [(-math.inf, -f0 - math.sqrt(F)), (-f0 + math.sqrt(F), math.inf)]
    pieces = []
    for a in intervals_reject(f0, F, c):
        for b in screen:
            x = intersect(a, b)
            if x:
                pieces.append(x)
    pieces.sort()
    # merge overlaps
    merged = []
    for p in pieces:
        if merged and p[0] <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], p[1]))
        else:
            merged.append(p)
    return sum(stats.norm.cdf(h) - stats.norm.cdf(l) for l, h in merged)


def max_rejection(F, c):
    grid = [0.01 * 1.03 ** k for k in range(400)]
    grid = [g for g in grid if g < 60]
    vals = [rejection(f, F, c) for f in grid]
    i = max(range(len(vals)), key=vals.__getitem__)
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(lambda f: -rejection(f, F, c), bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-10})
    return max(-res.fun, vals[i])


def critical(F):
    return optimize.brentq(lambda c: max_rejection(F, c) - ALPHA, 1.0, 5000.0, xtol=1e-10)


if __name__ == "__main__":
    if len(sys.argv) > 1:
        for f in sys.argv[1:]:
            print(f, critical(float(f)))
        sys.exit(0)
    Fs = []
    f = 4.0
    while f < 104.7:
        Fs.append(round(f, 3))
        f *= 1.02
    Fs.append(104.7)
    for F in Fs:
        print(f"    {{{F:.3f}, {critical(F):.4f}}},")
