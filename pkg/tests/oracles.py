"""Independent reference implementations used to check the package.

Each oracle is written directly from the defining formula with plain loops
or arbitrary precision, sharing no code with the package internals.
"""

import itertools
import math
from fractions import Fraction

import mpmath
import numpy as np
from scipy.spatial import cKDTree


def tricube_formula(x, y):
    r = math.sqrt(x * x + y * y)
    if r >= 1.0:
        return 0.0
    return 440.0 / (162.0 * math.pi) * (1.0 - r**3) ** 3


def local_constant_loop(points, responses, weights, kernel_fn, eps, t):
    """Weighted kernel average at ``t`` by a plain loop; 0/0 gives 0."""
    num = 0.0
    den = 0.0
    k = len(t)
    for x, y, w in zip(points, responses, weights):
        s = [(ti - xi) for ti, xi in zip(t, x)]
        if max(abs(v) for v in s) > eps:
            continue
        kv = kernel_fn(*[v / eps for v in s]) / eps**k
        num += y * kv * w
        den += kv * w
    return num / den if den > 0 else 0.0


def median_boxes(points, lo, hi):
    """Recursive median split as a plain recursion over Python lists; returns {index: (lo, hi)}."""
    out = {}
    k = len(lo)

    def rec(idx, lo, hi, first):
        if len(idx) == 1:
            out[idx[0]] = (list(lo), list(hi))
            return
        if first:
            axis = 0
        elif k == 2:
            axis = 0 if hi[0] - lo[0] > hi[1] - lo[1] else 1
        else:
            edges = [h - l for l, h in zip(lo, hi)]
            axis = edges.index(max(edges))
        vals = sorted(points[i][axis] for i in idx)
        h = len(idx) // 2
        cut = (vals[h - 1] + vals[h]) / 2
        left = [i for i in idx if points[i][axis] < cut]
        right = [i for i in idx if points[i][axis] >= cut]
        lhi = list(hi)
        lhi[axis] = cut
        rlo = list(lo)
        rlo[axis] = cut
        rec(left, lo, lhi, False)
        rec(right, rlo, hi, False)

    rec(list(range(len(points))), list(lo), list(hi), True)
    return out


def voronoi_mc_measures(sites, lo, hi, samples, seed):
    """Nearest-site frequencies of uniform samples times the box area."""
    rng = np.random.default_rng(seed)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    u = rng.uniform(lo, hi, (samples, lo.size))
    _, owner = cKDTree(sites).query(u)
    return np.bincount(owner, minlength=len(sites)) / samples * float(np.prod(hi - lo))


def g_constant_mp(k, p, dps=50):
    with mpmath.workdps(dps):
        k = mpmath.mpf(k)
        p = mpmath.mpf(p)
        base = mpmath.power(2, (p - k) / (p + 1)) - 1
        return (p - 1) ** (p / 2) * mpmath.power(2, p * (k + mpmath.mpf(3) / 2)) * (1 + k / base) ** (p + 1)


def tail_bound_mp(k, p, rho, M_p, L, eps, E_delta_pow, P_exceed, y, dps=50):
    with mpmath.workdps(dps):
        g = g_constant_mp(k, p, dps)
        mp = mpmath.mpf
        first = (g * mp(rho) ** (-mp(p)) * mp(M_p) * mp(L) ** (mp(p) / 2) * mp(y) ** (-mp(p))
                 * mp(eps) ** (-mp(k) * (mp(p) / 2 + 1)) * mp(E_delta_pow))
        return first + mp(P_exceed)


def wilcoxon_exact_enumeration(diffs):
    """Exact two-sided p for the signed-rank sum, enumerating sign patterns with fractions."""
    d = [v for v in diffs if v != 0]
    absd = sorted(abs(v) for v in d)
    ranks = {}
    i = 0
    while i < len(absd):
        j = i
        while j + 1 < len(absd) and absd[j + 1] == absd[i]:
            j += 1
        ranks[absd[i]] = Fraction(i + j + 2, 2)
        i = j + 1
    r = [ranks[abs(v)] for v in d]
    w_obs = sum(rv for rv, v in zip(r, d) if v > 0)
    centre = sum(r) / 2
    hits = 0
    total = 0
    for signs in itertools.product((0, 1), repeat=len(r)):
        w = sum(rv for rv, s in zip(r, signs) if s)
        total += 1
        if abs(w - centre) >= abs(w_obs - centre):
            hits += 1
    return float(w_obs), hits / total
