"""Independent reference implementations used to derive frozen test values.

Nothing here imports klplf; each oracle takes the slow, obvious route.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction


def jacobi_eigenvalues(a, tol=1e-15, max_sweeps=100):
    """Cyclic Jacobi rotations on a dense symmetric matrix (lists of floats)."""
    n = len(a)
    a = [list(map(float, row)) for row in a]
    for _ in range(max_sweeps):
        off = math.sqrt(sum(a[i][j] ** 2 for i in range(n) for j in range(n) if i != j))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p][q]) < 1e-300:
                    continue
                theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp, akq = a[k][p], a[k][q]
                    a[k][p] = c * akp - s * akq
                    a[k][q] = s * akp + c * akq
                for k in range(n):
                    apk, aqk = a[p][k], a[q][k]
                    a[p][k] = c * apk - s * aqk
                    a[q][k] = s * apk + c * aqk
    return sorted((a[i][i] for i in range(n)), reverse=True)


def exp_kernel(m=25, length=10.0):
    return [[math.exp(-abs(i - j) / length) for j in range(m)] for i in range(m)]


def cumulative_order(eigs, fraction):
    total = sum(eigs)
    acc = 0.0
    for k, v in enumerate(eigs, start=1):
        acc += v
        if acc >= fraction * total:
            return k
    return len(eigs)


# ----------------------------------------------------------------- grids
def cc_order(k):
    return 1 if k == 1 else 2 ** (k - 1) + 1


def f2_order(k):
    return 2 ** k - 1


def node_keys(rule, k):
    """1-D nodes as exact angle fractions ``t`` with node = -cos(pi t)."""
    if rule == "cc":
        m = cc_order(k)
        if m == 1:
            return {Fraction(1, 2)}
        return {Fraction(j, m - 1) for j in range(m)}
    m = f2_order(k)
    return {Fraction(j, m + 1) for j in range(1, m + 1)}


def brute_index_set(w, gamma, l_max=None, top=8):
    """All i in {1..top}^d with sum (i_n - 1) gamma_n <= w min(gamma)."""
    g = [Fraction(x).limit_denominator(1000) for x in gamma]
    budget = w * min(g)
    cap = top if l_max is None else min(top, l_max)
    return [i for i in itertools.product(range(1, cap + 1), repeat=len(g))
            if sum((a - 1) * b for a, b in zip(i, g)) <= budget]


def naive_coefficient(i, index_set):
    s = set(index_set)
    total = 0
    for j in itertools.product((0, 1), repeat=len(i)):
        if tuple(a + b for a, b in zip(i, j)) in s:
            total += (-1) ** sum(j)
    return total


def closed_form_coefficient(i, w, d):
    """Isotropic Smolyak: (-1)^(N-|i|) C(d-1, N-|i|) with N = w + d."""
    k = w + d - sum(i)
    if k < 0 or k > d - 1:
        return 0
    return (-1) ** k * math.comb(d - 1, k)


def brute_union_count(rule, w, gamma, l_max=None, top=8):
    """Distinct nodes of the union of tensor grids over indices with c != 0."""
    xs = brute_index_set(w, gamma, l_max, top)
    pts = set()
    for i in xs:
        if naive_coefficient(i, xs) == 0:
            continue
        pts.update(itertools.product(*[node_keys(rule, a) for a in i]))
    return len(pts)


# ----------------------------------------------------------- power flow
def two_bus_bisection(p_load=0.5, x=0.1, tol=1e-15):
    """Lossless line, slack 1 at angle 0, PQ load P with Q = 0.

    Zero reactive load forces V2 = cos(theta) with theta = delta1 - delta2,
    leaving sin(theta) cos(theta) / x = P to solve by bisection.
    """
    lo, hi = 0.0, math.pi / 4
    f = lambda t: math.sin(t) * math.cos(t) / x - p_load
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    theta = 0.5 * (lo + hi)
    return math.cos(theta), -theta
