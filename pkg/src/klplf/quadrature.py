"""Nested one-dimensional interpolatory rules on [-1, 1].

Two families are provided:

* Clenshaw-Curtis (``"cc"``): Chebyshev extrema, order ``m = 1`` at level 1
  and ``m = 2**(k-1) + 1`` above.
* Fejer's second rule (``"f2"``): the open counterpart without the endpoints,
  order ``m = 2**k - 1``.

Levels are 1-based.  Every node is produced from a single closed form,
``sin(pi * p / q)`` with ``p/q`` in lowest terms, so a node shared by two levels
is bitwise identical in both.  Sparse-grid assembly relies on that to
deduplicate nodes by exact equality.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidLevel

CLENSHAW_CURTIS = "cc"
FEJER2 = "f2"
RULE_KINDS = (CLENSHAW_CURTIS, FEJER2)

_ALIASES = {
    "cc": CLENSHAW_CURTIS,
    "clenshaw_curtis": CLENSHAW_CURTIS,
    "clenshaw-curtis": CLENSHAW_CURTIS,
    "f2": FEJER2,
    "fejer2": FEJER2,
    "fejer-2": FEJER2,
}


def canonical_kind(kind: str) -> str:
    try:
        return _ALIASES[kind.lower()]
    except (KeyError, AttributeError):
        raise ValueError(f"unknown rule kind {kind!r}; expected one of {RULE_KINDS}") from None


@dataclass(frozen=True, eq=False)
class Rule1D:
    kind: str
    level: int
    nodes: np.ndarray
    weights: np.ndarray
    bary: np.ndarray  # barycentric weights, arbitrary common scale

    @property
    def order(self) -> int:
        return len(self.nodes)

    def __repr__(self):
        return f"Rule1D(kind={self.kind!r}, level={self.level}, order={self.order})"


def order(kind: str, level: int) -> int:
    """Number of nodes of the rule ``kind`` at 1-based ``level``."""
    kind = canonical_kind(kind)
    _check_level(level)
    if kind == CLENSHAW_CURTIS:
        return 1 if level == 1 else 2 ** (level - 1) + 1
    return 2**level - 1


def _check_level(level):
    if isinstance(level, bool) or not isinstance(level, (int, np.integer)) or level < 1:
        raise InvalidLevel(f"level must be an integer >= 1, got {level!r}")


def _neg_cos(a: int, n: int) -> float:
    # -cos(pi a / n) == sin(pi (2a - n) / (2n)); reducing the fraction makes the
    # float depend only on the rational point, not on the level it came from
    num, den = 2 * a - n, 2 * n
    g = math.gcd(num, den)
    num, den = num // g, den // g
    if num == 0:
        return 0.0
    return math.sin(math.pi * num / den)


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


@lru_cache(maxsize=None)
def cc_rule(level: int) -> Rule1D:
    """Clenshaw-Curtis rule at ``level`` (explicit cosine-sum weights)."""
    _check_level(level)
    m = order(CLENSHAW_CURTIS, level)
    if m == 1:
        nodes = np.array([0.0])
        weights = np.array([2.0])
        bary = np.array([1.0])
        _freeze(nodes, weights, bary)
        return Rule1D(CLENSHAW_CURTIS, level, nodes, weights, bary)

    n = m - 1
    nodes = np.array([_neg_cos(j, n) for j in range(m)])
    theta = np.pi * np.arange(m) / n
    weights = np.empty(m)
    for j in range(m):
        s = 0.0
        for k in range(1, n // 2 + 1):
            b = 1.0 if 2 * k == n else 2.0
            s += b / (4 * k * k - 1) * math.cos(2 * k * theta[j])
        c = 1.0 if j in (0, n) else 2.0
        weights[j] = c / n * (1.0 - s)
    weights = 0.5 * (weights + weights[::-1])

    bary = np.array([(-1.0) ** j for j in range(m)])
    bary[0] *= 0.5
    bary[-1] *= 0.5
    _freeze(nodes, weights, bary)
    return Rule1D(CLENSHAW_CURTIS, level, nodes, weights, bary)


@lru_cache(maxsize=None)
def f2_rule(level: int) -> Rule1D:
    """Fejer's second rule at ``level``; never contains the endpoints."""
    _check_level(level)
    m = order(FEJER2, level)
    n = m + 1
    nodes = np.array([_neg_cos(j, n) for j in range(1, m + 1)])
    theta = np.pi * np.arange(1, m + 1) / n
    weights = np.empty(m)
    for j in range(m):
        s = 0.0
        for k in range(1, n // 2 + 1):
            s += math.sin((2 * k - 1) * theta[j]) / (2 * k - 1)
        weights[j] = 4.0 / n * math.sin(theta[j]) * s
    weights = 0.5 * (weights + weights[::-1])

    bary = np.array([(-1.0) ** j * math.sin(t) ** 2 for j, t in enumerate(theta)])
    _freeze(nodes, weights, bary)
    return Rule1D(FEJER2, level, nodes, weights, bary)


def rule(kind: str, level: int) -> Rule1D:
    kind = canonical_kind(kind)
    return cc_rule(level) if kind == CLENSHAW_CURTIS else f2_rule(level)


def integrate(r: Rule1D, f) -> float:
    """Apply the rule to a vectorised or scalar callable."""
    vals = np.asarray([f(z) for z in r.nodes], dtype=float)
    return float(np.dot(r.weights, vals))


def lagrange_basis(r: Rule1D, x) -> np.ndarray:
    """Values of the rule's Lagrange basis polynomials at points ``x``.

    Returns an array of shape ``(len(x), r.order)`` computed with the second
    (true) barycentric formula.  Points coinciding with a node get the exact
    unit vector.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if r.order == 1:
        return np.ones((len(x), 1))
    diff = x[:, None] - r.nodes[None, :]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        t = r.bary[None, :] / diff
        out = t / t.sum(axis=1, keepdims=True)
    # exact hits, and points so close to a node that the quotient overflowed
    rows = ~np.all(np.isfinite(t), axis=1)
    hit = np.abs(diff) == np.abs(diff).min(axis=1, keepdims=True)
    if rows.any():
        out[rows] = hit[rows].astype(float)
    return out


def to_csv(r: Rule1D) -> str:
    lines = ["node,weight"]
    lines += [f"{z!r},{w!r}" for z, w in zip(r.nodes, r.weights)]
    return "\n".join(lines) + "\n"
