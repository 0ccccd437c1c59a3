"""Tensor, isotropic Smolyak and anisotropic Smolyak grids.

The anisotropic grid of 0-based index ``w`` with weights ``gamma`` uses the
index set::

    X(w) = { i >= 1 : sum_n (i_n - 1) * gamma_n <= w * min(gamma) }

and the combination technique: each multi-index ``i`` contributes the tensor
product of 1-D rules at levels ``i_n`` scaled by::

    c(i) = sum_{j in {0,1}^d, i + j in X(w)} (-1)^|j|

Only indices with ``w*min(gamma) - sum(gamma) < sum_n (i_n - 1) gamma_n`` can
have ``c(i) != 0``.  An optional per-dimension cap ``l_max`` restricts every
``i_n <= l_max``; the capped set is still downward closed, so the same
coefficient formula applies.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import quadrature
from .errors import DimensionTooLarge, ValuesMissing

MAX_DIM = 64
TENSOR = "tensor"
ISOTROPIC = "isotropic"
ANISOTROPIC = "anisotropic"
GRID_KINDS = (TENSOR, ISOTROPIC, ANISOTROPIC)

# Ways of reading a single "level k" as (w, l_max); used to compare against
# published node counts that do not state their indexing.
LEVEL_CONVENTIONS = {
    "one_based": lambda k: (k - 1, None),
    "zero_based": lambda k: (k, None),
    "capped": lambda k: (k + 1, k),
}

_TOL = 1e-12


@dataclass(frozen=True)
class AnisoWeights:
    gamma: tuple

    def __post_init__(self):
        g = tuple(float(x) for x in self.gamma)
        if not g:
            raise ValueError("gamma must be non-empty")
        if any(not (x > 0) or not math.isfinite(x) for x in g):
            raise ValueError(f"gamma entries must be positive and finite, got {g}")
        object.__setattr__(self, "gamma", g)

    @classmethod
    def isotropic(cls, d: int) -> "AnisoWeights":
        return cls((1.0,) * d)

    @property
    def d(self) -> int:
        return len(self.gamma)

    @property
    def gamma_min(self) -> float:
        return min(self.gamma)

    @property
    def gamma_sum(self) -> float:
        return sum(self.gamma)


class _Arith:
    """Comparisons for the index-set inequalities.

    Rational weights (anything a small-denominator fraction reproduces to
    1e-12) are compared exactly; otherwise floats with a 1e-12 band.
    """

    def __init__(self, gamma: Sequence[float]):
        fr = []
        for g in gamma:
            r = Fraction(g).limit_denominator(1_000_000)
            if abs(float(r) - g) > _TOL * abs(g):
                fr = None
                break
            fr.append(r)
        self.exact = fr is not None
        self.g = fr if self.exact else [float(x) for x in gamma]
        self.tol = 0 if self.exact else _TOL * max(1.0, max(gamma))

    def budget(self, w) -> object:
        w = Fraction(w) if self.exact else float(w)
        return w * min(self.g)

    def fits(self, cost, budget) -> bool:
        return cost <= budget + self.tol


def _as_weights(gamma, d=None) -> AnisoWeights:
    if gamma is None:
        if d is None:
            raise ValueError("need gamma or d")
        return AnisoWeights.isotropic(d)
    if not isinstance(gamma, AnisoWeights):
        gamma = AnisoWeights(tuple(gamma))
    if d is not None and gamma.d != d:
        raise ValueError(f"gamma has {gamma.d} entries, expected d={d}")
    return gamma


def _check_dim(d):
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if d > MAX_DIM:
        raise DimensionTooLarge(f"d={d} exceeds the supported maximum of {MAX_DIM}")


def index_set_x(w, gamma, l_max=None) -> list:
    """All multi-indices of ``X(w)``, lexicographically sorted."""
    gamma = _as_weights(gamma)
    _check_dim(gamma.d)
    if w < 0:
        return []
    ar = _Arith(gamma.gamma)
    budget = ar.budget(w)
    out = []
    prefix = []

    def rec(n, used):
        if n == gamma.d:
            out.append(tuple(prefix))
            return
        k = 1
        while (l_max is None or k <= l_max) and ar.fits(used + (k - 1) * ar.g[n], budget):
            prefix.append(k)
            rec(n + 1, used + (k - 1) * ar.g[n])
            prefix.pop()
            k += 1

    rec(0, 0)
    return out


def build_index_set(w, gamma, l_max=None) -> list:
    """Multi-indices of the selection region ``Y(w)`` (candidates for c != 0)."""
    gamma = _as_weights(gamma)
    ar = _Arith(gamma.gamma)
    budget = ar.budget(w)
    lower = budget - sum(ar.g)
    out = []
    for i in index_set_x(w, gamma, l_max):
        cost = sum((a - 1) * g for a, g in zip(i, ar.g))
        if cost > lower + ar.tol:
            out.append(i)
    return out


def coefficient(i, w, gamma, l_max=None) -> int:
    """Combination coefficient of multi-index ``i``.

    Sums ``(-1)^|j|`` over the offsets ``j in {0,1}^d`` with ``i + j`` inside
    ``X(w)``; offsets are pruned as soon as the partial sum leaves the set,
    which skips only terms that contribute zero.
    """
    gamma = _as_weights(gamma, len(i))
    _check_dim(gamma.d)
    if any(a < 1 for a in i):
        raise ValueError(f"multi-index entries must be >= 1, got {i}")
    ar = _Arith(gamma.gamma)
    budget = ar.budget(w)
    d = len(i)

    def rec(n, used):
        if n == d:
            return 1
        total = 0
        for j in (0, 1):
            level = i[n] + j
            if l_max is not None and level > l_max:
                continue
            c = used + (level - 1) * ar.g[n]
            if not ar.fits(c, budget):
                continue
            sub = rec(n + 1, c)
            total += -sub if j else sub
        return total

    return rec(0, 0)


def estimate_node_count(k: int, d: int) -> float:
    """High-dimensional node-count estimate ``2**k d**k / k!`` (diagnostic)."""
    if k < 1 or d < 1:
        raise ValueError("k and d must be >= 1")
    return 2.0**k * float(d) ** k / math.factorial(k)


@dataclass(frozen=True, eq=False)
class Term:
    index: tuple
    coef: int
    node_ids: np.ndarray  # shape (m_1, ..., m_d) into SparseGrid.nodes


@dataclass(frozen=True, eq=False)
class SparseGrid:
    kind: str
    rule_kind: str
    w: int
    d: int
    gamma: AnisoWeights
    l_max: int | None
    terms: tuple
    nodes: np.ndarray
    weights: np.ndarray
    node_index: dict = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def lookup(self, z) -> int:
        return self.node_index[tuple(float(v) for v in z)]

    def nodes_csv(self) -> str:
        head = ",".join(f"z{n + 1}" for n in range(self.d)) + ",weight"
        rows = [",".join(repr(float(v)) for v in row) + f",{float(wt)!r}"
                for row, wt in zip(self.nodes, self.weights)]
        return "\n".join([head] + rows) + "\n"

    def terms_document(self) -> dict:
        return {
            "kind": self.kind,
            "rule": self.rule_kind,
            "w": self.w,
            "d": self.d,
            "gamma": list(self.gamma.gamma),
            "l_max": self.l_max,
            "n_nodes": self.n_nodes,
            "terms": [{"index": list(t.index), "coefficient": t.coef} for t in self.terms],
        }

    def terms_json(self) -> str:
        return json.dumps(self.terms_document(), indent=1)


def assemble(kind: str, rule_kind: str, w: int, d: int, gamma=None, l_max=None) -> SparseGrid:
    """Build a grid and its combined quadrature weights.

    ``kind="tensor"`` uses the single index ``(w+1, ..., w+1)``;
    ``kind="isotropic"`` forces equal weights.  Nodes are deduplicated by exact
    coordinate equality and returned in lexicographic order.
    """
    if kind not in GRID_KINDS:
        raise ValueError(f"unknown grid kind {kind!r}")
    _check_dim(d)
    if w < 0:
        raise ValueError(f"w must be >= 0, got {w}")
    rule_kind = quadrature.canonical_kind(rule_kind)
    if kind == ANISOTROPIC:
        gamma = _as_weights(gamma, d)
    else:
        gamma = AnisoWeights.isotropic(d)

    if kind == TENSOR:
        level = w + 1 if l_max is None else min(w + 1, l_max)
        raw_terms = [((level,) * d, 1)]
    else:
        raw_terms = []
        for i in build_index_set(w, gamma, l_max):
            c = coefficient(i, w, gamma, l_max)
            if c != 0:
                raw_terms.append((i, c))

    acc: dict = {}
    term_keys = []
    for i, c in raw_terms:
        rules = [quadrature.rule(rule_kind, a) for a in i]
        shape = tuple(r.order for r in rules)
        keys = list(itertools.product(*[r.nodes.tolist() for r in rules]))
        wts = np.ones(shape)
        for n, r in enumerate(rules):
            sh = [1] * d
            sh[n] = r.order
            wts = wts * r.weights.reshape(sh)
        for key, wt in zip(keys, wts.ravel().tolist()):
            acc.setdefault(key, []).append(c * wt)
        term_keys.append((i, c, shape, keys))

    ordered = sorted(acc)
    node_index = {key: n for n, key in enumerate(ordered)}
    nodes = np.array(ordered, dtype=float).reshape(len(ordered), d)
    weights = np.array([math.fsum(acc[k]) for k in ordered])
    terms = []
    for i, c, shape, keys in term_keys:
        ids = np.fromiter((node_index[k] for k in keys), dtype=np.int64, count=len(keys))
        ids = ids.reshape(shape)
        ids.setflags(write=False)
        terms.append(Term(tuple(i), c, ids))
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return SparseGrid(kind, rule_kind, int(w), d, gamma, l_max, tuple(terms), nodes, weights, node_index)


def w_for_l_max(l_max: int) -> int:
    """Grid index that lets the most important dimension reach ``l_max``.

    The cost of dimension ``n`` at level ``i_n`` is ``(i_n - 1) * gamma_n`` against
    a budget of ``w * min(gamma)``, so the driving dimension (``gamma_n`` equal to
    the minimum) reaches level ``w + 1``.
    """
    if l_max < 1:
        raise ValueError(f"l_max must be >= 1, got {l_max}")
    return l_max - 1


@dataclass(eq=False)
class Interpolant:
    grid: SparseGrid
    values: np.ndarray  # (n_nodes, q)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.grid.n_nodes:
            raise ValueError(f"{v.shape[0]} value rows for {self.grid.n_nodes} nodes")
        self.values = v


def _check_values(interp: Interpolant):
    if interp.values is None or not np.all(np.isfinite(interp.values)):
        raise ValuesMissing("interpolant has missing (non-finite) node values")


def interpolate(interp: Interpolant, z, block: int | None = None) -> np.ndarray:
    """Evaluate the combination-technique interpolant.

    ``z`` may be a single point of length ``d`` (returns shape ``(q,)``) or an
    ``(n, d)`` batch (returns ``(n, q)``).
    """
    _check_values(interp)
    grid = interp.grid
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    z = np.atleast_2d(z)
    if z.shape[1] != grid.d:
        raise ValueError(f"points have dimension {z.shape[1]}, grid has {grid.d}")
    if np.any(np.abs(z) > 1.0):
        raise ValueError("interpolation points must lie in [-1, 1]^d")
    if block is None:
        # keep the (block, n_nodes) weight matrix around 64 MB
        block = int(min(4096, max(64, 8_000_000 // max(grid.n_nodes, 1))))
    out = np.empty((len(z), interp.values.shape[1]))
    for start in range(0, len(z), block):
        out[start:start + block] = node_weights(grid, z[start:start + block]) @ interp.values
    return out[0] if single else out


def node_weights(grid: SparseGrid, z) -> np.ndarray:
    """Matrix ``(len(z), n_nodes)`` whose rows combine node values into interpolant values."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    n = len(z)
    out = np.zeros((n, grid.n_nodes))
    cache = {}
    for term in grid.terms:
        prod = np.ones((n, 1))
        for k, a in enumerate(term.index):
            if quadrature.order(grid.rule_kind, a) == 1:
                continue
            key = (k, a)
            if key not in cache:
                cache[key] = quadrature.lagrange_basis(quadrature.rule(grid.rule_kind, a), z[:, k])
            b = cache[key]
            prod = (prod[:, :, None] * b[:, None, :]).reshape(n, -1)
        # node ids of one tensor grid are distinct, so fancy-index accumulation is safe
        out[:, term.node_ids.ravel()] += term.coef * prod
    return out


def integrate_grid(interp: Interpolant) -> np.ndarray:
    """Quadrature sum over nodes; divide by ``2**d`` for the uniform mean."""
    _check_values(interp)
    return interp.grid.weights @ interp.values
