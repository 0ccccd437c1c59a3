"""Random input sources, their grouped covariances, and realizations.

A *source* perturbs one injection of the case (a bus demand or a generator
set point).  Sources are collected into *groups*; each group carries a mean
vector and a covariance matrix and later gets its own KL basis.
"""
from __future__ import annotations

import csv
import json
import logging
import pathlib
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import jsonschema
import numpy as np
from scipy import stats

from .case_io import PowerSystemCase
from .errors import (
    ColumnMissing,
    ConfigError,
    DegenerateGroup,
    LengthMismatch,
    TargetResolutionFailed,
    UncertaintyError,
)

log = logging.getLogger(__name__)

NORMAL_LOAD = "normal_load"
BINOMIAL_GENERATION = "binomial_generation"
EMPIRICAL_SERIES = "empirical_series"
SOURCE_KINDS = (NORMAL_LOAD, BINOMIAL_GENERATION, EMPIRICAL_SERIES)
QUANTITIES = ("p_demand", "q_demand", "p_gen")

DEFAULT_SAMPLES = 10_000


@dataclass(frozen=True)
class Target:
    bus: int
    quantity: str
    unit: int = 0  # which in-service generator at the bus, for p_gen

    def __post_init__(self):
        if self.quantity not in QUANTITIES:
            raise ValueError(f"unknown target quantity {self.quantity!r}")


@dataclass(frozen=True)
class RandomSource:
    """One random injection.

    ``base`` is the deterministic value (p.u.) the distribution is centred on;
    it is unused for ``empirical_series`` sources, whose data come from a
    column of a time-series table.
    """

    id: str
    kind: str
    target: Target
    base: float = 0.0
    sigma_fraction: float = 0.0
    n_units: int = 1
    outage_rate: float = 0.0
    column: str | None = None

    def __post_init__(self):
        if self.kind not in SOURCE_KINDS:
            raise ValueError(f"source {self.id}: unknown kind {self.kind!r}")
        if self.sigma_fraction < 0:
            raise ValueError(f"source {self.id}: sigma_fraction must be >= 0")
        if not 0.0 <= self.outage_rate <= 1.0:
            raise ValueError(f"source {self.id}: outage_rate must be in [0, 1]")
        if self.n_units < 1:
            raise ValueError(f"source {self.id}: n_units must be >= 1")
        if self.kind == EMPIRICAL_SERIES and not self.column:
            raise ValueError(f"source {self.id}: empirical_series needs a column")
        if self.kind == BINOMIAL_GENERATION and self.target.quantity != "p_gen":
            raise ValueError(f"source {self.id}: binomial generation must target p_gen")

    @property
    def unit_cap(self) -> float:
        # mean-preserving: n_units * unit_cap * (1 - rate) == base
        avail = 1.0 - self.outage_rate
        return self.base / (self.n_units * avail) if avail > 0 else self.base / self.n_units

    def bounds(self) -> tuple:
        if self.kind == BINOMIAL_GENERATION:
            return 0.0, self.n_units * self.unit_cap
        if self.target.quantity == "q_demand":
            return -np.inf, np.inf  # reactive demand may legitimately change sign
        return 0.0, np.inf


@dataclass(frozen=True, eq=False)
class SourceGroup:
    name: str
    sources: tuple
    mean: np.ndarray
    covariance: np.ndarray
    seed: int | None = None
    n_samples: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.covariance, dtype=float).reshape(len(mean), len(mean))
        m = len(self.sources)
        if len(mean) != m:
            raise ValueError(f"group {self.name}: {len(mean)} means for {m} sources")
        if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(cov), initial=0.0)):
            raise UncertaintyError(f"group {self.name}: covariance is not symmetric")
        tr = float(np.trace(cov))
        if m and np.linalg.eigvalsh(cov)[0] < -1e-10 * max(tr, 0.0):
            raise UncertaintyError(f"group {self.name}: covariance is not positive semidefinite")
        for a in (mean, cov):
            a.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def m(self) -> int:
        return len(self.sources)

    def __eq__(self, other):
        if not isinstance(other, SourceGroup):
            return NotImplemented
        return (self.name == other.name and self.sources == other.sources
                and self.seed == other.seed and self.n_samples == other.n_samples
                and np.array_equal(self.mean, other.mean)
                and np.array_equal(self.covariance, other.covariance))


def _sym_sqrt(corr: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(corr)
    if vals[0] < -1e-10 * max(vals[-1], 1.0):
        raise UncertaintyError("correlation matrix is not positive semidefinite")
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def _sample_statistics(name, sources, x, seed, n, allow_degenerate):
    mean = x.mean(axis=0)
    cov = np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
    cov = 0.5 * (cov + cov.T)
    if not allow_degenerate and np.all(np.diag(cov) <= 0.0):
        raise DegenerateGroup(f"group {name}: every source has zero variance")
    return SourceGroup(name, tuple(sources), mean, cov, seed=seed, n_samples=n)


def sample_sources(sources: Sequence[RandomSource], n_samples: int, seed: int,
                   correlation=None) -> np.ndarray:
    """Joint draws ``(n_samples, m)`` of distribution-defined sources.

    Dependence enters through a Gaussian copula: standard normals are mixed by
    the symmetric square root of ``correlation`` and then mapped through each
    source's marginal.
    """
    m = len(sources)
    for s in sources:
        if s.kind == EMPIRICAL_SERIES:
            raise UncertaintyError(f"source {s.id} is series-defined, not distribution-defined")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_samples, m))
    if correlation is not None:
        r = np.asarray(correlation, dtype=float)
        if r.shape != (m, m):
            raise LengthMismatch(f"correlation is {r.shape}, group has {m} sources")
        if not np.allclose(np.diag(r), 1.0, atol=1e-12, rtol=0):
            raise UncertaintyError("correlation matrix must have a unit diagonal")
        z = z @ _sym_sqrt(0.5 * (r + r.T))
    x = np.empty_like(z)
    for k, s in enumerate(sources):
        if s.kind == NORMAL_LOAD:
            x[:, k] = s.base + s.sigma_fraction * abs(s.base) * z[:, k]
        else:
            up = stats.binom.ppf(stats.norm.cdf(z[:, k]), s.n_units, 1.0 - s.outage_rate)
            x[:, k] = s.unit_cap * up
    return x


def build_group_from_distributions(sources: Sequence[RandomSource], n_samples: int = DEFAULT_SAMPLES,
                                   seed: int = 0, *, name: str = "group", correlation=None,
                                   allow_degenerate: bool = False) -> SourceGroup:
    """Sample mean and covariance of ``n_samples`` joint draws."""
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2 to estimate a covariance")
    x = sample_sources(sources, n_samples, seed, correlation)
    return _sample_statistics(name, sources, x, seed, n_samples, allow_degenerate)


def read_series_csv(path, base_mva: float) -> dict:
    """Columns of a MW-valued time-series CSV, converted to p.u."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise LengthMismatch(f"{path}: empty table")
    head = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    for k, r in enumerate(body, start=2):
        if len(r) != len(head) or any(not c.strip() for c in r):
            raise LengthMismatch(f"{path}: row {k} has missing cells")
    data = np.array(body, dtype=float).reshape(len(body), len(head)) / base_mva
    return {h: data[:, k].copy() for k, h in enumerate(head)}


def build_group_from_series(dataset: Mapping[str, Sequence[float]], sources: Sequence[RandomSource],
                            *, name: str = "group", allow_degenerate: bool = False) -> SourceGroup:
    """Column means and sample covariance over time rows."""
    cols = []
    for s in sources:
        if s.kind != EMPIRICAL_SERIES:
            raise UncertaintyError(f"source {s.id} is not an empirical_series source")
        if s.column not in dataset:
            raise ColumnMissing(f"source {s.id}: column {s.column!r} not in dataset")
        cols.append(np.asarray(dataset[s.column], dtype=float))
    lengths = {len(c) for c in cols}
    if len(lengths) != 1:
        raise LengthMismatch(f"group {name}: columns have lengths {sorted(lengths)}")
    if lengths.pop() < 2:
        raise LengthMismatch(f"group {name}: need at least 2 rows")
    x = np.column_stack(cols)
    return _sample_statistics(name, sources, x, None, len(x), allow_degenerate)


# ------------------------------------------------------------- realization
@dataclass(frozen=True)
class ClampEvent:
    group: str
    source: str
    value: float
    clamped: float


class Realizer:
    """Pre-resolved targets for applying many realizations to one case."""

    def __init__(self, case: PowerSystemCase, groups: Sequence[SourceGroup]):
        self.case = case
        self.groups = tuple(groups)
        gen_at: dict = {}
        for g_idx, g in enumerate(case.generators):
            if g.in_service:
                gen_at.setdefault(g.bus, []).append(g_idx)
        q_sources = set()
        for grp in self.groups:
            for s in grp.sources:
                if s.target.quantity == "q_demand":
                    q_sources.add(s.target.bus)
        self._slots = []
        for grp in self.groups:
            slots = []
            for s in grp.sources:
                t = s.target
                if not case.has_bus(t.bus):
                    raise TargetResolutionFailed(f"source {s.id}: bus {t.bus} not in case")
                if t.quantity == "p_gen":
                    units = gen_at.get(t.bus, [])
                    if t.unit >= len(units):
                        raise TargetResolutionFailed(
                            f"source {s.id}: no in-service generator #{t.unit} at bus {t.bus}")
                    slots.append(("gen", units[t.unit], False))
                else:
                    pos = case.bus_position(t.bus)
                    follow_q = t.quantity == "p_demand" and t.bus not in q_sources
                    slots.append((t.quantity, pos, follow_q))
            self._slots.append(slots)

    def __call__(self, values: Sequence, clamp_log: list | None = None) -> PowerSystemCase:
        if len(values) != len(self.groups):
            raise LengthMismatch(f"{len(values)} value vectors for {len(self.groups)} groups")
        buses = list(self.case.buses)
        gens = list(self.case.generators)
        bus_changes: dict = {}
        for grp, slots, vec in zip(self.groups, self._slots, values):
            vec = np.asarray(vec, dtype=float).reshape(-1)
            if len(vec) != grp.m:
                raise LengthMismatch(f"group {grp.name}: {len(vec)} values for {grp.m} sources")
            for s, (what, pos, follow_q), v in zip(grp.sources, slots, vec.tolist()):
                lo, hi = s.bounds()
                c = min(max(v, lo), hi)
                if c != v:
                    if clamp_log is not None:
                        clamp_log.append(ClampEvent(grp.name, s.id, v, c))
                    log.debug("clamped %s/%s from %r to %r", grp.name, s.id, v, c)
                if what == "gen":
                    gens[pos] = replace(gens[pos], p_set=c)
                else:
                    ch = bus_changes.setdefault(pos, {})
                    ch[what] = c
                    if follow_q:
                        ch["_follow"] = True
        for pos, ch in bus_changes.items():
            b = buses[pos]
            new = {k: v for k, v in ch.items() if not k.startswith("_")}
            if ch.get("_follow") and "p_demand" in new and b.p_demand != 0.0:
                new["q_demand"] = b.q_demand * (new["p_demand"] / b.p_demand)
            buses[pos] = replace(b, **new)
        return self.case.replace(buses=buses, generators=gens)


def apply_realization(case: PowerSystemCase, groups: Sequence[SourceGroup], values: Sequence,
                      clamp_log: list | None = None) -> PowerSystemCase:
    """Copy of ``case`` with every source target overwritten by ``values``.

    Active loads are clamped at zero and binomial plants to ``[0, n_units*unit_cap]``;
    clamps are appended to ``clamp_log`` when given.  A load source on
    ``p_demand`` rescales that bus's ``q_demand`` by the same ratio unless some
    source targets ``q_demand`` at the bus.
    """
    return Realizer(case, groups)(values, clamp_log)


# --------------------------------------------------------------- configs
@dataclass(frozen=True, eq=False)
class GroupSpec:
    """Everything needed to build one group."""

    name: str
    sources: tuple
    n_samples: int = DEFAULT_SAMPLES
    seed: int = 0
    correlation: np.ndarray | None = None
    series: Mapping | None = field(default=None, repr=False)

    def build(self, allow_degenerate: bool = False) -> SourceGroup:
        if self.series is not None:
            return build_group_from_series(self.series, self.sources, name=self.name,
                                           allow_degenerate=allow_degenerate)
        return build_group_from_distributions(self.sources, self.n_samples, self.seed, name=self.name,
                                              correlation=self.correlation,
                                              allow_degenerate=allow_degenerate)


def base_value(case: PowerSystemCase, target: Target) -> float:
    if not case.has_bus(target.bus):
        raise TargetResolutionFailed(f"bus {target.bus} not in case")
    if target.quantity == "p_gen":
        units = [g for g in case.generators if g.in_service and g.bus == target.bus]
        if target.unit >= len(units):
            raise TargetResolutionFailed(f"no in-service generator #{target.unit} at bus {target.bus}")
        return units[target.unit].p_set
    return getattr(case.buses[case.bus_position(target.bus)], target.quantity)


# 118-bus load regions: (first bus, last bus, sigma as a fraction of the load)
IEEE118_LOAD_REGIONS = ((1, 33, 0.07), (34, 59, 0.04), (60, 79, 0.09), (80, 118, 0.05))
IEEE118_UNITS = 4
IEEE118_OUTAGE_RATE = 0.09


def preset_ieee118(case: PowerSystemCase, n_samples: int = DEFAULT_SAMPLES, seed: int = 0) -> list:
    """Generation and load groups for the IEEE 118-bus study.

    Generation: every in-service non-slack unit with positive output is a
    4-unit plant with forced outage rate 0.09, plants independent.
    Load: active and reactive demand of every load bus are normal with the
    regional sigma; all loads of one region move together (unit correlation),
    regions are independent.
    """
    slack = case.buses[case.slack_position].id
    gens = []
    seen: dict = {}
    for g in case.generators:
        if not g.in_service:
            continue
        unit = seen.get(g.bus, 0)
        seen[g.bus] = unit + 1
        if g.bus == slack or g.p_set <= 0:
            continue
        gens.append(RandomSource(f"gen{g.bus}" + (f".{unit}" if unit else ""), BINOMIAL_GENERATION,
                                 Target(g.bus, "p_gen", unit), base=g.p_set,
                                 n_units=IEEE118_UNITS, outage_rate=IEEE118_OUTAGE_RATE))
    loads, region = [], []
    for b in case.buses:
        if b.p_demand == 0.0:
            continue
        for r, (lo, hi, sig) in enumerate(IEEE118_LOAD_REGIONS):
            if lo <= b.id <= hi:
                break
        else:
            raise ConfigError(f"bus {b.id} falls outside the preset's load regions")
        loads.append(RandomSource(f"load{b.id}", NORMAL_LOAD, Target(b.id, "p_demand"),
                                  base=b.p_demand, sigma_fraction=sig))
        region.append(r)
        if b.q_demand != 0.0:
            loads.append(RandomSource(f"qload{b.id}", NORMAL_LOAD, Target(b.id, "q_demand"),
                                      base=b.q_demand, sigma_fraction=sig))
            region.append(r)
    region = np.array(region)
    corr = (region[:, None] == region[None, :]).astype(float)
    return [
        GroupSpec("generation", tuple(gens), n_samples, seed),
        GroupSpec("load", tuple(loads), n_samples, seed + 1, correlation=corr),
    ]


PRESETS = {"ieee118-morales": preset_ieee118}

_SOURCE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["id", "kind", "bus", "quantity"],
    "properties": {
        "id": {"type": "string"},
        "kind": {"enum": list(SOURCE_KINDS)},
        "bus": {"type": "integer"},
        "quantity": {"enum": list(QUANTITIES)},
        "unit": {"type": "integer", "minimum": 0},
        "base": {"type": "number"},
        "sigma_fraction": {"type": "number", "minimum": 0},
        "n_units": {"type": "integer", "minimum": 1},
        "outage_rate": {"type": "number", "minimum": 0, "maximum": 1},
        "column": {"type": "string"},
    },
}

UNCERTAINTY_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "preset": {"enum": sorted(PRESETS)},
        "n_samples": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer", "minimum": 0},
        "groups": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name", "sources"],
                "properties": {
                    "name": {"type": "string"},
                    "series_file": {"type": "string"},
                    "n_samples": {"type": "integer", "minimum": 2},
                    "seed": {"type": "integer", "minimum": 0},
                    "correlation": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
                    "sources": {"type": "array", "minItems": 1, "items": _SOURCE_SCHEMA},
                },
            },
        },
    },
    "oneOf": [{"required": ["preset"]}, {"required": ["groups"]}],
}


def parse_uncertainty_config(text: str, case: PowerSystemCase, base_dir=".") -> list:
    """Group specs from an uncertainty document.

    Either ``{"preset": name, ...}`` or ``{"groups": [...]}``.  Source bases
    default to the case's value at the target; series files are resolved
    relative to ``base_dir``.
    """
    try:
        doc = json.loads(text)
        jsonschema.validate(doc, UNCERTAINTY_SCHEMA)
    except (json.JSONDecodeError, jsonschema.ValidationError) as exc:
        raise ConfigError(f"uncertainty config: {getattr(exc, 'message', exc)}") from exc
    n_default = doc.get("n_samples", DEFAULT_SAMPLES)
    seed_default = doc.get("seed", 0)
    if "preset" in doc:
        return PRESETS[doc["preset"]](case, n_default, seed_default)

    specs = []
    for g_no, g in enumerate(doc["groups"]):
        sources = []
        for s in g["sources"]:
            t = Target(s["bus"], s["quantity"], s.get("unit", 0))
            base = s["base"] if "base" in s else base_value(case, t)
            sources.append(RandomSource(
                s["id"], s["kind"], t, base=base,
                sigma_fraction=s.get("sigma_fraction", 0.0), n_units=s.get("n_units", 1),
                outage_rate=s.get("outage_rate", 0.0), column=s.get("column")))
        series = None
        if "series_file" in g:
            series = read_series_csv(pathlib.Path(base_dir) / g["series_file"], case.base_mva)
        corr = np.array(g["correlation"], dtype=float) if "correlation" in g else None
        specs.append(GroupSpec(g["name"], tuple(sources), g.get("n_samples", n_default),
                               g.get("seed", seed_default + g_no), corr, series))
    return specs
