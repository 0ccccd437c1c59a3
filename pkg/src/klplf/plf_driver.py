"""End-to-end probabilistic load flow: KL input model, collocation grid or Monte
Carlo samples, one deterministic power flow per point, persisted results."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import pathlib
import shutil
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources

import jsonschema
import numpy as np

from . import kl, sparse_grid, uncertainty
from .acpf import PFOptions, build_ybus, solve_newton
from .case_io import PowerSystemCase, load_case
from .errors import ConfigError, IncompatibleRuns, PowerFlowError, TooManyDiverged
from .sparse_grid import AnisoWeights, SparseGrid

log = logging.getLogger(__name__)

GAMMA_POLICIES = ("recursive_doubling", "zeta_scaled", "eigenvalue_normalized", "explicit")
MODES = ("collocation", "monte_carlo")
BUILTIN_CASES = ("case9", "case118")


@dataclass(frozen=True)
class PLFConfig:
    case_ref: str
    uncertainty_ref: str
    rule_kind: str = "f2"
    grid_kind: str = "anisotropic"
    l_max: int = 5
    w: int | None = None  # overrides the index derived from l_max
    energy_fraction: float = kl.DEFAULT_ENERGY_FRACTION
    gamma_policy: str = "recursive_doubling"
    zeta: float = 2.0
    gamma: tuple | None = None
    pf_options: PFOptions = field(default_factory=PFOptions)
    mc_samples: int = 10_000
    seed: int = 0
    mode: str = "collocation"
    max_diverged_fraction: float = 0.01
    base_dir: str = "."  # where relative refs resolve; not a file key

    def __post_init__(self):
        if self.l_max < 1:
            raise ConfigError(f"l_max must be >= 1, got {self.l_max}")
        if self.w is not None and self.w < 0:
            raise ConfigError(f"w must be >= 0, got {self.w}")
        if not 0.0 < self.energy_fraction <= 1.0:
            raise ConfigError(f"energy_fraction must be in (0, 1], got {self.energy_fraction}")
        if self.zeta < 1.0:
            raise ConfigError(f"zeta must be >= 1, got {self.zeta}")
        if self.gamma_policy not in GAMMA_POLICIES:
            raise ConfigError(f"unknown gamma_policy {self.gamma_policy!r}")
        if self.grid_kind not in sparse_grid.GRID_KINDS:
            raise ConfigError(f"unknown grid_kind {self.grid_kind!r}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mc_samples < 1:
            raise ConfigError("mc_samples must be >= 1")
        if not 0.0 <= self.max_diverged_fraction <= 1.0:
            raise ConfigError("max_diverged_fraction must be in [0, 1]")
        if self.gamma_policy == "explicit" and not self.gamma:
            raise ConfigError("gamma_policy 'explicit' needs a gamma list")
        if self.gamma is not None:
            object.__setattr__(self, "gamma", tuple(float(g) for g in self.gamma))

    @property
    def grid_w(self) -> int:
        return self.w if self.w is not None else sparse_grid.w_for_l_max(self.l_max)


CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["case", "uncertainty"],
    "properties": {
        "case": {"type": "string"},
        "uncertainty": {"type": "string"},
        "rule": {"enum": ["cc", "f2", "clenshaw_curtis", "fejer2"]},
        "grid_kind": {"enum": list(sparse_grid.GRID_KINDS)},
        "l_max": {"type": "integer", "minimum": 1},
        "w": {"type": "integer", "minimum": 0},
        "energy_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "gamma_policy": {"enum": list(GAMMA_POLICIES)},
        "zeta": {"type": "number", "minimum": 1},
        "gamma": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "pf_options": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "enforce_q_limits": {"type": "boolean"},
                "start": {"enum": ["flat", "from_case"]},
                "max_q_outer": {"type": "integer", "minimum": 0},
            },
        },
        "mc_samples": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "mode": {"enum": list(MODES)},
        "max_diverged_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "out_dir": {"type": "string"},
        "workers": {"type": "integer", "minimum": 1},
    },
}


@dataclass(frozen=True)
class RunConfigFile:
    config: PLFConfig
    out_dir: str | None
    workers: int | None
    raw: bytes


def parse_config(raw: bytes | str, base_dir=".") -> RunConfigFile:
    """Validate a JSON run configuration; unknown keys are rejected."""
    if isinstance(raw, str):
        raw = raw.encode("utf-8")
    try:
        doc = json.loads(raw.decode("utf-8"))
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config {where}: {exc.message}") from exc
    renames = {"case": "case_ref", "uncertainty": "uncertainty_ref", "rule": "rule_kind"}
    kwargs = {}
    for key, val in doc.items():
        if key in ("out_dir", "workers"):
            continue
        if key == "pf_options":
            val = PFOptions(**val)
        kwargs[renames.get(key, key)] = val
    cfg = PLFConfig(base_dir=str(base_dir), **kwargs)
    return RunConfigFile(cfg, doc.get("out_dir"), doc.get("workers"), raw)


def load_config(path) -> RunConfigFile:
    path = pathlib.Path(path)
    return parse_config(path.read_bytes(), path.parent)


def config_to_json(cfg: PLFConfig, out_dir: str | None = None, workers: int | None = None) -> str:
    """Inverse of :func:`parse_config` (only non-default keys are written)."""
    default_pf = PFOptions()
    doc = {"case": cfg.case_ref, "uncertainty": cfg.uncertainty_ref, "rule": cfg.rule_kind,
           "grid_kind": cfg.grid_kind, "l_max": cfg.l_max, "energy_fraction": cfg.energy_fraction,
           "gamma_policy": cfg.gamma_policy, "zeta": cfg.zeta, "mc_samples": cfg.mc_samples,
           "seed": cfg.seed, "mode": cfg.mode, "max_diverged_fraction": cfg.max_diverged_fraction}
    if cfg.w is not None:
        doc["w"] = cfg.w
    if cfg.gamma is not None:
        doc["gamma"] = list(cfg.gamma)
    pf = {k: v for k, v in asdict(cfg.pf_options).items() if v != getattr(default_pf, k)}
    if pf:
        doc["pf_options"] = pf
    if out_dir is not None:
        doc["out_dir"] = out_dir
    if workers is not None:
        doc["workers"] = workers
    return json.dumps(doc, indent=1) + "\n"


def resolve_case(ref: str, base_dir=".") -> PowerSystemCase:
    """A case file path, or the name of a bundled case (``case9``, ``case118``)."""
    if ref in BUILTIN_CASES:
        with resources.as_file(resources.files("klplf") / "data" / f"{ref}.m") as p:
            return load_case(p)
    p = pathlib.Path(ref)
    if not p.is_absolute():
        p = pathlib.Path(base_dir) / p
    return load_case(p)


def resolve_uncertainty(ref: str, case: PowerSystemCase, base_dir=".") -> list:
    p = pathlib.Path(ref)
    if not p.is_absolute():
        p = pathlib.Path(base_dir) / p
    return uncertainty.parse_uncertainty_config(p.read_text(encoding="utf-8"), case, p.parent)


# --------------------------------------------------------------- xi space
@dataclass(frozen=True)
class XiBlock:
    name: str
    basis: kl.KLBasis
    offset: int

    @property
    def d(self) -> int:
        return self.basis.d


@dataclass(frozen=True, eq=False)
class GlobalXiSpace:
    groups: tuple  # of XiBlock
    gamma: AnisoWeights
    source_groups: tuple = ()  # SourceGroup per block, same order

    def __post_init__(self):
        off = 0
        for b in self.groups:
            if b.offset != off:
                raise ValueError(f"block {b.name} starts at {b.offset}, expected {off}")
            off += b.d
        if self.gamma.d != off:
            raise ValueError(f"gamma has {self.gamma.d} entries for d_total={off}")

    @property
    def d_total(self) -> int:
        last = self.groups[-1]
        return last.offset + last.d

    def physical(self, xi) -> list:
        """Per-group physical vectors for one point ``xi`` of length ``d_total``."""
        xi = np.asarray(xi, dtype=float)
        return [kl.evaluate(b.basis, xi[b.offset:b.offset + b.d]) for b in self.groups]

    def signature(self) -> dict:
        return {
            "d_total": self.d_total,
            "groups": [{"name": b.name, "m": b.basis.m, "d": b.d, "offset": b.offset} for b in self.groups],
            "gamma": list(self.gamma.gamma),
        }


def group_gamma(policy: str, basis: kl.KLBasis, zeta: float = 2.0) -> list:
    d = basis.d
    if policy == "recursive_doubling":
        return [2.0**n for n in range(d)]
    if policy == "zeta_scaled":
        return [float(zeta) ** n for n in range(d)]
    if policy == "eigenvalue_normalized":
        lam = basis.eigenvalues[:d]
        if lam[0] <= 0.0:
            return [1.0] * d
        if np.any(lam <= 0.0):
            raise ConfigError(f"group {basis.group_name}: zero eigenvalue among the kept modes")
        return [float(lam[0] / v) for v in lam]
    raise ConfigError(f"policy {policy!r} has no per-group rule")


def xi_space_from_groups(groups, energy_fraction: float, gamma_policy: str = "recursive_doubling",
                         zeta: float = 2.0, gamma=None) -> GlobalXiSpace:
    blocks, gam, off = [], [], 0
    for g in groups:
        basis = kl.truncate(kl.decompose(g.covariance, g.mean, g.name), energy_fraction)
        blocks.append(XiBlock(g.name, basis, off))
        off += basis.d
        if gamma_policy != "explicit":
            gam.extend(group_gamma(gamma_policy, basis, zeta))
    if gamma_policy == "explicit":
        if gamma is None or len(gamma) != off:
            raise ConfigError(f"explicit gamma needs {off} entries, got {0 if gamma is None else len(gamma)}")
        gam = list(gamma)
    return GlobalXiSpace(tuple(blocks), AnisoWeights(tuple(gam)), tuple(groups))


def build_xi_space(config: PLFConfig, case: PowerSystemCase | None = None) -> GlobalXiSpace:
    """Covariance, KL decomposition and truncation per group; concatenated gamma."""
    if case is None:
        case = resolve_case(config.case_ref, config.base_dir)
    specs = resolve_uncertainty(config.uncertainty_ref, case, config.base_dir)
    groups = [s.build(allow_degenerate=True) for s in specs]
    return xi_space_from_groups(groups, config.energy_fraction, config.gamma_policy,
                                config.zeta, config.gamma)


# ---------------------------------------------------------------- outputs
def output_layout(case: PowerSystemCase) -> tuple:
    """Column names and class labels of the per-point output vector."""
    names, classes = [], []
    for cls, q in (("V", "v_mag"), ("delta", "v_ang"), ("P_i", "p_inj"), ("Q_i", "q_inj")):
        for b in case.buses:
            names.append(f"{q}:{b.id}")
            classes.append(cls)
    for cls, q in (("P_ij", "p_flow"), ("Q_ij", "q_flow")):
        for k, br in enumerate(case.branches):
            names.append(f"{q}:{k}:{br.from_bus}-{br.to_bus}")
            classes.append(cls)
    return tuple(names), tuple(classes)


@dataclass(eq=False)
class PLFResult:
    mode: str
    case: PowerSystemCase
    xi_space: GlobalXiSpace
    points: np.ndarray  # (n, d_total) collocation nodes or MC samples
    outputs: np.ndarray  # (n, q)
    columns: tuple
    classes: tuple
    converged: np.ndarray
    iterations: np.ndarray
    max_mismatch: np.ndarray
    grid: SparseGrid | None = None
    clamp_log: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.outputs) != len(self.points):
            raise ValueError("outputs count differs from point count")
        if self.grid is not None and len(self.points) != self.grid.n_nodes:
            raise ValueError("outputs count differs from grid node count")

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def included(self) -> np.ndarray:
        return self.converged & np.all(np.isfinite(self.outputs), axis=1)

    @property
    def n_diverged(self) -> int:
        return int(np.sum(~self.included))


# Worker state lives in module globals so that process pools receive the
# case and the realizer once, through the initializer.
_CTX: dict = {}


def _init_worker(case, source_groups, options):
    _CTX["case"] = case
    _CTX["realizer"] = uncertainty.Realizer(case, source_groups)
    _CTX["ybus"] = build_ybus(case)
    _CTX["options"] = options


def _solve_point(values):
    events: list = []
    realized = _CTX["realizer"](values, events)
    try:
        sol = solve_newton(realized, _CTX["options"], ybus=_CTX["ybus"])
    except PowerFlowError as exc:
        log.debug("power flow failed: %s", exc)
        return None, False, 0, math.inf, events
    row = np.concatenate([sol.v_mag, sol.v_ang, sol.p_inj, sol.q_inj, sol.p_flow_from, sol.q_flow_from])
    return row, sol.converged, sol.iterations, sol.max_mismatch, events


def _run_points(case, xs: GlobalXiSpace, points, options, workers, timing):
    t0 = time.perf_counter()
    physical = [xs.physical(p) for p in points]
    timing["t_kl"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if workers and workers > 1 and len(points) > 1:
        chunk = max(1, len(points) // (workers * 8))
        with ProcessPoolExecutor(workers, initializer=_init_worker,
                                 initargs=(case, xs.source_groups, options)) as pool:
            res = list(pool.map(_solve_point, physical, chunksize=chunk))
    else:
        _init_worker(case, xs.source_groups, options)
        res = [_solve_point(v) for v in physical]
    timing["t_pf"] = time.perf_counter() - t0

    names, classes = output_layout(case)
    out = np.full((len(points), len(names)), np.nan)
    conv = np.zeros(len(points), dtype=bool)
    iters = np.zeros(len(points), dtype=np.int64)
    mism = np.full(len(points), np.inf)
    clamps = []
    for k, (row, ok, it, mm, ev) in enumerate(res):
        if row is not None:
            out[k] = row
        conv[k], iters[k], mism[k] = ok, it, mm
        clamps.extend((k, e) for e in ev)
    return out, names, classes, conv, iters, mism, clamps


def _check_divergence(conv, outputs, limit):
    bad = ~(conv & np.all(np.isfinite(outputs), axis=1))
    frac = bad.mean() if len(bad) else 0.0
    if frac > limit:
        raise TooManyDiverged(f"{bad.sum()} of {len(bad)} points diverged ({frac:.2%} > {limit:.2%})")
    if bad.any():
        log.warning("%d of %d points diverged; they are excluded from statistics", bad.sum(), len(bad))


def _prepare(config: PLFConfig, xi_space):
    t_start = time.perf_counter()
    case = resolve_case(config.case_ref, config.base_dir)
    if xi_space is None:
        xi_space = build_xi_space(config, case)
    return case, xi_space, time.perf_counter() - t_start, t_start


def run_collocation(config: PLFConfig, workers: int = 1, xi_space: GlobalXiSpace | None = None) -> PLFResult:
    """Solve the power flow at every node of the configured sparse grid."""
    case, xs, t_eig, t_start = _prepare(config, xi_space)
    timing = {"t_eigenpairs": t_eig}
    t0 = time.perf_counter()
    grid = sparse_grid.assemble(config.grid_kind, config.rule_kind, config.grid_w, xs.d_total,
                                xs.gamma if config.grid_kind == sparse_grid.ANISOTROPIC else None,
                                config.l_max)
    timing["t_grid"] = time.perf_counter() - t0
    out, names, classes, conv, iters, mism, clamps = _run_points(
        case, xs, grid.nodes, config.pf_options, workers, timing)
    _check_divergence(conv, out, config.max_diverged_fraction)
    timing["t_total"] = time.perf_counter() - t_start
    return PLFResult("collocation", case, xs, np.asarray(grid.nodes), out, names, classes,
                     conv, iters, mism, grid, clamps, timing)


def mc_points(n: int, d: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(-1.0, 1.0, size=(n, d))


def run_monte_carlo(config: PLFConfig, workers: int = 1, xi_space: GlobalXiSpace | None = None) -> PLFResult:
    """Equal-weight i.i.d. uniform samples of the same xi space."""
    case, xs, t_eig, t_start = _prepare(config, xi_space)
    timing = {"t_eigenpairs": t_eig}
    t0 = time.perf_counter()
    pts = mc_points(config.mc_samples, xs.d_total, config.seed)
    timing["t_grid"] = time.perf_counter() - t0
    out, names, classes, conv, iters, mism, clamps = _run_points(
        case, xs, pts, config.pf_options, workers, timing)
    _check_divergence(conv, out, config.max_diverged_fraction)
    timing["t_total"] = time.perf_counter() - t_start
    return PLFResult("monte_carlo", case, xs, pts, out, names, classes,
                     conv, iters, mism, None, clamps, timing)


def run(config: PLFConfig, workers: int = 1, xi_space: GlobalXiSpace | None = None) -> PLFResult:
    fn = run_collocation if config.mode == "collocation" else run_monte_carlo
    return fn(config, workers, xi_space)


# ----------------------------------------------------------- persistence
TABLE_MAGIC = b"KLPLFTAB"
TABLE_VERSION = 1
_HEAD = struct.Struct("<8sIQQI")


def write_table(path, data: np.ndarray, columns) -> None:
    """Binary float64 table.

    Layout (little endian): 8-byte magic ``KLPLFTAB``, uint32 version, uint64
    rows, uint64 columns, uint32 byte length of a UTF-8 JSON list of column
    names, the names, then the row-major float64 values.
    """
    data = np.ascontiguousarray(data, dtype="<f8")
    names = json.dumps(list(columns)).encode("utf-8")
    if data.ndim != 2 or data.shape[1] != len(columns):
        raise ValueError(f"table shape {data.shape} does not match {len(columns)} columns")
    with open(path, "wb") as fh:
        fh.write(_HEAD.pack(TABLE_MAGIC, TABLE_VERSION, data.shape[0], data.shape[1], len(names)))
        fh.write(names)
        fh.write(data.tobytes())


def read_table(path) -> tuple:
    raw = pathlib.Path(path).read_bytes()
    magic, version, rows, cols, nlen = _HEAD.unpack_from(raw)
    if magic != TABLE_MAGIC or version != TABLE_VERSION:
        raise ValueError(f"{path}: not a version-{TABLE_VERSION} output table")
    at = _HEAD.size
    names = json.loads(raw[at:at + nlen].decode("utf-8"))
    at += nlen
    data = np.frombuffer(raw, dtype="<f8", count=rows * cols, offset=at).reshape(rows, cols)
    return data.astype(float), tuple(names)


def _kl_file(name: str) -> str:
    safe = "".join(c if c.isalnum() or c in "-_" else "_" for c in name)
    return f"kl_{safe}.json"


def save_result(result: PLFResult, run_dir, config_raw: bytes | None = None) -> pathlib.Path:
    """Write a run directory atomically (built under ``<dir>.partial`` then renamed)."""
    run_dir = pathlib.Path(run_dir)
    tmp = run_dir.with_name(run_dir.name + ".partial")
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir(parents=True)
    try:
        if config_raw is not None:
            (tmp / "config.json").write_bytes(config_raw)
        write_table(tmp / "outputs.bin", result.outputs, result.columns)
        write_table(tmp / "points.bin", result.points, [f"xi{n + 1}" for n in range(result.points.shape[1])])
        if result.grid is not None:
            (tmp / "grid.csv").write_text(result.grid.nodes_csv())
            (tmp / "grid_terms.json").write_text(result.grid.terms_json())
        with open(tmp / "convergence.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["point", "converged", "iterations", "max_mismatch"])
            for k in range(result.n_points):
                w.writerow([k, int(result.converged[k]), int(result.iterations[k]),
                            repr(float(result.max_mismatch[k]))])
        with open(tmp / "clamp_log.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["point", "group", "source", "value", "clamped"])
            for k, e in result.clamp_log:
                w.writerow([k, e.group, e.source, repr(e.value), repr(e.clamped)])
        (tmp / "timing.json").write_text(json.dumps(result.timing, indent=1) + "\n")
        for b in result.xi_space.groups:
            (tmp / _kl_file(b.name)).write_text(b.basis.to_json() + "\n")
        meta = {
            "mode": result.mode,
            "case_checksum": result.case.checksum(),
            "xi_space": result.xi_space.signature(),
            "n_points": result.n_points,
            "n_diverged": result.n_diverged,
            "classes": list(result.classes),
            "grid": None if result.grid is None else {
                k: v for k, v in result.grid.terms_document().items() if k != "terms"},
        }
        (tmp / "meta.json").write_text(json.dumps(meta, indent=1) + "\n")
        if run_dir.exists():
            shutil.rmtree(run_dir)
        tmp.rename(run_dir)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return run_dir


def load_result(run_dir) -> PLFResult:
    """Rebuild a :class:`PLFResult` from a run directory."""
    run_dir = pathlib.Path(run_dir)
    if not (run_dir / "meta.json").exists():
        raise IncompatibleRuns(f"{run_dir} is not a complete run directory")
    meta = json.loads((run_dir / "meta.json").read_text())
    outputs, columns = read_table(run_dir / "outputs.bin")
    points, _ = read_table(run_dir / "points.bin")
    conv, iters, mism = [], [], []
    with open(run_dir / "convergence.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            conv.append(row["converged"] == "1")
            iters.append(int(row["iterations"]))
            mism.append(float(row["max_mismatch"]))
    sig = meta["xi_space"]
    blocks = []
    for g in sig["groups"]:
        basis = kl.KLBasis.from_json((run_dir / _kl_file(g["name"])).read_text())
        blocks.append(XiBlock(g["name"], basis, g["offset"]))
    xs = GlobalXiSpace(tuple(blocks), AnisoWeights(tuple(sig["gamma"])))
    grid = None
    if meta["grid"] is not None:
        gd = meta["grid"]
        grid = sparse_grid.assemble(gd["kind"], gd["rule"], gd["w"], gd["d"], gd["gamma"], gd["l_max"])
        if grid.n_nodes != meta["n_points"]:
            raise IncompatibleRuns(f"{run_dir}: rebuilt grid has {grid.n_nodes} nodes, run has {meta['n_points']}")
    case = _CaseStub(meta["case_checksum"])
    timing = json.loads((run_dir / "timing.json").read_text())
    return PLFResult(meta["mode"], case, xs, points, outputs, columns, tuple(meta["classes"]),
                     np.array(conv, dtype=bool), np.array(iters), np.array(mism), grid, [], timing)


@dataclass(frozen=True)
class _CaseStub:
    """Stands in for the case of a loaded run; only its checksum is kept."""

    digest: str

    def checksum(self) -> str:
        return self.digest


def default_workers() -> int:
    env = os.environ.get("PLF_WORKERS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"PLF_WORKERS must be an integer, got {env!r}") from exc
        if n < 1:
            raise ConfigError("PLF_WORKERS must be >= 1")
        return n
    return os.cpu_count() or 1


def timing_table(result: PLFResult) -> str:
    buf = io.StringIO()
    buf.write(f"N_samples     {result.n_points}\n")
    for key in ("t_eigenpairs", "t_grid", "t_kl", "t_pf", "t_total"):
        buf.write(f"{key:<13} {result.timing.get(key, float('nan')):.4f} s\n")
    return buf.getvalue()
