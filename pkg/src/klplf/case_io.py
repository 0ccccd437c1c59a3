"""Power system case model (per-unit, radians) and its two text formats.

MATPOWER format
    ``mpc.baseMVA``, ``mpc.bus``, ``mpc.gen`` and ``mpc.branch`` are read; every
    other field (``gencost``, ``areas``, ...) is ignored.  Powers are converted
    from MW/MVAr to per-unit on ``baseMVA`` and angles from degrees to radians.

Structured format
    A JSON document with top-level keys ``base_mva``, ``buses``, ``branches`` and
    ``generators``.  Powers are per-unit and angles are degrees in the file.
    ``write_structured_case`` followed by ``parse_structured_case`` reproduces a
    parsed case exactly.
"""
from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field, replace

import jsonschema

from .errors import MalformedRow, MissingSection, SchemaViolation, ValidationFailed, ZeroImpedanceBranch

SLACK, PV, PQ = "slack", "pv", "pq"
BUS_TYPES = (SLACK, PV, PQ)
_MATPOWER_TYPES = {1: PQ, 2: PV, 3: SLACK}

_DEG = math.pi / 180.0


def deg2rad(x: float) -> float:
    return x * _DEG


def rad2deg_exact(x: float) -> float:
    """Degrees ``d`` with ``deg2rad(d) == x`` when such a float exists.

    Angles that were parsed from degrees always have one; for anything else the
    closest approximation is returned.
    """
    if x == 0.0:
        return x
    d = x / _DEG
    if deg2rad(d) == x:
        return d
    up = down = d
    for _ in range(256):
        up = math.nextafter(up, math.inf)
        if deg2rad(up) == x:
            return up
        down = math.nextafter(down, -math.inf)
        if deg2rad(down) == x:
            return down
    return d


@dataclass(frozen=True)
class Bus:
    id: int
    bus_type: str
    p_demand: float
    q_demand: float
    g_shunt: float = 0.0
    b_shunt: float = 0.0
    v_mag_init: float = 1.0
    v_ang_init: float = 0.0


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_charging: float = 0.0
    tap_ratio: float = 0.0  # 0 means nominal (1.0) during Y-bus assembly
    phase_shift: float = 0.0
    in_service: bool = True


@dataclass(frozen=True)
class Generator:
    bus: int
    p_set: float
    q_set: float = 0.0
    v_set: float = 1.0
    q_min: float = -math.inf
    q_max: float = math.inf
    in_service: bool = True


@dataclass(frozen=True)
class PowerSystemCase:
    base_mva: float
    buses: tuple
    branches: tuple
    generators: tuple
    _bus_pos: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "_bus_pos", {b.id: k for k, b in enumerate(self.buses)})
        validate_case(self)

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_branch(self) -> int:
        return len(self.branches)

    def bus_position(self, bus_id: int) -> int:
        return self._bus_pos[bus_id]

    def has_bus(self, bus_id: int) -> bool:
        return bus_id in self._bus_pos

    @property
    def slack_position(self) -> int:
        return next(k for k, b in enumerate(self.buses) if b.bus_type == SLACK)

    def replace(self, **changes) -> "PowerSystemCase":
        return replace(self, **changes)

    def checksum(self) -> str:
        return hashlib.sha256(write_structured_case(self).encode()).hexdigest()


def validate_case(case: PowerSystemCase) -> None:
    if not (case.base_mva > 0):
        raise ValidationFailed(f"base_mva: must be > 0, got {case.base_mva}")
    if not case.buses:
        raise ValidationFailed("buses: empty bus list")
    seen = set()
    for k, b in enumerate(case.buses):
        if b.id in seen:
            raise ValidationFailed(f"buses[{k}].id: duplicate bus id {b.id}")
        seen.add(b.id)
        if b.bus_type not in BUS_TYPES:
            raise ValidationFailed(f"buses[{k}].bus_type: unsupported type {b.bus_type!r}")
        if not (b.v_mag_init > 0):
            raise ValidationFailed(f"buses[{k}].v_mag_init: must be > 0, got {b.v_mag_init}")
    n_slack = sum(b.bus_type == SLACK for b in case.buses)
    if n_slack != 1:
        raise ValidationFailed(f"buses: expected exactly one slack bus, found {n_slack}")
    for k, br in enumerate(case.branches):
        for end in ("from_bus", "to_bus"):
            if getattr(br, end) not in seen:
                raise ValidationFailed(f"branches[{k}].{end}: unknown bus {getattr(br, end)}")
        if br.in_service and br.r * br.r + br.x * br.x <= 0.0:
            raise ZeroImpedanceBranch(f"branches[{k}]: in-service branch with r = x = 0")
    vset = {}
    for k, g in enumerate(case.generators):
        if g.bus not in seen:
            raise ValidationFailed(f"generators[{k}].bus: unknown bus {g.bus}")
        if g.q_min > g.q_max:
            raise ValidationFailed(f"generators[{k}].q_min: q_min {g.q_min} > q_max {g.q_max}")
        if g.in_service:
            if g.bus in vset and abs(vset[g.bus] - g.v_set) > 1e-6:
                raise ValidationFailed(
                    f"generators[{k}].v_set: {g.v_set} conflicts with {vset[g.bus]} at bus {g.bus}")
            vset.setdefault(g.bus, g.v_set)


# ---------------------------------------------------------------- MATPOWER

_MIN_COLS = {"bus": 13, "gen": 10, "branch": 11}


def _strip_comments(text: str) -> str:
    return "\n".join(line.split("%", 1)[0] for line in text.splitlines())


def _matrix(text: str, name: str) -> list:
    m = re.search(r"mpc\s*\.\s*" + name + r"\s*=\s*\[(.*?)\]", text, re.DOTALL)
    if m is None:
        raise MissingSection(f"mpc.{name} matrix not found")
    rows = []
    for raw in re.split(r"[;\n]", m.group(1)):
        raw = raw.strip().strip(",")
        if not raw:
            continue
        try:
            rows.append([float(tok) for tok in re.split(r"[\s,]+", raw)])
        except ValueError:
            raise MalformedRow(f"mpc.{name}: non-numeric row {raw!r}") from None
    if not rows:
        raise MissingSection(f"mpc.{name} matrix is empty")
    width = len(rows[0])
    for k, row in enumerate(rows):
        if len(row) != width:
            raise MalformedRow(f"mpc.{name} row {k + 1}: {len(row)} columns, expected {width}")
    if width < _MIN_COLS[name]:
        raise MalformedRow(f"mpc.{name}: {width} columns, MATPOWER format needs >= {_MIN_COLS[name]}")
    return rows


def _int_id(v: float, where: str) -> int:
    if v != int(v):
        raise ValidationFailed(f"{where}: non-integer bus id {v}")
    return int(v)


def parse_matpower_case(text: str) -> PowerSystemCase:
    """Parse MATPOWER case-file text into a validated per-unit case."""
    body = _strip_comments(text)
    m = re.search(r"mpc\s*\.\s*baseMVA\s*=\s*([^;\n]+)", body)
    if m is None:
        raise MissingSection("mpc.baseMVA not found")
    try:
        base = float(m.group(1))
    except ValueError:
        raise MalformedRow(f"mpc.baseMVA: cannot read {m.group(1)!r}") from None
    bus_rows = _matrix(body, "bus")
    gen_rows = _matrix(body, "gen")
    branch_rows = _matrix(body, "branch")

    buses = []
    for k, r in enumerate(bus_rows):
        t = int(r[1])
        if t not in _MATPOWER_TYPES:
            raise ValidationFailed(f"bus row {k + 1}: unsupported bus type {t}")
        buses.append(Bus(
            id=_int_id(r[0], f"bus row {k + 1}"),
            bus_type=_MATPOWER_TYPES[t],
            p_demand=r[2] / base,
            q_demand=r[3] / base,
            g_shunt=r[4] / base,
            b_shunt=r[5] / base,
            v_mag_init=r[7],
            v_ang_init=deg2rad(r[8]),
        ))
    gens = [
        Generator(
            bus=_int_id(r[0], f"gen row {k + 1}"),
            p_set=r[1] / base,
            q_set=r[2] / base,
            q_max=r[3] / base,
            q_min=r[4] / base,
            v_set=r[5],
            in_service=r[7] > 0,
        )
        for k, r in enumerate(gen_rows)
    ]
    branches = [
        Branch(
            from_bus=_int_id(r[0], f"branch row {k + 1}"),
            to_bus=_int_id(r[1], f"branch row {k + 1}"),
            r=r[2],
            x=r[3],
            b_charging=r[4],
            tap_ratio=r[8],
            phase_shift=deg2rad(r[9]),
            in_service=r[10] > 0,
        )
        for k, r in enumerate(branch_rows)
    ]
    return PowerSystemCase(base, buses, branches, gens)


# -------------------------------------------------------------- structured

_NUM = {"type": "number"}
_NUM_INF = {"anyOf": [{"type": "number"}, {"enum": ["inf", "-inf"]}]}

CASE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["base_mva", "buses", "branches", "generators"],
    "additionalProperties": False,
    "properties": {
        "format": {"const": "klplf-case"},
        "version": {"const": 1},
        "base_mva": {"type": "number", "exclusiveMinimum": 0},
        "buses": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "type", "p_demand", "q_demand", "g_shunt", "b_shunt",
                             "v_mag_init", "v_ang_init_deg"],
                "properties": {
                    "id": {"type": "integer"},
                    "type": {"enum": list(BUS_TYPES)},
                    "p_demand": _NUM,
                    "q_demand": _NUM,
                    "g_shunt": _NUM,
                    "b_shunt": _NUM,
                    "v_mag_init": {"type": "number", "exclusiveMinimum": 0},
                    "v_ang_init_deg": _NUM,
                },
            },
        },
        "branches": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["from_bus", "to_bus", "r", "x", "b_charging", "tap_ratio",
                             "phase_shift_deg", "in_service"],
                "properties": {
                    "from_bus": {"type": "integer"},
                    "to_bus": {"type": "integer"},
                    "r": _NUM,
                    "x": _NUM,
                    "b_charging": _NUM,
                    "tap_ratio": _NUM,
                    "phase_shift_deg": _NUM,
                    "in_service": {"type": "boolean"},
                },
            },
        },
        "generators": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["bus", "p_set", "q_set", "v_set", "q_min", "q_max", "in_service"],
                "properties": {
                    "bus": {"type": "integer"},
                    "p_set": _NUM,
                    "q_set": _NUM,
                    "v_set": _NUM,
                    "q_min": _NUM_INF,
                    "q_max": _NUM_INF,
                    "in_service": {"type": "boolean"},
                },
            },
        },
    },
}


def _path(err) -> str:
    out = ""
    for p in err.absolute_path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def _inf_in(v):
    return float(v) if isinstance(v, str) else v


def _inf_out(v):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def parse_structured_case(text: str) -> PowerSystemCase:
    """Parse the structured (JSON) case document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation("<root>", f"invalid JSON: {exc}") from None
    validator = jsonschema.Draft202012Validator(CASE_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        raise SchemaViolation(_path(errors[0]), errors[0].message)
    buses = [
        Bus(b["id"], b["type"], b["p_demand"], b["q_demand"], b["g_shunt"], b["b_shunt"],
            b["v_mag_init"], deg2rad(b["v_ang_init_deg"]))
        for b in doc["buses"]
    ]
    branches = [
        Branch(r["from_bus"], r["to_bus"], r["r"], r["x"], r["b_charging"], r["tap_ratio"],
               deg2rad(r["phase_shift_deg"]), r["in_service"])
        for r in doc["branches"]
    ]
    gens = [
        Generator(g["bus"], g["p_set"], g["q_set"], g["v_set"], _inf_in(g["q_min"]),
                  _inf_in(g["q_max"]), g["in_service"])
        for g in doc["generators"]
    ]
    try:
        return PowerSystemCase(float(doc["base_mva"]), buses, branches, gens)
    except ValidationFailed as exc:
        msg = str(exc)
        path, _, rest = msg.partition(": ")
        raise SchemaViolation(path, rest or msg) from None


def write_structured_case(case: PowerSystemCase) -> str:
    doc = {
        "format": "klplf-case",
        "version": 1,
        "base_mva": case.base_mva,
        "buses": [
            {
                "id": b.id,
                "type": b.bus_type,
                "p_demand": b.p_demand,
                "q_demand": b.q_demand,
                "g_shunt": b.g_shunt,
                "b_shunt": b.b_shunt,
                "v_mag_init": b.v_mag_init,
                "v_ang_init_deg": rad2deg_exact(b.v_ang_init),
            }
            for b in case.buses
        ],
        "branches": [
            {
                "from_bus": r.from_bus,
                "to_bus": r.to_bus,
                "r": r.r,
                "x": r.x,
                "b_charging": r.b_charging,
                "tap_ratio": r.tap_ratio,
                "phase_shift_deg": rad2deg_exact(r.phase_shift),
                "in_service": bool(r.in_service),
            }
            for r in case.branches
        ],
        "generators": [
            {
                "bus": g.bus,
                "p_set": g.p_set,
                "q_set": g.q_set,
                "v_set": g.v_set,
                "q_min": _inf_out(g.q_min),
                "q_max": _inf_out(g.q_max),
                "in_service": bool(g.in_service),
            }
            for g in case.generators
        ],
    }
    return json.dumps(doc, indent=1) + "\n"


def load_case(path) -> PowerSystemCase:
    """Read a case file, choosing the parser from the extension (``.m`` or ``.json``)."""
    path = str(path)
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if path.endswith(".json"):
        return parse_structured_case(text)
    return parse_matpower_case(text)
