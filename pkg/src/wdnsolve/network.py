"""Pipe network model, EPANET INP subset reader/writer and demand scenarios."""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from wdnsolve.errors import (
    DanglingNodeRef,
    DisconnectedGraph,
    DuplicateId,
    InpSyntaxError,
    InputError,
    InvalidPipe,
    NoFixedHead,
    UnsupportedSection,
)
from wdnsolve.sparse.csc import SparseMatrix

log = logging.getLogger(__name__)


class HeadlossModel(enum.Enum):
    HAZEN_WILLIAMS = "HW"
    DARCY_WEISBACH = "DW"


@dataclass(frozen=True)
class Junction:
    id: str
    demand: float  # m^3/s
    elevation: float = 0.0
    pattern: str | None = None


@dataclass(frozen=True)
class FixedHead:
    id: str
    head: float  # m


@dataclass(frozen=True)
class Pipe:
    id: str
    from_node: str
    to_node: str
    length: float  # m
    diameter: float  # m
    roughness: float  # HW coefficient C, or DW absolute roughness in m
    model: HeadlossModel = HeadlossModel.HAZEN_WILLIAMS


def build_incidence(junctions, fixed_heads, pipes):
    """Return (A12, A10): +1 where a pipe enters a node, -1 where it leaves."""
    jidx = {j.id: i for i, j in enumerate(junctions)}
    fidx = {f.id: i for i, f in enumerate(fixed_heads)}
    r12, c12, v12, r10, c10, v10 = [], [], [], [], [], []
    for row, p in enumerate(pipes):
        for node, sign in ((p.from_node, -1), (p.to_node, 1)):
            if node in jidx:
                r12.append(row), c12.append(jidx[node]), v12.append(sign)
            else:
                r10.append(row), c10.append(fidx[node]), v10.append(sign)
    n_p = len(pipes)
    a12 = SparseMatrix.from_triplets(n_p, len(junctions), r12, c12, v12, dtype=np.int8)
    a10 = SparseMatrix.from_triplets(n_p, len(fixed_heads), r10, c10, v10, dtype=np.int8)
    return a12, a10


@dataclass(frozen=True, eq=False)
class Network:
    """Validated, immutable network. Build through :meth:`build` or a parser."""

    junctions: tuple
    fixed_heads: tuple
    pipes: tuple
    patterns: dict = field(default_factory=dict)
    coordinates: dict = field(default_factory=dict, repr=False)
    name: str = ""
    A12: SparseMatrix = field(default=None, repr=False)
    A10: SparseMatrix = field(default=None, repr=False)

    @classmethod
    def build(cls, junctions, fixed_heads, pipes, patterns=None, coordinates=None, name=""):
        junctions, fixed_heads, pipes = tuple(junctions), tuple(fixed_heads), tuple(pipes)
        _validate(junctions, fixed_heads, pipes)
        a12, a10 = build_incidence(junctions, fixed_heads, pipes)
        return cls(junctions, fixed_heads, pipes, dict(patterns or {}), dict(coordinates or {}),
                   name, a12, a10)

    @property
    def n_p(self):
        return len(self.pipes)

    @property
    def n_n(self):
        return len(self.junctions)

    @property
    def n_0(self):
        return len(self.fixed_heads)

    @property
    def n_l(self):
        return self.n_p - self.n_n

    @property
    def demands(self) -> np.ndarray:
        return np.array([j.demand for j in self.junctions], dtype=np.float64)

    @property
    def h0(self) -> np.ndarray:
        return np.array([f.head for f in self.fixed_heads], dtype=np.float64)

    def pipe_array(self, attr) -> np.ndarray:
        return np.array([getattr(p, attr) for p in self.pipes], dtype=np.float64)

    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(to_json_dict(self), sort_keys=True).encode()).hexdigest()

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return (self.junctions == other.junctions and self.fixed_heads == other.fixed_heads
                and self.pipes == other.pipes and self.patterns == other.patterns)

    __hash__ = None


def _validate(junctions, fixed_heads, pipes):
    seen = set()
    for node in (*junctions, *fixed_heads):
        if node.id in seen:
            raise DuplicateId(f"node id {node.id!r} used twice")
        seen.add(node.id)
    if not fixed_heads:
        raise NoFixedHead("network has no reservoir or other fixed-head node")
    if not junctions:
        raise InputError("network has no junctions")
    pipe_ids = set()
    for p in pipes:
        if p.id in pipe_ids:
            raise DuplicateId(f"pipe id {p.id!r} used twice")
        pipe_ids.add(p.id)
        for node in (p.from_node, p.to_node):
            if node not in seen:
                raise DanglingNodeRef(f"pipe {p.id!r} references unknown node {node!r}")
        if p.from_node == p.to_node:
            raise InvalidPipe(f"pipe {p.id!r} starts and ends at {p.from_node!r}")
        if not (p.length > 0 and p.diameter > 0 and p.roughness > 0):
            raise InvalidPipe(f"pipe {p.id!r} needs positive length, diameter and roughness")

    adj = {n: [] for n in seen}
    for p in pipes:
        adj[p.from_node].append(p.to_node)
        adj[p.to_node].append(p.from_node)
    start = fixed_heads[0].id
    reached = {start}
    queue = deque([start])
    while queue:
        for m in adj[queue.popleft()]:
            if m not in reached:
                reached.add(m)
                queue.append(m)
    if len(reached) != len(seen):
        missing = sorted(seen - reached)[:5]
        raise DisconnectedGraph(f"network graph is not connected; unreachable: {missing}")


# -- EPANET INP subset -------------------------------------------------------

_M3S = {
    "CFS": 0.028316846592, "GPM": 6.30901964e-5, "MGD": 0.0438126363888889,
    "IMGD": 0.0526167824074074, "AFD": 0.0142764101568, "LPS": 1e-3, "LPM": 1e-3 / 60,
    "MLD": 1.0 / 86.4, "CMH": 1.0 / 3600, "CMD": 1.0 / 86400, "CMS": 1.0,
}
_US_UNITS = {"CFS", "GPM", "MGD", "IMGD", "AFD"}
_UNSUPPORTED = {"PUMPS", "VALVES"}
_IGNORED = {
    "TITLE", "TIMES", "REPORT", "ENERGY", "CURVES", "CONTROLS", "RULES", "QUALITY", "SOURCES",
    "REACTIONS", "MIXTURE", "STATUS", "VERTICES", "LABELS", "BACKDROP", "TAGS", "EMITTERS", "END",
}


@dataclass
class _Units:
    flow: float = 1e-3  # LPS is the EPANET default for SI files
    length: float = 1.0
    diameter: float = 1e-3
    head: float = 1.0
    dw_roughness: float = 1e-3

    @classmethod
    def for_flow_units(cls, name):
        key = name.upper()
        if key not in _M3S:
            raise InpSyntaxError(f"unknown flow units {name!r}")
        if key in _US_UNITS:
            return cls(_M3S[key], 0.3048, 0.0254, 0.3048, 0.3048e-3)
        return cls(_M3S[key], 1.0, 1e-3, 1.0, 1e-3)


def _sections(text):
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise InpSyntaxError(f"line {lineno}: malformed section header {raw!r}")
            section = line[1:-1].strip().upper()
            yield section, None, lineno
            continue
        if section is None:
            raise InpSyntaxError(f"line {lineno}: data before the first section header")
        yield section, line.split(), lineno


def _num(tok, lineno):
    try:
        return float(tok)
    except ValueError:
        raise InpSyntaxError(f"line {lineno}: expected a number, got {tok!r}") from None


def parse_inp(text: str, name: str = "") -> Network:
    """Read the supported EPANET INP subset; all quantities end up in SI."""
    rows: dict[str, list] = {}
    for section, toks, lineno in _sections(text):
        if toks is None:
            if section not in _UNSUPPORTED and section not in _IGNORED and section not in {
                    "JUNCTIONS", "RESERVOIRS", "TANKS", "PIPES", "DEMANDS", "PATTERNS",
                    "COORDINATES", "OPTIONS"}:
                log.warning("ignoring unknown section [%s]", section)
            continue
        if section in _UNSUPPORTED:
            raise UnsupportedSection(
                f"line {lineno}: [{section}] entries are not supported (no pumps or valves)")
        rows.setdefault(section, []).append((toks, lineno))

    units = _Units()
    headloss = HeadlossModel.HAZEN_WILLIAMS
    for toks, lineno in rows.get("OPTIONS", []):
        key = toks[0].upper()
        if key == "UNITS" and len(toks) > 1:
            units = _Units.for_flow_units(toks[1])
        elif key == "HEADLOSS" and len(toks) > 1:
            val = toks[1].upper()
            if val == "H-W":
                headloss = HeadlossModel.HAZEN_WILLIAMS
            elif val == "D-W":
                headloss = HeadlossModel.DARCY_WEISBACH
            else:
                raise InpSyntaxError(f"line {lineno}: headloss formula {toks[1]!r} not supported")

    junctions = {}
    for toks, lineno in rows.get("JUNCTIONS", []):
        if len(toks) < 2:
            raise InpSyntaxError(f"line {lineno}: junction needs an id and an elevation")
        jid = toks[0]
        if jid in junctions:
            raise DuplicateId(f"line {lineno}: junction {jid!r} defined twice")
        demand = _num(toks[2], lineno) * units.flow if len(toks) > 2 else 0.0
        pattern = toks[3] if len(toks) > 3 else None
        junctions[jid] = Junction(jid, demand, _num(toks[1], lineno) * units.head, pattern)

    # [DEMANDS] supersedes the base demand given in [JUNCTIONS]
    overrides: dict[str, list] = {}
    for toks, lineno in rows.get("DEMANDS", []):
        if len(toks) < 2:
            raise InpSyntaxError(f"line {lineno}: demand entry needs a junction and a value")
        if toks[0] not in junctions:
            raise DanglingNodeRef(f"line {lineno}: demand for unknown junction {toks[0]!r}")
        overrides.setdefault(toks[0], []).append(
            (_num(toks[1], lineno) * units.flow, toks[2] if len(toks) > 2 else None))
    for jid, entries in overrides.items():
        j = junctions[jid]
        pattern = next((p for _, p in entries if p is not None), None)
        junctions[jid] = Junction(jid, sum(d for d, _ in entries), j.elevation, pattern)

    fixed = {}
    for toks, lineno in rows.get("RESERVOIRS", []):
        if len(toks) < 2:
            raise InpSyntaxError(f"line {lineno}: reservoir needs an id and a head")
        if toks[0] in fixed:
            raise DuplicateId(f"line {lineno}: node {toks[0]!r} defined twice")
        fixed[toks[0]] = FixedHead(toks[0], _num(toks[1], lineno) * units.head)
    for toks, lineno in rows.get("TANKS", []):
        # steady-state snapshot: a tank is a fixed head at its initial level
        if len(toks) < 3:
            raise InpSyntaxError(f"line {lineno}: tank needs id, elevation and initial level")
        if toks[0] in fixed:
            raise DuplicateId(f"line {lineno}: node {toks[0]!r} defined twice")
        head = (_num(toks[1], lineno) + _num(toks[2], lineno)) * units.head
        fixed[toks[0]] = FixedHead(toks[0], head)

    pipes = []
    for toks, lineno in rows.get("PIPES", []):
        if len(toks) < 6:
            raise InpSyntaxError(f"line {lineno}: pipe needs id, nodes, length, diameter, roughness")
        status = toks[7].upper() if len(toks) > 7 else "OPEN"
        if status == "CV":
            raise UnsupportedSection(f"line {lineno}: check valve on pipe {toks[0]!r} not supported")
        if status == "CLOSED":
            log.warning("line %d: dropping closed pipe %s", lineno, toks[0])
            continue
        rough = _num(toks[5], lineno)
        if headloss is HeadlossModel.DARCY_WEISBACH:
            rough *= units.dw_roughness
        pipes.append(Pipe(toks[0], toks[1], toks[2], _num(toks[3], lineno) * units.length,
                          _num(toks[4], lineno) * units.diameter, rough, headloss))

    patterns: dict[str, list] = {}
    for toks, lineno in rows.get("PATTERNS", []):
        patterns.setdefault(toks[0], []).extend(_num(t, lineno) for t in toks[1:])

    coords = {}
    for toks, lineno in rows.get("COORDINATES", []):
        if len(toks) >= 3:
            coords[toks[0]] = (_num(toks[1], lineno), _num(toks[2], lineno))

    return Network.build(junctions.values(), fixed.values(), pipes, patterns, coords, name)


def read_inp(path) -> Network:
    path = Path(path)
    return parse_inp(path.read_text(), name=path.stem)


def _exact_repr(value: float, scale: float) -> str:
    """Text for value*scale that divides back to exactly ``value``."""
    s = value * scale
    for _ in range(64):
        back = s / scale
        if back == value:
            return repr(s)
        s = math.nextafter(s, math.inf if back < value else -math.inf)
    return repr(value * scale)


def to_inp(network: Network) -> str:
    """Write the network as INP text in CMS units (diameters in mm)."""
    models = {p.model for p in network.pipes}
    if len(models) > 1:
        raise ValueError("INP files carry a single headloss formula; network mixes HW and DW")
    model = models.pop() if models else HeadlossModel.HAZEN_WILLIAMS
    out = ["[TITLE]", network.name, "", "[JUNCTIONS]"]
    for j in network.junctions:
        out.append(f"{j.id}\t{j.elevation!r}\t{j.demand!r}" + (f"\t{j.pattern}" if j.pattern else ""))
    out += ["", "[RESERVOIRS]"]
    out += [f"{f.id}\t{f.head!r}" for f in network.fixed_heads]
    out += ["", "[PIPES]"]
    for p in network.pipes:
        rough = repr(p.roughness) if model is HeadlossModel.HAZEN_WILLIAMS else _exact_repr(p.roughness, 1e3)
        out.append(f"{p.id}\t{p.from_node}\t{p.to_node}\t{p.length!r}\t"
                   f"{_exact_repr(p.diameter, 1e3)}\t{rough}\t0\tOpen")
    if network.patterns:
        out += ["", "[PATTERNS]"]
        out += [f"{pid}\t" + "\t".join(repr(m) for m in mults) for pid, mults in network.patterns.items()]
    if network.coordinates:
        out += ["", "[COORDINATES]"]
        out += [f"{n}\t{x!r}\t{y!r}" for n, (x, y) in network.coordinates.items()]
    out += ["", "[OPTIONS]", "Units\tCMS",
            "Headloss\t" + ("H-W" if model is HeadlossModel.HAZEN_WILLIAMS else "D-W"), "", "[END]", ""]
    return "\n".join(out)


# -- JSON dump -------------------------------------------------------------

def to_json_dict(network: Network) -> dict:
    return {
        "junctions": [{"id": j.id, "demand": j.demand, "elevation": j.elevation,
                       **({"pattern": j.pattern} if j.pattern else {})} for j in network.junctions],
        "fixed_heads": [{"id": f.id, "head": f.head} for f in network.fixed_heads],
        "pipes": [{"id": p.id, "from_node": p.from_node, "to_node": p.to_node,
                   "length": p.length, "diameter": p.diameter, "roughness": p.roughness,
                   "model": p.model.value} for p in network.pipes],
        **({"patterns": network.patterns} if network.patterns else {}),
    }


def from_json_dict(data: dict) -> Network:
    try:
        junctions = [Junction(d["id"], float(d["demand"]), float(d.get("elevation", 0.0)),
                              d.get("pattern")) for d in data["junctions"]]
        fixed = [FixedHead(d["id"], float(d["head"])) for d in data["fixed_heads"]]
        pipes = [Pipe(d["id"], d["from_node"], d["to_node"], float(d["length"]),
                      float(d["diameter"]), float(d["roughness"]),
                      HeadlossModel(d.get("model", "HW"))) for d in data["pipes"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed network JSON: {exc}") from exc
    return Network.build(junctions, fixed, pipes, data.get("patterns"))


def load_network(path) -> Network:
    """Read a network from ``.inp`` or canonical ``.json``."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"no such network file: {path}")
    if path.suffix.lower() == ".json":
        net = from_json_dict(json.loads(path.read_text()))
        return Network.build(net.junctions, net.fixed_heads, net.pipes, net.patterns, name=path.stem)
    return read_inp(path)


def save_json(network: Network, path):
    Path(path).write_text(json.dumps(to_json_dict(network), indent=1))


# -- demand scenarios --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DemandScenario:
    steps: tuple  # demand vectors, m^3/s
    step_labels: tuple | None = None

    def __post_init__(self):
        steps = tuple(np.asarray(s, dtype=np.float64) for s in self.steps)
        if not steps:
            raise InputError("scenario has no steps")
        n = steps[0].shape
        for k, s in enumerate(steps):
            if s.shape != n or s.ndim != 1:
                raise InputError(f"step {k}: demand vector has shape {s.shape}, expected {n}")
            if np.any(s < 0) or not np.all(np.isfinite(s)):
                raise InputError(f"step {k}: demands must be finite and nonnegative")
            s.setflags(write=False)
        object.__setattr__(self, "steps", steps)
        if self.step_labels is not None and len(self.step_labels) != len(steps):
            raise InputError("step_labels length differs from number of steps")

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def check(self, network: Network):
        if self.steps[0].shape != (network.n_n,):
            raise InputError(f"scenario has {self.steps[0].size} demands per step, "
                             f"network has {network.n_n} junctions")

    @classmethod
    def constant(cls, network: Network, n_steps: int = 1):
        return cls(tuple(network.demands for _ in range(n_steps)))

    @classmethod
    def from_multipliers(cls, network: Network, multipliers, labels=None):
        base = network.demands
        return cls(tuple(m * base for m in multipliers), labels)

    @classmethod
    def synthetic(cls, network: Network, n_steps: int, seed: int = 0,
                  amplitude: float = 0.4, noise: float = 0.1):
        """Diurnal sinusoid with per-junction multiplicative noise.

        Step k has global multiplier 1 - amplitude*cos(2 pi k / n_steps)
        (night minimum at k=0) and each junction gets an independent factor
        uniform in [1 - noise, 1 + noise].
        """
        rng = np.random.default_rng(seed)
        base = network.demands
        steps = []
        for k in range(n_steps):
            m = 1.0 - amplitude * math.cos(2 * math.pi * k / max(n_steps, 1))
            jitter = rng.uniform(1 - noise, 1 + noise, size=base.size)
            steps.append(np.maximum(base * m * jitter, 0.0))
        return cls(tuple(steps), tuple(f"t{k}" for k in range(n_steps)))

    @classmethod
    def from_patterns(cls, network: Network, n_steps: int):
        """Base demand times the junction's pattern multiplier, pattern index k mod length."""
        steps = []
        for k in range(n_steps):
            d = []
            for j in network.junctions:
                mult = network.patterns.get(j.pattern) if j.pattern else None
                d.append(j.demand * (mult[k % len(mult)] if mult else 1.0))
            steps.append(np.maximum(np.array(d), 0.0))
        return cls(tuple(steps))

    @classmethod
    def from_file(cls, path, network: Network):
        """CSV, one step per line: a single multiplier or n_n demands (m^3/s)."""
        steps = []
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                vals = [float(t) for t in line.replace(",", " ").split()]
            except ValueError:
                raise InputError(f"{path}:{lineno}: non-numeric value") from None
            if len(vals) == 1:
                steps.append(vals[0] * network.demands)
            elif len(vals) == network.n_n:
                steps.append(np.array(vals))
            else:
                raise InputError(f"{path}:{lineno}: expected 1 or {network.n_n} values, got {len(vals)}")
        return cls(tuple(steps))
