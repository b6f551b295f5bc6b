"""Experiment description and its YAML file format.

A scenario file looks like::

    name: six-agent-reference
    target: [3.0, 6.0]
    dt_seconds: 0.1
    t_final_seconds: 60.0
    seed: 2024
    agents:
      - {id: 1, role: SA, position: [2.0, 4.0]}
      ...
    topology:
      k12: 1.0
      k21: 1.0
      nsa_edges:            # "to" receives from "from"
        - {to: 4, from: 3, weight: 1.0}
      sa_links:
        - {to: 3, from: 2}

Optional agent keys are ``initial_heading_rad`` (number or ``random``) and
``initial_estimate`` (``[x, y]`` or ``own-position``). Edge weights default to
1.0.
"""
import math
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np
import yaml

from .errors import (
    DegenerateBearingError,
    InputError,
    ScenarioInvariantError,
    ScenarioParseError,
    ScenarioSchemaError,
)
from .geometry import MIN_SEPARATION, as_vec2
from .topology import Topology

INTEGRATORS = ("euler", "rk4")
RANDOM = "random"
OWN_POSITION = "own-position"


@dataclass(frozen=True)
class AgentSpec:
    id: int
    role: str
    position: np.ndarray
    initial_heading: float | None = None  # None: drawn from the scenario seed
    initial_estimate: np.ndarray | None = None  # None: start at own position


@dataclass(frozen=True)
class Scenario:
    agents: tuple
    target: np.ndarray
    topology: Topology
    dt: float
    t_final: float
    seed: int = 0
    convergence_eps: float = 1e-3
    convergence_hold: int = 10
    integrator: str = "euler"
    name: str = "scenario"
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "target", as_vec2(self.target, "target"))
        validate(self)

    @property
    def n(self):
        return len(self.agents)

    @property
    def positions(self):
        return np.array([a.position for a in self.agents], dtype=float)

    @property
    def n_steps(self):
        return int(math.floor(self.t_final / self.dt + 1e-9))

    def replace(self, **changes):
        return replace(self, **changes)


def validate(s):
    if s.n < 3:
        raise InputError(f"need at least 3 agents, got {s.n}")
    ids = [a.id for a in s.agents]
    if ids != list(range(1, s.n + 1)):
        raise InputError(f"agent ids must be 1..{s.n} in order, got {ids}")
    roles = [a.role for a in s.agents]
    n_sa = roles.count("SA")
    if n_sa != 2 or roles[:2] != ["SA", "SA"]:
        raise InputError(f"exactly two sensing agents with ids 1 and 2 are required, got roles {roles}")
    if any(r not in ("SA", "NSA") for r in roles):
        raise InputError(f"roles must be SA or NSA, got {roles}")
    if s.topology.n != s.n:
        raise InputError(f"topology describes {s.topology.n} agents, scenario has {s.n}")
    if not (math.isfinite(s.dt) and s.dt > 0):
        raise InputError(f"dt must be positive, got {s.dt!r}")
    if not (math.isfinite(s.t_final) and s.t_final >= s.dt * (1 - 1e-12)):
        raise InputError(f"t_final must be at least dt, got t_final={s.t_final!r}, dt={s.dt!r}")
    if not (s.convergence_eps > 0):
        raise InputError(f"convergence_eps must be positive, got {s.convergence_eps!r}")
    if int(s.convergence_hold) != s.convergence_hold or s.convergence_hold < 1:
        raise InputError(f"convergence_hold must be a positive integer, got {s.convergence_hold!r}")
    if s.integrator not in INTEGRATORS:
        raise InputError(f"integrator must be one of {INTEGRATORS}, got {s.integrator!r}")
    if int(s.seed) != s.seed or s.seed < 0:
        raise InputError(f"seed must be a nonnegative integer, got {s.seed!r}")
    for a in s.agents:
        as_vec2(a.position, f"agent {a.id} position")
        if np.linalg.norm(s.target - a.position) <= MIN_SEPARATION:
            raise DegenerateBearingError(f"agent {a.id} sits on the target")
        if a.initial_heading is not None and not math.isfinite(a.initial_heading):
            raise InputError(f"agent {a.id} initial heading must be finite")
        if a.initial_estimate is not None:
            as_vec2(a.initial_estimate, f"agent {a.id} initial estimate")


def build_scenario(positions, target, *, nsa_edges=(), sa_links=(), k12=1.0, k21=1.0,
                   dt=0.1, t_final=60.0, seed=0, headings=None, estimates=None, **kwargs):
    """Convenience constructor from plain lists.

    ``nsa_edges`` and ``sa_links`` hold ``(to, from)`` or ``(to, from, weight)``
    tuples using agent ids.
    """
    n = len(positions)
    adj = np.zeros((n - 2, n - 2))
    beta = np.zeros((n - 2, 2))
    for edge in nsa_edges:
        to, frm, w = (*edge, 1.0)[:3]
        adj[to - 3, frm - 3] = w
    for edge in sa_links:
        to, frm, w = (*edge, 1.0)[:3]
        beta[to - 3, frm - 1] = w
    agents = []
    for i, pos in enumerate(positions, start=1):
        agents.append(AgentSpec(
            id=i,
            role="SA" if i <= 2 else "NSA",
            position=np.asarray(pos, dtype=float),
            initial_heading=None if headings is None else headings[i - 1],
            initial_estimate=None if estimates is None else np.asarray(estimates[i - 1], dtype=float),
        ))
    topo = Topology(n=n, k12=k12, k21=k21, nsa_adjacency=adj, sa_input=beta)
    return Scenario(agents=agents, target=np.asarray(target, dtype=float), topology=topo,
                    dt=dt, t_final=t_final, seed=seed, **kwargs)


# -- file format -------------------------------------------------------------

_TOP_KEYS = {
    "name", "target", "dt_seconds", "t_final_seconds", "seed", "convergence_eps",
    "convergence_hold_steps", "integrator", "agents", "topology",
}
_TOP_REQUIRED = {"target", "dt_seconds", "t_final_seconds", "agents", "topology"}
_AGENT_KEYS = {"id", "role", "position", "initial_heading_rad", "initial_estimate"}
_AGENT_REQUIRED = {"id", "role", "position"}
_TOPO_KEYS = {"k12", "k21", "nsa_edges", "sa_links"}
_EDGE_KEYS = {"to", "from", "weight"}
_EDGE_REQUIRED = {"to", "from"}


def _node_lines(node, path=(), out=None):
    """Map key paths to 1-based source lines using the composed YAML tree."""
    if out is None:
        out = {}
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            k = key.value
            out[path + (k,)] = key.start_mark.line + 1
            _node_lines(value, path + (k,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            _node_lines(item, path + (i,), out)
    return out


class _Reader:
    def __init__(self, source, lines):
        self.source = source
        self.lines = lines

    def where(self, path):
        while path and path not in self.lines:
            path = path[:-1]
        line = self.lines.get(path)
        loc = ".".join(str(p) for p in path) or "<root>"
        return f"{self.source}:{line}: {loc}" if line else f"{self.source}: {loc}"

    def schema(self, path, msg):
        return ScenarioSchemaError(f"{self.where(path)}: {msg}")

    def invariant(self, path, msg):
        return ScenarioInvariantError(f"{self.where(path)}: {msg}")

    def mapping(self, obj, path, allowed, required):
        if not isinstance(obj, dict):
            raise self.schema(path, f"expected a mapping, got {type(obj).__name__}")
        for key in obj:
            if key not in allowed:
                raise self.schema(path + (key,), f"unknown key {key!r}")
        for key in sorted(required - set(obj)):
            raise self.schema(path, f"missing required key {key!r}")
        return obj

    def number(self, obj, path):
        if isinstance(obj, bool) or not isinstance(obj, (int, float)):
            raise self.schema(path, f"expected a number, got {obj!r}")
        if not math.isfinite(obj):
            raise self.invariant(path, f"value must be finite, got {obj!r}")
        return float(obj)

    def integer(self, obj, path):
        if isinstance(obj, bool) or not isinstance(obj, int):
            raise self.schema(path, f"expected an integer, got {obj!r}")
        return obj

    def vec2(self, obj, path):
        if not isinstance(obj, list) or len(obj) != 2:
            raise self.schema(path, f"expected a 2-element list [x, y], got {obj!r}")
        return np.array([self.number(v, path + (i,)) for i, v in enumerate(obj)])


def parse_scenario(text, source="<string>"):
    """Parse and validate scenario YAML text."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioParseError(f"{source}: {exc}") from exc
    r = _Reader(source, _node_lines(root) if root is not None else {})
    r.mapping(data, (), _TOP_KEYS, _TOP_REQUIRED)

    agents_raw = data["agents"]
    if not isinstance(agents_raw, list):
        raise r.schema(("agents",), "expected a list of agents")
    agents = []
    for idx, raw in enumerate(agents_raw):
        path = ("agents", idx)
        r.mapping(raw, path, _AGENT_KEYS, _AGENT_REQUIRED)
        role = raw["role"]
        if role not in ("SA", "NSA"):
            raise r.schema(path + ("role",), f"role must be SA or NSA, got {role!r}")
        heading = raw.get("initial_heading_rad", RANDOM)
        if heading == RANDOM:
            heading = None
        else:
            heading = r.number(heading, path + ("initial_heading_rad",))
        est = raw.get("initial_estimate", OWN_POSITION)
        est = None if est == OWN_POSITION else r.vec2(est, path + ("initial_estimate",))
        agents.append(AgentSpec(
            id=r.integer(raw["id"], path + ("id",)),
            role=role,
            position=r.vec2(raw["position"], path + ("position",)),
            initial_heading=heading,
            initial_estimate=est,
        ))

    ids = [a.id for a in agents]
    n = len(agents)
    if sorted(ids) != list(range(1, n + 1)):
        raise r.invariant(("agents",), f"agent ids must be exactly 1..{n}, got {ids}")
    agents.sort(key=lambda a: a.id)
    sa_ids = [a.id for a in agents if a.role == "SA"]
    if sa_ids != [1, 2]:
        raise r.invariant(("agents",), f"exactly two SAs with ids 1 and 2 are required, got SA ids {sa_ids}")
    if n < 3:
        raise r.invariant(("agents",), f"need at least 3 agents, got {n}")

    tp = ("topology",)
    topo_raw = r.mapping(data["topology"], tp, _TOPO_KEYS, set())
    adj = np.zeros((n - 2, n - 2))
    beta = np.zeros((n - 2, 2))
    for key, lo, hi in (("nsa_edges", 3, n), ("sa_links", 1, 2)):
        edges = topo_raw.get(key, []) or []
        if not isinstance(edges, list):
            raise r.schema(tp + (key,), "expected a list of edges")
        for idx, raw in enumerate(edges):
            path = tp + (key, idx)
            r.mapping(raw, path, _EDGE_KEYS, _EDGE_REQUIRED)
            to = r.integer(raw["to"], path + ("to",))
            frm = r.integer(raw["from"], path + ("from",))
            w = r.number(raw.get("weight", 1.0), path + ("weight",))
            if not 3 <= to <= n:
                raise r.invariant(path + ("to",), f"receiver must be an NSA id in 3..{n}, got {to}")
            if not lo <= frm <= hi:
                raise r.invariant(path + ("from",), f"sender must lie in {lo}..{hi}, got {frm}")
            if key == "nsa_edges" and to == frm:
                raise r.invariant(path, "self-loops are not allowed")
            if w <= 0:
                raise r.invariant(path + ("weight",), f"edge weight must be positive, got {w}")
            target_arr, (row, col) = (adj, (to - 3, frm - 3)) if key == "nsa_edges" else (beta, (to - 3, frm - 1))
            if target_arr[row, col] != 0:
                raise r.invariant(path, f"duplicate edge {frm} -> {to}")
            target_arr[row, col] = w

    def _num(key, default):
        return r.number(data[key], (key,)) if key in data else default

    try:
        topo = Topology(
            n=n,
            k12=r.number(topo_raw.get("k12", 1.0), tp + ("k12",)),
            k21=r.number(topo_raw.get("k21", 1.0), tp + ("k21",)),
            nsa_adjacency=adj,
            sa_input=beta,
        )
    except InputError as exc:
        raise r.invariant(tp, str(exc)) from exc

    integrator = data.get("integrator", "euler")
    if integrator not in INTEGRATORS:
        raise r.schema(("integrator",), f"integrator must be one of {INTEGRATORS}, got {integrator!r}")
    checks = {
        "dt_seconds": lambda v: v > 0 or "dt_seconds must be positive",
        "t_final_seconds": lambda v: v > 0 or "t_final_seconds must be positive",
        "convergence_eps": lambda v: v > 0 or "convergence_eps must be positive",
    }
    values = {}
    for key, default in (("dt_seconds", None), ("t_final_seconds", None), ("convergence_eps", 1e-3)):
        v = _num(key, default)
        verdict = checks[key](v)
        if verdict is not True:
            raise r.invariant((key,), verdict)
        values[key] = v
    seed = r.integer(data.get("seed", 0), ("seed",))
    hold = r.integer(data.get("convergence_hold_steps", 10), ("convergence_hold_steps",))
    name = str(data.get("name", "scenario"))
    try:
        return Scenario(
            agents=agents,
            target=r.vec2(data["target"], ("target",)),
            topology=topo,
            dt=values["dt_seconds"],
            t_final=values["t_final_seconds"],
            seed=seed,
            convergence_eps=values["convergence_eps"],
            convergence_hold=hold,
            integrator=integrator,
            name=name,
        )
    except InputError as exc:
        raise ScenarioInvariantError(f"{source}: {exc}") from exc


def load_scenario(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_scenario(text, source=str(path))


def reference_scenario_path():
    return resources.files("netpoint") / "data" / "six_agents.yaml"


def reference_scenario():
    """The bundled six-agent reproduction scenario."""
    path = reference_scenario_path()
    return parse_scenario(path.read_text(encoding="utf-8"), source=path.name)
