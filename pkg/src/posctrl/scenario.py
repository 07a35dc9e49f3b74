"""Scenario files: JSON schema, cross-field validation and round-tripping.

Vertex indices in files are 1-based.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .criteria import MODES, BoundaryModel, heat_model, transport_model
from .graph import Edge, GraphError, NetworkGraph
from .heat import HeatNetwork
from .transport import TransportSystem

_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_MATRIX = {"type": "array", "minItems": 1,
           "items": {"type": "array", "minItems": 1, "items": {"type": "number"}}}

SCHEMA = {
    "type": "object",
    "required": ["kind", "control", "mode"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "kind": {"enum": ["transport", "heat"]},
        "graph": {
            "type": "object", "required": ["vertices", "edges"], "additionalProperties": False,
            "properties": {
                "vertices": {"type": "integer", "minimum": 1},
                "kirchhoff": {"type": "boolean"},
                "edges": {"type": "array", "minItems": 1, "items": {
                    "type": "object", "required": ["tail", "head"], "additionalProperties": False,
                    "properties": {"tail": {"type": "integer", "minimum": 1},
                                   "head": {"type": "integer", "minimum": 1},
                                   "weight": {"type": "number", "minimum": 0, "maximum": 1}}}},
            },
        },
        "params": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "velocity": {"oneOf": [_POS, {"type": "array", "minItems": 1, "items": _POS}]},
                "diffusivity": {"oneOf": [_POS, {"type": "array", "minItems": 1, "items": _POS}]},
                "absorption": {"oneOf": [_NONNEG, {"type": "array", "minItems": 1, "items": _NONNEG}]},
                "absorption_sign": {"enum": [-1, 1]},
            },
        },
        "coupling": _MATRIX,
        "control": {"type": "object", "required": ["matrix"], "additionalProperties": False,
                    "properties": {"matrix": _MATRIX, "positive": {"type": "boolean"}}},
        "discretization": {"type": "object", "additionalProperties": False,
                           "properties": {"P": {"type": "integer", "minimum": 3},
                                          "K_max": {"type": "integer", "minimum": 1},
                                          "Q": {"type": "integer", "minimum": 1}}},
        "probe": {"type": "object", "additionalProperties": False,
                  "properties": {"mu_min": {"type": "number"},
                                 "mu_count": {"type": "integer", "minimum": 1},
                                 "n_max": {"type": "integer", "minimum": 0}}},
        "mode": {"enum": list(MODES)},
        "tol": _POS,
    },
}


class ScenarioError(ValueError):
    """Carries a list of ``(field path, message)`` problems."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(f"{p or '<root>'}: {m}" for p, m in self.problems))


def _tuplify(x):
    if isinstance(x, (list, tuple)):
        return tuple(_tuplify(v) for v in x)
    return x


@dataclass(frozen=True)
class Scenario:
    kind: str
    control: tuple
    mode: str
    control_positive: bool = True
    name: str = ""
    vertices: int | None = None
    edges: tuple | None = None          # ((tail, head, weight), ...) 1-based
    kirchhoff: bool = True
    velocity: float | tuple | None = None
    diffusivity: float | tuple | None = None
    absorption: float | tuple | None = None
    absorption_sign: int = -1
    coupling: tuple | None = None
    n_points: int = 201
    k_max: int = 64
    n_velocity: int = 64
    mu_min: float | None = None
    mu_count: int = 8
    n_max: int | None = None
    tol: float = 1e-9

    @property
    def n_edges(self) -> int:
        return len(self.edges) if self.kind == "transport" else len(self.coupling)

    def graph(self) -> NetworkGraph:
        return NetworkGraph(self.vertices, tuple(Edge(t - 1, h - 1, w) for t, h, w in self.edges),
                            kirchhoff=self.kirchhoff)

    def system(self):
        K = np.array(self.control, dtype=float)
        if self.kind == "transport":
            return TransportSystem(self.graph(), self.velocity if self.velocity is not None else 1.0,
                                   absorption=self.absorption, absorption_sign=self.absorption_sign,
                                   control=K, positive_control=self.control_positive)
        m = len(self.coupling)
        c = np.broadcast_to(np.asarray(1.0 if self.diffusivity is None else self.diffusivity,
                                       dtype=float), (m,))
        q = np.broadcast_to(np.asarray(1.0 if self.absorption is None else self.absorption,
                                       dtype=float), (m,))
        return HeatNetwork(tuple(c), tuple(q), np.array(self.coupling, dtype=float), K)

    def model(self) -> BoundaryModel:
        sys = self.system()
        if self.kind == "transport":
            return transport_model(sys, self.n_points)
        return heat_model(sys, self.n_points)


def _path(err) -> str:
    return ".".join(str(p) for p in err.absolute_path)


def validate_dict(data: dict) -> Scenario:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        raise ScenarioError([(_path(e), e.message) for e in errors])

    problems = []
    kind = data["kind"]
    params = data.get("params", {})
    K = data["control"]["matrix"]
    if len({len(r) for r in K}) != 1:
        problems.append(("control.matrix", "rows have different lengths"))
    positive_flag = data["control"].get("positive", True)
    mode = data["mode"]
    flat_k = [x for r in K for x in r]
    if (positive_flag or mode == "positive") and min(flat_k) < 0:
        problems.append(("control.matrix", "negative entry while positivity is required"))

    if kind == "transport":
        if "graph" not in data:
            problems.append(("graph", "transport scenarios need a graph"))
        if "coupling" in data:
            problems.append(("coupling", "only heat scenarios carry a coupling matrix"))
        if "diffusivity" in params:
            problems.append(("params.diffusivity", "not a transport parameter"))
    else:
        if "coupling" not in data:
            problems.append(("coupling", "heat scenarios need a coupling matrix"))
        if "velocity" in params:
            problems.append(("params.velocity", "not a heat parameter"))
        if "graph" in data:
            problems.append(("graph", "heat coupling is given by the coupling matrix"))
    if problems:
        raise ScenarioError(problems)

    disc = data.get("discretization", {})
    probe = data.get("probe", {})
    kw = dict(
        kind=kind, control=_tuplify(K), mode=mode, control_positive=positive_flag,
        name=data.get("name", ""), absorption=_tuplify(params.get("absorption")),
        absorption_sign=params.get("absorption_sign", -1),
        n_points=disc.get("P", 201), k_max=disc.get("K_max", 64), n_velocity=disc.get("Q", 64),
        mu_min=probe.get("mu_min"), mu_count=probe.get("mu_count", 8), n_max=probe.get("n_max"),
        tol=data.get("tol", 1e-9))
    if kind == "transport":
        g = data["graph"]
        kw.update(vertices=g["vertices"], kirchhoff=g.get("kirchhoff", True),
                  edges=tuple((e["tail"], e["head"], e.get("weight", 1.0)) for e in g["edges"]),
                  velocity=_tuplify(params.get("velocity", 1.0)))
    else:
        kw.update(coupling=_tuplify(data["coupling"]),
                  diffusivity=_tuplify(params.get("diffusivity", 1.0)))
        if mode == "positive" and min(x for r in data["coupling"] for x in r) < 0:
            problems.append(("coupling", "negative entry while positivity is required"))
    scen = Scenario(**kw)
    _check_sizes(scen, problems)
    if kind == "heat" and kw["k_max"] >= kw["n_points"] - 1:
        problems.append(("discretization.K_max", "must be below P - 1"))
    if problems:
        raise ScenarioError(problems)
    try:
        scen.system()
    except (GraphError, ValueError) as exc:
        where = "graph" if isinstance(exc, GraphError) else "params"
        raise ScenarioError([(where, str(exc))]) from exc
    return scen


def _check_sizes(s: Scenario, problems: list):
    m = s.n_edges
    rows = len(s.control)
    if s.kind == "transport":
        for j, (t, h, _) in enumerate(s.edges):
            for end, name in ((t, "tail"), (h, "head")):
                if end > s.vertices:
                    problems.append((f"graph.edges.{j}.{name}", f"vertex {end} > {s.vertices}"))
        if rows != s.vertices:
            problems.append(("control.matrix", f"needs {s.vertices} rows, got {rows}"))
    else:
        if any(len(r) != m for r in s.coupling):
            problems.append(("coupling", "must be square"))
        if rows != m:
            problems.append(("control.matrix", f"needs {m} rows, got {rows}"))
    for key in ("velocity", "diffusivity", "absorption"):
        val = getattr(s, key)
        if isinstance(val, tuple) and len(val) != m:
            problems.append((f"params.{key}", f"needs {m} entries, got {len(val)}"))


def load_scenario(path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError([("", f"JSON parse error: {exc}")]) from exc
    except OSError as exc:
        raise ScenarioError([("", str(exc))]) from exc
    if not isinstance(data, dict):
        raise ScenarioError([("", "top level must be an object")])
    return validate_dict(data)


def _listify(x):
    if isinstance(x, tuple):
        return [_listify(v) for v in x]
    return x


def scenario_to_dict(s: Scenario) -> dict:
    d = {"kind": s.kind, "mode": s.mode, "tol": s.tol,
         "control": {"matrix": _listify(s.control), "positive": s.control_positive},
         "discretization": {"P": s.n_points, "K_max": s.k_max, "Q": s.n_velocity},
         "probe": {"mu_count": s.mu_count}}
    if s.name:
        d["name"] = s.name
    if s.mu_min is not None:
        d["probe"]["mu_min"] = s.mu_min
    if s.n_max is not None:
        d["probe"]["n_max"] = s.n_max
    params = {"absorption_sign": s.absorption_sign}
    if s.absorption is not None:
        params["absorption"] = _listify(s.absorption)
    if s.kind == "transport":
        d["graph"] = {"vertices": s.vertices, "kirchhoff": s.kirchhoff,
                      "edges": [{"tail": t, "head": h, "weight": w} for t, h, w in s.edges]}
        params["velocity"] = _listify(s.velocity)
    else:
        d["coupling"] = _listify(s.coupling)
        params["diffusivity"] = _listify(s.diffusivity)
    d["params"] = params
    return d


def write_scenario(s: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(s), indent=2, sort_keys=True) + "\n")


def bundled(name: str) -> Path:
    """Path of a scenario shipped with the package (``cycle3``, ``heat_path``)."""
    p = Path(__file__).with_name("scenarios") / f"{name}.json"
    if not p.exists():
        raise FileNotFoundError(p)
    return p


__all__ = ["SCHEMA", "Scenario", "ScenarioError", "validate_dict", "load_scenario",
           "scenario_to_dict", "write_scenario", "bundled"]
