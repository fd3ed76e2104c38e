"""Scenario files: YAML parsing with defaults, validation, serialization."""

from __future__ import annotations

import copy
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .bvp import CASE_IDS, BoundaryCase, Scenario, SolverConfig
from .errors import ScenarioError
from .manifolds import MANIFOLD_NAMES, circle_target, latitude_target, manifold_by_name
from .potentials import COLLISION_FORMS, CollisionSpec, ObstacleSpec, PotentialBundle
from .variational import ProblemParams

TOP_KEYS = {"name", "manifold", "agents", "boundary_case", "target", "potentials", "kappa", "T", "solver"}
SOLVER_DEFAULTS = {
    "grid_points": 101,
    "newton_tol": 1e-8,
    "max_iters": 50,
    "continuation_steps": 5,
    "seed": 42,
}
DEFAULT_COLLISION_FORM = {"euclidean": "inverse_distance", "se2": "se2_squared", "sphere2": "sphere_inverse_dsq"}
CONFIG_OBSTACLE_KINDS = ("planar_disc", "sphere_cap")


@dataclass
class ScenarioFile:
    """Normalized scenario data with every default filled in."""

    name: str
    manifold: dict
    agents: list
    boundary_case: str
    target: Optional[dict] = None
    potentials: dict = field(default_factory=lambda: {"obstacles": [], "collision": {}})
    kappa: float = 0.0
    T: float = 1.0
    solver: dict = field(default_factory=lambda: dict(SOLVER_DEFAULTS))

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["target"] is None:
            del d["target"]
        return d

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def _num(value, path) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"expected a number, got {value!r}", path)
    if not np.isfinite(value):
        raise ScenarioError("value must be finite", path)
    return float(value)


def _int(value, path) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"expected an integer, got {value!r}", path)
    return int(value)


def _vec(value, length, path) -> list:
    if not isinstance(value, (list, tuple)):
        raise ScenarioError(f"expected a list of {length} numbers", path)
    if len(value) != length:
        raise ScenarioError(f"expected {length} entries, got {len(value)}", path)
    return [_num(v, f"{path}[{k}]") for k, v in enumerate(value)]


def _mapping(value, path) -> dict:
    if not isinstance(value, dict):
        raise ScenarioError("expected a mapping", path)
    return value


def _no_extra(d: dict, allowed, path: str):
    extra = sorted(map(str, set(d) - set(allowed)))
    if extra:
        where = extra[0] if path == "<root>" else f"{path}.{extra[0]}"
        raise ScenarioError(f"unknown key(s) {', '.join(extra)}", where)


def normalize(data: Any, name: str = "scenario") -> ScenarioFile:
    """Validate a raw mapping and fill in defaults."""
    data = _mapping(data, "<root>")
    _no_extra(data, TOP_KEYS, "<root>")
    for key in ("manifold", "agents", "boundary_case"):
        if key not in data:
            raise ScenarioError("missing required key", key)

    man = _mapping(data["manifold"], "manifold")
    _no_extra(man, {"name", "params"}, "manifold")
    mname = man.get("name")
    if mname not in MANIFOLD_NAMES:
        raise ScenarioError(f"unknown manifold {mname!r}; expected one of {', '.join(MANIFOLD_NAMES)}", "manifold.name")
    mparams = dict(_mapping(man.get("params") or {}, "manifold.params"))
    if mname == "euclidean":
        _no_extra(mparams, {"dim"}, "manifold.params")
        mparams = {"dim": _int(mparams.get("dim", 2), "manifold.params.dim")}
        if mparams["dim"] < 1:
            raise ScenarioError("dim must be >= 1", "manifold.params.dim")
        dim = mparams["dim"]
    elif mname == "se2":
        _no_extra(mparams, {"mass", "inertia"}, "manifold.params")
        mparams = {k: _num(mparams.get(k, 1.0), f"manifold.params.{k}") for k in ("mass", "inertia")}
        for k, v in mparams.items():
            if v <= 0:
                raise ScenarioError("must be positive", f"manifold.params.{k}")
        dim = 3
    else:
        _no_extra(mparams, set(), "manifold.params")
        dim = 2

    case = data["boundary_case"]
    if case not in CASE_IDS:
        raise ScenarioError(f"unknown boundary case {case!r}; expected one of {', '.join(CASE_IDS)}", "boundary_case")

    agents_raw = data["agents"]
    if not isinstance(agents_raw, list) or not agents_raw:
        raise ScenarioError("expected a non-empty list of agents", "agents")
    agents = []
    for i, a in enumerate(agents_raw):
        p = f"agents[{i}]"
        a = _mapping(a, p)
        _no_extra(a, {"p0", "v0", "pT", "vT"}, p)
        needed = ["p0", "v0"]
        if case in ("fixed_endpoint_tangent_velocity", "fully_clamped"):
            needed.append("pT")
        if case == "fully_clamped":
            needed.append("vT")
        for key in needed:
            if key not in a:
                raise ScenarioError(f"required for boundary case {case}", f"{p}.{key}")
        agents.append({k: _vec(a[k], dim, f"{p}.{k}") for k in ("p0", "v0", "pT", "vT") if k in a})

    target = None
    if case != "fully_clamped":
        if "target" not in data or data["target"] is None:
            raise ScenarioError(f"required for boundary case {case}", "target")
        t = _mapping(data["target"], "target")
        if "theta0" in t:
            _no_extra(t, {"theta0"}, "target")
            if mname != "sphere2":
                raise ScenarioError("latitude targets need the sphere2 manifold", "target.theta0")
            target = {"theta0": _num(t["theta0"], "target.theta0")}
        else:
            _no_extra(t, {"center", "radius"}, "target")
            if "center" not in t or "radius" not in t:
                raise ScenarioError("expected center and radius, or theta0", "target")
            if dim < 2:
                raise ScenarioError("circle targets need at least two coordinates", "target")
            target = {"center": _vec(t["center"], 2, "target.center"), "radius": _num(t["radius"], "target.radius")}
            if target["radius"] <= 0:
                raise ScenarioError("must be positive", "target.radius")
    elif data.get("target") is not None:
        raise ScenarioError("not used by boundary case fully_clamped", "target")

    pots = _mapping(data.get("potentials") or {}, "potentials")
    _no_extra(pots, {"obstacles", "collision"}, "potentials")
    obstacles = []
    obs_raw = pots.get("obstacles") or []
    if not isinstance(obs_raw, list):
        raise ScenarioError("expected a list", "potentials.obstacles")
    for k, o in enumerate(obs_raw):
        p = f"potentials.obstacles[{k}]"
        o = _mapping(o, p)
        kind = o.get("kind")
        if kind not in CONFIG_OBSTACLE_KINDS:
            raise ScenarioError(f"unknown obstacle kind {kind!r}", f"{p}.kind")
        tau = _num(o.get("tau", 1.0), f"{p}.tau")
        if tau <= 0:
            raise ScenarioError("must be positive", f"{p}.tau")
        if kind == "planar_disc":
            _no_extra(o, {"kind", "center", "radius", "tau"}, p)
            if dim < 2:
                raise ScenarioError("planar_disc needs at least two coordinates", p)
            for key in ("center", "radius"):
                if key not in o:
                    raise ScenarioError("missing required key", f"{p}.{key}")
            radius = _num(o["radius"], f"{p}.radius")
            if radius < 0:
                raise ScenarioError("must be non-negative", f"{p}.radius")
            obstacles.append({"kind": kind, "center": _vec(o["center"], 2, f"{p}.center"), "radius": radius, "tau": tau})
        else:
            _no_extra(o, {"kind", "theta_cap", "tau"}, p)
            if mname != "sphere2":
                raise ScenarioError("sphere_cap needs the sphere2 manifold", f"{p}.kind")
            if "theta_cap" not in o:
                raise ScenarioError("missing required key", f"{p}.theta_cap")
            obstacles.append({"kind": kind, "theta_cap": _num(o["theta_cap"], f"{p}.theta_cap"), "tau": tau})

    col = _mapping(pots.get("collision") or {}, "potentials.collision")
    _no_extra(col, {"sigma", "d", "form"}, "potentials.collision")
    form = col.get("form", DEFAULT_COLLISION_FORM[mname])
    if form not in COLLISION_FORMS:
        raise ScenarioError(f"unknown collision form {form!r}", "potentials.collision.form")
    collision = {
        "sigma": _num(col.get("sigma", 0.0), "potentials.collision.sigma"),
        "d": _num(col.get("d", 0.0), "potentials.collision.d"),
        "form": form,
    }
    for key in ("sigma", "d"):
        if collision[key] < 0:
            raise ScenarioError("must be non-negative", f"potentials.collision.{key}")

    kappa = _num(data.get("kappa", 0.0), "kappa")
    if kappa < 0:
        raise ScenarioError("must be non-negative", "kappa")
    T = _num(data.get("T", 1.0), "T")
    if T <= 0:
        raise ScenarioError("must be positive", "T")

    solver_raw = _mapping(data.get("solver") or {}, "solver")
    _no_extra(solver_raw, SOLVER_DEFAULTS, "solver")
    solver = dict(SOLVER_DEFAULTS)
    for key, val in solver_raw.items():
        conv = _num if key == "newton_tol" else _int
        solver[key] = conv(val, f"solver.{key}")
    gp = solver["grid_points"]
    if gp < 51 or gp % 2 == 0:
        raise ScenarioError("must be an odd integer >= 51", "solver.grid_points")
    for key in ("newton_tol", "max_iters", "continuation_steps"):
        if solver[key] <= 0:
            raise ScenarioError("must be positive", f"solver.{key}")

    sname = data.get("name", name)
    if not isinstance(sname, str) or not re.fullmatch(r"[A-Za-z0-9_.-]+", sname):
        raise ScenarioError("must be a simple identifier", "name")

    return ScenarioFile(
        name=sname,
        manifold={"name": mname, "params": mparams},
        agents=agents,
        boundary_case=case,
        target=target,
        potentials={"obstacles": obstacles, "collision": collision},
        kappa=kappa,
        T=T,
        solver=solver,
    )


def parse_scenario(path) -> ScenarioFile:
    """Read and validate a YAML (or JSON) scenario file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ScenarioError(f"syntax error: {getattr(exc, 'problem', exc)}", line=line) from exc
    return normalize(data, name=path.stem)


def set_key(sf: ScenarioFile, key: str, value) -> ScenarioFile:
    """Copy of ``sf`` with a dotted key such as ``potentials.obstacles[0].tau`` replaced."""
    data = copy.deepcopy(sf.to_dict())
    tokens = re.findall(r"[^.\[\]]+|\[\d+\]", key)
    if not tokens:
        raise ScenarioError("empty key", key)
    node = data
    for tok in tokens[:-1]:
        node = _step(node, tok, key)
    last = tokens[-1]
    if last.startswith("["):
        idx = int(last[1:-1])
        if not isinstance(node, list) or idx >= len(node):
            raise ScenarioError("index out of range", key)
        node[idx] = value
    else:
        if not isinstance(node, dict) or (last not in node and node is not data.get("solver")):
            raise ScenarioError("no such key", key)
        node[last] = value
    return normalize(data, name=sf.name)


def _step(node, tok, key):
    if tok.startswith("["):
        idx = int(tok[1:-1])
        if not isinstance(node, list) or idx >= len(node):
            raise ScenarioError("index out of range", key)
        return node[idx]
    if not isinstance(node, dict) or tok not in node:
        raise ScenarioError("no such key", key)
    return node[tok]


def build_scenario(sf: ScenarioFile) -> Scenario:
    """Runtime objects for a normalized scenario."""
    spec = manifold_by_name(sf.manifold["name"], sf.manifold["params"])
    col = sf.potentials["collision"]
    obstacles = []
    for o in sf.potentials["obstacles"]:
        if o["kind"] == "planar_disc":
            obstacles.append(ObstacleSpec("planar_disc", o["tau"], center=tuple(o["center"]), radius=o["radius"]))
        else:
            obstacles.append(ObstacleSpec("sphere_cap", o["tau"], theta_cap=o["theta_cap"]))
    bundle = PotentialBundle(tuple(obstacles), CollisionSpec(col["sigma"], col["d"], col["form"]))

    def stack(key):
        if all(key in a for a in sf.agents):
            return np.array([a[key] for a in sf.agents], dtype=float)
        return None

    target = None
    if sf.target is not None:
        if "theta0" in sf.target:
            target = latitude_target(sf.target["theta0"])
        else:
            target = circle_target(sf.target["center"], sf.target["radius"])
    boundary = BoundaryCase(sf.boundary_case, stack("p0"), stack("v0"), stack("pT"), stack("vT"), target)
    s = sf.solver
    solver = SolverConfig(
        grid_points=s["grid_points"],
        newton_tol=s["newton_tol"],
        max_iters=s["max_iters"],
        continuation_steps=s["continuation_steps"],
        seed=s["seed"],
    )
    return Scenario(spec, bundle, ProblemParams(sf.kappa, sf.T), boundary, solver, sf.name)


def fixture_path(name: str) -> Path:
    """Path of a scenario shipped with the package (e.g. ``"se2_two_agents"``)."""
    return Path(__file__).parent / "scenarios" / f"{name}.yaml"
