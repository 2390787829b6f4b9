"""Scenario configuration files (TOML)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .optimizer import Objective, OptimizationProblem, VariableBox
from .scenarios import Sweep, ballistic, derivative_bound, linear_system, spring_mass_damper
from .stepper import CostModel


class ConfigError(ValueError):
    """Bad or missing configuration value; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


IVPS = ("spring_mass_damper", "ballistic", "linear_system")
SEARCH_MODES = ("final", "all-steps")

_SECTIONS = {
    "scenario": {"ivp", "tf", "t0", "seed", "params", "matrix", "x0"},
    "sweep": {"name", "start", "stop", "count"},
    "optimize": {"epsilon", "objective", "k_range", "h_cap", "node_limit", "deriv_bound", "spectrum"},
    "box": {"mantissa", "exponent", "margin", "a0", "steps", "h"},
    "cost_model": set(CostModel().to_dict()),
    "search": {"mode", "maximize", "dim", "height_dim"},
    "tradeoff": {"caps"},
}


@dataclass
class ScenarioConfig:
    ivp: str
    params: dict = field(default_factory=dict)
    tf: float | None = None
    t0: float = 0.0
    sweep: Sweep | None = None
    seed: int = 0
    matrix: list | None = None
    x0: list | None = None
    epsilon: float | None = None
    objective: Objective = field(default_factory=Objective)
    k_range: tuple = (2, 3)
    h_cap: float | None = None
    node_limit: int = 1_000_000
    deriv_bound: dict | list | None = None
    spectrum: list | None = None
    box: VariableBox = field(default_factory=VariableBox)
    cost_model: CostModel = field(default_factory=CostModel)
    search_mode: str = "final"
    maximize: bool = False
    search_dim: int = 0
    height_dim: int = 1
    caps: tuple = ()

    def build_ivp(self):
        """``(ivp, candidates)`` for this scenario."""
        kw = dict(self.params)
        if self.tf is not None:
            kw["tf"] = self.tf
        try:
            if self.ivp == "spring_mass_damper":
                return spring_mass_damper(self.sweep, **kw)
            if self.ivp == "ballistic":
                return ballistic(self.sweep, **kw)
            return linear_system(self.matrix, self.x0, self.tf, self.t0, self.sweep,
                                 scale_name=self.sweep.name if self.sweep else "scale")
        except (TypeError, ValueError) as exc:
            raise ConfigError("scenario", str(exc)) from exc

    def problem(self, ivp=None, candidates=None) -> OptimizationProblem:
        if self.epsilon is None:
            raise ConfigError("optimize.epsilon", "required for optimization")
        if ivp is None:
            ivp, candidates = self.build_ivp()
        db = self.deriv_bound
        if db is None:
            # sampled from the exact solutions; valid for affine problems only
            orders = range(2, max(self.k_range) + 1)
            db = {o: derivative_bound(ivp, candidates, o) for o in orders}
        try:
            return OptimizationProblem(
                ivp, candidates, self.epsilon, db, self.objective, self.k_range, self.box,
                self.cost_model, self.h_cap,
                None if self.spectrum is None else np.asarray(self.spectrum, dtype=complex),
                self.node_limit)
        except ValueError as exc:
            raise ConfigError("optimize", str(exc)) from exc


def _pair(key, value, integral=False):
    if not (isinstance(value, list) and len(value) == 2):
        raise ConfigError(key, f"expected [low, high], got {value!r}")
    lo, hi = value
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(key, f"bounds must be numbers, got {v!r}")
        if integral and int(v) != v:
            raise ConfigError(key, f"bounds must be integers, got {v!r}")
    return (int(lo), int(hi)) if integral else (float(lo), float(hi))


def _number(key, value, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    if kind is int and int(value) != value:
        raise ConfigError(key, f"expected an integer, got {value!r}")
    return kind(value)


def parse(data: dict) -> ScenarioConfig:
    for section, body in data.items():
        if section not in _SECTIONS:
            raise ConfigError(section, "unknown section")
        if not isinstance(body, dict):
            raise ConfigError(section, "expected a table")
        for key in body:
            if key not in _SECTIONS[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")

    sc = data.get("scenario")
    if sc is None or "ivp" not in sc:
        raise ConfigError("scenario.ivp", "required")
    if sc["ivp"] not in IVPS:
        raise ConfigError("scenario.ivp", f"expected one of {IVPS}, got {sc['ivp']!r}")
    cfg = ScenarioConfig(ivp=sc["ivp"])
    params = sc.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("scenario.params", "expected a table")
    cfg.params = {k: _number(f"scenario.params.{k}", v) for k, v in params.items()}
    if "tf" in sc:
        cfg.tf = _number("scenario.tf", sc["tf"])
    if "t0" in sc:
        cfg.t0 = _number("scenario.t0", sc["t0"])
    if "seed" in sc:
        cfg.seed = _number("scenario.seed", sc["seed"], int)
    if cfg.ivp == "linear_system":
        for key in ("matrix", "x0", "tf"):
            if key not in sc:
                raise ConfigError(f"scenario.{key}", "required for linear_system")
        cfg.matrix, cfg.x0 = sc["matrix"], sc["x0"]

    sw = data.get("sweep")
    if sw is not None:
        for key in ("name", "start", "stop", "count"):
            if key not in sw:
                raise ConfigError(f"sweep.{key}", "required")
        try:
            cfg.sweep = Sweep(str(sw["name"]), _number("sweep.start", sw["start"]),
                              _number("sweep.stop", sw["stop"]),
                              _number("sweep.count", sw["count"], int))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("sweep", str(exc)) from exc

    op = data.get("optimize", {})
    if "epsilon" in op:
        cfg.epsilon = _number("optimize.epsilon", op["epsilon"])
        if not cfg.epsilon > 0:
            raise ConfigError("optimize.epsilon", "must be positive")
    if "objective" in op:
        try:
            cfg.objective = Objective.parse(str(op["objective"]))
        except ValueError as exc:
            raise ConfigError("optimize.objective", str(exc)) from exc
    if "k_range" in op:
        ks = op["k_range"]
        if not isinstance(ks, list) or not ks or any(_number("optimize.k_range", k, int) < 2 for k in ks):
            raise ConfigError("optimize.k_range", "expected a non-empty list of integers >= 2")
        cfg.k_range = tuple(sorted(set(int(k) for k in ks)))
    if "h_cap" in op:
        cfg.h_cap = _number("optimize.h_cap", op["h_cap"])
        if not cfg.h_cap > 0:
            raise ConfigError("optimize.h_cap", "must be positive")
    if "node_limit" in op:
        cfg.node_limit = _number("optimize.node_limit", op["node_limit"], int)
    if "deriv_bound" in op:
        db = op["deriv_bound"]
        if isinstance(db, dict):
            try:
                cfg.deriv_bound = {int(k): [float(x) for x in v] for k, v in db.items()}
            except (TypeError, ValueError) as exc:
                raise ConfigError("optimize.deriv_bound", "expected order = [values]") from exc
        elif isinstance(db, list):
            cfg.deriv_bound = [float(x) for x in db]
        else:
            raise ConfigError("optimize.deriv_bound", f"expected a table or list, got {db!r}")
    if "spectrum" in op:
        try:
            cfg.spectrum = [complex(*z) if isinstance(z, list) else complex(z) for z in op["spectrum"]]
        except TypeError as exc:
            raise ConfigError("optimize.spectrum", "expected numbers or [re, im] pairs") from exc

    bx = data.get("box", {})
    kw = {}
    for key in ("mantissa", "exponent", "margin", "a0", "steps"):
        if key in bx:
            kw[key] = _pair(f"box.{key}", bx[key], integral=True)
    if "h" in bx:
        h = bx["h"]
        if isinstance(h, list) and len(h) == 2 and h[1] == "inf":
            h = [h[0], math.inf]
        kw["h"] = _pair("box.h", h)
    cfg.box = VariableBox(**kw)

    cm = data.get("cost_model", {})
    try:
        cfg.cost_model = CostModel.from_dict({k: _number(f"cost_model.{k}", v, int) for k, v in cm.items()})
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("cost_model", str(exc)) from exc

    se = data.get("search", {})
    if "mode" in se:
        if se["mode"] not in SEARCH_MODES:
            raise ConfigError("search.mode", f"expected one of {SEARCH_MODES}, got {se['mode']!r}")
        cfg.search_mode = se["mode"]
    if "maximize" in se:
        if not isinstance(se["maximize"], bool):
            raise ConfigError("search.maximize", "expected true or false")
        cfg.maximize = se["maximize"]
    if "dim" in se:
        cfg.search_dim = _number("search.dim", se["dim"], int)
    if "height_dim" in se:
        cfg.height_dim = _number("search.height_dim", se["height_dim"], int)

    tr = data.get("tradeoff", {})
    if "caps" in tr:
        if not isinstance(tr["caps"], list):
            raise ConfigError("tradeoff.caps", "expected a list of qubit caps")
        cfg.caps = tuple(_number("tradeoff.caps", c, int) for c in tr["caps"])
    return cfg


def load(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc.strerror}") from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"not valid TOML: {exc}") from exc
    return parse(data)


def bundled(name: str) -> Path:
    """Path of a config shipped with the package (``spring_mass`` or ``ballistic``)."""
    ref = resources.files("qlmm") / "configs" / f"{name}.toml"
    with resources.as_file(ref) as path:
        return Path(path)
