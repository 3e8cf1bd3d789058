"""Run configuration: a TOML file plus command-line overrides.

Every section and key is declared in ``SCHEMA``. Unknown keys are rejected,
values are type checked, and the component objects are built (and so
re-validated) on demand. Keys whose default is ``REQUIRED`` raise a
``ConfigError`` naming them when a command needs them.
"""

import copy
import json
import math
import re
import sys
from pathlib import Path

import numpy as np

from . import rng
from .bootstrap import METHODS, BootstrapConfig
from .concentration import SCENARIOS
from .errors import ConfigError, HindsightError
from .game import DGPOptions, GameDesign, ThetaParams
from .harness import ExperimentSpec
from .linalg import DEFAULT_ETA
from .moments import DEFAULT_INSTRUMENTS, LINKS

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

REQUIRED = object()

# section -> key -> (kind, default); "" is the top level.
SCHEMA = {
    "": {
        "seed": ("int", None),
        "output": ("str", "out"),
        "verbosity": ("int", 1),
    },
    "game": {
        "num_groups": ("int", 1),
        "group_size": ("int", 10),
        "group_sizes": ("int_list", None),
        "shift": ("float", -0.2),
        "selection": ("selection", "smallest"),
        "phi_limit": ("float", 2.0),
        "grid_points": ("int", 1024),
    },
    "theta": {
        "beta": ("float", REQUIRED),
        "phi": ("float", REQUIRED),
        "gamma": ("float", 1.0 / 3.0),
        "rho": ("float", 0.01),
        "tau": ("float", 0.01),
    },
    "bootstrap": {
        "B": ("int", 500),
        "level": ("float", 0.95),
        "epsilon_floor": ("float", 0.001),
        "method": ("method", "modified"),
        "ignore_regret": ("bool", False),
        "redraw": ("bool", False),
        "eta": ("float", DEFAULT_ETA),
        "link": ("str", "probit"),
        "instruments": ("str_list", list(DEFAULT_INSTRUMENTS)),
    },
    "inference": {
        "beta_grid": ("grid", None),
        "phi_grid": ("grid", None),
        "profile": ("str", "none"),
        "negligibility_threshold": ("float", 0.05),
    },
    "experiment": {
        "designs": ("design_list", [[10, 100]]),
        "phi0": ("float_list", [0.0]),
        "methods": ("method_list", ["benchmark", "modified"]),
        "reps": ("int", 500),
        "workers": ("int", 1),
        "nuisance_halfwidth": ("float", 1.0),
        "nuisance_points": ("int", 21),
    },
    "power": {
        "axis": ("str", "phi"),
        "values": ("grid", REQUIRED),
    },
    "mcdiarmid": {
        "scenarios": ("str_list", list(SCENARIOS)),
        "n": ("int", 100),
        "draws": ("int", 1_000_000),
        "rhos": ("float_list", [0.1, 0.01]),
    },
}

PROFILES = ("none", "phi", "beta")


def _normalize_method(name):
    return name.replace("-", "_")


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return (_is_int(v) or isinstance(v, float))


def _grid(v):
    if isinstance(v, dict):
        extra = set(v) - {"start", "stop", "num"}
        if extra or len(v) != 3:
            raise ValueError("a grid table needs exactly start, stop and num")
        if not (_is_num(v["start"]) and _is_num(v["stop"]) and _is_int(v["num"]) and v["num"] >= 1):
            raise ValueError("grid start/stop must be numbers and num a positive integer")
        return np.linspace(v["start"], v["stop"], v["num"]).tolist()
    if isinstance(v, list) and v and all(_is_num(x) for x in v):
        return [float(x) for x in v]
    raise ValueError("expected a nonempty list of numbers or {start, stop, num}")


def _coerce(kind, v):
    """Check ``v`` against ``kind``; return the normalized value."""
    if kind == "int":
        if _is_int(v):
            return v
        raise ValueError("expected an integer")
    if kind == "float":
        if _is_num(v) and math.isfinite(v):
            return float(v)
        raise ValueError("expected a finite number")
    if kind == "bool":
        if isinstance(v, bool):
            return v
        raise ValueError("expected true or false")
    if kind == "str":
        if isinstance(v, str):
            return v
        raise ValueError("expected a string")
    if kind == "selection":
        if v in ("smallest", "largest") or _is_int(v):
            return v
        raise ValueError("expected 'smallest', 'largest' or a root index")
    if kind == "method":
        if isinstance(v, str) and _normalize_method(v) in METHODS:
            return _normalize_method(v)
        raise ValueError(f"expected one of {', '.join(METHODS)}")
    if kind == "int_list":
        if isinstance(v, list) and v and all(_is_int(x) for x in v):
            return list(v)
        raise ValueError("expected a nonempty list of integers")
    if kind == "float_list":
        if isinstance(v, list) and v and all(_is_num(x) for x in v):
            return [float(x) for x in v]
        raise ValueError("expected a nonempty list of numbers")
    if kind == "str_list":
        if isinstance(v, list) and v and all(isinstance(x, str) for x in v):
            return list(v)
        raise ValueError("expected a nonempty list of strings")
    if kind == "method_list":
        return [_coerce("method", x) for x in _coerce("str_list", v)]
    if kind == "design_list":
        if isinstance(v, list) and v and all(
            isinstance(x, list) and len(x) == 2 and all(_is_int(y) for y in x) for x in v
        ):
            return [list(x) for x in v]
        raise ValueError("expected a list of [S, N_s] pairs")
    if kind == "grid":
        return _grid(v)
    raise AssertionError(kind)


def _line_of(text, section, key):
    """1-based line of ``key`` inside ``[section]``, or None."""
    if text is None:
        return None
    current = ""
    head = re.compile(r"^\s*\[([^\]]+)\]")
    for n, line in enumerate(text.splitlines(), start=1):
        m = head.match(line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return n
            continue
        if key is not None and current == section and re.match(rf"^\s*{re.escape(key)}\s*=", line):
            return n
    return None


class RunConfig:
    """Validated configuration values, keyed by section then key."""

    def __init__(self, values, source="<config>", text=None):
        self.source = str(source)
        self._text = text
        self.values = self._validate(values)
        self._check_components()

    @classmethod
    def load(cls, path):
        """Read a TOML config, or the resolved config inside a manifest.json."""
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
        if path.suffix == ".json":
            try:
                payload = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
            if not isinstance(payload, dict) or not isinstance(payload.get("config"), dict):
                raise ConfigError(f"{path}: not a manifest with a 'config' table")
            return cls(payload["config"], path)
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls(raw, path, text)

    def _where(self, section, key=None):
        line = _line_of(self._text, section, key)
        return f"{self.source}:{line}" if line else self.source

    def _validate(self, raw):
        out = {}
        top = {k: v for k, v in raw.items() if not isinstance(v, dict)}
        tables = {k: v for k, v in raw.items() if isinstance(v, dict)}
        for name, table in [("", top)] + sorted(tables.items()):
            if name not in SCHEMA:
                raise ConfigError(f"{self._where(name)}: unknown section [{name}]")
            fields = SCHEMA[name]
            section = {}
            for key, value in table.items():
                if key not in fields:
                    label = f"{name}.{key}" if name else key
                    raise ConfigError(f"{self._where(name, key)}: unknown key '{label}'")
                try:
                    section[key] = _coerce(fields[key][0], value)
                except ValueError as exc:
                    label = f"{name}.{key}" if name else key
                    raise ConfigError(f"{self._where(name, key)}: '{label}': {exc}") from None
            out[name] = section
        for name, fields in SCHEMA.items():
            section = out.setdefault(name, {})
            for key, (_, default) in fields.items():
                if key not in section and default is not REQUIRED:
                    section.setdefault(key, copy.deepcopy(default))
        return out

    def get(self, section, key):
        value = self.values[section].get(key, REQUIRED)
        if value is REQUIRED:
            label = f"{section}.{key}" if section else key
            raise ConfigError(f"{self._where(section)}: missing required key '{label}'")
        return value

    def with_overrides(self, seed=None, workers=None, reps=None, bootstrap=None, method=None,
                       out=None):
        """Copy with command-line values taking precedence over file values."""
        new = copy.copy(self)
        new.values = copy.deepcopy(self.values)
        v = new.values
        if seed is not None:
            v[""]["seed"] = rng.check_seed(seed)
        if workers is not None:
            v["experiment"]["workers"] = workers
        if reps is not None:
            v["experiment"]["reps"] = reps
        if bootstrap is not None:
            v["bootstrap"]["B"] = bootstrap
        if method is not None:
            method = _coerce("method", method)
            v["bootstrap"]["method"] = method
            v["experiment"]["methods"] = [method]
        if out is not None:
            v[""]["output"] = str(out)
        new._check_components()
        return new

    def _check_components(self):
        """Build every component whose inputs are present, so invalid values
        fail at load time rather than midway through a command."""
        builders = [self.design, self.dgp, self.bootstrap_config, self.profile]
        if self.values["power"].get("values") is not None:
            builders.append(self.power_axis)
        if "beta" in self.values["theta"]:
            builders += [lambda: self.theta(need_phi=False), self.experiment]
        for build in builders:
            try:
                build()
            except HindsightError as exc:
                if str(exc).startswith(self.source):
                    raise
                raise ConfigError(f"{self.source}: {exc}") from None

    def seed(self):
        """Seed from the config, else ``HINDSIGHT_SEED``, else 0."""
        seed = self.values[""].get("seed")
        if seed is None:
            seed = rng.seed_from_env(default=0)
        return rng.check_seed(seed)

    def resolved(self):
        """Plain dict of all values with the seed filled in; loadable by ``load``."""
        out = {}
        for section, table in self.values.items():
            clean = {k: v for k, v in table.items() if v is not None}
            if section:
                out[section] = clean
            else:
                out.update(clean)
        out["seed"] = self.seed()
        return out

    @property
    def output(self):
        return Path(self.values[""]["output"])

    @property
    def verbosity(self):
        return self.values[""]["verbosity"]

    # Component builders; each re-runs the component's own validation.

    def design(self):
        g = self.values["game"]
        sizes = g.get("group_sizes")
        if sizes is None:
            sizes = [g["group_size"]] * g["num_groups"]
        return GameDesign(tuple(sizes), self.seed())

    def dgp(self):
        g = self.values["game"]
        return DGPOptions(shift=g["shift"], phi_limit=g["phi_limit"], selection=g["selection"],
                          grid_points=g["grid_points"])

    def theta(self, need_phi=True):
        t = self.values["theta"]
        phi = self.get("theta", "phi") if need_phi else t.get("phi", 0.0)
        return ThetaParams(self.get("theta", "beta"), phi, t["gamma"], t["rho"], t["tau"])

    def bootstrap_config(self):
        b = self.values["bootstrap"]
        if not 0.0 < b["level"] < 1.0:
            raise ConfigError(f"{self._where('bootstrap', 'level')}: level must lie in (0, 1)")
        if b["link"] not in LINKS:
            raise ConfigError(f"{self._where('bootstrap', 'link')}: link must be one of {sorted(LINKS)}")
        return BootstrapConfig(
            B=b["B"], alpha=1.0 - b["level"], epsilon_floor=b["epsilon_floor"], method=b["method"],
            seed=rng.derive_seed(self.seed(), rng.MULTIPLIERS, 0), ignore_regret=b["ignore_regret"],
            redraw=b["redraw"], eta=b["eta"], link=b["link"], instruments=tuple(b["instruments"]),
        )

    def profile(self):
        p = self.values["inference"]["profile"]
        if p not in PROFILES:
            raise ConfigError(f"{self._where('inference', 'profile')}: profile must be one of {PROFILES}")
        return p

    def grids(self):
        """Beta and phi grids for inversion; a missing grid is the point in [theta]."""
        inf = self.values["inference"]
        betas = inf.get("beta_grid") or [self.get("theta", "beta")]
        phis = inf.get("phi_grid") or [self.get("theta", "phi")]
        return betas, phis

    def experiment(self):
        e, b, t, g = (self.values[s] for s in ("experiment", "bootstrap", "theta", "game"))
        return ExperimentSpec(
            designs=tuple(tuple(d) for d in e["designs"]), phi0=tuple(e["phi0"]),
            methods=tuple(e["methods"]), level=b["level"], reps=e["reps"], B=b["B"],
            beta0=self.get("theta", "beta"), gamma=t["gamma"], rho=t["rho"], tau=t["tau"],
            eta=b["eta"], epsilon_floor=b["epsilon_floor"], ignore_regret=b["ignore_regret"],
            redraw=b["redraw"], instruments=tuple(b["instruments"]), seed=self.seed(),
            workers=e["workers"], shift=g["shift"], selection=g["selection"],
            nuisance_halfwidth=e["nuisance_halfwidth"], nuisance_points=e["nuisance_points"],
            negligibility_threshold=self.values["inference"]["negligibility_threshold"],
        )

    def power_axis(self):
        p = self.values["power"]
        if p["axis"] not in ("phi", "beta"):
            raise ConfigError(f"{self._where('power', 'axis')}: axis must be 'phi' or 'beta'")
        return p["axis"], self.get("power", "values")


def default_config():
    return RunConfig({}, "<defaults>")

