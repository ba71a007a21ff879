"""JSON run configuration for the command-line tool.

Example::

    {
      "tf": {"num": [1], "den": [1, 3, 3, 1]},
      "nonlinearity": {"type": "sat", "k": 12},
      "T_grid": {"start": 0.2, "stop": 100, "num": 400, "spacing": "log"},
      "sim": {"step": 1e-3, "horizon": 200},
      "sweep": {"k": [8, 18, 35, 60], "target": "nonlinearity"}
    }

Unknown keys are rejected.  Errors carry the offending field and, where it
can be found, the line of the document it appears on.
"""

import json
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import InvalidArgumentError
from .linsys import TransferFunction
from .nonlin import SquarePreservingOp, StaticNonlinearity
from .predict import default_alpha_grid, default_T_grid
from .simulate import SimConfig

__all__ = ["ConfigError", "SystemSpec", "load_config", "parse_config"]

TOP_KEYS = {"tf", "nonlinearity", "n", "T_grid", "alpha_grid", "omega_grid", "T_init",
            "tol", "max_iter", "T", "sim", "sweep", "residual_warn", "csv_stride"}
SIM_KEYS = {"solver", "step", "horizon", "transient", "x0", "initial_output", "seed",
            "memory_window", "history", "rtol", "atol", "period_guess"}
T_DEPENDENT_TYPES = {"sat_delay", "delay"}


class ConfigError(ValueError):
    """Invalid configuration; `field` and `line` locate the problem."""

    def __init__(self, message, field=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.field = field
        self.line = line


@dataclass
class SystemSpec:
    """A validated run configuration."""

    tf: Optional[TransferFunction] = None
    nonlinearity: Optional[dict] = None
    n: int = 2048
    T_grid: np.ndarray = field(default_factory=default_T_grid)
    alpha_grid: np.ndarray = field(default_factory=default_alpha_grid)
    omega_grid: np.ndarray = field(default_factory=lambda: np.logspace(-2, 2, 1000))
    T_init: float = 10.0
    tol: Optional[float] = None
    max_iter: int = 60
    T: Optional[float] = None
    sim: SimConfig = field(default_factory=SimConfig)
    sweep_k: list = field(default_factory=list)
    sweep_target: str = "nonlinearity"
    residual_warn: float = 0.05
    csv_stride: int = 1

    @property
    def t_dependent(self):
        return self.nonlinearity is not None and \
            self.nonlinearity.get("type") in T_DEPENDENT_TYPES

    def build_nonlinearity(self, k=None):
        """The static map or operator, with `k` substituted if sweeping it."""
        entry = dict(self.nonlinearity)
        if k is not None and self.sweep_target == "nonlinearity":
            entry["k"] = k
        if entry.get("type") in T_DEPENDENT_TYPES:
            return SquarePreservingOp.from_config(entry)
        return StaticNonlinearity.from_config(entry)

    def build_plant(self, k=None):
        if k is not None and self.sweep_target == "plant":
            return self.tf.scaled(k)
        return self.tf


def _line_of(text, key):
    if text is None:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _grid(value, name, text):
    line = _line_of(text, name)
    if isinstance(value, list):
        try:
            g = np.array(value, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError("grid entries must be numbers", name, line) from None
    elif isinstance(value, dict):
        extra = set(value) - {"start", "stop", "num", "spacing"}
        if extra:
            raise ConfigError(f"unknown grid keys {sorted(extra)}", name, line)
        try:
            start, stop, num = float(value["start"]), float(value["stop"]), int(value["num"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError("grid needs numeric start, stop and num", name, line) from None
        spacing = value.get("spacing", "log")
        if spacing == "log":
            if start <= 0 or stop <= 0:
                raise ConfigError("log grid bounds must be positive", name, line)
            g = np.geomspace(start, stop, num)
        elif spacing == "linear":
            g = np.linspace(start, stop, num)
        else:
            raise ConfigError(f"spacing must be 'log' or 'linear', got {spacing!r}", name, line)
    else:
        raise ConfigError("grid must be a list or {start, stop, num}", name, line)
    if g.ndim != 1 or g.size < 2 or not np.all(np.isfinite(g)) or np.any(np.diff(g) <= 0):
        raise ConfigError("grid must hold at least two strictly increasing values", name, line)
    return g


def _number(value, name, text, kind=float, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", name, _line_of(text, name))
    v = kind(value)
    if positive and not v > 0:
        raise ConfigError(f"must be positive, got {v}", name, _line_of(text, name))
    return v


def parse_config(doc, text=None):
    """Validate a decoded JSON document into a :class:`SystemSpec`."""
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a JSON object", line=1)
    extra = set(doc) - TOP_KEYS
    if extra:
        key = sorted(extra)[0]
        raise ConfigError(f"unknown key (allowed: {', '.join(sorted(TOP_KEYS))})",
                          key, _line_of(text, key))
    spec = SystemSpec()
    if "tf" in doc:
        tf = doc["tf"]
        if not isinstance(tf, dict) or set(tf) != {"num", "den"}:
            raise ConfigError("tf must be {num: [...], den: [...]}", "tf", _line_of(text, "tf"))
        try:
            spec.tf = TransferFunction.from_config(tf)
        except (InvalidArgumentError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "tf", _line_of(text, "tf")) from None
    if "nonlinearity" in doc:
        entry = doc["nonlinearity"]
        line = _line_of(text, "nonlinearity")
        if not isinstance(entry, dict) or "type" not in entry:
            raise ConfigError("nonlinearity must be an object with a 'type'",
                              "nonlinearity", line)
        spec.nonlinearity = dict(entry)
        try:
            spec.build_nonlinearity()
        except (InvalidArgumentError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "nonlinearity", line) from None
    for name in ("T_grid", "alpha_grid", "omega_grid"):
        if name in doc:
            setattr(spec, name, _grid(doc[name], name, text))
    if np.any(spec.T_grid <= 0):
        raise ConfigError("periods must be positive", "T_grid", _line_of(text, "T_grid"))
    if np.any(spec.omega_grid <= 0):
        raise ConfigError("frequencies must be positive", "omega_grid",
                          _line_of(text, "omega_grid"))
    if "n" in doc:
        spec.n = _number(doc["n"], "n", text, int, positive=True)
        if spec.n < 8 or spec.n % 2:
            raise ConfigError("n must be even and >= 8", "n", _line_of(text, "n"))
    for name in ("T_init", "T", "residual_warn"):
        if name in doc:
            setattr(spec, name, _number(doc[name], name, text, positive=True))
    if doc.get("tol") is not None:
        spec.tol = _number(doc["tol"], "tol", text, positive=True)
    if "max_iter" in doc:
        spec.max_iter = _number(doc["max_iter"], "max_iter", text, int, positive=True)
    if "csv_stride" in doc:
        spec.csv_stride = _number(doc["csv_stride"], "csv_stride", text, int, positive=True)
    if "sim" in doc:
        sim = doc["sim"]
        line = _line_of(text, "sim")
        if not isinstance(sim, dict):
            raise ConfigError("sim must be an object", "sim", line)
        extra = set(sim) - SIM_KEYS
        if extra:
            key = sorted(extra)[0]
            raise ConfigError("unknown simulation key", f"sim.{key}", _line_of(text, key))
        try:
            spec.sim = SimConfig(**sim)
        except (InvalidArgumentError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "sim", line) from None
    if "sweep" in doc:
        sweep = doc["sweep"]
        line = _line_of(text, "sweep")
        if not isinstance(sweep, dict) or not set(sweep) <= {"k", "target"} \
                or not isinstance(sweep.get("k", []), list):
            raise ConfigError("sweep must be {k: [...], target: ...}", "sweep", line)
        try:
            spec.sweep_k = sorted(float(k) for k in sweep.get("k", []))
        except (TypeError, ValueError):
            raise ConfigError("sweep gains must be numbers", "sweep.k", line) from None
        spec.sweep_target = sweep.get("target", "nonlinearity")
        if spec.sweep_target not in ("nonlinearity", "plant"):
            raise ConfigError("target must be 'nonlinearity' or 'plant'", "sweep.target", line)
    return spec


def load_config(path):
    """Read and validate the JSON configuration at `path`."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})",
                          line=exc.lineno) from None
    return parse_config(doc, text)
