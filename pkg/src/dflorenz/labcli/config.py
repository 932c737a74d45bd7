"""Experiment configuration: an INI file with one section per module.

Every key is ``section.key``; command-line ``--set section.key=value``
overrides the file.  Unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..errors import ConfigError
from ..flowint import IntegratorConfig
from ..model3d import ClassicalParams, LorenzParams
from ..skew4d import ClassicalModel, HybridModel, Mode, SkewParams

SUITES = (
    "validate",
    "return-map",
    "cones",
    "curves",
    "exponents",
    "sectional",
    "surgery",
    "classical-xcheck",
)


def _defaults(cls, skip=()):
    return {f.name: f.default for f in fields(cls) if f.name not in skip}


SCHEMA = {
    "run": {"seed": 20240517, "jobs": 1},
    "lorenz": _defaults(LorenzParams),
    "skew": {**_defaults(SkewParams, ("mode",)), "mode": Mode.SADDLE_NODE.value},
    "classical": {**_defaults(ClassicalParams), "theta": 2.0},
    "integrator": _defaults(IntegratorConfig, ("max_steps",)),
    "return-map": {"n_x1": 200, "n_x2": 200, "n_s": 5, "s_range": 0.5, "bins": 40},
    "cones": {
        "n_points": 10000,
        "alpha_in": 1.0,
        "alpha_out": 0.5,
        "lam_floor": 1.02,
        "near_l": 1e-3,
        "near_floor": 3.0,
        "n_near": 2000,
        "s_band": 0.01,
    },
    "curves": {"n_curves": 100, "length": 1e-3, "eps0": 0.2, "k_max": 200, "growth_floor": 1.02},
    "exponents": {"n_orbits": 10, "n_returns": 1000, "transient": 50, "t_window": 5.0, "mode": "saddle-node", "n_periods": 3},
    "sectional": {"n_orbits": 10, "T": 100.0, "w": 1.0, "transient": 50, "burn_in": 5, "n_periods": 80, "p_burn_in": 40},
    "surgery": {"kappa": 5.0, "deltas": "0, 0.05, 0.1"},
    "classical-xcheck": {"T": 1e4, "t_sample": 0.5, "transient": 100.0, "rel_tol_alt": 1e-8, "fd_step": 1e-6},
}


def _coerce(key, default, raw):
    if isinstance(raw, str):
        raw = raw.strip()
    try:
        if isinstance(default, bool):
            if isinstance(raw, bool):
                return raw
            low = str(raw).lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            v = float(raw)
            if v != int(v):
                raise ValueError(raw)
            return int(v)
        if isinstance(default, float):
            return float(raw)
        return str(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value {raw!r} for config key '{key}'", key) from None


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=lambda: {s: dict(kv) for s, kv in SCHEMA.items()})

    def get(self, section, key):
        return self.values[section][key]

    def section(self, name):
        return dict(self.values[name])

    def set(self, dotted: str, raw):
        sec, _, key = dotted.partition(".")
        if sec not in SCHEMA:
            raise ConfigError(f"unknown config section '{sec}' in '{dotted}'", dotted)
        if key not in SCHEMA[sec]:
            raise ConfigError(f"unknown config key '{key}' in section [{sec}]", key)
        self.values[sec][key] = _coerce(dotted, SCHEMA[sec][key], raw)

    @property
    def seed(self) -> int:
        return self.values["run"]["seed"]

    def lorenz(self) -> LorenzParams:
        return LorenzParams(**self.values["lorenz"])

    def skew(self, **over) -> SkewParams:
        kw = {**self.values["skew"], **over}
        try:
            kw["mode"] = Mode.parse(kw["mode"])
        except ValueError:
            raise ConfigError(f"invalid value {kw['mode']!r} for config key 'skew.mode'", "skew.mode") from None
        return SkewParams(**kw)

    def hybrid(self, **over) -> HybridModel:
        return HybridModel(self.lorenz(), self.skew(**over))

    def classical(self) -> ClassicalModel:
        c = self.values["classical"]
        return ClassicalModel(ClassicalParams(c["sigma"], c["rho"], c["beta"]), c["theta"])

    def integrator(self, **over) -> IntegratorConfig:
        try:
            return IntegratorConfig(**{**self.values["integrator"], **over})
        except ValueError as e:
            raise ConfigError(str(e), "integrator") from None

    def check(self):
        """Build every parameter bundle once so bad values fail early."""
        self.lorenz()
        self.skew()
        self.classical()
        self.integrator()
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer", "run.seed")
        return self

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str  # keep ear_B as written
        for sec, kv in self.values.items():
            cp[sec] = {k: _fmt(v) for k, v in kv.items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def load_config(path=None, overrides=()) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if path is not None:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e.strerror}", "config") from None
        try:
            cp.read_string(text, source=str(path))
        except configparser.Error as e:
            raise ConfigError(f"malformed config file {path}: {e}", "config") from None
        for sec in cp.sections():
            for key, raw in cp[sec].items():
                cfg.set(f"{sec}.{key}", raw)
    for item in overrides:
        key, eq, raw = item.partition("=")
        if not eq:
            raise ConfigError(f"override '{item}' is not of the form section.key=value", item)
        cfg.set(key.strip(), raw)
    return cfg.check()
