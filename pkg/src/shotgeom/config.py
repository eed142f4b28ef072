"""Experiment configuration: an INI-style key/value file or JSON.

Sections and keys are listed in ``SCHEMA``.  A parsed config is
canonicalized (every key present, typed values) and round-trips through
both text forms without loss.
"""
from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass

from .configuration import fmt_real
from .errors import InvalidParameterError
from .functionals import FunctionalSpec
from .kernels import FieldSpec, RadialKernel, TokenKernel
from .process import MarkDistribution
from .testfunctions import TestFunction

REQUIRED = object()

# section -> key -> (type, default); types: int, float, str, "floats", "strs"
SCHEMA: dict[str, dict[str, tuple]] = {
    "run": {
        "seed": (int, REQUIRED),
        "out": (str, "out"),
        "budget": (float, 1e-3),
        "batches": (int, 25),
    },
    "field": {
        "kernel": (str, "radial"),
        "dim": (int, 2),
        "nu": (float, 0.5),
        "C": (float, 1.0),
        "outer": (str, "power"),
        "lam": (float, 23.0),
        "a": (float, 1.0),
        "gamma": (float, 1.0),
        "eps_tail": (float, 1e-8),
        "r_trunc": (float, 0.0),
        "marks": (str, "unit"),
        "values": ("floats", (1.0,)),
        "probs": ("floats", (1.0,)),
        "radius_lo": (float, 1.0),
        "radius_hi": (float, 1.0),
    },
    "functional": {
        "kind": (str, REQUIRED),
        "u": (float, 1.0),
        "k": (int, 1),
        "mode": (str, "infinite"),
        "h_grid": (float, 0.125),
        "supersample": (int, 4),
        "route": (str, "exact"),
        "quad_order": (int, 16),
        "score": (str, "count"),
        "test": (str, "bump"),
        "test_c": (float, 0.0),
        "test_w": (float, 1.0),
    },
    "window": {
        "sides": ("floats", ()),
        "volumes": ("floats", ()),
    },
    "sample": {
        "region": (str, "cube"),
        "extent": (float, 10.0),
    },
    "estimators": {
        "n": (int, 1000),
        "K": (int, 6),
        "block": (int, 0),
        "R_int": (float, 8.0),
        "side": (float, 0.0),
        "methods": ("strs", ("cov-series", "volume-integral")),
        "deltas": ("floats", (0.2, 0.1, 0.05, 0.025)),
        "n_origin": (int, 200000),
        "standardization": (str, "plug-in"),
    },
}


class ConfigError(InvalidParameterError):
    pass


def _convert(section: str, key: str, typ, raw):
    name = f"{section}.{key}"
    try:
        if typ == "floats":
            items = raw if isinstance(raw, (list, tuple)) else [s for s in str(raw).split(",") if s.strip()]
            return tuple(float(v) for v in items)
        if typ == "strs":
            items = raw if isinstance(raw, (list, tuple)) else str(raw).split(",")
            return tuple(str(v).strip() for v in items if str(v).strip())
        if typ is int:
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(raw)
            if isinstance(raw, bool):
                raise ValueError(raw)
            return int(str(raw).strip()) if isinstance(raw, str) else int(raw)
        if typ is float:
            if isinstance(raw, bool):
                raise ValueError(raw)
            return float(raw)
        return str(raw).strip()
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    """Canonical experiment configuration: ``{section: {key: value}}``."""

    data: dict

    @classmethod
    def from_mapping(cls, raw: dict) -> "ExperimentConfig":
        for section in raw:
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]")
        out = {}
        for section, keys in SCHEMA.items():
            given = dict(raw.get(section, {}))
            for key in given:
                if key not in keys:
                    raise ConfigError(f"unknown key {section}.{key}")
            sec = {}
            for key, (typ, default) in keys.items():
                if key in given:
                    sec[key] = _convert(section, key, typ, given[key])
                elif default is REQUIRED:
                    raise ConfigError(f"missing required field {section}.{key}")
                else:
                    sec[key] = default
            out[section] = sec
        cfg = cls(out)
        cfg.validate()
        return cfg

    @classmethod
    def from_ini(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as e:
            raise ConfigError(f"cannot parse config: {e}") from None
        return cls.from_mapping({s: dict(cp[s]) for s in cp.sections()})

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"cannot parse config: {e}") from None
        if not isinstance(raw, dict) or not all(isinstance(v, dict) for v in raw.values()):
            raise ConfigError("JSON config must map section names to objects")
        return cls.from_mapping(raw)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
        if text.lstrip().startswith("{"):
            return cls.from_json(text)
        return cls.from_ini(text)

    def to_dict(self) -> dict:
        return {s: {k: list(v) if isinstance(v, tuple) else v for k, v in sec.items()}
                for s, sec in self.data.items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_ini(self) -> str:
        lines = []
        for section, sec in self.data.items():
            lines.append(f"[{section}]")
            for key, v in sec.items():
                if isinstance(v, tuple):
                    txt = ", ".join(fmt_real(x) if isinstance(x, float) else x for x in v)
                elif isinstance(v, float):
                    txt = fmt_real(v)
                else:
                    txt = str(v)
                lines.append(f"{key} = {txt}")
            lines.append("")
        return "\n".join(lines)

    def with_overrides(self, section: str, **kw) -> "ExperimentConfig":
        raw = self.to_dict()
        raw[section].update(kw)
        return ExperimentConfig.from_mapping(raw)

    def __getitem__(self, section: str) -> dict:
        return self.data[section]

    def __eq__(self, other) -> bool:
        return isinstance(other, ExperimentConfig) and self.to_dict() == other.to_dict()

    # -- derived objects ---------------------------------------------------

    def validate(self) -> None:
        try:
            self.functional_spec()
            self.sizes()
        except ConfigError:
            raise
        except InvalidParameterError as e:
            raise ConfigError(str(e)) from None
        r = self["run"]
        if r["seed"] < 0 or r["seed"] >= 2 ** 64:
            raise ConfigError("run.seed must be an unsigned 64-bit integer")
        if not 0 <= r["budget"] < 1:
            raise ConfigError("run.budget must lie in [0, 1)")
        if r["batches"] < 2:
            raise ConfigError("run.batches must be at least 2")
        e = self["estimators"]
        if e["n"] < 2:
            raise ConfigError("estimators.n must be at least 2")
        bad = set(e["methods"]) - {"cov-series", "volume-integral"}
        if bad:
            raise ConfigError(f"unknown estimators.methods {sorted(bad)}")
        if self["sample"]["region"] not in ("cube", "ball"):
            raise ConfigError("sample.region must be cube or ball")
        if not self["sample"]["extent"] > 0:
            raise ConfigError("sample.extent must be positive")

    def mark_distribution(self) -> MarkDistribution:
        f = self["field"]
        if f["marks"] == "unit":
            return MarkDistribution()
        if f["marks"] == "amplitude":
            return MarkDistribution("amplitude", f["values"], f["probs"])
        if f["marks"] == "disc":
            return MarkDistribution.discs(f["radius_lo"], f["radius_hi"], f["values"], f["probs"])
        raise ConfigError(f"unknown field.marks {f['marks']!r}")

    def field_spec(self) -> FieldSpec:
        f = self["field"]
        if f["kernel"] == "token":
            kernel = TokenKernel(f["dim"])
        elif f["kernel"] == "radial":
            kernel = RadialKernel(f["nu"], f["C"], f["outer"], f["lam"], f["a"], f["gamma"],
                                  f["dim"], f["eps_tail"], f["r_trunc"] or None)
        else:
            raise ConfigError(f"unknown field.kernel {f['kernel']!r}")
        return FieldSpec(kernel, self.mark_distribution())

    def functional_spec(self) -> FunctionalSpec:
        g = self["functional"]
        if g["test"] == "bump":
            test = TestFunction.bump(g["test_c"], g["test_w"])
        elif g["test"] == "linear":
            test = TestFunction.linear()
        else:
            raise ConfigError(f"unknown functional.test {g['test']!r}")
        return FunctionalSpec(g["kind"], self.field_spec(), u=g["u"], test=test, k=g["k"],
                              mode=g["mode"], h_grid=g["h_grid"], supersample=g["supersample"],
                              route=g["route"], quad_order=g["quad_order"], score=g["score"])

    def sizes(self) -> list[float]:
        """Cube sides, from ``window.sides`` or ``window.volumes``."""
        w = self["window"]
        d = self["field"]["dim"]
        if w["sides"] and w["volumes"]:
            raise ConfigError("give window.sides or window.volumes, not both")
        if w["volumes"]:
            sides = []
            for v in w["volumes"]:
                a = round(v ** (1.0 / d))
                if a < 1 or not math.isclose(a ** d, v):
                    raise ConfigError(f"window volume {v} is not a cube of integer side")
                sides.append(float(a))
            return sides
        return [float(a) for a in w["sides"]]
