"""Run configuration: a sectioned ``key = value`` text format.

The grammar is the INI subset read by :mod:`configparser` (``#`` and ``;``
comments, no interpolation). Every key is typed by :data:`SCHEMA`; unknown
sections or keys are errors. Environment variables named
``QUASINEUTRAL_<SECTION>_<KEY>`` override file values.
"""

from __future__ import annotations

import configparser
import math
import os

from .errors import ConfigurationError

__all__ = [
    "SCHEMA",
    "ENV_PREFIX",
    "Config",
    "load_config",
    "parse_float_list",
    "build_equilibrium",
    "build_flow",
    "build_sim_config",
    "build_test_fields",
]

ENV_PREFIX = "QUASINEUTRAL_"


def parse_float_list(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    parts = [p for p in str(text).replace(",", " ").split() if p]
    if not parts:
        raise ValueError("empty list")
    return [float(p) for p in parts]


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _u64(text):
    v = int(str(text), 0)
    if not 0 <= v < 2**64:
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    return v


def _opt_float(text):
    return None if str(text).strip().lower() in ("", "none", "auto") else float(text)


SCHEMA = {
    "potential": {
        "class": str, "dim": int, "mass": float, "lambda": parse_float_list,
        "profile": str, "coefficient": float, "exponent": float, "shift": float,
        "coefficients": parse_float_list, "profile_points": int, "profile_extent": float,
    },
    "simulation": {
        "eps": float, "theta": float, "T": float, "particles": int, "seed": _u64,
        "grid_spacing": _opt_float, "dt_factor": float, "cfl": float,
        "deposition_order": int, "init_sigma": _opt_float, "init_delta": _opt_float,
        "bump_fraction": float, "sampler": str, "jobs": int, "chunk_size": int,
        "mode": str, "snapshot_every": int,
    },
    "flow": {"family": str, "omega0": float, "gamma": float},
    "diagnostics": {"cadence": int, "test_field_scale": float, "write_snapshots": _bool},
    "sweep": {"eps": parse_float_list},
}

_KEYS_LOWER = {s: {k.lower(): k for k in keys} for s, keys in SCHEMA.items()}


class Config:
    """Typed configuration values, ``config[section][key]``."""

    def __init__(self, sections=None):
        self.sections = {s: {} for s in SCHEMA}
        for sec, kv in (sections or {}).items():
            for k, v in kv.items():
                self.set(sec, k, v)

    def set(self, section, key, value):
        sec = section.strip().lower()
        if sec not in SCHEMA:
            raise ConfigurationError(f"unknown section [{section}]")
        name = _KEYS_LOWER[sec].get(key.strip().lower())
        if name is None:
            raise ConfigurationError(f"unknown key {key!r} in [{sec}]")
        try:
            self.sections[sec][name] = SCHEMA[sec][name](value)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"[{sec}] {name}: {exc}") from None

    def __getitem__(self, section):
        return self.sections[section]

    def get(self, section, key, default=None):
        return self.sections[section].get(key, default)

    def require(self, section, key):
        try:
            return self.sections[section][key]
        except KeyError:
            raise ConfigurationError(f"missing required key {key!r} in [{section}]") from None

    def echo(self) -> dict:
        """Plain-data copy used in manifests; ``Config(echo)`` rebuilds it."""
        return {s: dict(kv) for s, kv in self.sections.items() if kv}

    def render(self) -> str:
        lines = []
        for sec, kv in self.echo().items():
            lines.append(f"[{sec}]")
            for k, v in kv.items():
                if isinstance(v, list):
                    v = ", ".join(repr(x) for x in v)
                elif isinstance(v, float):
                    v = repr(v)
                lines.append(f"{k} = {v}")
            lines.append("")
        return "\n".join(lines)


def load_config(path=None, environ=None, text=None) -> Config:
    """Read a file (or ``text``) and apply environment overrides."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        if text is not None:
            parser.read_string(text)
        elif path is not None:
            with open(path) as fh:
                parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed configuration: {exc}") from None
    except OSError as exc:
        raise ConfigurationError(f"cannot read configuration: {exc}") from None
    cfg = Config()
    for sec in parser.sections():
        for key, value in parser.items(sec):
            cfg.set(sec, key, value)
    env = os.environ if environ is None else environ
    for name, value in sorted(env.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        sec, _, key = name[len(ENV_PREFIX):].partition("_")
        if not key:
            raise ConfigurationError(f"environment override {name} names no key")
        cfg.set(sec, key, value)
    return cfg


# -- builders ------------------------------------------------------------------

def build_equilibrium(cfg: Config):
    from . import equilibrium as E

    kind = cfg.require("potential", "class").strip().lower()
    m = cfg.require("potential", "mass")
    p = cfg["potential"]
    if kind == "isotropic":
        return E.solve_isotropic(m, p.get("dim", 2))
    if kind == "quadratic":
        return E.solve_quadratic(cfg.require("potential", "lambda"), m)
    if kind == "radial":
        dim = p.get("dim", 2)
        profile = p.get("profile", "power")
        if profile == "power":
            pot = E.RadialProfile.power(dim, p.get("coefficient", 1.0), p.get("exponent", 2.0))
        elif profile == "shifted_quadratic":
            pot = E.RadialProfile.shifted_quadratic(dim, p.get("coefficient", 1.0),
                                                    p.get("shift", 0.5))
        else:
            raise ConfigurationError(f"unknown radial profile {profile!r}")
        return E.solve_radial(pot, m)
    if kind == "convex1d":
        return E.solve_convex_1d(E.Convex1D.polynomial(cfg.require("potential", "coefficients")), m)
    raise ConfigurationError(f"unknown potential class {kind!r}")


def build_flow(cfg: Config, eq):
    from .fluid import limit_field

    f = cfg["flow"]
    return limit_field(eq.domain, f.get("family", "zero"), omega0=f.get("omega0", 0.0),
                       gamma=f.get("gamma", 0.0))


def build_sim_config(cfg: Config):
    from .kinetic import SimConfig

    s = dict(cfg["simulation"])
    if "eps" not in s:
        raise ConfigurationError("missing required key 'eps' in [simulation]")
    s.pop("snapshot_every", None)
    cadence = cfg.get("diagnostics", "cadence")
    if cadence is not None:
        s["cadence"] = cadence
    return SimConfig(**s)


def build_test_fields(cfg: Config, eq):
    from .diagnostics import default_test_fields

    scale = cfg.get("diagnostics", "test_field_scale", 0.5 * eq.domain.inradius)
    if not (scale > 0 and math.isfinite(scale)):
        raise ConfigurationError("test_field_scale must be positive")
    return default_test_fields(eq.dim, scale)
