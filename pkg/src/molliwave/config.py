"""Experiment configuration: INI-style files with named coefficient builders.

A config is a line-oriented key = value file with [section] headers.  Keys
are case-sensitive and validated against the target subcommand's schema;
unknown sections or keys are rejected before any computation runs.

Coefficients are given as named built-ins with comma-separated parameters:

    constant:1.0
    step:left=1.0,right=2.0,at=1.0
    bump:center=1.5,width=1.0,amplitude=1.0
    ramp:start=0.4,width=3.3,amplitude=1.0
    plateau:rise_start=1.9,rise_width=0.5,fall_start=3.3,fall_width=0.5,amplitude=1.0
    table:x=0 1 2|y=0 1 0

Every builder returns a vectorized evaluator plus its jump list (empty for
the smooth ones).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

__all__ = ["ConfigError", "ExperimentConfig", "build_coefficient",
           "SUBCOMMANDS"]


class ConfigError(Exception):
    """Config file rejected; the message names the offending key."""


def _smoothstep(u):
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


@dataclass(frozen=True)
class Coefficient:
    """A named built-in evaluator with its jump list."""

    spec: str
    evaluator: object
    jumps: tuple = ()

    def __call__(self, *args):
        return self.evaluator(*args)


def _parse_params(body: str, where: str) -> dict:
    params = {}
    if not body:
        return params
    for chunk in body.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "=" not in chunk:
            # positional shorthand for single-parameter builders
            params["value"] = chunk
            continue
        key, val = chunk.split("=", 1)
        params[key.strip()] = val.strip()
    return params


def build_coefficient(text: str, where: str = "coefficient") -> Coefficient:
    """Parse a coefficient description into an evaluator.

    Raises ConfigError with the location string on malformed input.
    """
    text = text.strip()
    name, _, body = text.partition(":")
    name = name.strip()
    params = _parse_params(body, where)

    def need(key, default=None):
        if key in params:
            try:
                return float(params[key])
            except ValueError:
                raise ConfigError("%s: parameter %r of %r is not a number"
                                  % (where, key, name))
        if default is not None:
            return default
        raise ConfigError("%s: builder %r needs parameter %r"
                          % (where, name, key))

    if name == "constant":
        c = need("value")
        return Coefficient(text, lambda *a, c=c: c * np.ones_like(
            np.asarray(a[0], dtype=float)))
    if name == "step":
        left = need("left")
        right = need("right")
        at = need("at")
        return Coefficient(
            text,
            lambda *a, l=left, r=right, at=at: np.where(
                np.asarray(a[0], dtype=float) > at, r, l),
            jumps=(at,))
    if name == "bump":
        center = need("center")
        width = need("width")
        amp = need("amplitude", 1.0)
        def ev(*a, c=center, w=width, amp=amp):
            s = (np.asarray(a[0], dtype=float) - c) / w
            out = np.zeros_like(s)
            inside = np.abs(s) < 1.0
            out[inside] = amp * np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
            return out
        return Coefficient(text, ev)
    if name == "ramp":
        start = need("start")
        width = need("width")
        amp = need("amplitude", 1.0)
        return Coefficient(
            text,
            lambda *a, s=start, w=width, amp=amp: amp * _smoothstep(
                (np.asarray(a[0], dtype=float) - s) / w))
    if name == "plateau":
        rs = need("rise_start")
        rw = need("rise_width")
        fs = need("fall_start")
        fw = need("fall_width")
        amp = need("amplitude", 1.0)
        def ev(*a, rs=rs, rw=rw, fs=fs, fw=fw, amp=amp):
            x = np.asarray(a[0], dtype=float)
            return amp * _smoothstep((x - rs) / rw) \
                * (1.0 - _smoothstep((x - fs) / fw))
        return Coefficient(text, ev)
    if name == "table":
        raw = text.partition(":")[2]
        parts = dict(p.split("=", 1) for p in raw.split("|") if "=" in p)
        try:
            xs = np.array([float(v) for v in parts["x"].replace(",", " ").split()])
            ys = np.array([float(v) for v in parts["y"].replace(",", " ").split()])
        except (KeyError, ValueError):
            raise ConfigError("%s: table builder needs x=...|y=..." % where)
        if len(xs) != len(ys) or len(xs) < 2:
            raise ConfigError("%s: table x and y need equal length >= 2" % where)
        return Coefficient(text, lambda *a, xs=xs, ys=ys: np.interp(
            np.asarray(a[0], dtype=float), xs, ys))
    raise ConfigError("%s: unknown coefficient builder %r" % (where, name))


# ---------------------------------------------------------------------------
# schemas
# ---------------------------------------------------------------------------

# section -> set of allowed keys; a trailing "*" entry allows numbered keys
# such as "1" or "1,2" (component indices)
SUBCOMMANDS = {
    "kernel": {
        "kernel": {"q", "radius", "resolution"},
        "output": {"dir", "prefix", "stride"},
    },
    "embed": {
        "kernel": {"q", "radius", "resolution"},
        "embed": {"f", "law", "zero_radius", "domain", "schedule", "grid"},
        "output": {"dir", "prefix", "stride"},
    },
    "growth": {
        "kernel": {"q", "radius", "resolution"},
        "embed": {"f", "law", "zero_radius", "domain", "schedule", "grid"},
        "growth": {"target", "region", "resolution"},
        "output": {"dir", "prefix", "stride"},
    },
    "characteristics": {
        "medium": {"c_left", "c_right", "interface"},
        "kernel": {"q", "radius", "resolution"},
        "trace": {"start", "epsilon", "schedule", "margin", "step",
                  "horizon", "extent"},
        "output": {"dir", "prefix", "stride"},
    },
    "solve": {
        "system": {"n", "r", "T", "X", "corner_dx", "corner_dt"},
        "speed": {"*"},
        "coupling": {"*"},
        "source": {"*"},
        "initial": {"*"},
        "boundary_matrix": {"*"},
        "boundary_data": {"*"},
        "grid": {"nx", "cfl", "nt"},
        "bound": {"base", "slope_margin"},
        "output": {"dir", "prefix", "stride"},
    },
    "picard": {
        "system": {"n", "r", "T", "X", "corner_dx", "corner_dt"},
        "speed": {"*"},
        "coupling": {"*"},
        "source": {"*"},
        "initial": {"*"},
        "boundary_matrix": {"*"},
        "boundary_data": {"*"},
        "grid": {"nx", "nt", "max_iter", "tol"},
        "output": {"dir", "prefix", "stride"},
    },
    "transmit": {
        "medium": {"c_left", "c_right", "interface"},
        "kernel": {"q", "radius", "resolution"},
        "problem": {"u0", "v0", "h", "b", "T", "X"},
        "regularization": {"schedule"},
        "grid": {"nx", "cfl"},
        "output": {"dir", "prefix", "stride"},
    },
    "associate": {
        "medium": {"c_left", "c_right", "interface"},
        "kernel": {"q", "radius", "resolution"},
        "problem": {"u0", "v0", "h", "b", "T", "X"},
        "regularization": {"schedule"},
        "grid": {"nx", "cfl"},
        "test_function": {"center", "radii", "amplitude", "tol_factor",
                          "slack"},
        "output": {"dir", "prefix", "stride"},
    },
}


@dataclass
class ExperimentConfig:
    """Validated key/value view of one experiment file."""

    subcommand: str
    sections: dict = field(default_factory=dict)

    def get(self, section: str, key: str, default=None, required=False):
        val = self.sections.get(section, {}).get(key)
        if val is None:
            if required:
                raise ConfigError("missing key %r in section [%s]" % (key, section))
            return default
        return val

    def get_float(self, section, key, default=None, required=False):
        val = self.get(section, key, default=None, required=required)
        if val is None:
            return default
        try:
            return float(val)
        except ValueError:
            raise ConfigError("key %r in section [%s] is not a number: %r"
                              % (key, section, val))

    def get_int(self, section, key, default=None, required=False):
        val = self.get(section, key, default=None, required=required)
        if val is None:
            return default
        try:
            return int(val)
        except ValueError:
            raise ConfigError("key %r in section [%s] is not an integer: %r"
                              % (key, section, val))

    def get_floats(self, section, key, default=None, required=False):
        val = self.get(section, key, default=None, required=required)
        if val is None:
            return default
        try:
            return tuple(float(v) for v in str(val).split())
        except ValueError:
            raise ConfigError("key %r in section [%s] is not a number list: %r"
                              % (key, section, val))

    def get_coefficient(self, section, key, default=None, required=False):
        val = self.get(section, key, default=None, required=required)
        if val is None:
            if default is None:
                return None
            val = default
        return build_coefficient(val, "[%s] %s" % (section, key))

    def indexed(self, section: str) -> dict:
        """All numbered keys of a section as {index-tuple: Coefficient}."""
        out = {}
        for key, val in self.sections.get(section, {}).items():
            parts = key.replace(" ", "").split(",")
            try:
                idx = tuple(int(p) for p in parts)
            except ValueError:
                raise ConfigError("key %r in section [%s] is not an index"
                                  % (key, section))
            out[idx] = build_coefficient(val, "[%s] %s" % (section, key))
        return out


def load_config(path: str, subcommand: str) -> ExperimentConfig:
    """Parse and validate one experiment file for the given subcommand."""
    if subcommand not in SUBCOMMANDS:
        raise ConfigError("unknown subcommand %r" % (subcommand,))
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError("cannot read config %r: %s" % (path, exc))
    except configparser.Error as exc:
        raise ConfigError("malformed config %r: %s" % (path, exc))

    schema = SUBCOMMANDS[subcommand]
    sections = {}
    for section in parser.sections():
        if section not in schema:
            raise ConfigError("unknown section [%s] for subcommand %r"
                              % (section, subcommand))
        allowed = schema[section]
        sections[section] = {}
        for key, val in parser.items(section):
            if "*" not in allowed and key not in allowed:
                raise ConfigError("unknown key %r in section [%s]"
                                  % (key, section))
            sections[section][key] = val
    return ExperimentConfig(subcommand=subcommand, sections=sections)
