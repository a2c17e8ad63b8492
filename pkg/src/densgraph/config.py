"""Run configuration: a sectioned ``key = value`` text format with a strict schema.

Parsing keeps line numbers so every diagnostic points at the offending line.
Values are typed by the schema below; unknown sections or keys, non-finite
numbers and grids smaller than five nodes are rejected before any
computation starts.  ``--set section.key=value`` overrides from the command
line go through the same typing and validation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError


def _float(s):
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _int(s):
    return int(s, 10)


def _str(s):
    s = s.strip()
    if not s:
        raise ValueError("must not be empty")
    return s


def _floats(s):
    """Comma-separated reals; ';' separates axis pairs in bounds."""
    return [_float(t) for t in s.replace(";", ",").split(",") if t.strip()]


def _pair(s):
    v = _floats(s)
    if len(v) != 2 or not v[0] < v[1]:
        raise ValueError("expected 'a, b' with a < b")
    return tuple(v)


def _names(s):
    return [t.strip() for t in s.split(",") if t.strip()]


def _choice(*options):
    def parse(s):
        s = s.strip()
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s

    return parse


KINDS = ("constant", "expander", "shrinker", "translator", "singular_minimal", "radial_power")

SCHEMA = {
    "density": {
        "kind": _choice(*KINDS),
        "dependence": _choice("radial", "vertical", "horizontal"),
        "alpha": _float,
        "p": _float,
    },
    "problem": {
        "mode": _choice("vertical", "radial", "rotational"),
        "n": _int,
        "bounds": _floats,
        "nodes": _int,
        "lambda": _float,
        "boundary": _str,
        "theta_bounds": _pair,
        "phi_bounds": _pair,
        "initial_radius": _float,
        "orientation": _int,
        "apex": _float,
        "radius": _float,
        "steps": _int,
        "half_width": _float,
    },
    "solver": {"tol": _float, "max_iter": _int},
    "spectrum": {"tol": _float, "eig_tol": _float, "max_iter": _int},
    "calibration": {"trials": _int, "seed": _int, "base": _str, "nodes": _int,
                    "tol_area": _float},
    "output": {"directory": _str, "formats": _names},
}

REQUIRED = {"density": ("kind",), "problem": ("mode", "n", "lambda")}

DEFAULTS = {
    "density": {"dependence": None, "alpha": None, "p": None},
    "problem": {"nodes": 33, "boundary": "constant:0", "bounds": None, "theta_bounds": None,
                "phi_bounds": (0.0, math.pi / 2), "initial_radius": None, "orientation": 1,
                "apex": 0.0, "radius": 1.0, "steps": 2000, "half_width": None},
    "solver": {"tol": 1e-10, "max_iter": 50},
    "spectrum": {"tol": None, "eig_tol": 1e-9, "max_iter": 500},
    "calibration": {"trials": 50, "seed": 0, "base": None, "nodes": None, "tol_area": 1e-8},
    "output": {"directory": ".", "formats": ["mesh", "csv", "json"]},
}


@dataclass
class RunConfig:
    values: dict
    lines: dict = field(default_factory=dict)

    def __getitem__(self, section):
        return self.values[section]

    def get(self, section, key):
        return self.values[section][key]

    def line_of(self, section, key=None):
        return self.lines.get((section, key))


def _set(values, lines, section, key, raw, line):
    if section not in SCHEMA:
        raise ConfigError(f"unknown section [{section}]", line)
    if key not in SCHEMA[section]:
        raise ConfigError(f"unknown key '{key}' in [{section}]", line)
    try:
        values[section][key] = SCHEMA[section][key](raw)
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}: bad value {raw.strip()!r} ({exc})", line) from None
    lines[(section, key)] = line


def parse_config(text, overrides=()):
    """Parse config text; ``overrides`` are 'section.key=value' strings."""
    values = {s: dict(d) for s, d in DEFAULTS.items()}
    lines = {}
    seen = set()
    section = None
    for no, raw in enumerate(text.splitlines(), 1):
        s = raw.split("#", 1)[0].strip()
        if not s:
            continue
        if s.startswith("["):
            if not s.endswith("]"):
                raise ConfigError(f"malformed section header {s!r}", no)
            section = s[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", no)
            lines[(section, None)] = no
            continue
        if "=" not in s:
            raise ConfigError(f"expected 'key = value', got {s!r}", no)
        if section is None:
            raise ConfigError("key outside of any section", no)
        key, val = (t.strip() for t in s.split("=", 1))
        if (section, key) in seen:
            raise ConfigError(f"duplicate key '{key}' in [{section}]", no)
        seen.add((section, key))
        _set(values, lines, section, key, val, no)

    for ov in overrides:
        if "=" not in ov or "." not in ov.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {ov!r}")
        lhs, val = ov.split("=", 1)
        sec, key = lhs.strip().split(".", 1)
        seen.add((sec, key))
        _set(values, lines, sec, key, val, None)

    for sec, keys in REQUIRED.items():
        for k in keys:
            if (sec, k) not in seen:
                raise ConfigError(f"missing required key {sec}.{k}", lines.get((sec, None)))
    cfg = RunConfig(values, lines)
    validate(cfg)
    return cfg


def _check(cond, msg, cfg, sec, key):
    if not cond:
        raise ConfigError(msg, cfg.line_of(sec, key))


def validate(cfg):
    p = cfg["problem"]
    d = cfg["density"]
    _check(p["n"] in (1, 2), "problem.n must be 1 or 2", cfg, "problem", "n")
    _check(p["nodes"] >= 5, "problem.nodes must be at least 5", cfg, "problem", "nodes")
    _check(p["steps"] >= 10, "problem.steps must be at least 10", cfg, "problem", "steps")
    _check(p["orientation"] in (-1, 1), "problem.orientation must be 1 or -1", cfg,
           "problem", "orientation")
    if p["bounds"] is not None:
        b = p["bounds"]
        _check(len(b) == 2 * p["n"] and all(b[2 * k] < b[2 * k + 1] for k in range(p["n"])),
               f"problem.bounds needs {p['n']} increasing pairs", cfg, "problem", "bounds")
    if p["mode"] == "radial":
        _check(p["theta_bounds"] is not None, "radial mode needs problem.theta_bounds", cfg,
               "problem", "mode")
    if p["mode"] == "rotational":
        _check(p["radius"] > 0, "problem.radius must be positive", cfg, "problem", "radius")
    _check(d["kind"] != "singular_minimal" or d["alpha"] is not None,
           "singular_minimal needs density.alpha", cfg, "density", "kind")
    _check(d["kind"] != "radial_power" or d["p"] is not None,
           "radial_power needs density.p", cfg, "density", "kind")
    c = cfg["calibration"]
    _check(c["trials"] >= 0, "calibration.trials must be >= 0", cfg, "calibration", "trials")
    _check(0 <= c["seed"] < 2**64, "calibration.seed must be a 64-bit unsigned integer", cfg,
           "calibration", "seed")
    _check(c["nodes"] is None or c["nodes"] >= 5, "calibration.nodes must be at least 5", cfg,
           "calibration", "nodes")
    sp = cfg["spectrum"]
    _check(sp["max_iter"] >= 1, "spectrum.max_iter must be >= 1", cfg, "spectrum", "max_iter")
    _check(cfg["solver"]["max_iter"] >= 0, "solver.max_iter must be >= 0", cfg, "solver",
           "max_iter")
    for f in cfg["output"]["formats"]:
        _check(f in ("mesh", "csv", "json"), f"unknown output format {f!r}", cfg, "output",
               "formats")
    bnd = p["boundary"]
    _check(bnd.split(":", 1)[0] in ("constant", "fixture", "file") and ":" in bnd,
           "problem.boundary must be constant:<value>, fixture:<name> or file:<path>", cfg,
           "problem", "boundary")
    if bnd.startswith("constant:"):
        try:
            _float(bnd.split(":", 1)[1])
        except ValueError:
            raise ConfigError("problem.boundary constant must be a finite number",
                              cfg.line_of("problem", "boundary")) from None


def load_config(path, overrides=()):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), overrides)
