"""Experiment configuration: INI-style ``key = value`` files with a fixed schema.

Unknown sections or keys and unparsable values raise ConfigError carrying the
offending line number.  The resolved config (defaults filled in) has a
canonical text form whose SHA-256 goes into every output header.
"""
import configparser
import hashlib
import math
import re

from .errors import ConfigError


def _float(s):
    return float(s)


def _int(s):
    return int(s)


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s):
    return tuple(float(x) for x in s.replace(",", " ").split())


def _str(s):
    return s.strip()


SCHEMA = {
    "modulus": {
        "family": (_str, "burgers"),     # burgers | sqg | beta | power | linear
        "K": (_float, 50.0),
        "delta": (_float, 0.1),
        "gamma": (_float, 0.05),
        "beta": (_float, 0.5),
        "alpha": (_float, 0.4),          # BetaCritical order
        "B": (_float, 1.0),
    },
    "nmp": {
        "alpha": (_float, 0.5),
        "flow": (_str, "burgers"),       # burgers | sqg-log | beta(b)
        "c_alpha": (_float, 1.0),
        "A": (_float, 1.0),
        "margin": (_float, 1e-6),
        "flow_multiplier": (_float, 2.0),
        "per_decade": (_int, 200),
        "grid_lo": (_float, 1e-6),       # in units of the modulus length scale
        "grid_hi": (_float, 1e4),
        "sweep_param": (_str, "K"),
        "sweep_lo": (_float, 13.0),
        "sweep_hi": (_float, 1000.0),
        "sweep_direction": (_str, "min"),
        "n_scan": (_int, 13),
        "rel_resolution": (_float, 1e-3),
    },
    "solver": {
        "velocity": (_str, "burgers"),
        "alpha": (_float, 0.5),
        "beta": (_float, 0.5),
        "dim": (_int, 1),
        "n": (_int, 1024),
        "L": (_float, math.pi),
        "dt": (_float, 1e-3),
        "T": (_float, 1.0),
        "scheme": (_str, "if_rk4"),
        "dealias": (_bool, True),
        "cfl_safety": (_float, 0.5),
        "initial": (_str, "sin"),        # sin | cos | bump | shear
        "amplitude": (_float, 1.0),
        "every": (_int, 10),
        "grad_factor": (_float, 50.0),
        "tail_threshold": (_float, 1e-4),
    },
    "blowup": {
        "alpha": (_float, 0.25),
        "c_alpha": (_float, 1.0),
        "c_split": (_float, 0.0),
        "h": (_float, 1e-4),
        "grid_n": (_int, 16384),
        "solver": (_str, "spectral"),
        "margin": (_float, 0.5),
        "grad_factor": (_float, 10.0),
        "flag_grad_factor": (_float, 50.0),
        "tail_threshold": (_float, 1e-4),
        "cfl_safety": (_float, 0.5),
        "kappa_cap": (_float, 1e6),
        "barrier_slack": (_float, 1e-10),
        "max_checkpoints": (_int, 0),    # 0 = no limit
    },
    "ccf": {
        "amplitude": (_float, 100.0),
        "alpha": (_float, 0.2),
        "delta": (_float, 0.1),
        "n": (_int, 16384),
        "L": (_float, math.pi),
        "T": (_float, 0.1),
        "dt": (_float, 1e-3),
        "every": (_int, 10),
        "tail_threshold": (_float, 1e-14),
        "grad_factor": (_float, 1e9),
        "profile": (_str, "flattop"),
        "order": (_int, 5),
        "width": (_float, 1.0),
        "cfl_safety": (_float, 1.0),
    },
    "rough": {
        "p": (_floats, (2.0,)),
        "C_inf": (_float, 1.0),
        "K": (_float, 50.0),
        "n": (_int, 2048),
        "width_cells": (_floats, (4.0,)),
        "T": (_float, 1.0),
        "t_min": (_float, 0.05),
        "C_check": (_float, 0.5),
        "tail_threshold": (_float, 1e-6),
        "timedep": (_bool, True),
    },
    "kernel": {
        "alphas": (_floats, (0.25, 0.4, 0.5)),
        "x_max": (_float, 100.0),
        "n": (_int, 1000),
    },
    "output": {
        "name": (_str, "run"),
    },
}


class ExperimentConfig:
    """Resolved configuration: ``cfg[section][key]`` with defaults filled in."""

    def __init__(self, values, source=""):
        self.values = values
        self.source = source

    def __getitem__(self, section):
        return self.values[section]

    def canonical(self):
        lines = []
        for sec in SCHEMA:
            lines.append(f"[{sec}]")
            for key in SCHEMA[sec]:
                lines.append(f"{key} = {_render(self.values[sec][key])}")
        return "\n".join(lines) + "\n"

    def digest(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def header_lines(self, version, command):
        out = [f"active_scalar_lab {version} {command}", f"config sha256 {self.digest()}"]
        out += [f"  {line}" for line in self.canonical().splitlines()]
        return out


def _render(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return "none"
    return str(v)


def _line_of(text, section, key=None):
    """1-based line where ``key`` appears inside ``section`` (or the section header)."""
    current = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"^\[([^\]]*)\]", line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return i
            continue
        if current == section and key is not None and "=" in line:
            if line.split("=", 1)[0].strip() == key:
                return i
    return None


def parse_config(text, source="<string>"):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), strict=True,
                                       interpolation=None, delimiters=("=",))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside any section", exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line", line) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], exc.lineno) from None
    if parser.defaults():
        raise ConfigError("a [DEFAULT] section is not allowed", _line_of(text, "DEFAULT"))
    values = {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]", _line_of(text, sec))
        for key, raw in parser.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", _line_of(text, sec, key))
            conv = SCHEMA[sec][key][0]
            try:
                values[sec][key] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}", _line_of(text, sec, key)) from None
    return ExperimentConfig(values, source)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), str(path))
