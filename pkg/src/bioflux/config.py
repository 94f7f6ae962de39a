"""Configuration files.

Line-oriented ``key = value`` pairs grouped under ``[section]`` headers;
``#`` and ``;`` start comments.  Recognised keys and defaults:

=====================  ==========================  =======================
section                key                         default
=====================  ==========================  =======================
[grid]                 nx, ny                      64, 64
                       Lx, Ly                      1.0, 1.0
[model]                m                           (required)
                       d                           2
                       K2                          1.0
                       c_O                         1.0
                       gamma                       unset (lambda_1/4)
[nonlinearity.chi]     kind                        constant
                       chi0, q, table              0.0, 1.0, -
[nonlinearity.k]       kind                        linear
                       kappa, q, table             1.0, 1.0, -
[nonlinearity.f]       kind                        zero
                       mu, a, b, cap, table        1.0, 0.0, 0.0, 1.0, -
[nonlinearity.phi]     kind                        linear
                       g, file                     0.0, -
[run]                  t_end                       1.0
                       dt_policy                   adaptive (or fixed)
                       dt                          - (required if fixed)
                       safety                      0.4
                       dt_max                      inf
                       tol                         1e-10
                       max_iter                    200
                       max_steps                   -
                       checkpoint_every            0 (steps)
                       diag_interval               0.0 (time; 0 = every step)
                       debug                       false
                       scenario                    rest_state
                       seed                        0
                       amplitude                   1.0
                       purpose                     existence
[output]               csv                         diagnostics.csv
                       pgm_every                   0 (samples; 0 = final only)
                       snapshot_dir                checkpoints
=====================  ==========================  =======================

Tables are written ``table = 0:0, 0.5:0.2, 1:1`` (``y:value`` pairs).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coupler import RunConfig
from .errors import BiofluxError, ConfigError, HypothesisError
from .grid import Grid
from .model import (Consumption, Growth, ModelParams, Potential, Purpose, Sensitivity, Table,
                    ValidationReport, admissible_gamma, validate_hypotheses)
from .scenarios import SCENARIOS

_FLOAT, _INT, _STR, _BOOL, _TABLE = "float", "int", "str", "bool", "table"

SCHEMA = {
    "grid": {"nx": _INT, "ny": _INT, "Lx": _FLOAT, "Ly": _FLOAT},
    "model": {"m": _FLOAT, "d": _INT, "K2": _FLOAT, "c_O": _FLOAT, "gamma": _FLOAT},
    "nonlinearity.chi": {"kind": _STR, "chi0": _FLOAT, "q": _FLOAT, "table": _TABLE},
    "nonlinearity.k": {"kind": _STR, "kappa": _FLOAT, "q": _FLOAT, "table": _TABLE},
    "nonlinearity.f": {"kind": _STR, "mu": _FLOAT, "a": _FLOAT, "b": _FLOAT, "cap": _FLOAT,
                       "table": _TABLE},
    "nonlinearity.phi": {"kind": _STR, "g": _FLOAT, "file": _STR},
    "run": {"t_end": _FLOAT, "dt_policy": _STR, "dt": _FLOAT, "safety": _FLOAT, "dt_max": _FLOAT,
            "tol": _FLOAT, "max_iter": _INT, "max_steps": _INT, "checkpoint_every": _INT,
            "diag_interval": _FLOAT, "debug": _BOOL, "scenario": _STR, "seed": _INT,
            "amplitude": _FLOAT, "purpose": _STR},
    "output": {"csv": _STR, "pgm_every": _INT, "snapshot_dir": _STR},
}


@dataclass
class OutputConfig:
    csv: str = "diagnostics.csv"
    pgm_every: int = 0
    snapshot_dir: str = "checkpoints"


@dataclass
class ScenarioConfig:
    name: str = "rest_state"
    seed: int = 0
    amplitude: float = 1.0


@dataclass
class Config:
    params: ModelParams
    grid: Grid
    run: RunConfig
    output: OutputConfig
    scenario: ScenarioConfig
    purpose: Purpose
    report: ValidationReport
    # (section, key) -> line number, for error reporting by callers
    lines: dict = field(default_factory=dict, repr=False)


def _convert(kind, raw, line):
    try:
        if kind == _FLOAT:
            return float(raw)
        if kind == _INT:
            v = float(raw)
            if v != int(v):
                raise ValueError
            return int(v)
        if kind == _BOOL:
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError
        if kind == _TABLE:
            pairs = []
            for item in raw.split(","):
                y, v = item.split(":")
                pairs.append((float(y), float(v)))
            return Table.from_pairs(pairs)
        return raw
    except (ValueError, TypeError):
        raise ConfigError(f"cannot read {raw!r} as {kind}", line) from None


def read_sections(text: str):
    """Parse into ``{section: {key: (value, line)}}``, rejecting unknown sections/keys."""
    sections: dict = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", lineno)
            current = line[1:-1].strip()
            if current not in SCHEMA:
                raise ConfigError(f"unknown section [{current}]", lineno)
            if current in sections:
                raise ConfigError(f"duplicate section [{current}]", lineno)
            sections[current] = {}
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if current is None:
            raise ConfigError("key outside of any section", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        kinds = SCHEMA[current]
        if key not in kinds:
            raise ConfigError(f"unknown key {key!r} in [{current}]", lineno)
        if key in sections[current]:
            raise ConfigError(f"duplicate key {key!r} in [{current}]", lineno)
        sections[current][key] = (_convert(kinds[key], value, lineno), lineno)
    return sections


def _section(sections, name):
    return {k: v for k, (v, _) in sections.get(name, {}).items()}


def _line(sections, name, key=None):
    sec = sections.get(name, {})
    if key is not None and key in sec:
        return sec[key][1]
    return min((ln for _, ln in sec.values()), default=None)


def _build(cls, kw, sections, name):
    try:
        return cls(**kw)
    except BiofluxError as exc:
        raise ConfigError(f"[{name}] {exc}", _line(sections, name)) from None
    except TypeError as exc:
        raise ConfigError(f"[{name}] {exc}", _line(sections, name)) from None


def parse_config(text: str, base_dir: str = ".") -> Config:
    """Parse and fully validate a configuration; every failure is a located :class:`ConfigError`."""
    secs = read_sections(text)

    gkw = _section(secs, "grid")
    grid = _build(Grid, {"nx": gkw.get("nx", 64), "ny": gkw.get("ny", 64),
                         "Lx": gkw.get("Lx", 1.0), "Ly": gkw.get("Ly", 1.0)}, secs, "grid")

    chi_kw = _section(secs, "nonlinearity.chi")
    chi = _build(Sensitivity, chi_kw, secs, "nonlinearity.chi")
    k = _build(Consumption, _section(secs, "nonlinearity.k"), secs, "nonlinearity.k")
    f = _build(Growth, _section(secs, "nonlinearity.f"), secs, "nonlinearity.f")
    phi_kw = _section(secs, "nonlinearity.phi")
    if "file" in phi_kw:
        import os
        path = os.path.join(base_dir, phi_kw.pop("file"))
        try:
            phi_kw["values"] = np.load(path)
        except OSError as exc:
            raise ConfigError(f"cannot load potential: {exc}", _line(secs, "nonlinearity.phi", "file")) from None
        phi_kw.setdefault("kind", "field")
    phi = _build(Potential, phi_kw, secs, "nonlinearity.phi")

    mkw = _section(secs, "model")
    if "m" not in mkw:
        # a missing section is reported at the end of the file
        raise ConfigError("[model] requires m", _line(secs, "model") or max(1, len(text.splitlines())))
    rkw = _section(secs, "run")
    try:
        purpose = Purpose(rkw.pop("purpose", "existence"))
    except ValueError:
        raise ConfigError("purpose must be 'existence' or 'attractor'", _line(secs, "run", "purpose")) from None
    requested = mkw.pop("gamma", None)
    mkw["gamma"] = admissible_gamma(grid, requested) if purpose is Purpose.ATTRACTOR or requested else 0.0
    params = _build(ModelParams, dict(mkw, chi=chi, k=k, f=f, phi=phi), secs, "model")
    if grid.shape and phi.kind == "field":
        try:
            phi.centers(grid)
        except BiofluxError as exc:
            raise ConfigError(str(exc), _line(secs, "nonlinearity.phi")) from None

    try:
        report = validate_hypotheses(params, purpose)
    except HypothesisError as exc:
        line = _line(secs, "nonlinearity.f") or _line(secs, "model", "m")
        raise ConfigError(str(exc), line) from None
    except BiofluxError as exc:
        raise ConfigError(str(exc), _line(secs, "nonlinearity.f")) from None

    scen = ScenarioConfig(rkw.pop("scenario", "rest_state"), rkw.pop("seed", 0), rkw.pop("amplitude", 1.0))
    if scen.name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scen.name!r}", _line(secs, "run", "scenario"))
    policy = rkw.pop("dt_policy", "fixed" if "dt" in rkw else "adaptive")
    if policy not in ("fixed", "adaptive"):
        raise ConfigError("dt_policy must be 'fixed' or 'adaptive'", _line(secs, "run", "dt_policy"))
    if policy == "fixed" and "dt" not in rkw:
        raise ConfigError("fixed dt_policy needs dt", _line(secs, "run", "dt_policy"))
    if policy == "adaptive":
        rkw.pop("dt", None)
    rkw.setdefault("dt_max", math.inf)
    run = _build(RunConfig, rkw, secs, "run")
    out = _build(OutputConfig, _section(secs, "output"), secs, "output")
    lines = {(s, k): ln for s, kv in secs.items() for k, (_, ln) in kv.items()}
    return Config(params, grid, run, out, scen, purpose, report, lines)


def load_config(path) -> Config:
    import os

    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), base_dir=os.path.dirname(os.path.abspath(path)))
