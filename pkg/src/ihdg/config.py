"""Plain ``key = value`` experiment configuration files."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

from .flux import KINDS
from .models import EXPERIMENTS
from .solver import STAGNATION, SUCCESSIVE
from .timestep import BACKWARD_EULER, CRANK_NICOLSON

DT_RULES = ("fixed", "h", "h-phi")
TIME_EXPERIMENTS = ("shallow-standing-wave", "contaminant")
ORDERS = ("natural", "reversed")


class ConfigError(ValueError):
    """Configuration problem with an optional ``line:column`` location."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None,
                 source: str = "<config>"):
        self.message, self.line, self.column, self.source = message, line, column, source
        where = f"{source}:{line}:{column}: " if line is not None else f"{source}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    cells: tuple = (4,)
    p: int = 1
    flux: str = "upwind"
    kappa: Optional[float] = None
    nu: Optional[float] = None
    Phi: float = 1.0
    gamma_stab: float = 1.0
    dt_rule: str = "fixed"
    dt: Optional[float] = None
    n_steps: int = 10
    time_scheme: str = CRANK_NICOLSON
    warm_start: bool = True
    criterion: Optional[str] = None  # None: stagnation if an exact solution exists
    tol: float = 1e-10
    max_iter: int = 10000
    element_order: str = "natural"
    face_order: str = "natural"
    output: str = "."
    seed: int = 0

    @property
    def is_time_dependent(self) -> bool:
        return self.experiment in TIME_EXPERIMENTS


def _cells(text: str) -> tuple:
    parts = text.lower().split("x")
    vals = tuple(int(s) for s in parts)
    if any(v < 1 for v in vals):
        raise ValueError("cell counts must be positive")
    return vals


def _bool(text: str) -> bool:
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _choice(options):
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}; got {text!r}")
        return text
    return parse


def _positive(kind):
    def parse(text: str):
        v = kind(text)
        if not v > 0:
            raise ValueError(f"must be positive, got {text}")
        return v
    return parse


PARSERS = {
    "experiment": _choice(tuple(EXPERIMENTS)),
    "cells": _cells,
    "p": _positive(int),
    "flux": _choice(KINDS),
    "kappa": _positive(float),
    "nu": float,
    "Phi": _positive(float),
    "gamma_stab": _positive(float),
    "dt_rule": _choice(DT_RULES),
    "dt": _positive(float),
    "n_steps": int,
    "time_scheme": _choice((BACKWARD_EULER, CRANK_NICOLSON)),
    "warm_start": _bool,
    "criterion": _choice((SUCCESSIVE, STAGNATION)),
    "tol": _positive(float),
    "max_iter": _positive(int),
    "element_order": _choice(ORDERS),
    "face_order": _choice(ORDERS),
    "output": str,
    "seed": int,
}


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Raises
    ------
    ConfigError
        Unknown or repeated keys, malformed values and inconsistent
        combinations, located by line and column.
    """
    values, where = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        if "=" not in line:
            col = len(line) - len(line.lstrip()) + 1
            raise ConfigError("expected 'key = value'", lineno, col, source)
        key_part, val_part = line.split("=", 1)
        key = key_part.strip()
        key_col = len(key_part) - len(key_part.lstrip()) + 1
        val_col = len(key_part) + 2 + len(val_part) - len(val_part.lstrip())
        if key not in PARSERS:
            raise ConfigError(f"unknown key {key!r}", lineno, key_col, source)
        if key in values:
            raise ConfigError(f"key {key!r} given twice", lineno, key_col, source)
        val = val_part.strip()
        try:
            values[key] = PARSERS[key](val)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", lineno, val_col, source) from None
        where[key] = (lineno, val_col)
    if "experiment" not in values:
        raise ConfigError("missing required key 'experiment'", source=source)
    try:
        cfg = ExperimentConfig(**values)
        validate(cfg)
    except ConfigError as exc:
        key = getattr(exc, "key", None)
        if key in where:
            raise ConfigError(exc.message, *where[key], source) from None
        raise
    return cfg


def _fail(message: str, key: str) -> ConfigError:
    err = ConfigError(message)
    err.key = key
    return err


def validate(cfg: ExperimentConfig) -> None:
    """Cross-key consistency checks."""
    exp = cfg.experiment
    d = 2 if exp in ("transport2d-discont", "shallow-standing-wave") else 3
    if len(cfg.cells) not in (1, d):
        raise _fail(f"{exp} is {d}-D; give one cell count or {d} of them", "cells")
    if exp.startswith("transport") and cfg.flux == "elliptic-tau":
        raise _fail("elliptic-tau applies to convection-diffusion only", "flux")
    if exp == "shallow-standing-wave" and cfg.flux != "upwind":
        raise _fail(f"flux {cfg.flux!r} is not available for shallow water", "flux")
    if cfg.is_time_dependent and cfg.dt_rule == "fixed" and cfg.dt is None:
        raise _fail("time-dependent experiments need dt or a dt_rule", "dt_rule")
    if cfg.kappa is not None and exp not in ("convdiff3d", "contaminant"):
        raise _fail(f"kappa does not apply to {exp}", "kappa")
    if cfg.nu is not None and exp not in ("convdiff3d", "elliptic3d"):
        raise _fail(f"nu does not apply to {exp}", "nu")
    if cfg.n_steps < 0:
        raise _fail("n_steps must be non-negative", "n_steps")


def read_config(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", source=path) from None
    return parse_config(text, path)


def with_value(cfg: ExperimentConfig, key: str, text: str) -> ExperimentConfig:
    """Copy of ``cfg`` with ``key`` set from its textual value."""
    if key not in PARSERS:
        raise ConfigError(f"unknown key {key!r}")
    try:
        value = PARSERS[key](text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {exc}") from None
    new = dataclasses.replace(cfg, **{key: value})
    validate(new)
    return new
