"""Run configuration files: UTF-8, one ``key = value`` per line, ``#`` comments."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .verify.cases import CASES

COMMANDS = ("convergence", "stability", "cavity", "step")


class ConfigError(ValueError):
    pass


def _pos(v):
    return v > 0


def _nonneg(v):
    return v >= 0


# key -> (type, check, description of the allowed range)
SCHEMA = {
    "command": (str, lambda v: v in COMMANDS, f"one of {COMMANDS}"),
    "case": (str, lambda v: v in CASES, f"one of {tuple(CASES)}"),
    "r": (int, lambda v: 1 <= v <= 5, "1..5"),
    "levels": (int, lambda v: 2 <= v <= 8, "2..8"),
    "n": (int, lambda v: v >= 1, ">= 1"),
    "nu": (float, _pos, "> 0"),
    "re": (float, _pos, "> 0"),
    "lambda": (float, _nonneg, ">= 0"),
    "dt": (float, _pos, "> 0"),
    "dt_factor": (float, _pos, "> 0"),
    "T": (float, _pos, "> 0"),
    "tol": (float, _pos, "> 0"),
    "max_steps": (int, lambda v: v >= 1, ">= 1"),
    "h_min": (float, lambda v: 0 < v < 0.5, "(0, 0.5)"),
    "L": (float, lambda v: v > 0.5, "> 0.5"),
    "pressure_form": (str, lambda v: v in ("weak1", "weak2"), "weak1 or weak2"),
    "solver": (str, lambda v: v in ("direct", "iterative"), "direct or iterative"),
    "scheme": (str, lambda v: v in ("imex443", "imex111") or v.startswith("file:"), "imex443, imex111 or file:PATH"),
    "alpha_max": (float, _pos, "> 0"),
    "grid": (int, lambda v: v >= 2, ">= 2"),
    "output": (str, lambda v: bool(v), "non-empty path"),
    "raster": (str, lambda v: bool(v), "non-empty path"),
    "pgm": (str, lambda v: bool(v), "non-empty path"),
    "vtk": (str, lambda v: bool(v), "non-empty path"),
}


@dataclass
class RunConfig:
    command: str | None = None
    case: str | None = None
    r: int | None = None
    levels: int | None = None
    n: int | None = None
    nu: float | None = None
    re: float | None = None
    lam: float | None = None
    dt: float | None = None
    dt_factor: float | None = None
    T: float | None = None
    tol: float | None = None
    max_steps: int | None = None
    h_min: float | None = None
    L: float | None = None
    pressure_form: str | None = None
    solver: str | None = None
    scheme: str | None = None
    alpha_max: float | None = None
    grid: int | None = None
    output: str | None = None
    raster: str | None = None
    pgm: str | None = None
    vtk: str | None = None

    def items(self):
        """Set keys in schema order, using file key names."""
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None:
                yield _file_key(f.name), v

    @property
    def viscosity(self) -> float | None:
        if self.nu is not None and self.re is not None and not math.isclose(self.nu, 1.0 / self.re):
            raise ConfigError("nu and re disagree")
        if self.nu is not None:
            return self.nu
        return None if self.re is None else 1.0 / self.re


def _attr(key: str) -> str:
    return "lam" if key == "lambda" else key


def _file_key(attr: str) -> str:
    return "lambda" if attr == "lam" else attr


def parse_value(key: str, text: str):
    if key not in SCHEMA:
        raise ConfigError(f"unknown key {key!r}")
    typ, check, allowed = SCHEMA[key]
    try:
        v = typ(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {typ.__name__}") from None
    if typ is float and not math.isfinite(v):
        raise ConfigError(f"{key}: value must be finite")
    if not check(v):
        raise ConfigError(f"{key}: {v!r} outside allowed range ({allowed})")
    return v


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        try:
            setattr(cfg, _attr(key), parse_value(key, value))
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    return cfg


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def serialize_config(cfg: RunConfig) -> str:
    return "".join(f"{k} = {v!r}\n" if isinstance(v, float) else f"{k} = {v}\n" for k, v in cfg.items())
