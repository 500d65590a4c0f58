"""Run configuration: flat ``key = value`` files with ``#`` comments."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .problem import case_names, make_case

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config"]


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is the 1-based source line when known."""

    def __init__(self, message, line: int | None = None, key: str | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")
        self.line = line
        self.key = key


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _opt_int(text: str):
    return None if text.strip().lower() in ("none", "") else int(text)


def _opt_float(text: str):
    return None if text.strip().lower() in ("none", "") else float(text)


@dataclass(frozen=True)
class RunConfig:
    """One benchmark run.

    ``None`` for a case or scheme parameter means the case default (for
    instance the penalty scale and ``gamma_a`` listed with each case).
    """

    case: str = "homogeneous"
    epsilon: float | None = None
    C: float | None = None
    layer: float | None = None
    degree: int = 1
    theta: float = 1.0
    penalty: float | None = None
    gamma_a: float | None = None
    upwind: bool = True
    mode: str = "uniform"
    levels: int = 5
    initial_h: float | None = None
    max_elements: int | None = None
    max_levels: int = 60
    fraction: float = 0.75
    bisections: int = 2
    report_factor: float = 1.0
    solver_tol: float = 1e-10
    output_dir: str = "results"
    name: str | None = None
    vtk: bool = False
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.case not in case_names():
            raise ConfigError(f"unknown case {self.case!r}; choose from {sorted(case_names())}", key="case")
        if self.degree not in (1, 2):
            raise ConfigError("degree must be 1 or 2", key="degree")
        if self.theta not in (-1.0, 0.0, 1.0):
            raise ConfigError("theta must be -1, 0 or 1", key="theta")
        if self.mode not in ("uniform", "adaptive"):
            raise ConfigError("mode must be 'uniform' or 'adaptive'", key="mode")
        if self.levels < 1:
            raise ConfigError("levels must be at least 1", key="levels")
        if self.max_levels < 1:
            raise ConfigError("max_levels must be at least 1", key="max_levels")
        if not 0.0 < self.fraction < 1.0:
            raise ConfigError("fraction must lie in (0, 1)", key="fraction")
        if self.bisections not in (1, 2):
            raise ConfigError("bisections must be 1 or 2", key="bisections")
        if self.report_factor < 1.0:
            raise ConfigError("report_factor must be at least 1", key="report_factor")
        if not self.solver_tol > 0:
            raise ConfigError("solver_tol must be positive", key="solver_tol")
        for key in ("epsilon", "C", "layer", "penalty", "gamma_a", "initial_h"):
            v = getattr(self, key)
            if v is not None and not v > 0:
                raise ConfigError(f"{key} must be positive", key=key)
        if self.max_elements is not None and self.max_elements < 1:
            raise ConfigError("max_elements must be positive", key="max_elements")
        try:
            self.make_case()
        except ValueError as exc:
            raise ConfigError(str(exc), key="case") from None

    @property
    def run_name(self) -> str:
        return self.name or f"{self.case}_{self.mode}"

    def case_params(self) -> dict:
        keys = {"homogeneous": ("epsilon",), "singular": ("C",), "boundary_layer": ("epsilon", "layer")}[self.case]
        params = {k: getattr(self, k) for k in keys if getattr(self, k) is not None}
        for k in ("penalty", "gamma_a"):
            if getattr(self, k) is not None:
                params[k] = getattr(self, k)
        stray = [k for k in ("epsilon", "C", "layer") if k not in keys and getattr(self, k) is not None]
        if stray:
            raise ValueError(f"parameter(s) {stray} do not apply to case {self.case!r}")
        return params

    def make_case(self):
        return make_case(self.case, **self.case_params())

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


_CONVERTERS = {
    "case": str,
    "epsilon": _opt_float,
    "C": _opt_float,
    "layer": _opt_float,
    "degree": int,
    "theta": float,
    "penalty": _opt_float,
    "gamma_a": _opt_float,
    "upwind": _bool,
    "mode": str,
    "levels": int,
    "initial_h": _opt_float,
    "max_elements": _opt_int,
    "max_levels": int,
    "fraction": float,
    "bisections": int,
    "report_factor": float,
    "solver_tol": float,
    "output_dir": str,
    "name": lambda s: s or None,
    "vtk": _bool,
}


def parse_config(text: str, source: str | None = None) -> RunConfig:
    """Parse ``key = value`` lines; unknown or repeated keys are errors."""
    values = {}
    lines = {}
    for num, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=num)
        key, _, value = (p.strip() for p in line.partition("="))
        if key not in _CONVERTERS:
            raise ConfigError(f"unknown key {key!r}", line=num, key=key)
        if key in values:
            raise ConfigError(f"key {key!r} given twice (first on line {lines[key]})", line=num, key=key)
        try:
            values[key] = _CONVERTERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", line=num, key=key) from None
        lines[key] = num
    try:
        return RunConfig(source=source, **values)
    except ConfigError as exc:
        if exc.key in lines:
            raise ConfigError(str(exc), line=lines[exc.key], key=exc.key) from None
        raise


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc.strerror}") from None
    return parse_config(text, source=str(p))
