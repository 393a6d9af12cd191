"""Experiment configuration, built-in presets and flat ``key = value`` files."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from cprfilter.errors import ConfigError
from cprfilter.filtering import ExponentScale, FilterSpec
from cprfilter.sbp import BasisKind, build_operators
from cprfilter.semidiscretisation import (
    Equation,
    Mesh,
    MeshState,
    NumericalFlux,
    project_initial_condition,
)
from cprfilter.timestepping import Strategy

Array = Any


# {{{ initial conditions


def ic_gaussian(x: Array) -> Array:
    return np.exp(-20.0 * (x - 1.0) ** 2)


def ic_jump(x: Array) -> Array:
    return np.where((x >= 0.5) & (x <= 1.0), 1.0, 0.0)


def ic_sine(x: Array) -> Array:
    return np.sin(np.pi * x) + 0.01


INITIAL_CONDITIONS: dict[str, Callable[[Array], Array]] = {
    "gaussian": ic_gaussian,
    "jump": ic_jump,
    "sine": ic_sine,
}

# }}}


# {{{ config


@dataclass(frozen=True)
class ExperimentConfig:
    preset: str | None = None
    equation: Equation = Equation.ADVECTION
    domain: tuple[float, float] = (0.0, 2.0)
    N: int = 8
    p: int = 7
    basis: BasisKind = BasisKind.GAUSS
    flux: NumericalFlux = NumericalFlux.CENTRAL
    initial_condition: str = "gaussian"
    T_final: float = 1.0
    steps: int = 1000
    strategy: Strategy = Strategy.NONE
    s: int = 1
    strength_policy: str = "fixed"
    epsilon: float = 0.0
    #: *None* picks the default for the strategy and strength policy
    exponent_scale: ExponentScale | None = None
    #: strength used only for the M F^{-1} energy diagnostic
    norm_epsilon: float | None = None
    sample_resolution: int = 20

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.N < 1:
            raise ConfigError(f"N must be >= 1, got {self.N}")
        if self.p < 1:
            raise ConfigError(f"p must be >= 1, got {self.p}")
        if self.steps < 0:
            raise ConfigError(f"steps must be >= 0, got {self.steps}")
        if not (self.T_final > 0 and math.isfinite(self.T_final)):
            raise ConfigError(f"T_final must be positive, got {self.T_final}")
        if not self.domain[1] > self.domain[0]:
            raise ConfigError(f"empty domain {self.domain}")
        if self.s < 1:
            raise ConfigError(f"filter order s must be >= 1, got {self.s}")
        if not self.epsilon >= 0:
            raise ConfigError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.norm_epsilon is not None and not self.norm_epsilon >= 0:
            raise ConfigError(f"norm_epsilon must be >= 0, got {self.norm_epsilon}")
        if self.strength_policy not in ("fixed", "adaptive"):
            raise ConfigError(
                f"strength_policy must be 'fixed' or 'adaptive', got {self.strength_policy!r}"
            )
        if self.initial_condition not in INITIAL_CONDITIONS:
            raise ConfigError(
                f"unknown initial condition {self.initial_condition!r}; "
                f"choose from {sorted(INITIAL_CONDITIONS)}"
            )
        if self.sample_resolution < 2:
            raise ConfigError("sample_resolution must be >= 2")
        if self.adaptive and self.strategy in (Strategy.DERIVATIVE, Strategy.SOLUTION):
            raise ConfigError(
                f"adaptive strength is only defined for the split strategy, "
                f"not '{self.strategy.value}'"
            )

    @property
    def adaptive(self) -> bool:
        return self.strength_policy == "adaptive"

    @property
    def dt(self) -> float:
        return self.T_final / max(self.steps, 1)

    @property
    def resolved_exponent_scale(self) -> ExponentScale:
        if self.exponent_scale is not None:
            return self.exponent_scale
        if self.adaptive or self.strategy in (Strategy.DERIVATIVE, Strategy.SOLUTION):
            return ExponentScale.UNIT
        return ExponentScale.TIME_STEP

    def filter_spec(self) -> FilterSpec | None:
        if self.strategy is Strategy.NONE:
            if self.norm_epsilon is None:
                return None
            return FilterSpec(
                order=self.s,
                epsilon=0.0,
                exponent_scale=self.resolved_exponent_scale,
            )
        return FilterSpec(
            order=self.s,
            epsilon=self.epsilon,
            adaptive=self.adaptive,
            exponent_scale=ExponentScale.UNIT if self.adaptive else self.resolved_exponent_scale,
        )

    def replace(self, **kwargs: Any) -> ExperimentConfig:
        return dataclasses.replace(self, **kwargs)

    def as_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if hasattr(value, "value"):
                value = value.value
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        out["exponent_scale"] = self.resolved_exponent_scale.value
        out["dt"] = self.dt
        return out


def initial_state(config: ExperimentConfig) -> MeshState:
    ops = build_operators(config.basis, config.p)
    mesh = Mesh(config.domain[0], config.domain[1], config.N)
    u0 = project_initial_condition(INITIAL_CONDITIONS[config.initial_condition], ops, mesh)
    return MeshState(u0, ops, mesh, config.equation, config.flux, 0.0)


# }}}


# {{{ parsing


def _parse_domain(text: str | tuple[float, float]) -> tuple[float, float]:
    if isinstance(text, (tuple, list)):
        lo, hi = text
        return float(lo), float(hi)
    parts = [t for t in str(text).replace(" ", "").split(",") if t]
    if len(parts) != 2:
        raise ValueError(f"domain must be 'lo,hi', got {text!r}")
    return float(parts[0]), float(parts[1])


def _parse_optional_float(text: str | float | None) -> float | None:
    if text is None or (isinstance(text, str) and text.lower() in ("", "none")):
        return None
    return float(text)


def _parse_optional_scale(text: Any) -> ExponentScale | None:
    if text is None or (isinstance(text, str) and text.lower() in ("", "none", "auto")):
        return None
    return ExponentScale(text)


def _parse_int(text: Any) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


CONVERTERS: dict[str, Callable[[Any], Any]] = {
    "preset": str,
    "equation": Equation,
    "domain": _parse_domain,
    "N": _parse_int,
    "p": _parse_int,
    "basis": BasisKind,
    "flux": NumericalFlux,
    "initial_condition": str,
    "T_final": float,
    "steps": _parse_int,
    "strategy": Strategy,
    "s": _parse_int,
    "strength_policy": str,
    "epsilon": float,
    "exponent_scale": _parse_optional_scale,
    "norm_epsilon": _parse_optional_float,
    "sample_resolution": _parse_int,
}


def convert_values(values: dict[str, Any]) -> dict[str, Any]:
    out = {}
    for key, raw in values.items():
        if key not in CONVERTERS:
            raise ConfigError(f"unknown configuration key {key!r}")
        try:
            out[key] = CONVERTERS[key](raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid value for {key!r}: {raw!r} ({exc})") from exc
    return out


def read_config_file(path: str | Path) -> dict[str, str]:
    """Read a flat ``key = value`` file; ``#`` starts a comment."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (t.strip() for t in line.split("=", 1))
        if key not in CONVERTERS:
            raise ConfigError(f"{path}:{lineno}: unknown configuration key {key!r}")
        values[key] = value
    return values


def resolve_config(
    preset: str | None = None,
    file_values: dict[str, Any] | None = None,
    overrides: dict[str, Any] | None = None,
) -> ExperimentConfig:
    """Merge preset defaults, file values and explicit overrides (in that order)."""
    file_values = convert_values(file_values or {})
    overrides = convert_values(overrides or {})

    if preset is None:
        preset = overrides.get("preset", file_values.get("preset"))

    merged: dict[str, Any] = {}
    steps_choice: dict[str, int] | None = None
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        merged.update(PRESETS[preset])
        steps_choice = merged.pop("steps_by_filtering", None)
        merged["preset"] = preset

    merged.update(file_values)
    merged.update(overrides)

    if steps_choice is not None and "steps" not in merged:
        strategy = merged.get("strategy", Strategy.NONE)
        key = "unfiltered" if strategy is Strategy.NONE else "filtered"
        merged["steps"] = steps_choice[key]

    try:
        return ExperimentConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


# }}}


# {{{ presets

_JUMP_ADVECTION = {
    "equation": Equation.ADVECTION,
    "domain": (0.0, 2.0),
    "initial_condition": "jump",
    "basis": BasisKind.GAUSS,
    "flux": NumericalFlux.UPWIND,
    "T_final": 8.0,
}

PRESETS: dict[str, dict[str, Any]] = {
    "gaussian_advection": {
        "equation": Equation.ADVECTION,
        "domain": (0.0, 2.0),
        "initial_condition": "gaussian",
        "N": 8,
        "p": 7,
        "basis": BasisKind.GAUSS,
        "flux": NumericalFlux.CENTRAL,
        "T_final": 10.0,
        "steps": 120_000,
        "strategy": Strategy.SPLIT,
        "strength_policy": "adaptive",
        "s": 2,
    },
    "jump_advection_small": {
        **_JUMP_ADVECTION,
        "N": 8,
        "p": 7,
        "steps_by_filtering": {"unfiltered": 20_000, "filtered": 2_000},
        "strategy": Strategy.SPLIT,
        "strength_policy": "adaptive",
        "s": 1,
    },
    "jump_advection_large": {
        **_JUMP_ADVECTION,
        "N": 16,
        "p": 15,
        # 2000 filtered steps exceed the Euler stability limit at p = 15 by far
        "steps_by_filtering": {"unfiltered": 20_000, "filtered": 20_000},
        "strategy": Strategy.SPLIT,
        "strength_policy": "adaptive",
        "s": 1,
    },
    "burgers_sin": {
        "equation": Equation.BURGERS,
        "domain": (0.0, 2.0),
        "initial_condition": "sine",
        "N": 16,
        "p": 15,
        "basis": BasisKind.GAUSS,
        "flux": NumericalFlux.LLF,
        "T_final": 0.31,
        "steps": 200,
        "strategy": Strategy.SPLIT,
        "strength_policy": "adaptive",
        "s": 1,
    },
    "burgers_sin_long": {
        "equation": Equation.BURGERS,
        "domain": (0.0, 2.0),
        "initial_condition": "sine",
        "N": 16,
        "p": 15,
        "basis": BasisKind.GAUSS,
        "flux": NumericalFlux.LLF,
        "T_final": 3.0,
        "steps": 15_000,
        "strategy": Strategy.SPLIT,
        "strength_policy": "fixed",
        "epsilon": 0.5,
        "s": 1,
        "exponent_scale": ExponentScale.TIME_STEP,
    },
    "derivative_filter_demo": {
        **_JUMP_ADVECTION,
        "N": 8,
        "p": 7,
        "steps": 100_000,
        "strategy": Strategy.DERIVATIVE,
        "strength_policy": "fixed",
        "epsilon": 100.0,
        "s": 1,
        "exponent_scale": ExponentScale.TIME_STEP,
        "norm_epsilon": 100.0,
    },
    "solution_filter_demo": {
        **_JUMP_ADVECTION,
        "N": 8,
        "p": 7,
        "steps": 100_000,
        "strategy": Strategy.SOLUTION,
        "strength_policy": "fixed",
        "epsilon": 100.0,
        "s": 1,
        "exponent_scale": ExponentScale.TIME_STEP,
        "norm_epsilon": 100.0,
    },
}

#: values the presets must reproduce, keyed by preset; checked by ``check-presets``
REFERENCE_VALUES: dict[str, dict[str, Any]] = {
    "gaussian_advection": {
        "equation": "advection", "domain": [0.0, 2.0], "N": 8, "p": 7,
        "basis": "gauss", "flux": "central", "T_final": 10.0, "steps": 120_000,
    },
    "jump_advection_small": {
        "equation": "advection", "domain": [0.0, 2.0], "N": 8, "p": 7,
        "basis": "gauss", "flux": "upwind", "T_final": 8.0, "steps": 2_000,
    },
    "jump_advection_large": {
        "equation": "advection", "domain": [0.0, 2.0], "N": 16, "p": 15,
        "basis": "gauss", "flux": "upwind", "T_final": 8.0, "steps": 20_000,
    },
    "burgers_sin": {
        "equation": "burgers", "domain": [0.0, 2.0], "N": 16, "p": 15,
        "basis": "gauss", "flux": "llf", "T_final": 0.31, "steps": 200,
    },
    "burgers_sin_long": {
        "equation": "burgers", "domain": [0.0, 2.0], "N": 16, "p": 15,
        "basis": "gauss", "flux": "llf", "T_final": 3.0, "steps": 15_000,
        "epsilon": 0.5,
    },
    "derivative_filter_demo": {
        "equation": "advection", "domain": [0.0, 2.0], "N": 8, "p": 7,
        "basis": "gauss", "flux": "upwind", "T_final": 8.0, "steps": 100_000,
        "strategy": "derivative", "epsilon": 100.0,
    },
    "solution_filter_demo": {
        "equation": "advection", "domain": [0.0, 2.0], "N": 8, "p": 7,
        "basis": "gauss", "flux": "upwind", "T_final": 8.0, "steps": 100_000,
        "strategy": "solution", "epsilon": 100.0,
    },
}


def check_presets() -> list[tuple[str, str, Any, Any, bool]]:
    """Compare every resolved preset against :data:`REFERENCE_VALUES`."""
    rows = []
    for name, expected in REFERENCE_VALUES.items():
        resolved = resolve_config(name).as_dict()
        for key, value in expected.items():
            rows.append((name, key, value, resolved[key], resolved[key] == value))

    # the unfiltered jump runs use ten times as many steps
    for name in ("jump_advection_small", "jump_advection_large"):
        steps = resolve_config(name, overrides={"strategy": "none"}).steps
        rows.append((name, "steps[none]", 20_000, steps, steps == 20_000))

    return rows


# }}}
