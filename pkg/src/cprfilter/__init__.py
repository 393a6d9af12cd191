"""Correction-procedure-via-reconstruction solver with modal filtering.

The subpackages build summation-by-parts operators for Legendre bases
(:mod:`cprfilter.sbp`), modal filters derived from spectral viscosity
(:mod:`cprfilter.filtering`), CPR semidiscretisations of linear advection and
Burgers' equation (:mod:`cprfilter.semidiscretisation`) and explicit Euler
time stepping with three ways of applying the filter
(:mod:`cprfilter.timestepping`).
"""

from __future__ import annotations

__version__ = "0.1.0"

from cprfilter.config import ExperimentConfig, PRESETS, resolve_config
from cprfilter.errors import BlowUpError, ComputationError, ConfigError, DegenerateFilterError
from cprfilter.filtering import (
    ExponentScale,
    FilterSpec,
    adaptive_epsilon,
    build_filter,
    build_viscosity,
    viscosity_spectrum,
)
from cprfilter.legendre import gauss_rule, legendre_eval, lobatto_rule
from cprfilter.sbp import BasisKind, OperatorSet, build_operators, sbp_residual
from cprfilter.semidiscretisation import (
    Equation,
    Mesh,
    MeshState,
    NumericalFlux,
    advection_rhs,
    burgers_rhs,
)
from cprfilter.timestepping import RunRecord, Strategy, integrate, run

__all__ = [
    "BasisKind",
    "BlowUpError",
    "ComputationError",
    "ConfigError",
    "DegenerateFilterError",
    "Equation",
    "ExperimentConfig",
    "ExponentScale",
    "FilterSpec",
    "Mesh",
    "MeshState",
    "NumericalFlux",
    "OperatorSet",
    "PRESETS",
    "RunRecord",
    "Strategy",
    "__version__",
    "adaptive_epsilon",
    "advection_rhs",
    "build_filter",
    "build_operators",
    "build_viscosity",
    "burgers_rhs",
    "gauss_rule",
    "integrate",
    "legendre_eval",
    "lobatto_rule",
    "resolve_config",
    "run",
    "sbp_residual",
    "viscosity_spectrum",
]
