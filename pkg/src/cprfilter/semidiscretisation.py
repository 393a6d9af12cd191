r"""
CPR semidiscretisations on periodic meshes
------------------------------------------

Per element, linear advection :math:`\partial_t u + \partial_x u = 0` is
discretised as

.. math::

    \partial_t u = -D u - M^{-1} R^T B (f^{num} - R u)

and Burgers' equation in the skew-symmetric split form

.. math::

    \partial_t u = -\tfrac13 D \underline{u} u - \tfrac13 \underline{u}^* D u
        - M^{-1} R^T B \left(f^{num} - \tfrac13 R \underline{u} u
        - \tfrac16 (R u)^2\right),

both on the reference element, then divided by the affine Jacobian.

.. autoclass:: Mesh
.. autoclass:: MeshState
.. autofunction:: evaluate_flux
.. autofunction:: advection_rhs
.. autofunction:: burgers_rhs
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace
from typing import Any, Callable

import numpy as np

from cprfilter.errors import ComputationError
from cprfilter.legendre import gauss_rule, legendre_norms, legendre_vandermonde
from cprfilter.sbp import BasisKind, OperatorSet, mult_adjoint, multiplication_operator

Array = Any
RHSFunction = Callable[[Array], Array]

logger = logging.getLogger(__name__)


class Equation(enum.Enum):
    ADVECTION = "advection"
    BURGERS = "burgers"

    def flux(self, u: Array) -> Array:
        if self is Equation.ADVECTION:
            return u
        return 0.5 * u * u


class NumericalFlux(enum.Enum):
    CENTRAL = "central"
    UPWIND = "upwind"
    LLF = "llf"


def evaluate_flux(
    flux: NumericalFlux | str,
    equation: Equation | str,
    u_minus: Array,
    u_plus: Array,
) -> Array:
    """Interface flux from the left trace *u_minus* and the right trace *u_plus*.

    Upwinding assumes a positive advection speed; for Burgers' equation it is
    evaluated as :math:`f(u_-)` and a warning is logged.
    """
    flux = NumericalFlux(flux)
    equation = Equation(equation)

    if flux is NumericalFlux.CENTRAL:
        return 0.5 * (equation.flux(u_minus) + equation.flux(u_plus))

    if flux is NumericalFlux.UPWIND:
        if equation is Equation.BURGERS:
            logger.warning("upwind flux with Burgers' equation assumes u > 0")
        return equation.flux(u_minus) + 0.0 * u_plus

    # local Lax-Friedrichs
    if equation is Equation.ADVECTION:
        return 0.5 * (u_minus + u_plus) - 0.5 * (u_plus - u_minus)

    speed = np.maximum(np.abs(u_minus), np.abs(u_plus))
    return 0.25 * (u_minus**2 + u_plus**2) - 0.5 * speed * (u_plus - u_minus)


# {{{ mesh and state


@dataclass(frozen=True)
class Mesh:
    """Uniform periodic partition of ``[x_lo, x_hi]`` into *n_elements* cells."""

    x_lo: float
    x_hi: float
    n_elements: int

    def __post_init__(self) -> None:
        if self.n_elements < 1:
            raise ValueError(f"need at least one element: {self.n_elements}")
        if not self.x_hi > self.x_lo:
            raise ValueError(f"empty domain [{self.x_lo}, {self.x_hi}]")

    @property
    def periodic(self) -> bool:
        return True

    @property
    def jacobian(self) -> float:
        return (self.x_hi - self.x_lo) / (2.0 * self.n_elements)

    @property
    def element_centers(self) -> Array:
        h = (self.x_hi - self.x_lo) / self.n_elements
        return self.x_lo + h * (np.arange(self.n_elements) + 0.5)

    def physical_points(self, xi: Array) -> Array:
        """Map reference points *xi* into every element, shape ``(N, xi.size)``."""
        return self.element_centers[:, None] + self.jacobian * np.asarray(xi)[None, :]


@dataclass(frozen=True, eq=False)
class MeshState:
    """Global solution: coefficients of shape ``(N, p + 1)`` in the basis of *ops*."""

    u: Array
    ops: OperatorSet
    mesh: Mesh
    equation: Equation = Equation.ADVECTION
    flux: NumericalFlux = NumericalFlux.CENTRAL
    t: float = 0.0

    def __post_init__(self) -> None:
        u = np.asarray(self.u, dtype=np.float64)
        if u.shape != (self.mesh.n_elements, self.ops.size):
            raise ValueError(
                f"expected coefficients of shape {(self.mesh.n_elements, self.ops.size)}, "
                f"got {u.shape}"
            )
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "equation", Equation(self.equation))
        object.__setattr__(self, "flux", NumericalFlux(self.flux))

    def with_u(self, u: Array, t: float | None = None) -> MeshState:
        return replace(self, u=u, t=self.t if t is None else t)

    # {{{ reductions

    def mass(self, u: Array | None = None) -> float:
        r""":math:`\sum_e J \, 1^T M u_e`."""
        u = self.u if u is None else u
        return float(self.mesh.jacobian * np.sum(u @ self.ops.mass_weights))

    def energy(self, u: Array | None = None) -> float:
        r""":math:`\sum_e J \, u_e^T M u_e`."""
        u = self.u if u is None else u
        return float(self.mesh.jacobian * np.sum(u * u * self.ops.mass_diagonal))

    def inner(self, u: Array, v: Array) -> float:
        return float(self.mesh.jacobian * np.sum(u * v * self.ops.mass_diagonal))

    # }}}


def project_initial_condition(
    func: Callable[[Array], Array], ops: OperatorSet, mesh: Mesh
) -> Array:
    """Coefficients of *func* on every element.

    Nodal bases interpolate at the nodes; the modal basis uses the discrete
    :math:`L_2` projection with the :math:`(p + 1)`-point Gauss rule.
    """
    if ops.kind.is_nodal:
        return np.asarray(func(mesh.physical_points(ops.nodes)), dtype=np.float64)

    rule = gauss_rule(ops.size)
    V, _ = legendre_vandermonde(ops.degree, rule.nodes)
    values = np.asarray(func(mesh.physical_points(rule.nodes)), dtype=np.float64)
    return (values * rule.weights) @ V / legendre_norms(ops.degree)


# }}}


# {{{ right-hand sides


def interface_fluxes(
    traces: Array, flux: NumericalFlux, equation: Equation
) -> Array:
    """One numerical flux per interface; entry ``e`` is the left boundary of element ``e``.

    *traces* has shape ``(N, 2)`` holding :math:`(u(-1), u(+1))` per element.
    """
    u_minus = np.roll(traces[:, 1], 1)
    u_plus = traces[:, 0]
    return evaluate_flux(flux, equation, u_minus, u_plus)


def _element_fluxes(fnum: Array) -> Array:
    return np.stack([fnum, np.roll(fnum, -1)], axis=-1)


def make_rhs(
    ops: OperatorSet, mesh: Mesh, equation: Equation | str, flux: NumericalFlux | str
) -> RHSFunction:
    """Return the semidiscrete map ``u -> du/dt`` on arrays of shape ``(N, p + 1)``.

    No finiteness checks are done here; the public wrappers and the time
    integrator take care of that.
    """
    equation = Equation(equation)
    flux = NumericalFlux(flux)
    if flux is NumericalFlux.UPWIND and equation is Equation.BURGERS:
        logger.warning("upwind flux with Burgers' equation assumes u > 0")
        flux_eval = lambda um, up: 0.5 * um * um + 0.0 * up  # noqa: E731
    else:
        flux_eval = lambda um, up: evaluate_flux(flux, equation, um, up)  # noqa: E731

    J = mesh.jacobian
    DT = ops.D.T.copy()
    RT = ops.R.T.copy()
    liftT = ops.lift.T.copy()

    if equation is Equation.ADVECTION:

        def rhs(u: Array) -> Array:
            traces = u @ RT
            fnum = flux_eval(np.roll(traces[:, 1], 1), traces[:, 0])
            return (-(u @ DT) - (_element_fluxes(fnum) - traces) @ liftT) / J

        return rhs

    if ops.kind.is_nodal:

        def rhs(u: Array) -> Array:
            traces = u @ RT
            fnum = flux_eval(np.roll(traces[:, 1], 1), traces[:, 0])
            uu = u * u
            volume = -(uu @ DT) / 3.0 - u * (u @ DT) / 3.0
            boundary = _element_fluxes(fnum) - (uu @ RT) / 3.0 - traces**2 / 6.0
            return (volume - boundary @ liftT) / J

        return rhs

    m = ops.mass_diagonal

    def rhs(u: Array) -> Array:
        traces = u @ RT
        fnum = flux_eval(np.roll(traces[:, 1], 1), traces[:, 0])
        A = multiplication_operator(u, ops)
        uu = np.einsum("emn,en->em", A, u)
        Du = u @ DT
        # M^{-1} A^T M (D u)
        adj = np.einsum("enm,en->em", A, Du * m) / m
        volume = -(uu @ DT) / 3.0 - adj / 3.0
        boundary = _element_fluxes(fnum) - (uu @ RT) / 3.0 - traces**2 / 6.0
        return (volume - boundary @ liftT) / J

    return rhs


def _check_finite(u: Array) -> None:
    if not np.all(np.isfinite(u)):
        raise ComputationError("non-finite coefficients in the state")


def advection_rhs(state: MeshState) -> Array:
    """Time derivative of the CPR advection semidiscretisation."""
    if state.equation is not Equation.ADVECTION:
        raise ValueError("state does not describe linear advection")
    _check_finite(state.u)
    return make_rhs(state.ops, state.mesh, state.equation, state.flux)(state.u)


def burgers_rhs(state: MeshState) -> Array:
    """Time derivative of the skew-symmetric CPR Burgers semidiscretisation."""
    if state.equation is not Equation.BURGERS:
        raise ValueError("state does not describe Burgers' equation")
    _check_finite(state.u)
    return make_rhs(state.ops, state.mesh, state.equation, state.flux)(state.u)


def rhs(state: MeshState) -> Array:
    if state.equation is Equation.ADVECTION:
        return advection_rhs(state)
    return burgers_rhs(state)


def burgers_rhs_reference(state: MeshState) -> Array:
    """Element-by-element evaluation with explicit operator matrices.

    Slow; kept as an independent check of the vectorised kernels.
    """
    ops, J = state.ops, state.mesh.jacobian
    traces = state.u @ ops.R.T
    fnum = interface_fluxes(traces, state.flux, state.equation)
    Minv = np.diag(1.0 / ops.mass_diagonal)

    out = np.empty_like(state.u)
    for e, u in enumerate(state.u):
        A = multiplication_operator(u, ops)
        As = mult_adjoint(u, ops)
        Ru = ops.R @ u
        f = np.array([fnum[e], fnum[(e + 1) % state.mesh.n_elements]])
        out[e] = (
            -ops.D @ A @ u / 3.0
            - As @ ops.D @ u / 3.0
            - Minv @ ops.R.T @ ops.B @ (f - ops.R @ A @ u / 3.0 - Ru**2 / 6.0)
        ) / J

    return out


# }}}


__all__ = [
    "BasisKind",
    "Equation",
    "Mesh",
    "MeshState",
    "NumericalFlux",
    "advection_rhs",
    "burgers_rhs",
    "burgers_rhs_reference",
    "evaluate_flux",
    "interface_fluxes",
    "make_rhs",
    "project_initial_condition",
    "rhs",
]
