r"""
Spectral viscosity and modal exponential filters
------------------------------------------------

The discrete viscosity operator

.. math::

    L = -M^{-1} D^T M \underline{a} D, \qquad a(x) = 1 - x^2,

has the Legendre polynomials as eigenvectors with eigenvalues
:math:`-n (n + 1)` for the modal and Gauss bases (and for all but the top mode
of the lumped Lobatto basis). One explicit Euler step followed by the exact
solution of :math:`u' = -\epsilon (-L)^s u` over a step of length :math:`\tau`
is the modal filter

.. math::

    F = \mathrm{diag}\left(\exp(-\epsilon \lambda_n^s \tau)\right),
    \qquad \lambda_n = n (n + 1),

written in the Legendre basis.

.. autofunction:: build_viscosity
.. autofunction:: viscosity_spectrum
.. autofunction:: build_filter
.. autofunction:: adaptive_epsilon
.. autofunction:: apply_filter
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Any

import numpy as np

from cprfilter.errors import ComputationError, DegenerateFilterError
from cprfilter.sbp import BasisKind, OperatorSet, function_multiplication_operator

Array = Any

logger = logging.getLogger(__name__)

#: relative tolerance below which the adaptive denominator counts as zero
DEGENERATE_RTOL = 1.0e-14
#: maximum number of bisection steps refining the first-order strength
BISECTION_STEPS = 20
#: maximum number of doublings when searching for a feasible upper bracket
BRACKET_DOUBLINGS = 200


def mode_eigenvalues(p: int) -> Array:
    """Exact eigenvalues :math:`n (n + 1)` of :math:`-\\partial_x (1 - x^2) \\partial_x`."""
    n = np.arange(p + 1, dtype=np.float64)
    return n * (n + 1.0)


# {{{ viscosity operator


@dataclass(frozen=True)
class ViscosityOperator:
    L: Array
    kind: BasisKind
    degree: int


def build_viscosity(ops: OperatorSet) -> ViscosityOperator:
    """Assemble :math:`-M^{-1} D^T M \\underline{a} D` in the basis of *ops*."""
    A = function_multiplication_operator(lambda x: 1.0 - x**2, ops)
    m = ops.mass_diagonal
    L = -(ops.D.T @ (m[:, None] * (A @ ops.D))) / m[:, None]
    return ViscosityOperator(L=L, kind=ops.kind, degree=ops.degree)


def viscosity_spectrum(visc: ViscosityOperator) -> Array:
    """Eigenvalues of the viscosity operator, sorted ascending."""
    try:
        lam = np.linalg.eigvals(visc.L)
    except np.linalg.LinAlgError as exc:
        raise ComputationError("eigenvalue computation did not converge") from exc

    scale = max(1.0, float(np.max(np.abs(lam))))
    if np.max(np.abs(lam.imag)) > 1.0e-8 * scale:
        raise ComputationError("viscosity operator has complex eigenvalues")

    return np.sort(lam.real)


def legendre_eigen_residuals(visc: ViscosityOperator, ops: OperatorSet) -> Array:
    r"""Residuals :math:`\|L \phi_n + n (n + 1) \phi_n\|_\infty` for each mode."""
    phi = ops.to_nodal(np.eye(ops.size))  # row n holds phi_n
    lam = mode_eigenvalues(ops.degree)
    return np.max(np.abs(phi @ visc.L.T + lam[:, None] * phi), axis=1)


# }}}


# {{{ filter


class ExponentScale(enum.Enum):
    """Whether the filter exponent is :math:`\\epsilon \\lambda^s` or
    :math:`\\epsilon \\lambda^s \\Delta t`."""

    UNIT = "unit"
    TIME_STEP = "time_step"


@dataclass(frozen=True)
class FilterSpec:
    """Filter order, strength policy and exponent convention.

    With *adaptive* set, *epsilon* is ignored and the strength is computed per
    element and time step.
    """

    order: int = 1
    epsilon: float = 0.0
    adaptive: bool = False
    exponent_scale: ExponentScale = ExponentScale.TIME_STEP

    def __post_init__(self) -> None:
        if int(self.order) != self.order or self.order < 1:
            raise ValueError(f"filter order must be a positive integer: {self.order}")
        if not self.epsilon >= 0.0:
            raise ValueError(f"filter strength must be non-negative: {self.epsilon}")
        object.__setattr__(self, "exponent_scale", ExponentScale(self.exponent_scale))

    def effective_epsilon(self, dt: float) -> float:
        """Strength with the time step folded in according to the exponent scale."""
        if self.exponent_scale is ExponentScale.TIME_STEP:
            return self.epsilon * dt
        return self.epsilon


@dataclass(frozen=True)
class FilterOperator:
    """Filter matrix in the active basis together with its modal form.

    ``inverse_matrix`` may contain ``inf`` when the damping underflows.
    """

    matrix: Array
    inverse_matrix: Array
    modal_diagonal: Array
    eigenvalues: Array


def filter_factors(epsilon: Array, order: int, p: int) -> Array:
    r"""Modal damping factors :math:`\exp(-\epsilon \lambda_n^s)`.

    *epsilon* may be an array of per-element strengths; the result then has
    shape ``(*epsilon.shape, p + 1)``.
    """
    lam_s = mode_eigenvalues(p) ** order
    return np.exp(-np.multiply.outer(epsilon, lam_s))


def build_filter(
    ops: OperatorSet, spec: FilterSpec, epsilon: float, dt: float = 1.0
) -> FilterOperator:
    """Filter matrix in the basis of *ops* for the effective strength *epsilon*.

    The exact eigenvalues :math:`n (n + 1)` are used for every basis, so nodal
    filters are the change of basis :math:`V \\mathrm{diag}(f) V^{-1}`.
    """
    if not epsilon >= 0.0:
        raise ValueError(f"filter strength must be non-negative: {epsilon}")

    tau = dt if ExponentScale(spec.exponent_scale) is ExponentScale.TIME_STEP else 1.0
    diag = filter_factors(epsilon * tau, spec.order, ops.degree)
    if np.all(diag == 1.0):
        # exact identity, so that a zero strength reproduces unfiltered runs bit for bit
        F = Finv = np.eye(ops.size)
    else:
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            inv = 1.0 / diag
            F = ops.to_nodal_matrix @ (diag[:, None] * ops.to_modal_matrix)
            Finv = ops.to_nodal_matrix @ (inv[:, None] * ops.to_modal_matrix)

    return FilterOperator(
        matrix=F,
        inverse_matrix=Finv,
        modal_diagonal=diag,
        eigenvalues=mode_eigenvalues(ops.degree),
    )


def apply_filter(F: FilterOperator, u: Array) -> Array:
    """Apply *F* to element coefficients *u* (last axis)."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape[-1] != F.matrix.shape[0]:
        raise ValueError(f"expected {F.matrix.shape[0]} coefficients, got {u.shape[-1]}")
    return u @ F.matrix.T


# }}}


# {{{ adaptive strength


@dataclass(frozen=True)
class AdaptiveResult:
    """Per-element outcome of :func:`adaptive_epsilon_elements`.

    .. attribute:: estimate

        First-order strength from :math:`\\exp(x) \\ge 1 + x`.

    .. attribute:: epsilon

        Strength after bisection on the exact energy condition.

    .. attribute:: degenerate

        Elements whose intermediate state is constant although the rate is not.

    .. attribute:: infeasible

        Elements where even removing all non-constant modes cannot meet the
        energy target; these keep the first-order estimate.
    """

    estimate: Array
    epsilon: Array
    degenerate: Array
    infeasible: Array


def filtered_energy(uhat: Array, norms: Array, lam_s: Array, epsilon: Array) -> Array:
    r""":math:`\sum_n \exp(-2 \epsilon \lambda_n^s) \hat{u}_n^2 \|\phi_n\|^2` per element."""
    damp = np.exp(-2.0 * np.multiply.outer(epsilon, lam_s))
    return np.sum(damp * uhat**2 * norms, axis=-1)


def adaptive_epsilon_elements(
    u: Array,
    du_dt: Array,
    dt: float,
    order: int,
    ops: OperatorSet,
    *,
    refine: bool = True,
) -> AdaptiveResult:
    r"""Adaptive filter strengths for a stack of elements (shape ``(N, p + 1)``).

    The first-order estimate is

    .. math::

        \epsilon = \frac{(\Delta t)^2 \|\partial_t u\|_M^2}
            {\sum_n 2 \lambda_n^s \tilde{u}_{+,n}^2 \|\phi_n\|^2},
        \qquad \tilde{u}_+ = u + \Delta t \partial_t u,

    which can only under-estimate the strength needed for
    :math:`\|F \tilde{u}_+\|_M^2 \le \|u\|_M^2 + 2 \Delta t \langle u, \partial_t u \rangle_M`.
    With *refine*, the estimate is the lower end of a bracket that is narrowed
    by bisection on that exact condition; the feasible end is returned.

    Both sides of the condition scale with the element Jacobian, so reference
    element quantities suffice.
    """
    if not dt > 0.0:
        raise ValueError(f"time step must be positive: {dt}")

    u = np.atleast_2d(np.asarray(u, dtype=np.float64))
    du_dt = np.atleast_2d(np.asarray(du_dt, dtype=np.float64))

    norms = ops.modal_norms
    lam_s = mode_eigenvalues(ops.degree) ** order

    uhat = ops.to_modal(u + dt * du_dt)
    dhat = ops.to_modal(du_dt)

    numerator = dt**2 * np.sum(dhat**2 * norms, axis=-1)
    total = np.sum(uhat**2 * norms, axis=-1)
    denominator = 2.0 * np.sum(lam_s * uhat**2 * norms, axis=-1)

    active = numerator > 0.0
    degenerate = active & (denominator <= DEGENERATE_RTOL * total)
    ok = active & ~degenerate

    estimate = np.zeros_like(numerator)
    estimate[ok] = numerator[ok] / denominator[ok]

    if not refine or not np.any(ok):
        return AdaptiveResult(
            estimate=estimate,
            epsilon=estimate.copy(),
            degenerate=degenerate,
            infeasible=np.zeros_like(ok),
        )

    target = total[ok] - numerator[ok]
    uh, lo = uhat[ok], estimate[ok]

    # no finite strength gets below the energy of the constant mode, which
    # the filter leaves untouched; such elements keep the first-order estimate
    infeasible_ok = target <= uh[:, 0] ** 2 * norms[0]

    # grow the upper bracket until the exact condition holds
    hi = lo.copy()
    pending = ~infeasible_ok & (filtered_energy(uh, norms, lam_s, hi) > target)
    for _ in range(BRACKET_DOUBLINGS):
        if not np.any(pending):
            break
        hi = np.where(pending, 2.0 * hi, hi)
        pending = pending & (filtered_energy(uh, norms, lam_s, hi) > target)
    infeasible_ok = infeasible_ok | pending
    hi = np.where(infeasible_ok, estimate[ok], hi)

    # bisection on the monotone map epsilon -> ||F u||_M^2
    lo = np.where(infeasible_ok, hi, np.where(hi > lo, hi / 2.0, lo))
    lo = np.maximum(lo, estimate[ok])
    for _ in range(BISECTION_STEPS):
        if np.all(hi - lo <= 1.0e-15 * hi):
            break
        mid = 0.5 * (lo + hi)
        feasible = filtered_energy(uh, norms, lam_s, mid) <= target
        hi = np.where(feasible, mid, hi)
        lo = np.where(feasible, lo, mid)

    epsilon = estimate.copy()
    epsilon[ok] = hi
    infeasible = np.zeros_like(ok)
    infeasible[ok] = infeasible_ok

    return AdaptiveResult(
        estimate=estimate,
        epsilon=epsilon,
        degenerate=degenerate,
        infeasible=infeasible,
    )


def adaptive_epsilon(
    u: Array,
    du_dt: Array,
    dt: float,
    order: int,
    ops: OperatorSet,
    *,
    refine: bool = True,
) -> float:
    """Adaptive filter strength for a single element.

    :raises DegenerateFilterError: if :math:`u + \\Delta t \\partial_t u` is
        constant while :math:`\\partial_t u` is not.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 1 or u.shape != np.shape(du_dt) or u.size != ops.size:
        raise ValueError("expected two coefficient vectors of one element")

    result = adaptive_epsilon_elements(u, du_dt, dt, order, ops, refine=refine)
    if result.degenerate[0]:
        raise DegenerateFilterError(
            "intermediate state is constant but its rate of change is not"
        )
    if result.infeasible[0]:
        logger.warning("adaptive filter cannot meet the energy target")

    return float(result.epsilon[0])


# }}}
