r"""
Explicit Euler time stepping with modal filtering
-------------------------------------------------

Three ways of combining a filter :math:`F` with the explicit Euler step
:math:`u_+ = u + \Delta t \, g(u)` are provided:

* split: :math:`u_+ = F (u + \Delta t \, g(u))`, with fixed or adaptive strength,
* derivative: :math:`u_+ = u + \Delta t \, F g(u)`,
* solution: :math:`u_+ = u + \Delta t \, g(F u)`.

.. autoclass:: Strategy
.. autoclass:: RunRecord
.. autofunction:: euler_step
.. autofunction:: step_split_filter
.. autofunction:: step_derivative_filter
.. autofunction:: step_solution_filter
.. autofunction:: integrate
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np

from cprfilter.errors import BlowUpError
from cprfilter.filtering import (
    ExponentScale,
    FilterSpec,
    adaptive_epsilon_elements,
    build_filter,
    filter_factors,
    mode_eigenvalues,
)
from cprfilter.semidiscretisation import (
    Equation,
    MeshState,
    NumericalFlux,
    RHSFunction,
    make_rhs,
)

if TYPE_CHECKING:
    from cprfilter.config import ExperimentConfig

Array = Any

logger = logging.getLogger(__name__)

#: coefficients larger than this count as a blow-up
BLOWUP_THRESHOLD = 1.0e10


class Strategy(enum.Enum):
    NONE = "none"
    SPLIT = "split"
    DERIVATIVE = "derivative"
    SOLUTION = "solution"


def _rhs_for(state: MeshState, rhs: RHSFunction | None) -> RHSFunction:
    if rhs is None:
        return make_rhs(state.ops, state.mesh, state.equation, state.flux)
    return rhs


def _is_blown_up(u: Array) -> bool:
    with np.errstate(invalid="ignore"):
        return not np.max(np.abs(u)) <= BLOWUP_THRESHOLD


def _checked(state: MeshState, u: Array, dt: float) -> MeshState:
    if _is_blown_up(u):
        raise BlowUpError(step=0)
    return state.with_u(u, state.t + dt)


# {{{ single steps


def euler_step(state: MeshState, dt: float, rhs: RHSFunction | None = None) -> MeshState:
    """:math:`u_+ = u + \\Delta t \\, g(u)`."""
    if not dt > 0.0:
        raise ValueError(f"time step must be positive: {dt}")
    g = _rhs_for(state, rhs)
    return _checked(state, state.u + dt * g(state.u), dt)


def _fixed_filter_matrix(state: MeshState, spec: FilterSpec, dt: float) -> Array:
    if spec.adaptive:
        raise ValueError("this strategy needs a fixed filter strength")
    return build_filter(state.ops, spec, spec.epsilon, dt).matrix


def adaptive_split_update(
    u: Array,
    du: Array,
    dt: float,
    order: int,
    ops: Any,
) -> tuple[Array, Array, int, int]:
    """Filtered Euler update with per-element adaptive strengths.

    :returns: ``(u_plus, epsilon, n_degenerate, n_infeasible)``; degenerate
        elements are left unfiltered.
    """
    result = adaptive_epsilon_elements(u, du, dt, order, ops)
    eps = np.where(result.degenerate, 0.0, result.epsilon)

    u_mid = u + dt * du
    u_plus = ops.to_nodal(ops.to_modal(u_mid) * filter_factors(eps, order, ops.degree))
    # unfiltered elements skip the round trip through modal space
    u_plus = np.where((eps > 0.0)[:, None], u_plus, u_mid)
    return (
        u_plus,
        eps,
        int(np.count_nonzero(result.degenerate)),
        int(np.count_nonzero(result.infeasible)),
    )


def step_split_filter(
    state: MeshState, spec: FilterSpec, dt: float, rhs: RHSFunction | None = None
) -> tuple[MeshState, Array]:
    """Euler step followed by the filter on every element.

    :returns: the new state and the per-element strengths that were applied
        (effective strengths, i.e. with the time step folded in).
    """
    if not dt > 0.0:
        raise ValueError(f"time step must be positive: {dt}")
    g = _rhs_for(state, rhs)
    du = g(state.u)

    if spec.adaptive:
        u_plus, eps, n_degenerate, _ = adaptive_split_update(
            state.u, du, dt, spec.order, state.ops
        )
        if n_degenerate:
            logger.warning("adaptive filter degenerate on %d element(s)", n_degenerate)
    else:
        F = _fixed_filter_matrix(state, spec, dt)
        u_plus = (state.u + dt * du) @ F.T
        eps = np.full(state.mesh.n_elements, spec.effective_epsilon(dt))

    return _checked(state, u_plus, dt), eps


def step_derivative_filter(
    state: MeshState, spec: FilterSpec, dt: float, rhs: RHSFunction | None = None
) -> MeshState:
    """:math:`u_+ = u + \\Delta t \\, F g(u)`."""
    if not dt > 0.0:
        raise ValueError(f"time step must be positive: {dt}")
    F = _fixed_filter_matrix(state, spec, dt)
    g = _rhs_for(state, rhs)
    return _checked(state, state.u + dt * (g(state.u) @ F.T), dt)


def step_solution_filter(
    state: MeshState, spec: FilterSpec, dt: float, rhs: RHSFunction | None = None
) -> MeshState:
    """:math:`u_+ = u + \\Delta t \\, g(F u)`."""
    if not dt > 0.0:
        raise ValueError(f"time step must be positive: {dt}")
    F = _fixed_filter_matrix(state, spec, dt)
    g = _rhs_for(state, rhs)
    return _checked(state, state.u + dt * g(state.u @ F.T), dt)


def step_solution_filter_factored(
    state: MeshState, spec: FilterSpec, dt: float, rhs: RHSFunction | None = None
) -> MeshState:
    """The solution-filter step evaluated as :math:`F^{-1}(F u + \\Delta t F g(F u))`."""
    if not dt > 0.0:
        raise ValueError(f"time step must be positive: {dt}")
    filt = build_filter(state.ops, spec, spec.epsilon, dt)
    g = _rhs_for(state, rhs)
    Fu = state.u @ filt.matrix.T
    inner = Fu + dt * (g(Fu) @ filt.matrix.T)
    return _checked(state, inner @ filt.inverse_matrix.T, dt)


# }}}


# {{{ run loop


@dataclass
class RunRecord:
    """Time series of one run, one entry per time level (steps + 1).

    .. attribute:: energy_intermediate

        :math:`\\|u_k + \\Delta t \\, g(u_k)\\|_M^2`, the unfiltered Euler
        update from the previous level (equal to ``energy_M`` at level 0).

    .. attribute:: energy_target

        :math:`\\|u_k\\|_M^2 + 2 \\Delta t \\langle u_k, g(u_k) \\rangle_M`
        from the previous level.
    """

    times: Array
    mass: Array
    energy_M: Array
    energy_MFinv: Array
    epsilon_applied: Array
    energy_intermediate: Array
    energy_target: Array
    final_state: MeshState
    metadata: dict[str, Any] = field(default_factory=dict)
    blowup_step: int | None = None

    @property
    def steps(self) -> int:
        return self.times.size - 1

    @property
    def max_epsilon(self) -> Array:
        if self.epsilon_applied.shape[1] == 0:
            return np.zeros(self.times.size)
        return np.max(self.epsilon_applied, axis=1)

    def truncated(self, n_levels: int) -> RunRecord:
        return RunRecord(
            times=self.times[:n_levels],
            mass=self.mass[:n_levels],
            energy_M=self.energy_M[:n_levels],
            energy_MFinv=self.energy_MFinv[:n_levels],
            epsilon_applied=self.epsilon_applied[:n_levels],
            energy_intermediate=self.energy_intermediate[:n_levels],
            energy_target=self.energy_target[:n_levels],
            final_state=self.final_state,
            metadata=self.metadata,
            blowup_step=self.blowup_step,
        )


def _norm_factors(
    spec: FilterSpec | None, dt: float, p: int, norm_epsilon: float | None
) -> Array:
    # diagonal of F used for the M F^{-1} energy of fixed-strength runs
    if spec is None:
        return np.ones(p + 1)
    eps = spec.epsilon if norm_epsilon is None else norm_epsilon
    eff = eps * dt if spec.exponent_scale is ExponentScale.TIME_STEP else eps
    return filter_factors(eff, spec.order, p)


def integrate(
    state: MeshState,
    *,
    dt: float,
    steps: int,
    strategy: Strategy | str = Strategy.NONE,
    spec: FilterSpec | None = None,
    norm_epsilon: float | None = None,
    backend: str = "numba",
) -> RunRecord:
    """Advance *state* by *steps* Euler steps of size *dt*.

    *norm_epsilon* overrides the strength used for the :math:`M F^{-1}`
    energy; it lets unfiltered runs report the norm of a filtered one. For
    adaptive runs that energy uses the last strength applied per element and
    is diagnostic only.

    The ``"numba"`` backend runs the loop compiled; ``"numpy"`` is the slower
    reference built from the same functions as the single-step API.

    :raises BlowUpError: with the partial record attached.
    """
    strategy = Strategy(strategy)
    if not dt > 0.0:
        raise ValueError(f"time step must be positive: {dt}")
    if steps < 0:
        raise ValueError(f"number of steps must be non-negative: {steps}")
    if strategy is not Strategy.NONE and spec is None:
        raise ValueError(f"strategy '{strategy.value}' needs a filter specification")
    if strategy in (Strategy.DERIVATIVE, Strategy.SOLUTION) and spec.adaptive:
        raise ValueError(f"strategy '{strategy.value}' needs a fixed filter strength")

    if backend == "numba":
        loop = _loop_numba
    elif backend == "numpy":
        loop = _loop_numpy
    else:
        raise ValueError(f"unknown backend {backend!r}")

    record, counts = loop(state, dt, steps, strategy, spec, norm_epsilon)
    n_degenerate, n_infeasible = counts

    if n_degenerate:
        logger.warning(
            "adaptive filter degenerate %d time(s); those elements were not filtered",
            n_degenerate,
        )
    if n_infeasible:
        logger.warning(
            "adaptive filter could not meet the energy target %d time(s)", n_infeasible
        )

    adaptive = strategy is Strategy.SPLIT and spec.adaptive
    record.metadata.update({
        "strategy": strategy.value,
        "steps": steps,
        "dt": dt,
        "adaptive": adaptive,
        "adaptive_refinement": "bisection" if adaptive else None,
        "energy_MFinv_diagnostic_only": adaptive,
        "adaptive_degenerate_count": n_degenerate,
        "adaptive_infeasible_count": n_infeasible,
    })

    if record.blowup_step is not None:
        raise BlowUpError(step=record.blowup_step, record=record)

    return record


def _new_record(state: MeshState, dt: float, steps: int) -> RunRecord:
    n = steps + 1
    return RunRecord(
        times=state.t + dt * np.arange(n),
        mass=np.empty(n),
        energy_M=np.empty(n),
        energy_MFinv=np.empty(n),
        epsilon_applied=np.zeros((n, state.mesh.n_elements)),
        energy_intermediate=np.empty(n),
        energy_target=np.empty(n),
        final_state=state,
    )


def _loop_numba(
    state: MeshState,
    dt: float,
    steps: int,
    strategy: Strategy,
    spec: FilterSpec | None,
    norm_epsilon: float | None,
) -> tuple[RunRecord, tuple[int, int]]:
    from cprfilter import _kernels

    ops, mesh = state.ops, state.mesh
    N, p = mesh.n_elements, ops.degree
    adaptive = strategy is Strategy.SPLIT and spec.adaptive

    F = np.eye(p + 1)
    eps_fixed = 0.0
    if spec is not None and not adaptive:
        eps_fixed = spec.effective_epsilon(dt)
        if strategy is not Strategy.NONE:
            F = build_filter(ops, spec, spec.epsilon, dt).matrix

    norm_factors = _norm_factors(None if adaptive else spec, dt, p, norm_epsilon)
    # factors that underflow give an infinite M F^{-1} energy, which is the honest value
    with np.errstate(divide="ignore"):
        inv_norm = np.broadcast_to(ops.modal_norms / norm_factors, (N, p + 1)).copy()
    lam_s = mode_eigenvalues(p) ** (spec.order if spec is not None else 1)

    record = _new_record(state, dt, steps)
    u = np.ascontiguousarray(state.u, dtype=np.float64).copy()
    T = ops.product_tensor if not ops.kind.is_nodal else np.zeros((1, 1, 1))

    completed, blowup, n_degenerate, n_infeasible = _kernels.integrate_kernel(
        u, float(dt), int(steps),
        _STRATEGY_CODES[strategy], bool(adaptive),
        _EQUATION_CODES[state.equation], _FLUX_CODES[state.flux],
        bool(ops.kind.is_nodal),
        np.ascontiguousarray(ops.D), np.ascontiguousarray(ops.R),
        np.ascontiguousarray(ops.lift), np.ascontiguousarray(T),
        ops.mass_diagonal, ops.mass_weights, float(mesh.jacobian),
        np.ascontiguousarray(ops.to_modal_matrix),
        np.ascontiguousarray(ops.to_nodal_matrix),
        ops.modal_norms, lam_s, np.ascontiguousarray(F), float(eps_fixed), inv_norm,
        record.mass, record.energy_M, record.energy_MFinv, record.epsilon_applied,
        record.energy_intermediate, record.energy_target,
    )

    record.final_state = state.with_u(u, state.t + completed * dt)
    if blowup >= 0:
        record.blowup_step = int(blowup)
        record = record.truncated(completed + 1)

    return record, (int(n_degenerate), int(n_infeasible))


def _loop_numpy(
    state: MeshState,
    dt: float,
    steps: int,
    strategy: Strategy,
    spec: FilterSpec | None,
    norm_epsilon: float | None,
) -> tuple[RunRecord, tuple[int, int]]:
    ops, mesh = state.ops, state.mesh
    g = make_rhs(ops, mesh, state.equation, state.flux)
    J = mesh.jacobian
    m = ops.mass_diagonal
    w = ops.mass_weights
    norms = ops.modal_norms
    N, p = mesh.n_elements, ops.degree

    adaptive = strategy is Strategy.SPLIT and spec.adaptive
    FT = None
    if strategy is not Strategy.NONE and not adaptive:
        FT = build_filter(ops, spec, spec.epsilon, dt).matrix.T.copy()

    # modal factors of F for the M F^{-1} energy
    norm_factors = _norm_factors(None if adaptive else spec, dt, p, norm_epsilon)
    with np.errstate(divide="ignore"):
        inv_norm = np.broadcast_to(norms / norm_factors, (N, p + 1)).copy()
    lam_s = None
    if adaptive:
        lam_s = mode_eigenvalues(p) ** spec.order

    n = steps + 1
    times = state.t + dt * np.arange(n)
    mass = np.empty(n)
    energy = np.empty(n)
    energy_finv = np.empty(n)
    eps_applied = np.zeros((n, N))
    energy_mid = np.empty(n)
    energy_target = np.empty(n)

    def reduce_into(k: int, u: Array) -> None:
        mass[k] = J * np.sum(u @ w)
        energy[k] = J * np.sum(u * u * m)
        uhat = ops.to_modal(u)
        energy_finv[k] = J * np.sum(uhat * uhat * inv_norm)

    u = state.u.copy()
    reduce_into(0, u)
    energy_mid[0] = energy_target[0] = energy[0]

    n_degenerate = n_infeasible = 0
    blowup_step = None
    completed = 0

    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, n):
            if strategy is Strategy.SOLUTION:
                du = g(u @ FT)
            else:
                du = g(u)
            if strategy is Strategy.DERIVATIVE:
                du = du @ FT

            u_mid = u + dt * du
            energy_mid[k] = J * np.sum(u_mid * u_mid * m)
            energy_target[k] = energy[k - 1] + 2.0 * dt * J * np.sum(u * du * m)

            if strategy is Strategy.SPLIT:
                if adaptive:
                    u_new, eps, nd, ni = adaptive_split_update(u, du, dt, spec.order, ops)
                    n_degenerate += nd
                    n_infeasible += ni
                    eps_applied[k] = eps
                    inv_norm = norms * np.exp(np.multiply.outer(eps, lam_s))
                else:
                    u_new = u_mid @ FT
                    eps_applied[k] = spec.effective_epsilon(dt)
            else:
                u_new = u_mid
                if spec is not None:
                    eps_applied[k] = spec.effective_epsilon(dt)

            if _is_blown_up(u_new):
                blowup_step = k
                break

            u = u_new
            reduce_into(k, u)
            completed = k

    record = RunRecord(
        times=times,
        mass=mass,
        energy_M=energy,
        energy_MFinv=energy_finv,
        epsilon_applied=eps_applied,
        energy_intermediate=energy_mid,
        energy_target=energy_target,
        final_state=state.with_u(u, state.t + completed * dt),
        blowup_step=blowup_step,
    )
    if blowup_step is not None:
        record = record.truncated(completed + 1)

    return record, (n_degenerate, n_infeasible)


_STRATEGY_CODES = {Strategy.NONE: 0, Strategy.SPLIT: 1, Strategy.DERIVATIVE: 2, Strategy.SOLUTION: 3}
_EQUATION_CODES = {Equation.ADVECTION: 0, Equation.BURGERS: 1}
_FLUX_CODES = {NumericalFlux.CENTRAL: 0, NumericalFlux.UPWIND: 1, NumericalFlux.LLF: 2}


def run(config: ExperimentConfig) -> RunRecord:
    """Set up the problem described by *config* and integrate it."""
    from cprfilter.config import initial_state

    state = initial_state(config)
    spec = config.filter_spec()
    try:
        record = integrate(
            state,
            dt=config.dt,
            steps=config.steps,
            strategy=config.strategy,
            spec=spec,
            norm_epsilon=config.norm_epsilon,
        )
    except BlowUpError as exc:
        if exc.record is not None:
            exc.record.metadata.update(config.as_dict())
        raise

    record.metadata.update(config.as_dict())
    return record


# }}}
