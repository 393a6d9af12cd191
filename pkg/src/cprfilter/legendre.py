r"""
Legendre polynomials and quadrature on the reference element
------------------------------------------------------------

Polynomials are the classical (unnormalised) Legendre polynomials with
:math:`P_n(1) = 1`, so that :math:`\|P_n\|^2 = 2 / (2n + 1)` on :math:`[-1, 1]`.

.. autofunction:: legendre_eval
.. autofunction:: legendre_vandermonde
.. autofunction:: gauss_rule
.. autofunction:: lobatto_rule
.. autoclass:: Vandermonde
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.linalg as sla

from cprfilter.errors import ComputationError

Array = Any

NEWTON_MAXITER = 100


def legendre_eval(n: int, x: Array) -> Array:
    """Evaluate :math:`P_n` at *x* with the three-term recurrence."""
    if n < 0:
        raise ValueError(f"degree must be non-negative: {n}")

    x = np.asarray(x, dtype=np.float64)
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev if p_prev.ndim else float(p_prev)

    p = x.copy()
    for k in range(1, n):
        p_prev, p = p, ((2 * k + 1) * x * p - k * p_prev) / (k + 1)

    return p if p.ndim else float(p)


def legendre_vandermonde(p: int, x: Array) -> tuple[Array, Array]:
    """Evaluate :math:`P_0, \\dots, P_p` and their derivatives at *x*.

    :returns: a tuple ``(V, Vx)`` of arrays of shape ``(x.size, p + 1)``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    V = np.empty((x.size, p + 1))
    Vx = np.empty((x.size, p + 1))

    V[:, 0] = 1.0
    Vx[:, 0] = 0.0
    if p >= 1:
        V[:, 1] = x
        Vx[:, 1] = 1.0

    for k in range(1, p):
        V[:, k + 1] = ((2 * k + 1) * x * V[:, k] - k * V[:, k - 1]) / (k + 1)
        # P'_{k+1} = P'_{k-1} + (2k + 1) P_k
        Vx[:, k + 1] = Vx[:, k - 1] + (2 * k + 1) * V[:, k]

    return V, Vx


def _legendre_with_derivative(n: int, x: Array) -> tuple[Array, Array]:
    V, Vx = legendre_vandermonde(n, x)
    return V[:, n], Vx[:, n]


# {{{ quadrature


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes (ascending) and positive weights on :math:`[-1, 1]`.

    .. attribute:: exact_degree

        Highest polynomial degree integrated exactly.
    """

    nodes: Array
    weights: Array
    kind: str

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def exact_degree(self) -> int:
        q = self.nodes.size
        return 2 * q - 1 if self.kind == "gauss" else 2 * q - 3

    def integrate(self, fx: Array) -> Array:
        return fx @ self.weights


def gauss_rule(q: int) -> QuadratureRule:
    """Gauss-Legendre rule with *q* nodes, the roots of :math:`P_q`.

    Newton's method is started from the cosine-spaced guesses
    :math:`\\cos(\\pi (i + 3/4) / (q + 1/2))`.
    """
    if q < 1:
        raise ValueError(f"need at least one node: q = {q}")

    i = np.arange(q)
    x = -np.cos(np.pi * (i + 0.75) / (q + 0.5))

    for _ in range(NEWTON_MAXITER):
        P, dP = _legendre_with_derivative(q, x)
        dx = P / dP
        x = x - dx
        if np.max(np.abs(dx)) < 1.0e-15:
            break
    else:
        raise ComputationError(f"Gauss node iteration did not converge for q = {q}")

    _, dP = _legendre_with_derivative(q, x)
    w = 2.0 / ((1.0 - x**2) * dP**2)

    return QuadratureRule(nodes=x, weights=w, kind="gauss")


def lobatto_rule(q: int) -> QuadratureRule:
    """Lobatto-Legendre rule with *q* nodes including both endpoints.

    The interior nodes are the roots of :math:`P'_{q - 1}`.
    """
    if q < 2:
        raise ValueError(f"Lobatto rules need at least two nodes: q = {q}")

    n = q - 1
    x = -np.cos(np.pi * np.arange(1, n) / n)

    if x.size:
        for _ in range(NEWTON_MAXITER):
            P, dP = _legendre_with_derivative(n, x)
            # Legendre's equation gives P'' without another recurrence
            ddP = (2.0 * x * dP - n * (n + 1) * P) / (1.0 - x**2)
            dx = dP / ddP
            x = x - dx
            if np.max(np.abs(dx)) < 1.0e-15:
                break
        else:
            raise ComputationError(
                f"Lobatto node iteration did not converge for q = {q}"
            )

    x = np.concatenate([[-1.0], x, [1.0]])
    P = legendre_eval(n, x)
    w = 2.0 / (n * (n + 1) * P**2)

    return QuadratureRule(nodes=x, weights=w, kind="lobatto")


# }}}


# {{{ modal <-> nodal


@dataclass(frozen=True)
class Vandermonde:
    """Legendre Vandermonde matrix ``V[i, n] = P_n(x_i)`` on a quadrature rule.

    The LU factorisation is computed once on construction.
    """

    rule: QuadratureRule
    degree: int
    matrix: Array = field(init=False)
    _lu: tuple[Array, Array] | None = field(init=False, repr=False)

    def __post_init__(self) -> None:
        V, _ = legendre_vandermonde(self.degree, self.rule.nodes)
        object.__setattr__(self, "matrix", V)

        lu = None
        if V.shape[0] == V.shape[1]:
            # singularity is reported through the pivot test below
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", sla.LinAlgWarning)
                lu = sla.lu_factor(V, check_finite=True)
            pivots = np.abs(np.diag(lu[0]))
            if np.min(pivots) <= 1.0e-14 * np.max(pivots):
                lu = None
        object.__setattr__(self, "_lu", lu)

    @property
    def is_invertible(self) -> bool:
        return self._lu is not None

    def _require_lu(self) -> tuple[Array, Array]:
        if self._lu is None:
            raise ComputationError("Vandermonde matrix is not square and invertible")
        return self._lu

    @property
    def inverse(self) -> Array:
        return sla.lu_solve(self._require_lu(), np.eye(self.degree + 1))

    def nodal_to_modal(self, values: Array) -> Array:
        """Apply :math:`V^{-1}` along the last axis of *values*."""
        values = np.asarray(values, dtype=np.float64)
        if values.shape[-1] != self.degree + 1:
            raise ValueError(
                f"expected {self.degree + 1} coefficients, got {values.shape[-1]}"
            )
        flat = values.reshape(-1, self.degree + 1).T
        return sla.lu_solve(self._require_lu(), flat).T.reshape(values.shape)

    def modal_to_nodal(self, coeffs: Array) -> Array:
        coeffs = np.asarray(coeffs, dtype=np.float64)
        if coeffs.shape[-1] != self.degree + 1:
            raise ValueError(
                f"expected {self.degree + 1} coefficients, got {coeffs.shape[-1]}"
            )
        return coeffs @ self.matrix.T


def nodal_to_modal(values: Array, V: Vandermonde) -> Array:
    return V.nodal_to_modal(values)


def modal_to_nodal(coeffs: Array, V: Vandermonde) -> Array:
    return V.modal_to_nodal(coeffs)


def legendre_norms(p: int) -> Array:
    """Squared norms :math:`2 / (2n + 1)` of :math:`P_0, \\dots, P_p`."""
    n = np.arange(p + 1)
    return 2.0 / (2.0 * n + 1.0)


# }}}
