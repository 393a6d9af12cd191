r"""
Summation-by-parts operators on the reference element
-----------------------------------------------------

Every basis provides a mass matrix :math:`M`, a derivative :math:`D`, a
restriction :math:`R` to the boundary points :math:`(-1, +1)` and the boundary
integration :math:`B = \mathrm{diag}(-1, 1)`, such that

.. math::

    M D + D^T M = R^T B R.

Nodal bases multiply pointwise; the modal Legendre basis multiplies exactly and
then projects back onto polynomials of degree :math:`\le p`.

.. autoclass:: BasisKind
.. autoclass:: OperatorSet
.. autofunction:: build_operators
.. autofunction:: multiplication_operator
.. autofunction:: mult_adjoint
.. autofunction:: sbp_residual
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable

import numpy as np

from cprfilter.legendre import (
    Vandermonde,
    gauss_rule,
    legendre_norms,
    legendre_vandermonde,
    lobatto_rule,
)

Array = Any

BOUNDARY_MATRIX = np.diag([-1.0, 1.0])


class BasisKind(enum.Enum):
    MODAL = "modal"
    GAUSS = "gauss"
    LOBATTO = "lobatto"

    @property
    def is_nodal(self) -> bool:
        return self is not BasisKind.MODAL


def _product_rule_size(p: int) -> int:
    # exact for the degree 3p triple products and for a(x) phi_m phi_n with deg a = 2
    return max(-(-(3 * p + 1) // 2), p + 2)


@dataclass(frozen=True, eq=False)
class OperatorSet:
    """SBP operators of one basis on :math:`[-1, 1]`.

    .. attribute:: vandermonde

        Legendre Vandermonde matrix on the nodes for nodal bases, *None* for
        the modal basis (where modal and basis coefficients coincide).
    """

    kind: BasisKind
    degree: int
    M: Array
    D: Array
    R: Array
    B: Array
    vandermonde: Vandermonde | None

    @property
    def size(self) -> int:
        return self.degree + 1

    @property
    def nodes(self) -> Array | None:
        return None if self.vandermonde is None else self.vandermonde.rule.nodes

    @cached_property
    def mass_diagonal(self) -> Array:
        return np.diag(self.M).copy()

    @cached_property
    def mass_weights(self) -> Array:
        """:math:`1^T M`, the row vector that integrates basis coefficients."""
        return self.to_nodal(np.eye(self.size)[0]) * self.mass_diagonal

    @cached_property
    def lift(self) -> Array:
        """The SAT lifting matrix :math:`M^{-1} R^T B` of shape ``(p + 1, 2)``."""
        return (self.R.T @ self.B) / self.mass_diagonal[:, None]

    @cached_property
    def to_modal_matrix(self) -> Array:
        if self.vandermonde is None:
            return np.eye(self.size)
        return self.vandermonde.inverse

    @cached_property
    def to_nodal_matrix(self) -> Array:
        if self.vandermonde is None:
            return np.eye(self.size)
        return self.vandermonde.matrix.copy()

    @cached_property
    def modal_norms(self) -> Array:
        r"""Discrete squared norms :math:`\|\phi_n\|_M^2` of the Legendre modes.

        These equal :math:`2 / (2n + 1)` except for the top mode of the
        lumped Lobatto basis.
        """
        if self.vandermonde is None:
            return self.mass_diagonal.copy()
        V = self.vandermonde.matrix
        return np.einsum("in,i,in->n", V, self.mass_diagonal, V)

    def to_modal(self, u: Array) -> Array:
        """Legendre coefficients of the basis coefficients *u* (last axis)."""
        if self.vandermonde is None:
            return np.asarray(u, dtype=np.float64)
        return np.asarray(u) @ self.to_modal_matrix.T

    def to_nodal(self, uhat: Array) -> Array:
        if self.vandermonde is None:
            return np.asarray(uhat, dtype=np.float64)
        return np.asarray(uhat) @ self.to_nodal_matrix.T

    @cached_property
    def product_tensor(self) -> Array:
        r"""Modal products ``T[k, m, n]`` with
        :math:`\phi_k \phi_n \approx \sum_m T_{kmn} \phi_m` (exact projection).
        """
        p = self.degree
        rule = gauss_rule(_product_rule_size(p))
        V, _ = legendre_vandermonde(p, rule.nodes)
        T = np.einsum("q,qk,qm,qn->kmn", rule.weights, V, V, V)
        return T / legendre_norms(p)[None, :, None]

    def evaluate(self, u: Array, x: Array) -> Array:
        """Evaluate the polynomials with coefficients *u* at reference points *x*."""
        V, _ = legendre_vandermonde(self.degree, x)
        return self.to_modal(u) @ V.T


def _nodal_operators(kind: BasisKind, p: int) -> OperatorSet:
    rule = gauss_rule(p + 1) if kind is BasisKind.GAUSS else lobatto_rule(p + 1)
    V = Vandermonde(rule, p)
    Vinv = V.inverse

    _, Vx = legendre_vandermonde(p, rule.nodes)
    D = Vx @ Vinv

    Vb, _ = legendre_vandermonde(p, np.array([-1.0, 1.0]))
    R = Vb @ Vinv
    if kind is BasisKind.LOBATTO:
        R = np.zeros((2, p + 1))
        R[0, 0] = R[1, -1] = 1.0

    # D annihilates constants exactly
    D[np.diag_indices(p + 1)] -= D.sum(axis=1)

    return OperatorSet(
        kind=kind,
        degree=p,
        M=np.diag(rule.weights),
        D=D,
        R=R,
        B=BOUNDARY_MATRIX.copy(),
        vandermonde=V,
    )


def _modal_operators(p: int) -> OperatorSet:
    m, n = np.meshgrid(np.arange(p + 1), np.arange(p + 1), indexing="ij")
    # P'_n = sum_{m < n, n - m odd} (2m + 1) P_m
    D = np.where((n > m) & ((n - m) % 2 == 1), 2.0 * m + 1.0, 0.0)

    R = np.empty((2, p + 1))
    R[0] = (-1.0) ** np.arange(p + 1)
    R[1] = 1.0

    return OperatorSet(
        kind=BasisKind.MODAL,
        degree=p,
        M=np.diag(legendre_norms(p)),
        D=D,
        R=R,
        B=BOUNDARY_MATRIX.copy(),
        vandermonde=None,
    )


def build_operators(kind: BasisKind | str, p: int) -> OperatorSet:
    """Assemble :math:`M, D, R, B` for a basis of polynomials of degree *p*.

    The Lobatto basis uses the lumped (diagonal quadrature) mass matrix.
    """
    kind = BasisKind(kind)
    if not isinstance(p, (int, np.integer)) or p < 1:
        raise ValueError(f"polynomial degree must be an integer >= 1: {p!r}")

    if kind is BasisKind.MODAL:
        return _modal_operators(int(p))
    return _nodal_operators(kind, int(p))


def sbp_residual(ops: OperatorSet) -> float:
    """Max-norm of :math:`M D + D^T M - R^T B R`."""
    MD = ops.M @ ops.D
    return float(np.max(np.abs(MD + MD.T - ops.R.T @ ops.B @ ops.R)))


# {{{ multiplication


def _check_coefficients(u: Array, ops: OperatorSet) -> Array:
    u = np.asarray(u, dtype=np.float64)
    if u.shape[-1] != ops.size:
        raise ValueError(f"expected {ops.size} coefficients, got {u.shape[-1]}")
    return u


def multiplication_operator(u: Array, ops: OperatorSet) -> Array:
    """Matrix of multiplication by the polynomial with coefficients *u*.

    Pointwise for nodal bases; exact product followed by the :math:`L_2`
    projection for the modal basis. A leading batch axis on *u* gives a
    stack of matrices.
    """
    u = _check_coefficients(u, ops)
    if ops.kind.is_nodal:
        return u[..., :, None] * np.eye(ops.size)
    return np.einsum("...k,kmn->...mn", u, ops.product_tensor)


def mult_adjoint(u: Array, ops: OperatorSet) -> Array:
    """:math:`M^{-1} \\underline{u}^T M`, the adjoint with respect to :math:`M`."""
    A = multiplication_operator(u, ops)
    if ops.kind.is_nodal:
        # diagonal times diagonal mass: self-adjoint without rounding
        return A
    m = ops.mass_diagonal
    return np.swapaxes(A, -1, -2) * m[None, :] / m[:, None]


def function_multiplication_operator(
    func: Callable[[Array], Array], ops: OperatorSet
) -> Array:
    """Multiplication by a function of the reference coordinate.

    Nodal bases sample *func* at the nodes; the modal basis projects the
    product with an oversampled Gauss rule (exact for polynomials *func* of
    degree :math:`\\le 2`).
    """
    if ops.kind.is_nodal:
        return np.diag(func(ops.nodes))

    p = ops.degree
    rule = gauss_rule(_product_rule_size(p))
    V, _ = legendre_vandermonde(p, rule.nodes)
    G = np.einsum("q,q,qm,qn->mn", rule.weights, func(rule.nodes), V, V)
    return G / legendre_norms(p)[:, None]


# }}}
