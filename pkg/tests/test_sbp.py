from __future__ import annotations

import numpy as np
import numpy.polynomial.legendre as npleg
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cprfilter.legendre import legendre_vandermonde
from cprfilter.sbp import (
    BasisKind,
    build_operators,
    function_multiplication_operator,
    mult_adjoint,
    multiplication_operator,
    sbp_residual,
)

KINDS = list(BasisKind)

coefficients = st.integers(1, 9).flatmap(
    lambda p: st.tuples(
        st.just(p),
        arrays(np.float64, p + 1, elements=st.floats(-10.0, 10.0)),
        arrays(np.float64, p + 1, elements=st.floats(-10.0, 10.0)),
    )
)


def _modal_truth(p: int):
    """Independent modal differentiation via numpy's Legendre series."""
    D = np.zeros((p + 1, p + 1))
    for n in range(p + 1):
        d = npleg.legder(np.eye(p + 1)[n])
        D[: d.size, n] = d
    return D


# {{{ construction


def test_modal_p1_example():
    ops = build_operators("modal", 1)
    np.testing.assert_allclose(ops.M, np.diag([2.0, 2.0 / 3.0]))
    np.testing.assert_allclose(ops.D, [[0.0, 1.0], [0.0, 0.0]])
    np.testing.assert_allclose(ops.R, [[1.0, -1.0], [1.0, 1.0]])
    np.testing.assert_allclose(ops.B, np.diag([-1.0, 1.0]))


@pytest.mark.parametrize("p", range(1, 16))
def test_modal_derivative_matches_numpy(p):
    np.testing.assert_allclose(build_operators("modal", p).D, _modal_truth(p), atol=1e-12)


@pytest.mark.parametrize(
    ("kind", "p", "tol"),
    [("modal", 3, 1e-13), ("gauss", 7, 1e-12), ("lobatto", 7, 1e-12)],
)
def test_sbp_residual_examples(kind, p, tol):
    assert sbp_residual(build_operators(kind, p)) <= tol


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("p", [1, 2, 4, 8, 12, 15])
def test_sbp_property_all_degrees(kind, p):
    assert sbp_residual(build_operators(kind, p)) <= 1e-11


@pytest.mark.parametrize("kind", KINDS)
def test_restriction_of_constants(kind):
    ops = build_operators(kind, 5)
    c = ops.to_nodal(np.eye(6)[0]) * 3.25
    np.testing.assert_allclose(ops.R @ c, [3.25, 3.25], rtol=1e-13)


@pytest.mark.parametrize("p", [0, -1, 2.5])
def test_invalid_degree_rejected(p):
    with pytest.raises(ValueError):
        build_operators("gauss", p)


def test_nodal_mass_is_quadrature_weights():
    for kind in ("gauss", "lobatto"):
        ops = build_operators(kind, 6)
        np.testing.assert_allclose(np.diag(ops.M), ops.vandermonde.rule.weights)
        assert np.count_nonzero(ops.M - np.diag(np.diag(ops.M))) == 0


# }}}


# {{{ properties


@pytest.mark.parametrize("kind", KINDS)
@given(data=coefficients)
def test_discrete_integration_by_parts(kind, data):
    p, u, v = data
    ops = build_operators(kind, p)
    lhs = u @ ops.M @ ops.D @ v + u @ ops.D.T @ ops.M @ v
    rhs = u @ ops.R.T @ ops.B @ ops.R @ v
    scale = 1.0 + np.linalg.norm(u) * np.linalg.norm(v)
    assert abs(lhs - rhs) <= 1e-11 * scale


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("p", [1, 3, 7, 10])
def test_derivative_of_monomials(kind, p):
    ops = build_operators(kind, p)
    for k in range(p + 1):
        mono = np.zeros(k + 1)
        mono[k] = 1.0
        # monomial and its derivative as Legendre series
        c = np.zeros(p + 1)
        c[: k + 1] = npleg.poly2leg(mono)
        dc = np.zeros(p + 1)
        d = npleg.legder(c)
        dc[: d.size] = d
        got = ops.D @ ops.to_nodal(c)
        np.testing.assert_allclose(got, ops.to_nodal(dc), atol=1e-11 * max(1, k), err_msg=k)


def test_gauss_change_of_basis_gives_modal_derivative():
    for p in (3, 7, 15):
        ops = build_operators("gauss", p)
        Vm = ops.vandermonde.matrix
        np.testing.assert_allclose(
            ops.vandermonde.inverse @ ops.D @ Vm, _modal_truth(p), atol=1e-11 * p
        )


@pytest.mark.parametrize("kind", KINDS)
def test_derivative_annihilates_constants(kind):
    ops = build_operators(kind, 9)
    one = ops.to_nodal(np.eye(10)[0])
    assert np.max(np.abs(ops.D @ one)) <= 1e-12


# }}}


# {{{ multiplication


def test_modal_product_example():
    ops = build_operators("modal", 2)
    A = multiplication_operator(np.array([0.0, 1.0, 0.0]), ops)
    np.testing.assert_allclose(A[:, 1], [1 / 3, 0.0, 2 / 3], atol=1e-14)


@given(data=coefficients)
def test_modal_product_is_truncated_legmul(data):
    p, u, v = data
    ops = build_operators("modal", p)
    exact = npleg.legmul(u, v)
    expected = np.zeros(p + 1)
    expected[: min(p + 1, exact.size)] = exact[: p + 1]
    got = multiplication_operator(u, ops) @ v
    assert np.max(np.abs(got - expected)) <= 1e-12 * (1 + np.max(np.abs(u)) * np.max(np.abs(v)))


def test_modal_product_against_oversampled_quadrature(rng):
    p = 5
    ops = build_operators("modal", p)
    u = rng.standard_normal(p + 1)
    x, w = npleg.leggauss(4 * p)
    V, _ = legendre_vandermonde(p, x)
    oracle = (V.T * w) @ ((V @ u)[:, None] * V) / (2.0 / (2 * np.arange(p + 1) + 1))[:, None]
    np.testing.assert_allclose(multiplication_operator(u, ops), oracle, atol=1e-13)


@pytest.mark.parametrize("kind", KINDS)
def test_multiplication_by_constant_is_scaled_identity(kind):
    ops = build_operators(kind, 4)
    c = ops.to_nodal(np.eye(5)[0]) * -1.5
    np.testing.assert_allclose(multiplication_operator(c, ops), -1.5 * np.eye(5), atol=1e-13)
    np.testing.assert_allclose(mult_adjoint(c, ops), -1.5 * np.eye(5), atol=1e-13)


@pytest.mark.parametrize("kind", ["gauss", "lobatto"])
def test_nodal_multiplication_is_pointwise(kind, rng):
    ops = build_operators(kind, 6)
    u, v = rng.standard_normal((2, 7))
    np.testing.assert_array_equal(multiplication_operator(u, ops) @ v, u * v)
    np.testing.assert_array_equal(mult_adjoint(u, ops), multiplication_operator(u, ops))


@pytest.mark.parametrize("kind", KINDS)
def test_adjoint_identity(kind, rng):
    ops = build_operators(kind, 7)
    u = rng.standard_normal(8)
    lhs = ops.M @ mult_adjoint(u, ops)
    rhs = multiplication_operator(u, ops).T @ ops.M
    np.testing.assert_allclose(lhs, rhs, atol=1e-13)


def test_multiplication_batches_over_elements(rng):
    ops = build_operators("modal", 3)
    u = rng.standard_normal((5, 4))
    A = multiplication_operator(u, ops)
    assert A.shape == (5, 4, 4)
    np.testing.assert_allclose(A[2], multiplication_operator(u[2], ops), atol=1e-15)


def test_multiplication_rejects_wrong_length():
    with pytest.raises(ValueError):
        multiplication_operator(np.ones(3), build_operators("gauss", 3))


def test_function_multiplication_projects_quadratic():
    p = 4
    ops = build_operators("modal", p)
    A = function_multiplication_operator(lambda x: 1.0 - x**2, ops)
    a = npleg.poly2leg([1.0, 0.0, -1.0])
    for n in range(p + 1):
        exact = npleg.legmul(a, np.eye(p + 1)[n])
        expected = np.zeros(p + 1)
        expected[: min(p + 1, exact.size)] = exact[: p + 1]
        np.testing.assert_allclose(A[:, n], expected, atol=1e-13)


# }}}
