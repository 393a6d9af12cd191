from __future__ import annotations

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.optimize as sopt
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cprfilter.errors import DegenerateFilterError
from cprfilter.filtering import (
    ExponentScale,
    FilterSpec,
    adaptive_epsilon,
    adaptive_epsilon_elements,
    apply_filter,
    build_filter,
    build_viscosity,
    filter_factors,
    legendre_eigen_residuals,
    mode_eigenvalues,
    viscosity_spectrum,
)
from cprfilter.sbp import BasisKind, build_operators
from cprfilter.semidiscretisation import Mesh, make_rhs, project_initial_condition

KINDS = list(BasisKind)


def _energy(u, ops):
    return np.sum(u * u * ops.mass_diagonal, axis=-1)


# {{{ viscosity operator


@pytest.mark.parametrize("kind", KINDS)
def test_viscosity_annihilates_constants(kind):
    ops = build_operators(kind, 7)
    L = build_viscosity(ops).L
    one = ops.to_nodal(np.eye(8)[0])
    assert np.max(np.abs(L @ one)) <= 1e-13


@pytest.mark.parametrize(
    ("kind", "p", "expected"),
    [
        ("modal", 3, [-12, -6, -2, 0]),
        ("modal", 1, [-2, 0]),
        ("gauss", 7, [-56, -42, -30, -20, -12, -6, -2, 0]),
    ],
)
def test_viscosity_spectrum_examples(kind, p, expected):
    lam = viscosity_spectrum(build_viscosity(build_operators(kind, p)))
    np.testing.assert_allclose(lam, expected, atol=1e-8)


@pytest.mark.parametrize("kind", ["modal", "gauss"])
@pytest.mark.parametrize("p", range(1, 16))
def test_exact_spectrum_and_legendre_eigenvectors(kind, p):
    ops = build_operators(kind, p)
    visc = build_viscosity(ops)
    np.testing.assert_allclose(
        viscosity_spectrum(visc), np.sort(-mode_eigenvalues(p)), atol=1e-8 * p * (p + 1)
    )
    assert np.max(legendre_eigen_residuals(visc, ops)) <= 1e-8 * p * (p + 1)


@pytest.mark.parametrize("p", range(1, 16))
def test_lobatto_spectrum_deficiency(p):
    ops = build_operators("lobatto", p)
    visc = build_viscosity(ops)
    lam = list(viscosity_spectrum(visc))

    # the first p exact eigenvalues are present
    for n in range(p):
        target = -n * (n + 1.0)
        k = int(np.argmin(np.abs(np.array(lam) - target)))
        assert abs(lam[k] - target) <= 1e-8 * max(1.0, p * (p + 1)), n
        lam.pop(k)

    # the remaining one lies in (-p (p + 1), 0]
    (mu,) = lam
    assert -p * (p + 1) < mu <= 1e-8

    # lower modes are exact eigenvectors, the top mode is not
    res = legendre_eigen_residuals(visc, ops)
    assert np.max(res[:p]) <= 1e-8 * p * (p + 1)
    assert res[p] > 1e-3


def test_lobatto_p3_example():
    lam = viscosity_spectrum(build_viscosity(build_operators("lobatto", 3)))
    exact = [0.0, -2.0, -6.0]
    rest = list(lam)
    for target in exact:
        k = int(np.argmin(np.abs(np.array(rest) - target)))
        assert abs(rest.pop(k) - target) <= 1e-8
    assert -12.0 < rest[0] <= 1e-8


# }}}


# {{{ filter construction


def test_filter_spec_validation():
    with pytest.raises(ValueError):
        FilterSpec(order=0)
    with pytest.raises(ValueError):
        FilterSpec(epsilon=-1.0)
    with pytest.raises(ValueError):
        FilterSpec(epsilon=float("nan"))
    assert FilterSpec(epsilon=2.0).effective_epsilon(0.1) == pytest.approx(0.2)
    assert FilterSpec(epsilon=2.0, exponent_scale="unit").effective_epsilon(0.1) == 2.0


@pytest.mark.parametrize("kind", KINDS)
def test_zero_strength_is_identity(kind):
    F = build_filter(build_operators(kind, 6), FilterSpec(order=2), 0.0)
    np.testing.assert_allclose(F.matrix, np.eye(7), atol=1e-13)


def test_modal_diagonal_example():
    ops = build_operators("modal", 2)
    F = build_filter(ops, FilterSpec(order=1, exponent_scale=ExponentScale.UNIT), 1.0)
    np.testing.assert_allclose(F.modal_diagonal, [1.0, np.exp(-2.0), np.exp(-6.0)], rtol=1e-15)
    np.testing.assert_allclose(F.matrix, np.diag([1.0, np.exp(-2.0), np.exp(-6.0)]), rtol=1e-15)


def test_time_step_scale_multiplies_exponent():
    ops = build_operators("modal", 3)
    a = build_filter(ops, FilterSpec(order=2), 4.0, dt=0.25)
    b = build_filter(ops, FilterSpec(order=2, exponent_scale="unit"), 1.0, dt=0.25)
    np.testing.assert_allclose(a.matrix, b.matrix, rtol=1e-15)


@pytest.mark.parametrize("kind", KINDS)
@given(
    eps=st.floats(0.0, 1.0),
    order=st.integers(1, 3),
    p=st.integers(1, 12),
)
def test_filter_invariants(kind, eps, order, p):
    ops = build_operators(kind, p)
    F = build_filter(ops, FilterSpec(order=order, exponent_scale="unit"), eps)
    assert F.modal_diagonal[0] == 1.0
    assert np.all((F.modal_diagonal > 0.0) | (F.modal_diagonal == 0.0))
    assert np.all(F.modal_diagonal <= 1.0)

    # self-adjoint with respect to M
    MF = ops.M @ F.matrix
    assert np.max(np.abs(MF - MF.T)) <= 1e-12

    # constants are preserved
    one = ops.to_nodal(np.eye(p + 1)[0])
    np.testing.assert_allclose(F.matrix @ one, one, atol=1e-12)


@pytest.mark.parametrize("kind", ["modal", "gauss"])
@pytest.mark.parametrize("order", [1, 2, 3])
@pytest.mark.parametrize("p", [3, 7, 15])
def test_filter_is_matrix_exponential_of_viscosity(kind, order, p):
    ops = build_operators(kind, p)
    L = build_viscosity(ops).L
    eps, dt = 0.3 / (p * (p + 1.0)) ** order, 0.5
    expected = sla.expm(-eps * dt * np.linalg.matrix_power(-L, order))
    F = build_filter(ops, FilterSpec(order=order), eps, dt)
    np.testing.assert_allclose(F.matrix, expected, atol=1e-10)


@pytest.mark.parametrize("kind", KINDS)
@given(
    u=arrays(np.float64, 8, elements=st.floats(-10.0, 10.0)),
    eps=st.floats(0.0, 0.5),
)
def test_filter_conserves_mean(kind, u, eps):
    ops = build_operators(kind, 7)
    F = build_filter(ops, FilterSpec(order=1, exponent_scale="unit"), eps)
    # 1^T M for the coefficients of the constant function
    mean = ops.to_nodal(np.eye(8)[0]) * ops.mass_diagonal
    assert abs(mean @ apply_filter(F, u) - mean @ u) <= 1e-12 * (1 + np.max(np.abs(u)))


def test_filter_inverse_is_inverse():
    ops = build_operators("gauss", 5)
    F = build_filter(ops, FilterSpec(order=1, exponent_scale="unit"), 0.05)
    np.testing.assert_allclose(F.inverse_matrix @ F.matrix, np.eye(6), atol=1e-11)


def test_apply_filter_examples(rng):
    ops = build_operators("modal", 1)
    ident = build_filter(ops, FilterSpec(), 0.0)
    u = rng.standard_normal(2)
    np.testing.assert_allclose(apply_filter(ident, u), u)

    F = build_filter(ops, FilterSpec(exponent_scale="unit"), 0.7)
    d = np.exp(-2 * 0.7)
    np.testing.assert_allclose(apply_filter(F, [3.0, 5.0]), [3.0, 5.0 * d], rtol=1e-15)

    with pytest.raises(ValueError):
        apply_filter(F, np.ones(3))


def test_filter_factors_broadcast_over_elements():
    f = filter_factors(np.array([0.0, 0.1]), 2, 3)
    assert f.shape == (2, 4)
    np.testing.assert_allclose(f[1], np.exp(-0.1 * mode_eigenvalues(3) ** 2))


def test_build_filter_rejects_negative_strength():
    with pytest.raises(ValueError):
        build_filter(build_operators("modal", 2), FilterSpec(), -0.1)


# }}}


# {{{ adaptive strength


def _exact_root(uhat, norms, lam_s, target):
    """Independent oracle: the exact strength meeting the energy target."""
    g = lambda e: np.sum(np.exp(-2 * e * lam_s) * uhat**2 * norms) - target  # noqa: E731
    hi = 1.0
    while g(hi) > 0:
        hi *= 2.0
    return sopt.brentq(g, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps)


def test_adaptive_hand_example():
    ops = build_operators("modal", 1)
    u, du, dt = np.array([0.0, 1.0]), np.array([0.0, 1.0]), 0.1

    est = adaptive_epsilon(u, du, dt, 1, ops, refine=False)
    assert est == pytest.approx(0.01 / (4 * 1.21), rel=1e-14)
    assert est == pytest.approx(2.0661e-3, rel=1e-4)

    # the refined strength solves the exact condition, found independently
    norms = ops.modal_norms
    uh = u + dt * du
    target = _energy(u, ops) + 2 * dt * np.sum(u * du * ops.mass_diagonal)
    exact = _exact_root(uh, norms, mode_eigenvalues(1), target)
    refined = adaptive_epsilon(u, du, dt, 1, ops)
    assert est <= exact <= refined
    # twenty bisection steps on a bracket of relative width one half
    assert refined - exact <= 2.0**-20 * refined

    # to first order the estimate meets the condition
    filtered = np.sum(np.exp(-2 * est * mode_eigenvalues(1)) * uh**2 * norms)
    assert filtered - target <= 0.05 * dt**2 * _energy(du, ops)


@pytest.mark.parametrize("kind", KINDS)
def test_adaptive_zero_rate_gives_zero(kind, rng):
    ops = build_operators(kind, 5)
    u = rng.standard_normal(6)
    assert adaptive_epsilon(u, np.zeros(6), 0.01, 2, ops) == 0.0


def test_adaptive_degenerate_raises():
    ops = build_operators("modal", 3)
    dt = 0.05
    phi0, phi1 = np.eye(4)[0], np.eye(4)[1]
    with pytest.raises(DegenerateFilterError):
        adaptive_epsilon(phi0 - dt * phi1, phi1, dt, 1, ops)

    res = adaptive_epsilon_elements(phi0 - dt * phi1, phi1, dt, 1, ops)
    assert res.degenerate[0] and res.epsilon[0] == 0.0


def test_adaptive_input_validation():
    ops = build_operators("modal", 2)
    with pytest.raises(ValueError):
        adaptive_epsilon(np.ones(3), np.ones(3), 0.0, 1, ops)
    with pytest.raises(ValueError):
        adaptive_epsilon(np.ones(3), np.ones(4), 0.1, 1, ops)


def _smooth_states(draw_seed: int, kind: str, p: int, N: int, flux: str):
    rng = np.random.default_rng(draw_seed)
    k = rng.integers(1, 4, size=3)
    a = rng.standard_normal(3)
    ph = rng.uniform(0.0, 2 * np.pi, size=3)

    def f(x):
        return sum(a[i] * np.sin(np.pi * k[i] * x + ph[i]) for i in range(3))

    ops = build_operators(kind, p)
    mesh = Mesh(0.0, 2.0, N)
    u = project_initial_condition(f, ops, mesh)
    return ops, u, make_rhs(ops, mesh, "advection", flux)(u)


@pytest.mark.parametrize("kind", KINDS)
@given(
    seed=st.integers(0, 2**32 - 1),
    p=st.integers(2, 7),
    N=st.integers(1, 4),
    order=st.integers(1, 3),
    flux=st.sampled_from(["central", "upwind"]),
    log_dt=st.floats(-4.0, -2.0),
)
def test_adaptive_sufficiency_slack(kind, seed, p, N, order, flux, log_dt):
    dt = 10.0**log_dt
    # beyond this the exponent is O(1) and the first-order bound no longer applies
    assume(order <= 2 or dt <= 1e-3)

    ops, u, du = _smooth_states(seed, kind, p, N, flux)
    utilde = u + dt * du
    target = _energy(u, ops) + 2 * dt * np.sum(u * du * ops.mass_diagonal, axis=-1)
    floor = 1e-14 * _energy(u, ops)

    est = adaptive_epsilon_elements(u, du, dt, order, ops, refine=False).epsilon
    Fu = ops.to_modal(utilde) * filter_factors(est, order, p)
    E_est = np.sum(Fu**2 * ops.modal_norms, axis=-1)
    assert np.all(E_est <= _energy(utilde, ops) + floor)
    assert np.all(E_est - target <= 0.05 * dt**2 * _energy(du, ops) + floor)

    # the refined strength meets the exact condition wherever that is possible
    res = adaptive_epsilon_elements(u, du, dt, order, ops)
    Fu = ops.to_modal(utilde) * filter_factors(res.epsilon, order, p)
    E_ref = np.sum(Fu**2 * ops.modal_norms, axis=-1)
    ok = ~res.infeasible
    assert np.all(E_ref[ok] - target[ok] <= 1e-12 * (1 + _energy(u, ops)[ok]))
    assert np.all(res.epsilon >= res.estimate)


def test_adaptive_infeasible_keeps_estimate():
    # a constant element hit by a jump: the excess lives in the mean only
    ops = build_operators("modal", 3)
    u = np.array([1.0, 0.0, 0.0, 0.0])
    du = np.array([-1.0, 0.5, 0.0, 0.0])
    dt = 0.1
    res = adaptive_epsilon_elements(u, du, dt, 1, ops)
    assert res.infeasible[0]
    assert res.epsilon[0] == res.estimate[0]


# }}}
