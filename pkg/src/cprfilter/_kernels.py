"""Compiled inner loops for :func:`cprfilter.timestepping.integrate`.

These mirror the numpy implementations in :mod:`cprfilter.semidiscretisation`
and :mod:`cprfilter.filtering`, which remain the reference; the test-suite
checks that both agree.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# codes shared with the Python side
ADVECTION, BURGERS = 0, 1
CENTRAL, UPWIND, LLF = 0, 1, 2
NONE, SPLIT, DERIVATIVE, SOLUTION = 0, 1, 2, 3

BLOWUP_THRESHOLD = 1.0e10
DEGENERATE_RTOL = 1.0e-14
BISECTION_STEPS = 20
BRACKET_DOUBLINGS = 200


@njit(cache=True)
def _numerical_flux(equation, flux, um, up):
    if equation == ADVECTION:
        if flux == CENTRAL:
            return 0.5 * (um + up)
        return um
    if flux == CENTRAL:
        return 0.25 * (um * um + up * up)
    if flux == UPWIND:
        return 0.5 * um * um
    speed = max(abs(um), abs(up))
    return 0.25 * (um * um + up * up) - 0.5 * speed * (up - um)


@njit(cache=True)
def rhs_kernel(u, out, equation, flux, nodal, D, R, lift, T, m, J):
    N, n = u.shape
    traces = np.empty((N, 2))
    for e in range(N):
        a = 0.0
        b = 0.0
        for j in range(n):
            a += R[0, j] * u[e, j]
            b += R[1, j] * u[e, j]
        traces[e, 0] = a
        traces[e, 1] = b

    fnum = np.empty(N)
    for e in range(N):
        fnum[e] = _numerical_flux(equation, flux, traces[e - 1, 1], traces[e, 0])

    bnd = np.empty(2)
    uu = np.empty(n)
    Du = np.empty(n)
    A = np.empty((n, n))

    for e in range(N):
        fl = fnum[e]
        fr = fnum[(e + 1) % N]

        if equation == ADVECTION:
            bnd[0] = fl - traces[e, 0]
            bnd[1] = fr - traces[e, 1]
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc += D[i, j] * u[e, j]
                out[e, i] = (-acc - lift[i, 0] * bnd[0] - lift[i, 1] * bnd[1]) / J
            continue

        # Burgers, skew-symmetric split form
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += D[i, j] * u[e, j]
            Du[i] = acc

        if nodal:
            for i in range(n):
                uu[i] = u[e, i] * u[e, i]
        else:
            for i in range(n):
                for j in range(n):
                    acc = 0.0
                    for k in range(n):
                        acc += u[e, k] * T[k, i, j]
                    A[i, j] = acc
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc += A[i, j] * u[e, j]
                uu[i] = acc

        ruu0 = 0.0
        ruu1 = 0.0
        for j in range(n):
            ruu0 += R[0, j] * uu[j]
            ruu1 += R[1, j] * uu[j]
        bnd[0] = fl - ruu0 / 3.0 - traces[e, 0] ** 2 / 6.0
        bnd[1] = fr - ruu1 / 3.0 - traces[e, 1] ** 2 / 6.0

        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += D[i, j] * uu[j]
            if nodal:
                adj = u[e, i] * Du[i]
            else:
                adj = 0.0
                for j in range(n):
                    adj += A[j, i] * m[j] * Du[j]
                adj /= m[i]
            out[e, i] = (
                -acc / 3.0 - adj / 3.0 - lift[i, 0] * bnd[0] - lift[i, 1] * bnd[1]
            ) / J


@njit(cache=True)
def _apply_rows(Mat, u, out):
    # out[e] = Mat @ u[e]
    N, n = u.shape
    for e in range(N):
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += Mat[i, j] * u[e, j]
            out[e, i] = acc


@njit(cache=True)
def _filtered_energy(uh2n, lam_s, eps):
    acc = 0.0
    for i in range(uh2n.size):
        acc += math.exp(-2.0 * eps * lam_s[i]) * uh2n[i]
    return acc


@njit(cache=True)
def adaptive_kernel(u, du, dt, lam_s, norms, Q, P, out, eps_out, flags):
    """Split step with adaptive strength; ``flags[e]`` is 1 if degenerate, 2 if infeasible."""
    N, n = u.shape
    ut = np.empty(n)
    uh = np.empty(n)
    uh2n = np.empty(n)
    for e in range(N):
        for i in range(n):
            ut[i] = u[e, i] + dt * du[e, i]

        num = 0.0
        tot = 0.0
        den = 0.0
        for i in range(n):
            a = 0.0
            d = 0.0
            for j in range(n):
                a += Q[i, j] * ut[j]
                d += Q[i, j] * du[e, j]
            uh[i] = a
            uh2n[i] = a * a * norms[i]
            num += d * d * norms[i]
            tot += uh2n[i]
            den += 2.0 * lam_s[i] * uh2n[i]
        num *= dt * dt

        flags[e] = 0
        eps = 0.0
        if num > 0.0:
            if den <= DEGENERATE_RTOL * tot:
                flags[e] = 1
            else:
                est = num / den
                target = tot - num
                hi = est
                if target <= uh2n[0]:
                    # below the energy of the untouched constant mode
                    flags[e] = 2
                    lo = hi
                else:
                    pending = _filtered_energy(uh2n, lam_s, hi) > target
                    for _ in range(BRACKET_DOUBLINGS):
                        if not pending:
                            break
                        hi *= 2.0
                        pending = _filtered_energy(uh2n, lam_s, hi) > target

                    if pending:
                        flags[e] = 2
                        hi = est
                        lo = est
                    elif hi > est:
                        lo = max(hi / 2.0, est)
                    else:
                        lo = est

                for _ in range(BISECTION_STEPS):
                    if hi - lo <= 1.0e-15 * hi:
                        break
                    mid = 0.5 * (lo + hi)
                    if _filtered_energy(uh2n, lam_s, mid) <= target:
                        hi = mid
                    else:
                        lo = mid
                eps = hi

        eps_out[e] = eps
        if eps == 0.0:
            # unfiltered elements skip the round trip through modal space
            for i in range(n):
                out[e, i] = ut[i]
            continue
        for i in range(n):
            uh[i] *= math.exp(-eps * lam_s[i])
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += P[i, j] * uh[j]
            out[e, i] = acc


@njit(cache=True)
def _reduce(u, m, w, Q, inv_norm, J):
    N, n = u.shape
    mass = 0.0
    energy = 0.0
    efinv = 0.0
    for e in range(N):
        for i in range(n):
            mass += w[i] * u[e, i]
            energy += m[i] * u[e, i] * u[e, i]
            a = 0.0
            for j in range(n):
                a += Q[i, j] * u[e, j]
            efinv += inv_norm[e, i] * a * a
    return J * mass, J * energy, J * efinv


@njit(cache=True)
def integrate_kernel(
    u, dt, steps, strategy, adaptive, equation, flux, nodal,
    D, R, lift, T, m, w, J, Q, P, norms, lam_s, F, eps_fixed, inv_norm,
    mass, energy, efinv, eps_applied, emid, etarget,
):
    """Run the Euler loop in place; returns ``(completed, blowup_step, n_degenerate, n_infeasible)``."""
    N, n = u.shape
    du = np.empty_like(u)
    work = np.empty_like(u)
    u_new = np.empty_like(u)
    eps = np.zeros(N)
    flags = np.zeros(N, dtype=np.int64)

    mass[0], energy[0], efinv[0] = _reduce(u, m, w, Q, inv_norm, J)
    emid[0] = energy[0]
    etarget[0] = energy[0]

    n_degenerate = 0
    n_infeasible = 0
    completed = 0
    blowup = -1

    for k in range(1, steps + 1):
        if strategy == SOLUTION:
            _apply_rows(F, u, work)
            rhs_kernel(work, du, equation, flux, nodal, D, R, lift, T, m, J)
        else:
            rhs_kernel(u, du, equation, flux, nodal, D, R, lift, T, m, J)
        if strategy == DERIVATIVE:
            _apply_rows(F, du, work)
            du[:, :] = work

        em = 0.0
        ip = 0.0
        for e in range(N):
            for i in range(n):
                v = u[e, i] + dt * du[e, i]
                work[e, i] = v
                em += m[i] * v * v
                ip += m[i] * u[e, i] * du[e, i]
        emid[k] = J * em
        etarget[k] = energy[k - 1] + 2.0 * dt * J * ip

        if strategy == SPLIT:
            if adaptive:
                adaptive_kernel(u, du, dt, lam_s, norms, Q, P, u_new, eps, flags)
                for e in range(N):
                    eps_applied[k, e] = eps[e]
                    if flags[e] == 1:
                        n_degenerate += 1
                    elif flags[e] == 2:
                        n_infeasible += 1
                    for i in range(n):
                        inv_norm[e, i] = norms[i] * math.exp(eps[e] * lam_s[i])
            else:
                _apply_rows(F, work, u_new)
                for e in range(N):
                    eps_applied[k, e] = eps_fixed
        else:
            u_new[:, :] = work
            for e in range(N):
                eps_applied[k, e] = eps_fixed

        bad = False
        for e in range(N):
            for i in range(n):
                if not abs(u_new[e, i]) <= BLOWUP_THRESHOLD:
                    bad = True
        if bad:
            blowup = k
            break

        u[:, :] = u_new
        mass[k], energy[k], efinv[k] = _reduce(u, m, w, Q, inv_norm, J)
        completed = k

    return completed, blowup, n_degenerate, n_infeasible
