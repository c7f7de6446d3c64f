"""Compiled run loops.

Two gradient backends cover every kernelized run: a dense affine field
v(omega) = J_eff @ omega + v0_eff for full-batch runs on any of the testbeds
(the runner folds the gradient-scale convention into J_eff, v0_eff), and a
minibatch backend for the finite-sum bilinear problem that exploits the
one-hot coupling (a batch phase costs O(B*d)).

These loops intentionally re-implement the update rules in flat array form;
the plain step functions in minmaxlab.optimizers are the readable reference
path, and the two are cross-checked against each other in the test suite.

Series codes in the emitted rows: 0 fast, 1 slow, 2 super-slow, 3 ema, 4 uma.
"""

from __future__ import annotations

import numpy as np
from numba import njit

SER_FAST, SER_SLOW, SER_SSLOW, SER_EMA, SER_UMA = 0, 1, 2, 3, 4
SERIES_NAMES = ("fast", "slow", "super_slow", "ema", "uma")

(M_GDA_SIM, M_GDA_ALT, M_EG, M_OGDA, M_ADAM, M_EXTRA_ADAM,
 M_UNROLL_Y, M_UNROLL_XY) = range(8)

METHOD_CODES = {
    "gda-sim": M_GDA_SIM,
    "gda-alt": M_GDA_ALT,
    "eg": M_EG,
    "ogda": M_OGDA,
    "adam": M_ADAM,
    "extra-adam": M_EXTRA_ADAM,
    "unroll-y": M_UNROLL_Y,
    "unroll-xy": M_UNROLL_XY,
}


@njit(cache=True, nogil=True)
def _dist(x, opt, inv0):
    acc = 0.0
    for i in range(x.shape[0]):
        diff = x[i] - opt[i]
        acc += diff * diff
    return np.sqrt(acc) * inv0


@njit(cache=True, nogil=True)
def _emit(rows_u, rows_p, rows_d, rows_s, m, t, passes, omega, slow, sslow,
          ema, uma, opt, inv0, has_slow, has_sslow, ema_on, uma_on):
    rows_u[m] = t
    rows_p[m] = passes
    rows_d[m] = _dist(omega, opt, inv0)
    rows_s[m] = SER_FAST
    m += 1
    if has_slow:
        rows_u[m] = t; rows_p[m] = passes
        rows_d[m] = _dist(slow, opt, inv0); rows_s[m] = SER_SLOW
        m += 1
    if has_sslow:
        rows_u[m] = t; rows_p[m] = passes
        rows_d[m] = _dist(sslow, opt, inv0); rows_s[m] = SER_SSLOW
        m += 1
    if ema_on > 0:
        rows_u[m] = t; rows_p[m] = passes
        rows_d[m] = _dist(ema, opt, inv0); rows_s[m] = SER_EMA
        m += 1
    if uma_on:
        rows_u[m] = t; rows_p[m] = passes
        rows_d[m] = _dist(uma, opt, inv0); rows_s[m] = SER_UMA
        m += 1
    return m


@njit(cache=True, nogil=True)
def _backtrack(omega, slow, a_t, a_p, d_theta):
    for i in range(omega.shape[0]):
        a = a_t if i < d_theta else a_p
        omega[i] = (1.0 - a) * slow[i] + a * omega[i]
    for i in range(omega.shape[0]):
        slow[i] = omega[i]


@njit(cache=True, nogil=True)
def _adam_dir(mom, sec, t, beta1, beta2, eps, g, out):
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for i in range(g.shape[0]):
        mom[i] = beta1 * mom[i] + (1.0 - beta1) * g[i]
        sec[i] = beta2 * sec[i] + (1.0 - beta2) * g[i] * g[i]
        out[i] = (mom[i] / bc1) / (np.sqrt(sec[i] / bc2) + eps)


@njit(cache=True, nogil=True)
def _affine_v(jac, v0, omega, out):
    n = omega.shape[0]
    for i in range(n):
        acc = v0[i]
        for j in range(n):
            acc += jac[i, j] * omega[j]
        out[i] = acc


@njit(cache=True, nogil=True)
def _sbg_v(b_mat, c_mat, gscale, idx, omega, d, out):
    """Own-loss joint field of the one-hot finite-sum bilinear game over a
    batch, times gscale; out[:d] is the min player, out[d:] the max player."""
    bsz = idx.shape[0]
    inv = gscale / bsz
    for k in range(2 * d):
        out[k] = 0.0
    for j in range(bsz):
        i = idx[j]
        for k in range(d):
            out[k] += b_mat[i, k] * inv
            out[d + k] -= c_mat[i, k] * inv
    for j in range(bsz):
        i = idx[j]
        out[i] += omega[d + i] * inv
        out[d + i] -= omega[i] * inv


@njit(cache=True, nogil=True)
def _track(ema, uma, uma_count, omega, ema_on, ema_beta, uma_on, backtracked, slow):
    if ema_on == 1:
        for i in range(omega.shape[0]):
            ema[i] += (1.0 - ema_beta) * (omega[i] - ema[i])
    elif ema_on == 2 and backtracked:
        for i in range(omega.shape[0]):
            ema[i] += (1.0 - ema_beta) * (slow[i] - ema[i])
    if uma_on:
        uma_count += 1
        for i in range(omega.shape[0]):
            uma[i] += (omega[i] - uma[i]) / uma_count
    return uma_count


@njit(cache=True, nogil=True)
def run_kernel(
    backend,            # 0 = affine full batch, 1 = finite-sum minibatch
    method,
    jac, v0,            # affine backend (gradient scale folded in)
    b_mat, c_mat, gscale, idx,   # minibatch backend
    omega0, d_theta,
    eta_t, eta_p, ratio,
    beta1, beta2, eps,
    m_unroll, exact_unroll, sens,
    k_s, a_t, a_p, k_ss, a_ss,
    ema_on, ema_beta, uma_on,
    n_updates, ppu, stride, cutoff_abs,
    opt, inv0,
    rows_u, rows_p, rows_d, rows_s,
):
    n = omega0.shape[0]
    d_phi_start = d_theta
    omega = omega0.copy()
    slow = omega0.copy()
    sslow = omega0.copy()
    ema = omega0.copy()
    uma = omega0.copy()
    uma_count = 1 if uma_on else 0
    has_slow = k_s > 0
    has_sslow = k_ss > 0

    v = np.empty(n)
    v2 = np.empty(n)
    buf = np.empty(n)
    half = np.empty(n)
    prev = np.zeros(n)          # ogda memory
    mom_t = np.zeros(d_theta)
    sec_t = np.zeros(d_theta)
    mom_p = np.zeros(n - d_theta)
    sec_p = np.zeros(n - d_theta)
    adam_t_steps = 0
    adam_p_steps = 0
    dir_t = np.empty(d_theta)
    dir_p = np.empty(n - d_theta)

    m = 0
    cursor = 0
    counter = 0
    diverged_at = -1.0
    frozen = False
    m = _emit(rows_u, rows_p, rows_d, rows_s, m, 0, 0.0, omega, slow, sslow,
              ema, uma, opt, inv0, has_slow, has_sslow, ema_on, uma_on)
    next_mark = stride

    for t in range(1, n_updates + 1):
        if not frozen:
            # ---- one base update ----
            if method == M_GDA_SIM:
                if backend == 0:
                    _affine_v(jac, v0, omega, v)
                else:
                    _sbg_v(b_mat, c_mat, gscale, idx[cursor], omega, d_theta, v)
                    cursor += 1
                for i in range(d_theta):
                    omega[i] -= eta_t * v[i]
                for i in range(d_phi_start, n):
                    omega[i] -= eta_p * v[i]
            elif method == M_GDA_ALT:
                for r in range(ratio):
                    if backend == 0:
                        _affine_v(jac, v0, omega, v)
                    else:
                        _sbg_v(b_mat, c_mat, gscale, idx[cursor], omega, d_theta, v)
                        cursor += 1
                    for i in range(d_phi_start, n):
                        omega[i] -= eta_p * v[i]
                if backend == 0:
                    _affine_v(jac, v0, omega, v)
                else:
                    _sbg_v(b_mat, c_mat, gscale, idx[cursor], omega, d_theta, v)
                    cursor += 1
                for i in range(d_theta):
                    omega[i] -= eta_t * v[i]
            elif method == M_EG:
                if backend == 0:
                    _affine_v(jac, v0, omega, v)
                else:
                    _sbg_v(b_mat, c_mat, gscale, idx[cursor], omega, d_theta, v)
                    cursor += 1
                for i in range(n):
                    eta = eta_t if i < d_theta else eta_p
                    half[i] = omega[i] - eta * v[i]
                if backend == 0:
                    _affine_v(jac, v0, half, v2)
                else:
                    _sbg_v(b_mat, c_mat, gscale, idx[cursor], half, d_theta, v2)
                    cursor += 1
                for i in range(n):
                    eta = eta_t if i < d_theta else eta_p
                    omega[i] -= eta * v2[i]
            elif method == M_OGDA:
                if backend == 0:
                    _affine_v(jac, v0, omega, v)
                else:
                    _sbg_v(b_mat, c_mat, gscale, idx[cursor], omega, d_theta, v)
                    cursor += 1
                for i in range(n):
                    eta = eta_t if i < d_theta else eta_p
                    omega[i] += -2.0 * eta * v[i] + eta * prev[i]
                    prev[i] = v[i]
            elif method == M_ADAM:
                for r in range(ratio):
                    if backend == 0:
                        _affine_v(jac, v0, omega, v)
                    else:
                        _sbg_v(b_mat, c_mat, gscale, idx[cursor], omega, d_theta, v)
                        cursor += 1
                    adam_p_steps += 1
                    _adam_dir(mom_p, sec_p, adam_p_steps, beta1, beta2, eps,
                              v[d_phi_start:], dir_p)
                    for i in range(d_phi_start, n):
                        omega[i] -= eta_p * dir_p[i - d_phi_start]
                if backend == 0:
                    _affine_v(jac, v0, omega, v)
                else:
                    _sbg_v(b_mat, c_mat, gscale, idx[cursor], omega, d_theta, v)
                    cursor += 1
                adam_t_steps += 1
                _adam_dir(mom_t, sec_t, adam_t_steps, beta1, beta2, eps,
                          v[:d_theta], dir_t)
                for i in range(d_theta):
                    omega[i] -= eta_t * dir_t[i]
            elif method == M_EXTRA_ADAM:
                if backend == 0:
                    _affine_v(jac, v0, omega, v)
                else:
                    _sbg_v(b_mat, c_mat, gscale, idx[cursor], omega, d_theta, v)
                    cursor += 1
                adam_t_steps += 1
                adam_p_steps += 1
                _adam_dir(mom_t, sec_t, adam_t_steps, beta1, beta2, eps,
                          v[:d_theta], dir_t)
                _adam_dir(mom_p, sec_p, adam_p_steps, beta1, beta2, eps,
                          v[d_phi_start:], dir_p)
                for i in range(d_theta):
                    half[i] = omega[i] - eta_t * dir_t[i]
                for i in range(d_phi_start, n):
                    half[i] = omega[i] - eta_p * dir_p[i - d_phi_start]
                if backend == 0:
                    _affine_v(jac, v0, half, v2)
                else:
                    _sbg_v(b_mat, c_mat, gscale, idx[cursor], half, d_theta, v2)
                    cursor += 1
                adam_t_steps += 1
                adam_p_steps += 1
                _adam_dir(mom_t, sec_t, adam_t_steps, beta1, beta2, eps,
                          v2[:d_theta], dir_t)
                _adam_dir(mom_p, sec_p, adam_p_steps, beta1, beta2, eps,
                          v2[d_phi_start:], dir_p)
                for i in range(d_theta):
                    omega[i] -= eta_t * dir_t[i]
                for i in range(d_phi_start, n):
                    omega[i] -= eta_p * dir_p[i - d_phi_start]
            elif method == M_UNROLL_Y or method == M_UNROLL_XY:
                # full batch only; first phase is shared by the unrolls and
                # the untouched-opponent updates
                _affine_v(jac, v0, omega, v)
                for i in range(n):
                    buf[i] = omega[i]          # buf holds (theta, phi_m)
                    half[i] = omega[i]         # half holds (theta_m, phi)
                if m_unroll > 0:
                    for i in range(d_phi_start, n):
                        buf[i] -= eta_p * v[i]
                    if method == M_UNROLL_XY:
                        for i in range(d_theta):
                            half[i] -= eta_t * v[i]
                    for s in range(1, m_unroll):
                        _affine_v(jac, v0, buf, v2)
                        for i in range(d_phi_start, n):
                            buf[i] -= eta_p * v2[i]
                        if method == M_UNROLL_XY:
                            _affine_v(jac, v0, half, v2)
                            for i in range(d_theta):
                                half[i] -= eta_t * v2[i]
                _affine_v(jac, v0, buf, v2)    # field at (theta, phi_m)
                if method == M_UNROLL_Y:
                    for i in range(d_theta):
                        dir_t[i] = v2[i]
                    if exact_unroll:
                        for i in range(d_theta):
                            acc = 0.0
                            for j in range(n - d_theta):
                                acc += sens[j, i] * v2[d_theta + j]
                            dir_t[i] -= acc
                    for i in range(d_theta):
                        omega[i] -= eta_t * dir_t[i]
                    for i in range(d_phi_start, n):
                        omega[i] -= eta_p * v[i]
                else:
                    for i in range(d_theta):
                        omega[i] -= eta_t * v2[i]
                    _affine_v(jac, v0, half, v2)  # field at (theta_m, phi)
                    for i in range(d_phi_start, n):
                        omega[i] -= eta_p * v2[i]

            # ---- lookahead backtracks ----
            backtracked = False
            if has_slow:
                counter += 1
                if k_ss > 0:
                    if counter % k_s == 0:
                        _backtrack(omega, slow, a_t, a_p, d_theta)
                        backtracked = True
                    if counter % k_ss == 0:
                        _backtrack(omega, sslow, a_ss, a_ss, d_theta)
                        for i in range(n):
                            slow[i] = omega[i]
                        backtracked = True
                elif counter == k_s:
                    _backtrack(omega, slow, a_t, a_p, d_theta)
                    counter = 0
                    backtracked = True
            uma_count = _track(ema, uma, uma_count, omega, ema_on, ema_beta,
                               uma_on, backtracked, slow)
            if _dist(omega, opt, 1.0) > cutoff_abs:
                frozen = True
                diverged_at = t * ppu

        passes = t * ppu
        if passes >= next_mark - 1e-9:
            m = _emit(rows_u, rows_p, rows_d, rows_s, m, t, passes, omega,
                      slow, sslow, ema, uma, opt, inv0, has_slow, has_sslow,
                      ema_on, uma_on)
            next_mark = (np.floor(passes / stride + 1e-9) + 1.0) * stride
    return m, diverged_at


@njit(cache=True, nogil=True)
def run_svre_kernel(
    b_mat, c_mat, d,
    omega0,
    eta_t, eta_p, restart_prob,
    restart_uniforms, geom_lens, idx_t, idx_p,
    budget, stride, cutoff_abs,
    ema_on, ema_beta, uma_on,
    opt, inv0,
    rows_u, rows_p, rows_d, rows_s,
):
    """Restarted variance-reduced extragradient on the finite-sum bilinear
    game, mean-gradient convention. The per-sample difference terms cancel
    everywhere except the sampled coupling coordinates."""
    n = 2 * d
    omega = omega0.copy()
    snap = omega0.copy()
    avg = omega0.copy()
    ema = omega0.copy()
    uma = omega0.copy()
    uma_count = 1 if uma_on else 0
    avg_count = 0
    mu = np.empty(n)
    dvec = np.empty(n)
    half = np.empty(n)
    b_mean = np.empty(d)
    c_mean = np.empty(d)
    for k in range(d):
        acc_b = 0.0
        acc_c = 0.0
        for i in range(b_mat.shape[0]):
            acc_b += b_mat[i, k]
            acc_c += c_mat[i, k]
        b_mean[k] = acc_b / b_mat.shape[0]
        c_mean[k] = acc_c / c_mat.shape[0]

    bsz = idx_t.shape[1]
    inner_cost = 2.0 * bsz / d
    passes = 0.0
    t = 0
    m = 0
    epoch = 0
    cur_t = 0
    cur_p = 0
    diverged_at = -1.0
    frozen = False
    dummy = omega0.copy()
    m = _emit(rows_u, rows_p, rows_d, rows_s, m, 0, 0.0, omega, dummy, dummy,
              ema, uma, opt, inv0, False, False, ema_on, uma_on)
    next_mark = stride

    while passes + 1.0 <= budget + 1e-9 and not frozen:
        if restart_uniforms[epoch] < restart_prob and epoch > 0:
            for i in range(n):
                omega[i] = avg[i]
            avg_count = 1
        for i in range(n):
            snap[i] = omega[i]
        for k in range(d):
            mu[k] = b_mean[k] + snap[d + k] / d
            mu[d + k] = -(snap[k] / d + c_mean[k])
        passes += 1.0
        if passes >= next_mark - 1e-9:
            m = _emit(rows_u, rows_p, rows_d, rows_s, m, t, passes, omega,
                      dummy, dummy, ema, uma, opt, inv0, False, False,
                      ema_on, uma_on)
            next_mark = (np.floor(passes / stride + 1e-9) + 1.0) * stride

        for it in range(geom_lens[epoch]):
            if passes + inner_cost > budget + 1e-9 or frozen:
                break
            # extrapolation
            for i in range(n):
                dvec[i] = mu[i]
            for j in range(bsz):
                i = idx_t[cur_t, j]
                dvec[i] += (omega[d + i] - snap[d + i]) / bsz
            for j in range(bsz):
                i = idx_p[cur_p, j]
                dvec[d + i] -= (omega[i] - snap[i]) / bsz
            cur_t += 1
            cur_p += 1
            for i in range(d):
                half[i] = omega[i] - eta_t * dvec[i]
                half[d + i] = omega[d + i] - eta_p * dvec[d + i]
            # update at the extrapolated point, fresh batches, same snapshot
            for i in range(n):
                dvec[i] = mu[i]
            for j in range(bsz):
                i = idx_t[cur_t, j]
                dvec[i] += (half[d + i] - snap[d + i]) / bsz
            for j in range(bsz):
                i = idx_p[cur_p, j]
                dvec[d + i] -= (half[i] - snap[i]) / bsz
            cur_t += 1
            cur_p += 1
            for i in range(d):
                omega[i] -= eta_t * dvec[i]
                omega[d + i] -= eta_p * dvec[d + i]
            passes += inner_cost
            t += 1
            avg_count += 1
            for i in range(n):
                avg[i] += (omega[i] - avg[i]) / avg_count
            uma_count = _track(ema, uma, uma_count, omega, ema_on, ema_beta,
                               uma_on, False, dummy)
            if _dist(omega, opt, 1.0) > cutoff_abs:
                frozen = True
                diverged_at = passes
            if passes >= next_mark - 1e-9:
                m = _emit(rows_u, rows_p, rows_d, rows_s, m, t, passes, omega,
                          dummy, dummy, ema, uma, opt, inv0, False, False,
                          ema_on, uma_on)
                next_mark = (np.floor(passes / stride + 1e-9) + 1.0) * stride
        epoch += 1
    if frozen:
        # keep reporting the frozen value on the remaining eval grid
        while next_mark <= budget + 1e-9:
            m = _emit(rows_u, rows_p, rows_d, rows_s, m, t, next_mark, omega,
                      dummy, dummy, ema, uma, opt, inv0, False, False,
                      ema_on, uma_on)
            next_mark += stride
    return m, diverged_at, passes
