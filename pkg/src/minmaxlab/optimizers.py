"""Base update rules for two-player games.

Every step function is written as descent on each player's own loss (the
problems module centralizes the zero-sum sign flip) and returns
``(new_point, passes)`` where ``passes`` counts full-dataset-equivalent
gradient sweeps: one evaluation phase over a batch of size B costs B/n, a
full-batch phase costs 1, and phases that evaluate both players at the same
point share the cost. Input points are never mutated; optimizer states are
single-owner mutable values.

Stochastic variants take explicit index batches (or ``FULL``); drawing fresh
batches per phase is the caller's job, which keeps these functions
deterministic and directly testable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .problems import FULL, GameProblem, JointPoint, _check_dims


def _phase_cost(problem: GameProblem, batch) -> float:
    if batch is FULL:
        return 1.0
    return len(batch) / problem.n_samples


def _as_batches(batches, count):
    if batches is None:
        return [FULL] * count
    batches = list(batches)
    if len(batches) != count:
        raise ValueError(f"expected {count} batches, got {len(batches)}")
    return batches


def gda_step_simultaneous(problem, point, eta, batch=FULL):
    """Both players step from gradients at the same point."""
    if eta < 0:
        raise ValueError("eta must be >= 0")
    g_theta, g_phi = problem.player_gradients(point, batch)
    new = JointPoint(point.theta - eta * g_theta, point.phi - eta * g_phi)
    return new, _phase_cost(problem, batch)


def gda_step_alternating(problem, point, eta_theta, eta_phi, ratio=1, batches=None):
    """phi descends its own loss `ratio` times (fresh batch each), then theta
    steps once against the updated phi."""
    if ratio < 1:
        raise ValueError("ratio must be >= 1")
    batches = _as_batches(batches, ratio + 1)
    theta = point.theta.copy()
    phi = point.phi.copy()
    passes = 0.0
    for r in range(ratio):
        _, g_phi = problem.player_gradients(JointPoint(theta, phi), batches[r])
        phi = phi - eta_phi * g_phi
        passes += _phase_cost(problem, batches[r])
    g_theta, _ = problem.player_gradients(JointPoint(theta, phi), batches[ratio])
    theta = theta - eta_theta * g_theta
    passes += _phase_cost(problem, batches[ratio])
    return JointPoint(theta, phi), passes


def eg_step(problem, point, eta, batches=None):
    """Extragradient: a prediction step, then the real update using gradients
    at the predicted point. Stochastic calls use independent batches for the
    two phases."""
    b_extra, b_update = _as_batches(batches, 2)
    v = problem.jvf(point, b_extra)
    half = JointPoint.from_concat(point.concat - eta * v, problem.d_theta)
    v_half = problem.jvf(half, b_update)
    new = JointPoint.from_concat(point.concat - eta * v_half, problem.d_theta)
    passes = _phase_cost(problem, b_extra) + _phase_cost(problem, b_update)
    return new, passes


@dataclass
class OgdaState:
    """Cached joint vector field from the previous update (zero before the
    first one)."""

    prev_jvf: np.ndarray

    @classmethod
    def zeros(cls, dim: int) -> "OgdaState":
        return cls(np.zeros(dim))


def ogda_step(problem, point, state: OgdaState, eta, batch=FULL):
    """Optimistic step: double the current field, subtract the remembered one."""
    _check_dims(problem, point)
    if state.prev_jvf.shape[0] != problem.dim:
        raise ValueError("OGDA memory has wrong dimension")
    v = problem.jvf(point, batch)
    new = JointPoint.from_concat(
        point.concat - 2.0 * eta * v + eta * state.prev_jvf, problem.d_theta
    )
    state.prev_jvf = v
    return new, _phase_cost(problem, batch)


@dataclass
class AdamState:
    """Per-player moment estimates with that player's own step counter."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, dim, beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        if not (-1.0 < beta1 < 1.0):
            raise ValueError("beta1 must be in (-1, 1)")
        if not (0.0 <= beta2 < 1.0):
            raise ValueError("beta2 must be in [0, 1)")
        return cls(np.zeros(dim), np.zeros(dim), 0, beta1, beta2, eps)


def adam_direction(state: AdamState, grad: np.ndarray) -> np.ndarray:
    """Advance the moment estimates and return the bias-corrected direction;
    the caller multiplies by the step size. Negative beta1 is allowed."""
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    v_hat = state.v / (1.0 - state.beta2 ** state.t)
    return m_hat / (np.sqrt(v_hat) + state.eps)


def adam_gda_step(
    problem,
    point,
    state_theta: AdamState,
    state_phi: AdamState,
    eta_theta,
    eta_phi,
    ratio=1,
    batches=None,
):
    """Alternating GDA with per-player Adam directions. phi takes `ratio`
    Adam steps (its counter advancing each time), then theta takes one."""
    if ratio < 1:
        raise ValueError("ratio must be >= 1")
    batches = _as_batches(batches, ratio + 1)
    theta = point.theta.copy()
    phi = point.phi.copy()
    passes = 0.0
    for r in range(ratio):
        _, g_phi = problem.player_gradients(JointPoint(theta, phi), batches[r])
        phi = phi - eta_phi * adam_direction(state_phi, g_phi)
        passes += _phase_cost(problem, batches[r])
    g_theta, _ = problem.player_gradients(JointPoint(theta, phi), batches[ratio])
    theta = theta - eta_theta * adam_direction(state_theta, g_theta)
    passes += _phase_cost(problem, batches[ratio])
    return JointPoint(theta, phi), passes


def extra_adam_step(problem, point, state_theta, state_phi, eta, batches=None):
    """Extragradient whose two phases both draw Adam directions from the same
    continuously-updated per-player moment state."""
    b_extra, b_update = _as_batches(batches, 2)
    g_theta, g_phi = problem.player_gradients(point, b_extra)
    half = JointPoint(
        point.theta - eta * adam_direction(state_theta, g_theta),
        point.phi - eta * adam_direction(state_phi, g_phi),
    )
    g_theta_h, g_phi_h = problem.player_gradients(half, b_update)
    new = JointPoint(
        point.theta - eta * adam_direction(state_theta, g_theta_h),
        point.phi - eta * adam_direction(state_phi, g_phi_h),
    )
    passes = _phase_cost(problem, b_extra) + _phase_cost(problem, b_update)
    return new, passes


@dataclass
class SvreState:
    """Snapshot, its full-batch gradients, and the online iterate average."""

    snapshot: JointPoint
    mu_theta: np.ndarray
    mu_phi: np.ndarray
    avg_theta: np.ndarray
    avg_phi: np.ndarray
    avg_count: int = 0
    restart_prob: float = 0.0
    epoch_index: int = 0

    @classmethod
    def init(cls, point: JointPoint, restart_prob: float) -> "SvreState":
        if not (0.0 <= restart_prob <= 1.0):
            raise ValueError("restart probability must be in [0, 1]")
        return cls(
            snapshot=point.copy(),
            mu_theta=np.zeros_like(point.theta),
            mu_phi=np.zeros_like(point.phi),
            avg_theta=point.theta.copy(),
            avg_phi=point.phi.copy(),
            avg_count=0,
            restart_prob=restart_prob,
        )


def svre_corrected_jvf(problem, state: SvreState, point, batch_theta, batch_phi):
    """Variance-corrected own-loss directions: snapshot full-batch gradient
    plus the batch gradient difference, same batch for both difference terms."""
    g_theta, _ = problem.player_gradients(point, batch_theta)
    g_theta_s, _ = problem.player_gradients(state.snapshot, batch_theta)
    _, g_phi = problem.player_gradients(point, batch_phi)
    _, g_phi_s = problem.player_gradients(state.snapshot, batch_phi)
    d_theta = state.mu_theta + g_theta - g_theta_s
    d_phi = state.mu_phi + g_phi - g_phi_s
    return d_theta, d_phi


def svre_epoch(
    problem,
    state: SvreState,
    point,
    eta_theta,
    eta_phi,
    rng: np.random.Generator,
    sampler_theta,
    sampler_phi,
    max_passes=np.inf,
):
    """One restart-check + snapshot + geometric-length inner loop.

    With probability ``restart_prob`` (skipped on the first epoch) the iterate
    jumps back to the running average and the average counter resets. The
    snapshot gradients are recomputed in full every epoch (1 pass); each inner
    iteration is an extrapolation/update pair of variance-corrected steps
    (2 batch phases). The inner loop stops early once ``max_passes`` is spent.
    """
    if not problem.is_finite_sum:
        raise ValueError("SVRE requires a finite-sum problem")
    n = problem.n_samples
    point = point.copy()

    restart = rng.random() < state.restart_prob
    if restart and state.epoch_index > 0:
        point = JointPoint(state.avg_theta.copy(), state.avg_phi.copy())
        state.avg_count = 1

    state.snapshot = point.copy()
    state.mu_theta, state.mu_phi = problem.player_gradients(state.snapshot, FULL)
    passes = 1.0

    epoch_len = int(rng.geometric(1.0 / n))
    for _ in range(epoch_len):
        if passes >= max_passes:
            break
        bt, bp = sampler_theta(), sampler_phi()
        d_theta, d_phi = svre_corrected_jvf(problem, state, point, bt, bp)
        half = JointPoint(point.theta - eta_theta * d_theta, point.phi - eta_phi * d_phi)
        passes += _phase_cost(problem, bt)

        bt, bp = sampler_theta(), sampler_phi()
        d_theta, d_phi = svre_corrected_jvf(problem, state, half, bt, bp)
        point = JointPoint(point.theta - eta_theta * d_theta, point.phi - eta_phi * d_phi)
        passes += _phase_cost(problem, bt)

        t = state.avg_count
        state.avg_theta = (t / (t + 1.0)) * state.avg_theta + point.theta / (t + 1.0)
        state.avg_phi = (t / (t + 1.0)) * state.avg_phi + point.phi / (t + 1.0)
        state.avg_count = t + 1

    state.epoch_index += 1
    return point, passes


def _unroll_player(problem, point, eta, m, player):
    """m own-loss descent steps of one player with the opponent frozen."""
    theta = point.theta.copy()
    phi = point.phi.copy()
    for _ in range(m):
        g_theta, g_phi = problem.player_gradients(JointPoint(theta, phi), FULL)
        if player == "phi":
            phi = phi - eta * g_phi
        else:
            theta = theta - eta * g_theta
    return JointPoint(theta, phi)


def unroll_step(problem, point, eta, m, mode="y", exact=False):
    """Unrolled GDA step, full-batch only.

    mode "y": phi is unrolled m steps at fixed theta; theta then steps against
    the unrolled phi while phi itself takes its normal step. The approximate
    variant treats the unrolled phi as a constant; the exact variant adds the
    chain-rule term through the unrolled map via the forward sensitivity
    recursion (closed form because second derivatives are constant here).

    mode "xy": both players are unrolled m steps with frozen opponent and each
    real update is evaluated against the opponent's unrolled value
    (approximate only).
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    if mode not in ("y", "xy"):
        raise ValueError(f"unknown unroll mode {mode!r}")
    if mode == "xy" and exact:
        raise ValueError("exact gradients are only defined for mode 'y'")

    if mode == "y":
        unrolled = _unroll_player(problem, point, eta, m, "phi")
        g_theta_m, g_phi_m = problem.player_gradients(unrolled, FULL)
        if exact:
            d_t, d_p = problem.d_theta, problem.d_phi
            jac = problem.jvf_jacobian()
            j_pt = jac[d_t:, :d_t]
            j_pp = jac[d_t:, d_t:]
            sens = np.zeros((d_p, d_t))
            for _ in range(m):
                sens = sens - eta * (j_pt + j_pp @ sens)
            # d/dtheta of the min player's loss along the unrolled map; the
            # opponent's own-loss gradient is the negated cross term.
            dir_theta = g_theta_m - sens.T @ g_phi_m
        else:
            dir_theta = g_theta_m
        _, g_phi = problem.player_gradients(point, FULL)
        new = JointPoint(point.theta - eta * dir_theta, point.phi - eta * g_phi)
        return new, float(m + 1)

    unrolled_phi = _unroll_player(problem, point, eta, m, "phi")
    unrolled_theta = _unroll_player(problem, point, eta, m, "theta")
    g_theta, _ = problem.player_gradients(unrolled_phi, FULL)
    _, g_phi = problem.player_gradients(unrolled_theta, FULL)
    new = JointPoint(point.theta - eta * g_theta, point.phi - eta * g_phi)
    return new, float(2 * m + 1)
