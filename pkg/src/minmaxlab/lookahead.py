"""Joint-space lookahead wrappers and iterate averaging.

The core move: run k base-optimizer updates on both players ("fast" weights),
then pull each player back onto the line between its snapshot and its current
value, phi <- (1-a)*phi_snap + a*phi and theta alike, both interpolations read
pre-backtrack values. The snapshot ("slow" weights) then jumps to the new
point. Base-optimizer internal state (Adam moments, OGDA memory, SVRE
snapshots) is never rewound.

The interpolation is computed as (1-a)*slow + a*fast, which is exactly the
identity at a = 1 and exactly the snapshot at a = 0.

A base step is any callable point -> (new_point, passes); the wrappers add no
gradient cost of their own.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problems import JointPoint


def _check_hypers(k: int, *alphas: float):
    if k < 1:
        raise ValueError("k must be >= 1")
    for a in alphas:
        if not (0.0 <= a <= 1.0):
            raise ValueError("alpha must lie in [0, 1]")


def _interpolate(slow: np.ndarray, fast: np.ndarray, alpha: float) -> np.ndarray:
    return (1.0 - alpha) * slow + alpha * fast


@dataclass
class LookaheadState:
    """Joint snapshot plus the update counter since the last backtrack."""

    slow: JointPoint
    k: int
    alpha_theta: float
    alpha_phi: float
    counter: int = 0

    def __post_init__(self):
        _check_hypers(self.k, self.alpha_theta, self.alpha_phi)

    @classmethod
    def init(cls, point: JointPoint, k: int, alpha: float, alpha_phi=None):
        return cls(point.copy(), k, alpha, alpha if alpha_phi is None else alpha_phi)


def la_minmax_step(base_step, point: JointPoint, state: LookaheadState):
    """One base update; every k-th update both players backtrack jointly."""
    point, passes = base_step(point)
    state.counter += 1
    if state.counter == state.k:
        point = JointPoint(
            _interpolate(state.slow.theta, point.theta, state.alpha_theta),
            _interpolate(state.slow.phi, point.phi, state.alpha_phi),
        )
        state.slow = point.copy()
        state.counter = 0
    return point, passes


@dataclass
class AlternatingLookaheadState:
    """Per-player snapshots with independent counters (ablation variant).

    Each player backtracks on its own schedule and the backtracked value is
    visible to the opponent's next update. Counters tick once per whole
    both-player update. The joint wrapper is the recommended one; this exists
    for comparison.
    """

    slow_theta: np.ndarray
    slow_phi: np.ndarray
    k_theta: int
    k_phi: int
    alpha_theta: float
    alpha_phi: float
    counter_theta: int = 0
    counter_phi: int = 0

    def __post_init__(self):
        _check_hypers(self.k_theta, self.alpha_theta)
        _check_hypers(self.k_phi, self.alpha_phi)

    @classmethod
    def init(cls, point: JointPoint, k_theta, k_phi, alpha_theta, alpha_phi):
        return cls(
            point.theta.copy(), point.phi.copy(), k_theta, k_phi, alpha_theta, alpha_phi
        )


def la_alternating_step(base_step, point: JointPoint, state: AlternatingLookaheadState):
    point, passes = base_step(point)
    theta, phi = point.theta, point.phi
    state.counter_phi += 1
    if state.counter_phi == state.k_phi:
        phi = _interpolate(state.slow_phi, phi, state.alpha_phi)
        state.slow_phi = phi.copy()
        state.counter_phi = 0
    state.counter_theta += 1
    if state.counter_theta == state.k_theta:
        theta = _interpolate(state.slow_theta, theta, state.alpha_theta)
        state.slow_theta = theta.copy()
        state.counter_theta = 0
    return JointPoint(theta, phi), passes


@dataclass
class NestedLookaheadState:
    """Two nested snapshot levels; the outer backtrack resets both."""

    slow: JointPoint
    super_slow: JointPoint
    k_s: int
    k_ss: int
    alpha_s: float
    alpha_ss: float
    counter: int = 0

    def __post_init__(self):
        _check_hypers(self.k_s, self.alpha_s)
        _check_hypers(self.k_ss, self.alpha_ss)
        if self.k_ss < self.k_s:
            raise ValueError("outer period k_ss must be >= inner period k_s")

    @classmethod
    def init(cls, point: JointPoint, k_s, k_ss, alpha, alpha_ss=None):
        return cls(
            point.copy(), point.copy(), k_s, k_ss,
            alpha, alpha if alpha_ss is None else alpha_ss,
        )


def la_nested_step(base_step, point: JointPoint, state: NestedLookaheadState):
    """Inner backtrack every k_s updates, outer every k_ss; when the outer
    one fires (after the inner, if both do) it resets both snapshots."""
    point, passes = base_step(point)
    state.counter += 1
    if state.counter % state.k_s == 0:
        point = JointPoint(
            _interpolate(state.slow.theta, point.theta, state.alpha_s),
            _interpolate(state.slow.phi, point.phi, state.alpha_s),
        )
        state.slow = point.copy()
    if state.counter % state.k_ss == 0:
        point = JointPoint(
            _interpolate(state.super_slow.theta, point.theta, state.alpha_ss),
            _interpolate(state.super_slow.phi, point.phi, state.alpha_ss),
        )
        state.super_slow = point.copy()
        state.slow = point.copy()
    return point, passes


@dataclass
class LookaheadSingleState:
    """Single-objective variant: one parameter vector, one snapshot."""

    slow: np.ndarray
    k: int
    alpha: float
    counter: int = 0

    def __post_init__(self):
        _check_hypers(self.k, self.alpha)

    @classmethod
    def init(cls, w: np.ndarray, k: int, alpha: float):
        return cls(np.array(w, dtype=np.float64), k, alpha)


def la_single_objective_step(base_step, w: np.ndarray, state: LookaheadSingleState):
    """k inner minimization steps, then interpolate toward the snapshot."""
    w = base_step(w)
    state.counter += 1
    if state.counter == state.k:
        w = _interpolate(state.slow, w, state.alpha)
        state.slow = w.copy()
        state.counter = 0
    return w


@dataclass
class AverageTracker:
    """Online uniform or exponential moving average of iterates.

    UMA starts empty and after t updates equals the arithmetic mean of the t
    values seen. EMA starts from an explicit initial value and applies
    value <- value + (1-beta)*(x - value); a constant input equal to the
    initial value is a fixed point, exactly.
    """

    mode: str
    beta: float = 0.0
    value: np.ndarray | None = None
    count: int = 0

    def __post_init__(self):
        if self.mode not in ("ema", "uma"):
            raise ValueError(f"unknown averaging mode {self.mode!r}")
        if self.mode == "ema" and not (0.0 < self.beta < 1.0):
            raise ValueError("EMA beta must be in (0, 1)")

    @classmethod
    def uma(cls) -> "AverageTracker":
        return cls("uma")

    @classmethod
    def ema(cls, init_value: np.ndarray, beta: float) -> "AverageTracker":
        return cls("ema", beta, np.array(init_value, dtype=np.float64))

    def update(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        self.count += 1
        if self.mode == "uma":
            if self.value is None:
                self.value = x.copy()
            else:
                self.value = self.value + (x - self.value) / self.count
        else:
            if self.value is None:
                raise ValueError("EMA tracker needs an initial value")
            self.value = self.value + (1.0 - self.beta) * (x - self.value)
        return self.value


def tracker_update(tracker: AverageTracker, x: np.ndarray) -> AverageTracker:
    tracker.update(x)
    return tracker
