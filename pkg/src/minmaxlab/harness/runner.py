"""Seeded experiment driver.

A run takes a RunConfig to a Trajectory: the problem is built from the data
seed, both players are initialized i.i.d. normal scaled by 1/sqrt(dim) under
the run seed, minibatch index streams are pre-drawn from a counter-based
generator (Philox) so that every consumer sees an identical sequence, and the
loop executes until the pass budget is exhausted. One pass is one
full-dataset-equivalent gradient sweep of both players; methods that query
gradients at two points per update cost two.

Two interchangeable engines execute the loop: compiled kernels (fast path)
and a plain-Python reference built directly on the step functions in
minmaxlab.optimizers. They consume identical streams and are cross-checked in
the tests; kernels are the default where available.

Distances are logged at every eval-stride crossing, normalized by the initial
distance when requested. Once the raw distance exceeds the divergence cutoff
the iterate is frozen (the run keeps logging, the verdict is already settled);
the freeze point is recorded in the metadata.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .. import __version__
from ..lookahead import (
    AlternatingLookaheadState,
    AverageTracker,
    LookaheadState,
    NestedLookaheadState,
    la_alternating_step,
    la_minmax_step,
    la_nested_step,
)
from ..optimizers import (
    AdamState,
    OgdaState,
    adam_gda_step,
    eg_step,
    extra_adam_step,
    gda_step_alternating,
    gda_step_simultaneous,
    ogda_step,
    svre_corrected_jvf,
    unroll_step,
)
from ..problems import (
    FULL,
    Bilinear2D,
    EpochSampler,
    JointPoint,
    Quadratic2D,
    StochasticBilinear,
)
from . import kernels
from .config import RunConfig

SERIES_NAMES = kernels.SERIES_NAMES

_KERNEL_METHODS = set(kernels.METHOD_CODES)


def build_problem(cfg: RunConfig):
    p = cfg.problem
    if p.kind == "bilinear2d":
        return Bilinear2D()
    if p.kind == "quadratic2d":
        return Quadratic2D(p.a, p.b, p.c)
    return StochasticBilinear(p.n, p.d, p.data_seed)


def initial_point(problem, run_seed: int) -> JointPoint:
    rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence(run_seed).spawn(3)[0])
    )
    theta = rng.standard_normal(problem.d_theta) / np.sqrt(problem.d_theta)
    phi = rng.standard_normal(problem.d_phi) / np.sqrt(problem.d_phi)
    return JointPoint(theta, phi)


def _child_rng(run_seed: int, index: int) -> np.random.Generator:
    # children: 0 init, 1 phi/shared batches, 2 theta batches, 3 aux draws
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(run_seed).spawn(4)[index])
    )


def pass_accounting(method: str, batch_size, n, ratio=1, unroll_steps=0) -> float:
    """Passes consumed per update. One gradient-evaluation phase over a batch
    of size B costs B/n (full batch: 1); both players at the same point share
    a phase."""
    phase = 1.0 if batch_size == "full" else batch_size / n
    if method in ("gda-sim", "ogda"):
        return phase
    if method in ("gda-alt", "adam"):
        return (ratio + 1) * phase
    if method in ("eg", "extra-adam"):
        return 2.0 * phase
    if method == "unroll-y":
        return (unroll_steps + 1) * phase
    if method == "unroll-xy":
        return (2 * unroll_steps + 1) * phase
    if method == "svre":
        raise ValueError("SVRE cost is per-epoch: 1 pass per snapshot plus "
                         "2*B/n per inner iteration")
    raise ValueError(f"unknown method {method!r}")


def svre_pass_components(batch_size, n):
    phase = 1.0 if batch_size == "full" else batch_size / n
    return 1.0, 2.0 * phase  # snapshot, per inner iteration


@dataclass
class Trajectory:
    update: np.ndarray
    passes: np.ndarray
    distance: np.ndarray
    series: np.ndarray  # int codes into SERIES_NAMES

    def __len__(self):
        return self.update.shape[0]

    def only(self, series: str) -> "Trajectory":
        code = SERIES_NAMES.index(series)
        mask = self.series == code
        return Trajectory(
            self.update[mask], self.passes[mask], self.distance[mask],
            self.series[mask],
        )

    def final_distance(self, series: str = "fast") -> float:
        sub = self.only(series)
        if len(sub) == 0:
            raise ValueError(f"no rows for series {series!r}")
        return float(sub.distance[-1])

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("update,passes,distance,series\n")
            for i in range(len(self)):
                fh.write(
                    f"{int(self.update[i])},{float(self.passes[i])!r},"
                    f"{float(self.distance[i])!r},{SERIES_NAMES[self.series[i]]}\n"
                )


@dataclass
class RunResult:
    config: RunConfig
    trajectory: Trajectory
    metadata: dict


def _empty_trajectory() -> Trajectory:
    return Trajectory(
        np.empty(0, dtype=np.int64), np.empty(0), np.empty(0),
        np.empty(0, dtype=np.int64),
    )


def _kernel_supported(cfg: RunConfig) -> bool:
    if cfg.lookahead.style == "alternating":
        return False
    if cfg.method.name == "svre":
        return True
    if cfg.method.name not in _KERNEL_METHODS:
        return False
    if cfg.batch_size != "full" and cfg.method.name.startswith("unroll"):
        return False
    return True


def run(cfg: RunConfig) -> RunResult:
    """Execute one configured run and return its trajectory plus metadata."""
    cfg.validate()
    t0 = time.perf_counter()
    problem = build_problem(cfg)
    point0 = initial_point(problem, cfg.run_seed)
    dist0 = problem.distance_to_opt(point0)
    inv0 = 1.0 / dist0 if cfg.normalize else 1.0

    use_kernel = cfg.engine == "kernel" or (
        cfg.engine == "auto" and _kernel_supported(cfg)
    )
    if cfg.engine == "kernel" and not _kernel_supported(cfg):
        raise ValueError("this configuration has no kernel implementation; "
                         "use engine: python")

    if cfg.budget_passes <= 0:
        traj = _empty_trajectory()
        diverged_at = None
        engine_used = "none"
    elif cfg.method.name == "svre":
        traj, diverged_at = (_run_svre_kernel if use_kernel else _run_svre_python)(
            cfg, problem, point0, inv0
        )
        engine_used = "kernel" if use_kernel else "python"
    elif use_kernel:
        traj, diverged_at = _run_kernel(cfg, problem, point0, inv0)
        engine_used = "kernel"
    else:
        traj, diverged_at = _run_python(cfg, problem, point0, inv0)
        engine_used = "python"

    metadata = {
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "preset": cfg.preset_name,
        "run_seed": cfg.run_seed,
        "data_seed": cfg.problem.data_seed,
        "prng": "numpy Philox (counter-based), SeedSequence-spawned streams "
                "for init/batches/aux",
        "initialization": "i.i.d. normal(0, 1/dim) per player coordinate",
        "initial_distance": dist0,
        "normalized": cfg.normalize,
        "engine": engine_used,
        "diverged_at_pass": diverged_at,
        "library_version": __version__,
        "numpy_version": np.__version__,
        "wall_time_s": time.perf_counter() - t0,
    }
    return RunResult(cfg, traj, metadata)


def run_many(cfg: RunConfig, num_seeds: int, threads: int = 1) -> list[RunResult]:
    """Independent seed variants: seed i shifts both the data seed and the run
    seed by i."""
    configs = [cfg.with_seed_offset(i) for i in range(num_seeds)]
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, configs))
    return [run(c) for c in configs]


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------


def _count_updates(cfg: RunConfig, problem) -> tuple[int, float]:
    ppu = pass_accounting(
        cfg.method.name, cfg.batch_size, problem.n_samples or 1,
        cfg.method.ratio, cfg.method.unroll_steps,
    )
    n_updates = int(np.floor(cfg.budget_passes / ppu + 1e-9))
    return n_updates, ppu


def _draws_per_update(cfg: RunConfig) -> int:
    name = cfg.method.name
    if name in ("gda-alt", "adam"):
        return cfg.method.ratio + 1
    if name in ("eg", "extra-adam"):
        return 2
    return 1


def _index_stream(cfg: RunConfig, problem, n_updates: int) -> np.ndarray:
    """Pre-draw every batch of the run.

    Players that sample at the same phase (simultaneous GDA, the two
    extragradient phases) share one without-replacement stream. Alternating
    updates give each player its own stream, so each player's epochs cover
    every sample exactly once and the additive part of the per-sample noise
    cancels over each of its epochs.
    """
    if cfg.batch_size == "full":
        return np.zeros((1, 1), dtype=np.intp)
    n, bsz = problem.n_samples, cfg.batch_size
    draws = _draws_per_update(cfg)
    phi_stream = EpochSampler(n, bsz, _child_rng(cfg.run_seed, 1))
    if cfg.method.name not in ("gda-alt", "adam"):
        return phi_stream.stream(n_updates * draws)
    theta_stream = EpochSampler(n, bsz, _child_rng(cfg.run_seed, 2))
    out = np.empty((n_updates * draws, bsz), dtype=np.intp)
    r = cfg.method.ratio
    for t in range(n_updates):
        for j in range(r):
            out[t * draws + j] = phi_stream.next_batch()
        out[t * draws + r] = theta_stream.next_batch()
    return out


def _gradient_scale(cfg: RunConfig, problem) -> float:
    if cfg.method.gradient_scale == "mean" or not problem.is_finite_sum:
        return 1.0
    if cfg.batch_size == "full":
        return float(problem.n_samples)
    return float(cfg.batch_size)


def _row_buffers(cfg: RunConfig, n_series: int):
    max_rows = (int(cfg.budget_passes / cfg.eval_stride_passes) + 8) * n_series
    return (
        np.empty(max_rows, dtype=np.int64),
        np.empty(max_rows),
        np.empty(max_rows),
        np.empty(max_rows, dtype=np.int64),
    )


def _active_series(cfg: RunConfig) -> int:
    n = 1
    if cfg.lookahead.style in ("joint", "nested") and cfg.method.name != "svre":
        n += 1
        if cfg.lookahead.style == "nested":
            n += 1
    if cfg.track.ema_beta is not None:
        n += 1
    if cfg.track.uma:
        n += 1
    return n


# ---------------------------------------------------------------------------
# kernel engine
# ---------------------------------------------------------------------------


def _run_kernel(cfg: RunConfig, problem, point0, inv0):
    n_updates, ppu = _count_updates(cfg, problem)
    full_batch = cfg.batch_size == "full"
    gscale = _gradient_scale(cfg, problem)
    zero = JointPoint(np.zeros(problem.d_theta), np.zeros(problem.d_phi))

    if full_batch:
        jac = gscale * problem.jvf_jacobian()
        v0 = gscale * problem.jvf(zero)
        b_mat = c_mat = np.zeros((1, 1))
        idx = np.zeros((1, 1), dtype=np.intp)
        backend = 0
    else:
        jac = np.zeros((1, 1))
        v0 = np.zeros(1)
        b_mat, c_mat = problem.b, problem.c
        idx = _index_stream(cfg, problem, n_updates)
        backend = 1

    la = cfg.lookahead
    k_s = la.k if la.enabled else 0
    k_ss = la.k_ss if la.style == "nested" else 0
    a_t = la.alpha if la.enabled else 1.0
    a_p = la.alpha_phi_value if la.enabled else 1.0
    a_ss = la.alpha_ss_value if la.style == "nested" else 1.0
    ema_on = 0
    if cfg.track.ema_beta is not None:
        ema_on = 1 if cfg.track.ema_source == "fast" else 2
    sens = np.zeros((0, 0))
    if cfg.method.name == "unroll-y" and cfg.method.unroll_exact:
        # the sensitivity recursion runs on the scaled field
        sens = _scaled_sensitivity(problem, cfg, gscale)

    rows_u, rows_p, rows_d, rows_s = _row_buffers(cfg, _active_series(cfg))
    m, diverged_at = kernels.run_kernel(
        backend,
        kernels.METHOD_CODES[cfg.method.name],
        jac, v0,
        b_mat, c_mat, gscale, idx,
        point0.concat, problem.d_theta,
        cfg.method.eta_theta_value, cfg.method.eta_phi_value, cfg.method.ratio,
        cfg.method.beta1, cfg.method.beta2, cfg.method.epsilon,
        cfg.method.unroll_steps, cfg.method.unroll_exact, sens,
        k_s, a_t, a_p, k_ss, a_ss,
        ema_on, cfg.track.ema_beta or 0.0, cfg.track.uma,
        n_updates, ppu, cfg.eval_stride_passes, cfg.divergence_cutoff,
        problem.optimum().concat, inv0,
        rows_u, rows_p, rows_d, rows_s,
    )
    traj = Trajectory(rows_u[:m].copy(), rows_p[:m].copy(), rows_d[:m].copy(),
                      rows_s[:m].copy())
    return traj, (None if diverged_at < 0 else float(diverged_at))


def _scaled_sensitivity(problem, cfg: RunConfig, gscale: float) -> np.ndarray:
    jac = gscale * problem.jvf_jacobian()
    d_t = problem.d_theta
    j_pt = jac[d_t:, :d_t]
    j_pp = jac[d_t:, d_t:]
    sens = np.zeros((problem.d_phi, d_t))
    eta_phi = cfg.method.eta_phi_value
    for _ in range(cfg.method.unroll_steps):
        sens = sens - eta_phi * (j_pt + j_pp @ sens)
    return sens


def _svre_streams(cfg: RunConfig, problem):
    n = problem.n_samples
    bsz = 1 if cfg.batch_size == "full" else cfg.batch_size
    budget = cfg.budget_passes
    max_epochs = int(budget) + 4
    aux = _child_rng(cfg.run_seed, 3)
    restart_uniforms = aux.random(max_epochs)
    geom_lens = aux.geometric(1.0 / n, size=max_epochs).astype(np.int64)
    max_inner = int(budget / (2.0 * bsz / n)) + 4
    # each player samples from its own without-replacement stream
    idx_t = EpochSampler(n, bsz, _child_rng(cfg.run_seed, 2)).stream(2 * max_inner)
    idx_p = EpochSampler(n, bsz, _child_rng(cfg.run_seed, 1)).stream(2 * max_inner)
    return restart_uniforms, geom_lens, idx_t, idx_p


def _run_svre_kernel(cfg: RunConfig, problem, point0, inv0):
    restart_uniforms, geom_lens, idx_t, idx_p = _svre_streams(cfg, problem)
    ema_on = 0
    if cfg.track.ema_beta is not None:
        ema_on = 1 if cfg.track.ema_source == "fast" else 2
    rows_u, rows_p, rows_d, rows_s = _row_buffers(cfg, _active_series(cfg))
    m, diverged_at, _ = kernels.run_svre_kernel(
        problem.b, problem.c, problem.d,
        point0.concat,
        cfg.method.eta_theta_value, cfg.method.eta_phi_value,
        cfg.method.restart_prob,
        restart_uniforms, geom_lens, idx_t, idx_p,
        cfg.budget_passes, cfg.eval_stride_passes, cfg.divergence_cutoff,
        ema_on, cfg.track.ema_beta or 0.0, cfg.track.uma,
        problem.optimum().concat, inv0,
        rows_u, rows_p, rows_d, rows_s,
    )
    traj = Trajectory(rows_u[:m].copy(), rows_p[:m].copy(), rows_d[:m].copy(),
                      rows_s[:m].copy())
    return traj, (None if diverged_at < 0 else float(diverged_at))


# ---------------------------------------------------------------------------
# reference python engine
# ---------------------------------------------------------------------------


class _ScaledGradients:
    """View of a problem with gradients multiplied by a constant; the
    optimum, distances and Jacobian queries pass through unscaled."""

    def __init__(self, problem, scale: float):
        self._problem = problem
        self._scale = scale
        self.d_theta = problem.d_theta
        self.d_phi = problem.d_phi
        self.n_samples = problem.n_samples
        self.dim = problem.dim
        self.is_finite_sum = problem.is_finite_sum

    def player_gradients(self, point, batch=FULL):
        g_t, g_p = self._problem.player_gradients(point, batch)
        return self._scale * g_t, self._scale * g_p

    def jvf(self, point, batch=FULL):
        return self._scale * self._problem.jvf(point, batch)

    def jvf_jacobian(self):
        return self._scale * self._problem.jvf_jacobian()

    def optimum(self):
        return self._problem.optimum()

    def distance_to_opt(self, point):
        return self._problem.distance_to_opt(point)


class _Logger:
    def __init__(self, cfg: RunConfig, problem, inv0):
        self.stride = cfg.eval_stride_passes
        self.inv0 = inv0
        self.opt = problem.optimum().concat
        self.rows = []
        self.next_mark = self.stride

    def _dist(self, vec):
        return float(np.linalg.norm(vec - self.opt) * self.inv0)

    def emit(self, t, passes, series_points):
        for name, vec in series_points:
            self.rows.append(
                (t, passes, self._dist(vec), SERIES_NAMES.index(name))
            )

    def maybe_emit(self, t, passes, series_points):
        if passes >= self.next_mark - 1e-9:
            self.emit(t, passes, series_points)
            self.next_mark = (np.floor(passes / self.stride + 1e-9) + 1.0) * self.stride

    def trajectory(self) -> Trajectory:
        if not self.rows:
            return _empty_trajectory()
        return Trajectory(
            np.array([r[0] for r in self.rows], dtype=np.int64),
            np.array([r[1] for r in self.rows]),
            np.array([r[2] for r in self.rows]),
            np.array([r[3] for r in self.rows], dtype=np.int64),
        )


def _base_stepper(cfg: RunConfig, problem, batches_iter):
    """Bind the configured method to a point -> (point, passes) callable."""
    name = cfg.method.name
    mc = cfg.method
    eta_t, eta_p = mc.eta_theta_value, mc.eta_phi_value
    full = cfg.batch_size == "full"

    def take(k):
        return None if full else [next(batches_iter) for _ in range(k)]

    if name == "gda-sim":
        def step(pt):
            b = None if full else next(batches_iter)
            return gda_step_simultaneous(problem, pt, eta_t, b)
        return step
    if name == "gda-alt":
        def step(pt):
            return gda_step_alternating(problem, pt, eta_t, eta_p, mc.ratio,
                                        take(mc.ratio + 1))
        return step
    if name == "eg":
        def step(pt):
            return eg_step(problem, pt, eta_t, take(2))
        return step
    if name == "ogda":
        state = OgdaState.zeros(problem.dim)

        def step(pt):
            b = None if full else next(batches_iter)
            return ogda_step(problem, pt, state, eta_t, b)
        return step
    if name == "adam":
        st_t = AdamState.zeros(problem.d_theta, mc.beta1, mc.beta2, mc.epsilon)
        st_p = AdamState.zeros(problem.d_phi, mc.beta1, mc.beta2, mc.epsilon)

        def step(pt):
            return adam_gda_step(problem, pt, st_t, st_p, eta_t, eta_p,
                                 mc.ratio, take(mc.ratio + 1))
        return step
    if name == "extra-adam":
        st_t = AdamState.zeros(problem.d_theta, mc.beta1, mc.beta2, mc.epsilon)
        st_p = AdamState.zeros(problem.d_phi, mc.beta1, mc.beta2, mc.epsilon)

        def step(pt):
            return extra_adam_step(problem, pt, st_t, st_p, eta_t, take(2))
        return step
    if name in ("unroll-y", "unroll-xy"):
        mode = "y" if name == "unroll-y" else "xy"

        def step(pt):
            return unroll_step(problem, pt, eta_t, mc.unroll_steps, mode,
                               mc.unroll_exact)
        return step
    raise ValueError(f"no python engine for method {name!r}")


def _run_python(cfg: RunConfig, problem, point0, inv0):
    n_updates, ppu = _count_updates(cfg, problem)
    scaled = _ScaledGradients(problem, _gradient_scale(cfg, problem))
    if cfg.batch_size == "full":
        batches_iter = iter(())
    else:
        stream = _index_stream(cfg, problem, n_updates)
        batches_iter = iter(stream)
    base = _base_stepper(cfg, scaled, batches_iter)

    la = cfg.lookahead
    point = point0.copy()
    la_state = None
    if la.style == "joint":
        la_state = LookaheadState.init(point, la.k, la.alpha, la.alpha_phi_value)
        stepper = lambda pt: la_minmax_step(base, pt, la_state)
    elif la.style == "nested":
        la_state = NestedLookaheadState.init(
            point, la.k, la.k_ss, la.alpha, la.alpha_ss_value
        )
        stepper = lambda pt: la_nested_step(base, pt, la_state)
    elif la.style == "alternating":
        la_state = AlternatingLookaheadState.init(
            point, la.k_theta, la.k_phi, la.alpha, la.alpha_phi_value
        )
        stepper = lambda pt: la_alternating_step(base, pt, la_state)
    else:
        stepper = base

    ema = None
    if cfg.track.ema_beta is not None:
        ema = AverageTracker.ema(point.concat, cfg.track.ema_beta)
    uma = AverageTracker.uma()
    if cfg.track.uma:
        uma.update(point.concat)

    logger = _Logger(cfg, problem, inv0)

    def series_points():
        pts = [("fast", point.concat)]
        if la.style == "joint":
            pts.append(("slow", la_state.slow.concat))
        elif la.style == "nested":
            pts.append(("slow", la_state.slow.concat))
            pts.append(("super_slow", la_state.super_slow.concat))
        elif la.style == "alternating":
            pts.append(("slow", np.concatenate(
                [la_state.slow_theta, la_state.slow_phi])))
        if ema is not None:
            pts.append(("ema", ema.value))
        if cfg.track.uma:
            pts.append(("uma", uma.value))
        return pts

    logger.emit(0, 0.0, series_points())
    frozen = False
    diverged_at = None
    for t in range(1, n_updates + 1):
        if not frozen:
            before = None
            if la.style in ("joint", "nested") and cfg.track.ema_source == "slow":
                before = la_state.slow.concat.copy()
            point, _ = stepper(point)
            if ema is not None:
                if cfg.track.ema_source == "fast":
                    ema.update(point.concat)
                elif before is not None and not np.array_equal(
                    before, la_state.slow.concat
                ):
                    ema.update(la_state.slow.concat)
            if cfg.track.uma:
                uma.update(point.concat)
            if problem.distance_to_opt(point) > cfg.divergence_cutoff:
                frozen = True
                diverged_at = t * ppu
        logger.maybe_emit(t, t * ppu, series_points())
    return logger.trajectory(), diverged_at


def _run_svre_python(cfg: RunConfig, problem, point0, inv0):
    restart_uniforms, geom_lens, idx_t, idx_p = _svre_streams(cfg, problem)
    eta_t, eta_p = cfg.method.eta_theta_value, cfg.method.eta_phi_value
    p_restart = cfg.method.restart_prob
    budget = cfg.budget_passes
    snapshot_cost, inner_cost = svre_pass_components(cfg.batch_size, problem.n_samples)

    from ..optimizers import SvreState

    state = SvreState.init(point0, p_restart)
    point = point0.copy()
    ema = None
    if cfg.track.ema_beta is not None:
        ema = AverageTracker.ema(point.concat, cfg.track.ema_beta)
    uma = AverageTracker.uma()
    if cfg.track.uma:
        uma.update(point.concat)

    logger = _Logger(cfg, problem, inv0)

    def series_points():
        pts = [("fast", point.concat)]
        if ema is not None:
            pts.append(("ema", ema.value))
        if cfg.track.uma:
            pts.append(("uma", uma.value))
        return pts

    logger.emit(0, 0.0, series_points())
    passes = 0.0
    t = 0
    epoch = 0
    cur = 0
    frozen = False
    diverged_at = None
    while passes + snapshot_cost <= budget + 1e-9 and not frozen:
        if restart_uniforms[epoch] < p_restart and epoch > 0:
            point = JointPoint(state.avg_theta.copy(), state.avg_phi.copy())
            state.avg_count = 1
        state.snapshot = point.copy()
        state.mu_theta, state.mu_phi = problem.player_gradients(state.snapshot, FULL)
        passes += snapshot_cost
        logger.maybe_emit(t, passes, series_points())
        for _ in range(int(geom_lens[epoch])):
            if passes + inner_cost > budget + 1e-9 or frozen:
                break
            d_t, d_p = svre_corrected_jvf(problem, state, point,
                                          idx_t[cur], idx_p[cur])
            cur += 1
            half = JointPoint(point.theta - eta_t * d_t, point.phi - eta_p * d_p)
            d_t, d_p = svre_corrected_jvf(problem, state, half,
                                          idx_t[cur], idx_p[cur])
            cur += 1
            point = JointPoint(point.theta - eta_t * d_t, point.phi - eta_p * d_p)
            passes += inner_cost
            t += 1
            c = state.avg_count
            state.avg_theta = (c / (c + 1.0)) * state.avg_theta + point.theta / (c + 1.0)
            state.avg_phi = (c / (c + 1.0)) * state.avg_phi + point.phi / (c + 1.0)
            state.avg_count = c + 1
            if ema is not None and cfg.track.ema_source == "fast":
                ema.update(point.concat)
            if cfg.track.uma:
                uma.update(point.concat)
            if problem.distance_to_opt(point) > cfg.divergence_cutoff:
                frozen = True
                diverged_at = passes
            logger.maybe_emit(t, passes, series_points())
        epoch += 1
    if frozen:
        while logger.next_mark <= budget + 1e-9:
            logger.emit(t, logger.next_mark, series_points())
            logger.next_mark += cfg.eval_stride_passes
    return logger.trajectory(), diverged_at
