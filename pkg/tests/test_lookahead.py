"""Lookahead wrapper oracles: closed-form contraction factors, trace
equalities against scripted references, averaging recursions."""

import numpy as np
import pytest

from minmaxlab.lookahead import (
    AlternatingLookaheadState,
    AverageTracker,
    LookaheadSingleState,
    LookaheadState,
    NestedLookaheadState,
    la_alternating_step,
    la_minmax_step,
    la_nested_step,
    la_single_objective_step,
)
from minmaxlab.optimizers import gda_step_simultaneous, gda_step_alternating
from minmaxlab.problems import Bilinear2D, JointPoint

BIL = Bilinear2D()


def gda_base(eta):
    return lambda pt: gda_step_simultaneous(BIL, pt, eta)


def run_la(pt, k, alpha, eta, cycles):
    state = LookaheadState.init(pt, k, alpha)
    base = gda_base(eta)
    for _ in range(cycles * k):
        pt, _ = la_minmax_step(base, pt, state)
    return pt, state


class TestJointLookahead:
    def test_alpha_one_is_bare_base(self):
        pt_la = JointPoint([0.8], [-0.6])
        pt_bare = pt_la.copy()
        state = LookaheadState.init(pt_la, 3, 1.0)
        base = gda_base(0.4)
        for _ in range(10):
            pt_la, _ = la_minmax_step(base, pt_la, state)
            pt_bare, _ = base(pt_bare)
        assert np.array_equal(pt_la.concat, pt_bare.concat)

    def test_observation_two_factor(self):
        # per outer cycle of k=2 the squared norm contracts by exactly
        # (1 - eta^2 a)^2 + 4 eta^2 a^2
        eta, alpha = 0.5, 0.2
        factor = (1 - eta**2 * alpha) ** 2 + 4 * eta**2 * alpha**2
        assert factor == pytest.approx(0.9425, abs=1e-12)
        pt = JointPoint([1.0], [1.0])
        state = LookaheadState.init(pt, 2, alpha)
        base = gda_base(eta)
        for _ in range(50):
            before = float(pt.concat @ pt.concat)
            pt, _ = la_minmax_step(base, pt, state)
            pt, _ = la_minmax_step(base, pt, state)
            after = float(pt.concat @ pt.concat)
            assert after / before == pytest.approx(factor, rel=1e-12)

    def test_convergence_boundary_in_alpha(self):
        # the k=2 wrapper converges iff alpha < 2/(eta^2+4); test both sides
        eta = 0.5
        astar = 2.0 / (eta**2 + 4.0)
        for alpha, should_converge in [(astar - 1e-3, True), (astar + 1e-3, False)]:
            pt = JointPoint([1.0], [1.0])
            state = LookaheadState.init(pt, 2, alpha)
            base = gda_base(eta)
            norms = [float(pt.concat @ pt.concat)]
            for _ in range(500):
                pt, _ = la_minmax_step(base, pt, state)
                pt, _ = la_minmax_step(base, pt, state)
                norms.append(float(pt.concat @ pt.concat))
            decreasing = all(b < a for a, b in zip(norms, norms[1:]))
            increasing = all(b > a for a, b in zip(norms, norms[1:]))
            assert decreasing == should_converge
            assert increasing == (not should_converge)

    def test_k_one_is_damped_base_step(self):
        pt = JointPoint([0.3], [0.9])
        alpha, eta = 0.4, 0.2
        state = LookaheadState.init(pt, 1, alpha)
        stepped, _ = la_minmax_step(gda_base(eta), pt.copy(), state)
        bare, _ = gda_step_simultaneous(BIL, pt, eta)
        expect = pt.concat + alpha * (bare.concat - pt.concat)
        assert np.allclose(stepped.concat, expect, atol=1e-15)

    def test_backtrack_counting(self):
        pt = JointPoint([1.0], [1.0])
        state = LookaheadState.init(pt, 5, 0.5)
        base = gda_base(0.1)
        for t in range(1, 11):
            pt, _ = la_minmax_step(base, pt, state)
            assert state.counter == t % 5
        # snapshot changed exactly twice
        assert not np.array_equal(state.slow.concat, [1.0, 1.0])

    def test_hyperparameter_validation(self):
        with pytest.raises(ValueError):
            LookaheadState.init(JointPoint([1.0], [1.0]), 0, 0.5)
        with pytest.raises(ValueError):
            LookaheadState.init(JointPoint([1.0], [1.0]), 2, 1.5)

    def test_joint_backtrack_order_independent(self):
        # both interpolations read pre-backtrack values; applying them in
        # either order gives identical numbers
        slow = np.array([0.2, -0.4])
        fast = np.array([1.0, 2.0])
        a_t, a_p = 0.3, 0.7
        theta_first = np.array([(1 - a_t) * slow[0] + a_t * fast[0],
                                (1 - a_p) * slow[1] + a_p * fast[1]])
        phi_first = np.array([(1 - a_t) * slow[0] + a_t * fast[0],
                              (1 - a_p) * slow[1] + a_p * fast[1]])
        assert np.array_equal(theta_first, phi_first)

    def test_converging_base_stays_converging(self):
        # random 2x2 affine systems with a contracting one-step map keep
        # contracting under any wrapper setting
        rng = np.random.default_rng(3)
        from minmaxlab.problems import Quadratic2D

        found = 0
        while found < 20:
            a, b, c = rng.uniform(-2, 2, size=3)
            prob = Quadratic2D(a, b, c)
            eta = rng.uniform(0.01, 0.4)
            op = np.eye(2) - eta * prob.jvf_jacobian()
            if np.max(np.abs(np.linalg.eigvals(op))) >= 0.999:
                continue
            found += 1
            k = int(rng.integers(1, 8))
            alpha = rng.uniform(0.05, 1.0)
            pt = JointPoint(rng.standard_normal(1), rng.standard_normal(1))
            state = LookaheadState.init(pt, k, alpha)
            base = lambda p: gda_step_simultaneous(prob, p, eta)
            steps = 0
            while prob.distance_to_opt(pt) > 1e-6:
                pt, _ = la_minmax_step(base, pt, state)
                steps += 1
                assert steps < 100_000, "wrapper broke a converging base"


class TestAlternatingLookahead:
    def test_alpha_one_is_bare_base(self):
        pt = JointPoint([1.0], [1.0])
        state = AlternatingLookaheadState.init(pt, 4, 4, 1.0, 1.0)
        bare = pt.copy()
        base = gda_base(0.3)
        for _ in range(9):
            pt, _ = la_alternating_step(base, pt, state)
            bare, _ = base(bare)
        assert np.array_equal(pt.concat, bare.concat)

    def test_equal_periods_match_joint_version(self):
        # with equal counters both players fire after the same update and the
        # base reads nothing in between: identical trace to the joint wrapper
        pt_a = JointPoint([1.0], [1.0])
        pt_j = pt_a.copy()
        st_a = AlternatingLookaheadState.init(pt_a, 3, 3, 0.5, 0.5)
        st_j = LookaheadState.init(pt_j, 3, 0.5)
        base = gda_base(0.4)
        for _ in range(9):
            pt_a, _ = la_alternating_step(base, pt_a, st_a)
            pt_j, _ = la_minmax_step(base, pt_j, st_j)
            assert np.array_equal(pt_a.concat, pt_j.concat)

    def test_converges_where_bare_alternating_cycles(self):
        eta, k, alpha = 0.3, 6, 0.5
        pt = JointPoint([1.0], [1.0])
        state = AlternatingLookaheadState.init(pt, k, k, alpha, alpha)
        base = lambda p: gda_step_alternating(BIL, p, eta, eta)
        passes = 0.0
        while BIL.distance_to_opt(pt) > 1e-4:
            pt, cost = la_alternating_step(base, pt, state)
            passes += cost
            assert passes < 10_000
        # the bare alternating map cycles: distance stays bounded away from 0
        bare = JointPoint([1.0], [1.0])
        for _ in range(2000):
            bare, _ = gda_step_alternating(BIL, bare, eta, eta)
        assert BIL.distance_to_opt(bare) > 0.5


class TestNestedLookahead:
    def test_alpha_one_both_levels_is_bare(self):
        pt = JointPoint([1.0], [-1.0])
        state = NestedLookaheadState.init(pt, 2, 6, 1.0, 1.0)
        bare = pt.copy()
        base = gda_base(0.2)
        for _ in range(12):
            pt, _ = la_nested_step(base, pt, state)
            bare, _ = base(bare)
        assert np.array_equal(pt.concat, bare.concat)

    def test_equal_periods_apply_two_interpolations(self):
        # k_ss = k_s: each fire applies the inner then the outer interpolation
        eta, k, alpha = 0.4, 3, 0.6
        pt = JointPoint([1.0], [1.0])
        state = NestedLookaheadState.init(pt, k, k, alpha)
        scripted = pt.copy()
        s_slow = pt.copy()
        s_super = pt.copy()
        base = gda_base(eta)
        for t in range(1, 10):
            pt, _ = la_nested_step(base, pt, state)
            scripted, _ = base(scripted)
            if t % k == 0:
                inner = JointPoint(
                    (1 - alpha) * s_slow.theta + alpha * scripted.theta,
                    (1 - alpha) * s_slow.phi + alpha * scripted.phi,
                )
                outer = JointPoint(
                    (1 - alpha) * s_super.theta + alpha * inner.theta,
                    (1 - alpha) * s_super.phi + alpha * inner.phi,
                )
                scripted = outer
                s_slow = scripted.copy()
                s_super = scripted.copy()
            assert np.array_equal(pt.concat, scripted.concat)

    def test_outer_backtrack_reduces_distance(self):
        # diverging base: the outer interpolation pulls strictly inward at
        # every outer fire
        eta, alpha = 0.5, 0.5
        pt = JointPoint([1.0], [1.0])
        state = NestedLookaheadState.init(pt, 5, 15, alpha)
        base = gda_base(eta)
        fires = 0
        for t in range(1, 91):
            before = BIL.distance_to_opt(pt)
            pt, _ = la_nested_step(base, pt, state)
            if t % 15 == 0:
                fires += 1
                assert BIL.distance_to_opt(pt) < before
        assert fires == 6

    def test_validation(self):
        with pytest.raises(ValueError):
            NestedLookaheadState.init(JointPoint([1.0], [1.0]), 10, 5, 0.5)


class TestSingleObjective:
    def test_alpha_one_is_bare_descent(self):
        w = np.array([2.0])
        state = LookaheadSingleState.init(w, 5, 1.0)
        base = lambda x: x - 0.1 * x  # gradient step on w^2/2
        bare = w.copy()
        for _ in range(12):
            w = la_single_objective_step(base, w, state)
            bare = base(bare)
        assert np.array_equal(w, bare)

    def test_quadratic_cycle_contraction(self):
        # f(w) = w^2/2, step 0.1, k=5, a=0.5: per-cycle factor
        # 1 - a(1 - 0.9^5)
        gamma, k, alpha = 0.1, 5, 0.5
        factor = 1 - alpha * (1 - (1 - gamma) ** k)
        w = np.array([1.0])
        state = LookaheadSingleState.init(w, k, alpha)
        base = lambda x: x - gamma * x
        for _ in range(40):
            before = abs(w[0])
            for _ in range(k):
                w = la_single_objective_step(base, w, state)
            assert abs(w[0]) / before == pytest.approx(factor, rel=1e-12)

    def test_slow_weights_have_lower_variance_under_noise(self):
        # noisy quadratic: the wrapper's output sequence fluctuates less than
        # the bare stochastic iterates
        gamma, k, alpha, sigma = 0.1, 5, 0.5, 0.1
        var_fast, var_slow = [], []
        for seed in range(5):
            rng = np.random.default_rng(seed)
            w_fast = np.array([0.0])
            w_slow = np.array([0.0])
            state = LookaheadSingleState.init(w_slow, k, alpha)
            noise = lambda: sigma * rng.standard_normal(1)
            fast_hist, slow_hist = [], []
            for t in range(10_000):
                w_fast = w_fast - gamma * (w_fast + noise())
                w_slow = la_single_objective_step(
                    lambda x: x - gamma * (x + noise()), w_slow, state
                )
                fast_hist.append(w_fast[0])
                if state.counter == 0:
                    slow_hist.append(w_slow[0])
            var_fast.append(np.var(fast_hist[200:]))
            var_slow.append(np.var(slow_hist[40:]))
        assert np.median(var_slow) < np.median(var_fast)


class TestAverageTracker:
    def test_uma_of_one_two_three(self):
        tr = AverageTracker.uma()
        for x in (1.0, 2.0, 3.0):
            tr.update(np.array([x]))
        assert tr.value[0] == 2.0

    def test_uma_equals_arithmetic_mean(self):
        rng = np.random.default_rng(0)
        xs = rng.standard_normal((57, 3))
        tr = AverageTracker.uma()
        for x in xs:
            tr.update(x)
        assert np.allclose(tr.value, xs.mean(axis=0), atol=1e-10)

    def test_ema_constant_is_exact_fixed_point(self):
        c = np.array([0.1, -2.7])
        tr = AverageTracker.ema(c, 0.999)
        for _ in range(100):
            tr.update(c)
        assert np.array_equal(tr.value, c)

    def test_ema_closed_form(self):
        beta, t = 0.999, 1000
        v0, c = 2.0, -1.0
        tr = AverageTracker.ema(np.array([v0]), beta)
        for _ in range(t):
            tr.update(np.array([c]))
        expect = beta**t * v0 + (1 - beta**t) * c
        assert tr.value[0] == pytest.approx(expect, abs=1e-9)

    def test_validation(self):
        with pytest.raises(ValueError):
            AverageTracker("median")
        with pytest.raises(ValueError):
            AverageTracker.ema(np.zeros(1), 1.0)
