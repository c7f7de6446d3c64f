"""Testbed oracles: hand-derived gradients, finite differences, dense solves."""

import numpy as np
import pytest

from minmaxlab.problems import (
    FULL,
    Bilinear2D,
    EpochSampler,
    JointPoint,
    StochasticBilinear,
    make_stochastic_bilinear,
    quadratic_qp1,
    quadratic_qp2,
)

RNG = np.random.default_rng(1)


def losses_for(problem):
    """Per-player loss functions defined independently of the library."""
    if isinstance(problem, Bilinear2D):
        def loss(th, ph):
            return th[0] * ph[0]
    elif hasattr(problem, "a"):
        def loss(th, ph):
            return (problem.a * th[0] ** 2 + problem.b * th[0] * ph[0]
                    + problem.c * ph[0] ** 2)
    else:
        abar = np.eye(problem.d) / problem.d

        def loss(th, ph):
            return (problem.b_mean @ th + th @ abar @ ph + problem.c_mean @ ph)
    return loss, (lambda th, ph: -loss(th, ph))


def fd_jvf(problem, point, h=1e-6):
    loss_theta, loss_phi = losses_for(problem)
    th, ph = point.theta, point.phi
    out = np.empty(problem.dim)
    for i in range(problem.d_theta):
        e = np.zeros_like(th)
        e[i] = h
        out[i] = (loss_theta(th + e, ph) - loss_theta(th - e, ph)) / (2 * h)
    for i in range(problem.d_phi):
        e = np.zeros_like(ph)
        e[i] = h
        out[problem.d_theta + i] = (
            loss_phi(th, ph + e) - loss_phi(th, ph - e)
        ) / (2 * h)
    return out


def random_point(problem, rng):
    return JointPoint(rng.standard_normal(problem.d_theta),
                      rng.standard_normal(problem.d_phi))


ALL_PROBLEMS = [Bilinear2D(), quadratic_qp1(), quadratic_qp2(),
                make_stochastic_bilinear(5, 5, 3)]


class TestJointPoint:
    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            JointPoint([np.nan], [0.0])
        with pytest.raises(ValueError):
            JointPoint([0.0], [np.inf])

    def test_concat_roundtrip(self):
        pt = JointPoint([1.0, 2.0], [3.0])
        back = JointPoint.from_concat(pt.concat, 2)
        assert np.array_equal(back.theta, pt.theta)
        assert np.array_equal(back.phi, pt.phi)

    def test_dim_mismatch_rejected(self):
        with pytest.raises(ValueError):
            Bilinear2D().player_gradients(JointPoint([1.0, 2.0], [1.0]))


class TestStochasticBilinear:
    def test_shapes_and_data_law(self):
        sb = make_stochastic_bilinear(100, 100, 7)
        assert sb.b.shape == (100, 100) and sb.c.shape == (100, 100)
        # sample variance of the 1e4 draws within 20% of 1/d
        assert abs(sb.b.var() - 0.01) < 0.002
        assert abs(sb.c.var() - 0.01) < 0.002

    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            make_stochastic_bilinear(3, 4, 0)
        with pytest.raises(ValueError):
            make_stochastic_bilinear(0, 0, 0)

    def test_single_sample_case(self):
        sb = make_stochastic_bilinear(1, 1, 0)
        assert np.allclose(sb.jvf_jacobian(), [[0.0, 1.0], [-1.0, 0.0]])
        opt = sb.optimum()
        assert np.allclose(opt.theta, -sb.c[0])
        assert np.allclose(opt.phi, -sb.b[0])

    def test_optimum_matches_dense_solve(self):
        # materialize the one-hot A_i densely and solve the stationarity
        # system of the mean loss with a generic linear solver
        sb = make_stochastic_bilinear(3, 3, 11)
        a_bar = np.mean([np.outer(e, e) for e in np.eye(3)], axis=0)
        phi_star = np.linalg.solve(a_bar, -sb.b.mean(axis=0))
        theta_star = np.linalg.solve(a_bar.T, -sb.c.mean(axis=0))
        opt = sb.optimum()
        assert np.allclose(opt.theta, theta_star, atol=1e-12)
        assert np.allclose(opt.phi, phi_star, atol=1e-12)
        assert sb.distance_to_opt(opt) == 0.0

    def test_jvf_zero_at_optimum(self):
        sb = make_stochastic_bilinear(100, 100, 5)
        assert np.linalg.norm(sb.jvf(sb.optimum())) < 1e-10

    def test_batch_gradient_is_sample_mean(self):
        sb = make_stochastic_bilinear(6, 6, 2)
        pt = random_point(sb, np.random.default_rng(0))
        batch = np.arange(6)
        g_t, g_p = sb.player_gradients(pt, batch)
        # loop-and-average oracle over per-sample gradients
        acc_t = np.zeros(6)
        acc_p = np.zeros(6)
        for i in range(6):
            a_i = np.zeros((6, 6))
            a_i[i, i] = 1.0
            acc_t += sb.b[i] + a_i @ pt.phi
            acc_p += -(a_i.T @ pt.theta + sb.c[i])
        assert np.allclose(g_t, acc_t / 6, atol=1e-12)
        assert np.allclose(g_p, acc_p / 6, atol=1e-12)
        # full batch call agrees with the all-indices batch
        g_tf, g_pf = sb.player_gradients(pt, FULL)
        assert np.allclose(g_t, g_tf, atol=1e-12)
        assert np.allclose(g_p, g_pf, atol=1e-12)

    def test_batch_index_out_of_range(self):
        sb = make_stochastic_bilinear(3, 3, 0)
        pt = random_point(sb, np.random.default_rng(0))
        with pytest.raises(ValueError):
            sb.player_gradients(pt, [0, 3])

    def test_seed_regeneration_bit_identical(self):
        sb1 = make_stochastic_bilinear(10, 10, 99)
        sb2 = make_stochastic_bilinear(10, 10, 99)
        assert np.array_equal(sb1.b, sb2.b)
        assert np.array_equal(sb1.c, sb2.c)
        sb3 = make_stochastic_bilinear(10, 10, 100)
        assert not np.array_equal(sb1.b, sb3.b)


class TestHandGradients:
    def test_bilinear_at_ones(self):
        p = Bilinear2D()
        g_t, g_p = p.player_gradients(JointPoint([1.0], [1.0]))
        assert g_t[0] == 1.0 and g_p[0] == -1.0
        assert np.array_equal(p.jvf(JointPoint([1.0], [1.0])), [1.0, -1.0])

    def test_qp1_at_ones(self):
        # d/dx(-3x^2+4xy-y^2) = -6x+4y; own loss of y negates d/dy
        g_t, g_p = quadratic_qp1().player_gradients(JointPoint([1.0], [1.0]))
        assert g_t[0] == -2.0
        assert g_p[0] == -2.0

    def test_qp2_field_formula(self):
        p = quadratic_qp2()
        rng = np.random.default_rng(4)
        for _ in range(3):
            pt = random_point(p, rng)
            x, y = pt.theta[0], pt.phi[0]
            assert np.allclose(p.jvf(pt), [2 * x + 5 * y, -5 * x + 2 * y])


class TestJacobians:
    def test_constant_matrices(self):
        assert np.array_equal(Bilinear2D().jvf_jacobian(), [[0, 1], [-1, 0]])
        assert np.array_equal(quadratic_qp1().jvf_jacobian(), [[-6, 4], [-4, 2]])
        assert np.array_equal(quadratic_qp2().jvf_jacobian(), [[2, 5], [-5, 2]])

    def test_eigenvalues(self):
        eig = np.linalg.eigvals(Bilinear2D().jvf_jacobian())
        assert np.allclose(sorted(eig.imag), [-1, 1]) and np.allclose(eig.real, 0)
        eig = np.linalg.eigvals(quadratic_qp1().jvf_jacobian())
        assert np.allclose(eig, [-2, -2])
        eig = np.linalg.eigvals(quadratic_qp2().jvf_jacobian())
        assert np.allclose(sorted(eig.imag), [-5, 5]) and np.allclose(eig.real, 2)

    def test_sbg_block_structure(self):
        sb = make_stochastic_bilinear(4, 4, 1)
        jac = sb.jvf_jacobian()
        assert np.allclose(jac[:4, 4:], np.eye(4) / 4)
        assert np.allclose(jac[4:, :4], -np.eye(4) / 4)
        assert np.allclose(jac[:4, :4], 0) and np.allclose(jac[4:, 4:], 0)


class TestFieldInvariants:
    @pytest.mark.parametrize("problem", ALL_PROBLEMS, ids=lambda p: type(p).__name__)
    def test_jvf_matches_finite_differences(self, problem):
        rng = np.random.default_rng(8)
        for _ in range(10):
            pt = random_point(problem, rng)
            v = problem.jvf(pt)
            fd = fd_jvf(problem, pt)
            assert np.allclose(v, fd, rtol=1e-6, atol=1e-6)

    @pytest.mark.parametrize("problem", ALL_PROBLEMS, ids=lambda p: type(p).__name__)
    def test_field_is_affine_around_optimum(self, problem):
        rng = np.random.default_rng(9)
        jac = problem.jvf_jacobian()
        opt = problem.optimum().concat
        for _ in range(10):
            pt = random_point(problem, rng)
            assert np.allclose(problem.jvf(pt), jac @ (pt.concat - opt), atol=1e-10)

    def test_distance_examples(self):
        p = Bilinear2D()
        assert p.distance_to_opt(JointPoint([3.0], [4.0])) == 5.0
        assert np.array_equal(p.optimum().concat, [0.0, 0.0])


class TestEpochSampler:
    @pytest.mark.parametrize("bsz", [1, 2, 5, 10])
    def test_exact_cover_when_batch_divides_n(self, bsz):
        s = EpochSampler(10, bsz, np.random.default_rng(0))
        for _ in range(3):  # three epochs
            seen = np.concatenate([s.next_batch() for _ in range(10 // bsz)])
            assert sorted(seen) == list(range(10))

    def test_unique_within_batch_when_not_dividing(self):
        s = EpochSampler(10, 3, np.random.default_rng(1))
        counts = np.zeros(10, dtype=int)
        for _ in range(30):
            batch = s.next_batch()
            assert len(set(batch.tolist())) == len(batch)
            counts[batch] += 1
        assert counts.sum() == 90
        # the stream is a concatenation of permutations: near-uniform usage
        assert counts.min() >= 8 and counts.max() <= 10

    def test_stream_matches_sequential_draws(self):
        s1 = EpochSampler(7, 2, np.random.default_rng(5))
        s2 = EpochSampler(7, 2, np.random.default_rng(5))
        stream = s1.stream(9)
        seq = np.stack([s2.next_batch() for _ in range(9)])
        assert np.array_equal(stream, seq)

    def test_rejects_bad_batch_size(self):
        with pytest.raises(ValueError):
            EpochSampler(5, 0, np.random.default_rng(0))
        with pytest.raises(ValueError):
            EpochSampler(5, 6, np.random.default_rng(0))
