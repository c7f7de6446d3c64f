"""Operator-spectrum oracles: hand eigen-decompositions of 2x2 operators,
randomized property checks of the eigenvalue map, finite-difference
cross-validation against the simulated steps."""

import numpy as np
import pytest

from minmaxlab.problems import (
    Bilinear2D,
    JointPoint,
    Quadratic2D,
    make_stochastic_bilinear,
    quadratic_qp1,
    quadratic_qp2,
)
from minmaxlab.spectral import (
    OperatorSpec,
    la,
    la_eigen_map,
    lssp_check,
    nested_la,
    operator_jacobian,
    spectrum,
    spectrum_of,
    tune_by_spectral_radius,
    verify_operator,
)

BIL = Bilinear2D()
J_BIL = BIL.jvf_jacobian()


def eigs_sorted(mat):
    e = np.linalg.eigvals(mat)
    return np.sort_complex(e)


class TestBaseOperators:
    def test_gda_sim_bilinear(self):
        eta = 0.3
        op = operator_jacobian(OperatorSpec("gda-sim", eta=eta), J_BIL)
        assert np.allclose(op.matrix, [[1, -eta], [eta, 1]])
        rep = spectrum(op.matrix)
        assert rep.spectral_radius**2 == pytest.approx(1 + eta**2, rel=1e-12)
        assert rep.verdict == "diverges"

    def test_zero_step_is_identity(self):
        op = operator_jacobian(OperatorSpec("gda-sim", eta=0.0), J_BIL)
        assert np.array_equal(op.matrix, np.eye(2))
        assert spectrum(op.matrix).verdict == "marginal"

    def test_eg_polynomial_eigenvalues(self):
        # 1 - eta*lam + eta^2 lam^2 at lam = +-i
        eta = 0.3
        rep = spectrum_of(OperatorSpec("eg", eta=eta), J_BIL)
        expect = np.sort_complex(np.array([0.91 - 0.3j, 0.91 + 0.3j]))
        assert np.allclose(np.sort_complex(rep.eigenvalues), expect, atol=1e-12)
        assert rep.spectral_radius**2 == pytest.approx(0.9181, abs=1e-12)

    def test_gda_on_qp2(self):
        rep = spectrum_of(OperatorSpec("gda-sim", eta=0.1), quadratic_qp2().jvf_jacobian())
        expect = np.sort_complex(np.array([1 - 0.1 * (2 + 5j), 1 - 0.1 * (2 - 5j)]))
        assert np.allclose(np.sort_complex(rep.eigenvalues), expect, atol=1e-12)

    def test_gda_alt_composes_half_steps(self):
        eta = 0.25
        op = operator_jacobian(OperatorSpec("gda-alt", eta=eta), J_BIL)
        # phi ascends first, theta then reads the new phi
        m_phi = np.array([[1.0, 0.0], [eta, 1.0]])
        m_theta_after = np.array([[1.0 - eta * eta, -eta], [eta, 1.0]])
        assert np.allclose(op.matrix, m_theta_after)
        assert np.allclose(op.matrix, np.array([[1, -eta], [0, 1]]) @ m_phi)

    def test_ogda_companion_spectrum(self):
        eta = 0.1
        rep = spectrum_of(OperatorSpec("ogda", eta=eta), J_BIL)
        assert rep.augmented
        # mu^2 = (1 - 2 eta lam) mu + eta lam at lam = +-i
        roots = []
        for lam in (1j, -1j):
            roots.extend(np.roots([1.0, -(1 - 2 * eta * lam), -eta * lam]))
        assert np.allclose(
            np.sort_complex(rep.eigenvalues), np.sort_complex(np.array(roots)),
            atol=1e-10,
        )

    def test_per_player_step_sizes(self):
        jac = quadratic_qp1().jvf_jacobian()
        op = operator_jacobian(
            OperatorSpec("gda-sim", eta_theta=0.01, eta_phi=0.5), jac
        )
        expect = np.eye(2) - np.diag([0.01, 0.5]) @ jac
        assert np.allclose(op.matrix, expect)


class TestLookaheadOperator:
    def test_k2_factor_matches_closed_form(self):
        eta, alpha = 0.5, 0.2
        spec = la(OperatorSpec("gda-sim", eta=eta), 2, alpha)
        rep = spectrum_of(spec, J_BIL)
        factor = (1 - eta**2 * alpha) ** 2 + 4 * eta**2 * alpha**2
        assert rep.spectral_radius**2 == pytest.approx(factor, rel=1e-12)

    def test_alpha_one_powers_base(self):
        base = OperatorSpec("gda-sim", eta=0.3)
        for k in (1, 2, 5):
            rep = spectrum_of(la(base, k, 1.0), J_BIL)
            base_rho = spectrum_of(base, J_BIL).spectral_radius
            assert rep.spectral_radius == pytest.approx(base_rho**k, rel=1e-12)

    def test_boundary_alpha_flips_verdict(self):
        eta = 0.5
        astar = 2.0 / (eta**2 + 4.0)
        base = OperatorSpec("gda-sim", eta=eta)
        below = spectrum_of(la(base, 2, astar - 1e-3), J_BIL)
        above = spectrum_of(la(base, 2, astar + 1e-3), J_BIL)
        assert below.verdict == "converges"
        assert above.verdict == "diverges"

    def test_nested_operator_composes(self):
        base = OperatorSpec("gda-sim", eta=0.4)
        spec = nested_la(base, 2, 6, 0.5)
        direct = operator_jacobian(spec, J_BIL).matrix
        inner = operator_jacobian(la(base, 2, 0.5), J_BIL).matrix
        expect = 0.5 * np.linalg.matrix_power(inner, 3) + 0.5 * np.eye(2)
        assert np.allclose(direct, expect, atol=1e-12)

    def test_nested_requires_divisibility(self):
        base = OperatorSpec("gda-sim", eta=0.4)
        with pytest.raises(ValueError):
            operator_jacobian(nested_la(base, 2, 7, 0.5), J_BIL)


class TestEigenMap:
    def test_alpha_one_is_power(self):
        lams = np.array([0.3 + 0.4j, -0.9j])
        assert np.allclose(la_eigen_map(lams, 3, 1.0), lams**3)

    def test_fixed_direction_stays_fixed(self):
        for k in (1, 2, 7):
            for alpha in (0.1, 0.5, 1.0):
                assert la_eigen_map([1.0], k, alpha)[0] == 1.0

    def test_image_on_segment(self):
        rng = np.random.default_rng(0)
        lams = rng.standard_normal(100) + 1j * rng.standard_normal(100)
        k, alpha = 4, 0.37
        image = la_eigen_map(lams, k, alpha)
        assert np.array_equal(image, (1.0 - alpha) + alpha * lams**k)

    def test_unit_disk_maps_into_itself(self):
        # both segment endpoints are inside the closed unit disk
        rng = np.random.default_rng(7)
        n = 10_000
        r = np.sqrt(rng.random(n))
        ang = rng.random(n) * 2 * np.pi
        lams = r * np.exp(1j * ang) * 0.999999
        for k in (1, 2, 3, 7):
            for alpha in (0.25, 0.5, 1.0):
                image = la_eigen_map(lams, k, alpha)
                assert np.all(np.abs(image) < 1.0)


class TestVerifyOperator:
    @pytest.mark.parametrize("spec", [
        OperatorSpec("gda-sim", eta=0.1),
        OperatorSpec("gda-alt", eta=0.2, ratio=2),
        OperatorSpec("eg", eta=0.3),
        OperatorSpec("ogda", eta=0.1),
        la(OperatorSpec("gda-sim", eta=0.2), 3, 0.5),
        la(OperatorSpec("eg", eta=0.3), 2, 0.25),
        la(OperatorSpec("ogda", eta=0.1), 2, 0.5),
        nested_la(OperatorSpec("gda-sim", eta=0.2), 2, 4, 0.5),
    ], ids=["gda-sim", "gda-alt", "eg", "ogda", "la-gda", "la-eg", "la-ogda",
            "nested"])
    def test_against_simulated_steps(self, spec):
        for problem in (BIL, quadratic_qp2()):
            report = verify_operator(spec, problem, trials=2)
            assert report.max_fd_error <= 1e-6
            if report.map_checked:
                assert report.max_map_error <= 1e-8
            assert report.passed

    def test_ogda_lookahead_skips_eigen_map(self):
        spec = la(OperatorSpec("ogda", eta=0.1), 2, 0.5)
        report = verify_operator(spec, BIL, trials=1)
        assert not report.map_checked

    def test_random_affine_la_self_consistency(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            a, b, c = rng.uniform(-2, 2, size=3)
            prob = Quadratic2D(a, b, c)
            spec = la(OperatorSpec("gda-sim", eta=float(rng.uniform(0.05, 0.3))),
                      3, 0.5)
            report = verify_operator(spec, prob, trials=1)
            assert report.passed


class TestLssp:
    def test_bilinear_rotational_not_stable(self):
        rep = lssp_check(J_BIL)
        assert not rep.stable and rep.rotational

    def test_qp2_stable_rotational(self):
        rep = lssp_check(quadratic_qp2().jvf_jacobian())
        assert rep.stable and rep.rotational

    def test_qp1_unstable_not_rotational(self):
        rep = lssp_check(quadratic_qp1().jvf_jacobian())
        assert not rep.stable and not rep.rotational


class TestTuning:
    def test_qp2_shared_eta_optimum(self):
        jac = quadratic_qp2().jvf_jacobian()
        # analytic minimum of (1-2 eta)^2 + 25 eta^2 at eta = 2/29
        etas = [0.01 * i for i in range(1, 201)] + [2.0 / 29.0]
        etas.sort()
        best, rep = tune_by_spectral_radius(
            jac, (OperatorSpec("gda-sim", eta=e) for e in etas)
        )
        assert best.eta == pytest.approx(2.0 / 29.0)
        assert rep.spectral_radius**2 == pytest.approx(725.0 / 841.0, abs=1e-9)

    def test_qp1_shared_eta_always_diverges(self):
        jac = quadratic_qp1().jvf_jacobian()
        for i in range(1, 201):
            rep = spectrum_of(OperatorSpec("gda-sim", eta=0.01 * i), jac)
            assert rep.spectral_radius > 1.0

    def test_qp1_per_player_grid_finds_stable_pair(self):
        jac = quadratic_qp1().jvf_jacobian()
        etas = [0.01 * i for i in range(1, 101)]
        best, rep = tune_by_spectral_radius(
            jac,
            (OperatorSpec("gda-sim", eta_theta=et, eta_phi=ep)
             for et in etas for ep in etas),
        )
        assert rep.spectral_radius < 1.0

    def test_deterministic_tie_break(self):
        specs = [OperatorSpec("gda-sim", eta=0.0),
                 OperatorSpec("gda-sim", eta_theta=0.0, eta_phi=0.0)]
        best, _ = tune_by_spectral_radius(J_BIL, specs)
        assert best is specs[0]


class TestDecayEnvelope:
    def test_simulated_decay_bounded_by_spectral_radius(self):
        # diagonalizable operators: || omega_T || <= cond(V) rho^T || omega_0 ||
        cases = [
            (quadratic_qp2(), OperatorSpec("gda-sim", eta=2.0 / 29.0)),
            (quadratic_qp2(), OperatorSpec("eg", eta=0.1)),
            (BIL, la(OperatorSpec("gda-sim", eta=0.3), 6, 0.5)),
        ]
        from minmaxlab.spectral import apply_operator

        for problem, spec in cases:
            op = operator_jacobian(spec, problem.jvf_jacobian())
            lam, vee = np.linalg.eig(op.matrix)
            cond = np.linalg.cond(vee)
            rho = np.max(np.abs(lam))
            assert rho < 1
            x = np.array([1.0, 1.0])
            x0 = x.copy()
            for _ in range(200):
                x = apply_operator(spec, problem, x)
            bound = 10.0 * cond * rho**200 * np.linalg.norm(x0)
            assert np.linalg.norm(x) <= bound


class TestSbgOperator:
    def test_full_batch_field_scaled_by_samples_has_unit_rotation(self):
        sb = make_stochastic_bilinear(10, 10, 0)
        jac = sb.n_samples * sb.jvf_jacobian()
        rep = spectrum_of(OperatorSpec("gda-sim", eta=0.3), jac)
        assert rep.spectral_radius**2 == pytest.approx(1.09, rel=1e-10)

    def test_report_json_contract(self):
        rep = spectrum_of(OperatorSpec("gda-sim", eta=0.3), J_BIL)
        payload = rep.to_json_dict()
        assert set(payload) >= {"eigenvalues", "spectral_radius", "verdict"}
        assert all(len(pair) == 2 for pair in payload["eigenvalues"])
