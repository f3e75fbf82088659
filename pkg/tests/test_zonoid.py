import math

import numpy as np
import pytest

from essential_lab import distributions as dist
from essential_lab import zonoid as zn
from essential_lab.errors import DomainError

from oracles import elliptic_second_kind_quadrature, simplex_monomial_integral

TWO_OVER_PI2 = 2.0 / math.pi ** 2
ONE_OVER_PI = 1.0 / math.pi


class TestEllipticE:
    def test_endpoints(self):
        assert zn.elliptic_E(0.0) == pytest.approx(math.pi / 2.0, abs=1e-15)
        assert zn.elliptic_E(1.0) == 1.0

    def test_half_parameter(self):
        # frozen from the quadrature oracle at tolerance 1e-14
        assert zn.elliptic_E(0.5) == pytest.approx(1.3506438810476755, abs=1e-12)

    def test_against_quadrature_oracle(self):
        rng = np.random.default_rng(0)
        for m in rng.uniform(0.0, 1.0, 200):
            assert abs(zn.elliptic_E(m) - elliptic_second_kind_quadrature(m)) <= 1e-12

    def test_monotone_decreasing(self):
        grid = np.linspace(0.0, 1.0, 500)
        vals = zn.elliptic_E(grid)
        assert np.all(np.diff(vals) < 0.0)

    def test_domain(self):
        with pytest.raises(DomainError):
            zn.elliptic_E(-0.1)
        with pytest.raises(DomainError):
            zn.elliptic_E(1.1)

    def test_vectorized(self):
        arr = zn.elliptic_E(np.array([0.0, 0.25, 1.0]))
        assert arr.shape == (3,)


class TestFBound:
    def test_degenerate_axes(self):
        assert zn.F_bound(2.0, 0.0) == pytest.approx(4.0 / math.pi ** 2, rel=1e-14)
        assert zn.F_bound(0.0, 3.0) == pytest.approx(3.0 / math.pi, rel=1e-14)

    def test_diagonal_value(self):
        oracle = (2.0 * math.sqrt(2.0) / math.pi ** 2) * elliptic_second_kind_quadrature(0.5)
        assert zn.F_bound(1.0, 1.0) == pytest.approx(oracle, abs=1e-12)
        assert zn.F_bound(1.0, 1.0) == pytest.approx(0.3870669617321277, abs=1e-12)

    def test_origin_rejected(self):
        with pytest.raises(DomainError):
            zn.F_bound(0.0, 0.0)


class TestSupportFunctionLowerBound:
    def test_axis_values(self):
        assert zn.hL_support([1.0, 0.0, 0.0]) == pytest.approx(TWO_OVER_PI2, rel=1e-14)
        assert zn.hL_support([0.0, 1.0, 0.0]) == pytest.approx(TWO_OVER_PI2, rel=1e-14)
        assert zn.hL_support([0.0, 0.0, 1.0]) == pytest.approx(ONE_OVER_PI, rel=1e-14)

    def test_elliptic_term_dominates(self):
        val = zn.hL_support([1.0, 0.0, 1.0])
        assert val == pytest.approx(zn.F_bound(1.0, 1.0), rel=1e-14)
        assert val > max(TWO_OVER_PI2, ONE_OVER_PI)

    def test_batch(self):
        out = zn.hL_support(np.eye(3))
        assert np.allclose(out, [TWO_OVER_PI2, TWO_OVER_PI2, ONE_OVER_PI])


class TestMembership:
    def test_axis_point_inside(self):
        ok, margin = zn.membership_check(np.array([0.0, 0.0, ONE_OVER_PI]), grid=80)
        assert ok and margin >= -1e-9

    def test_scaled_diagonal_point_inside(self):
        point = 0.73 * np.array([TWO_OVER_PI2, 0.0, ONE_OVER_PI])
        ok, margin = zn.membership_check(point, grid=80)
        assert ok and margin >= 0.0

    def test_far_point_outside(self):
        ok, margin = zn.membership_check(np.array([0.0, 0.0, 2.0]), grid=80)
        assert not ok
        assert margin == pytest.approx(ONE_OVER_PI - 2.0, abs=1e-6)

    def test_negative_point_rejected(self):
        with pytest.raises(ValueError):
            zn.membership_check(np.array([-1.0, 0.0, 0.0]))


class TestPolytope:
    def test_generators_inside_hull(self):
        poly = zn.build_polytope_P()
        worst = -np.inf
        # hull support check: every generator satisfies all facet inequalities
        from scipy.spatial import ConvexHull
        hull = ConvexHull(poly.generators)
        vals = hull.equations[:, :3] @ poly.generators.T + hull.equations[:, 3:]
        worst = vals.max()
        assert worst <= 1e-12

    def test_symmetric_hull(self):
        poly = zn.build_polytope_P(symmetrized=True)
        swapped = poly.vertices[:, [1, 0, 2]]
        for v in swapped:
            dists = np.linalg.norm(poly.vertices - v, axis=1)
            assert dists.min() <= 1e-12

    def test_tetrahedra_fill_volume(self):
        poly = zn.build_polytope_P()
        vols = np.abs(np.linalg.det(poly.tetrahedra[:, 1:] - poly.tetrahedra[:, :1])) / 6.0
        assert np.all(vols >= 0.0)
        assert vols.sum() == pytest.approx(poly.volume, rel=1e-12)

    def test_all_scaled_vertices_certified(self):
        poly = zn.build_polytope_P()
        for vertex in poly.vertices:
            if np.allclose(vertex, 0.0):
                continue
            ok, _ = zn.membership_check(zn.AXIS_SCALE * vertex, grid=60)
            assert ok


class TestIntegration:
    def test_unit_cube(self):
        pts = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], float)
        poly = zn.Polytope3.from_points(pts)
        assert zn.integrate_rho1rho2(poly) == pytest.approx(0.25, rel=1e-13)

    def test_unit_simplex(self):
        poly = zn.Polytope3.from_points(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0],
                                                  [0, 0, 1]], float))
        assert zn.integrate_rho1rho2(poly) == pytest.approx(
            simplex_monomial_integral((1, 1, 0)), rel=1e-13)

    def test_redecomposition_invariance(self):
        pts = zn.polytope_generators()
        a = zn.Polytope3.from_points(pts)
        b = zn.Polytope3.from_points(pts, apex=np.array([0.3, 0.3, 0.4]))
        ia, ib = zn.integrate_rho1rho2(a), zn.integrate_rho1rho2(b)
        assert ia == pytest.approx(ib, rel=1e-12)

    def test_certified_polytope_values(self):
        lit = zn.integrate_rho1rho2(zn.build_polytope_P(symmetrized=False))
        sym = zn.integrate_rho1rho2(zn.build_polytope_P(symmetrized=True))
        assert sym == pytest.approx(0.0236165, abs=1e-4)   # printed reference value
        assert lit < sym


class TestSupportEstimate:
    def test_zero_direction(self):
        assert zn.support_estimate(np.zeros(5), 1000, seed=0).value == 0.0

    def test_first_axis(self):
        est = zn.support_estimate(np.eye(5)[0], 300_000, seed=1)
        assert abs(est.value - TWO_OVER_PI2) <= 3.0 * est.stderr

    def test_last_axis(self):
        est = zn.support_estimate(np.eye(5)[4], 300_000, seed=2)
        assert abs(est.value - ONE_OVER_PI) <= 3.0 * est.stderr


class TestSupportInvariants:
    def _batched_support(self, xs, z):
        vals = 0.5 * np.abs(xs @ z.T)
        return vals.mean(axis=1), vals.std(axis=1) / math.sqrt(z.shape[0])

    def test_matches_streaming_estimator(self):
        z = dist._z_batch(dist.rng_for(7, 0), 100_000)
        xs = np.eye(5)[:2]
        means, _ = self._batched_support(xs, z)
        for x, mean in zip(xs, means):
            est = zn.support_estimate(x, 100_000, seed=7)
            assert est.value == pytest.approx(mean, rel=1e-12)

    def test_sublinearity(self):
        rng = np.random.default_rng(3)
        z = dist._z_batch(dist.rng_for(8, 0), 20_000)
        xs = rng.standard_normal((10_000, 5))
        ys = rng.standard_normal((10_000, 5))
        hx, sx = self._batched_support(xs, z)
        hy, sy = self._batched_support(ys, z)
        hxy, sxy = self._batched_support(xs + ys, z)
        slack = 5.0 * (sx + sy + sxy)
        assert np.all(hxy <= hx + hy + slack)

    def test_dominates_closed_form_lower_bound(self):
        rng = np.random.default_rng(4)
        z = dist._z_batch(dist.rng_for(9, 0), 20_000)
        xs = rng.standard_normal((10_000, 5))
        est, se = self._batched_support(xs, z)
        rho = np.stack([
            np.hypot(xs[:, 0], xs[:, 1]),
            np.hypot(xs[:, 2], xs[:, 3]),
            np.abs(xs[:, 4]),
        ], axis=1)
        lower = zn.hL_support(rho)
        assert np.all(est + 3.0 * se >= lower - 1e-9)


class TestVolumeEstimate:
    def test_matches_reference_mean(self):
        est = zn.vol_K_estimate(10 ** 6, seed=5)
        derived = 120.0 * (math.pi ** 3 / 4.0) * est.value
        assert abs(derived - 3.95) <= 4.0 * 120.0 * (math.pi ** 3 / 4.0) * est.stderr

    def test_lower_bound_stays_below_solver_mean(self, psi_crosscheck_100k):
        report = zn.zonoid_lower_bound(grid=60)
        assert report.bound <= psi_crosscheck_100k.solver_report.mean


@pytest.fixture(scope="module")
def lower_bound_report():
    return zn.zonoid_lower_bound(grid=110)


class TestLowerBoundPipeline:
    @pytest.fixture()
    def report(self, lower_bound_report):
        return lower_bound_report

    def test_membership_all_certified(self, report):
        assert report.membership_ok
        assert len(report.memberships) == 13
        assert all(m["margin"] >= -1e-9 for m in report.memberships)

    def test_bound_value(self, report):
        assert report.bound >= 0.93
        expected = 120.0 * (2.0 ** 5 / math.pi ** 4) * report.integral_used
        assert report.bound == pytest.approx(expected, rel=1e-12)

    def test_bound_chain_consistency(self, report):
        assert report.vol_k_lower == pytest.approx(
            (2.0 ** 7 / math.pi ** 7) * report.integral_used, rel=1e-12)
        assert report.integral_used == report.integral_symmetrized

    def test_mutated_scaling_is_flagged(self):
        bad = (0.73, 0.86, 0.85, 1.2, 0.957)
        report = zn.zonoid_lower_bound(grid=60, lambdas=bad)
        assert not report.membership_ok
        failing = [m for m in report.memberships if not m["certified"]]
        assert failing and all("l4" in m["name"] for m in failing)
