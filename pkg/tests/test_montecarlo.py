import math
import warnings

import numpy as np
import pytest
from scipy import stats

import slabpoly.montecarlo as mc
from slabpoly.geometry import LN2, ApproxParams, BallGeometry, membership_log_prob
from slabpoly.montecarlo import (
    Estimate,
    SlabPolytope,
    estimate_alpha,
    estimate_surface_deviation,
    estimate_sym_diff,
    estimate_sym_diff_parts,
    estimate_volume,
    is_spanning,
    mean_surface_deviation,
    mean_sym_diff,
    radial,
    radial_values,
    realize,
    rng_stream,
    sample_direction,
    sample_directions,
)
from slabpoly.expectation import expected_sym_diff

from oracles import parallelogram


def planar(t, angles):
    dirs = np.array([[math.cos(a), math.sin(a)] for a in angles])
    return SlabPolytope(2, t, dirs)


def quadrilateral_seed(t):
    """First seed whose n=2, N=4 realization has four disjoint caps outside P."""
    lo = 2.0 * math.acos(t)
    p = ApproxParams(2, math.log(4), LN2, t)
    for seed in range(1000):
        P = realize(p, seed)
        phi = math.acos(float(np.clip(P.directions[0] @ P.directions[1], -1.0, 1.0)))
        if lo + 0.05 < phi < math.pi - lo - 0.05:
            return P, phi
    raise AssertionError("no admissible seed")


class TestDirections:
    @pytest.mark.parametrize("n", [2, 3, 7, 50])
    def test_unit_norm(self, n):
        U = sample_directions(n, 1000, rng_stream(1, n))
        assert np.max(np.abs(np.linalg.norm(U, axis=1) - 1.0)) <= 1e-12
        assert abs(np.linalg.norm(sample_direction(n, rng_stream(2))) - 1.0) <= 1e-12

    def test_coordinate_means(self):
        U = sample_directions(3, 10**6, rng_stream(3))
        assert np.all(np.abs(U.mean(axis=0)) <= 4.0 / math.sqrt(10**6))

    def test_first_coordinate_uniform(self):
        U = sample_directions(3, 10**6, rng_stream(4))
        res = stats.kstest(U[:, 0], "uniform", args=(-1.0, 2.0))
        critical = 1.628 / math.sqrt(10**6)  # asymptotic 1% Kolmogorov critical value
        assert res.statistic < critical

    def test_deterministic(self):
        a = sample_directions(5, 10, rng_stream(9, 1, 2))
        b = sample_directions(5, 10, rng_stream(9, 1, 2))
        c = sample_directions(5, 10, rng_stream(9, 1, 3))
        assert np.array_equal(a, b) and not np.array_equal(a, c)

    def test_rejects_line(self):
        with pytest.raises(ValueError):
            sample_directions(1, 3, rng_stream(0))


class TestRealize:
    def test_quadrilateral(self):
        P = realize(ApproxParams(2, math.log(4), LN2, 0.9), seed=7)
        assert P.directions.shape == (2, 2)
        assert P.facets == 4 and P.bounded

    def test_spanning_rate(self):
        p = ApproxParams.analytic(4, math.log(1e4))
        spanning = sum(realize(p, seed).bounded for seed in range(1000))
        assert spanning >= 999

    def test_same_seed_same_directions(self):
        p = ApproxParams.analytic(4, math.log(1e4))
        assert np.array_equal(realize(p, 3).directions, realize(p, 3).directions)
        assert not np.array_equal(realize(p, 3).directions, realize(p, 4).directions)
        assert not np.array_equal(realize(p, 3, 0).directions, realize(p, 3, 1).directions)

    def test_rank_deficient_is_flagged(self):
        dirs = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [math.sqrt(0.5), math.sqrt(0.5), 0.0]])
        assert not is_spanning(dirs, 3)
        assert is_spanning(np.eye(3), 3)

    def test_requires_even_N(self):
        with pytest.raises(ValueError):
            realize(ApproxParams(2, math.log(5), LN2, 0.9), 0)

    def test_requires_enough_slabs(self):
        # N/2 < n is already rejected when the parameters are built
        with pytest.raises(ValueError):
            ApproxParams(3, math.log(4), LN2, 0.9)


class TestRadial:
    def test_on_axis(self):
        P = SlabPolytope(2, 0.9, np.array([[1.0, 0.0]]))
        assert radial(P, np.array([1.0, 0.0])) == pytest.approx(0.9, abs=1e-15)

    def test_orthogonal_is_infinite(self):
        P = SlabPolytope(2, 0.9, np.array([[1.0, 0.0]]))
        assert radial(P, np.array([0.0, 1.0])) == math.inf

    def test_square_corner(self):
        P = planar(1.0 - 1e-16, [0.0, math.pi / 2])
        u = np.array([1.0, 1.0]) / math.sqrt(2.0)
        assert radial(P, u) == pytest.approx(math.sqrt(2.0), rel=1e-12)

    def test_contains_inner_ball(self):
        p = ApproxParams.analytic(5, math.log(1e4))
        P = realize(p, 1)
        rho = radial_values(P, sample_directions(5, 20000, rng_stream(8)))
        assert np.all(rho >= p.t * (1.0 - 1e-12))

    def test_origin_symmetric(self):
        P = realize(ApproxParams.analytic(4, math.log(1e3)), 2)
        U = sample_directions(4, 100, rng_stream(5))
        assert np.array_equal(radial_values(P, U), radial_values(P, -U))


class TestSymDiffEstimate:
    def test_quadrilateral_exact(self):
        t = 0.95
        P, phi = quadrilateral_seed(t)
        est = estimate_sym_diff(P, 400_000, seed=1)
        assert est.within(parallelogram(t, phi)["sym_diff"])

    def test_parts_sum_to_total(self):
        P = realize(ApproxParams.analytic(4, math.log(1e3)), 3)
        inner, outer = estimate_sym_diff_parts(P, 5000, 4)
        total = estimate_sym_diff(P, 5000, 4)
        assert inner.value + outer.value == pytest.approx(total.value, rel=1e-12)

    def test_shrinking_polytope(self):
        p = ApproxParams(3, math.log(8), LN2, 1e-4)
        P = realize(p, 5)
        est = estimate_sym_diff(P, 20000, 6)
        vol_P = estimate_volume(P, 20000, 6, stream=mc._PROBES)
        vol_D = BallGeometry.of(3).vol
        # every radius is below one, so the estimate is exactly |D| - |P| sample by sample
        assert est.value + vol_P.value == pytest.approx(vol_D, rel=1e-12)
        assert est.value == pytest.approx(vol_D, rel=1e-6)

    def test_bit_reproducible(self):
        P = realize(ApproxParams.analytic(4, math.log(1e3)), 3)
        assert estimate_sym_diff(P, 3000, 12) == estimate_sym_diff(P, 3000, 12)

    def test_std_error_definition(self):
        x = np.array([1.0, 2.0, 4.0, 8.0])
        e = Estimate.from_samples(x, 0)
        assert e.std_error == pytest.approx(np.std(x, ddof=1) / 2.0, rel=1e-15)
        assert e.value == 3.75 and e.samples == 4

    def test_rejects_empty_sample(self):
        P = realize(ApproxParams.analytic(4, math.log(1e3)), 3)
        with pytest.raises(ValueError):
            estimate_sym_diff(P, 0, 1)

    def test_clip_warning(self, monkeypatch):
        monkeypatch.setattr(mc, "R_CAP", 0.6)
        P = realize(ApproxParams(3, math.log(8), LN2, 0.5), 1)
        with pytest.warns(UserWarning, match="clip radius"):
            estimate_sym_diff(P, 1000, 1)

    def test_no_warning_in_normal_use(self):
        P = realize(ApproxParams.analytic(4, math.log(1e3)), 3)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            estimate_sym_diff(P, 5000, 1)

    @pytest.mark.slow
    @pytest.mark.parametrize("n,N,t", [(3, 20, 0.7), (5, 100, 0.85), (6, 1000, None), (2, 10**4, None)])
    def test_oracle_equivalence(self, n, N, t):
        p = ApproxParams.analytic(n, math.log(N)) if t is None else ApproxParams(n, math.log(N), LN2, t)
        est = mean_sym_diff(p, 200, 20000, seed=n)
        assert est.within(expected_sym_diff(p).total)

    def test_worker_count_does_not_change_result(self):
        p = ApproxParams(3, math.log(20), LN2, 0.7)
        assert mean_sym_diff(p, 4, 2000, 3, workers=1) == mean_sym_diff(p, 4, 2000, 3, workers=2)


class TestSurfaceEstimate:
    def test_quadrilateral_exact(self):
        t = 0.95
        P, phi = quadrilateral_seed(t)
        s = estimate_surface_deviation(P, 400_000, seed=2)
        exact = parallelogram(t, phi)
        assert s.delta_s.within(exact["surface"])
        assert s.surface_P == pytest.approx(exact["perimeter"], rel=1e-2)

    def test_sphere_partition(self):
        P = realize(ApproxParams.analytic(4, math.log(1e3)), 3)
        s = estimate_surface_deviation(P, 5000, 1)
        assert s.sphere_in.value + s.sphere_out.value == pytest.approx(BallGeometry.of(4).surf,
                                                                        rel=1e-14)

    def test_cone_volume_identity(self):
        p = ApproxParams.analytic(4, math.log(1e3))
        P = realize(p, 3)
        s = estimate_surface_deviation(P, 20000, 1)
        vol_D = BallGeometry.of(4).vol
        lhs = s.vol_cap.value + s.vol_cup.value
        assert lhs == pytest.approx(vol_D + (p.t / 4) * s.surface_P, rel=1e-12)
        direct = estimate_volume(P, 20000, 1)
        assert abs(lhs - vol_D - direct.value) <= 3.0 * math.hypot(
            s.vol_cap.std_error + s.vol_cup.std_error, direct.std_error)

    def test_shrinking_polytope(self):
        t = 1e-3
        P = realize(ApproxParams(3, math.log(8), LN2, t), 5)
        s = estimate_surface_deviation(P, 20000, 6)
        S = BallGeometry.of(3).surf
        vol_P = estimate_volume(P, 20000, 6, stream=mc._PROBES).value
        # P lies inside the ball, so the union boundary is dD and the intersection boundary is dP
        assert s.delta_s.value == pytest.approx(S - 3.0 * vol_P / t, rel=1e-9)

    def test_isoperimetric_floor(self):
        n = 4
        D = BallGeometry.of(n).vol
        for seed in range(5):
            P = realize(ApproxParams.analytic(n, math.log(200)), seed)
            s = estimate_surface_deviation(P, 20000, seed)
            boundary = s.facets_in.value + s.sphere_in.value
            floor = n * s.vol_cap.value ** ((n - 1) / n) * D ** (1.0 / n)
            se = s.facets_in.std_error + s.sphere_in.std_error
            assert boundary >= floor - 3.0 * se

    def test_summary_counts_unbounded(self):
        s = mean_surface_deviation(ApproxParams(3, math.log(20), LN2, 0.7), 3, 2000, 1)
        assert s.unbounded == 0


class TestAlphaEstimate:
    def test_inside_is_zero(self):
        e = estimate_alpha(3, 0.5, 0.9, 100, 0)
        assert e.value == 0.0 and e.std_error == 0.0

    def test_archimedes(self):
        e = estimate_alpha(3, 1.0, 0.9, 10**6, 1)
        assert abs(e.value - 0.1) <= 4.0 * e.std_error

    def test_planar(self):
        e = estimate_alpha(2, 1.0, 1.0 / math.sqrt(2.0), 10**6, 2)
        assert abs(e.value - 0.5) <= 4.0 * e.std_error


@pytest.mark.slow
def test_membership_probability_matches_direction_sets():
    """Fraction of random N/2-sets keeping e_1 inside every slab vs exp(log-prob)."""
    p = ApproxParams.analytic(4, math.log(1e4))
    half = 5000
    sets, chunk = 20000, 200
    kept = 0
    for k in range(sets // chunk):
        y = sample_directions(4, chunk * half, rng_stream(17, 9, k))[:, 0].reshape(chunk, half)
        kept += int(np.count_nonzero(np.all(np.abs(y) < p.t, axis=1)))
    freq = kept / sets
    expected = math.exp(float(membership_log_prob(p.geometry, p, 1.0)))
    se = math.sqrt(expected * (1.0 - expected) / sets)
    assert abs(freq - expected) <= 3.0 * se
