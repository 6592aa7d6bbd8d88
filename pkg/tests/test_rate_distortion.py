import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from switchrd import (
    ConvergenceError,
    Distribution,
    DistortionMatrix,
    InfeasibleError,
    ValidationError,
    ba_fixed_slope,
    d_max,
    d_min,
    expected_distortion,
    rate_at_distortion,
    rates_at_distortion_batch,
    rd_curve,
)

HAMMING = DistortionMatrix.hamming(2)
UNIFORM = Distribution([0.5, 0.5])


def h2(x):
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def binary_rd(q, target):
    """Closed-form oracle for a Bernoulli(q) source under Hamming distortion."""
    q = min(q, 1 - q)
    if target >= q:
        return 0.0
    return h2(q) - h2(target)


def simplex_vectors(k):
    return (
        st.lists(st.floats(0.01, 1.0), min_size=k, max_size=k)
        .map(lambda xs: [x / sum(xs) for x in xs])
    )


def distortion_matrices(nx, ny):
    return st.lists(
        st.lists(st.floats(0.0, 4.0), min_size=ny, max_size=ny),
        min_size=nx,
        max_size=nx,
    ).map(DistortionMatrix)


class TestFixedSlope:
    def test_steep_slope_pins_distortion_to_floor(self):
        pt = ba_fixed_slope(UNIFORM, HAMMING, -50.0)
        assert pt.distortion == pytest.approx(0.0, abs=1e-3)
        assert pt.rate == pytest.approx(1.0, abs=1e-3)

    def test_zero_slope_is_the_zero_rate_endpoint(self):
        pt = ba_fixed_slope(Distribution([2 / 3, 1 / 3]), HAMMING, 0.0)
        assert pt.rate == 0.0
        assert pt.distortion <= d_max(Distribution([2 / 3, 1 / 3]), HAMMING) + 1e-12

    def test_positive_slope_rejected(self):
        with pytest.raises(ValidationError):
            ba_fixed_slope(UNIFORM, HAMMING, 1.0)

    def test_non_convergence_reports_last_iterate(self):
        with pytest.raises(ConvergenceError) as err:
            ba_fixed_slope(Distribution([0.3, 0.7]), HAMMING, -3.0, tol=1e-15, max_iters=2)
        assert err.value.last_point is not None
        assert err.value.last_point.rate >= 0.0


class TestRateAtDistortion:
    def test_uniform_binary_closed_form(self):
        pt = rate_at_distortion(UNIFORM, HAMMING, 0.1, tol=1e-7)
        assert pt.rate == pytest.approx(1 - h2(0.1), abs=1e-4)

    def test_skewed_binary_closed_form(self):
        pt = rate_at_distortion(Distribution([2 / 3, 1 / 3]), HAMMING, 0.1, tol=1e-7)
        assert pt.rate == pytest.approx(h2(1 / 3) - h2(0.1), abs=1e-4)

    def test_rate_zero_at_ceiling(self):
        pt = rate_at_distortion(Distribution([2 / 3, 1 / 3]), HAMMING, 1 / 3)
        assert pt.rate == 0.0

    def test_infeasible_below_floor(self):
        d = DistortionMatrix([[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(InfeasibleError):
            rate_at_distortion(UNIFORM, d, 0.5)

    def test_floor_itself_is_reached_via_large_slopes(self):
        pt = rate_at_distortion(UNIFORM, HAMMING, 0.0)
        assert pt.distortion == pytest.approx(0.0, abs=1e-9)
        assert pt.rate == pytest.approx(1.0, abs=1e-6)

    def test_achieving_channel_meets_the_target(self):
        p = Distribution([0.3, 0.7])
        pt = rate_at_distortion(p, HAMMING, 0.12, tol=1e-6)
        assert expected_distortion(p, pt.channel, HAMMING) <= 0.12 + 1e-6

    @settings(max_examples=25, deadline=None)
    @given(p=simplex_vectors(2), frac=st.floats(0.05, 0.95))
    def test_oracle_equivalence_binary_hamming(self, p, frac):
        q = min(p)
        target = frac * q
        pt = rate_at_distortion(Distribution(p), HAMMING, target, tol=1e-7)
        assert pt.rate == pytest.approx(binary_rd(p[1], target), abs=1e-4)

    @settings(max_examples=15, deadline=None)
    @given(
        p=simplex_vectors(3),
        d=distortion_matrices(3, 3),
        fracs=st.tuples(st.floats(0.1, 0.9), st.floats(0.1, 0.9)),
    )
    def test_monotone_in_distortion(self, p, d, fracs):
        dist = Distribution(p)
        lo, hi = d_min(dist, d), d_max(dist, d)
        if hi - lo < 1e-3:
            return
        t1, t2 = sorted(lo + f * (hi - lo) for f in fracs)
        if t2 - t1 < 1e-4:
            return
        r1 = rate_at_distortion(dist, d, t1).rate
        r2 = rate_at_distortion(dist, d, t2).rate
        assert r1 >= r2 - 1e-6

    @settings(max_examples=15, deadline=None)
    @given(p=simplex_vectors(3), d=distortion_matrices(3, 2), frac=st.floats(0.15, 0.85))
    def test_midpoint_convexity(self, p, d, frac):
        dist = Distribution(p)
        lo, hi = d_min(dist, d), d_max(dist, d)
        if hi - lo < 1e-2:
            return
        t1 = lo + frac * 0.5 * (hi - lo)
        t2 = lo + (0.5 + frac * 0.5) * (hi - lo)
        mid = 0.5 * (t1 + t2)
        r1 = rate_at_distortion(dist, d, t1, tol=1e-8).rate
        r2 = rate_at_distortion(dist, d, t2, tol=1e-8).rate
        rm = rate_at_distortion(dist, d, mid, tol=1e-8).rate
        assert rm <= 0.5 * (r1 + r2) + 1e-6

    @settings(max_examples=20, deadline=None)
    @given(p=simplex_vectors(3), seed=st.integers(0, 2**32 - 1))
    def test_continuity_in_the_source(self, p, seed):
        rng = np.random.default_rng(seed)
        bump = rng.normal(size=3)
        bump -= bump.mean()
        norm = np.abs(bump).sum()
        if norm < 1e-9:
            return
        bump *= 1e-3 / norm
        q = np.clip(np.array(p) + bump, 1e-6, None)
        q /= q.sum()
        d = DistortionMatrix.hamming(3)
        target = 0.2
        rp = rate_at_distortion(Distribution(p), d, target).rate
        rq = rate_at_distortion(Distribution(q), d, target).rate
        assert abs(rp - rq) <= 1e-2


class TestCurve:
    def test_two_points_are_the_endpoints(self):
        curve = rd_curve(Distribution([2 / 3, 1 / 3]), HAMMING, 2)
        assert curve.points[0].distortion == pytest.approx(0.0, abs=1e-9)
        assert curve.points[-1].rate == 0.0
        assert curve.points[-1].distortion == pytest.approx(1 / 3)

    def test_uniform_binary_matches_closed_form(self):
        curve = rd_curve(UNIFORM, HAMMING, 11, tol=1e-7)
        for pt in curve.points:
            assert pt.rate == pytest.approx(binary_rd(0.5, pt.distortion), abs=1e-4)

    def test_rates_nonincreasing(self):
        curve = rd_curve(Distribution([0.2, 0.5, 0.3]), DistortionMatrix.hamming(3), 9)
        rates = curve.rates()
        assert np.all(np.diff(rates) <= 1e-7)

    def test_needs_two_points(self):
        with pytest.raises(ValidationError):
            rd_curve(UNIFORM, HAMMING, 1)


class TestBatch:
    def test_matches_single_calls(self):
        ps = np.array([[0.5, 0.5], [0.7, 0.3], [0.9, 0.1]])
        batch = rates_at_distortion_batch(ps, HAMMING, 0.08)
        for row, got in zip(ps, batch):
            want = rate_at_distortion(Distribution(row), HAMMING, 0.08).rate
            assert got == pytest.approx(want, abs=1e-5)

    def test_flags_infeasible_rows_with_inf(self):
        d = DistortionMatrix([[0.0, 1.0], [1.0, 0.5]])
        ps = np.array([[0.5, 0.5], [0.0, 1.0]])
        # floors are 0.25 and 0.5, so only the second row is unreachable
        rates = rates_at_distortion_batch(ps, d, 0.3)
        assert math.isfinite(rates[0])
        assert math.isinf(rates[1])

    def test_zero_rate_rows(self):
        ps = np.array([[0.9, 0.1]])
        rates = rates_at_distortion_batch(ps, HAMMING, 0.5)
        assert rates[0] == 0.0
