import math
from fractions import Fraction

import numpy as np
import pytest

from switchrd import (
    Distribution,
    DistortionMatrix,
    RegionSpec,
    SearchConfig,
    SourceList,
    is_member,
    maximize_over_hull,
    maximize_over_region,
    rd_tilde_curve,
)

HAMMING = DistortionMatrix.hamming(2)
BINARY_PAIR = SourceList.independent(
    [[Fraction(2, 3), Fraction(1, 3)], [Fraction(3, 4), Fraction(1, 4)]]
)
BINARY_SPEC = RegionSpec(BINARY_PAIR, 0)

#: Loose-but-honest settings for property checks over random instances.
FAST = SearchConfig(ascent_iters=12, starts=6, distortion_tol=1e-5, ba_tol=1e-8)


def h2(x):
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def random_sources(rng, k, m):
    return SourceList.independent(rng.dirichlet(np.ones(k), size=m).tolist())


class TestRegionMaximizer:
    def test_binary_pair_prefers_uniform(self):
        res = maximize_over_region(BINARY_SPEC, HAMMING, 0.1)
        assert np.abs(res.argmax.probs - 0.5).sum() <= 1e-3
        assert res.value == pytest.approx(1 - h2(0.1), abs=1e-3)
        assert res.method == "grid"

    def test_single_source_region_is_a_point(self):
        srcs = SourceList.independent([[0.7, 0.3]])
        res = maximize_over_region(RegionSpec(srcs, 0), HAMMING, 0.1, FAST)
        np.testing.assert_allclose(res.argmax.probs, [0.7, 0.3], atol=1e-9)
        assert res.value == pytest.approx(h2(0.3) - h2(0.1), abs=1e-3)

    def test_zero_rate_regime(self):
        res = maximize_over_region(BINARY_SPEC, HAMMING, 0.6, FAST)
        assert res.value == 0.0

    def test_argmax_stays_feasible(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            srcs = random_sources(rng, 3, 2)
            res = maximize_over_region(
                RegionSpec(srcs, 0), DistortionMatrix.hamming(3), 0.15, FAST
            )
            assert is_member(res.argmax, RegionSpec(srcs, 0)).satisfied

    def test_seed_determinism(self):
        cfg = SearchConfig(method="multistart", starts=5, seed=77)
        a = maximize_over_region(BINARY_SPEC, HAMMING, 0.12, cfg)
        b = maximize_over_region(BINARY_SPEC, HAMMING, 0.12, cfg)
        assert a.value == b.value
        np.testing.assert_array_equal(a.argmax.probs, b.argmax.probs)
        assert a.evaluations == b.evaluations

    def test_grid_and_multistart_agree(self):
        grid = maximize_over_region(BINARY_SPEC, HAMMING, 0.1)
        multi = maximize_over_region(
            BINARY_SPEC, HAMMING, 0.1, SearchConfig(method="multistart", starts=8, seed=5)
        )
        assert multi.value == pytest.approx(grid.value, abs=1e-3)
        assert multi.method == "multistart"

    def test_unreachable_distortion_reports_inf(self):
        d = DistortionMatrix([[0.5, 1.0], [1.0, 0.5]])
        res = maximize_over_region(BINARY_SPEC, d, 0.4, FAST)
        assert math.isinf(res.value)

    def test_four_symbol_instance_runs_multistart(self):
        rng = np.random.default_rng(9)
        srcs = random_sources(rng, 4, 2)
        res = maximize_over_region(
            RegionSpec(srcs, 0), DistortionMatrix.hamming(4), 0.2, FAST
        )
        assert res.method == "multistart"
        assert res.value >= 0.0


class TestHullMaximizer:
    def test_single_source(self):
        srcs = SourceList.independent([[0.7, 0.3]])
        res = maximize_over_hull(srcs, HAMMING, 0.1, FAST)
        assert res.value == pytest.approx(h2(0.3) - h2(0.1), abs=1e-3)

    def test_binary_pair_picks_the_most_uniform_vertex(self):
        res = maximize_over_hull(BINARY_PAIR, HAMMING, 0.1)
        assert res.value == pytest.approx(h2(1 / 3) - h2(0.1), abs=1e-3)
        np.testing.assert_allclose(res.argmax.probs, [2 / 3, 1 / 3], atol=1e-3)

    def test_hull_never_beats_region(self):
        rng = np.random.default_rng(17)
        for _ in range(4):
            srcs = random_sources(rng, 3, 2)
            d = DistortionMatrix.hamming(3)
            hull = maximize_over_hull(srcs, d, 0.2, FAST)
            region = maximize_over_region(RegionSpec(srcs, 0), d, 0.2, FAST)
            assert hull.value <= region.value + 1e-6


class TestSandwich:
    def test_region_between_hull_and_unconstrained(self):
        # slackening every constraint by 1 frees the whole simplex
        free = RegionSpec(BINARY_PAIR, 1.0)
        for target in (0.05, 0.15, 0.25):
            r_star = maximize_over_hull(BINARY_PAIR, HAMMING, target).value
            r_tilde = maximize_over_region(BINARY_SPEC, HAMMING, target).value
            r_free = maximize_over_region(free, HAMMING, target).value
            assert r_star <= r_tilde + 1e-6
            assert r_tilde <= r_free + 1e-6

    def test_collapse_when_hull_contains_the_unconstrained_argmax(self):
        srcs = SourceList.independent([[0.45, 0.55], [0.55, 0.45]])
        free = RegionSpec(srcs, 1.0)
        target = 0.1
        r_star = maximize_over_hull(srcs, HAMMING, target).value
        r_tilde = maximize_over_region(RegionSpec(srcs, 0), HAMMING, target).value
        r_free = maximize_over_region(free, HAMMING, target).value
        assert r_star == pytest.approx(1 - h2(target), abs=1e-3)
        assert r_tilde == pytest.approx(r_star, abs=1e-3)
        assert r_free == pytest.approx(r_star, abs=1e-3)


class TestCurve:
    def test_binary_pair_curve(self):
        curve = rd_tilde_curve(BINARY_SPEC, HAMMING, 6)
        values = [res.value for _, res in curve]
        targets = [t for t, _ in curve]
        assert targets[0] == pytest.approx(0.0)
        assert targets[-1] == pytest.approx(0.5)
        assert all(a >= b - 1e-6 for a, b in zip(values, values[1:]))
        assert values[-1] == 0.0
        for target, res in curve[1:-1]:
            assert res.value == pytest.approx(1 - h2(target), abs=2e-3)
