from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from switchrd import (
    Distribution,
    GuardError,
    RegionSpec,
    SourceList,
    ValidationError,
    beta_of_subset,
    beta_table,
    enumerate_constraints,
    hull_member,
    is_member,
    mask_of,
    q_of_subset,
    realizable_subsets,
    subset_members,
)

BINARY_PAIR = SourceList.independent(
    [[Fraction(2, 3), Fraction(1, 3)], [Fraction(3, 4), Fraction(1, 4)]]
)


def random_sources(rng, k, m):
    rows = rng.dirichlet(np.ones(k), size=m)
    return SourceList.independent(rows.tolist())


class TestSubsetHelpers:
    def test_members(self):
        assert subset_members(0b101) == (0, 2)
        assert mask_of([0, 2]) == 0b101

    def test_empty_subset_rejected(self):
        with pytest.raises(ValidationError):
            q_of_subset(BINARY_PAIR, 0)
        with pytest.raises(ValidationError):
            beta_of_subset(BINARY_PAIR, 0)


class TestTrapProbabilities:
    def test_full_alphabet_is_certain(self):
        assert q_of_subset(BINARY_PAIR, 0b11) == 1

    def test_binary_pair_values_exact(self):
        assert q_of_subset(BINARY_PAIR, 0b01) == Fraction(1, 2)
        assert q_of_subset(BINARY_PAIR, 0b10) == Fraction(1, 12)

    def test_beta_values_exact(self):
        assert beta_of_subset(BINARY_PAIR, 0b01) == Fraction(1, 2)
        assert beta_of_subset(BINARY_PAIR, 0b10) == Fraction(1, 12)
        assert beta_of_subset(BINARY_PAIR, 0b11) == Fraction(5, 12)

    def test_single_source_betas(self):
        src = SourceList.independent([[0.2, 0.3, 0.5]])
        assert beta_of_subset(src, 0b001) == pytest.approx(0.2)
        assert beta_of_subset(src, 0b010) == pytest.approx(0.3)
        assert beta_of_subset(src, 0b100) == pytest.approx(0.5)
        assert beta_of_subset(src, 0b011) == pytest.approx(0.0, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), k=st.integers(2, 4), m=st.integers(1, 3))
    def test_beta_normalization_and_partial_sums(self, seed, k, m):
        srcs = random_sources(np.random.default_rng(seed), k, m)
        betas = beta_table(srcs)
        assert sum(betas.values()) == pytest.approx(1.0, abs=1e-9)
        for mask, value in betas.items():
            assert value >= -1e-12
            if mask.bit_count() > m:
                assert abs(value) <= 1e-12
        for mask in betas:
            partial = sum(v for u, v in betas.items() if u & ~mask == 0)
            assert partial == pytest.approx(float(q_of_subset(srcs, mask)), abs=1e-9)

    def test_joint_agrees_with_product_form(self):
        rows = [[0.6, 0.4], [0.3, 0.7]]
        joint = [
            rows[0][a] * rows[1][b] for a in range(2) for b in range(2)
        ]
        independent = SourceList.independent(rows)
        joint_srcs = SourceList.joint(joint, alphabet_size=2, num_sources=2)
        for mask in (0b01, 0b10, 0b11):
            assert q_of_subset(joint_srcs, mask) == pytest.approx(
                float(q_of_subset(independent, mask))
            )
            assert beta_of_subset(joint_srcs, mask) == pytest.approx(
                float(beta_of_subset(independent, mask))
            )

    def test_monte_carlo_consistency(self):
        rng = np.random.default_rng(2024)
        srcs = SourceList.independent([[2 / 3, 1 / 3], [3 / 4, 1 / 4]])
        trials = 200_000
        draws = np.stack(
            [rng.choice(2, size=trials, p=row) for row in srcs.as_array()]
        )
        for mask in (0b01, 0b10):
            inside = np.all(np.isin(draws, subset_members(mask)), axis=0)
            freq = inside.mean()
            q = float(q_of_subset(srcs, mask))
            stderr = np.sqrt(q * (1 - q) / trials)
            assert abs(freq - q) <= 4 * stderr


class TestMembership:
    def test_uniform_is_attainable(self):
        assert is_member(Distribution([0.5, 0.5]), RegionSpec(BINARY_PAIR, 0)).satisfied

    def test_violation_reports_both_sides(self):
        report = is_member(Distribution([0.4, 0.6]), RegionSpec(BINARY_PAIR, 0))
        assert not report.satisfied
        assert report.violations == ((0b01, pytest.approx(0.4), pytest.approx(0.5)),)

    def test_boundary_point_is_a_member(self):
        assert is_member(
            Distribution([11 / 12, 1 / 12]), RegionSpec(BINARY_PAIR, 0)
        ).satisfied

    def test_single_source_region_is_that_source(self):
        src = SourceList.independent([[0.2, 0.3, 0.5]])
        spec = RegionSpec(src, 0)
        assert is_member(Distribution([0.2, 0.3, 0.5]), spec).satisfied
        assert not is_member(Distribution([0.25, 0.3, 0.45]), spec).satisfied

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), k=st.integers(2, 4), m=st.integers(1, 3))
    def test_hull_inside_region(self, seed, k, m):
        rng = np.random.default_rng(seed)
        srcs = random_sources(rng, k, m)
        lam = rng.dirichlet(np.ones(m))
        p = Distribution(lam @ srcs.as_array())
        assert hull_member(p, srcs)
        assert is_member(p, RegionSpec(srcs, 0)).satisfied

    @settings(max_examples=40, deadline=None)
    @given(
        seed=st.integers(0, 2**32 - 1),
        deltas=st.tuples(st.floats(0.0, 0.3), st.floats(0.0, 0.3)),
    )
    def test_relaxation_is_monotone(self, seed, deltas):
        rng = np.random.default_rng(seed)
        srcs = random_sources(rng, 3, 2)
        p = Distribution(rng.dirichlet(np.ones(3)))
        d1, d2 = sorted(deltas)
        if is_member(p, RegionSpec(srcs, d1)).satisfied:
            assert is_member(p, RegionSpec(srcs, d2)).satisfied


class TestConstraintListing:
    def test_counts(self):
        assert len(enumerate_constraints(RegionSpec(BINARY_PAIR, 0))) == 3
        ternary = SourceList.independent([[0.5, 0.3, 0.2]])
        assert len(enumerate_constraints(RegionSpec(ternary, 0))) == 7

    def test_binary_pair_rhs_values(self):
        rhs = {r for _, r in enumerate_constraints(RegionSpec(BINARY_PAIR, 0))}
        assert rhs == {Fraction(1, 2), Fraction(1, 12), Fraction(1)}

    def test_attainable_interval_exact(self):
        constraints = dict(enumerate_constraints(RegionSpec(BINARY_PAIR, 0)))
        low = constraints[0b10]
        high = 1 - constraints[0b01]
        assert (low, high) == (Fraction(1, 12), Fraction(1, 2))

    def test_alphabet_guard(self):
        wide = SourceList.independent([[1.0 / 21] * 21])
        with pytest.raises(GuardError):
            enumerate_constraints(RegionSpec(wide, 0))


class TestHull:
    def test_vertices_belong(self):
        for row in BINARY_PAIR.as_array():
            assert hull_member(Distribution(row), BINARY_PAIR)

    def test_interior_point(self):
        assert hull_member(Distribution([0.7, 0.3]), BINARY_PAIR)

    def test_uniform_is_outside(self):
        assert not hull_member(Distribution([0.5, 0.5]), BINARY_PAIR)

    def test_joint_mode_rejected(self):
        joint = SourceList.joint([0.25] * 4, alphabet_size=2, num_sources=2)
        with pytest.raises(ValidationError):
            hull_member(Distribution([0.5, 0.5]), joint)


class TestRealizableSubsets:
    def test_binary_pair(self):
        assert realizable_subsets(BINARY_PAIR) == (0b01, 0b10, 0b11)

    def test_deterministic_source_limits_offers(self):
        srcs = SourceList.independent([[1.0, 0.0], [0.5, 0.5]])
        assert realizable_subsets(srcs) == (0b01, 0b11)

    def test_joint_support(self):
        joint = SourceList.joint([0.5, 0.5, 0.0, 0.0], alphabet_size=2, num_sources=2)
        # outcomes (0,0) and (0,1) only: offered sets {0} and {0,1}
        assert realizable_subsets(joint) == (0b01, 0b11)
