import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import measures, ordered_pair, random_measure
from motlab.lp import solve_ot
from motlab.measures import (DiscreteMeasure, EmptySupport, MeasurePair, NonFinite, canonicalize,
                             check_convex_order, mixture, potential, quantize, w1, w_oplus)
from oracles import w1_riemann


def assert_canonical(mu):
    assert np.all(np.diff(mu.atoms) > 0)
    assert np.all(mu.weights > 0)
    assert abs(mu.weights.sum() - 1) <= 1e-12


class TestCanonicalize:
    def test_merges_duplicates(self):
        mu = canonicalize([1, 0, 1], [0.25, 0.5, 0.25])
        assert mu.atoms.tolist() == [0, 1]
        assert mu.weights.tolist() == [0.5, 0.5]

    def test_renormalizes(self):
        mu = canonicalize([3], [2.0])
        assert mu.atoms.tolist() == [3] and mu.weights.tolist() == [1.0]

    def test_drops_zero_weight(self):
        mu = canonicalize([0, 1], [0.5, 0.0])
        assert mu.atoms.tolist() == [0] and mu.weights.tolist() == [1.0]

    def test_merges_within_tolerance(self):
        mu = canonicalize([0.0, 1e-13, 1.0], [1, 1, 2])
        assert len(mu) == 2
        assert mu.weights.tolist() == [0.5, 0.5]

    def test_merge_of_equal_atoms_is_exact(self):
        mu = canonicalize([0.3, 0.1, 0.3, 0.3], [1, 1, 2, 3])
        assert mu.atoms.tolist() == [0.1, 0.3]

    def test_errors(self):
        with pytest.raises(EmptySupport):
            canonicalize([0, 1], [0, 0])
        with pytest.raises(EmptySupport):
            canonicalize([], [])
        with pytest.raises(NonFinite):
            canonicalize([np.nan], [1])
        with pytest.raises(NonFinite):
            canonicalize([0], [np.inf])
        with pytest.raises(ValueError):
            canonicalize([0, 1], [1])
        with pytest.raises(ValueError):
            canonicalize([0, 1], [1, -1])

    def test_immutable(self):
        mu = canonicalize([0, 1], [1, 1])
        with pytest.raises(ValueError):
            mu.atoms[0] = 5

    @given(measures())
    def test_canonical_form(self, mu):
        assert_canonical(mu)

    def test_json_roundtrip_is_lossless(self, rng):
        mu = random_measure(rng)
        back = DiscreteMeasure.from_json(mu.to_json())
        assert back == mu
        assert json.loads(mu.to_json()).keys() == {"atoms", "weights"}


class TestPotential:
    def test_examples(self, u1):
        assert potential(u1, 0) == 1
        assert potential(DiscreteMeasure.uniform([-2, 2]), 0) == 2
        assert potential(DiscreteMeasure.dirac(3), 7.5) == 4.5
        assert potential(DiscreteMeasure.dirac(3), -1) == 4

    def test_vectorised(self, u1):
        np.testing.assert_allclose(potential(u1, [-3, 0, 0.5, 3]), [3, 1, 1, 3])

    @given(measures(), st.lists(st.integers(-60, 60), min_size=3, max_size=3, unique=True))
    def test_convex_and_above_mean_distance(self, mu, pts):
        a, b, c = sorted(np.array(pts) / 8.0)
        ua, ub, uc = potential(mu, [a, b, c])
        assert ub <= ((c - b) * ua + (b - a) * uc) / (c - a) + 1e-12
        for x in (a, b, c):
            assert potential(mu, x) >= abs(x - mu.mean) - 1e-12


class TestConvexOrder:
    def test_examples(self, u1, u2):
        assert check_convex_order(DiscreteMeasure.dirac(0), DiscreteMeasure.dirac(0)).holds
        assert check_convex_order(u1, u2).holds
        v = check_convex_order(u2, u1)
        assert v.status == "fails_at" and v.witness == 0.0
        assert check_convex_order(DiscreteMeasure.dirac(0), DiscreteMeasure.dirac(1)).status == "fails_mean"

    @given(measures())
    def test_reflexive(self, mu):
        assert check_convex_order(mu, mu).holds

    @given(measures(), measures())
    def test_holds_implies_equal_means(self, a, b):
        if check_convex_order(a, b).holds:
            assert abs(a.mean - b.mean) <= 1e-9

    @given(measures(), st.floats(0.0, 1.0))
    def test_dirac_at_mean_is_minimal(self, mu, t):
        shrunk = mixture(mu, DiscreteMeasure.dirac(mu.mean), t)
        assert check_convex_order(DiscreteMeasure.dirac(mu.mean), mu).holds
        assert check_convex_order(shrunk, mu).holds

    def test_dense_check_agrees(self, rng):
        # potentials compared on a fine grid far beyond the supports
        for _ in range(200):
            a, b = random_measure(rng, 6), random_measure(rng, 6)
            b = DiscreteMeasure(b.atoms - b.mean + a.mean, b.weights)
            grid = np.linspace(-10, 10, 4001)
            dense = np.all(potential(a, grid) <= potential(b, grid) + 1e-9)
            assert check_convex_order(a, b).holds == dense


class TestW1:
    def test_examples(self):
        assert w1(DiscreteMeasure.dirac(0), DiscreteMeasure.dirac(1)) == 1
        assert w1(DiscreteMeasure.uniform([0, 1]), DiscreteMeasure.dirac(0.5)) == 0.5

    @given(measures())
    def test_identity(self, mu):
        assert w1(mu, mu) == 0

    @given(measures(), measures())
    def test_symmetric(self, a, b):
        assert w1(a, b) == w1(b, a)

    @given(measures(), measures())
    def test_zero_iff_equal(self, a, b):
        assert (w1(a, b) == 0) == (a == b)

    @settings(max_examples=200)
    @given(measures(), measures(), measures())
    def test_triangle(self, a, b, c):
        assert w1(a, c) <= w1(a, b) + w1(b, c) + 1e-9

    def test_matches_quantile_riemann_sum(self, rng):
        for _ in range(20):
            a, b = random_measure(rng), random_measure(rng)
            assert abs(w1(a, b) - w1_riemann(a, b)) < 1e-3

    def test_matches_transport_lp(self, rng):
        for _ in range(100):
            a, b = random_measure(rng, 20), random_measure(rng, 20)
            v, _ = solve_ot(a, b, np.abs(a.atoms[:, None] - b.atoms[None, :]))
            assert abs(v - w1(a, b)) <= 1e-8

    def test_w_oplus(self, u1, u2):
        d0, d1, d2 = (DiscreteMeasure.dirac(x) for x in (0, 1, 2))
        assert w_oplus(MeasurePair(d0, d0), MeasurePair(d0, d0)) == 0
        assert w_oplus(MeasurePair(d0, d1), MeasurePair(d2, d1)) == 2
        assert w_oplus(MeasurePair(u1, u2), MeasurePair(d0, d0)) == 3


class TestQuantize:
    def test_dirac(self):
        assert quantize(DiscreteMeasure.dirac(2.5), 7) == DiscreteMeasure.dirac(2.5)

    def test_fine_grid(self):
        grid = DiscreteMeasure.uniform(np.arange(1000) / 1000)
        q = quantize(grid, 2)
        np.testing.assert_allclose(q.atoms, [0.2495, 0.7495], atol=1e-12)
        np.testing.assert_allclose(q.weights, [0.5, 0.5])

    def test_four_points(self):
        q = quantize(DiscreteMeasure.uniform([-2, -1, 1, 2]), 2)
        np.testing.assert_allclose(q.atoms, [-1.5, 1.5])

    def test_split_atom(self):
        # blocks [0,1/2], [1/2,1] over weights (0.3, 0.7) at atoms (0, 1)
        q = quantize(DiscreteMeasure([0, 1], [0.3, 0.7]), 2)
        np.testing.assert_allclose(q.atoms, [0.4, 1.0])

    def test_single_block_is_mean(self, rng):
        mu = random_measure(rng)
        assert quantize(mu, 1) == DiscreteMeasure.dirac(mu.mean)

    @given(measures(), st.integers(1, 20))
    def test_mean_and_order(self, mu, n):
        q = quantize(mu, n)
        assert_canonical(q)
        assert abs(q.mean - mu.mean) <= 1e-12 * (1 + np.abs(mu.atoms).max())
        assert check_convex_order(q, mu).holds

    @given(measures())
    def test_dyadic_chain_is_convex_ordered(self, mu):
        qs = [quantize(mu, 2 ** k) for k in range(0, 7)] + [mu]
        for a, b in zip(qs, qs[1:]):
            assert check_convex_order(a, b).holds

    @given(measures(), st.integers(1, 64))
    def test_w1_bounded_by_range_over_n(self, mu, n):
        span = mu.atoms[-1] - mu.atoms[0]
        assert w1(quantize(mu, n), mu) <= span / n + 1e-12

    def test_w1_not_monotone_along_dyadic(self):
        # refinement is convex-ordered but W1 to the parent can still grow
        mu = DiscreteMeasure([0, 0.125, 0.25], [5, 3, 1])
        assert w1(quantize(mu, 4), mu) > w1(quantize(mu, 2), mu)
        assert abs(w1(quantize(mu, 2), mu) - 2 / 81) < 1e-15

    def test_order_preserved(self, rng):
        for _ in range(100):
            pair = ordered_pair(rng)
            assert check_convex_order(pair.mu1, pair.mu2).holds
            for n in (1, 2, 3, 5, 8):
                assert check_convex_order(quantize(pair.mu1, n), quantize(pair.mu2, n)).holds
