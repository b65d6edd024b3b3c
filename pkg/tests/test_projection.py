"""Tests for the KL simplex projection and the PAVA cone projection."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nested_conformal.errors import InvalidInputError
from nested_conformal.projection import (
    isotonic_decreasing,
    kl_project_truncated_simplex,
    pava_project_decreasing,
)
from oracles import cone_vertices, grid_projection, kl_bisection, kl_brentq, kl_divergence


@st.composite
def kl_instances(draw):
    n = draw(st.integers(1, 8))
    logs = draw(st.lists(st.floats(-30, 30), min_size=n, max_size=n))
    frac = draw(st.floats(1e-6, 0.999))
    return np.exp(np.array(logs)), frac / n


@st.composite
def cone_instances(draw):
    K = draw(st.integers(1, 8))
    B = draw(st.floats(0.1, 10.0))
    v = np.array(draw(st.lists(st.floats(-0.5 * B, 1.5 * B), min_size=K, max_size=K)))
    return v, B


class TestKLProjection:
    def test_feasible_point_unchanged(self):
        res = kl_project_truncated_simplex(np.full(3, 1 / 3), 0.1)
        np.testing.assert_allclose(res.w, np.full(3, 1 / 3), atol=1e-15)
        assert res.c == pytest.approx(1.0)
        assert res.active_floor == ()

    def test_symmetric_normalization(self):
        res = kl_project_truncated_simplex([2.0, 2.0], 0.1)
        np.testing.assert_allclose(res.w, [0.5, 0.5], atol=1e-15)

    def test_floor_becomes_active(self):
        res = kl_project_truncated_simplex([0.9, 0.1], 0.2)
        np.testing.assert_allclose(res.w, [0.8, 0.2], atol=1e-15)
        assert res.c == pytest.approx(8 / 9, abs=1e-15)
        assert res.active_floor == (1,)
        _, c_oracle = kl_brentq([0.9, 0.1], 0.2)
        assert res.c == pytest.approx(c_oracle, abs=1e-12)

    def test_floor_uses_scaled_weights(self):
        # 0.15 is above the floor before scaling but below it afterwards.
        w_tilde = np.array([5.0, 0.15, 0.15])
        res = kl_project_truncated_simplex(w_tilde, 0.1)
        expected, _ = kl_bisection(w_tilde, 0.1)
        np.testing.assert_allclose(res.w, expected, atol=1e-12)
        assert res.active_floor == (1, 2)

    @pytest.mark.parametrize(
        "w_tilde, mu",
        [([1.0, 0.0], 0.1), ([1.0, -1.0], 0.1), ([1.0, np.nan], 0.1), ([1.0, 1.0], 0.5), ([1.0], 0.0), ([], 0.1)],
    )
    def test_invalid_input(self, w_tilde, mu):
        with pytest.raises(InvalidInputError):
            kl_project_truncated_simplex(w_tilde, mu)

    def test_tiny_entries_floored(self):
        res = kl_project_truncated_simplex([1e-320, 1.0, 1.0], 0.01)
        assert res.w[0] == 0.01
        assert abs(res.w.sum() - 1.0) <= 1e-12

    @given(kl_instances())
    @settings(max_examples=500, deadline=None)
    def test_matches_bisection_oracle(self, inst):
        w_tilde, mu = inst
        res = kl_project_truncated_simplex(w_tilde, mu)
        expected, _ = kl_bisection(w_tilde, mu)
        np.testing.assert_allclose(res.w, expected, atol=1e-8)
        assert abs(res.w.sum() - 1.0) <= 1e-12
        assert res.w.min() >= mu

    @given(kl_instances())
    @settings(max_examples=300, deadline=None)
    def test_fixed_point_structure(self, inst):
        w_tilde, mu = inst
        res = kl_project_truncated_simplex(w_tilde, mu)
        free = np.setdiff1d(np.arange(w_tilde.size), res.active_floor)
        np.testing.assert_allclose(res.w[free], res.c * w_tilde[free], rtol=1e-12)
        np.testing.assert_array_equal(res.w[list(res.active_floor)], mu)
        if free.size:
            c = (1 - len(res.active_floor) * mu) / w_tilde[free].sum()
            assert res.c == pytest.approx(c, rel=1e-12)

    @given(kl_instances(), st.integers(0, 2**32 - 1))
    @settings(max_examples=200, deadline=None)
    def test_kl_no_worse_than_random_feasible(self, inst, seed):
        w_tilde, mu = inst
        w_tilde = np.maximum(w_tilde, 1e-200)
        res = kl_project_truncated_simplex(w_tilde, mu)
        rng = np.random.default_rng(seed)
        n = w_tilde.size
        for _ in range(20):
            other = mu + (1 - n * mu) * rng.dirichlet(np.ones(n))
            assert kl_divergence(res.w, w_tilde) <= kl_divergence(other, w_tilde) + 1e-8

    @given(kl_instances())
    @settings(max_examples=200, deadline=None)
    def test_idempotent(self, inst):
        w_tilde, mu = inst
        once = kl_project_truncated_simplex(w_tilde, mu).w
        twice = kl_project_truncated_simplex(once, mu).w
        np.testing.assert_allclose(twice, once, atol=1e-12)

    @given(kl_instances(), st.floats(1e-3, 1e3))
    @settings(max_examples=200, deadline=None)
    def test_scale_invariant(self, inst, scale):
        w_tilde, mu = inst
        a = kl_project_truncated_simplex(w_tilde, mu).w
        b = kl_project_truncated_simplex(w_tilde * scale, mu).w
        np.testing.assert_allclose(a, b, atol=1e-12)


class TestIsotonic:
    def test_pools_violators(self):
        np.testing.assert_allclose(isotonic_decreasing([1.0, 3.0, 2.0, 0.0]), [2.0, 2.0, 2.0, 0.0])

    def test_already_decreasing(self):
        np.testing.assert_array_equal(isotonic_decreasing([3.0, 2.0, 1.0]), [3.0, 2.0, 1.0])


class TestPAVAProjection:
    def test_feasible_unchanged(self):
        np.testing.assert_array_equal(pava_project_decreasing([0.5, 0.3], 1.0), [0.5, 0.3])

    def test_swapped_pair_pools(self):
        out = pava_project_decreasing([0.3, 0.5], 1.0)
        np.testing.assert_allclose(out, [0.4, 0.4], atol=1e-15)
        assert np.abs(out - grid_projection([0.3, 0.5], 1.0)).max() <= 1e-3

    def test_box_clipping(self):
        out = pava_project_decreasing([1.2, -0.1], 1.0)
        np.testing.assert_array_equal(out, [1.0, 0.0])
        np.testing.assert_allclose(grid_projection([1.2, -0.1], 1.0), [1.0, 0.0], atol=1e-12)

    def test_invalid(self):
        with pytest.raises(InvalidInputError):
            pava_project_decreasing([], 1.0)
        with pytest.raises(InvalidInputError):
            pava_project_decreasing([0.1], 0.0)
        with pytest.raises(InvalidInputError):
            pava_project_decreasing([0.1, 0.2], 1.0, min_gap=-0.1)
        with pytest.raises(InvalidInputError):
            pava_project_decreasing([0.1, 0.2, 0.3], 1.0, min_gap=0.6)

    @given(cone_instances())
    @settings(max_examples=500, deadline=None)
    def test_vertex_optimality_certificate(self, inst):
        # Q is the convex hull of its K+1 vertices, so <v - p, u - p> <= 0 at
        # every vertex u certifies p as the Euclidean projection.
        v, B = inst
        p = pava_project_decreasing(v, B)
        V = cone_vertices(v.size, B)
        assert ((V - p) @ (v - p)).max() <= 1e-12 * max(1.0, B * B)

    @given(cone_instances())
    @settings(max_examples=300, deadline=None)
    def test_feasible_and_idempotent(self, inst):
        v, B = inst
        p = pava_project_decreasing(v, B)
        assert np.all(np.diff(p) <= 0) and p.min() >= 0 and p.max() <= B
        np.testing.assert_allclose(pava_project_decreasing(p, B), p, atol=1e-12)

    @given(cone_instances(), st.integers(0, 2**32 - 1))
    @settings(max_examples=300, deadline=None)
    def test_contraction_toward_feasible_points(self, inst, seed):
        v, B = inst
        rng = np.random.default_rng(seed)
        q = np.sort(rng.uniform(0, B, v.size))[::-1]
        p = pava_project_decreasing(v, B)
        assert np.linalg.norm(p - q) <= np.linalg.norm(v - q) + 1e-12

    @given(cone_instances(), st.floats(0.0, 0.1))
    @settings(max_examples=300, deadline=None)
    def test_min_gap_variant(self, inst, frac):
        v, B = inst
        eps = frac * B / max(v.size, 1)
        p = pava_project_decreasing(v, B, min_gap=eps)
        assert np.all(-np.diff(p) >= eps - 1e-12)
        assert p.min() >= -1e-12 and p.max() <= B + 1e-12
        # Optimal among points satisfying the same constraints, via the vertex
        # certificate of the shifted cone.
        K = v.size
        offset = eps * np.arange(K - 1, -1, -1)
        V = cone_vertices(K, B - eps * (K - 1)) + offset
        assert ((V - p) @ (v - p)).max() <= 1e-10 * max(1.0, B * B)

    def test_min_gap_zero_matches_plain(self):
        v = np.array([0.2, 0.9, 0.4, 1.3])
        np.testing.assert_array_equal(pava_project_decreasing(v, 1.0, 0.0), pava_project_decreasing(v, 1.0))
