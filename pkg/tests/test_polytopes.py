"""Vertex catalogues and membership LPs with their certificates."""

import numpy as np
import pytest

from boxcast.behaviors import (
    Scenario,
    bipartite_scenario,
    broadcast_scenario,
    is_nonsignalling,
    pr_box,
    uniform_box,
)
from boxcast.errors import CapacityError, DimensionError
from boxcast.polytopes import (
    is_local_across_wings,
    local_deterministic_vertices,
    local_vertices_222,
    lrns_vertices,
    lrns_vertices_222,
    membership,
    ns_vertices_222,
    random_mixture,
    random_ns_box,
)


class TestCatalogueCounts:
    def test_222_scenario_has_16_vertices(self):
        # 4 deterministic strategies per party, 4 x 4 products.
        assert len(local_vertices_222()) == 16

    def test_trivial_scenario_has_4_vertices(self):
        sc = Scenario(((1, 2), (1, 2)), ((0,), (1,)))
        assert len(local_deterministic_vertices(sc)) == 4

    def test_broadcast_scenario_count(self):
        # (2^2 outputs)^(2^2 joint inputs) strategies per wing, squared.
        assert len(local_deterministic_vertices(broadcast_scenario())) == 65536

    def test_capacity_cap(self):
        sc = Scenario(((4, 4), (4, 4), (4, 4), (4, 4)), ((0, 1), (2, 3)))
        with pytest.raises(CapacityError):
            local_deterministic_vertices(sc)

    def test_ns_catalogue(self):
        cat = ns_vertices_222()
        assert len(cat) == 24
        for i in range(24):
            ok, _ = is_nonsignalling(cat.behavior(i))
            assert ok
        # The first nonlocal member is the standard extremal box.
        assert np.max(np.abs(cat.tables[16] - pr_box().table)) == 0.0

    def test_nonlocal_vertices_fail_local_membership(self):
        cat = ns_vertices_222()
        local = local_vertices_222()
        for i in range(16, 24):
            assert not membership(cat.behavior(i), local).inside

    def test_product_catalogue(self):
        cat = lrns_vertices_222()
        assert len(cat) == 24 * 24
        # Every product vertex is non-signalling across the wings.
        rng = np.random.default_rng(0)
        for i in rng.integers(0, 576, size=20):
            ok, _ = is_nonsignalling(cat.behavior(int(i)))
            assert ok

    def test_local_products_are_quadripartite_local(self):
        cat = lrns_vertices_222()
        # Products of two local-deterministic wing vertices: indices i*24+j, i,j<16.
        for i, j in [(0, 0), (3, 11), (15, 15)]:
            assert is_local_across_wings(cat.behavior(i * 24 + j))[0]


class TestMembership:
    def test_uniform_box_inside_every_kind(self):
        for cat in (local_vertices_222(), ns_vertices_222(), lrns_vertices_222()):
            u = uniform_box(cat.scenario)
            res = membership(u, cat)
            assert res.inside and res.residual <= 1e-7

    def test_pr_outside_local_with_chsh_like_functional(self):
        res = membership(pr_box(), local_vertices_222())
        assert not res.inside
        assert res.margin > 0
        # Affine normalization: against the uniform-box baseline, the query
        # scores twice the vertex bound (the familiar 4-vs-2 separation).
        u = uniform_box(bipartite_scenario()).flat()
        base = float(u @ res.functional)
        query = float(pr_box().flat() @ res.functional)
        ratio = (query - base) / (res.threshold - base)
        np.testing.assert_allclose(ratio, 2.0, atol=1e-9)
        np.testing.assert_allclose(query - base, 4.0, atol=1e-9)
        np.testing.assert_allclose(res.threshold - base, 2.0, atol=1e-9)

    def test_functional_bounds_all_vertices(self):
        res = membership(pr_box(), local_vertices_222())
        scores = local_vertices_222().matrix @ res.functional
        assert np.max(scores) <= res.threshold + 1e-9

    def test_known_mixture_recovered(self):
        rng = np.random.default_rng(5)
        cat = local_vertices_222()
        b, w = random_mixture(cat, rng, k=5)
        res = membership(b, cat)
        assert res.inside
        recon = cat.matrix.T @ res.weights
        np.testing.assert_allclose(recon, b.flat(), atol=1e-7)

    def test_scenario_mismatch(self):
        with pytest.raises(DimensionError):
            membership(pr_box(), lrns_vertices_222())

    def test_completeness_on_random_mixtures(self):
        rng = np.random.default_rng(6)
        cat = lrns_vertices_222()
        for _ in range(25):
            b, _ = random_mixture(cat, rng, k=int(rng.integers(2, 30)))
            assert membership(b, cat).inside

    def test_separation_margin_positive_for_clear_outsiders(self):
        cat = local_vertices_222()
        for i in range(16, 24):
            res = membership(ns_vertices_222().behavior(i), cat)
            assert not res.inside
            assert res.margin >= 1e-7 / 2


class TestReducedLocalityLp:
    def test_agrees_with_vertex_membership_on_bipartite(self):
        rng = np.random.default_rng(7)
        cat = local_vertices_222()
        for _ in range(10):
            b = random_ns_box(rng)
            assert is_local_across_wings(b)[0] == membership(b, cat).inside

    def test_pr_product_is_not_local_across_wings(self):
        from boxcast.behaviors import product

        b4 = product(pr_box(), pr_box())
        ok, residual = is_local_across_wings(b4)
        assert not ok and residual > 1e-3
