"""Box divergence, the distance-to-free-set optimizer, and structural checks."""

import itertools

import numpy as np
import pytest

from boxcast.behaviors import (
    Behavior,
    bipartite_scenario,
    broadcast_scenario,
    pr_box,
    product,
    uniform_box,
)
from boxcast.divergence import (
    ElrConfig,
    box_kl,
    box_kl_sup_oracle,
    broadcast_gap,
    chain_rule_box_sides,
    conditional_box_checks,
    elr_grid_oracle,
    relative_entropy_nl,
    verify_chain_rule_box,
)
from boxcast.errors import ValidationError
from boxcast.polytopes import (
    local_vertices_222,
    lrns_vertices_222,
    ns_vertices_222,
    random_mixture,
    random_ns_box,
)

FAST_CFG = ElrConfig(iters=6000)


def random_pair_correlated_box(rng, k=3):
    table = np.zeros((2,) * 8)
    for w in rng.dirichlet(np.ones(k)):
        table += w * product(random_ns_box(rng), random_ns_box(rng)).table
    return Behavior(broadcast_scenario(), table)


class TestBoxKl:
    def test_identical_boxes(self):
        p = pr_box()
        rep = box_kl(p, p)
        assert rep.value == 0.0

    def test_pr_vs_uniform_is_one_bit_everywhere(self):
        # Per setting: two outcomes at 1/2 against four at 1/4.
        rep = box_kl(pr_box(), uniform_box(bipartite_scenario()))
        np.testing.assert_allclose(rep.per_setting, 1.0, atol=1e-12)
        assert rep.value == 1.0

    def test_support_violation_propagates(self):
        det = ns_vertices_222().behavior(0)
        assert box_kl(pr_box(), det).value == np.inf

    def test_matches_input_distribution_supremum(self):
        rng = np.random.default_rng(0)
        p = random_ns_box(rng)
        q = random_ns_box(rng)
        direct = box_kl(p, q).value
        oracle = box_kl_sup_oracle(p, q, samples=10_000, seed=1)
        assert abs(direct - oracle) <= 1e-9

    def test_zero_iff_equal(self):
        rng = np.random.default_rng(1)
        p = random_ns_box(rng)
        assert box_kl(p, p).value <= 1e-12
        q = Behavior(p.scenario, 0.999 * p.table + 0.001 * 0.25)
        assert box_kl(p, q).value > 0.0


class TestRelativeEntropyNl:
    def test_catalogue_vertex_is_at_distance_zero(self):
        cat = local_vertices_222()
        res = relative_entropy_nl(cat.behavior(7), cat, FAST_CFG)
        assert res.value <= 1e-6

    def test_uniform_box_is_at_distance_zero(self):
        res = relative_entropy_nl(uniform_box(bipartite_scenario()), local_vertices_222(), FAST_CFG)
        assert res.value <= 1e-6

    def test_pr_value_matches_independent_oracle(self):
        res = relative_entropy_nl(pr_box(), local_vertices_222())
        oracle = elr_grid_oracle(pr_box(), local_vertices_222(), samples=20_000, seed=2)
        assert res.value > 0.1
        assert abs(res.value - oracle) <= 1e-3
        # Closed-form optimum: the best local box splits 3/4 of each setting's
        # mass across the two supported outcomes, giving log2(4/3).
        np.testing.assert_allclose(res.value, np.log2(4 / 3), atol=5e-4)

    def test_witness_reconstructs_from_weights(self):
        cat = local_vertices_222()
        res = relative_entropy_nl(pr_box(), cat)
        recon = cat.matrix.T @ res.weights
        np.testing.assert_allclose(recon, res.witness.flat(), atol=1e-7)
        np.testing.assert_allclose(box_kl(pr_box(), res.witness).value, res.value, atol=1e-12)

    def test_certificate_brackets_value(self):
        res = relative_entropy_nl(pr_box(), local_vertices_222())
        assert 0.0 <= res.gap_certificate <= res.value
        assert np.log2(4 / 3) >= res.gap_certificate - 1e-12

    def test_signalling_input_rejected(self):
        t = np.zeros((2, 2, 2, 2))
        for x, y in itertools.product(range(2), range(2)):
            t[x, y, y, 0] = 1.0
        with pytest.raises(ValidationError):
            relative_entropy_nl(Behavior(bipartite_scenario(), t), local_vertices_222())

    def test_ladder_is_reported(self):
        res = relative_entropy_nl(pr_box(), local_vertices_222(), FAST_CFG)
        assert len(res.ladder) == len(FAST_CFG.epsilons)
        assert all("value" in run and "lower_bound" in run for run in res.ladder)


class TestChainRuleBox:
    def test_identical_boxes_both_sides_zero(self):
        rng = np.random.default_rng(2)
        p4 = random_pair_correlated_box(rng)
        lhs, rhs = chain_rule_box_sides(p4, p4, (0, 1, 1, 0))
        assert lhs == 0.0 and abs(rhs) <= 1e-12

    def test_product_boxes_conditional_term_is_pair1_divergence(self):
        rng = np.random.default_rng(3)
        p1, q1 = random_ns_box(rng), random_ns_box(rng)
        shared = random_ns_box(rng)
        p4 = product(shared, p1)
        q4 = product(shared, q1)
        lhs, rhs = chain_rule_box_sides(p4, q4, (1, 0, 1, 1))
        from boxcast.tensor import kl_divergence

        expected = kl_divergence(p1.setting_distribution((0, 1)), q1.setting_distribution((0, 1)))
        np.testing.assert_allclose(lhs, expected, atol=1e-12)
        np.testing.assert_allclose(rhs, expected, atol=1e-12)

    def test_residual_small_on_random_pairs(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            p4 = random_pair_correlated_box(rng)
            q4 = random_pair_correlated_box(rng)
            inputs = tuple(int(rng.integers(2)) for _ in range(4))
            assert verify_chain_rule_box(p4, q4, inputs) <= 1e-10


class TestConditionalStructure:
    def test_pr_product_against_free_mixture(self):
        rng = np.random.default_rng(5)
        q4, _ = random_mixture(lrns_vertices_222(), rng, k=12)
        rep = conditional_box_checks(
            product(pr_box(), pr_box()), q4, local_vertices_222(), lrns_vertices_222()
        )
        assert rep.marginal_nonlocal
        assert rep.nonlocal_conditional_ok
        assert all(hit is not None for hit in rep.nonlocal_conditional_found.values())
        assert rep.all_conditionals_local
        assert rep.conditional_divergence_ok and rep.conditional_divergence_min > 0

    def test_local_pair1_marginal_is_vacuous(self):
        rng = np.random.default_rng(6)
        local_box, _ = random_mixture(local_vertices_222(), rng, k=4)
        p4 = product(pr_box(), local_box)
        q4, _ = random_mixture(lrns_vertices_222(), rng, k=8)
        rep = conditional_box_checks(p4, q4, local_vertices_222(), lrns_vertices_222())
        assert not rep.marginal_nonlocal
        assert rep.nonlocal_conditional_ok  # vacuously
        assert rep.nonlocal_conditional_found == {}

    def test_reference_outside_free_set_rejected(self):
        p4 = product(pr_box(), pr_box())
        with pytest.raises(ValidationError):
            conditional_box_checks(p4, p4, local_vertices_222(), lrns_vertices_222())


class TestBroadcastGap:
    def test_requires_broadcast_relation(self):
        rng = np.random.default_rng(7)
        other = random_ns_box(rng)
        with pytest.raises(ValidationError):
            broadcast_gap(
                product(pr_box(), other), pr_box(), lrns_vertices_222(), local_vertices_222()
            )

    def test_requires_nonlocal_marginal(self):
        rng = np.random.default_rng(8)
        local_box, _ = random_mixture(local_vertices_222(), rng, k=4)
        with pytest.raises(ValidationError):
            broadcast_gap(
                product(local_box, local_box),
                local_box,
                lrns_vertices_222(),
                local_vertices_222(),
            )

    def test_local_broadcast_has_zero_gap(self):
        # Local boxes are broadcastable: both distances vanish.
        rng = np.random.default_rng(9)
        local_box, _ = random_mixture(local_vertices_222(), rng, k=4)
        p4 = product(local_box, local_box)
        elr4 = relative_entropy_nl(p4, lrns_vertices_222(), FAST_CFG)
        elr2 = relative_entropy_nl(local_box, local_vertices_222(), FAST_CFG)
        assert abs(elr4.value - elr2.value) <= 2e-3
        assert elr4.value <= 1e-6 and elr2.value <= 1e-6
