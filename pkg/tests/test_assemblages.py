"""Assemblages: feasibility models, divergences, wirings, structure checks."""

import itertools

import numpy as np
import pytest

from boxcast.assemblages import (
    Assemblage,
    SteeringUbConfig,
    apply_losr_assemblage,
    assemblage_kl,
    assemblage_kl_grid_oracle,
    broadcast_marginals,
    cq_state,
    cq_state_zw,
    deterministic_strategies,
    flag_povm,
    flagged_state_structure_checks,
    hidden_model_feasibility,
    is_broadcast_assemblage,
    is_unsteerable,
    is_unsteerable_joint,
    is_urns,
    max_norm_diff_assemblage,
    ns_wing_strategies_222,
    piani_inequality_check,
    product_assemblage,
    random_assemblage,
    random_lhs_assemblage,
    random_losr_assemblage_map,
    random_urns_assemblage,
    relative_entropy_steering_ub,
    steering_from_state,
    steering_no_broadcast_demo,
    werner_assemblage,
)
from boxcast.errors import DimensionError, ValidationError
from boxcast.quantum import (
    apply_channel,
    kron,
    pauli_povm,
    quantum_relative_entropy,
    random_density,
    sic_povm_qubit,
    werner_state,
)


class TestAssemblageConstruction:
    def test_product_state_is_unsteerable(self):
        rng = np.random.default_rng(0)
        rho = kron(random_density(rng, 2), random_density(rng, 2))
        asm = steering_from_state(rho, [pauli_povm((0, 0, 1)), pauli_povm((1, 0, 0))])
        res = is_unsteerable(asm)
        assert res.found and res.residual <= 1e-6

    def test_entangled_state_gives_valid_ns_assemblage(self):
        asm = werner_assemblage(1.0)
        # Validation runs in the constructor; spot-check the reduced state.
        np.testing.assert_allclose(asm.reduced_state(), np.eye(2) / 2, atol=1e-12)

    def test_povm_completeness_violation_rejected(self):
        from boxcast.quantum import I2, Povm

        with pytest.raises(ValidationError):
            steering_from_state(werner_state(0.5), [Povm((I2 / 2, I2 / 4))])

    def test_signalling_assemblage_rejected(self):
        from boxcast.quantum import PAULI_Z

        asm = werner_assemblage(0.8)
        el = np.array(asm.elements)
        # Traceless shift on one element: traces still sum to 1 per input but
        # the reduced state now depends on the input.
        el[0, 0] += 0.05 * PAULI_Z
        with pytest.raises(ValidationError):
            Assemblage(el)


class TestHiddenModelFeasibility:
    def test_unsteerable_by_construction(self):
        rng = np.random.default_rng(1)
        asm = random_lhs_assemblage(rng)
        res = is_unsteerable(asm)
        assert res.found
        recon = res.model.reconstruct()
        assert np.max(np.abs(recon - asm.elements)) <= 1e-6

    def test_werner_low_visibility_has_model(self):
        res = is_unsteerable(werner_assemblage(0.3))
        assert res.found and res.residual <= 1e-6

    def test_werner_high_visibility_has_no_model_and_witness(self):
        res = is_unsteerable(werner_assemblage(0.9))
        assert not res.found
        assert res.functional is not None and res.functional.violated

    def test_threshold_against_known_critical_visibility(self):
        # Two projective settings on the singlet direction: the model boundary
        # sits at 1/sqrt(2); the analytic witness value equals the visibility.
        asm = werner_assemblage(0.9)
        ops = np.zeros((2, 2, 2, 2), dtype=complex)
        from boxcast.quantum import PAULI_X, PAULI_Z

        for x, n in enumerate((PAULI_Z, PAULI_X)):
            for a in range(2):
                ops[x, a] = -((-1) ** a) * n / 2
        value = float(np.real(np.einsum("xaij,xaji->", ops, asm.elements)))
        np.testing.assert_allclose(value, 0.9, atol=1e-12)
        grouped = np.einsum("lxa,xaij->lij", deterministic_strategies(2, 2), ops)
        bound = float(np.max(np.linalg.eigvalsh(grouped)))
        np.testing.assert_allclose(bound, 1 / np.sqrt(2), atol=1e-12)

    def test_single_input_always_has_model(self):
        asm = Assemblage(werner_assemblage(0.95).elements[:1])
        assert is_unsteerable(asm).found

    def test_urns_mixture_has_model(self):
        rng = np.random.default_rng(2)
        asm, _, _ = random_urns_assemblage(rng)
        res = is_urns(asm)
        assert res.found and res.residual <= 1e-6

    def test_product_of_unsteerable_is_urns(self):
        low = werner_assemblage(0.3)
        res = is_urns(product_assemblage(low, low))
        assert res.found

    def test_broadcast_of_steerable_has_no_urns_model(self):
        high = werner_assemblage(0.9)
        res = is_urns(product_assemblage(high, high))
        assert not res.found
        assert res.functional is not None and res.functional.violated

    def test_urns_shape_guard(self):
        with pytest.raises(DimensionError):
            is_urns(werner_assemblage(0.5))


class TestCqStates:
    def test_blocks_recover_weighted_elements(self):
        rng = np.random.default_rng(3)
        asm = random_assemblage(rng)
        pi = np.array([0.3, 0.7])
        state = cq_state(asm, pi)
        for x, a in itertools.product(range(2), range(2)):
            np.testing.assert_allclose(
                state.block(x, a), pi[x] * asm.elements[x, a], atol=1e-12
            )
        np.testing.assert_allclose(np.trace(state.matrix), 1.0, atol=1e-12)

    def test_single_input_assemblage(self):
        rng = np.random.default_rng(4)
        asm = Assemblage(random_assemblage(rng).elements[:1])
        state = cq_state(asm, np.array([1.0]))
        for a in range(2):
            np.testing.assert_allclose(state.block(0, a), asm.elements[0, a], atol=1e-12)

    def test_divergence_splits_over_blocks(self):
        rng = np.random.default_rng(5)
        a1, a2 = random_assemblage(rng), random_assemblage(rng)
        pi = np.array([0.4, 0.6])
        full = quantum_relative_entropy(cq_state(a1, pi).matrix, cq_state(a2, pi).matrix)
        _, _, per_input = assemblage_kl(a1, a2)
        np.testing.assert_allclose(full, float(pi @ per_input), atol=1e-9)


class TestAssemblageKl:
    def test_identical(self):
        rng = np.random.default_rng(6)
        asm = random_assemblage(rng)
        val, _, _ = assemblage_kl(asm, asm)
        assert val <= 1e-10

    def test_single_input_equals_block_divergence(self):
        rng = np.random.default_rng(7)
        a1 = Assemblage(random_assemblage(rng).elements[:1])
        a2 = Assemblage(random_assemblage(rng).elements[:1])
        val, _, _ = assemblage_kl(a1, a2)
        direct = quantum_relative_entropy(
            cq_state(a1, np.array([1.0])).matrix, cq_state(a2, np.array([1.0])).matrix
        )
        np.testing.assert_allclose(val, direct, atol=1e-10)

    def test_matches_grid_supremum(self):
        rng = np.random.default_rng(8)
        a1, a2 = random_assemblage(rng), random_assemblage(rng)
        val, _, _ = assemblage_kl(a1, a2)
        oracle = assemblage_kl_grid_oracle(a1, a2, samples=1000, seed=9)
        assert abs(val - oracle) <= 1e-9


class TestBroadcastRelation:
    def test_product_is_broadcast(self):
        asm = werner_assemblage(0.6)
        assert is_broadcast_assemblage(product_assemblage(asm, asm), asm)

    def test_mismatched_product_is_not(self):
        a = werner_assemblage(0.6)
        b = werner_assemblage(0.2)
        assert not is_broadcast_assemblage(product_assemblage(a, b), a)

    def test_perturbed_product_fails(self):
        asm = werner_assemblage(0.6)
        prod = product_assemblage(asm, asm)
        other = product_assemblage(werner_assemblage(0.1), werner_assemblage(0.1))
        el = (1 - 1e-3) * prod.elements + 1e-3 * other.elements
        assert not is_broadcast_assemblage(Assemblage(el), asm)

    def test_marginals_match_direct_sum(self):
        rng = np.random.default_rng(10)
        a, b = random_assemblage(rng), random_assemblage(rng)
        m0, m1, dev = broadcast_marginals(product_assemblage(a, b))
        assert dev <= 1e-10
        assert max_norm_diff_assemblage(m0, a) <= 1e-10
        assert max_norm_diff_assemblage(m1, b) <= 1e-10


class TestSteeringUpperBound:
    def test_unsteerable_input_is_near_zero_with_itself_as_witness(self):
        asm = werner_assemblage(0.3)
        res = relative_entropy_steering_ub(asm)
        assert res.shortcut
        assert res.upper_bound <= 1e-4
        assert max_norm_diff_assemblage(res.witness, asm) <= 1e-5

    def test_steerable_input_gets_positive_bound_and_valid_witness(self):
        res = relative_entropy_steering_ub(werner_assemblage(0.9))
        assert res.upper_bound > 1e-2
        wfeas = is_unsteerable(res.witness)
        assert wfeas.found and wfeas.residual <= 1e-6

    def test_broadcast_witness_is_in_set(self):
        high = werner_assemblage(0.9)
        res = relative_entropy_steering_ub(product_assemblage(high, high))
        wfeas = is_urns(res.witness)
        assert wfeas.found and wfeas.residual <= 1e-6

    def test_deterministic_across_calls(self):
        a = relative_entropy_steering_ub(werner_assemblage(0.85))
        b = relative_entropy_steering_ub(werner_assemblage(0.85))
        assert a.upper_bound == b.upper_bound


class TestAssemblageWirings:
    def test_matches_brute_force(self):
        rng = np.random.default_rng(11)
        m = random_losr_assemblage_map(12, kind="generic")
        asm = random_assemblage(rng)
        out = apply_losr_assemblage(m, asm)
        expected = np.zeros((4, 4, 4, 4), dtype=complex)
        for x0, x1, a0, a1 in itertools.product(range(2), repeat=4):
            acc = np.zeros((4, 4), dtype=complex)
            for l in range(4):
                for c, x, a in itertools.product(range(2), repeat=3):
                    acc += (
                        m.lambda_weights[l]
                        * m.pre[l, x0, x1, c, x]
                        * m.post[a, c, a0, a1]
                        * apply_channel(m.channels[l], asm.elements[x, a])
                    )
            expected[x0 * 2 + x1, a0 * 2 + a1] = acc
        np.testing.assert_allclose(out.elements, expected, atol=1e-12)

    def test_image_of_unsteerable_stays_unsteerable(self):
        rng = np.random.default_rng(13)
        for i in range(5):
            asm = random_lhs_assemblage(rng)
            kind = "pairwise" if i % 2 else "generic"
            m = random_losr_assemblage_map(14 + i, kind=kind)
            img = apply_losr_assemblage(m, asm)
            res = is_urns(img) if kind == "pairwise" else is_unsteerable_joint(img)
            assert res.found, (i, kind, res.residual)

    def test_trivial_wiring_gives_product_extension(self):
        # Inner input from x0, fixed message, a0 echoes a, a1 fixed, channel
        # appends a fixed pure state: the image is asm (x) point assemblage.
        from boxcast.quantum import KrausChannel

        pre = np.zeros((1, 2, 2, 2, 2))
        for x0, x1 in itertools.product(range(2), range(2)):
            pre[0, x0, x1, 0, x0] = 1.0
        post = np.zeros((2, 2, 2, 2))
        for a, c in itertools.product(range(2), range(2)):
            post[a, c, a, 0] = 1.0
        k = np.zeros((4, 2), dtype=complex)
        k[0, 0] = 1.0
        k[2, 1] = 1.0  # B -> B (x) |0><0|
        m_map = __import__("boxcast.assemblages", fromlist=["AssemblageLosrMap"]).AssemblageLosrMap(
            np.array([1.0]), pre, post, (KrausChannel((k,)),)
        )
        asm = werner_assemblage(0.7)
        img = apply_losr_assemblage(m_map, asm)
        for x0, x1, a0 in itertools.product(range(2), repeat=3):
            blk = img.elements[x0 * 2 + x1, a0 * 2 + 0]
            point = np.zeros((2, 2), dtype=complex)
            point[0, 0] = 1.0
            np.testing.assert_allclose(blk, kron(asm.elements[x0, a0], point), atol=1e-12)


class TestPianiInequality:
    def test_identical_states_all_zero(self):
        rng = np.random.default_rng(15)
        rho = random_density(rng, 4)
        lhs, t1, t2, holds = piani_inequality_check(rho, rho, sic_povm_qubit(), (2, 2))
        assert holds
        assert abs(lhs) <= 1e-10 and abs(t1) <= 1e-10 and abs(t2) <= 1e-10

    def test_product_states_decompose(self):
        rng = np.random.default_rng(16)
        rz, rw = random_density(rng, 2), random_density(rng, 2)
        sz, sw = random_density(rng, 2), random_density(rng, 2)
        lhs, t1, t2, holds = piani_inequality_check(
            kron(rz, rw), kron(sz, sw), sic_povm_qubit(), (2, 2)
        )
        assert holds
        # For products the conditional mixture is exactly sigma's W factor.
        np.testing.assert_allclose(t2, quantum_relative_entropy(rw, sw), atol=1e-9)
        np.testing.assert_allclose(lhs, quantum_relative_entropy(rz, sz) + t2, atol=1e-9)

    def test_holds_on_random_instances(self):
        rng = np.random.default_rng(17)
        sic = sic_povm_qubit()
        for _ in range(40):
            lhs, t1, t2, holds = piani_inequality_check(
                random_density(rng, 4), random_density(rng, 4), sic, (2, 2)
            )
            assert holds


class TestFlagStructure:
    def test_checks_pass_on_small_batch(self):
        rep = flagged_state_structure_checks(n_instances=10, seed=18)
        assert rep.reduction_ok
        assert rep.conditionals_ok
        assert rep.convex_ok
        assert rep.injectivity_ok
        assert rep.identical_pair_diff == 0.0

    def test_flag_povm_is_complete(self):
        fz = flag_povm(2, 2, sic_povm_qubit())
        total = sum(fz.effects)
        np.testing.assert_allclose(total, np.eye(8), atol=1e-12)


class TestSteeringBroadcastDemo:
    def test_full_pipeline_on_steerable_fixture(self):
        rep = steering_no_broadcast_demo(werner_assemblage(0.9))
        assert rep.measured_term_positive and rep.measured_term > 1e-3
        assert rep.broadcast_not_below_original
        assert rep.original_functional.violated
        # The split expression lower-bounds the broadcast distance estimate.
        assert rep.lower_expression <= rep.broadcast_ub + 1e-6

    def test_unsteerable_input_rejected(self):
        with pytest.raises(ValidationError):
            steering_no_broadcast_demo(werner_assemblage(0.3))


class TestStrategySets:
    def test_deterministic_count_and_shape(self):
        d = deterministic_strategies(2, 2)
        assert d.shape == (4, 2, 2)
        np.testing.assert_allclose(d.sum(axis=2), 1.0, atol=1e-15)

    def test_ns_wing_strategies(self):
        q = ns_wing_strategies_222()[0]
        assert q.shape == (24, 4, 4)
        np.testing.assert_allclose(q.sum(axis=2), 1.0, atol=1e-12)
