"""Hermitian linear algebra, quantum divergence, channels, and measurements."""

import numpy as np
import pytest

from boxcast.behaviors import is_nonsignalling
from boxcast.errors import DimensionError, ValidationError
from boxcast.quantum import (
    I2,
    PAULI_X,
    PAULI_Z,
    KrausChannel,
    Povm,
    apply_channel,
    dagger,
    eig_hermitian,
    kron,
    measurement_map,
    partial_trace,
    pauli_povm,
    permute_subsystems,
    quantum_behavior,
    quantum_relative_entropy,
    random_cptp,
    random_density,
    random_povm,
    sic_povm_qubit,
    singlet,
    werner_state,
)


class TestEig:
    def test_pauli_z(self):
        vals, vecs = eig_hermitian(PAULI_Z)
        np.testing.assert_allclose(vals, [-1.0, 1.0], atol=1e-12)

    def test_identity(self):
        vals, _ = eig_hermitian(np.eye(3, dtype=complex))
        np.testing.assert_allclose(vals, np.ones(3), atol=1e-12)

    def test_random_reconstruction(self):
        rng = np.random.default_rng(0)
        g = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        h = g + dagger(g)
        vals, vecs = eig_hermitian(h)
        recon = vecs @ np.diag(vals) @ dagger(vecs)
        assert np.max(np.abs(recon - h)) <= 1e-9 * 8
        assert np.max(np.abs(dagger(vecs) @ vecs - np.eye(8))) <= 1e-9

    def test_non_hermitian_rejected(self):
        with pytest.raises(ValidationError):
            eig_hermitian(np.array([[0, 1], [0, 0]], dtype=complex))


class TestQuantumRelativeEntropy:
    def test_identical_states(self):
        rho = random_density(np.random.default_rng(1), 3)
        assert quantum_relative_entropy(rho, rho) <= 1e-12

    def test_pure_vs_maximally_mixed_is_one_bit(self):
        # Analytic: -log2(1/2).
        rho = np.diag([1.0, 0.0]).astype(complex)
        np.testing.assert_allclose(quantum_relative_entropy(rho, I2 / 2), 1.0, atol=1e-12)

    def test_orthogonal_pure_states_infinite(self):
        r0 = np.diag([1.0, 0.0]).astype(complex)
        r1 = np.diag([0.0, 1.0]).astype(complex)
        assert quantum_relative_entropy(r0, r1) == np.inf

    def test_nonnegative_and_zero_iff_equal(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            rho = random_density(rng, 3)
            sigma = random_density(rng, 3)
            val = quantum_relative_entropy(rho, sigma)
            assert val >= 0.0
            assert val > 0.0  # random pairs almost surely differ

    def test_monotone_under_random_channels(self):
        rng = np.random.default_rng(3)
        for i in range(60):
            d = 2 + i % 3
            rho = random_density(rng, d)
            sigma = random_density(rng, d)
            ch = random_cptp(rng, d, d)
            lhs = quantum_relative_entropy(apply_channel(ch, rho), apply_channel(ch, sigma))
            assert lhs <= quantum_relative_entropy(rho, sigma) + 1e-8

    def test_monotone_under_measurement_maps(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            rho = random_density(rng, 3)
            sigma = random_density(rng, 3)
            fmap = measurement_map(random_povm(rng, 3, 4))
            lhs = quantum_relative_entropy(fmap(rho), fmap(sigma))
            assert lhs <= quantum_relative_entropy(rho, sigma) + 1e-8


class TestTensorOps:
    def test_partial_trace_of_product(self):
        rng = np.random.default_rng(5)
        a = random_density(rng, 2)
        b = random_density(rng, 3)
        np.testing.assert_allclose(partial_trace(np.kron(a, b), [2, 3], 1), a, atol=1e-12)
        np.testing.assert_allclose(partial_trace(np.kron(a, b), [2, 3], 0), b, atol=1e-12)

    def test_kron_dims(self):
        assert kron(np.eye(2), np.eye(3)).shape == (6, 6)

    def test_partial_trace_random_matches_loop(self):
        rng = np.random.default_rng(6)
        m = random_density(rng, 6)
        got = partial_trace(m, [2, 3], 1)
        expected = np.zeros((2, 2), dtype=complex)
        t = m.reshape(2, 3, 2, 3)
        for i in range(2):
            for j in range(2):
                expected[i, j] = sum(t[i, k, j, k] for k in range(3))
        np.testing.assert_allclose(got, expected, atol=1e-12)

    def test_permute_subsystems(self):
        rng = np.random.default_rng(7)
        a = random_density(rng, 2)
        b = random_density(rng, 3)
        m = kron(a, b)
        np.testing.assert_allclose(permute_subsystems(m, [2, 3], [1, 0]), kron(b, a), atol=1e-12)


class TestPovms:
    def test_sic_sums_to_identity(self):
        total = sum(sic_povm_qubit().effects)
        np.testing.assert_allclose(total, np.eye(2), atol=1e-12)

    def test_sic_gram_rank_four(self):
        effects = sic_povm_qubit().effects
        gram = np.array(
            [[np.real(np.trace(dagger(a) @ b)) for b in effects] for a in effects]
        )
        assert np.linalg.matrix_rank(gram, tol=1e-9) == 4

    def test_sic_distinguishes_states(self):
        rng = np.random.default_rng(8)
        sic = sic_povm_qubit()
        rho = random_density(rng, 2)
        sigma = random_density(rng, 2)
        assert np.max(np.abs(sic.probabilities(rho) - sic.probabilities(sigma))) > 1e-9

    def test_incomplete_povm_rejected(self):
        with pytest.raises(ValidationError):
            Povm((I2 / 2,))

    def test_measurement_map_trivial_povm(self):
        fmap = measurement_map(Povm((np.eye(3, dtype=complex),)))
        rho = random_density(np.random.default_rng(9), 3)
        np.testing.assert_allclose(fmap(rho), np.array([[1.0]]), atol=1e-12)

    def test_measurement_map_computational_basis(self):
        effects = tuple(np.diag([1.0 if i == j else 0.0 for j in range(3)]).astype(complex) for i in range(3))
        fmap = measurement_map(Povm(effects))
        rho = np.diag([0.5, 0.3, 0.2]).astype(complex)
        np.testing.assert_allclose(fmap(rho), rho, atol=1e-12)

    def test_sic_probabilities_match_born_rule(self):
        rng = np.random.default_rng(10)
        rho = random_density(rng, 2)
        sic = sic_povm_qubit()
        fmap = measurement_map(sic)
        diag = np.real(np.diag(fmap(rho)))
        expected = [np.real(np.trace(e @ rho)) for e in sic.effects]
        np.testing.assert_allclose(diag, expected, atol=1e-12)


class TestChannels:
    def test_identity_channel(self):
        ch = KrausChannel((np.eye(2, dtype=complex),))
        rho = random_density(np.random.default_rng(11), 2)
        np.testing.assert_allclose(apply_channel(ch, rho), rho, atol=1e-12)

    def test_depolarizing_to_maximally_mixed(self):
        ops = tuple(p @ np.eye(2, dtype=complex) / 2 for p in (I2, PAULI_X, 1j * PAULI_X @ PAULI_Z, PAULI_Z))
        ch = KrausChannel(ops)
        rho = random_density(np.random.default_rng(12), 2)
        np.testing.assert_allclose(apply_channel(ch, rho), I2 / 2, atol=1e-12)

    def test_random_channel_preserves_trace(self):
        rng = np.random.default_rng(13)
        for d_in, d_out in [(2, 2), (3, 4), (2, 4)]:
            ch = random_cptp(rng, d_in, d_out)
            rho = random_density(rng, d_in)
            out = apply_channel(ch, rho)
            np.testing.assert_allclose(np.trace(out), 1.0, atol=1e-10)

    def test_non_tp_kraus_rejected(self):
        with pytest.raises(ValidationError):
            KrausChannel((np.eye(2, dtype=complex) * 0.5,))


class TestQuantumBehavior:
    def test_product_state_gives_product_behavior(self):
        rng = np.random.default_rng(14)
        rho = kron(random_density(rng, 2), random_density(rng, 2))
        alice = [pauli_povm((0, 0, 1)), pauli_povm((1, 0, 0))]
        bob = [pauli_povm((0, 1, 0)), pauli_povm((0, 0, 1))]
        b = quantum_behavior(rho, alice, bob)
        pa = b.table.sum(axis=3)[:, 0, :]
        pb = b.table.sum(axis=2)[0]
        recon = np.einsum("xa,yb->xyab", pa, pb)
        np.testing.assert_allclose(b.table, recon, atol=1e-10)

    def test_singlet_chsh_value(self):
        s2 = 1 / np.sqrt(2)
        alice = [pauli_povm((0, 0, 1)), pauli_povm((1, 0, 0))]
        bob = [pauli_povm((-s2, 0, -s2)), pauli_povm((s2, 0, -s2))]
        b = quantum_behavior(singlet(), alice, bob)
        sign = np.array([1.0, -1.0])
        corr = np.einsum("xyab,a,b->xy", b.table, sign, sign)
        chsh = corr[0, 0] + corr[0, 1] + corr[1, 0] - corr[1, 1]
        np.testing.assert_allclose(chsh, 2 * np.sqrt(2), atol=1e-9)
        assert is_nonsignalling(b)[0]

    def test_maximally_mixed_gives_uniform_marginals(self):
        b = quantum_behavior(np.eye(4, dtype=complex) / 4, [pauli_povm((0, 0, 1))], [pauli_povm((1, 0, 0))])
        np.testing.assert_allclose(b.table, 0.25, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            quantum_behavior(np.eye(2, dtype=complex) / 2, [pauli_povm((0, 0, 1))], [pauli_povm((0, 0, 1))])


class TestWerner:
    def test_visibility_range(self):
        with pytest.raises(ValidationError):
            werner_state(1.2)

    def test_werner_is_state(self):
        from boxcast.quantum import check_density

        check_density(werner_state(0.7))
