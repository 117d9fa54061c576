"""Dense linear-algebra layer: diagonalizer, rotations, propagator."""
import math

import numpy as np
import pytest

import oracles
from eigenrl import linalg
from eigenrl.errors import BadIndices, DimMismatch, NotHermitian, OutOfRange
from eigenrl.linalg import RotationAngles


SX = np.array([[0.0, 0.5], [0.5, 0.0]], dtype=np.complex128)


def test_require_square_rejects_rectangles():
    with pytest.raises(DimMismatch):
        linalg.require_square(np.zeros((2, 3)))
    assert linalg.require_square(np.zeros((4, 4))) == 4


def test_require_hermitian():
    linalg.require_hermitian(SX)
    with pytest.raises(NotHermitian):
        linalg.require_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_state_overlap_ignores_global_phase():
    a = np.array([1.0, 0.0], dtype=np.complex128)
    assert linalg.state_overlap(a, np.exp(1j * 0.83) * a) == pytest.approx(1.0)
    with pytest.raises(DimMismatch):
        linalg.state_overlap(a, np.zeros(3))


def test_normalize_phase_leading_component_real_positive():
    rng = np.random.default_rng(11)
    for _ in range(50):
        v = oracles.haar_state(rng, 4)
        out = linalg.normalize_phase(v)
        lead = next(c for c in out if abs(c) > 1e-12)
        assert lead.imag == pytest.approx(0.0, abs=1e-12)
        assert lead.real > 0
        # only a phase was applied
        assert abs(np.vdot(out, v)) == pytest.approx(1.0, abs=1e-12)


class TestEigHermitian:
    def test_spin_x_exact(self):
        es = linalg.eig_hermitian(SX)
        np.testing.assert_allclose(es.eigenvalues, [-0.5, 0.5], atol=1e-14)
        s = 1.0 / math.sqrt(2.0)
        np.testing.assert_allclose(es.eigenvectors[:, 0], [s, -s], atol=1e-12)
        np.testing.assert_allclose(es.eigenvectors[:, 1], [s, s], atol=1e-12)

    def test_matches_numpy_on_random_matrices(self):
        """Cross-check eigenvalues/eigenvectors against numpy's eigh."""
        rng = np.random.default_rng(7)
        for dim in (2, 3, 4, 6, 8, 16):
            for _ in range(8):
                h = oracles.random_hermitian(rng, dim)
                es = linalg.eig_hermitian(h)
                ref_vals, ref_vecs = np.linalg.eigh(h)
                np.testing.assert_allclose(es.eigenvalues, ref_vals, atol=1e-10)
                for l in range(dim):
                    # same eigenvector up to global phase
                    assert abs(
                        np.vdot(es.eigenvectors[:, l], ref_vecs[:, l])
                    ) == pytest.approx(1.0, abs=1e-9)

    def test_reconstruction_residual(self):
        rng = np.random.default_rng(13)
        for dim in (2, 4, 8, 32):
            h = oracles.random_hermitian(rng, dim)
            es = linalg.eig_hermitian(h)
            assert np.max(np.abs(es.reconstruct() - h)) < 1e-10

    def test_columns_orthonormal(self):
        rng = np.random.default_rng(5)
        h = oracles.random_hermitian(rng, 12)
        v = linalg.eig_hermitian(h).eigenvectors
        np.testing.assert_allclose(v.conj().T @ v, np.eye(12), atol=1e-11)

    def test_diagonal_input_is_fixed_point(self):
        es = linalg.eig_hermitian(np.diag([3.0, -1.0, 2.0]))
        np.testing.assert_allclose(es.eigenvalues, [-1.0, 2.0, 3.0])
        perm = np.zeros((3, 3))
        perm[1, 0] = perm[2, 1] = perm[0, 2] = 1.0
        np.testing.assert_allclose(es.eigenvectors, perm, atol=1e-14)

    def test_degenerate_spectrum_deterministic(self):
        """Equal eigenvalues get a reproducible tie-broken basis."""
        h = np.eye(3, dtype=np.complex128)
        a = linalg.eig_hermitian(h)
        b = linalg.eig_hermitian(h)
        np.testing.assert_array_equal(a.eigenvectors, b.eigenvectors)
        np.testing.assert_allclose(a.eigenvalues, [1.0, 1.0, 1.0])

    def test_rejects_non_hermitian(self):
        with pytest.raises(NotHermitian):
            linalg.eig_hermitian(np.array([[0.0, 1.0], [2.0, 0.0]]))


class TestPropagator:
    def test_spin_x_half_turn(self):
        """exp(-i pi Sx) maps |0> to -i|1> (frozen series value)."""
        u = linalg.unitary_from_hermitian(SX, math.pi)
        np.testing.assert_allclose(u @ [1.0, 0.0], [0.0, -1.0j], atol=1e-12)

    def test_matches_series_oracle(self):
        rng = np.random.default_rng(23)
        for dim in (2, 3, 5, 8):
            for _ in range(6):
                h = oracles.random_hermitian(rng, dim)
                tau = float(rng.uniform(0.1, 3.0))
                u = linalg.unitary_from_hermitian(h, tau)
                np.testing.assert_allclose(
                    u, oracles.propagator(h, tau), atol=1e-11
                )

    def test_unitarity(self):
        rng = np.random.default_rng(29)
        h = oracles.random_hermitian(rng, 6)
        u = linalg.unitary_from_hermitian(h, 1.7)
        np.testing.assert_allclose(u.conj().T @ u, np.eye(6), atol=1e-12)


class TestTwoLevelRotation:
    def test_pure_x_block(self):
        block = linalg.rotation_block(RotationAngles(math.pi, 0.0, 0.0))
        np.testing.assert_allclose(
            block, [[0.0, -1.0j], [-1.0j, 0.0]], atol=1e-12
        )

    def test_pure_z_block(self):
        block = linalg.rotation_block(RotationAngles(0.0, 0.0, math.pi / 2))
        s = 1.0 / math.sqrt(2.0)
        np.testing.assert_allclose(
            block, [[s - s * 1j, 0.0], [0.0, s + s * 1j]], atol=1e-12
        )

    def test_mixed_frozen_value(self):
        """Frozen output of the series oracle at (0.7, -1.3, 2.1)."""
        block = linalg.rotation_block(RotationAngles(0.7, -1.3, 2.1))
        expected = np.array(
            [
                [0.5520984262 - 0.7519304107j, 0.0460817568 + 0.357301633j],
                [-0.0460817568 + 0.357301633j, 0.5520984262 + 0.7519304107j],
            ]
        )
        np.testing.assert_allclose(block, expected, atol=1e-9)

    def test_block_matches_series_oracle(self):
        rng = np.random.default_rng(31)
        for _ in range(200):
            phi = rng.uniform(-2 * math.pi, 2 * math.pi, 3)
            block = linalg.rotation_block(RotationAngles(*phi))
            ref = oracles.rotation_via_series(0, 1, 2, *phi)
            np.testing.assert_allclose(block, ref, atol=1e-12)

    def test_embedding_matches_series_oracle(self):
        rng = np.random.default_rng(37)
        for _ in range(60):
            dim = int(rng.integers(2, 9))
            a = int(rng.integers(0, dim - 1))
            b = int(rng.integers(a + 1, dim))
            phi = rng.uniform(-math.pi, math.pi, 3)
            angles = RotationAngles(phi_x=phi[0], phi_y=phi[1], phi_z=phi[2])
            u = linalg.two_level_rotation(a, b, dim, angles)
            ref = oracles.rotation_via_series(a, b, dim, *phi)
            np.testing.assert_allclose(u, ref, atol=1e-12)
            # identity outside the subspace
            mask = np.ones(dim, dtype=bool)
            mask[[a, b]] = False
            np.testing.assert_array_equal(u[np.ix_(mask, mask)], np.eye(dim - 2))

    def test_unitary(self):
        rng = np.random.default_rng(41)
        for _ in range(50):
            phi = rng.uniform(-6 * math.pi, 6 * math.pi, 3)
            block = linalg.rotation_block(RotationAngles(*phi))
            np.testing.assert_allclose(
                block.conj().T @ block, np.eye(2), atol=1e-13
            )

    def test_zero_angles_identity(self):
        block = linalg.rotation_block(RotationAngles(0.0, 0.0, 0.0))
        np.testing.assert_array_equal(block, np.eye(2))

    def test_bad_indices(self):
        angles = RotationAngles(0.1, 0.2, 0.3)
        for a, b, dim in ((1, 1, 3), (2, 1, 3), (0, 3, 3), (-1, 1, 3)):
            with pytest.raises(BadIndices):
                linalg.two_level_rotation(a, b, dim, angles)


def test_apply_unitary_shape_check():
    u = np.eye(3, dtype=np.complex128)
    with pytest.raises(DimMismatch):
        linalg.apply_unitary(u, np.zeros(2, dtype=np.complex128))


def test_gram_schmidt_restores_unitarity():
    rng = np.random.default_rng(43)
    h = oracles.random_hermitian(rng, 6)
    u = linalg.unitary_from_hermitian(h, 0.9)
    drifted = u + 1e-9 * (
        rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    )
    linalg.gram_schmidt(drifted)
    np.testing.assert_allclose(drifted.conj().T @ drifted, np.eye(6), atol=1e-14)
    # the repaired matrix stays close to the original
    assert np.max(np.abs(drifted - u)) < 1e-8


def test_binary_index_label():
    assert linalg.binary_index_label(2, 2) == "10"
    assert linalg.binary_index_label(0, 3) == "000"
    assert linalg.binary_index_label(5, 3) == "101"
    with pytest.raises(OutOfRange):
        linalg.binary_index_label(4, 2)
    with pytest.raises(OutOfRange):
        linalg.binary_index_label(0, 0)
