"""
Unit tests for the composite Hilbert space and its operators.
"""

import unittest

import numpy as np

from rqg.domain.hilbert import (
    CompositeSpace,
    DensityMatrix,
    Operator,
    StateVector,
    adjoint,
    annihilation,
    basis_state,
    creation,
    expectation,
    identity,
    matmul,
    number,
    partial_trace,
    qutrit_projector,
    qutrit_transition,
    tensor,
)
from rqg.domain.models import QutritLevel
from rqg.infra.exceptions import RQGPhysicsError, RQGRangeError


def random_density_matrix(rng, dim: int, rank: int) -> np.ndarray:
    vectors = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = vectors @ vectors.conj().T
    return rho / np.trace(rho).real


class TestCompositeSpace(unittest.TestCase):
    """Test cases for indexing and layout."""

    def test_dimensions(self):
        space = CompositeSpace((3, 3, 3))
        self.assertEqual(space.dims, (3, 4, 4, 4))
        self.assertEqual(space.dimension, 192)
        self.assertEqual(space.subsystem_names, ("q", "r1", "r2", "r3"))

    def test_index_bijection(self):
        space = CompositeSpace((2, 3))
        seen = set()
        for k in range(space.dimension):
            level, photons = space.labels(k)
            self.assertEqual(space.index(level, photons), k)
            seen.add((level, photons))
        self.assertEqual(len(seen), space.dimension)

    def test_qutrit_is_most_significant(self):
        space = CompositeSpace((2,))
        self.assertEqual(space.index(QutritLevel.G, (0,)), 0)
        self.assertEqual(space.index(QutritLevel.G, (2,)), 2)
        self.assertEqual(space.index(QutritLevel.E, (0,)), 3)
        self.assertEqual(space.label(space.index(QutritLevel.F, (1,))), "f,1")

    def test_cutoff_violation(self):
        space = CompositeSpace((2,))
        with self.assertRaises(RQGRangeError):
            basis_state(space, QutritLevel.G, (3,))
        with self.assertRaises(RQGRangeError):
            basis_state(space, QutritLevel.G, (1, 0))

    def test_basis_state(self):
        space = CompositeSpace((2,))
        state = basis_state(space, QutritLevel.F, (1,))
        self.assertEqual(state.amplitudes[space.index(QutritLevel.F, (1,))], 1.0)
        self.assertAlmostEqual(state.norm, 1.0)

    def test_computational_indices_order(self):
        space = CompositeSpace((3, 3))
        indices = space.computational_indices()
        self.assertEqual([space.labels(i)[1] for i in indices], [(0, 0), (0, 1), (1, 0), (1, 1)])

    def test_rejects_bad_cutoff(self):
        with self.assertRaises(RQGRangeError):
            CompositeSpace((0,))


class TestStates(unittest.TestCase):

    def test_state_must_be_normalized(self):
        space = CompositeSpace((1,))
        with self.assertRaises(RQGRangeError):
            StateVector(np.ones(space.dimension), space)
        state = StateVector.normalized(space, np.ones(space.dimension))
        self.assertAlmostEqual(state.norm, 1.0, places=12)

    def test_dimension_mismatch(self):
        with self.assertRaises(RQGRangeError):
            StateVector(np.array([1.0, 0.0]), CompositeSpace((1,)))

    def test_density_matrix_validation(self):
        space = CompositeSpace((1,))
        with self.assertRaises(RQGRangeError):
            DensityMatrix(2.0 * np.eye(6) / 6, space)
        with self.assertRaises(RQGRangeError):
            DensityMatrix(np.diag([1.5, -0.5, 0, 0, 0, 0]), space)
        self.assertTrue(basis_state(space, QutritLevel.E, (1,)).to_density_matrix().is_pure())


class TestOperators(unittest.TestCase):
    """Test cases for ladder, qutrit and composite operators."""

    def setUp(self):
        self.space = CompositeSpace((3, 2))

    def test_number_operator(self):
        n1 = number(self.space, 1)
        for n in range(4):
            state = basis_state(self.space, QutritLevel.G, (n, 1))
            self.assertAlmostEqual(expectation(n1, state).real, n)

    def test_creation_annihilation(self):
        a = annihilation(self.space, 1)
        state = basis_state(self.space, QutritLevel.E, (2, 0))
        lowered = matmul(a, state)
        target = self.space.index(QutritLevel.E, (1, 0))
        self.assertAlmostEqual(lowered.amplitudes[target], np.sqrt(2))
        np.testing.assert_allclose(creation(self.space, 1).matrix, a.matrix.conj().T)

    def test_commutator_below_cutoff(self):
        a = annihilation(self.space, 2)
        commutator = a.commutator(adjoint(a)).matrix
        photons = self.space.photon_numbers()[:, 1]
        keep = photons < self.space.resonator_cutoffs[1]
        np.testing.assert_allclose(commutator[np.ix_(keep, keep)], np.eye(int(keep.sum())), atol=1e-12)

    def test_resonator_index_out_of_range(self):
        with self.assertRaises(RQGRangeError):
            annihilation(self.space, 3)
        with self.assertRaises(RQGRangeError):
            number(self.space, 0)

    def test_qutrit_transition(self):
        raise_ef = qutrit_transition(self.space, QutritLevel.E, QutritLevel.F)
        state = matmul(raise_ef, basis_state(self.space, QutritLevel.E, (1, 1)))
        self.assertEqual(state.amplitudes[self.space.index(QutritLevel.F, (1, 1))], 1.0)
        with self.assertRaises(RQGPhysicsError):
            qutrit_transition(self.space, QutritLevel.G, QutritLevel.F)

    def test_projectors_resolve_identity(self):
        total = sum((qutrit_projector(self.space, level) for level in QutritLevel),
                    Operator(np.zeros((self.space.dimension,) * 2), self.space, hermitian_hint=True))
        np.testing.assert_allclose(total.matrix, identity(self.space).matrix)

    def test_hermitian_hint_is_checked(self):
        with self.assertRaises(RQGRangeError):
            Operator(annihilation(self.space, 1).matrix, self.space, hermitian_hint=True)

    def test_expectation_is_real_for_hermitian(self):
        rng = np.random.default_rng(7)
        vec = rng.normal(size=self.space.dimension) + 1j * rng.normal(size=self.space.dimension)
        state = StateVector.normalized(self.space, vec)
        value = expectation(number(self.space, 1), state)
        self.assertEqual(value.imag, 0.0)
        self.assertGreaterEqual(value.real, 0.0)

    def test_tensor_of_states(self):
        left = CompositeSpace((1,))
        right = CompositeSpace((1,), has_qutrit=False, resonator_labels=("r2",))
        a = basis_state(left, QutritLevel.E, (1,))
        b = StateVector(np.array([0.0, 1.0]), right)
        joined = tensor(a, b)
        self.assertEqual(joined.space.dims, (3, 2, 2))
        self.assertEqual(joined.amplitudes[joined.space.index(QutritLevel.E, (1, 1))], 1.0)

    def test_dimension_mismatch(self):
        with self.assertRaises(RQGRangeError):
            number(self.space, 1) + number(CompositeSpace((3,)), 1)


class TestPartialTrace(unittest.TestCase):
    """Test cases for reduced density matrices."""

    def test_product_state_factorizes(self):
        q = np.array([0.6, 0.8j, 0.0])
        r1 = np.array([1.0, 1.0, 0.0]) / np.sqrt(2)
        r2 = np.array([0.0, 1.0])
        space = CompositeSpace((2, 1))
        state = StateVector(np.kron(np.kron(q, r1), r2), space)
        reduced = partial_trace(state.to_density_matrix(), ["r1"])
        np.testing.assert_allclose(reduced.matrix, np.outer(r1, r1.conj()), atol=1e-12)
        self.assertEqual(reduced.space.dims, (3,))
        qutrit = partial_trace(state.to_density_matrix(), ["q"])
        np.testing.assert_allclose(qutrit.matrix, np.outer(q, q.conj()), atol=1e-12)

    def test_matches_einsum_oracle(self):
        rng = np.random.default_rng(11)
        space = CompositeSpace((1, 2))
        rho = DensityMatrix(random_density_matrix(rng, space.dimension, 3), space)
        reduced = partial_trace(rho, ["q", "r2"])
        tensor_form = rho.matrix.reshape(3, 2, 3, 3, 2, 3)
        oracle = np.einsum("abcdbf->acdf", tensor_form).reshape(9, 9)
        np.testing.assert_allclose(reduced.matrix, oracle, atol=1e-12)
        self.assertAlmostEqual(reduced.trace, 1.0, places=12)

    def test_random_instances_match_trace_oracle(self):
        rng = np.random.default_rng(2024)
        spaces = [CompositeSpace((1,), has_qutrit=False), CompositeSpace((1, 1), has_qutrit=False),
                  CompositeSpace((1,)), CompositeSpace((1, 1, 1), has_qutrit=False)]
        for trial in range(200):
            space = spaces[trial % len(spaces)]
            dims = space.dims
            rank = int(rng.integers(1, space.dimension + 1))
            rho = DensityMatrix(random_density_matrix(rng, space.dimension, rank), space)
            keep = sorted(int(p) for p in rng.choice(len(dims), size=int(rng.integers(1, len(dims) + 1)),
                                                     replace=False))
            rows = "abcd"[:len(dims)]
            cols = "".join(rows[p] if p not in keep else "wxyz"[p] for p in range(len(dims)))
            kept_letters = "".join(rows[p] for p in keep) + "".join(cols[p] for p in keep)
            oracle = np.einsum(f"{rows}{cols}->{kept_letters}", rho.matrix.reshape(dims + dims))
            kept = int(np.prod([dims[p] for p in keep]))
            reduced = partial_trace(rho, keep)
            np.testing.assert_allclose(reduced.matrix, oracle.reshape(kept, kept), atol=1e-12)
            self.assertAlmostEqual(reduced.trace, 1.0, places=12)

    def test_maximally_entangled_pair_reduces_to_half_identity(self):
        space = CompositeSpace((1, 1), has_qutrit=False)
        state = StateVector(np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2), space)
        for keep in ([0], [1]):
            reduced = partial_trace(state.to_density_matrix(), keep)
            np.testing.assert_allclose(reduced.matrix, np.eye(2) / 2, atol=1e-12)

    def test_keep_everything_is_identity(self):
        rng = np.random.default_rng(3)
        space = CompositeSpace((1,))
        rho = DensityMatrix(random_density_matrix(rng, space.dimension, 2), space)
        np.testing.assert_allclose(partial_trace(rho, [0, 1]).matrix, rho.matrix)

    def test_unknown_subsystem(self):
        space = CompositeSpace((1,))
        rho = basis_state(space, QutritLevel.G, (0,)).to_density_matrix()
        with self.assertRaises(RQGRangeError):
            partial_trace(rho, ["r5"])


if __name__ == '__main__':
    unittest.main()
