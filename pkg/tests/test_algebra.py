import numpy as np
import pytest

from meshgauge.algebra import (
    FourierKernel,
    LayerWeights,
    ReprType,
    apply_rep,
    assemble_kernels,
    assemble_neigh_kernel,
    assemble_self_kernel,
    basis_neigh,
    basis_self,
    init_layer_weights,
    irrep,
    kernel_span_residual,
    neigh_pair_count,
    numeric_kernel_basis,
    param_count,
    rep,
    self_pair_count,
)
from meshgauge.errors import DegenerateGeometryError, UsageError


class TestIrrep:
    def test_order_zero_is_trivial(self):
        for g in (0.0, 1.3, -2.0):
            assert np.array_equal(irrep(0, g), [[1.0]])

    def test_order_one_quarter_turn(self):
        got = irrep(1, np.pi / 2)
        assert np.allclose(got, [[0.0, -1.0], [1.0, 0.0]], atol=1e-15)

    def test_order_two_doubles_angle(self):
        got = irrep(2, np.pi / 2)
        assert np.allclose(got, [[-1.0, 0.0], [0.0, -1.0]], atol=1e-15)

    def test_negative_order_rejected(self):
        with pytest.raises(UsageError):
            irrep(-1, 0.0)


class TestRep:
    def test_dim(self):
        assert ReprType([0, 1, 1]).dim == 5
        assert ReprType([0]).dim == 1
        assert ReprType([3, 2]).dim == 4

    def test_block_diagonal_layout(self):
        t = ReprType([0, 1, 1])
        g = 0.7
        R = rep(t, g)
        assert R.shape == (5, 5)
        assert R[0, 0] == 1.0
        assert np.allclose(R[1:3, 1:3], irrep(1, g))
        assert np.allclose(R[3:5, 3:5], irrep(1, g))
        mask = np.ones((5, 5), dtype=bool)
        mask[0, 0] = False
        mask[1:3, 1:3] = False
        mask[3:5, 3:5] = False
        assert np.all(R[mask] == 0.0)

    def test_homomorphism_and_inverse(self):
        rng = np.random.default_rng(1)
        t = ReprType([0, 1, 2, 3])
        for _ in range(20):
            a, b = rng.uniform(-np.pi, np.pi, 2)
            assert np.allclose(rep(t, a) @ rep(t, b), rep(t, a + b), atol=1e-12)
            assert np.allclose(rep(t, -a), rep(t, a).T, atol=1e-15)

    def test_apply_rep_matches_matrix(self):
        rng = np.random.default_rng(2)
        t = ReprType([0, 2, 1])
        vals = rng.normal(size=(7, t.dim))
        angles = rng.uniform(0, 2 * np.pi, size=7)
        got = apply_rep(t, angles, vals)
        want = np.stack([rep(t, a) @ v for a, v in zip(angles, vals)])
        assert np.allclose(got, want, atol=1e-14)

    def test_negative_irrep_rejected(self):
        with pytest.raises(UsageError):
            ReprType([0, -1])


class TestBasisTables:
    def test_counts(self):
        for n in range(5):
            for m in range(5):
                assert len(basis_neigh(n, m)) == neigh_pair_count(n, m)
                assert len(basis_self(n, m)) == self_pair_count(n, m)

    def test_scalar_to_scalar_is_constant_one(self):
        (fn,) = basis_neigh(0, 0)
        assert np.allclose(fn(0.0), [[1.0]])
        assert np.allclose(fn(1.234), [[1.0]])

    def test_pair_to_scalar_frozen_at_zero(self):
        rows = [fn(0.0) for fn in basis_neigh(1, 0)]
        assert np.allclose(rows[0], [[1.0, 0.0]], atol=1e-15)
        assert np.allclose(rows[1], [[0.0, -1.0]], atol=1e-15)

    def test_scalar_to_pair_frozen_at_zero(self):
        cols = [fn(0.0) for fn in basis_neigh(0, 1)]
        assert np.allclose(cols[0], [[1.0], [0.0]], atol=1e-15)
        assert np.allclose(cols[1], [[0.0], [-1.0]], atol=1e-15)

    def test_pair_to_pair_frozen_at_zero(self):
        mats = [fn(0.0) for fn in basis_neigh(1, 1)]
        assert np.allclose(mats[0], np.eye(2), atol=1e-15)
        assert np.allclose(mats[1], [[0.0, 1.0], [-1.0, 0.0]], atol=1e-15)
        assert np.allclose(mats[2], [[1.0, 0.0], [0.0, -1.0]], atol=1e-15)
        assert np.allclose(mats[3], [[0.0, 1.0], [1.0, 0.0]], atol=1e-15)

    def test_self_table(self):
        (one,) = basis_self(0, 0)
        assert np.array_equal(one, [[1.0]])
        eye, spin = basis_self(2, 2)
        assert np.array_equal(eye, np.eye(2))
        assert np.array_equal(spin, [[0.0, 1.0], [-1.0, 0.0]])
        assert basis_self(1, 2) == []
        assert basis_self(0, 3) == []

    def test_vectorized_evaluation_matches_scalar(self):
        thetas = np.linspace(0, 2 * np.pi, 9)
        for n, m in [(0, 0), (2, 0), (0, 3), (1, 2), (3, 1)]:
            for fn in basis_neigh(n, m):
                batch = fn(thetas)
                for k, t in enumerate(thetas):
                    assert np.allclose(batch[k], fn(float(t)), atol=1e-15)


class TestKernelConstraints:
    def test_neighbor_basis_satisfies_constraint(self):
        rng = np.random.default_rng(11)
        for n in range(5):
            for m in range(5):
                for fn in basis_neigh(n, m):
                    for _ in range(100):
                        t, g = rng.uniform(0.0, 2.0 * np.pi, 2)
                        lhs = fn(t - g)
                        rhs = irrep(m, -g) @ fn(t) @ irrep(n, g)
                        assert np.max(np.abs(lhs - rhs)) < 1e-10

    def test_self_basis_satisfies_constraint(self):
        rng = np.random.default_rng(12)
        for n in range(5):
            for m in range(5):
                for mat in basis_self(n, m):
                    for _ in range(100):
                        g = rng.uniform(0.0, 2.0 * np.pi)
                        rhs = irrep(m, -g) @ mat @ irrep(n, g)
                        assert np.max(np.abs(mat - rhs)) < 1e-10

    def test_basis_elements_linearly_independent(self):
        for n, m in [(1, 1), (2, 3), (0, 2), (4, 4)]:
            fns = basis_neigh(n, m)
            L = max(f.cos_coeffs.shape[0] - 1 for f in fns)
            coeffs = np.stack([f.coefficient_vector(L) for f in fns])
            assert np.linalg.matrix_rank(coeffs) == len(fns)


class TestNumericKernelBasis:
    def test_matches_analytic_dimension_and_span(self):
        for n in range(5):
            for m in range(5):
                analytic = basis_neigh(n, m)
                numeric = numeric_kernel_basis(n, m, samples=64, seed=3)
                assert len(numeric) == len(analytic)
                assert kernel_span_residual(analytic, numeric) < 1e-8

    def test_rank_deficient_sampling_raises(self):
        with pytest.raises(DegenerateGeometryError, match="samples"):
            numeric_kernel_basis(3, 3, samples=8, seed=0)

    def test_too_few_samples_rejected_outright(self):
        with pytest.raises(UsageError):
            numeric_kernel_basis(1, 1, samples=4)

    def test_deterministic_given_seed(self):
        a = numeric_kernel_basis(1, 2, samples=32, seed=9)
        b = numeric_kernel_basis(1, 2, samples=32, seed=9)
        for fa, fb in zip(a, b):
            assert np.array_equal(fa.cos_coeffs, fb.cos_coeffs)
            assert np.array_equal(fa.sin_coeffs, fb.sin_coeffs)


class TestParamCount:
    def test_worked_example(self):
        assert param_count(ReprType([0, 1, 1]), ReprType([1, 3])) == (4, 20)

    def test_scalar_case(self):
        assert param_count(ReprType([0]), ReprType([0])) == (1, 1)

    def test_pure_pair_case(self):
        assert param_count(ReprType([1]), ReprType([2])) == (0, 4)

    def test_mixed_case(self):
        assert param_count(ReprType([0, 1]), ReprType([0, 1])) == (3, 9)

    def test_totals_match_basis_lengths(self):
        t_in, t_out = ReprType([0, 1, 2]), ReprType([2, 0, 1])
        n_self, n_neigh = param_count(t_in, t_out)
        s = sum(len(basis_self(n, m)) for m in t_out for n in t_in)
        v = sum(len(basis_neigh(n, m)) for m in t_out for n in t_in)
        assert (n_self, n_neigh) == (s, v)


class TestAssembleKernels:
    def test_zero_weights_give_zero_kernels(self):
        t_in, t_out = ReprType([0, 1]), ReprType([1, 1])
        n_self, n_neigh = param_count(t_in, t_out)
        w = LayerWeights(t_in, t_out, np.zeros(n_self), np.zeros(n_neigh))
        ks, kn = assemble_kernels(w, 0.7)
        assert np.all(ks == 0.0)
        assert np.all(kn == 0.0)

    def test_scalar_weight_passthrough(self):
        t = ReprType([0])
        w = LayerWeights(t, t, np.array([3.0]), np.array([2.0]))
        ks, kn = assemble_kernels(w, 1.1)
        assert np.allclose(ks, [[3.0]])
        assert np.allclose(kn, [[2.0]])

    def test_self_kernel_block_structure(self):
        # types [0,1,1] -> [1,3]: only the (out rho1, in rho1) blocks may be nonzero
        t_in, t_out = ReprType([0, 1, 1]), ReprType([1, 3])
        w = init_layer_weights(t_in, t_out, seed=5)
        ks = assemble_self_kernel(w)
        assert ks.shape == (4, 5)
        assert np.all(ks[:, 0] == 0.0)       # scalar input column
        assert np.all(ks[2:4, :] == 0.0)     # order-3 output rows
        assert np.any(ks[0:2, 1:3] != 0.0)
        assert np.any(ks[0:2, 3:5] != 0.0)

    def test_weight_ordering_is_lexicographic(self):
        # weight index k addresses (out block 0, in block 0, basis 0) first
        t_in, t_out = ReprType([0, 1]), ReprType([0, 1])
        n_self, n_neigh = param_count(t_in, t_out)
        wn = np.zeros(n_neigh)
        wn[0] = 1.0  # (out 0, in 0): the constant scalar-to-scalar kernel
        w = LayerWeights(t_in, t_out, np.zeros(n_self), wn)
        kn = assemble_neigh_kernel(w, 0.3)
        expected = np.zeros((3, 3))
        expected[0, 0] = 1.0
        assert np.allclose(kn, expected)
        wn = np.zeros(n_neigh)
        wn[1] = 1.0  # (out 0, in 1): first pair-to-scalar element [cos, sin]
        w = LayerWeights(t_in, t_out, np.zeros(n_self), wn)
        kn = assemble_neigh_kernel(w, 0.3)
        assert np.allclose(kn[0, 1:], [np.cos(0.3), np.sin(0.3)], atol=1e-15)

    def test_vectorized_theta(self):
        t_in, t_out = ReprType([0, 1]), ReprType([1])
        w = init_layer_weights(t_in, t_out, seed=1)
        thetas = np.linspace(0, 2 * np.pi, 5)
        batch = assemble_neigh_kernel(w, thetas)
        assert batch.shape == (5, 2, 3)
        for k, t in enumerate(thetas):
            assert np.allclose(batch[k], assemble_neigh_kernel(w, float(t)), atol=1e-15)

    def test_assembled_kernels_satisfy_constraints(self):
        rng = np.random.default_rng(8)
        t_in, t_out = ReprType([0, 1, 2]), ReprType([1, 0, 2])
        w = init_layer_weights(t_in, t_out, seed=13)
        for _ in range(50):
            t, g = rng.uniform(0, 2 * np.pi, 2)
            kn_shift = assemble_neigh_kernel(w, t - g)
            want = rep(t_out, -g) @ assemble_neigh_kernel(w, t) @ rep(t_in, g)
            assert np.max(np.abs(kn_shift - want)) < 1e-12
            ks = assemble_self_kernel(w)
            assert np.max(np.abs(ks - rep(t_out, -g) @ ks @ rep(t_in, g))) < 1e-12

    def test_wrong_weight_length_rejected(self):
        t = ReprType([0, 1])
        with pytest.raises(UsageError):
            LayerWeights(t, t, np.zeros(99), np.zeros(9))

    def test_init_is_seeded_and_bounded(self):
        t_in, t_out = ReprType([0, 1]), ReprType([0, 1])
        a = init_layer_weights(t_in, t_out, seed=7)
        b = init_layer_weights(t_in, t_out, seed=7)
        c = init_layer_weights(t_in, t_out, seed=8)
        assert np.array_equal(a.w_neigh, b.w_neigh)
        assert not np.array_equal(a.w_neigh, c.w_neigh)
        n_self, n_neigh = param_count(t_in, t_out)
        assert np.max(np.abs(a.w_self)) <= 1.0 / np.sqrt(n_self)
        assert np.max(np.abs(a.w_neigh)) <= 1.0 / np.sqrt(n_neigh)
