import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_contraction, random_unitary, random_vecmat
from ncgk.errors import DomainError, ShapeError
from ncgk.tensor import (Tensor4, component, contract_best_response, evaluate, evaluate_matrices, frobenius,
                         from_components, gram_products, grothendieck_embed, haagerup_tensor, haagerup_witness,
                         is_hermitian_matrix, is_orthogonal, is_unitary, op_norm, partial_contraction, polar,
                         random_hermitian_tensor, random_tensor, unitary_power)

seeds = st.integers(0, 2 ** 32 - 1)


class TestTensor4:
    def test_rejects_out_of_range_index(self):
        with pytest.raises(ShapeError):
            Tensor4(2, [[0, 0, 0, 2]], [1.0])

    def test_rejects_duplicates(self):
        with pytest.raises(DomainError):
            Tensor4(2, [[0, 0, 0, 1], [0, 0, 0, 1]], [1.0, 2.0])

    def test_rejects_nonfinite(self):
        with pytest.raises(DomainError):
            Tensor4(1, [[0, 0, 0, 0]], [np.nan])

    def test_real_field_rejects_imaginary_part(self):
        with pytest.raises(DomainError):
            Tensor4(1, [[0, 0, 0, 0]], [1j], field="real")

    def test_dense_roundtrip(self, rng):
        a = rng.standard_normal((3,) * 4) + 1j * rng.standard_normal((3,) * 4)
        assert np.array_equal(Tensor4.from_dense(a).dense(), a)

    def test_hermitian_predicate(self, rng):
        assert random_hermitian_tensor(rng, 2).is_hermitian()
        assert not random_tensor(rng, 2, "complex").is_hermitian(1e-9)
        # real Haagerup tensor: M[0,j,j,0] = conj(M[j,0,0,j]) fails for j > 0
        assert not haagerup_tensor(2).is_hermitian()

    def test_values_are_read_only(self, rng):
        M = random_tensor(rng, 2)
        with pytest.raises(ValueError):
            M.values[0] = 0


class TestEvaluate:
    def test_scalar_identity(self):
        M = Tensor4(1, [[0, 0, 0, 0]], [1.0])
        assert evaluate(M, np.ones((1, 1, 1)), np.ones((1, 1, 1))) == 1

    def test_sesquilinear(self, rng):
        M = random_tensor(rng, 2)
        X, Y = random_vecmat(rng, 2, 3), random_vecmat(rng, 2, 3)
        a, b = 2j, 1 - 0.5j
        assert np.isclose(evaluate(M, a * X, b * Y), a * np.conj(b) * evaluate(M, X, Y), atol=1e-12)

    def test_haagerup_witness(self):
        X, Y = haagerup_witness(2)
        assert np.isclose(evaluate(haagerup_tensor(2), X, Y), 4 / 3, atol=1e-14)

    def test_mismatched_dimensions(self, rng):
        M = random_tensor(rng, 2)
        with pytest.raises(ShapeError):
            evaluate(M, random_vecmat(rng, 2, 2), random_vecmat(rng, 2, 3))
        with pytest.raises(ShapeError):
            evaluate_matrices(M, np.eye(3), np.eye(3))

    def test_haagerup_identity_pair(self):
        assert evaluate_matrices(haagerup_tensor(3), np.eye(3), np.eye(3)) == 1

    def test_zero_second_argument(self, rng):
        assert evaluate_matrices(random_tensor(rng, 2), np.eye(2), np.zeros((2, 2))) == 0

    def test_grothendieck_embedding_with_signs(self):
        A = np.array([[1.0, 2.0], [-3.0, 0.5]])
        M = grothendieck_embed(A)
        for e in [(1, 1), (1, -1), (-1, 1), (-1, -1)]:
            for d in [(1, 1), (1, -1), (-1, 1), (-1, -1)]:
                want = sum(A[i, j] * e[i] * d[j] for i in range(2) for j in range(2))
                assert np.isclose(evaluate_matrices(M, np.diag(e), np.diag(d)), want)

    @given(seeds)
    def test_components_add_up(self, seed):
        rng = np.random.default_rng(seed)
        M = random_tensor(rng, 2)
        X, Y = random_vecmat(rng, 2, 3), random_vecmat(rng, 2, 3)
        total = sum(evaluate_matrices(M, component(X, r), component(Y, r)) for r in range(3))
        assert abs(evaluate(M, X, Y) - total) <= 1e-12 * max(1, abs(total))

    def test_batched_matrices(self, rng):
        M = random_tensor(rng, 2)
        A = np.stack([random_unitary(rng, 2) for _ in range(4)])
        vals = evaluate_matrices(M, A, A)
        assert vals.shape == (4,)
        assert np.isclose(vals[2], evaluate_matrices(M, A[2], A[2]))


class TestGram:
    def test_unitary(self, rng):
        U = random_unitary(rng, 3)
        P, Q = gram_products(U)
        assert np.allclose(P, np.eye(3)) and np.allclose(Q, np.eye(3))

    @given(seeds, st.integers(1, 3), st.integers(1, 4))
    def test_hermitian_psd_equal_traces(self, seed, n, d):
        X = random_vecmat(np.random.default_rng(seed), n, d)
        P, Q = gram_products(X)
        for G in (P, Q):
            assert np.allclose(G, G.conj().T, atol=1e-10)
            assert np.linalg.eigvalsh(G).min() >= -1e-10
        assert np.isclose(np.trace(P), np.trace(Q), atol=1e-10)
        assert np.isclose(np.trace(P).real, np.sum(np.abs(X) ** 2), atol=1e-10)

    def test_component_oracle(self, rng):
        X = random_vecmat(rng, 3, 4)
        comps = [component(X, r) for r in range(4)]
        P, Q = gram_products(X)
        assert np.allclose(P, sum(C @ C.conj().T for C in comps), atol=1e-12)
        assert np.allclose(Q, sum(C.conj().T @ C for C in comps), atol=1e-12)
        assert np.array_equal(from_components(comps), X)


class TestPolarAndPowers:
    def test_unitary_input(self, rng):
        U = random_unitary(rng, 3)
        Q, P = polar(U)
        assert np.allclose(Q, U, atol=1e-12) and np.allclose(P, np.eye(3), atol=1e-12)

    def test_psd_input(self):
        Q, P = polar(np.diag([2.0, 0.5]))
        assert np.allclose(Q, np.eye(2)) and np.allclose(P, np.diag([2.0, 0.5]))

    @given(seeds, st.integers(1, 4))
    def test_reconstruction(self, seed, n):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        Q, P = polar(A)
        assert np.linalg.norm(Q @ P - A) <= 1e-10 * max(1, np.linalg.norm(A))
        assert is_unitary(Q, 1e-10)
        assert np.linalg.eigvalsh(P).min() >= -1e-10

    def test_rank_deficient_still_unitary(self):
        Q, _ = polar(np.array([[1.0, 0], [0, 0]]))
        assert is_unitary(Q)

    def test_power_examples(self):
        assert np.allclose(unitary_power(np.eye(2), 0.7), np.eye(2))
        assert np.allclose(unitary_power(np.diag([np.e, 1.0]), np.pi), np.diag([-1.0, 1.0]))
        assert np.allclose(unitary_power(np.diag([3.0, 0.2]), 0.0), np.eye(2))

    def test_power_zero_eigenvalue_convention(self):
        assert np.allclose(unitary_power(np.diag([0.0, 1.0]), 1.3), np.eye(2))

    def test_power_rejects_non_hermitian(self):
        with pytest.raises(DomainError):
            unitary_power(np.array([[1.0, 1.0], [0.0, 1.0]]), 1.0)

    @given(seeds, st.floats(-5, 5), st.floats(-5, 5))
    def test_group_law(self, seed, s, t):
        rng = np.random.default_rng(seed)
        G = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        P = G @ G.conj().T + 0.1 * np.eye(3)
        Ps, Pt = unitary_power(P, s), unitary_power(P, t)
        assert is_unitary(Pt, 1e-10)
        assert np.allclose(Ps @ Pt, unitary_power(P, s + t), atol=1e-9)


class TestBestResponse:
    def test_diagonal_positive(self):
        n = 2
        M = Tensor4(n, [[0, 0, 0, 0], [1, 1, 0, 0]], [2.0, 3.0])  # N = diag(2, 3) for B = E_00
        B = np.zeros((2, 2))
        B[0, 0] = 1
        A = contract_best_response(M, B)
        assert np.allclose(A, np.eye(2))
        assert np.isclose(evaluate_matrices(M, A, B), 5.0)

    def test_scalar(self):
        M = Tensor4(1, [[0, 0, 0, 0]], [3 - 4j])
        A = contract_best_response(M, np.ones((1, 1)))
        assert np.isclose(A[0, 0], np.conj(3 - 4j) / 5)
        assert np.isclose(evaluate_matrices(M, A, np.ones((1, 1))), 5.0)

    @given(seeds)
    def test_nuclear_norm_and_optimality(self, seed):
        rng = np.random.default_rng(seed)
        M = random_tensor(rng, 3)
        B = random_contraction(rng, 3)
        A = contract_best_response(M, B)
        nuc = np.linalg.svd(partial_contraction(M, B), compute_uv=False).sum()
        v = evaluate_matrices(M, A, B)
        assert abs(v - nuc) <= 1e-10 * max(1, nuc)
        for _ in range(10):
            assert abs(evaluate_matrices(M, random_contraction(rng, 3), B)) <= nuc + 1e-9

    def test_real_inputs_give_real_output(self, rng):
        M = random_tensor(rng, 3, "real")
        A = contract_best_response(M, random_unitary(rng, 3, complex_=False))
        assert not np.iscomplexobj(A) and is_orthogonal(A)


class TestMisc:
    def test_frobenius(self):
        assert frobenius(Tensor4.zeros(2)) == 0
        assert frobenius(Tensor4(2, [[0, 1, 1, 0]], [1.0])) == 1
        assert np.isclose(frobenius(haagerup_tensor(2)), np.sqrt(2))

    def test_grothendieck_embed_zero(self):
        assert grothendieck_embed(np.zeros((3, 3))).nnz == 0

    def test_predicates(self, rng):
        U = random_unitary(rng, 3)
        assert is_unitary(U) and not is_orthogonal(U)
        assert is_hermitian_matrix(U + U.conj().T)
        assert op_norm(2 * U) == pytest.approx(2)

    def test_arithmetic(self, rng):
        M, N = random_tensor(rng, 2), random_tensor(rng, 2)
        assert np.allclose((M - N).dense(), M.dense() - N.dense())
        assert np.allclose((M * 2j).dense(), 2j * M.dense())
