import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_unitary, random_vecmat
from ncgk.errors import DomainError, ResourceError
from ncgk.oracle import (brute_opt_complex_n1, brute_opt_complex_n2, brute_opt_real, exhaustive_pair_expectation,
                         exhaustive_sign_expectation, exhaustive_z_expectation, fourth_moment_identity,
                         krivine_series_value, reflection, rotation, secant_characteristic, sign_moment_bound, su2)
from ncgk.tensor import Tensor4, evaluate_matrices, grothendieck_embed, random_tensor


class TestGroups:
    def test_rotation_and_reflection_are_orthogonal(self):
        th = np.linspace(0, 6, 7)
        for R, det in ((rotation(th), 1.0), (reflection(th), -1.0)):
            assert np.allclose(R @ np.swapaxes(R, -1, -2), np.eye(2))
            assert np.allclose(np.linalg.det(R), det)

    def test_su2(self):
        U = su2(np.array([0.3, 1.2]), np.array([2.0, -0.4]), np.array([0.7, 1.1]))
        assert np.allclose(U @ np.swapaxes(U.conj(), -1, -2), np.eye(2))
        assert np.allclose(np.linalg.det(U), 1.0)


class TestBruteReal:
    def test_scalar(self):
        assert brute_opt_real(grothendieck_embed(np.array([[1.0]]))) == 1.0
        assert brute_opt_real(grothendieck_embed(np.array([[-3.0]]))) == 3.0

    def test_identity(self):
        assert brute_opt_real(grothendieck_embed(np.eye(2))) == pytest.approx(2.0, abs=1e-12)

    def test_sign_pattern(self):
        # optimum over sign vectors of a 2x2 matrix with rows (1, 1), (1, -1)
        assert brute_opt_real(grothendieck_embed(np.array([[1.0, 1.0], [1.0, -1.0]]))) == pytest.approx(2.0, abs=1e-9)

    def test_zero(self):
        assert brute_opt_real(Tensor4.zeros(2, "real")) == 0.0

    def test_rejects_larger_or_complex(self, rng):
        with pytest.raises(DomainError):
            brute_opt_real(random_tensor(rng, 3, "real"))
        with pytest.raises(DomainError):
            brute_opt_real(random_tensor(rng, 2, "complex"))

    def test_dominates_random_orthogonal_pairs(self, rng):
        M = random_tensor(rng, 2, "real")
        opt = brute_opt_real(M)
        for _ in range(200):
            U = random_unitary(rng, 2, complex_=False)
            V = random_unitary(rng, 2, complex_=False)
            assert abs(evaluate_matrices(M, U, V)) <= opt * (1 + 1e-9)

    def test_refinement_is_stable_under_grid(self, rng):
        M = random_tensor(rng, 2, "real")
        assert brute_opt_real(M, grid=60) == pytest.approx(brute_opt_real(M, grid=240), rel=1e-8)


class TestBruteComplex:
    def test_scalar(self):
        M = Tensor4.from_dense(np.full((1, 1, 1, 1), 3 + 4j))
        assert brute_opt_complex_n1(M) == pytest.approx(5.0, abs=1e-12)

    def test_planted_product(self, rng):
        A, B = random_unitary(rng, 2), random_unitary(rng, 2)
        M = Tensor4.from_dense(np.einsum("ij,kl->ijkl", A, B))
        # |sum A conj(A) * sum B conj(B)| = 2 * 2
        assert brute_opt_complex_n2(M) == pytest.approx(4.0, rel=1e-8)

    def test_dominates_random_unitary_pairs(self, rng):
        M = random_tensor(rng, 2)
        opt = brute_opt_complex_n2(M)
        for _ in range(200):
            v = abs(evaluate_matrices(M, random_unitary(rng, 2), random_unitary(rng, 2)))
            assert v <= opt * (1 + 1e-8)

    def test_wrong_size(self, rng):
        with pytest.raises(DomainError):
            brute_opt_complex_n1(random_tensor(rng, 2))
        with pytest.raises(DomainError):
            brute_opt_complex_n2(random_tensor(rng, 3))


class TestExhaustive:
    def test_single_component_square(self, rng):
        X = random_vecmat(rng, 3, 1)
        X0 = X[:, :, 0]
        P = X0 @ X0.conj().T
        assert np.allclose(exhaustive_z_expectation(X, "left-square"), P @ P)
        assert np.allclose(exhaustive_sign_expectation(X, "left-square"), P @ P)

    def test_zero(self):
        W = np.zeros((2, 2, 3))
        assert np.allclose(exhaustive_z_expectation(W, "left-square"), 0)
        assert np.allclose(exhaustive_sign_expectation(W, "right-gram"), 0)

    def test_gram_is_preserved(self, rng):
        W = random_vecmat(rng, 2, 4)
        P = np.einsum("ijr,kjr->ik", W, W.conj())
        assert np.allclose(exhaustive_z_expectation(W, "left-gram"), P)
        assert np.allclose(exhaustive_z_expectation(W, "matrix"), 0)

    @given(st.integers(0, 2 ** 32 - 1), st.integers(1, 4), st.sampled_from(["left", "right"]))
    def test_fourth_moment_identity(self, seed, d, side):
        W = random_vecmat(np.random.default_rng(seed), 2, d)
        exact = exhaustive_z_expectation(W, f"{side}-square")
        assert np.allclose(exact, fourth_moment_identity(W, side), atol=1e-10 * max(1.0, np.abs(exact).max()))

    @given(st.integers(0, 2 ** 32 - 1), st.integers(1, 5), st.sampled_from(["left", "right"]))
    def test_sign_moment_bound(self, seed, d, side):
        X = random_vecmat(np.random.default_rng(seed), 2, d)
        gap = sign_moment_bound(X, side) - exhaustive_sign_expectation(X, f"{side}-square")
        assert np.min(np.linalg.eigvalsh(gap)) >= -1e-9 * np.abs(gap).max()

    def test_pair_expectation_matches_objective(self, rng):
        M = random_tensor(rng, 2)
        X, Y = random_vecmat(rng, 2, 3), random_vecmat(rng, 2, 3)
        direct = np.einsum("ijkl,ijr,klr->", M.dense(), X, Y.conj())
        assert exhaustive_pair_expectation(M, X, Y) == pytest.approx(direct / 2, rel=1e-12)

    def test_limits(self):
        with pytest.raises(ResourceError):
            exhaustive_z_expectation(np.zeros((1, 1, 11)), limit=1000)
        with pytest.raises(DomainError):
            exhaustive_z_expectation(np.zeros((1, 1, 1)), "nonsense")


class TestQuadrature:
    def test_characteristic_closed_form(self):
        # the secant law has characteristic function sech(s) at s = log a
        for a in (0.3, 1.0, 2.0, 17.0):
            assert secant_characteristic(a) == pytest.approx(1 / math.cosh(math.log(a)), abs=1e-10)

    def test_characteristic_domain(self):
        with pytest.raises(DomainError):
            secant_characteristic(0.0)

    def test_series_with_single_cosine(self):
        # f = g = cos gives (1/2pi) int cos(m x - t) cos(t - m y) dt = cos(m (x - y)) / 2
        val = krivine_series_value(0.4, 0.1, [1.0], np.cos, np.cos, nodes=64)
        assert val == pytest.approx(math.sqrt(2) * math.cos(0.3) / 2, abs=1e-12)
