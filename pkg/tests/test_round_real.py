import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_contraction, random_unitary
from ncgk import sdp
from ncgk.errors import DomainError, ShapeError
from ncgk.oracle import brute_opt_real, exhaustive_sign_expectation, sign_moment_bound
from ncgk.round_complex import SecantSampler
from ncgk.round_real import (TAU, PipelineConfig, RealRoundingConfig, approximate_opt_complex, approximate_opt_real,
                             embed_real_pair, greedy_signs, hermitian_to_real_tensor, psi, real_to_hermitian_tensor,
                             realify, round_hermitian, round_hermitian_values, round_real_direct,
                             round_real_direct_values, to_orthogonal, truncate_singular_values)
from ncgk.tensor import (Tensor4, evaluate_matrices, grothendieck_embed, haagerup_tensor, is_contraction,
                         is_hermitian_matrix, is_orthogonal, is_unitary, random_hermitian_tensor, random_tensor)

seeds = st.integers(0, 2 ** 32 - 1)


def random_hermitian(rng, n):
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    H = G + G.conj().T
    return H / (np.linalg.norm(H, 2) * rng.uniform(1, 1.5))


class TestConfig:
    def test_tau_is_fixed(self):
        with pytest.raises(DomainError):
            RealRoundingConfig(tau=0.8)
        assert RealRoundingConfig().tau == np.sqrt(3) / 2

    def test_routes_validated(self):
        with pytest.raises(DomainError):
            RealRoundingConfig(routes=("other",))
        with pytest.raises(DomainError):
            PipelineConfig(trials=0)


class TestHermitianRounding:
    def test_outputs_hermitian_contractions(self, rng):
        M = random_hermitian_tensor(rng, 2)
        sol = sdp.solve_relaxation(M)
        for i in range(20):
            p = round_hermitian(M, sol.X, sol.Y, 0.05, SecantSampler(i))
            for W in (p.A, p.B):
                assert is_hermitian_matrix(W, 1e-9) and is_contraction(W, 1e-9)
            assert p.value == pytest.approx(abs(evaluate_matrices(M, p.A, p.B)), abs=1e-9)

    def test_requires_hermitian_tensor(self, rng):
        M = random_tensor(rng, 2)
        sol = sdp.solve_relaxation(M)
        with pytest.raises(DomainError):
            round_hermitian(M, sol.X, sol.Y, 0.05, SecantSampler(0))

    def test_mean_on_random_instance(self):
        rng = np.random.default_rng(8)
        M = random_hermitian_tensor(rng, 2)
        sol = sdp.solve_relaxation(M)
        vals, best = round_hermitian_values(M, sol.X, sol.Y, 0.05, 3000, SecantSampler(1))
        assert vals.mean() + 3 * vals.std() / np.sqrt(vals.size) >= 0.30 * sol.upper_bound
        assert best.value >= 0.30 * sol.upper_bound

    def test_diagonal_symmetric_instance(self):
        A = np.array([[1.0, 2.0], [2.0, -1.0]])
        M = grothendieck_embed(A)
        assert M.is_hermitian()
        opt = max(abs(np.array(e) @ A @ np.array(d)) for e in [(1, 1), (1, -1)] for d in [(1, 1), (1, -1), (-1, 1),
                                                                                            (-1, -1)])
        sol = sdp.solve_relaxation(M)
        _, best = round_hermitian_values(M, sol.X, sol.Y, 0.05, 200, SecantSampler(0))
        assert best.value >= 0.3 * opt


class TestDirectRounding:
    def test_contractions(self, rng):
        M = random_tensor(rng, 3, "real")
        sol = sdp.solve_relaxation(M, "unitary-real")
        for i in range(20):
            p = round_real_direct(M, sol.X, sol.Y, SecantSampler(i))
            assert is_contraction(p.B, 1e-12) and is_orthogonal(p.A)
            assert not np.iscomplexobj(p.A) and not np.iscomplexobj(p.B)
            assert p.info["signed_value"] >= -1e-12

    def test_rejects_complex(self, rng):
        M = random_tensor(rng, 2, "complex")
        X = np.eye(2)[:, :, None]
        with pytest.raises(DomainError):
            round_real_direct(M, X, X, SecantSampler(0))

    def test_batched_matches_single(self, rng):
        M = random_tensor(rng, 2, "real")
        sol = sdp.solve_relaxation(M, "unitary-real")
        vals, best = round_real_direct_values(M, sol.X, sol.Y, 50, SecantSampler(3))
        assert best.value == pytest.approx(vals.max())
        assert best.value == pytest.approx(evaluate_matrices(M, best.A, best.B).real, abs=1e-12)

    def test_mean_on_random_instance(self):
        rng = np.random.default_rng(2)
        M = random_tensor(rng, 2, "real")
        sol = sdp.solve_relaxation(M, "unitary-real")
        vals, _ = round_real_direct_values(M, sol.X, sol.Y, 4000, SecantSampler(0))
        assert vals.mean() + 3 * vals.std() / np.sqrt(vals.size) >= 0.17 * sol.upper_bound

    @given(seeds)
    def test_truncation_bounds(self, seed):
        rng = np.random.default_rng(seed)
        Y = rng.standard_normal((3, 3)) * rng.uniform(0.1, 3)
        Yt = truncate_singular_values(Y, TAU)
        Yr = Y - Yt
        assert np.linalg.norm(Yt, 2) <= TAU + 1e-12
        YY = Y @ Y.T
        bound = YY @ YY / (4 * TAU) ** 2
        assert np.linalg.eigvalsh(bound - Yr @ Yr.T).min() >= -1e-9
        YtY = Y.T @ Y
        assert np.linalg.eigvalsh(YtY @ YtY / (4 * TAU) ** 2 - Yr.T @ Yr).min() >= -1e-9

    @given(seeds, st.integers(1, 6))
    def test_sign_moment_bound(self, seed, d):
        X = np.random.default_rng(seed).standard_normal((3, 3, d))
        for side in ("left", "right"):
            E = exhaustive_sign_expectation(X, f"{side}-square")
            assert np.linalg.eigvalsh(sign_moment_bound(X, side) - E).min() >= -1e-9


class TestToOrthogonal:
    def test_orthogonal_inputs(self, rng):
        M = random_tensor(rng, 3, "real")
        A, B = random_unitary(rng, 3, False), random_unitary(rng, 3, False)
        U, V = to_orthogonal(M, A, B)
        assert evaluate_matrices(M, U, V).real >= evaluate_matrices(M, A, B).real - 1e-10
        # every singular value is already 1 so only sign flips of singular vectors can occur
        assert np.allclose(np.abs(np.linalg.svd(U @ A.T, compute_uv=False)), 1)

    def test_zero_inputs(self, rng):
        M = random_tensor(rng, 2, "real")
        U, V = to_orthogonal(M, np.zeros((2, 2)), np.zeros((2, 2)))
        assert is_orthogonal(U) and is_orthogonal(V)
        assert evaluate_matrices(M, U, V).real >= -1e-12

    @given(seeds)
    def test_monotone_every_step(self, seed):
        rng = np.random.default_rng(seed)
        M = random_tensor(rng, 3, "real")
        A, B = random_contraction(rng, 3, False), random_contraction(rng, 3, False)
        U, V, hist = to_orthogonal(M, A, B, trace=True)
        assert len(hist) == 7
        assert hist[0] == pytest.approx(evaluate_matrices(M, A, B).real, abs=1e-10)
        assert np.all(np.diff(hist) >= -1e-10)
        assert is_orthogonal(U, 1e-9) and is_orthogonal(V, 1e-9)
        assert evaluate_matrices(M, U, V).real == pytest.approx(hist[-1], abs=1e-9)

    def test_rejects_bad_inputs(self, rng):
        M = random_tensor(rng, 2, "real")
        with pytest.raises(DomainError):
            to_orthogonal(M, 2 * np.eye(2), np.eye(2))
        with pytest.raises(DomainError):
            to_orthogonal(random_tensor(rng, 2), np.eye(2), np.eye(2))
        with pytest.raises(ShapeError):
            to_orthogonal(M, np.eye(3), np.eye(3))

    def test_greedy_zero_coefficient_picks_plus(self):
        s, t, _ = greedy_signs(np.zeros((2, 2)), [0.3, -0.2], [0.1, 0.0])
        assert np.all(s == 1) and np.all(t == 1)


class TestReductions:
    def test_real_to_hermitian(self, rng):
        for _ in range(50):
            M = random_tensor(rng, 2, "real", density=0.6)
            H = real_to_hermitian_tensor(M)
            assert H.is_hermitian()
            S, T = random_unitary(rng, 2, False), random_unitary(rng, 2, False)
            got = evaluate_matrices(H, embed_real_pair(S), embed_real_pair(T))
            assert abs(got - evaluate_matrices(M, S, T)) <= 1e-9

    def test_real_to_hermitian_on_hermitian_pairs(self, rng):
        M = random_tensor(rng, 2, "real")
        H = real_to_hermitian_tensor(M)
        A, B = random_hermitian(rng, 4), random_hermitian(rng, 4)
        want = evaluate_matrices(M, A[:2, 2:].real, B[:2, 2:].real)
        assert abs(evaluate_matrices(H, A, B) - want) <= 1e-12

    def test_zero(self):
        assert real_to_hermitian_tensor(Tensor4.zeros(2)).nnz == 0
        assert hermitian_to_real_tensor(Tensor4.zeros(2, "complex")).nnz == 0

    def test_psi_examples(self, rng):
        X = random_hermitian(rng, 3)
        assert np.allclose(psi(realify(X)), X, atol=1e-15)
        assert np.allclose(psi(np.eye(6)), np.eye(3))
        with pytest.raises(ShapeError):
            psi(np.eye(3))
        with pytest.raises(DomainError):
            psi(1j * np.eye(2))

    def test_psi_contracts_norm(self, rng):
        for _ in range(100):
            A = rng.standard_normal((4, 4))
            P = psi(A)
            assert is_hermitian_matrix(P, 1e-14)
            assert np.linalg.norm(P, 2) <= np.linalg.norm(A, 2) + 1e-12

    def test_psi_linear(self, rng):
        A, B = rng.standard_normal((4, 4)), rng.standard_normal((4, 4))
        assert np.allclose(psi(2 * A - B), 2 * psi(A) - psi(B))

    def test_hermitian_to_real(self, rng):
        for _ in range(50):
            M = random_hermitian_tensor(rng, 2)
            R = hermitian_to_real_tensor(M)
            assert R.is_real and R.n == 4
            A, B = rng.standard_normal((4, 4)), rng.standard_normal((4, 4))
            assert abs(evaluate_matrices(R, A, B) - evaluate_matrices(M, psi(A), psi(B))) <= 1e-9
            X, Y = random_hermitian(rng, 2), random_hermitian(rng, 2)
            assert abs(evaluate_matrices(R, realify(X), realify(Y)) - evaluate_matrices(M, X, Y)) <= 1e-9

    def test_hermitian_to_real_rejects(self, rng):
        with pytest.raises(DomainError):
            hermitian_to_real_tensor(random_tensor(rng, 2))


class TestPipelines:
    def test_scalar_real_exact(self):
        M = Tensor4(1, [[0, 0, 0, 0]], [-2.5])
        p = approximate_opt_real(M)
        assert p.value == pytest.approx(2.5)
        assert p.upper_bound == pytest.approx(2.5, abs=1e-6)

    def test_scalar_complex_exact(self):
        p = approximate_opt_complex(Tensor4(1, [[0, 0, 0, 0]], [3 + 4j]))
        assert p.value == pytest.approx(5) and p.upper_bound == pytest.approx(5, abs=1e-6)

    def test_real_output_orthogonal(self, rng):
        M = random_tensor(rng, 3, "real")
        p = approximate_opt_real(M, RealRoundingConfig(trials=16))
        assert is_orthogonal(p.A) and is_orthogonal(p.B)
        assert p.value == pytest.approx(evaluate_matrices(M, p.A, p.B).real, abs=1e-9)
        assert set(p.info["route_values"]) == {"hermitian", "direct"}
        assert p.value <= p.upper_bound + 1e-6

    @settings(max_examples=10)
    @given(seeds)
    def test_real_vs_oracle(self, seed):
        M = random_tensor(np.random.default_rng(seed), 2, "real", density=0.4)
        p = approximate_opt_real(M, RealRoundingConfig(trials=32, seed=seed))
        opt = brute_opt_real(M)
        assert p.value >= opt / (2 * np.sqrt(2)) - 1e-3
        assert p.upper_bound >= opt - 1e-6

    def test_diagonal_grothendieck(self):
        A = np.array([[1.0, -2.0], [0.5, 1.5]])
        opt = max(abs(np.array(e) @ A @ np.array(d)) for e in [(1, 1), (1, -1)] for d in [(1, 1), (1, -1),
                                                                                        (-1, 1), (-1, -1)])
        p = approximate_opt_real(grothendieck_embed(A))
        assert p.value >= opt / 3

    def test_complex_haagerup(self):
        p = approximate_opt_complex(haagerup_tensor(4), PipelineConfig(trials=256))
        assert is_unitary(p.A) and is_unitary(p.B)
        assert p.value >= 0.9
        assert p.upper_bound / p.value <= 2

    def test_complex_random(self, rng):
        M = random_tensor(rng, 3)
        p = approximate_opt_complex(M)
        assert p.value >= 0.45 * p.upper_bound
