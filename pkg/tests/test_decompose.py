import math

import numpy as np
import pytest

from conftest import random_unitary
from ncgk.decompose import Decomposition, decompose, ptas_dense
from ncgk.errors import ConvergenceError, DomainError, ResourceError
from ncgk.oracle import brute_opt_complex_n2
from ncgk.round_real import PipelineConfig
from ncgk import sdp
from ncgk.tensor import Tensor4, frobenius, is_orthogonal, is_unitary, random_tensor


def product_tensor(alpha, A, B):
    return Tensor4.from_dense(alpha * np.einsum("ij,kl->ijkl", A, B))


def few_products(rng, n=2, noise=0.3):
    U1, V1, U2, V2 = (random_unitary(rng, n) for _ in range(4))
    D = 3 * np.einsum("ij,kl->ijkl", U1, V1) + 1.5 * np.einsum("ij,kl->ijkl", U2, V2)
    D = D + noise * (rng.standard_normal(D.shape) + 1j * rng.standard_normal(D.shape)) / np.sqrt(2)
    return Tensor4.from_dense(D)


def check_decomposition(M, dec, eps):
    assert np.max(np.abs(dec.reconstruct() - M.dense())) <= 1e-8
    for alpha, A, B in dec.terms:
        assert is_unitary(A) and is_unitary(B)
        assert abs(np.imag(alpha)) <= 1e-12 and np.real(alpha) >= 0
    assert np.all(np.diff(dec.energies) < 0)
    final_upper = dec.certificates[-1][0]
    assert final_upper <= eps * dec.lower_bound
    assert sdp.solve_relaxation(dec.residual).upper_bound <= eps * dec.lower_bound * (1 + 1e-6)


class TestDecompose:
    def test_rank_one(self, rng):
        A, B = random_unitary(rng, 3), random_unitary(rng, 3)
        M = product_tensor(2.5, A, B)
        dec = decompose(M, 0.3)
        assert dec.T == 1
        alpha, At, Bt = dec.terms[0]
        assert alpha == pytest.approx(2.5, rel=1e-6)
        # accuracy is limited by the relaxation solver tolerance
        assert np.max(np.abs(dec.residual.dense())) <= 1e-3 * np.max(np.abs(M.dense()))

    @pytest.mark.parametrize("eps", [0.3, 0.5])
    def test_random_instances(self, eps):
        rng = np.random.default_rng(int(eps * 10))
        for _ in range(5):
            M = random_tensor(rng, 2)
            dec = decompose(M, eps)
            check_decomposition(M, dec, eps)
            assert dec.T <= math.ceil(dec.term_bound(M))

    def test_energy_drop_per_step(self, rng):
        M = random_tensor(rng, 2)
        eps = 0.3
        dec = decompose(M, eps)
        n = M.n
        floor = eps ** 2 * (1 - eps) ** 2 * dec.lower_bound ** 2 / (4 * n ** 2)
        drops = -np.diff(dec.energies)
        assert np.all(drops >= floor)
        # each step removes exactly v^2 / n^2
        for (alpha, _, _), d in zip(dec.terms, drops):
            assert d == pytest.approx(n ** 2 * abs(alpha) ** 2, rel=1e-9)

    def test_alpha_scale(self, rng):
        M = random_tensor(rng, 3)
        dec = decompose(M, 0.5)
        for alpha, _, _ in dec.terms:
            assert abs(alpha) <= frobenius(M) / M.n

    def test_real_mode_orthogonal(self, rng):
        M = random_tensor(rng, 2, "real")
        dec = decompose(M, 0.5)
        assert all(is_orthogonal(A) and is_orthogonal(B) for _, A, B in dec.terms)
        assert np.max(np.abs(dec.reconstruct() - M.dense())) <= 1e-8

    def test_validation(self, rng):
        with pytest.raises(DomainError):
            decompose(random_tensor(rng, 2), 0.7)
        with pytest.raises(DomainError):
            decompose(Tensor4.zeros(2), 0.3)

    def test_cap_reports_partial(self, rng):
        M = random_tensor(rng, 2)
        with pytest.raises(ConvergenceError) as info:
            decompose(M, 0.05, max_terms=1)
        assert isinstance(info.value.partial, Decomposition)
        assert info.value.partial.T == 1


class TestPTAS:
    def test_rank_one(self, rng):
        A, B = random_unitary(rng, 2), random_unitary(rng, 2)
        M = product_tensor(1.7, A, B)
        res = ptas_dense(M, kappa=1.0, eps=0.2, return_info=True)
        assert res.value == pytest.approx(1.7 * 4, rel=0.2)
        assert res.terms == 1

    def test_scalar(self):
        assert ptas_dense(Tensor4(1, [[0, 0, 0, 0]], [3 + 4j]), kappa=1.0, eps=0.3) == pytest.approx(5, rel=1e-9)

    def test_dense_instance_vs_grid_oracle(self):
        rng = np.random.default_rng(4)
        M = few_products(rng)
        eps = 0.3
        dec = decompose(M, eps)
        kappa = 0.99 * dec.lower_bound / (M.n * frobenius(M))
        value = ptas_dense(M, kappa=kappa, eps=eps)
        opt = brute_opt_complex_n2(M)
        assert value <= opt * (1 + 1e-6)
        assert value >= (1 - 1.5 * eps) * opt

    def test_density_certificate(self, rng):
        M = random_tensor(rng, 2)
        with pytest.raises(DomainError):
            ptas_dense(M, kappa=5.0, eps=0.3)

    def test_budget(self):
        M = few_products(np.random.default_rng(4))
        with pytest.raises(ResourceError):
            ptas_dense(M, kappa=0.2, eps=0.3, max_cells=10)
