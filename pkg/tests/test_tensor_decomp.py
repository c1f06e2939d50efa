import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from builders import (cp_tensor, factor_with_tau, flatten_scaled_noise, matched_component_errors,
                      orthonormal)
from noisyor.errors import InvalidInputError, PartialResultError
from noisyor.linalg import SPLITS, flatten_norm, psd_inv_sqrt
from noisyor.tensor_decomp import (DecompParams, contract_mode3, contract_modes12, orthogonal_decompose,
                                   whitened_decompose)
from noisyor.whitening import WhiteningSet


def e(i, d=3):
    v = np.zeros(d)
    v[i] = 1
    return v


class TestContractions:
    def test_unit(self):
        T = np.einsum("i,j,k->ijk", e(0), e(0), e(0))
        np.testing.assert_array_equal(contract_mode3(T, e(0)), np.outer(e(0), e(0)))
        np.testing.assert_array_equal(contract_modes12(T, e(0), e(0)), e(0))

    def test_zero(self, rng):
        T = rng.standard_normal((3, 4, 5))
        assert not contract_mode3(T, np.zeros(5)).any()
        assert not contract_modes12(T, np.zeros(3), np.zeros(4)).any()

    def test_triple_loop(self, rng):
        T = rng.standard_normal((3, 4, 5))
        g, u, v = rng.standard_normal(5), rng.standard_normal(3), rng.standard_normal(4)
        M = np.zeros((3, 4))
        z = np.zeros(5)
        for i in range(3):
            for j in range(4):
                for k in range(5):
                    M[i, j] += T[i, j, k] * g[k]
                    z[k] += T[i, j, k] * u[i] * v[j]
        np.testing.assert_allclose(contract_mode3(T, g), M, atol=1e-12)
        np.testing.assert_allclose(contract_modes12(T, u, v), z, atol=1e-12)

    def test_mismatch(self, rng):
        T = rng.standard_normal((3, 4, 5))
        with pytest.raises(InvalidInputError):
            contract_mode3(T, np.ones(4))
        with pytest.raises(InvalidInputError):
            contract_modes12(T, np.ones(4), np.ones(4))
        with pytest.raises(InvalidInputError):
            contract_mode3(np.ones((3, 3)), np.ones(3))


class TestDecompParams:
    @pytest.mark.parametrize("kw", [dict(delta=0), dict(delta=1), dict(zeta=0), dict(zeta=1.5),
                                    dict(dedup_dist=0), dict(dedup_dist=1.1), dict(target_r=0)])
    def test_invalid(self, kw):
        with pytest.raises(InvalidInputError):
            DecompParams(**{"target_r": 2, **kw}).validate()

    def test_budget(self):
        assert DecompParams(target_r=2).budget(10) == int(np.ceil(4 * 10 ** 1.25 * np.log(10)))
        assert DecompParams(target_r=2, max_trials=7).budget(10) == 7


def random_orthogonal_tensor(d, r, rng):
    A, B, C = (orthonormal(d, r, rng) for _ in range(3))
    return (A, B, C), cp_tensor(A, B, C)


class TestOrthogonalDecompose:
    def test_two_unit_terms(self):
        T = cp_tensor(np.eye(3)[:, :2], np.eye(3)[:, :2], np.eye(3)[:, :2])
        found = orthogonal_decompose(T, DecompParams(target_r=2, zeta=0.05))
        us = sorted(int(np.argmax(np.abs(t[0]))) for t in found.triples)
        assert us == [0, 1]
        assert min(found.accept_scores) >= 0.999

    @pytest.mark.parametrize("seed", range(5))
    def test_noiseless(self, seed):
        rng = np.random.default_rng(seed)
        truth, T = random_orthogonal_tensor(8, 3, rng)
        found = orthogonal_decompose(T, DecompParams(target_r=3, seed=seed))
        assert matched_component_errors(truth, found.factors()).max() <= 1e-5

    @pytest.mark.parametrize("seed", range(5))
    def test_small_noise(self, seed):
        rng = np.random.default_rng(seed)
        truth, T = random_orthogonal_tensor(8, 3, rng)
        T = T + flatten_scaled_noise(8, 0.01, rng)
        found = orthogonal_decompose(T, DecompParams(target_r=3, seed=seed))
        assert matched_component_errors(truth, found.factors()).max() <= 0.2

    @pytest.mark.parametrize("seed", range(5))
    def test_accepted_invariants(self, seed):
        rng = np.random.default_rng(seed)
        _, T = random_orthogonal_tensor(10, 4, rng)
        params = DecompParams(target_r=4, seed=seed)
        T = T + flatten_scaled_noise(10, 0.05, rng)
        found = orthogonal_decompose(T, params)
        for (u, v, w), score in zip(found.triples, found.accept_scores):
            for x in (u, v, w):
                assert abs(np.linalg.norm(x) - 1) <= 1e-6
            assert score >= 1 - params.zeta
        us = [t[0] for t in found.triples]
        for i in range(len(us)):
            for j in range(i):
                assert min(np.linalg.norm(us[i] - us[j]), np.linalg.norm(us[i] + us[j])) >= params.dedup_dist

    def test_deterministic(self, rng):
        _, T = random_orthogonal_tensor(6, 3, rng)
        T = T + flatten_scaled_noise(6, 0.05, rng)
        a = orthogonal_decompose(T, DecompParams(target_r=3, seed=4))
        b = orthogonal_decompose(T, DecompParams(target_r=3, seed=4))
        for x, y in zip(a.factors(), b.factors()):
            np.testing.assert_array_equal(x, y)

    def test_zero_tensor(self):
        with pytest.raises(PartialResultError) as info:
            orthogonal_decompose(np.zeros((4, 4, 4)), DecompParams(target_r=2, max_trials=20))
        assert len(info.value.found) == 0
        assert info.value.found.trials == 20

    def test_partial(self, rng):
        # only two true components, three requested
        _, T = random_orthogonal_tensor(5, 2, rng)
        with pytest.raises(PartialResultError) as info:
            orthogonal_decompose(T, DecompParams(target_r=3, max_trials=60))
        assert len(info.value.found) == 2

    def test_dims_too_small(self):
        with pytest.raises(InvalidInputError):
            orthogonal_decompose(np.zeros((2, 5, 5)), DecompParams(target_r=3))

    def test_noise_scaling(self):
        base, doubled = [], []
        for seed in range(10):
            rng = np.random.default_rng(seed)
            truth, T = random_orthogonal_tensor(10, 4, rng)
            Z = flatten_scaled_noise(10, 0.02, rng)
            for level, out in ((1, base), (2, doubled)):
                found = orthogonal_decompose(T + level * Z, DecompParams(target_r=4, seed=seed))
                out.append(matched_component_errors(truth, found.factors()).max())
        assert np.median(doubled) <= 4 * np.median(base)


class TestWhitenedDecompose:
    def _instance(self, seed, m=4, dims=(9, 8, 10)):
        rng = np.random.default_rng(seed)
        A, B, C = (rng.uniform(0, 1, (d, m)) for d in dims)
        return (A, B, C), cp_tensor(A, B, C)

    @pytest.mark.parametrize("seed", range(5))
    def test_exact_whitening(self, seed):
        truth, T = self._instance(seed)
        white = WhiteningSet.from_matrices(*(X @ X.T for X in truth), m=4)
        found = whitened_decompose(T, white, DecompParams(target_r=4, seed=seed))
        assert matched_component_errors(truth, found.factors()).max() <= 1e-4

    def test_sign_fixed(self):
        truth, T = self._instance(1)
        white = WhiteningSet.from_matrices(*(X @ X.T for X in truth), m=4)
        for triple in whitened_decompose(T, white, DecompParams(target_r=4, seed=1)).triples:
            assert all(x.sum() >= 0 for x in triple)

    def test_consistent_scaling(self):
        truth, T = self._instance(2)
        white = WhiteningSet.from_matrices(*(X @ X.T for X in truth), m=4)
        scaled = WhiteningSet.from_matrices(*(4 * X @ X.T for X in truth), m=4)
        params = DecompParams(target_r=4, seed=2)
        base = whitened_decompose(T, white, params).factors()
        # components of 8T under 4Q are 2x those of T under Q in every mode
        big = whitened_decompose(8 * T, scaled, params).factors()
        for x, y in zip(base, big):
            np.testing.assert_allclose(y, 2 * x, atol=1e-6)

    def test_rank_mismatch(self):
        truth, T = self._instance(0)
        white = WhiteningSet.from_matrices(*(X @ X.T for X in truth), m=4)
        with pytest.raises(InvalidInputError):
            whitened_decompose(T, white, DecompParams(target_r=3))

    def test_zero_tensor(self):
        truth, T = self._instance(0)
        white = WhiteningSet.from_matrices(*(X @ X.T for X in truth), m=4)
        with pytest.raises(PartialResultError) as info:
            whitened_decompose(np.zeros_like(T), white, DecompParams(target_r=4, max_trials=10))
        assert len(info.value.found) == 0


class TestSystematicError:
    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.floats(0.01, 1.0), st.integers(1, 8))
    def test_whitened_error_norm(self, seed, tau, k):
        rng = np.random.default_rng(seed)
        m = 3
        A, B, C = (rng.standard_normal((7, m)) for _ in range(3))
        Gam, Dlt, The = (factor_with_tau(X, tau, k, rng) for X in (A, B, C))
        Ra, Rb, Rc = (psd_inv_sqrt(X @ X.T, m) for X in (A, B, C))
        Gw, Dw, Tw = Ra @ Gam, Rb @ Dlt, Rc @ The
        E = cp_tensor(Gw, Dw, Tw)
        product = np.prod([np.linalg.norm(X, 2) for X in (Gw, Dw, Tw)])
        for split in SPLITS:
            assert flatten_norm(E, split) <= product + 1e-9
            assert flatten_norm(E, split) <= (2 * tau) ** 1.5 + 1e-6
