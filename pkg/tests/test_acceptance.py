"""Acceptance criteria 1-9, each at its stated tolerance and runtime budget."""
import json
import math
import time

import numpy as np

from builders import (asym_error, cp_tensor, desk_model, flatten_scaled_noise, matched_component_errors,
                      orthonormal, psd_error_with_tau)
from noisyor import cli
from noisyor.diagnostics import model_report
from noisyor.linalg import projector_distance, spectral_tau_two_sided, top_eigen
from noisyor.model import NoisyOrModel, brute_force_pmi, population_pmi, sample, taylor_pmit
from noisyor.pipeline import FitConfig, fit
from noisyor.pmi import count_zero_patterns, random_partition
from noisyor.tensor_decomp import DecompParams, orthogonal_decompose
from noisyor.whitening import check_whitening, whitening_product

BLOCKS = ("pmi_ab", "pmi_bc", "pmi_ca", "pmit")


def test_criterion_1_oracle_equivalence(record):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    for k in range(25):
        n, m = int(rng.integers(3, 11)), int(rng.integers(1, 13))
        W = rng.uniform(0, 2, (n, m)) * (rng.random((n, m)) < 0.5)
        model = NoisyOrModel(W, rho=float(rng.uniform(0.01, 0.3)), nu_u=2.0)
        part = random_partition(n, k)
        fast, slow = population_pmi(model, part), brute_force_pmi(model, part)
        for name in BLOCKS:
            worst = max(worst, float(np.max(np.abs(getattr(fast, name) - getattr(slow, name)))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 10
    assert record(1, ok, f"max_dev={worst:.2e} (<=1e-10) time={elapsed:.1f}s (<10s)")


def test_criterion_2_series_structure(record):
    start = time.perf_counter()
    model = desk_model(seed=0)
    part = random_partition(90, 0)
    pmit = population_pmi(model, part).pmit
    first = np.linalg.norm(taylor_pmit(model, part, 1))
    resid = np.linalg.norm(pmit - taylor_pmit(model, part, 2))
    elapsed = time.perf_counter() - start
    ok = resid <= 0.05 * first and elapsed < 30
    assert record(2, ok, f"residual/first={resid / first:.2e} (<=0.05) time={elapsed:.1f}s (<30s)")


def test_criterion_3_relative_perturbation(record):
    start = time.perf_counter()
    worst = 0.0
    for eps in (0.01, 0.05, 0.1):
        for seed in range(50):
            rng = np.random.default_rng(seed)
            S = rng.standard_normal((40, 5))
            E = psd_error_with_tau(S, eps, rng)
            K = top_eigen(S @ S.T, 5)[1]
            Kh = top_eigen(S @ S.T + E, 5)[1]
            worst = max(worst, projector_distance(K, Kh) / eps)
    elapsed = time.perf_counter() - start
    ok = worst <= 10 and elapsed < 60
    assert record(3, ok, f"max distance/eps={worst:.2f} (<=10) time={elapsed:.1f}s (<60s)")


def test_criterion_4_robust_whitening(record):
    start = time.perf_counter()
    eps, m, k = 0.05, 5, 20
    tau_max = check_max = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        A, B, C = (rng.standard_normal((k, m)) for _ in range(3))
        Sab = A @ B.T + asym_error(A, B, eps, rng)
        Sbc = B @ C.T + asym_error(B, C, eps, rng)
        Sca = C @ A.T + asym_error(C, A, eps, rng)
        Q = whitening_product(Sab, Sbc, Sca, m)
        Q = (Q + Q.T) / 2
        tau_max = max(tau_max, spectral_tau_two_sided(Q - A @ A.T, A))
        check_max = max(check_max, check_whitening(Q, A, m))
    elapsed = time.perf_counter() - start
    ok = tau_max <= 20 * eps and check_max <= 20 * eps and elapsed < 60
    assert record(4, ok, f"tau={tau_max:.3f} check={check_max:.3f} (<={20 * eps:.1f}) "
                         f"time={elapsed:.1f}s (<60s)")


def test_criterion_5_orthogonal_decomposition(record):
    start = time.perf_counter()
    d, r = 10, 4
    clean_hits, noisy_worst = 0, 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        truth = tuple(orthonormal(d, r, rng) for _ in range(3))
        T = cp_tensor(*truth)
        params = DecompParams(target_r=r, seed=seed)
        found = orthogonal_decompose(T, params)
        clean_hits += matched_component_errors(truth, found.factors()).max() <= 1e-4
        noisy = orthogonal_decompose(T + flatten_scaled_noise(d, 0.01, rng), params)
        noisy_worst = max(noisy_worst, matched_component_errors(truth, noisy.factors()).max())
    elapsed = time.perf_counter() - start
    ok = clean_hits >= 19 and noisy_worst <= 0.2 and elapsed < 120
    assert record(5, ok, f"noiseless {clean_hits}/20 (>=19) noisy max={noisy_worst:.3f} (<=0.2) "
                         f"time={elapsed:.1f}s (<120s)")


def population_eta(seed, rho):
    model = desk_model(seed=seed, rho=rho)
    cfg = FitConfig(rho=rho, m=5, nu_u=2.0, seed=seed, pmi_source="population")
    return fit(model, cfg, truth=model.W).per_column_error.eta_max


def test_criterion_6_population_mode(record):
    start = time.perf_counter()
    base = [population_eta(seed, 0.01) for seed in range(5)]
    halved = [population_eta(seed, 0.005) for seed in range(5)]
    ratio = float(np.median(np.divide(base, halved)))
    elapsed = time.perf_counter() - start
    ok = max(base) <= 0.3 and 1.3 <= ratio <= 3 and elapsed < 120
    assert record(6, ok, f"eta_max={max(base):.4f} (<=0.3) halving ratio={ratio:.2f} ([1.3,3]) "
                         f"time={elapsed:.1f}s (<120s)")


def test_criterion_7_sampled_mode(record):
    etas = []
    for seed in range(5):
        model = desk_model(seed=seed)
        batch = sample(model, 2_000_000, seed=100 + seed)
        res = fit(batch, FitConfig(rho=0.01, m=5, nu_u=2.0, seed=seed), truth=model.W)
        etas.append(res.per_column_error.eta_max)
    good = sum(e <= 0.5 for e in etas)
    batch = sample(desk_model(seed=0), 1_000_000, seed=7)
    start = time.perf_counter()
    count_zero_patterns(batch, random_partition(90, 0))
    counting = time.perf_counter() - start
    ok = good >= 4 and counting < 60
    assert record(7, ok, f"eta<=0.5 on {good}/5 (>=4) etas={[round(e, 3) for e in etas]} "
                         f"counting N=1e6 {counting:.1f}s (<60s)")


def test_criterion_8_random_model_diagnostics(record):
    start = time.perf_counter()
    n, m, p = 400, 10, 0.3
    tau = mu = 0.0
    smin = math.inf
    for seed in range(10):
        model = desk_model(seed=seed, n=n, m=m, p=p)
        diag = model_report(model, random_partition(n, seed))
        tau, mu = max(tau, diag.tau_G), max(mu, diag.mu)
        smin = min(smin, diag.sigma_min_F_blocks[0])
    elapsed = time.perf_counter() - start
    ok = tau <= 3 * math.log(n) and mu <= 8 and smin >= 0.2 * math.sqrt(n * p) and elapsed < 120
    assert record(8, ok, f"tau_G={tau:.2f} (<={3 * math.log(n):.2f}) mu={mu:.2f} (<=8) "
                         f"sigma_min={smin:.2f} (>={0.2 * math.sqrt(n * p):.2f}) time={elapsed:.1f}s (<120s)")


def test_criterion_9_determinism(record, tmp_path):
    model_path, samples = tmp_path / "model.json", tmp_path / "s.bin"
    cli.main(["generate", "--n", "90", "--m", "5", "--rho", "0.01", "--seed", "5", "--out", str(model_path)])
    cli.main(["sample", "--model", str(model_path), "--N", "200000", "--seed", "6", "--out", str(samples)])
    outs = []
    for k in range(2):
        w = tmp_path / f"w{k}.json"
        code = cli.main(["fit", "--samples", str(samples), "--model", str(model_path), "--seed", "9",
                         "--out", str(tmp_path / f"r{k}.json"), "--w-out", str(w)])
        assert code == 0
        outs.append(w.read_bytes())
    ok = outs[0] == outs[1] and len(json.loads(outs[0])["W_hat"]) == 90
    assert record(9, ok, f"W_hat JSON byte-identical={outs[0] == outs[1]} ({len(outs[0])} bytes)")
