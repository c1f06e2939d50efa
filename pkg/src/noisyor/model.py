"""Ground-truth noisy-or model: generation, sampling and exact moment oracles.

A sample draws latent diseases ``d_j ~ Ber(rho)`` and then, independently
per symptom, ``s_i = 0`` with probability ``exp(-<W^i, d>)``.
"""
import functools
import itertools
import math
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import DegenerateModelError, InvalidInputError
from .pmi import Partition, PmiBlocks, assemble_blocks

# exhaustive enumeration over {0,1}^m is refused above this
MAX_ENUM_M = 20
# samples drawn per independent random sub-stream
SAMPLE_CHUNK = 1 << 16


@dataclass(frozen=True)
class RandomModelParams:
    n: int
    m: int
    p: float = 0.3
    rho: float = 0.01
    nu_l: float = 0.5
    nu_u: float = 2.0
    w_lo: float = 0.5
    seed: int = 0

    def validate(self):
        if self.n < 1 or self.m < 1:
            raise InvalidInputError(f"n and m must be positive (n={self.n}, m={self.m})")
        if not 0 <= self.p <= 1:
            raise InvalidInputError(f"p must lie in [0, 1], got {self.p}")
        if not 0 < self.rho < 1:
            raise InvalidInputError(f"rho must lie in (0, 1), got {self.rho}")
        if not 0 < self.w_lo <= self.nu_u:
            raise InvalidInputError(f"need 0 < w_lo <= nu_u, got w_lo={self.w_lo}, nu_u={self.nu_u}")
        if not 0 < self.nu_l < 1:
            raise InvalidInputError(f"nu_l must lie in (0, 1), got {self.nu_l}")
        if expected_exp_neg_sq(self.w_lo, self.nu_u) > 1 - self.nu_l:
            raise InvalidInputError(
                f"weights uniform on [{self.w_lo}, {self.nu_u}] violate "
                f"E[exp(-w^2)] <= 1 - nu_l = {1 - self.nu_l}")
        if self.p > 1 / 3:
            warnings.warn(f"p={self.p} exceeds 1/3; recovery guarantees assume p <= 1/3")
        if self.rho * self.p * self.m >= 1:
            warnings.warn(f"rho*p*m = {self.rho * self.p * self.m:.3g} >= 1")


def expected_exp_neg_sq(lo, hi):
    """``E[exp(-w^2)]`` for ``w`` uniform on ``[lo, hi]`` (point mass when equal)."""
    if hi == lo:
        return math.exp(-lo * lo)
    return math.sqrt(math.pi) / 2 * (math.erf(hi) - math.erf(lo)) / (hi - lo)


@dataclass(frozen=True)
class NoisyOrModel:
    W: np.ndarray
    rho: float
    nu_u: float
    nu_l: float = 0.5
    params: RandomModelParams = field(default=None, compare=False)

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        if W.ndim != 2:
            raise InvalidInputError(f"W must be a matrix, got shape {W.shape}")
        if np.any(W < 0) or np.any(W > self.nu_u) or not np.all(np.isfinite(W)):
            raise InvalidInputError("W entries must lie in [0, nu_u]")
        if not 0 < self.rho < 1:
            raise InvalidInputError(f"rho must lie in (0, 1), got {self.rho}")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @property
    def n(self):
        return self.W.shape[0]

    @property
    def m(self):
        return self.W.shape[1]

    @property
    def F(self):
        return derived_matrix(self, 1)

    @property
    def G(self):
        return derived_matrix(self, 2)

    @property
    def H(self):
        return derived_matrix(self, 3)

    @property
    def L(self):
        return derived_matrix(self, 4)

    def nonzero_exp_neg_sq(self):
        """Empirical ``E[exp(-W_ij^2)]`` over nonzero weights (nan if none)."""
        w = self.W[self.W > 0]
        return float(np.mean(np.exp(-w ** 2))) if w.size else float("nan")

    def to_dict(self):
        return {
            "n": self.n, "m": self.m, "rho": self.rho, "nu_u": self.nu_u, "nu_l": self.nu_l,
            "W": self.W.tolist(),
            "params": asdict(self.params) if self.params is not None else None,
            "seed": self.params.seed if self.params is not None else None,
        }

    @classmethod
    def from_dict(cls, d):
        W = np.asarray(d["W"], dtype=float).reshape(int(d["n"]), int(d["m"]))
        params = RandomModelParams(**d["params"]) if d.get("params") else None
        return cls(W, rho=float(d["rho"]), nu_u=float(d["nu_u"]), nu_l=float(d["nu_l"]), params=params)


def generate_random_model(params):
    """Each ``W_ij`` is 0 w.p. ``1 - p``, else uniform on ``[w_lo, nu_u]``."""
    params.validate()
    rng = np.random.default_rng(params.seed)
    mask = rng.random((params.n, params.m)) < params.p
    vals = rng.uniform(params.w_lo, params.nu_u, size=(params.n, params.m))
    W = np.where(mask, vals, 0.0)
    return NoisyOrModel(W, rho=params.rho, nu_u=params.nu_u, nu_l=params.nu_l, params=params)


def derived_matrix(model, l):
    """Entrywise ``1 - exp(-l W)``: F for l=1, G for 2, H for 3, L for 4."""
    if l < 1:
        raise InvalidInputError(f"l must be >= 1, got {l}")
    W = model.W if isinstance(model, NoisyOrModel) else np.asarray(model, dtype=float)
    return -np.expm1(-l * W)


@dataclass(frozen=True)
class SampleBatch:
    """``N`` binary symptom vectors, bit-packed into little-endian 64-bit words per row."""
    n: int
    N: int
    bits: np.ndarray

    @property
    def words_per_row(self):
        return -(-self.n // 64)

    def to_bool(self, start=0, stop=None):
        """Rows ``start:stop`` unpacked to an ``(rows, n)`` bool array of ``s``."""
        rows = self.bits[start:stop]
        raw = np.unpackbits(rows.astype("<u8").view(np.uint8), axis=1, bitorder="little")
        return raw[:, : self.n].astype(bool)

    @classmethod
    def from_bool(cls, s):
        s = np.asarray(s, dtype=bool)
        N, n = s.shape
        if N < 1:
            raise InvalidInputError("a sample batch needs at least one row")
        wpr = -(-n // 64)
        padded = np.zeros((N, wpr * 64), dtype=bool)
        padded[:, :n] = s
        packed = np.packbits(padded, axis=1, bitorder="little")
        return cls(n=n, N=N, bits=packed.view("<u8").astype(np.uint64))


def sample(model, N, seed):
    """Draw ``N`` samples; chunk ``k`` of ``SAMPLE_CHUNK`` rows uses sub-stream ``(seed, k)``."""
    if N < 1:
        raise InvalidInputError(f"N must be >= 1, got {N}")
    W = model.W
    wpr = -(-model.n // 64)
    bits = np.empty((N, wpr), dtype=np.uint64)
    for k, start in enumerate(range(0, N, SAMPLE_CHUNK)):
        rows = min(N, start + SAMPLE_CHUNK) - start
        rng = np.random.default_rng([seed, k])
        # full-size draws keep a prefix of the batch independent of N
        d = rng.random((SAMPLE_CHUNK, model.m))[:rows] < model.rho
        u = rng.random((SAMPLE_CHUNK, model.n))[:rows]
        s = u >= np.exp(-(d @ W.T))
        bits[start:start + rows] = SampleBatch.from_bool(s).bits
    return SampleBatch(n=model.n, N=N, bits=bits)


def _check_idx(model, idx):
    idx = tuple(int(i) for i in idx)
    if not 1 <= len(idx) <= 3 or len(set(idx)) != len(idx):
        raise InvalidInputError(f"need 1-3 distinct indices, got {idx}")
    if any(i < 0 or i >= model.n for i in idx):
        raise InvalidInputError(f"indices {idx} outside [0, {model.n})")
    return idx


def exact_zero_moment(model, idx):
    """``Pr[s_i = 0 for all i in idx] = prod_k (1 - rho (1 - exp(-sum_i W_ik)))``."""
    idx = _check_idx(model, idx)
    w = model.W[list(idx)].sum(axis=0)
    return float(np.prod(1 - model.rho * -np.expm1(-w)))


def brute_force_zero_moment(model, idx):
    """Same probability by summing over all ``2^m`` disease patterns."""
    idx = _check_idx(model, idx)
    if model.m > MAX_ENUM_M:
        raise InvalidInputError(f"enumeration limited to m <= {MAX_ENUM_M}, got m={model.m}")
    w = model.W[list(idx)].sum(axis=0)
    D = _all_patterns(model.m)
    k = D.sum(axis=1)
    prior = model.rho ** k * (1 - model.rho) ** (model.m - k)
    return float(prior @ np.exp(-(D @ w)))


@functools.lru_cache(maxsize=4)
def _all_patterns(m):
    """Every disease vector in {0,1}^m as rows (read-only, cached)."""
    D = np.array(list(itertools.product((0, 1), repeat=m)), dtype=float).reshape(-1, m)
    D.setflags(write=False)
    return D


def population_pmi(model, part):
    """Exact cross-block PMI blocks and PMI tensor block of ``z = 1 - s``."""
    part.validate(model.n)
    W, rho = model.W, model.rho
    a, b, c = part.blocks

    def log_moment(wsum):
        # wsum: (..., m) summed weights of the index set
        return np.log1p(-rho * -np.expm1(-wsum)).sum(axis=-1)

    log_single = log_moment(W)
    Wa, Wb, Wc = W[a], W[b], W[c]
    log_ab = log_moment(Wa[:, None, :] + Wb[None, :, :])
    log_bc = log_moment(Wb[:, None, :] + Wc[None, :, :])
    log_ca = log_moment(Wc[:, None, :] + Wa[None, :, :])
    log_abc = log_moment(Wa[:, None, None, :] + Wb[None, :, None, :] + Wc[None, None, :, :])
    for arr in (log_single, log_ab, log_bc, log_ca, log_abc):
        if np.any(np.isneginf(arr)) or np.any(np.isnan(arr)):
            raise DegenerateModelError("a zero-pattern probability is 0; PMI undefined")
    return assemble_blocks(part, log_single, log_ab, log_bc, log_ca, log_abc, source="population")


def brute_force_pmi(model, part):
    """Enumeration oracle for :func:`population_pmi` (small ``m`` and ``n`` only)."""
    a, b, c = part.blocks
    lm = lambda *idx: math.log(brute_force_zero_moment(model, idx))
    ls = np.array([lm(i) for i in range(model.n)])
    lab = np.array([[lm(i, j) for j in b] for i in a])
    lbc = np.array([[lm(i, j) for j in c] for i in b])
    lca = np.array([[lm(i, j) for j in a] for i in c])
    labc = np.array([[[lm(i, j, k) for k in c] for j in b] for i in a])
    return assemble_blocks(part, ls, lab, lbc, lca, labc, source="population")


def taylor_pmit(model, part, L):
    """Series expansion of the PMI tensor block truncated after ``L`` terms.

    Term ``l`` is ``(-1)^{l+1} (c^l / l) sum_k P_l[a,k] x P_l[b,k] x P_l[c,k]`` with
    ``c = rho / (1 - rho)`` and ``P_l = 1 - exp(-l W)``.
    """
    c_rho = model.rho / (1 - model.rho)
    a, b, cc = part.blocks
    out = np.zeros((len(a), len(b), len(cc)))
    for l in range(1, L + 1):
        P = derived_matrix(model, l)
        coef = (-1) ** (l + 1) * c_rho ** l / l
        out += coef * np.einsum("ik,jk,lk->ijl", P[a], P[b], P[cc])
    return out
