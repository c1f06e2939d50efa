"""Partitioning, zero-pattern counting and plug-in PMI estimation.

Only cross-block entries are ever formed: pairs in S_a x S_b, S_b x S_c,
S_c x S_a and triples in S_a x S_b x S_c. Diagonal-contaminated entries
therefore never enter the computation.

Counting works on the absence indicator ``z = 1 - s``. Each symptom column
is packed into 64-bit words over the samples, so a pair count is an AND plus a
population count, and a triple count is the popcount of ``(z_i & z_j) & z_k``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, InvalidInputError

# samples processed per packing chunk; bounds peak memory of the bool expansion
_CHUNK = 1 << 18


@dataclass(frozen=True)
class Partition:
    S_a: np.ndarray
    S_b: np.ndarray
    S_c: np.ndarray
    seed: int = 0

    @property
    def n(self):
        return len(self.S_a) + len(self.S_b) + len(self.S_c)

    @property
    def blocks(self):
        return self.S_a, self.S_b, self.S_c

    def validate(self, n=None):
        allidx = np.sort(np.concatenate(self.blocks))
        n = self.n if n is None else n
        if not np.array_equal(allidx, np.arange(n)):
            raise InvalidInputError("partition blocks must be disjoint and cover range(n)")
        sizes = [len(b) for b in self.blocks]
        if max(sizes) - min(sizes) > 1:
            raise InvalidInputError(f"block sizes {sizes} are not an equipartition")

    def to_dict(self):
        return {"S_a": self.S_a.tolist(), "S_b": self.S_b.tolist(), "S_c": self.S_c.tolist(),
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d):
        return cls(*(np.asarray(d[k], dtype=np.int64) for k in ("S_a", "S_b", "S_c")),
                   seed=int(d.get("seed", 0)))


def random_partition(n, seed):
    """Uniformly random equipartition of ``range(n)``; blocks are returned sorted."""
    if n < 3:
        raise InvalidInputError(f"need n >= 3 to partition, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    q, r = divmod(n, 3)
    cuts = np.cumsum([q + (i < r) for i in range(3)])
    a, b, c = np.split(perm, cuts[:2])
    return Partition(np.sort(a), np.sort(b), np.sort(c), seed=int(seed))


@dataclass(frozen=True)
class ZeroCounts:
    N: int
    part: Partition
    singles: np.ndarray
    pairs_ab: np.ndarray
    pairs_bc: np.ndarray
    pairs_ca: np.ndarray
    triples_abc: np.ndarray

    def check(self):
        """Raise if any count exceeds N or a triple exceeds one of its pair counts."""
        arrays = (self.singles, self.pairs_ab, self.pairs_bc, self.pairs_ca, self.triples_abc)
        if any(int(x.max(initial=0)) > self.N or int(x.min(initial=0)) < 0 for x in arrays):
            raise InvalidInputError("count outside [0, N]")
        t = self.triples_abc
        if (np.any(t > self.pairs_ab[:, :, None]) or np.any(t > self.pairs_bc[None, :, :])
                or np.any(t > self.pairs_ca.T[:, None, :])):
            raise InvalidInputError("triple count exceeds a pair count")


@dataclass(frozen=True)
class PmiBlocks:
    part: Partition
    pmi_ab: np.ndarray
    pmi_bc: np.ndarray
    pmi_ca: np.ndarray
    pmit: np.ndarray
    source: str = "empirical"

    def max_abs(self):
        return max(float(np.abs(x).max(initial=0.0))
                   for x in (self.pmi_ab, self.pmi_bc, self.pmi_ca, self.pmit))


def pack_zero_columns(batch, chunk=_CHUNK):
    """Per-symptom bit columns of ``z = 1 - s``, shape ``(n, ceil(N/64))`` uint64.

    Padding bits past ``N`` are zero, so they never contribute to a count.
    """
    n, N = batch.n, batch.N
    nwords = -(-N // 64)
    cols = np.zeros((n, nwords * 8), dtype=np.uint8)
    for start in range(0, N, chunk):
        stop = min(N, start + chunk)
        z = ~batch.to_bool(start, stop)
        # chunk is a multiple of 64, so every chunk starts on a word boundary
        packed = np.packbits(z.T, axis=1, bitorder="little")
        cols[:, start // 8: start // 8 + packed.shape[1]] = packed
    return cols.view(np.uint64)


def _popcount_rows(X):
    return np.bitwise_count(X).sum(axis=-1, dtype=np.int64)


def count_zero_patterns(batch, part):
    """Exact single, cross-block pair and S_a x S_b x S_c triple counts of ``z = 1``."""
    if batch.n != part.n:
        raise InvalidInputError(f"batch has n={batch.n} but partition covers n={part.n}")
    cols = pack_zero_columns(batch)
    A, B, C = (cols[idx] for idx in part.blocks)
    singles = _popcount_rows(cols)

    def pairs(X, Y):
        return np.stack([_popcount_rows(x & Y) for x in X]) if len(X) else np.zeros((0, len(Y)), np.int64)

    triples = np.empty((len(A), len(B), len(C)), dtype=np.int64)
    for i, a in enumerate(A):
        AB = a & B
        for j in range(len(B)):
            triples[i, j] = _popcount_rows(AB[j] & C)
    return ZeroCounts(N=batch.N, part=part, singles=singles, pairs_ab=pairs(A, B),
                      pairs_bc=pairs(B, C), pairs_ca=pairs(C, A), triples_abc=triples)


def _require_positive(arr, label, index_of):
    if np.any(arr <= 0):
        pos = tuple(int(x) for x in np.argwhere(arr <= 0)[0])
        idx = index_of(pos)
        raise InsufficientDataError(f"zero {label} count at symptom indices {idx}; raise N", idx)


def pmi_from_counts(counts):
    """Plug-in PMI blocks and PMI tensor block from zero-pattern counts."""
    part = counts.part
    a, b, c = part.blocks
    N = float(counts.N)
    s = counts.singles.astype(float)
    _require_positive(s, "single", lambda p: (p[0],))
    for arr, (r, q), label in ((counts.pairs_ab, (a, b), "pair"), (counts.pairs_bc, (b, c), "pair"),
                               (counts.pairs_ca, (c, a), "pair")):
        _require_positive(arr, label, lambda p, r=r, q=q: (int(r[p[0]]), int(q[p[1]])))
    _require_positive(counts.triples_abc, "triple", lambda p: (int(a[p[0]]), int(b[p[1]]), int(c[p[2]])))

    ls = np.log(s / N)
    lab = np.log(counts.pairs_ab / N)
    lbc = np.log(counts.pairs_bc / N)
    lca = np.log(counts.pairs_ca / N)
    lt = np.log(counts.triples_abc / N)
    return assemble_blocks(part, ls, lab, lbc, lca, lt, source="empirical")


def assemble_blocks(part, log_single, log_ab, log_bc, log_ca, log_abc, source):
    """PMI blocks from log-probabilities; shared by the plug-in and exact paths."""
    a, b, c = part.blocks
    la, lb, lc = log_single[a], log_single[b], log_single[c]
    pmi_ab = log_ab - la[:, None] - lb[None, :]
    pmi_bc = log_bc - lb[:, None] - lc[None, :]
    pmi_ca = log_ca - lc[:, None] - la[None, :]
    pmit = (log_ab[:, :, None] + log_bc[None, :, :] + log_ca.T[:, None, :] - log_abc
            - la[:, None, None] - lb[None, :, None] - lc[None, None, :])
    return PmiBlocks(part, pmi_ab, pmi_bc, pmi_ca, pmit, source=source)
