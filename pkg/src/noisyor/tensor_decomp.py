"""Randomized orthogonal tensor decomposition and its whitened wrapper.

Each trial contracts the tensor's third mode with a Gaussian vector, takes
the top singular pair ``(u, v)`` of the resulting matrix, and completes the
triple with ``z = T(u, v, .)``. A triple is kept when its trilinear score
``T(u, v, z/|z|)`` clears ``1 - zeta`` and ``u`` is far from every ``u``
already kept.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, PartialResultError


@dataclass(frozen=True)
class DecompParams:
    target_r: int
    delta: float = 0.25
    zeta: float = 0.1
    dedup_dist: float = 0.5
    max_trials: int = None
    trial_const: float = 4.0
    seed: int = 0

    def validate(self):
        if self.target_r < 1:
            raise InvalidInputError(f"target_r must be >= 1, got {self.target_r}")
        if not 0 < self.delta < 1:
            raise InvalidInputError(f"delta must lie in (0, 1), got {self.delta}")
        if not 0 < self.zeta < 1:
            raise InvalidInputError(f"zeta must lie in (0, 1), got {self.zeta}")
        if not 0 < self.dedup_dist <= 1:
            raise InvalidInputError(f"dedup_dist must lie in (0, 1], got {self.dedup_dist}")

    def budget(self, d):
        if self.max_trials is not None:
            return int(self.max_trials)
        return int(math.ceil(self.trial_const * d ** (1 + self.delta) * math.log(max(d, 2))))


@dataclass
class ComponentSet:
    triples: list = field(default_factory=list)
    accept_scores: list = field(default_factory=list)
    trials: int = 0

    def __len__(self):
        return len(self.triples)

    def factors(self):
        """Stacked ``(A, B, C)`` with components as columns."""
        if not self.triples:
            return None
        return tuple(np.column_stack([t[k] for t in self.triples]) for k in range(3))


def _tensor(T):
    T = np.asarray(T, dtype=float)
    if T.ndim != 3:
        raise InvalidInputError(f"expected a 3-tensor, got shape {T.shape}")
    return T


def contract_mode3(T, g):
    """``M_ij = sum_k T_ijk g_k``."""
    T = _tensor(T)
    g = np.asarray(g, dtype=float)
    if g.shape != (T.shape[2],):
        raise InvalidInputError(f"g has shape {g.shape}, expected ({T.shape[2]},)")
    return T @ g


def contract_modes12(T, u, v):
    """``z_k = sum_ij T_ijk u_i v_j``."""
    T = _tensor(T)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != (T.shape[0],) or v.shape != (T.shape[1],):
        raise InvalidInputError(f"u {u.shape} / v {v.shape} do not match tensor {T.shape}")
    return np.einsum("ijk,i,j->k", T, u, v)


def _sign_aligned_dist(u, w):
    return min(np.linalg.norm(u - w), np.linalg.norm(u + w))


def orthogonal_decompose(T, params):
    """Recover ``params.target_r`` near-orthonormal rank-one components of ``T``.

    Trial ``t`` draws its Gaussian from the sub-stream ``(seed, t)``, so the
    result does not depend on how trials might be scheduled.
    """
    params.validate()
    T = _tensor(T)
    if min(T.shape) < params.target_r:
        raise InvalidInputError(f"tensor dims {T.shape} smaller than target_r={params.target_r}")
    found = ComponentSet()
    budget = params.budget(max(T.shape))
    for t in range(budget):
        found.trials = t + 1
        g = np.random.default_rng([params.seed, t]).standard_normal(T.shape[2])
        M = contract_mode3(T, g)
        U, s, Vt = np.linalg.svd(M)
        if s[0] == 0:
            continue
        u, v = U[:, 0], Vt[0]
        z = contract_modes12(T, u, v)
        nz = np.linalg.norm(z)
        if nz == 0:
            continue
        w = z / nz
        score = float(np.einsum("ijk,i,j,k->", T, u, v, w))
        if score < 1 - params.zeta:
            continue
        if any(_sign_aligned_dist(u, prev[0]) < params.dedup_dist for prev in found.triples):
            continue
        found.triples.append((u, v, w))
        found.accept_scores.append(score)
        if len(found) >= params.target_r:
            return found
    raise PartialResultError(
        f"found {len(found)} of {params.target_r} components in {budget} trials", found=found)


def _whiten(T, Ra, Rb, Rc):
    return np.einsum("ia,jb,kc,abc->ijk", Ra, Rb, Rc, T, optimize=True)


def _unwhiten(found, sqrts):
    out = ComponentSet(trials=found.trials, accept_scores=list(found.accept_scores))
    for triple in found.triples:
        back = []
        for S, x in zip(sqrts, triple):
            y = S @ x
            back.append(-y if y.sum() < 0 else y)
        out.triples.append(tuple(back))
    return out


def whitened_decompose(T, white, params):
    """Whiten each mode, decompose, and map components back through ``Q^{1/2}``.

    Each returned vector is sign-flipped so its entries sum to a nonnegative
    value; the true factors are nonnegative.
    """
    T = _tensor(T)
    if white.m != params.target_r:
        raise InvalidInputError(f"whitening rank {white.m} != target_r {params.target_r}")
    Ra, Rb, Rc = white.inv_sqrts
    if T.shape != (Ra.shape[0], Rb.shape[0], Rc.shape[0]):
        raise InvalidInputError(f"tensor {T.shape} does not match whitening dims")
    sqrts = white.sqrts
    try:
        found = orthogonal_decompose(_whiten(T, Ra, Rb, Rc), params)
    except PartialResultError as exc:
        raise PartialResultError(str(exc), found=_unwhiten(exc.found, sqrts)) from None
    return _unwhiten(found, sqrts)
