"""Whitening matrices from the three cross-block PMI matrices.

``Q_a = c^{-1/3} PMI_ab [PMI_bc^T]_r^+ PMI_ca`` (and cyclically), where
``c = rho / (1 - rho)`` and ``[X]_r^+`` is the pseudo-inverse of the best
rank-``r`` approximation. With ``PMI_ab ~ c F_a F_b^T`` this estimates
``c^{2/3} F_a F_a^T``, the second moment of the tensor components
``c^{1/3} F_a``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .linalg import psd_inv_sqrt, psd_sqrt, rank_m_pinv


@dataclass(frozen=True)
class WhiteningSet:
    Q_a: np.ndarray
    Q_b: np.ndarray
    Q_c: np.ndarray
    m: int

    @property
    def Qs(self):
        return self.Q_a, self.Q_b, self.Q_c

    @property
    def inv_sqrts(self):
        return tuple(psd_inv_sqrt(Q, self.m) for Q in self.Qs)

    @property
    def sqrts(self):
        return tuple(psd_sqrt(Q, self.m) for Q in self.Qs)

    @property
    def inv_sqrt_a(self):
        return self.inv_sqrts[0]

    @property
    def inv_sqrt_b(self):
        return self.inv_sqrts[1]

    @property
    def inv_sqrt_c(self):
        return self.inv_sqrts[2]

    @classmethod
    def from_matrices(cls, Q_a, Q_b, Q_c, m):
        """Symmetrize and check that each has ``m`` positive top eigenvalues."""
        Qs = [(np.asarray(Q, float) + np.asarray(Q, float).T) / 2 for Q in (Q_a, Q_b, Q_c)]
        for Q in Qs:
            psd_inv_sqrt(Q, m)
        return cls(*Qs, m=m)


def rho_scale(rho):
    return rho / (1 - rho)


def whitening_product(S_ab, S_bc, S_ca, r):
    """``S_ab [S_bc^T]_r^+ S_ca`` without any scaling."""
    return S_ab @ rank_m_pinv(S_bc.T, r) @ S_ca


def whitening_matrices(blocks, rho, m, trunc_rank=None):
    """Whitening matrices for the three blocks of ``blocks``.

    ``trunc_rank`` sets the rank of the middle pseudo-inverse (default ``m``).
    """
    if not 0 < rho < 1:
        raise InvalidInputError(f"rho must lie in (0, 1), got {rho}")
    r = m if trunc_rank is None else trunc_rank
    dims = [len(s) for s in blocks.part.blocks]
    if m > min(dims) or r > min(dims):
        raise InvalidInputError(f"rank {max(m, r)} exceeds smallest block size {min(dims)}")
    scale = rho_scale(rho) ** (-1 / 3)
    ab, bc, ca = blocks.pmi_ab, blocks.pmi_bc, blocks.pmi_ca
    Q_a = scale * whitening_product(ab, bc, ca, r)
    Q_b = scale * whitening_product(bc, ca, ab, r)
    Q_c = scale * whitening_product(ca, ab, bc, r)
    return WhiteningSet.from_matrices(Q_a, Q_b, Q_c, m)


def check_whitening(Q, A, m):
    """``||(Q^{-1/2} A)^T (Q^{-1/2} A) - Id_m||``: 0 for an exact whitening matrix."""
    Q = np.asarray(Q, dtype=float)
    A = np.asarray(A, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or A.ndim != 2 or A.shape[0] != Q.shape[0]:
        raise InvalidInputError(f"Q {Q.shape} and A {A.shape} do not match")
    X = psd_inv_sqrt((Q + Q.T) / 2, m) @ A
    return float(np.linalg.norm(X.T @ X - np.eye(A.shape[1]), 2))
