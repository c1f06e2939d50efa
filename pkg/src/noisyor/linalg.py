"""Dense linear algebra used by every spectral step.

All routines take and return plain numpy arrays. The rank ``m`` is always
supplied by the caller; nothing here guesses a numerical rank.
"""
from dataclasses import dataclass

import numpy as np

from .config import TOL
from .errors import InvalidInputError, NumericError, RankError

SPLITS = ("{1}{2,3}", "{2}{1,3}", "{1,2}{3}")


@dataclass(frozen=True)
class SvdResult:
    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray

    def reconstruct(self):
        return (self.left_vectors * self.singular_values) @ self.right_vectors.T


def _as_matrix(M, name="M"):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or min(M.shape) < 1:
        raise InvalidInputError(f"{name} must be a non-empty 2-d array, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return M


def _svd(M):
    try:
        return np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD did not converge: {exc}") from exc


def truncated_svd(M, m):
    """Top-``m`` singular triplets of ``M``."""
    M = _as_matrix(M)
    if not 1 <= m <= min(M.shape):
        raise InvalidInputError(f"rank m={m} outside [1, {min(M.shape)}]")
    U, s, Vt = _svd(M)
    return SvdResult(U[:, :m], s[:m], Vt[:m].T)


def rank_m_pinv(M, m):
    """Pseudo-inverse of the best rank-``m`` approximation of ``M``."""
    res = truncated_svd(M, m)
    s = res.singular_values
    if s[0] == 0 or s[m - 1] <= TOL.rank_rel * s[0]:
        raise RankError(
            f"sigma_{m} = {s[m - 1]:.3e} is below {TOL.rank_rel:g} * sigma_1 = {s[0]:.3e}",
            sigma=float(s[m - 1]),
        )
    return (res.right_vectors / s) @ res.left_vectors.T


def _check_symmetric(Q, name="Q"):
    Q = _as_matrix(Q, name)
    if Q.shape[0] != Q.shape[1]:
        raise InvalidInputError(f"{name} must be square, got {Q.shape}")
    scale = max(1.0, float(np.abs(Q).max()))
    if np.abs(Q - Q.T).max() > TOL.symmetric * scale:
        raise InvalidInputError(f"{name} is not symmetric")
    return (Q + Q.T) / 2


def top_eigen(Q, m):
    """Top-``m`` eigenpairs of a symmetric matrix, eigenvalues descending."""
    Q = _check_symmetric(Q)
    if not 1 <= m <= Q.shape[0]:
        raise InvalidInputError(f"rank m={m} outside [1, {Q.shape[0]}]")
    try:
        lam, V = np.linalg.eigh(Q)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition failed: {exc}") from exc
    lam, V = lam[::-1][:m], V[:, ::-1][:, :m]
    if lam[m - 1] <= 0:
        raise RankError(f"eigenvalue {m} is {lam[m - 1]:.3e}, not positive", sigma=float(lam[m - 1]))
    return lam, V


def psd_inv_sqrt(Q, m):
    """``(Q^+)^{1/2}`` restricted to the top-``m`` eigenspace of ``Q``."""
    lam, V = top_eigen(Q, m)
    return (V / np.sqrt(lam)) @ V.T


def psd_sqrt(Q, m):
    """``Q^{1/2}`` restricted to the top-``m`` eigenspace; the partner of :func:`psd_inv_sqrt`."""
    lam, V = top_eigen(Q, m)
    return (V * np.sqrt(lam)) @ V.T


def _check_orthonormal(X, name):
    X = _as_matrix(X, name)
    if np.abs(X.T @ X - np.eye(X.shape[1])).max() > TOL.orthonormal:
        raise InvalidInputError(f"{name} does not have orthonormal columns")
    return X


def projector_distance(basis1, basis2):
    """Spectral norm of the difference of the orthogonal projectors onto two spans."""
    X = _check_orthonormal(basis1, "basis1")
    Y = _check_orthonormal(basis2, "basis2")
    if X.shape[0] != Y.shape[0]:
        raise InvalidInputError("bases live in different ambient dimensions")
    return float(np.linalg.norm(X @ X.T - Y @ Y.T, 2))


def unfold(T, split):
    """Matrix flattening of a 3-tensor; ``split`` names the row modes first."""
    T = np.asarray(T, dtype=float)
    if T.ndim != 3:
        raise InvalidInputError(f"expected a 3-tensor, got {T.ndim} dims")
    d1, d2, d3 = T.shape
    if split == "{1}{2,3}":
        return T.reshape(d1, d2 * d3)
    if split == "{2}{1,3}":
        return T.transpose(1, 0, 2).reshape(d2, d1 * d3)
    if split == "{1,2}{3}":
        return T.reshape(d1 * d2, d3)
    raise InvalidInputError(f"unknown split {split!r}; expected one of {SPLITS}")


def flatten_norm(T, split):
    """Largest singular value of the ``split`` flattening of ``T``."""
    M = unfold(T, split)
    if not M.size or not np.any(M):
        return 0.0
    return float(np.linalg.norm(M, 2))


def _bounding_matrix(S):
    S = _as_matrix(S, "S")
    m = S.shape[1]
    s = _svd(S)[1]
    sig_m = s[m - 1] ** 2 if len(s) >= m else 0.0
    if sig_m <= TOL.rank_rel * max(s[0] ** 2, np.finfo(float).tiny):
        raise RankError(f"sigma_m(SS^T) = {sig_m:.3e} is not positive", sigma=float(sig_m))
    return S @ S.T + sig_m * np.eye(S.shape[0])


def spectral_tau(E, S):
    """Smallest ``tau >= 0`` with ``E <= tau (SS^T + sigma_m(SS^T) Id)`` in Loewner order."""
    E = _check_symmetric(E, "E")
    M = _bounding_matrix(S)
    if E.shape != M.shape:
        raise InvalidInputError(f"E is {E.shape} but S has {M.shape[0]} rows")
    lam, V = np.linalg.eigh(M)
    R = (V / np.sqrt(lam)) @ V.T
    X = R @ E @ R
    top = np.linalg.eigvalsh((X + X.T) / 2)[-1]
    return max(float(top), 0.0)


def spectral_tau_two_sided(E, S):
    """``max(tau(E), tau(-E))``: bounds ``E`` from both sides."""
    return max(spectral_tau(E, S), spectral_tau(-np.asarray(E, dtype=float), S))


def _full_rank_pinv(X, name):
    U, s, Vt = _svd(X)
    if s[-1] <= TOL.rank_rel * s[0]:
        raise RankError(f"{name} is rank deficient (sigma_min = {s[-1]:.3e})", sigma=float(s[-1]))
    return (Vt.T / s) @ U.T, U, float(s[-1])


def asym_parts(E, B, C):
    """Split ``E`` against the column spans ``K`` of ``B`` and ``H`` of ``C``.

    Returns ``(D1, D2, D3, D4, smin_B, smin_C)`` with
    ``E = B D1 C^T + B D2^T + D3 C^T + D4``.
    """
    E = _as_matrix(E, "E")
    B = _as_matrix(B, "B")
    C = _as_matrix(C, "C")
    if E.shape != (B.shape[0], C.shape[0]):
        raise InvalidInputError(f"E is {E.shape}, expected {(B.shape[0], C.shape[0])}")
    Bp, UB, sB = _full_rank_pinv(B, "B")
    Cp, UC, sC = _full_rank_pinv(C, "C")
    K_perp = np.eye(B.shape[0]) - UB @ UB.T
    H_perp = np.eye(C.shape[0]) - UC @ UC.T
    D1 = Bp @ E @ Cp.T
    D2 = (Bp @ E @ H_perp).T
    D3 = K_perp @ E @ Cp.T
    D4 = K_perp @ E @ H_perp
    return D1, D2, D3, D4, sB, sC


def asym_spectral_eps(E, B, C):
    """Smallest ``eps`` for which ``E`` is eps-spectrally bounded by ``(B, C)``."""
    D1, D2, D3, D4, sB, sC = asym_parts(E, B, C)
    nrm = lambda X: float(np.linalg.norm(X, 2)) if X.size else 0.0
    return max(nrm(D1), nrm(D2) / sC, nrm(D3) / sB, nrm(D4) / (sB * sC))
