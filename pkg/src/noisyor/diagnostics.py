"""Checks of the model assumptions and error reporting against a known truth."""
from dataclasses import dataclass, asdict

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidInputError, RankError
from .linalg import spectral_tau, truncated_svd
from .model import derived_matrix


@dataclass
class ModelDiagnostics:
    tau_G: float
    tau_H: float
    tau_L: float
    mu: float
    sigma_min_F_blocks: tuple
    rho_pm: float
    eta_hat: float = None
    eta_median: float = None

    def to_dict(self):
        d = asdict(self)
        d["sigma_min_F_blocks"] = list(self.sigma_min_F_blocks)
        return d


@dataclass
class ColumnError:
    errors: np.ndarray
    permutation: np.ndarray
    eta_max: float
    eta_median: float
    relative: np.ndarray

    def to_dict(self):
        return {"per_column_error": self.errors.tolist(), "permutation": self.permutation.tolist(),
                "relative_error": self.relative.tolist(), "eta_max": self.eta_max,
                "eta_median": self.eta_median}


def incoherence(F):
    """``mu = (n/m) max_i ||U_i||^2`` over rows of the left singular factor."""
    F = np.asarray(F, dtype=float)
    n, m = F.shape
    res = truncated_svd(F, m)
    s = res.singular_values
    if s[0] == 0 or s[-1] <= 1e-12 * s[0]:
        raise RankError(f"F is rank deficient (sigma_{m} = {s[-1]:.3e})", sigma=float(s[-1]))
    row_sq = (res.left_vectors ** 2).sum(axis=1)
    return float(n / m * row_sq.max())


def column_error(W_true, W_hat):
    """Per-column l2 errors after the column matching minimizing total squared error.

    ``permutation[i]`` is the column of ``W_hat`` matched to column ``i`` of
    ``W_true``. Relative errors divide by ``||W_true_i||``.
    """
    W_true = np.asarray(W_true, dtype=float)
    W_hat = np.asarray(W_hat, dtype=float)
    if W_true.shape != W_hat.shape:
        raise InvalidInputError(f"shape mismatch: truth {W_true.shape} vs estimate {W_hat.shape}")
    cost = ((W_true[:, :, None] - W_hat[:, None, :]) ** 2).sum(axis=0)
    rows, perm = linear_sum_assignment(cost)
    errs = np.sqrt(cost[rows, perm])
    norms = np.linalg.norm(W_true, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(norms > 0, errs / np.where(norms > 0, norms, 1), np.where(errs > 0, np.inf, 0.0))
    return ColumnError(errs, perm, float(rel.max()), float(np.median(rel)), rel)


def model_report(model, part):
    """Spectral-boundedness, incoherence and conditioning diagnostics for ``model``."""
    a = part.S_a
    F = derived_matrix(model, 1)
    Fa = F[a]
    taus = []
    for l in (2, 3, 4):
        P = derived_matrix(model, l)[a]
        taus.append(spectral_tau(P @ P.T, Fa))
    smins = tuple(float(np.linalg.svd(F[idx], compute_uv=False)[-1]) for idx in part.blocks)
    p_hat = float(np.count_nonzero(model.W)) / model.W.size
    return ModelDiagnostics(tau_G=taus[0], tau_H=taus[1], tau_L=taus[2], mu=incoherence(F),
                            sigma_min_F_blocks=smins, rho_pm=model.rho * p_hat * model.m)
