"""End-to-end recovery of the weight matrix from samples or from exact PMI.

Stages: partition, PMI blocks, whitening, whitened decomposition of the PMI
tensor block, and reassembly of ``W_hat``.
"""
import time
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import DegenerateModelError, InvalidInputError, NoisyOrError
from .model import NoisyOrModel, SampleBatch, population_pmi
from .pmi import count_zero_patterns, pmi_from_counts, random_partition
from .tensor_decomp import DecompParams, whitened_decompose
from .whitening import rho_scale, whitening_matrices

# rho*p*m above this triggers a warning (not a refusal)
RHO_PM_WARN = 0.1


@dataclass(frozen=True)
class FitConfig:
    rho: float
    m: int
    nu_u: float
    decomp: DecompParams = None
    pmi_source: str = "samples"
    seed: int = 0
    trunc_rank: int = None

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise InvalidInputError(f"rho must lie in (0, 1), got {self.rho}")
        if self.m < 1:
            raise InvalidInputError(f"m must be >= 1, got {self.m}")
        if self.nu_u <= 0:
            raise InvalidInputError(f"nu_u must be positive, got {self.nu_u}")
        if self.pmi_source not in ("samples", "population"):
            raise InvalidInputError(f"pmi_source must be 'samples' or 'population', got {self.pmi_source!r}")
        if self.decomp is None:
            object.__setattr__(self, "decomp", DecompParams(target_r=self.m, seed=self.seed))
        elif self.decomp.target_r != self.m:
            raise InvalidInputError(f"decomp.target_r={self.decomp.target_r} != m={self.m}")

    def to_dict(self):
        d = asdict(self)
        d["decomp"] = asdict(self.decomp)
        return d


@dataclass
class RecoveryResult:
    W_hat: np.ndarray
    components: object
    partition: object
    timings_ms: dict = field(default_factory=dict)
    per_column_error: object = None
    blocks: object = None
    whitening: object = None


@contextmanager
def _stage(name, timings):
    t0 = time.perf_counter()
    try:
        yield
    except NoisyOrError as exc:
        if exc.stage is None:
            exc.stage = name
        raise
    finally:
        timings[name] = (time.perf_counter() - t0) * 1e3


def assemble_W(components, part, rho, nu_u):
    """Turn recovered ``(a_i, b_i, c_i)`` into the columns of ``W_hat``.

    ``Y_i = 1 - ((1 - rho)/rho)^{1/3} [a_i; b_i; c_i]`` scattered back to the
    original symptom order estimates ``exp(-W_i)``; ``W_hat = -log Y`` with
    ``Y <= exp(-nu_u)`` mapped to ``nu_u`` and ``Y > 1`` mapped to 0.
    """
    n = part.n
    scale = rho_scale(rho) ** (-1 / 3)
    cols = []
    for triple in components.triples:
        if [len(x) for x in triple] != [len(s) for s in part.blocks]:
            raise InvalidInputError("component dimensions do not match partition blocks")
        Y = np.empty(n)
        for idx, x in zip(part.blocks, triple):
            Y[idx] = 1 - scale * np.asarray(x)
        cols.append(Y)
    Y = np.column_stack(cols) if cols else np.zeros((n, 0))
    return yhat_to_weights(Y, nu_u)


def yhat_to_weights(Y, nu_u):
    Y = np.asarray(Y, dtype=float)
    out = np.full(Y.shape, float(nu_u))
    ok = Y > np.exp(-nu_u)
    out[ok] = -np.log(Y[ok])
    return np.clip(out, 0.0, nu_u)


def fit(data, cfg, truth=None):
    """Recover ``W_hat`` from a :class:`SampleBatch` or, in testing mode, a model.

    With ``cfg.pmi_source == "population"`` the input must be a
    :class:`NoisyOrModel` and exact PMI values replace the plug-in estimates.
    ``truth`` (a weight matrix) attaches a column-error report.
    """
    timings = {}
    if cfg.pmi_source == "population":
        if not isinstance(data, NoisyOrModel):
            raise InvalidInputError("population mode needs a NoisyOrModel")
        n = data.n
    else:
        if not isinstance(data, SampleBatch):
            raise InvalidInputError("samples mode needs a SampleBatch")
        n = data.n
    if isinstance(data, NoisyOrModel) and data.params is not None:
        rho_pm = cfg.rho * data.params.p * cfg.m
        if rho_pm > RHO_PM_WARN:
            warnings.warn(f"rho*p*m = {rho_pm:.3g} exceeds {RHO_PM_WARN}; recovery may be poor")

    with _stage("partition", timings):
        part = random_partition(n, cfg.seed)
    with _stage("pmi", timings):
        if cfg.pmi_source == "population":
            blocks = population_pmi(data, part)
        else:
            blocks = pmi_from_counts(count_zero_patterns(data, part))
        if blocks.max_abs() == 0:
            raise DegenerateModelError("all PMI entries are zero; symptoms carry no signal")
    with _stage("whitening", timings):
        white = whitening_matrices(blocks, cfg.rho, cfg.m, cfg.trunc_rank)
    with _stage("decompose", timings):
        comps = whitened_decompose(blocks.pmit, white, cfg.decomp)
    with _stage("assemble", timings):
        W_hat = assemble_W(comps, part, cfg.rho, cfg.nu_u)

    result = RecoveryResult(W_hat, comps, part, timings, blocks=blocks, whitening=white)
    if truth is not None:
        from .diagnostics import column_error
        result.per_column_error = column_error(truth, W_hat)
    return result
