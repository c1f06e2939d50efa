"""Learning noisy-or networks by decomposing a pointwise mutual information tensor."""
from .diagnostics import column_error, incoherence, model_report
from .errors import (DegenerateModelError, InsufficientDataError, InvalidInputError,
                     NoisyOrError, NumericError, PartialResultError, RankError)
from .model import (NoisyOrModel, RandomModelParams, SampleBatch, brute_force_pmi,
                    generate_random_model, population_pmi, sample)
from .pipeline import FitConfig, RecoveryResult, assemble_W, fit
from .pmi import Partition, PmiBlocks, count_zero_patterns, pmi_from_counts, random_partition
from .tensor_decomp import DecompParams, orthogonal_decompose, whitened_decompose
from .whitening import WhiteningSet, check_whitening, whitening_matrices

__version__ = "0.1.0"
