"""Numeric tolerances used across the package, kept in one place."""
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    orthonormal: float = 1e-8
    symmetric: float = 1e-8
    rank_rel: float = 1e-12
    psd_slack: float = 1e-6


TOL = Tolerances()
