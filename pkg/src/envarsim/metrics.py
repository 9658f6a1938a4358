"""State and distribution overlap measures.

Fidelity is the Uhlmann-Jozsa overlap {Tr[(sqrt(rho) sigma sqrt(rho))^(1/2)]}^2;
the Bhattacharyya coefficient sum_i sqrt(p_i q_i) compares the normalized
36-outcome count distributions directly, with no quantum assumptions.
Count distributions are normalized by the grand total over all 36 entries,
so each of the 9 settings carries weight 1/9.
"""

from __future__ import annotations

import numpy as np

from .linalg import eig_hermitian, psd_sqrt, validate_density_matrix
from .measurement import CountRecord

__all__ = ["fidelity", "bhattacharyya", "normalize_counts", "validate_distribution"]


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann-Jozsa fidelity between two density matrices, in [0, 1]."""
    rho = validate_density_matrix(rho)
    sigma = validate_density_matrix(sigma)
    root = psd_sqrt(rho)
    inner = root @ sigma @ root
    w, _ = eig_hermitian((inner + inner.conj().T) / 2)
    value = float(np.sum(np.sqrt(np.clip(w, 0.0, None))) ** 2)
    return min(max(value, 0.0), 1.0)


def validate_distribution(p: np.ndarray) -> np.ndarray:
    """Check a 36-entry probability distribution (non-negative, sums to 1)."""
    p = np.asarray(p, dtype=float)
    if p.shape != (36,):
        raise ValueError("distribution must have exactly 36 entries")
    if np.any(p < 0):
        raise ValueError("distribution entries must be non-negative")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("distribution must sum to 1 within 1e-9")
    return p


def bhattacharyya(p: np.ndarray, q: np.ndarray) -> float:
    """Bhattacharyya coefficient sum_i sqrt(p_i q_i) of two distributions."""
    p = validate_distribution(p)
    q = validate_distribution(q)
    return float(np.sum(np.sqrt(p * q)))


def normalize_counts(record: CountRecord) -> np.ndarray:
    """Counts divided by the grand total across all 36 entries."""
    total = record.total()
    if total <= 0:
        raise ValueError("cannot normalize a record with zero total counts")
    return record.counts.astype(float) / total
