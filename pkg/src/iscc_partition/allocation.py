"""Closed-form MEC and local CPU-frequency allocation."""

from __future__ import annotations

import numpy as np

__all__ = ["alloc_mec", "alloc_local", "energy"]


def alloc_mec(s_mec, alpha_mec, F_M: float) -> np.ndarray:
    """Split the MEC capacity to minimize the summed MEC execution time.

    ``f_k = sqrt(s_k / alpha_k) * F_M / sum_i sqrt(s_i / alpha_i)``; devices
    with no MEC workload get 0, and an all-zero workload returns all zeros.
    Works row-wise on 2-D input (one allocation per row).
    """
    s = np.asarray(s_mec, dtype=np.float64)
    alpha = np.broadcast_to(np.asarray(alpha_mec, dtype=np.float64), s.shape)
    root = np.sqrt(s / alpha)
    total = root.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        f = np.where(total > 0, root * F_M / total, 0.0)
    return f


def alloc_local(s_local, alpha_local, F_k, E_th, kappa):
    """Fastest local frequency under the CPU cap and the energy budget.

    Returns ``min(F_k, sqrt(E_th * alpha / (kappa * s)))``, or ``F_k`` when
    there is no local workload.
    """
    s = np.asarray(s_local, dtype=np.float64)
    with np.errstate(divide="ignore"):
        energy_cap = np.sqrt(np.divide(E_th * np.asarray(alpha_local, dtype=np.float64), kappa * s))
    f = np.where(s > 0, np.minimum(F_k, energy_cap), F_k)
    return float(f) if f.ndim == 0 else f


def energy(s_local, f_local, alpha_local, kappa):
    """Computation energy in joules: ``kappa * s * f**2 / alpha``."""
    out = kappa * np.asarray(s_local, dtype=np.float64) * np.asarray(f_local, dtype=np.float64) ** 2 / alpha_local
    return float(out) if np.ndim(out) == 0 else out
