"""Block-fading MIMO uplink: steering vectors, channel draws and ISAC rates."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .scenario import Scenario

logger = logging.getLogger(__name__)

__all__ = ["ChannelSet", "steering_vector", "gen_channels", "rate", "rates", "logdet_hpd"]


@dataclass(frozen=True)
class ChannelSet:
    H: tuple[np.ndarray, ...]  # K matrices, each M x Nt
    noise_var: float  # watts

    @property
    def K(self) -> int:
        return len(self.H)

    @property
    def M(self) -> int:
        return self.H[0].shape[0]


def steering_vector(theta: float | np.ndarray, n: int, delta: float = 0.5) -> np.ndarray:
    """Uniform linear array response ``exp(j 2 pi i delta sin(theta))``.

    A scalar ``theta`` gives shape ``(n,)``; an array of angles gives
    ``(n, len(theta))`` with one column per angle.
    """
    theta = np.asarray(theta, dtype=np.float64)
    idx = np.arange(n).reshape((n,) + (1,) * theta.ndim)
    return np.exp(2j * np.pi * delta * idx * np.sin(theta))


def gen_channels(scenario: Scenario, seed: int | np.random.SeedSequence | np.random.Generator) -> ChannelSet:
    """Rayleigh block fading scaled by log-distance path loss.

    ``scenario.device_positions`` must be set; the harness draws them per trial.
    """
    if scenario.device_positions is None:
        raise ValueError("scenario has no device positions; draw them before generating channels")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    bs = np.asarray(scenario.bs_position, dtype=np.float64)
    pl = scenario.pathloss
    H = []
    for k, pos in enumerate(scenario.device_positions):
        dist = float(np.hypot(*(np.asarray(pos) - bs)))
        if dist < pl.reference_m:
            logger.warning("device %d is %.3g m from the BS; clamping to %.3g m", k, dist, pl.reference_m)
            dist = pl.reference_m
        shape = (scenario.M, scenario.Nt)
        G = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
        H.append(math.sqrt(pl.gain(dist)) * G)
    return ChannelSet(tuple(H), scenario.noise_var)


def logdet_hpd(A: np.ndarray) -> float:
    """Natural log-determinant of a Hermitian positive-definite matrix."""
    L = np.linalg.cholesky(A)
    return 2.0 * float(np.sum(np.log(np.real(np.diag(L)))))


def _check_finite(*arrays: np.ndarray) -> None:
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError("non-finite value in rate inputs")


def rate(
    k: int,
    W_c: Sequence[np.ndarray],
    W_r: Sequence[np.ndarray],
    channels: ChannelSet,
    bandwidth: float,
) -> float:
    """Achievable offloading rate of device ``k`` in bits/s.

    Interference covers the other devices' data streams and every device's
    radar waveforms, including device ``k``'s own.
    """
    H = channels.H
    M = channels.M
    D = channels.noise_var * np.eye(M, dtype=complex)
    for i, Hi in enumerate(H):
        _check_finite(Hi, W_c[i], W_r[i])
        if i != k:
            X = Hi @ W_c[i]
            D += X @ X.conj().T
        Y = Hi @ W_r[i]
        D += Y @ Y.conj().T
    S = H[k] @ W_c[k]
    signal = S @ S.conj().T
    # log det(I + S S^H D^-1) = log det(D + S S^H) - log det(D)
    nats = logdet_hpd(D + signal) - logdet_hpd(D)
    return bandwidth * max(nats, 0.0) / math.log(2.0)


def rates(W_c, W_r, channels: ChannelSet, bandwidth: float) -> np.ndarray:
    return np.array([rate(k, W_c, W_r, channels, bandwidth) for k in range(channels.K)])
