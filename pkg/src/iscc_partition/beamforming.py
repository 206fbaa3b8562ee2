"""Covariance-constrained ISAC beamforming for the sum of offloading delays.

The outer loop is a majorization-minimization of ``sum_k o_k / R_k`` whose
surrogate is a weighted sum rate; the weighted sum rate is maximized by a
WMMSE block-coordinate descent whose precoder block is an orthogonal
Procrustes problem solved with one SVD per device. Every iterate satisfies
``W_c W_c^H + W_r W_r^H = Q Q^H`` where ``Q`` is the Cholesky factor of the
device's sensing covariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .beampattern import CovarianceTarget, cholesky_factor
from .radio import ChannelSet, logdet_hpd, rate

__all__ = [
    "BeamformerSet",
    "ReceiverState",
    "MmState",
    "BeamformingResult",
    "total_covariance",
    "mmse_receiver",
    "mse_matrix",
    "weight_update",
    "opp_solve",
    "opp_update",
    "wmmse_objective",
    "solve",
    "converged_rates",
]

RATE_FLOOR = 1e-9  # bits/s; below this an offloading device is treated as cut off


@dataclass
class BeamformerSet:
    W_c: list[np.ndarray]
    W_r: list[np.ndarray]
    Q: list[np.ndarray]

    def covariance_errors(self, targets: Sequence[CovarianceTarget | np.ndarray]) -> np.ndarray:
        """Relative Frobenius mismatch ``||W W^H - R||_F / ||R||_F`` per device."""
        errs = []
        for Wc, Wr, R in zip(self.W_c, self.W_r, targets):
            R = _as_matrix(R)
            C = Wc @ Wc.conj().T + Wr @ Wr.conj().T
            errs.append(np.linalg.norm(C - R) / np.linalg.norm(R))
        return np.array(errs)


@dataclass
class ReceiverState:
    U: list[np.ndarray]
    G: list[np.ndarray]
    E: list[np.ndarray]


@dataclass
class MmState:
    z: np.ndarray
    rates: np.ndarray
    objective: float
    iteration: int


@dataclass
class BeamformingResult:
    beamformers: BeamformerSet
    rates: np.ndarray
    objective: float
    feasible: bool
    cut_off: list[int] = field(default_factory=list)
    mm_history: list[float] = field(default_factory=list)
    # one list per outer iteration: WMMSE objective after every U, G and W block
    wmmse_history: list[list[float]] = field(default_factory=list)
    max_covariance_error: float = 0.0
    inner_iterations: int = 0


def _as_matrix(R: CovarianceTarget | np.ndarray) -> np.ndarray:
    return R.R if isinstance(R, CovarianceTarget) else np.asarray(R)


def _herm(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + X.conj().T)


def total_covariance(channels: ChannelSet, covariances: Sequence[np.ndarray]) -> np.ndarray:
    """``sum_i H_i R_i H_i^H + noise * I`` as seen at the BS."""
    S = channels.noise_var * np.eye(channels.M, dtype=complex)
    for Hi, Ri in zip(channels.H, covariances):
        S += Hi @ _as_matrix(Ri) @ Hi.conj().T
    return _herm(S)


def _solve_hpd(S: np.ndarray | tuple, B: np.ndarray) -> np.ndarray:
    cho = S if isinstance(S, tuple) else sla.cho_factor(S, lower=True)
    return sla.cho_solve(cho, B)


def mmse_receiver(k, W_c, channels: ChannelSet, covariance_targets, sigma=None) -> np.ndarray:
    """MMSE receive filter ``W_k^H H_k^H (sum_i H_i R_i H_i^H + noise I)^-1``.

    ``sigma`` may carry a precomputed total covariance or its Cholesky factor.
    """
    if sigma is None:
        sigma = total_covariance(channels, covariance_targets)
    HW = channels.H[k] @ W_c[k]
    return _solve_hpd(sigma, HW).conj().T


def mse_matrix(k, U, W_c, channels: ChannelSet, covariance_targets, sigma=None) -> np.ndarray:
    """Stream MSE matrix of device ``k`` for an arbitrary receiver ``U``."""
    if sigma is None:
        sigma = total_covariance(channels, covariance_targets)
    elif isinstance(sigma, tuple):
        raise TypeError("mse_matrix needs the covariance itself, not its factor")
    d = W_c[k].shape[1]
    UHW = U @ channels.H[k] @ W_c[k]
    E = np.eye(d) - UHW - UHW.conj().T + U @ sigma @ U.conj().T
    return _herm(E)


def weight_update(E: np.ndarray) -> np.ndarray:
    """MSE weight ``G = E^-1`` for Hermitian positive-definite ``E``."""
    E = np.atleast_2d(E)
    try:
        G = _solve_hpd(_herm(E), np.eye(E.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise FloatingPointError(f"MSE matrix is not positive definite: {exc}") from None
    return _herm(G)


def _normalize_phases(A: np.ndarray, B: np.ndarray | None = None, n_pairs: int = 0):
    """Make the first non-negligible entry of each column of ``A`` real-positive.

    The first ``n_pairs`` columns of ``B`` are rotated with their partners
    so ``A S B^H`` is unchanged.
    """
    A = A.copy()
    B = None if B is None else B.copy()
    for j in range(A.shape[1]):
        col = A[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size == 0:
            continue
        ph = col[nz[0]] / abs(col[nz[0]])
        A[:, j] = col / ph
        if B is not None and j < n_pairs:
            B[:, j] = B[:, j] / ph
    return A, B


def opp_solve(T: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Maximize ``Re tr(T^H W)`` over ``W`` with orthonormal columns.

    Returns ``(W_hat_c, W_hat_r)``: the maximizer ``A[:, :d] B^H`` and the
    remaining ``Nt - d`` left singular vectors, which complete it to a
    unitary matrix.
    """
    n, d = T.shape
    A, s, Bh = np.linalg.svd(T, full_matrices=True)
    A, B = _normalize_phases(A, Bh.conj().T, n_pairs=min(n, d))
    W_c = A[:, :d] @ B.conj().T
    W_r = A[:, d:]
    return W_c, W_r


def opp_update(k, U, G, channels: ChannelSet, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Precoder block for device ``k`` given its receiver and MSE weight."""
    T = Q.conj().T @ channels.H[k].conj().T @ U.conj().T @ G.conj().T
    Wc_hat, Wr_hat = opp_solve(T)
    return Q @ Wc_hat, Q @ Wr_hat


def _wmmse_terms(G, E) -> np.ndarray:
    return np.array([float(np.real(np.trace(Gk @ Ek))) - logdet_hpd(_herm(Gk)) for Gk, Ek in zip(G, E)])


def wmmse_objective(z, G, E) -> float:
    z = np.asarray(z, dtype=np.float64)
    active = z != 0
    return float(np.sum(z[active] * _wmmse_terms(G, E)[active]))


def converged_rates(W_c, channels: ChannelSet, sigma: np.ndarray, bandwidth: float) -> np.ndarray:
    """Rates via ``B log2 det(E*^-1)`` with the optimal MMSE receiver."""
    cho = sla.cho_factor(sigma, lower=True)
    out = []
    for k, Wc in enumerate(W_c):
        HW = channels.H[k] @ Wc
        E = np.eye(Wc.shape[1]) - HW.conj().T @ sla.cho_solve(cho, HW)
        out.append(-bandwidth * logdet_hpd(_herm(E)) / math.log(2.0))
    return np.array(out)


def _mm_weights(o: np.ndarray, R: np.ndarray) -> np.ndarray:
    active = o > 0
    z = np.zeros_like(o)
    denom = np.sum(o[active] / R[active]) ** 2
    z[active] = o[active] / R[active] ** 2 / denom
    return z


def solve(
    o,
    channels: ChannelSet,
    covariance_targets: Sequence[CovarianceTarget | np.ndarray],
    d: int,
    bandwidth: float,
    tol: float = 1e-6,
    it_max: int = 50,
    inner_tol: float = 1e-6,
    inner_max: int = 100,
    record: bool = False,
) -> BeamformingResult:
    """Minimize ``sum_k o_k / R_k`` subject to each device's covariance.

    Parameters
    ----------
    o : array_like
        Bits each device offloads over the air (its weight); zero for
        devices that do not transmit.
    channels : ChannelSet
    covariance_targets : sequence
        Desired transmit covariance per device.
    d : int
        Data streams per device; the other ``Nt - d`` columns carry radar
        waveforms.
    bandwidth : float
        Signal bandwidth in Hz; rates are in bits/s.
    record : bool
        Keep the WMMSE objective after every block update, for convergence
        checks and traces.

    Returns
    -------
    BeamformingResult
        ``objective`` is ``inf`` with ``feasible=False`` if a weighted device
        ends with (numerically) zero rate.
    """
    o = np.asarray(o, dtype=np.float64)
    K = channels.K
    Qs = [cholesky_factor(R) for R in covariance_targets]
    R_eff = [Q @ Q.conj().T for Q in Qs]
    sigma = total_covariance(channels, R_eff)
    cho = sla.cho_factor(sigma, lower=True)

    W_c = [Q[:, :d].copy() for Q in Qs]
    W_r = [Q[:, d:].copy() for Q in Qs]

    def finish(objective_hist, wmmse_hist, inner_its):
        bf = BeamformerSet(W_c, W_r, Qs)
        rates = np.array([rate(k, W_c, W_r, channels, bandwidth) for k in range(K)])
        cut = [k for k in range(K) if o[k] > 0 and rates[k] <= RATE_FLOOR]
        if cut:
            objective = math.inf
        else:
            objective = float(np.sum(o[o > 0] / rates[o > 0])) if np.any(o > 0) else 0.0
        return BeamformingResult(
            beamformers=bf,
            rates=rates,
            objective=objective,
            feasible=not cut,
            cut_off=cut,
            mm_history=objective_hist,
            wmmse_history=wmmse_hist,
            max_covariance_error=float(bf.covariance_errors(covariance_targets).max()),
            inner_iterations=inner_its,
        )

    if not np.any(o > 0):
        return finish([0.0], [], 0)

    R_it = converged_rates(W_c, channels, sigma, bandwidth)
    if np.any(R_it[o > 0] <= RATE_FLOOR):
        return finish([math.inf], [], 0)
    mm_obj = float(np.sum(o[o > 0] / R_it[o > 0]))
    mm_hist = [mm_obj]
    wmmse_hist: list[list[float]] = []
    inner_total = 0

    def all_mse(U):
        return [mse_matrix(k, U[k], W_c, channels, R_eff, sigma) for k in range(K)]

    for _ in range(it_max):
        z = _mm_weights(o, R_it)
        U = [mmse_receiver(k, W_c, channels, R_eff, cho) for k in range(K)]
        G = [weight_update(E) for E in all_mse(U)]
        block_hist: list[float] = []
        prev = None
        for _inner in range(inner_max):
            inner_total += 1
            U = [mmse_receiver(k, W_c, channels, R_eff, cho) for k in range(K)]
            if record:
                block_hist.append(wmmse_objective(z, G, all_mse(U)))
            E = all_mse(U)
            G = [weight_update(Ek) for Ek in E]
            cur = wmmse_objective(z, G, E)
            if record:
                block_hist.append(cur)
            for k in range(K):
                W_c[k], W_r[k] = opp_update(k, U[k], G[k], channels, Qs[k])
            terms = _wmmse_terms(G, all_mse(U))
            if record:
                block_hist.append(float(np.sum(z[z != 0] * terms[z != 0])))
            # Per-device stopping keeps the iterates independent of the weights.
            if prev is not None and np.all(np.abs(prev - terms) <= inner_tol * np.maximum(np.abs(prev), 1e-300)):
                break
            prev = terms
        wmmse_hist.append(block_hist)
        R_prev = R_it
        R_it = converged_rates(W_c, channels, sigma, bandwidth)
        if np.any(R_it[o > 0] <= RATE_FLOOR):
            mm_hist.append(math.inf)
            break
        new_obj = float(np.sum(o[o > 0] / R_it[o > 0]))
        mm_hist.append(new_obj)
        # Every device's rate has settled, which also bounds the objective change.
        done = bool(np.all(np.abs(R_it - R_prev) <= tol * np.maximum(R_prev, RATE_FLOOR)))
        mm_obj = new_obj
        if done:
            break

    return finish(mm_hist, wmmse_hist if record else [], inner_total)
