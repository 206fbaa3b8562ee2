"""Transmit-covariance synthesis for a desired sensing beampattern.

The covariance is fitted to a scaled indicator pattern by least squares
over Hermitian PSD matrices with a fixed per-antenna power. The solver
alternates a closed-form update of the scale with a projected-gradient
step on the covariance, projecting onto PSD cone and fixed-diagonal set
with Dykstra's algorithm.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .radio import steering_vector

__all__ = [
    "CovarianceTarget",
    "BeampatternSample",
    "SynthResult",
    "default_grid",
    "desired_pattern",
    "synth_covariance",
    "beampattern",
    "pattern_gains",
    "cholesky_factor",
    "CovarianceCache",
]


@dataclass(frozen=True)
class CovarianceTarget:
    R: np.ndarray
    per_antenna_power: float

    @property
    def Nt(self) -> int:
        return self.R.shape[0]

    @property
    def total_power(self) -> float:
        return float(np.real(np.trace(self.R)))


@dataclass(frozen=True)
class BeampatternSample:
    theta: float
    gain: float


@dataclass
class SynthResult:
    target: CovarianceTarget
    gamma: float
    objective: float
    iterations: int
    converged: bool
    history: list[float] = field(default_factory=list, repr=False)


def default_grid(step_deg: float = 1.0) -> np.ndarray:
    """Angles in radians covering [-90, 90] degrees."""
    n = int(round(180.0 / step_deg)) + 1
    return np.deg2rad(np.linspace(-90.0, 90.0, n))


def desired_pattern(target_angles: Sequence[float], width: float, grid: np.ndarray) -> np.ndarray:
    """Indicator of the main-beam region around each target (angles in radians)."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("grid must be non-empty")
    targets = np.asarray(target_angles, dtype=np.float64).reshape(-1, 1)
    inside = np.abs(grid[None, :] - targets) < width / 2.0
    return inside.any(axis=0).astype(np.float64)


def _project_psd(X: np.ndarray) -> np.ndarray:
    X = 0.5 * (X + X.conj().T)
    w, V = np.linalg.eigh(X)
    return (V * np.clip(w, 0.0, None)) @ V.conj().T


def _project_diag(X: np.ndarray, p: float) -> np.ndarray:
    Y = X.copy()
    np.fill_diagonal(Y, p)
    return Y


def _dykstra(Y: np.ndarray, p: float, tol: float = 1e-13, max_iter: int = 500) -> np.ndarray:
    """Euclidean projection of ``Y`` onto {PSD} ∩ {diag = p}."""
    x = Y.copy()
    P = np.zeros_like(Y)
    Q = np.zeros_like(Y)
    scale = max(np.linalg.norm(Y), p)
    for _ in range(max_iter):
        y = _project_psd(x + P)
        P = x + P - y
        x_new = _project_diag(y + Q, p)
        Q = y + Q - x_new
        done = np.linalg.norm(x_new - x) <= tol * scale and np.linalg.norm(x_new - y) <= 1e3 * tol * scale
        x = x_new
        if done:
            break
    return x


def _restore_feasible(X: np.ndarray, p: float) -> np.ndarray:
    """Clip to PSD, then rescale by a diagonal congruence so diag == p exactly.

    Congruence keeps the matrix PSD, so the result is feasible up to
    rounding even when Dykstra stopped slightly short of the intersection.
    """
    R = _project_psd(X)
    d = np.real(np.diag(R)).copy()
    if np.any(d <= 0):
        return p * np.eye(R.shape[0], dtype=complex)
    s = np.sqrt(p / d)
    R = R * s[:, None] * s[None, :]
    R = 0.5 * (R + R.conj().T)
    np.fill_diagonal(R, p)
    return R


def _project(Y: np.ndarray, p: float) -> np.ndarray:
    return _restore_feasible(_dykstra(Y, p), p)


def synth_covariance(
    target_angles: Sequence[float],
    width: float,
    P_t: float,
    Nt: int,
    grid: np.ndarray | None = None,
    tol: float = 1e-7,
    max_iter: int = 3000,
    delta: float = 0.5,
) -> SynthResult:
    """Least-squares transmit covariance for an indicator beampattern.

    Parameters
    ----------
    target_angles : sequence of float
        Target directions in radians.
    width : float
        Mainlobe width in radians.
    P_t : float
        Total transmit power (W); every antenna gets ``P_t / Nt``.
    Nt : int
        Number of transmit antennas.
    grid : ndarray, optional
        Angular grid in radians (default: 1 degree over [-90, 90]).
    tol : float
        Stop when the relative objective decrease of an accepted step
        falls below this value.
    max_iter : int
        Maximum number of accepted or rejected gradient steps.

    Returns
    -------
    SynthResult
        The best feasible iterate; ``converged`` is False when ``max_iter``
        ran out first.
    """
    if P_t <= 0:
        raise ValueError("P_t must be positive")
    grid = default_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    phi = desired_pattern(target_angles, width, grid)
    A = steering_vector(grid, Nt, delta)  # Nt x Q
    p = P_t / Nt
    phi_sq = float(phi @ phi)

    def pattern(R: np.ndarray) -> np.ndarray:
        return np.real(np.einsum("iq,ij,jq->q", A.conj(), R, A))

    def best_gamma(pq: np.ndarray) -> float:
        return max(0.0, float(phi @ pq) / phi_sq) if phi_sq > 0 else 0.0

    def objective(R: np.ndarray, gamma: float) -> tuple[float, np.ndarray]:
        resid = pattern(R) - gamma * phi
        return float(resid @ resid), resid

    lipschitz = 2.0 * grid.size * Nt**2  # 2 * sum_q ||a a^H||_F^2 with |a_i| = 1
    step = 1.0 / lipschitz

    R = p * np.eye(Nt, dtype=complex)
    gamma = best_gamma(pattern(R))
    obj, resid = objective(R, gamma)
    history = [obj]
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        grad = 2.0 * (A * resid) @ A.conj().T  # sum_q 2 r_q a_q a_q^H
        R_new = _project(R - step * grad, p)
        gamma_new = best_gamma(pattern(R_new))
        obj_new, resid_new = objective(R_new, gamma_new)
        if obj_new > obj:
            step *= 0.5
            if step * lipschitz < 1e-6:
                converged = True
                break
            continue
        decrease = obj - obj_new
        R, gamma, obj, resid = R_new, gamma_new, obj_new, resid_new
        history.append(obj)
        if decrease <= tol * max(obj, 1e-300) or obj == 0.0:
            converged = True
            break
    return SynthResult(CovarianceTarget(R, p), gamma, obj, it, converged, history)


def beampattern(R: CovarianceTarget | np.ndarray, grid: np.ndarray, delta: float = 0.5) -> list[BeampatternSample]:
    gains = pattern_gains(R, grid, delta)
    return [BeampatternSample(float(t), float(g)) for t, g in zip(grid, gains)]


def pattern_gains(R: CovarianceTarget | np.ndarray, grid: np.ndarray, delta: float = 0.5) -> np.ndarray:
    """``a(theta)^H R a(theta)`` on ``grid``, tiny negative values clamped to 0."""
    R = R.R if isinstance(R, CovarianceTarget) else np.asarray(R)
    A = steering_vector(np.asarray(grid, dtype=np.float64), R.shape[0], delta)
    gains = np.real(np.einsum("iq,ij,jq->q", A.conj(), R, A))
    return np.clip(gains, 0.0, None)


def cholesky_factor(R: CovarianceTarget | np.ndarray) -> np.ndarray:
    """Lower-triangular ``Q`` with ``Q Q^H ≈ R``.

    If the smallest eigenvalue is below ``eps = 1e-10 * trace(R) / Nt`` the
    factorization is taken of ``R + eps I`` instead.
    """
    R = R.R if isinstance(R, CovarianceTarget) else np.asarray(R)
    R = 0.5 * (R + R.conj().T)
    n = R.shape[0]
    eps = 1e-10 * float(np.real(np.trace(R))) / n
    if np.linalg.eigvalsh(R)[0] < eps:
        R = R + eps * np.eye(n)
    return np.linalg.cholesky(R)


class CovarianceCache:
    """Stores synthesized covariances as JSON files keyed by request parameters."""

    def __init__(self, directory: str | Path | None = None):
        self.directory = None if directory is None else Path(directory)
        self._mem: dict[str, CovarianceTarget] = {}

    @staticmethod
    def key(target_angles, width, P_t, Nt, grid, delta=0.5) -> str:
        grid_hash = hashlib.sha1(np.ascontiguousarray(grid, dtype=np.float64).tobytes()).hexdigest()[:12]
        raw = json.dumps(
            [[round(float(t), 12) for t in target_angles], round(float(width), 12), float(P_t), int(Nt), grid_hash, delta]
        )
        return hashlib.sha1(raw.encode()).hexdigest()[:20]

    def get(self, target_angles, width, P_t, Nt, grid=None, delta=0.5) -> CovarianceTarget:
        grid = default_grid() if grid is None else np.asarray(grid, dtype=np.float64)
        key = self.key(target_angles, width, P_t, Nt, grid, delta)
        if key in self._mem:
            return self._mem[key]
        path = None if self.directory is None else self.directory / f"cov_{key}.json"
        if path is not None and path.exists():
            doc = json.loads(path.read_text())
            R = np.array(doc["re"]) + 1j * np.array(doc["im"])
            target = CovarianceTarget(R, float(doc["per_antenna_power"]))
        else:
            target = synth_covariance(target_angles, width, P_t, Nt, grid, delta=delta).target
            if path is not None:
                path.parent.mkdir(parents=True, exist_ok=True)
                doc = {
                    "target_angles": list(map(float, target_angles)),
                    "width": float(width),
                    "P_t": float(P_t),
                    "Nt": int(Nt),
                    "per_antenna_power": target.per_antenna_power,
                    "re": target.R.real.tolist(),
                    "im": target.R.imag.tolist(),
                }
                path.write_text(json.dumps(doc))
        self._mem[key] = target
        return target
