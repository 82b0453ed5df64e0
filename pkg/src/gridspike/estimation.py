"""Operator-side machinery: least-squares state estimation, the residual
test, detector calibration, and detection of (possibly attacked) snapshots.

Units: measurements and injected attacks are per-unit; the residual norm is
kept in physical units and divided by sigma_n^2 only when compared against
chi-square quantiles, so the threshold is
``zeta = sigma_n^2 * chi2_quantile(1 - fp_rate, M - n)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cases import MeasurementMatrix
from .numerics import chi2_quantile, solve_spd

__all__ = [
    "BddConfig",
    "EstimationResult",
    "calibrate_bdd",
    "estimate_state",
    "inject_and_detect",
    "residual_sq",
]


@dataclass(frozen=True)
class BddConfig:
    """Residual-test calibration for a fixed measurement geometry."""

    false_positive_rate: float
    threshold_zeta: float
    df: int
    sigma_n: float

    @property
    def normalized_threshold(self) -> float:
        """Threshold on residual_sq / sigma_n^2 (chi-square units)."""
        return self.threshold_zeta / self.sigma_n**2


@dataclass(frozen=True)
class EstimationResult:
    theta_hat: np.ndarray
    residual_sq: float
    alarm: bool


def calibrate_bdd(m: int, n: int, fp_rate: float, sigma_n: float) -> BddConfig:
    """Pick the alarm threshold for a target false-positive rate.

    Under clean data residual_sq / sigma_n^2 is chi-square with M - n
    degrees of freedom, so the (1 - fp) quantile scaled back to physical
    units gives exactly the requested alarm rate.
    """
    if not 0.0 < fp_rate < 1.0:
        raise ValueError(f"false-positive rate must lie in (0, 1), got {fp_rate}")
    if m <= n:
        raise ValueError(f"need more measurements than states (M={m}, n={n})")
    if sigma_n <= 0.0:
        raise ValueError("sigma_n must be positive")
    df = m - n
    zeta = sigma_n**2 * chi2_quantile(1.0 - fp_rate, df)
    return BddConfig(false_positive_rate=fp_rate, threshold_zeta=zeta, df=df, sigma_n=sigma_n)


def estimate_state(h: MeasurementMatrix, z: np.ndarray) -> np.ndarray:
    """Least-squares state estimate theta_hat = (H^T H)^-1 H^T z."""
    z = np.asarray(z, dtype=float)
    if z.shape != (h.m,):
        raise ValueError(f"measurement vector must have length {h.m}, got {z.shape}")
    return solve_spd(h.h.T @ h.h, h.h.T @ z)


def residual_sq(h: MeasurementMatrix, z: np.ndarray) -> float:
    """Squared norm of the estimation residual z - H theta_hat."""
    theta_hat = estimate_state(h, z)
    r = z - h.h @ theta_hat
    return float(r @ r)


def inject_and_detect(h: MeasurementMatrix, z: np.ndarray, attack, bdd: BddConfig) -> EstimationResult:
    """Run the detector on z plus an injection.

    ``attack`` is either a raw length-M per-unit vector or any object with a
    per-unit ``vector`` attribute (an AttackVector).  Pass zeros to score a
    clean snapshot.
    """
    a = np.asarray(getattr(attack, "vector", attack), dtype=float)
    if a.shape != (h.m,):
        raise ValueError(f"attack vector must have length {h.m}, got {a.shape}")
    z_attacked = np.asarray(z, dtype=float) + a
    theta_hat = estimate_state(h, z_attacked)
    r = z_attacked - h.h @ theta_hat
    r_sq = float(r @ r)
    return EstimationResult(theta_hat=theta_hat, residual_sq=r_sq, alarm=r_sq >= bdd.threshold_zeta)
