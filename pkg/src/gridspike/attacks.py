"""Injection vectors built from a learned subspace, with predicted residual
shift and state-error impact computed from the attacker's own estimates.

Unit bookkeeping.  The spectral estimates live in noise-normalized units
(covariance divided by sigma_n^2), so attack coefficients ``c`` are stored in
units of sigma_n: with a physical injection a = sigma_n * U_hat c, the
detector's normalized residual  r_a / sigma_n^2  picks up the noncentrality
nu = c^T (I - Omega_hat) c  directly.  The impact target tau is physical
(radians^2): because the spikes scale as (sigma_theta/sigma_n)^2 * eig(HH^T),
the physical state error  ||dtheta||^2 ~ sigma_theta^2 * sum (omega_i/mu_i)
c_i^2  with sigma_theta in radians, so a single formula
c_i = sqrt(tau / (sigma_theta^2 * omega_i/mu_i)) converts tau once, at
construction, and lands c in normalized units.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .estimation import BddConfig
from .numerics import noncentral_chi2_sf
from .spiked import SpikedEstimate, SubspaceError

__all__ = [
    "AttackVector",
    "StateVarianceEstimate",
    "attack_from_json",
    "attack_to_json",
    "eigenmode_attack",
    "extended_mode_weights",
    "full_subspace_attack",
    "noncentrality_estimate",
    "optimal_attack",
    "predicted_detection_probability",
    "state_error_estimate",
]


@dataclass(frozen=True)
class StateVarianceEstimate:
    """Attacker's estimate of the state fluctuation scale (radians)."""

    sigma_theta: float

    def __post_init__(self) -> None:
        if self.sigma_theta <= 0.0:
            raise ValueError("sigma_theta estimate must be positive")


@dataclass(frozen=True)
class AttackVector:
    """A constructed injection with its provenance and predictions.

    ``vector`` is the per-unit injection added to measurements;
    ``coefficients`` are the noise-normalized basis coordinates, so
    ``vector == sigma_n * basis @ coefficients``.  ``predicted_nu`` is the
    attacker's estimate of the residual noncentrality; it is exact for the
    stored coefficients, not for the true grid.
    """

    vector: np.ndarray
    coefficients: np.ndarray
    mode_indices: tuple[int, ...]
    target_tau: float
    predicted_nu: float
    construction: str
    sigma_n: float
    predicted_detection_prob: float | None = None

    @property
    def n_modes(self) -> int:
        return self.coefficients.size


def noncentrality_estimate(est: SpikedEstimate, c: np.ndarray) -> float:
    """nu_hat = sum_i (1 - omega_hat_i) c_i^2 for coefficients on modes 1..s."""
    c = np.asarray(c, dtype=float)
    if c.shape != (est.s,):
        raise ValueError(f"coefficient vector must have length s={est.s}, got {c.shape}")
    return float(np.sum((1.0 - est.omega_hat) * c**2))


def state_error_estimate(est: SpikedEstimate, c: np.ndarray, sv: StateVarianceEstimate) -> float:
    """Predicted squared state-estimate shift (radians^2)."""
    c = np.asarray(c, dtype=float)
    if c.shape != (est.s,):
        raise ValueError(f"coefficient vector must have length s={est.s}, got {c.shape}")
    return float(sv.sigma_theta**2 * np.sum((est.omega_hat / est.mu_hat) * c**2))


def predicted_detection_probability(nu_hat: float, bdd: BddConfig) -> float:
    """Alarm probability of a noncentrality-nu_hat attack under the detector."""
    if nu_hat < 0.0:
        raise ValueError("noncentrality must be nonnegative")
    return noncentral_chi2_sf(bdd.normalized_threshold, bdd.df, nu_hat)


def extended_mode_weights(est: SpikedEstimate, n_modes: int) -> tuple[np.ndarray, np.ndarray]:
    """(mu, omega) for modes 1..n_modes, extended past the recoverable count.

    The spike-inversion formulas only exist for sample eigenvalues above the
    bulk edge; baselines that insist on using modes past s need some
    calibration anyway.  For those modes the inversion is evaluated with the
    magnitude of its (negative) discriminant, which matches the true
    inversion at the bulk edge and keeps the weights real, finite and
    positive down to eigenvalues of 1 + p; anything deeper in the bulk
    inherits the weakest recoverable mode's (mu_hat, omega_hat).  Either
    way the baseline over-allocates energy onto directions that carry
    little of the true column space, which is what makes it detectable on
    short windows.
    """
    if est.s == 0:
        raise SubspaceError("no recoverable subspace: cannot extend mode weights")
    if n_modes < 1:
        raise ValueError("n_modes must be at least 1")
    if n_modes > est.m:
        raise ValueError(f"n_modes={n_modes} exceeds the measurement dimension {est.m}")
    p = est.p_ratio
    mu = np.empty(n_modes)
    omega = np.empty(n_modes)
    k = min(n_modes, est.s)
    mu[:k] = est.mu_hat[:k]
    omega[:k] = est.omega_hat[:k]
    mu_last, omega_last = est.mu_hat[est.s - 1], est.omega_hat[est.s - 1]
    for i in range(k, n_modes):
        lam = est.eigenvalues[i]
        if lam > 1.0 + p:
            t = lam + 1.0 - p
            mu_i = (t + np.sqrt(np.abs(t * t - 4.0 * lam))) / 2.0 - 1.0
            mu[i] = mu_i
            omega[i] = (1.0 - p / mu_i**2) / (1.0 + p / mu_i)
        else:
            mu[i] = mu_last
            omega[i] = omega_last
    return mu, omega


def _single_mode(
    est: SpikedEstimate,
    index: int,
    tau: float,
    sv: StateVarianceEstimate,
    construction: str,
    bdd: BddConfig | None,
) -> AttackVector:
    mu, omega = extended_mode_weights(est, index)
    mu_i, omega_i = mu[index - 1], omega[index - 1]
    c_i = np.sqrt(tau / (sv.sigma_theta**2 * (omega_i / mu_i)))
    basis = est.basis(index)
    vector = est.sigma_n * c_i * basis[:, index - 1]
    nu_hat = (1.0 - omega_i) * c_i**2
    prob = None if bdd is None else predicted_detection_probability(nu_hat, bdd)
    # zero-padded to the recoverable count so noncentrality_estimate applies
    coeffs = np.zeros(max(est.s, index))
    coeffs[index - 1] = c_i
    return AttackVector(
        vector=vector,
        coefficients=coeffs,
        mode_indices=(index,),
        target_tau=tau,
        predicted_nu=float(nu_hat),
        construction=construction,
        sigma_n=est.sigma_n,
        predicted_detection_prob=prob,
    )


def optimal_attack(
    est: SpikedEstimate,
    tau: float,
    sv: StateVarianceEstimate,
    bdd: BddConfig | None = None,
) -> AttackVector:
    """Minimum-detectability attack meeting the impact target.

    Among all coefficient vectors with predicted state error tau, the
    noncentrality c^T (I - Omega_hat) c is minimized by loading everything
    on the first eigenmode: it is both the most accurately estimated and
    the cheapest per unit of impact, so
    a = sigma_n * sqrt(tau / (sigma_theta^2 omega_1/mu_1)) * u_hat_1.
    """
    if tau <= 0.0:
        raise ValueError("impact target tau must be positive")
    if not est.has_subspace:
        raise SubspaceError("no recoverable subspace: cannot construct an attack")
    return _single_mode(est, 1, tau, sv, "optimal_mode1", bdd)


def eigenmode_attack(
    est: SpikedEstimate,
    index: int,
    tau: float,
    sv: StateVarianceEstimate,
    bdd: BddConfig | None = None,
    allow_extended: bool = False,
) -> AttackVector:
    """Single-mode attack a = c_i u_hat_i with c_i = sqrt(tau/(sigma^2 w_i)).

    Modes past s have no consistent estimates; they are refused unless
    ``allow_extended`` opts into the frozen-weight extension (used by the
    mode-sweep experiment to show how detectable those modes are).
    """
    if tau <= 0.0:
        raise ValueError("impact target tau must be positive")
    if not est.has_subspace:
        raise SubspaceError("no recoverable subspace: cannot construct an attack")
    if index < 1 or (index > est.s and not allow_extended):
        raise ValueError(f"mode index {index} outside the recoverable range 1..{est.s}")
    if index > est.m:
        raise ValueError(f"mode index {index} exceeds the measurement dimension {est.m}")
    return _single_mode(est, index, tau, sv, f"eigenmode({index})", bdd)


def full_subspace_attack(
    est: SpikedEstimate,
    tau: float,
    sv: StateVarianceEstimate,
    n_modes: int,
    bdd: BddConfig | None = None,
) -> AttackVector:
    """Baseline spreading the attack across the first ``n_modes`` eigenmodes.

    Replicates subspace attacks built as if the whole estimated basis were
    trustworthy: c_i = sqrt(tau / (n_modes sigma^2 w_i)) per mode, so the
    nominal per-mode impacts add up to tau.  Past mode s the weights are the
    frozen extension (see extended_mode_weights); that over-allocation onto
    poorly estimated directions is exactly what makes this baseline easy to
    detect on short windows.
    """
    if tau <= 0.0:
        raise ValueError("impact target tau must be positive")
    if not est.has_subspace:
        raise SubspaceError("no recoverable subspace: cannot construct an attack")
    mu, omega = extended_mode_weights(est, n_modes)
    c = np.sqrt(tau / (n_modes * sv.sigma_theta**2 * (omega / mu)))
    basis = est.basis(n_modes)
    vector = est.sigma_n * basis @ c
    nu_hat = float(np.sum((1.0 - omega) * c**2))
    prob = None if bdd is None else predicted_detection_probability(nu_hat, bdd)
    return AttackVector(
        vector=vector,
        coefficients=c,
        mode_indices=tuple(range(1, n_modes + 1)),
        target_tau=tau,
        predicted_nu=nu_hat,
        construction="full_subspace",
        sigma_n=est.sigma_n,
        predicted_detection_prob=prob,
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def attack_to_json(attack: AttackVector) -> str:
    doc = {
        "vector": attack.vector.tolist(),
        "coefficients": attack.coefficients.tolist(),
        "mode_indices": list(attack.mode_indices),
        "target_tau": attack.target_tau,
        "predicted_nu": attack.predicted_nu,
        "construction": attack.construction,
        "sigma_n": attack.sigma_n,
        "predicted_detection_prob": attack.predicted_detection_prob,
    }
    return json.dumps(doc, sort_keys=True)


def attack_from_json(text: str) -> AttackVector:
    doc = json.loads(text)
    return AttackVector(
        vector=np.array(doc["vector"], dtype=float),
        coefficients=np.array(doc["coefficients"], dtype=float),
        mode_indices=tuple(doc["mode_indices"]),
        target_tau=float(doc["target_tau"]),
        predicted_nu=float(doc["predicted_nu"]),
        construction=str(doc["construction"]),
        sigma_n=float(doc["sigma_n"]),
        predicted_detection_prob=(
            None
            if doc.get("predicted_detection_prob") is None
            else float(doc["predicted_detection_prob"])
        ),
    )
