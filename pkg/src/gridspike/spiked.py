"""Attacker-side spectral learning from a finite measurement window.

The sample covariance of the measurements, normalized by the sensor noise
variance, is a spiked model: an identity bulk plus one strong eigenvalue per
state direction.  With M sensors and T snapshots at ratio p = M/T, only
population spikes above sqrt(p) survive in the sample spectrum; everything
else drowns in the Marcenko-Pastur bulk whose upper edge is (1 + sqrt(p))^2.
The functions here count the recoverable modes and invert the sample
eigenvalues into consistent estimates of the spike sizes (mu_hat) and of the
squared eigenvector projections (omega_hat).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .numerics import EigenDecomposition, sym_eig
from .simulate import MeasurementTrace

__all__ = [
    "MpEdges",
    "SpikedEstimate",
    "SubspaceError",
    "count_spikes",
    "estimate_noise_variance",
    "estimate_omega",
    "estimate_spike_mu",
    "learn_subspace",
    "mp_edges",
    "mp_median",
    "sample_covariance",
    "spike_lambda",
]


class SubspaceError(RuntimeError):
    """Raised when an operation needs recoverable eigenmodes and there are none."""


@dataclass(frozen=True)
class MpEdges:
    """Support of the Marcenko-Pastur bulk for aspect ratio p."""

    a_minus: float
    b_plus: float


def mp_edges(p: float) -> MpEdges:
    if p <= 0.0:
        raise ValueError(f"aspect ratio p must be positive, got {p}")
    root = math.sqrt(p)
    return MpEdges(a_minus=(1.0 - root) ** 2, b_plus=(1.0 + root) ** 2)


def sample_covariance(trace: MeasurementTrace | np.ndarray) -> np.ndarray:
    """Mean-removed sample covariance with the 1/(T-1) normalization."""
    z = trace.z if isinstance(trace, MeasurementTrace) else np.asarray(trace, dtype=float)
    if z.ndim != 2 or z.shape[1] < 2:
        raise ValueError("need an M x T matrix with T >= 2 snapshots")
    centered = z - z.mean(axis=1, keepdims=True)
    return (centered @ centered.T) / (z.shape[1] - 1)


def count_spikes(eigenvalues: np.ndarray, p: float, margin: float = 0.0) -> int:
    """Number of sample eigenvalues strictly above the bulk edge.

    ``margin`` adds a safety buffer above (1 + sqrt(p))^2; the default 0
    matches the plain counting rule, but finite-M fluctuations occasionally
    push a bulk eigenvalue past the asymptotic edge, and a small positive
    margin filters those.
    """
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    if eigenvalues.size > 1 and np.any(np.diff(eigenvalues) > 1e-12):
        raise ValueError("eigenvalues must be sorted descending")
    return int(np.sum(eigenvalues > mp_edges(p).b_plus + margin))


def estimate_spike_mu(lambda_hat: float, p: float) -> float:
    """Invert a supercritical sample eigenvalue into a spike estimate.

    mu_hat = (lam + 1 - p + sqrt((lam + 1 - p)^2 - 4 lam)) / 2 - 1, valid
    for lam > (1 + sqrt(p))^2 where the discriminant is positive.
    """
    edge = mp_edges(p).b_plus
    if lambda_hat < edge:
        raise ValueError(
            f"sample eigenvalue {lambda_hat:.6g} is below the detection edge {edge:.6g}"
        )
    t = lambda_hat + 1.0 - p
    disc = max(t * t - 4.0 * lambda_hat, 0.0)
    return (t + math.sqrt(disc)) / 2.0 - 1.0


def spike_lambda(mu: float, p: float) -> float:
    """Forward map: asymptotic sample eigenvalue of a spike mu > sqrt(p)."""
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    return 1.0 + mu + p * (1.0 + mu) / mu


def estimate_omega(mu_hat: float, p: float) -> float:
    """Squared projection of the sample eigenvector on the true one.

    omega = (1 - p/mu^2) / (1 + p/mu), which lives in (0, 1) exactly when
    mu > sqrt(p) and increases with mu: stronger spikes are estimated more
    accurately.
    """
    if mu_hat <= math.sqrt(p):
        raise ValueError(
            f"mu_hat={mu_hat:.6g} is at or below the recoverability threshold sqrt(p)={math.sqrt(p):.6g}"
        )
    return (1.0 - p / mu_hat**2) / (1.0 + p / mu_hat)


@dataclass(frozen=True)
class SpikedEstimate:
    """Everything the attacker learns from one measurement window.

    ``eigenvalues`` holds the full noise-normalized sample spectrum
    (descending); the first ``s`` entries are the recoverable spikes with
    their ``mu_hat``/``omega_hat`` estimates and sign-fixed eigenvectors
    ``u_hat`` (M x s).  ``u_full`` optionally retains the complete sample
    eigenbasis for baselines that insist on using unrecoverable modes.
    """

    p_ratio: float
    s: int
    eigenvalues: np.ndarray
    mu_hat: np.ndarray
    omega_hat: np.ndarray
    u_hat: np.ndarray
    sample_mean: np.ndarray
    sigma_n: float
    u_full: np.ndarray | None = None

    @property
    def m(self) -> int:
        return self.eigenvalues.size

    @property
    def lambda_hat(self) -> np.ndarray:
        """Sample eigenvalues of the recoverable spikes."""
        return self.eigenvalues[: self.s]

    @property
    def has_subspace(self) -> bool:
        return self.s > 0

    def basis(self, n_modes: int) -> np.ndarray:
        """First ``n_modes`` sample eigenvectors; needs u_full past s."""
        if n_modes <= self.s:
            return self.u_hat[:, :n_modes]
        if self.u_full is None:
            raise SubspaceError(
                f"estimate retains only {self.s} eigenvectors; "
                f"relearn with keep_full_basis=True to use {n_modes}"
            )
        return self.u_full[:, :n_modes]

    def to_json(self, include_full_basis: bool = True) -> str:
        doc = {
            "p_ratio": self.p_ratio,
            "s": self.s,
            "sigma_n": self.sigma_n,
            "eigenvalues": self.eigenvalues.tolist(),
            "mu_hat": self.mu_hat.tolist(),
            "omega_hat": self.omega_hat.tolist(),
            "u_hat": self.u_hat.tolist(),
            "sample_mean": self.sample_mean.tolist(),
        }
        if include_full_basis and self.u_full is not None:
            doc["u_full"] = self.u_full.tolist()
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SpikedEstimate":
        doc = json.loads(text)
        u_full = np.array(doc["u_full"]) if "u_full" in doc else None
        return cls(
            p_ratio=float(doc["p_ratio"]),
            s=int(doc["s"]),
            eigenvalues=np.array(doc["eigenvalues"], dtype=float),
            mu_hat=np.array(doc["mu_hat"], dtype=float),
            omega_hat=np.array(doc["omega_hat"], dtype=float),
            u_hat=np.array(doc["u_hat"], dtype=float).reshape(len(doc["eigenvalues"]), -1),
            sample_mean=np.array(doc["sample_mean"], dtype=float),
            sigma_n=float(doc["sigma_n"]),
            u_full=u_full,
        )


def learn_subspace(
    trace: MeasurementTrace | np.ndarray,
    sigma_n: float | None = None,
    margin: float = 0.0,
    keep_full_basis: bool = True,
) -> SpikedEstimate:
    """Spectral learning step: covariance, eigendecomposition, spike counts.

    ``sigma_n`` is the sensor noise level used to normalize the covariance;
    pass None to estimate it from the bulk spectrum (see
    estimate_noise_variance), for the setting where the noise floor is
    withheld from the attacker.  An estimate with s == 0 is a valid "no
    recoverable subspace" outcome, not an error.
    """
    z = trace.z if isinstance(trace, MeasurementTrace) else np.asarray(trace, dtype=float)
    m, horizon = z.shape
    p = m / horizon
    cov = sample_covariance(z)
    if sigma_n is None:
        raw = sym_eig(cov)
        sigma_n = math.sqrt(estimate_noise_variance(raw.eigenvalues, p))
        decomp = EigenDecomposition(
            eigenvalues=raw.eigenvalues / sigma_n**2, eigenvectors=raw.eigenvectors
        )
    else:
        if sigma_n <= 0.0:
            raise ValueError("sigma_n must be positive")
        decomp = sym_eig(cov / sigma_n**2)
    s = count_spikes(decomp.eigenvalues, p, margin=margin)
    mu = np.array([estimate_spike_mu(lam, p) for lam in decomp.eigenvalues[:s]])
    omega = np.array([estimate_omega(mu_i, p) for mu_i in mu])
    return SpikedEstimate(
        p_ratio=p,
        s=s,
        eigenvalues=decomp.eigenvalues,
        mu_hat=mu,
        omega_hat=omega,
        u_hat=decomp.eigenvectors[:, :s],
        sample_mean=z.mean(axis=1),
        sigma_n=float(sigma_n),
        u_full=decomp.eigenvectors if keep_full_basis else None,
    )


# ---------------------------------------------------------------------------
# Marcenko-Pastur helpers (noise-floor estimation)
# ---------------------------------------------------------------------------

def _mp_density(x: float, p: float) -> float:
    edges = mp_edges(p)
    if x <= edges.a_minus or x >= edges.b_plus:
        return 0.0
    return math.sqrt((edges.b_plus - x) * (x - edges.a_minus)) / (2.0 * math.pi * p * x)


def mp_median(p: float) -> float:
    """Median of the Marcenko-Pastur law (including the atom at 0 if p > 1)."""
    edges = mp_edges(p)
    atom = max(0.0, 1.0 - 1.0 / p)
    if atom >= 0.5:
        return 0.0

    def cdf(x: float) -> float:
        val, _ = quad(_mp_density, edges.a_minus, x, args=(p,), limit=200)
        return atom + val

    return float(brentq(lambda x: cdf(x) - 0.5, edges.a_minus + 1e-12, edges.b_plus - 1e-12))


def estimate_noise_variance(eigenvalues: np.ndarray, p: float) -> float:
    """Noise floor from the bulk: median eigenvalue over the MP median.

    Biased slightly upward by the spike mass in the top of the spectrum;
    adequate when spikes are few relative to M.  Intended for the variant
    where sigma_n is withheld from the attacker.
    """
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    med = float(np.median(eigenvalues))
    ref = mp_median(p)
    if ref <= 0.0:
        raise ValueError(f"MP median degenerate at p={p}; cannot estimate the noise floor")
    return med / ref
