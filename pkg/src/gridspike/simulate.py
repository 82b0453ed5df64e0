"""Synthetic measurement traces: the state fluctuates i.i.d. around its
base-case value and every sensor adds white Gaussian noise.

Column t of a trace is  z[t] = H (theta_bar + eps[t]) + n[t]  with
eps[t] ~ N(0, sigma_theta^2 I) and n[t] ~ N(0, sigma_n^2 I), all drawn from
one seeded stream, so a (matrix, theta_bar, config) triple pins the trace
bit-for-bit.  True states are kept on the trace object for oracle checks but
are never serialized by default: the eavesdropper only sees ``z``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .cases import MeasurementMatrix
from .numerics import GaussianStream

__all__ = [
    "MeasurementTrace",
    "TraceConfig",
    "generate_trace",
    "read_trace_csv",
    "write_trace_csv",
    "write_trace_json",
]


@dataclass(frozen=True)
class TraceConfig:
    """Knobs of the data model: fluctuation/noise scale, window length, seed.

    ``distribution`` selects the fluctuation/noise law: "gaussian" (the
    reference choice) or "uniform" (variance-matched, bounded support) for
    checking that the spectral estimates only need bounded fourth moments.
    """

    sigma_theta: float
    sigma_n: float
    horizon: int
    seed: int
    distribution: str = "gaussian"

    def __post_init__(self) -> None:
        if self.sigma_theta < 0.0:
            raise ValueError("sigma_theta must be nonnegative")
        if self.sigma_n <= 0.0:
            raise ValueError("sigma_n must be positive")
        if self.horizon < 2:
            raise ValueError("horizon must be at least 2")
        if self.distribution not in ("gaussian", "uniform"):
            raise ValueError(f"unknown distribution {self.distribution!r}")


@dataclass(frozen=True)
class MeasurementTrace:
    """M x T snapshot matrix plus generation metadata."""

    z: np.ndarray
    config: TraceConfig
    true_states: np.ndarray
    row_labels: tuple[tuple[str, int], ...]

    @property
    def m(self) -> int:
        return self.z.shape[0]

    @property
    def horizon(self) -> int:
        return self.z.shape[1]


def _draws(stream: GaussianStream, sigma: float, shape: tuple[int, int], law: str) -> np.ndarray:
    if law == "gaussian":
        return sigma * stream.standard_normal(shape)
    # uniform on [-sqrt(3) sigma, sqrt(3) sigma] has variance sigma^2
    return stream.uniform_symmetric(np.sqrt(3.0) * sigma, shape)


def generate_trace(
    h: MeasurementMatrix,
    theta_bar: np.ndarray,
    cfg: TraceConfig,
    stream: GaussianStream | None = None,
) -> MeasurementTrace:
    """Draw a full trace; state fluctuations first, sensor noise second.

    The draw order (all state fluctuations as one block, then all noise)
    is part of the determinism contract.  ``stream`` overrides the
    config-seeded stream so a harness can hand out derived per-trial
    streams without inventing fresh integer seeds.
    """
    theta_bar = np.asarray(theta_bar, dtype=float)
    if theta_bar.shape != (h.n,):
        raise ValueError(f"theta_bar must have length {h.n}, got {theta_bar.shape}")
    if stream is None:
        stream = GaussianStream(cfg.seed)
    eps = _draws(stream, cfg.sigma_theta, (h.n, cfg.horizon), cfg.distribution)
    noise = _draws(stream, cfg.sigma_n, (h.m, cfg.horizon), cfg.distribution)
    states = theta_bar[:, None] + eps
    z = h.h @ states + noise
    return MeasurementTrace(z=z, config=cfg, true_states=states, row_labels=h.row_labels)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _label_names(labels: tuple[tuple[str, int], ...]) -> list[str]:
    return [f"{kind}_{elem}" for kind, elem in labels]


def _meta_path(path: str) -> str:
    return str(path) + ".meta.json"


def write_trace_csv(trace: MeasurementTrace, path: str) -> None:
    """One snapshot per line, ``t`` first; sigma metadata in a JSON sidecar."""
    names = _label_names(trace.row_labels)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t," + ",".join(names) + "\n")
        for t in range(trace.horizon):
            row = ",".join(format(v, ".10g") for v in trace.z[:, t])
            fh.write(f"{t},{row}\n")
    meta = {
        "sigma_theta": trace.config.sigma_theta,
        "sigma_n": trace.config.sigma_n,
        "horizon": trace.config.horizon,
        "seed": trace.config.seed,
        "distribution": trace.config.distribution,
    }
    with open(_meta_path(path), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_trace_csv(path: str) -> tuple[np.ndarray, list[str], TraceConfig | None]:
    """Read back a trace CSV; returns (z, row names, sidecar config if found)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if not header or header[0] != "t":
            raise ValueError(f"{path}: not a trace CSV (missing 't' header column)")
        names = header[1:]
        rows = []
        for line in fh:
            if line.strip():
                rows.append([float(v) for v in line.strip().split(",")[1:]])
    z = np.array(rows).T
    cfg = None
    try:
        with open(_meta_path(path), "r", encoding="utf-8") as fh:
            meta = json.load(fh)
        cfg = TraceConfig(
            sigma_theta=meta["sigma_theta"],
            sigma_n=meta["sigma_n"],
            horizon=meta["horizon"],
            seed=meta["seed"],
            distribution=meta.get("distribution", "gaussian"),
        )
    except FileNotFoundError:
        pass
    return z, names, cfg


def write_trace_json(trace: MeasurementTrace, path: str) -> None:
    """Single-file JSON variant for small cases."""
    doc = {
        "row_labels": _label_names(trace.row_labels),
        "config": {
            "sigma_theta": trace.config.sigma_theta,
            "sigma_n": trace.config.sigma_n,
            "horizon": trace.config.horizon,
            "seed": trace.config.seed,
            "distribution": trace.config.distribution,
        },
        "z": [[float(v) for v in col] for col in trace.z.T],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")
