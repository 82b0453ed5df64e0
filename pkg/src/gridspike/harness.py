"""Experiment orchestration: seeded Monte-Carlo campaigns over the learn /
attack / detect pipeline, aggregated into machine-readable reports.

Determinism contract: a DetectionReport is a pure function of its
ExperimentConfig.  Every trial draws from a stream derived from
(master_seed, experiment tag, trial index), so outcomes are independent of
execution order and worker count, and extending ``trials`` leaves earlier
trials' outcomes unchanged.

The ``tau`` impact target is kept in noise-normalized squared-state units
(the convention the attack formulas are stated in); the physical target
passed to the attack constructors is tau * sigma_n^2 radians^2.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .attacks import (
    StateVarianceEstimate,
    eigenmode_attack,
    full_subspace_attack,
    optimal_attack,
)
from .cases import MeasurementMatrix, build_measurement_matrix, dc_power_flow, load_case
from .estimation import BddConfig, calibrate_bdd, estimate_state, inject_and_detect
from .numerics import GaussianStream, sym_eig
from .simulate import TraceConfig, generate_trace
from .spiked import SpikedEstimate, learn_subspace, mp_edges, sample_covariance
from .sparse import tradeoff_curve

__all__ = [
    "ConfigError",
    "DetectionReport",
    "EXPERIMENTS",
    "ExperimentConfig",
    "emit_report",
    "run_experiment",
    "statevar_sweep",
]

EXPERIMENTS = (
    "projection_accuracy",
    "eigenmode_detection",
    "attack_comparison",
    "statevar_sweep",
    "tradeoff",
    "mp_check",
    "fp_calibration",
)

# fixed column order so identical configs serialize to identical bytes
REPORT_COLUMNS = (
    "experiment",
    "case",
    "p",
    "horizon",
    "attack",
    "mode",
    "m_dim",
    "sigma_ratio",
    "noise_seed",
    "trials",
    "empirical_detection_prob",
    "predicted_detection_prob",
    "empirical_eta_median",
    "empirical_eta_mean",
    "proj_sq_mean",
    "omega_hat_mean",
    "k_star",
    "sparsity",
    "s_median",
    "s_mode",
    "s_counts",
    "s_zero_trials",
    "lambda_min",
    "lambda_max",
    "mp_lower",
    "mp_upper",
)


class ConfigError(ValueError):
    """Raised for malformed experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment campaign; JSON configs mirror these fields exactly."""

    case_path: str
    experiment: str
    case_format: str = "auto"
    sigma_n: float = 0.02
    sigma_theta: float = 0.002
    p_ratios: tuple[float, ...] = (0.5,)
    tau: float = 0.3
    fp_rate: float = 0.02
    trials: int = 1000
    master_seed: int = 0
    statevar_ratios: tuple[float, ...] = (0.05, 0.1, 0.2)
    n_modes: int | None = None
    mp_dim: int = 200
    mp_horizon: int = 400
    mp_seeds: int = 20
    eps_zero: float = 1e-6
    reuse_subspace: bool = False
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}"
            )
        if not self.p_ratios or any(p <= 0.0 for p in self.p_ratios):
            raise ConfigError("every p ratio must be positive")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not 0.0 < self.fp_rate < 1.0:
            raise ConfigError("fp_rate must lie in (0, 1)")
        if self.tau <= 0.0:
            raise ConfigError("tau must be positive")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        object.__setattr__(self, "p_ratios", tuple(float(p) for p in self.p_ratios))
        object.__setattr__(
            self, "statevar_ratios", tuple(float(r) for r in self.statevar_ratios)
        )

    @property
    def tau_physical(self) -> float:
        """Impact target in radians^2 (tau is noise-normalized)."""
        return self.tau * self.sigma_n**2

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {unknown}")
        for key in ("p_ratios", "statevar_ratios"):
            if key in doc:
                doc[key] = tuple(doc[key])
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_json(self) -> str:
        doc = asdict(self)
        doc["p_ratios"] = list(self.p_ratios)
        doc["statevar_ratios"] = list(self.statevar_ratios)
        return json.dumps(doc, indent=2, sort_keys=True)

    def hash(self) -> str:
        doc = asdict(self)
        doc.pop("jobs")  # worker count cannot affect outcomes
        return hashlib.sha256(
            json.dumps(doc, sort_keys=True, default=list).encode()
        ).hexdigest()[:16]


@dataclass
class DetectionReport:
    """Aggregated experiment outcomes, one dict per row (REPORT_COLUMNS)."""

    rows: list[dict]
    provenance: dict
    wall_time_s: float = 0.0
    extras: dict = field(default_factory=dict)  # figure payloads, not serialized


# ---------------------------------------------------------------------------
# shared trial machinery
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Context:
    """Everything a worker needs; picklable for the process pool."""

    cfg: ExperimentConfig
    h: MeasurementMatrix
    theta_bar: np.ndarray
    bdd: BddConfig
    u_true: np.ndarray  # top-n eigenvectors of H H^T (oracle side)


def _build_context(cfg: ExperimentConfig) -> _Context:
    case = load_case(cfg.case_path, fmt=cfg.case_format)
    h = build_measurement_matrix(case)
    theta_bar = dc_power_flow(case)
    bdd = calibrate_bdd(h.m, h.n, cfg.fp_rate, cfg.sigma_n)
    u_true = sym_eig(h.h @ h.h.T).eigenvectors[:, : h.n]
    return _Context(cfg=cfg, h=h, theta_bar=theta_bar, bdd=bdd, u_true=u_true)


def _trial_stream(cfg: ExperimentConfig, *key: int) -> GaussianStream:
    return GaussianStream(cfg.master_seed, spawn_key=tuple(key))


def _learn_stream(cfg: ExperimentConfig, group: int, trial: int) -> GaussianStream:
    # reuse_subspace pins every trial's learning window to trial 0's draw
    return _trial_stream(cfg, group, 0 if cfg.reuse_subspace else trial, 0)


def _learn(ctx: _Context, p: float, stream: GaussianStream, sigma_theta: float) -> SpikedEstimate:
    horizon = max(2, int(round(ctx.h.m / p)))
    trace_cfg = TraceConfig(
        sigma_theta=sigma_theta, sigma_n=ctx.cfg.sigma_n, horizon=horizon, seed=ctx.cfg.master_seed
    )
    trace = generate_trace(ctx.h, ctx.theta_bar, trace_cfg, stream=stream)
    return learn_subspace(trace, sigma_n=ctx.cfg.sigma_n)


def _fresh_snapshot(
    ctx: _Context, stream: GaussianStream, sigma_theta: float
) -> tuple[np.ndarray, np.ndarray]:
    theta = ctx.theta_bar + sigma_theta * stream.standard_normal(ctx.h.n)
    z = ctx.h.h @ theta + ctx.cfg.sigma_n * stream.standard_normal(ctx.h.m)
    return theta, z


def _eta(ctx: _Context, z: np.ndarray, theta_true: np.ndarray, result) -> float:
    baseline = estimate_state(ctx.h, z)
    denom = float(np.linalg.norm(baseline - theta_true))
    if denom == 0.0:
        return float("inf")
    return float(np.linalg.norm(result.theta_hat - theta_true)) / denom


def _run_trials(ctx: _Context, worker, indices) -> list:
    """Run per-trial workers serially or in a process pool; order-stable."""
    if ctx.cfg.jobs <= 1:
        return [worker(ctx, t) for t in indices]
    with ProcessPoolExecutor(max_workers=ctx.cfg.jobs) as pool:
        return list(pool.map(_WorkerCall(worker, ctx), indices, chunksize=16))


class _WorkerCall:
    """Picklable (worker, context) closure for pool.map."""

    def __init__(self, worker, ctx: _Context):
        self.worker = worker
        self.ctx = ctx

    def __call__(self, trial: int):
        return self.worker(self.ctx, trial)


def _s_stats(s_values: list[int]) -> dict:
    if not s_values:
        return {"s_median": None, "s_mode": None, "s_counts": "", "s_zero_trials": 0}
    values, counts = np.unique(np.asarray(s_values), return_counts=True)
    mode_pos = int(np.argmax(counts))  # lowest value wins count ties
    return {
        "s_median": float(np.median(s_values)),
        "s_mode": int(values[mode_pos]),
        "s_counts": "|".join(f"{int(v)}:{int(c)}" for v, c in zip(values, counts)),
        "s_zero_trials": int(sum(1 for s in s_values if s == 0)),
    }


def _row(**kwargs) -> dict:
    row = {col: None for col in REPORT_COLUMNS}
    for key, value in kwargs.items():
        if key not in row:
            raise KeyError(f"unknown report column {key!r}")
        row[key] = value
    return row


def _rate(flags: list[bool]) -> float | None:
    return float(np.mean(flags)) if flags else None


def _median_mean(values: list[float]) -> tuple[float | None, float | None]:
    finite = [v for v in values if np.isfinite(v)]
    if not finite:
        return None, None
    return float(np.median(finite)), float(np.mean(finite))


# ---------------------------------------------------------------------------
# per-experiment trial workers (module level: picklable)
# ---------------------------------------------------------------------------

def _fp_trial(ctx: _Context, trial: int) -> bool:
    stream = _trial_stream(ctx.cfg, 0, trial)
    _, z = _fresh_snapshot(ctx, stream, ctx.cfg.sigma_theta)
    return inject_and_detect(ctx.h, z, np.zeros(ctx.h.m), ctx.bdd).alarm


def _projection_trial(ctx: _Context, args: tuple) -> tuple:
    p_index, trial = args
    cfg = ctx.cfg
    est = _learn(ctx, cfg.p_ratios[p_index], _learn_stream(cfg, p_index, trial), cfg.sigma_theta)
    projections = np.sum((ctx.u_true.T @ est.u_hat) ** 2, axis=0) if est.s else np.empty(0)
    diag = (
        np.array([(est.u_hat[:, i] @ ctx.u_true[:, i]) ** 2 for i in range(min(est.s, ctx.h.n))])
        if est.s
        else np.empty(0)
    )
    return est.s, diag, est.omega_hat, projections


def _eigenmode_trial(ctx: _Context, args: tuple) -> tuple:
    p_index, trial = args
    cfg = ctx.cfg
    est = _learn(ctx, cfg.p_ratios[p_index], _learn_stream(cfg, p_index, trial), cfg.sigma_theta)
    n_modes = cfg.n_modes if cfg.n_modes is not None else ctx.h.n
    if est.s == 0:
        return 0, [], [], []
    theta, z = _fresh_snapshot(ctx, _trial_stream(cfg, p_index, trial, 1), cfg.sigma_theta)
    sv = StateVarianceEstimate(cfg.sigma_theta)
    alarms, predicted, etas = [], [], []
    for i in range(1, n_modes + 1):
        attack = eigenmode_attack(
            est, i, cfg.tau_physical, sv, bdd=ctx.bdd, allow_extended=True
        )
        result = inject_and_detect(ctx.h, z, attack, ctx.bdd)
        alarms.append(result.alarm)
        predicted.append(attack.predicted_detection_prob)
        etas.append(_eta(ctx, z, theta, result))
    return est.s, alarms, predicted, etas


def _comparison_trial(ctx: _Context, args: tuple) -> tuple:
    p_index, trial = args
    cfg = ctx.cfg
    est = _learn(ctx, cfg.p_ratios[p_index], _learn_stream(cfg, p_index, trial), cfg.sigma_theta)
    if est.s == 0:
        return 0, None
    theta, z = _fresh_snapshot(ctx, _trial_stream(cfg, p_index, trial, 1), cfg.sigma_theta)
    sv = StateVarianceEstimate(cfg.sigma_theta)
    out = {}
    attacks = {
        "optimal_mode1": optimal_attack(est, cfg.tau_physical, sv, bdd=ctx.bdd),
        "full_subspace": full_subspace_attack(
            est, cfg.tau_physical, sv, n_modes=ctx.h.n, bdd=ctx.bdd
        ),
    }
    for name, attack in attacks.items():
        result = inject_and_detect(ctx.h, z, attack, ctx.bdd)
        out[name] = (result.alarm, attack.predicted_detection_prob, _eta(ctx, z, theta, result))
    return est.s, out


def _statevar_trial(ctx: _Context, args: tuple) -> tuple:
    ratio_index, trial, ratio = args
    cfg = ctx.cfg
    sigma_theta = ratio * cfg.sigma_n
    est = _learn(ctx, cfg.p_ratios[0], _trial_stream(cfg, 80 + ratio_index, trial, 0), sigma_theta)
    if est.s == 0 or ratio <= 0.0:
        return est.s, None
    theta, z = _fresh_snapshot(ctx, _trial_stream(cfg, 80 + ratio_index, trial, 1), sigma_theta)
    sv = StateVarianceEstimate(sigma_theta)
    attack = optimal_attack(est, cfg.tau_physical, sv, bdd=ctx.bdd)
    result = inject_and_detect(ctx.h, z, attack, ctx.bdd)
    return est.s, (result.alarm, attack.predicted_detection_prob, _eta(ctx, z, theta, result))


# ---------------------------------------------------------------------------
# experiment drivers
# ---------------------------------------------------------------------------

def _run_fp_calibration(ctx: _Context) -> list[dict]:
    alarms = _run_trials(ctx, _fp_trial, range(ctx.cfg.trials))
    return [
        _row(
            experiment="fp_calibration",
            case=ctx.cfg.case_path,
            trials=ctx.cfg.trials,
            empirical_detection_prob=_rate(alarms),
            predicted_detection_prob=ctx.cfg.fp_rate,
        )
    ]


def _run_projection_accuracy(ctx: _Context) -> list[dict]:
    cfg = ctx.cfg
    rows = []
    for p_index, p in enumerate(cfg.p_ratios):
        outcomes = _run_trials(
            ctx, _projection_trial, [(p_index, t) for t in range(cfg.trials)]
        )
        s_values = [s for s, _, _, _ in outcomes]
        stats = _s_stats(s_values)
        n_modes = cfg.n_modes if cfg.n_modes is not None else ctx.h.n
        for i in range(n_modes):
            proj = [d[i] for _, d, _, _ in outcomes if d.size > i]
            omegas = [o[i] for _, _, o, _ in outcomes if o.size > i]
            if not proj:
                continue
            rows.append(
                _row(
                    experiment="projection_accuracy",
                    case=cfg.case_path,
                    p=p,
                    horizon=max(2, int(round(ctx.h.m / p))),
                    mode=i + 1,
                    trials=len(proj),
                    proj_sq_mean=float(np.mean(proj)),
                    omega_hat_mean=float(np.mean(omegas)),
                    **stats,
                )
            )
    return rows


def _run_eigenmode_detection(ctx: _Context) -> list[dict]:
    cfg = ctx.cfg
    rows = []
    n_modes = cfg.n_modes if cfg.n_modes is not None else ctx.h.n
    for p_index, p in enumerate(cfg.p_ratios):
        outcomes = _run_trials(
            ctx, _eigenmode_trial, [(p_index, t) for t in range(cfg.trials)]
        )
        stats = _s_stats([s for s, _, _, _ in outcomes])
        for i in range(n_modes):
            alarms = [a[i] for _, a, _, _ in outcomes if a]
            preds = [pr[i] for _, _, pr, _ in outcomes if pr]
            etas = [e[i] for _, _, _, e in outcomes if e]
            eta_med, eta_mean = _median_mean(etas)
            rows.append(
                _row(
                    experiment="eigenmode_detection",
                    case=cfg.case_path,
                    p=p,
                    horizon=max(2, int(round(ctx.h.m / p))),
                    mode=i + 1,
                    attack=f"eigenmode({i + 1})",
                    trials=len(alarms),
                    empirical_detection_prob=_rate(alarms),
                    predicted_detection_prob=float(np.mean(preds)) if preds else None,
                    empirical_eta_median=eta_med,
                    empirical_eta_mean=eta_mean,
                    **stats,
                )
            )
    return rows


def _run_attack_comparison(ctx: _Context) -> list[dict]:
    cfg = ctx.cfg
    rows = []
    for p_index, p in enumerate(cfg.p_ratios):
        outcomes = _run_trials(
            ctx, _comparison_trial, [(p_index, t) for t in range(cfg.trials)]
        )
        stats = _s_stats([s for s, _ in outcomes])
        for name in ("optimal_mode1", "full_subspace"):
            alarms = [o[name][0] for _, o in outcomes if o]
            preds = [o[name][1] for _, o in outcomes if o]
            etas = [o[name][2] for _, o in outcomes if o]
            eta_med, eta_mean = _median_mean(etas)
            rows.append(
                _row(
                    experiment="attack_comparison",
                    case=cfg.case_path,
                    p=p,
                    horizon=max(2, int(round(ctx.h.m / p))),
                    attack=name,
                    trials=len(alarms),
                    empirical_detection_prob=_rate(alarms),
                    predicted_detection_prob=float(np.mean(preds)) if preds else None,
                    empirical_eta_median=eta_med,
                    empirical_eta_mean=eta_mean,
                    **stats,
                )
            )
    return rows


def _run_statevar_sweep(ctx: _Context, ratios: tuple[float, ...] | None = None) -> list[dict]:
    cfg = ctx.cfg
    ratios = tuple(ratios) if ratios is not None else cfg.statevar_ratios
    rows = []
    for ratio_index, ratio in enumerate(ratios):
        outcomes = _run_trials(
            ctx,
            _statevar_trial,
            [(ratio_index, t, ratio) for t in range(cfg.trials)],
        )
        stats = _s_stats([s for s, _ in outcomes])
        alarms = [o[0] for _, o in outcomes if o]
        preds = [o[1] for _, o in outcomes if o]
        etas = [o[2] for _, o in outcomes if o]
        eta_med, eta_mean = _median_mean(etas)
        rows.append(
            _row(
                experiment="statevar_sweep",
                case=cfg.case_path,
                p=cfg.p_ratios[0],
                horizon=max(2, int(round(ctx.h.m / cfg.p_ratios[0]))),
                attack="optimal_mode1",
                sigma_ratio=ratio,
                trials=len(alarms),
                empirical_detection_prob=_rate(alarms),
                predicted_detection_prob=float(np.mean(preds)) if preds else None,
                empirical_eta_median=eta_med,
                empirical_eta_mean=eta_mean,
                **stats,
            )
        )
    return rows


def _run_tradeoff(ctx: _Context) -> list[dict]:
    cfg = ctx.cfg
    sv = StateVarianceEstimate(cfg.sigma_theta)
    rows = []
    for p_index, p in enumerate(cfg.p_ratios):
        est = _learn(ctx, p, _trial_stream(cfg, p_index, 0, 0), cfg.sigma_theta)
        if est.s == 0:
            rows.append(
                _row(
                    experiment="tradeoff",
                    case=cfg.case_path,
                    p=p,
                    trials=0,
                    s_median=0.0,
                    s_mode=0,
                    s_zero_trials=1,
                )
            )
            continue

        def evaluator(attack, p_index=p_index) -> float:
            alarms = []
            for t in range(cfg.trials):
                stream = _trial_stream(cfg, p_index, t, 1)
                _, z = _fresh_snapshot(ctx, stream, cfg.sigma_theta)
                alarms.append(inject_and_detect(ctx.h, z, attack, ctx.bdd).alarm)
            return float(np.mean(alarms))

        curve = tradeoff_curve(
            est,
            cfg.tau_physical,
            sv,
            eps_zero=cfg.eps_zero,
            bdd=ctx.bdd,
            evaluator=evaluator,
        )
        for pt in curve.points:
            rows.append(
                _row(
                    experiment="tradeoff",
                    case=cfg.case_path,
                    p=p,
                    horizon=max(2, int(round(ctx.h.m / p))),
                    m_dim=pt.m,
                    k_star=pt.k_star,
                    sparsity=pt.sparsity,
                    trials=cfg.trials,
                    empirical_detection_prob=pt.empirical_detection_prob,
                    predicted_detection_prob=pt.predicted_detection_prob,
                    s_median=float(est.s),
                    s_mode=est.s,
                )
            )
    return rows


def _run_mp_check(ctx_or_cfg, extras: dict) -> list[dict]:
    cfg = ctx_or_cfg.cfg if isinstance(ctx_or_cfg, _Context) else ctx_or_cfg
    p = cfg.mp_dim / cfg.mp_horizon
    edges = mp_edges(p)
    rows = []
    pooled = []
    for k in range(cfg.mp_seeds):
        stream = GaussianStream(cfg.master_seed, spawn_key=(90, k))
        noise = cfg.sigma_n * stream.standard_normal((cfg.mp_dim, cfg.mp_horizon))
        eigenvalues = np.linalg.eigvalsh(sample_covariance(noise) / cfg.sigma_n**2)
        pooled.extend(eigenvalues.tolist())
        rows.append(
            _row(
                experiment="mp_check",
                case="pure_noise",
                p=p,
                horizon=cfg.mp_horizon,
                noise_seed=k,
                trials=1,
                lambda_min=float(eigenvalues.min()),
                lambda_max=float(eigenvalues.max()),
                mp_lower=edges.a_minus,
                mp_upper=edges.b_plus,
            )
        )
    extras["mp_eigenvalues"] = pooled
    extras["mp_p"] = p
    return rows


def run_experiment(cfg: ExperimentConfig) -> DetectionReport:
    """Run the configured campaign and aggregate a deterministic report."""
    start = time.monotonic()
    extras: dict = {}
    if cfg.experiment == "mp_check":
        rows = _run_mp_check(cfg, extras)
    else:
        ctx = _build_context(cfg)
        runner = {
            "fp_calibration": _run_fp_calibration,
            "projection_accuracy": _run_projection_accuracy,
            "eigenmode_detection": _run_eigenmode_detection,
            "attack_comparison": _run_attack_comparison,
            "statevar_sweep": _run_statevar_sweep,
            "tradeoff": _run_tradeoff,
        }[cfg.experiment]
        rows = runner(ctx)
    return DetectionReport(
        rows=rows,
        provenance={
            "config_hash": cfg.hash(),
            "master_seed": cfg.master_seed,
            "artifact_version": __version__,
            "experiment": cfg.experiment,
        },
        wall_time_s=time.monotonic() - start,
        extras=extras,
    )


def statevar_sweep(cfg: ExperimentConfig, ratios: tuple[float, ...] | None = None) -> DetectionReport:
    """Optimal-attack detection across state-fluctuation ratios at fixed p."""
    start = time.monotonic()
    ctx = _build_context(cfg)
    rows = _run_statevar_sweep(ctx, ratios)
    return DetectionReport(
        rows=rows,
        provenance={
            "config_hash": cfg.hash(),
            "master_seed": cfg.master_seed,
            "artifact_version": __version__,
            "experiment": "statevar_sweep",
        },
        wall_time_s=time.monotonic() - start,
    )


# ---------------------------------------------------------------------------
# report serialization
# ---------------------------------------------------------------------------

def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def emit_report(report: DetectionReport, path: str, fmt: str = "csv", include_timing: bool = False) -> None:
    """Serialize a report; identical reports produce byte-identical files.

    Timing is excluded by default because wall time varies run to run and
    the output is meant to be reproducible; pass include_timing=True for a
    local, non-reproducible copy.
    """
    if fmt == "csv":
        lines = ["# " + json.dumps(report.provenance, sort_keys=True)]
        if include_timing:
            lines.append(f"# wall_time_s={report.wall_time_s:.3f}")
        lines.append(",".join(REPORT_COLUMNS))
        for row in report.rows:
            lines.append(",".join(_format_cell(row[col]) for col in REPORT_COLUMNS))
        payload = "\n".join(lines) + "\n"
    elif fmt == "json":
        doc = {
            "provenance": report.provenance,
            "rows": [
                {
                    k: (float(format(v, ".10g")) if isinstance(v, float) else v)
                    for k, v in row.items()
                    if v is not None
                }
                for row in report.rows
            ],
        }
        if include_timing:
            doc["wall_time_s"] = round(report.wall_time_s, 3)
        payload = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(payload)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def read_report_json(path: str) -> DetectionReport:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    rows = []
    for row in doc["rows"]:
        full = {col: row.get(col) for col in REPORT_COLUMNS}
        rows.append(full)
    return DetectionReport(rows=rows, provenance=doc.get("provenance", {}))
