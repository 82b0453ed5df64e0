"""File-rendered matplotlib figures for each experiment report.

Rendering is headless (Agg) and writes PNG files next to the delimited
report output; nothing here is needed for the numerical pipeline.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import DetectionReport
from .spiked import mp_edges

__all__ = ["render_report_figures"]


def _rows_for(report: DetectionReport, **match) -> list[dict]:
    out = []
    for row in report.rows:
        if all(row.get(k) == v for k, v in match.items()):
            out.append(row)
    return out


def _values(rows: list[dict], key: str) -> list:
    return [row[key] for row in rows]


def _save(fig, outdir: str, name: str) -> str:
    path = os.path.join(outdir, name)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _p_values(report: DetectionReport) -> list:
    seen = []
    for row in report.rows:
        if row["p"] is not None and row["p"] not in seen:
            seen.append(row["p"])
    return seen


def _plot_projection(report: DetectionReport, outdir: str) -> list[str]:
    paths = []
    for p in _p_values(report):
        rows = _rows_for(report, p=p)
        modes = _values(rows, "mode")
        width = 0.4
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.bar(
            [m - width / 2 for m in modes],
            _values(rows, "proj_sq_mean"),
            width,
            label="simulated projection",
        )
        ax.bar(
            [m + width / 2 for m in modes],
            _values(rows, "omega_hat_mean"),
            width,
            label="spectral estimate",
        )
        ax.set_xlabel("eigenmode index")
        ax.set_ylabel("squared projection on true eigenvector")
        ax.set_ylim(0, 1.05)
        ax.set_title(f"Eigenmode estimation accuracy, p = {p:g}")
        ax.legend()
        paths.append(_save(fig, outdir, f"projection_accuracy_p{p:g}.png"))
    return paths


def _plot_eigenmode(report: DetectionReport, outdir: str) -> list[str]:
    fig, ax = plt.subplots(figsize=(7, 4))
    for p in _p_values(report):
        rows = _rows_for(report, p=p)
        modes = _values(rows, "mode")
        ax.plot(modes, _values(rows, "empirical_detection_prob"), "o-", label=f"empirical, p={p:g}")
        ax.plot(modes, _values(rows, "predicted_detection_prob"), "s--", alpha=0.6, label=f"predicted, p={p:g}")
    ax.set_xlabel("eigenmode index")
    ax.set_ylabel("detection probability")
    ax.set_ylim(-0.02, 1.05)
    ax.set_title("Detection probability per attacked eigenmode")
    ax.legend(fontsize=8)
    return [_save(fig, outdir, "eigenmode_detection.png")]


def _plot_comparison(report: DetectionReport, outdir: str) -> list[str]:
    fig, ax = plt.subplots(figsize=(7, 4))
    for attack, style in (("optimal_mode1", "o-"), ("full_subspace", "s--")):
        rows = _rows_for(report, attack=attack)
        rows.sort(key=lambda r: r["p"])
        ax.plot(_values(rows, "p"), _values(rows, "empirical_detection_prob"), style, label=attack)
    ax.set_xscale("log")
    ax.set_xlabel("window aspect ratio p = M/T")
    ax.set_ylabel("detection probability")
    ax.set_ylim(-0.02, 1.05)
    ax.set_title("Single-mode vs full-subspace attack")
    ax.legend()
    return [_save(fig, outdir, "attack_comparison.png")]


def _plot_statevar(report: DetectionReport, outdir: str) -> list[str]:
    rows = [r for r in report.rows if r["sigma_ratio"] is not None]
    rows.sort(key=lambda r: r["sigma_ratio"])
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(
        _values(rows, "sigma_ratio"),
        _values(rows, "empirical_detection_prob"),
        "o-",
        label="empirical",
    )
    ax.plot(
        _values(rows, "sigma_ratio"),
        _values(rows, "predicted_detection_prob"),
        "s--",
        label="predicted",
    )
    ax.set_xlabel("state-to-noise fluctuation ratio")
    ax.set_ylabel("detection probability")
    ax.set_title("Optimal attack detectability vs state fluctuation")
    ax.legend()
    return [_save(fig, outdir, "statevar_sweep.png")]


def _plot_tradeoff(report: DetectionReport, outdir: str) -> list[str]:
    fig, ax = plt.subplots(figsize=(7, 4))
    for p in _p_values(report):
        rows = [r for r in _rows_for(report, p=p) if r["k_star"] is not None]
        if not rows:
            continue
        xs = _values(rows, "sparsity")
        which = (
            "empirical_detection_prob"
            if rows[0]["empirical_detection_prob"] is not None
            else "predicted_detection_prob"
        )
        ax.plot(xs, _values(rows, which), "o-", label=f"p={p:g}")
    ax.set_xlabel("attack sparsity (zero entries)")
    ax.set_ylabel("detection probability")
    ax.set_title("Stealth vs sparsity trade-off")
    ax.legend()
    return [_save(fig, outdir, "tradeoff.png")]


def _plot_mp(report: DetectionReport, outdir: str) -> list[str]:
    fig, ax = plt.subplots(figsize=(7, 4))
    p = report.extras.get("mp_p")
    eigenvalues = report.extras.get("mp_eigenvalues")
    if p is None:
        rows = report.rows
        p = rows[0]["p"] if rows else 0.5
    edges = mp_edges(p)
    if eigenvalues:
        ax.hist(eigenvalues, bins=60, density=True, alpha=0.6, label="sample eigenvalues")
        grid = np.linspace(edges.a_minus + 1e-9, edges.b_plus - 1e-9, 400)
        density = np.sqrt((edges.b_plus - grid) * (grid - edges.a_minus)) / (2 * np.pi * p * grid)
        ax.plot(grid, density, "r-", label="limiting bulk density")
    ax.axvline(edges.a_minus, color="k", linestyle=":", label="bulk edges")
    ax.axvline(edges.b_plus, color="k", linestyle=":")
    ax.set_xlabel("normalized eigenvalue")
    ax.set_ylabel("density")
    ax.set_title(f"Pure-noise spectrum vs limiting law, p = {p:g}")
    ax.legend()
    return [_save(fig, outdir, "mp_check.png")]


def _plot_fp(report: DetectionReport, outdir: str) -> list[str]:
    row = report.rows[0]
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.bar([0, 1], [row["empirical_detection_prob"], row["predicted_detection_prob"]])
    ax.set_xticks([0, 1], ["empirical", "nominal"])
    ax.set_ylabel("no-attack alarm rate")
    ax.set_title("False-positive calibration")
    return [_save(fig, outdir, "fp_calibration.png")]


_PLOTTERS = {
    "projection_accuracy": _plot_projection,
    "eigenmode_detection": _plot_eigenmode,
    "attack_comparison": _plot_comparison,
    "statevar_sweep": _plot_statevar,
    "tradeoff": _plot_tradeoff,
    "mp_check": _plot_mp,
    "fp_calibration": _plot_fp,
}


def render_report_figures(report: DetectionReport, outdir: str) -> list[str]:
    """Render the figure(s) for a report into ``outdir``; returns paths."""
    experiment = report.provenance.get("experiment")
    plotter = _PLOTTERS.get(experiment)
    if plotter is None or not report.rows:
        return []
    os.makedirs(outdir, exist_ok=True)
    return plotter(report, outdir)
