"""Command-line front end.

Subcommands cover the whole pipeline: case inspection, trace simulation,
subspace learning, attack construction, detector evaluation, the
stealth/sparsity trade-off, the pure-noise spectrum check, and full
experiment reports (CSV/JSON plus rendered figures).

Exit codes: 0 success, 1 configuration or parse error, 2 numerical
failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .attacks import (
    StateVarianceEstimate,
    attack_from_json,
    attack_to_json,
    eigenmode_attack,
    full_subspace_attack,
    optimal_attack,
)
from .cases import CaseError, build_measurement_matrix, dc_power_flow, load_case, serialize_native_case
from .estimation import calibrate_bdd, inject_and_detect
from .harness import (
    ConfigError,
    DetectionReport,
    ExperimentConfig,
    emit_report,
    run_experiment,
)
from .numerics import GaussianStream, NumericsError
from .simulate import TraceConfig, generate_trace, read_trace_csv, write_trace_csv
from .spiked import SpikedEstimate, SubspaceError, learn_subspace

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2
EXIT_IO = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # align argparse usage errors with exit code 1
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _load_config(args) -> ExperimentConfig:
    with open(args.config, "r", encoding="utf-8") as fh:
        cfg = ExperimentConfig.from_json(fh.read())
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["master_seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        overrides["trials"] = args.trials
    if getattr(args, "p", None) is not None:
        overrides["p_ratios"] = (args.p,)
    if getattr(args, "tau", None) is not None:
        overrides["tau"] = args.tau
    if getattr(args, "jobs", None) is not None:
        overrides["jobs"] = args.jobs
    if getattr(args, "experiment", None) is not None:
        overrides["experiment"] = args.experiment
    if overrides:
        doc = json.loads(cfg.to_json())
        doc.update(overrides)
        cfg = ExperimentConfig.from_json(json.dumps(doc))
    return cfg


def _emit(report: DetectionReport, args) -> None:
    out = args.out or f"{report.provenance['experiment']}_report.{args.format}"
    emit_report(report, out, fmt=args.format)
    print(f"report written to {out}")
    if getattr(args, "figures", True):
        from .figures import render_report_figures

        outdir = os.path.dirname(os.path.abspath(out)) or "."
        for path in render_report_figures(report, outdir):
            print(f"figure written to {path}")


def _case_context(cfg: ExperimentConfig):
    case = load_case(cfg.case_path, fmt=cfg.case_format)
    h = build_measurement_matrix(case)
    return case, h, dc_power_flow(case)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_parse_case(args) -> int:
    case = load_case(args.path, fmt=args.case_format)
    h = build_measurement_matrix(case)
    theta = dc_power_flow(case)
    print(f"case: {case.name}")
    print(f"buses: {len(case.buses)}  branches: {len(case.branches)} "
          f"(in service: {len(case.in_service_branches)})")
    print(f"measurements M = {h.m}  state dimension n = {h.n}")
    print(f"reference bus: {case.reference_bus}  base: {case.base_mva:g} MVA")
    print(f"base-case angle range: [{theta.min():.4f}, {theta.max():.4f}] rad")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(serialize_native_case(case) + "\n")
        print(f"native JSON written to {args.out}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    cfg = _load_config(args)
    _, h, theta_bar = _case_context(cfg)
    p = cfg.p_ratios[0]
    trace_cfg = TraceConfig(
        sigma_theta=cfg.sigma_theta,
        sigma_n=cfg.sigma_n,
        horizon=max(2, int(round(h.m / p))),
        seed=cfg.master_seed,
    )
    trace = generate_trace(h, theta_bar, trace_cfg)
    out = args.out or "trace.csv"
    write_trace_csv(trace, out)
    print(f"{trace.m} x {trace.horizon} trace written to {out} (sidecar {out}.meta.json)")
    return EXIT_OK


def _cmd_learn(args) -> int:
    cfg = _load_config(args)
    if args.trace:
        z, _, trace_cfg = read_trace_csv(args.trace)
        sigma_n = None if args.estimate_noise else (
            trace_cfg.sigma_n if trace_cfg is not None else cfg.sigma_n
        )
        est = learn_subspace(z, sigma_n=sigma_n)
    else:
        _, h, theta_bar = _case_context(cfg)
        p = cfg.p_ratios[0]
        trace_cfg = TraceConfig(
            sigma_theta=cfg.sigma_theta,
            sigma_n=cfg.sigma_n,
            horizon=max(2, int(round(h.m / p))),
            seed=cfg.master_seed,
        )
        trace = generate_trace(h, theta_bar, trace_cfg)
        est = learn_subspace(trace, sigma_n=None if args.estimate_noise else cfg.sigma_n)
    out = args.out or "estimate.json"
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(est.to_json() + "\n")
    print(f"p = {est.p_ratio:.4g}, recoverable modes s = {est.s}; estimate written to {out}")
    if est.s == 0:
        print("note: no recoverable subspace in this window")
    return EXIT_OK


def _cmd_attack(args) -> int:
    cfg = _load_config(args)
    with open(args.estimate, "r", encoding="utf-8") as fh:
        est = SpikedEstimate.from_json(fh.read())
    sv = StateVarianceEstimate(cfg.sigma_theta)
    _, h, _ = _case_context(cfg)
    bdd = calibrate_bdd(h.m, h.n, cfg.fp_rate, cfg.sigma_n)
    tau = cfg.tau_physical
    kind = args.construction
    if kind == "optimal":
        attack = optimal_attack(est, tau, sv, bdd=bdd)
    elif kind.startswith("eigenmode:"):
        index = int(kind.split(":", 1)[1])
        attack = eigenmode_attack(est, index, tau, sv, bdd=bdd, allow_extended=True)
    elif kind == "full":
        attack = full_subspace_attack(est, tau, sv, n_modes=h.n, bdd=bdd)
    elif kind.startswith("sparse:"):
        from .sparse import sparsest_attack

        m = int(kind.split(":", 1)[1])
        attack = sparsest_attack(est, m, tau, sv, eps_zero=cfg.eps_zero, bdd=bdd).attack
    else:
        print(f"unknown construction {kind!r}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or "attack.json"
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(attack_to_json(attack) + "\n")
    prob = attack.predicted_detection_prob
    print(
        f"{attack.construction}: |a| = {np.linalg.norm(attack.vector):.4g} pu, "
        f"predicted shift = {attack.predicted_nu:.4g}, "
        f"predicted detection = {prob if prob is None else format(prob, '.4f')}"
    )
    print(f"attack written to {out}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    with open(args.attack, "r", encoding="utf-8") as fh:
        attack = attack_from_json(fh.read())
    _, h, theta_bar = _case_context(cfg)
    bdd = calibrate_bdd(h.m, h.n, cfg.fp_rate, cfg.sigma_n)
    master = GaussianStream(cfg.master_seed, spawn_key=(99,))
    alarms = []
    for t in range(cfg.trials):
        stream = master.derive(t)
        theta = theta_bar + cfg.sigma_theta * stream.standard_normal(h.n)
        z = h.h @ theta + cfg.sigma_n * stream.standard_normal(h.m)
        alarms.append(inject_and_detect(h, z, attack, bdd).alarm)
    rate = float(np.mean(alarms))
    predicted = attack.predicted_detection_prob
    print(f"empirical detection over {cfg.trials} trials: {rate:.4f}")
    if predicted is not None:
        print(f"predicted detection: {predicted:.4f}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "construction": attack.construction,
                    "trials": cfg.trials,
                    "empirical_detection_prob": rate,
                    "predicted_detection_prob": predicted,
                },
                fh,
                indent=2,
                sort_keys=True,
            )
            fh.write("\n")
        print(f"evaluation written to {args.out}")
    return EXIT_OK


def _cmd_tradeoff(args) -> int:
    cfg = _load_config(args)
    if cfg.experiment != "tradeoff":
        cfg = ExperimentConfig.from_json(
            json.dumps({**json.loads(cfg.to_json()), "experiment": "tradeoff"})
        )
    report = run_experiment(cfg)
    _emit(report, args)
    return EXIT_OK


def _cmd_mp_check(args) -> int:
    cfg = _load_config(args)
    if cfg.experiment != "mp_check":
        cfg = ExperimentConfig.from_json(
            json.dumps({**json.loads(cfg.to_json()), "experiment": "mp_check"})
        )
    report = run_experiment(cfg)
    bad = [
        r for r in report.rows
        if r["lambda_max"] > r["mp_upper"] + 0.1 or r["lambda_min"] < r["mp_lower"] - 0.1
    ]
    print(f"{len(report.rows)} pure-noise spectra checked; {len(bad)} escaped the bulk band")
    _emit(report, args)
    return EXIT_OK if not bad else EXIT_NUMERIC


def _cmd_report(args) -> int:
    cfg = _load_config(args)
    report = run_experiment(cfg)
    _emit(report, args)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gridspike", description=__doc__)
    parser.add_argument("--version", action="version", version=f"gridspike {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_format=True):
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--seed", type=int, help="override master_seed")
        p.add_argument("--trials", type=int, help="override trials")
        p.add_argument("--p", type=float, help="override p_ratios with a single value")
        p.add_argument("--tau", type=float, help="override the impact target")
        p.add_argument("--jobs", type=int, help="parallel trial workers")
        p.add_argument("--out", help="output path")
        if with_format:
            p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("parse-case", help="validate a case file and print its dimensions")
    p.add_argument("path")
    p.add_argument("--case-format", choices=("auto", "matpower", "native"), default="auto")
    p.add_argument("--out", help="write the case back in native JSON")
    p.set_defaults(func=_cmd_parse_case)

    p = sub.add_parser("simulate", help="generate a measurement trace CSV")
    add_common(p, with_format=False)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("learn", help="learn the spiked-spectrum estimate from a trace")
    add_common(p, with_format=False)
    p.add_argument("--trace", help="trace CSV (default: simulate internally)")
    p.add_argument(
        "--estimate-noise",
        action="store_true",
        help="estimate the noise floor from the bulk instead of using the config value",
    )
    p.set_defaults(func=_cmd_learn)

    p = sub.add_parser("attack", help="construct an attack from a learned estimate")
    add_common(p, with_format=False)
    p.add_argument("--estimate", required=True, help="estimate JSON from `learn`")
    p.add_argument(
        "--construction",
        default="optimal",
        help="optimal | eigenmode:<i> | full | sparse:<m>",
    )
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("evaluate", help="empirical detection rate of a stored attack")
    add_common(p, with_format=False)
    p.add_argument("--attack", required=True, help="attack JSON from `attack`")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("tradeoff", help="stealth/sparsity trade-off report")
    add_common(p)
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=_cmd_tradeoff, figures=True)

    p = sub.add_parser("mp-check", help="pure-noise bulk containment report")
    add_common(p)
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=_cmd_mp_check, figures=True)

    p = sub.add_parser("report", help="run the experiment named in the config")
    add_common(p)
    p.add_argument("--experiment", choices=None, help="override the config experiment")
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=_cmd_report, figures=True)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (CaseError, ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericsError, SubspaceError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
