"""Command-line entry point: chsh, scan, verify, pr-spectrum, simulate.

Exit codes: 0 success, 1 failed check, 2 configuration error, 3 model error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any

import numpy as np

from .chsh import TSIRELSON, chsh_value, optimize_chsh
from .config import ConfigError, ExperimentConfig, ReportEnvelope, load_config, write_csv
from .ensemble import (
    count_violating_trials,
    ensemble_chsh,
    estimate_correlation,
    partition_analysis,
    scan_ensemble,
    simulate_ensemble,
    thread_count,
)
from .models import (
    GeneralizedPrModel,
    ModelError,
    QuantumModel,
    conservation_deviation,
    generic_chsh,
    model_from_descriptor,
)
from .quantum import Parity, conditional_average, correlation, joint_distribution
from .settings import ChshSettings, Party, pr_assignment
from .verify import run_verification

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_MODEL = 0, 1, 2, 3


def _out_dir(cfg: ExperimentConfig) -> Path | None:
    if cfg.output_dir is None:
        return None
    path = Path(cfg.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def cmd_chsh(cfg: ExperimentConfig) -> ReportEnvelope:
    model = cfg.build_model()
    if cfg.optimize:
        report = optimize_chsh(model, cfg.optimize, cfg.grid_points, cfg.refine_iters)
    else:
        report = chsh_value(model, cfg.chsh_settings())
    results = {"chsh": report.to_dict(), "tsirelson": TSIRELSON, "tolerance": cfg.tolerances.analytic}
    if cfg.optimize:
        results["tolerance"] = cfg.tolerances.optimizer
    envelope = ReportEnvelope("chsh", cfg.echo(), results)
    out = _out_dir(cfg)
    if out is not None:
        _write(out / "chsh_report.json", envelope.to_json())
        rows = [
            [str(a), str(b), corr]
            for (a, b), corr in zip(report.settings.pairs(), report.correlations)
        ]
        _write(out / "chsh_correlations.csv", write_csv(["alice_setting", "bob_setting", "correlation"], rows))
    return envelope


def cmd_scan(cfg: ExperimentConfig) -> str:
    model = cfg.build_model()
    if not isinstance(model, QuantumModel):
        raise ModelError("scan needs a quantum model")
    state = model.state
    rows = []
    for theta in np.linspace(cfg.scan.start, cfg.scan.stop, cfg.scan.points):
        theta = float(theta)
        dist = joint_distribution(state, theta, 0.0)
        rows.append([theta, *dist.as_tuple(), correlation(dist), conditional_average(state, theta, 1)])
    text = write_csv(["theta", "pPP", "pPM", "pMP", "pMM", "correlation", "conditional_avg_plus"], rows)
    out = _out_dir(cfg)
    if out is not None:
        _write(out / "scan.csv", text)
    return text


def cmd_pr_spectrum(cfg: ExperimentConfig) -> str:
    state = cfg.target_state()
    cell = "first" if state.parity is Parity.UNLIKE else "fourth"
    settings = pr_assignment(state)
    discrete = ChshSettings.discrete()
    rows = []
    n = cfg.spectrum.points
    for k in range(n):
        c = 0.5 * k / (n - 1)
        e = 0.5 - c
        first = generic_chsh(GeneralizedPrModel(c, e, "first"), discrete)
        fourth = generic_chsh(GeneralizedPrModel(c, e, "fourth"), discrete)
        dev = conservation_deviation(GeneralizedPrModel(c, e, cell), state, settings)
        rows.append([c, e, first, fourth, dev])
    text = write_csv(["c", "e", "chsh_first_cell", "chsh_fourth_cell", "conservation_deviation"], rows)
    out = _out_dir(cfg)
    if out is not None:
        _write(out / "pr_spectrum.csv", text)
    return text


def cmd_verify(cfg: ExperimentConfig) -> tuple[int, dict[str, Any]]:
    extras = [model_from_descriptor(m.model_dump(exclude_none=True)) for m in cfg.verify_models]
    reports = run_verification(
        extras,
        tol=cfg.tolerances.analytic,
        optimizer_tol=cfg.tolerances.optimizer,
        seed=cfg.seed,
        grid_points=cfg.grid_points,
        refine_iters=cfg.refine_iters,
    )
    bounds = next(r for r in reports if r.name == "bound-ordering").details[0]
    summary = {
        "passed": all(r.passed for r in reports),
        "failed": [r.name for r in reports if not r.passed],
        "bound_ordering": [bounds["classical"], bounds["quantum"], bounds["pr"]],
        "checks": [
            {"name": r.name, "passed": r.passed, "max_violation": r.max_violation, "tol": r.tol}
            for r in reports
        ],
    }
    return (EXIT_OK if summary["passed"] else EXIT_CHECK), summary


def cmd_simulate(cfg: ExperimentConfig) -> ReportEnvelope:
    model = cfg.build_model()
    state = cfg.target_state()
    settings = cfg.chsh_settings()
    ens = simulate_ensemble(model, settings.pairs(), cfg.n_per_pair, cfg.seed, thread_count())
    estimates = []
    for pair in settings.pairs():
        est = estimate_correlation(ens, pair)
        estimates.append({"pair": [str(p) for p in pair], "estimate": est.estimate, "stderr": est.stderr, "n": est.n})
    partitions = [
        partition_analysis(ens, pair, party, state).to_dict() for pair in settings.pairs() for party in Party
    ]
    chsh_est = ensemble_chsh(ens, settings)
    results: dict[str, Any] = {
        "n_trials": len(ens),
        "correlations": estimates,
        "chsh_estimate": {"estimate": chsh_est.estimate, "stderr": chsh_est.stderr},
        "chsh_analytic": chsh_value(model, settings).value,
        "partitions": partitions,
        "conservation_scan": scan_ensemble(ens, state, settings, cfg.tolerances.z_threshold).to_dict(),
        "violating_trials": count_violating_trials(ens, state),
        "state": str(state),
        "tolerance": {"monte_carlo": cfg.tolerances.monte_carlo, "z_threshold": cfg.tolerances.z_threshold},
    }
    envelope = ReportEnvelope("simulate", cfg.echo(), results)
    out = _out_dir(cfg)
    if out is not None:
        ens.to_csv(out / "ensemble.csv")
        if cfg.write_json_ensemble:
            ens.to_json(out / "ensemble.json")
        _write(out / "simulate_report.json", envelope.to_json())
    return envelope


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bellscope", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON experiment config")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", type=str, default=None, help="output directory")
    common.add_argument("--optimize", choices=["min", "max"], default=None)
    common.add_argument("--grid", type=int, default=None, help="grid points (optimizer) or scan points")
    common.add_argument("--n", type=int, default=None, help="trials per setting pair")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("chsh", parents=[common], help="CHSH value or optimum for one model")
    sub.add_parser("scan", parents=[common], help="joint distribution and correlation versus angle")
    sub.add_parser("verify", parents=[common], help="run the full invariant suite")
    sub.add_parser("pr-spectrum", parents=[common], help="generalized PR CHSH spectrum")
    sub.add_parser("simulate", parents=[common], help="Monte Carlo ensemble and analyses")
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    over: dict[str, Any] = {"seed": args.seed, "output_dir": args.out, "optimize": args.optimize, "n_per_pair": args.n}
    if args.grid is not None:
        if args.command == "scan":
            over["scan"] = {"points": args.grid}
        elif args.command == "pr-spectrum":
            over["spectrum"] = {"points": args.grid}
        else:
            over["grid_points"] = args.grid
    return over


def _merge_nested(cfg_path: Path | None, over: dict[str, Any]) -> ExperimentConfig:
    nested = {k: over.pop(k) for k in ("scan", "spectrum") if k in over}
    cfg = load_config(cfg_path, over)
    if nested:
        data = cfg.echo()
        for key, value in nested.items():
            data[key] = {**data[key], **value}
        cfg = load_config(None, data)
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _merge_nested(args.config, _overrides(args))
    except ConfigError as exc:
        print(f"bellscope: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "chsh":
            sys.stdout.write(cmd_chsh(cfg).to_json())
        elif args.command == "scan":
            sys.stdout.write(cmd_scan(cfg))
        elif args.command == "pr-spectrum":
            sys.stdout.write(cmd_pr_spectrum(cfg))
        elif args.command == "simulate":
            sys.stdout.write(cmd_simulate(cfg).to_json())
        elif args.command == "verify":
            code, summary = cmd_verify(cfg)
            sys.stdout.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
            for name in summary["failed"]:
                print(f"bellscope: check failed: {name}", file=sys.stderr)
            return code
    except ModelError as exc:
        print(f"bellscope: model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
