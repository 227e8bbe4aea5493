"""Command line: ``build-probs``, ``solve``, ``simulate``, ``analyze``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
import time
from pathlib import Path
from typing import Callable, Sequence

from . import analysis
from . import assignment as asg
from . import maintenance as mnt
from .config import ConfigError, RunConfig, default_wear_fixture, load_config
from .degradation import WearDataError, build_degradation_table, check_wear_records, parse_wear_csv, write_table_csv
from .mdp import Policy, read_policy_csv, validate_model, value_iteration, extract_policy, write_policy_csv, write_values_csv
from .simulator import SimulationError, TrajectoryConfig, run_closed_loop, write_trajectory_csv

WHICH = ("maintenance", "assignment")


def _write_atomic(path: Path, writer: Callable[[Path], None]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    os.close(fd)
    try:
        writer(Path(tmp))
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _out_dir(args, cfg: RunConfig) -> Path:
    return Path(args.out) if args.out else cfg.output_dir


def build_model(cfg: RunConfig, which: str):
    if which == "maintenance":
        return mnt.build_maintenance_mdp(cfg.maintenance, cfg.maintenance_chains, cfg.discount)
    return asg.build_assignment_mdp(cfg.assignment, cfg.assignment_chains(), cfg.discount)


def expected_states(cfg: RunConfig, which: str) -> int:
    if which == "maintenance":
        return mnt.state_count(cfg.maintenance)
    return asg.assignment_state_count(cfg.assignment)


def load_policy(cfg: RunConfig, directory: Path, which: str) -> Policy:
    path = directory / f"{which}_policy.csv"
    if not path.exists():
        raise FileNotFoundError(f"missing policy file {path}; run 'solve' first")
    policy, _ = read_policy_csv(path)
    if len(policy) != expected_states(cfg, which):
        raise ValueError(f"{path} has {len(policy)} states, config implies {expected_states(cfg, which)}")
    return policy


def cmd_build_probs(args, cfg: RunConfig) -> int:
    wear_path = Path(args.wear) if args.wear else default_wear_fixture()
    records = parse_wear_csv(wear_path)
    for issue in check_wear_records(records):
        print(f"warning: {issue}", file=sys.stderr)
    rounding = args.rounding if args.rounding is not None else cfg.rounding
    table = build_degradation_table(
        records,
        cfg.healthmap,
        cfg.maintenance.epoch_seconds,
        rounding=rounding,
        full_wear_mm=cfg.full_wear_mm,
        conditions=range(1, cfg.maintenance.M + 1),
    )
    for (e, cls), rate in sorted(table.rates.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        print(f"condition {e} {cls} tool: mean wear rate {rate:.6g} mm/min -> p = {table.prob[(e, cls)]!r}")
    dest = _out_dir(args, cfg) / "degradation_table.csv"
    _write_atomic(dest, lambda p: write_table_csv(table, p))
    print(f"wrote {dest}")
    return 0


def cmd_solve(args, cfg: RunConfig) -> int:
    targets = WHICH if args.which == "both" else (args.which,)
    out = _out_dir(args, cfg)
    results = []
    for which in targets:
        model = build_model(cfg, which)
        problems = validate_model(model)
        if problems:
            for v in problems[:20]:
                print(f"invalid {which} model: {v}", file=sys.stderr)
            raise ValueError(f"{which} model failed validation with {len(problems)} violation(s)")
        start = time.perf_counter()
        values, report = value_iteration(model, cfg.tolerance, cfg.max_iterations)
        policy = extract_policy(model, values)
        elapsed = time.perf_counter() - start
        manifest = {
            "model": which,
            "num_states": model.num_states,
            "num_decisions": model.num_slots,
            "dims": {k: cfg.raw["model"][k] for k in ("n", "m", "M", "L", "p", "task_levels")},
            "discount": cfg.discount,
            "tolerance": cfg.tolerance,
            "max_iterations": cfg.max_iterations,
            "iterations": report.iterations,
            "final_residual": report.final_residual,
            "converged": report.converged,
            "wall_time_s": round(elapsed, 3),
            "config_sha256": cfg.digest,
        }
        results.append((which, values, policy, manifest))
        print(
            f"{which}: {model.num_states} states, {model.num_slots} decisions, "
            f"{report.iterations} sweeps, residual {report.final_residual:.3g}, converged={report.converged}"
        )
    for which, values, policy, manifest in results:
        _write_atomic(out / f"{which}_values.csv", lambda p: write_values_csv(p, values, cfg.discount, cfg.tolerance))
        _write_atomic(out / f"{which}_policy.csv", lambda p: write_policy_csv(p, policy, cfg.discount, cfg.tolerance))
        _write_atomic(out / f"{which}_manifest.json", lambda p: p.write_text(json.dumps(manifest, indent=2) + "\n"))
    print(f"wrote outputs to {out}")
    return 0 if all(m["converged"] for *_, m in results) else 1


def cmd_simulate(args, cfg: RunConfig) -> int:
    if args.trajectory not in cfg.trajectories:
        raise ConfigError(f"unknown trajectory '{args.trajectory}'; have {sorted(cfg.trajectories)}")
    tc = cfg.trajectories[args.trajectory]
    tc = TrajectoryConfig(tc.initial, tc.num_epochs, tc.interventions, args.seed)
    policies = Path(args.policies) if args.policies else _out_dir(args, cfg)
    pol_m = load_policy(cfg, policies, "maintenance")
    pol_a = load_policy(cfg, policies, "assignment")
    trajectory = run_closed_loop(pol_a, pol_m, cfg.closed_loop_models(), cfg.coupling, tc)
    dest = _out_dir(args, cfg) / f"trajectory_{args.trajectory}.csv"
    n, m = cfg.maintenance.n, cfg.maintenance.m
    _write_atomic(dest, lambda p: write_trajectory_csv(trajectory, p, n, m))
    for r in trajectory.records:
        flag = "  [intervention]" if r.intervention else ""
        print(f"epoch {r.epoch}: lam={r.state.lam} tau={r.state.tau} dstatus={r.state.d_status} a={r.assignment} d={r.maintenance}{flag}")
    print(f"final: lam={trajectory.final.lam} tau={trajectory.final.tau} dstatus={trajectory.final.d_status}")
    print(f"wrote {dest}")
    return 0


def cmd_analyze(args, cfg: RunConfig) -> int:
    policies = Path(args.policies) if args.policies else _out_dir(args, cfg)
    pol_m = load_policy(cfg, policies, "maintenance")
    pol_a = load_policy(cfg, policies, "assignment")
    hist_m = analysis.policy_histogram(pol_m, analysis.vector_labeler(mnt.enumerate_decisions(cfg.maintenance)))
    hist_a = analysis.policy_histogram(
        pol_a, analysis.vector_labeler(asg.enumerate_assignments(cfg.assignment.n, cfg.assignment.m))
    )
    report = analysis.trend_report(hist_m, hist_a, cfg.assignment.m)
    out = _out_dir(args, cfg)
    _write_atomic(out / "maintenance_histogram.csv", lambda p: analysis.export_histogram_csv(hist_m, p))
    _write_atomic(out / "assignment_histogram.csv", lambda p: analysis.export_histogram_csv(hist_a, p))
    _write_atomic(out / "trend_report.txt", lambda p: p.write_text(report.text()))
    print(report.text(), end="")
    ok = report.major_at_least_minor and report.all_assigned_dominates and report.highest_task_at_least_first
    return 0 if ok or not args.check else 1


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration (defaults to the shipped case study)")
    common.add_argument("--out", help="output directory (overrides output_dir)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key, e.g. solver.discount=0.9")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="cbm-mdp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-probs", parents=[common], help="degradation table from wear records")
    p.add_argument("--wear", help="wear CSV (case,time_min,wear_mm,op_condition); defaults to the shipped fixture")
    p.add_argument("--rounding", type=int, help="decimals kept in the probabilities")
    p.set_defaults(func=cmd_build_probs)

    p = sub.add_parser("solve", parents=[common], help="value iteration for one or both models")
    p.add_argument("--which", choices=(*WHICH, "both"), default="both")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", parents=[common], help="closed-loop trajectory from solved policies")
    p.add_argument("--trajectory", default="t1")
    p.add_argument("--seed", type=int, help="sample successors with this seed instead of maximum likelihood")
    p.add_argument("--policies", help="directory holding *_policy.csv (defaults to the output directory)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", parents=[common], help="decision histograms and trend report")
    p.add_argument("--policies", help="directory holding *_policy.csv (defaults to the output directory)")
    p.add_argument("--check", action="store_true", help="exit nonzero if a trend ordering fails")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.overrides)
        return args.func(args, cfg)
    except (ConfigError, WearDataError, SimulationError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 1


if __name__ == "__main__":
    sys.exit(main())
