"""Command-line interface: ``shift-audit {audit,fairness,separating-set,simulate,mitigate}``."""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .exceptions import MissingColumns, ShiftAuditError
from .fairness import fairness_transfer_report
from .graph import FairnessCriterion, format_graph_spec, parse_graph_spec, separating_set, table_form
from .io import CsvError, build_prediction_sets, read_csv, require_columns, write_csv
from .mitigation import mitigation_transfer_experiment
from .report import (
    SCHEMA_VERSION,
    classification_to_dict,
    dumps,
    format_family,
    render_text,
    separating_sets_block,
    shift_result_to_dict,
)
from .shift import DirectEffectConfig, classify_shift, direct_effect_test, node_columns
from .synthetic import SCENARIOS, DermatologySpec, ScenarioSpec, generate, generate_dermatology_style
from .weighting import PropensityConfig, WeightScheme

THREADS_ENV = "SHIFT_AUDIT_THREADS"


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ShiftAuditError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
        if n < 1:
            raise ShiftAuditError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
        return n
    return os.cpu_count() or 1


def _alpha(text):
    a = float(text)
    if not 0 < a < 1:
        raise argparse.ArgumentTypeError("alpha must lie in (0, 1)")
    return a


def _int_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _str_list(text):
    vals = [v.strip() for v in text.split(",") if v.strip()]
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _base_report(command: str, config: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": "shiftaudit",
        "tool_version": __version__,
        "command": command,
        "config": config,
        "warnings": [],
    }


def _emit(report: dict, args) -> None:
    text = dumps(report)
    if args.out:
        Path(args.out).write_text(text)
        if getattr(args, "text", False):
            sys.stdout.write(render_text(report))
    else:
        sys.stdout.write(render_text(report) if getattr(args, "text", False) else text)


def _load_environments(args):
    """Return ``(source, target)`` frames from two files or one file plus an environment column."""
    two_files = args.source is not None or args.target is not None
    one_file = args.data is not None
    if two_files == one_file:
        raise ShiftAuditError("use either --source/--target or --data with --env-col")
    if two_files:
        if args.source is None or args.target is None:
            raise ShiftAuditError("--source and --target must be given together")
        return read_csv(args.source), read_csv(args.target)
    if not args.env_col:
        raise ShiftAuditError("--data requires --env-col")
    frame = read_csv(args.data)
    require_columns(frame, [args.env_col], str(args.data))
    levels = sorted(frame[args.env_col].dropna().unique().tolist(), key=str)
    if len(levels) != 2:
        raise ShiftAuditError(f"environment column {args.env_col!r} must take exactly two values, got {levels}")
    src = frame[frame[args.env_col] == levels[0]].reset_index(drop=True)
    tgt = frame[frame[args.env_col] == levels[1]].reset_index(drop=True)
    return src, tgt


def _config_echo(args, keys) -> dict:
    return {k: (str(v) if isinstance(v, Path) else v) for k in keys if (v := getattr(args, k, None)) is not None}


def cmd_audit_shift(args) -> dict:
    graph = parse_graph_spec(Path(args.graph).read_text())
    source, target = _load_environments(args)
    env = graph.environment
    nodes = [n.name for n in graph.nodes if n.name != env and n.observed]
    for node in nodes:
        for where, frame in (("source", source), ("target", target)):
            if not node_columns(frame, node):
                raise MissingColumns([node], f"{where} data; mark the node ':unobserved' in the graph spec if it is unavailable")

    schemes = [WeightScheme.OVERLAP, WeightScheme.INVERSE_PROBABILITY] if args.scheme == "both" \
        else [WeightScheme(args.scheme)]
    config = DirectEffectConfig(max_dims=args.max_dims, propensity=PropensityConfig(seed=args.seed))
    jobs = [(node, scheme) for node in nodes for scheme in schemes]

    def run(job):
        node, scheme = job
        try:
            return direct_effect_test(source, target, graph, node, scheme, args.alpha, config)
        except MissingColumns:
            raise
        except ShiftAuditError as exc:
            raise ShiftAuditError(f"node {node!r} ({scheme.value}): {exc}") from exc

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        results = list(pool.map(run, jobs))

    report = _base_report("audit", _config_echo(
        args, ["source", "target", "data", "env_col", "graph", "alpha", "scheme", "seed", "max_dims",
               "preds", "group_col", "label_col", "score_cols", "topk", "min_group_size"]))
    tests: dict[str, dict] = {}
    primary = {}
    for (node, scheme), res in zip(jobs, results):
        tests.setdefault(node, {})[scheme.value] = shift_result_to_dict(res)
        if scheme is schemes[0]:
            primary[node] = res
        report["warnings"].extend(res.warnings)
    if len(schemes) == 2:
        for node in nodes:
            a, b = tests[node]["ow"]["verdict"], tests[node]["ipw"]["verdict"]
            if a != b:
                report["warnings"].append(f"{node}: OW and IPW disagree (ow={a}, ipw={b})")
    report["shift_tests"] = tests
    report["classification"] = classification_to_dict(classify_shift(primary, graph))
    report["classification"]["scheme"] = schemes[0].value
    report["separating_sets"] = separating_sets_block(graph)
    if args.preds:
        _attach_fairness(report, args, source, target)
    return report


def _attach_fairness(report, args, source, target):
    preds = read_csv(args.preds)
    if not args.group_col or not args.label_col or not args.score_cols:
        raise ShiftAuditError("--group-col, --label-col and --score-cols are required with --preds")
    src, tgt, notes = build_prediction_sets(source, target, preds, args.group_col, args.label_col,
                                            args.score_cols, args.min_group_size)
    fr = fairness_transfer_report(src, tgt, args.topk)
    report["fairness"] = fr.to_dict()
    report["warnings"].extend(notes + list(fr.notes) + list(fr.source.notes) + list(fr.target.notes))
    return src, tgt


def cmd_fairness(args) -> dict:
    source, target = _load_environments(args)
    report = _base_report("fairness", _config_echo(
        args, ["source", "target", "data", "env_col", "preds", "group_col", "label_col", "score_cols", "topk",
               "min_group_size"]))
    _attach_fairness(report, args, source, target)
    return report


def cmd_mitigate(args) -> dict:
    source, target = _load_environments(args)
    preds = read_csv(args.preds)
    if len(args.score_cols) != 1:
        raise ShiftAuditError("mitigation needs a single binary score column")
    src, tgt, notes = build_prediction_sets(source, target, preds, args.group_col, args.label_col,
                                            args.score_cols, args.min_group_size)
    rep = mitigation_transfer_experiment(src, tgt, args.criterion, args.fit_fraction, args.grid_step, args.seed)
    report = _base_report("mitigate", _config_echo(
        args, ["source", "target", "data", "env_col", "preds", "group_col", "label_col", "score_cols",
               "criterion", "grid_step", "fit_fraction", "seed", "min_group_size"]))
    report["mitigation"] = rep.to_dict()
    report["warnings"].extend(notes)
    return report


def cmd_separating_set(args) -> str:
    graph = parse_graph_spec(Path(args.graph).read_text())
    crits = [FairnessCriterion(args.criterion)] if args.criterion else list(FairnessCriterion)
    lines = []
    for crit in crits:
        fam = separating_set(graph, crit)
        if not fam:
            lines.append(f"{crit.value}: no valid set: trivial predictor")
        else:
            lines.append(f"{crit.value}: {format_family(table_form(fam, graph, crit))}")
            lines.append(f"{crit.value} maximal: {format_family(fam)}")
    return "\n".join(lines) + "\n"


def cmd_simulate(args) -> list[Path]:
    if args.scenario == "derm":
        spec = DermatologySpec(n=args.n, seed=args.seed, hide_M_in_target=args.hide_m,
                               hide_Xs_in_target=args.hide_xs)
        source, target, graph = generate_dermatology_style(spec)
    else:
        spec = ScenarioSpec(args.scenario, n=args.n, seed=args.seed, delta_A=args.delta_a,
                            delta_X=args.delta_x, delta_Y=args.delta_y)
        source, target, graph = generate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    source.insert(0, "id", [f"s{i}" for i in range(len(source))])
    target.insert(0, "id", [f"t{i}" for i in range(len(target))])
    paths = [out / "source.csv", out / "target.csv", out / "graph.spec"]
    write_csv(source, paths[0])
    write_csv(target, paths[1])
    paths[2].write_text(format_graph_spec(graph))
    return paths


def _add_env_args(p):
    p.add_argument("--source", type=Path, help="source-environment CSV")
    p.add_argument("--target", type=Path, help="target-environment CSV")
    p.add_argument("--data", type=Path, help="single CSV holding both environments")
    p.add_argument("--env-col", help="environment column for --data")


def _add_pred_args(p, required):
    p.add_argument("--preds", type=Path, required=required, help="predictions CSV joined on 'id'")
    p.add_argument("--group-col")
    p.add_argument("--label-col")
    p.add_argument("--score-cols", type=_str_list)
    p.add_argument("--min-group-size", type=int, default=20)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shift-audit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"shiftaudit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("audit", help="test every node for a direct environment effect")
    _add_env_args(p)
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--alpha", type=_alpha, default=0.05)
    p.add_argument("--scheme", choices=["ow", "ipw", "both"], default="ow")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-dims", type=int, default=30)
    p.add_argument("--topk", type=_int_list, default=[1])
    p.add_argument("--out", type=Path)
    p.add_argument("--text", action="store_true", help="also print a plain-text summary")
    _add_pred_args(p, required=False)

    p = sub.add_parser("fairness", help="fairness metrics per environment and deltas")
    _add_env_args(p)
    _add_pred_args(p, required=True)
    p.add_argument("--topk", type=_int_list, default=[1])
    p.add_argument("--out", type=Path)
    p.add_argument("--text", action="store_true")

    p = sub.add_parser("separating-set", help="admissible input sets for a fairness criterion")
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--criterion", choices=["dp", "eo"])

    p = sub.add_parser("simulate", help="write synthetic source/target CSVs and the true graph")
    p.add_argument("--scenario", choices=[*SCENARIOS, "derm"], required=True)
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--delta-a", type=float)
    p.add_argument("--delta-x", type=float)
    p.add_argument("--delta-y", type=float)
    p.add_argument("--hide-m", action="store_true", help="derm only: drop M from the target")
    p.add_argument("--hide-xs", action="store_true", help="derm only: drop X_s from the target")
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("mitigate", help="fit group thresholds on the source and check transfer")
    _add_env_args(p)
    _add_pred_args(p, required=True)
    p.add_argument("--criterion", choices=["dp", "eo"], default="dp")
    p.add_argument("--grid-step", type=float, default=0.005)
    p.add_argument("--fit-fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path)
    p.add_argument("--text", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "audit":
            _emit(cmd_audit_shift(args), args)
        elif args.command == "fairness":
            _emit(cmd_fairness(args), args)
        elif args.command == "mitigate":
            if not args.group_col or not args.label_col or not args.score_cols:
                raise ShiftAuditError("--group-col, --label-col and --score-cols are required")
            _emit(cmd_mitigate(args), args)
        elif args.command == "separating-set":
            sys.stdout.write(cmd_separating_set(args))
        elif args.command == "simulate":
            for path in cmd_simulate(args):
                print(path)
    except (ShiftAuditError, OSError) as exc:
        print(f"shift-audit: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
