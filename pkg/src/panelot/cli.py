"""Command-line entry point.

Subcommands: validate, select, leximin, legacy, round, manip, feature-drop,
bench, gen-lb. Exit codes: 0 success, 1 domain error (stable error code on
stderr), 2 usage error. Identical argv + seed produce byte-identical
artifacts; the bench suite keeps wall-clock timings out of its files for
that reason. SORTITION_THREADS caps internal parallelism (the current
implementation is single-threaded, so any value only validates).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import fixtures
from .adversary import (
    METRIC_INT,
    SEARCH_MU,
    make_lb_instance,
    manip_metric_exhaustive,
    worst_mu_manipulator,
)
from .errors import PanelotError
from .model import duplicate_pool, load_instance, save_instance, stats
from .objectives import gini, parse_objective
from .panels import PanelDistribution, has_valid_panel, structurally_excluded
from .report import (
    feature_drop_sweep,
    rounding_report,
    run_record,
    table_maxes_mins,
    write_csv,
    write_json,
)
from .rounding import lottery_marginals, pipage_round, write_lottery
from .solver import SolveConfig, solve, solve_legacy


def _add_instance_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--agents", required=True, help="agents CSV: id,<feature...>")
    parser.add_argument("--quotas", required=True, help="quotas CSV: feature,value,min,max")
    parser.add_argument("-k", type=int, required=True, help="panel size")


def _add_solver_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--objective", default="goldilocks:1", help="objective spec string")
    parser.add_argument("--backend", default="colgen", choices=["colgen", "brute"])
    parser.add_argument("--eps", type=float, default=1e-8, help="master tolerance")
    parser.add_argument("--eps-colgen", type=float, default=1e-3, help="column-generation slack")
    parser.add_argument("--max-columns", type=int, default=2000)
    parser.add_argument("--tau-anon", type=float, default=0.01)


def _config(args, objective_spec: str | None = None) -> SolveConfig:
    objective = parse_objective(objective_spec or args.objective)
    return SolveConfig(
        objective=objective,
        backend=getattr(args, "backend", "colgen"),
        eps_master=getattr(args, "eps", 1e-8),
        eps_colgen=getattr(args, "eps_colgen", 1e-3),
        tau_anon=getattr(args, "tau_anon", 0.01),
        max_columns=getattr(args, "max_columns", 2000),
        seed=args.seed,
    )


def _load(args):
    instance = load_instance(args.agents, args.quotas, args.k)
    copies = getattr(args, "copies", 1)
    if copies > 1:
        instance = duplicate_pool(instance, copies)
    return instance


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _safe(name: str) -> str:
    return name.replace(":", "-").replace("/", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="panelot",
        description="Quota-constrained panel selection with maximally equal lotteries.",
    )
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--out", default="out", help="artifact directory")
    parser.add_argument("--format", default="csv", choices=["csv", "json"])
    # The same globals are accepted after the subcommand; SUPPRESS keeps the
    # subparser from clobbering a value given before it.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS)
    common.add_argument("--format", choices=["csv", "json"], default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check instance files and report pool statistics")
    _add_instance_args(p)

    p = sub.add_parser("select", parents=[common], help="compute a maximally equal panel distribution")
    _add_instance_args(p)
    _add_solver_args(p)

    p = sub.add_parser("leximin", parents=[common], help="select with the leximin refinement")
    _add_instance_args(p)
    _add_solver_args(p)

    p = sub.add_parser("legacy", parents=[common], help="run the greedy baseline once")
    _add_instance_args(p)

    p = sub.add_parser("round", parents=[common], help="round a solved distribution to an m-uniform lottery")
    _add_instance_args(p)
    p.add_argument("--result", required=True, help="result JSON from select/leximin")
    p.add_argument("--m", type=int, default=1000)
    p.add_argument("--runs", type=int, default=1, help="extra seeded runs for deviation stats")

    p = sub.add_parser("manip", parents=[common], help="manipulation analysis")
    _add_instance_args(p)
    _add_solver_args(p)
    p.add_argument("--strategy", default="mu", choices=["mu", "exhaustive"])
    p.add_argument("--c", type=int, default=1, help="coalition size (exhaustive)")
    p.add_argument("--metric", default="int", choices=["int", "ext", "comp", "fairness"])
    p.add_argument("--copies", type=int, default=1, help="pool duplication factor")
    p.add_argument("--strict", action="store_true", help="reject oversized coalitions")

    p = sub.add_parser("feature-drop", parents=[common], help="solve while dropping the most biased features")
    _add_instance_args(p)
    _add_solver_args(p)
    p.add_argument("--max-drop", type=int, default=1)

    sub.add_parser("bench", parents=[common], help="run the built-in fixture suite and write artifacts")

    p = sub.add_parser("gen-lb", parents=[common], help="write a constructed lower-bound instance")
    p.add_argument("--kind", required=True, choices=["example1", "example2", "thm31", "thm43"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--nmin", type=int, default=0)
    p.add_argument("--c", type=int, default=0)
    return parser


def _cmd_validate(args) -> int:
    instance = _load(args)
    pool_stats = stats(instance)
    print(f"instance {instance.label}: n={instance.n} k={instance.k}")
    print(f"vector groups: {len(pool_stats.present_vectors)} (smallest {pool_stats.min_group_size})")
    if not has_valid_panel(instance):
        print("NO_VALID_PANEL: quotas admit no panel", file=sys.stderr)
        return 1
    excluded = structurally_excluded(instance)
    if excluded:
        print(f"STRUCTURAL_EXCLUSION: {sorted(excluded)}", file=sys.stderr)
        return 1
    print("ok: every agent appears on some valid panel")
    return 0


def _cmd_select(args, objective_spec: str | None = None) -> int:
    instance = _load(args)
    config = _config(args, objective_spec)
    result = solve(instance, config)
    out = _out_dir(args)
    path = out / f"select_{_safe(instance.label)}_{_safe(result.objective.spec_string())}.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(result.to_json(), fh, indent=2, sort_keys=False)
        fh.write("\n")
    print(
        f"{result.objective.spec_string()} on {instance.label}: value={result.objective_value:.6f} "
        f"min={result.pi.min():.6f} max={result.pi.max():.6f} gini={gini(result.pi):.6f} "
        f"converged={result.converged}"
    )
    print(f"wrote {path}")
    return 0


def _cmd_legacy(args) -> int:
    instance = _load(args)
    panel = solve_legacy(instance, seed=args.seed)
    out = _out_dir(args)
    path = out / f"legacy_{_safe(instance.label)}.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"members": list(panel.members), "seed": args.seed}, fh, indent=2)
        fh.write("\n")
    print(f"legacy panel: {','.join(panel.members)}")
    print(f"wrote {path}")
    return 0


def _cmd_round(args) -> int:
    instance = _load(args)
    with open(args.result, encoding="utf-8") as fh:
        payload = json.load(fh)
    dist = PanelDistribution.from_json(payload)
    if args.m < instance.n * math.isqrt(instance.n):
        print(
            f"note: m={args.m} is below n*sqrt(n)={instance.n * math.isqrt(instance.n)}; "
            "rounding error bounds weaken",
            file=sys.stderr,
        )
    lottery = pipage_round(dist, args.m, args.seed)
    out = _out_dir(args)
    path = out / f"lottery_{_safe(instance.label)}.txt"
    write_lottery(lottery, path, instance, args.seed)
    rounded = lottery_marginals(instance, lottery)
    print(f"lottery of {args.m} tickets: min={rounded.min():.6f} max={rounded.max():.6f}")
    print(f"wrote {path}")
    if args.runs > 1:
        summary = _round_stats(instance, dist, args.m, args.runs, args.seed)
        stats_path = out / f"lottery_{_safe(instance.label)}_stats.json"
        write_json(summary, stats_path)
        print(f"wrote {stats_path}")
    return 0


def _round_stats(instance, dist, m: int, runs: int, seed: int) -> dict:
    import random
    import statistics

    rng = random.Random(seed)
    mins, maxes = [], []
    for _ in range(runs):
        lottery = pipage_round(dist, m, rng.randrange(2**63))
        rounded = lottery_marginals(instance, lottery)
        mins.append(rounded.min())
        maxes.append(rounded.max())
    return {
        "m": m,
        "runs": runs,
        "mean_min": statistics.fmean(mins),
        "mean_max": statistics.fmean(maxes),
        "std_min": statistics.pstdev(mins) if runs > 1 else 0.0,
        "std_max": statistics.pstdev(maxes) if runs > 1 else 0.0,
    }


def _cmd_manip(args) -> int:
    instance = _load(args)
    config = _config(args)
    if args.strategy == "mu":
        report = worst_mu_manipulator(instance, config)
        c = 1
    else:
        report = manip_metric_exhaustive(instance, config, c=args.c, metric=args.metric, strict=args.strict)
        c = args.c
    row = {
        "metric": report.metric,
        "c": c,
        "search": report.search,
        "value": report.value,
        "witness_coalition": ";".join(sorted(report.witness.coalition)) or "-",
        "witness_vectors": report.witness.describe(),
        "copies": args.copies,
    }
    out = _out_dir(args)
    path = out / f"manip_{_safe(instance.label)}_{report.metric}.{args.format}"
    if args.format == "csv":
        write_csv([row], path)
    else:
        write_json([row], path)
    print(f"{report.metric} ({report.search}) on {instance.label}: {report.value:.6f}")
    print(f"wrote {path}")
    return 0


def _cmd_feature_drop(args) -> int:
    instance = _load(args)
    config = _config(args)
    objectives = ["maximin", "minimax", args.objective]
    rows = feature_drop_sweep(instance, objectives, args.max_drop, config)
    out = _out_dir(args)
    path = out / f"feature_drop_{_safe(instance.label)}.{args.format}"
    if args.format == "csv":
        write_csv(rows, path)
    else:
        write_json(rows, path)
    print(f"wrote {path}")
    return 0


def _cmd_gen_lb(args) -> int:
    params = {"n": args.n, "k": args.k}
    if args.nmin:
        params["n_min"] = args.nmin
    if args.c:
        params["c"] = args.c
    instance, misreport = make_lb_instance(args.kind, **params)
    out = _out_dir(args)
    agents_path = out / f"{args.kind}_agents.csv"
    quotas_path = out / f"{args.kind}_quotas.csv"
    save_instance(instance, agents_path, quotas_path)
    mis_path = out / f"{args.kind}_misreport.json"
    with open(mis_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "coalition": sorted(misreport.coalition),
                "reported": {a: list(v) for a, v in sorted(misreport.reported.items())},
                "k": instance.k,
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    print(f"wrote {agents_path}, {quotas_path}, {mis_path}")
    return 0


def _check(name: str, ok: bool, detail: str, failures: list[str]) -> None:
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    if not ok:
        failures.append(name)


def _cmd_bench(args) -> int:
    """Fixture suite with closed-form expectations; artifacts are
    deterministic for a fixed seed (no timing fields)."""
    from .adversary import apply_misreport

    out = _out_dir(args)
    failures: list[str] = []
    config = SolveConfig(
        objective=parse_objective("goldilocks:1"),
        backend="colgen",
        eps_colgen=1e-7,
        seed=args.seed,
    )

    t1 = fixtures.two_group_instance()
    e1 = fixtures.small_group_instance()
    e2 = fixtures.linked_fate_instance()

    records = []
    for instance in (t1, e1, e2):
        for spec in ("maximin", "minimax", "leximin", "nash", "goldilocks:1"):
            result = solve(instance, replace(config, objective=parse_objective(spec)))
            records.append(run_record(instance, result).__dict__)
    write_csv(records, out / "bench_runs.csv")
    write_json(records, out / "bench_runs.json")

    uniform = solve(t1, config)
    _check(
        "t1-uniform",
        abs(uniform.pi.min() - 0.5) < 1e-9 and abs(uniform.pi.max() - 0.5) < 1e-9,
        f"min={uniform.pi.min():.6f} max={uniform.pi.max():.6f}",
        failures,
    )

    gl = solve(e2, config)
    root3 = math.sqrt(3.0)
    _check(
        "e2-goldilocks",
        abs(gl.pi.max() - root3 / 2) < 1e-4 and abs(gl.objective_value - 2 * root3) < 1e-4,
        f"max={gl.pi.max():.6f} value={gl.objective_value:.6f}",
        failures,
    )

    ratio_rows = table_maxes_mins(e2, ["maximin", "minimax", "leximin", "nash", "goldilocks:1"], config)
    write_csv(ratio_rows, out / "bench_ratios.csv")
    write_json(ratio_rows, out / "bench_ratios.json")

    truthful_b, coalition_b = make_lb_instance("thm43", n=72, k=6, n_min=12, c=6)
    attacked_b = apply_misreport(truthful_b, coalition_b)
    lex = solve(attacked_b, replace(config, objective=parse_objective("leximin")))
    lone = attacked_b.groups[("0", "1", "0")][0]
    _check(
        "instance-b-leximin",
        abs(lex.pi.pi[lone] - 0.125) < 1e-5,
        f"p(010)={lex.pi.pi[lone]:.6f} expected 0.125",
        failures,
    )
    nash = solve(attacked_b, replace(config, objective=parse_objective("nash")))
    _check(
        "instance-b-nash",
        abs(nash.pi.pi[lone] - 2.0 / 21.0) < 1e-4,
        f"p(010)={nash.pi.pi[lone]:.6f} expected {2.0 / 21.0:.6f}",
        failures,
    )

    maximin_cfg = replace(config, objective=parse_objective("maximin"))
    ext = manip_metric_exhaustive(e1, maximin_cfg, c=1, metric="ext")
    comp = manip_metric_exhaustive(e1, maximin_cfg, c=1, metric="comp")
    _check(
        "e1-manipulation",
        abs(ext.value - 1.0 / 6.0) < 1e-6 and abs(comp.value - 0.4) < 1e-6,
        f"ext={ext.value:.6f} comp={comp.value:.6f}",
        failures,
    )

    summary = rounding_report(t1, "maximin", m=1000, runs=200, seed=args.seed, config=config)
    write_json(summary, out / "bench_rounding.json")
    _check(
        "t1-rounding",
        abs(summary["mean_min"] - 0.5) < 1e-9 and abs(summary["mean_max"] - 0.5) < 1e-9,
        f"mean_min={summary['mean_min']:.6f} mean_max={summary['mean_max']:.6f}",
        failures,
    )

    if failures:
        print(f"bench: {len(failures)} check(s) failed: {', '.join(failures)}", file=sys.stderr)
        return 1
    print("bench: all checks passed")
    return 0


def main(argv: list[str] | None = None) -> int:
    threads = os.environ.get("SORTITION_THREADS")
    if threads is not None and (not threads.isdigit() or int(threads) < 1):
        print("SORTITION_THREADS must be a positive integer", file=sys.stderr)
        return 2
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "validate": _cmd_validate,
        "select": _cmd_select,
        "leximin": lambda a: _cmd_select(a, objective_spec="leximin"),
        "legacy": _cmd_legacy,
        "round": _cmd_round,
        "manip": _cmd_manip,
        "feature-drop": _cmd_feature_drop,
        "bench": _cmd_bench,
        "gen-lb": _cmd_gen_lb,
    }
    try:
        return handlers[args.command](args)
    except PanelotError as exc:
        print(str(exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
