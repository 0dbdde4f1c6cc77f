"""Command-line front-end.

Subcommands: plan (baseline planners), simulate (full participatory
pipeline), ablate (pipeline variants), compare (cross-run tables),
export-svg (plan maps), sweep-rounds (discussion-length study).

Run directories are self-describing and byte-stable: a config snapshot,
per-seed plans and transcripts, metric CSVs with full-precision floats,
and an aggregate JSON. Timings go only to report.txt so everything else
is reproducible bit for bit.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import discussion as discussion_mod
from . import metrics as metrics_mod
from . import planners as planners_mod
from . import svgmap
from .discussion import DiscussionConfig
from .errors import PlanningError
from .llm import BackendConfig, make_backend, request_initial_plan
from .metrics import METRIC_COLUMNS, MetricsConfig
from .planners import PlannerConfig
from .population import load_demographics, synthesize
from .region import load_plan, load_region, save_plan, validate_plan

DEFAULT_SEEDS = (101, 202, 303, 404, 505)

METHODS = ("random", "centralized", "decentralized", "gsca", "local-search",
           "llm", "participatory")


def _parse_int_list(text: str) -> list[int]:
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("need at least one value")
    return values


def _backend_config(args) -> BackendConfig:
    kind = {"rule": "rule-based", "scripted": "scripted",
            "remote": "remote"}[args.backend]
    return BackendConfig(
        kind=kind,
        endpoint=getattr(args, "endpoint", "") or "",
        model=getattr(args, "model", "") or "",
        temperature=getattr(args, "temperature", 0.0),
        max_tokens=getattr(args, "max_tokens", None),
        timeout_s=getattr(args, "timeout", 60.0),
        api_key_env=getattr(args, "api_key_env", "OPENAI_API_KEY"),
        transcript_path=getattr(args, "transcript", None),
        verbose=bool(getattr(args, "verbose", False)),
    )


def _snapshot(args, extra: Optional[dict] = None) -> dict:
    keep = ("region", "demographics", "method", "backend", "rounds",
            "speakers", "exchange_fraction", "buffer", "seeds", "mode",
            "search_iters", "restarts", "endpoint", "model", "temperature",
            "rounds_list")
    doc = {}
    for key in keep:
        if hasattr(args, key):
            value = getattr(args, key)
            doc[key] = list(value) if isinstance(value, (list, tuple)) else value
    if extra:
        doc.update(extra)
    return doc


def _run_id(snapshot: dict) -> str:
    blob = json.dumps(snapshot, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _aggregate(rows: Sequence[dict]) -> dict:
    out = {}
    for col in METRIC_COLUMNS:
        values = [row[col] for row in rows if row.get(col) is not None]
        if values:
            arr = np.array(values, dtype=float)
            out[col] = {"mean": float(np.mean(arr)), "std": float(np.std(arr))}
        else:
            out[col] = {"mean": None, "std": None}
    return out


def _mean_row(run_id: str, method: str, rows: Sequence[dict]) -> dict:
    agg = _aggregate(rows)
    row = {"run_id": run_id, "seed": "mean", "method": method}
    for col in METRIC_COLUMNS:
        row[col] = agg[col]["mean"]
    return row


def _report_row(run_id: str, seed: int, method: str,
                report: metrics_mod.MetricsReport) -> dict:
    return {"run_id": run_id, "seed": seed, "method": method,
            "service": report.service, "ecology": report.ecology,
            "satisfaction": report.satisfaction, "inclusion": report.inclusion}


def _write_trajectory_csv(path: Path, rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("run_id", "seed", "stage") + METRIC_COLUMNS)
        for row in rows:
            out = [row["run_id"], str(row["seed"]), str(row["stage"])]
            for col in METRIC_COLUMNS:
                value = row.get(col)
                out.append("" if value is None else repr(float(value)))
            writer.writerow(out)


def _write_run_files(out: Path, snapshot: dict, run_id: str, method: str,
                     rows: list[dict], failures: dict[int, str],
                     timings: dict[str, float],
                     trajectory: Optional[list[dict]] = None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.snapshot.json").write_text(
        json.dumps({"run_id": run_id, "config": snapshot},
                   indent=2, sort_keys=True) + "\n")
    all_rows = sorted(rows, key=lambda r: r["seed"])
    metrics_mod.write_metrics_csv(out / "metrics.csv",
                                  all_rows + [_mean_row(run_id, method, all_rows)])
    if trajectory is not None:
        _write_trajectory_csv(out / "trajectory.csv",
                              sorted(trajectory,
                                     key=lambda r: (r["seed"], r["stage"])))
    agg = {"run_id": run_id, "method": method,
           "region": snapshot.get("region_name", ""),
           "seeds": [r["seed"] for r in all_rows],
           "failures": {str(k): v for k, v in sorted(failures.items())},
           "metrics": _aggregate(all_rows)}
    (out / "aggregate.json").write_text(
        json.dumps(agg, indent=2, sort_keys=True) + "\n")
    lines = [f"run {run_id}: method={method} region={snapshot.get('region_name', '?')}"]
    for row in all_rows:
        vals = "  ".join(
            f"{c}={row[c]:.4f}" if row.get(c) is not None else f"{c}=n/a"
            for c in METRIC_COLUMNS)
        lines.append(f"seed {row['seed']}: {vals}")
    for col, stats in _aggregate(all_rows).items():
        if stats["mean"] is not None:
            lines.append(f"mean {col} = {stats['mean']:.4f} "
                         f"(std {stats['std']:.4f})")
    for seed, msg in sorted(failures.items()):
        lines.append(f"seed {seed} FAILED: {msg}")
    for name, dt in timings.items():
        lines.append(f"timing {name}: {dt:.2f} s")
    (out / "report.txt").write_text("\n".join(lines) + "\n")


def _make_planner(method: str, population, seed: int, args, backend):
    planner_config = PlannerConfig(
        seed=seed,
        max_iters=getattr(args, "search_iters", 800),
        restarts=getattr(args, "restarts", 3),
    )
    if method == "random":
        return lambda region: planners_mod.random_plan(region, planner_config)
    if method == "centralized":
        return lambda region: planners_mod.centralized_plan(region, planner_config)
    if method == "decentralized":
        return lambda region: planners_mod.decentralized_plan(region, planner_config)
    if method == "gsca":
        return lambda region: planners_mod.gsca_plan(region, population,
                                                     planner_config)
    if method == "local-search":
        return lambda region: planners_mod.local_search_plan(
            region, population, planner_config, MetricsConfig())
    if method in ("llm", "participatory"):
        return lambda region: request_initial_plan(region, backend)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_plan(args) -> int:
    stage = "loading inputs"
    try:
        region = load_region(args.region)
        spec = load_demographics(args.demographics)
        stage = "configuring backend"
        backend = make_backend(_backend_config(args))
    except Exception as exc:
        # bad inputs or backend config are usage errors, not runtime ones
        print(f"error while {stage}: {exc}", file=sys.stderr)
        return 2

    snapshot = _snapshot(args, {"command": "plan", "region_name": region.name})
    run_id = _run_id(snapshot)
    out = Path(args.out)
    (out / "plans").mkdir(parents=True, exist_ok=True)

    rows, failures, t0 = [], {}, time.perf_counter()
    for seed in args.seeds:
        stage = "synthesizing population"
        try:
            population = synthesize(spec, region, seed)
            stage = "planning"
            planner = _make_planner(args.method, population, seed, args, backend)
            plan = planner(region)
            check = validate_plan(region, plan)
            if not check.ok:
                raise PlanningError(check.summary())
            stage = "evaluating"
            report = metrics_mod.report(region, plan, population)
            save_plan(plan, out / "plans" / f"seed{seed}.json",
                      provenance={"run_id": run_id, "seed": seed,
                                  "method": args.method})
            rows.append(_report_row(run_id, seed, args.method, report))
        except Exception as exc:
            failures[seed] = f"{stage}: {exc}"
    timings = {"total": time.perf_counter() - t0}
    _write_run_files(out, snapshot, run_id, args.method, rows, failures, timings)
    for row in sorted(rows, key=lambda r: r["seed"]):
        print(f"seed {row['seed']}: service={row['service']:.4f} "
              f"ecology={row['ecology']:.4f} "
              f"satisfaction={row['satisfaction']:.4f}")
    for seed, msg in sorted(failures.items()):
        print(f"seed {seed} failed during {msg}", file=sys.stderr)
    if rows:
        return 0
    print("error: every seed failed", file=sys.stderr)
    return 1


def _simulate_one_seed(args, region, spec, seed, run_id, out, mode=None):
    """One pipeline run; returns (final metrics row, trajectory rows)."""
    population = synthesize(spec, region, seed)
    backend = make_backend(_backend_config(args))
    planner = _make_planner(args.method, population, seed, args, backend)
    config = DiscussionConfig(
        rounds=args.rounds,
        speakers_per_round=args.speakers,
        invite_buffer_m=args.buffer,
        exchange_fraction=args.exchange_fraction,
        seed=seed,
    )
    # run the initial planner once so the saved plan is the one simulated
    initial_plan = planner(region)
    if mode is None:
        final_plan, transcripts, reports = discussion_mod.run_full_pipeline(
            region, population, lambda _r: initial_plan, backend, config)
    else:
        final_plan, transcripts, reports = discussion_mod.run_ablation(
            mode, region, population, lambda _r: initial_plan, backend, config)

    plans_dir = out / "plans"
    plans_dir.mkdir(parents=True, exist_ok=True)
    prov = {"run_id": run_id, "seed": seed, "method": args.method}
    save_plan(initial_plan, plans_dir / f"seed{seed}.initial.json",
              provenance={**prov, "stage": "initial"})
    save_plan(final_plan, plans_dir / f"seed{seed}.final.json",
              provenance={**prov, "stage": "final"})
    tdir = out / "transcripts"
    tdir.mkdir(parents=True, exist_ok=True)
    for t in transcripts:
        stem = f"seed{seed}.community{t.community_id}"
        discussion_mod.save_transcript(t, tdir / f"{stem}.json")
        (tdir / f"{stem}.txt").write_text(
            discussion_mod.render_transcript_text(t))

    trajectory = [
        {"run_id": run_id, "seed": seed, "stage": stage_idx,
         "service": rep.service, "ecology": rep.ecology,
         "satisfaction": rep.satisfaction, "inclusion": rep.inclusion}
        for stage_idx, rep in enumerate(reports)
    ]
    final_row = _report_row(run_id, seed, args.method, reports[-1])
    return final_row, trajectory


def _run_simulation_command(args, mode=None) -> int:
    stage = "loading inputs"
    try:
        region = load_region(args.region)
        spec = load_demographics(args.demographics)
        stage = "configuring backend"
        make_backend(_backend_config(args))  # fail fast before any work
    except Exception as exc:
        print(f"error while {stage}: {exc}", file=sys.stderr)
        return 2

    extra = {"command": "simulate" if mode is None else f"ablate:{mode}",
             "region_name": region.name}
    snapshot = _snapshot(args, extra)
    run_id = _run_id(snapshot)
    out = Path(args.out)

    rows, trajectory, failures = [], [], {}
    t0 = time.perf_counter()
    for seed in args.seeds:
        try:
            row, traj = _simulate_one_seed(args, region, spec, seed,
                                           run_id, out, mode)
            rows.append(row)
            trajectory.extend(traj)
        except Exception as exc:
            failures[seed] = str(exc)
    timings = {"total": time.perf_counter() - t0}
    _write_run_files(out, snapshot, run_id, args.method, rows, failures,
                     timings, trajectory=trajectory)
    for row in sorted(rows, key=lambda r: r["seed"]):
        incl = f"{row['inclusion']:.4f}" if row["inclusion"] is not None else "n/a"
        print(f"seed {row['seed']}: service={row['service']:.4f} "
              f"ecology={row['ecology']:.4f} "
              f"satisfaction={row['satisfaction']:.4f} inclusion={incl}")
    for seed, msg in sorted(failures.items()):
        print(f"seed {seed} failed: {msg}", file=sys.stderr)
    if rows:
        return 0
    print("error: every seed failed", file=sys.stderr)
    return 1


def cmd_simulate(args) -> int:
    return _run_simulation_command(args, mode=None)


def cmd_ablate(args) -> int:
    return _run_simulation_command(args, mode=args.mode)


def cmd_compare(args) -> int:
    stage = "reading run directories"
    try:
        entries = []
        for run_dir in args.runs:
            doc = json.loads((Path(run_dir) / "aggregate.json").read_text())
            entries.append(doc)
    except Exception as exc:
        print(f"error while {stage}: {exc}", file=sys.stderr)
        return 2

    by_region: dict[str, list[dict]] = {}
    for doc in entries:
        by_region.setdefault(doc.get("region", ""), []).append(doc)

    marks: dict[tuple[str, str, str], str] = {}
    for region_name, docs in by_region.items():
        for col in METRIC_COLUMNS:
            scored = [(d["metrics"][col]["mean"], d["run_id"]) for d in docs
                      if d["metrics"][col]["mean"] is not None]
            scored.sort(key=lambda t: (-t[0], t[1]))
            if scored:
                marks[(region_name, scored[0][1], col)] = "best"
            if len(scored) > 1:
                marks[(region_name, scored[1][1], col)] = "second"

    header = ["region", "method", "run_id"] + list(METRIC_COLUMNS)
    table_rows = []
    for region_name in sorted(by_region):
        for doc in sorted(by_region[region_name], key=lambda d: d["run_id"]):
            row = [region_name, doc.get("method", "?"), doc["run_id"]]
            for col in METRIC_COLUMNS:
                mean = doc["metrics"][col]["mean"]
                if mean is None:
                    row.append("n/a")
                    continue
                mark = marks.get((region_name, doc["run_id"], col), "")
                suffix = {"best": " *", "second": " ^"}.get(mark, "")
                row.append(f"{mean:.4f}{suffix}")
            table_rows.append(row)

    widths = [max(len(str(r[i])) for r in [header] + table_rows)
              for i in range(len(header))]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for row in table_rows:
        print("  ".join(str(c).ljust(w) for c, w in zip(row, widths)))
    print("(* best, ^ second best per metric within a region)")

    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header + [f"{c}_mark" for c in METRIC_COLUMNS])
            for region_name in sorted(by_region):
                for doc in sorted(by_region[region_name],
                                  key=lambda d: d["run_id"]):
                    row = [region_name, doc.get("method", "?"), doc["run_id"]]
                    for col in METRIC_COLUMNS:
                        mean = doc["metrics"][col]["mean"]
                        row.append("" if mean is None else repr(float(mean)))
                    for col in METRIC_COLUMNS:
                        row.append(marks.get((region_name, doc["run_id"], col), ""))
                    writer.writerow(row)
    return 0


def cmd_export_svg(args) -> int:
    stage = "loading inputs"
    try:
        region = load_region(args.region)
        plan = load_plan(args.plan) if args.plan else None
    except Exception as exc:
        print(f"error while {stage}: {exc}", file=sys.stderr)
        return 2
    try:
        svgmap.write_svg(region, plan, args.out)
    except Exception as exc:
        print(f"error while rendering: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


def cmd_sweep_rounds(args) -> int:
    out = Path(args.out)
    sweep_rows = []
    for n in args.rounds_list:
        sub = argparse.Namespace(**vars(args))
        sub.rounds = n
        sub.out = str(out / f"rounds{n}")
        code = _run_simulation_command(sub, mode=None)
        if code != 0:
            return code
        agg = json.loads((Path(sub.out) / "aggregate.json").read_text())
        row = {"rounds": n, "run_id": agg["run_id"]}
        for col in METRIC_COLUMNS:
            row[col] = agg["metrics"][col]["mean"]
        sweep_rows.append(row)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("rounds", "run_id") + METRIC_COLUMNS)
        for row in sweep_rows:
            vals = [str(row["rounds"]), row["run_id"]]
            for col in METRIC_COLUMNS:
                vals.append("" if row[col] is None else repr(float(row[col])))
            writer.writerow(vals)
    print(f"wrote {out / 'sweep.csv'} with {len(sweep_rows)} rows")
    return 0


# ---------------------------------------------------------------------------
# Argument wiring


def _add_backend_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=("rule", "scripted", "remote"),
                   default="rule", help="chat backend kind")
    p.add_argument("--endpoint", default="",
                   help="chat-completions URL (remote backend)")
    p.add_argument("--model", default="", help="model name (remote backend)")
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--max-tokens", dest="max_tokens", type=int, default=None)
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--api-key-env", dest="api_key_env", default="OPENAI_API_KEY")
    p.add_argument("--transcript", default=None,
                   help="recorded transcript file (scripted backend)")


def _add_common_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--region", required=True, help="region file")
    p.add_argument("--demographics", required=True, help="demographic spec file")
    p.add_argument("--seeds", type=_parse_int_list, default=list(DEFAULT_SEEDS),
                   help="comma-separated seed list")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--search-iters", dest="search_iters", type=int, default=800)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--verbose", action="store_true")
    _add_backend_args(p)


def _add_discussion_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=METHODS, default="llm",
                   help="initial planner")
    p.add_argument("--rounds", type=int, default=3)
    p.add_argument("--speakers", type=int, default=50)
    p.add_argument("--exchange-fraction", dest="exchange_fraction",
                   type=float, default=1.0)
    p.add_argument("--buffer", type=float, default=500.0,
                   help="invite buffer in meters")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="participlan",
        description="Participatory land-use planning simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="run a baseline planner over seeds")
    _add_common_args(p)
    p.add_argument("--method", choices=METHODS, required=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="full discussion pipeline")
    _add_common_args(p)
    _add_discussion_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ablate", help="pipeline with one ingredient removed")
    _add_common_args(p)
    _add_discussion_args(p)
    p.add_argument("--mode", choices=discussion_mod.ABLATION_MODES,
                   required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("compare", help="table across run directories")
    p.add_argument("runs", nargs="+", help="run directories")
    p.add_argument("--out", default=None, help="CSV output path")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("export-svg", help="draw a region/plan map")
    p.add_argument("--region", required=True)
    p.add_argument("--plan", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_svg)

    p = sub.add_parser("sweep-rounds", help="simulate across round counts")
    _add_common_args(p)
    _add_discussion_args(p)
    p.add_argument("--rounds-list", dest="rounds_list", type=_parse_int_list,
                   default=[1, 2, 3, 4])
    p.set_defaults(func=cmd_sweep_rounds)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "rounds", None) is not None and args.rounds < 1:
        parser.error("--rounds must be >= 1")
    if getattr(args, "rounds_list", None) is not None \
            and any(n < 1 for n in args.rounds_list):
        parser.error("--rounds-list values must be >= 1")
    try:
        return args.func(args)
    except PlanningError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
