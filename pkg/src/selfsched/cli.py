"""Command-line front-end: run campaigns, oracle baselines, and summaries."""

from __future__ import annotations

import argparse
import statistics
import sys
from pathlib import Path

from .experiments import (
    emit_selection_summary,
    parse_config,
    run_campaign,
    write_selection_summary,
)
from .selection import SelectionLogEntry, oracle_select, read_selection_log, write_selection_log
from .workloads import WorkloadSpec, build_workload, dump_workload


def _cmd_run(args) -> int:
    campaign = parse_config(args.config)
    outdir = Path(args.out) if args.out else Path(args.config).with_suffix("").name + "_results"
    rows = run_campaign(campaign, outdir)
    print(f"wrote {Path(outdir) / 'summary.csv'} ({len(rows)} cells)")
    return 0


def _cmd_oracle(args) -> int:
    campaign = parse_config(args.config)
    outdir = Path(args.out) if args.out else Path(args.config).with_suffix("").name + "_oracle"
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    lines = ["workload,system,chunk_mode,median_total"]
    for wname, spec in campaign.workloads.items():
        workload = build_workload(spec)
        for sname, system in campaign.systems.items():
            for mode in campaign.chunk_modes:
                totals = []
                first = None
                for rep in range(campaign.repetitions):
                    result = oracle_select(
                        workload, system, chunk_mode=mode, seed=campaign.base_seed + rep
                    )
                    totals.append(result.total)
                    if first is None:
                        first = result
                entries = [
                    SelectionLogEntry(t, "oracle", kind, chunk, "stable",
                                      first.step_times[t], first.step_libs[t])
                    for t, (kind, chunk) in enumerate(first.choices)
                ]
                write_selection_log(entries, outdir / f"{wname}__{sname}__{mode}__oracle_selection.csv")
                lines.append(f"{wname},{sname},{mode},{statistics.median(totals):.6f}")
    (outdir / "oracle.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {outdir / 'oracle.csv'}")
    return 0


def _cmd_summarize(args) -> int:
    root = Path(args.dir)
    if not root.is_dir():
        raise ValueError(f"{root} is not a directory")
    entries = []
    for path in sorted(root.rglob("selection*.csv")):
        entries.extend(read_selection_log(path))
    if not entries:
        raise ValueError(f"no selection logs found under {root}")
    summary = emit_selection_summary(entries)
    out = root / "selection_summary.csv"
    write_selection_summary(summary, out)
    for method, info in summary.items():
        shares = ", ".join(f"{k}={v:.1%}" for k, v in info["shares"].items())
        print(f"{method}: {shares} (learning {info['learning_share']:.1%})")
    print(f"wrote {out}")
    return 0


def _parse_workload_arg(text: str) -> WorkloadSpec:
    fields: dict[str, str] = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise ValueError(f"workload spec items must be key=value, got {item!r}")
        key, _, value = item.partition("=")
        fields[key.strip().lower()] = value.strip()
    kind = fields.pop("kind", None)
    if kind is None:
        raise ValueError("workload spec needs kind=...")
    n = int(fields.pop("n", 0))
    t = int(fields.pop("t", 0))
    seed = int(fields.pop("seed", 0))
    path = fields.pop("path", None)
    params = {key: float(value) for key, value in fields.items()}
    return WorkloadSpec(kind=kind, n=n, t=t, params=params, seed=seed, path=path)


def _cmd_dump_workload(args) -> int:
    spec = _parse_workload_arg(args.spec)
    dump_workload(build_workload(spec), args.path)
    print(f"wrote {args.path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="selfsched",
        description="Simulate loop self-scheduling and automated algorithm selection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a factorial campaign from a config file")
    p_run.add_argument("config")
    p_run.add_argument("--out", "-o", help="output directory (default: <config>_results)")
    p_run.set_defaults(func=_cmd_run)

    p_oracle = sub.add_parser("oracle", help="compute oracle baselines for a config")
    p_oracle.add_argument("config")
    p_oracle.add_argument("--out", "-o", help="output directory (default: <config>_oracle)")
    p_oracle.set_defaults(func=_cmd_oracle)

    p_sum = sub.add_parser("summarize", help="aggregate selection shares from campaign output")
    p_sum.add_argument("dir")
    p_sum.set_defaults(func=_cmd_summarize)

    p_dump = sub.add_parser("dump-workload", help="materialize a workload spec as a trace CSV")
    p_dump.add_argument("spec", help="e.g. 'kind=powerlaw,n=100,t=10,exponent=1.0,seed=3'")
    p_dump.add_argument("path")
    p_dump.set_defaults(func=_cmd_dump_workload)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
