"""Command-line surface.

Exit codes: 0 success, 1 validation problem (bad config/dataset, or an
invalid file for check-syntax), 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import reporting
from .distill import build_candidate_pool, distill_labels, export_dataset, load_seeds
from .domain import load_labels
from .errors import ConfigError, DatasetError, VerirankError
from .harness import RunConfig, compare_strategies, load_decisions, recompute_summary, run_benchmark
from .oracle import make_backend
from .syntax import check_syntax
from .testing import LabelAwareTeacher, ScriptedGenerator, code_digest

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _cmd_check_syntax(args) -> int:
    path = Path(args.file)
    try:
        source = path.read_text(encoding="utf-8", errors="replace")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    report = check_syntax(source)
    for diag in report.diagnostics:
        print(diag.format(str(path)))
    return EXIT_OK if report.ok else EXIT_VALIDATION


def _config_from_args(args) -> RunConfig:
    overrides = {
        "problems_path": args.problems,
        "candidates_path": args.candidates,
        "labels_path": args.labels,
        "strategy": args.strategy,
        "k": args.k,
        "m": args.m,
        "output_dir": args.out,
    }
    if args.config:
        return RunConfig.from_file(args.config, **overrides)
    missing = [name for name in ("problems_path",) if not overrides.get(name)]
    if missing:
        raise ConfigError("either --config or --problems is required")
    return RunConfig(**{k: v for k, v in overrides.items() if v is not None})


def _cmd_rerank(args) -> int:
    config = _config_from_args(args)
    report = run_benchmark(config)
    printable = {
        k: v for k, v in report.summary.items() if k not in ("gateway_log",)
    }
    print(json.dumps(printable, indent=2, sort_keys=True))
    print(f"run {report.manifest.run_id} written to {report.output_dir}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    summary = recompute_summary(args.run, labels_path=args.labels)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_compare(args) -> int:
    records_a = load_decisions(args.a)
    records_b = load_decisions(args.b)
    summary = compare_strategies(
        records_a, records_b, alternative=args.alternative, alpha=args.alpha
    )
    payload = {
        "n_pairs": summary.n_pairs,
        "statistic": summary.statistic,
        "pvalue": summary.pvalue,
        "significant": summary.significant,
        "alpha": summary.alpha,
        "alternative": summary.alternative,
    }
    if summary.note:
        payload["note"] = summary.note
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_report(args) -> int:
    rows = reporting.load_rows(args.rows)
    table = reporting.aggregate_report(rows)
    formats = tuple(args.formats.split(","))
    written = reporting.write_report(table, args.out, formats=formats, k=args.k)
    for fmt, path in sorted(written.items()):
        print(f"{fmt}: {path}")
    return EXIT_OK


def _cmd_distill(args) -> int:
    seeds = load_seeds(args.seeds)
    backend = make_backend(args.backend)
    records = []
    for index, seed in enumerate(seeds):
        if args.generator == "reference":
            generator = ScriptedGenerator([seed.reference])
        else:
            raise ConfigError(
                "only the 'reference' generator is available from the CLI; "
                "drive other generators through the API"
            )
        pool = build_candidate_pool(
            seed, generator, backend, k=args.k, problem_id=f"seed-{index:04d}"
        )
        label_map = {code_digest(row.candidate.source): row.label for row in pool}
        t1 = LabelAwareTeacher("T1", label_map, accuracy=args.t1_accuracy, seed=args.seed)
        t2 = LabelAwareTeacher("T2", label_map, accuracy=args.t2_accuracy, seed=args.seed + 1)
        records.extend(distill_labels(pool, seed.spec, t1, t2))
    out = export_dataset(records, args.out)
    print(f"{len(records)} records written to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="verirank",
        description="Rerank LLM-generated Verilog candidates and evaluate strategies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-syntax", help="gate one Verilog file")
    p.add_argument("file")
    p.set_defaults(fn=_cmd_check_syntax)

    p = sub.add_parser("rerank", help="run the full pipeline over a benchmark")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--problems")
    p.add_argument("--candidates")
    p.add_argument("--labels")
    p.add_argument("--strategy")
    p.add_argument("--k", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_rerank)

    p = sub.add_parser("eval", help="recompute metrics from a run directory")
    p.add_argument("--run", required=True)
    p.add_argument("--labels")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("compare", help="Wilcoxon comparison of two decision files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--alternative", default="greater", choices=("greater", "two-sided"))
    p.add_argument("--alpha", type=float, default=0.01)
    p.set_defaults(fn=_cmd_compare)

    p = sub.add_parser("report", help="aggregate a rows file into report tables")
    p.add_argument("--rows", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--formats", default="json,csv,txt")
    p.add_argument("--k", type=int, default=5)
    p.set_defaults(fn=_cmd_report)

    p = sub.add_parser("distill", help="build a labeled reasoning dataset from seeds")
    p.add_argument("--seeds", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--backend", default="mini")
    p.add_argument("--generator", default="reference")
    p.add_argument("--t1-accuracy", type=float, default=1.0)
    p.add_argument("--t2-accuracy", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_distill)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except VerirankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
