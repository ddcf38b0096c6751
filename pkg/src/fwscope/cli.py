"""``fwscope`` command line.

Exit codes: 0 success, 2 validation error, 3 I/O error, 4 upstream source
error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from fwscope import __version__
from fwscope.errors import SourceError, ValidationError
from fwscope.ingest import ReadCounts, read_records
from fwscope.metrics import DEFAULT_AS_OF
from fwscope.mining import (
    DEFAULT_K,
    DEFAULT_MAX_LENGTH,
    DEFAULT_MIN_LENGTH,
    mine_top_k,
    patterns_to_rule_stubs,
    tokenize,
)
from fwscope.model import MonthDate
from fwscope.pipeline import (
    MatchResult,
    PipelineConfig,
    analyze_match,
    extract_all,
    ingest_stage,
    load_catalog_with_aliases,
    match_observation,
    read_jsonl,
    run_pipeline,
    stage,
    write_jsonl,
)
from fwscope.report import DeviceResult, ExclusionSpec, build_summary, export
from fwscope.rules import FirmwareObservation, extraction_coverage, load_rules, starter_rules_path
from fwscope.sources import FetchStats, SourceSettings, fetch_pages

log = logging.getLogger("fwscope")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_SOURCE = 4


def _month(text: str) -> MonthDate:
    try:
        return MonthDate.parse(text)
    except ValidationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _add_input(p: argparse.ArgumentParser, many: bool = True) -> None:
    p.add_argument("--input", "-i", type=Path, required=True, action="append" if many else "store")


def _add_sampling(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sample-confidence", type=float, help="e.g. 0.99; needs --sample-margin")
    p.add_argument("--sample-margin", type=float, help="e.g. 0.01")
    p.add_argument("--sample-n", type=int, help="explicit sample size instead of confidence/margin")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fwscope", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--threads", type=int, default=1)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="read, dedupe and optionally sample datasets into records JSONL")
    _add_input(p)
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    _add_sampling(p)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("discover-keywords", help="mine frequent token patterns and draft rules")
    _add_input(p)
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--min-length", type=int, default=DEFAULT_MIN_LENGTH)
    p.add_argument("--max-length", type=int, default=DEFAULT_MAX_LENGTH)
    p.add_argument("--backend", choices=("cython", "python"))
    p.add_argument("--out", type=Path, help="JSON output file (default: stdout)")

    p = sub.add_parser("extract", help="apply a rule file to records")
    _add_input(p)
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--rules", type=Path, default=None)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("match", help="match observations against the firmware catalog")
    _add_input(p)
    p.add_argument("--catalog", type=Path, required=True)
    p.add_argument("--aliases", type=Path)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("analyze", help="compute per-device freshness metrics")
    _add_input(p)
    p.add_argument("--as-of", type=_month, default=DEFAULT_AS_OF)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("report", help="aggregate metrics into summary tables")
    _add_input(p)
    p.add_argument("--exclude-model", action="append", default=[], metavar="MANUFACTURER/MODEL")
    p.add_argument("--exclusion-reason", default="")
    p.add_argument("--exclude-provisional", action="store_true")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("run", help="full pipeline")
    _add_input(p)
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--rules", type=Path, default=None)
    p.add_argument("--catalog", type=Path, required=True)
    p.add_argument("--aliases", type=Path)
    p.add_argument("--as-of", type=_month, default=DEFAULT_AS_OF)
    _add_sampling(p)
    p.add_argument("--exclude-model", action="append", default=[], metavar="MANUFACTURER/MODEL")
    p.add_argument("--exclusion-reason", default="")
    p.add_argument("--exclude-provisional", action="store_true")
    p.add_argument("--keep-intermediate", action="store_true")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("fetch", help="page through a scan source into records JSONL")
    p.add_argument("--query", default="")
    p.add_argument("--fixture", type=Path, help="offline fixture instead of $FWSCOPE_SOURCE_URL")
    p.add_argument("--rate", type=float, default=1.0, help="max requests per second")
    p.add_argument("--max-retries", type=int, default=5)
    p.add_argument("--page-size", type=int, default=100)
    p.add_argument("--out", type=Path, required=True)
    return parser


def _records(args) -> list:
    counts = ReadCounts()
    out = []
    for path in args.input:
        out.extend(read_records(path, args.format, counts))
    return out


def cmd_ingest(args) -> int:
    with stage("ingest"):
        result = ingest_stage(
            args.input, args.format, args.seed, args.sample_n, args.sample_confidence, args.sample_margin
        )
    with stage("export"):
        write_jsonl(args.out, (r.to_row() for r in result.records))
    print(json.dumps(result.to_json(), sort_keys=True))
    return EXIT_OK


def cmd_discover(args) -> int:
    with stage("ingest"):
        corpus = [tokenize(r.body) for r in ingest_stage(args.input, args.format).records]
    with stage("mining"):
        patterns = mine_top_k(corpus, args.k, args.max_length, args.min_length, backend=args.backend)
        drafts = patterns_to_rule_stubs(patterns)
    doc = {
        "sequences": len(corpus),
        "patterns": [p.to_json() for p in patterns],
        "draft_rules": [d.to_json() for d in drafts],
    }
    text = json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
    if args.out:
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_extract(args) -> int:
    with stage("load-rules"):
        rules = load_rules(args.rules or starter_rules_path())
    with stage("ingest"):
        records = _records(args)
    with stage("extract"):
        observations = extract_all(records, rules, args.threads)
    with stage("export"):
        write_jsonl(args.out, (o.to_row() for o in observations))
    print(json.dumps(extraction_coverage(observations).to_json(), sort_keys=True))
    return EXIT_OK


def cmd_match(args) -> int:
    with stage("load-catalog"):
        catalog = load_catalog_with_aliases(args.catalog, args.aliases)
    with stage("match"):
        rows = [row for path in args.input for row in read_jsonl(path)]
        matches = [match_observation(FirmwareObservation.from_row(r), catalog) for r in rows]
    with stage("export"):
        write_jsonl(args.out, (m.to_row() for m in matches))
    matched = sum(1 for m in matches if m.model is not None)
    print(json.dumps({"observations": len(matches), "matched": matched}, sort_keys=True))
    return EXIT_OK


def cmd_analyze(args) -> int:
    with stage("metrics"):
        rows = [row for path in args.input for row in read_jsonl(path)]
        devices = [analyze_match(MatchResult.from_row(r), args.as_of) for r in rows]
    with stage("export"):
        write_jsonl(args.out, (d.to_row() for d in devices))
    print(json.dumps({"devices": len(devices)}, sort_keys=True))
    return EXIT_OK


def cmd_report(args) -> int:
    with stage("report"):
        devices = [DeviceResult.from_row(row) for path in args.input for row in read_jsonl(path)]
        exclusions = ExclusionSpec.parse(args.exclude_model, args.exclusion_reason) if args.exclude_model else None
        summary = build_summary(devices, exclusions, include_provisional=not args.exclude_provisional)
    with stage("export"):
        export(summary, devices, args.out)
    return EXIT_OK


def cmd_run(args) -> int:
    config = PipelineConfig(
        inputs=args.input,
        catalog=args.catalog,
        out_dir=args.out,
        rules=args.rules,
        aliases=args.aliases,
        format=args.format,
        as_of=args.as_of,
        seed=args.seed,
        sample_confidence=args.sample_confidence,
        sample_margin=args.sample_margin,
        sample_n=args.sample_n,
        exclude_models=args.exclude_model,
        exclusion_reason=args.exclusion_reason,
        threads=args.threads,
        include_provisional=not args.exclude_provisional,
        keep_intermediate=args.keep_intermediate,
    )
    summary, _ = run_pipeline(config)
    counts = summary.baseline.counts
    print(json.dumps({k: counts[k] for k in ("total", "extracted", "matched", "running_latest")}, sort_keys=True))
    return EXIT_OK


def cmd_fetch(args) -> int:
    with stage("fetch"):
        if args.fixture is not None:
            settings = SourceSettings(kind="fixture", fixture_path=args.fixture, max_retries=args.max_retries)
        else:
            settings = SourceSettings.from_env(
                max_requests_per_second=args.rate, max_retries=args.max_retries, page_size=args.page_size
            )
        stats = FetchStats()
        records = [r for page in fetch_pages(settings, args.query, stats) for r in page.records]
    with stage("export"):
        write_jsonl(args.out, (r.to_row() for r in records))
    print(
        json.dumps(
            {"pages": stats.pages, "records": stats.records, "retries": stats.retries, "skipped": stats.skipped_records},
            sort_keys=True,
        )
    )
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "discover-keywords": cmd_discover,
    "extract": cmd_extract,
    "match": cmd_match,
    "analyze": cmd_analyze,
    "report": cmd_report,
    "run": cmd_run,
    "fetch": cmd_fetch,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        code = EXIT_VALIDATION
        err: Exception = exc
    except SourceError as exc:
        code = EXIT_SOURCE
        err = exc
    except OSError as exc:
        code = EXIT_IO
        err = exc
    where = getattr(err, "stage", args.command)
    print(f"fwscope: {where} failed: {err}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
