"""Evaluation commands: ``metrics`` and ``bench``."""

import argparse
from pathlib import Path

from app.cli.dependencies import require_file
from app.config import Settings
from app.schemas.bench import BENCH_CSV_HEADER
from app.services.benchmark import get_benchmark_service
from app.services.summetrics import get_metrics_service
from app.utils.logging import get_logger
from app.utils.matrix_io import read_lines, write_keyed, write_rows
from app.utils.timing import parse_sizes

logger = get_logger(__name__)


def _sizes(text: str) -> list[int]:
    try:
        return parse_sizes(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def register(subparsers: argparse._SubParsersAction, settings: Settings) -> None:
    metrics = subparsers.add_parser("metrics", help="JS, SC and NOVEL over a JSON-lines corpus")
    metrics.add_argument("--input", type=Path, required=True, help="Records with id, article, summary, generated")
    metrics.add_argument("--output", type=Path, help="Per-document CSV")
    metrics.set_defaults(handler=run_metrics)

    bench = subparsers.add_parser("bench", help="Time exact sampling against fgm and bfgm")
    bench.add_argument(
        "--sizes",
        type=_sizes,
        default=settings.bench_sizes,
        help="Comma-separated ground-set sizes",
    )
    bench.add_argument("--batch", type=int, default=100)
    bench.add_argument("--t", type=int, default=20, help="Greedy subset size")
    bench.add_argument("--repeats", type=int, default=5)
    bench.add_argument("--threads", type=int, default=1, help="Also time bfgm with this many threads")
    bench.add_argument("--seed", type=int, default=settings.seed)
    bench.add_argument("--output", type=Path, help="Output CSV (default: stdout)")
    bench.set_defaults(handler=run_bench)


def _fmt(value: float | None) -> str:
    return "" if value is None else format(value, ".17g")


def run_metrics(args: argparse.Namespace) -> int:
    """Keyed corpus report on stdout; optional per-document CSV."""
    path = args.input if str(args.input) == "-" else require_file(args.input, "--input")
    report = get_metrics_service().corpus_report(read_lines(path))

    values: dict[str, object] = {
        "js": report.js,
        "sc": report.sc,
        "novel": report.novel,
        "reference_js": report.reference_js,
        "reference_sc": report.reference_sc,
        "reference_novel": report.reference_novel,
    }
    keyed = {key: value for key, value in values.items() if value is not None}
    keyed.update(evaluated=report.evaluated, skipped=report.skipped, unreadable=len(report.errors))
    write_keyed(keyed)

    if args.output is not None:
        rows = []
        for doc in report.documents:
            gen = doc.generated
            rows.append(
                [
                    doc.id,
                    _fmt(doc.reference.js),
                    _fmt(doc.reference.sc),
                    _fmt(doc.reference.novel),
                    _fmt(gen.js if gen else None),
                    _fmt(gen.sc if gen else None),
                    _fmt(gen.novel if gen else None),
                ]
            )
        header = ["id", "reference_js", "reference_sc", "reference_novel", "js", "sc", "novel"]
        write_rows(header, rows, args.output)
    return 0


def run_bench(args: argparse.Namespace) -> int:
    records = get_benchmark_service().bench_speed(
        args.sizes,
        args.batch,
        args.t,
        args.repeats,
        args.seed,
        threads=args.threads,
    )
    write_rows(BENCH_CSV_HEADER, (record.csv_row() for record in records), args.output)
    return 0
