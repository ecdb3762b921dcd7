"""DPP inference commands: ``sample`` and ``map``."""

import argparse
import sys
from pathlib import Path

from app.cli.dependencies import load_l, seed_streams
from app.config import Settings
from app.exceptions import InvalidParameterError
from app.services.greedy_map import bfgm_inference
from app.services.sampling import SpectralSampler
from app.utils.logging import get_logger
from app.utils.matrix_io import read_batch, write_rows

logger = get_logger(__name__)


def register(subparsers: argparse._SubParsersAction, settings: Settings) -> None:
    sample = subparsers.add_parser("sample", help="Draw exact samples from an L-ensemble")
    sample.add_argument("--l", type=Path, required=True, help="L-ensemble CSV")
    sample.add_argument("--n", type=int, default=1, help="Number of draws")
    sample.add_argument("--seed", type=int, default=settings.seed)
    sample.add_argument("--output", type=Path, help="Output CSV (default: stdout)")
    sample.set_defaults(handler=run_sample)

    greedy = subparsers.add_parser("map", help="Greedy MAP inference on one L-ensemble or a directory batch")
    greedy.add_argument("--l", type=Path, required=True, help="L-ensemble CSV, or a directory of CSVs")
    greedy.add_argument("--t", type=int, required=True, help="Subset size")
    greedy.add_argument("--threads", type=int, default=1, help="Batch chunks run concurrently")
    greedy.add_argument("--output", type=Path, help="Output CSV (default: stdout)")
    greedy.set_defaults(handler=run_map)


def run_sample(args: argparse.Namespace) -> int:
    """One subset per line as comma-separated indices; the empty set is an empty line."""
    if args.n < 1:
        raise InvalidParameterError(f"--n must be >= 1, got {args.n}")
    (rng,) = seed_streams(args, 1)
    sampler = SpectralSampler(load_l(args.l))
    draws = [sampler.sample(rng)] if args.n == 1 else sampler.sample_many(args.n, rng)
    write_rows(None, (draw.tolist() for draw in draws), args.output)
    logger.info(f"✅ {len(draws)} sample(s) drawn")
    return 0


def run_map(args: argparse.Namespace) -> int:
    """
    Rows ``item,step,index,gain`` in selection order.

    Items that fail (asymmetric or indefinite L) are reported on standard error;
    the other items are still written and the exit status is 1.
    """
    names, matrices = read_batch(args.l)
    results = bfgm_inference(matrices, args.t, threads=args.threads)

    rows = []
    failed = 0
    for name, result in zip(names, results):
        if result.error is not None:
            print(f"error: {name}: {result.error}", file=sys.stderr)
            failed += 1
            continue
        for step, (index, gain) in enumerate(zip(result.indices, result.gains)):
            rows.append([name, step, index, format(gain, ".17g")])
    write_rows(["item", "step", "index", "gain"], rows, args.output)
    return 1 if failed else 0
