"""L-ensemble commands: ``lmatrix`` and ``qdscore``."""

import argparse
import math
from pathlib import Path

import numpy as np

from app.cli.dependencies import (
    add_macro_arguments,
    load_attention,
    load_l,
    macro_settings,
    parse_subset,
    require_file,
)
from app.config import Settings
from app.schemas.dpp import MacroCondition
from app.services.greedy_map import fgm_inference
from app.services.lensemble import (
    build_l,
    log_qd_score,
    marginal_kernel,
    quality_from_attention,
    similarity_from_features,
    similarity_from_positions,
)
from app.services.regularizers import macro_qd_loss
from app.services.sampling import conditional_subset
from app.utils.logging import get_logger
from app.utils.matrix_io import read_matrix, write_keyed, write_matrix

logger = get_logger(__name__)


def register(subparsers: argparse._SubParsersAction, settings: Settings) -> None:
    lmatrix = subparsers.add_parser("lmatrix", help="Build an L-ensemble from attention and features")
    lmatrix.add_argument("--attention", type=Path, required=True, help="Attention vector or (steps x T) matrix CSV")
    lmatrix.add_argument("--features", type=Path, help="T x C feature CSV (cosine similarity)")
    lmatrix.add_argument(
        "--bandwidth",
        type=float,
        default=settings.gm_sigma,
        help="Position-kernel bandwidth, used when no features are given",
    )
    lmatrix.add_argument("--marginal", action="store_true", help="Write the marginal kernel K instead of L")
    lmatrix.add_argument("--output", type=Path, help="Output CSV (default: stdout)")
    lmatrix.set_defaults(handler=run_lmatrix)

    qd = subparsers.add_parser("qdscore", help="QD-score and Macro QD loss of a subset")
    qd.add_argument("--l", type=Path, required=True, help="L-ensemble CSV")
    group = qd.add_mutually_exclusive_group(required=True)
    group.add_argument("--subset", help="Comma-separated indices")
    group.add_argument("--t", type=int, help="Score the greedy MAP subset of this size")
    group.add_argument(
        "--condition",
        choices=[c.value for c in MacroCondition],
        help="Score the Macro conditional subset, with quality read from sqrt(diag(L))",
    )
    add_macro_arguments(qd, settings)
    qd.add_argument("--output", type=Path, help="Output report (default: stdout)")
    qd.set_defaults(handler=run_qdscore)


def run_lmatrix(args: argparse.Namespace) -> int:
    quality = quality_from_attention(load_attention(args.attention))
    if args.features is not None:
        similarity = similarity_from_features(read_matrix(require_file(args.features, "--features")))
    else:
        similarity = similarity_from_positions(quality.size, args.bandwidth)
    l = build_l(quality, similarity)
    write_matrix(marginal_kernel(l) if args.marginal else l, args.output)
    logger.info(f"✅ {'Marginal kernel' if args.marginal else 'L-ensemble'} of size {quality.size} written")
    return 0


def run_qdscore(args: argparse.Namespace) -> int:
    l = load_l(args.l)
    report: dict[str, object] = {}
    if args.t is not None:
        subset = sorted(fgm_inference(l, args.t).indices)
    elif args.condition is not None:
        s = macro_settings(args)
        quality = np.sqrt(np.clip(np.diag(l), 0.0, None))
        condition = MacroCondition(args.condition)
        picked = conditional_subset(quality, condition, s.macro_topk, s.equidistant_stride, s.equidistant_offset)
        subset = picked.tolist()
        report["condition"] = condition.value
    else:
        subset = parse_subset(args.subset, l.shape[0]).tolist()

    log_qd = log_qd_score(l, subset)
    report.update(
        {
            "size": len(subset),
            "subset": " ".join(map(str, subset)),
            "qd_score": math.exp(log_qd),
            "log_qd_score": log_qd,
        }
    )
    if subset:
        report["loss_qd"] = macro_qd_loss(l, subset)
    write_keyed(report, args.output)
    return 0
