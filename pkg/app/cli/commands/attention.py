"""Attention commands: ``reweight`` and ``train-toy``."""

import argparse
from pathlib import Path

from app.cli.dependencies import add_macro_arguments, derived_seed, load_scene, macro_settings, seed_streams
from app.config import Settings
from app.schemas.dpp import PiMode
from app.schemas.toy import Regularizer
from app.services.toy_attention import degenerate_scene, reweight_compare, train_toy
from app.utils.logging import get_logger
from app.utils.matrix_io import write_keyed, write_rows

logger = get_logger(__name__)


def _add_scene_arguments(parser: argparse.ArgumentParser, settings: Settings) -> None:
    parser.add_argument("--attention", type=Path, help="Attention vector CSV (with --features)")
    parser.add_argument("--features", type=Path, help="T x C feature CSV (with --attention)")
    parser.add_argument("--length", type=int, default=200, help="Positions of a simulated scene")
    parser.add_argument("--peaks", type=int, default=4, help="Peaks of a simulated scene")
    parser.add_argument("--seed", type=int, default=settings.seed)
    parser.add_argument("--output", type=Path, help="Output CSV (default: stdout)")


def register(subparsers: argparse._SubParsersAction, settings: Settings) -> None:
    reweight = subparsers.add_parser("reweight", help="Compare quality-only and DPP reweighting")
    _add_scene_arguments(reweight, settings)
    reweight.add_argument("--k", type=int, default=12, help="Points per method")
    reweight.add_argument("--sigma", type=float, default=settings.gm_sigma, help="Mixture width (positions)")
    reweight.add_argument("--pi-mode", choices=[m.value for m in PiMode], default=settings.pi_mode)
    reweight.add_argument("--similarity", choices=["features", "positions"], default="features")
    reweight.add_argument("--report", type=Path, help="Write the keyed summary here (default: stderr log only)")
    reweight.set_defaults(handler=run_reweight)

    train = subparsers.add_parser("train-toy", help="Train toy attention logits with a DPP regularizer")
    _add_scene_arguments(train, settings)
    train.add_argument("--regularizer", choices=[r.value for r in Regularizer], default=Regularizer.MACRO.value)
    train.add_argument("--gamma", type=float, help="Task weight (default: macro_gamma or micro_gamma)")
    train.add_argument("--steps", type=int, default=500)
    train.add_argument("--lr", type=float, default=0.05, help="Learning rate")
    train.add_argument("--momentum", type=float, default=0.0, help="Nesterov momentum")
    train.add_argument("--max-grad-norm", type=float, help="Rescale gradients above this norm")
    train.add_argument("--keep-scene", action="store_true", help="Start from the scene itself, not its collapsed form")
    add_macro_arguments(train, settings)
    train.set_defaults(handler=run_train_toy)


def run_reweight(args: argparse.Namespace) -> int:
    """Curves ``position,original,quality_only,dpp``."""
    (rng,) = seed_streams(args, 1)
    scene = load_scene(args, rng)
    quality_only, dpp = reweight_compare(scene, args.k, args.sigma, PiMode(args.pi_mode), args.similarity)

    rows = (
        [pos, format(orig, ".17g"), format(q, ".17g"), format(d, ".17g")]
        for pos, (orig, q, d) in enumerate(zip(scene.attention, quality_only.reweighted, dpp.reweighted))
    )
    write_rows(["position", "original", "quality_only", "dpp"], rows, args.output)

    if args.report is not None:
        write_keyed(
            {
                "quality_only_kl": quality_only.kl_to_original,
                "quality_only_peaks": quality_only.peak_count,
                "quality_only_points": " ".join(map(str, quality_only.points)),
                "dpp_kl": dpp.kl_to_original,
                "dpp_peaks": dpp.peak_count,
                "dpp_points": " ".join(map(str, dpp.points)),
            },
            args.report,
        )
    return 0


def run_train_toy(args: argparse.Namespace) -> int:
    """Trajectory ``step,total,task,reg,entropy,qdscore,log_qdscore``."""
    settings = macro_settings(args)
    regularizer = Regularizer(args.regularizer)
    gamma = args.gamma
    if gamma is None:
        gamma = settings.macro_gamma if regularizer is Regularizer.MACRO else settings.micro_gamma

    scene_rng, trainer_rng = seed_streams(args, 2)
    scene = load_scene(args, scene_rng)
    if not args.keep_scene:
        scene = degenerate_scene(scene)

    trajectory = train_toy(
        scene,
        regularizer,
        gamma,
        args.steps,
        args.lr,
        seed=derived_seed(trainer_rng),
        momentum=args.momentum,
        max_grad_norm=args.max_grad_norm,
        settings=settings,
    )
    rows = (
        [s.iteration] + [format(v, ".17g") for v in (s.total, s.task, s.reg, s.entropy, s.qdscore, s.log_qdscore)]
        for s in trajectory.steps
    )
    write_rows(["step", "total", "task", "reg", "entropy", "qdscore", "log_qdscore"], rows, args.output)
    return 0
