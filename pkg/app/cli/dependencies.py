"""Input loading, validation and shared flags for the CLI commands."""

from argparse import ArgumentParser, Namespace
from pathlib import Path

import numpy as np

from app.config import Settings, get_settings
from app.exceptions import DimensionError, InputFormatError
from app.schemas.toy import SyntheticScene
from app.services.lensemble import as_subset
from app.services.numerics import as_symmetric
from app.services.sampling import split_rng
from app.services.toy_attention import simulate_attention
from app.utils.matrix_io import read_matrix, read_vector


def require_file(path: Path, flag: str) -> Path:
    """Validate that an input file exists."""
    if not path.exists():
        raise FileNotFoundError(f"{flag}: no such file: {path}")
    return path


def load_l(path: Path) -> np.ndarray:
    """Load a symmetric L-ensemble."""
    return as_symmetric(read_matrix(require_file(path, "--l")), "L")


def load_attention(path: Path) -> np.ndarray:
    """Load attention as a vector or a (steps x T) matrix."""
    arr = read_matrix(require_file(path, "--attention"))
    return arr.reshape(-1) if 1 in arr.shape else arr


def parse_subset(text: str, t_total: int) -> np.ndarray:
    """
    Parse ``"0,3,5"`` into validated subset indices; an empty string is the empty set.
    """
    parts = [p.strip() for p in text.split(",") if p.strip()]
    try:
        indices = [int(p) for p in parts]
    except ValueError as e:
        raise InputFormatError(f"--subset: {e}") from e
    return as_subset(np.asarray(indices, dtype=np.int64), t_total)


def seed_streams(args: Namespace, n: int) -> list[np.random.Generator]:
    """Split ``--seed`` into ``n`` independent sources."""
    return split_rng(args.seed, n)


def derived_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(2**31))


def load_scene(args: Namespace, rng: np.random.Generator) -> SyntheticScene:
    """
    Scene from ``--attention``/``--features`` files, or a simulated one.

    Both files must be given together; otherwise a scene of ``--length``
    positions with ``--peaks`` peaks is drawn from ``rng``.
    """
    if (args.attention is None) != (args.features is None):
        raise InputFormatError("--attention and --features must be given together")
    if args.attention is None:
        return simulate_attention(args.length, args.peaks, rng)

    attention = read_vector(require_file(args.attention, "--attention"))
    features = read_matrix(require_file(args.features, "--features"))
    if features.shape[0] != attention.size:
        raise DimensionError(f"{features.shape[0]} feature rows but {attention.size} attention positions")
    total = attention.sum()
    if total <= 0 or np.any(attention < 0):
        raise InputFormatError("--attention must be non-negative with positive mass")
    return SyntheticScene(t_total=attention.size, features=features, attention=attention / total)


def add_macro_arguments(parser: ArgumentParser, settings: Settings) -> None:
    """Flags for the Macro conditional subsets: top-k size and the equidistant grid."""
    parser.add_argument("--k", type=int, default=settings.macro_topk, help="Top-k for improve-diversity-given-quality")
    parser.add_argument(
        "--stride", type=int, default=settings.equidistant_stride, help="Stride for improve-quality-given-diversity"
    )
    parser.add_argument("--offset", type=int, default=settings.equidistant_offset, help="Offset of the equidistant grid")


def macro_settings(args: Namespace) -> Settings:
    """
    Cached settings with the Macro subset flags ``--k``, ``--stride`` and ``--offset`` applied.

    Raises:
        ValidationError: an override out of range, or an offset not below the stride
    """
    overrides = {"macro_topk": args.k, "equidistant_stride": args.stride, "equidistant_offset": args.offset}
    return Settings(**{**get_settings().model_dump(), **overrides})
