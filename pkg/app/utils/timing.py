"""Utility functions for wall-clock timing and size grids."""

import re
import statistics
import time
from collections.abc import Callable
from typing import TypeVar

T = TypeVar("T")


def parse_sizes(text: str) -> list[int]:
    """
    Parse a comma-separated list of positive integers.

    Args:
        text: Size list such as ``"64,256,1024"``

    Returns:
        Sizes in the given order

    Examples:
        >>> parse_sizes("64, 256,1024")
        [64, 256, 1024]
    """
    if not validate_sizes(text):
        raise ValueError(f"Invalid size list: {text!r}")
    sizes = [int(part) for part in text.split(",")]
    if any(size < 1 for size in sizes):
        raise ValueError(f"Sizes must be positive: {text!r}")
    return sizes


def validate_sizes(text: str) -> bool:
    """
    Validate if a string is a comma-separated integer list.

    Args:
        text: String to validate

    Returns:
        True if valid
    """
    return bool(re.match(r"^\s*\d+(\s*,\s*\d+)*\s*$", text))


def format_seconds(seconds: float) -> str:
    """
    Format a duration for log lines.

    Examples:
        >>> format_seconds(0.0123)
        '12.30 ms'
        >>> format_seconds(2.5)
        '2.500 s'
    """
    if seconds < 1.0:
        return f"{seconds * 1e3:.2f} ms"
    return f"{seconds:.3f} s"


def median_wall_time(fn: Callable[[], T], repeats: int) -> tuple[float, T]:
    """
    Run ``fn`` ``repeats`` times and return the median wall time with the last result.

    Args:
        fn: Zero-argument callable to time
        repeats: Number of timed runs (at least 1)

    Returns:
        (median seconds, value returned by the final run)
    """
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    times = []
    result = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - start)
    return statistics.median(times), result
