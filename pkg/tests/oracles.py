"""Slow, independent reference implementations used as test oracles."""

import itertools
from collections.abc import Callable

import numpy as np


def make_psd(rng: np.random.Generator, n: int, rank: int | None = None, ridge: float = 0.0) -> np.ndarray:
    """Random symmetric PSD matrix ``A A^T / r + ridge * I``."""
    r = n if rank is None else rank
    a = rng.standard_normal((n, r))
    m = a @ a.T / r + ridge * np.eye(n)
    return (m + m.T) / 2.0


def lu_det(m: np.ndarray) -> float:
    """Determinant by Gaussian elimination with partial pivoting."""
    a = np.array(m, dtype=np.float64)
    n = a.shape[0]
    det = 1.0
    for col in range(n):
        pivot = col + int(np.argmax(np.abs(a[col:, col])))
        if a[pivot, col] == 0.0:
            return 0.0
        if pivot != col:
            a[[col, pivot]] = a[[pivot, col]]
            det = -det
        det *= a[col, col]
        for row in range(col + 1, n):
            a[row, col:] -= a[row, col] / a[col, col] * a[col, col:]
    return det


def cofactor_det(m: np.ndarray) -> float:
    """Determinant by Laplace expansion along the first row (small matrices only)."""
    a = np.asarray(m, dtype=np.float64)
    n = a.shape[0]
    if n == 0:
        return 1.0
    if n == 1:
        return float(a[0, 0])
    total = 0.0
    for j in range(n):
        minor = np.delete(np.delete(a, 0, axis=0), j, axis=1)
        total += (-1) ** j * a[0, j] * cofactor_det(minor)
    return total


def naive_greedy(l: np.ndarray, t: int) -> list[int]:
    """Greedy MAP recomputing ``log det(L_{Y + i})`` from scratch for every candidate."""
    chosen: list[int] = []
    for _ in range(t):
        best, best_val = -1, -np.inf
        for i in range(l.shape[0]):
            if i in chosen:
                continue
            idx = chosen + [i]
            sign, logdet = np.linalg.slogdet(l[np.ix_(idx, idx)])
            if sign > 0 and logdet > best_val:
                best, best_val = i, logdet
        if best < 0:
            break
        chosen.append(best)
    return chosen


def all_subsets(n: int) -> list[tuple[int, ...]]:
    return [s for k in range(n + 1) for s in itertools.combinations(range(n), k)]


def enumerate_map(l: np.ndarray, t: int) -> tuple[int, ...]:
    """Exhaustive ``argmax det(L_Y)`` over size-t subsets, first best in lexicographic order."""
    best, best_det = (), -np.inf
    for subset in itertools.combinations(range(l.shape[0]), t):
        det = lu_det(l[np.ix_(subset, subset)])
        if det > best_det:
            best, best_det = subset, det
    return best


def central_difference(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of a scalar function."""
    grad = np.zeros_like(x, dtype=np.float64)
    for i in range(x.size):
        step = np.zeros_like(x, dtype=np.float64)
        step[i] = h
        grad[i] = (f(x + step) - f(x - step)) / (2.0 * h)
    return grad


def relative_error(actual: np.ndarray, expected: np.ndarray) -> float:
    return float(np.linalg.norm(actual - expected) / max(np.linalg.norm(expected), 1e-12))
