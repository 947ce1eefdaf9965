"""Independent reference implementations used as test oracles.

Everything here is deliberately brute force and written against plain numpy
arrays, not the autodiff graph, so it cannot share bugs with the code under
test.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def brute_score(o: np.ndarray, t: np.ndarray, labels: tuple[int, ...]) -> float:
    """Explicit sum of transition + emission terms, y_0 = START (last row)."""
    start = t.shape[0] - 1
    total = 0.0
    prev = start
    for i, y in enumerate(labels):
        total += t[prev, y] + o[i, y]
        prev = y
    return total


def all_sequences(n: int, num_labels: int):
    return itertools.product(range(num_labels), repeat=n)


def brute_log_partition(o: np.ndarray, t: np.ndarray) -> float:
    """log sum over all L^n label sequences of exp(score)."""
    n, num_labels = o.shape
    scores = [brute_score(o, t, seq) for seq in all_sequences(n, num_labels)]
    m = max(scores)
    return m + math.log(sum(math.exp(s - m) for s in scores))


def brute_nll(o: np.ndarray, t: np.ndarray, labels: tuple[int, ...]) -> float:
    return brute_log_partition(o, t) - brute_score(o, t, labels)


def brute_viterbi_score(o: np.ndarray, t: np.ndarray) -> float:
    n, num_labels = o.shape
    return max(brute_score(o, t, seq) for seq in all_sequences(n, num_labels))


def numeric_gradient(fn, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function of one array."""
    g = np.zeros_like(x)
    flat_x = x.ravel()
    flat_g = g.ravel()
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + h
        up = fn()
        flat_x[i] = orig - h
        down = fn()
        flat_x[i] = orig
        flat_g[i] = (up - down) / (2 * h)
    return g


def rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom))
