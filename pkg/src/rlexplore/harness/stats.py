"""Mann-Whitney U test and small summary statistics."""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

EXACT_MAX_SIZE = 8


class MannWhitneyResult(NamedTuple):
    u: float          # U statistic of the first sample
    p_value: float    # two-sided
    method: str       # "exact" or "normal"


def rank_with_ties(values: Sequence[float]) -> tuple[list[float], list[int]]:
    """Midranks (1-based) and the sizes of tie groups."""
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0.0] * len(values)
    ties = []
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mid = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        ties.append(j - i + 1)
        i = j + 1
    return ranks, ties


def u_distribution(n: int, m: int) -> list[int]:
    """Number of rank arrangements giving each U in ``0..n*m`` (no ties).

    These are the coefficients of the Gaussian binomial ``[n+m choose n]``,
    built as ``prod_{i=1..n} (1 - q^(m+i)) / (1 - q^i)``.
    """
    if n > m:
        n, m = m, n
    size = n * m + 1
    poly = [0] * size
    poly[0] = 1
    for i in range(1, n + 1):
        shift = m + i
        for k in range(size - 1, shift - 1, -1):
            poly[k] -= poly[k - shift]
        for k in range(i, size):
            poly[k] += poly[k - i]
    return poly


def _exact_p(u: float, n: int, m: int) -> float:
    dist = u_distribution(n, m)
    total = sum(dist)
    k = int(round(u))
    lower = sum(dist[:k + 1])
    upper = sum(dist[k:])
    return min(1.0, 2.0 * min(lower, upper) / total)


def _normal_p(u: float, n: int, m: int, ties: list[int]) -> float:
    big_n = n + m
    tie_term = sum(t ** 3 - t for t in ties)
    var = n * m / 12.0 * ((big_n + 1) - tie_term / (big_n * (big_n - 1)))
    if var <= 0:
        return 1.0
    z = max(0.0, abs(u - n * m / 2.0) - 0.5) / math.sqrt(var)
    return min(1.0, math.erfc(z / math.sqrt(2.0)))


def mann_whitney_u(a: Sequence[float], b: Sequence[float], method: str = "auto") -> MannWhitneyResult:
    """Two-sided Mann-Whitney U test of ``a`` against ``b``.

    U counts pairs with ``a_i > b_j`` (ties count one half). The p-value is
    exact when both samples are tie-free and the smaller has at most
    ``EXACT_MAX_SIZE`` values; otherwise a normal approximation with tie
    correction and continuity correction is used.
    """
    a = [float(x) for x in a]
    b = [float(x) for x in b]
    if not a or not b:
        raise ValueError("both samples must be nonempty")
    n, m = len(a), len(b)
    ranks, ties = rank_with_ties(a + b)
    u = sum(ranks[:n]) - n * (n + 1) / 2.0
    has_ties = any(t > 1 for t in ties)
    if method == "auto":
        method = "exact" if (min(n, m) <= EXACT_MAX_SIZE and not has_ties) else "normal"
    if method == "exact":
        if has_ties:
            raise ValueError("exact p-values need tie-free samples")
        return MannWhitneyResult(u, _exact_p(u, n, m), "exact")
    if method == "normal":
        return MannWhitneyResult(u, _normal_p(u, n, m, ties), "normal")
    raise ValueError(f"unknown method {method!r}")


def mean_sd(values: Sequence[float]) -> tuple[float, float]:
    """Mean and sample standard deviation (0 for fewer than two values)."""
    vals = list(values)
    if not vals:
        return math.nan, math.nan
    mean = sum(vals) / len(vals)
    if len(vals) < 2:
        return mean, 0.0
    var = sum((x - mean) ** 2 for x in vals) / (len(vals) - 1)
    return mean, math.sqrt(var)
