"""Partitions of a multiset of colors into unordered blocks.

A partition is returned in canonical form: a tuple of blocks, each block a
sorted tuple of colors, blocks sorted. Two partitions are the same
configuration exactly when their canonical forms are equal.
"""

from __future__ import annotations

from collections import Counter
from functools import lru_cache
from typing import Hashable, Iterable, Iterator, Sequence

Block = tuple
Partition = tuple


def canonical(blocks: Iterable[Iterable[Hashable]]) -> Partition:
    return tuple(sorted(tuple(sorted(b)) for b in blocks))


def _sub_vectors(limit: tuple[int, ...], upper: tuple[int, ...] | None) -> Iterator[tuple[int, ...]]:
    """Nonzero vectors v <= limit (componentwise) with v <= upper (lexicographic),
    in decreasing lexicographic order."""
    k = len(limit)
    out: list[int] = [0] * k

    def rec(i: int, tight: bool):
        if i == k:
            if any(out):
                yield tuple(out)
            return
        top = limit[i]
        if tight and upper is not None:
            top = min(top, upper[i])
        for v in range(top, -1, -1):
            out[i] = v
            yield from rec(i + 1, tight and upper is not None and v == upper[i])
        out[i] = 0

    yield from rec(0, True)


def _vector_partitions(vec: tuple[int, ...], upper: tuple[int, ...] | None) -> Iterator[list[tuple[int, ...]]]:
    if not any(vec):
        yield []
        return
    for part in _sub_vectors(vec, upper):
        rest = tuple(a - b for a, b in zip(vec, part))
        for tail in _vector_partitions(rest, part):
            yield [part] + tail


@lru_cache(maxsize=4096)
def _partitions_of_counts(items: tuple[tuple[Hashable, int], ...]) -> tuple[Partition, ...]:
    colors = [c for c, _ in items]
    vec = tuple(n for _, n in items)
    found = []
    for parts in _vector_partitions(vec, None):
        blocks = []
        for part in parts:
            block = []
            for c, m in zip(colors, part):
                block.extend([c] * m)
            blocks.append(block)
        found.append(canonical(blocks))
    return tuple(sorted(found))


def multiset_partitions(colors: Sequence[Hashable] | Counter) -> tuple[Partition, ...]:
    """Every distinct partition of the color multiset, each exactly once, sorted.

    Blocks are generated as multiplicity vectors in non-increasing
    lexicographic order, which fixes one representative per unordered
    partition.
    """
    counts = colors if isinstance(colors, Counter) else Counter(colors)
    items = tuple(sorted((c, n) for c, n in counts.items() if n > 0))
    if not items:
        return ((),)
    return _partitions_of_counts(items)


def count_partitions(colors: Sequence[Hashable]) -> int:
    return len(multiset_partitions(colors))
