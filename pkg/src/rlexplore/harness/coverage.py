"""Unique-state and target-state coverage over episode records."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ..core import EpisodeRecord

CSV_HEADER = ("trial", "episode", "cumulative_timesteps", "unique_states", "target_unique_states")


@dataclass
class CoverageSeries:
    points: list[tuple[int, int]] = field(default_factory=list)
    final: int = 0


def unique_counts(keys: Iterable[str]) -> list[int]:
    """Running number of distinct keys after each element."""
    seen: set[str] = set()
    out = []
    for k in keys:
        seen.add(k)
        out.append(len(seen))
    return out


class CoverageTracker:
    """Incremental unique and target coverage, fed one episode at a time.

    A state is a target state when its recorded active-predicate index equals
    ``n`` (the length of the predicate sequence); with ``n=None`` target
    coverage stays zero. Every episode contributes its initial state and the
    next state of each step. One row is kept every ``stride`` timesteps, plus
    the last step of every episode.
    """

    def __init__(self, n: int | None = None, stride: int = 1, trial: int = 0):
        if stride < 1:
            raise ValueError("stride must be >= 1")
        self.n = n
        self.stride = stride
        self.trial = trial
        self.seen: set[str] = set()
        self.target_seen: set[str] = set()
        self.rows: list[tuple[int, int, int, int, int]] = []
        self.timesteps = 0

    def add(self, rec: EpisodeRecord) -> None:
        seen, tseen, n = self.seen, self.target_seen, self.n
        seen.add(rec.initial_state)
        if n is not None and rec.initial_active == n:
            tseen.add(rec.initial_state)
        last = len(rec.trace) - 1
        for i, st in enumerate(rec.trace):
            seen.add(st.next_state)
            if n is not None and st.next_active == n:
                tseen.add(st.next_state)
            self.timesteps += 1
            if self.timesteps % self.stride == 0 or i == last:
                self.rows.append((self.trial, rec.index, self.timesteps, len(seen), len(tseen)))

    def extend(self, records: Iterable[EpisodeRecord]) -> CoverageTracker:
        for rec in records:
            self.add(rec)
        return self

    @property
    def unique(self) -> int:
        return len(self.seen)

    @property
    def target(self) -> int:
        return len(self.target_seen)


def unique_state_coverage(episodes: Sequence[EpisodeRecord]) -> CoverageSeries:
    t = CoverageTracker().extend(episodes)
    return CoverageSeries([(r[2], r[3]) for r in t.rows], t.unique)


def target_coverage(episodes: Sequence[EpisodeRecord], sequence) -> CoverageSeries:
    """Distinct states recorded with the last predicate of ``sequence`` active.

    ``sequence`` is a predicate sequence or its length.
    """
    n = sequence if isinstance(sequence, int) else len(sequence)
    t = CoverageTracker(n).extend(episodes)
    return CoverageSeries([(r[2], r[4]) for r in t.rows], t.target)
