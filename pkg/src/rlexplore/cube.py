"""Cube world: a chain of 3-D grids joined by one-way doors.

States are ``(g, w, b, d)``: cube index, two grid coordinates and a depth.
Every state offers the same eight actions; moves that would leave the cube
and ``into`` away from a door leave the state unchanged.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .core import ContractViolation, Environment, Observation

ACTIONS = ("above", "below", "down", "into", "left", "reset_depth", "right", "up")

# action -> (dw, db, dd)
_MOVES = {
    "left": (-1, 0, 0),
    "right": (1, 0, 0),
    "down": (0, -1, 0),
    "up": (0, 1, 0),
    "above": (0, 0, -1),
    "below": (0, 0, 1),
}


class CubeState(NamedTuple):
    g: int
    w: int
    b: int
    d: int


@dataclass
class CubeConfig:
    cubes: int = 6
    width: int = 10
    breadth: int = 10
    depth: int = 6
    # door cells (g, w, b); each leads to (g + 1, 0, 0, 0) from any depth
    doors: Sequence[tuple[int, int, int]] | None = None
    abstraction: str = "full"
    door_set: frozenset = field(default=frozenset(), init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("cubes", "width", "breadth", "depth"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.abstraction not in ("full", "depth-erased"):
            raise ValueError(f"unknown abstraction {self.abstraction!r}; use 'full' or 'depth-erased'")
        if self.doors is None:
            self.doors = [(g, 5, 5) for g in range(self.cubes - 1)
                          if self.width > 5 and self.breadth > 5]
        doors = []
        for g, w, b in self.doors:
            g, w, b = int(g), int(w), int(b)
            if not (0 <= g < self.cubes - 1):
                raise ValueError(f"door in cube {g} has no next cube")
            if not (0 <= w < self.width and 0 <= b < self.breadth):
                raise ValueError(f"door ({g}, {w}, {b}) out of bounds")
            doors.append((g, w, b))
        self.doors = doors
        self.door_set = frozenset(doors)

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.cubes, self.width, self.breadth, self.depth)

    @property
    def total_states(self) -> int:
        return self.cubes * self.width * self.breadth * self.depth


def cube_actions(state: CubeState | None = None) -> tuple[str, ...]:
    return ACTIONS


def cube_step(state: CubeState, action: str, config: CubeConfig) -> CubeState:
    g, w, b, d = state
    if action == "into":
        if (g, w, b) in config.door_set:
            return CubeState(g + 1, 0, 0, 0)
        return state
    if action == "reset_depth":
        return CubeState(g, w, b, 0)
    try:
        dw, db, dd = _MOVES[action]
    except KeyError:
        raise ContractViolation(f"unknown cube action {action!r}") from None
    nw, nb, nd = w + dw, b + db, d + dd
    if 0 <= nw < config.width and 0 <= nb < config.breadth and 0 <= nd < config.depth:
        return CubeState(g, nw, nb, nd)
    return state


def cube_reset() -> CubeState:
    return CubeState(0, 0, 0, 0)


def full_key(state: CubeState) -> str:
    return f"{state.g},{state.w},{state.b},{state.d}"


def depth_abstraction(state: CubeState) -> str:
    return f"{state.g},{state.w},{state.b}"


class CubeWorld(Environment):
    """Cube world as an episodic environment.

    ``visits`` accumulates per-cell visit counts (including each episode's
    initial cell) over the lifetime of the instance, for heatmaps.
    """

    def __init__(self, config: CubeConfig | None = None):
        self.config = config or CubeConfig()
        self.visits = np.zeros(self.config.shape, dtype=np.int64)
        self._keyfn = full_key if self.config.abstraction == "full" else depth_abstraction
        self.state = cube_reset()
        self._obs_cache: dict[CubeState, Observation] = {}

    def _observe(self, state: CubeState) -> Observation:
        obs = self._obs_cache.get(state)
        if obs is None:
            obs = self._obs_cache[state] = Observation(self._keyfn(state), state)
        return obs

    def reset(self):
        self.state = cube_reset()
        self.visits[self.state] += 1
        return self._observe(self.state)

    def actions(self):
        return ACTIONS

    def step(self, action):
        self.state = cube_step(self.state, action, self.config)
        self.visits[self.state] += 1
        return self._observe(self.state), 0.0, False


def reachable_states(config: CubeConfig) -> set[CubeState]:
    """All states reachable from the start, by breadth-first search."""
    start = cube_reset()
    seen = {start}
    frontier = [start]
    while frontier:
        nxt = []
        for s in frontier:
            for a in ACTIONS:
                t = cube_step(s, a, config)
                if t not in seen:
                    seen.add(t)
                    nxt.append(t)
        frontier = nxt
    return seen


def cube_coverage(visits: np.ndarray, g: int) -> float:
    """Fraction of cells of cube ``g`` visited at least once."""
    cells = visits[g]
    return float(np.count_nonzero(cells)) / cells.size


def top_view(visits: np.ndarray) -> np.ndarray:
    """Per cube, the number of distinct depths visited in each (w, b) column."""
    return np.count_nonzero(visits, axis=3)


@dataclass
class Heatmaps:
    top: np.ndarray            # (G, W, B) distinct depths visited
    depth_grids: np.ndarray    # (G, D, W, B) boolean visited
    files: list[str] = field(default_factory=list)


def _write_pgm(path: str, grid: np.ndarray, maxval: int, scale: int) -> None:
    # darker means more visited
    img = (255 - (grid.astype(np.float64) * 255.0 / maxval).round()).astype(np.uint8) \
        if maxval > 0 else np.full(grid.shape, 255, dtype=np.uint8)
    if scale > 1:
        img = np.kron(img, np.ones((scale, scale), dtype=np.uint8))
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def export_heatmaps(visits: np.ndarray, config: CubeConfig, outdir: str | None = None,
                    prefix: str = "", scale: int = 8) -> Heatmaps:
    """Build top-view and per-depth heatmaps from cell visit counts.

    When ``outdir`` is given, writes ``<prefix>cube<g>_top.csv``,
    ``<prefix>cube<g>_top.pgm`` and ``<prefix>cube<g>_depth<d>.pgm``.
    """
    visits = np.asarray(visits)
    if visits.shape != config.shape:
        raise ValueError(f"visit array shape {visits.shape} does not match config {config.shape}")
    top = top_view(visits)
    depth_grids = np.moveaxis(visits > 0, 3, 1)
    maps = Heatmaps(top, depth_grids)
    if outdir is None:
        return maps
    os.makedirs(outdir, exist_ok=True)
    for g in range(config.cubes):
        path = os.path.join(outdir, f"{prefix}cube{g}_top.csv")
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerows(top[g].tolist())
        maps.files.append(path)
        path = os.path.join(outdir, f"{prefix}cube{g}_top.pgm")
        _write_pgm(path, top[g], config.depth, scale)
        maps.files.append(path)
        for d in range(config.depth):
            path = os.path.join(outdir, f"{prefix}cube{g}_depth{d}.pgm")
            _write_pgm(path, depth_grids[g, d], 1, scale)
            maps.files.append(path)
    return maps


def cube_waypoints(targets: Sequence[int] = (1, 2, 3)):
    """Predicate list ``[true, cube >= t1, cube >= t2, ...]``."""
    from .predicates import TRUE, cube_at_least

    return [TRUE] + [cube_at_least(t) for t in targets]
