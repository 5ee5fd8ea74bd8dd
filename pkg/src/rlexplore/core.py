"""Episodic MDP/agent contracts, the generic RL loop and Q-table primitives."""

from __future__ import annotations

import hashlib
import math
import random
import struct
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, NamedTuple, Sequence

StateKey = str
ActionKey = str


class ContractViolation(RuntimeError):
    """Raised when an environment or agent is driven outside its contract."""


class Observation(NamedTuple):
    """What an agent sees of the environment: a canonical key plus a
    read-only view used for predicate evaluation."""

    key: StateKey
    view: Any = None


class Step(NamedTuple):
    state: StateKey
    action: ActionKey
    next_state: StateKey
    active: int = 1
    next_active: int = 1
    reward: float = 0.0


@dataclass
class RunConfig:
    episodes: int
    horizon: int
    seed: int = 0
    time_budget: float | None = None

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")


@dataclass
class EpisodeRecord:
    index: int
    initial_state: StateKey
    trace: list[Step]
    cumulative_timesteps: int
    truncated: bool = False
    initial_active: int = 1

    @property
    def steps(self) -> int:
        return len(self.trace)

    def to_log_line(self, verbose: bool = False) -> str:
        line = f"{self.index}\t{self.steps}\t{int(self.truncated)}\t{self.cumulative_timesteps}"
        if verbose:
            parts = [self.initial_state]
            for st in self.trace:
                parts.append(st.action)
                parts.append(st.next_state)
            line += "\t" + " ".join(parts)
        return line


def derive_seed(seed: int, *path: int) -> int:
    """Derive an independent 64-bit sub-seed from ``seed`` and an index path."""
    data = struct.pack(f"<{1 + len(path)}q", seed & 0x7FFFFFFFFFFFFFFF,
                       *(p & 0x7FFFFFFFFFFFFFFF for p in path))
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


_EMPTY_ROW: dict = {}


class QTable:
    """Lazily defaulted map (state, action) -> value.

    Reads never insert; absent entries read as ``default``.
    """

    __slots__ = ("default", "_rows")

    def __init__(self, default: float = 1.0):
        self.default = default
        self._rows: dict[StateKey, dict[ActionKey, float]] = {}

    def lookup(self, s: StateKey, a: ActionKey) -> float:
        row = self._rows.get(s)
        if row is None:
            return self.default
        return row.get(a, self.default)

    def set(self, s: StateKey, a: ActionKey, value: float) -> None:
        if not math.isfinite(value):
            raise ContractViolation(f"non-finite Q value {value!r} for ({s}, {a})")
        row = self._rows.get(s)
        if row is None:
            row = self._rows[s] = {}
        row[a] = value

    def raw_row(self, s: StateKey) -> dict[ActionKey, float]:
        """Stored entries for ``s`` without copying; callers must not mutate."""
        return self._rows.get(s, _EMPTY_ROW)

    def row(self, s: StateKey) -> dict[ActionKey, float]:
        """Stored entries for ``s`` (a copy; defaults not filled in)."""
        return dict(self._rows.get(s, ()))

    def max_over(self, s: StateKey, actions: Iterable[ActionKey] | None) -> float:
        row = self._rows.get(s)
        if row is None:
            return self.default
        if actions is None:
            # actions at s unknown: best stored value, or default if nothing stored
            return max(row.values()) if row else self.default
        d = self.default
        return max((row.get(a, d) for a in actions), default=d)

    def items(self):
        for s, row in self._rows.items():
            for a, v in row.items():
                yield (s, a), v

    def __len__(self):
        return sum(len(r) for r in self._rows.values())

    def dump(self) -> str:
        """Sorted text dump, one ``state<TAB>action<TAB>value`` line per entry."""
        lines = [f"{s}\t{a}\t{v!r}" for (s, a), v in sorted(self.items())]
        return "\n".join(lines) + ("\n" if lines else "")


class VisitTable:
    __slots__ = ("_counts",)

    def __init__(self):
        self._counts: dict[tuple[StateKey, ActionKey], int] = {}

    def get(self, s: StateKey, a: ActionKey) -> int:
        return self._counts.get((s, a), 0)

    def increment(self, s: StateKey, a: ActionKey) -> int:
        t = self._counts.get((s, a), 0) + 1
        self._counts[(s, a)] = t
        return t

    def total(self) -> int:
        return sum(self._counts.values())

    def items(self):
        return self._counts.items()

    def __len__(self):
        return len(self._counts)

    def dump(self) -> str:
        lines = [f"{s}\t{a}\t{v}" for (s, a), v in sorted(self._counts.items())]
        return "\n".join(lines) + ("\n" if lines else "")


def epsilon_greedy_pick(qrow: dict[ActionKey, float], actions: Sequence[ActionKey],
                        epsilon: float, rng, default: float = 1.0,
                        tie_break: str = "lowest") -> ActionKey:
    """With probability ``epsilon`` a uniform action, otherwise an argmax of
    ``qrow`` over ``actions`` (missing entries read as ``default``).

    ``tie_break="lowest"`` returns the lowest-keyed maximiser; ``"random"``
    draws one of the maximisers with ``rng``.
    """
    if not actions:
        raise ContractViolation("no enabled actions")
    if rng.random() < epsilon:
        return actions[rng.randrange(len(actions))]
    acts = sorted(actions)
    vals = [qrow.get(a, default) for a in acts]
    m = max(vals)
    if tie_break == "lowest":
        return acts[vals.index(m)]
    if tie_break != "random":
        raise ValueError(f"unknown tie_break {tie_break!r}")
    best = [a for a, v in zip(acts, vals) if v == m]
    return best[0] if len(best) == 1 else best[rng.randrange(len(best))]


def softmax_probabilities(values: Sequence[float]) -> list[float]:
    m = max(values)
    w = [math.exp(v - m) for v in values]
    z = sum(w)
    return [x / z for x in w]


def softmax_pick(qrow: dict[ActionKey, float], actions: Sequence[ActionKey], rng,
                 default: float = 0.0) -> ActionKey:
    """Sample an action with probability proportional to exp(Q)."""
    if not actions:
        raise ContractViolation("no enabled actions")
    acts = sorted(actions)
    probs = softmax_probabilities([qrow.get(a, default) for a in acts])
    u = rng.random()
    acc = 0.0
    for a, p in zip(acts, probs):
        acc += p
        if u < acc:
            return a
    return acts[-1]


class Environment:
    """Episodic environment contract.

    ``reset`` returns the initial observation, ``actions`` the enabled action
    keys at the current state (sorted), and ``step`` performs one transition,
    returning ``(observation, reward, done)``.
    """

    def reset(self) -> Observation:
        raise NotImplementedError

    def actions(self) -> Sequence[ActionKey]:
        raise NotImplementedError

    def step(self, action: ActionKey) -> tuple[Observation, float, bool]:
        raise NotImplementedError


class Agent:
    """Base agent. Subclasses override ``pick`` and usually the bookkeeping hooks."""

    def __init__(self):
        self.rng = random.Random(0)

    def reseed(self, seed: int) -> None:
        self.rng.seed(seed)

    def new_episode(self, initial: Observation) -> None:
        pass

    def pick(self, obs: Observation, actions: Sequence[ActionKey]) -> ActionKey:
        raise NotImplementedError

    def record_step(self, obs: Observation, action: ActionKey, next_obs: Observation,
                    reward: float = 0.0, next_actions: Sequence[ActionKey] | None = None) -> None:
        pass

    def process_episode(self) -> None:
        pass


@dataclass
class Annotator:
    """Tracks the active predicate index along an episode, with optional
    one-time latching once the last predicate holds."""

    predicates: Sequence[Callable[[Any], bool]]
    one_time: bool = False
    active: int = field(default=1, init=False)
    reached: bool = field(default=False, init=False)

    @property
    def n(self) -> int:
        return len(self.predicates)

    def highest(self, view) -> int:
        for i in range(len(self.predicates), 0, -1):
            if self.predicates[i - 1](view):
                return i
        raise ContractViolation("first predicate must hold on every state")

    def start(self, view) -> int:
        self.reached = False
        self.active = self.highest(view)
        return self.active

    def advance(self, view) -> tuple[int, int]:
        """Return ``(active, next_active)`` for a transition into ``view``."""
        if not self.reached:
            nxt = self.highest(view)
            if nxt == self.n and self.one_time:
                self.reached = True
        else:
            nxt = self.n
        prev = self.active
        self.active = nxt
        return prev, nxt


def run_experiment(env: Environment, agent: Agent, config: RunConfig,
                   annotator: Annotator | None = None,
                   on_episode: Callable[[EpisodeRecord], None] | None = None,
                   keep_records: bool = True) -> list[EpisodeRecord]:
    """The generic RL loop.

    Each episode resets ``env``, reseeds the agent from ``(config.seed, k)``,
    then alternates pick / step / record_step for up to ``horizon`` steps and
    finishes with ``process_episode``. ``annotator`` tags every step with
    active-predicate indices so that target coverage can be measured for any
    agent. Records are passed to ``on_episode`` as they complete.
    """
    records: list[EpisodeRecord] = []
    cumulative = 0
    deadline = None if config.time_budget is None else time.monotonic() + config.time_budget
    for k in range(config.episodes):
        if deadline is not None and time.monotonic() >= deadline:
            break
        obs = env.reset()
        initial_key = obs.key
        agent.reseed(derive_seed(config.seed, k))
        agent.new_episode(obs)
        init_active = annotator.start(obs.view) if annotator is not None else 1
        trace: list[Step] = []
        truncated = False
        actions = env.actions()
        for _ in range(config.horizon):
            if not actions:
                truncated = True
                break
            action = agent.pick(obs, actions)
            next_obs, reward, done = env.step(action)
            next_actions = () if done else env.actions()
            agent.record_step(obs, action, next_obs, reward, next_actions)
            if annotator is not None:
                p, q = annotator.advance(next_obs.view)
            else:
                p = q = 1
            trace.append(Step(obs.key, action, next_obs.key, p, q, reward))
            cumulative += 1
            obs, actions = next_obs, next_actions
            if done:
                truncated = True
                break
        agent.process_episode()
        rec = EpisodeRecord(k, initial_key, trace,
                            cumulative, truncated, init_active)
        if on_episode is not None:
            on_episode(rec)
        if keep_records:
            records.append(rec)
    return records
