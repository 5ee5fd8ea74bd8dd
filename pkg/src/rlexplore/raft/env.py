"""The simulated Raft cluster as a partition MDP.

A state is the multiset of partition blocks, each a multiset of process
colors, plus the bounded ``SameState`` counter. Colors are bounded,
identifier-free summaries of a process's local state, so relabelling
processes never changes a state key.

Actions are every partition of the live colors (re-selecting the current one
means "stay"), crashing or restarting a process of a given color, and
injecting a client request at the leader.
"""

from __future__ import annotations

from collections import Counter
from typing import NamedTuple

from ..core import ContractViolation, Environment, Observation
from .partitions import canonical, multiset_partitions
from .sim import LEADER, RaftCluster, RaftParams

_ROLE_TAG = {"Follower": "F", "Candidate": "C", "Leader": "L"}


class Color(NamedTuple):
    term: int
    role: str
    log: tuple
    commit: int
    vote: str
    alive: bool

    def encode(self) -> str:
        log = ".".join(map(str, self.log))
        return f"t{self.term}{_ROLE_TAG[self.role]}:{log}:c{self.commit}{self.vote}" + (
            "" if self.alive else "x")


class ProcessView(NamedTuple):
    term: int
    role: str
    log_terms: tuple
    commit_index: int
    vote_class: str
    alive: bool


class SystemSnapshot(NamedTuple):
    processes: tuple
    same_state: int


def vote_class(proc) -> str:
    if proc.voted_for is None:
        return "N"
    return "S" if proc.voted_for == proc.pid else "O"


def paint(proc, params: RaftParams) -> Color:
    cap = params.term_cap
    return Color(
        min(proc.term, cap),
        proc.role,
        tuple(min(e.term, cap) for e in proc.log[:params.log_cap]),
        min(proc.commit_index, params.commit_cap),
        vote_class(proc),
        proc.alive,
    )


def snapshot(cluster: RaftCluster, same_state: int = 0) -> SystemSnapshot:
    return SystemSnapshot(
        tuple(ProcessView(p.term, p.role, tuple(e.term for e in p.log), p.commit_index,
                          vote_class(p), p.alive) for p in cluster.procs),
        same_state,
    )


def encode_partition(blocks) -> str:
    return "".join("{" + ",".join(b) + "}" for b in blocks)


def color_blocks(cluster: RaftCluster, colors: list[str]) -> tuple:
    """Canonical multiset of blocks of colors (crashed processes are singletons)."""
    return canonical([[colors[pid] for pid in block] for block in cluster.blocks()])


def abstract_state(cluster: RaftCluster, same_state: int, params: RaftParams) -> str:
    colors = [paint(p, params).encode() for p in cluster.procs]
    return encode_partition(color_blocks(cluster, colors)) + f"|s{same_state}"


class RaftEnv(Environment):
    """Episodic partition-MDP over a :class:`RaftCluster`.

    With ``check_safety`` set, election safety, log matching and committed
    durability are checked after every step; failures accumulate in
    ``violations``.
    """

    def __init__(self, params: RaftParams | None = None, check_safety: bool = False):
        self.params = params or RaftParams()
        self.cluster = RaftCluster(self.params)
        self.check_safety = check_safety
        self.violations: list[str] = []
        self.reset()

    # -- state ------------------------------------------------------------

    def _recompute(self) -> None:
        params = self.params
        self.colors = [paint(p, params).encode() for p in self.cluster.procs]
        self.config = color_blocks(self.cluster, self.colors)
        self.key = encode_partition(self.config) + f"|s{self.same_state}"
        self._actions = None

    def observe(self) -> Observation:
        return Observation(self.key, snapshot(self.cluster, self.same_state))

    def reset(self):
        self.cluster.reset()
        self.same_state = 0
        self.crashes_used = 0
        self.requests_used = 0
        self._leaders: dict[int, int] = {}
        self._committed: list[tuple] = [() for _ in self.cluster.procs]
        self._recompute()
        return self.observe()

    def live_partition(self) -> tuple:
        """Current partition of the live processes, in colors."""
        live = [[self.colors[pid] for pid in block if self.cluster.procs[pid].alive]
                for block in self.cluster.blocks()]
        return canonical(b for b in live if b)

    # -- actions ----------------------------------------------------------

    def _enumerate(self) -> dict[str, tuple]:
        procs = self.cluster.procs
        live = [self.colors[p.pid] for p in procs if p.alive]
        crashed = [self.colors[p.pid] for p in procs if not p.alive]
        acts: dict[str, tuple] = {}
        if live:
            for part in multiset_partitions(Counter(live)):
                acts["p:" + encode_partition(part)] = ("partition", part)
        params = self.params
        if self.crashes_used < params.max_crash_actions and len(crashed) < params.max_concurrent_crashes:
            for c in sorted(set(live)):
                acts["crash:" + c] = ("crash", c)
        for c in sorted(set(crashed)):
            acts["start:" + c] = ("start", c)
        if self.requests_used < params.request_budget and self.cluster.leader() is not None:
            acts["request"] = ("request", None)
        return acts

    def actions(self):
        if self._actions is None:
            self._action_map = self._enumerate()
            self._actions = tuple(sorted(self._action_map))
        return self._actions

    def _first_with_color(self, color: str, alive: bool, taken=()) -> int:
        for p in self.cluster.procs:
            if p.alive == alive and p.pid not in taken and self.colors[p.pid] == color:
                return p.pid
        raise ContractViolation(f"no {'live' if alive else 'crashed'} process with color {color}")

    def step(self, action):
        self.actions()
        payload = self._action_map.get(action)
        if payload is None:
            raise ContractViolation(f"action {action!r} is not enabled in state {self.key}")
        kind, arg = payload
        before = self.config
        stay = False
        cluster = self.cluster
        if kind == "partition":
            if arg == self.live_partition():
                stay = True
            else:
                taken: set[int] = set()
                blocks = []
                for block in arg:
                    pids = []
                    for c in block:
                        pid = self._first_with_color(c, True, taken)
                        taken.add(pid)
                        pids.append(pid)
                    blocks.append(pids)
                cluster.set_partition(blocks)
        elif kind == "crash":
            cluster.crash(self._first_with_color(arg, True))
            self.crashes_used += 1
        elif kind == "start":
            cluster.start(self._first_with_color(arg, False))
        elif kind == "request":
            cluster.submit(cluster.leader())
            self.requests_used += 1
        cluster.run(self.params.ticks)
        self._recompute_colors_only()
        if stay and self.config == before:
            self.same_state = min(self.same_state + 1, self.params.max_same_state)
        else:
            self.same_state = 0
        self.key = encode_partition(self.config) + f"|s{self.same_state}"
        if self.check_safety:
            self._check()
        return self.observe(), 0.0, False

    def _recompute_colors_only(self) -> None:
        params = self.params
        self.colors = [paint(p, params).encode() for p in self.cluster.procs]
        self.config = color_blocks(self.cluster, self.colors)
        self._actions = None

    # -- safety -----------------------------------------------------------

    def _check(self) -> None:
        procs = self.cluster.procs
        t = self.cluster.now
        for p in procs:
            if p.alive and p.role == LEADER:
                seen = self._leaders.setdefault(p.term, p.pid)
                if seen != p.pid:
                    self.violations.append(
                        f"tick {t}: election safety: processes {seen} and {p.pid} lead term {p.term}")
        for a in range(len(procs)):
            for b in range(a + 1, len(procs)):
                la, lb = procs[a].log, procs[b].log
                for i in range(min(len(la), len(lb)) - 1, -1, -1):
                    if la[i].term == lb[i].term:
                        if la[:i + 1] != lb[:i + 1]:
                            self.violations.append(
                                f"tick {t}: log matching: processes {a} and {b} differ before index {i + 1}")
                        break
        for p in procs:
            old = self._committed[p.pid]
            if tuple(p.log[:len(old)]) != old:
                self.violations.append(f"tick {t}: committed entries of process {p.pid} changed")
            if p.commit_index > len(p.log):
                self.violations.append(f"tick {t}: process {p.pid} commit index beyond log")
            self._committed[p.pid] = tuple(p.log[:p.commit_index])
