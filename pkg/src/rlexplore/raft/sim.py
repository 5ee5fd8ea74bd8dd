"""Deterministic tick-based Raft simulator with partitionable links.

Every tick, live processes (in index order) first handle the messages queued
for them on the previous tick, then advance their timers. Messages produced
during a tick are routed at its end: a message reaches its destination's
inbox only if sender and receiver are alive and in the same partition block,
otherwise it is dropped. Election timeouts are a pure function of
``(seed, process, term)``, so a fixed seed and action sequence always
produce the same run.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from ..core import derive_seed

FOLLOWER, CANDIDATE, LEADER = "Follower", "Candidate", "Leader"

# message kinds
REQUEST_VOTE, VOTE_REPLY, APPEND, APPEND_REPLY = "rv", "rvr", "ae", "aer"


class Entry(NamedTuple):
    term: int
    request: int


class Message(NamedTuple):
    kind: str
    src: int
    dst: int
    term: int
    # rv: (last_index, last_term); rvr: (granted,);
    # ae: (prev_index, prev_term, entries, leader_commit); aer: (success, match_index)
    body: tuple


@dataclass
class RaftParams:
    nodes: int = 3
    ticks: int = 4
    max_same_state: int = 5
    max_crash_actions: int = 3
    max_concurrent_crashes: int = 1
    request_budget: int = 3
    term_cap: int = 5
    log_cap: int = 6
    commit_cap: int = 6
    election_timeout: tuple[int, int] = (10, 20)
    heartbeat_interval: int = 2
    initial_term: int = 1
    seed: int = 0

    def __post_init__(self):
        self.election_timeout = tuple(int(v) for v in self.election_timeout)
        if self.nodes < 1:
            raise ValueError("nodes must be >= 1")
        if self.ticks < 0:
            raise ValueError("ticks must be >= 0")
        lo, hi = self.election_timeout
        if not 1 <= lo <= hi:
            raise ValueError("election_timeout must be an interval 1 <= lo <= hi")
        if self.heartbeat_interval < 1:
            raise ValueError("heartbeat_interval must be >= 1")
        for name in ("max_same_state", "max_crash_actions", "max_concurrent_crashes",
                     "request_budget", "term_cap", "log_cap", "commit_cap", "initial_term"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


class Process:
    __slots__ = ("pid", "term", "role", "log", "commit_index", "voted_for", "alive",
                 "election_timer", "heartbeat_timer", "votes", "next_index", "match_index",
                 "inbox")

    def __init__(self, pid: int, term: int):
        self.pid = pid
        self.term = term
        self.role = FOLLOWER
        self.log: list[Entry] = []
        self.commit_index = 0
        self.voted_for: int | None = None
        self.alive = True
        self.election_timer = 0
        self.heartbeat_timer = 0
        self.votes: set[int] = set()
        self.next_index: dict[int, int] = {}
        self.match_index: dict[int, int] = {}
        self.inbox: list[Message] = []

    def last_log_term(self) -> int:
        return self.log[-1].term if self.log else 0

    def copy(self, relabel=None) -> Process:
        f = relabel or (lambda i: i)
        p = Process(f(self.pid), self.term)
        p.role = self.role
        p.log = list(self.log)
        p.commit_index = self.commit_index
        p.voted_for = None if self.voted_for is None else f(self.voted_for)
        p.alive = self.alive
        p.election_timer = self.election_timer
        p.heartbeat_timer = self.heartbeat_timer
        p.votes = {f(v) for v in self.votes}
        p.next_index = {f(k): v for k, v in self.next_index.items()}
        p.match_index = {f(k): v for k, v in self.match_index.items()}
        p.inbox = [m._replace(src=f(m.src), dst=f(m.dst)) for m in self.inbox]
        return p


class RaftCluster:
    """A cluster of ``params.nodes`` Raft processes plus the current partition.

    ``block_of[i]`` is the partition block id of process ``i``; processes can
    exchange messages only when their block ids are equal.
    """

    def __init__(self, params: RaftParams):
        self.params = params
        self._timeouts: dict[tuple[int, int], int] = {}
        self.reset()

    def reset(self) -> None:
        p = self.params
        self.procs = [Process(i, p.initial_term) for i in range(p.nodes)]
        for proc in self.procs:
            proc.election_timer = self.timeout(proc.pid, proc.term)
        self.block_of = [0] * p.nodes
        self.outbox: list[Message] = []
        self.next_request = 1
        self.now = 0

    # -- configuration -------------------------------------------------

    def timeout(self, pid: int, term: int) -> int:
        key = (pid, term)
        t = self._timeouts.get(key)
        if t is None:
            lo, hi = self.params.election_timeout
            t = lo + derive_seed(self.params.seed, pid, term) % (hi - lo + 1)
            self._timeouts[key] = t
        return t

    def set_partition(self, blocks: list[list[int]]) -> None:
        """Install a partition of the live processes; crashed ones stay isolated."""
        n = self.params.nodes
        block_of = [-1] * n
        for bid, block in enumerate(blocks):
            for pid in block:
                block_of[pid] = bid
        nxt = len(blocks)
        for pid in range(n):
            if block_of[pid] < 0:
                block_of[pid] = nxt
                nxt += 1
        self.block_of = block_of

    def isolate(self, pid: int) -> None:
        self.block_of[pid] = max(self.block_of) + 1

    def blocks(self) -> list[list[int]]:
        groups: dict[int, list[int]] = {}
        for pid, bid in enumerate(self.block_of):
            groups.setdefault(bid, []).append(pid)
        return [groups[b] for b in sorted(groups)]

    # -- faults and requests --------------------------------------------

    def crash(self, pid: int) -> None:
        proc = self.procs[pid]
        proc.alive = False
        proc.inbox = []
        proc.role = FOLLOWER
        proc.votes = set()
        proc.next_index, proc.match_index = {}, {}
        self.isolate(pid)

    def start(self, pid: int) -> None:
        # term, vote, log and commit index are persistent
        proc = self.procs[pid]
        proc.alive = True
        proc.role = FOLLOWER
        proc.election_timer = self.timeout(pid, proc.term)
        self.isolate(pid)

    def leader(self) -> int | None:
        """Live leader with the highest term (lowest index on ties)."""
        best = None
        for proc in self.procs:
            if proc.alive and proc.role == LEADER and (best is None or proc.term > self.procs[best].term):
                best = proc.pid
        return best

    def submit(self, pid: int) -> None:
        proc = self.procs[pid]
        if not (proc.alive and proc.role == LEADER):
            raise ValueError(f"process {pid} is not a live leader")
        proc.log.append(Entry(proc.term, self.next_request))
        self.next_request += 1
        proc.match_index[pid] = len(proc.log)

    # -- time -----------------------------------------------------------

    def run(self, ticks: int) -> None:
        for _ in range(ticks):
            self.tick()

    def tick(self) -> None:
        block_of = self.block_of
        for proc in self.procs:
            if not proc.alive or not proc.inbox:
                continue
            msgs, proc.inbox = proc.inbox, []
            for m in msgs:
                if block_of[m.src] == block_of[proc.pid]:
                    self._handle(proc, m)
        hb = self.params.heartbeat_interval
        for proc in self.procs:
            if not proc.alive:
                continue
            if proc.role == LEADER:
                proc.heartbeat_timer -= 1
                if proc.heartbeat_timer <= 0:
                    self._broadcast_append(proc)
                    proc.heartbeat_timer = hb
            else:
                proc.election_timer -= 1
                if proc.election_timer <= 0:
                    self._start_election(proc)
        procs = self.procs
        for m in self.outbox:
            dst = procs[m.dst]
            if dst.alive and procs[m.src].alive and block_of[m.src] == block_of[m.dst]:
                dst.inbox.append(m)
        self.outbox = []
        self.now += 1

    # -- protocol -------------------------------------------------------

    def _send(self, kind, src, dst, term, body):
        self.outbox.append(Message(kind, src, dst, term, body))

    def _majority(self) -> int:
        return self.params.nodes // 2 + 1

    def _step_down(self, proc: Process, term: int) -> None:
        if term > proc.term:
            proc.term = term
            proc.voted_for = None
        proc.role = FOLLOWER
        proc.votes = set()
        proc.next_index, proc.match_index = {}, {}
        proc.election_timer = self.timeout(proc.pid, proc.term)

    def _start_election(self, proc: Process) -> None:
        proc.term += 1
        proc.role = CANDIDATE
        proc.voted_for = proc.pid
        proc.votes = {proc.pid}
        proc.election_timer = self.timeout(proc.pid, proc.term)
        if len(proc.votes) >= self._majority():
            self._become_leader(proc)
            return
        body = (len(proc.log), proc.last_log_term())
        for other in range(self.params.nodes):
            if other != proc.pid:
                self._send(REQUEST_VOTE, proc.pid, other, proc.term, body)

    def _become_leader(self, proc: Process) -> None:
        proc.role = LEADER
        proc.votes = set()
        n = len(proc.log)
        proc.next_index = {q: n + 1 for q in range(self.params.nodes) if q != proc.pid}
        proc.match_index = {q: 0 for q in range(self.params.nodes) if q != proc.pid}
        proc.match_index[proc.pid] = n
        self._broadcast_append(proc)
        proc.heartbeat_timer = self.params.heartbeat_interval
        self._advance_commit(proc)

    def _broadcast_append(self, proc: Process) -> None:
        for q, nxt in proc.next_index.items():
            prev = nxt - 1
            prev_term = proc.log[prev - 1].term if prev > 0 else 0
            self._send(APPEND, proc.pid, q, proc.term,
                       (prev, prev_term, tuple(proc.log[prev:]), proc.commit_index))

    def _handle(self, proc: Process, m: Message) -> None:
        if m.term > proc.term:
            self._step_down(proc, m.term)
        kind = m.kind
        if kind == REQUEST_VOTE:
            last_index, last_term = m.body
            mine = (proc.last_log_term(), len(proc.log))
            granted = (m.term == proc.term
                       and proc.voted_for in (None, m.src)
                       and (last_term, last_index) >= mine)
            if granted:
                proc.voted_for = m.src
                proc.election_timer = self.timeout(proc.pid, proc.term)
            self._send(VOTE_REPLY, proc.pid, m.src, proc.term, (granted,))
        elif kind == VOTE_REPLY:
            if proc.role == CANDIDATE and m.term == proc.term and m.body[0]:
                proc.votes.add(m.src)
                if len(proc.votes) >= self._majority():
                    self._become_leader(proc)
        elif kind == APPEND:
            self._handle_append(proc, m)
        elif kind == APPEND_REPLY:
            if proc.role != LEADER or m.term != proc.term:
                return
            success, match = m.body
            if success:
                if match > proc.match_index.get(m.src, 0):
                    proc.match_index[m.src] = match
                proc.next_index[m.src] = proc.match_index[m.src] + 1
                self._advance_commit(proc)
            else:
                proc.next_index[m.src] = max(1, proc.next_index[m.src] - 1)

    def _handle_append(self, proc: Process, m: Message) -> None:
        if m.term < proc.term:
            self._send(APPEND_REPLY, proc.pid, m.src, proc.term, (False, 0))
            return
        if proc.role != FOLLOWER:
            self._step_down(proc, m.term)
        proc.election_timer = self.timeout(proc.pid, proc.term)
        prev, prev_term, entries, leader_commit = m.body
        log = proc.log
        if prev > len(log) or (prev > 0 and log[prev - 1].term != prev_term):
            self._send(APPEND_REPLY, proc.pid, m.src, proc.term, (False, 0))
            return
        for j, e in enumerate(entries):
            idx = prev + j  # 0-based position
            if idx < len(log):
                if log[idx].term != e.term:
                    del log[idx:]
                    log.append(e)
            else:
                log.append(e)
        last_new = prev + len(entries)
        if leader_commit > proc.commit_index:
            proc.commit_index = max(proc.commit_index, min(leader_commit, last_new))
        self._send(APPEND_REPLY, proc.pid, m.src, proc.term, (True, last_new))

    def _advance_commit(self, proc: Process) -> None:
        need = self._majority()
        for n in range(len(proc.log), proc.commit_index, -1):
            if proc.log[n - 1].term != proc.term:
                break
            if sum(1 for v in proc.match_index.values() if v >= n) >= need:
                proc.commit_index = n
                break

    # -- relabelling ----------------------------------------------------

    def relabeled(self, perm: list[int]) -> RaftCluster:
        """Copy with process ``i`` renamed to ``perm[i]``."""
        other = RaftCluster.__new__(RaftCluster)
        other.params = self.params
        other._timeouts = self._timeouts
        f = perm.__getitem__
        procs: list[Process | None] = [None] * len(self.procs)
        for proc in self.procs:
            procs[perm[proc.pid]] = proc.copy(f)
        other.procs = procs
        block_of = [0] * len(self.block_of)
        for pid, b in enumerate(self.block_of):
            block_of[perm[pid]] = b
        other.block_of = block_of
        other.outbox = [m._replace(src=f(m.src), dst=f(m.dst)) for m in self.outbox]
        other.next_request = self.next_request
        other.now = self.now
        return other
