"""Composable state predicates and the Raft predicate library.

Library predicates read a system snapshot: an object with a ``processes``
sequence whose items expose ``term``, ``role``, ``log_terms``,
``commit_index`` and ``alive``. Role-based predicates only look at live
processes; term- and log-based ones include crashed processes, whose
persistent state survives the crash. ``allCommitted`` is the exception and
quantifies over live processes only.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import combinations
from typing import Any, Callable, Sequence

ROLES = ("Follower", "Candidate", "Leader")


class Predicate:
    """Named boolean function over a snapshot. Supports ``&``, ``|`` and ``~``."""

    __slots__ = ("name", "fn", "spec")

    def __init__(self, name: str, fn: Callable[[Any], bool], spec: tuple | None = None):
        self.name = name
        self.fn = fn
        # (constructor name, args) for library predicates
        self.spec = spec

    def __call__(self, state) -> bool:
        return bool(self.fn(state))

    def and_(self, other: Predicate) -> Predicate:
        return Predicate(f"({self.name} AND {other.name})", lambda s: self.fn(s) and other.fn(s))

    def or_(self, other: Predicate) -> Predicate:
        return Predicate(f"({self.name} OR {other.name})", lambda s: self.fn(s) or other.fn(s))

    def not_(self) -> Predicate:
        return Predicate(f"NOT {self.name}", lambda s: not self.fn(s))

    __and__ = and_
    __or__ = or_
    __invert__ = not_

    def __repr__(self):
        return f"Predicate({self.name})"


TRUE = Predicate("true", lambda s: True, ("true", ()))


def and_(p: Predicate, q: Predicate) -> Predicate:
    return p.and_(q)


def or_(p: Predicate, q: Predicate) -> Predicate:
    return p.or_(q)


def not_(p: Predicate) -> Predicate:
    return p.not_()


@dataclass
class PredicateSequence:
    """Waypoint chain ``[true, w1, ..., target]`` plus the latching flag."""

    predicates: list[Predicate]
    one_time: bool = True

    def __post_init__(self):
        if not self.predicates:
            raise ValueError("a predicate sequence needs at least the constant-true predicate")
        if self.predicates[0] is not TRUE and self.predicates[0].name != "true":
            raise ValueError("the first predicate of a sequence must be the constant-true predicate")

    def __len__(self):
        return len(self.predicates)

    @property
    def target(self) -> Predicate:
        return self.predicates[-1]

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.predicates]


def _positive(name: str, **values):
    for k, v in values.items():
        if not isinstance(v, int) or v <= 0:
            raise ValueError(f"{name}: {k} must be a positive integer, got {v!r}")


def _nonneg(name: str, **values):
    for k, v in values.items():
        if not isinstance(v, int) or v < 0:
            raise ValueError(f"{name}: {k} must be a nonnegative integer, got {v!r}")


def _role(name: str, r: str) -> str:
    for role in ROLES:
        if role.lower() == str(r).lower():
            return role
    raise ValueError(f"{name}: unknown role {r!r}; expected one of {', '.join(ROLES)}")


def _max_pair_gap(values: Sequence[int]) -> int:
    return max((abs(a - b) for a, b in combinations(values, 2)), default=0)


def all_committed(x: int) -> Predicate:
    _positive("allCommitted", x=x)
    return Predicate(f"allCommitted({x})",
                     lambda s: all(p.commit_index >= x for p in s.processes if p.alive),
                     ("allCommitted", (x,)))


def processes_in_term(n: int, t: int) -> Predicate:
    _positive("processesInTerm", n=n)
    _nonneg("processesInTerm", t=t)
    return Predicate(f"processesInTerm({n},{t})",
                     lambda s: sum(1 for p in s.processes if p.term == t) >= n,
                     ("processesInTerm", (n, t)))


def committed_entries_in_term(x: int, t: int) -> Predicate:
    _positive("committedEntriesInTerm", x=x)
    _nonneg("committedEntriesInTerm", t=t)
    return Predicate(f"committedEntriesInTerm({x},{t})",
                     lambda s: any(p.term == t and p.commit_index >= x for p in s.processes),
                     ("committedEntriesInTerm", (x, t)))


def leader_in_term(t: int) -> Predicate:
    _nonneg("leaderInTerm", t=t)
    return Predicate(f"leaderInTerm({t})",
                     lambda s: any(p.alive and p.role == "Leader" and p.term == t
                                   for p in s.processes),
                     ("leaderInTerm", (t,)))


def log_diff(x: int) -> Predicate:
    _positive("logDiff", x=x)
    return Predicate(f"logDiff({x})",
                     lambda s: _max_pair_gap([len(p.log_terms) for p in s.processes]) >= x,
                     ("logDiff", (x,)))


def log_commit_diff(x: int) -> Predicate:
    _positive("logCommitDiff", x=x)
    return Predicate(f"logCommitDiff({x})",
                     lambda s: _max_pair_gap([p.commit_index for p in s.processes]) >= x,
                     ("logCommitDiff", (x,)))


def process_in_role(r: str) -> Predicate:
    role = _role("processInRole", r)
    return Predicate(f"processInRole({role})",
                     lambda s: any(p.alive and p.role == role for p in s.processes),
                     ("processInRole", (role,)))


def process_in_role_term(r: str, t: int) -> Predicate:
    role = _role("processInRoleTerm", r)
    _nonneg("processInRoleTerm", t=t)
    return Predicate(f"processInRoleTerm({role},{t})",
                     lambda s: any(p.alive and p.role == role and p.term == t
                                   for p in s.processes),
                     ("processInRoleTerm", (role, t)))


def all_in_term(t: int) -> Predicate:
    _nonneg("allInTerm", t=t)
    return Predicate(f"allInTerm({t})",
                     lambda s: all(p.term == t for p in s.processes),
                     ("allInTerm", (t,)))


def term_diff(d: int) -> Predicate:
    _positive("termDiff", d=d)
    return Predicate(f"termDiff({d})",
                     lambda s: _max_pair_gap([p.term for p in s.processes]) >= d,
                     ("termDiff", (d,)))


def commit_entries(x: int) -> Predicate:
    _positive("commitEntries", x=x)
    return Predicate(f"commitEntries({x})",
                     lambda s: any(p.commit_index >= x for p in s.processes),
                     ("commitEntries", (x,)))


def entry_in_term(t: int) -> Predicate:
    _nonneg("entryInTerm", t=t)
    return Predicate(f"entryInTerm({t})",
                     lambda s: any(t in p.log_terms[:p.commit_index] for p in s.processes),
                     ("entryInTerm", (t,)))


def _one_leader_one_candidate(s) -> bool:
    live = [p.role for p in s.processes if p.alive]
    return "Leader" in live and "Candidate" in live


ONE_LEADER_ONE_CANDIDATE = Predicate("oneLeaderOneCandidate", _one_leader_one_candidate,
                                     ("oneLeaderOneCandidate", ()))


def one_leader_one_candidate() -> Predicate:
    return ONE_LEADER_ONE_CANDIDATE


def cube_at_least(g: int) -> Predicate:
    """Cube-world predicate: the agent is in cube ``g`` or a later one."""
    _nonneg("cubeAtLeast", g=g)
    return Predicate(f"cubeAtLeast({g})", lambda s: s.g >= g, ("cubeAtLeast", (g,)))


LIBRARY: dict[str, Callable[..., Predicate]] = {
    "true": lambda: TRUE,
    "allCommitted": all_committed,
    "processesInTerm": processes_in_term,
    "committedEntriesInTerm": committed_entries_in_term,
    "leaderInTerm": leader_in_term,
    "logDiff": log_diff,
    "logCommitDiff": log_commit_diff,
    "processInRole": process_in_role,
    "processInRoleTerm": process_in_role_term,
    "allInTerm": all_in_term,
    "termDiff": term_diff,
    "commitEntries": commit_entries,
    "entryInTerm": entry_in_term,
    "oneLeaderOneCandidate": one_leader_one_candidate,
    "cubeAtLeast": cube_at_least,
}

_CALL = re.compile(r"^\s*([A-Za-z_]\w*)\s*(?:\((.*)\))?\s*$")


def parse_predicate(text: str) -> Predicate:
    """Build a library predicate from ``"name(arg, ...)"``, e.g. ``"logCommitDiff(3)"``."""
    m = _CALL.match(text)
    if not m:
        raise ValueError(f"cannot parse predicate {text!r}")
    name, argtext = m.group(1), m.group(2)
    ctor = LIBRARY.get(name)
    if ctor is None:
        raise ValueError(f"unknown predicate {name!r}; known: {', '.join(sorted(LIBRARY))}")
    args: list[Any] = []
    if argtext and argtext.strip():
        for raw in argtext.split(","):
            raw = raw.strip().strip("'\"")
            args.append(int(raw) if re.fullmatch(r"-?\d+", raw) else raw)
    try:
        return ctor(*args)
    except TypeError as exc:
        raise ValueError(f"bad arguments for {name}: {exc}") from None


def intermediate_sequence_for(target: Predicate, one_time: bool = True) -> PredicateSequence:
    """Default waypoint chain leading to a library ``target``.

    Chains that step a count down use a stride of one.
    """
    if target.spec is None:
        raise ValueError(f"no waypoint chain for {target.name!r}: not a library predicate; "
                         f"known targets: {', '.join(sorted(LIBRARY))}")
    name, args = target.spec
    if name not in LIBRARY:
        raise ValueError(f"unknown target {name!r}; known targets: {', '.join(sorted(LIBRARY))}")
    mid: list[Predicate] = []
    if name == "logCommitDiff":
        mid = [log_diff(1)]
    elif name == "processesInTerm":
        n, t = args
        if t >= 2:
            mid = [processes_in_term(n, t - 1)]
    elif name == "entryInTerm":
        (t,) = args
        mid = [processes_in_term(1, t), leader_in_term(t)]
    elif name == "committedEntriesInTerm":
        x, t = args
        mid = [leader_in_term(t)] + [committed_entries_in_term(k, t) for k in range(1, x)]
    elif name == "leaderInTerm":
        (t,) = args
        mid = [processes_in_term(1, t)]
    elif name == "processInRoleTerm":
        mid = [processes_in_term(1, args[1])]
    elif name == "allCommitted":
        mid = [all_committed(k) for k in range(1, args[0])]
    elif name == "logDiff":
        mid = [log_diff(k) for k in range(1, args[0])]
    if name == "true":
        return PredicateSequence([TRUE], one_time)
    return PredicateSequence([TRUE, *mid, target], one_time)


def build_sequence(target: str | Predicate | None, waypoints: Sequence[str | Predicate] = (),
                   one_time: bool = True) -> PredicateSequence:
    """``[true, *waypoints, target]`` from names or predicates."""

    def as_pred(p):
        return parse_predicate(p) if isinstance(p, str) else p

    preds = [TRUE] + [as_pred(w) for w in waypoints]
    if target is not None:
        preds.append(as_pred(target))
    return PredicateSequence(preds, one_time)
