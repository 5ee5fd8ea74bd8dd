"""Exploration policies: Random, NegRLVisits, BonusMaxRL and WaypointRL."""

from __future__ import annotations

from typing import Callable, Sequence

from .core import (
    ActionKey,
    Agent,
    Annotator,
    ContractViolation,
    Observation,
    QTable,
    StateKey,
    VisitTable,
    epsilon_greedy_pick,
    softmax_pick,
)


class RandomAgent(Agent):
    """Uniform choice among enabled actions; learns nothing."""

    name = "Random"

    def pick(self, obs, actions):
        if not actions:
            raise ContractViolation("no enabled actions")
        return actions[self.rng.randrange(len(actions))]


class NegVisitsAgent(Agent):
    """Q-learning with reward ``-visits(s')`` applied at every step and
    softmax action selection."""

    name = "NegRLVisits"

    def __init__(self, alpha: float = 0.3, gamma: float = 0.7):
        super().__init__()
        self.alpha = alpha
        self.gamma = gamma
        self.q = QTable(default=0.0)
        self.state_visits: dict[StateKey, int] = {}
        self._actions: dict[StateKey, Sequence[ActionKey]] = {}

    def pick(self, obs, actions):
        self._actions[obs.key] = actions
        return softmax_pick(self.q.raw_row(obs.key), actions, self.rng, default=0.0)

    def record_step(self, obs, action, next_obs, reward=0.0, next_actions=None):
        s, s2 = obs.key, next_obs.key
        if next_actions is not None:
            self._actions[s2] = next_actions
        n = self.state_visits.get(s2, 0) + 1
        self.state_visits[s2] = n
        r = -float(n)
        future = self.q.max_over(s2, self._actions.get(s2))
        old = self.q.lookup(s, action)
        self.q.set(s, action, (1 - self.alpha) * old + self.alpha * (r + self.gamma * future))


class BonusMaxAgent(Agent):
    """Epsilon-greedy Q-learning driven by a ``1/visits`` bonus, propagated
    backwards at the end of each episode with ``max`` instead of ``+``.

    Q values only change at episode end, so a fresh state keeps all its
    actions tied for the rest of the episode. With ``tie_break="lowest"`` the
    greedy choice there repeats the same action (often a self-loop) until an
    epsilon move escapes; the default ``"random"`` breaks ties with the
    agent's seeded generator instead.
    """

    name = "BonusMaxRL"

    def __init__(self, alpha: float = 0.2, gamma: float = 0.95, epsilon: float = 0.05,
                 tie_break: str = "random"):
        super().__init__()
        self.alpha = alpha
        self.gamma = gamma
        self.epsilon = epsilon
        self.tie_break = tie_break
        self.q = QTable(default=1.0)
        self.visits = VisitTable()
        self.trace: list[tuple[StateKey, ActionKey, StateKey]] = []
        self._actions: dict[StateKey, Sequence[ActionKey]] = {}

    def new_episode(self, initial):
        self.trace = []

    def pick(self, obs, actions):
        self._actions[obs.key] = actions
        return epsilon_greedy_pick(self.q.raw_row(obs.key), actions, self.epsilon, self.rng,
                                   1.0, self.tie_break)

    def record_step(self, obs, action, next_obs, reward=0.0, next_actions=None):
        if next_actions is not None:
            self._actions[next_obs.key] = next_actions
        self.trace.append((obs.key, action, next_obs.key))

    def process_episode(self):
        q, alpha, gamma = self.q, self.alpha, self.gamma
        last = len(self.trace) - 1
        for i in range(last, -1, -1):
            s, a, s2 = self.trace[i]
            r = 1.0 / self.visits.increment(s, a)
            if i < last:
                target = max(r, gamma * q.max_over(s2, self._actions.get(s2)))
            else:
                target = max(r, 0.0)
            q.set(s, a, (1 - alpha) * q.lookup(s, a) + alpha * target)

    def dump(self) -> str:
        return self.q.dump()


class WaypointAgent(Agent):
    """BonusMax exploration with one Q-table per waypoint predicate and extra
    rewards for moving to a higher predicate and for later reaching the last one.

    ``predicates[0]`` must hold on every state. With ``one_time`` set, every
    state after the first one satisfying the last predicate is treated as a
    target state for the rest of the episode.
    """

    name = "WaypointRL"

    def __init__(self, predicates: Sequence[Callable], one_time: bool = True,
                 alpha: float = 0.2, gamma: float = 0.95, epsilon: float = 0.05,
                 progress_reward: float = 2.0, final_reward: float = 2.0,
                 tie_break: str = "random"):
        super().__init__()
        if not predicates:
            raise ValueError("at least one predicate (the constant-true one) is required")
        self.predicates = list(predicates)
        self.one_time = one_time
        self.alpha = alpha
        self.gamma = gamma
        self.epsilon = epsilon
        self.progress_reward = progress_reward
        self.final_reward = final_reward
        self.tie_break = tie_break
        n = len(self.predicates)
        self.q = [QTable(default=1.0) for _ in range(n)]
        self.visits = [VisitTable() for _ in range(n)]
        self.tracker = Annotator(self.predicates, one_time)
        self.trace: list[tuple[StateKey, ActionKey, StateKey, int, int]] = []
        self._actions: dict[StateKey, Sequence[ActionKey]] = {}

    @property
    def n(self) -> int:
        return len(self.predicates)

    @property
    def active(self) -> int:
        return self.tracker.active

    @property
    def reached(self) -> bool:
        return self.tracker.reached

    def new_episode(self, initial: Observation):
        self.trace = []
        self.tracker.start(initial.view)

    def pick(self, obs, actions):
        self._actions[obs.key] = actions
        table = self.q[self.tracker.active - 1]
        return epsilon_greedy_pick(table.raw_row(obs.key), actions, self.epsilon, self.rng,
                                   1.0, self.tie_break)

    def record_step(self, obs, action, next_obs, reward=0.0, next_actions=None):
        if next_actions is not None:
            self._actions[next_obs.key] = next_actions
        p, p_next = self.tracker.advance(next_obs.view)
        self.trace.append((obs.key, action, next_obs.key, p, p_next))

    def process_episode(self):
        n, alpha, gamma = self.n, self.alpha, self.gamma
        trace = self.trace
        reached_final = False
        reached_step = 0
        for i, st in enumerate(trace):
            if st[3] == n:
                reached_final, reached_step = True, i
                break
        last = len(trace) - 1
        for i in range(last, -1, -1):
            s, a, s2, p, p_next = trace[i]
            q = self.q[p - 1]
            expl = 1.0 / self.visits[p - 1].increment(s, a)
            if p == p_next or p == n:
                if i < last:
                    target = max(expl, gamma * q.max_over(s2, self._actions.get(s2)))
                else:
                    target = max(expl, 0.0)
            else:
                prog = self.progress_reward if p_next > p else 0.0
                if reached_final and i < reached_step:
                    final = gamma ** (reached_step - i - 1) * self.final_reward
                else:
                    final = 0.0
                target = max(expl, gamma * (prog + final))
            q.set(s, a, (1 - alpha) * q.lookup(s, a) + alpha * target)

    def dump(self) -> str:
        out = []
        for i, table in enumerate(self.q, start=1):
            for line in table.dump().splitlines():
                out.append(f"{i}\t{line}")
        return "\n".join(out) + ("\n" if out else "")


def max_q_bound(gamma: float, progress_reward: float = 2.0, final_reward: float = 2.0) -> float:
    """Upper bound on any WaypointRL Q value."""
    return max(1.0, gamma * (progress_reward + final_reward))
