"""
The simulated Raft cluster as a partition MDP
=============================================

Walks through states, actions and the SameState counter, then shows that
relabelling processes leaves the abstract state unchanged.
"""

# %%
import random

from rlexplore.raft import RaftEnv, RaftParams, abstract_state, multiset_partitions
from rlexplore.raft.env import encode_partition

env = RaftEnv(RaftParams(seed=3))
print("initial state:", env.key)
print("actions:", env.actions())

# %%
# partition actions come from multiset partitions of the live colors
for colors in (["a"], ["a", "b"], ["a", "a", "b"], ["a", "a", "a"]):
    parts = multiset_partitions(colors)
    print(colors, len(parts), [encode_partition(p) for p in parts])

# %%
# "stay" re-selects the current partition; sameState counts unchanged stays
stay = "p:" + encode_partition(env.live_partition())
for _ in range(6):
    env.step(stay)
    stay = "p:" + encode_partition(env.live_partition())
    print(env.same_state, env.key)

# %%
# after a leader appears, inject a request and let it commit
while env.cluster.leader() is None:
    env.step("p:" + encode_partition(env.live_partition()))
env.step("request")
for _ in range(3):
    env.step("p:" + encode_partition(env.live_partition()))
print([(p.term, p.role, p.commit_index) for p in env.observe().view.processes])

# %%
# symmetry reduction: every relabelling gives the same key
rng = random.Random(0)
for _ in range(5):
    perm = list(range(3))
    rng.shuffle(perm)
    same = abstract_state(env.cluster.relabeled(perm), env.same_state, env.params) == env.key
    print(perm, same)
