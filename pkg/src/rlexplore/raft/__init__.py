"""Simulated Raft cluster modelled as a partition MDP."""

from .env import Color, ProcessView, RaftEnv, SystemSnapshot, abstract_state, paint, snapshot
from .partitions import canonical, count_partitions, multiset_partitions
from .sim import RaftCluster, RaftParams

__all__ = [
    "Color", "ProcessView", "RaftCluster", "RaftEnv", "RaftParams", "SystemSnapshot",
    "abstract_state", "canonical", "count_partitions", "multiset_partitions", "paint", "snapshot",
]
