"""
Biasing exploration with waypoints
==================================

Target coverage for commitEntries(2) and logCommitDiff(3) on the simulated
cluster, with and without intermediate predicates. Budgets are small here;
configs/raft_commit.toml and configs/raft_logcommitdiff.toml hold the full
runs for ``rlexplore compare``.
"""

# %%
from rlexplore.harness.config import resolve
from rlexplore.harness.experiment import run_comparison
from rlexplore.predicates import intermediate_sequence_for, parse_predicate

print(intermediate_sequence_for(parse_predicate("logCommitDiff(3)")).names)
print(intermediate_sequence_for(parse_predicate("entryInTerm(2)")).names)

# %%
def compare(target, agents, episodes=1000, trials=3):
    cfg = resolve({
        "environment": {"kind": "raft"},
        "agent": agents,
        "run": {"episodes": episodes, "horizon": 25, "trials": trials},
        "report": {"target": target},
    })
    rep = run_comparison(cfg)
    for row in rep.summary:
        print(f"  {row['display']}")
    for row in rep.significance:
        print(f"  {row['agent']} vs {row['baseline']}: p={row['p_value']}")


print("commitEntries(2)")
compare("commitEntries(2)", {"waypoint": {}, "bonusmax": {}, "negvisits": {}, "random": {}})

# %%
print("logCommitDiff(3)")
compare("logCommitDiff(3)", {"plain": {"kind": "waypoint"},
                             "chained": {"kind": "waypoint", "waypoints": ["logDiff(1)"]},
                             "default": {"kind": "waypoint", "waypoints": "default"}})
