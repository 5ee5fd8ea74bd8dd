import random
from itertools import combinations

import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from rlexplore.core import EpisodeRecord, Step
from rlexplore.harness.coverage import (
    CoverageTracker,
    target_coverage,
    unique_counts,
    unique_state_coverage,
)
from rlexplore.harness.stats import mann_whitney_u, mean_sd, rank_with_ties, u_distribution


def episode(index, keys, actives=None, start=0):
    actives = actives or [1] * len(keys)
    trace = [Step(keys[i], "a", keys[i + 1], actives[i], actives[i + 1]) for i in range(len(keys) - 1)]
    return EpisodeRecord(index, keys[0], trace, start + len(trace), False, actives[0])


# -- coverage -------------------------------------------------------------------

def test_unique_examples():
    assert unique_counts(["s1", "s2", "s1", "s3"]) == [1, 2, 2, 3]
    cov = unique_state_coverage([episode(0, ["s1", "s2", "s1", "s3"])])
    assert [c for _, c in cov.points] == [2, 2, 3] and cov.final == 3
    cov = unique_state_coverage([episode(0, ["a", "b", "c"]), episode(1, ["d", "e", "f"], start=2)])
    assert cov.final == 6
    empty = unique_state_coverage([])
    assert empty.points == [] and empty.final == 0


def test_target_examples():
    n = 2
    assert target_coverage([episode(0, list("abcd"))], n).final == 0
    keys = [f"s{i}" for i in range(26)]
    actives = [1] * 10 + [2] * 16
    assert target_coverage([episode(0, keys, actives)], n).final == 16
    tail = ["t1", "t2", "t3", "t4", "t5"]
    e1 = episode(0, ["x"] + tail, [1, 2, 2, 2, 2, 2])
    e2 = episode(1, ["y"] + tail, [1, 2, 2, 2, 2, 2], start=5)
    assert target_coverage([e1, e2], n).final == 5


def test_tracker_rows_and_stride():
    eps = [episode(i, [f"s{i}{j}" for j in range(5)], start=4 * i) for i in range(3)]
    t = CoverageTracker(None, stride=3).extend(eps)
    assert [r[2] for r in t.rows] == [3, 4, 6, 8, 9, 12]
    assert t.rows[-1][3] == 15 and t.target == 0
    with pytest.raises(ValueError):
        CoverageTracker(stride=0)


@given(st.lists(st.lists(st.sampled_from("abcdefgh"), min_size=1, max_size=10), max_size=8))
def test_coverage_monotone_and_naive(episodes):
    recs, cum = [], 0
    for i, keys in enumerate(episodes):
        recs.append(episode(i, keys, start=cum))
        cum += len(keys) - 1
    cov = unique_state_coverage(recs)
    counts = [c for _, c in cov.points]
    assert counts == sorted(counts)
    steps = [t for t, _ in cov.points]
    assert steps == sorted(steps)
    assert cov.final == len({k for keys in episodes for k in keys})


# -- Mann-Whitney ----------------------------------------------------------------

def brute_force_p(a, b):
    """Exact two-sided p by enumerating every split of the pooled ranks."""
    pooled = sorted(a + b)
    n = len(a)
    u_obs = sum(1 for x in a for y in b if x > y)
    us = []
    for idx in combinations(range(len(pooled)), n):
        xs = [pooled[i] for i in idx]
        ys = [pooled[i] for i in range(len(pooled)) if i not in idx]
        us.append(sum(1 for x in xs for y in ys if x > y))
    lo = sum(u <= u_obs for u in us) / len(us)
    hi = sum(u >= u_obs for u in us) / len(us)
    return min(1.0, 2 * min(lo, hi))


def test_mw_examples():
    r = mann_whitney_u([1, 2, 3], [4, 5, 6])
    assert r.u == 0 and r.p_value == pytest.approx(0.1, abs=1e-12) and r.method == "exact"
    r = mann_whitney_u([5], [1])
    assert r.u == 1 and r.p_value == 1.0
    r = mann_whitney_u([3, 3, 4, 4], [3, 3, 4, 4])
    assert r.method == "normal" and r.p_value >= 0.99
    with pytest.raises(ValueError):
        mann_whitney_u([], [1])
    with pytest.raises(ValueError):
        mann_whitney_u([1, 1], [1], method="exact")


def test_u_distribution_is_symmetric_and_complete():
    from math import comb
    for n in range(1, 6):
        for m in range(1, 6):
            d = u_distribution(n, m)
            assert sum(d) == comb(n + m, n)
            assert d == d[::-1]


def test_mw_exact_matches_enumeration():
    rng = random.Random(0)
    for _ in range(60):
        n, m = rng.randint(1, 5), rng.randint(1, 5)
        vals = rng.sample(range(100), n + m)
        a, b = vals[:n], vals[n:]
        assert mann_whitney_u(a, b).p_value == pytest.approx(brute_force_p(a, b), abs=1e-12)


def test_mw_matches_scipy():
    rng = random.Random(1)
    for _ in range(40):
        n, m = rng.randint(2, 8), rng.randint(2, 8)
        vals = rng.sample(range(1000), n + m)
        a, b = vals[:n], vals[n:]
        ours = mann_whitney_u(a, b)
        ref = scipy.stats.mannwhitneyu(a, b, alternative="two-sided", method="exact")
        assert ours.u == ref.statistic
        assert ours.p_value == pytest.approx(ref.pvalue, abs=1e-9)
    for _ in range(40):
        a = [rng.randint(0, 6) for _ in range(rng.randint(9, 15))]
        b = [rng.randint(0, 6) for _ in range(rng.randint(9, 15))]
        ours = mann_whitney_u(a, b)
        ref = scipy.stats.mannwhitneyu(a, b, alternative="two-sided", method="asymptotic",
                                       use_continuity=True)
        assert ours.u == ref.statistic
        assert ours.p_value == pytest.approx(ref.pvalue, abs=1e-9)


def test_mw_exact_vs_normal_band():
    rng = random.Random(2)
    for _ in range(300):
        vals = rng.sample(range(10000), 16)
        a, b = vals[:8], vals[8:]
        gap = abs(mann_whitney_u(a, b, "exact").p_value - mann_whitney_u(a, b, "normal").p_value)
        assert gap <= 0.02


def test_ranks_and_mean_sd():
    ranks, ties = rank_with_ties([10, 20, 20, 30])
    assert ranks == [1.0, 2.5, 2.5, 4.0] and sorted(ties) == [1, 1, 2]
    m, sd = mean_sd([1, 2, 3, 4])
    assert m == 2.5 and sd == pytest.approx(1.2909944487358056)
    assert mean_sd([7]) == (7.0, 0.0)
