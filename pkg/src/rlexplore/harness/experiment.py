"""Multi-trial experiments and report files.

A run directory holds ``config.resolved``, one ``series_<agent>_<trial>.csv``
per cell, ``summary.csv``, ``significance.csv`` and, for the cube world,
``visits_<agent>.npy`` plus heatmaps under ``heatmaps/<agent>/``. With
``[report] episode_logs`` set, ``episodes_<agent>_<trial>.log.gz`` keeps the
annotated traces so the reports can be rebuilt with :func:`report_from_logs`.
"""

from __future__ import annotations

import csv
import glob
import gzip
import logging
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator

import numpy as np

from ..agents import BonusMaxAgent, NegVisitsAgent, RandomAgent, WaypointAgent
from ..core import Agent, Annotator, EpisodeRecord, RunConfig, Step, derive_seed, run_experiment
from ..cube import CubeConfig, CubeWorld, export_heatmaps
from ..predicates import (
    PredicateSequence,
    build_sequence,
    intermediate_sequence_for,
    parse_predicate,
)
from ..raft import RaftEnv, RaftParams
from .config import dumps
from .coverage import CSV_HEADER, CoverageTracker
from .stats import mann_whitney_u, mean_sd

log = logging.getLogger(__name__)

SUMMARY_HEADER = ("agent", "kind", "trials", "excluded", "metric", "mean", "sd",
                  "mean_unique", "sd_unique", "mean_target", "sd_target", "display")
SIGNIFICANCE_HEADER = ("agent", "baseline", "metric", "u", "p_value", "method", "significant")


def trial_seed(base_seed: int, trial: int) -> int:
    return derive_seed(base_seed, trial)


def build_env(env_cfg: dict, seed: int):
    kind = env_cfg["kind"]
    if kind == "cube":
        doors = env_cfg["doors"]
        return CubeWorld(CubeConfig(env_cfg["cubes"], env_cfg["width"], env_cfg["breadth"],
                                    env_cfg["depth"], [tuple(d) for d in doors] if doors else None,
                                    env_cfg["abstraction"]))
    if kind == "raft":
        params = {k: v for k, v in env_cfg.items() if k not in ("kind", "check_safety")}
        params["election_timeout"] = tuple(params["election_timeout"])
        return RaftEnv(RaftParams(seed=derive_seed(seed, 0xE), **params),
                       check_safety=env_cfg["check_safety"])
    raise ValueError(f"unknown environment kind {kind!r}")


def agent_sequence(spec: dict) -> PredicateSequence:
    """Predicate chain a waypoint agent is configured with."""
    target = parse_predicate(spec["target"])
    if spec["waypoints"] == "default":
        return intermediate_sequence_for(target, spec["one_time"])
    return build_sequence(target, spec["waypoints"], spec["one_time"])


def build_agent(spec: dict) -> Agent:
    kind = spec["kind"]
    if kind == "random":
        return RandomAgent()
    if kind == "negvisits":
        return NegVisitsAgent(spec["alpha"], spec["gamma"])
    if kind == "bonusmax":
        return BonusMaxAgent(spec["alpha"], spec["gamma"], spec["epsilon"], spec["tie_break"])
    if kind == "waypoint":
        seq = agent_sequence(spec)
        return WaypointAgent(seq.predicates, seq.one_time, spec["alpha"], spec["gamma"],
                             spec["epsilon"], spec["progress_reward"], spec["final_reward"],
                             spec["tie_break"])
    raise ValueError(f"unknown agent kind {kind!r}")


def measurement_sequence(config: dict, agent: str) -> PredicateSequence | None:
    """Annotation chain used to measure target coverage for ``agent``.

    Waypoint agents are annotated with their own chain, others with
    ``[true, target]``; either way the last index marks the same states.
    """
    report = config["report"]
    spec = config["agent"][agent]
    if spec["kind"] == "waypoint" and spec["target"] == report["target"]:
        return agent_sequence(spec)
    if report["target"] is None:
        return None
    return build_sequence(report["target"], (), report["one_time"])


@dataclass
class TrialResult:
    agent: str
    trial: int
    seed: int
    rows: list[tuple] = field(default_factory=list)
    unique: int = 0
    target: int = 0
    timesteps: int = 0
    episodes: int = 0
    elapsed: float = 0.0
    visits: np.ndarray | None = None
    violations: list[str] = field(default_factory=list)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def metric(self, name: str) -> int:
        return self.target if name == "target" else self.unique


def run_trial(config: dict, agent: str, trial: int, log_path: str | None = None) -> TrialResult:
    """One (agent, trial) cell. Exceptions are captured in ``error``."""
    seed = trial_seed(config["run"]["base_seed"], trial)
    res = TrialResult(agent, trial, seed)
    t0 = time.monotonic()
    try:
        env = build_env(config["environment"], seed)
        ag = build_agent(config["agent"][agent])
        seq = measurement_sequence(config, agent)
        annotator = Annotator(seq.predicates, seq.one_time) if seq is not None else None
        tracker = CoverageTracker(len(seq) if seq is not None else None,
                                  config["report"]["stride"], trial)
        run = config["run"]
        rc = RunConfig(run["episodes"], run["horizon"], seed, run["time_budget"])
        sinks: list[Callable[[EpisodeRecord], None]] = [tracker.add]
        fh = None
        if log_path is not None:
            fh = gzip.open(log_path, "wt", encoding="utf-8", compresslevel=6)
            sinks.append(lambda rec: write_episode(fh, rec))
        try:
            counter = [0]

            def on_episode(rec):
                counter[0] += 1
                for sink in sinks:
                    sink(rec)

            run_experiment(env, ag, rc, annotator, on_episode, keep_records=False)
        finally:
            if fh is not None:
                fh.close()
        res.rows = tracker.rows
        res.unique, res.target = tracker.unique, tracker.target
        res.timesteps, res.episodes = tracker.timesteps, counter[0]
        if isinstance(env, CubeWorld):
            res.visits = env.visits.copy()
        res.violations = list(getattr(env, "violations", []))
    except Exception as exc:  # recorded and excluded by the reporter
        res.error = f"{type(exc).__name__}: {exc}"
    res.elapsed = time.monotonic() - t0
    return res


# -- episode logs -----------------------------------------------------------

def write_episode(fh, rec: EpisodeRecord) -> None:
    fh.write(f"E\t{rec.index}\t{int(rec.truncated)}\t{rec.initial_active}\t{rec.initial_state}\n")
    for st in rec.trace:
        fh.write(f"S\t{st.action}\t{st.next_state}\t{st.active}\t{st.next_active}\n")


def read_episode_log(path: str) -> Iterator[EpisodeRecord]:
    """Episode records from a log written during a run (cumulative counts rebuilt)."""
    cumulative = 0
    cur = None
    with gzip.open(path, "rt", encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            if parts[0] == "E":
                if cur is not None:
                    cumulative += len(cur.trace)
                    cur.cumulative_timesteps = cumulative
                    yield cur
                cur = EpisodeRecord(int(parts[1]), parts[4], [], 0, parts[2] == "1", int(parts[3]))
                prev = parts[4]
            elif parts[0] == "S" and cur is not None:
                cur.trace.append(Step(prev, parts[1], parts[2], int(parts[3]), int(parts[4])))
                prev = parts[2]
            else:
                raise ValueError(f"{path}: malformed line {line!r}")
    if cur is not None:
        cumulative += len(cur.trace)
        cur.cumulative_timesteps = cumulative
        yield cur


# -- reporting --------------------------------------------------------------

@dataclass
class Report:
    config: dict
    results: list[TrialResult]
    summary: list[dict[str, Any]]
    significance: list[dict[str, Any]]
    excluded: list[TrialResult]

    def by_agent(self, agent: str) -> list[TrialResult]:
        return [r for r in self.results if r.agent == agent and r.ok]

    def finals(self, agent: str, metric: str | None = None) -> list[int]:
        metric = metric or self.config["report"]["metric"]
        return [r.metric(metric) for r in self.by_agent(agent)]


def _fmt(x: float) -> str:
    return "nan" if x != x else f"{x:.2f}"


def summarize(config: dict, results: list[TrialResult]) -> Report:
    """Per-agent mean and sd plus Mann-Whitney tests against the baseline."""
    report = config["report"]
    metric = report["metric"]
    excluded = [r for r in results if not r.ok]
    for r in excluded:
        log.warning("trial %d of %s failed and is excluded: %s", r.trial, r.agent, r.error)
    rep = Report(config, results, [], [], excluded)
    for name, spec in config["agent"].items():
        ok = rep.by_agent(name)
        m, sd = mean_sd([r.metric(metric) for r in ok])
        mu, sdu = mean_sd([r.unique for r in ok])
        mt, sdt = mean_sd([r.target for r in ok])
        rep.summary.append({
            "agent": name, "kind": spec["kind"], "trials": len(ok),
            "excluded": sum(1 for r in excluded if r.agent == name), "metric": metric,
            "mean": _fmt(m), "sd": _fmt(sd), "mean_unique": _fmt(mu), "sd_unique": _fmt(sdu),
            "mean_target": _fmt(mt), "sd_target": _fmt(sdt),
            "display": f"{name} {m:.1f} ± {sd:.2f}",
        })
    base = report["baseline"]
    base_vals = rep.finals(base)
    for name in config["agent"]:
        if name == base:
            continue
        vals = rep.finals(name)
        if not vals or not base_vals:
            rep.significance.append({"agent": name, "baseline": base, "metric": metric, "u": "nan",
                                     "p_value": "nan", "method": "none", "significant": False})
            continue
        mw = mann_whitney_u(vals, base_vals)
        rep.significance.append({
            "agent": name, "baseline": base, "metric": metric, "u": f"{mw.u:g}",
            "p_value": f"{mw.p_value:.6g}", "method": mw.method,
            "significant": mw.p_value < report["significance"],
        })
    return rep


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def write_series(outdir: str, res: TrialResult) -> str:
    path = os.path.join(outdir, f"series_{res.agent}_{res.trial}.csv")
    _write_csv(path, CSV_HEADER, res.rows)
    return path


def write_report(outdir: str, rep: Report) -> None:
    _write_csv(os.path.join(outdir, "summary.csv"), SUMMARY_HEADER,
               [[row[k] for k in SUMMARY_HEADER] for row in rep.summary])
    _write_csv(os.path.join(outdir, "significance.csv"), SIGNIFICANCE_HEADER,
               [[row[k] for k in SIGNIFICANCE_HEADER] for row in rep.significance])
    if rep.excluded:
        with open(os.path.join(outdir, "excluded.txt"), "w", encoding="utf-8") as fh:
            for r in rep.excluded:
                fh.write(f"{r.agent}\t{r.trial}\t{r.error}\n")


def cube_config(config: dict) -> CubeConfig:
    return build_env(config["environment"], 0).config


def render_heatmaps(rundir: str, config: dict) -> list[str]:
    """(Re)write heatmaps for every ``visits_<agent>.npy`` in ``rundir``."""
    cfg = cube_config(config)
    files = []
    for path in sorted(glob.glob(os.path.join(rundir, "visits_*.npy"))):
        agent = os.path.basename(path)[len("visits_"):-len(".npy")]
        visits = np.load(path)
        maps = export_heatmaps(visits.sum(axis=0), cfg, os.path.join(rundir, "heatmaps", agent))
        files.extend(maps.files)
    return files


def _cells(config: dict, agents) -> list[tuple[str, int]]:
    return [(a, t) for a in agents for t in range(config["run"]["trials"])]


def _run_cell(args):
    config, agent, trial, log_path = args
    return run_trial(config, agent, trial, log_path)


def run_comparison(config: dict, outdir: str | None = None, agents=None,
                   progress: Callable[[TrialResult], None] | None = None) -> Report:
    """Run every (agent, trial) cell and, with ``outdir``, write all report files."""
    agents = list(agents or config["agent"])
    if outdir is not None:
        os.makedirs(outdir, exist_ok=True)
        with open(os.path.join(outdir, "config.resolved"), "w", encoding="utf-8") as fh:
            fh.write(dumps(config))
    keep_logs = outdir is not None and config["report"]["episode_logs"]
    jobs = [(config, a, t, os.path.join(outdir, f"episodes_{a}_{t}.log.gz") if keep_logs else None)
            for a, t in _cells(config, agents)]
    workers = min(config["run"]["workers"], len(jobs))
    results: list[TrialResult] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for res in pool.map(_run_cell, jobs):
                results.append(res)
                if progress:
                    progress(res)
    else:
        for job in jobs:
            res = _run_cell(job)
            results.append(res)
            if progress:
                progress(res)
    sub = dict(config, agent={a: config["agent"][a] for a in agents})
    if sub["report"]["baseline"] not in agents:
        sub["report"] = dict(sub["report"], baseline=agents[0])
    rep = summarize(sub, results)
    for r in results:
        if r.violations:
            log.warning("%s trial %d: %d safety violation(s), first: %s",
                        r.agent, r.trial, len(r.violations), r.violations[0])
    if outdir is not None:
        for r in results:
            if r.ok:
                write_series(outdir, r)
        write_report(outdir, rep)
        if config["environment"]["kind"] == "cube":
            for a in agents:
                ok = [r.visits for r in rep.by_agent(a)]
                if ok:
                    np.save(os.path.join(outdir, f"visits_{a}.npy"), np.stack(ok))
            if config["report"]["heatmaps"]:
                render_heatmaps(outdir, config)
    return rep


_LOG_NAME = re.compile(r"^episodes_(.+)_(\d+)\.log\.gz$")


def report_from_logs(rundir: str, config: dict) -> Report:
    """Rebuild series, summary and significance CSVs from saved episode logs."""
    results = []
    stride = config["report"]["stride"]
    for path in sorted(glob.glob(os.path.join(rundir, "episodes_*.log.gz"))):
        m = _LOG_NAME.match(os.path.basename(path))
        if not m or m.group(1) not in config["agent"]:
            continue
        agent, trial = m.group(1), int(m.group(2))
        seq = measurement_sequence(config, agent)
        tracker = CoverageTracker(len(seq) if seq is not None else None, stride, trial)
        n_eps = 0
        for rec in read_episode_log(path):
            tracker.add(rec)
            n_eps += 1
        res = TrialResult(agent, trial, trial_seed(config["run"]["base_seed"], trial), tracker.rows,
                          tracker.unique, tracker.target, tracker.timesteps, n_eps)
        results.append(res)
    order = {a: i for i, a in enumerate(config["agent"])}
    results.sort(key=lambda r: (order[r.agent], r.trial))
    rep = summarize(config, results)
    for r in results:
        write_series(rundir, r)
    write_report(rundir, rep)
    return rep
