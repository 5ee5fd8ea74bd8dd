"""Experiment configuration: TOML document to a validated, resolved dict.

Layout::

    [environment]
    kind = "cube"            # or "raft"; remaining keys are its parameters

    [agent.<name>]
    kind = "bonusmax"        # random | negvisits | bonusmax | waypoint
    alpha = 0.3

    [run]
    episodes = 5000
    horizon = 80
    trials = 10

    [report]
    target = "cubeAtLeast(3)"
    baseline = "random"
"""

from __future__ import annotations

import copy
import json
import sys
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..predicates import parse_predicate


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


_CUBE = {"cubes": 6, "width": 10, "breadth": 10, "depth": 6, "doors": None, "abstraction": "full"}
_RAFT = {"nodes": 3, "ticks": 4, "max_same_state": 5, "max_crash_actions": 3,
         "max_concurrent_crashes": 1, "request_budget": 3, "term_cap": 5, "log_cap": 6,
         "commit_cap": 6, "election_timeout": [10, 20], "heartbeat_interval": 2,
         "initial_term": 1, "check_safety": False}
ENVIRONMENTS = {"cube": _CUBE, "raft": _RAFT}

_GREEDY = {"alpha": 0.2, "gamma": 0.95, "epsilon": 0.05, "tie_break": "random"}
AGENTS = {
    "random": {},
    "negvisits": {"alpha": 0.3, "gamma": 0.7},
    "bonusmax": dict(_GREEDY),
    # waypoints: list of predicate names, or "default" for the library chain
    "waypoint": dict(_GREEDY, target=None, waypoints=[], one_time=True,
                     progress_reward=2.0, final_reward=2.0),
}

_RUN_REQUIRED = ("episodes", "horizon")
_RUN = {"time_budget": None, "trials": 1, "base_seed": 0, "workers": 1}
_REPORT = {"target": None, "one_time": True, "baseline": None, "significance": 0.05,
           "stride": 1, "metric": None, "heatmaps": True, "episode_logs": False}
_SECTIONS = ("environment", "agent", "run", "report")


def _merge(section: str, given: dict, defaults: dict) -> dict:
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ConfigError(f"[{section}]: unknown key(s) {', '.join(unknown)}; "
                          f"allowed: {', '.join(sorted(defaults))}")
    out = copy.deepcopy(defaults)
    out.update(given)
    return out


def _check_int(section: str, name: str, value, minimum: int) -> None:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"[{section}] {name} must be an integer >= {minimum}, got {value!r}")


def _check_pred(section: str, name: str, text) -> None:
    if not isinstance(text, str):
        raise ConfigError(f"[{section}] {name} must be a predicate string, got {text!r}")
    try:
        parse_predicate(text)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {name}: {exc}") from None


def resolve(doc: dict[str, Any]) -> dict[str, Any]:
    """Validate a parsed document and fill in defaults."""
    unknown = sorted(set(doc) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown section(s) {', '.join(unknown)}; allowed: {', '.join(_SECTIONS)}")

    env = dict(doc.get("environment") or {})
    if "kind" not in env:
        raise ConfigError("[environment] missing required field 'kind' (cube or raft)")
    kind = env.pop("kind")
    if kind not in ENVIRONMENTS:
        raise ConfigError(f"[environment] unknown kind {kind!r}; use one of {', '.join(ENVIRONMENTS)}")
    env = _merge("environment", env, ENVIRONMENTS[kind])
    env["kind"] = kind

    agents_doc = doc.get("agent") or {}
    if not agents_doc:
        raise ConfigError("at least one [agent.<name>] section is required")
    agents = {}
    for name, spec in agents_doc.items():
        if not isinstance(spec, dict):
            raise ConfigError(f"[agent.{name}] must be a table")
        spec = dict(spec)
        akind = spec.pop("kind", name)
        if akind not in AGENTS:
            raise ConfigError(f"[agent.{name}] unknown kind {akind!r}; use one of {', '.join(AGENTS)}")
        spec = _merge(f"agent.{name}", spec, AGENTS[akind])
        spec["kind"] = akind
        agents[name] = spec

    run = dict(doc.get("run") or {})
    for field in _RUN_REQUIRED:
        if field not in run:
            raise ConfigError(f"[run] missing required field '{field}'")
    required = {k: run.pop(k) for k in _RUN_REQUIRED}
    run = _merge("run", run, _RUN)
    run.update(required)
    _check_int("run", "episodes", run["episodes"], 1)
    _check_int("run", "horizon", run["horizon"], 0)
    _check_int("run", "trials", run["trials"], 1)
    _check_int("run", "workers", run["workers"], 1)
    _check_int("run", "base_seed", run["base_seed"], 0)
    if run["time_budget"] is not None and not (isinstance(run["time_budget"], (int, float))
                                               and run["time_budget"] > 0):
        raise ConfigError(f"[run] time_budget must be a positive number, got {run['time_budget']!r}")

    report = _merge("report", dict(doc.get("report") or {}), _REPORT)
    _check_int("report", "stride", report["stride"], 1)
    for name, spec in agents.items():
        if spec["kind"] != "waypoint":
            continue
        if spec["target"] is None:
            spec["target"] = report["target"]
        if spec["target"] is None:
            raise ConfigError(f"[agent.{name}] missing required field 'target' "
                              "(or set [report] target)")
        _check_pred(f"agent.{name}", "target", spec["target"])
        wps = spec["waypoints"]
        if wps != "default":
            if not isinstance(wps, list):
                raise ConfigError(f"[agent.{name}] waypoints must be a list or \"default\"")
            for w in wps:
                _check_pred(f"agent.{name}", "waypoints", w)
    if report["target"] is None:
        targets = {s["target"] for s in agents.values() if s["kind"] == "waypoint"}
        if len(targets) == 1:
            report["target"] = targets.pop()
        elif len(targets) > 1:
            raise ConfigError("[report] target is required when waypoint agents use different targets")
    if report["target"] is not None:
        _check_pred("report", "target", report["target"])
    if report["metric"] is None:
        report["metric"] = "target" if report["target"] is not None else "unique"
    if report["metric"] not in ("target", "unique"):
        raise ConfigError(f"[report] metric must be 'target' or 'unique', got {report['metric']!r}")
    if report["metric"] == "target" and report["target"] is None:
        raise ConfigError("[report] metric 'target' needs a target predicate")
    if report["baseline"] is None:
        report["baseline"] = next(iter(agents))
    if report["baseline"] not in agents:
        raise ConfigError(f"[report] baseline {report['baseline']!r} is not an agent; "
                          f"agents: {', '.join(agents)}")
    if not (0 < report["significance"] < 1):
        raise ConfigError("[report] significance must lie in (0, 1)")

    return {"environment": env, "agent": agents, "run": run, "report": report}


def loads(text: str) -> dict[str, Any]:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    return resolve(doc)


def load(path: str) -> dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return loads(text)


def dumps(resolved: dict[str, Any]) -> str:
    """Canonical JSON of a resolved config (written as ``config.resolved``)."""
    return json.dumps(resolved, indent=2, sort_keys=True) + "\n"
