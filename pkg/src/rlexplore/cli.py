"""Command-line interface.

    rlexplore validate <config>
    rlexplore run <config> [-o DIR]
    rlexplore compare <config> [-o DIR]
    rlexplore heatmap <rundir>

Exit status: 0 on success, 1 on configuration or usage errors, 2 when the
run itself fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .harness import config as cfgmod
from .harness.config import ConfigError
from .harness.experiment import render_heatmaps, run_comparison

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; this interface reserves 2 for runtime failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rlexplore", description="Exploration experiments on cube world and simulated Raft.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress per trial")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("validate", help="parse a config and print it with defaults filled in")
    v.add_argument("config")

    for name, text in (("run", "run a single-agent experiment"),
                       ("compare", "run every agent in the config and compare them")):
        r = sub.add_parser(name, help=text)
        r.add_argument("config")
        r.add_argument("-o", "--out", help="output directory (default: runs/<config stem>)")
        r.add_argument("--agent", help="agent section to run (run only; default: the only one)")
        r.add_argument("--episodes", type=int, help="override [run] episodes")
        r.add_argument("--trials", type=int, help="override [run] trials")
        r.add_argument("--workers", type=int, help="override [run] workers")

    h = sub.add_parser("heatmap", help="re-render cube heatmaps from a run directory")
    h.add_argument("rundir")
    return p


def _resolved(args) -> dict:
    with open(args.config, "rb") as fh:
        doc = cfgmod.tomllib.load(fh)
    run = doc.setdefault("run", {})
    for key in ("episodes", "trials", "workers"):
        value = getattr(args, key, None)
        if value is not None:
            run[key] = value
    return cfgmod.resolve(doc)


def _print_summary(rep) -> None:
    for row in rep.summary:
        print(f"{row['display']}  (trials={row['trials']}, excluded={row['excluded']}, metric={row['metric']})")
    for row in rep.significance:
        flag = "significant" if row["significant"] else "not significant"
        print(f"{row['agent']} vs {row['baseline']}: U={row['u']} p={row['p_value']} ({flag})")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "heatmap":
            path = os.path.join(args.rundir, "config.resolved")
            try:
                with open(path, encoding="utf-8") as fh:
                    config = json.load(fh)
            except (OSError, ValueError) as exc:
                raise ConfigError(f"cannot read {path}: {exc}") from None
            if config["environment"]["kind"] != "cube":
                raise ConfigError("heatmaps are only produced for the cube environment")
            files = render_heatmaps(args.rundir, config)
            if not files:
                raise ConfigError(f"no visits_*.npy files in {args.rundir}")
            print(f"wrote {len(files)} heatmap files")
            return EXIT_OK

        try:
            config = _resolved(args)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        except cfgmod.tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse config: {exc}") from None

        if args.command == "validate":
            sys.stdout.write(cfgmod.dumps(config))
            return EXIT_OK

        agents = list(config["agent"])
        if args.command == "run":
            if args.agent is not None:
                if args.agent not in config["agent"]:
                    raise ConfigError(f"no [agent.{args.agent}] section; agents: {', '.join(agents)}")
                agents = [args.agent]
            elif len(agents) != 1:
                raise ConfigError("config has several agents; pass --agent or use 'compare'")
        outdir = args.out or os.path.join("runs", os.path.splitext(os.path.basename(args.config))[0])

        def progress(res):
            if res.ok:
                logging.info("%s trial %d: unique=%d target=%d (%.1fs)",
                             res.agent, res.trial, res.unique, res.target, res.elapsed)

        rep = run_comparison(config, outdir, agents, progress)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    _print_summary(rep)
    print(f"results in {outdir}")
    if rep.excluded and len(rep.excluded) == len(rep.results):
        print("every trial failed", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
