"""Command-line front end.

Subcommands: generate, validate, run, evaluate, calibrate, stats, serve.
Config flags mirror the GenerationConfig field names.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import analysis, protocol
from .agents import calibrate_step_limit, make_policy, run_episode
from .scenario import GenerationConfig, Scenario, generate
from .validation import validate_scenario
from .wrappers import make_env

_CONFIG_FIELDS = [f.name for f in fields(GenerationConfig)]


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("environment config")
    for name in _CONFIG_FIELDS:
        if name == "seed":
            continue  # --seed is a top-level flag on each subcommand
        flag = "--" + name.replace("_", "-")
        if name == "step_limit":
            group.add_argument(flag, type=str, default=None, metavar="N|auto")
        elif name in ("min_hosts", "max_hosts", "num_os", "num_services", "num_processes",
                      "num_sensitive", "services_per_host", "processes_per_host",
                      "hosts_per_user_subnet_max"):
            group.add_argument(flag, type=int, default=None)
        else:
            group.add_argument(flag, type=float, default=None)


def _config_from_args(args: argparse.Namespace) -> GenerationConfig:
    overrides = {}
    for name in _CONFIG_FIELDS:
        value = getattr(args, name, None)
        if value is None:
            continue
        if name == "step_limit" and value != "auto":
            value = int(value)
        overrides[name] = value
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return GenerationConfig(**overrides)


def _write_out(text: str, out: str | None) -> None:
    if out and out != "-":
        Path(out).write_text(text + ("\n" if not text.endswith("\n") else ""), encoding="utf-8")
    else:
        print(text)


def cmd_generate(args) -> int:
    config = _config_from_args(args)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed & ((1 << 64) - 1)))
    scenario = generate(config, rng, host_count=args.host_count)
    _write_out(scenario.to_json(), args.out)
    return 0


def cmd_validate(args) -> int:
    scenario = Scenario.from_json(Path(args.scenario).read_text(encoding="utf-8"))
    report = validate_scenario(scenario)
    _write_out(json.dumps(report.to_dict(), indent=2), args.out)
    return 0 if report.ok else 1


def cmd_run(args) -> int:
    config = _config_from_args(args)
    env = make_env(config, memory=args.memory, seed=args.seed, backend=args.backend)
    policy = make_policy(
        args.policy, config, rng=np.random.default_rng(np.random.SeedSequence([args.seed, 0x90110]))
    )
    trajectory = run_episode(env, policy, seed=args.seed)
    if args.out:
        with protocol.EpisodeLogger(args.out) as logger:
            logger.log(trajectory)
    print(json.dumps(analysis.sequence_export(trajectory), indent=2))
    return 0


def cmd_evaluate(args) -> int:
    config = _config_from_args(args)
    if args.policy == "remote":
        return _evaluate_remote(args, config)
    summary, trajectories = analysis.evaluate(
        args.policy,
        config,
        episodes=args.episodes,
        seed=args.seed,
        memory=args.memory,
        backend=args.backend,
        with_baselines=args.with_baselines,
    )
    if args.out:
        with protocol.EpisodeLogger(args.out) as logger:
            for trajectory in trajectories:
                logger.log(trajectory)
    print(summary.to_json())
    return 0


def _evaluate_remote(args, config) -> int:
    # Serve the protocol on stdio while an external agent drives the
    # episodes; the summary goes to stderr since stdout is the wire.
    logger = protocol.EpisodeLogger(args.out) if args.out else None
    session = protocol.RecordingSession(
        config,
        memory=args.memory,
        backend=args.backend,
        episodes=args.episodes,
        logger=logger,
    )
    try:
        protocol.serve(session=session)
    finally:
        if logger is not None:
            logger.close()
    if not session.trajectories:
        print("error: no completed episodes were driven", file=sys.stderr)
        return 2
    summary = analysis.summarize(session.trajectories, policy="remote")
    print(summary.to_json(), file=sys.stderr)
    return 0


def cmd_calibrate(args) -> int:
    config = _config_from_args(args)
    limit = calibrate_step_limit(config, args.episodes, seed=args.seed, backend=args.backend)
    print(limit)
    return 0


def cmd_stats(args) -> int:
    trajectories = protocol.read_trajectories(args.log)
    baselines = None
    if args.baseline_random is not None and args.baseline_oracle is not None:
        baselines = (args.baseline_random, args.baseline_oracle)
    summary = analysis.summarize(trajectories, baselines=baselines)
    _write_out(summary.to_json(), args.out)
    return 0


def cmd_serve(args) -> int:
    config = _config_from_args(args)
    if args.tcp:
        protocol.serve_tcp(args.tcp, config=config, memory=args.memory, backend=args.backend)
    else:
        protocol.serve(config=config, memory=args.memory, backend=args.backend)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netpen", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate one scenario as canonical JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--host-count", type=int, default=None, help="force the network size")
    p.add_argument("--out", default=None)
    _add_config_args(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("validate", help="validate a scenario JSON file")
    p.add_argument("scenario")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="run a single scripted episode")
    p.add_argument("--policy", default="oracle", choices=["random", "brute-force", "oracle"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--memory", default="none")
    p.add_argument("--backend", default="auto")
    p.add_argument("--out", default=None, help="append the trajectory to this JSONL log")
    _add_config_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("evaluate", help="batch-evaluate a scripted or remote policy")
    p.add_argument("--policy", default="oracle", choices=["random", "brute-force", "oracle", "remote"])
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--memory", default="none")
    p.add_argument("--backend", default="auto")
    p.add_argument("--with-baselines", action="store_true",
                   help="also run random/oracle anchors for the normalized score")
    p.add_argument("--out", default=None, help="write the episode log to this JSONL file")
    _add_config_args(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("calibrate", help="calibrate the step limit with a random agent")
    p.add_argument("--episodes", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--backend", default="auto")
    _add_config_args(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("stats", help="recompute summary statistics from a JSONL log")
    p.add_argument("log")
    p.add_argument("--baseline-random", type=float, default=None)
    p.add_argument("--baseline-oracle", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("serve", help="serve the line-delimited JSON protocol on stdio")
    p.add_argument("--memory", default="none")
    p.add_argument("--backend", default="auto")
    p.add_argument("--tcp", type=int, default=None, metavar="PORT",
                   help="serve on a local TCP port instead of stdio")
    p.add_argument("--seed", type=int, default=None)
    _add_config_args(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (analysis.AnalysisError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
