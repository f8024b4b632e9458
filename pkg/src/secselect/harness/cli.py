"""Command-line entry point ``secselect``.

Global flags (``--config``, ``--seed``, ``--out``) are accepted before or
after the subcommand.  Exit status: 0 success, 1 a check failed, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from secselect.environment.ingest import ingest_paths
from secselect.environment.scenario import Scenario
from secselect.errors import SecselectError
from secselect.harness.bench import bench_inference
from secselect.harness.config import RunConfig, build_scenario, load_config_file
from secselect.harness.golden import golden_checks
from secselect.harness.runner import run_baseline, run_eval, run_training


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="run config file (YAML or JSON)")
    p.add_argument("--seed", type=int, default=d, help="run seed (scenario seed for 'scenario gen-*')")
    p.add_argument("--out", default=d, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="secselect", description="Security-aware service selection experiments")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, **kw):
        p = sub.add_parser(name, **kw)
        _global_flags(p, suppress=True)
        return p

    sc = add("scenario", help="generate or validate scenario archives")
    sc_sub = sc.add_subparsers(dest="scenario_command", required=True)
    for name in ("gen-udr", "gen-skr"):
        p = sc_sub.add_parser(name, help=f"generate a {name[4:].upper()} scenario")
        _global_flags(p, suppress=True)
    p = sc_sub.add_parser("validate", help="check a scenario archive")
    _global_flags(p, suppress=True)
    p.add_argument("archive")

    p = add("ingest-paths", help="turn trip and AMP CSV files into paths")
    p.add_argument("--trips", required=True)
    p.add_argument("--amps", required=True)
    p.add_argument("--radius-m", type=float, default=50.0)
    p.add_argument("--delta-t", type=float, default=30.0)

    add("train", help="train a DQN agent")
    p = add("eval", help="score a checkpoint on the held-out episodes")
    p.add_argument("--checkpoint", required=True)
    p = add("baseline", help="run a fixed policy")
    p.add_argument("--policy", required=True, choices=("always-accept", "random"))
    p = add("bench", help="time single-observation inference")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--repetitions", type=int, default=1000)
    p.add_argument("--warmup", type=int, default=50)
    add("golden", help="check the worked example")
    return parser


def _run_config(args) -> RunConfig:
    raw = load_config_file(args.config) if args.config else {}
    return RunConfig.from_dict(raw, seed=args.seed, out=args.out)


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _summary(result) -> dict:
    last = result.epoch_rows[-1]
    keys = ("episodes", "cop_mean", "tlo_mean", "unno_mean", "steps_mean", "n_security_violation", "within_budget")
    return {"out": str(result.out), "best_epoch": result.best_epoch, **{k: last[k] for k in keys}}


def _cmd_scenario(args) -> int:
    if args.scenario_command == "validate":
        scenario = Scenario.load(args.archive)
        scenario.validate()
        print(f"ok: {len(scenario.services)} services, {len(scenario.providers)} providers, {len(scenario.paths)} paths")
        return 0
    raw = load_config_file(args.config) if args.config else {}
    raw.setdefault("scenario", {})
    raw["scenario"]["source"] = "generate-udr" if args.scenario_command == "gen-udr" else "generate-skr"
    if args.seed is not None:
        raw["scenario"]["seed"] = args.seed
    config = RunConfig.from_dict(raw)
    scenario = build_scenario(config)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    target = out / "scenario.json"
    scenario.save(target)
    print(f"wrote {target}: {len(scenario.services)} services, {len(scenario.providers)} providers, "
          f"{len(scenario.paths)} paths")
    return 0


def _cmd_ingest(args) -> int:
    paths = ingest_paths(args.trips, args.amps, args.radius_m, args.delta_t)
    doc = {"paths": [{"id": p.id, "delta_t": p.delta_t, "steps": [-1 if s is None else s for s in p.steps]}
                     for p in paths]}
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    (out / "paths.json").write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")
    amp_steps = sum(p.amp_steps for p in paths)
    print(f"kept {len(paths)} paths, {sum(len(p) for p in paths)} steps, {amp_steps} AMP steps -> {out / 'paths.json'}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "scenario":
            return _cmd_scenario(args)
        if args.command == "ingest-paths":
            return _cmd_ingest(args)
        if args.command == "golden":
            checks = golden_checks()
            for c in checks:
                print(f"{'PASS' if c.ok else 'FAIL'} {c.name}: {c.value:.6f} (expected {c.expected} +/- {c.tol})")
            return 0 if all(c.ok for c in checks) else 1
        if args.command == "bench":
            _print(bench_inference(args.checkpoint, args.repetitions, args.warmup))
            return 0
        config = _run_config(args)
        if args.command == "train":
            user_train = (load_config_file(args.config).get("train") or {}) if args.config else {}
            _print(_summary(run_training(config, user_train_keys=tuple(user_train))))
        elif args.command == "eval":
            _print(_summary(run_eval(config, args.checkpoint)))
        elif args.command == "baseline":
            _print(_summary(run_baseline(config, args.policy)))
        return 0
    except SecselectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
