"""Command line: ``deskued train|eval|analyze-game|dump-buffer``.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .envs.generators import DomainConfig
from .errors import ConfigInvalid, DeskUEDError, IoError
from .games import (DualGame, find_equilibrium, table41_report, sweep, verify_theorem1)
from .harness import (buffer_dump, config_schema, dumps, evaluate_params, load_config,
                      load_state, run)
from .metrics import load_suite, report_csv
from .policy import load_params

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="deskued", description="Desk-scale unsupervised environment design.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    tr = sub.add_parser("train", help="run a curriculum from a JSON config")
    tr.add_argument("--config", required=True)
    tr.add_argument("--seed", type=int, help="override master_seed")
    tr.add_argument("--out", help="override output_dir")
    tr.add_argument("--resume", action="store_true", help="continue from the latest checkpoint")

    ev = sub.add_parser("eval", help="greedy zero-shot evaluation of a saved policy")
    ev.add_argument("--checkpoint", required=True,
                    help="policy file, checkpoint directory or run directory")
    ev.add_argument("--suite", required=True, help="suite JSON path or built-in suite name")
    ev.add_argument("--episodes", type=int, default=1)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--csv", action="store_true", help="print CSV instead of JSON")

    ag = sub.add_parser("analyze-game", help="equilibria of dual curriculum games")
    g = ag.add_mutually_exclusive_group()
    g.add_argument("--payoffs", help="JSON file: {payoffs, p, teacher1, teacher2}")
    g.add_argument("--table41", help="B,p,eps,n for the counterexample game")
    ag.add_argument("--sweep", type=int, help="solve N random games and check the bounds")
    ag.add_argument("--seed", type=int, default=0)

    db = sub.add_parser("dump-buffer", help="print the level buffer of a checkpoint as JSON lines")
    db.add_argument("--checkpoint", required=True)
    return ap


def _resolve_policy(path: Path) -> Path:
    if path.is_file():
        return path
    candidates = [path / "student_0.policy"]
    latest = path / "checkpoints" / "latest.json"
    if latest.is_file():
        candidates.append(path / "checkpoints" / json.loads(latest.read_text())["dir"]
                          / "student_0.policy")
    if (path / "latest.json").is_file():
        candidates.append(path / json.loads((path / "latest.json").read_text())["dir"]
                          / "student_0.policy")
    for c in candidates:
        if c.is_file():
            return c
    raise IoError("no policy file found", path)


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, output_dir=args.out)
    state = run(cfg, resume=args.resume)
    print(json.dumps({"output_dir": cfg.output_dir, "iterations": state.iteration,
                      "student_updates": state.student.updates}))
    return EXIT_OK


def cmd_eval(args) -> int:
    params, header = load_params(_resolve_policy(Path(args.checkpoint)))
    suite = load_suite(args.suite)
    extra = header.get("extra", {})
    env_cfg = DomainConfig(**extra["env"]) if "env" in extra else \
        DomainConfig(kind=suite[0][1].env_kind)
    frames = extra.get("frames", 4)
    report = evaluate_params(params, env_cfg, suite, args.episodes, args.seed, frames)
    print(report_csv(report) if args.csv else dumps(report), end="" if args.csv else "\n")
    return EXIT_OK


def cmd_analyze(args) -> int:
    if args.table41 is None and args.payoffs is None and args.sweep is None:
        raise UsageError("analyze-game needs --payoffs, --table41 or --sweep")
    out = {}
    if args.table41 is not None:
        try:
            B, p, eps, n = args.table41.split(",")
            out["table41"] = table41_report(float(B), float(p), float(eps), int(n))
        except ValueError as exc:
            raise UsageError(f"--table41 expects B,p,eps,n: {exc}") from exc
    if args.payoffs is not None:
        path = Path(args.payoffs)
        if not path.is_file():
            raise IoError("payoff file not found", path)
        spec = json.loads(path.read_text())
        game = DualGame(np.asarray(spec["payoffs"], float), float(spec.get("p", 0.5)),
                        spec.get("teacher1", "regret"), spec.get("teacher2", "uniform"))
        cert = find_equilibrium(game)
        out["game"] = game.to_dict()
        out["equilibrium"] = cert.profile.to_dict()
        out["dual_game_gains"] = cert.exploitability
        out["theorem1"] = verify_theorem1(game, cert, raise_on_violation=False)
    if args.sweep is not None:
        rep = sweep(args.sweep, np.random.default_rng(args.seed))
        out["sweep"] = {"games": rep["games"], "violations": rep["violations"],
                        "max_dual_game_gain": max((r["dual_game_gain"] for r in rep["results"]),
                                                  default=0.0)}
    if len(out) == 1:
        out = next(iter(out.values()))
    print(dumps(out))
    return EXIT_OK


def cmd_dump(args) -> int:
    for record in buffer_dump(load_state(args.checkpoint)):
        print(json.dumps(record, sort_keys=True))
    return EXIT_OK


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "analyze-game": cmd_analyze,
            "dump-buffer": cmd_dump}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        if argv and argv[0] == "train":
            print("config schema:\n" + json.dumps(config_schema(), indent=1), file=sys.stderr)
        return EXIT_USAGE
    except ConfigInvalid as exc:
        print(f"deskued: invalid config: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (DeskUEDError, OSError, KeyError, ValueError) as exc:
        print(f"deskued: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
