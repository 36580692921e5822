"""Command line: generate games, run experiments, evaluate policies, self-test.

    markov-cce gen-game --config gen.json --out game.json
    markov-cce run --config experiment.json --out runs/g1 [--seed N] [--workers N]
    markov-cce eval --game game.json --policy policy.json
    markov-cce selftest [SUITE ...] [--out report.json]

An experiment config is a JSON object::

    {"game": "game.json" | {"embedding": "one-hot", "seed": 0, "m": 2, ...},
     "T": 1024, "delta": 0.1, "R": null,
     "constants": {"c_gamma": 5.0, "eta_mult": 1.0, ...},
     "seeds": [0, 1, 2], "workers": 1, "out": "runs/g1"}
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Union

from . import avlpr, evaluation, io
from .game import LinearMarkovGame, validate_game
from .generate import generate
from .params import Schedule
from .selftest import SUITES, run_suite

SCHEMA_VERSION = 1
log = logging.getLogger("markov_cce")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    game: Union[str, dict]
    T: int = 1024
    delta: float = 0.1
    R: Optional[int] = None
    constants: dict = field(default_factory=dict)
    seeds: list = field(default_factory=lambda: [0])
    workers: int = 1
    out: Optional[str] = None

    def __post_init__(self):
        if not isinstance(self.game, (str, dict)):
            raise ConfigError("game must be a file path or a generator spec object")
        if int(self.T) < 1:
            raise ConfigError("T must be >= 1")
        if not 0 < float(self.delta) < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if self.R is not None and int(self.R) < 1:
            raise ConfigError("R must be >= 1")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if int(self.workers) < 1:
            raise ConfigError("workers must be >= 1")
        known = {f.name for f in fields(Schedule)}
        extra = set(self.constants) - known
        if extra:
            raise ConfigError(f"unknown constants {sorted(extra)}; known: {sorted(known)}")
        self.T, self.delta, self.workers = int(self.T), float(self.delta), int(self.workers)
        self.seeds = [int(s) for s in self.seeds]

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(obj) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        if "game" not in obj:
            raise ConfigError("config needs a 'game' entry")
        return cls(**obj)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(_read_json(path))

    def schedule(self) -> Schedule:
        return Schedule(**self.constants)

    def to_dict(self) -> dict:
        return asdict(self)


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read {path}: {e}") from e


def resolve_game(source, base: Path = None) -> LinearMarkovGame:
    if isinstance(source, dict):
        game = generate(source)
    else:
        p = Path(source)
        if base is not None and not p.is_absolute():
            p = base / p
        game = io.load_game(p)
    problems = validate_game(game)
    if problems:
        raise ConfigError("game fails validation: " + "; ".join(problems))
    return game


# ---------------------------------------------------------------- run

def run_seed(game_dict: dict, cfg_dict: dict, seed: int, out: str, workers: int) -> dict:
    """One seed: metrics stream, output policy and the seed's summary entry."""
    game = io.game_from_dict(game_dict)
    cfg = ExperimentConfig.from_dict(cfg_dict)
    out = Path(out)
    metrics = out / "metrics" / f"seed-{seed}.jsonl"
    with metrics.open("w") as fh:
        def write(rec):
            row = {"schema_version": SCHEMA_VERSION, "seed": seed}
            row.update(rec.to_dict())
            fh.write(io.dumps(row))
        res = avlpr.run(game, cfg.T, cfg.delta, cfg.schedule(), cfg.R, rng=seed, workers=workers,
                        callback=write)
    io.save_policy(res.pi_out, out / "policies" / f"seed-{seed}.json",
                   extra={"schema_version": SCHEMA_VERSION, "seed": seed})
    pols, counts = res.epoch_policies()
    avg = evaluation.cce_regret(game, pols, counts)
    pout = evaluation.cce_regret(game, [res.pi_out])
    last = evaluation.cce_gaps(game, res.policies[res.epoch_policy[-1]])
    return {
        "seed": seed,
        "averaged_regret": float(avg.max()),
        "averaged_regret_per_agent": avg.tolist(),
        "pi_out_regret": float(pout.max()),
        "pi_out_regret_per_agent": pout.tolist(),
        "last_policy_regret": float(last.max()),
        "violations": res.violations,
        "distinct_policies": len(res.policies),
        "samples": res.records[-1].samples,
    }


def cmd_run(cfg: ExperimentConfig, out: Path, base: Path = None) -> dict:
    game = resolve_game(cfg.game, base)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics").mkdir(exist_ok=True)
    (out / "policies").mkdir(exist_ok=True)
    io.save_game(game, out / "game.json")
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    gd, cd = io.game_to_dict(game), cfg.to_dict()
    if cfg.workers > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(min(cfg.workers, len(cfg.seeds))) as ex:
            futs = [ex.submit(run_seed, gd, cd, s, str(out), 1) for s in cfg.seeds]
            per_seed = [f.result() for f in futs]
    else:
        per_seed = [run_seed(gd, cd, s, str(out), cfg.workers) for s in cfg.seeds]
    summary = {
        "schema_version": SCHEMA_VERSION,
        "T": cfg.T,
        "delta": cfg.delta,
        "R": cfg.R if cfg.R is not None else avlpr.default_repetitions(cfg.delta),
        "schedule": cfg.schedule().to_dict(),
        "seeds": per_seed,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


# ---------------------------------------------------------- gen / eval

def cmd_gen_game(spec: dict, out: Path) -> LinearMarkovGame:
    try:
        game = generate(spec)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"cannot generate game: {e}") from e
    problems = validate_game(game)
    if problems:
        raise ConfigError("generated game fails validation: " + "; ".join(problems))
    out.parent.mkdir(parents=True, exist_ok=True)
    io.save_game(game, out)
    return game


def cmd_eval(game: LinearMarkovGame, policy_path) -> dict:
    pol = io.load_policy(policy_path)
    if tuple(pol.actions) != tuple(game.actions):
        raise ConfigError("policy and game disagree on the action counts")
    reg = evaluation.cce_regret(game, [pol])
    return {"schema_version": SCHEMA_VERSION, "cce_regret": float(reg.max()),
            "cce_regret_per_agent": reg.tolist()}


# ---------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="markov-cce", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-game", help="generate a game file from a generator spec")
    g.add_argument("--config", required=True, help="JSON generator spec (or an experiment config with a 'game' spec)")
    g.add_argument("--seed", type=int, help="override the generator seed")
    g.add_argument("--out", required=True, help="output game file")

    r = sub.add_parser("run", help="run the epoch driver for every seed of a config")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int, help="run only this seed")
    r.add_argument("--workers", type=int)
    r.add_argument("--out", help="output directory (overrides the config)")

    e = sub.add_parser("eval", help="CCE regret of a stored policy")
    e.add_argument("--policy", required=True)
    e.add_argument("--game", help="game file (default: game.json next to the policy's run directory)")
    e.add_argument("--config", help="experiment config whose game to use")

    s = sub.add_parser("selftest", help="run property suites")
    s.add_argument("suites", nargs="*", metavar="SUITE", help=f"one of {sorted(SUITES)}; default: all")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="also write the JSON report here")
    return p


def _gen_spec(path) -> dict:
    obj = _read_json(path)
    spec = obj.get("game", obj)
    if not isinstance(spec, dict):
        raise ConfigError("gen-game needs a generator spec, not a game file path")
    return dict(spec)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "gen-game":
            spec = _gen_spec(args.config)
            if args.seed is not None:
                spec["seed"] = args.seed
            game = cmd_gen_game(spec, Path(args.out))
            print(json.dumps({"out": args.out, "m": game.m, "H": game.H, "d": game.d}))
        elif args.command == "run":
            obj = _read_json(args.config)
            if args.seed is not None:
                obj["seeds"] = [args.seed]
            if args.workers is not None:
                obj["workers"] = args.workers
            if args.out is not None:
                obj["out"] = args.out
            cfg = ExperimentConfig.from_dict(obj)
            if not cfg.out:
                raise ConfigError("no output directory: pass --out or set 'out' in the config")
            summary = cmd_run(cfg, Path(cfg.out), base=Path(args.config).resolve().parent)
            for row in summary["seeds"]:
                print(json.dumps({k: row[k] for k in ("seed", "averaged_regret", "pi_out_regret", "violations")}))
        elif args.command == "eval":
            if args.game:
                game = resolve_game(args.game)
            elif args.config:
                game = resolve_game(ExperimentConfig.load(args.config).game,
                                    Path(args.config).resolve().parent)
            else:
                game = resolve_game(Path(args.policy).resolve().parent.parent / "game.json")
            print(json.dumps(cmd_eval(game, args.policy)))
        elif args.command == "selftest":
            names = args.suites or list(SUITES)
            unknown = sorted(set(names) - set(SUITES))
            if unknown:
                raise ConfigError(f"unknown suites {unknown}; choose from {sorted(SUITES)}")
            reports = [run_suite(n, seed=args.seed).to_dict() for n in names]
            doc = {"schema_version": SCHEMA_VERSION, "passed": all(r["passed"] for r in reports),
                   "suites": reports}
            for r in reports:
                print(json.dumps({"suite": r["suite"], "passed": r["passed"],
                                  "seconds": round(r["seconds"], 2)}))
            if args.out:
                Path(args.out).write_text(json.dumps(doc, indent=2) + "\n")
            return 0 if doc["passed"] else 1
    except (ConfigError, ValueError, FileNotFoundError, FloatingPointError) as e:
        print(f"markov-cce: error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
