"""Command-line front end: train, eval, sweep, and export.

Every command resolves its configuration (built-in defaults < config file <
command-line overrides), writes a run manifest with the resolved snapshot
before any work starts, and finalizes it with the exit status. Exit codes:
0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np
import yaml

from .agents import make_agent, make_hrl_agents
from .experiments import (
    COMPLEXITY_GRID,
    CSV_HEADER,
    EVAL_EPISODES,
    FAILURE_GRID,
    LogIntegrityError,
    aggregate,
    build_tag,
    evaluate,
    read_kpi_records,
    sweep,
    write_aggregate_csv,
    write_kpi_records,
)
from .params import (
    ConfigError,
    TrainConfig,
    resolve_scenario,
    scenario_to_dict,
)
from .training import (
    METHODS,
    CheckpointError,
    agents_from_checkpoint,
    load_checkpoint,
    train,
)

OUT_ROOT_ENV = "FLEETLAB_OUT"
MANIFEST_NAME = "run_manifest.json"

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

_AXIS_ALIASES = {"failure": "failure_intensity",
                 "failure_intensity": "failure_intensity",
                 "complexity": "complexity"}
_DEFAULT_GRIDS = {"failure_intensity": FAILURE_GRID,
                  "complexity": COMPLEXITY_GRID}


@dataclass
class RunManifest:
    """Reproducibility record written before work starts and finalized on
    exit; the config snapshot is the fully resolved scenario, not the raw
    user input."""

    command: str
    config: dict
    seeds: list
    out_dir: str
    started: str
    build: str = field(default_factory=build_tag)
    extra: dict = field(default_factory=dict)
    status: str = "running"
    finished: str | None = None
    artifacts: list = field(default_factory=list)
    error: str | None = None
    exit_code: int | None = None


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write_manifest(manifest: RunManifest) -> None:
    path = os.path.join(manifest.out_dir, MANIFEST_NAME)
    with open(path, "w") as f:
        json.dump(dataclasses.asdict(manifest), f, indent=2)


def _start_manifest(command, scenario, train_cfg, seeds, out_dir,
                    extra=None) -> RunManifest:
    manifest = RunManifest(
        command=command,
        config={"scenario": scenario_to_dict(scenario),
                "train": dataclasses.asdict(train_cfg)},
        seeds=list(seeds), out_dir=str(out_dir), started=_now(),
        extra=extra or {})
    _write_manifest(manifest)
    return manifest


def _finish_manifest(manifest: RunManifest, status, code,
                     artifacts=(), error=None) -> None:
    manifest.status = status
    manifest.finished = _now()
    manifest.artifacts = [str(a) for a in artifacts]
    manifest.error = error
    manifest.exit_code = code
    _write_manifest(manifest)


def _code_for(exc: Exception) -> int:
    if isinstance(exc, (ConfigError, CheckpointError)):
        return EXIT_USAGE
    return EXIT_RUNTIME


def _parse_overrides(args) -> dict:
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        overrides[key.strip()] = yaml.safe_load(raw)
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "epochs", None) is not None:
        overrides["epochs"] = args.epochs
    return overrides


def _resolve(args):
    return resolve_scenario(args.config, _parse_overrides(args))


def _norm_method(method: str) -> str:
    method = "drl" if method == "flat" else method
    if method not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got {method!r}")
    return method


def _prepare_out(args, default_name: str) -> str:
    out = args.out or os.path.join(os.environ.get(OUT_ROOT_ENV, "runs"),
                                   default_name)
    os.makedirs(out, exist_ok=True)
    return out


def _build_agents(method, scenario, train_cfg, seed):
    if method == "hrl":
        return make_hrl_agents(scenario, seed, train_cfg)
    if method == "drl":
        return {"FlatJoint": make_agent("FlatJoint", scenario,
                                        np.random.default_rng(seed),
                                        train_cfg)}
    return {}


def _print_summary(records) -> None:
    for metric, stats in aggregate(records).items():
        print(f"  {metric:8s} {stats['mean']:12.4f} ± {stats['std']:.4f} "
              f"(n={stats['n']})")


# ---------------------------------------------------------------------------
# Commands


def cmd_train(args) -> int:
    scenario, train_cfg = _resolve(args)
    method = _norm_method(args.method)
    out = _prepare_out(args, f"train-{scenario.name}-{method}-s{scenario.seed}")
    manifest = _start_manifest("train", scenario, train_cfg, [scenario.seed],
                               out, extra={"method": method,
                                           "workers": args.workers})
    try:
        agents = _build_agents(method, scenario, train_cfg, scenario.seed)
        result = train(scenario, train_cfg, agents, method=method,
                       seed=scenario.seed, out_dir=out)
    except Exception as exc:
        _finish_manifest(manifest, "failed", _code_for(exc),
                         error=f"{type(exc).__name__}: {exc}")
        raise
    artifacts = [f"{out}/kpis.jsonl", f"{out}/curves.jsonl",
                 *result.checkpoints]
    _finish_manifest(manifest, "ok", EXIT_OK, artifacts=artifacts)
    print(f"trained {method} on {scenario.name}: {result.epochs} epochs "
          f"in {result.wall_clock:.1f}s -> {out}")
    if result.curves["R_general"]:
        print(f"  final R_general {result.curves['R_general'][-1]:.3f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    scenario, train_cfg = _resolve(args)
    method = _norm_method(args.method)
    out = _prepare_out(args, f"eval-{scenario.name}-{method}-s{scenario.seed}")
    manifest = _start_manifest("eval", scenario, train_cfg, [scenario.seed],
                               out, extra={"method": method,
                                           "episodes": args.episodes,
                                           "checkpoint": args.checkpoint})
    try:
        if args.checkpoint:
            ckpt = load_checkpoint(args.checkpoint, scenario=scenario)
            agents = agents_from_checkpoint(ckpt, scenario, train_cfg)
        else:
            # Rule/random need no weights; hrl/drl evaluate untrained nets.
            agents = _build_agents(method, scenario, train_cfg, scenario.seed)
        records = evaluate(scenario, method, agents=agents or None,
                           episodes=args.episodes, seed=scenario.seed)
        write_kpi_records(f"{out}/kpis.jsonl", records)
    except Exception as exc:
        _finish_manifest(manifest, "failed", _code_for(exc),
                         error=f"{type(exc).__name__}: {exc}")
        raise
    _finish_manifest(manifest, "ok", EXIT_OK,
                     artifacts=[f"{out}/kpis.jsonl"])
    print(f"evaluated {method} on {scenario.name}: {len(records)} episodes")
    _print_summary(records)
    return EXIT_OK


def _parse_grid(axis: str, raw: str | None):
    if raw is None:
        return list(_DEFAULT_GRIDS[axis])
    parts = [p for p in (s.strip() for s in raw.split(",")) if p]
    if not parts:
        raise ConfigError("sweep grid is empty")
    if axis == "complexity":
        return [int(p) for p in parts]
    return [float(p) for p in parts]


def cmd_sweep(args) -> int:
    scenario, train_cfg = _resolve(args)
    axis = _AXIS_ALIASES.get(args.axis)
    if axis is None:
        raise ConfigError(f"axis must be one of "
                          f"{sorted(set(_AXIS_ALIASES))}, got {args.axis!r}")
    values = _parse_grid(axis, args.grid)
    methods = [m for m in (s.strip() for s in args.methods.split(",")) if m]
    seeds = ([int(s) for s in args.seeds.split(",") if s.strip()]
             if args.seeds else [scenario.seed])
    out = _prepare_out(args, f"sweep-{scenario.name}-{axis}")
    manifest = _start_manifest("sweep", scenario, train_cfg, seeds, out,
                               extra={"axis": axis, "values": values,
                                      "methods": methods,
                                      "episodes": args.episodes,
                                      "workers": args.workers})
    try:
        result = sweep(axis, values, methods, seeds, scenario,
                       train_cfg=train_cfg, out_dir=out,
                       episodes=args.episodes, workers=args.workers)
    except Exception as exc:
        _finish_manifest(manifest, "failed", _code_for(exc),
                         error=f"{type(exc).__name__}: {exc}")
        raise
    artifacts = [f"{out}/kpis.jsonl", f"{out}/aggregated.csv",
                 f"{out}/manifest.json"]
    artifacts += [c["checkpoint"] for c in result.cells if "checkpoint" in c]
    ok = sum(1 for c in result.cells if c["status"] == "ok")
    code = EXIT_OK if result.failures == 0 else EXIT_RUNTIME
    _finish_manifest(manifest, "ok" if code == EXIT_OK else "failed", code,
                     artifacts=artifacts)
    print(f"sweep {axis} on {scenario.name}: {ok} cells ok, "
          f"{result.failures} failed -> {out}")
    for cell in result.cells:
        if cell["status"] == "failed":
            print(f"  FAILED {cell['method']} value={cell['value']} "
                  f"seed={cell['seed']}: {cell['error']}", file=sys.stderr)
    return code


def cmd_export(args) -> int:
    run_dir = args.run_dir
    kpi_path = os.path.join(run_dir, "kpis.jsonl")
    if not os.path.exists(kpi_path):
        raise ConfigError(f"no KPI records at {kpi_path}")
    out = args.out or os.path.join(run_dir, "export")
    os.makedirs(out, exist_ok=True)

    source_extra = {}
    src_manifest = os.path.join(run_dir, MANIFEST_NAME)
    if os.path.exists(src_manifest):
        try:
            source_extra = json.load(open(src_manifest)).get("extra", {})
        except (OSError, json.JSONDecodeError):
            source_extra = {}
    method = source_extra.get("method", "-")

    manifest = RunManifest(command="export", config={"run_dir": run_dir},
                           seeds=[], out_dir=out, started=_now(),
                           extra={"source": run_dir})
    _write_manifest(manifest)
    try:
        records = read_kpi_records(kpi_path)
        rows = []
        by_scenario = {}
        for rec in records:
            by_scenario.setdefault(rec.scenario or "-", []).append(rec)
        for name in sorted(by_scenario):
            for metric, stats in aggregate(by_scenario[name]).items():
                rows.append((name, "-", "-", method, metric,
                             stats["mean"], stats["std"], stats["n"]))
        write_aggregate_csv(f"{out}/aggregated.csv", rows)
        summary = {"build": build_tag(), "source": run_dir,
                   "records": len(records),
                   "scenarios": {name: aggregate(recs)
                                 for name, recs in by_scenario.items()}}
        with open(f"{out}/summary.json", "w") as f:
            json.dump(summary, f, indent=2)
    except Exception as exc:
        _finish_manifest(manifest, "failed", _code_for(exc),
                         error=f"{type(exc).__name__}: {exc}")
        raise
    _finish_manifest(manifest, "ok", EXIT_OK,
                     artifacts=[f"{out}/aggregated.csv", f"{out}/summary.json"])
    print(f"exported {len(records)} records -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def _add_common(p, with_config=True):
    if with_config:
        p.add_argument("--config", default="nominal",
                       help="built-in scenario name or YAML file path")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override any scenario/train field")
        p.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
    p.add_argument("--out", default=None,
                   help=f"output directory (default under ${OUT_ROOT_ENV} "
                        "or ./runs)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fleetlab",
        description="Fleet readiness decision lab: train commanders, "
                    "evaluate policies, sweep scenarios, export results.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a control method")
    _add_common(p)
    p.add_argument("--method", default="hrl",
                   help="hrl | drl (flat baseline) | rule | random")
    p.add_argument("--epochs", type=int, default=None,
                   help="override the training epoch count")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="greedy evaluation rollouts")
    _add_common(p)
    p.add_argument("--method", default="rule")
    p.add_argument("--checkpoint", default=None,
                   help="trained weights (not needed for rule/random)")
    p.add_argument("--episodes", type=int, default=EVAL_EPISODES)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="scenario sweep grid")
    _add_common(p)
    p.add_argument("--axis", required=True,
                   help="complexity | failure (failure_intensity)")
    p.add_argument("--grid", default=None,
                   help="comma-separated axis values (default: paper grid)")
    p.add_argument("--methods", default="hrl,drl,rule")
    p.add_argument("--seeds", default=None,
                   help="comma-separated seeds (default: scenario seed)")
    p.add_argument("--episodes", type=int, default=EVAL_EPISODES)
    p.add_argument("--epochs", type=int, default=None,
                   help="override the training epoch count")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export", help="re-aggregate a run directory for "
                                      "downstream reporting")
    p.add_argument("--run-dir", required=True)
    _add_common(p, with_config=False)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LogIntegrityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
