"""Episode KPIs, multi-seed aggregation, and scenario sweeps.

KPIs are computed purely from the episode event log (the external record of
what happened), never from live world state, so any complete log — ours or
a third party's — yields the same numbers. Costs are summed in log order,
which reproduces the simulator's ledger floats exactly.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from .params import ConfigError, ScenarioConfig, TrainConfig

SWEEP_AXES = ("complexity", "failure_intensity")
SWEEP_METHODS = ("hrl", "drl", "rule")
COMPLEXITY_GRID = (1, 2, 5, 10)
FAILURE_GRID = (0.5, 0.8, 1.0, 2.0)
EVAL_EPISODES = 10
CSV_HEADER = ("scenario", "axis", "value", "method", "metric",
              "mean", "std", "n")
COST_KEYS = ("maintenance", "procurement", "inventory", "penalty", "virtual")
AGG_METRICS = ("r_ab", "r_ms", "r_ss", "ttc", "r_cb", "r_vcb", "r_total")


class LogIntegrityError(RuntimeError):
    """The event log does not cover a complete episode."""


@dataclass(frozen=True)
class KpiRecord:
    """Per-episode scoreboard; ratios are absent (None) when no mission
    revenue was earned."""

    r_ab: float                  # fleet availability, %
    r_ms: float                  # mission success, %
    r_ss: float                  # sortie success, %
    ttc: float                   # total tangible cost, k$ (excl. virtual)
    r_cb: float | None           # cost burden: ttc / revenue
    r_vcb: float | None          # with virtual spend: (ttc + virt) / revenue
    r_total: float               # mission revenue earned, k$
    costs: dict                  # {maintenance, procurement, inventory, penalty, virtual}
    seed: int | None = None
    scenario: str = ""


def compute_kpis(events: list, cfg: ScenarioConfig,
                 seed: int | None = None, scenario: str = "") -> KpiRecord:
    """Score one complete episode log.

    Raises LogIntegrityError when the log does not contain exactly one
    availability entry per hour of the configured horizon.
    """
    ready = []
    succeeded = failed = 0
    launched = completed = 0
    costs = {k: 0.0 for k in COST_KEYS}
    revenue = 0.0
    for e in events:
        kind = e["kind"]
        if kind == "availability":
            ready.append(e["ready"])
        elif kind == "mission_succeeded":
            succeeded += 1
            revenue += e["reward"]
        elif kind == "mission_failed":
            failed += 1
            costs["penalty"] += e["penalty"]
        elif kind == "mission_launched":
            launched += len(e["aircraft"])
        elif kind == "sortie_completed":
            completed += 1
        elif kind == "repair_started":
            costs["maintenance"] += e["cost"]
        elif kind == "order_placed":
            costs["procurement"] += e["cost"]
        elif kind == "holding":
            costs["inventory"] += e["amount"]
        elif kind == "arrival":
            costs["virtual"] += e["virtual_cost"]
    if len(ready) != cfg.horizon:
        raise LogIntegrityError(
            f"log holds {len(ready)} availability entries, "
            f"expected {cfg.horizon} (truncated or duplicated episode?)")

    r_ab = 100.0 * sum(ready) / (len(ready) * cfg.n_aircraft)
    resolved = succeeded + failed
    r_ms = 100.0 * succeeded / resolved if resolved else 0.0
    r_ss = 100.0 * completed / launched if launched else 0.0
    ttc = (costs["maintenance"] + costs["procurement"]
           + costs["inventory"] + costs["penalty"])
    if revenue > 0:
        r_cb = ttc / revenue
        r_vcb = (ttc + costs["virtual"]) / revenue
    else:
        r_cb = r_vcb = None
    return KpiRecord(r_ab=r_ab, r_ms=r_ms, r_ss=r_ss, ttc=ttc,
                     r_cb=r_cb, r_vcb=r_vcb, r_total=revenue, costs=costs,
                     seed=seed, scenario=scenario)


def kpi_to_dict(rec: KpiRecord) -> dict:
    """Stable-keyed dict for line-delimited output; undefined ratios are
    omitted rather than null."""
    out = {"scenario": rec.scenario, "seed": rec.seed,
           "r_ab": rec.r_ab, "r_ms": rec.r_ms, "r_ss": rec.r_ss,
           "ttc": rec.ttc, "r_total": rec.r_total}
    if rec.r_cb is not None:
        out["r_cb"] = rec.r_cb
        out["r_vcb"] = rec.r_vcb
    out["costs"] = dict(rec.costs)
    return out


def kpi_from_dict(d: dict) -> KpiRecord:
    return KpiRecord(r_ab=d["r_ab"], r_ms=d["r_ms"], r_ss=d["r_ss"],
                     ttc=d["ttc"], r_cb=d.get("r_cb"), r_vcb=d.get("r_vcb"),
                     r_total=d["r_total"], costs=dict(d["costs"]),
                     seed=d.get("seed"), scenario=d.get("scenario", ""))


def write_kpi_records(path, records) -> None:
    with open(path, "w") as f:
        for rec in records:
            f.write(json.dumps(kpi_to_dict(rec)) + "\n")


def read_kpi_records(path) -> list[KpiRecord]:
    out = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                out.append(kpi_from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError) as exc:
                raise LogIntegrityError(
                    f"{path}:{lineno}: bad KPI record ({exc})") from exc
    return out


def mean_std(values) -> tuple[float, float, int]:
    """Mean and sample standard deviation (n-1); std is 0 for n < 2."""
    vals = np.asarray(list(values), dtype=float)
    n = len(vals)
    if n == 0:
        raise ValueError("cannot aggregate zero values")
    std = float(np.std(vals, ddof=1)) if n > 1 else 0.0
    return float(np.mean(vals)), std, n


def aggregate(records: list[KpiRecord]) -> dict[str, dict]:
    """Per-metric mean/std/n across records; metrics undefined in every
    record are dropped."""
    out = {}
    for metric in AGG_METRICS:
        vals = [getattr(r, metric) for r in records
                if getattr(r, metric) is not None]
        if not vals:
            continue
        m, s, n = mean_std(vals)
        out[metric] = {"mean": m, "std": s, "n": n}
    return out


def build_tag() -> str:
    try:
        from importlib.metadata import version
        return "artifact-" + version("artifact")
    except Exception:
        return "artifact-unversioned"


def evaluate(cfg: ScenarioConfig, method: str, agents=None,
             episodes: int = EVAL_EPISODES, seed: int = 0,
             rule_cfg=None) -> list:
    """Greedy evaluation rollouts; one KPI record per episode."""
    from .training import run_episode
    records = []
    for i in range(episodes):
        result = run_episode(cfg, method, agents=agents, train_mode=False,
                             entropy=(seed, 1_000_000 + i), rule_cfg=rule_cfg)
        records.append(compute_kpis(result.world.events, cfg,
                                    seed=seed, scenario=cfg.name))
    return records


def _sweep_scenario(cfg: ScenarioConfig, axis: str, value) -> ScenarioConfig:
    if axis == "complexity":
        return dataclasses.replace(cfg, complexity=int(value),
                                   name=f"{cfg.name}-complexity-{int(value)}")
    return dataclasses.replace(cfg, failure_intensity=float(value),
                               name=f"{cfg.name}-failure-{value}")


def _run_cell(scenario: ScenarioConfig, method: str, seed: int,
              train_cfg: TrainConfig, episodes: int, rule_cfg,
              checkpoint_path) -> tuple[list, str | None]:
    """Train (learning methods) and evaluate one sweep cell."""
    from . import training
    from .agents import make_agent, make_hrl_agents
    agents = None
    saved = None
    if method == "hrl":
        agents = make_hrl_agents(scenario, seed, train_cfg)
    elif method == "drl":
        agents = {"FlatJoint": make_agent(
            "FlatJoint", scenario, np.random.default_rng(seed), train_cfg)}
    if agents is not None:
        training.train(scenario, train_cfg, agents,
                       method=method, seed=seed)
        if checkpoint_path is not None:
            training.save_checkpoint(checkpoint_path, agents, scenario,
                                     epoch=train_cfg.epochs)
            saved = str(checkpoint_path)
    records = evaluate(scenario, method, agents=agents, episodes=episodes,
                       seed=seed, rule_cfg=rule_cfg)
    return records, saved


def _cell_worker(payload) -> tuple[str, list, str | None, str | None]:
    """One sweep cell, exception-safe so a pool worker never re-raises."""
    scenario, method, seed, train_cfg, episodes, rule_cfg, ckpt = payload
    try:
        records, saved = _run_cell(scenario, method, seed, train_cfg,
                                   episodes, rule_cfg, ckpt)
    except Exception as exc:
        return "failed", [], None, f"{type(exc).__name__}: {exc}"
    return "ok", records, saved, None


@dataclass
class SweepResult:
    records: list
    rows: list            # aggregated CSV rows
    cells: list           # manifest cell entries
    failures: int


def write_aggregate_csv(path, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_HEADER)
        for row in rows:
            w.writerow(row)


def sweep(axis: str, values, methods, seeds, cfg: ScenarioConfig,
          train_cfg: TrainConfig | None = None, out_dir=None,
          episodes: int = EVAL_EPISODES, rule_cfg=None,
          workers: int = 1) -> SweepResult:
    """Grid of (axis value, method, seed) cells; failures are recorded and
    skipped so the rest of the grid still runs.

    Cells are independent; `workers > 1` spreads them over a process pool.
    Results are assembled in grid order either way, so the output files do
    not depend on the worker count.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    values = list(values)
    if not values:
        raise ConfigError("sweep needs a non-empty value grid")
    methods = list(methods)
    if not methods or not set(methods) <= set(SWEEP_METHODS):
        raise ConfigError(f"methods must be a non-empty subset of {SWEEP_METHODS}")
    seeds = list(seeds)
    if not seeds:
        raise ConfigError("sweep needs at least one seed")
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    train_cfg = train_cfg or TrainConfig()

    grid = []
    for value in values:
        scenario = _sweep_scenario(cfg, axis, value)
        for method in methods:
            for seed in seeds:
                ckpt = None
                if out_dir is not None and method in ("hrl", "drl"):
                    ckpt = f"{out_dir}/{scenario.name}-{method}-s{seed}.ckpt"
                grid.append((scenario, method, seed, train_cfg, episodes,
                             rule_cfg, ckpt))
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_cell_worker, grid))
    else:
        outcomes = [_cell_worker(p) for p in grid]

    all_records = []
    rows = []
    cells = []
    failures = 0
    it = iter(zip(grid, outcomes))
    for value in values:
        for method in methods:
            cell_records = []
            for _seed in seeds:
                (scenario, _m, seed, *_rest), outcome = next(it)
                status, recs, saved, error = outcome
                cell = {"scenario": scenario.name, "axis": axis,
                        "value": value, "method": method, "seed": seed,
                        "status": status}
                if status == "ok":
                    cell["records"] = len(recs)
                    if saved:
                        cell["checkpoint"] = saved
                    cell_records.extend(recs)
                else:
                    failures += 1
                    cell["error"] = error
                cells.append(cell)
            if cell_records:
                scenario_name = _sweep_scenario(cfg, axis, value).name
                for metric, stats in aggregate(cell_records).items():
                    rows.append((scenario_name, axis, value, method, metric,
                                 stats["mean"], stats["std"], stats["n"]))
            all_records.extend(cell_records)

    if out_dir is not None:
        write_kpi_records(f"{out_dir}/kpis.jsonl", all_records)
        write_aggregate_csv(f"{out_dir}/aggregated.csv", rows)
        manifest = {"axis": axis, "values": values, "methods": methods,
                    "seeds": seeds, "build": build_tag(), "cells": cells}
        with open(f"{out_dir}/manifest.json", "w") as f:
            json.dump(manifest, f, indent=2)
    return SweepResult(records=all_records, rows=rows, cells=cells,
                       failures=failures)
