"""Hierarchical training loop, curriculum schedule, and checkpointing.

Two timescales: the General acts once per strategic window on a freshly
generated mission board and stores one transition per window whose reward
is the window's accumulated mixed reward; the tactical commanders act every
hour and (in train mode) take one gradient step per environment step once
their buffers hold a batch. The flat baseline acts every hour on the full
strategic observation and trains on the mixed reward at tactical cadence.

Curriculum stages shrink the world, not the networks: agents are sized for
the target scenario, small-stage observations zero-pad into the same
layout, and decoded actions are truncated to the stage world's dimensions.
"""

from __future__ import annotations

import json
import struct
import time
from dataclasses import dataclass, replace

import numpy as np

from .agents import (
    CommanderAgent,
    act,
    make_agent,
    push_transition,
    random_actions,
    random_mission_mask,
    rule_mission_mask,
    rule_policy,
    train_step,
)
from .experiments import compute_kpis, kpi_to_dict
from .mdp import (
    encode_observation,
    reward_flight,
    reward_general,
    reward_maintenance,
    reward_resource,
)
from .params import (
    ConfigError,
    ScenarioConfig,
    TrainConfig,
    scenario_fingerprint,
)
from .replay import beta_at
from .sim import (
    JointActions,
    WorldState,
    apply_mission_directive,
    build_world,
    refresh_mission_board,
    step_world,
)

METHODS = ("hrl", "drl", "rule", "random")

CHECKPOINT_MAGIC = b"FLEETLAB"
CHECKPOINT_VERSION = 1


class CheckpointError(RuntimeError):
    """Unreadable, incompatible, or mismatched checkpoint file."""


@dataclass
class EpisodeResult:
    """One episode's event log plus per-role reward totals."""

    world: WorldState
    steps: int
    windows: int
    reward_general: float
    reward_flight: float
    reward_maintenance: float
    reward_resource: float


def _entropy_key(cfg: ScenarioConfig, entropy) -> tuple:
    base = cfg.seed if entropy is None else entropy
    if isinstance(base, (int, np.integer)):
        return (int(base),)
    return tuple(int(x) for x in base)


def _check_layouts(cfg: ScenarioConfig, agents: dict) -> None:
    for role, agent in agents.items():
        lay = agent.obs_layout
        ok = (lay.n_missions >= cfg.missions_per_window
              and lay.n_aircraft >= cfg.n_aircraft
              and lay.n_bays >= cfg.n_bays
              and lay.n_classes >= cfg.n_component_classes
              and lay.n_components >= cfg.components_per_aircraft()
              and lay.n_suppliers == cfg.n_suppliers)
        if not ok:
            raise ConfigError(
                f"{role} agent layout {lay.role} cannot host scenario "
                f"{cfg.name!r}: world dimensions exceed the layout")


def run_episode(cfg: ScenarioConfig, method: str, agents: dict | None = None,
                train_mode: bool = False, entropy=None,
                rng: np.random.Generator | None = None, beta: float = 0.4,
                rule_cfg=None) -> EpisodeResult:
    """Play one full episode under the given control method.

    `entropy` (int or tuple of ints) fully determines the episode: world
    randomness and exploration randomness use separate streams derived from
    it. Returns the episode's world (with its complete event log) and the
    per-role reward sums.
    """
    if method == "flat":
        method = "drl"
    if method not in METHODS:
        raise ConfigError(f"unknown control method {method!r}")
    if method in ("hrl", "drl"):
        if not agents:
            raise ConfigError(f"method {method!r} needs agents")
        _check_layouts(cfg, agents)
    key = _entropy_key(cfg, entropy)
    world = build_world(cfg, entropy=key + (0,))
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(key + (1,)))

    if method == "hrl":
        return _run_hrl(cfg, world, agents, train_mode, rng, beta)
    if method == "drl":
        return _run_flat(cfg, world, agents["FlatJoint"], train_mode, rng, beta)
    return _run_scripted(cfg, world, method, rng, rule_cfg)


def _reward_tuple(cfg, ev):
    rcfg = cfg.rewards
    rf = reward_flight([ev], rcfg, cfg.n_aircraft)
    rm = reward_maintenance([ev], rcfg)
    rr = reward_resource([ev], rcfg)
    return rf, rm, rr, reward_general(rf, rm, rr, rcfg)


def _run_hrl(cfg, world, agents, train_mode, rng, beta) -> EpisodeResult:
    general = agents["General"]
    flight = agents["Flight"]
    maint = agents["Maintenance"]
    resrc = agents["Resource"]
    sums = [0.0, 0.0, 0.0, 0.0]
    directive = None
    win_obs = win_idx = None
    win_return = 0.0
    windows = steps = 0

    while world.clock < cfg.horizon:
        t = int(world.clock)
        if t % cfg.window == 0:
            refresh_mission_board(world, t)
            g = act(general, world, train_mode=train_mode, rng=rng)
            if train_mode and win_obs is not None:
                # Window transition: reward is the window's summed R^G and
                # the next state is this boundary's fresh-board observation.
                push_transition(general, win_obs, win_idx, win_return,
                                g.obs, False)
                train_step(general, beta, rng)
            win_obs, win_idx, win_return = g.obs, g.indices, 0.0
            apply_mission_directive(world, g.decoded)
            directive = g.decoded
            windows += 1

        f = act(flight, world, directive=directive,
                train_mode=train_mode, rng=rng)
        m = act(maint, world, directive=directive, flight_actions=f.decoded,
                train_mode=train_mode, rng=rng)
        r = act(resrc, world, directive=directive,
                maintenance_actions=m.decoded,
                train_mode=train_mode, rng=rng)
        ev = step_world(world, JointActions(
            flight=list(f.decoded[:cfg.n_aircraft]),
            maintenance=list(m.decoded[:cfg.n_bays]),
            resource=list(r.decoded[:cfg.n_component_classes])))
        steps += 1
        rf, rm, rr, rg = _reward_tuple(cfg, ev)
        for i, v in enumerate((rg, rf, rm, rr)):
            sums[i] += v
        win_return += rg

        if train_mode:
            terminal = world.clock >= cfg.horizon
            nf = encode_observation(flight.obs_layout, world,
                                    directive=directive)
            nm = encode_observation(maint.obs_layout, world,
                                    directive=directive,
                                    flight_actions=f.decoded)
            nr = encode_observation(resrc.obs_layout, world,
                                    directive=directive,
                                    maintenance_actions=m.decoded)
            push_transition(flight, f.obs, f.indices, rf, nf, terminal)
            push_transition(maint, m.obs, m.indices, rm, nm, terminal)
            push_transition(resrc, r.obs, r.indices, rr, nr, terminal)
            for agent in (flight, maint, resrc):
                train_step(agent, beta, rng)
                agent.schedule.advance()

    if train_mode:
        final_obs = encode_observation(general.obs_layout, world)
        push_transition(general, win_obs, win_idx, win_return,
                        final_obs, True)
        train_step(general, beta, rng)
        general.schedule.advance()
    return EpisodeResult(world, steps, windows, *sums)


def _run_flat(cfg, world, agent, train_mode, rng, beta) -> EpisodeResult:
    sums = [0.0, 0.0, 0.0, 0.0]
    windows = steps = 0
    while world.clock < cfg.horizon:
        t = int(world.clock)
        boundary = t % cfg.window == 0
        if boundary:
            refresh_mission_board(world, t)
            windows += 1
        res = act(agent, world, train_mode=train_mode, rng=rng)
        d = res.decoded
        if boundary:
            apply_mission_directive(world, d["general"])
        ev = step_world(world, JointActions(
            flight=list(d["flight"][:cfg.n_aircraft]),
            maintenance=list(d["maintenance"][:cfg.n_bays]),
            resource=list(d["resource"][:cfg.n_component_classes])))
        steps += 1
        rf, rm, rr, rg = _reward_tuple(cfg, ev)
        for i, v in enumerate((rg, rf, rm, rr)):
            sums[i] += v
        if train_mode:
            terminal = world.clock >= cfg.horizon
            nxt = encode_observation(agent.obs_layout, world)
            push_transition(agent, res.obs, res.indices, rg, nxt, terminal)
            train_step(agent, beta, rng)
            agent.schedule.advance()
    return EpisodeResult(world, steps, windows, *sums)


def _run_scripted(cfg, world, method, rng, rule_cfg) -> EpisodeResult:
    sums = [0.0, 0.0, 0.0, 0.0]
    windows = steps = 0
    while world.clock < cfg.horizon:
        t = int(world.clock)
        if t % cfg.window == 0:
            refresh_mission_board(world, t)
            if method == "rule":
                mask = rule_mission_mask(world, rule_cfg)
            else:
                mask = random_mission_mask(len(world.board), rng)
            apply_mission_directive(world, mask)
            windows += 1
        if method == "rule":
            actions = rule_policy(world, rule_cfg)
        else:
            actions = random_actions(world, rng)
        ev = step_world(world, actions)
        steps += 1
        rewards = _reward_tuple(cfg, ev)
        for i, v in enumerate((rewards[3], *rewards[:3])):
            sums[i] += v
    return EpisodeResult(world, steps, windows, *sums)


# ---------------------------------------------------------------------------
# Curriculum

def curriculum_scenario(epoch: int, train_cfg: TrainConfig,
                        target: ScenarioConfig) -> ScenarioConfig:
    """Stage the scenario by training progress: early epochs fly half the
    fleet on short missions with full stock, the middle phase restores the
    fleet and mission mix, the final phase is the target itself."""
    if not train_cfg.curriculum:
        return target
    frac = epoch / max(1, train_cfg.epochs)
    b1, b2 = train_cfg.curriculum_breaks
    if frac < b1:
        fleet = max(1, target.n_aircraft // 2)
        lo, hi = target.mission_aircraft
        return replace(
            target, name=f"{target.name}-stage1",
            n_aircraft=fleet,
            mission_duration=(target.mission_duration[0],
                              min(target.mission_duration[1], 5)),
            mission_aircraft=(min(lo, fleet), min(hi, fleet)),
            initial_stock=target.stock_capacity)
    if frac < b2:
        return replace(target, name=f"{target.name}-stage2",
                       initial_stock=target.stock_capacity)
    return target


# ---------------------------------------------------------------------------
# Training loop

@dataclass
class TrainResult:
    curves: dict            # role reward series, one value per epoch
    kpi_rows: list          # per-epoch KPI dicts
    wall_clock: float       # seconds, excluding checkpoint IO
    checkpoints: list
    epochs: int


CURVE_KEYS = ("R_general", "R_flight", "R_maintenance", "R_resource")


def train(scenario: ScenarioConfig, train_cfg: TrainConfig, agents: dict,
          method: str = "hrl", seed: int | None = None, out_dir=None,
          rule_cfg=None) -> TrainResult:
    """Run the full curriculum; emits per-epoch KPI rows and reward curves,
    and (given an output directory) kpis.jsonl / curves.jsonl / checkpoints."""
    if method == "flat":
        method = "drl"
    seed = scenario.seed if seed is None else seed
    train_mode = method in ("hrl", "drl")
    curves = {k: [] for k in CURVE_KEYS}
    kpi_rows = []
    checkpoints = []
    ckpt_io = 0.0
    total_steps = max(1, train_cfg.epochs * scenario.horizon)
    env_steps = 0
    t0 = time.perf_counter()

    for epoch in range(train_cfg.epochs):
        stage = curriculum_scenario(epoch, train_cfg, scenario)
        beta = beta_at(env_steps, total_steps, train_cfg.per_beta0)
        result = run_episode(stage, method, agents=agents,
                             train_mode=train_mode, entropy=(seed, epoch),
                             beta=beta, rule_cfg=rule_cfg)
        env_steps += result.steps
        for key, value in zip(CURVE_KEYS, (result.reward_general,
                                           result.reward_flight,
                                           result.reward_maintenance,
                                           result.reward_resource)):
            curves[key].append(value)
        kpi = compute_kpis(result.world.events, stage, seed=seed,
                           scenario=stage.name)
        kpi_rows.append({"epoch": epoch, **kpi_to_dict(kpi)})
        if (out_dir is not None and train_cfg.checkpoint_every
                and (epoch + 1) % train_cfg.checkpoint_every == 0):
            tio = time.perf_counter()
            path = f"{out_dir}/checkpoint-{epoch + 1:05d}.ckpt"
            save_checkpoint(path, agents, scenario, epoch=epoch + 1)
            checkpoints.append(path)
            ckpt_io += time.perf_counter() - tio

    wall = time.perf_counter() - t0 - ckpt_io
    if out_dir is not None:
        with open(f"{out_dir}/kpis.jsonl", "w") as f:
            for row in kpi_rows:
                f.write(json.dumps(row) + "\n")
        with open(f"{out_dir}/curves.jsonl", "w") as f:
            for i in range(len(curves["R_general"])):
                f.write(json.dumps({"epoch": i, **{
                    k: curves[k][i] for k in CURVE_KEYS}}) + "\n")
        if agents:
            tio = time.perf_counter()
            path = f"{out_dir}/final.ckpt"
            save_checkpoint(path, agents, scenario, epoch=train_cfg.epochs)
            checkpoints.append(path)
            ckpt_io += time.perf_counter() - tio
    return TrainResult(curves=curves, kpi_rows=kpi_rows, wall_clock=wall,
                       checkpoints=checkpoints, epochs=train_cfg.epochs)


# ---------------------------------------------------------------------------
# Checkpoints: 8-byte magic, little-endian uint32 header length, JSON header
# describing every array (name, shape), then the arrays as little-endian
# float64 in header order.

def _agent_arrays(agent: CommanderAgent) -> list[tuple[str, np.ndarray]]:
    out = []
    for key in sorted(agent.policy.params):
        out.append((f"policy/params/{key}", agent.policy.params[key]))
        out.append((f"policy/m/{key}", agent.policy.m[key]))
        out.append((f"policy/v/{key}", agent.policy.v[key]))
    for key in sorted(agent.target.params):
        out.append((f"target/params/{key}", agent.target.params[key]))
    return out


def save_checkpoint(path, agents: dict, scenario: ScenarioConfig,
                    epoch: int = 0, rng_states: dict | None = None) -> None:
    header_agents = {}
    blob_parts = []
    for role in sorted(agents):
        agent = agents[role]
        arrays = _agent_arrays(agent)
        header_agents[role] = {
            "layer_sizes": list(agent.policy.sizes),
            "arrays": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
            "step_count": agent.policy.step_count,
            "grad_steps": agent.grad_steps,
            "schedule": {"eps_start": agent.schedule.eps_start,
                         "eps_min": agent.schedule.eps_min,
                         "decay": agent.schedule.decay,
                         "step": agent.schedule.step},
            "hyper": {"batch": agent.batch_size, "lr": agent.lr,
                      "gamma": agent.gamma, "tau": agent.tau},
        }
        blob_parts.extend(np.ascontiguousarray(a, dtype="<f8").tobytes()
                          for _n, a in arrays)
    header = {
        "format": "fleetlab-checkpoint",
        "version": CHECKPOINT_VERSION,
        "byte_order": "little",
        "fingerprint": scenario_fingerprint(scenario),
        "scenario_name": scenario.name,
        "epoch": epoch,
        "rng_states": rng_states or {},
        "agents": header_agents,
    }
    head = json.dumps(header).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", len(head)))
        f.write(head)
        for part in blob_parts:
            f.write(part)


def load_checkpoint(path, scenario: ScenarioConfig | None = None) -> dict:
    """Read a checkpoint into {meta..., agents: {role: {..., arrays: {}}}}.

    When `scenario` is given, its fingerprint must match the one stored at
    save time; otherwise the load is refused.
    """
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(raw) < len(CHECKPOINT_MAGIC) + 4 \
            or raw[:len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path} is not a fleetlab checkpoint "
                              "(bad magic)")
    off = len(CHECKPOINT_MAGIC)
    (head_len,) = struct.unpack_from("<I", raw, off)
    off += 4
    try:
        header = json.loads(raw[off:off + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupted header ({exc})") from exc
    off += head_len
    version = header.get("version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: checkpoint format version {version} is not supported; "
            f"this build reads version {CHECKPOINT_VERSION}. Re-save the "
            "checkpoint with a matching build or retrain.")
    if scenario is not None:
        want = scenario_fingerprint(scenario)
        got = header.get("fingerprint")
        if got != want:
            raise CheckpointError(
                f"{path}: saved for scenario fingerprint {got} "
                f"({header.get('scenario_name')!r}) but the requested "
                f"scenario has fingerprint {want}. Evaluate with the "
                "matching scenario config or retrain for this one.")
    out = {k: header[k] for k in ("version", "fingerprint", "scenario_name",
                                  "epoch", "rng_states")}
    out["agents"] = {}
    for role, meta in header["agents"].items():
        arrays = {}
        for spec in meta["arrays"]:
            shape = tuple(spec["shape"])
            size = int(np.prod(shape, dtype=np.int64)) * 8
            if off + size > len(raw):
                raise CheckpointError(f"{path}: truncated array blob at "
                                      f"{spec['name']}")
            arrays[spec["name"]] = np.frombuffer(
                raw[off:off + size], dtype="<f8").reshape(shape).copy()
            off += size
        out["agents"][role] = {**{k: meta[k] for k in
                                  ("layer_sizes", "step_count", "grad_steps",
                                   "schedule", "hyper")},
                               "arrays": arrays}
    if off != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - off} trailing bytes "
                              "after the declared arrays")
    return out


def restore_agents(ckpt: dict, agents: dict) -> None:
    """Load checkpoint arrays and counters into existing agents in place."""
    for role, agent in agents.items():
        if role not in ckpt["agents"]:
            raise CheckpointError(f"checkpoint has no agent for role {role!r}")
        saved = ckpt["agents"][role]
        for name, arr in saved["arrays"].items():
            kind, group, key = name.split("/")
            net = agent.policy if kind == "policy" else agent.target
            store = {"params": net.params, "m": net.m, "v": net.v}[group]
            if store[key].shape != arr.shape:
                raise CheckpointError(
                    f"{role} {name}: shape {arr.shape} does not match the "
                    f"agent's {store[key].shape}")
            store[key][...] = arr
        agent.policy.step_count = saved["step_count"]
        agent.policy.version += 1
        agent.target.version += 1
        agent.grad_steps = saved["grad_steps"]
        sched = saved["schedule"]
        agent.schedule.eps_start = sched["eps_start"]
        agent.schedule.eps_min = sched["eps_min"]
        agent.schedule.decay = sched["decay"]
        agent.schedule.step = sched["step"]


def agents_from_checkpoint(ckpt: dict, scenario: ScenarioConfig,
                           train_cfg: TrainConfig | None = None) -> dict:
    """Rebuild fresh agents for the checkpoint's roles and restore into them."""
    agents = {role: make_agent(role, scenario, np.random.default_rng(0),
                               train_cfg)
              for role in ckpt["agents"]}
    restore_agents(ckpt, agents)
    return agents
