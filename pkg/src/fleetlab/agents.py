"""The four hierarchical commanders plus both baselines.

A CommanderAgent bundles everything one role needs: observation and segment
layouts, policy/target networks, a prioritized replay buffer, an exploration
schedule, and the role's hyperparameters. The rule-based baseline acts on
the same observable world quantities without any learning; the flat
baseline runs one monolithic network over the full strategic feature set
and the concatenation of all four action heads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mdp import (
    ObservationLayout,
    SegmentLayout,
    decode_action,
    encode_observation,
    observation_layout,
    segment_layout,
)
from .nn import QNetwork, backward_and_step, forward, forward_batch, huber
from .params import ConfigError, ScenarioConfig, TrainConfig
from .replay import (
    ExplorationSchedule,
    ReplayBuffer,
    Transition,
    double_dqn_target,
    select_action,
    soft_update,
)
from .sim import DOWN, STANDBY, JointActions, WorldState

TACTICAL_ROLES = ("Flight", "Maintenance", "Resource")
HRL_ROLES = ("General",) + TACTICAL_ROLES

_TACTICAL = dict(hidden=(128, 128), batch=128, lr=1e-3, gamma=0.95,
                 tau=0.005, buffer=1_000_000)

# Per-role network widths and training constants; the flat baseline borrows
# the General's optimizer settings with a larger body to cover the joint
# action space.
ROLE_HYPERPARAMS = {
    "General": dict(hidden=(256, 256), batch=64, lr=1e-4, gamma=0.99,
                    tau=0.001, buffer=100_000),
    "Flight": dict(_TACTICAL),
    "Maintenance": dict(_TACTICAL),
    "Resource": dict(_TACTICAL),
    "FlatJoint": dict(hidden=(512, 512), batch=64, lr=1e-4, gamma=0.99,
                      tau=0.001, buffer=100_000),
}


@dataclass
class CommanderAgent:
    """One role's networks, buffer, schedule, and hyperparameters."""

    role: str
    obs_layout: ObservationLayout
    seg_layout: SegmentLayout
    policy: QNetwork
    target: QNetwork
    buffer: ReplayBuffer
    schedule: ExplorationSchedule = field(default_factory=ExplorationSchedule)
    batch_size: int = 64
    lr: float = 1e-4
    gamma: float = 0.99
    tau: float = 0.001
    grad_steps: int = 0

    def epsilon(self) -> float:
        return self.schedule.value()


def make_agent(role: str, cfg: ScenarioConfig, rng: np.random.Generator,
               train_cfg: TrainConfig | None = None) -> CommanderAgent:
    """Build a fresh agent with the role's table hyperparameters."""
    if role not in ROLE_HYPERPARAMS:
        raise ConfigError(f"unknown commander role {role!r}")
    hp = ROLE_HYPERPARAMS[role]
    tc = train_cfg or TrainConfig()
    obs = observation_layout(role, cfg)
    seg = segment_layout(role, cfg)
    policy = QNetwork([obs.dim, *hp["hidden"], seg.total], rng)
    return CommanderAgent(
        role=role, obs_layout=obs, seg_layout=seg,
        policy=policy, target=policy.clone(),
        buffer=ReplayBuffer(hp["buffer"], alpha=tc.per_alpha,
                            epsilon=tc.per_epsilon),
        schedule=ExplorationSchedule(eps_start=tc.eps_start,
                                     eps_min=tc.eps_min, decay=tc.eps_decay),
        batch_size=hp["batch"], lr=hp["lr"], gamma=hp["gamma"], tau=hp["tau"],
    )


def make_hrl_agents(cfg: ScenarioConfig, seed: int,
                    train_cfg: TrainConfig | None = None,
                    ) -> dict[str, CommanderAgent]:
    """One agent per hierarchy role, each on its own RNG stream."""
    streams = np.random.SeedSequence(seed).spawn(len(HRL_ROLES))
    return {role: make_agent(role, cfg, np.random.default_rng(ss), train_cfg)
            for role, ss in zip(HRL_ROLES, streams)}


def flat_joint_layout(cfg: ScenarioConfig) -> tuple[ObservationLayout, SegmentLayout]:
    """Full strategic feature set paired with all four heads concatenated."""
    return observation_layout("FlatJoint", cfg), segment_layout("FlatJoint", cfg)


@dataclass
class ActResult:
    decoded: object          # role-shaped action (list or dict for FlatJoint)
    indices: list[int]       # per-segment indices, as pushed to replay
    obs: np.ndarray


def act(agent: CommanderAgent, world: WorldState,
        directive=None, flight_actions=None, maintenance_actions=None,
        train_mode: bool = False,
        rng: np.random.Generator | None = None) -> ActResult:
    """Encode, forward, epsilon-greedy select (only in train mode), decode."""
    obs = encode_observation(agent.obs_layout, world, directive=directive,
                             flight_actions=flight_actions,
                             maintenance_actions=maintenance_actions)
    q = forward(agent.policy, obs)
    if train_mode:
        if rng is None:
            raise ValueError("train-mode action selection needs an rng")
        eps = agent.epsilon()
    else:
        eps = 0.0
    indices = select_action(q, agent.seg_layout, eps,
                            rng if rng is not None else np.random.default_rng(0))
    return ActResult(decoded=decode_action(agent.seg_layout, indices),
                     indices=indices, obs=obs)


def train_step(agent: CommanderAgent, beta: float,
               rng: np.random.Generator) -> dict | None:
    """One PER + Double-DQN gradient step; None while the buffer warms up.

    The TD residual is scalar per transition: the sum of the acted cells'
    Q-values against the segmented target. Sampled priorities are refreshed
    from the new |residual| and the target net is soft-updated.
    """
    if not agent.buffer.ready(agent.batch_size):
        return None
    batch, idx, weights = agent.buffer.sample(agent.batch_size, beta, rng)
    obs = np.stack([t.obs for t in batch])
    nxt = np.stack([t.next_obs for t in batch])
    rews = np.array([t.reward for t in batch])
    terms = np.array([t.terminal for t in batch])
    y = double_dqn_target(rews, nxt, terms, agent.policy, agent.target,
                          agent.gamma, agent.seg_layout)
    q, cache = forward_batch(agent.policy, obs)
    rows = np.arange(len(batch))
    q_pred = np.zeros(len(batch))
    acted_cells = []
    for k, (offset, _w) in enumerate(agent.seg_layout.segments()):
        cells = offset + np.array([t.actions[k] for t in batch])
        q_pred += q[rows, cells]
        acted_cells.append(cells)
    delta = q_pred - y
    loss, dloss = huber(delta)
    grads_at_out = np.zeros_like(q)
    for cells in acted_cells:
        grads_at_out[rows, cells] += dloss
    report = backward_and_step(agent.policy, cache, grads_at_out, weights,
                               agent.lr)
    agent.buffer.update_priorities(idx, np.abs(delta))
    soft_update(agent.target, agent.policy, agent.tau)
    agent.grad_steps += 1
    report["loss"] = float(np.mean(weights * loss))
    report["mean_abs_delta"] = float(np.mean(np.abs(delta)))
    return report


def push_transition(agent: CommanderAgent, obs, indices, reward, next_obs,
                    terminal: bool) -> None:
    agent.buffer.push(Transition(obs=obs, actions=list(indices),
                                 reward=float(reward), next_obs=next_obs,
                                 terminal=bool(terminal)))


# ---------------------------------------------------------------------------
# Rule-based baseline

@dataclass(frozen=True)
class RulePolicyConfig:
    """Thresholds of the heuristic baseline."""

    maintenance_threshold: float = 0.2   # send when min observed life below
    reorder_point: float = 0.3           # of capacity, on inventory position

    def __post_init__(self):
        if not 0.0 < self.maintenance_threshold < 1.0:
            raise ConfigError("maintenance_threshold must be in (0, 1)")
        if not 0.0 < self.reorder_point < 1.0:
            raise ConfigError("reorder_point must be in (0, 1)")


def _observed_min_life(ac) -> float:
    return min(c.observed_health for c in ac.components)


def _needs_shop(ac, clock: float, threshold: float) -> bool:
    return ac.has_visible_fault(clock) or _observed_min_life(ac) < threshold


def _healthy_standby_ids(world: WorldState, cfg: RulePolicyConfig) -> list[int]:
    """Standby aircraft without visible faults, above the shop threshold,
    healthiest (max min-life) first."""
    ok = [ac for ac in world.fleet
          if ac.status == STANDBY
          and not _needs_shop(ac, world.clock, cfg.maintenance_threshold)]
    ok.sort(key=lambda ac: (-_observed_min_life(ac), ac.id))
    return [ac.id for ac in ok]


def rule_mission_mask(world: WorldState,
                      cfg: RulePolicyConfig | None = None) -> list[int]:
    """Accept a candidate iff enough healthy standby aircraft exist."""
    cfg = cfg or RulePolicyConfig()
    pool = len(_healthy_standby_ids(world, cfg))
    return [1 if m.nr <= pool else 0 for m in world.board]


def rule_policy(world: WorldState,
                cfg: RulePolicyConfig | None = None) -> JointActions:
    """Heuristic tactical step: crew launching missions healthiest-first,
    send degraded or visibly failed aircraft to the shop, open idle bays
    while work is waiting, and reorder to capacity from the mid supplier
    when the inventory position falls below the reorder point."""
    cfg = cfg or RulePolicyConfig()
    scfg = world.cfg
    flight = [0] * scfg.n_aircraft

    for ac in world.fleet:
        if ac.status in (STANDBY, DOWN) and _needs_shop(
                ac, world.clock, cfg.maintenance_threshold):
            flight[ac.id] = -1

    available = _healthy_standby_ids(world, cfg)
    launching = sorted((m for m in world.board
                        if m.status == "accepted" and m.ts == world.clock),
                       key=lambda m: m.id)
    for m in launching:
        if len(available) < m.nr:
            continue
        crew, available = available[:m.nr], available[m.nr:]
        for i in crew:
            flight[i] = 1

    new_requests = sum(1 for ac in world.fleet
                       if flight[ac.id] == -1 and ac.id not in world.queue)
    waiting = len(world.queue) + new_requests
    maintenance = []
    for bay in world.bays:
        if not bay.busy and waiting > 0:
            maintenance.append(1)
            waiting -= 1
        else:
            maintenance.append(0)

    mid = (scfg.n_suppliers + 1) // 2
    resource = []
    for j in range(scfg.n_component_classes):
        position = world.inventory.stocks[j] + world.inventory.pending_qty(j)
        if position < cfg.reorder_point * scfg.stock_capacity:
            qty = min(scfg.stock_capacity - position, scfg.max_order_qty)
            resource.append((1, mid, int(qty)))
        else:
            resource.append((0, 1, 0))
    return JointActions(flight=flight, maintenance=maintenance,
                        resource=resource)


# ---------------------------------------------------------------------------
# Random baseline

def random_mission_mask(n_candidates: int, rng: np.random.Generator) -> list[int]:
    return [int(rng.integers(0, 2)) for _ in range(n_candidates)]


def random_actions(world: WorldState, rng: np.random.Generator) -> JointActions:
    """Uniform legal joint action (the untrained-policy reference)."""
    cfg = world.cfg
    flight = [int(rng.integers(-1, 2)) for _ in range(cfg.n_aircraft)]
    maintenance = [int(rng.integers(0, 2)) for _ in range(cfg.n_bays)]
    resource = []
    for _ in range(cfg.n_component_classes):
        if rng.integers(0, 2):
            resource.append((1, int(rng.integers(1, cfg.n_suppliers + 1)),
                             int(rng.integers(0, cfg.max_order_qty + 1))))
        else:
            resource.append((0, 1, 0))
    return JointActions(flight=flight, maintenance=maintenance,
                        resource=resource)
