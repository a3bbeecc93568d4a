"""Discrete-event fleet simulator.

Hour-stepped world holding aircraft with degrading components, a mission
board refreshed each strategic window, maintenance bays fed by a FIFO queue,
and a spare-part inventory supplied by a small supplier catalog.

Step pipeline (one call to step_world, clock t -> t+1):
  1. place procurement orders, enqueue maintenance requests, activate bays,
     launch missions whose start time is t
  2. advance the clock; apply order arrivals
  3. degrade flying aircraft one flight hour; abrupt faults may fail sorties
     (first sortie failure fails the mission; surviving sorties fly on)
  4. resolve missions whose end time is reached
  5. complete repairs (each consumes one spare; zero stock blocks the bay)
  6. update fault visibility and prognostic flags; accrue holding cost

Every cost or reward-relevant fact is appended to the world's event list as
a plain dict, so ledgers and KPIs can be recomputed from the log alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import ComponentClassParams, ScenarioConfig

# Aircraft status codes (index doubles as the one-hot position in observations)
ON_MISSION, STANDBY, IN_MAINTENANCE, DOWN = 0, 1, 2, 3
STATUS_NAMES = ("on_mission", "standby", "in_maintenance", "down")

READY_STATUSES = (ON_MISSION, STANDBY)

# Health at or below this threshold counts as failed (absorbs float wear error)
FAIL_EPS = 1e-9


class EpisodeFinished(RuntimeError):
    """Raised when step_world is called at or past the horizon."""


@dataclass
class ComponentState:
    class_index: int
    health: float = 1.0
    observed_health: float = 1.0
    failed: bool = False
    fault_time: float | None = None
    fault_visible_at: float | None = None
    predicted_failure: bool = False


@dataclass
class AircraftState:
    id: int
    components: list[ComponentState]
    status: int = STANDBY
    assigned_mission: int | None = None

    def min_health(self) -> float:
        return min(c.health for c in self.components)

    def has_failed_component(self) -> bool:
        return any(c.failed for c in self.components)

    def has_visible_fault(self, clock: float) -> bool:
        return any(c.failed and c.fault_visible_at is not None
                   and c.fault_visible_at <= clock for c in self.components)


@dataclass
class MissionSpec:
    id: int
    ts: int            # start hour
    te: int            # end hour, exclusive of flying
    nr: int            # sorties required
    reward: float      # k$ on success
    status: str = "candidate"
    assigned: list[int] = field(default_factory=list)

    @property
    def duration(self) -> int:
        return self.te - self.ts


@dataclass
class MaintenanceBay:
    id: int
    busy: bool = False
    aircraft: int | None = None
    comp_index: int | None = None
    finish_time: float | None = None
    job_cost: float = 0.0
    job_hours: float = 0.0
    blocked: bool = False


@dataclass
class PendingOrder:
    arrive_at: float
    class_index: int
    qty: int
    unit_price: float


@dataclass
class InventoryState:
    stocks: list[int]
    capacity: int
    holding_costs: list[float]   # k$ per unit per hour, by class
    pending: list[PendingOrder] = field(default_factory=list)

    def pending_qty(self, class_index: int) -> int:
        return sum(o.qty for o in self.pending if o.class_index == class_index)

    def holding_base(self) -> float:
        """Current holding cost per hour across all classes."""
        return sum(s * c for s, c in zip(self.stocks, self.holding_costs))

    def apply_arrivals(self, clock: float) -> list[dict]:
        """Receive all orders due by `clock`; overflow above capacity is
        discarded and priced as virtual procurement."""
        due = [o for o in self.pending if o.arrive_at <= clock]
        self.pending = [o for o in self.pending if o.arrive_at > clock]
        out = []
        for o in due:
            room = self.capacity - self.stocks[o.class_index]
            applied = min(o.qty, room)
            overflow = o.qty - applied
            self.stocks[o.class_index] += applied
            out.append({"cls": o.class_index, "qty": o.qty, "applied": applied,
                        "overflow": overflow,
                        "virtual_cost": overflow * o.unit_price})
        return out


def update_inventory(inv: InventoryState, demand: list[int], clock: float) -> dict:
    """One inventory bookkeeping pass: arrivals due by `clock`, then demand,
    then holding accrual. Returns what happened.

    Demand beyond stock is reported as unsatisfied, never driving stock
    negative.
    """
    if len(demand) != len(inv.stocks):
        raise ValueError("demand vector length must match class count")
    if any(d < 0 for d in demand):
        raise ValueError("demand must be non-negative")
    arrivals = inv.apply_arrivals(clock)
    satisfied, unsatisfied = [], []
    for j, d in enumerate(demand):
        got = min(d, inv.stocks[j])
        inv.stocks[j] -= got
        satisfied.append(got)
        unsatisfied.append(d - got)
    holding = inv.holding_base()
    return {"arrivals": arrivals, "satisfied": satisfied,
            "unsatisfied": unsatisfied, "holding": holding}


@dataclass
class JointActions:
    """Per-step tactical actions (the strategic mission mask is applied at
    window boundaries via apply_mission_directive)."""

    flight: list[int]                      # per aircraft: -1 repair, 0 stand by, 1 fly
    maintenance: list[int]                 # per bay: 0 hold, 1 activate
    resource: list[tuple[int, int, int]]   # per class: (order?, supplier 1-based, qty)


@dataclass
class StepEvents:
    """Summary of one step, sufficient to compute every per-step reward."""

    step: int
    availability: int = 0
    mission_signed_reward: float = 0.0     # +reward on success, -mult*reward on failure
    missions_succeeded: list[int] = field(default_factory=list)
    missions_failed: list[int] = field(default_factory=list)
    jobs_started: list[tuple[float, float]] = field(default_factory=list)  # (cost, hours)
    orders: list[tuple[int, int, int, float, float]] = field(default_factory=list)
    # orders: (class, supplier, qty, unit_price, lead_time)
    holding_base: float = 0.0
    stockouts: list[int] = field(default_factory=list)
    sorties_launched: int = 0
    sorties_failed: int = 0
    sorties_completed: int = 0
    repairs_completed: list[tuple[int, int]] = field(default_factory=list)


@dataclass
class WorldState:
    cfg: ScenarioConfig
    classes: tuple[ComponentClassParams, ...]
    clock: int
    fleet: list[AircraftState]
    bays: list[MaintenanceBay]
    inventory: InventoryState
    board: list[MissionSpec]
    missions: dict[int, MissionSpec]
    queue: list[int]                      # aircraft ids awaiting a bay, FIFO
    mission_counter: int
    rng_shock: np.random.Generator
    rng_repair: np.random.Generator
    rng_mission: np.random.Generator
    ledger: dict[str, float] = field(default_factory=lambda: {
        "maintenance": 0.0, "procurement": 0.0, "inventory": 0.0,
        "penalty": 0.0, "virtual": 0.0})
    revenue: float = 0.0
    events: list[dict] = field(default_factory=list)

    def log(self, kind: str, **payload):
        self.events.append({"t": self.clock, "kind": kind, **payload})

    def ready_count(self) -> int:
        return sum(1 for a in self.fleet if a.status in READY_STATUSES)


def build_world(cfg: ScenarioConfig, entropy=None) -> WorldState:
    """Create a fresh world at clock 0.

    `entropy` overrides the scenario seed (e.g. per-episode seeding); it may
    be an int or a sequence of ints.
    """
    root = np.random.SeedSequence(cfg.seed if entropy is None else entropy)
    shock_ss, repair_ss, mission_ss = root.spawn(3)
    classes = cfg.component_classes()
    fleet = []
    for i in range(cfg.n_aircraft):
        comps = [ComponentState(class_index=j % cfg.n_component_classes)
                 for j in range(cfg.components_per_aircraft())]
        fleet.append(AircraftState(id=i, components=comps))
    bays = [MaintenanceBay(id=i) for i in range(cfg.n_bays)]
    inventory = InventoryState(
        stocks=[cfg.initial_stock] * cfg.n_component_classes,
        capacity=cfg.stock_capacity,
        holding_costs=[cfg.holding_cost(j) for j in range(cfg.n_component_classes)],
    )
    return WorldState(
        cfg=cfg, classes=classes, clock=0, fleet=fleet, bays=bays,
        inventory=inventory, board=[], missions={}, queue=[],
        mission_counter=0,
        rng_shock=np.random.default_rng(shock_ss),
        rng_repair=np.random.default_rng(repair_ss),
        rng_mission=np.random.default_rng(mission_ss),
    )


# ---------------------------------------------------------------------------
# Component degradation

def degrade_component(comp: ComponentState, params: ComponentClassParams,
                      flight_hours: float, rng: np.random.Generator,
                      shock_mode: str = "expected") -> None:
    """Apply one interval of flight wear plus the abrupt-shock draw.

    Deterministic wear consumes flight_hours / mfhbf of health. In the
    default "expected" mode each flight hour additionally suffers, with
    probability failure_prob, an abrupt shock worth one extra hour of wear,
    so expected life is mfhbf / (1 + failure_prob). The "literal" mode kills
    the component outright with probability failure_prob per flight hour;
    "off" disables shocks entirely (life becomes exactly ceil(mfhbf) hours
    of continuous flying).
    """
    if comp.failed:
        return
    if flight_hours < 0:
        raise ValueError("flight_hours must be non-negative")
    wear = flight_hours / params.mfhbf
    hours = int(round(flight_hours))
    if shock_mode == "expected":
        for _ in range(hours):
            if params.failure_prob > 0 and rng.random() < params.failure_prob:
                wear += 1.0 / params.mfhbf
    elif shock_mode == "literal":
        for _ in range(hours):
            if params.failure_prob > 0 and rng.random() < params.failure_prob:
                comp.health = 0.0
                break
    elif shock_mode != "off":
        raise ValueError(f"unknown shock mode {shock_mode!r}")
    comp.health = max(0.0, comp.health - wear)
    if comp.health <= FAIL_EPS:
        comp.health = 0.0


# ---------------------------------------------------------------------------
# Repairs

def sample_repair(params: ComponentClassParams, labor_rate: float,
                  sigma_frac: float, rng: np.random.Generator) -> tuple[float, float]:
    """Draw repair duration and cost for one component.

    Duration is normal around the class mean with std sigma_frac * mean,
    truncated below at one hour; cost is labor_rate * hours + parts cost.
    """
    mean = params.repair_time_mean
    if sigma_frac <= 0:
        hours = mean
    else:
        hours = max(1.0, rng.normal(mean, sigma_frac * mean))
    cost = labor_rate * hours + params.repair_cost
    return hours, cost


# ---------------------------------------------------------------------------
# Mission generation

def generate_missions(cfg: ScenarioConfig, window_start: int,
                      rng: np.random.Generator, start_id: int = 0) -> list[MissionSpec]:
    """Draw the candidate set for one strategic window.

    Start hour is uniform in the window and duration uniform in the
    configured range, re-drawn together until the mission ends within the
    horizon. Reward is rate * aircraft * hours, rounded to 0.1 k$.
    """
    if window_start >= cfg.horizon:
        return []
    dur_lo, dur_hi = cfg.mission_duration
    nr_lo, nr_hi = cfg.mission_aircraft
    out = []
    for k in range(cfg.missions_per_window):
        ts = te = None
        for _ in range(10_000):
            ts_try = window_start + int(rng.integers(0, cfg.window))
            dur = int(rng.integers(dur_lo, dur_hi + 1))
            if ts_try + dur <= cfg.horizon:
                ts, te = ts_try, ts_try + dur
                break
        if ts is None:   # window too close to the horizon for any duration
            continue
        nr = int(rng.integers(nr_lo, nr_hi + 1))
        reward = round(cfg.mission_reward_rate * nr * (te - ts), 1)
        out.append(MissionSpec(id=start_id + k, ts=ts, te=te, nr=nr, reward=reward))
    return out


def refresh_mission_board(world: WorldState, window_start: int) -> list[MissionSpec]:
    """Replace the board with a fresh candidate set for the window."""
    candidates = generate_missions(world.cfg, window_start, world.rng_mission,
                                   start_id=world.mission_counter)
    world.mission_counter += len(candidates)
    world.board = candidates
    for m in candidates:
        world.missions[m.id] = m
    world.log("missions_generated", window=window_start,
              missions=[{"mission": m.id, "ts": m.ts, "te": m.te,
                         "nr": m.nr, "reward": m.reward} for m in candidates])
    return candidates


def apply_mission_directive(world: WorldState, mask: list[int]) -> None:
    """Accept or reject each candidate on the board (1 accept, 0 reject)."""
    if len(mask) < len(world.board):
        raise ValueError("directive mask shorter than the mission board")
    for m, bit in zip(world.board, mask):
        if m.status != "candidate":
            continue
        if bit:
            m.status = "accepted"
            world.log("mission_accepted", mission=m.id)
        else:
            m.status = "rejected"
            world.log("mission_rejected", mission=m.id)


# ---------------------------------------------------------------------------
# World stepping

def _fail_mission(world: WorldState, ev: StepEvents, mission: MissionSpec, reason: str):
    mission.status = "failed"
    penalty = world.cfg.rewards.failure_penalty_mult * mission.reward
    world.ledger["penalty"] += penalty
    ev.missions_failed.append(mission.id)
    ev.mission_signed_reward -= penalty
    world.log("mission_failed", mission=mission.id, reason=reason, penalty=penalty)


def _start_repair(world: WorldState, ev: StepEvents, bay: MaintenanceBay, aircraft_id: int):
    ac = world.fleet[aircraft_id]
    failed = [i for i, c in enumerate(ac.components) if c.failed]
    if failed:
        comp_index = failed[0]
    else:
        comp_index = min(range(len(ac.components)),
                         key=lambda i: (ac.components[i].health, i))
    params = world.classes[ac.components[comp_index].class_index]
    hours, cost = sample_repair(params, world.cfg.labor_rate,
                                world.cfg.repair_sigma_frac, world.rng_repair)
    bay.busy = True
    bay.aircraft = aircraft_id
    bay.comp_index = comp_index
    bay.finish_time = world.clock + hours
    bay.job_cost = cost
    bay.job_hours = hours
    bay.blocked = False
    ac.status = IN_MAINTENANCE
    world.ledger["maintenance"] += cost
    ev.jobs_started.append((cost, hours))
    world.log("repair_started", bay=bay.id, aircraft=aircraft_id,
              component=comp_index, hours=hours, cost=cost)


def step_world(world: WorldState, actions: JointActions) -> StepEvents:
    """Advance the world one hour under the given tactical actions."""
    cfg = world.cfg
    if world.clock >= cfg.horizon:
        raise EpisodeFinished(f"episode already at horizon {cfg.horizon}")
    if len(actions.flight) != cfg.n_aircraft:
        raise ValueError("flight action length != fleet size")
    if len(actions.maintenance) != cfg.n_bays:
        raise ValueError("maintenance action length != bay count")
    if len(actions.resource) != cfg.n_component_classes:
        raise ValueError("resource action length != class count")

    t = world.clock
    ev = StepEvents(step=t + 1)

    # -- procurement orders
    for j, (a_o, a_s, a_q) in enumerate(actions.resource):
        if not a_o:
            continue
        if not 1 <= a_s <= cfg.n_suppliers:
            raise ValueError(f"supplier index {a_s} out of range")
        if not 0 <= a_q <= cfg.max_order_qty:
            raise ValueError(f"order quantity {a_q} out of range")
        price = cfg.unit_price(j, a_s)
        lead = cfg.supplier_lead_times[a_s - 1]
        ev.orders.append((j, a_s, a_q, price, lead))
        if a_q > 0:
            cost = a_q * price
            world.ledger["procurement"] += cost
            world.inventory.pending.append(PendingOrder(
                arrive_at=t + lead, class_index=j, qty=a_q, unit_price=price))
            world.log("order_placed", cls=j, supplier=a_s, qty=a_q,
                      unit_price=price, cost=cost, arrive_at=t + lead)

    # -- maintenance requests (aircraft must be idle and diagnosable)
    for i, af in enumerate(actions.flight):
        if af != -1:
            continue
        ac = world.fleet[i]
        if i in world.queue or ac.status == IN_MAINTENANCE:
            continue
        if ac.status == STANDBY or (ac.status == DOWN and ac.has_visible_fault(t)):
            world.queue.append(i)
            world.log("enqueue", aircraft=i)

    # -- bay activations pull the queue head
    for bay, am in zip(world.bays, actions.maintenance):
        if am and not bay.busy and world.queue:
            _start_repair(world, ev, bay, world.queue.pop(0))

    # -- mission launches at ts == t
    launching = [m for m in world.board if m.status == "accepted" and m.ts == t]
    willing = [i for i, af in enumerate(actions.flight)
               if af == 1 and world.fleet[i].status == STANDBY]
    for m in sorted(launching, key=lambda m: m.id):
        if len(willing) < m.nr:
            _fail_mission(world, ev, m, "under_assignment")
            continue
        crew, willing = willing[: m.nr], willing[m.nr:]
        for i in crew:
            ac = world.fleet[i]
            ac.status = ON_MISSION
            ac.assigned_mission = m.id
            if i in world.queue:
                world.queue.remove(i)
        m.status = "running"
        m.assigned = list(crew)
        ev.sorties_launched += m.nr
        world.log("mission_launched", mission=m.id, aircraft=crew)

    # -- time advances
    world.clock = t + 1
    clock = world.clock

    # -- arrivals land before repairs retry, so a blocked bay can clear now
    for arr in world.inventory.apply_arrivals(clock):
        world.ledger["virtual"] += arr["virtual_cost"]
        world.log("arrival", **arr)

    # -- flight wear and abrupt faults
    for ac in world.fleet:
        if ac.status != ON_MISSION:
            continue
        newly_failed = False
        for ci, comp in enumerate(ac.components):
            was_failed = comp.failed
            degrade_component(comp, world.classes[comp.class_index], cfg.dt,
                              world.rng_shock, cfg.shock_mode)
            if comp.health <= FAIL_EPS and not was_failed:
                comp.failed = True
                comp.health = 0.0
                params = world.classes[comp.class_index]
                comp.fault_time = clock
                comp.fault_visible_at = clock + params.detection_delay
                newly_failed = True
                world.log("fault", aircraft=ac.id, component=ci,
                          visible_at=comp.fault_visible_at)
            elif not comp.failed:
                comp.observed_health = comp.health
        if newly_failed:
            mission = world.missions[ac.assigned_mission]
            mission.assigned.remove(ac.id)
            ac.status = DOWN
            ac.assigned_mission = None
            ev.sorties_failed += 1
            world.log("sortie_failed", mission=mission.id, aircraft=ac.id)
            if mission.status == "running":
                _fail_mission(world, ev, mission, "in_flight_failure")

    # -- mission resolution at te (failed missions still release survivors)
    for m in world.missions.values():
        if m.te != clock or m.status not in ("running", "failed") or not m.assigned:
            continue
        for i in list(m.assigned):
            ac = world.fleet[i]
            ac.status = STANDBY
            ac.assigned_mission = None
            ev.sorties_completed += 1
            world.log("sortie_completed", mission=m.id, aircraft=i)
        m.assigned = []
        if m.status == "running":
            m.status = "succeeded"
            world.revenue += m.reward
            ev.missions_succeeded.append(m.id)
            ev.mission_signed_reward += m.reward
            world.log("mission_succeeded", mission=m.id, reward=m.reward)

    # -- repair completion; one spare consumed per finished job
    for bay in world.bays:
        if not bay.busy or bay.finish_time > clock:
            continue
        ac = world.fleet[bay.aircraft]
        comp = ac.components[bay.comp_index]
        j = comp.class_index
        if world.inventory.stocks[j] >= 1:
            world.inventory.stocks[j] -= 1
            comp.health = 1.0
            comp.observed_health = 1.0
            comp.failed = False
            comp.fault_time = None
            comp.fault_visible_at = None
            world.log("repair_completed", bay=bay.id, aircraft=ac.id,
                      component=bay.comp_index, cls=j)
            ev.repairs_completed.append((bay.id, ac.id))
            bay.busy = False
            bay.aircraft = None
            bay.comp_index = None
            bay.finish_time = None
            bay.blocked = False
            if ac.has_failed_component():
                ac.status = DOWN
                if ac.id not in world.queue:
                    world.queue.append(ac.id)
                    world.log("enqueue", aircraft=ac.id)
            else:
                ac.status = STANDBY
        else:
            ev.stockouts.append(j)
            if not bay.blocked:
                bay.blocked = True
                world.log("repair_blocked", bay=bay.id, cls=j)

    # -- prognostics and fault visibility
    for ac in world.fleet:
        for ci, comp in enumerate(ac.components):
            params = world.classes[comp.class_index]
            if comp.failed:
                if comp.fault_visible_at is not None and comp.fault_visible_at <= clock \
                        and comp.observed_health != 0.0:
                    comp.observed_health = 0.0
                    world.log("fault_detected", aircraft=ac.id, component=ci)
                comp.predicted_failure = False
            else:
                comp.predicted_failure = (
                    params.predict_lead > 0
                    and comp.health * params.mfhbf < params.predict_lead)

    # -- holding cost on end-of-step stock
    base = world.inventory.holding_base()
    ev.holding_base = base
    holding = base * cfg.dt
    world.ledger["inventory"] += holding
    if holding:
        world.log("holding", amount=holding)

    ev.availability = world.ready_count()
    world.log("availability", ready=ev.availability)
    return ev
