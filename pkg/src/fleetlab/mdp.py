"""Commander-facing view of the world: observation vectors, Q-head segment
layouts, action index decoding, and the four reward signals.

Observation features stay near [0, 1]: times are divided by the horizon,
counts by their configured maxima, money by 100 k$. Each role sees a fixed
sequence of feature blocks; smaller worlds (e.g. curriculum stages with a
reduced fleet) are zero-padded into the same layout so network shapes never
change during training.

Block contents:
  missions    5 per slot: time-to-start, duration, reward, crew size, live flag
  fleet       per aircraft: per-component observed health, then status one-hot
  bays        3 per bay: busy flag, remaining hours, job cost
  suppliers   2 per class and supplier: unit price, lead time
  inventory   3 per class: stock, pending arrivals, holding cost
  directive   the strategic accept/reject mask, one bit per mission slot
  *_actions   upstream tactical actions (flight for Maintenance, bay for
              Resource), rescaled into [0, 1]
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .params import RewardConfig, ScenarioConfig
from .sim import StepEvents, WorldState

ROLES = ("General", "Flight", "Maintenance", "Resource", "FlatJoint")

MONEY_SCALE = 100.0   # k$ per unit of feature value

_LIVE_STATUSES = ("candidate", "accepted", "running")
_N_STATUS = 4         # width of the aircraft status one-hot


# ---------------------------------------------------------------------------
# Observation layout

@dataclass(frozen=True)
class Block:
    """One contiguous feature run inside an observation vector."""

    name: str
    offset: int
    length: int

    @property
    def slice(self) -> slice:
        return slice(self.offset, self.offset + self.length)


@dataclass(frozen=True)
class ObservationLayout:
    """Named, contiguous feature blocks covering [0, dim) for one role."""

    role: str
    blocks: tuple[Block, ...]
    n_missions: int
    n_aircraft: int
    n_bays: int
    n_classes: int
    n_components: int   # per aircraft
    n_suppliers: int

    @property
    def dim(self) -> int:
        last = self.blocks[-1]
        return last.offset + last.length

    def block(self, name: str) -> Block:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(f"{self.role} layout has no block {name!r}")


_BLOCK_ORDER = {
    "General": ("missions", "fleet", "bays", "suppliers", "inventory"),
    "FlatJoint": ("missions", "fleet", "bays", "suppliers", "inventory"),
    "Flight": ("missions", "fleet", "directive"),
    "Maintenance": ("missions", "bays", "flight_actions", "directive"),
    "Resource": ("missions", "suppliers", "inventory",
                 "maintenance_actions", "directive"),
}


def observation_layout(role: str, cfg: ScenarioConfig) -> ObservationLayout:
    """Build the feature layout one commander role sees under a scenario."""
    if role not in _BLOCK_ORDER:
        raise ValueError(f"unknown role {role!r}")
    n_comp = cfg.components_per_aircraft()
    sizes = {
        "missions": cfg.missions_per_window * 5,
        "fleet": cfg.n_aircraft * (n_comp + _N_STATUS),
        "bays": cfg.n_bays * 3,
        "suppliers": cfg.n_component_classes * cfg.n_suppliers * 2,
        "inventory": cfg.n_component_classes * 3,
        "flight_actions": cfg.n_aircraft,
        "maintenance_actions": cfg.n_bays,
        "directive": cfg.missions_per_window,
    }
    blocks, offset = [], 0
    for name in _BLOCK_ORDER[role]:
        blocks.append(Block(name, offset, sizes[name]))
        offset += sizes[name]
    return ObservationLayout(
        role=role, blocks=tuple(blocks),
        n_missions=cfg.missions_per_window, n_aircraft=cfg.n_aircraft,
        n_bays=cfg.n_bays, n_classes=cfg.n_component_classes,
        n_components=n_comp, n_suppliers=cfg.n_suppliers,
    )


# ---------------------------------------------------------------------------
# Observation encoding

def _fill_missions(vec, offset, world: WorldState, layout: ObservationLayout):
    cfg = world.cfg
    if len(world.board) > layout.n_missions:
        raise ValueError("mission board exceeds layout slots")
    horizon = cfg.horizon
    nr_max = cfg.mission_aircraft[1]
    for k, m in enumerate(world.board):
        if m.status not in _LIVE_STATUSES:
            continue
        base = offset + 5 * k
        vec[base] = (m.ts - world.clock) / horizon
        vec[base + 1] = m.duration / horizon
        vec[base + 2] = m.reward / MONEY_SCALE
        vec[base + 3] = m.nr / nr_max
        vec[base + 4] = 1.0


def _fill_fleet(vec, offset, world: WorldState, layout: ObservationLayout):
    stride = layout.n_components + _N_STATUS
    for ac in world.fleet:
        base = offset + stride * ac.id
        for ci, comp in enumerate(ac.components):
            vec[base + ci] = comp.observed_health
        vec[base + layout.n_components + ac.status] = 1.0


def _fill_bays(vec, offset, world: WorldState):
    horizon = world.cfg.horizon
    for bay in world.bays:
        base = offset + 3 * bay.id
        if bay.busy:
            vec[base] = 1.0
            vec[base + 1] = max(0.0, bay.finish_time - world.clock) / horizon
            vec[base + 2] = bay.job_cost / MONEY_SCALE


def _fill_suppliers(vec, offset, world: WorldState, layout: ObservationLayout):
    cfg = world.cfg
    horizon = cfg.horizon
    for j in range(cfg.n_component_classes):
        base = offset + 2 * layout.n_suppliers * j
        for s in range(cfg.n_suppliers):
            vec[base + 2 * s] = cfg.unit_price(j, s + 1) / MONEY_SCALE
            vec[base + 2 * s + 1] = cfg.supplier_lead_times[s] / horizon


def _fill_inventory(vec, offset, world: WorldState):
    inv = world.inventory
    cap = inv.capacity
    for j in range(world.cfg.n_component_classes):
        base = offset + 3 * j
        vec[base] = inv.stocks[j] / cap
        vec[base + 1] = inv.pending_qty(j) / cap
        vec[base + 2] = inv.holding_costs[j] / MONEY_SCALE


def _fill_bits(vec, offset, bits, capacity, what):
    if len(bits) > capacity:
        raise ValueError(f"{what} longer than layout capacity {capacity}")
    for k, b in enumerate(bits):
        if b not in (0, 1):
            raise ValueError(f"{what} entries must be 0 or 1, got {b!r}")
        vec[offset + k] = float(b)


def _fill_flight_actions(vec, offset, acts, capacity):
    if len(acts) > capacity:
        raise ValueError(f"flight actions longer than layout capacity {capacity}")
    for k, a in enumerate(acts):
        if a not in (-1, 0, 1):
            raise ValueError(f"flight actions must be in -1..1, got {a!r}")
        vec[offset + k] = (a + 1) / 2.0


def encode_observation(layout: ObservationLayout, world: WorldState,
                       directive: Sequence[int] | None = None,
                       flight_actions: Sequence[int] | None = None,
                       maintenance_actions: Sequence[int] | None = None,
                       ) -> np.ndarray:
    """Encode a world snapshot into the layout's feature vector.

    Worlds smaller than the layout (fewer aircraft, bays, classes, or board
    entries) are zero-padded; anything larger is a layout mismatch. Tactical
    roles require `directive`; Maintenance additionally needs the current
    flight actions and Resource the bay activations.
    """
    cfg = world.cfg
    if (cfg.n_aircraft > layout.n_aircraft or cfg.n_bays > layout.n_bays
            or cfg.n_component_classes > layout.n_classes
            or cfg.components_per_aircraft() > layout.n_components
            or cfg.missions_per_window > layout.n_missions):
        raise ValueError(f"world exceeds {layout.role} layout capacity")
    if cfg.n_suppliers != layout.n_suppliers:
        raise ValueError("supplier count differs from layout")
    if layout.role in ("Flight", "Maintenance", "Resource") and directive is None:
        raise ValueError(f"{layout.role} observation requires a directive")
    if layout.role == "Maintenance" and flight_actions is None:
        raise ValueError("Maintenance observation requires flight_actions")
    if layout.role == "Resource" and maintenance_actions is None:
        raise ValueError("Resource observation requires maintenance_actions")

    vec = np.zeros(layout.dim)
    for b in layout.blocks:
        if b.name == "missions":
            _fill_missions(vec, b.offset, world, layout)
        elif b.name == "fleet":
            _fill_fleet(vec, b.offset, world, layout)
        elif b.name == "bays":
            _fill_bays(vec, b.offset, world)
        elif b.name == "suppliers":
            _fill_suppliers(vec, b.offset, world, layout)
        elif b.name == "inventory":
            _fill_inventory(vec, b.offset, world)
        elif b.name == "directive":
            _fill_bits(vec, b.offset, directive, layout.n_missions, "directive")
        elif b.name == "flight_actions":
            _fill_flight_actions(vec, b.offset, flight_actions, layout.n_aircraft)
        elif b.name == "maintenance_actions":
            _fill_bits(vec, b.offset, maintenance_actions, layout.n_bays,
                       "maintenance actions")
    return vec


# ---------------------------------------------------------------------------
# Action segment layout and decoding

@dataclass(frozen=True)
class SegmentLayout:
    """Partition of a Q-head into independent per-decision segments."""

    role: str
    n_missions: int
    n_aircraft: int
    n_bays: int
    n_classes: int
    n_suppliers: int
    max_order_qty: int

    @property
    def resource_width(self) -> int:
        # order flag is the top bit: the lower half (no order) collapses to
        # index 0, the upper half enumerates supplier x quantity
        return 2 * self.n_suppliers * (self.max_order_qty + 1)

    def _role_widths(self, role: str) -> tuple[int, ...]:
        if role == "General":
            return (2,) * self.n_missions
        if role == "Flight":
            return (3,) * self.n_aircraft
        if role == "Maintenance":
            return (2,) * self.n_bays
        if role == "Resource":
            return (self.resource_width,) * self.n_classes
        raise ValueError(f"unknown role {role!r}")

    @property
    def widths(self) -> tuple[int, ...]:
        if self.role == "FlatJoint":
            return (self._role_widths("General") + self._role_widths("Flight")
                    + self._role_widths("Maintenance")
                    + self._role_widths("Resource"))
        return self._role_widths(self.role)

    @property
    def total(self) -> int:
        return sum(self.widths)

    def segments(self) -> list[tuple[int, int]]:
        """(offset, width) of each segment in the flat Q output."""
        out, offset = [], 0
        for w in self.widths:
            out.append((offset, w))
            offset += w
        return out


def segment_layout(role: str, cfg: ScenarioConfig) -> SegmentLayout:
    if role not in ROLES:
        raise ValueError(f"unknown role {role!r}")
    return SegmentLayout(
        role=role, n_missions=cfg.missions_per_window,
        n_aircraft=cfg.n_aircraft, n_bays=cfg.n_bays,
        n_classes=cfg.n_component_classes, n_suppliers=cfg.n_suppliers,
        max_order_qty=cfg.max_order_qty,
    )


def encode_resource_index(a_o: int, a_s: int, a_q: int,
                          n_suppliers: int, max_qty: int) -> int:
    """Flat index of one procurement decision; no-order maps to index 0."""
    span = max_qty + 1
    if not 1 <= a_s <= n_suppliers:
        raise ValueError(f"supplier {a_s} outside 1..{n_suppliers}")
    if not 0 <= a_q <= max_qty:
        raise ValueError(f"quantity {a_q} outside 0..{max_qty}")
    if not a_o:
        return 0
    return n_suppliers * span + (a_s - 1) * span + a_q


def decode_resource_index(index: int, n_suppliers: int,
                          max_qty: int) -> tuple[int, int, int]:
    """Inverse of encode_resource_index; the whole no-order half decodes to
    the canonical (0, 1, 0)."""
    span = max_qty + 1
    half = n_suppliers * span
    if not 0 <= index < 2 * half:
        raise ValueError(f"resource index {index} outside 0..{2 * half - 1}")
    if index < half:
        return (0, 1, 0)
    rem = index - half
    return (1, rem // span + 1, rem % span)


def decode_action(layout: SegmentLayout, indices: Sequence[int]):
    """Map per-segment argmax indices to structured actions.

    General -> accept bits, Flight -> {-1, 0, 1} per aircraft, Maintenance ->
    activation bits, Resource -> (order, supplier, qty) per class. FlatJoint
    returns all four under their role keys.
    """
    widths = layout.widths
    if len(indices) != len(widths):
        raise ValueError(
            f"expected {len(widths)} segment indices, got {len(indices)}")
    for k, (idx, w) in enumerate(zip(indices, widths)):
        if not 0 <= idx < w:
            raise ValueError(f"segment {k}: index {idx} outside 0..{w - 1}")
    role = layout.role
    if role == "General":
        return [int(i) for i in indices]
    if role == "Flight":
        return [int(i) - 1 for i in indices]
    if role == "Maintenance":
        return [int(i) for i in indices]
    if role == "Resource":
        return [decode_resource_index(int(i), layout.n_suppliers,
                                      layout.max_order_qty)
                for i in indices]
    m, a, b = layout.n_missions, layout.n_aircraft, layout.n_bays
    return {
        "general": [int(i) for i in indices[:m]],
        "flight": [int(i) - 1 for i in indices[m:m + a]],
        "maintenance": [int(i) for i in indices[m + a:m + a + b]],
        "resource": [decode_resource_index(int(i), layout.n_suppliers,
                                           layout.max_order_qty)
                     for i in indices[m + a + b:]],
    }


# ---------------------------------------------------------------------------
# Reward signals

def reward_flight(events: Sequence[StepEvents], cfg: RewardConfig,
                  n_aircraft: int) -> float:
    """Signed mission outcomes plus the per-step fleet availability bonus."""
    total = 0.0
    for ev in events:
        total += ev.mission_signed_reward
        total += cfg.availability_weight * ev.availability / n_aircraft
    return total


def reward_maintenance(events: Sequence[StepEvents], cfg: RewardConfig) -> float:
    """Negated cost of repair jobs started: parts-and-labor plus weighted
    repair hours."""
    total = 0.0
    for ev in events:
        for cost, hours in ev.jobs_started:
            total += cost + cfg.repair_time_weight * hours
    return -total


def reward_resource(events: Sequence[StepEvents], cfg: RewardConfig) -> float:
    """Negated order spend (with a lead-time penalty per placed order) plus
    stock holding. The order flag gates the whole term: skipped classes
    contribute holding only."""
    total = 0.0
    for ev in events:
        for _cls, _supplier, qty, price, lead in ev.orders:
            total += qty * price + cfg.lead_time_weight * lead
        total += cfg.holding_weight * ev.holding_base
    return -total


def reward_general(rf: float, rm: float, rr: float, cfg: RewardConfig) -> float:
    return cfg.mix_flight * rf + cfg.mix_maintenance * rm + cfg.mix_resource * rr
