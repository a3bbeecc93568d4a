"""Simulator unit tests: degradation, repairs, inventory, missions, stepping."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fleetlab.params import COMPONENT_CLASSES, ScenarioConfig, scale_mfhbf
from fleetlab.sim import (DOWN, IN_MAINTENANCE, ON_MISSION, STANDBY,
                          ComponentState, EpisodeFinished, InventoryState,
                          JointActions, MissionSpec, PendingOrder,
                          apply_mission_directive, build_world,
                          degrade_component, generate_missions,
                          refresh_mission_board, sample_repair, step_world,
                          update_inventory)
from golden_trace import (GOLDEN_HOLDING, GOLDEN_MAINTENANCE, GOLDEN_PENALTY,
                          GOLDEN_PROCUREMENT, GOLDEN_READY_STEPS,
                          GOLDEN_REVENUE, GOLDEN_STEPS, run_golden_trace)

POW = COMPONENT_CLASSES[2]
AVI = COMPONENT_CLASSES[0]


def fly_until_failure(params, rng, shock_mode, max_hours=100_000):
    comp = ComponentState(class_index=0)
    for hour in range(1, max_hours + 1):
        degrade_component(comp, params, 1.0, rng, shock_mode)
        if comp.health == 0.0:
            return hour
    raise AssertionError("component never failed")


class TestDegradation:
    def test_shock_free_life_is_exactly_ceil_mfhbf(self):
        rng = np.random.default_rng(0)
        for params in (AVI, POW):
            assert fly_until_failure(params, rng, "off") == math.ceil(params.mfhbf)

    def test_shock_free_life_non_integer_mfhbf(self):
        rng = np.random.default_rng(0)
        scaled = scale_mfhbf(AVI, 0.7875)   # mfhbf 94.5 -> fails at hour 95
        assert fly_until_failure(scaled, rng, "off") == 95

    def test_expected_mode_mean_life_near_mfhbf_over_one_plus_p(self):
        # POW: 250 / 1.2 = 208.3; modest n here, the full 1e5-trial check
        # lives in the acceptance suite.
        rng = np.random.default_rng(7)
        lives = [fly_until_failure(POW, rng, "expected") for _ in range(20_000)]
        assert 204.0 <= np.mean(lives) <= 213.0

    def test_literal_mode_life_is_geometric_scale(self):
        rng = np.random.default_rng(7)
        lives = [fly_until_failure(POW, rng, "literal") for _ in range(20_000)]
        # E[min(Geom(0.2), 250)] is 5.0 to within rounding
        assert 4.8 <= np.mean(lives) <= 5.2

    def test_health_stays_in_unit_interval(self):
        rng = np.random.default_rng(3)
        comp = ComponentState(class_index=0)
        for _ in range(500):
            degrade_component(comp, AVI, 1.0, rng, "expected")
            assert 0.0 <= comp.health <= 1.0

    def test_failed_component_is_inert(self):
        comp = ComponentState(class_index=0, health=0.0, failed=True)
        degrade_component(comp, AVI, 1.0, np.random.default_rng(0), "expected")
        assert comp.health == 0.0

    def test_negative_flight_hours_rejected(self):
        comp = ComponentState(class_index=0)
        with pytest.raises(ValueError):
            degrade_component(comp, AVI, -1.0, np.random.default_rng(0))


class TestRepairSampling:
    def test_zero_sigma_is_deterministic(self):
        hours, cost = sample_repair(AVI, 0.1, 0.0, np.random.default_rng(0))
        assert hours == 24.0
        assert cost == pytest.approx(7.4, abs=1e-12)

    def test_mean_matches_class_mean(self):
        rng = np.random.default_rng(11)
        draws = [sample_repair(POW, 0.1, 0.2, rng)[0] for _ in range(100_000)]
        assert 118.8 <= np.mean(draws) <= 121.2

    def test_truncated_at_one_hour(self):
        rng = np.random.default_rng(5)
        tiny = scale_mfhbf(AVI, 1.0)
        draws = [sample_repair(tiny, 0.1, 3.0, rng)[0] for _ in range(2000)]
        assert min(draws) >= 1.0


class TestInventory:
    def make_inv(self, stocks, capacity=10):
        return InventoryState(stocks=list(stocks), capacity=capacity,
                              holding_costs=[0.025] * len(stocks))

    def test_overflow_is_priced_as_virtual(self):
        inv = self.make_inv([9])
        inv.pending.append(PendingOrder(arrive_at=5.0, class_index=0, qty=3,
                                        unit_price=20.0))
        report = update_inventory(inv, [0], clock=5.0)
        assert inv.stocks == [10]
        assert report["arrivals"][0]["overflow"] == 2
        assert report["arrivals"][0]["virtual_cost"] == pytest.approx(40.0)

    def test_idle_step_accrues_holding_only(self):
        inv = self.make_inv([4])
        report = update_inventory(inv, [0], clock=1.0)
        assert inv.stocks == [4]
        assert report["holding"] == pytest.approx(4 * 0.025)

    def test_unsatisfied_demand_reported_not_negative(self):
        inv = self.make_inv([1])
        report = update_inventory(inv, [3], clock=1.0)
        assert inv.stocks == [0]
        assert report["satisfied"] == [1]
        assert report["unsatisfied"] == [2]

    def test_demand_validation(self):
        inv = self.make_inv([1])
        with pytest.raises(ValueError):
            update_inventory(inv, [-1], clock=0.0)
        with pytest.raises(ValueError):
            update_inventory(inv, [1, 1], clock=0.0)

    @settings(max_examples=60, deadline=None)
    @given(stock=st.integers(0, 10), qty=st.integers(0, 10),
           demand=st.integers(0, 10))
    def test_balance_identity(self, stock, qty, demand):
        inv = self.make_inv([stock])
        if qty:
            inv.pending.append(PendingOrder(arrive_at=1.0, class_index=0,
                                            qty=qty, unit_price=5.0))
        report = update_inventory(inv, [demand], clock=1.0)
        applied = sum(a["applied"] for a in report["arrivals"])
        assert inv.stocks[0] - stock == applied - report["satisfied"][0]
        assert 0 <= inv.stocks[0] <= inv.capacity


class TestMissionGeneration:
    def test_count_and_bounds(self):
        cfg = ScenarioConfig()
        rng = np.random.default_rng(0)
        for window_start in (0, 240, 696):
            ms = generate_missions(cfg, window_start, rng)
            assert len(ms) == cfg.missions_per_window
            for m in ms:
                assert window_start <= m.ts < window_start + cfg.window
                assert m.te <= cfg.horizon
                assert 2 <= m.duration <= 10
                assert 2 <= m.nr <= 8
                assert m.reward == pytest.approx(round(m.nr * m.duration * 1.0, 1))

    def test_moments(self):
        cfg = ScenarioConfig()
        rng = np.random.default_rng(42)
        durations, crews = [], []
        for _ in range(1700):   # 1700 windows * 6 missions > 1e4 samples
            for m in generate_missions(cfg, 0, rng):
                durations.append(m.duration)
                crews.append(m.nr)
        assert 5.9 <= np.mean(durations) <= 6.1
        assert 4.9 <= np.mean(crews) <= 5.1

    def test_window_beyond_horizon_is_empty(self):
        cfg = ScenarioConfig()
        assert generate_missions(cfg, cfg.horizon, np.random.default_rng(0)) == []


def recount_ledger(events):
    """Independent ledger recount straight from the event log."""
    out = {"maintenance": 0.0, "procurement": 0.0, "inventory": 0.0,
           "penalty": 0.0, "virtual": 0.0, "revenue": 0.0}
    for e in events:
        kind = e["kind"]
        if kind == "repair_started":
            out["maintenance"] += e["cost"]
        elif kind == "order_placed":
            out["procurement"] += e["cost"]
        elif kind == "holding":
            out["inventory"] += e["amount"]
        elif kind == "mission_failed":
            out["penalty"] += e["penalty"]
        elif kind == "arrival":
            out["virtual"] += e["virtual_cost"]
        elif kind == "mission_succeeded":
            out["revenue"] += e["reward"]
    return out


class TestGoldenTrace:
    def test_hand_computed_ledger(self):
        world, _ = run_golden_trace()
        assert world.ledger["maintenance"] == pytest.approx(GOLDEN_MAINTENANCE, abs=1e-12)
        assert world.ledger["procurement"] == pytest.approx(GOLDEN_PROCUREMENT, abs=1e-12)
        assert world.ledger["penalty"] == pytest.approx(GOLDEN_PENALTY, abs=1e-12)
        assert world.ledger["inventory"] == pytest.approx(GOLDEN_HOLDING, abs=1e-12)
        assert world.ledger["virtual"] == 0.0
        assert world.revenue == GOLDEN_REVENUE

    def test_event_sequence(self):
        world, per_step = run_golden_trace()
        kinds = [e["kind"] for e in world.events]
        assert kinds.count("order_placed") == 1
        assert kinds.count("mission_launched") == 1
        assert kinds.count("fault") == 1
        assert kinds.count("sortie_failed") == 1
        assert kinds.count("mission_failed") == 1
        assert kinds.count("enqueue") == 1
        assert kinds.count("repair_started") == 1
        assert kinds.count("repair_completed") == 1
        fault = next(e for e in world.events if e["kind"] == "fault")
        assert fault["t"] == 4 and fault["visible_at"] == 6.0
        detected = next(e for e in world.events if e["kind"] == "fault_detected")
        assert detected["t"] == 6
        enq = next(e for e in world.events if e["kind"] == "enqueue")
        assert enq["t"] == 6   # requests at t=4,5 were not diagnosable yet
        done = next(e for e in world.events if e["kind"] == "repair_completed")
        assert done["t"] == 30
        assert sum(ev.availability for ev in per_step) == GOLDEN_READY_STEPS
        assert len(per_step) == GOLDEN_STEPS

    def test_detection_masks_observed_health(self):
        world, _ = run_golden_trace()
        masked = [e for e in world.events if e["kind"] == "fault_detected"]
        assert len(masked) == 1
        # after repair the component is as new
        comp = world.fleet[0].components[0]
        assert comp.health == 1.0 and comp.observed_health == 1.0
        assert not comp.failed

    def test_ledger_matches_event_recount(self):
        world, _ = run_golden_trace()
        recount = recount_ledger(world.events)
        for key in world.ledger:
            assert world.ledger[key] == recount[key]
        assert world.revenue == recount["revenue"]


class TestMissionSuccessPath:
    def test_success_revenue_and_release(self):
        cfg = ScenarioConfig(name="ok", n_aircraft=2, n_bays=1,
                             n_component_classes=1, horizon=12, window=12,
                             shock_mode="off", missions_per_window=1)
        world = build_world(cfg)
        m = MissionSpec(id=0, ts=0, te=4, nr=2, reward=8.0, status="accepted")
        world.board, world.missions = [m], {0: m}
        idle = JointActions([0, 0], [0], [(0, 1, 0)])
        step_world(world, JointActions([1, 1], [0], [(0, 1, 0)]))
        assert all(a.status == ON_MISSION for a in world.fleet)
        for _ in range(3):
            step_world(world, idle)
        assert m.status == "succeeded"
        assert world.revenue == 8.0
        assert all(a.status == STANDBY for a in world.fleet)
        assert sum(1 for e in world.events if e["kind"] == "sortie_completed") == 2

    def test_under_assignment_fails_at_ts(self):
        cfg = ScenarioConfig(name="under", n_aircraft=2, n_bays=1,
                             n_component_classes=1, horizon=12, window=12,
                             shock_mode="off", missions_per_window=1)
        world = build_world(cfg)
        m = MissionSpec(id=0, ts=0, te=4, nr=2, reward=8.0, status="accepted")
        world.board, world.missions = [m], {0: m}
        step_world(world, JointActions([1, 0], [0], [(0, 1, 0)]))
        assert m.status == "failed"
        assert world.ledger["penalty"] == 16.0
        assert world.fleet[0].status == STANDBY   # nobody launched


class TestBlockedRepair:
    def test_zero_stock_blocks_until_arrival(self):
        cfg = ScenarioConfig(name="blocked", n_aircraft=1, n_bays=1,
                             n_component_classes=1, horizon=60, window=60,
                             shock_mode="off", initial_stock=0,
                             supplier_lead_times=(30.0, 20.0, 10.0),
                             repair_sigma_frac=0.0)
        world = build_world(cfg)
        world.fleet[0].components[0].health = 0.05   # preventive, nearly worn
        step_world(world, JointActions([-1], [1], [(0, 1, 0)]))   # t=0 start 24h job
        bay = world.bays[0]
        assert bay.busy and bay.finish_time == 24.0
        for t in range(1, 24):
            step_world(world, JointActions([0], [0], [(0, 1, 0)]))
        assert bay.busy   # job done but no spare anywhere
        ev = step_world(world, JointActions([0], [0], [(1, 3, 1)]))   # order at t=24
        assert bay.blocked and ev.stockouts == [0]
        for _ in range(8):   # lead 10: arrival lands at clock 34
            ev = step_world(world, JointActions([0], [0], [(0, 1, 0)]))
            assert bay.busy
        ev = step_world(world, JointActions([0], [0], [(0, 1, 0)]))
        assert not bay.busy
        assert world.fleet[0].status == STANDBY
        assert world.inventory.stocks == [0]   # arrived and consumed same hour


def random_joint_actions(cfg, rng):
    return JointActions(
        flight=[int(v) for v in rng.integers(-1, 2, cfg.n_aircraft)],
        maintenance=[int(v) for v in rng.integers(0, 2, cfg.n_bays)],
        resource=[(int(rng.integers(0, 2)),
                   int(rng.integers(1, cfg.n_suppliers + 1)),
                   int(rng.integers(0, cfg.max_order_qty + 1)))
                  for _ in range(cfg.n_component_classes)],
    )


def run_random_episode(cfg, policy_seed, check=None):
    world = build_world(cfg)
    rng = np.random.default_rng(policy_seed)
    for t in range(cfg.horizon):
        if t % cfg.window == 0:
            refresh_mission_board(world, t)
            apply_mission_directive(world, [int(b) for b in
                                            rng.integers(0, 2, len(world.board))])
        step_world(world, random_joint_actions(cfg, rng))
        if check is not None:
            check(world)
    return world


class TestStepInvariants:
    def test_random_episode_invariants(self):
        cfg = ScenarioConfig(name="inv", n_aircraft=6, n_bays=3, horizon=240,
                             window=24)

        def check(world):
            statuses = [a.status for a in world.fleet]
            assert all(s in (ON_MISSION, STANDBY, IN_MAINTENANCE, DOWN)
                       for s in statuses)
            for a in world.fleet:
                for c in a.components:
                    assert 0.0 <= c.health <= 1.0
                    assert 0.0 <= c.observed_health <= 1.0
                if a.status == DOWN:
                    assert a.has_failed_component()
                in_bay = any(b.aircraft == a.id for b in world.bays if b.busy)
                if a.has_failed_component() and not in_bay:
                    assert a.status == DOWN
            for j, s in enumerate(world.inventory.stocks):
                assert 0 <= s <= world.inventory.capacity

        world = run_random_episode(cfg, policy_seed=123, check=check)
        recount = recount_ledger(world.events)
        for key in world.ledger:
            assert world.ledger[key] == recount[key]
        # every accepted mission resolved
        for m in world.missions.values():
            assert m.status in ("rejected", "succeeded", "failed")
            if m.status != "rejected":
                assert m.te <= cfg.horizon

    def test_event_log_determinism(self):
        cfg = ScenarioConfig(name="det", n_aircraft=5, n_bays=2, horizon=96,
                             window=24, seed=9)
        w1 = run_random_episode(cfg, policy_seed=55)
        w2 = run_random_episode(cfg, policy_seed=55)
        assert json.dumps(w1.events) == json.dumps(w2.events)

    def test_step_past_horizon_raises(self):
        cfg = ScenarioConfig(name="fin", n_aircraft=1, n_bays=1, horizon=2,
                             window=2, n_component_classes=1)
        world = build_world(cfg)
        idle = JointActions([0], [0], [(0, 1, 0)])
        step_world(world, idle)
        step_world(world, idle)
        with pytest.raises(EpisodeFinished):
            step_world(world, idle)

    def test_malformed_actions_rejected(self):
        cfg = ScenarioConfig(name="bad", n_aircraft=2, n_bays=1, horizon=4,
                             window=4, n_component_classes=1)
        world = build_world(cfg)
        with pytest.raises(ValueError):
            step_world(world, JointActions([0], [0], [(0, 1, 0)]))
        with pytest.raises(ValueError):
            step_world(world, JointActions([0, 0], [0, 1], [(0, 1, 0)]))
        with pytest.raises(ValueError):
            step_world(world, JointActions([0, 0], [0], [(1, 9, 1)]))
