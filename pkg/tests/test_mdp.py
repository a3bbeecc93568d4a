"""Observation layout, action decoding, and reward signal tests."""

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fleetlab.mdp import (
    MONEY_SCALE,
    ObservationLayout,
    decode_action,
    decode_resource_index,
    encode_observation,
    encode_resource_index,
    observation_layout,
    reward_flight,
    reward_general,
    reward_maintenance,
    reward_resource,
    segment_layout,
)
from fleetlab.params import RewardConfig, ScenarioConfig, mini_scenario, nominal_scenario
from fleetlab.sim import (
    DOWN,
    IN_MAINTENANCE,
    JointActions,
    StepEvents,
    build_world,
    refresh_mission_board,
    step_world,
)

from golden_trace import (
    GOLDEN_R_FLIGHT,
    GOLDEN_R_GENERAL,
    GOLDEN_R_MAINTENANCE,
    GOLDEN_R_RESOURCE,
    run_golden_trace,
)

NOMINAL = nominal_scenario()


class TestObservationLayout:
    def test_frozen_dimensions(self):
        dims = {role: observation_layout(role, NOMINAL).dim
                for role in ("General", "Flight", "Maintenance", "Resource",
                             "FlatJoint")}
        # mission 6*5, fleet 12*(5+4), bays 6*3, suppliers 5*3*2, inventory 5*3
        assert dims["Flight"] == 30 + 108 + 6 == 144
        assert dims["Maintenance"] == 30 + 18 + 12 + 6 == 66
        assert dims["Resource"] == 30 + 30 + 15 + 6 + 6 == 87
        assert dims["General"] == 30 + 108 + 18 + 30 + 15 == 201
        assert dims["FlatJoint"] == dims["General"]

    def test_blocks_tile_the_vector(self):
        for role in ("General", "Flight", "Maintenance", "Resource"):
            layout = observation_layout(role, NOMINAL)
            offset = 0
            for b in layout.blocks:
                assert b.offset == offset
                assert b.length > 0
                offset += b.length
            assert offset == layout.dim

    @given(st.integers(1, 16), st.integers(1, 8), st.integers(1, 5),
           st.integers(1, 3), st.integers(1, 8))
    @settings(max_examples=50, deadline=None)
    def test_blocks_tile_for_any_config(self, n_l, n_b, n_c, lam, m):
        cfg = ScenarioConfig(n_aircraft=n_l, n_bays=n_b, n_component_classes=n_c,
                             complexity=lam, missions_per_window=m)
        for role in ("General", "Flight", "Maintenance", "Resource"):
            layout = observation_layout(role, cfg)
            offset = 0
            for b in layout.blocks:
                assert b.offset == offset
                offset += b.length
            assert offset == layout.dim

    def test_dimension_affine_in_complexity(self):
        def dim(role, lam):
            cfg = dataclasses.replace(NOMINAL, complexity=lam)
            return observation_layout(role, cfg).dim

        for role in ("General", "Flight"):
            d1, d2 = dim(role, 1), dim(role, 2)
            slope = d2 - d1
            for lam in (5, 10):
                assert dim(role, lam) == d1 + slope * (lam - 1)
        # each extra copy set adds N_L * N_C health features
        assert dim("Flight", 2) - dim("Flight", 1) == 12 * 5

    def test_unknown_role_rejected(self):
        with pytest.raises(ValueError):
            observation_layout("Admiral", NOMINAL)
        with pytest.raises(ValueError):
            segment_layout("Admiral", NOMINAL)

    def test_block_lookup(self):
        layout = observation_layout("Resource", NOMINAL)
        assert layout.block("inventory").length == 15
        with pytest.raises(KeyError):
            layout.block("fleet")


class TestSegmentLayout:
    def test_role_widths(self):
        assert segment_layout("General", NOMINAL).widths == (2,) * 6
        flight = segment_layout("Flight", NOMINAL)
        assert flight.widths == (3,) * 12
        assert flight.total == 36
        assert segment_layout("Maintenance", NOMINAL).widths == (2,) * 6
        res = segment_layout("Resource", NOMINAL)
        assert res.widths == (66,) * 5      # 2 suppliers-halves * 3 * 11

    def test_flat_concatenation(self):
        flat = segment_layout("FlatJoint", NOMINAL)
        assert len(flat.widths) == 6 + 12 + 6 + 5 == 29
        assert flat.total == 12 + 36 + 12 + 330 == 390

    def test_segments_cover_output(self):
        for role in ("General", "Flight", "Maintenance", "Resource", "FlatJoint"):
            layout = segment_layout(role, NOMINAL)
            offset = 0
            for seg_off, width in layout.segments():
                assert seg_off == offset
                offset += width
            assert offset == layout.total


class TestEncodeObservation:
    def test_fresh_world(self):
        world = build_world(NOMINAL)
        layout = observation_layout("General", NOMINAL)
        vec = encode_observation(layout, world)
        assert vec.shape == (201,)
        assert np.all(np.isfinite(vec))
        assert np.all(vec[layout.block("missions").slice] == 0.0)
        fleet = vec[layout.block("fleet").slice].reshape(12, 9)
        assert np.all(fleet[:, :5] == 1.0)            # observed health
        assert np.all(fleet[:, 5 + 1] == 1.0)         # standby one-hot column
        assert np.all(vec[layout.block("bays").slice] == 0.0)

    def test_mission_block_readback(self):
        world = build_world(NOMINAL)
        refresh_mission_board(world, 0)
        layout = observation_layout("General", NOMINAL)
        vec = encode_observation(layout, world)
        nr_max = NOMINAL.mission_aircraft[1]
        for k, m in enumerate(world.board):
            base = layout.block("missions").offset + 5 * k
            assert vec[base] == (m.ts - 0) / 720
            assert vec[base + 1] == m.duration / 720
            assert vec[base + 2] == m.reward / MONEY_SCALE
            assert vec[base + 3] == m.nr / nr_max
            assert vec[base + 4] == 1.0

    def test_rejected_mission_slot_zeroed(self):
        world = build_world(NOMINAL)
        refresh_mission_board(world, 0)
        world.board[2].status = "rejected"
        layout = observation_layout("General", NOMINAL)
        vec = encode_observation(layout, world)
        base = layout.block("missions").offset + 5 * 2
        assert np.all(vec[base:base + 5] == 0.0)

    def test_status_one_hot(self):
        world = build_world(NOMINAL)
        world.fleet[3].status = DOWN
        world.fleet[7].status = IN_MAINTENANCE
        layout = observation_layout("Flight", NOMINAL)
        vec = encode_observation(layout, world, directive=[0] * 6)
        fleet = vec[layout.block("fleet").slice].reshape(12, 9)
        assert fleet[3, 5 + DOWN] == 1.0 and fleet[3, 5 + 1] == 0.0
        assert fleet[7, 5 + IN_MAINTENANCE] == 1.0
        assert np.all(fleet.sum(axis=1) >= 1.0)       # one-hot always set

    def test_detection_masking(self):
        # a fresh fault stays hidden: the feature shows the last observed value
        world = build_world(NOMINAL)
        comp = world.fleet[0].components[2]
        comp.health = 0.0
        comp.failed = True
        comp.observed_health = 0.62
        comp.fault_visible_at = world.clock + 2
        layout = observation_layout("General", NOMINAL)
        vec = encode_observation(layout, world)
        assert vec[layout.block("fleet").offset + 2] == 0.62

    def test_bay_features(self):
        world = build_world(NOMINAL)
        bay = world.bays[4]
        bay.busy = True
        bay.finish_time = 30.0
        bay.job_cost = 12.5
        world.clock = 10
        layout = observation_layout("Maintenance", NOMINAL)
        vec = encode_observation(layout, world, directive=[1] * 6,
                                 flight_actions=[0] * 12)
        base = layout.block("bays").offset + 3 * 4
        assert vec[base] == 1.0
        assert vec[base + 1] == pytest.approx(20 / 720)
        assert vec[base + 2] == pytest.approx(0.125)

    def test_supplier_and_inventory_readback(self):
        world = build_world(NOMINAL)
        world.inventory.stocks[1] = 7
        layout = observation_layout("Resource", NOMINAL)
        vec = encode_observation(layout, world, directive=[0] * 6,
                                 maintenance_actions=[0] * 6)
        sup = layout.block("suppliers").offset
        # class 0 (repair cost 5): supplier prices 4.5 / 5.0 / 6.0
        assert vec[sup + 0] == pytest.approx(0.045)
        assert vec[sup + 1] == pytest.approx(72 / 720)
        assert vec[sup + 4] == pytest.approx(0.060)
        inv = layout.block("inventory").offset
        assert vec[inv + 3 * 1] == pytest.approx(0.7)
        assert vec[inv + 2] == pytest.approx(world.inventory.holding_costs[0]
                                             / MONEY_SCALE)

    def test_pending_orders_feature(self):
        world = build_world(NOMINAL)
        step_world(world, JointActions(
            flight=[0] * 12, maintenance=[0] * 6,
            resource=[(1, 2, 4)] + [(0, 1, 0)] * 4))
        layout = observation_layout("Resource", NOMINAL)
        vec = encode_observation(layout, world, directive=[0] * 6,
                                 maintenance_actions=[0] * 6)
        inv = layout.block("inventory").offset
        assert vec[inv + 1] == pytest.approx(0.4)     # 4 pending of capacity 10

    def test_upstream_action_blocks(self):
        world = build_world(NOMINAL)
        layout = observation_layout("Maintenance", NOMINAL)
        acts = [-1, 0, 1] + [0] * 9
        vec = encode_observation(layout, world, directive=[1, 0] * 3,
                                 flight_actions=acts)
        base = layout.block("flight_actions").offset
        assert list(vec[base:base + 3]) == [0.0, 0.5, 1.0]
        d = layout.block("directive").offset
        assert list(vec[d:d + 6]) == [1, 0, 1, 0, 1, 0]

    def test_smaller_world_zero_pads(self):
        mini = mini_scenario()
        world = build_world(mini)
        layout = observation_layout("Flight", NOMINAL)   # capacity 12
        vec = encode_observation(layout, world, directive=[0] * 6)
        assert vec.shape == (144,)
        fleet = vec[layout.block("fleet").slice].reshape(12, 9)
        assert np.all(fleet[:4, :5] == 1.0)
        assert np.all(fleet[4:] == 0.0)

    def test_oversized_world_rejected(self):
        big = dataclasses.replace(NOMINAL, n_aircraft=20)
        world = build_world(big)
        layout = observation_layout("Flight", NOMINAL)
        with pytest.raises(ValueError):
            encode_observation(layout, world, directive=[0] * 6)

    def test_missing_inputs_rejected(self):
        world = build_world(NOMINAL)
        with pytest.raises(ValueError):
            encode_observation(observation_layout("Flight", NOMINAL), world)
        with pytest.raises(ValueError):
            encode_observation(observation_layout("Maintenance", NOMINAL),
                               world, directive=[0] * 6)
        with pytest.raises(ValueError):
            encode_observation(observation_layout("Resource", NOMINAL),
                               world, directive=[0] * 6)
        with pytest.raises(ValueError):
            encode_observation(observation_layout("Flight", NOMINAL), world,
                               directive=[0, 2, 0, 0, 0, 0])
        with pytest.raises(ValueError):
            encode_observation(observation_layout("Maintenance", NOMINAL),
                               world, directive=[0] * 6,
                               flight_actions=[5] * 12)


class TestActionDecoding:
    def test_flight_neutral(self):
        layout = segment_layout("Flight", NOMINAL)
        assert decode_action(layout, [1] * 12) == [0] * 12
        assert decode_action(layout, [0, 2] + [1] * 10)[:2] == [-1, 1]

    def test_general_mask_direct(self):
        layout = segment_layout("General", NOMINAL)
        assert decode_action(layout, [1, 0, 0, 1, 0, 0]) == [1, 0, 0, 1, 0, 0]

    def test_maintenance_bits(self):
        layout = segment_layout("Maintenance", NOMINAL)
        assert decode_action(layout, [0, 1, 1, 0, 0, 1]) == [0, 1, 1, 0, 0, 1]

    def test_resource_enumeration(self):
        assert decode_resource_index(0, 3, 10) == (0, 1, 0)
        assert decode_resource_index(17, 3, 10) == (0, 1, 0)   # dead half
        assert decode_resource_index(32, 3, 10) == (0, 1, 0)
        assert decode_resource_index(33, 3, 10) == (1, 1, 0)
        assert decode_resource_index(34, 3, 10) == (1, 1, 1)
        assert decode_resource_index(43, 3, 10) == (1, 1, 10)
        assert decode_resource_index(44, 3, 10) == (1, 2, 0)
        assert decode_resource_index(65, 3, 10) == (1, 3, 10)

    def test_resource_round_trip(self):
        for a_s in (1, 2, 3):
            for a_q in range(11):
                idx = encode_resource_index(1, a_s, a_q, 3, 10)
                assert decode_resource_index(idx, 3, 10) == (1, a_s, a_q)
        assert encode_resource_index(0, 2, 7, 3, 10) == 0    # no-order collapses

    def test_resource_validation(self):
        with pytest.raises(ValueError):
            decode_resource_index(66, 3, 10)
        with pytest.raises(ValueError):
            encode_resource_index(1, 4, 0, 3, 10)
        with pytest.raises(ValueError):
            encode_resource_index(1, 1, 11, 3, 10)

    def test_index_bounds_checked(self):
        layout = segment_layout("Flight", NOMINAL)
        with pytest.raises(ValueError):
            decode_action(layout, [3] + [1] * 11)
        with pytest.raises(ValueError):
            decode_action(layout, [1] * 11)

    def test_flat_decode_matches_role_slices(self):
        rng = np.random.default_rng(7)
        flat = segment_layout("FlatJoint", NOMINAL)
        roles = {r: segment_layout(r, NOMINAL)
                 for r in ("General", "Flight", "Maintenance", "Resource")}
        for _ in range(100):
            indices = [int(rng.integers(0, w)) for w in flat.widths]
            parts = decode_action(flat, indices)
            assert parts["general"] == decode_action(roles["General"], indices[:6])
            assert parts["flight"] == decode_action(roles["Flight"], indices[6:18])
            assert parts["maintenance"] == decode_action(
                roles["Maintenance"], indices[18:24])
            assert parts["resource"] == decode_action(
                roles["Resource"], indices[24:])


class TestRewards:
    CFG = RewardConfig()

    def test_flight_success_with_availability(self):
        events = [
            StepEvents(step=1, availability=12, mission_signed_reward=10.0),
            StepEvents(step=2, availability=12),
        ]
        assert reward_flight(events, self.CFG, 12) == pytest.approx(14.0)

    def test_flight_failure(self):
        events = [StepEvents(step=1, availability=0,
                             mission_signed_reward=-20.0)]
        assert reward_flight(events, self.CFG, 12) == pytest.approx(-20.0)

    def test_flight_empty(self):
        assert reward_flight([], self.CFG, 12) == 0.0
        assert reward_flight([StepEvents(step=1)], self.CFG, 12) == 0.0

    def test_maintenance_single_and_double(self):
        one = [StepEvents(step=1, jobs_started=[(5.0, 24.0)])]
        assert reward_maintenance(one, self.CFG) == pytest.approx(-9.8)
        two = [StepEvents(step=1, jobs_started=[(5.0, 24.0), (5.0, 24.0)])]
        assert reward_maintenance(two, self.CFG) == pytest.approx(-19.6)
        assert reward_maintenance([StepEvents(step=1)], self.CFG) == 0.0

    def test_resource_order_and_holding(self):
        events = [StepEvents(step=1, orders=[(0, 1, 2, 5.0, 10.0)],
                             holding_base=0.3)]
        assert reward_resource(events, self.CFG) == pytest.approx(-15.3)
        assert reward_resource([StepEvents(step=1)], self.CFG) == 0.0

    def test_general_mix(self):
        assert reward_general(14.0, -9.8, -15.3, self.CFG) == pytest.approx(4.08)
        assert reward_general(0.0, 0.0, 0.0, self.CFG) == 0.0

    def test_order_flag_gates_contribution(self):
        # a decoded no-order action never reaches the order log, so the class
        # contributes holding only
        cfg = mini_scenario()
        world = build_world(cfg)
        ev = step_world(world, JointActions(
            flight=[0] * 4, maintenance=[0] * 2,
            resource=[(0, 2, 7)] + [(0, 1, 0)] * 4))
        assert ev.orders == []
        r = reward_resource([ev], self.CFG)
        assert r == pytest.approx(-ev.holding_base)

    def test_golden_trace_rewards(self):
        world, events = run_golden_trace()
        cfg = world.cfg.rewards
        rf = reward_flight(events, cfg, world.cfg.n_aircraft)
        rm = reward_maintenance(events, cfg)
        rr = reward_resource(events, cfg)
        assert rf == pytest.approx(GOLDEN_R_FLIGHT, abs=1e-9)
        assert rm == pytest.approx(GOLDEN_R_MAINTENANCE, abs=1e-9)
        assert rr == pytest.approx(GOLDEN_R_RESOURCE, abs=1e-9)
        assert reward_general(rf, rm, rr, cfg) == pytest.approx(
            GOLDEN_R_GENERAL, abs=1e-9)

    @given(st.lists(st.tuples(
        st.floats(-50, 50), st.integers(0, 12),
        st.lists(st.tuples(st.floats(0, 30), st.floats(1, 120)), max_size=3),
        st.floats(0, 5)), max_size=20))
    @settings(max_examples=60, deadline=None)
    def test_window_reward_is_sum_of_steps(self, rows):
        events = [StepEvents(step=k, mission_signed_reward=sr, availability=av,
                             jobs_started=jobs, holding_base=hb)
                  for k, (sr, av, jobs, hb) in enumerate(rows)]
        for fn in (lambda e: reward_flight(e, self.CFG, 12),
                   lambda e: reward_maintenance(e, self.CFG),
                   lambda e: reward_resource(e, self.CFG)):
            whole = fn(events)
            parts = sum(fn([ev]) for ev in events)
            assert math.isclose(whole, parts, rel_tol=0, abs_tol=1e-9)

    @given(st.lists(st.tuples(
        st.lists(st.tuples(st.floats(0, 30), st.floats(1, 120)), max_size=3),
        st.lists(st.tuples(st.integers(0, 4), st.integers(1, 3),
                           st.integers(0, 10), st.floats(0, 25), st.floats(1, 72)),
                 max_size=2),
        st.floats(0, 5)), max_size=10))
    @settings(max_examples=60, deadline=None)
    def test_cost_rewards_never_positive(self, rows):
        events = [StepEvents(step=k, jobs_started=jobs, orders=orders,
                             holding_base=hb)
                  for k, (jobs, orders, hb) in enumerate(rows)]
        assert reward_maintenance(events, self.CFG) <= 0.0
        assert reward_resource(events, self.CFG) <= 0.0
