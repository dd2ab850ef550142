import math
import random
from dataclasses import replace

import pytest

from conftest import V_EGO, make_ego, vehicle
from mobtwin.net import LatencyReport
from mobtwin.planner import RoutePlan, plan
from mobtwin.traffic import step
from mobtwin.vehicle import (MalformedPlan, TriggerConfig, apply_plan, follow, should_trigger)
from mobtwin.world import NodeRole, RoadNetwork, RoadNode, RoadSegment

CFG = TriggerConfig(3.0, 0.7)
S = CFG.distance(V_EGO)


def report(total, budget=3.126):
    return LatencyReport(1, total, 0.0, 0.0, 0.0, total, budget, total <= budget)


def ego_at_front_distance(field, front):
    # CoG sits l_r behind the front edge
    return make_ego(field, 50.0 - front - CFG.l_r)


def test_trigger_at_exact_distance(field):
    ego = ego_at_front_distance(field, S)
    assert should_trigger(ego, {"ego": ego.object}, field, "A", CFG)


def test_no_trigger_far_away(field):
    ego = make_ego(field, 0.0, ("DA", "AB"))
    assert not should_trigger(ego, {"ego": ego.object}, field, "A", CFG)
    # a 500 m approach
    net = RoadNetwork([RoadNode("o", (-500, 0)), RoadNode("A", (0, 0), NodeRole.ENTRANCE),
                       RoadNode("B", (10, 0), NodeRole.EXIT)],
                      [RoadSegment("oA", "o", "A", ((-500, 0), (0, 0))),
                       RoadSegment("AB", "A", "B", ((0, 0), (10, 0)))])
    far = make_ego(net, 0.0, ("oA", "AB"))
    assert not should_trigger(far, {"ego": far.object}, net, "A", CFG)


def test_no_trigger_behind_leader(field):
    ego = ego_at_front_distance(field, 10.0)
    lead = vehicle("lead", field.segments["DA"], ego.object.arc_position + 5.0)
    assert not should_trigger(ego, {"ego": ego.object, "lead": lead}, field, "A", CFG)


def test_trigger_fires_once(field):
    ego = replace(ego_at_front_distance(field, 5.0), triggered=True)
    assert not should_trigger(ego, {"ego": ego.object}, field, "A", CFG)


def test_worst_case_plan_lands_before_node():
    # fired at exactly S with every phase at its maximum
    remaining = S - V_EGO * 0.488
    assert remaining > 0
    assert 0.488 <= CFG.budget(V_EGO)


def test_apply_plan_adopts_within_budget(field):
    ego = ego_at_front_distance(field, 10.0)
    rp = plan(field, {"AB": 1.0}, "A", "B")
    new, out = apply_plan(ego, rp, report(0.243), field)
    assert out.adopted
    assert new.object.route == ("DA", "AD", "DC", "CB")
    assert new.active_route == ("AD", "DC", "CB")


def test_apply_plan_budget_violation_keeps_default(field, caplog):
    ego = ego_at_front_distance(field, 10.0)
    rp = plan(field, {"AB": 1.0}, "A", "B")
    new, out = apply_plan(ego, rp, report(4.0), field)
    assert not out.adopted and out.reason == "budget_violation"
    assert new.object.route == ("DA", "AB")
    assert "over budget" in caplog.text


def test_apply_plan_rejects_disconnected(field):
    ego = ego_at_front_distance(field, 10.0)
    bad = RoutePlan("A", "B", ("AD", "CB"), 100.0, 0.0, 100.0)
    with pytest.raises(MalformedPlan):
        apply_plan(ego, bad, report(0.1), field)


def test_empty_plan_is_noop_adoption(field):
    ego = make_ego(field, 10.0, ("DA", "AB"), entrance="A", exit_="B")
    empty = RoutePlan("A", "A", (), 0.0, 0.0, 0.0)
    new, out = apply_plan(replace(ego, exit="A"), empty, report(0.1), field)
    assert out.adopted and new.object.route == ("DA",)


def test_follow_arrival_time():
    net = RoadNetwork([RoadNode("a", (0, 0), NodeRole.ENTRANCE),
                       RoadNode("b", (100, 0), NodeRole.EXIT)],
                      [RoadSegment("ab", "a", "b", ((0, 0), (100, 0)))])
    ego = make_ego(net, 0.0, ("ab",), v=5.0, entrance="b", exit_="b")
    t = 0
    while not ego.arrived:
        ego = follow(ego, net, 0.1)
        t += 1
    # 100 m at 5 m/s: the last step that still lands on the segment is t = 20 s
    assert t == 201
    assert ego.object.arc_position == 100.0


def test_follow_holds_spacing_behind_parked_leader(field):
    ego = make_ego(field, 0.0, ("DA", "AB"), v=5.0)
    park = vehicle("park", field.segments["DA"], 10.0 + 15.0 + 20.0, 0.0)
    reg = {"park": park}
    for _ in range(300):
        ego = follow(ego, field, 0.1, reg)
    assert park.arc_position - ego.object.arc_position == pytest.approx(15.0)


def test_follow_matches_reference_integrator(field):
    rng = random.Random(4)
    routes = [("DA", "AB"), ("DA", "AD", "DC", "CB"), ("AD", "DC", "CB", "BA")]
    for _ in range(50):
        route = rng.choice(routes)
        arc = rng.uniform(0, field.segments[route[0]].length)
        v = rng.uniform(1, 15)
        ego = make_ego(field, arc, route, v=v, entrance=field.segments[route[0]].to_node)
        ref_arc = arc
        remaining = list(route)
        for _ in range(100):
            ego = follow(ego, field, 0.1)
            if ego.arrived:
                break
            ref_arc += v * 0.1
            while ref_arc > field.segments[remaining[0]].length:
                ref_arc -= field.segments[remaining[0]].length
                remaining.pop(0)
            ref = field.segments[remaining[0]].point_at(ref_arc)
            assert math.dist(ego.object.position, ref.position) <= 1e-9


def test_follow_does_not_move_background(field):
    ego = make_ego(field, 0.0)
    other = vehicle("o", field.segments["AB"], 5.0)
    reg = {"o": other}
    ego2 = follow(ego, field, 0.1, reg)
    assert reg["o"] is other
    assert ego2.object.arc_position == pytest.approx(V_EGO * 0.1)
    # same motion as one traffic step of the ego alone
    solo, _ = step({"ego": ego.object}, field, 0.1)
    assert solo["ego"].arc_position == ego2.object.arc_position
