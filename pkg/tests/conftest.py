from __future__ import annotations

import math
import random

import pytest
import yaml

from mobtwin import resolve, scenario_from_dict
from mobtwin.traffic import EgoState
from mobtwin.world import (DynamicObject, NodeRole, ObjectClass, RoadNetwork, RoadNode,
                           RoadSegment, load_network_file)

V_EGO = 5.5556


@pytest.fixture(scope="session")
def field():
    return load_network_file(resolve("two-route-map"))


def scenario_doc(name: str) -> dict:
    doc = yaml.safe_load(resolve(name).read_text())
    doc.pop("map")
    return doc


def pinned_worst_case(duration: float = 12.0):
    """The free-flow scenario with every latency fixed at its upper bound."""
    doc = scenario_doc("congestion-off")
    doc["edge"]["compute_latency"] = [0.173] * 3
    doc["cloud"]["compute_latency"] = [0.207] * 3
    for k in ("dsrc", "cellular", "mmwave"):
        doc["links"][k] = {"latency": [0.105] * 3}
    doc["links"]["backhaul"] = {"latency": [0.00269] * 3, "upload_share": 0.5}
    doc["duration"] = duration
    return scenario_from_dict(doc, network=load_network_file(resolve("two-route-map")))


def vehicle(oid, seg, arc, speed=5.0, route=None, cls=ObjectClass.VEHICLE):
    route = tuple(route) if route else (seg.id,)
    return DynamicObject(oid, cls, seg.point_at(arc), speed, (4.5, 1.8), seg.id, arc,
                         free_speed=speed, route=route)


def make_ego(network, arc, route=("DA", "AB"), v=V_EGO, entrance="A", exit_="B"):
    seg = network.segments[route[0]]
    obj = vehicle("ego", seg, arc, v, route)
    approach = tuple(route[: route.index(next(s for s in route
                                              if network.segments[s].to_node == entrance)) + 1])
    default = tuple(route[len(approach):])
    return EgoState(obj, v, seg.polyline[0], network.nodes[exit_].position, entrance, exit_,
                    approach, default)


def random_graph(rng: random.Random, max_nodes=10, max_segments=20, integer_lengths=False):
    """Random directed graph with straight segments; node 0 entrance, last node exit."""
    n = rng.randint(2, max_nodes)
    pos = [(rng.uniform(0, 100), rng.uniform(0, 100)) for _ in range(n)]
    roles = [NodeRole.PLAIN] * n
    nodes = [RoadNode(f"n{i}", pos[i], roles[i]) for i in range(n)]
    segs, used = [], set()
    for k in range(rng.randint(1, max_segments)):
        a, b = rng.sample(range(n), 2)
        if (a, b) in used:
            continue
        used.add((a, b))
        if integer_lengths:
            # straight along x so the length is exactly an integer
            L = rng.randint(1, 5)
            poly = ((0.0, float(k)), (float(L), float(k)))
        else:
            poly = (pos[a], pos[b]) if math.dist(pos[a], pos[b]) > 1e-6 \
                else (pos[a], (pos[a][0] + 1.0, pos[a][1]))
        segs.append(RoadSegment(f"s{k:02d}", f"n{a}", f"n{b}", poly))
    return RoadNetwork(nodes, segs)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
