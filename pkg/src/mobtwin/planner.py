"""Occupancy-aware route selection and the trigger/latency-budget arithmetic."""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Mapping

from .world import RoadNetwork


class NoPath(ValueError):
    pass


@dataclass(frozen=True)
class PlannerConfig:
    theta: float = 0.5
    beta: float = 2.0

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must be in [0, 1]")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")


@dataclass(frozen=True)
class RoutePlan:
    origin_node: str
    destination_node: str
    segments: tuple[str, ...]
    total_length: float
    max_occupancy: float
    cost: float
    decided_at: float = 0.0

    def is_connected(self, network: RoadNetwork) -> bool:
        node = self.origin_node
        for sid in self.segments:
            seg = network.segments.get(sid)
            if seg is None or seg.from_node != node:
                return False
            node = seg.to_node
        return node == self.destination_node


def _occupancy_map(occupancy) -> Mapping[str, float]:
    if occupancy is None:
        return {}
    return getattr(occupancy, "occupancy", occupancy)


def route_cost(network: RoadNetwork, segments, occupancy, beta: float) -> float:
    """Sum of ``length * (1 + beta * occupancy)`` accumulated in path order."""
    occ = _occupancy_map(occupancy)
    cost = 0.0
    for sid in segments:
        cost += network.segments[sid].length * (1.0 + beta * occ.get(sid, 0.0))
    return cost


def _search(network: RoadNetwork, src: str, dst: str, occ: Mapping[str, float],
            beta: float) -> tuple[float, float, tuple[str, ...]]:
    # Labels compare as (cost, length, segment ids); lengths are positive so the
    # order is strictly monotone under extension and settled labels are final.
    for n in (src, dst):
        if n not in network.nodes:
            raise NoPath(f"unknown node {n!r}")
    heap = [(0.0, 0.0, (), src)]
    settled = set()
    while heap:
        cost, length, path, node = heapq.heappop(heap)
        if node in settled:
            continue
        if node == dst:
            return cost, length, path
        settled.add(node)
        for sid in network.adjacency[node]:
            seg = network.segments[sid]
            if seg.to_node in settled:
                continue
            heapq.heappush(heap, (cost + seg.length * (1.0 + beta * occ.get(sid, 0.0)),
                                  length + seg.length, path + (sid,), seg.to_node))
    raise NoPath(f"no path from {src!r} to {dst!r}")


def _make_plan(network, n_o, n_d, segments, occ, cost, decided_at) -> RoutePlan:
    length = 0.0
    for sid in segments:
        length += network.segments[sid].length
    max_occ = max((occ.get(sid, 0.0) for sid in segments), default=0.0)
    return RoutePlan(n_o, n_d, tuple(segments), length, max_occ, cost, decided_at)


def default_route(network: RoadNetwork, n_o: str, n_d: str, occupancy=None,
                  decided_at: float = 0.0) -> RoutePlan:
    """Shortest route by length alone."""
    _, length, path = _search(network, n_o, n_d, {}, 0.0)
    occ = _occupancy_map(occupancy)
    return _make_plan(network, n_o, n_d, path, occ, length, decided_at)


def plan(network: RoadNetwork, occupancy, n_o: str, n_d: str,
         cfg: PlannerConfig = PlannerConfig(), decided_at: float = 0.0) -> RoutePlan:
    """Keep the default route unless it is congested beyond ``theta``.

    When it is, pick the path minimising ``sum(length * (1 + beta * occ))``;
    ties go to the shorter path, then to the smaller segment-id sequence.
    """
    occ = _occupancy_map(occupancy)
    base = default_route(network, n_o, n_d, occ, decided_at)
    if base.max_occupancy <= cfg.theta:
        cost = route_cost(network, base.segments, occ, cfg.beta)
        return _make_plan(network, n_o, n_d, base.segments, occ, cost, decided_at)
    cost, _, path = _search(network, n_o, n_d, occ, cfg.beta)
    return _make_plan(network, n_o, n_d, path, occ, cost, decided_at)


def trigger_distance(v_ego: float, t_headway: float, l_r: float) -> float:
    """Distance ``S`` from the entrance node at which a route request fires."""
    return v_ego * t_headway + l_r


def latency_budget(s: float, v_ego: float) -> float:
    """Time the ego needs to cover ``s`` at constant speed: the end-to-end deadline."""
    if not v_ego > 0:
        raise ValueError("V_ego must be > 0")
    return s / v_ego
