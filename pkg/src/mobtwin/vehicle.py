"""Ego vehicle edge: re-routing trigger, plan adoption with budget check, route following."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Mapping

from .net import LatencyReport
from .planner import RoutePlan, latency_budget, trigger_distance
from .traffic import (JAM_SPACING, EgoState, distance_to_node, is_last_before_node, step)
from .world import TIE_TOLERANCE, DynamicObject, RoadNetwork

log = logging.getLogger(__name__)

__all__ = ["TriggerConfig", "LatencyReport", "MalformedPlan", "PlanOutcome", "should_trigger",
           "apply_plan", "follow"]


class MalformedPlan(ValueError):
    pass


@dataclass(frozen=True)
class TriggerConfig:
    t_headway: float = 3.0
    l_r: float = 0.7

    def __post_init__(self):
        if not (self.t_headway > 0 and self.l_r > 0):
            raise ValueError("t_headway and l_r must be > 0")

    def distance(self, v_ego: float) -> float:
        return trigger_distance(v_ego, self.t_headway, self.l_r)

    def budget(self, v_ego: float) -> float:
        return latency_budget(self.distance(v_ego), v_ego)


def should_trigger(ego: EgoState, registry: Mapping[str, DynamicObject], network: RoadNetwork,
                   n_o: str, cfg: TriggerConfig) -> bool:
    """Fire once the ego's front edge is within ``S`` of ``n_o`` and nothing is ahead of it."""
    if ego.triggered or not ego.on_approach:
        return False
    front = distance_to_node(ego, network, n_o) - cfg.l_r
    # tolerance absorbs rounding when the front edge sits exactly on S
    if front > cfg.distance(ego.v_ego) + TIE_TOLERANCE:
        return False
    return is_last_before_node(ego, registry, network, n_o)


@dataclass(frozen=True)
class PlanOutcome:
    adopted: bool
    reason: str = ""


def apply_plan(ego: EgoState, plan: RoutePlan, report: LatencyReport,
               network: RoadNetwork) -> tuple[EgoState, PlanOutcome]:
    """Adopt ``plan`` for the leg after the entrance node.

    A plan that blew its latency budget, or that arrives after the ego has
    already committed past the entrance node, is not adopted; the ego keeps
    following the default route.
    """
    if not plan.is_connected(network):
        raise MalformedPlan(f"plan {plan.segments} is not a connected "
                            f"{plan.origin_node}->{plan.destination_node} path")
    if not report.within_budget:
        log.warning("request %s: latency %.3fs over budget %.3fs, keeping default route",
                    report.request_id, report.total, report.budget)
        return ego, PlanOutcome(False, "budget_violation")
    if not ego.on_approach:
        return ego, PlanOutcome(False, "passed_entrance")
    obj = ego.object
    i = ego.approach.index(obj.segment_id)
    route = ego.approach[i:] + plan.segments
    ego = replace(ego, object=replace(obj, route=route), active_route=plan.segments)
    return ego, PlanOutcome(True)


def follow(ego: EgoState, network: RoadNetwork, dt: float,
           registry: Mapping[str, DynamicObject] | None = None, *,
           t_headway: float = 3.0, jam_spacing: float = JAM_SPACING) -> EgoState:
    """Advance the ego along its route under the same gap clamp as background traffic."""
    if ego.arrived:
        return ego
    reg = dict(registry or {})
    reg[ego.object.id] = ego.object
    others = [oid for oid in reg if oid != ego.object.id]
    new, finished = step(reg, network, dt, t_headway=t_headway, jam_spacing=jam_spacing,
                         skip=others)
    if finished:
        last = network.segments[ego.object.route[-1]]
        obj = replace(ego.object, route=(last.id,), segment_id=last.id,
                      arc_position=last.length, pose=last.point_at(last.length), speed=0.0)
        return replace(ego, object=obj, arrived=True)
    return replace(ego, object=new[ego.object.id])
