"""Ground-truth traffic: gap-clamped kinematics and seeded flow spawning."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .world import DynamicObject, ObjectClass, Point, RoadNetwork

T_HEADWAY = 3.0  # Japanese 3-second rule
JAM_SPACING = 6.5  # design vehicle length + minimum standstill gap

DEFAULT_DIMS = {
    ObjectClass.VEHICLE: (4.5, 1.8),
    ObjectClass.PEDESTRIAN: (0.5, 0.5),
    ObjectClass.CYCLIST: (1.8, 0.6),
}


class NodeUnreachable(ValueError):
    pass


@dataclass(frozen=True)
class FlowSpec:
    entry_node: str
    route: tuple[str, ...]
    cls: ObjectClass
    spawn_rate: float
    speed: float
    dims: tuple[float, float] | None = None

    def validate(self, network: RoadNetwork):
        if self.spawn_rate < 0:
            raise ValueError("spawn_rate must be >= 0")
        if self.speed <= 0:
            raise ValueError("flow speed must be > 0")
        if not self.route:
            raise ValueError("flow route is empty")
        prev = self.entry_node
        for sid in self.route:
            seg = network.segments.get(sid)
            if seg is None:
                raise ValueError(f"flow route: unknown segment {sid!r}")
            if seg.from_node != prev:
                raise ValueError(f"flow route is not connected at segment {sid!r}")
            prev = seg.to_node


@dataclass
class EgoState:
    object: DynamicObject
    v_ego: float
    origin: Point
    destination: Point
    entrance: str
    exit: str
    approach: tuple[str, ...]
    default_route: tuple[str, ...]
    active_route: tuple[str, ...] | None = None
    triggered: bool = False
    arrived: bool = False

    def __post_init__(self):
        if not self.v_ego > 0:
            raise ValueError("V_ego must be > 0")

    @property
    def on_approach(self) -> bool:
        return not self.arrived and self.object.segment_id in self.approach


def required_spacing(obj: DynamicObject, t_headway: float, jam_spacing: float) -> float:
    """Along-route spacing a vehicle keeps behind its leader (D_safety, floored at jam spacing)."""
    return max(obj.free_speed * t_headway, jam_spacing)


def find_leader(obj: DynamicObject, registry: Mapping[str, DynamicObject],
                network: RoadNetwork) -> tuple[str, float] | None:
    """Nearest vehicle ahead on the current or next route segment, with its along-route gap."""
    seg_len = network.segments[obj.segment_id].length
    nxt = obj.route[1] if len(obj.route) > 1 else None
    best = None
    for other in registry.values():
        if other.id == obj.id or other.cls is not ObjectClass.VEHICLE:
            continue
        if other.segment_id == obj.segment_id:
            gap = other.arc_position - obj.arc_position
            if gap < 0 or (gap == 0 and other.id < obj.id):
                continue
        elif other.segment_id == nxt:
            gap = seg_len - obj.arc_position + other.arc_position
        else:
            continue
        if best is None or (gap, other.id) < best:
            best = (gap, other.id)
    return None if best is None else (best[1], best[0])


def _leaders(registry: Mapping[str, DynamicObject], network: RoadNetwork,
             skip: set[str]) -> dict[str, tuple[str, float] | None]:
    # same result as find_leader for every vehicle, via per-segment (arc, id) chains
    lanes: dict[str, list[DynamicObject]] = {}
    for o in registry.values():
        if o.cls is ObjectClass.VEHICLE:
            lanes.setdefault(o.segment_id, []).append(o)
    for lane in lanes.values():
        lane.sort(key=lambda o: (o.arc_position, o.id))
    out = {}
    for lane in lanes.values():
        for i, o in enumerate(lane):
            if o.id in skip:
                continue
            if i + 1 < len(lane):
                lead = lane[i + 1]
                out[o.id] = (lead.id, lead.arc_position - o.arc_position)
                continue
            nxt = lanes.get(o.route[1]) if len(o.route) > 1 else None
            if nxt:
                seg_len = network.segments[o.segment_id].length
                out[o.id] = (nxt[0].id, seg_len - o.arc_position + nxt[0].arc_position)
            else:
                out[o.id] = None
    return out


def _move_along(obj: DynamicObject, travel: float, network: RoadNetwork,
                dt: float) -> DynamicObject | None:
    arc = obj.arc_position + travel
    route = obj.route
    while arc > network.segments[route[0]].length:
        arc -= network.segments[route[0]].length
        route = route[1:]
        if not route:
            return None
    seg = network.segments[route[0]]
    return DynamicObject(obj.id, obj.cls, seg.point_at(arc), travel / dt, obj.dims, route[0],
                         arc, obj.free_speed, route)


def step(registry: Mapping[str, DynamicObject], network: RoadNetwork, dt: float, *,
         t_headway: float = T_HEADWAY, jam_spacing: float = JAM_SPACING,
         skip: Iterable[str] = ()) -> tuple[dict[str, DynamicObject], list[str]]:
    """Advance every object by ``dt``.

    Vehicles travel ``free_speed * dt`` unless that would bring them closer
    than their required spacing to the leader's *new* position; leaders are
    resolved first.  Objects in ``skip`` are obstacles only.  Returns the new
    registry and the ids of objects that ran off the end of their route.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    skip = set(skip)
    travel: dict[str, float] = {oid: 0.0 for oid in skip if oid in registry}
    leaders = _leaders(registry, network, skip)

    def resolve(oid: str):
        stack, on_stack = [oid], {oid}
        while stack:
            cur = stack[-1]
            lead = leaders[cur]
            if lead is not None and lead[0] not in travel and lead[0] not in on_stack:
                stack.append(lead[0])
                on_stack.add(lead[0])
                continue
            stack.pop()
            obj = registry[cur]
            free = obj.free_speed * dt
            if lead is None:
                travel[cur] = free
            else:
                # a leader still on the stack means a cycle; treat it as not moving
                lead_travel = travel.get(lead[0], 0.0)
                allowed = lead[1] + lead_travel - required_spacing(obj, t_headway, jam_spacing)
                travel[cur] = min(max(allowed, 0.0), free)

    for oid, obj in registry.items():
        if oid in travel:
            continue
        if obj.cls is ObjectClass.VEHICLE:
            resolve(oid)
        else:
            travel[oid] = obj.free_speed * dt

    out: dict[str, DynamicObject] = {}
    finished = []
    for oid, obj in registry.items():
        if oid in skip:
            out[oid] = obj
            continue
        moved = _move_along(obj, travel[oid], network, dt)
        if moved is None:
            finished.append(oid)
        else:
            out[oid] = moved
    return out, finished


@dataclass
class _FlowState:
    spec: FlowSpec
    rng: np.random.Generator
    next_arrival: float
    pending: int = 0
    count: int = 0


@dataclass
class TrafficSim:
    """Owns the ground-truth registry and the per-flow arrival streams."""

    network: RoadNetwork
    flows: Sequence[FlowSpec]
    seed_seq: np.random.SeedSequence
    t_headway: float = T_HEADWAY
    jam_spacing: float = JAM_SPACING
    clock: float = 0.0
    registry: dict[str, DynamicObject] = field(default_factory=dict)
    pinned: set[str] = field(default_factory=set)
    spawned: int = 0
    removed: int = 0

    def __post_init__(self):
        self._flows = []
        for spec, child in zip(self.flows, self.seed_seq.spawn(len(self.flows))):
            spec.validate(self.network)
            rng = np.random.default_rng(child)
            self._flows.append(_FlowState(spec, rng, self._draw_gap(spec, rng, self.clock)))

    @staticmethod
    def _draw_gap(spec: FlowSpec, rng: np.random.Generator, t: float) -> float:
        if spec.spawn_rate == 0:
            return math.inf
        return t + rng.exponential(1.0 / spec.spawn_rate)

    @property
    def pending(self) -> int:
        return sum(f.pending for f in self._flows)

    def snapshot(self) -> dict[str, DynamicObject]:
        return dict(self.registry)

    def step(self, dt: float) -> list[str]:
        before = len(self.registry)
        self.registry, finished = step(self.registry, self.network, dt, t_headway=self.t_headway,
                                       jam_spacing=self.jam_spacing, skip=self.pinned)
        self.removed += len(finished)
        self.clock += dt
        born = 0
        for i, fs in enumerate(self._flows):
            while fs.next_arrival <= self.clock:
                fs.pending += 1
                fs.next_arrival = self._draw_gap(fs.spec, fs.rng, fs.next_arrival)
            while fs.pending and self._entry_clear(fs.spec):
                self._spawn(i, fs)
                born += 1
                if fs.spec.cls is ObjectClass.VEHICLE:
                    break
        self.spawned += born
        assert len(self.registry) == before - len(finished) + born
        return finished

    def _entry_clear(self, spec: FlowSpec) -> bool:
        if spec.cls is not ObjectClass.VEHICLE:
            return True
        need = max(spec.speed * self.t_headway, self.jam_spacing)
        first = spec.route[0]
        return not any(o.cls is ObjectClass.VEHICLE and o.segment_id == first
                       and o.arc_position < need for o in self.registry.values())

    def _spawn(self, idx: int, fs: _FlowState):
        spec = fs.spec
        oid = f"f{idx}-{fs.count:05d}"
        fs.count += 1
        fs.pending -= 1
        seg = self.network.segments[spec.route[0]]
        self.registry[oid] = DynamicObject(
            id=oid, cls=spec.cls, pose=seg.point_at(0.0), speed=spec.speed,
            dims=spec.dims or DEFAULT_DIMS[spec.cls], segment_id=seg.id, arc_position=0.0,
            free_speed=spec.speed, route=spec.route)



def path_to_node(route: Sequence[str], network: RoadNetwork, node: str) -> tuple[str, ...]:
    """Prefix of ``route`` up to and including the first segment that ends at ``node``."""
    for i, sid in enumerate(route):
        if network.segments[sid].to_node == node:
            return tuple(route[: i + 1])
    raise NodeUnreachable(f"node {node!r} is not on the current route")


def distance_to_node(ego: EgoState, network: RoadNetwork, node: str) -> float:
    """Along-route distance from the ego reference point (CoG) to ``node``."""
    obj = ego.object
    path = path_to_node(obj.route, network, node)
    dist = network.segments[path[0]].length - obj.arc_position
    for sid in path[1:]:
        dist += network.segments[sid].length
    return dist


def is_last_before_node(ego: EgoState, registry: Mapping[str, DynamicObject],
                        network: RoadNetwork, node: str) -> bool:
    """True iff no other vehicle sits between the ego and ``node`` on the ego's path."""
    obj = ego.object
    path = path_to_node(obj.route, network, node)
    last = len(path) - 1
    for other in registry.values():
        if other.id == obj.id or other.cls is not ObjectClass.VEHICLE:
            continue
        if other.segment_id not in path:
            continue
        i = path.index(other.segment_id)
        lo = obj.arc_position if i == 0 else -math.inf
        hi = network.segments[path[i]].length if i == last else math.inf
        if lo < other.arc_position < hi:
            return False
    return True
