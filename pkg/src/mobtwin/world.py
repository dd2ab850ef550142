"""Static twin content (road graph, lane geometry, RSU sites) and ground-truth objects."""

from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import yaml

Point = tuple[float, float]

VEHICLE_DESIGN_LENGTH = 4.5
MIN_GAP = 2.0
# distances closer than this count as equal when breaking projection ties
TIE_TOLERANCE = 1e-9


class MapError(ValueError):
    """Base error for map documents."""


class MapParseError(MapError):
    pass


class MapValidationError(MapError):
    pass


class NodeRole(str, enum.Enum):
    PLAIN = "plain"
    ENTRANCE = "entrance"
    EXIT = "exit"


class ObjectClass(str, enum.Enum):
    VEHICLE = "vehicle"
    PEDESTRIAN = "pedestrian"
    CYCLIST = "cyclist"


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float = 0.0

    @property
    def position(self) -> Point:
        return (self.x, self.y)


@dataclass(frozen=True)
class RoadNode:
    id: str
    position: Point
    role: NodeRole = NodeRole.PLAIN


def polyline_length(points: Sequence[Point]) -> float:
    return sum(math.dist(a, b) for a, b in zip(points, points[1:]))


def default_capacity(length: float) -> int:
    """Jam-density proxy: how many design vehicles fit bumper to bumper."""
    return max(1, math.floor(length / (VEHICLE_DESIGN_LENGTH + MIN_GAP)))


@dataclass(frozen=True)
class RoadSegment:
    id: str
    from_node: str
    to_node: str
    polyline: tuple[Point, ...]
    capacity: int = 0
    length: float = field(init=False)
    # cumulative arc length at each polyline vertex
    vertex_arcs: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.polyline)
        object.__setattr__(self, "polyline", pts)
        arcs = [0.0]
        for a, b in zip(pts, pts[1:]):
            arcs.append(arcs[-1] + math.dist(a, b))
        object.__setattr__(self, "vertex_arcs", tuple(arcs))
        object.__setattr__(self, "length", arcs[-1])
        if self.capacity == 0:
            object.__setattr__(self, "capacity", default_capacity(self.length))

    def point_at(self, arc: float) -> Pose:
        """Pose on the polyline at ``arc`` meters from its start (clamped)."""
        pts, arcs = self.polyline, self.vertex_arcs
        arc = min(max(arc, 0.0), self.length)
        i = 0
        while i < len(pts) - 2 and arcs[i + 1] < arc:
            i += 1
        (x0, y0), (x1, y1) = pts[i], pts[i + 1]
        span = arcs[i + 1] - arcs[i]
        t = 0.0 if span == 0 else (arc - arcs[i]) / span
        return Pose(x0 + t * (x1 - x0), y0 + t * (y1 - y0), math.atan2(y1 - y0, x1 - x0))

    def project(self, point: Point) -> tuple[float, float]:
        """Return ``(distance, arc)`` of the nearest point of the polyline.

        Among equidistant feet the one with the smallest arc wins.
        """
        px, py = point
        best_d, best_arc = math.inf, 0.0
        for i, ((x0, y0), (x1, y1)) in enumerate(zip(self.polyline, self.polyline[1:])):
            dx, dy = x1 - x0, y1 - y0
            seg2 = dx * dx + dy * dy
            t = 0.0 if seg2 == 0 else ((px - x0) * dx + (py - y0) * dy) / seg2
            t = min(max(t, 0.0), 1.0)
            d = math.hypot(px - (x0 + t * dx), py - (y0 + t * dy))
            if d < best_d:
                best_d = d
                best_arc = self.vertex_arcs[i] + t * math.sqrt(seg2)
        return best_d, best_arc


@dataclass(frozen=True)
class RsuSite:
    id: str
    pose: Pose
    sensing_range: float

    def __post_init__(self):
        if not self.sensing_range > 0:
            raise MapValidationError(f"rsu {self.id}: sensing_range must be > 0")


@dataclass(frozen=True)
class DynamicObject:
    """A ground-truth traffic participant.

    ``arc_position`` is measured along ``segment_id``; ``route`` holds the
    remaining segments including the current one at ``route[0]``.
    """

    id: str
    cls: ObjectClass
    pose: Pose
    speed: float
    dims: tuple[float, float]
    segment_id: str
    arc_position: float
    free_speed: float = 0.0
    route: tuple[str, ...] = ()

    @property
    def position(self) -> Point:
        return self.pose.position


class RoadNetwork:
    """Immutable directed road graph plus the RSU sites watching it."""

    def __init__(self, nodes: Iterable[RoadNode], segments: Iterable[RoadSegment],
                 rsus: Iterable[RsuSite] = ()):
        self.nodes: dict[str, RoadNode] = {}
        for n in nodes:
            if n.id in self.nodes:
                raise MapValidationError(f"duplicate node id {n.id!r}")
            self.nodes[n.id] = n
        self.segments: dict[str, RoadSegment] = {}
        for s in segments:
            if s.id in self.segments:
                raise MapValidationError(f"duplicate segment id {s.id!r}")
            self.segments[s.id] = s
        self.rsus: dict[str, RsuSite] = {}
        for r in rsus:
            if r.id in self.rsus:
                raise MapValidationError(f"duplicate rsu id {r.id!r}")
            self.rsus[r.id] = r
        self.adjacency: dict[str, tuple[str, ...]] = {n: () for n in self.nodes}
        for sid in sorted(self.segments):
            seg = self.segments[sid]
            for end in (seg.from_node, seg.to_node):
                if end not in self.nodes:
                    raise MapValidationError(f"segment {sid}: unknown node {end!r}")
            self.adjacency[seg.from_node] += (sid,)
        self._validate()

    def _validate(self):
        for s in self.segments.values():
            if s.from_node == s.to_node:
                raise MapValidationError(f"segment {s.id}: from_node equals to_node")
            if len(s.polyline) < 2:
                raise MapValidationError(f"segment {s.id}: polyline needs at least 2 points")
            if not s.length > 0:
                raise MapValidationError(f"segment {s.id}: zero length")
            if s.capacity < 1:
                raise MapValidationError(f"segment {s.id}: capacity must be >= 1")
        for e in self.entrances:
            reach = self.reachable_from(e)
            for x in self.exits:
                if x not in reach:
                    raise MapValidationError(f"exit {x} unreachable from entrance {e}")

    @property
    def entrances(self) -> list[str]:
        return sorted(n.id for n in self.nodes.values() if n.role is NodeRole.ENTRANCE)

    @property
    def exits(self) -> list[str]:
        return sorted(n.id for n in self.nodes.values() if n.role is NodeRole.EXIT)

    def reachable_from(self, node: str) -> set[str]:
        seen, stack = {node}, [node]
        while stack:
            for sid in self.adjacency[stack.pop()]:
                nxt = self.segments[sid].to_node
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen

    def shortest_path(self, src: str, dst: str) -> tuple[str, ...] | None:
        """Length-shortest segment path; ties go to the lexicographically smaller id tuple."""
        heap = [(0.0, (), src)]
        done = set()
        while heap:
            d, path, node = heapq.heappop(heap)
            if node in done:
                continue
            if node == dst:
                return path
            done.add(node)
            for sid in self.adjacency[node]:
                seg = self.segments[sid]
                if seg.to_node not in done:
                    heapq.heappush(heap, (d + seg.length, path + (sid,), seg.to_node))
        return None

    def nearest_node(self, point: Point, role: NodeRole | None = None) -> str:
        cands = [n for n in self.nodes.values() if role is None or n.role is role]
        if not cands:
            raise MapValidationError(f"no node with role {role}")
        return min(cands, key=lambda n: (math.dist(n.position, point), n.id)).id

    def translated(self, dx: float, dy: float) -> "RoadNetwork":
        """Copy of the network rigidly shifted by ``(dx, dy)``."""
        return RoadNetwork(
            [RoadNode(n.id, (n.position[0] + dx, n.position[1] + dy), n.role)
             for n in self.nodes.values()],
            [RoadSegment(s.id, s.from_node, s.to_node,
                         tuple((x + dx, y + dy) for x, y in s.polyline), s.capacity)
             for s in self.segments.values()],
            [RsuSite(r.id, Pose(r.pose.x + dx, r.pose.y + dy, r.pose.heading), r.sensing_range)
             for r in self.rsus.values()],
        )


def locate_on_segment(network: RoadNetwork, point: Point,
                      lateral_max: float) -> tuple[str, float] | None:
    """Project ``point`` onto the nearest segment polyline.

    Returns ``(segment_id, arc)`` when the perpendicular distance is within
    ``lateral_max``; segments equidistant within ``TIE_TOLERANCE`` resolve to
    the smallest id.
    """
    if not lateral_max > 0:
        raise ValueError("lateral_max must be > 0")
    best = None
    for sid in sorted(network.segments):
        d, arc = network.segments[sid].project(point)
        if d <= lateral_max and (best is None or d < best[0] - TIE_TOLERANCE):
            best = (d, sid, arc)
    return None if best is None else (best[1], best[2])


# -- map documents -----------------------------------------------------------

_TOP_KEYS = {"nodes", "segments", "rsus"}
_NODE_KEYS = {"id", "x", "y", "role"}
_SEGMENT_KEYS = {"id", "from", "to", "polyline", "capacity"}
_RSU_KEYS = {"id", "x", "y", "heading", "range"}


def _check_keys(record, allowed: set[str], required: set[str], where: str):
    if not isinstance(record, Mapping):
        raise MapParseError(f"{where}: expected a mapping, got {type(record).__name__}")
    unknown = set(record) - allowed
    if unknown:
        raise MapParseError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(record)
    if missing:
        raise MapParseError(f"{where}: missing keys {sorted(missing)}")


def network_from_dict(doc) -> RoadNetwork:
    _check_keys(doc, _TOP_KEYS, {"nodes", "segments"}, "map")
    try:
        nodes = []
        for i, n in enumerate(doc["nodes"]):
            _check_keys(n, _NODE_KEYS, {"id", "x", "y"}, f"nodes[{i}]")
            nodes.append(RoadNode(str(n["id"]), (float(n["x"]), float(n["y"])),
                                  NodeRole(n.get("role", "plain"))))
        segments = []
        for i, s in enumerate(doc["segments"]):
            _check_keys(s, _SEGMENT_KEYS, {"id", "from", "to", "polyline"}, f"segments[{i}]")
            poly = tuple((float(p[0]), float(p[1])) for p in s["polyline"])
            if any(len(p) != 2 for p in s["polyline"]):
                raise MapParseError(f"segments[{i}]: polyline points must be [x, y]")
            segments.append(RoadSegment(str(s["id"]), str(s["from"]), str(s["to"]), poly,
                                        int(s.get("capacity", 0))))
        rsus = []
        for i, r in enumerate(doc.get("rsus") or []):
            _check_keys(r, _RSU_KEYS, {"id", "x", "y", "range"}, f"rsus[{i}]")
            rsus.append(RsuSite(str(r["id"]), Pose(float(r["x"]), float(r["y"]),
                                                   float(r.get("heading", 0.0))),
                                float(r["range"])))
    except (TypeError, KeyError, IndexError) as exc:
        raise MapParseError(f"malformed map document: {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, MapError):
            raise
        raise MapParseError(f"malformed map document: {exc}") from exc
    return RoadNetwork(nodes, segments, rsus)


def load_network(map_document: str) -> RoadNetwork:
    """Parse a YAML (or JSON) map document into a validated network."""
    try:
        doc = yaml.safe_load(map_document)
    except yaml.YAMLError as exc:
        raise MapParseError(str(exc)) from exc
    return network_from_dict(doc)


def load_network_file(path: str | Path) -> RoadNetwork:
    return load_network(Path(path).read_text())


def network_to_dict(network: RoadNetwork) -> dict:
    return {
        "nodes": [{"id": n.id, "x": n.position[0], "y": n.position[1], "role": n.role.value}
                  for n in network.nodes.values()],
        "segments": [{"id": s.id, "from": s.from_node, "to": s.to_node,
                      "polyline": [list(p) for p in s.polyline], "capacity": s.capacity}
                     for s in network.segments.values()],
        "rsus": [{"id": r.id, "x": r.pose.x, "y": r.pose.y, "heading": r.pose.heading,
                  "range": r.sensing_range} for r in network.rsus.values()],
    }


def dump_network(network: RoadNetwork) -> str:
    return yaml.safe_dump(network_to_dict(network), sort_keys=False)
