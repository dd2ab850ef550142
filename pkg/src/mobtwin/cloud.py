"""Cloud plane: channel synchronisation, cooperative fusion, motion state, occupancy."""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .edge import Detection, from_local
from .net import Triangular
from .world import ObjectClass, Point, RoadNetwork, RsuSite, locate_on_segment

CLOUD_COMPUTE = Triangular(0.181, 0.188, 0.207)


class UnknownRsu(KeyError):
    pass


class Motion(str, enum.Enum):
    MOVING = "moving"
    STATIONARY = "stationary"


@dataclass(frozen=True)
class GlobalDetection:
    rsu_id: str
    stamp: float
    position: Point
    cls: ObjectClass
    dims: tuple[float, float]
    confidence: float = 1.0


@dataclass(frozen=True)
class FusedObject:
    global_position: Point
    cls: ObjectClass
    dims: tuple[float, float]
    supporting_rsus: frozenset[str]
    stamp: float
    motion: Motion = Motion.STATIONARY
    motion_provisional: bool = True
    # indices into the fused batch
    members: tuple[int, ...] = ()
    confidence: float = 1.0


def to_global(det: Detection, rsu: RsuSite | Mapping[str, RsuSite]) -> Point:
    if not isinstance(rsu, RsuSite):
        try:
            rsu = rsu[det.rsu_id]
        except KeyError:
            raise UnknownRsu(det.rsu_id) from None
    if rsu.id != det.rsu_id:
        raise UnknownRsu(f"detection from {det.rsu_id!r} given rsu {rsu.id!r}")
    return from_local(det.local_position, rsu.pose)


def globalize(dets: Iterable[Detection], rsus: Mapping[str, RsuSite]) -> list[GlobalDetection]:
    return [GlobalDetection(d.rsu_id, d.stamp, to_global(d, rsus), d.cls, d.dims, d.confidence)
            for d in dets]


# -- synchronisation -----------------------------------------------------------

def window_index(stamp: float, window: float) -> int:
    # tolerate capture stamps generated as k * window in floating point
    return math.floor(stamp / window + 1e-9)


@dataclass
class Batch:
    window: int
    start: float
    detections: list[Detection] = field(default_factory=list)
    sources: set[str] = field(default_factory=set)
    # (arrival time, edge-done time) of the last upload folded into the batch
    last_arrival: tuple[float, float] | None = None


class Synchronizer:
    """Buckets uploads into capture windows and releases them in window order."""

    def __init__(self, window: float, sources: Iterable[str] = ()):
        if not window > 0:
            raise ValueError("window must be > 0")
        self.window = window
        self.sources = frozenset(sources)
        self.open: dict[int, Batch] = {}
        self.emitted_through = -math.inf
        self.late_uploads = 0
        self.late_detections = 0
        self._seq = 0

    def push(self, rsu_id: str, stamp: float, detections: Sequence[Detection],
             arrived_at: float = 0.0, edge_done_at: float = 0.0) -> bool:
        k = window_index(stamp, self.window)
        if k <= self.emitted_through:
            self.late_uploads += 1
            self.late_detections += len(detections)
            return False
        batch = self.open.setdefault(k, Batch(k, k * self.window))
        batch.detections.extend(detections)
        batch.sources.add(rsu_id)
        if batch.last_arrival is None or arrived_at >= batch.last_arrival[0]:
            batch.last_arrival = (arrived_at, edge_done_at)
        return True

    def complete(self, k: int) -> bool:
        b = self.open.get(k)
        return b is not None and bool(self.sources) and self.sources <= b.sources

    def close(self, k: int) -> list[Batch]:
        """Release every window up to ``k`` (empty ones included for ``k`` itself)."""
        if k <= self.emitted_through:
            return []
        out = [self.open.pop(j) for j in sorted(self.open) if j < k]
        out.append(self.open.pop(k, None) or Batch(k, k * self.window))
        for b in out:
            b.detections.sort(key=lambda d: (d.stamp, d.rsu_id))
        self.emitted_through = k
        return out


def synchronize(inbox: Mapping[str, Sequence[Detection]], window: float) -> list[Batch]:
    """Drain per-RSU queues into window batches, in window order.

    Queues are read in RSU-id order; within a window detections are ordered
    by stamp, then RSU id, then queue position.
    """
    sync = Synchronizer(window, inbox)
    for rsu_id in sorted(inbox):
        for det in inbox[rsu_id]:
            sync.push(rsu_id, det.stamp, [det])
    if not sync.open:
        return []
    return sync.close(max(sync.open))


# -- fusion --------------------------------------------------------------------

def _components(points: np.ndarray, epsilon: float) -> list[int]:
    n = len(points)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    if n > 1:
        diff = points[:, None, :] - points[None, :, :]
        close = np.hypot(diff[..., 0], diff[..., 1]) <= epsilon
        ii, jj = np.nonzero(np.triu(close, 1))
        for i, j in zip(ii.tolist(), jj.tolist()):
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    return [find(i) for i in range(n)]


def fuse(batch: Sequence[GlobalDetection], epsilon: float = 1.5) -> list[FusedObject]:
    """Single-linkage merge of same-class detections within ``epsilon`` meters.

    The fused position is the confidence-weighted mean of the cluster. Output
    is ordered by each cluster's first member index.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    clusters: dict[int, list[int]] = {}
    by_class: dict[ObjectClass, list[int]] = {}
    for i, d in enumerate(batch):
        by_class.setdefault(d.cls, []).append(i)
    for idx in by_class.values():
        pts = np.array([batch[i].position for i in idx], dtype=float)
        for local, root in enumerate(_components(pts, epsilon)):
            clusters.setdefault(idx[root], []).append(idx[local])
    out = []
    for first in sorted(clusters):
        members = sorted(clusters[first])
        dets = [batch[i] for i in members]
        w = sum(d.confidence for d in dets)
        if w > 0:
            x = sum(d.confidence * d.position[0] for d in dets) / w
            y = sum(d.confidence * d.position[1] for d in dets) / w
        else:
            x = sum(d.position[0] for d in dets) / len(dets)
            y = sum(d.position[1] for d in dets) / len(dets)
        best = max(dets, key=lambda d: d.confidence)
        out.append(FusedObject((x, y), dets[0].cls, best.dims,
                               frozenset(d.rsu_id for d in dets), max(d.stamp for d in dets),
                               members=tuple(members), confidence=best.confidence))
    return out


# -- motion --------------------------------------------------------------------

def displacement_rate(history: Sequence[tuple[float, Point]]) -> float:
    (t0, p0), (t1, p1) = history[0], history[-1]
    if t1 <= t0:
        return 0.0
    return math.dist(p0, p1) / (t1 - t0)


def classify_motion(history: Sequence[tuple[float, Point]],
                    v_stationary: float = 0.3) -> Motion:
    """Moving iff the mean velocity over the history reaches ``v_stationary``.

    ``history`` is ``(stamp, position)`` pairs oldest first. Fewer than two
    samples cannot show motion and read as stationary.
    """
    if len(history) < 2:
        return Motion.STATIONARY
    return Motion.MOVING if displacement_rate(history) >= v_stationary else Motion.STATIONARY


@dataclass
class _Track:
    cls: ObjectClass
    history: deque


class MotionTracker:
    """Nearest-neighbour association of fused objects across windows."""

    def __init__(self, k: int = 5, v_stationary: float = 0.3, gate: float = 3.0,
                 max_age: float = 1.0):
        if k < 2:
            raise ValueError("k must be >= 2")
        self.k = k
        self.v_stationary = v_stationary
        self.gate = gate
        self.max_age = max_age
        self.tracks: dict[int, _Track] = {}
        self._next = 0

    def update(self, fused: Sequence[FusedObject], stamp: float) -> list[FusedObject]:
        pairs = []
        for tid, tr in self.tracks.items():
            last = tr.history[-1][1]
            for i, f in enumerate(fused):
                if f.cls is tr.cls:
                    d = math.dist(last, f.global_position)
                    if d <= self.gate:
                        pairs.append((d, tid, i))
        pairs.sort()
        used_t, assigned = set(), {}
        for d, tid, i in pairs:
            if tid in used_t or i in assigned:
                continue
            used_t.add(tid)
            assigned[i] = tid
        out = []
        for i, f in enumerate(fused):
            tid = assigned.get(i)
            if tid is None:
                tid = self._next
                self._next += 1
                self.tracks[tid] = _Track(f.cls, deque(maxlen=self.k))
            hist = self.tracks[tid].history
            hist.append((stamp, f.global_position))
            motion = classify_motion(hist, self.v_stationary)
            out.append(FusedObject(f.global_position, f.cls, f.dims, f.supporting_rsus, f.stamp,
                                   motion, len(hist) < self.k, f.members, f.confidence))
        for tid in [t for t, tr in self.tracks.items() if stamp - tr.history[-1][0] > self.max_age]:
            del self.tracks[tid]
        return out


# -- occupancy -----------------------------------------------------------------

@dataclass(frozen=True)
class OccupancySnapshot:
    stamp: float
    counts: dict[str, int]
    occupancy: dict[str, float]
    unassigned: int = 0

    @classmethod
    def from_counts(cls, network: RoadNetwork, counts: Mapping[str, int], stamp: float = 0.0,
                    unassigned: int = 0) -> "OccupancySnapshot":
        full = {sid: int(counts.get(sid, 0)) for sid in sorted(network.segments)}
        occ = {sid: min(1.0, c / network.segments[sid].capacity) for sid, c in full.items()}
        return cls(stamp, full, occ, unassigned)

    @property
    def assigned(self) -> int:
        return sum(self.counts.values())


def build_occupancy(fused: Iterable[FusedObject], network: RoadNetwork,
                    lateral_max: float = 2.0, stamp: float = 0.0) -> OccupancySnapshot:
    counts: dict[str, int] = {}
    unassigned = 0
    for f in fused:
        hit = locate_on_segment(network, f.global_position, lateral_max)
        if hit is None:
            unassigned += 1
        else:
            counts[hit[0]] = counts.get(hit[0], 0) + 1
    return OccupancySnapshot.from_counts(network, counts, stamp, unassigned)


def exclude_ego(fused: Sequence[FusedObject], ego_position: Point | None,
                epsilon: float) -> list[FusedObject]:
    """Drop the vehicle nearest the ego's reported position, if within ``epsilon``."""
    if ego_position is None:
        return list(fused)
    best = None
    for i, f in enumerate(fused):
        if f.cls is ObjectClass.VEHICLE:
            d = math.dist(f.global_position, ego_position)
            if d <= epsilon and (best is None or d < best[0]):
                best = (d, i)
    if best is None:
        return list(fused)
    return [f for i, f in enumerate(fused) if i != best[1]]
