"""RSU edge: geometric sensing in the sensor frame, a noisy detector, edge-compute latency."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .net import DetectionRecord, DetectionUpload, Triangular
from .world import DynamicObject, ObjectClass, Point, Pose, RsuSite

EDGE_COMPUTE = Triangular(0.102, 0.107, 0.173)


def to_local(point: Point, pose: Pose) -> Point:
    """Global point expressed in a frame at ``pose`` (counter-clockwise heading)."""
    dx, dy = point[0] - pose.x, point[1] - pose.y
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    return (c * dx + s * dy, -s * dx + c * dy)


def from_local(point: Point, pose: Pose) -> Point:
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    return (pose.x + c * point[0] - s * point[1], pose.y + s * point[0] + c * point[1])


@dataclass(frozen=True)
class Observation:
    object_id: str
    local_position: Point
    cls: ObjectClass
    dims: tuple[float, float]


@dataclass(frozen=True)
class SensorFrame:
    rsu_id: str
    stamp: float
    observations: tuple[Observation, ...]


@dataclass(frozen=True)
class Detection:
    rsu_id: str
    stamp: float
    local_position: Point
    cls: ObjectClass
    dims: tuple[float, float]
    confidence: float

    def to_record(self) -> DetectionRecord:
        return DetectionRecord(self.local_position, self.cls.value, self.dims, self.confidence)

    @classmethod
    def from_record(cls, rsu_id: str, stamp: float, rec: DetectionRecord) -> "Detection":
        return cls(rsu_id, stamp, tuple(rec.local_position), ObjectClass(rec.cls),
                   tuple(rec.dims), rec.confidence)


@dataclass(frozen=True)
class NoiseModel:
    sigma_pos: float = 0.1
    p_miss: float = 0.05
    c_min: float = 0.5

    def __post_init__(self):
        if self.sigma_pos < 0:
            raise ValueError("sigma_pos must be >= 0")
        if not 0 <= self.p_miss <= 1:
            raise ValueError("p_miss must be in [0, 1]")
        if not 0 <= self.c_min <= 1:
            raise ValueError("c_min must be in [0, 1]")


def sense(snapshot: Mapping[str, DynamicObject], rsu: RsuSite, stamp: float = 0.0) -> SensorFrame:
    obs = []
    for oid in sorted(snapshot):
        obj = snapshot[oid]
        if math.dist(obj.position, rsu.pose.position) <= rsu.sensing_range:
            obs.append(Observation(oid, to_local(obj.position, rsu.pose), obj.cls, obj.dims))
    return SensorFrame(rsu.id, stamp, tuple(obs))


def detect(frame: SensorFrame, noise: NoiseModel, rng: np.random.Generator,
           compute_latency: Triangular = EDGE_COMPUTE) -> tuple[list[Detection], float]:
    """Run the abstract detector over one frame.

    Each observation is missed with probability ``p_miss``; survivors get
    isotropic Gaussian position error.  Confidence decays with the error
    actually applied, ``c_min + (1 - c_min) * exp(-r^2 / 2 sigma^2)``, which is
    uniform on ``[c_min, 1]`` for 2D Gaussian error and exactly 1 when
    ``sigma_pos`` is 0.
    """
    n = len(frame.observations)
    keep = rng.random(n) >= noise.p_miss
    err = rng.normal(0.0, noise.sigma_pos, size=(n, 2)).tolist() if noise.sigma_pos > 0 else None
    keep = keep.tolist()
    out = []
    for i, ob in enumerate(frame.observations):
        if not keep[i]:
            continue
        x, y = ob.local_position
        conf = 1.0
        if err is not None:
            ex, ey = err[i]
            x, y = x + ex, y + ey
            conf = noise.c_min + (1 - noise.c_min) * math.exp(
                -(ex * ex + ey * ey) / (2 * noise.sigma_pos ** 2))
        out.append(Detection(frame.rsu_id, frame.stamp, (float(x), float(y)), ob.cls, ob.dims,
                             float(conf)))
    return out, compute_latency.sample(rng)


class EdgeNode:
    """One RSU logical process: capture, detect, then hand back an upload payload."""

    def __init__(self, rsu: RsuSite, noise: NoiseModel, compute_latency: Triangular,
                 rng: np.random.Generator):
        self.rsu = rsu
        self.noise = noise
        self.compute_latency = compute_latency
        self.rng = rng

    def process(self, snapshot: Mapping[str, DynamicObject],
                stamp: float) -> tuple[DetectionUpload, float]:
        frame = sense(snapshot, self.rsu, stamp)
        dets, latency = detect(frame, self.noise, self.rng, self.compute_latency)
        return DetectionUpload(self.rsu.id, stamp, tuple(d.to_record() for d in dets)), latency
