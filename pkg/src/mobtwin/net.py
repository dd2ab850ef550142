"""Simulated V2X fabric: link classes, message envelopes, the event scheduler, latency accounting."""

from __future__ import annotations

import enum
import heapq
import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

Point = tuple[float, float]


@dataclass(frozen=True)
class Triangular:
    """Triangular distribution in seconds."""

    low: float
    mode: float
    high: float

    def __post_init__(self):
        if not (0 <= self.low <= self.mode <= self.high):
            raise ValueError(f"need 0 <= low <= mode <= high, got {self}")

    @classmethod
    def fixed(cls, value: float) -> "Triangular":
        return cls(value, value, value)

    @classmethod
    def from_seq(cls, values: Sequence[float]) -> "Triangular":
        if len(values) != 3:
            raise ValueError("triangular needs [min, mode, max]")
        return cls(*(float(v) for v in values))

    @property
    def mean(self) -> float:
        return (self.low + self.mode + self.high) / 3.0

    def scaled(self, factor: float) -> "Triangular":
        return Triangular(self.low * factor, self.mode * factor, self.high * factor)

    def sample(self, rng: np.random.Generator) -> float:
        if self.low == self.high:
            return self.low
        return float(rng.triangular(self.low, self.mode, self.high))

    def as_list(self) -> list[float]:
        return [self.low, self.mode, self.high]


class LinkClass(str, enum.Enum):
    CELLULAR = "cellular"
    DSRC = "dsrc"
    MMWAVE = "mmwave"
    # RSU <-> cloud backhaul ("Up & download")
    WIRED = "wired"


@dataclass(frozen=True)
class LinkModel:
    link_class: LinkClass
    latency: Triangular
    p_drop: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.p_drop <= 1.0:
            raise ValueError("p_drop must be in [0, 1]")


# Wi-Fi stands in for DSRC in the field test; cellular and mmWave are placeholders.
DEFAULT_LINKS = {
    LinkClass.DSRC: LinkModel(LinkClass.DSRC, Triangular(0.00181, 0.0158, 0.105)),
    LinkClass.CELLULAR: LinkModel(LinkClass.CELLULAR, Triangular(0.020, 0.050, 0.120)),
    LinkClass.MMWAVE: LinkModel(LinkClass.MMWAVE, Triangular(0.0005, 0.001, 0.003)),
}
DEFAULT_BACKHAUL = Triangular(0.00243, 0.00261, 0.00269)


@dataclass(frozen=True)
class Zone:
    x: float
    y: float
    radius: float

    def contains(self, p: Point) -> bool:
        return math.hypot(p[0] - self.x, p[1] - self.y) <= self.radius


@dataclass(frozen=True)
class LinkSelectionPolicy:
    mmwave: tuple[Zone, ...] = ()
    dsrc: tuple[Zone, ...] = ()


def select_link(policy: LinkSelectionPolicy, position: Point) -> LinkClass:
    """mmWave where covered, else DSRC where an RSU is in reach, else cellular."""
    if any(z.contains(position) for z in policy.mmwave):
        return LinkClass.MMWAVE
    if any(z.contains(position) for z in policy.dsrc):
        return LinkClass.DSRC
    return LinkClass.CELLULAR


# -- wire payloads -------------------------------------------------------------

class MessageKind(str, enum.Enum):
    DETECTION_UPLOAD = "DetectionUpload"
    EGO_STATUS = "EgoStatus"
    ROUTE_REQUEST = "RouteRequest"
    ROUTE_RESPONSE = "RouteResponse"


@dataclass(frozen=True)
class DetectionRecord:
    local_position: Point
    cls: str
    dims: tuple[float, float]
    confidence: float


@dataclass(frozen=True)
class DetectionUpload:
    rsu_id: str
    stamp: float
    detections: tuple[DetectionRecord, ...]

    def to_record(self) -> dict:
        return {"rsu_id": self.rsu_id, "stamp": self.stamp,
                "detections": [{"local_position": list(d.local_position), "class": d.cls,
                                "dims": list(d.dims), "confidence": d.confidence}
                               for d in self.detections]}

    @classmethod
    def from_record(cls, rec: dict) -> "DetectionUpload":
        return cls(rec["rsu_id"], float(rec["stamp"]), tuple(
            DetectionRecord(tuple(d["local_position"]), d["class"], tuple(d["dims"]),
                            float(d["confidence"]))
            for d in rec["detections"]))


@dataclass(frozen=True)
class EgoStatus:
    position: Point
    speed: float
    heading: float
    stamp: float

    def to_record(self) -> dict:
        return {"position": list(self.position), "speed": self.speed,
                "heading": self.heading, "stamp": self.stamp}

    @classmethod
    def from_record(cls, rec: dict) -> "EgoStatus":
        return cls(tuple(rec["position"]), float(rec["speed"]), float(rec["heading"]),
                   float(rec["stamp"]))


@dataclass(frozen=True)
class RouteRequest:
    ego_id: str
    n_o: str
    n_d: str
    stamp: float

    def to_record(self) -> dict:
        return {"ego_id": self.ego_id, "N_O": self.n_o, "N_D": self.n_d, "stamp": self.stamp}

    @classmethod
    def from_record(cls, rec: dict) -> "RouteRequest":
        return cls(rec["ego_id"], rec["N_O"], rec["N_D"], float(rec["stamp"]))


@dataclass(frozen=True)
class RouteResponse:
    request_id: int
    segments: tuple[str, ...]
    cost: float
    stamp: float

    def to_record(self) -> dict:
        return {"request_id": self.request_id, "segments": list(self.segments),
                "cost": self.cost, "stamp": self.stamp}

    @classmethod
    def from_record(cls, rec: dict) -> "RouteResponse":
        return cls(int(rec["request_id"]), tuple(rec["segments"]), float(rec["cost"]),
                   float(rec["stamp"]))


PAYLOAD_TYPES = {
    MessageKind.DETECTION_UPLOAD: DetectionUpload,
    MessageKind.EGO_STATUS: EgoStatus,
    MessageKind.ROUTE_REQUEST: RouteRequest,
    MessageKind.ROUTE_RESPONSE: RouteResponse,
}


@dataclass
class Message:
    id: int
    kind: MessageKind
    payload: Any
    src: str
    dst: str
    t_sent: float = 0.0
    t_delivered: float | None = None
    dropped: bool = False

    def to_record(self) -> dict:
        return {"id": self.id, "kind": self.kind.value, "payload": self.payload.to_record(),
                "src": self.src, "dst": self.dst, "t_sent": self.t_sent,
                "t_delivered": self.t_delivered}

    @classmethod
    def from_record(cls, rec: dict) -> "Message":
        kind = MessageKind(rec["kind"])
        return cls(int(rec["id"]), kind, PAYLOAD_TYPES[kind].from_record(rec["payload"]),
                   rec["src"], rec["dst"], float(rec["t_sent"]), rec.get("t_delivered"))


@dataclass(frozen=True)
class Delivery:
    message: Message
    at: float


def send(msg: Message, link: LinkModel, rng: np.random.Generator,
         now: float) -> Delivery | None:
    """Decide the fate of one transmission: a scheduled delivery, or ``None`` for a drop."""
    msg.t_sent = now
    if rng.random() < link.p_drop:
        msg.dropped = True
        return None
    return Delivery(msg, now + link.latency.sample(rng))


# -- scheduler -------------------------------------------------------------------

class Scheduler:
    """Single source of logical time.

    Events fire in ``(time, priority, sequence)`` order, so simultaneous
    events keep their scheduling order within a priority level.
    """

    def __init__(self, start: float = 0.0):
        self.now = start
        self._queue: list = []
        self._seq = itertools.count()

    def schedule(self, at: float, fn: Callable, *args, priority: int = 5):
        if at < self.now:
            raise ValueError(f"cannot schedule in the past ({at} < {self.now})")
        heapq.heappush(self._queue, (at, priority, next(self._seq), fn, args))

    def __len__(self):
        return len(self._queue)

    def run(self, until: float):
        while self._queue and self._queue[0][0] <= until:
            at, _, _, fn, args = heapq.heappop(self._queue)
            self.now = at
            fn(*args)
        self.now = max(self.now, until)


@dataclass
class Fabric:
    """Moves messages between endpoints over sampled links on the scheduler."""

    scheduler: Scheduler
    links: dict[LinkClass, LinkModel]
    rngs: dict[LinkClass, np.random.Generator]
    retransmit_timeout: float = 0.2
    delivered: int = 0
    dropped: int = 0
    retransmissions: int = 0
    log: list[Message] = field(default_factory=list)
    _ids: Any = field(default_factory=lambda: itertools.count(1))

    def new_message(self, kind: MessageKind, payload, src: str, dst: str) -> Message:
        return Message(next(self._ids), kind, payload, src, dst)

    def transmit(self, msg: Message, link_class: LinkClass, on_deliver: Callable[[Message], None],
                 *, retries: int = 0, link: LinkModel | None = None):
        link = link or self.links[link_class]
        now = self.scheduler.now
        self.log.append(msg)
        d = send(msg, link, self.rngs[link_class], now)
        if d is None:
            self.dropped += 1
            if retries > 0:
                self.retransmissions += 1
                copy = Message(msg.id, msg.kind, msg.payload, msg.src, msg.dst)
                self.scheduler.schedule(now + self.retransmit_timeout, self._retransmit, copy,
                                        link_class, on_deliver, retries - 1, link, priority=3)
            return
        self.scheduler.schedule(d.at, self._deliver, msg, on_deliver, priority=2)

    def _retransmit(self, msg, link_class, on_deliver, retries, link):
        self.transmit(msg, link_class, on_deliver, retries=retries, link=link)

    def _deliver(self, msg: Message, on_deliver):
        msg.t_delivered = self.scheduler.now
        self.delivered += 1
        on_deliver(msg)


# -- latency accounting -----------------------------------------------------------

class IncompleteTrace(ValueError):
    pass


@dataclass
class RequestTrace:
    """Timestamps collected for one route request on the shared logical clock."""

    request_id: int
    emitted_at: float | None = None
    captured_at: float | None = None
    edge_done_at: float | None = None
    cloud_received_at: float | None = None
    cloud_done_at: float | None = None
    received_at: float | None = None
    probe: bool = False


PHASES = ("edge_compute", "upload", "cloud_compute", "download")


@dataclass(frozen=True)
class LatencyReport:
    request_id: int
    edge_compute: float
    upload: float
    cloud_compute: float
    download: float
    total: float
    budget: float
    within_budget: bool
    emitted_at: float = 0.0
    captured_at: float = 0.0
    received_at: float = 0.0

    @property
    def phases(self) -> dict[str, float]:
        return {p: getattr(self, p) for p in PHASES}

    @property
    def end_to_end(self) -> float:
        """Trigger-to-receipt time, including the request uplink and capture wait."""
        return self.received_at - self.emitted_at

    def as_dict(self) -> dict:
        return asdict(self)


def account(trace: RequestTrace, budget: float) -> LatencyReport:
    """Turn a request trace into per-phase durations and a budget verdict."""
    stamps = ("captured_at", "edge_done_at", "cloud_received_at", "cloud_done_at", "received_at")
    missing = [s for s in stamps if getattr(trace, s) is None]
    if missing:
        raise IncompleteTrace(f"request {trace.request_id}: missing {', '.join(missing)}")
    t = [getattr(trace, s) for s in stamps]
    if any(b < a for a, b in zip(t, t[1:])):
        raise IncompleteTrace(f"request {trace.request_id}: timestamps out of order")
    edge, up, cloud, down = (b - a for a, b in zip(t, t[1:]))
    total = edge + up + cloud + down
    emitted = trace.emitted_at if trace.emitted_at is not None else trace.captured_at
    return LatencyReport(trace.request_id, edge, up, cloud, down, total, budget,
                         total <= budget, emitted, trace.captured_at, trace.received_at)
