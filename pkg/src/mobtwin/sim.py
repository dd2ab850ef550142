"""Scenario runner: wires traffic, RSU edges, the cloud and the ego onto one scheduler."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .cloud import (Batch, MotionTracker, OccupancySnapshot, Synchronizer, build_occupancy,
                    exclude_ego, fuse, globalize, window_index)
from .config import ScenarioConfig
from .edge import Detection, EdgeNode
from .metrics import (LATENCY_COLUMNS, OCCUPANCY_COLUMNS, ROUTE_COLUMNS, RunSummary, fmt,
                      latency_row, summarize, write_csv)
from .net import (EgoStatus, Fabric, LatencyReport, LinkClass, Message, MessageKind,
                  RequestTrace, RouteRequest, RouteResponse, Scheduler, account, select_link)
from .planner import RoutePlan, default_route, plan
from .traffic import EgoState, TrafficSim
from .vehicle import TriggerConfig, apply_plan, follow, should_trigger
from .world import DynamicObject, NodeRole, ObjectClass

log = logging.getLogger(__name__)

CLOUD = "cloud"

# event priorities at equal timestamps: traffic moves before sensors look
_TICK, _CAPTURE, _STATUS, _TIMEOUT = 0, 1, 4, 6


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


@dataclass
class _Pending:
    trace: RequestTrace
    arrived_at: float
    request: RouteRequest


class Simulation:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        net = self.network = cfg.network
        self.scheduler = Scheduler(0.0)
        self.traffic = TrafficSim(net, cfg.flows, np.random.SeedSequence(cfg.seed, spawn_key=(0,)),
                                  cfg.vehicle.t_headway, cfg.vehicle.jam_spacing,
                                  clock=-cfg.warmup)
        for _ in range(round(cfg.warmup / cfg.dt)):
            self.traffic.step(cfg.dt)
        self.traffic.clock = 0.0

        links = dict(cfg.links.models)
        rngs = {lc: rng_stream(cfg.seed, 3, i) for i, lc in enumerate(LinkClass)}
        self.fabric = Fabric(self.scheduler, links, rngs, cfg.links.retransmit_timeout)
        self.upload_link = cfg.links.upload()
        self.download_link = cfg.links.download()

        self.edges = [EdgeNode(net.rsus[rid], cfg.edge.noise, cfg.edge.latency_for(rid),
                               rng_stream(cfg.seed, 1, i))
                      for i, rid in enumerate(sorted(net.rsus))]
        self.cloud_rng = rng_stream(cfg.seed, 2)
        self.sync = Synchronizer(cfg.cloud.window, net.rsus)
        self.tracker = MotionTracker(cfg.cloud.k, cfg.cloud.v_stationary)
        self.pending: list[_Pending] = []
        self.ego_status: EgoStatus | None = None
        self.last_snapshot: OccupancySnapshot | None = None
        self.snapshots: dict[float, OccupancySnapshot] = {}

        self.trigger = TriggerConfig(cfg.vehicle.t_headway, cfg.vehicle.l_r)
        self.ego = self._make_ego()
        self.budget = self.trigger.budget(self.ego.v_ego)
        self.traffic.registry[self.ego.object.id] = self.ego.object
        self.traffic.pinned.add(self.ego.object.id)

        self.traces: dict[int, RequestTrace] = {}
        self.reports: list[LatencyReport] = []
        self.occupancy_rows: list[list[str]] = []
        self.latency_rows: list[list[str]] = []
        self.route_rows: list[list[str]] = []
        self.summary = RunSummary()

    # -- setup ---------------------------------------------------------------

    def _make_ego(self) -> EgoState:
        net, ec = self.network, self.cfg.ego
        start = net.segments[ec.start_segment]
        pose = start.point_at(ec.start_arc)
        origin = ec.origin or pose.position
        n_o = net.nearest_node(origin, NodeRole.ENTRANCE)
        dest = ec.destination or net.nodes[net.exits[0]].position
        n_d = net.nearest_node(dest, NodeRole.EXIT)
        if start.to_node == n_o:
            approach = (start.id,)
        else:
            rest = net.shortest_path(start.to_node, n_o)
            if rest is None:
                raise ValueError(f"entrance {n_o} unreachable from {start.id}")
            approach = (start.id, *rest)
        default = default_route(net, n_o, n_d).segments
        obj = DynamicObject(ec.id, ObjectClass.VEHICLE, pose, ec.v_ego, (4.5, 1.8), start.id,
                            ec.start_arc, free_speed=ec.v_ego, route=approach + default)
        return EgoState(obj, ec.v_ego, origin, dest, n_o, n_d, approach, default)

    # -- driver --------------------------------------------------------------

    def run(self) -> RunSummary:
        s = self.scheduler
        s.schedule(0.0, self._capture, 0, priority=_CAPTURE)
        s.schedule(self.cfg.dt, self._tick, 1, priority=_TICK)
        s.schedule(0.0, self._status, 0, priority=_STATUS)
        s.run(self.cfg.duration)
        return self._finish()

    def probe(self, at: float):
        """Issue an extra route request at ``at`` whose answer is measured but not adopted."""
        self.scheduler.schedule(at, self._emit_request, True, priority=_STATUS)

    def _tick(self, i: int):
        cfg = self.cfg
        self.traffic.step(cfg.dt)
        if not self.ego.arrived:
            self.ego = follow(self.ego, self.network, cfg.dt, self.traffic.registry,
                              t_headway=cfg.vehicle.t_headway, jam_spacing=cfg.vehicle.jam_spacing)
            if self.ego.arrived:
                del self.traffic.registry[self.ego.object.id]
                self.summary.ego_arrived_at = self.scheduler.now
            else:
                self.traffic.registry[self.ego.object.id] = self.ego.object
                if should_trigger(self.ego, self.traffic.registry, self.network,
                                  self.ego.entrance, self.trigger):
                    self.ego = replace(self.ego, triggered=True)
                    self._emit_request(False)
        nxt = i + 1
        if nxt * cfg.dt <= cfg.duration + 1e-9:
            self.scheduler.schedule(nxt * cfg.dt, self._tick, nxt, priority=_TICK)

    def _ego_link(self) -> LinkClass:
        return select_link(self.cfg.links.policy, self.ego.object.position)

    def _status(self, j: int):
        if not self.ego.arrived:
            o = self.ego.object
            status = EgoStatus(o.position, o.speed, o.pose.heading, self.scheduler.now)
            msg = self.fabric.new_message(MessageKind.EGO_STATUS, status, o.id, CLOUD)
            self.fabric.transmit(msg, self._ego_link(), self._on_status)
        nxt = j + 1
        t = nxt * self.cfg.vehicle.status_period
        if t <= self.cfg.duration:
            self.scheduler.schedule(t, self._status, nxt, priority=_STATUS)

    # -- RSU edges -----------------------------------------------------------

    def _capture(self, k: int):
        now = self.scheduler.now
        snap = self.traffic.snapshot()
        for edge in self.edges:
            upload, latency = edge.process(snap, now)
            self.scheduler.schedule(now + latency, self._edge_done, edge.rsu.id, upload,
                                    priority=_CAPTURE)
        self.scheduler.schedule(now + self.cfg.cloud.sync_timeout, self._sync_timeout, k,
                                priority=_TIMEOUT)
        nxt = k + 1
        t = nxt * self.cfg.cloud.window
        if t <= self.cfg.duration + 1e-9:
            self.scheduler.schedule(t, self._capture, nxt, priority=_CAPTURE)

    def _edge_done(self, rsu_id: str, upload):
        msg = self.fabric.new_message(MessageKind.DETECTION_UPLOAD, upload, rsu_id, CLOUD)
        self.fabric.transmit(msg, LinkClass.WIRED, self._on_upload, link=self.upload_link)

    # -- cloud ---------------------------------------------------------------

    def _on_status(self, msg: Message):
        st = msg.payload
        if self.ego_status is None or st.stamp > self.ego_status.stamp:
            self.ego_status = st

    def _on_request(self, msg: Message):
        trace = self.traces[msg.id]
        self.pending.append(_Pending(trace, self.scheduler.now, msg.payload))

    def _on_upload(self, msg: Message):
        up = msg.payload
        dets = [Detection.from_record(up.rsu_id, up.stamp, r) for r in up.detections]
        k = window_index(up.stamp, self.sync.window)
        if self.sync.push(up.rsu_id, up.stamp, dets, self.scheduler.now, msg.t_sent) \
                and self.sync.complete(k):
            self._release(k)

    def _sync_timeout(self, k: int):
        if k > self.sync.emitted_through:
            self._release(k)

    def _release(self, k: int):
        for batch in self.sync.close(k):
            if batch.sources:
                self._process(batch)

    def _predicted_ego(self, stamp: float):
        st = self.ego_status
        if st is None:
            return None
        lag = stamp - st.stamp
        return (st.position[0] + st.speed * lag * math.cos(st.heading),
                st.position[1] + st.speed * lag * math.sin(st.heading))

    def _process(self, batch: Batch):
        cc = self.cfg.cloud
        fused = fuse(globalize(batch.detections, self.network.rsus), cc.epsilon) \
            if batch.detections else []
        fused = self.tracker.update(fused, batch.start)
        counted = exclude_ego(fused, self._predicted_ego(batch.start), cc.epsilon)
        snap = build_occupancy(counted, self.network, cc.lateral_max, batch.start)
        bound = [p for p in self.pending if p.arrived_at <= batch.start + 1e-12]
        self.pending = [p for p in self.pending if p not in bound]
        latency = cc.compute_latency.sample(self.cloud_rng)
        self.scheduler.schedule(self.scheduler.now + latency, self._cloud_done, batch, snap,
                                bound, priority=_CAPTURE)

    def _cloud_done(self, batch: Batch, snap: OccupancySnapshot, bound: list[_Pending]):
        now = self.scheduler.now
        if self.last_snapshot is None or snap.stamp > self.last_snapshot.stamp:
            self.last_snapshot = snap
            self.snapshots[snap.stamp] = snap
            for sid in sorted(snap.counts):
                self.occupancy_rows.append([fmt(snap.stamp), sid, str(snap.counts[sid]),
                                            fmt(snap.occupancy[sid])])
        for p in bound:
            req = p.request
            decision = plan(self.network, snap, req.n_o, req.n_d, self.cfg.planner, now)
            tr = p.trace
            tr.captured_at = batch.start
            tr.cloud_received_at, tr.edge_done_at = batch.last_arrival
            tr.cloud_done_at = now
            self._log_decision(decision, tr, snap)
            resp = RouteResponse(tr.request_id, decision.segments, decision.cost, now)
            msg = self.fabric.new_message(MessageKind.ROUTE_RESPONSE, resp, CLOUD,
                                          self._serving_rsu())
            self.fabric.transmit(msg, LinkClass.WIRED, self._rsu_forward, retries=1,
                                 link=self.download_link)

    def _serving_rsu(self) -> str:
        pos = self.ego.object.position
        return min(self.network.rsus.values(),
                   key=lambda r: (math.dist(r.pose.position, pos), r.id)).id

    def _rsu_forward(self, msg: Message):
        fwd = self.fabric.new_message(MessageKind.ROUTE_RESPONSE, msg.payload, msg.dst,
                                      self.ego.object.id)
        self.fabric.transmit(fwd, self._ego_link(), self._on_response, retries=1)

    def _log_decision(self, decision: RoutePlan, tr: RequestTrace, snap: OccupancySnapshot):
        kind = "default" if decision.segments == self.ego.default_route else "alternative"
        row = {"decided_at": decision.decided_at, "request_id": tr.request_id, "probe": tr.probe,
               "snapshot_stamp": snap.stamp, "kind": kind, "segments": list(decision.segments),
               "total_length": decision.total_length, "max_occupancy": decision.max_occupancy,
               "cost": decision.cost}
        self.summary.routes.append(row)
        self.route_rows.append([fmt(decision.decided_at), str(tr.request_id), str(int(tr.probe)),
                                fmt(snap.stamp), kind, "|".join(decision.segments),
                                fmt(decision.total_length), fmt(decision.max_occupancy),
                                fmt(decision.cost)])

    # -- vehicle edge --------------------------------------------------------

    def _emit_request(self, probe: bool):
        ego = self.ego
        req = RouteRequest(ego.object.id, ego.entrance, ego.exit, self.scheduler.now)
        msg = self.fabric.new_message(MessageKind.ROUTE_REQUEST, req, ego.object.id, CLOUD)
        self.traces[msg.id] = RequestTrace(msg.id, emitted_at=self.scheduler.now, probe=probe)
        self.summary.requests += 1
        self.fabric.transmit(msg, self._ego_link(), self._on_request, retries=1)

    def _on_response(self, msg: Message):
        resp: RouteResponse = msg.payload
        tr = self.traces[resp.request_id]
        if tr.received_at is not None:
            return
        tr.received_at = self.scheduler.now
        report = account(tr, self.budget)
        self.reports.append(report)
        self.summary.responses += 1
        outcome = "probe"
        if not tr.probe:
            length = sum(self.network.segments[s].length for s in resp.segments)
            rp = RoutePlan(self.ego.entrance, self.ego.exit, resp.segments, length, math.nan,
                           resp.cost, resp.stamp)
            self.ego, result = apply_plan(self.ego, rp, report, self.network)
            outcome = "adopted" if result.adopted else result.reason
            if result.adopted:
                self.summary.adopted_route = list(resp.segments)
                self.traffic.registry[self.ego.object.id] = self.ego.object
        if not report.within_budget:
            self.summary.budget_violations.append(
                {"request_id": report.request_id, "total": report.total, "budget": report.budget})
        self.latency_rows.append(latency_row(report, tr.probe, outcome))

    # -- wrap-up -------------------------------------------------------------

    def _finish(self) -> RunSummary:
        s = self.summary
        if self.latency_rows:
            s.latency = summarize(dict(zip(LATENCY_COLUMNS, r)) for r in self.latency_rows)
        s.dropped_messages = self.fabric.dropped
        s.retransmissions = self.fabric.retransmissions
        s.late_uploads = self.sync.late_uploads
        s.late_detections = self.sync.late_detections
        s.spawned = self.traffic.spawned
        s.removed = self.traffic.removed
        return s

    def write_traces(self, out_dir: Path):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_csv(out_dir / "occupancy.csv", OCCUPANCY_COLUMNS, self.occupancy_rows)
        write_csv(out_dir / "latency.csv", LATENCY_COLUMNS, self.latency_rows)
        write_csv(out_dir / "routes.csv", ROUTE_COLUMNS, self.route_rows)
        self.summary.write(out_dir / "summary.json")


def run(cfg: ScenarioConfig, out_dir: Path | str | None = None) -> RunSummary:
    """Execute one scenario; when ``out_dir`` is given, write its trace files there."""
    sim = Simulation(cfg)
    summary = sim.run()
    if out_dir is not None:
        sim.write_traces(Path(out_dir))
    return summary
