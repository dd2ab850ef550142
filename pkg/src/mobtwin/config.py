"""Scenario documents: YAML/JSON with strict keys, resolved into typed config objects."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from .edge import EDGE_COMPUTE, NoiseModel
from .cloud import CLOUD_COMPUTE
from .net import (DEFAULT_BACKHAUL, DEFAULT_LINKS, LinkClass, LinkModel, LinkSelectionPolicy,
                  Triangular, Zone)
from .planner import PlannerConfig
from .traffic import FlowSpec
from .world import MapError, ObjectClass, RoadNetwork, load_network_file


class ConfigError(ValueError):
    """Scenario document failed validation."""


def _section(doc: Any, where: str, allowed: set[str], required: set[str] = frozenset()) -> dict:
    if doc is None:
        doc = {}
    if not isinstance(doc, Mapping):
        raise ConfigError(f"{where}: expected a mapping")
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    missing = set(required) - set(doc)
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)}")
    return dict(doc)


def _tri(value, where: str) -> Triangular:
    try:
        return Triangular.from_seq(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _point(value, where: str) -> tuple[float, float]:
    try:
        x, y = value
        return (float(x), float(y))
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected [x, y]") from None


@dataclass(frozen=True)
class EgoConfig:
    start_segment: str
    start_arc: float = 0.0
    v_ego: float = 20 / 3.6
    origin: tuple[float, float] | None = None
    destination: tuple[float, float] | None = None
    id: str = "ego"


@dataclass(frozen=True)
class EdgeConfig:
    noise: NoiseModel = NoiseModel()
    compute_latency: Triangular = EDGE_COMPUTE
    per_rsu: Mapping[str, Triangular] = field(default_factory=dict)

    def latency_for(self, rsu_id: str) -> Triangular:
        return self.per_rsu.get(rsu_id, self.compute_latency)


@dataclass(frozen=True)
class CloudConfig:
    window: float = 0.1
    epsilon: float = 1.5
    lateral_max: float = 2.0
    v_stationary: float = 0.3
    k: int = 5
    sync_timeout: float = 0.5
    compute_latency: Triangular = CLOUD_COMPUTE


@dataclass(frozen=True)
class VehicleConfig:
    t_headway: float = 3.0
    l_r: float = 0.7
    status_period: float = 0.1
    jam_spacing: float = 6.5


@dataclass(frozen=True)
class LinksConfig:
    models: Mapping[LinkClass, LinkModel] = field(default_factory=lambda: dict(DEFAULT_LINKS))
    backhaul: Triangular = DEFAULT_BACKHAUL
    backhaul_p_drop: float = 0.0
    upload_share: float = 0.5
    retransmit_timeout: float = 0.2
    policy: LinkSelectionPolicy = LinkSelectionPolicy()

    def upload(self) -> LinkModel:
        return LinkModel(LinkClass.WIRED, self.backhaul.scaled(self.upload_share),
                         self.backhaul_p_drop)

    def download(self) -> LinkModel:
        return LinkModel(LinkClass.WIRED, self.backhaul.scaled(1 - self.upload_share),
                         self.backhaul_p_drop)


@dataclass(frozen=True)
class ScenarioConfig:
    network: RoadNetwork
    ego: EgoConfig
    map_path: Path | None = None
    flows: tuple[FlowSpec, ...] = ()
    edge: EdgeConfig = EdgeConfig()
    cloud: CloudConfig = CloudConfig()
    planner: PlannerConfig = PlannerConfig()
    vehicle: VehicleConfig = VehicleConfig()
    links: LinksConfig = LinksConfig()
    seed: int = 0
    duration: float = 20.0
    dt: float = 0.1
    warmup: float = 0.0

    @property
    def window(self) -> float:
        return self.cloud.window

    def with_overrides(self, seed: int | None = None,
                       duration: float | None = None) -> "ScenarioConfig":
        cfg = replace(self, seed=self.seed if seed is None else int(seed),
                      duration=self.duration if duration is None else float(duration))
        if not cfg.duration > 0:
            raise ConfigError("duration must be > 0")
        return cfg


_TOP = {"map", "flows", "ego", "edge", "cloud", "planner", "vehicle", "links", "seed",
        "duration", "window", "dt", "warmup"}


def _flows(doc, network: RoadNetwork) -> tuple[FlowSpec, ...]:
    out = []
    for i, f in enumerate(doc or []):
        f = _section(f, f"flows[{i}]", {"entry_node", "route", "class", "spawn_rate", "speed",
                                         "dims"}, {"entry_node", "route", "spawn_rate", "speed"})
        try:
            spec = FlowSpec(str(f["entry_node"]), tuple(str(s) for s in f["route"]),
                            ObjectClass(f.get("class", "vehicle")), float(f["spawn_rate"]),
                            float(f["speed"]),
                            None if f.get("dims") is None else _point(f["dims"], "dims"))
            spec.validate(network)
        except ValueError as exc:
            raise ConfigError(f"flows[{i}]: {exc}") from None
        out.append(spec)
    return tuple(out)


def _links(doc) -> LinksConfig:
    classes = {c.value for c in DEFAULT_LINKS}
    d = _section(doc, "links", classes | {"backhaul", "retransmit_timeout", "zones"})
    models = dict(DEFAULT_LINKS)
    for name in classes:
        if name in d:
            m = _section(d[name], f"links.{name}", {"latency", "p_drop"}, {"latency"})
            lc = LinkClass(name)
            try:
                models[lc] = LinkModel(lc, _tri(m["latency"], f"links.{name}.latency"),
                                       float(m.get("p_drop", 0.0)))
            except ValueError as exc:
                raise ConfigError(f"links.{name}: {exc}") from None
    bh = _section(d.get("backhaul"), "links.backhaul", {"latency", "p_drop", "upload_share"})
    share = float(bh.get("upload_share", 0.5))
    if not 0 <= share <= 1:
        raise ConfigError("links.backhaul.upload_share must be in [0, 1]")
    zones = _section(d.get("zones"), "links.zones", {"mmwave", "dsrc"})

    def zone_list(key):
        out = []
        for i, z in enumerate(zones.get(key) or []):
            z = _section(z, f"links.zones.{key}[{i}]", {"x", "y", "radius"}, {"x", "y", "radius"})
            out.append(Zone(float(z["x"]), float(z["y"]), float(z["radius"])))
        return tuple(out)

    p_drop = float(bh.get("p_drop", 0.0))
    if not 0 <= p_drop <= 1:
        raise ConfigError("links.backhaul.p_drop must be in [0, 1]")
    return LinksConfig(
        models=models,
        backhaul=_tri(bh["latency"], "links.backhaul.latency") if "latency" in bh
        else DEFAULT_BACKHAUL,
        backhaul_p_drop=p_drop,
        upload_share=share,
        retransmit_timeout=float(d.get("retransmit_timeout", 0.2)),
        policy=LinkSelectionPolicy(zone_list("mmwave"), zone_list("dsrc")),
    )


def scenario_from_dict(doc, base_dir: Path | None = None,
                       network: RoadNetwork | None = None) -> ScenarioConfig:
    d = _section(doc, "scenario", _TOP, {"ego"} if network else {"map", "ego"})
    map_path = None
    if network is None:
        map_path = Path(d["map"])
        if not map_path.is_absolute() and base_dir is not None:
            map_path = base_dir / map_path
        if not map_path.exists():
            raise ConfigError(f"map document not found: {map_path}")
        try:
            network = load_network_file(map_path)
        except MapError as exc:
            raise ConfigError(f"map {map_path}: {exc}") from None

    try:
        e = _section(d["ego"], "ego", {"id", "start_segment", "start_arc", "v_ego", "origin",
                                       "destination"}, {"start_segment"})
        v = _section(d.get("vehicle"), "vehicle", {"t_headway", "l_r", "v_ego", "status_period",
                                                   "jam_spacing"})
        if "v_ego" in e and "v_ego" in v and float(e["v_ego"]) != float(v["v_ego"]):
            raise ConfigError("ego.v_ego and vehicle.v_ego disagree")
        v_ego = float(e.get("v_ego", v.get("v_ego", 20 / 3.6)))
        ego = EgoConfig(str(e["start_segment"]), float(e.get("start_arc", 0.0)), v_ego,
                        None if "origin" not in e else _point(e["origin"], "ego.origin"),
                        None if "destination" not in e
                        else _point(e["destination"], "ego.destination"),
                        str(e.get("id", "ego")))
        if ego.start_segment not in network.segments:
            raise ConfigError(f"ego.start_segment {ego.start_segment!r} not in map")
        if not 0 <= ego.start_arc <= network.segments[ego.start_segment].length:
            raise ConfigError("ego.start_arc outside the start segment")
        if not ego.v_ego > 0:
            raise ConfigError("ego.v_ego must be > 0")
        vehicle = VehicleConfig(float(v.get("t_headway", 3.0)), float(v.get("l_r", 0.7)),
                                float(v.get("status_period", 0.1)),
                                float(v.get("jam_spacing", 6.5)))
        if min(vehicle.t_headway, vehicle.l_r, vehicle.status_period, vehicle.jam_spacing) <= 0:
            raise ConfigError("vehicle parameters must be > 0")

        ed = _section(d.get("edge"), "edge", {"sigma_pos", "p_miss", "c_min", "compute_latency",
                                              "per_rsu"})
        per_rsu = {}
        for rid, tri in (ed.get("per_rsu") or {}).items():
            if rid not in network.rsus:
                raise ConfigError(f"edge.per_rsu: unknown rsu {rid!r}")
            per_rsu[str(rid)] = _tri(tri, f"edge.per_rsu.{rid}")
        edge = EdgeConfig(NoiseModel(float(ed.get("sigma_pos", 0.1)), float(ed.get("p_miss", 0.05)),
                                     float(ed.get("c_min", 0.5))),
                          _tri(ed["compute_latency"], "edge.compute_latency")
                          if "compute_latency" in ed else EDGE_COMPUTE, per_rsu)

        c = _section(d.get("cloud"), "cloud", {"window", "epsilon", "lateral_max", "v_stationary",
                                               "k", "sync_timeout", "compute_latency"})
        if "window" in d and "window" in c and float(d["window"]) != float(c["window"]):
            raise ConfigError("window and cloud.window disagree")
        cloud = CloudConfig(float(c.get("window", d.get("window", 0.1))),
                            float(c.get("epsilon", 1.5)), float(c.get("lateral_max", 2.0)),
                            float(c.get("v_stationary", 0.3)), int(c.get("k", 5)),
                            float(c.get("sync_timeout", 0.5)),
                            _tri(c["compute_latency"], "cloud.compute_latency")
                            if "compute_latency" in c else CLOUD_COMPUTE)
        if min(cloud.window, cloud.epsilon, cloud.lateral_max, cloud.sync_timeout) <= 0:
            raise ConfigError("cloud window, epsilon, lateral_max and sync_timeout must be > 0")
        if cloud.k < 2:
            raise ConfigError("cloud.k must be >= 2")

        p = _section(d.get("planner"), "planner", {"theta", "beta"})
        planner = PlannerConfig(float(p.get("theta", 0.5)), float(p.get("beta", 2.0)))

        cfg = ScenarioConfig(
            network=network, ego=ego, map_path=map_path, flows=_flows(d.get("flows"), network),
            edge=edge, cloud=cloud, planner=planner, vehicle=vehicle, links=_links(d.get("links")),
            seed=int(d.get("seed", 0)), duration=float(d.get("duration", 20.0)),
            dt=float(d.get("dt", 0.1)), warmup=float(d.get("warmup", 0.0)))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if not cfg.duration > 0 or not cfg.dt > 0 or cfg.warmup < 0:
        raise ConfigError("duration and dt must be > 0, warmup >= 0")
    if not network.entrances or not network.exits:
        raise ConfigError("map needs an entrance and an exit node")
    return cfg


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return scenario_from_dict(doc, path.parent)
