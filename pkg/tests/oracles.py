"""Independent reference implementations the tests compare the package against.

These are deliberately naive: full scans, exhaustive enumeration, fixed-point
iteration.  None of them calls into the code under test beyond plain data types.
"""

from __future__ import annotations

import math
import statistics
from collections import defaultdict

from mobtwin.world import ObjectClass


def project_brute(network, point, lateral_max):
    """Nearest polyline foot over every subsegment of every segment."""
    best = None
    for sid in network.segments:
        seg = network.segments[sid]
        walked = 0.0
        for a, b in zip(seg.polyline, seg.polyline[1:]):
            ax, ay = a
            bx, by = b
            L = math.hypot(bx - ax, by - ay)
            if L == 0:
                continue
            ux, uy = (bx - ax) / L, (by - ay) / L
            s = (point[0] - ax) * ux + (point[1] - ay) * uy
            s = min(max(s, 0.0), L)
            fx, fy = ax + s * ux, ay + s * uy
            d = math.hypot(point[0] - fx, point[1] - fy)
            key = (d, sid)
            if d <= lateral_max and (best is None or key < best[0]):
                best = (key, walked + s)
            walked += L
    return None if best is None else (best[0][1], best[1])


def arc_walk(network, route, arc, node):
    """Distance along ``route`` from ``arc`` on its first segment to ``node``, vertex by vertex."""
    total = 0.0
    for i, sid in enumerate(route):
        seg = network.segments[sid]
        pts = seg.polyline
        cum = 0.0
        for a, b in zip(pts, pts[1:]):
            step = math.dist(a, b)
            if i == 0:
                lo = max(cum, arc)
                total += max(0.0, cum + step - lo)
            else:
                total += step
            cum += step
        if seg.to_node == node:
            return total
    raise ValueError("node not on route")


def last_before_scan(ego_obj, registry, network, node):
    """Full scan: is any other vehicle strictly between the ego and ``node`` along its route?"""
    offsets, off = {}, 0.0
    for sid in ego_obj.route:
        offsets.setdefault(sid, off)
        off += network.segments[sid].length
        if network.segments[sid].to_node == node:
            break
    node_at = off
    ego_at = ego_obj.arc_position
    for o in registry.values():
        if o.id == ego_obj.id or o.cls is not ObjectClass.VEHICLE or o.segment_id not in offsets:
            continue
        at = offsets[o.segment_id] + o.arc_position
        if ego_at < at < node_at:
            return False
    return True


def reference_step(registry, network, dt, t_headway, jam_spacing, skip=()):
    """Per-object integrator: fixed-point sweep over leaders found by brute-force scan."""
    skip = set(skip)
    leader = {}
    for oid, o in registry.items():
        if o.cls is not ObjectClass.VEHICLE or oid in skip:
            continue
        nxt = o.route[1] if len(o.route) > 1 else None
        cands = []
        for pid, p in registry.items():
            if pid == oid or p.cls is not ObjectClass.VEHICLE:
                continue
            if p.segment_id == o.segment_id:
                if (p.arc_position, pid) > (o.arc_position, oid):
                    cands.append((p.arc_position - o.arc_position, pid))
            elif p.segment_id == nxt:
                gap = network.segments[o.segment_id].length - o.arc_position + p.arc_position
                cands.append((gap, pid))
        if cands:
            # closest leader; on the own segment ordering is by (arc, id)
            same = [c for c in cands if registry[c[1]].segment_id == o.segment_id]
            pool = same or cands
            leader[oid] = min(pool, key=lambda c: (registry[c[1]].arc_position, c[1])) if same \
                else min(pool)
        else:
            leader[oid] = None
    travel = {oid: 0.0 for oid in skip if oid in registry}
    for oid, o in registry.items():
        if o.cls is not ObjectClass.VEHICLE:
            travel[oid] = o.free_speed * dt
    while len(travel) < len(registry):
        progressed = False
        for oid, lead in leader.items():
            if oid in travel:
                continue
            if lead is None:
                travel[oid] = registry[oid].free_speed * dt
                progressed = True
            elif lead[1] in travel:
                o = registry[oid]
                need = max(o.free_speed * t_headway, jam_spacing)
                allowed = lead[0] + travel[lead[1]] - need
                travel[oid] = min(max(allowed, 0.0), o.free_speed * dt)
                progressed = True
        if not progressed:
            raise RuntimeError("leader cycle")
    out, finished = {}, []
    for oid, o in registry.items():
        if oid in skip:
            out[oid] = (o.segment_id, o.arc_position)
            continue
        arc, route = o.arc_position + travel[oid], list(o.route)
        while route and arc > network.segments[route[0]].length:
            arc -= network.segments[route[0]].length
            route.pop(0)
        if not route:
            finished.append(oid)
        else:
            out[oid] = (route[0], arc)
    return out, finished


def components_brute(points, classes, epsilon):
    """Connected components of the same-class <=epsilon graph by repeated BFS."""
    n = len(points)
    label = [-1] * n
    for s in range(n):
        if label[s] != -1:
            continue
        label[s] = s
        frontier = [s]
        while frontier:
            i = frontier.pop()
            for j in range(n):
                if label[j] == -1 and classes[j] == classes[i] \
                        and math.dist(points[i], points[j]) <= epsilon:
                    label[j] = s
                    frontier.append(j)
    groups = defaultdict(list)
    for i, lab in enumerate(label):
        groups[lab].append(i)
    return sorted(tuple(g) for g in groups.values())


def sort_partition(inbox, window):
    """Flatten, stably sort by (stamp, rsu id), cut at window boundaries."""
    flat = []
    for rsu_id in sorted(inbox):
        for pos, det in enumerate(inbox[rsu_id]):
            flat.append((det.stamp, rsu_id, pos, det))
    flat.sort(key=lambda t: t[:3])
    out = defaultdict(list)
    for stamp, _, _, det in flat:
        out[math.floor(stamp / window + 1e-9)].append(det)
    return dict(out)


def simple_paths(network, src, dst):
    """Every simple path as a tuple of segment ids (depth-first, exhaustive)."""
    found = []

    def walk(node, seen, path):
        if node == dst:
            found.append(tuple(path))
            return
        for sid, seg in network.segments.items():
            if seg.from_node == node and seg.to_node not in seen:
                walk(seg.to_node, seen | {seg.to_node}, path + [sid])

    walk(src, {src}, [])
    return found


def best_path(network, src, dst, occ, beta):
    """Minimum (cost, length, ids) over all simple paths; cost summed left to right."""
    best = None
    for p in simple_paths(network, src, dst):
        cost = length = 0.0
        for sid in p:
            L = network.segments[sid].length
            cost += L * (1.0 + beta * occ.get(sid, 0.0))
            length += L
        key = (cost, length, p)
        if best is None or key < best:
            best = key
    return best


def link_by_precedence(position, mmwave_zones, dsrc_zones):
    for cls, zones in (("mmwave", mmwave_zones), ("dsrc", dsrc_zones)):
        for z in zones:
            if (position[0] - z.x) ** 2 + (position[1] - z.y) ** 2 <= z.radius ** 2:
                return cls
    return "cellular"


def stats_oracle(values):
    avg = statistics.fmean(values)
    return min(values), avg, max(values), statistics.fmean(abs(v - avg) for v in values)
