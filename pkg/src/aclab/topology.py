"""Network topologies and replica-pair delay matrices.

Topology files are plain text, one record per line::

    speed-kms 200000          # propagation speed, km/s
    delay-range-us 500 1500   # draw range for links without km= or us=
    node Seattle 47.606 -122.332
    node agg0                 # coordinates optional
    link Seattle Denver geo   # haversine distance from node coordinates
    link Seattle Denver km=1641.6
    link agg0 edge1 us=750
    link agg0 edge2           # bare: delay drawn uniformly from the range
    placement Seattle Chicago New_York Washington_DC Atlanta

The placement line lists the nodes hosting controller replicas; its order
assigns replica ids 0..C-1. One-way delays between replicas are all-pairs
shortest paths over the link delays, geographic links being converted via
haversine distance / propagation speed.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from .engine import ConfigError, derive_seed

EARTH_RADIUS_KM = 6371.0
DEFAULT_SPEED_KMS = 200_000.0  # light in fiber; see config for alternatives


@dataclass
class Topology:
    name: str = "topology"
    nodes: dict[str, tuple[float, float] | None] = field(default_factory=dict)
    links: list[tuple[str, str, str, float | None]] = field(default_factory=list)
    placement: list[str] = field(default_factory=list)
    speed_kms: float = DEFAULT_SPEED_KMS
    delay_range_us: tuple[int, int] = (500, 1500)

    def validate(self) -> None:
        if not self.nodes:
            raise ConfigError("topology has no nodes")
        for u, v, _, _ in self.links:
            for n in (u, v):
                if n not in self.nodes:
                    raise ConfigError(f"link references unknown node {n!r}")
        for n in self.placement:
            if n not in self.nodes:
                raise ConfigError(f"placement references unknown node {n!r}")


def haversine_km(a: tuple[float, float], b: tuple[float, float]) -> float:
    lat1, lon1, lat2, lon2 = map(math.radians, (*a, *b))
    s = (math.sin((lat2 - lat1) / 2) ** 2
         + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2)
    return 2 * EARTH_RADIUS_KM * math.asin(math.sqrt(s))


def parse_topology(text: str, name: str = "topology") -> Topology:
    topo = Topology(name=name)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind, args = parts[0], parts[1:]
        try:
            if kind == "speed-kms":
                topo.speed_kms = float(args[0])
            elif kind == "delay-range-us":
                topo.delay_range_us = (int(args[0]), int(args[1]))
            elif kind == "node":
                if len(args) == 1:
                    topo.nodes[args[0]] = None
                else:
                    topo.nodes[args[0]] = (float(args[1]), float(args[2]))
            elif kind == "link":
                u, v = args[0], args[1]
                if len(args) == 2:
                    topo.links.append((u, v, "draw", None))
                elif args[2] == "geo":
                    topo.links.append((u, v, "geo", None))
                else:
                    key, val = args[2].split("=", 1)
                    if key not in ("km", "us"):
                        raise ValueError(f"unknown link attribute {key!r}")
                    topo.links.append((u, v, key, float(val)))
            elif kind == "placement":
                topo.placement = list(args)
            else:
                raise ValueError(f"unknown record {kind!r}")
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"{name}:{lineno}: {exc}") from None
    topo.validate()
    return topo


def load_topology(path: str | Path) -> Topology:
    path = Path(path)
    return parse_topology(path.read_text(), name=path.name)


def link_delays_us(topo: Topology, seed: int) -> dict[tuple[str, str], int]:
    """Per-link one-way delays in microseconds, both directions.

    Bare links draw uniformly from the topology's delay range using a stream
    derived from the run seed; draws follow file order, so a given seed always
    produces the same delays.
    """
    rng = random.Random(derive_seed(seed, f"links:{topo.name}"))
    out: dict[tuple[str, str], int] = {}
    for u, v, kind, val in topo.links:
        if kind == "us":
            d = int(round(val))
        elif kind == "km":
            d = int(round(val / topo.speed_kms * 1e6))
        elif kind == "geo":
            cu, cv = topo.nodes[u], topo.nodes[v]
            if cu is None or cv is None:
                raise ConfigError(f"geo link {u}-{v} needs coordinates on both nodes")
            d = int(round(haversine_km(cu, cv) / topo.speed_kms * 1e6))
        else:
            lo, hi = topo.delay_range_us
            d = rng.randint(lo, hi)
        if d <= 0:
            raise ConfigError(f"non-positive link delay {u}-{v}")
        out[(u, v)] = min(out.get((u, v), d), d)
        out[(v, u)] = out[(u, v)]
    return out


def _shortest_paths(topo: Topology, delays: dict[tuple[str, str], int],
                    source: str) -> dict[str, int]:
    dist = {source: 0}
    heap = [(0, source)]
    adj: dict[str, list[tuple[str, int]]] = {}
    for (u, v), d in delays.items():
        adj.setdefault(u, []).append((v, d))
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist.get(u, 1 << 62):
            continue
        for v, w in adj.get(u, ()):
            nd = d + w
            if nd < dist.get(v, 1 << 62):
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def build_delay_matrix(topo: Topology, seed: int = 0, delay_scale: float = 1.0,
                       local_loop_us: int = 10,
                       speed_kms: float | None = None) -> list[list[int]]:
    """All-pairs one-way delays (µs) between placed replicas.

    Entries for distinct replicas on the same node, and the diagonal, use the
    local-loop delay so no handoff is ever instantaneous.
    """
    if not topo.placement:
        raise ConfigError("topology has no placement")
    if speed_kms is not None:
        topo = Topology(topo.name, topo.nodes, topo.links, topo.placement,
                        speed_kms, topo.delay_range_us)
    delays = link_delays_us(topo, seed)
    matrix: list[list[int]] = []
    for src in topo.placement:
        dist = _shortest_paths(topo, delays, src)
        row = []
        for dst in topo.placement:
            if dst not in dist:
                raise ConfigError(f"no path between replicas {src!r} and {dst!r}")
            d = int(round(dist[dst] * delay_scale))
            row.append(d if d > 0 else local_loop_us)
        matrix.append(row)
    return matrix
