"""Neighbourhood graph over actors: legal distance + pairwise power preprocessing.

Two actors are adjacent when their great-circle distance is strictly below
the legal distance limit and the sum of their installed powers does not
exceed the legal power cap. Every legally feasible loop is a clique of this
graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

EARTH_RADIUS_KM = 6371.0088  # mean Earth radius


def distance_km(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Haversine great-circle distance in km between (lat, lon) points in degrees."""
    lat_a, lon_a = a
    lat_b, lon_b = b
    for lat, lon in ((lat_a, lon_a), (lat_b, lon_b)):
        if not -90.0 <= lat <= 90.0:
            raise ValueError(f"latitude {lat} outside [-90, 90]")
        if not -180.0 <= lon <= 180.0:
            raise ValueError(f"longitude {lon} outside [-180, 180]")
    phi_a, phi_b = math.radians(lat_a), math.radians(lat_b)
    d_phi = phi_b - phi_a
    d_lam = math.radians(lon_b - lon_a)
    h = math.sin(d_phi / 2.0) ** 2 + math.cos(phi_a) * math.cos(phi_b) * math.sin(d_lam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


@dataclass
class NeighbourhoodGraph:
    """Undirected adjacency over actor indices 0..n-1."""

    n: int
    edges: set[tuple[int, int]] = field(default_factory=set)  # i < j
    neighbours: list[set[int]] = field(default_factory=list)

    def __post_init__(self):
        if not self.neighbours:
            self.neighbours = [set() for _ in range(self.n)]
            for i, j in self.edges:
                self.neighbours[i].add(j)
                self.neighbours[j].add(i)

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    def is_clique(self, members) -> bool:
        members = sorted(members)
        return all(self.has_edge(i, j)
                   for k, i in enumerate(members) for j in members[k + 1:])

    def directed_edges(self) -> list[tuple[int, int]]:
        """Both orientations of every edge, sorted."""
        out = []
        for i, j in sorted(self.edges):
            out.append((i, j))
            out.append((j, i))
        return sorted(out)

    def non_edges(self) -> list[tuple[int, int]]:
        """Pairs i < j that are NOT adjacent."""
        return [(i, j) for i in range(self.n) for j in range(i + 1, self.n)
                if (i, j) not in self.edges]

    def to_edge_list(self, path: str | Path) -> None:
        lines = [f"{i} {j}" for i, j in sorted(self.edges)]
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))

    def to_dot(self, path: str | Path) -> None:
        body = "\n".join(f"  {i} -- {j};" for i, j in sorted(self.edges))
        Path(path).write_text("graph neighbourhood {\n" + body + "\n}\n")


def build_neighbourhood_graph(instance) -> NeighbourhoodGraph:
    """O(n^2) construction; preprocessing drops edges whose pairwise installed
    power already exceeds the loop cap."""
    actors = instance.actors
    d_max = instance.legal.max_distance_km
    p_cap = instance.legal.max_installed_power_kwc
    edges = set()
    for i in range(len(actors)):
        for j in range(i + 1, len(actors)):
            a, b = actors[i], actors[j]
            if a.installed_power_kwc + b.installed_power_kwc > p_cap:
                continue
            d = distance_km((a.latitude, a.longitude), (b.latitude, b.longitude))
            if d < d_max:
                edges.add((i, j))
    return NeighbourhoodGraph(n=len(actors), edges=edges)
