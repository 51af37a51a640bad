"""Providers, channels, cells and the hexagonal deployment of CR nodes.

Provider indices are 0-based inside the package; reports and traces add 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .config import ConfigError, MAX_PROVIDERS, ScenarioConfig

VERTEX_TOL = 1e-6


@dataclass(frozen=True)
class ServiceProvider:
    index: int
    licensed_channels: tuple
    unit_price_alpha: float
    infrastructures: tuple = ()

    @property
    def id(self) -> int:
        return self.index + 1


@dataclass(frozen=True)
class Channel:
    id: int
    owner: int
    center_frequency: float
    availability_probability: float = 1.0
    interference_level: float = 0.0
    cost: float = 0.0


@dataclass(frozen=True)
class Infrastructure:
    """A base station of one provider in one cell (static part only)."""

    id: int
    provider: int
    cell: int
    position: tuple
    cell_radius: float
    capacity_users_per_channel: int = 10


@dataclass
class Call:
    id: int
    subscriber_provider: int
    cell: int
    arrival_time: float
    holding_time: float
    assigned_channel: Optional[int] = None
    outcome: Optional[str] = None  # "accepted" | "blocked"
    borrowed: bool = False


@dataclass(frozen=True)
class CrNodeSite:
    """Where a CR node sits and what it can see; runtime state lives in crnet."""

    id: int
    position: tuple
    sensing_range: float
    cells: tuple
    neighbors: tuple


@dataclass(frozen=True)
class Topology:
    providers: tuple
    channels: tuple
    cell_centers: tuple
    infrastructures: tuple
    nodes: tuple
    cell_nodes: tuple  # per cell: CR nodes that cover it, ascending id

    @property
    def n_cells(self) -> int:
        return len(self.cell_centers)

    def infrastructure(self, cell: int, provider: int) -> Infrastructure:
        return self.infrastructures[cell * len(self.providers) + provider]


def hex_center(row: int, col: int, radius: float) -> tuple:
    # pointy-top hexagons, odd rows shifted right by half a cell
    x = math.sqrt(3.0) * radius * (col + 0.5 * (row & 1))
    y = 1.5 * radius * row
    return (x, y)


def hex_vertices(center: tuple, radius: float) -> list:
    cx, cy = center
    return [
        (cx + radius * math.cos(math.radians(30 + 60 * k)), cy + radius * math.sin(math.radians(30 + 60 * k)))
        for k in range(6)
    ]


class _VertexIndex:
    """Merge points closer than ``tol`` using a bucket grid."""

    def __init__(self, tol: float = VERTEX_TOL):
        self.tol = tol
        self.points: list = []
        self._buckets: dict = {}

    def add(self, p: tuple) -> int:
        bx, by = math.floor(p[0] / self.tol), math.floor(p[1] / self.tol)
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for idx in self._buckets.get((bx + dx, by + dy), ()):
                    q = self.points[idx]
                    if abs(q[0] - p[0]) <= self.tol and abs(q[1] - p[1]) <= self.tol:
                        return idx
        idx = len(self.points)
        self.points.append(p)
        self._buckets.setdefault((bx, by), []).append(idx)
        return idx


def make_channels(cfg: ScenarioConfig) -> tuple:
    channels = []
    for p in range(cfg.n_providers):
        for k in range(cfg.channels_per_provider):
            cid = p * cfg.channels_per_provider + k
            freq = cfg.base_frequency + cid * cfg.channel_spacing
            if cfg.uniform_channel_params:
                avail, interf, cost = 1.0, 0.0, 0.0
            else:
                avail = 1.0 if cfg.channel_availability is None else float(cfg.channel_availability[cid])
                interf = 0.0 if cfg.channel_interference is None else float(cfg.channel_interference[cid])
                cost = float(cfg.unit_prices[p])
            channels.append(Channel(cid, p, freq, avail, interf, cost))
    return tuple(channels)


def build_topology(cfg: ScenarioConfig) -> Topology:
    """Lay out the hex grid, co-locate one base station per provider in every
    cell and put a CR node on every distinct cell vertex."""
    rows, cols = cfg.grid_dims
    if rows * cols == 0:
        raise ConfigError("grid has zero cells", "grid_dims")
    if not 1 <= cfg.n_providers <= MAX_PROVIDERS:
        raise ConfigError(f"must be in 1..{MAX_PROVIDERS}", "n_providers")

    R = cfg.cell_radius
    centers = [hex_center(r, c, R) for r in range(rows) for c in range(cols)]

    vindex = _VertexIndex()
    cell_vertices = [[vindex.add(v) for v in hex_vertices(ctr, R)] for ctr in centers]
    n_nodes = len(vindex.points)

    adj = [set() for _ in range(n_nodes)]
    for ring in cell_vertices:
        for k in range(6):
            a, b = ring[k], ring[(k + 1) % 6]
            adj[a].add(b)
            adj[b].add(a)

    srange = cfg.effective_sensing_range()
    reach = srange * (1 + 1e-9) + VERTEX_TOL
    node_cells = []
    for pos in vindex.points:
        node_cells.append(tuple(
            c for c, ctr in enumerate(centers) if math.hypot(ctr[0] - pos[0], ctr[1] - pos[1]) <= reach
        ))
    nodes = tuple(
        CrNodeSite(i, vindex.points[i], srange, node_cells[i], tuple(sorted(adj[i])))
        for i in range(n_nodes)
    )
    cell_nodes = tuple(tuple(n.id for n in nodes if c in n.cells) for c in range(len(centers)))
    if any(len(cn) == 0 for cn in cell_nodes):
        raise ConfigError("some cells are outside every CR node's range", "sensing_range")

    infras = []
    for c, ctr in enumerate(centers):
        for p in range(cfg.n_providers):
            infras.append(Infrastructure(len(infras), p, c, ctr, R, cfg.capacity_users_per_channel))

    channels = make_channels(cfg)
    providers = tuple(
        ServiceProvider(
            p,
            tuple(ch.id for ch in channels if ch.owner == p),
            float(cfg.unit_prices[p]),
            tuple(inf.id for inf in infras if inf.provider == p),
        )
        for p in range(cfg.n_providers)
    )
    return Topology(providers, channels, tuple(centers), tuple(infras), nodes, cell_nodes)
