"""CR sensing nodes and the request / broadcast / response exchange.

Nodes see the world through ``holders``: for every cell a list mapping
channel id to the provider currently holding it there (-1 when idle).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

IDLE, BUSY, BORROWED = 0, 1, 2


@dataclass(frozen=True)
class AvailabilityEntry:
    channel: int
    availability_probability: float
    interference_level: float
    cost: float
    reporting_node: int
    center_frequency: float = 0.0


@dataclass(frozen=True)
class ChannelRequest:
    request_id: int
    origin_infrastructure: int
    provider: int
    issue_time: float


@dataclass(frozen=True)
class BroadcastQuery:
    request_id: int
    origin_infrastructure: int
    provider: int
    origin_node: int
    issue_time: float
    hop_count: int


@dataclass(frozen=True)
class AvailabilityResponse:
    request_id: int
    origin_infrastructure: int
    origin_node: int
    issue_time: float
    entries: tuple = ()


class CrNode:
    """Runtime state of one sensing node."""

    def __init__(self, site, channels: Sequence, sensing_period: float, window: int = 10):
        self.id = site.id
        self.position = site.position
        self.sensing_range = site.sensing_range
        self.cells = site.cells
        self.neighbors = site.neighbors
        self.channels = channels
        self.sensing_period = sensing_period
        self.occupancy_map = np.zeros(len(channels), dtype=np.int8)
        self.history: deque = deque(maxlen=window)
        self.last_sense_time = -np.inf
        self.seen: set = set()

    def sense(self, holders, now: float) -> np.ndarray:
        """Refresh the occupancy map from the true channel state of every cell
        in range."""
        occ = np.zeros(len(self.channels), dtype=np.int8)
        for c in self.cells:
            for ch, holder in enumerate(holders[c]):
                if holder < 0:
                    continue
                state = BUSY if holder == self.channels[ch].owner else BORROWED
                if state > occ[ch]:
                    occ[ch] = state
        self.occupancy_map = occ
        self.history.append(occ == IDLE)
        self.last_sense_time = now
        return occ

    def is_stale(self, now: float) -> bool:
        return now - self.last_sense_time > 2 * self.sensing_period

    def availability(self, ch: int) -> float:
        if not self.history:
            return 0.0
        return float(sum(h[ch] for h in self.history)) / len(self.history)

    def entries_for(self, provider: int, uniform: bool = False) -> tuple:
        """Idle, foreign, un-borrowed channels in the current map."""
        out = []
        for ch in np.flatnonzero(self.occupancy_map == IDLE):
            chan = self.channels[int(ch)]
            if chan.owner == provider:
                continue
            # configured availability acts as a static prior on the sensed idle fraction
            p = chan.availability_probability
            if not uniform:
                p *= self.availability(int(ch))
            out.append(AvailabilityEntry(chan.id, p, chan.interference_level, chan.cost, self.id,
                                         chan.center_frequency))
        return tuple(out)

    def handle_request(self, req: ChannelRequest, holders, now: float, uniform: bool = False):
        """Answer the requesting base station and fan the query out to neighbours."""
        if self.is_stale(now):
            self.sense(holders, now)
        self.seen.add(req.request_id)
        resp = AvailabilityResponse(req.request_id, req.origin_infrastructure, self.id, req.issue_time,
                                    self.entries_for(req.provider, uniform))
        query = BroadcastQuery(req.request_id, req.origin_infrastructure, req.provider, self.id,
                               req.issue_time, 1)
        return resp, query

    def handle_broadcast(self, q: BroadcastQuery, holders, now: float, max_hops: int,
                         uniform: bool = False):
        """Returns ``(response, forward)``; both None for a duplicate query."""
        if q.request_id in self.seen or q.hop_count > max_hops:
            return None, None
        self.seen.add(q.request_id)
        if self.is_stale(now):
            self.sense(holders, now)
        resp = AvailabilityResponse(q.request_id, q.origin_infrastructure, self.id, q.issue_time,
                                    self.entries_for(q.provider, uniform))
        forward = None
        if q.hop_count < max_hops:
            forward = BroadcastQuery(q.request_id, q.origin_infrastructure, q.provider, self.id,
                                     q.issue_time, q.hop_count + 1)
        return resp, forward


def _merge_key(e: AvailabilityEntry):
    # larger wins: higher interference, then the more pessimistic availability
    return (e.interference_level, -e.availability_probability, -e.reporting_node)


def aggregate_responses(responses) -> list:
    """Union of all entries keyed by channel; duplicates keep the worst
    interference figure. Sorted by channel id."""
    merged: dict = {}
    request_ids = {r.request_id for r in responses}
    if len(request_ids) > 1:
        raise ValueError(f"responses belong to several requests: {sorted(request_ids)}")
    for resp in responses:
        for e in resp.entries:
            cur = merged.get(e.channel)
            if cur is None or _merge_key(e) > _merge_key(cur):
                merged[e.channel] = e
    return [merged[k] for k in sorted(merged)]


def bfs_ball(neighbors, origin: int, radius: int) -> set:
    """Nodes within ``radius`` hops of ``origin`` in the neighbour graph."""
    seen = {origin}
    frontier = [origin]
    for _ in range(radius):
        nxt = []
        for u in frontier:
            for v in neighbors[u]:
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
    return seen


@dataclass
class MessageLog:
    """Optional per-run record of protocol messages."""

    rows: list = field(default_factory=list)

    def add(self, time, msg_type, src, dst, request_id, entry_count=0):
        self.rows.append((time, msg_type, src, dst, request_id, entry_count))

    COLUMNS = ("time", "msg_type", "src", "dst", "request_id", "entry_count")
