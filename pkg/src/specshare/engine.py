"""Event-driven simulation of providers borrowing idle channels through CR nodes."""

from __future__ import annotations

import heapq
import json
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import ScenarioConfig
from .crnet import (AvailabilityResponse, ChannelRequest, CrNode, MessageLog,
                    aggregate_responses, bfs_ball)
from .metrics import MetricsAccumulator, build_report, interference
from .topology import Call, build_topology
from .traffic import TrafficModel, assign_cells, draw_correlated_rates, generate_arrivals

ARRIVAL, DEPARTURE, SENSE, DELIVER, DEADLINE = range(5)
EVENT_NAMES = ("arrival", "departure", "sense_tick", "message_delivery", "aggregate_deadline")

TRACE_COLUMNS = ("time", "kind", "call_id", "provider", "cell", "channel", "prev_channel", "holding_time", "outcome")


class SimulationError(RuntimeError):
    """An internal invariant broke; ``position`` is the offending event index."""

    def __init__(self, message: str, position: int, time: float):
        self.position = position
        self.time = time
        super().__init__(f"event #{position} at t={time!r}: {message}")


def detect_overload(active_calls: int, usable_channels: int, capacity_per_channel: int) -> bool:
    """True when one more call would not fit on the provider's own channels."""
    return active_calls + 1 > capacity_per_channel * usable_channels


def select_channel(candidates) -> Optional[int]:
    """Most likely available channel, then highest frequency, then lowest id."""
    best = None
    best_key = None
    for e in candidates:
        key = (e.availability_probability, e.center_frequency, -e.channel)
        if best_key is None or key > best_key:
            best, best_key = e.channel, key
    return best


@dataclass
class _Request:
    id: int
    infra: int
    call: Call
    origin_node: int
    issue_time: float
    responses: list = field(default_factory=list)
    responders: list = field(default_factory=list)
    completed: bool = False
    late: int = 0
    outcome: str = ""


@dataclass
class RunResult:
    seed: int
    realized_rates: list
    report: dict
    event_counts: dict
    total_events: int
    peak_queue: int
    protocol: dict
    requests: list = field(default_factory=list)
    trace: Optional[list] = None
    messages: Optional[list] = None

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "realized_rates": self.realized_rates,
            "metrics": self.report,
            "event_counts": self.event_counts,
            "total_events": self.total_events,
            "peak_queue": self.peak_queue,
            "protocol": self.protocol,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


class Simulation:
    """One replication. Build, then :meth:`run` once."""

    def __init__(self, cfg: ScenarioConfig, arrivals=None, record_trace: bool = False,
                 record_messages: bool = False, check_invariants: bool = False):
        self.cfg = cfg
        self.topo = build_topology(cfg)
        self.n_p = cfg.n_providers
        self.n_cells = self.topo.n_cells
        self.cap = cfg.capacity_users_per_channel
        self.channels = self.topo.channels
        self.freq = [ch.center_frequency for ch in self.channels]
        self.owner = [ch.owner for ch in self.channels]
        n_ch = len(self.channels)

        self.holders = [[-1] * n_ch for _ in range(self.n_cells)]
        self.users = [[0] * n_ch for _ in range(self.n_cells)]
        self.chan_calls = [[set() for _ in range(n_ch)] for _ in range(self.n_cells)]
        n_inf = len(self.topo.infrastructures)
        self.active = [0] * n_inf
        self.borrowed = [set() for _ in range(n_inf)]
        self.waiting = [deque() for _ in range(n_inf)]
        self.pending: list = [None] * n_inf
        self.own = [self.topo.providers[p].licensed_channels for p in range(self.n_p)]

        self.nodes = [CrNode(site, self.channels, cfg.sensing_period, cfg.availability_window)
                      for site in self.topo.nodes]
        self.neighbors = [n.neighbors for n in self.nodes]

        self.acc = MetricsAccumulator(self.n_p, cfg.channels_per_provider * self.n_cells, self.n_cells,
                                      cfg.unit_prices)
        self.calls: dict = {}
        self.requests: dict = {}
        self.heap: list = []
        self.seq = 0
        self.clock = 0.0
        self.horizon = float(cfg.horizon_t)
        self.event_counts = Counter()
        self.n_events = 0
        self.peak_queue = 0
        self.claim_failures = 0
        self.check_invariants = check_invariants
        self.trace = [] if record_trace else None
        self.msglog = MessageLog() if record_messages else None

        if arrivals is None:
            model = TrafficModel.from_config(cfg)
            self.rates = draw_correlated_rates(model, cfg.seed)
            sched = generate_arrivals(self.rates, cfg.mean_holding_time, cfg.horizon_t, cfg.seed)
            cells = assign_cells(sched, cfg.n_nodes, self.n_cells, cfg.seed)
            self._arrivals = [
                [(float(t), float(h), int(c)) for t, h, c in zip(sched.times[p], sched.holding[p], cells[p])]
                for p in range(self.n_p)
            ]
        else:
            self.rates = np.full(self.n_p, np.nan)
            per = [[] for _ in range(self.n_p)]
            for item in arrivals:
                p, t, h = item[0], item[1], item[2]
                c = item[3] if len(item) > 3 else 0
                per[p].append((float(t), float(h), int(c)))
            self._arrivals = [sorted(a) for a in per]
        self._next_arrival = [0] * self.n_p
        self._call_ids = 0
        self._request_ids = 0

    # event queue -----------------------------------------------------------

    def push(self, time: float, kind: int, payload) -> None:
        if time < self.clock:
            raise SimulationError(f"scheduling {EVENT_NAMES[kind]} in the past ({time} < {self.clock})",
                                  self.n_events, self.clock)
        heapq.heappush(self.heap, (time, self.seq, kind, payload))
        self.seq += 1
        if len(self.heap) > self.peak_queue:
            self.peak_queue = len(self.heap)

    def _schedule_next_arrival(self, p: int) -> None:
        i = self._next_arrival[p]
        if i < len(self._arrivals[p]):
            self.push(self._arrivals[p][i][0], ARRIVAL, p)

    def _log(self, kind, call, channel=-1, prev=-1, outcome=""):
        if self.trace is not None:
            self.trace.append((self.clock, kind, call.id, call.subscriber_provider + 1, call.cell,
                               channel, prev, call.holding_time, outcome))

    def _msg(self, msg_type, src, dst, rid, n=0):
        if self.msglog is not None:
            self.msglog.add(self.clock, msg_type, src, dst, rid, n)

    # channel bookkeeping ---------------------------------------------------

    def _infra(self, cell: int, p: int) -> int:
        return cell * self.n_p + p

    def usable_own(self, cell: int, p: int) -> list:
        row = self.holders[cell]
        return [ch for ch in self.own[p] if row[ch] in (-1, p)]

    def is_overloaded(self, cell: int, p: int) -> bool:
        k = self._infra(cell, p)
        return detect_overload(self.active[k], len(self.usable_own(cell, p)), self.cap)

    def _best_fit(self, cell: int, chans) -> Optional[int]:
        users = self.users[cell]
        best, best_u = None, -1
        for ch in chans:
            u = users[ch]
            if u < self.cap and u > best_u:
                best, best_u = ch, u
        return best

    def _metric_time(self) -> float:
        return min(self.clock, self.horizon)

    def _set_holder(self, cell: int, ch: int, holder: int) -> None:
        prev = self.holders[cell][ch]
        if prev == holder:
            return
        self.acc.advance(self._metric_time())
        owner = self.owner[ch]
        if prev < 0:
            self.acc.busy_owned[owner] += 1
        if holder < 0:
            self.acc.busy_owned[owner] -= 1
        self.holders[cell][ch] = holder
        row = self.holders[cell]
        in_use = [self.freq[c] for c, h in enumerate(row) if h >= 0]
        per_p = [interference(self.freq[c] for c, h in enumerate(row) if h == p) for p in range(self.n_p)]
        self.acc.set_spreads(cell, interference(in_use), per_p)

    def _place(self, call: Call, ch: int, borrowed: bool) -> None:
        c, p = call.cell, call.subscriber_provider
        self._set_holder(c, ch, p)
        self.users[c][ch] += 1
        self.chan_calls[c][ch].add(call.id)
        self.active[self._infra(c, p)] += 1
        call.assigned_channel = ch
        call.outcome = "accepted"
        call.borrowed = borrowed
        self.calls[call.id] = call
        self.acc.record_offered(p, call.holding_time, True)
        self.acc.call_started()
        self._log("accept", call, ch, outcome="borrowed" if borrowed else "own")
        if self.clock + call.holding_time <= self.horizon:
            self.push(self.clock + call.holding_time, DEPARTURE, call.id)

    def _block(self, call: Call) -> None:
        call.outcome = "blocked"
        self.acc.record_offered(call.subscriber_provider, call.holding_time, False)
        self._log("block", call, outcome="blocked")

    def _try_slot(self, call: Call) -> bool:
        c, p = call.cell, call.subscriber_provider
        ch = self._best_fit(c, self.usable_own(c, p))
        if ch is not None:
            self._place(call, ch, False)
            return True
        k = self._infra(c, p)
        ch = self._best_fit(c, sorted(self.borrowed[k]))
        if ch is not None:
            self._place(call, ch, True)
            return True
        return False

    # admission ---------------------------------------------------------------

    def admit_call(self, call: Call) -> str:
        """Place the call or start a channel request. Returns
        ``accepted``, ``blocked`` or ``pending``."""
        if self._try_slot(call):
            return "accepted"
        if not self.cfg.sharing_enabled:
            self._block(call)
            return "blocked"
        self._issue_request(call)
        return "pending"

    def _issue_request(self, call: Call) -> None:
        k = self._infra(call.cell, call.subscriber_provider)
        rid = self._request_ids
        self._request_ids += 1
        origin = self.topo.cell_nodes[call.cell][0]
        req = _Request(rid, k, call, origin, self.clock)
        self.requests[rid] = req
        self.pending[k] = rid
        d = self.cfg.message_delay
        msg = ChannelRequest(rid, k, call.subscriber_provider, self.clock)
        self._msg("channel_request", f"bs{k}", f"cr{origin}", rid)
        self.push(self.clock + d, DELIVER, (origin, msg))
        self.push(self.clock + self.cfg.effective_response_window(), DEADLINE, rid)

    def _claim(self, call: Call, ch: int) -> bool:
        c = call.cell
        if self.holders[c][ch] != -1 or self.owner[ch] == call.subscriber_provider:
            return False
        k = self._infra(c, call.subscriber_provider)
        self.borrowed[k].add(ch)
        self.acc.providers[call.subscriber_provider].borrow_count += 1
        self._log("borrow", call, ch)
        self._place(call, ch, True)
        return True

    def _resolve(self, rid: int) -> None:
        req = self.requests[rid]
        req.completed = True
        call = req.call
        k = req.infra
        if self._try_slot(call):
            req.outcome = "slot_freed"
        else:
            candidates = aggregate_responses(req.responses)
            outcome = "blocked"
            for _ in range(2):  # first choice plus one retry
                ch = select_channel(candidates)
                if ch is None:
                    break
                if self._claim(call, ch):
                    outcome = "borrowed"
                    break
                self.claim_failures += 1
                candidates = [e for e in candidates if e.channel != ch]
            if outcome == "blocked":
                self._block(call)
            req.outcome = outcome
        self.pending[k] = None
        self._drain(k)

    def _drain(self, k: int) -> None:
        q = self.waiting[k]
        while q and self.pending[k] is None:
            self.admit_call(q.popleft())

    def release_borrowed_channels(self, cell: int, p: int) -> list:
        """Hand back every borrowed channel whose calls fit into free slots on
        the provider's own channels, moving those calls home first."""
        k = self._infra(cell, p)
        if not self.borrowed[k]:
            return []
        users = self.users[cell]
        own = self.usable_own(cell, p)
        free = sum(self.cap - users[ch] for ch in own)
        released = []
        for b in sorted(self.borrowed[k], key=lambda ch: (users[ch], ch)):
            n = users[b]
            if n > free:
                continue
            for cid in sorted(self.chan_calls[cell][b]):
                call = self.calls[cid]
                dst = self._best_fit(cell, own)
                self.chan_calls[cell][b].discard(cid)
                users[b] -= 1
                users[dst] += 1
                self.chan_calls[cell][dst].add(cid)
                self._set_holder(cell, dst, p)
                call.assigned_channel = dst
                call.borrowed = False
                self._log("migrate", call, dst, b)
            free -= n
            self.borrowed[k].discard(b)
            self._set_holder(cell, b, -1)
            if self.trace is not None:
                self.trace.append((self.clock, "release", -1, p + 1, cell, b, -1, 0.0, ""))
            released.append(b)
        return released

    # event handlers ------------------------------------------------------------

    def _on_arrival(self, p: int) -> None:
        i = self._next_arrival[p]
        t, h, c = self._arrivals[p][i]
        self._next_arrival[p] = i + 1
        self._schedule_next_arrival(p)
        call = Call(self._call_ids, p, c, t, h)
        self._call_ids += 1
        self._log("arrival", call)
        k = self._infra(c, p)
        if self.pending[k] is not None or self.waiting[k]:
            self.waiting[k].append(call)
            return
        self.admit_call(call)

    def _on_departure(self, cid: int) -> None:
        call = self.calls.pop(cid)
        c, p, ch = call.cell, call.subscriber_provider, call.assigned_channel
        self.users[c][ch] -= 1
        self.chan_calls[c][ch].discard(cid)
        self.active[self._infra(c, p)] -= 1
        self.acc.call_ended()
        self._log("depart", call, ch)
        self.release_borrowed_channels(c, p)
        if self.users[c][ch] == 0 and self.holders[c][ch] == p and self.owner[ch] == p:
            self._set_holder(c, ch, -1)

    def _on_sense(self, node: int) -> None:
        self.nodes[node].sense(self.holders, self.clock)
        nxt = self.clock + self.cfg.sensing_period
        if nxt <= self.horizon:
            self.push(nxt, SENSE, node)

    def _on_deliver(self, payload) -> None:
        dst, msg = payload
        d = self.cfg.message_delay
        uniform = self.cfg.uniform_channel_params
        if isinstance(msg, AvailabilityResponse):
            req = self.requests[msg.request_id]
            self._msg("availability_response_rx", f"cr{msg.origin_node}", f"bs{dst}", msg.request_id,
                      len(msg.entries))
            if req.completed:
                req.late += 1
            else:
                req.responses.append(msg)
                req.responders.append(msg.origin_node)
            return
        node = self.nodes[dst]
        if isinstance(msg, ChannelRequest):
            resp, query = node.handle_request(msg, self.holders, self.clock, uniform)
            forwards = [query]
        else:
            resp, fwd = node.handle_broadcast(msg, self.holders, self.clock, self.cfg.max_hops, uniform)
            if resp is None:
                self._msg("broadcast_dropped", f"cr{msg.origin_node}", f"cr{dst}", msg.request_id)
                return
            forwards = [fwd] if fwd is not None else []
        self._msg("availability_response", f"cr{dst}", f"bs{resp.origin_infrastructure}", resp.request_id,
                  len(resp.entries))
        self.push(self.clock + d, DELIVER, (resp.origin_infrastructure, resp))
        if self.cfg.max_hops == 0:
            return
        for q in forwards:
            for nb in node.neighbors:
                self._msg("broadcast_query", f"cr{dst}", f"cr{nb}", q.request_id)
                self.push(self.clock + d, DELIVER, (nb, q))

    # main loop -------------------------------------------------------------------

    def run(self) -> RunResult:
        for p in range(self.n_p):
            self._schedule_next_arrival(p)
        for node in self.nodes:
            self.push(0.0, SENSE, node.id)

        handlers = (self._on_arrival, self._on_departure, self._on_sense, self._on_deliver, self._resolve)
        while self.heap:
            time, _, kind, payload = heapq.heappop(self.heap)
            if time > self.horizon and kind in (DEPARTURE, SENSE, ARRIVAL):
                continue
            if time < self.clock:
                raise SimulationError("clock moved backwards", self.n_events, time)
            self.clock = time
            if time <= self.horizon:
                self.acc.advance(time)
            handlers[kind](payload)
            self.event_counts[EVENT_NAMES[kind]] += 1
            self.n_events += 1
            if self.check_invariants:
                self._check()
        self.acc.advance(self.horizon)
        return self._result()

    def _check(self) -> None:
        where = (self.n_events - 1, self.clock)
        for c in range(self.n_cells):
            for ch, holder in enumerate(self.holders[c]):
                u = self.users[c][ch]
                if u > self.cap:
                    raise SimulationError(f"cell {c} channel {ch} hosts {u} > {self.cap} calls", *where)
                if u != len(self.chan_calls[c][ch]):
                    raise SimulationError(f"cell {c} channel {ch} call set out of sync", *where)
                if u > 0 and holder < 0:
                    raise SimulationError(f"cell {c} channel {ch} carries calls but is idle", *where)
                if holder >= 0 and holder != self.owner[ch]:
                    if ch not in self.borrowed[self._infra(c, holder)]:
                        raise SimulationError(f"cell {c} channel {ch} held by {holder} without a borrow", *where)
        for k, bset in enumerate(self.borrowed):
            c, p = divmod(k, self.n_p)
            for ch in bset:
                if self.holders[c][ch] != p or self.owner[ch] == p:
                    raise SimulationError(f"infrastructure {k} borrow record of channel {ch} is stale", *where)

    def _result(self) -> RunResult:
        n_req = len(self.requests)
        responses = [len(r.responses) for r in self.requests.values()]
        balls: dict = {}
        violations = 0
        for r in self.requests.values():
            if r.origin_node not in balls:
                balls[r.origin_node] = len(bfs_ball(self.neighbors, r.origin_node, self.cfg.max_hops))
            if len(r.responders) + r.late > balls[r.origin_node]:
                violations += 1
        protocol = {
            "requests": n_req,
            "bound_violations": violations,
            "completed": sum(r.completed for r in self.requests.values()),
            "responses": sum(responses),
            "late_responses": sum(r.late for r in self.requests.values()),
            "max_responses": max(responses, default=0),
            "claim_failures": self.claim_failures,
            "borrowed": sum(r.outcome == "borrowed" for r in self.requests.values()),
        }
        req_log = [
            {"request_id": r.id, "origin_node": r.origin_node, "responders": list(r.responders),
             "late": r.late, "completed": r.completed, "outcome": r.outcome}
            for r in self.requests.values()
        ]
        capacity = self.cap * self.cfg.n_channels * self.n_cells
        report = build_report(self.acc, self.horizon, self.cfg.cost_efficiency_basis, capacity)
        return RunResult(
            seed=self.cfg.seed,
            realized_rates=[None if np.isnan(r) else float(r) for r in self.rates],
            report=report,
            event_counts={name: self.event_counts.get(name, 0) for name in EVENT_NAMES},
            total_events=self.n_events,
            peak_queue=self.peak_queue,
            protocol=protocol,
            requests=req_log,
            trace=self.trace,
            messages=None if self.msglog is None else self.msglog.rows,
        )


def run(cfg: ScenarioConfig, **kwargs) -> RunResult:
    """Simulate one replication of ``cfg`` up to its horizon."""
    return Simulation(cfg, **kwargs).run()

