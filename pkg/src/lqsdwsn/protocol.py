"""Control plane of the link-quality-gated SDWSN.

Node objects are pure state machines: every handler takes one input and
returns a list of actions (:class:`Send`, :class:`SetTimer`,
:class:`TraceEvent`) for the engine to carry out.  No handler touches the
channel or the event queue directly.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, NamedTuple

CONTROLLER_ID = 0


class MessageKind(str, Enum):
    HELLO_RQ = "HELLO_RQ"
    TOPOLOGY_RQ = "TOPOLOGY_RQ"
    TOPOLOGY_RP = "TOPOLOGY_RP"
    FLOW_TABLE = "FLOW_TABLE"


@dataclass(frozen=True)
class Message:
    kind: MessageKind
    src: int  # transmitter of this hop
    origin: int  # flood originator (RQ), reporter (RP) or table owner (FLOW_TABLE)
    seq: int
    payload: tuple = ()
    incremental: bool = False


@dataclass
class ProtocolConfig:
    m_up: int = 2
    k_down: int = 2
    hello_period: float = 1.0
    prediction_enabled: bool = True
    gate_flow_table: bool = True
    history_bound: int | None = None  # None -> model window length

    def __post_init__(self):
        if self.m_up < 1 or self.k_down < 1:
            raise ValueError("m_up and k_down must be >= 1")
        if self.hello_period <= 0:
            raise ValueError("hello_period must be > 0")


class Send(NamedTuple):
    msg: Message
    dst: int | None  # None: broadcast


class SetTimer(NamedTuple):
    name: str
    delay: float


class TraceEvent(NamedTuple):
    kind: str
    node: int
    peer: int = -1
    seq: int = -1
    info: str = ""


NEIGHBOR_ADDED = "NeighborAdded"
NEIGHBOR_REMOVED = "NeighborRemoved"


class Gate:
    """Predictor gate over the last ``k`` HELLO periods of a peer."""

    def __init__(self, scorer: Callable, k: int, rssi_floor: float, threshold: float = 0.5):
        self.scorer = scorer
        self.k = k
        self.rssi_floor = rssi_floor
        self.threshold = threshold

    @classmethod
    def from_model(cls, model, rssi_floor: float) -> "Gate":
        return cls(model.scorer(), model.k, rssi_floor)

    def passes(self, rssi: deque, recv: deque) -> bool:
        n = len(rssi)
        if n < self.k:
            return True  # cold start: not enough history to predict
        if n > self.k:
            rssi = list(rssi)[-self.k :]
            recv = list(recv)[-self.k :]
        return self.scorer(rssi, recv) >= self.threshold


@dataclass
class LinkState:
    """Alg. 1 counters for one peer plus its radio-level HELLO history."""

    bound: int
    recv: int = 0
    lost: int = 0
    last_recv_time: float = 0.0
    last_slot: float | None = None  # time of the newest history entry
    rssi: deque = field(default=None)
    recv_hist: deque = field(default=None)

    def __post_init__(self):
        if self.rssi is None:
            self.rssi = deque(maxlen=self.bound)
        if self.recv_hist is None:
            self.recv_hist = deque(maxlen=self.bound)

    def history(self) -> list[tuple[float, int]]:
        return list(zip(self.rssi, self.recv_hist))

    def fill_losses(self, now: float, period: float, floor: float, arriving: bool) -> None:
        """Append loss entries for every HELLO slot that passed unheard.

        With ``arriving`` the slot at ``now`` is the packet being received and
        is not counted as a loss.
        """
        if self.last_slot is None:
            return
        n = math.floor((now - self.last_slot) / period + 1e-6)
        missed = n - 1 if arriving else n
        if missed > 0:
            for _ in range(min(missed, self.bound)):
                self.rssi.append(floor)
                self.recv_hist.append(0)
            self.last_slot += missed * period


class NeighborTable:
    """Neighbor discovery with M/K hysteresis and optional predictor gating."""

    def __init__(self, owner: int, config: ProtocolConfig, gate: Gate | None = None, rssi_floor: float = -66.0):
        self.owner = owner
        self.config = config
        self.gate = gate if config.prediction_enabled else None
        self.rssi_floor = gate.rssi_floor if gate is not None else rssi_floor
        k = gate.k if gate is not None else 1
        self.bound = max(config.history_bound or k, k)
        self.period = config.hello_period
        self.entries: dict[int, LinkState] = {}
        self.members: set[int] = set()

    def link(self, peer: int) -> LinkState:
        ls = self.entries.get(peer)
        if ls is None:
            ls = self.entries[peer] = LinkState(self.bound)
        return ls

    def gate_passes(self, peer: int, now: float) -> bool:
        """Predictor verdict for a control packet from ``peer`` at ``now``."""
        if self.gate is None:
            return True
        ls = self.entries.get(peer)
        if ls is None:
            return True
        ls.fill_losses(now, self.config.hello_period, self.rssi_floor, arriving=False)
        return self.gate.passes(ls.rssi, ls.recv_hist)

    def on_hello_received(self, src: int, rssi: float, now: float) -> tuple[bool, list[TraceEvent]]:
        """Returns ``(accepted, events)``."""
        ls = self.entries.get(src)
        if ls is None:
            ls = self.entries[src] = LinkState(self.bound)
        elif now - ls.last_slot > 1.5 * self.period:
            ls.fill_losses(now, self.period, self.rssi_floor, arriving=True)
        accepted = True if self.gate is None else self.gate.passes(ls.rssi, ls.recv_hist)
        ls.rssi.append(rssi)
        ls.recv_hist.append(1)
        ls.last_slot = now
        if not accepted:
            return False, []
        ls.recv += 1
        ls.lost = 0
        ls.last_recv_time = now
        if ls.recv >= self.config.m_up and src not in self.members:
            self.members.add(src)
            return True, [TraceEvent(NEIGHBOR_ADDED, self.owner, src)]
        return True, []

    def on_hello_timer(self, now: float) -> list[TraceEvent]:
        horizon = now - self.period
        K = self.config.k_down
        events = []
        for peer, ls in self.entries.items():
            if ls.last_recv_time < horizon:
                ls.lost += 1
                ls.recv = 0
                if ls.lost >= K and peer in self.members:
                    self.members.discard(peer)
                    events.append(TraceEvent(NEIGHBOR_REMOVED, self.owner, peer))
        return events


# -- controller side -----------------------------------------------------


@dataclass
class GlobalTopology:
    """Directed adjacency; edge ``i -> j`` means ``j`` hears ``i``."""

    in_neighbors: dict[int, set[int]] = field(default_factory=dict)
    collected_at: float = 0.0

    @property
    def nodes(self) -> set[int]:
        out = set(self.in_neighbors)
        for s in self.in_neighbors.values():
            out |= s
        return out

    @property
    def edges(self) -> set[tuple[int, int]]:
        return {(i, j) for j, s in self.in_neighbors.items() for i in s}

    def merge_report(self, reporter: int, neighbors: Iterable[int], now: float) -> None:
        self.in_neighbors[reporter] = set(neighbors)
        for i in self.in_neighbors[reporter]:
            self.in_neighbors.setdefault(i, set())
        self.collected_at = now

    def successors(self) -> dict[int, set[int]]:
        succ = {n: set() for n in self.nodes}
        for j, s in self.in_neighbors.items():
            for i in s:
                succ[i].add(j)
        return succ


@dataclass
class FlowTable:
    rules: dict[int, int] = field(default_factory=dict)


def route_lookup(table: FlowTable, dest: int) -> int | None:
    """Next hop toward ``dest``; ``None`` when the table has no route."""
    if not isinstance(dest, int) or isinstance(dest, bool):
        raise TypeError(f"destination must be a node id, got {dest!r}")
    return table.rules.get(dest)


def compute_flow_tables(successors: dict[int, set[int]]) -> dict[int, FlowTable]:
    """Minimum-hop next hops toward every reachable destination.

    Ties between equal-cost next hops go to the lowest node id.
    """
    nodes = sorted(set(successors) | {v for s in successors.values() for v in s})
    preds: dict[int, list[int]] = {n: [] for n in nodes}
    for u, vs in successors.items():
        for v in vs:
            preds[v].append(u)
    tables = {n: FlowTable() for n in nodes}
    for d in nodes:
        dist = {d: 0}
        frontier = [d]
        while frontier:
            nxt = []
            for v in frontier:
                for u in preds[v]:
                    if u not in dist:
                        dist[u] = dist[v] + 1
                        nxt.append(u)
            frontier = nxt
        for n, h in dist.items():
            if n == d:
                continue
            tables[n].rules[d] = min(v for v in successors.get(n, ()) if dist.get(v) == h - 1)
    return tables


def path_from_tables(tables: dict[int, FlowTable], src: int, dst: int) -> list[int] | None:
    """Node sequence from ``src`` to ``dst`` by following next hops."""
    path = [src]
    seen = {src}
    node = src
    while node != dst:
        t = tables.get(node)
        if t is None:
            return None
        nh = route_lookup(t, dst)
        if nh is None or nh in seen:
            return None
        path.append(nh)
        seen.add(nh)
        node = nh
    return path


class Node:
    """A sensor: neighbor table plus the Alg. 3 topology responder."""

    def __init__(self, node_id: int, config: ProtocolConfig, gate: Gate | None = None, rssi_floor: float = -66.0):
        self.id = node_id
        self.config = config
        self.table = NeighborTable(node_id, config, gate, rssi_floor)
        self.seen_waves: set[tuple[int, int]] = set()
        self.wave: tuple[int, int] | None = None
        self.parent: int | None = None
        self.pending_repair = False
        self.flow_table: FlowTable | None = None
        self.flow_table_seq = -1

    @property
    def is_controller(self) -> bool:
        return False

    # Alg. 1 -------------------------------------------------------------

    def hello_timer(self, now: float) -> list:
        acts: list = [Send(Message(MessageKind.HELLO_RQ, self.id, self.id, 0), None)]
        for ev in self.table.on_hello_timer(now):
            acts.append(ev)
            acts += self.on_neighbor_change(ev, now)
        acts.append(SetTimer("hello", self.config.hello_period))
        return acts

    def hello_received(self, src: int, rssi: float, now: float) -> tuple[bool, list]:
        accepted, events = self.table.on_hello_received(src, rssi, now)
        acts: list = []
        for ev in events:
            acts.append(ev)
            acts += self.on_neighbor_change(ev, now)
        return accepted, acts

    # Alg. 3 -------------------------------------------------------------

    def _report(self, seq: int, incremental: bool) -> Message:
        return Message(MessageKind.TOPOLOGY_RP, self.id, self.id, seq, tuple(sorted(self.table.members)), incremental)

    def on_topology_rq(self, msg: Message, now: float) -> list:
        wave = (msg.origin, msg.seq)
        if wave in self.seen_waves:
            return [TraceEvent("RQDropped", self.id, msg.src, msg.seq, "duplicate")]
        if msg.src not in self.table.members:
            return [TraceEvent("RQDropped", self.id, msg.src, msg.seq, "not-neighbor")]
        if not self.table.gate_passes(msg.src, now):
            return [TraceEvent("RQDropped", self.id, msg.src, msg.seq, "gated")]
        self.seen_waves.add(wave)
        self.wave = wave
        self.parent = msg.src
        self.pending_repair = False
        rp = self._report(msg.seq, False)
        return [
            TraceEvent("RQAccepted", self.id, msg.src, msg.seq),
            TraceEvent("RPHop", self.id, self.parent, msg.seq, f"{self.id}:member"),
            Send(rp, self.parent),
            TraceEvent("RQSent", self.id, -1, msg.seq),
            Send(Message(MessageKind.TOPOLOGY_RQ, self.id, msg.origin, msg.seq), None),
        ]

    def on_topology_rp(self, msg: Message, now: float) -> list:
        """Relay a child's report one hop up the reverse path."""
        if self.wave is None or msg.seq != self.wave[1] or self.parent is None:
            return [TraceEvent("RPDropped", self.id, msg.src, msg.seq, "no-path")]
        if self.parent not in self.table.members:
            return [TraceEvent("RPDropped", self.id, msg.src, msg.seq, "parent-lost")]
        fwd = Message(msg.kind, self.id, msg.origin, msg.seq, msg.payload, msg.incremental)
        return [TraceEvent("RPHop", self.id, self.parent, msg.seq, f"{msg.origin}:member"), Send(fwd, self.parent)]

    def on_neighbor_change(self, event: TraceEvent, now: float) -> list:
        if self.wave is None or self.parent is None or self.parent not in self.table.members:
            self.pending_repair = True
            return [TraceEvent("RepairQueued", self.id, event.peer)]
        self.pending_repair = False
        return [
            TraceEvent("RepairSent", self.id, event.peer, self.wave[1]),
            TraceEvent("RPHop", self.id, self.parent, self.wave[1], f"{self.id}:member"),
            Send(self._report(self.wave[1], True), self.parent),
        ]

    def on_flow_table(self, msg: Message, now: float) -> list:
        if self.config.gate_flow_table and not self.table.gate_passes(msg.src, now):
            return [TraceEvent("FlowTableDropped", self.id, msg.src, msg.seq, "gated")]
        target, route, rules = msg.payload
        if target == self.id:
            if msg.seq >= self.flow_table_seq:
                self.flow_table = FlowTable(dict(rules))
                self.flow_table_seq = msg.seq
            return [TraceEvent("FlowTableInstalled", self.id, msg.src, msg.seq, str(len(rules)))]
        try:
            nxt = route[route.index(self.id) + 1]
        except (ValueError, IndexError):
            return [TraceEvent("FlowTableDropped", self.id, msg.src, msg.seq, "off-route")]
        fwd = Message(msg.kind, self.id, msg.origin, msg.seq, msg.payload)
        return [Send(fwd, nxt)]

    def receive(self, msg: Message, now: float) -> list:
        if msg.kind is MessageKind.TOPOLOGY_RQ:
            return self.on_topology_rq(msg, now)
        if msg.kind is MessageKind.TOPOLOGY_RP:
            return self.on_topology_rp(msg, now)
        if msg.kind is MessageKind.FLOW_TABLE:
            return self.on_flow_table(msg, now)
        raise ValueError(f"unexpected message kind {msg.kind}")


class Controller(Node):
    """Alg. 2: periodic topology collection and flow-table generation."""

    def __init__(self, node_id: int, config: ProtocolConfig, gate: Gate | None = None, rssi_floor: float = -66.0, t2_delay: float = 5.0):
        super().__init__(node_id, config, gate, rssi_floor)
        self.seq = 0
        self.t2_delay = t2_delay
        self.pending = GlobalTopology()
        self.topology = GlobalTopology()
        self.collecting = False
        self.tables: dict[int, FlowTable] = {}
        self.unreachable: set[int] = set()

    @property
    def is_controller(self) -> bool:
        return True

    def start_collection(self, now: float) -> list:
        self.seq += 1
        self.wave = (self.id, self.seq)
        self.seen_waves.add(self.wave)
        self.pending = GlobalTopology(collected_at=now)
        self.collecting = True
        return [
            TraceEvent("WaveStarted", self.id, -1, self.seq),
            TraceEvent("RQSent", self.id, -1, self.seq),
            Send(Message(MessageKind.TOPOLOGY_RQ, self.id, self.id, self.seq), None),
            SetTimer("t2", self.t2_delay),
        ]

    def on_topology_rq(self, msg: Message, now: float) -> list:
        return []  # its own flood echoing back

    def on_topology_rp(self, msg: Message, now: float) -> list:
        if msg.seq != self.seq:
            return [TraceEvent("RPStale", self.id, msg.origin, msg.seq)]
        target = self.pending if self.collecting or not msg.incremental else self.topology
        target.merge_report(msg.origin, msg.payload, now)
        return [TraceEvent("RPReceived", self.id, msg.origin, msg.seq, "repair" if msg.incremental else "wave")]

    def on_neighbor_change(self, event: TraceEvent, now: float) -> list:
        if self.seq and not self.collecting:
            self.topology.merge_report(self.id, self.table.members, now)
        return []

    def on_t2(self, now: float) -> list:
        self.pending.merge_report(self.id, self.table.members, now)
        self.topology = self.pending
        self.pending = GlobalTopology(collected_at=now)
        self.collecting = False
        succ = self.topology.successors()
        self.tables = compute_flow_tables(succ)
        self.flow_table = self.tables.get(self.id, FlowTable())
        self.flow_table_seq = self.seq
        acts: list = [TraceEvent("FlowTablesComputed", self.id, -1, self.seq, str(len(self.tables)))]
        acts.append(TraceEvent("FlowTableInstalled", self.id, self.id, self.seq, str(len(self.flow_table.rules))))
        self.unreachable = set()
        for n in sorted(self.tables):
            if n == self.id:
                continue
            route = path_from_tables(self.tables, self.id, n)
            if route is None:
                self.unreachable.add(n)
                acts.append(TraceEvent("Unreachable", self.id, n, self.seq))
                continue
            rules = tuple(sorted(self.tables[n].rules.items()))
            msg = Message(MessageKind.FLOW_TABLE, self.id, n, self.seq, (n, tuple(route), rules))
            acts.append(Send(msg, route[1]))
        return acts
