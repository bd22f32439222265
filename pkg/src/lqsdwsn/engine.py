"""Single-threaded deterministic discrete-event engine.

All randomness comes from one 64-bit seed split into independent streams:
node placement, HELLO phase jitter, one HELLO channel stream per sender and a
separate stream for control traffic.  HELLO draws therefore do not depend on
protocol decisions, so runs that differ only in gating see identical HELLO
receptions.
"""
from __future__ import annotations

import heapq
import logging
import math
import time as _time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .channel import ChannelParams, mean_attenuation
from .protocol import (
    CONTROLLER_ID,
    Controller,
    FlowTable,
    Gate,
    Message,
    MessageKind,
    Node,
    ProtocolConfig,
    Send,
    SetTimer,
    TraceEvent,
)

log = logging.getLogger(__name__)

LAYOUTS = ("area", "line", "pair")
CUTOFF_R0 = 2.0

_HELLO_TIMER, _HELLO_BATCH, _MESSAGE, _T1, _T2 = range(5)


class SimulationError(RuntimeError):
    pass


@dataclass
class ScenarioConfig:
    layout: str = "area"
    width_m: float = 500.0
    height_m: float = 500.0
    density: float = 12e-5  # nodes per m^2
    node_count: int | None = None  # overrides density for the area layout
    line_length_r0: float = 7.0
    line_nodes_per_r0: float = 8.0
    pair_distance_r0: float = 1.0
    duration_periods: float = 2000.0
    topology: bool = True
    t1_start_periods: float = 50.0
    t1_period_periods: float = 500.0
    t2_delay_periods: float = 5.0
    control_hop_delay: float = 0.0
    record_packets: bool = False
    max_queue: int = 1_000_000
    seed: int = 0
    channel: ChannelParams = field(default_factory=ChannelParams)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise ValueError(f"layout must be one of {LAYOUTS}")
        if self.duration_periods <= 0:
            raise ValueError("duration must be > 0")
        if self.resolved_node_count() < 2:
            raise ValueError(f"scenario needs at least 2 nodes, got {self.resolved_node_count()}")

    def resolved_node_count(self) -> int:
        if self.layout == "pair":
            return 2
        if self.layout == "line":
            return int(round(self.line_nodes_per_r0 * self.line_length_r0)) + 1
        if self.node_count is not None:
            return int(self.node_count)
        return int(round(self.density * self.width_m * self.height_m))

    @property
    def duration(self) -> float:
        return self.duration_periods * self.protocol.hello_period


@dataclass
class Deployment:
    positions: np.ndarray  # (n, 2) metres
    controller: int
    width_m: float
    height_m: float

    @property
    def n(self) -> int:
        return len(self.positions)

    def distances(self) -> np.ndarray:
        d = self.positions[:, None, :] - self.positions[None, :, :]
        return np.sqrt((d**2).sum(axis=2))


def _streams(seed: int, n: int):
    root = np.random.SeedSequence(seed)
    place, jitter, control, hello = root.spawn(4)
    return (
        np.random.default_rng(place),
        np.random.default_rng(jitter),
        np.random.default_rng(control),
        [np.random.default_rng(s) for s in hello.spawn(n)],
    )


def build_scenario(config: ScenarioConfig, rng: np.random.Generator | None = None) -> Deployment:
    """Controller (id 0) at the centre of the layout, sensors placed uniformly."""
    n = config.resolved_node_count()
    if n < 2:
        raise ValueError("scenario needs at least 2 nodes")
    rng = rng if rng is not None else _streams(config.seed, n)[0]
    r0 = config.channel.r0_m
    if config.layout == "area":
        w, h = config.width_m, config.height_m
        pts = rng.random((n - 1, 2)) * [w, h]
        ctrl = [w / 2, h / 2]
    elif config.layout == "line":
        w, h = config.line_length_r0 * r0, 0.0
        pts = np.column_stack([rng.random(n - 1) * w, np.zeros(n - 1)])
        ctrl = [w / 2, 0.0]
    else:
        w, h = config.pair_distance_r0 * r0, 0.0
        pts = np.array([[w, 0.0]])
        ctrl = [0.0, 0.0]
    return Deployment(np.vstack([ctrl, pts]), CONTROLLER_ID, w, h)


class Record(NamedTuple):
    time: float
    kind: str
    node: int
    peer: int
    seq: int
    info: str


@dataclass
class RunResult:
    config: ScenarioConfig
    deployment: Deployment
    records: list[Record]
    ledger: list[tuple[int, int, float, int, int, int]]  # src, dst, dist, sent, received, passed
    members: dict[int, tuple[int, ...]]
    installed_tables: dict[int, dict[int, int]]
    controller_tables: dict[int, dict[int, int]]
    prediction: bool
    stats: dict = field(default_factory=dict)

    def ledger_map(self) -> dict[tuple[int, int], tuple[float, int, int, int]]:
        return {(s, d): (x, a, b, c) for s, d, x, a, b, c in self.ledger}


class Simulator:
    def __init__(self, config: ScenarioConfig, model=None):
        self.config = config
        proto = config.protocol
        if proto.prediction_enabled and model is None:
            raise ValueError("prediction is enabled but no model was supplied")
        self.model = model if proto.prediction_enabled else None
        n = config.resolved_node_count()
        place, self.jitter_rng, self.control_rng, self.hello_rngs = _streams(config.seed, n)
        self.deployment = build_scenario(config, place)
        self.dist = self.deployment.distances()
        ch = config.channel
        self.cutoff = CUTOFF_R0 * ch.r0_m
        self.fan_ids, self.fan_att = [], []
        for u in range(n):
            ids = np.array([v for v in range(n) if v != u and self.dist[u, v] <= self.cutoff], dtype=np.int64)
            self.fan_ids.append(ids)
            self.fan_att.append(mean_attenuation(self.dist[u, ids], ch) if len(ids) else np.zeros(0))
        self.hello_sent = np.zeros(n, dtype=np.int64)
        self.recv_count = [np.zeros(len(f), dtype=np.int64) for f in self.fan_ids]
        self.pass_count = [np.zeros(len(f), dtype=np.int64) for f in self.fan_ids]

        gate = Gate.from_model(self.model, ch.rssi_floor_dbm) if self.model is not None else None
        t2 = config.t2_delay_periods * proto.hello_period
        self.nodes: list[Node] = [Controller(0, proto, gate, ch.rssi_floor_dbm, t2)]
        self.nodes += [Node(i, proto, gate, ch.rssi_floor_dbm) for i in range(1, n)]
        self.queue: list = []
        self._seq = 0
        self.records: list[Record] = []
        self.now = 0.0
        self.events_processed = 0

    # -- queue -------------------------------------------------------------

    def _push(self, t: float, etype: int, node: int, data=None) -> None:
        self._seq += 1
        heapq.heappush(self.queue, (t, self._seq, etype, node, data))
        if len(self.queue) > self.config.max_queue:
            raise SimulationError(
                f"event queue overflow: {len(self.queue)} pending at t={self.now:.3f} "
                f"after {self.events_processed} events (limit {self.config.max_queue})"
            )

    def _apply(self, node: int, actions) -> None:
        for a in actions:
            if isinstance(a, TraceEvent):
                self.records.append(Record(self.now, a.kind, a.node, a.peer, a.seq, a.info))
            elif isinstance(a, Send):
                if a.msg.kind is MessageKind.HELLO_RQ:
                    self._broadcast_hello(node)
                elif a.dst is None:
                    self._broadcast_control(node, a.msg)
                else:
                    self._unicast(node, a.dst, a.msg)
            elif isinstance(a, SetTimer):
                etype = _HELLO_TIMER if a.name == "hello" else _T2
                self._push(self.now + a.delay, etype, node)

    # -- transmission ------------------------------------------------------

    def _broadcast_hello(self, u: int) -> None:
        self.hello_sent[u] += 1
        if self.config.record_packets:
            self.records.append(Record(self.now, "HelloSent", u, -1, -1, ""))
        att = self.fan_att[u]
        if not len(att):
            return
        ch = self.config.channel
        a = att + ch.sigma * self.hello_rngs[u].standard_normal(len(att))
        idx = np.flatnonzero(a < ch.beta_th)
        if len(idx):
            self.recv_count[u][idx] += 1
            self._push(self.now, _HELLO_BATCH, u, (idx, ch.p_t_dbm - a[idx]))

    def _broadcast_control(self, u: int, msg: Message) -> None:
        att = self.fan_att[u]
        if not len(att):
            return
        ch = self.config.channel
        a = att + ch.sigma * self.control_rng.standard_normal(len(att))
        t = self.now + self.config.control_hop_delay
        for j in np.flatnonzero(a < ch.beta_th):
            self._push(t, _MESSAGE, int(self.fan_ids[u][j]), msg)

    def _unicast(self, u: int, v: int, msg: Message) -> None:
        if self.dist[u, v] > self.cutoff:
            self.records.append(Record(self.now, "Lost", v, u, msg.seq, msg.kind.value))
            return
        ch = self.config.channel
        a = float(mean_attenuation(self.dist[u, v], ch)) + ch.sigma * self.control_rng.standard_normal()
        if a < ch.beta_th:
            self._push(self.now + self.config.control_hop_delay, _MESSAGE, v, msg)
        else:
            self.records.append(Record(self.now, "Lost", v, u, msg.seq, msg.kind.value))

    # -- main loop ---------------------------------------------------------

    def run(self) -> RunResult:
        cfg = self.config
        T = cfg.protocol.hello_period
        wall = _time.perf_counter()
        for i in range(len(self.nodes)):
            self._push(self.jitter_rng.random() * T, _HELLO_TIMER, i)
        if cfg.topology and cfg.layout != "pair":
            self._push(cfg.t1_start_periods * T, _T1, CONTROLLER_ID)
        end = cfg.duration
        record_packets = cfg.record_packets
        nodes = self.nodes
        while self.queue:
            t, _, etype, node, data = heapq.heappop(self.queue)
            if t > end:
                break
            if t < self.now:
                raise SimulationError(f"causality violation: event at {t} after {self.now}")
            self.now = t
            self.events_processed += 1
            if etype == _HELLO_BATCH:
                idx, rssi = data
                ids = self.fan_ids[node]
                passed = self.pass_count[node]
                for j, r in zip(idx.tolist(), rssi.tolist()):
                    v = int(ids[j])
                    ok, acts = nodes[v].hello_received(node, r, t)
                    if ok:
                        passed[j] += 1
                    if record_packets:
                        self.records.append(Record(t, "HelloDelivered", v, node, -1, "pass" if ok else "gated"))
                    if acts:
                        self._apply(v, acts)
            elif etype == _HELLO_TIMER:
                self._apply(node, nodes[node].hello_timer(t))
            elif etype == _MESSAGE:
                self._apply(node, nodes[node].receive(data, t))
            elif etype == _T1:
                self._apply(node, nodes[node].start_collection(t))
                if cfg.t1_period_periods > 0:
                    self._push(t + cfg.t1_period_periods * T, _T1, node)
            elif etype == _T2:
                ctrl = nodes[node]
                acts = ctrl.on_t2(t)
                if ctrl.unreachable:
                    log.info("wave %d: %d nodes unreachable", ctrl.seq, len(ctrl.unreachable))
                self._apply(node, acts)
        self.now = end
        return self._result(_time.perf_counter() - wall)

    def _result(self, wall: float) -> RunResult:
        ledger = []
        for u, ids in enumerate(self.fan_ids):
            for j, v in enumerate(ids.tolist()):
                ledger.append((u, v, float(self.dist[u, v]), int(self.hello_sent[u]), int(self.recv_count[u][j]), int(self.pass_count[u][j])))
        ctrl = self.nodes[CONTROLLER_ID]
        return RunResult(
            config=self.config,
            deployment=self.deployment,
            records=self.records,
            ledger=ledger,
            members={n.id: tuple(sorted(n.table.members)) for n in self.nodes},
            installed_tables={n.id: dict(n.flow_table.rules) for n in self.nodes if n.flow_table is not None},
            controller_tables={k: dict(v.rules) for k, v in getattr(ctrl, "tables", {}).items()},
            prediction=self.model is not None,
            stats={"events": self.events_processed, "wall_s": wall, "nodes": len(self.nodes)},
        )


def run(config: ScenarioConfig, model=None) -> RunResult:
    return Simulator(config, model).run()
