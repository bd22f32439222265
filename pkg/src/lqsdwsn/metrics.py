"""Topology-stability statistics computed from run traces.

Everything here is a pure function of a :class:`~lqsdwsn.engine.RunResult`
(or of the CSV files it was written to).  Durations are in HELLO periods.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .lqpredict.analysis import crossing
from .protocol import NEIGHBOR_ADDED, NEIGHBOR_REMOVED, FlowTable, path_from_tables

_FLIPS = (NEIGHBOR_ADDED, NEIGHBOR_REMOVED)


class StableDuration(NamedTuple):
    mean: float  # periods
    segments: int  # completed segments averaged
    censored: bool  # fewer than two flips: mean is the window length, a lower bound


@dataclass(frozen=True)
class StabilityCurve:
    x: tuple[float, ...]
    mean: tuple[float, ...]
    median: tuple[float, ...]
    stderr: tuple[float, ...]
    count: tuple[int, ...]
    censored: tuple[int, ...]

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.x, self.x[1:])):
            raise ValueError("x must be strictly increasing")


def _segments(change_times: Sequence[float], start: float, end: float, period: float) -> tuple[list[float], bool]:
    # only intervals bounded by two changes count; open ends are censored
    times = sorted({t for t in change_times if start <= t <= end})
    if len(times) < 2:
        return [(end - start) / period], True
    return list(np.diff(times) / period), False


def _durations(change_times: Sequence[float], start: float, end: float, period: float) -> StableDuration:
    segs, censored = _segments(change_times, start, end, period)
    return StableDuration(float(np.mean(segs)), 0 if censored else len(segs), censored)


def _span(result, warmup_periods: float):
    T = result.config.protocol.hello_period
    return warmup_periods * T, result.config.duration, T


def link_stable_duration(result, pair: tuple[int, int], warmup_periods: float = 0.0) -> StableDuration:
    """Mean time between membership flips of ``peer`` in ``observer``'s table.

    Only intervals between two flips inside the window count.  With fewer
    than two flips the result is the window length, flagged as censored.
    """
    observer, peer = pair
    n = result.deployment.n
    if not (0 <= observer < n and 0 <= peer < n) or observer == peer:
        raise KeyError(f"pair {pair} is not tracked in this trace")
    start, end, T = _span(result, warmup_periods)
    times = [r.time for r in result.records if r.kind in _FLIPS and r.node == observer and r.peer == peer]
    return _durations(times, start, end, T)


def link_stable_segments(result, pair: tuple[int, int], warmup_periods: float = 0.0) -> tuple[list[float], bool]:
    """Completed stable intervals of one directed link, plus the censoring flag."""
    observer, peer = pair
    start, end, T = _span(result, warmup_periods)
    times = [r.time for r in result.records if r.kind in _FLIPS and r.node == observer and r.peer == peer]
    return _segments(times, start, end, T)


def neighbor_stable_duration(result, node: int, warmup_periods: float = 0.0) -> StableDuration:
    """Mean time between successive changes of ``node``'s neighbor set."""
    if not 0 <= node < result.deployment.n:
        raise KeyError(f"node {node} is not tracked in this trace")
    start, end, T = _span(result, warmup_periods)
    times = [r.time for r in result.records if r.kind in _FLIPS and r.node == node]
    return _durations(times, start, end, T)


def avg_neighbor_count(result, node: int, warmup_periods: float = 0.0) -> float:
    """Time-averaged size of ``node``'s neighbor set over the measurement window."""
    start, end, _ = _span(result, warmup_periods)
    if end <= start:
        raise ValueError("empty measurement window")
    size = 0
    t_prev = start
    area = 0.0
    for r in result.records:
        if r.node != node or r.kind not in _FLIPS:
            continue
        t = min(max(r.time, start), end)
        area += size * (t - t_prev)
        t_prev = t
        size += 1 if r.kind == NEIGHBOR_ADDED else -1
    area += size * (end - t_prev)
    return area / (end - start)


def route_hop_count(tables: Mapping[int, FlowTable | Mapping[int, int]], src: int, dst: int) -> int | None:
    """Hops along the flow-table path, ``None`` when unreachable."""
    tabs = {n: t if isinstance(t, FlowTable) else FlowTable(dict(t)) for n, t in tables.items()}
    if src == dst:
        return 0
    path = path_from_tables(tabs, src, dst)
    return None if path is None else len(path) - 1


def end_to_end_delivery(route: Sequence[int], rates: Mapping[tuple[int, int], float]) -> float:
    """Product of per-hop delivery rates along ``route`` (a node sequence)."""
    if len(route) < 2:
        raise ValueError("route needs at least one hop")
    out = 1.0
    for u, v in zip(route, route[1:]):
        out *= rates.get((u, v), 0.0)
    return out


def link_rates(result) -> dict[tuple[int, int], float]:
    """Per-link HELLO delivery measured by the run's ledger.

    Gate-passed over sent with prediction on; physically received over sent
    without it.
    """
    out = {}
    for s, d, _, sent, received, passed in result.ledger:
        if sent:
            out[(s, d)] = (passed if result.prediction else received) / sent
    return out


def network_radius(xs: Sequence[float], ys: Sequence[float], threshold: float = 0.3) -> float | None:
    """Distance where the end-to-end curve first drops below ``threshold``.

    ``None`` when the curve stays above the threshold over the whole range.
    """
    if len(xs) and ys[0] < threshold:
        return float(xs[0])
    return crossing(xs, ys, threshold)


class RoutePoint(NamedTuple):
    bin_r0: float  # bin centre, r0 units
    pairs: int  # ordered pairs in the bin
    routed: int  # pairs with a route
    hops: float  # mean hop count over routed pairs (nan if none)
    e2e: float  # mean end-to-end delivery over routed pairs (nan if none)


def route_pairs(result, tables=None) -> list[tuple[float, int | None, float | None]]:
    """``(distance_r0, hops, e2e)`` for every ordered pair of distinct nodes."""
    tables = result.controller_tables if tables is None else tables
    tabs = {n: FlowTable(dict(t)) for n, t in tables.items()}
    rates = link_rates(result)
    r0 = result.config.channel.r0_m
    dist = result.deployment.distances()
    out = []
    n = result.deployment.n
    for s in range(n):
        for d in range(n):
            if s == d:
                continue
            path = path_from_tables(tabs, s, d) if s in tabs else None
            if path is None:
                out.append((dist[s, d] / r0, None, None))
            else:
                out.append((dist[s, d] / r0, len(path) - 1, end_to_end_delivery(path, rates)))
    return out


def route_curve(pairs: Iterable[tuple[float, int | None, float | None]], bin_r0: float = 0.1, max_r0: float | None = None) -> list[RoutePoint]:
    bins: dict[int, list] = {}
    for x, hops, e2e in pairs:
        if max_r0 is not None and x > max_r0:
            continue
        bins.setdefault(int(math.floor(x / bin_r0)), []).append((hops, e2e))
    out = []
    for b in sorted(bins):
        items = bins[b]
        routed = [(h, e) for h, e in items if h is not None]
        out.append(
            RoutePoint(
                round((b + 0.5) * bin_r0, 10),
                len(items),
                len(routed),
                float(np.mean([h for h, _ in routed])) if routed else math.nan,
                float(np.mean([e for _, e in routed])) if routed else math.nan,
            )
        )
    return out


def summarize(x: Sequence[float], samples: Sequence[Sequence[StableDuration]]) -> StabilityCurve:
    """Fold per-seed durations into a curve; censored runs counted per point."""
    means, medians, errs, counts, cens = [], [], [], [], []
    for pts in samples:
        vals = np.array([p.mean for p in pts], dtype=float)
        means.append(float(vals.mean()))
        medians.append(float(np.median(vals)))
        errs.append(float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0)
        counts.append(len(vals))
        cens.append(sum(p.censored for p in pts))
    return StabilityCurve(tuple(x), tuple(means), tuple(medians), tuple(errs), tuple(counts), tuple(cens))
