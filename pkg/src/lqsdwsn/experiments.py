"""Sweep expansion and per-experiment aggregation.

Three experiment families mirror the network-level analyses:

``link``      two nodes at a fixed distance; link stable duration.
``neighbor``  area deployment at a given density; stability and size of the
              controller's neighbor set.
``line``      nodes along a line several r0 long; hop count and end-to-end
              delivery of the controller's routes, network radius.
"""
from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from . import metrics
from .config import Config
from .engine import RunResult, run
from .protocol import CONTROLLER_ID


class Point(NamedTuple):
    index: int
    replicate: int
    seed: int
    overrides: dict


def derive_seed(base: int, *path: int) -> int:
    return int(np.random.SeedSequence([base, *path]).generate_state(1, np.uint64)[0])


def sweep_points(cfg: Config, base_seed: int) -> list[Point]:
    sw = cfg.sweep
    combos: list[dict] = []
    for pred in sw.prediction:
        for m in sw.m_up:
            for k in sw.k_down:
                common = {"prediction_enabled": pred, "m_up": m, "k_down": k}
                if sw.experiment == "link":
                    combos += [{**common, "layout": "pair", "pair_distance_r0": x} for x in sw.distance_r0]
                elif sw.experiment == "neighbor":
                    combos += [{**common, "layout": "area", "density": d} for d in sw.density]
                else:
                    combos.append({**common, "layout": "line"})
    points = []
    for i, ov in enumerate(combos):
        for rep in range(sw.seeds):
            # seeds depend on the replicate only, so paired on/off runs share channel draws
            points.append(Point(len(points), rep, derive_seed(base_seed, rep), ov))
    return points


def point_config(cfg: Config, point: Point) -> Config:
    """``cfg`` with the point's overrides written into its sections."""
    proto_keys = {f.name for f in dataclasses.fields(cfg.protocol)}
    proto = {k: v for k, v in point.overrides.items() if k in proto_keys}
    scen = {k: v for k, v in point.overrides.items() if k not in proto_keys}
    return dataclasses.replace(
        cfg, protocol=dataclasses.replace(cfg.protocol, **proto), scenario=dataclasses.replace(cfg.scenario, **scen)
    )


def run_point(cfg: Config, point: Point, model=None) -> RunResult:
    sc = point_config(cfg, point).scenario_config(point.seed)
    return run(sc, model if sc.protocol.prediction_enabled else None)


def _run_job(args):
    cfg, point, model = args
    return run_point(cfg, point, model)


def run_points(cfg: Config, points: list[Point], model=None, jobs: int = 1) -> list[RunResult]:
    """Results in point order regardless of ``jobs``."""
    if jobs <= 1:
        return [run_point(cfg, p, model) for p in points]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_job, [(cfg, p, model) for p in points]))


# -- per-run statistics ------------------------------------------------------


def pair_link_duration(result: RunResult, warmup_periods: float) -> metrics.StableDuration:
    """Link stable duration pooled over both directions of a two-node run."""
    segs = []
    for pair in ((0, 1), (1, 0)):
        s, censored = metrics.link_stable_segments(result, pair, warmup_periods)
        if not censored:
            segs += s
    if not segs:
        T = result.config.protocol.hello_period
        return metrics.StableDuration((result.config.duration - warmup_periods * T) / T, 0, True)
    return metrics.StableDuration(float(np.mean(segs)), len(segs), False)


@dataclass(frozen=True)
class GroupStat:
    key: tuple
    n: int
    mean: float
    median: float
    stderr: float
    censored: int


def _stat(key, vals, censored=0) -> GroupStat:
    vals = np.asarray(vals, dtype=float)
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return GroupStat(key, len(vals), float(vals.mean()), float(np.median(vals)), se, censored)


def _group(results: Iterable[RunResult], keyfn):
    groups: dict = {}
    for r in results:
        groups.setdefault(keyfn(r), []).append(r)
    return dict(sorted(groups.items()))


def link_stability(results: Iterable[RunResult], warmup_periods: float) -> list[GroupStat]:
    """Keyed by ``(prediction, m_up, k_down, distance_r0)``."""
    def key(r):
        p = r.config.protocol
        return (int(r.prediction), p.m_up, p.k_down, r.config.pair_distance_r0)

    out = []
    for k, runs in _group(results, key).items():
        d = [pair_link_duration(r, warmup_periods) for r in runs]
        out.append(_stat(k, [x.mean for x in d], sum(x.censored for x in d)))
    return out


def neighbor_stability(results: Iterable[RunResult], warmup_periods: float) -> tuple[list[GroupStat], list[GroupStat]]:
    """Controller neighbor stable duration and neighbor count.

    Keyed by ``(prediction, m_up, k_down, density)``.
    """
    def key(r):
        p = r.config.protocol
        return (int(r.prediction), p.m_up, p.k_down, r.config.density)

    dur, cnt = [], []
    for k, runs in _group(results, key).items():
        d = [metrics.neighbor_stable_duration(r, CONTROLLER_ID, warmup_periods) for r in runs]
        dur.append(_stat(k, [x.mean for x in d], sum(x.censored for x in d)))
        cnt.append(_stat(k, [metrics.avg_neighbor_count(r, CONTROLLER_ID, warmup_periods) for r in runs]))
    return dur, cnt


class RouteRow(NamedTuple):
    prediction: int
    bin_r0: float
    pairs: int
    routed: int
    hops: float
    e2e: float


def route_statistics(results: Iterable[RunResult], bin_r0: float = 0.1) -> list[RouteRow]:
    """Hop count and end-to-end delivery per distance bin, pooled over runs."""
    rows = []
    for pred, runs in _group(results, lambda r: int(r.prediction)).items():
        pairs = []
        for r in runs:
            pairs += metrics.route_pairs(r)
        rows += [RouteRow(pred, *pt) for pt in metrics.route_curve(pairs, bin_r0)]
    return rows


def radius_from_rows(rows: list[RouteRow], prediction: int, threshold: float = 0.3) -> float | None:
    pts = [r for r in rows if r.prediction == prediction and r.routed > 0]
    return metrics.network_radius([r.bin_r0 for r in pts], [r.e2e for r in pts], threshold)
