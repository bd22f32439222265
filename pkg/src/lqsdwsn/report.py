"""Figure tables and the summary block, computed from run traces.

Every table is a CSV with a header row; columns are listed in the README.
Runs are grouped by layout: two-node runs feed the link-stability tables,
area runs the neighbor tables, line runs the routing tables and radii.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from . import experiments as ex
from .channel import ChannelParams, delivery_probability
from .engine import RunResult
from .lqpredict import accuracy_vs_distance, effective_delivery_curve
from .lqpredict.models import Model

GRID_STEP_R0 = 0.05
RADIUS_THRESHOLD = 0.3


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    return format(float(v), ".6g")


def write_csv(path: str | Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def distance_grid(params: ChannelParams, step_r0: float = GRID_STEP_R0) -> np.ndarray:
    n = int(round(2.0 / step_r0))
    return np.arange(1, n + 1) * step_r0 * params.r0_m


def fig3_rows(params: ChannelParams):
    return [(x / params.r0_m, x, delivery_probability(float(x), params)) for x in distance_grid(params)]


def predictor_rows(model: Model, params: ChannelParams, rng: np.random.Generator, trials: int):
    grid = distance_grid(params)
    acc_rng, eff_rng = rng.spawn(2)
    acc = accuracy_vs_distance(model, params, grid, trials, acc_rng)
    eff = effective_delivery_curve(model, params, grid, trials, eff_rng)
    fig7 = [(p.x_r0, p.x_m, p.value, p.trials) for p in acc]
    fig8 = [(p.x_r0, p.x_m, p.raw, p.value, p.trials) for p in eff]
    return fig7, fig8


def _stat_rows(stats, with_pred: bool):
    out = []
    for g in stats:
        pred, m, k, x = g.key
        row = (m, k, x, g.n, g.median, g.mean, g.stderr, g.censored)
        out.append(((pred,) + row) if with_pred else row)
    return out


def by_layout(results: Sequence[RunResult]) -> dict[str, list[RunResult]]:
    groups: dict[str, list[RunResult]] = {"pair": [], "area": [], "line": []}
    for r in results:
        groups[r.config.layout].append(r)
    return groups


STAT_COLS = ["m_up", "k_down"]
SUMMARY_COLS = ["runs", "median", "mean", "stderr", "censored"]


def write_report(
    out_dir: str | Path,
    results: Sequence[RunResult],
    params: ChannelParams,
    warmup_periods: float,
    model: Model | None = None,
    rng: np.random.Generator | None = None,
    trials: int = 2000,
) -> list[str]:
    """Write every table the inputs support; returns the file names written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(name, header, rows):
        write_csv(out / name, header, rows)
        written.append(name)

    emit("fig3.csv", ["x_r0", "x_m", "delivery_probability"], fig3_rows(params))
    if model is not None:
        fig7, fig8 = predictor_rows(model, params, rng if rng is not None else np.random.default_rng(0), trials)
        emit("fig7.csv", ["x_r0", "x_m", "accuracy", "trials"], fig7)
        emit("fig8.csv", ["x_r0", "x_m", "raw", "effective", "trials"], fig8)

    groups = by_layout(results)
    if groups["pair"]:
        stats = ex.link_stability(groups["pair"], warmup_periods)
        for name, pred in (("fig11.csv", 0), ("fig12.csv", 1)):
            rows = _stat_rows([g for g in stats if g.key[0] == pred], False)
            if rows:
                emit(name, STAT_COLS + ["distance_r0"] + SUMMARY_COLS, rows)
    if groups["area"]:
        dur, cnt = ex.neighbor_stability(groups["area"], warmup_periods)
        for name, pred in (("fig13.csv", 0), ("fig14.csv", 1)):
            rows = _stat_rows([g for g in dur if g.key[0] == pred], False)
            if rows:
                emit(name, STAT_COLS + ["density"] + SUMMARY_COLS, rows)
        emit("fig15.csv", ["prediction"] + STAT_COLS + ["density"] + SUMMARY_COLS, _stat_rows(cnt, True))

    radii: dict[int, float | None] = {}
    if groups["line"]:
        rows = ex.route_statistics(groups["line"])
        emit("fig16.csv", ["prediction", "bin_r0", "pairs", "routed", "hops"], [(r.prediction, r.bin_r0, r.pairs, r.routed, r.hops) for r in rows])
        emit("fig17.csv", ["prediction", "bin_r0", "pairs", "routed", "e2e"], [(r.prediction, r.bin_r0, r.pairs, r.routed, r.e2e) for r in rows])
        for pred in sorted({r.prediction for r in rows}):
            radii[pred] = ex.radius_from_rows(rows, pred, RADIUS_THRESHOLD)

    (out / "summary.txt").write_text(summary_text(groups, radii))
    written.append("summary.txt")
    return written


def _radius_str(radii, pred) -> str:
    if pred not in radii:
        return "n/a (no line runs)"
    r = radii[pred]
    return "not reached (curve stays above threshold)" if r is None else f"{r:.3f}"


def summary_text(groups, radii) -> str:
    lines = [
        "# network radius: distance (r0 units) where mean end-to-end delivery of the",
        f"# controller's routes first drops below {RADIUS_THRESHOLD:g}; measured on line deployments,",
        "# since a 500 m square cannot contain a radius of several r0",
    ]
    if groups["line"]:
        lengths = sorted({r.config.line_length_r0 for r in groups["line"]})
        lines.append("line_length_r0 = " + ", ".join(f"{x:g}" for x in lengths))
    lines += [
        f"network_radius_r0.without_prediction = {_radius_str(radii, 0)}",
        f"network_radius_r0.with_prediction = {_radius_str(radii, 1)}",
        f"runs.pair = {len(groups['pair'])}",
        f"runs.area = {len(groups['area'])}",
        f"runs.line = {len(groups['line'])}",
    ]
    return "\n".join(lines) + "\n"
