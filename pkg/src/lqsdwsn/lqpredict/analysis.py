"""Per-distance behaviour of a trained predictor: accuracy and gated delivery."""
from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from ..channel import ChannelParams, delivery_probability
from .features import simulate_periods
from .models import Model


class CurvePoint(NamedTuple):
    x_m: float
    x_r0: float
    value: float
    raw: float  # analytic delivery probability at x
    trials: int


def _check_grid(grid, params):
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= 0) or np.any(grid > 2 * params.r0_m * (1 + 1e-12)):
        raise ValueError("distance grid must lie within (0, 2*r0]")
    return grid


def _fresh_windows(model: Model, x: float, trials: int, params: ChannelParams, rng):
    recv, rssi = simulate_periods(np.full(trials, x), model.k + 1, params, rng)
    X = np.concatenate([rssi[:, : model.k], recv[:, : model.k].astype(float)], axis=1)
    return model.predict_batch(X), recv[:, model.k]


def accuracy_vs_distance(model: Model, params: ChannelParams, grid: Sequence[float], trials: int, rng) -> list[CurvePoint]:
    """Prediction accuracy on fresh links at each distance.

    Each trial is an independent link observed for ``k+1`` periods; the model
    sees the first ``k`` and is scored on the last.
    """
    grid = _check_grid(grid, params)
    out = []
    for x, sub in zip(grid, rng.spawn(len(grid))):
        pred, actual = _fresh_windows(model, float(x), trials, params, sub)
        out.append(CurvePoint(float(x), float(x) / params.r0_m, float(np.mean(pred == actual)), delivery_probability(float(x), params), trials))
    return out


def effective_delivery_curve(model: Model, params: ChannelParams, grid: Sequence[float], trials: int, rng) -> list[CurvePoint]:
    """Fraction of packets both physically received and passed by the model."""
    grid = _check_grid(grid, params)
    out = []
    for x, sub in zip(grid, rng.spawn(len(grid))):
        pred, actual = _fresh_windows(model, float(x), trials, params, sub)
        out.append(CurvePoint(float(x), float(x) / params.r0_m, float(np.mean(pred & actual)), delivery_probability(float(x), params), trials))
    return out


def crossing(xs: Sequence[float], ys: Sequence[float], level: float) -> float | None:
    """First downward crossing of ``level``, linearly interpolated."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    for i in range(len(xs) - 1):
        if ys[i] >= level > ys[i + 1]:
            return float(xs[i] + (ys[i] - level) * (xs[i + 1] - xs[i]) / (ys[i] - ys[i + 1]))
    return None


def band_width(xs: Sequence[float], ys: Sequence[float], lo: float = 0.3, hi: float = 0.7) -> float:
    """Width of the distance range over which a decreasing curve sits in ``[lo, hi]``."""
    x_hi = crossing(xs, ys, hi)
    x_lo = crossing(xs, ys, lo)
    if x_hi is None or x_lo is None:
        raise ValueError("curve does not traverse the band")
    return x_lo - x_hi
