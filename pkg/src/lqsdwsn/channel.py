"""Log-normal shadow-fading link model.

Reception of a packet over distance ``x`` is decided by one shadowing draw:
the path attenuation ``A = 10*alpha*log10(x) + N(0, sigma^2)`` (dB) is compared
with the attenuation threshold ``beta_th``.  The same draw yields the RSSI.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

SQRT2 = math.sqrt(2.0)


def effective_radius(alpha: float, beta_th: float) -> float:
    """Distance (m) at which the point-to-point delivery rate is 50%."""
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    if beta_th <= 0:
        raise ValueError("beta_th must be > 0")
    return 10.0 ** (beta_th / (10.0 * alpha))


@dataclass(frozen=True)
class ChannelParams:
    alpha: float = 3.0
    sigma: float = 4.0
    beta_th: float = 66.0
    p_t_dbm: float = 0.0
    # None -> derived from alpha and beta_th
    r0_override: float | None = None
    r0_m: float = field(init=False)

    def __post_init__(self):
        if self.alpha <= 0 or self.sigma <= 0 or self.beta_th <= 0:
            raise ValueError("alpha, sigma and beta_th must all be > 0")
        if self.r0_override is not None and self.r0_override <= 0:
            raise ValueError("r0 override must be > 0")
        r0 = self.r0_override if self.r0_override is not None else effective_radius(self.alpha, self.beta_th)
        object.__setattr__(self, "r0_m", float(r0))

    @property
    def r0_derived(self) -> bool:
        return self.r0_override is None

    @property
    def rssi_floor_dbm(self) -> float:
        """RSSI recorded for a lost packet (the receiver sensitivity)."""
        return self.p_t_dbm - self.beta_th

    @property
    def log_r0(self) -> float:
        return math.log10(self.r0_m)

    @property
    def erf_gain(self) -> float:
        return 10.0 * self.alpha / (SQRT2 * self.sigma)

    def with_r0(self, r0_m: float | None) -> "ChannelParams":
        return replace(self, r0_override=r0_m)


class LinkDraw(NamedTuple):
    received: bool
    rssi_dbm: float


def delivery_probability(x: float, params: ChannelParams) -> float:
    if x < 0:
        raise ValueError(f"distance must be non-negative, got {x}")
    if x == 0:
        return 1.0
    z = params.erf_gain * (math.log10(x) - params.log_r0)
    return 0.5 - 0.5 * math.erf(z)


def delivery_probability_array(x, params: ChannelParams) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("distance must be non-negative")
    out = np.ones_like(x)
    pos = x > 0
    z = params.erf_gain * (np.log10(x[pos]) - params.log_r0)
    out[pos] = [0.5 - 0.5 * math.erf(v) for v in z]
    return out


def mean_attenuation(x, params: ChannelParams):
    """Deterministic part of the path attenuation (dB).

    When r0 is overridden the threshold crossing is kept at r0, so the
    attenuation is re-anchored: ``beta_th + 10*alpha*log10(x/r0)``.
    """
    if params.r0_derived:
        return 10.0 * params.alpha * np.log10(x)
    return params.beta_th + 10.0 * params.alpha * (np.log10(x) - params.log_r0)


def sample_link_event(x: float, params: ChannelParams, rng: np.random.Generator) -> LinkDraw:
    if x <= 0:
        raise ValueError(f"distance must be > 0, got {x}")
    a = float(mean_attenuation(x, params)) + params.sigma * rng.standard_normal()
    return LinkDraw(a < params.beta_th, params.p_t_dbm - a)


def sample_link_events(mean_att: np.ndarray, params: ChannelParams, rng: np.random.Generator):
    """Vectorised draw for an array of mean attenuations (dB).

    Returns ``(received, rssi_dbm)`` arrays with the same shape as ``mean_att``.
    Consumes the stream exactly like repeated :func:`sample_link_event` calls.
    """
    a = mean_att + params.sigma * rng.standard_normal(np.shape(mean_att))
    return a < params.beta_th, params.p_t_dbm - a


def distance_at_probability(p: float, params: ChannelParams) -> float:
    """Inverse of :func:`delivery_probability` for 0 < p < 1."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly between 0 and 1")
    from scipy.special import erfinv

    z = float(erfinv(1.0 - 2.0 * p))
    return params.r0_m * 10.0 ** (z / params.erf_gain)


def instability_band(params: ChannelParams, lo: float = 0.3, hi: float = 0.7) -> tuple[float, float]:
    """Distance interval where the delivery rate lies in ``[lo, hi]``."""
    return distance_at_probability(hi, params), distance_at_probability(lo, params)
