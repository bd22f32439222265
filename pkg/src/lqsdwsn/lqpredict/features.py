"""Feature windows over per-link HELLO history and dataset synthesis."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..channel import ChannelParams, mean_attenuation, sample_link_events

DEFAULT_K = 10


@dataclass(frozen=True)
class FeatureWindow:
    """``k`` consecutive periods of (RSSI, RECV), oldest first."""

    rssi: tuple[float, ...]
    recv: tuple[int, ...]

    def __post_init__(self):
        if len(self.rssi) != len(self.recv):
            raise ValueError("rssi and recv must have the same length")
        if any(r not in (0, 1) for r in self.recv):
            raise ValueError("recv entries must be 0 or 1")

    @property
    def k(self) -> int:
        return len(self.rssi)

    def as_vector(self) -> np.ndarray:
        return np.asarray(self.rssi + self.recv, dtype=float)


@dataclass(frozen=True)
class Sample:
    window: FeatureWindow
    label: int
    distance_m: float


@dataclass
class Dataset:
    """Column-major sample store: ``X`` is ``[rssi_1..rssi_k, recv_1..recv_k]``."""

    X: np.ndarray
    y: np.ndarray
    distance_m: np.ndarray
    k: int

    def __len__(self):
        return len(self.y)

    def __post_init__(self):
        if self.X.shape != (len(self.y), 2 * self.k) or len(self.distance_m) != len(self.y):
            raise ValueError("inconsistent dataset shapes")

    def samples(self):
        for row, label, d in zip(self.X, self.y, self.distance_m):
            yield Sample(
                FeatureWindow(tuple(float(v) for v in row[: self.k]), tuple(int(v) for v in row[self.k :])),
                int(label),
                float(d),
            )

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], self.distance_m[idx], self.k)

    @classmethod
    def from_samples(cls, samples: Sequence[Sample]) -> "Dataset":
        if not samples:
            raise ValueError("no samples")
        k = samples[0].window.k
        X = np.array([s.window.as_vector() for s in samples], dtype=float)
        y = np.array([s.label for s in samples], dtype=np.int8)
        d = np.array([s.distance_m for s in samples], dtype=float)
        return cls(X, y, d, k)


def extract_window(history: Sequence[tuple[float, int]], end_index: int, k: int, rssi_floor: float) -> FeatureWindow:
    """The ``k`` history entries preceding ``end_index``.

    ``history`` holds ``(rssi, recv)`` pairs; the RSSI of a lost entry is
    replaced by ``rssi_floor`` whatever was stored.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if end_index < k or end_index > len(history):
        raise ValueError(f"need {k} entries before index {end_index}, history has {len(history)}")
    chunk = history[end_index - k : end_index]
    rssi = tuple(float(r) if v else float(rssi_floor) for r, v in chunk)
    recv = tuple(int(v) for _, v in chunk)
    return FeatureWindow(rssi, recv)


def simulate_periods(distances: np.ndarray, periods: int, params: ChannelParams, rng: np.random.Generator):
    """Per-period reception flags and encoded RSSI for independent links.

    Returns ``(recv, rssi)`` arrays of shape ``(len(distances), periods)``;
    lost periods carry the floor RSSI.
    """
    att = np.broadcast_to(mean_attenuation(np.asarray(distances, float), params)[:, None], (len(distances), periods))
    recv, rssi = sample_link_events(att, params, rng)
    rssi = np.where(recv, rssi, params.rssi_floor_dbm)
    return recv.astype(np.int8), rssi


def sliding_windows(recv: np.ndarray, rssi: np.ndarray, k: int):
    """All length-``k`` windows and their next-period labels, link-major."""
    n_links, periods = recv.shape
    n_pos = periods - k
    idx = np.arange(k)[None, :] + np.arange(n_pos)[:, None]  # (n_pos, k)
    X = np.concatenate([rssi[:, idx], recv[:, idx].astype(float)], axis=2).reshape(n_links * n_pos, 2 * k)
    y = recv[:, k:].reshape(-1)
    return X, y


def uniform_distances(n: int, params: ChannelParams, rng: np.random.Generator, max_r0: float = 2.0) -> np.ndarray:
    # 1 - U[0,1) lies in (0,1], giving distances in (0, max_r0*r0]
    return max_r0 * params.r0_m * (1.0 - rng.random(n))


def generate_dataset(
    params: ChannelParams,
    n_links: int,
    periods_per_link: int,
    k: int,
    rng: np.random.Generator,
) -> Dataset:
    if n_links < 1:
        raise ValueError("n_links must be >= 1")
    if periods_per_link <= k:
        raise ValueError(f"periods_per_link ({periods_per_link}) must exceed k ({k})")
    d = uniform_distances(n_links, params, rng)
    recv, rssi = simulate_periods(d, periods_per_link, params, rng)
    X, y = sliding_windows(recv, rssi, k)
    dist = np.repeat(d, periods_per_link - k)
    return Dataset(X, y, dist, k)


def stratified_split(y: np.ndarray, test_fraction: float, rng: np.random.Generator):
    """Index arrays (train, test) preserving the label ratio."""
    train, test = [], []
    for label in (0, 1):
        idx = np.flatnonzero(y == label)
        idx = idx[rng.permutation(len(idx))]
        n_test = int(round(test_fraction * len(idx)))
        test.append(idx[:n_test])
        train.append(idx[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def header(k: int) -> list[str]:
    return ["distance_m"] + [f"rssi_{i}" for i in range(1, k + 1)] + [f"recv_{i}" for i in range(1, k + 1)] + ["label"]


def write_dataset_csv(ds: Dataset, path: str | Path) -> None:
    k = ds.k
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header(k))
        for row, label, d in zip(ds.X, ds.y, ds.distance_m):
            w.writerow([repr(float(d))] + [repr(float(v)) for v in row[:k]] + [int(v) for v in row[k:]] + [int(label)])


def read_dataset_csv(path: str | Path) -> Dataset:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        head = next(r)
        k = (len(head) - 2) // 2
        if head != header(k):
            raise ValueError(f"{path}: unexpected header")
        rows = [list(map(float, line)) for line in r]
    if not rows:
        raise ValueError(f"{path}: no samples")
    arr = np.asarray(rows, dtype=float)
    return Dataset(arr[:, 1 : 1 + 2 * k], arr[:, -1].astype(np.int8), arr[:, 0], k)
