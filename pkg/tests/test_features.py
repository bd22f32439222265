import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lqsdwsn.channel import delivery_probability
from lqsdwsn.lqpredict import Dataset, FeatureWindow, extract_window, generate_dataset, read_dataset_csv, stratified_split, write_dataset_csv
from lqsdwsn.lqpredict.features import simulate_periods, sliding_windows, uniform_distances

FLOOR = -66.0


def test_window_oldest_first():
    hist = [(-50.0 - i, 1) for i in range(12)]
    w = extract_window(hist, 12, 10, FLOOR)
    assert w.rssi[0] == -52.0 and w.rssi[-1] == -61.0
    assert w.k == 10


def test_lost_entries_get_floor():
    hist = [(-40.0, 1), (-10.0, 0), (-45.0, 1)]
    assert extract_window(hist, 3, 3, FLOOR).rssi == (-40.0, FLOOR, -45.0)


def test_short_history_rejected():
    with pytest.raises(ValueError):
        extract_window([(-50.0, 1)] * 3, 3, 10, FLOOR)


def test_window_validation():
    with pytest.raises(ValueError):
        FeatureWindow((-50.0, -51.0), (1,))
    with pytest.raises(ValueError):
        FeatureWindow((-50.0,), (2,))


def test_sliding_windows_label_is_next_period():
    recv = np.array([[1, 0, 1, 1, 0]], dtype=np.int8)
    rssi = np.array([[-50.0, FLOOR, -52.0, -53.0, FLOOR]])
    X, y = sliding_windows(recv, rssi, 2)
    assert y.tolist() == [1, 1, 0]
    assert X[1].tolist() == [FLOOR, -52.0, 0.0, 1.0]


def test_lost_periods_carry_floor(params):
    recv, rssi = simulate_periods(np.full(50, params.r0_m), 40, params, np.random.default_rng(0))
    assert np.all(rssi[recv == 0] == params.rssi_floor_dbm)
    assert np.all(rssi[recv == 1] > params.rssi_floor_dbm)


def test_distances_in_range(params):
    d = uniform_distances(100_000, params, np.random.default_rng(2))
    assert d.min() > 0 and d.max() <= 2 * params.r0_m


def test_dataset_size_and_label_rate(params):
    ds = generate_dataset(params, 1000, 110, 10, np.random.default_rng(5))
    assert len(ds) == 100_000 and ds.X.shape == (100_000, 20)
    # labels follow the mean delivery over distance ~ U(0, 2 r0), which is 0.5 by symmetry
    assert ds.y.mean() == pytest.approx(0.5, abs=0.03)


def test_label_rate_tracks_channel(params):
    ds = generate_dataset(params, 400, 60, 10, np.random.default_rng(6))
    near = ds.distance_m < 0.3 * params.r0_m
    assert ds.y[near].mean() == pytest.approx(np.mean([delivery_probability(d, params) for d in ds.distance_m[near]]), abs=0.02)


def test_periods_must_exceed_k(params):
    with pytest.raises(ValueError, match="periods_per_link"):
        generate_dataset(params, 10, 10, 10, np.random.default_rng(0))


def test_deterministic(params):
    a = generate_dataset(params, 20, 30, 10, np.random.default_rng(9))
    b = generate_dataset(params, 20, 30, 10, np.random.default_rng(9))
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)


def test_csv_round_trip(tmp_path, params):
    ds = generate_dataset(params, 15, 25, 10, np.random.default_rng(1))
    path = tmp_path / "d.csv"
    write_dataset_csv(ds, path)
    header = path.read_text().splitlines()[0].split(",")
    assert header[0] == "distance_m" and header[1] == "rssi_1" and header[11] == "recv_1" and header[-1] == "label"
    back = read_dataset_csv(path)
    assert back.k == 10
    assert np.array_equal(back.X, ds.X) and np.array_equal(back.y, ds.y) and np.array_equal(back.distance_m, ds.distance_m)


def test_samples_round_trip(params):
    ds = generate_dataset(params, 3, 15, 4, np.random.default_rng(1))
    back = Dataset.from_samples(list(ds.samples()))
    assert np.array_equal(back.X, ds.X) and back.k == 4


@given(st.integers(20, 400), st.floats(0.1, 0.5), st.integers(0, 2**32 - 1))
def test_stratified_split(n, frac, seed):
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < 0.4).astype(np.int8)
    tr, te = stratified_split(y, frac, np.random.default_rng(seed))
    assert len(np.intersect1d(tr, te)) == 0 and len(tr) + len(te) == n
    for label in (0, 1):
        assert abs(np.sum(y[te] == label) - frac * np.sum(y == label)) <= 0.5 + 1e-9
