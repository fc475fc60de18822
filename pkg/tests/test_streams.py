from itertools import islice

import numpy as np
import pytest
from scipy.spatial.distance import cdist

from app.internal.errors import ConfigurationError, StreamParseError
from app.services.streams.blobs import blob_stream
from app.services.streams.files import count_rows, file_stream
from app.services.streams.points import HighDimPoint, PointBatch
from app.services.streams.synthetic import DriftStructureSpec, default_drift_specs, synthetic_drift_stream

IDENTITY = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


def _spec(**kwargs):
    values = dict(mean=(0.0, 0.0, 0.0), covariance=IDENTITY, points_per_structure=3000)
    values.update(kwargs)
    return DriftStructureSpec(**values)


def test_high_dim_point_rejects_non_finite():
    with pytest.raises(ConfigurationError):
        HighDimPoint(id=0, coords=[1.0, float("nan")])


def test_point_batch_rejects_mixed_dimensions():
    with pytest.raises(ConfigurationError):
        PointBatch.from_points([HighDimPoint(0, [1.0, 2.0]), HighDimPoint(1, [1.0])])


def test_stationary_structure_mean():
    specs = [_spec(mean=(1.0, -2.0, 3.0)), _spec(), _spec()]
    points = [p for p in synthetic_drift_stream(specs, seed=4) if p.label == 0]
    sample = np.vstack([p.coords for p in points])
    assert len(points) == 3000
    np.testing.assert_allclose(sample.mean(axis=0), [1.0, -2.0, 3.0], atol=4.0 / np.sqrt(3000))


def test_moving_structure_window_means_increase():
    specs = [_spec(velocity=(1.0, 0.0, 0.0), tick_every=100, points_per_structure=1000), _spec(), _spec()]
    xs = np.array([p.coords[0] for p in synthetic_drift_stream(specs, seed=0) if p.label == 0])
    window_means = xs.reshape(10, 100).mean(axis=1)
    assert np.all(np.diff(window_means) > 0)


def test_round_robin_and_determinism():
    first = list(islice(synthetic_drift_stream(seed=11), 300))
    second = list(islice(synthetic_drift_stream(seed=11), 300))
    assert [p.label for p in first[:6]] == [0, 1, 2, 0, 1, 2]
    assert [p.id for p in first] == list(range(300))
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a.coords, b.coords)


def test_default_preset_trajectories_cross():
    a, b, c = default_drift_specs(total=30000)
    last_tick = a.points_per_structure // a.tick_every
    assert a.mean_at(0)[0] < b.mean_at(0)[0]
    assert a.mean_at(last_tick)[0] > b.mean_at(last_tick)[0]
    assert c.velocity == (0.0, 0.0, 0.0)
    assert c.covariance_at(10)[0, 0] != c.covariance_at(0)[0, 0]


def test_scale_oscillates():
    spec = _spec(scale_rate=1.1, scale_period=2)
    assert [spec.scale_exponent(t) for t in range(6)] == [0, 1, 2, 1, 0, 1]


def test_non_spd_covariance_rejected():
    bad = _spec(covariance=((1.0, 2.0, 0.0), (2.0, 1.0, 0.0), (0.0, 0.0, 1.0)))
    with pytest.raises(ConfigurationError):
        next(synthetic_drift_stream([bad, _spec(), _spec()]))


def test_wrong_structure_count_rejected():
    with pytest.raises(ConfigurationError):
        next(synthetic_drift_stream([_spec(), _spec()]))


def test_single_blob():
    points = list(blob_stream(k=1, n_per_cluster=50, separation=5.0, dim=3))
    assert len(points) == 50
    assert {p.label for p in points} == {0}


@pytest.mark.parametrize("k,dim", [(4, 10), (6, 2)])
def test_blob_centres_are_separated(k, dim):
    points = list(blob_stream(k=k, n_per_cluster=200, separation=20.0, dim=dim, seed=2))
    X = np.vstack([p.coords for p in points])
    labels = np.array([p.label for p in points])
    centres = np.array([X[labels == c].mean(axis=0) for c in range(k)])
    d = np.linalg.norm(centres[:, None] - centres[None, :], axis=2)
    np.fill_diagonal(d, np.inf)
    assert d.min() > 20.0 - 1.0


def test_ten_blobs_are_nearest_neighbour_separable():
    points = list(blob_stream(k=10, n_per_cluster=50, separation=50.0, dim=50, seed=0))
    X = np.vstack([p.coords for p in points])
    labels = np.array([p.label for p in points])
    d = cdist(X, X)
    np.fill_diagonal(d, np.inf)
    nearest = np.argsort(d, axis=1)[:, :10]
    votes = np.array([np.bincount(labels[row], minlength=10).argmax() for row in nearest])
    assert np.mean(votes == labels) > 0.99


def test_starved_blob_stops_emitting():
    points = list(blob_stream(k=3, n_per_cluster=100, separation=10.0, dim=4, starve_cluster=1, starve_after=120))
    late = [p.label for p in points[120:]]
    assert 1 not in late
    assert len(points) < 300


def test_blob_contract_errors():
    with pytest.raises(ConfigurationError):
        next(blob_stream(k=0, n_per_cluster=5, separation=1.0, dim=2))
    with pytest.raises(ConfigurationError):
        next(blob_stream(k=2, n_per_cluster=5, separation=0.0, dim=2))


def test_csv_in_file_order(tmp_path):
    path = tmp_path / "points.csv"
    path.write_text("1.0,2.0\n3.5,-1\n0,0\n")
    points = list(file_stream(path))
    assert [p.id for p in points] == [0, 1, 2]
    np.testing.assert_array_equal(points[1].coords, [3.5, -1.0])
    assert count_rows(path) == 3


def test_csv_header_and_labels(tmp_path):
    path = tmp_path / "labelled.csv"
    path.write_text("x,y,label\n1,2,0\n3,4,1\n")
    points = list(file_stream(path, labels=True))
    assert [p.label for p in points] == [0, 1]
    assert points[0].dim == 2
    assert count_rows(path) == 2


def test_non_numeric_field_names_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n3,abc\n")
    with pytest.raises(StreamParseError) as info:
        list(file_stream(path))
    assert info.value.line_number == 2
    assert "line 2" in str(info.value)


def test_ragged_row_rejected(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("1,2\n3,4\n5,6,7\n")
    with pytest.raises(StreamParseError) as info:
        list(file_stream(path))
    assert info.value.line_number == 3


def test_missing_file(tmp_path):
    with pytest.raises(ConfigurationError):
        list(file_stream(tmp_path / "nope.csv"))
