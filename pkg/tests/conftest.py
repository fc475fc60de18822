import os

import numpy as np
import pytest

from app.services.geometry.polygon import ConvexPolygon
from app.services.pipeline.config import RunSettings
from app.services.streams.blobs import blob_stream

FAST_FIT = dict(early_exaggeration_iters=50, optimization_iters=100, partial_iters=30)


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for key in list(os.environ):
        if key.startswith("STSNE_"):
            monkeypatch.delenv(key, raising=False)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def unit_square():
    return ConvexPolygon(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))


@pytest.fixture
def make_settings():
    def _make(**overrides):
        values = dict(FAST_FIT, record_timings=False)
        values.update(overrides)
        return RunSettings(**values)

    return _make


def blob_points(k=3, n=40, dim=5, separation=40.0, seed=0, **kwargs):
    return list(blob_stream(k=k, n_per_cluster=n, separation=separation, dim=dim, seed=seed, **kwargs))
