import io

import numpy as np
import pytest

from stkde.domain import EventStore, StudyRegion


@pytest.fixture
def unit_region():
    return StudyRegion(0.0, 1.0, 0.0, 1.0, rows=1, cols=1)


@pytest.fixture
def quad_region():
    return StudyRegion(0.0, 1.0, 0.0, 1.0, rows=2, cols=2)


def make_store(rng, n_events, n_periods, box=(0.0, 10.0, 0.0, 10.0)):
    """Uniformly scattered events over random periods, for plumbing tests."""
    x = rng.uniform(box[0], box[1], n_events)
    y = rng.uniform(box[2], box[3], n_events)
    t = rng.integers(0, n_periods, n_events)
    return EventStore(x, y, t)
