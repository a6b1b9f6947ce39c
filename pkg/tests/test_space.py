import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shadowlab.errors import InvalidInput, ResourceLimit
from shadowlab.space import Space, chart, circle, dist, grid, landmarks, normalize, pairwise_dist, torus, wrap_diff

unit = st.floats(0.0, 1.0, allow_nan=False, exclude_max=True)
pt2 = st.tuples(unit, unit)


def test_diameters():
    assert circle().diameter == 0.5
    assert torus(2).diameter == pytest.approx(math.sqrt(2) / 2)
    assert chart([(0, 3), (0, 4)]).diameter == 5.0


def test_circle_distance_wraps():
    assert dist(circle(), 0.9, 0.1) == pytest.approx(0.2)
    assert dist(circle(), 0.0, 0.5) == 0.5
    assert dist(torus(2), [0.95, 0.0], [0.05, 0.0]) == pytest.approx(0.1)


def test_chart_is_euclidean():
    assert dist(chart([(0, 1), (0, 1)]), [0, 0], [0.3, 0.4]) == pytest.approx(0.5)


def test_bad_spaces():
    with pytest.raises(InvalidInput):
        Space("sphere")
    with pytest.raises(InvalidInput):
        chart([(1, 1)])
    with pytest.raises(InvalidInput):
        Space("circle", 2)


def test_roundtrip_descriptor():
    for sp in (circle(), torus(3), chart([(-1, 1), (0, 2)])):
        assert Space.from_dict(sp.to_dict()) == sp


def test_normalize_never_returns_one():
    out, clamped = normalize(circle(), [-1e-18])
    assert out[0] == 0.0 and not clamped
    out, clamped = normalize(chart([(0, 1)]), [1.5])
    assert out[0] == 1.0 and clamped


def test_wrap_diff_range():
    d = wrap_diff(torus(2), [[0.9, 0.1]], [[0.1, 0.9]])
    assert np.allclose(d, [[-0.2, 0.2]])


def test_grid_and_cap():
    g = grid(torus(2), 4)
    assert g.shape == (16, 2) and g.max() == 0.75
    assert np.array_equal(grid(chart([(0, 1)]), 3)[:, 0], [0, 0.5, 1])
    with pytest.raises(ResourceLimit):
        grid(torus(2), 10_000)


def test_landmarks_count():
    assert len(landmarks(torus(2), 32)) == 32
    assert len(landmarks(circle(), 32)) == 32


def test_pairwise_matches_dist(rng):
    P, Q = rng.random((5, 2)), rng.random((7, 2))
    C = pairwise_dist(torus(2), P, Q)
    assert np.allclose(C, [[dist(torus(2), p, q) for q in Q] for p in P], atol=0)


@given(pt2, pt2, pt2)
def test_torus_metric_axioms(p, q, r):
    T = torus(2)
    assert dist(T, p, p) == 0
    assert dist(T, p, q) == dist(T, q, p)
    assert dist(T, p, r) <= dist(T, p, q) + dist(T, q, r) + 1e-12
    assert dist(T, p, q) <= T.diameter + 1e-15


@given(unit, unit)
def test_circle_distance_is_arc_length(a, b):
    d = dist(circle(), a, b)
    assert d == pytest.approx(min(abs(a - b), 1 - abs(a - b)), abs=1e-15)
