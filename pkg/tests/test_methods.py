import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shadowlab.errors import CertificationError, InvalidInput, UnsupportedOperation
from shadowlab.methods import (
    Constant,
    Drift,
    OneShot,
    RandomBounded,
    compose,
    default_pool,
    hash_uniform,
    method_from_dict,
    method_trajectory,
    verify_d_bound,
)
from shadowlab.space import dist
from shadowlab.systems import ChartLinear, DegenerateCircleLine, Doubling, Rotation, ToralAutomorphism

unit = st.floats(0.0, 1.0, allow_nan=False, exclude_max=True)


def test_hash_uniform_is_stateless():
    a = hash_uniform(7, np.arange(5), 3)
    b = hash_uniform(7, np.arange(5), 3)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, hash_uniform(8, np.arange(5), 3))
    assert np.all((a >= 0) & (a < 1))


@pytest.mark.parametrize(
    "m",
    [
        Constant(ToralAutomorphism()),
        Drift(ToralAutomorphism(), 1e-3, 1),
        OneShot(DegenerateCircleLine(), 2, (0.0, 1e-3)),
        RandomBounded(ToralAutomorphism(), 1e-3, 5),
        RandomBounded(Rotation(), 0.01, 1),
        RandomBounded(ChartLinear(), 0.01, 2),
    ],
)
def test_declared_bounds_verify(m):
    assert verify_d_bound(m) <= m.d_bound + 1e-9


def test_lying_bound_is_caught():
    liar = Constant(Rotation(0.3), Rotation(0.31), declared_bound=0.001)
    with pytest.raises(CertificationError) as err:
        verify_d_bound(liar)
    assert err.value.witness is not None


def test_descriptor_roundtrip():
    f = ToralAutomorphism()
    for m in default_pool(f, 1e-3):
        assert method_from_dict(f, m.descriptor()) == m
    g = Constant(Rotation(0.5), Rotation(0.5001), 1e-4)
    assert method_from_dict(Rotation(0.5), g.descriptor()) == g


def test_unknown_method_kind():
    with pytest.raises(InvalidInput):
        method_from_dict(Rotation(), {"kind": "wobble"})


def test_default_pool_shape():
    pool = default_pool(ToralAutomorphism(), 1e-3)
    kinds = [m.kind for m in pool]
    assert kinds == ["constant", "drift", "drift", "drift", "drift", "oneshot", "random", "random", "random"]
    assert all(m.d_bound <= 1e-3 + 1e-15 for m in pool)


def test_drift_closed_form():
    f = DegenerateCircleLine()
    traj = method_trajectory(Drift(f, 1e-3, 0), [0.2, 0.0], (0, 100))
    assert np.allclose(traj.points[:, 0], 0.2 + 1e-3 * np.arange(101), atol=1e-12)
    assert np.all(traj.points[:, 1] == 0.0)


def test_oneshot_kicks_once():
    f = Rotation(0.25)
    traj = method_trajectory(OneShot(f, 1, (0.01,)), [0.0], (0, 3))
    assert np.allclose(traj.points[:, 0], [0.0, 0.25, 0.51, 0.76])


def test_compose_matches_trajectory():
    m = RandomBounded(ToralAutomorphism(), 1e-3, 3)
    traj = method_trajectory(m, [0.3, 0.4], (0, 10))
    assert np.array_equal(compose(m, 10, [0.3, 0.4]), traj.points[10])
    assert np.array_equal(compose(m, 0, [0.3, 0.4]), [0.3, 0.4])


def test_two_sided_only_for_invertible_steps():
    traj = method_trajectory(Constant(Rotation(0.25)), [0.0], (-2, 2))
    assert np.allclose(traj.points[:, 0], [0.5, 0.75, 0.0, 0.25, 0.5])
    with pytest.raises(UnsupportedOperation):
        method_trajectory(Drift(Rotation(0.25), 0.01), [0.0], (-1, 1))
    with pytest.raises(UnsupportedOperation):
        method_trajectory(Constant(Doubling()), [0.1], (-1, 1))


def test_random_field_scalar_and_row_indices_agree(rng):
    m = RandomBounded(ToralAutomorphism(), 1e-3, 11)
    P = rng.random((20, 2))
    by_row = m.field(np.full(20, 4), P)
    assert np.array_equal(by_row, m.field(4, P))


@given(unit, unit, st.integers(-1000, 1000))
def test_random_field_norm_at_most_one(a, b, k):
    m = RandomBounded(ToralAutomorphism(), 1e-3, 2)
    eta = m.field(k, [a, b])
    assert np.linalg.norm(eta) <= 1.0 + 1e-12


@given(unit, unit, st.integers(0, 50))
def test_steps_stay_within_d_of_base(a, b, k):
    f = ToralAutomorphism()
    for m in default_pool(f, 1e-3):
        assert dist(f.space, m.apply(k, [a, b])[0], f.eval([a, b])) <= m.d_bound + 1e-12
