import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shadowlab.errors import InvalidInput, OrbitExit, UnsupportedOperation
from shadowlab.space import dist
from shadowlab.systems import (
    CATALOG,
    ChartLinear,
    DegenerateCircleLine,
    Doubling,
    Rotation,
    ToralAutomorphism,
    make_map,
    preserves_axis,
)

unit = st.floats(0.0, 1.0, allow_nan=False, exclude_max=True)


def catalog_maps():
    return [Rotation(), Doubling(), ToralAutomorphism(), DegenerateCircleLine(), ChartLinear()]


def test_catalog_descriptors_roundtrip():
    for f in catalog_maps():
        assert make_map(f.descriptor()) == f
    assert set(CATALOG) == {m.name for m in catalog_maps()}


def test_unknown_map():
    with pytest.raises(InvalidInput):
        make_map({"map": "tent"})
    with pytest.raises(InvalidInput):
        ToralAutomorphism(((2, 0), (0, 1)))


def test_cat_map_hyperbolicity_constant():
    hd = ToralAutomorphism().hyperbolic_data
    lu = (3 + math.sqrt(5)) / 2
    ls = 1 / lu
    assert hd.unstable_eigenvalue == pytest.approx(lu)
    assert hd.stable_eigenvalue == pytest.approx(ls)
    assert hd.constant == pytest.approx(1 / (1 - ls) + 1 / (lu - 1))
    assert hd.constant == pytest.approx(math.sqrt(5))


def test_cat_map_periodic_orbits_are_exact():
    f = ToralAutomorphism()
    assert [tuple(o) for o in f.periodic_orbits(1)] == [((Fraction(0), Fraction(0)),)]
    two = f.periodic_orbits(2)
    # |det(A^2 - I)| = 5 points of period dividing 2, minus the fixed point
    assert sum(len(o) for o in two) == 4
    for orbit in two + f.periodic_orbits(3):
        p = orbit[0]
        q = p
        for _ in range(len(orbit)):
            q = f.eval_exact(q)
        assert q == p


def test_doubling_one_third_exact():
    f = Doubling()
    assert f.eval_exact((Fraction(1, 3),)) == (Fraction(2, 3),)
    assert f.eval_exact((Fraction(2, 3),)) == (Fraction(1, 3),)


def test_doubling_has_no_inverse():
    with pytest.raises(UnsupportedOperation):
        Doubling().orbit([0.1], -1, 0)


def test_chart_orbit_truncates_on_exit():
    f = ChartLinear(A=0.5, a=0.25)
    # backward images 0.1, 0.2, then 0.4 leaves [-0.25, 0.25]
    traj = f.orbit([0.0, 0.05], -5, 0)
    assert traj.truncated and traj.n_from == -2 and traj.exit_index == -3


@pytest.mark.parametrize("f", [Rotation(), ToralAutomorphism(), DegenerateCircleLine()])
def test_inverse_roundtrip(f, rng):
    P = rng.random((50, f.space.dim))
    back = f.apply_inverse(f.apply(P)[0])[0]
    assert np.max(dist(f.space, back, P)) < 1e-12


def test_fixed_points_are_fixed():
    for f in catalog_maps():
        for p in f.fixed_points():
            assert dist(f.space, f.eval(p), p) < 1e-12


def test_axis_preservation():
    assert preserves_axis(DegenerateCircleLine(), 0)
    assert not preserves_axis(DegenerateCircleLine(), 1)
    assert not preserves_axis(ToralAutomorphism(), 0)


@given(unit, unit)
def test_lipschitz_bounds_hold(a, b):
    for f in (ToralAutomorphism(), DegenerateCircleLine()):
        p, q = np.array([a, b]), np.array([b, a])
        assert dist(f.space, f.eval(p), f.eval(q)) <= f.lipschitz_bound() * dist(f.space, p, q) + 1e-12


def test_orbit_window_must_contain_zero():
    with pytest.raises(InvalidInput):
        Rotation().orbit([0.1], 1, 5)
