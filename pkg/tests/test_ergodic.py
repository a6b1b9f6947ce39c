import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shadowlab.errors import InvalidInput, UnsupportedOperation
from shadowlab.ergodic import birkhoff_avg, closest_return, eis_check, eis_gap, poisson_return
from shadowlab.methods import Constant, Drift, RandomBounded, method_trajectory
from shadowlab.observables import LipFunction, lip_dictionary
from shadowlab.shadowing import SearchConfig, hyperbolic_trace
from shadowlab.space import circle, dist, torus
from shadowlab.systems import DegenerateCircleLine, Doubling, Rotation, ToralAutomorphism
from shadowlab.trajectory import Trajectory
from shadowlab.transport import empirical_measure

CAT = ToralAutomorphism()
DEG = DegenerateCircleLine()
GOLDEN = (math.sqrt(5) - 1) / 2


def cf_denominators(alpha, count=20):
    """Convergent denominators q_n of the continued fraction of alpha."""
    qs, q_prev, q = [], 0, 1
    x = alpha
    for _ in range(count):
        a = math.floor(x)
        q_prev, q = q, a * q + q_prev
        qs.append(q)
        frac = x - a
        if frac < 1e-15:
            break
        x = 1 / frac
    return qs


def test_birkhoff_examples():
    p = (0.3, 0.6)
    phi = LipFunction(torus(2), p)
    const = Trajectory(torus(2), 0, np.tile(p, (10, 1)), (0, 9))
    assert birkhoff_avg(phi, const, 10) == 0.0
    quarter = Rotation(0.25).orbit([0.0], 0, 3)
    assert birkhoff_avg(LipFunction(circle(), (0.0,)), quarter, 4) == pytest.approx(0.25)
    with pytest.raises(InvalidInput):
        birkhoff_avg(phi, const, 11)


@given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True), st.integers(1, 200))
def test_birkhoff_equals_empirical_integral(u, v, n):
    traj = CAT.orbit([u, v], 0, n)
    for phi in lip_dictionary(torus(2), 4):
        assert abs(birkhoff_avg(phi, traj, n) - empirical_measure(traj, 0, n).integrate(phi)) <= 1e-12


def test_eis_gap_identical_orbits():
    x = CAT.orbit([0.2, 0.5], 0, 100)
    rep = eis_gap(x, x, lip_dictionary(torus(2)), 100)
    assert rep.sup_gap == 0.0 and rep.tail_window == 20


def test_eis_gap_hyperbolic_tracer_within_ten_d():
    d = 1e-3
    x = CAT.orbit([0.2, 0.5], 0, 200)
    y = hyperbolic_trace(CAT, RandomBounded(CAT, d, 3), x)
    assert eis_gap(x, y, lip_dictionary(torus(2)), 200).sup_gap <= 10 * d


def test_eis_gap_drift_from_fixed_point_closed_form():
    delta, n = 1e-3, 1000
    p = np.array([0.0, 0.0])
    x = DEG.orbit(p, 0, n)
    y = method_trajectory(Drift(DEG, delta, 0), p, (0, n))
    phi = LipFunction(torus(2), (0.5, 0.0))
    rep = eis_gap(x, y, [phi], n, tail_window=0)
    # phi(x_k) - phi(y_k) = 0.5 - (0.5 - ||k delta||) = ||k delta|| (circle norm)
    t = np.mod(np.arange(1, n + 1) * delta, 1.0)
    expected = np.mean(np.minimum(t, 1 - t))
    assert rep.sup_gap == pytest.approx(expected, abs=1e-9)
    assert rep.sup_gap >= 0.1


def test_eis_gap_validation():
    x = CAT.orbit([0.2, 0.5], 0, 10)
    with pytest.raises(InvalidInput):
        eis_gap(x, x, [], 20)
    with pytest.raises(InvalidInput):
        eis_gap(x, x, [], 10, tail_window=11)


@given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True), st.integers(1, 5))
def test_gap_bounded_by_sup_distance_and_abs_symmetric(u, v, seed):
    x = CAT.orbit([u, v], 0, 120)
    y = hyperbolic_trace(CAT, RandomBounded(CAT, 1e-3, seed), x)
    funcs = lip_dictionary(torus(2), 8)
    fwd, back = eis_gap(x, y, funcs, 120), eis_gap(y, x, funcs, 120)
    sup = y.sup_distance(x)
    assert all(abs(g) <= sup + 1e-12 for g in fwd.per_function_gap.values())
    assert fwd.abs_sup_gap == pytest.approx(back.abs_sup_gap, abs=1e-15)


def test_eis_check_examples():
    samples = [[0.1, 0.2], [0.7, 0.4]]
    const = eis_check(CAT, Constant(CAT), samples, 0.05, search=SearchConfig(horizon=200, resolution=8, levels=0))
    assert all(const.passed) and max(const.gaps) == 0.0
    res = eis_check(CAT, RandomBounded(CAT, 1e-3, 1), samples, 0.05, d=1e-3)
    assert all(res.passed)
    big = eis_check(DEG, Drift(DEG, 0.01, 0), [[0.3, 0.0]], DEG.space.diameter, horizon=100)
    assert all(big.passed)
    with pytest.raises(InvalidInput):
        eis_check(CAT, RandomBounded(CAT, 1e-2, 1), samples, 0.05, d=1e-3)


def test_golden_rotation_return_time_matches_continued_fraction():
    tol = 0.01
    # independent oracle: the first n with ||n alpha|| <= tol
    first = next(n for n in range(1, 10_000) if abs(n * GOLDEN - round(n * GOLDEN)) <= tol)
    assert first in cf_denominators(GOLDEN)
    assert first == 55
    for center in ([0.0], [0.37], [0.91]):
        w = poisson_return(Constant(Rotation(GOLDEN)), center, 0.05, 10_000, tol)
        assert w.time == first and w.distance <= tol
        assert dist(circle(), w.point, center) <= 0.05


def test_fixed_point_returns_immediately():
    w = poisson_return(Constant(CAT), [0.0, 0.0], 0.01, 10, 0.0)
    assert w.time == 1 and w.distance == 0.0 and w.point == (0.0, 0.0)


def test_doubling_period_two_exact():
    w = poisson_return(Constant(Doubling()), (Fraction(1, 3),), 0.0, 10, 0.0, exact=True)
    assert w.time == 2 and w.distance == 0.0


def test_no_witness_is_a_result():
    assert poisson_return(Constant(Rotation(GOLDEN)), [0.2], 0.0, 10, 1e-6) is None
    with pytest.raises(UnsupportedOperation):
        poisson_return(Drift(Rotation(GOLDEN), 1e-4), [0.2], 0.0, 10, 0.01)


def test_returns_improve_through_denominators():
    qs = [q for q in cf_denominators(GOLDEN) if 5 <= q <= 3000]
    dists = [closest_return(Rotation(GOLDEN), [0.25], q)[1] for q in qs]
    assert all(b < a for a, b in zip(dists, dists[1:]))
    for q in qs:
        assert closest_return(Rotation(GOLDEN), [0.25], q)[0] == q
