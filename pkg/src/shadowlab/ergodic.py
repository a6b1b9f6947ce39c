"""Birkhoff averages, the averaged tracking gap, and return-time detection."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import InvalidInput, UnsupportedOperation
from .methods import Constant, Method
from .observables import LipFunction, lip_dictionary
from .shadowing import SearchConfig, best_shadow, hyperbolic_trace, _traceable
from .space import as_points, dist, normalize
from .systems import MapSystem
from .trajectory import Trajectory


def birkhoff_avg(phi: LipFunction, traj: Trajectory, n: int, start: int | None = None) -> float:
    """Mean of ``phi`` over the ``n`` trajectory points from index ``start`` (default: first index)."""
    if n < 1:
        raise InvalidInput("Birkhoff average needs n >= 1")
    a = traj.n_from if start is None else start
    return float(np.mean(phi(traj.segment(a, a + n - 1))))


@dataclass(frozen=True)
class EISReport:
    """Tail maxima of running averages ``(1/n) sum_{k=1}^n (phi(x_k) - phi(y_k))``.

    ``per_function_gap`` is the signed version; ``per_function_abs`` uses the
    absolute value of each running average and is symmetric in ``x``/``y``.
    """

    per_function_gap: dict
    per_function_abs: dict
    sup_gap: float
    abs_sup_gap: float
    horizon: int
    tail_window: int

    def to_dict(self) -> dict:
        return {
            "sup_gap": self.sup_gap,
            "abs_sup_gap": self.abs_sup_gap,
            "horizon": self.horizon,
            "tail_window": self.tail_window,
            "per_function_gap": dict(self.per_function_gap),
        }


def eis_gap(
    x_traj: Trajectory,
    y_traj: Trajectory,
    functions: Sequence[LipFunction],
    horizon: int,
    tail_window: int | None = None,
) -> EISReport:
    if x_traj.space != y_traj.space:
        raise InvalidInput("trajectories live on different spaces")
    if horizon < 1:
        raise InvalidInput("horizon must be at least 1")
    tail = max(1, horizon // 5) if tail_window is None else tail_window
    if not 0 <= tail <= horizon:
        raise InvalidInput("tail_window must lie in [0, horizon]")
    if not (x_traj.covers(0, horizon) and y_traj.covers(0, horizon)):
        raise InvalidInput(f"both trajectories must cover [0, {horizon}]")
    X = x_traj.segment(1, horizon)
    Y = y_traj.segment(1, horizon)
    n = np.arange(1, horizon + 1)
    lo = max(horizon - tail, 1) - 1
    signed, absolute = {}, {}
    for phi in functions:
        running = np.cumsum(phi(X) - phi(Y)) / n
        tail_vals = running[lo:]
        signed[phi.label] = float(np.max(tail_vals))
        absolute[phi.label] = float(np.max(np.abs(tail_vals)))
    sup = max(signed.values(), default=0.0)
    abs_sup = max(absolute.values(), default=0.0)
    return EISReport(signed, absolute, sup, abs_sup, horizon, tail)


@dataclass(frozen=True)
class EISCheck:
    epsilon: float
    sample_points: np.ndarray
    passed: tuple[bool, ...]
    gaps: tuple[float, ...]
    reports: tuple[EISReport, ...]
    sup_distances: tuple[float, ...]
    sources: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "samples": [
                {"point": [float(c) for c in p], "passed": ok, "gap": g, "sup_distance": s, "source": src}
                for p, ok, g, s, src in zip(self.sample_points, self.passed, self.gaps, self.sup_distances, self.sources)
            ],
        }


def eis_check(
    f: MapSystem,
    m: Method,
    samples,
    epsilon: float,
    functions: Sequence[LipFunction] | None = None,
    horizon: int = 200,
    tail_window: int | None = None,
    search: SearchConfig | None = None,
    d: float | None = None,
) -> EISCheck:
    """Per sample, the smallest averaged gap over candidate method trajectories.

    Candidates are the best trajectory found by :func:`best_shadow` and, for
    hyperbolic toral maps, the tracer output. A pass is a finite-horizon
    certificate (the candidate exists); a failure only says no candidate
    worked.
    """
    if epsilon <= 0:
        raise InvalidInput("epsilon must be positive")
    if m.base != f:
        raise InvalidInput("method is not built around this map")
    if d is not None and m.d_bound > d + 1e-12:
        raise InvalidInput(f"method d_bound {m.d_bound} exceeds d = {d}")
    funcs = lip_dictionary(f.space) if functions is None else list(functions)
    search = SearchConfig(horizon=horizon) if search is None else search
    if search.horizon != horizon:
        raise InvalidInput("search horizon must equal the EIS horizon")
    pts = np.atleast_2d(as_points(f.space, samples))
    passed, gaps, reports, sups, sources = [], [], [], [], []
    for x in pts:
        x_traj = f.orbit(x, 0, horizon)
        shadow = best_shadow(x_traj, m, search)
        cands = []
        if shadow.trajectory is not None and not shadow.trajectory.truncated:
            cands.append((shadow.source, shadow.trajectory))
        if _traceable(m) and shadow.source != "tracer":
            cands.append(("tracer", hyperbolic_trace(f, m, x_traj, (0, horizon))))
        best = None
        for src, y in cands:
            rep = eis_gap(x_traj, y, funcs, horizon, tail_window)
            if best is None or rep.sup_gap < best[0].sup_gap:
                best = (rep, src, y.sup_distance(x_traj, 0, horizon))
        if best is None:
            passed.append(False)
            gaps.append(float("inf"))
            reports.append(None)
            sups.append(float("inf"))
            sources.append("none")
            continue
        rep, src, sup = best
        passed.append(rep.sup_gap <= epsilon)
        gaps.append(rep.sup_gap)
        reports.append(rep)
        sups.append(sup)
        sources.append(src)
    return EISCheck(epsilon, pts, tuple(passed), tuple(gaps), tuple(reports), tuple(sups), tuple(sources))


@dataclass(frozen=True)
class ReturnWitness:
    point: tuple
    time: int
    distance: float

    def to_dict(self) -> dict:
        return {"point": [float(c) for c in self.point], "time": self.time, "distance": float(self.distance)}


def _ball_candidates(space, center: np.ndarray, radius: float, per_axis: int) -> np.ndarray:
    offsets = np.linspace(-radius, radius, per_axis)
    mesh = np.meshgrid(*([offsets] * space.dim), indexing="ij")
    off = np.stack([a.ravel() for a in mesh], axis=-1)
    off = off[np.linalg.norm(off, axis=1) <= radius + 1e-15]
    pts, clamped = normalize(space, center[None, :] + off)
    if np.ndim(clamped):
        pts = pts[~clamped]
    return np.concatenate([center[None, :], pts])


def _exact_dist(space, p, q) -> Fraction:
    # squared distance compared exactly; only the zero/nonzero decision and
    # ordering matter for witnesses, the float is for reporting
    total = Fraction(0)
    for a, b in zip(p, q):
        diff = abs(a - b)
        if space.periodic:
            diff = min(diff, 1 - diff)
        total += diff * diff
    return total


def poisson_return(
    m: Method,
    center,
    radius: float,
    horizon: int,
    return_tol: float,
    per_axis: int = 9,
    exact: bool = False,
) -> ReturnWitness | None:
    """A point ``y`` within ``radius`` of ``center`` and the earliest ``n <= horizon`` with ``dist(g^n y, y) <= return_tol``.

    Candidates are ``center`` and a lattice in the ball. Among candidates the
    earliest return wins, then the smaller return distance, then the
    lexicographically smaller point. ``exact=True`` iterates in rational
    arithmetic from the rational ``center`` alone.
    """
    if not isinstance(m, Constant):
        raise UnsupportedOperation("return detection needs a single map (a constant method)")
    if horizon < 1 or radius < 0 or return_tol < 0:
        raise InvalidInput("horizon must be positive; radius and return_tol nonnegative")
    g = m.map
    space = g.space
    if exact:
        coords = center if isinstance(center, (tuple, list)) else np.atleast_1d(center)
        y0 = tuple(Fraction(c) for c in coords)
        tol2 = Fraction(return_tol) ** 2
        y = y0
        for n in range(1, horizon + 1):
            y = g.eval_exact(y)
            d2 = _exact_dist(space, y, y0)
            if d2 <= tol2:
                return ReturnWitness(y0, n, float(d2) ** 0.5)
        return None

    c = normalize(space, as_points(space, center).reshape(space.dim))[0]
    Y0 = _ball_candidates(space, c, radius, per_axis)
    Y = Y0.copy()
    for n in range(1, horizon + 1):
        Y, out = g.apply(Y)
        d = dist(space, Y, Y0)
        hit = (d <= return_tol) & ~np.asarray(out)
        if hit.any():
            idx = np.flatnonzero(hit)
            keys = tuple(Y0[idx, j] for j in range(space.dim - 1, -1, -1)) + (d[idx],)
            i = idx[np.lexsort(keys)[0]]
            return ReturnWitness(tuple(float(v) for v in Y0[i]), n, float(d[i]))
    return None


def closest_return(g: MapSystem, y, horizon: int) -> tuple[int, float]:
    """``(n, dist(g^n y, y))`` minimising the distance over ``1 <= n <= horizon`` (earliest on ties)."""
    y0 = normalize(g.space, as_points(g.space, y).reshape(g.space.dim))[0]
    traj = g.orbit(y0, 0, horizon)
    d = dist(g.space, traj.segment(1, traj.n_to), y0)
    n = int(np.argmin(d))
    return n + 1, float(d[n])
