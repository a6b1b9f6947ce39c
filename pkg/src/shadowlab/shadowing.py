"""Searching for method trajectories that track an exact orbit.

``best_shadow`` gives an upper bound on ``min_y sup_k dist(x_k, y_k)`` by a
pruned multi-resolution search over initial points; ``hyperbolic_trace``
builds a tracking trajectory directly for hyperbolic toral automorphisms;
``drift_lower_bound`` gives a matching lower bound for drift methods on maps
that preserve the drift coordinate. Together they turn the finite-horizon
questions "is x in Phi(eps, d, f)?" and "is x in Psi(f)?" into certified
violations or documented evidence.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import ConvergenceError, InvalidInput, ShadowLabError, UnsupportedOperation
from .methods import Drift, Method, method_trajectory
from .space import as_points, dist, grid, normalize, wrap_diff
from .systems import MapSystem, ToralAutomorphism, preserves_axis
from .trajectory import Trajectory

TRACE_RESIDUAL = 1e-10


def _num(x: float):
    x = float(x)
    return x if math.isfinite(x) else str(x)


@dataclass(frozen=True)
class SearchConfig:
    horizon: int = 200
    resolution: int = 64
    levels: int = 3
    shrink: float = 8.0
    use_tracer: bool = True
    # stop as soon as a trajectory within this sup-distance is known
    target: float | None = None
    # cap on point-steps evaluated by one search
    max_evaluations: int = 2_000_000_000

    def __post_init__(self):
        if self.horizon < 0:
            raise InvalidInput("horizon must be nonnegative")
        if self.resolution < 1 or self.levels < 0:
            raise InvalidInput("resolution must be positive and levels nonnegative")
        if self.shrink <= 1:
            raise InvalidInput("shrink factor must exceed 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SearchConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInput(f"unknown search keys {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class ShadowReport:
    sup_distance: float
    best_initial: np.ndarray
    horizon: tuple[int, int]
    refinement_levels: int
    method_descriptor: str
    source: str = "grid"
    level_history: tuple[float, ...] = ()
    truncated: bool = False
    early_stopped: bool = False
    lower_bound: float | None = None
    trajectory: Trajectory | None = field(default=None, repr=False, compare=False)

    @property
    def certified_violation_of(self) -> Callable[[float], bool]:
        return lambda eps: self.lower_bound is not None and self.lower_bound > eps

    def to_dict(self) -> dict:
        return {
            "sup_distance": _num(self.sup_distance),
            "best_initial": [float(c) for c in self.best_initial],
            "horizon": list(self.horizon),
            "refinement_levels": self.refinement_levels,
            "method": self.method_descriptor,
            "source": self.source,
            "level_history": [_num(v) for v in self.level_history],
            "truncated": self.truncated,
            "early_stopped": self.early_stopped,
            "lower_bound": None if self.lower_bound is None else _num(self.lower_bound),
        }


class _Budget:
    def __init__(self, limit: int):
        self.limit = limit
        self.used = 0
        self.exhausted = False

    def take(self, n: int) -> bool:
        if self.used + n > self.limit:
            self.exhausted = True
            return False
        self.used += n
        return True


def _sweep(m: Method, Y0: np.ndarray, X: np.ndarray, bound: float, budget: _Budget) -> np.ndarray:
    """Sup-distance of each candidate's trajectory to ``X``.

    Candidates are dropped once their running sup exceeds ``bound`` (they
    cannot win) and come back as ``inf``; chart exits are also ``inf``.
    """
    space = m.space
    sup = np.full(len(Y0), np.inf)
    run = dist(space, Y0, X[0])
    idx = np.flatnonzero(run <= bound)
    Y = Y0[idx]
    run = run[idx]
    for k in range(len(X) - 1):
        if len(idx) == 0:
            break
        if not budget.take(len(idx)):
            return sup
        Y, out = m.apply(k, Y)
        run = np.maximum(run, dist(space, Y, X[k + 1]))
        keep = (run <= bound) & ~np.asarray(out)
        idx, Y, run = idx[keep], Y[keep], run[keep]
    sup[idx] = run
    return sup


def _pick(Y0: np.ndarray, sup: np.ndarray) -> int:
    """Index of the minimal sup, ties to the lexicographically smallest point."""
    keys = tuple(Y0[:, j] for j in range(Y0.shape[1] - 1, -1, -1)) + (sup,)
    return int(np.lexsort(keys)[0])


def _better(cand_sup, cand_y, inc_sup, inc_y) -> bool:
    if cand_sup != inc_sup:
        return cand_sup < inc_sup
    return tuple(cand_y) < tuple(inc_y)


def _local_grid(space, center: np.ndarray, spacing: np.ndarray, resolution: int) -> np.ndarray:
    offsets = (np.arange(resolution) - (resolution - 1) / 2.0)[:, None] * spacing[None, :]
    axes = [center[j] + offsets[:, j] for j in range(space.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([a.ravel() for a in mesh], axis=-1)
    pts, clamped = normalize(space, pts)
    return pts[~np.asarray(clamped)] if np.ndim(clamped) else pts


def best_shadow(
    x_traj: Trajectory,
    m: Method,
    search: SearchConfig = SearchConfig(),
    seeds: Sequence | None = None,
) -> ShadowReport:
    """Smallest sup-distance found between ``x_traj`` and a trajectory of ``m``.

    The search window is ``[0, search.horizon]``. Candidates are ``x_0``, any
    extra ``seeds``, the hyperbolic tracer output when available, a full grid,
    then ``search.levels`` local grids around the incumbent. The result is an
    upper bound on the true minimum and never increases with more levels.
    """
    if x_traj.space != m.space:
        raise InvalidInput("trajectory and method live on different spaces")
    H = search.horizon
    if not x_traj.covers(0, H):
        raise InvalidInput(f"trajectory does not cover the horizon [0, {H}]")
    space = m.space
    X = x_traj.segment(0, H)
    budget = _Budget(search.max_evaluations)
    target = -np.inf if search.target is None else search.target

    start = [X[0]] + ([] if seeds is None else list(np.atleast_2d(as_points(space, seeds))))
    Y0 = normalize(space, np.array(start))[0]
    sup = _sweep(m, Y0, X, np.inf, budget)
    i = _pick(Y0, sup)
    inc_sup, inc_y, source, traced = float(sup[i]), Y0[i].copy(), "seed", None

    if search.use_tracer and _traceable(m):
        try:
            traced = hyperbolic_trace(m.base, m, x_traj, (0, H))
        except ConvergenceError:
            traced = None
        if traced is not None:
            t_sup = traced.sup_distance(x_traj, 0, H)
            if t_sup < inc_sup:
                inc_sup, inc_y, source = t_sup, traced.points[0].copy(), "tracer"

    history = []
    levels_done = 0
    early = inc_sup <= target
    if not early:
        spacing = space.extent / search.resolution
        for level in range(search.levels + 1):
            if level == 0:
                cands = grid(space, search.resolution)
            else:
                spacing = spacing / search.shrink
                cands = _local_grid(space, inc_y, spacing, search.resolution)
            sup = _sweep(m, cands, X, inc_sup, budget)
            if np.isfinite(sup).any():
                j = _pick(cands, sup)
                if _better(float(sup[j]), cands[j], inc_sup, inc_y):
                    inc_sup, inc_y, source = float(sup[j]), cands[j].copy(), "grid"
            history.append(inc_sup)
            levels_done = level
            if budget.exhausted or inc_sup <= target:
                early = inc_sup <= target
                break

    if source == "tracer":
        traj = traced
    else:
        traj = method_trajectory(m, inc_y, (0, H))
    if traj.truncated:
        recomputed = np.inf
    else:
        recomputed = traj.sup_distance(x_traj, 0, H)
    if np.isfinite(inc_sup) and abs(recomputed - inc_sup) > 1e-12:
        raise ShadowLabError(f"sup-distance {inc_sup} does not reproduce (got {recomputed})")

    return ShadowReport(
        sup_distance=float(recomputed),
        best_initial=inc_y,
        horizon=(0, H),
        refinement_levels=levels_done,
        method_descriptor=m.label(),
        source=source,
        level_history=tuple(history),
        truncated=budget.exhausted,
        early_stopped=bool(early),
        lower_bound=drift_lower_bound(x_traj, m, (0, H)),
        trajectory=traj,
    )


def drift_lower_bound(x_traj: Trajectory, m: Method, window: tuple[int, int]) -> float | None:
    """Lower bound on the sup-distance of *every* trajectory of a drift method.

    Applies when the base map leaves the drift coordinate unchanged, so every
    trajectory has ``y_k[axis] = y_0[axis] + k delta``. Projecting onto that
    axis is 1-Lipschitz, and the best ``y_0[axis]`` is the centre of the
    smallest arc (or interval) containing all ``x_k[axis] - k delta``.
    Returns ``None`` when the argument does not apply.
    """
    if not isinstance(m, Drift) or not preserves_axis(m.base, m.axis):
        return None
    a, b = window
    ks = np.arange(a, b + 1)
    z = x_traj.segment(a, b)[:, m.axis] - ks * m.delta
    if not m.space.periodic:
        return float((z.max() - z.min()) / 2.0)
    z = np.sort(np.mod(z, 1.0))
    gaps = np.diff(np.concatenate([z, [z[0] + 1.0]]))
    return float((1.0 - gaps.max()) / 2.0)


def _traceable(m: Method) -> bool:
    return isinstance(m.base, ToralAutomorphism) and m.base.hyperbolic_data is not None


def tracer_constant(f: MapSystem) -> float:
    if f.hyperbolic_data is None:
        raise UnsupportedOperation(f"{f.label()} carries no hyperbolic splitting")
    return f.hyperbolic_data.constant


def _bounded_solution(hd, r: np.ndarray) -> np.ndarray:
    """Bounded ``w`` with ``w[k+1] = A w[k] + r[k]``: stable part summed forward, unstable backward."""
    n = len(r)
    a = r @ hd.stable_row
    b = r @ hd.unstable_row
    ls, lu = hd.stable_eigenvalue, hd.unstable_eigenvalue
    zs = np.zeros(n + 1)
    zu = np.zeros(n + 1)
    for k in range(n):
        zs[k + 1] = ls * zs[k] + a[k]
    for k in range(n - 1, -1, -1):
        zu[k] = (zu[k + 1] - b[k]) / lu
    return zs[:, None] * hd.stable_vector[None, :] + zu[:, None] * hd.unstable_vector[None, :]


def hyperbolic_trace(
    f: MapSystem,
    m: Method,
    x_traj: Trajectory,
    window: tuple[int, int] | None = None,
    tol: float = 1e-12,
    max_iter: int = 60,
) -> Trajectory:
    """Trajectory of ``m`` tracking ``x_traj`` for a hyperbolic toral automorphism.

    Solves ``y[k+1] = g_k(y[k])`` by repeatedly correcting the defect
    ``g_k(y_k) - y_{k+1}`` with the bounded solution of the linearised
    equation; the first pass is the geometric-series construction and later
    passes absorb the point dependence of ``g_k``.
    """
    if not isinstance(f, ToralAutomorphism) or f.hyperbolic_data is None:
        raise UnsupportedOperation("hyperbolic_trace needs a hyperbolic toral automorphism")
    if m.base != f:
        raise InvalidInput("method is not built around this map")
    a, b = (x_traj.n_from, x_traj.n_to) if window is None else window
    if not x_traj.covers(a, b):
        raise InvalidInput(f"trajectory does not cover [{a}, {b}]")
    hd = f.hyperbolic_data
    space = f.space
    y = np.array(x_traj.segment(a, b), copy=True)
    ks = np.arange(a, b)
    last = np.inf
    for it in range(max_iter + 1):
        if len(y) == 1:
            break
        r = wrap_diff(space, m.apply(ks, y[:-1])[0], y[1:])
        res = float(np.max(np.abs(r)))
        if res <= tol:
            break
        if it == max_iter or (it >= 2 and res > 0.5 * last):
            raise ConvergenceError(
                f"tracer correction is not contracting (residual {res:.3e} after {it} passes)", residual=res
            )
        last = res
        y = normalize(space, y + _bounded_solution(hd, r))[0]
    return Trajectory(space, a, y, (a, b))


def trace_residual(m: Method, traj: Trajectory) -> float:
    """``max_k dist(y_{k+1}, g_k(y_k))`` over the trajectory."""
    if len(traj) < 2:
        return 0.0
    ks = np.arange(traj.n_from, traj.n_to)
    img = m.apply(ks, traj.points[:-1])[0]
    return float(np.max(dist(m.space, img, traj.points[1:])))


@dataclass(frozen=True)
class Witness:
    """An adversary that defeated a sample, with enough data to replay it."""

    adversary: dict
    label: str
    horizon: int
    sup_distance: float
    lower_bound: float | None
    certified: bool

    def to_dict(self) -> dict:
        return {
            "adversary": self.adversary,
            "label": self.label,
            "horizon": self.horizon,
            "sup_distance": _num(self.sup_distance),
            "lower_bound": None if self.lower_bound is None else _num(self.lower_bound),
            "certified": self.certified,
        }


@dataclass(frozen=True)
class PhiEstimate:
    """Finite-pool, finite-horizon over-approximation of ``Phi(eps, d, f)``.

    A false flag comes with a witness; it is certified when the witness has
    a lower bound above ``epsilon``. True flags are evidence only.
    """

    epsilon: float
    d: float
    sample_points: np.ndarray
    member_flags: tuple[bool, ...]
    methods_tested: tuple[tuple[str, ...], ...]
    witnesses: tuple[Witness | None, ...]
    best_sup: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "d": self.d,
            "samples": [
                {
                    "point": [float(c) for c in p],
                    "member": flag,
                    "methods_tested": list(tested),
                    "max_best_sup": _num(sup),
                    "witness": None if w is None else w.to_dict(),
                }
                for p, flag, tested, w, sup in zip(
                    self.sample_points, self.member_flags, self.methods_tested, self.witnesses, self.best_sup
                )
            ],
        }

    def csv_rows(self) -> list[list]:
        rows = []
        for p, flag, w in zip(self.sample_points, self.member_flags, self.witnesses):
            rows.append([*map(float, p), int(flag), "" if w is None else w.label, "" if w is None else int(w.certified)])
        return rows


def estimate_phi(
    f: MapSystem,
    epsilon: float,
    d: float,
    samples,
    adversaries: Sequence[Method],
    search: SearchConfig = SearchConfig(),
) -> PhiEstimate:
    """Flag each sample as (evidently) inside or (witnessed) outside ``Phi(eps, d, f)``.

    Adversaries are tried in order; the first one whose best trajectory stays
    farther than ``epsilon`` becomes the sample's witness.
    """
    if epsilon <= 0:
        raise InvalidInput("epsilon must be positive")
    for m in adversaries:
        if m.base != f:
            raise InvalidInput(f"adversary {m.label()} is built around a different map")
        if m.d_bound > d + 1e-12:
            raise InvalidInput(f"adversary {m.label()} has d_bound {m.d_bound} > d = {d}")
    pts = np.atleast_2d(as_points(f.space, samples))
    H = search.horizon
    vacuous = epsilon >= f.space.diameter
    local = replace(search, target=epsilon)
    flags, tested, witnesses, sups = [], [], [], []
    for x in pts:
        x_traj = f.orbit(x, 0, H)
        flag, names, witness, worst = True, [], None, 0.0
        if not vacuous:
            for m in adversaries:
                rep = best_shadow(x_traj, m, local)
                names.append(m.label())
                worst = max(worst, rep.sup_distance)
                if rep.sup_distance > epsilon:
                    flag = False
                    lb = rep.lower_bound
                    witness = Witness(m.descriptor(), m.label(), H, rep.sup_distance, lb, lb is not None and lb > epsilon)
                    break
        flags.append(flag)
        tested.append(tuple(names))
        witnesses.append(witness)
        sups.append(worst)
    return PhiEstimate(epsilon, d, pts, tuple(flags), tuple(tested), tuple(witnesses), tuple(sups))


@dataclass(frozen=True)
class PsiEstimate:
    sample_points: np.ndarray
    d_ladder: tuple[float, ...]
    d_hat: tuple[float | None, ...]
    levels: tuple[PhiEstimate, ...]

    def to_dict(self) -> dict:
        return {
            "d_ladder": list(self.d_ladder),
            "samples": [
                {"point": [float(c) for c in p], "d_hat": dh} for p, dh in zip(self.sample_points, self.d_hat)
            ],
            "levels": [lvl.to_dict() for lvl in self.levels],
        }


def estimate_psi(
    f: MapSystem,
    samples,
    epsilon: float,
    d_ladder: Sequence[float],
    adversaries: Callable[[float], Sequence[Method]] | Sequence[Method],
    search: SearchConfig = SearchConfig(),
) -> PsiEstimate:
    """For each sample, the largest ladder ``d`` at which no adversary wins, or ``None``.

    ``adversaries`` is either a fixed pool or a factory ``d -> pool``.
    """
    ladder = tuple(float(d) for d in d_ladder)
    if not ladder:
        raise InvalidInput("d_ladder must be nonempty")
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise InvalidInput("d_ladder must be strictly decreasing")
    pool_for = adversaries if callable(adversaries) else (lambda d, pool=list(adversaries): pool)
    pts = np.atleast_2d(as_points(f.space, samples))
    levels = [estimate_phi(f, epsilon, d, pts, pool_for(d), search) for d in ladder]
    d_hat = []
    for i in range(len(pts)):
        d_hat.append(next((d for d, lvl in zip(ladder, levels) if lvl.member_flags[i]), None))
    return PsiEstimate(pts, ladder, tuple(d_hat), tuple(levels))


def replay_witness(f: MapSystem, point, witness: Witness, search: SearchConfig = SearchConfig()) -> ShadowReport:
    """Re-run a stored witness from scratch."""
    from .methods import method_from_dict

    m = method_from_dict(f, witness.adversary)
    local = replace(search, horizon=witness.horizon)
    return best_shadow(f.orbit(point, 0, witness.horizon), m, local)
