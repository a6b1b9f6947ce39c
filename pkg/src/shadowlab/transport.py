"""Finitely supported probability measures and exact Wasserstein-1 distances.

Ground cost is always the space metric. ``w1`` cancels the mass two
measures share (W1 only depends on their difference), then uses the
closed form on one-dimensional spaces, an assignment solver for equal-weight
equal-count pairs, and the network simplex otherwise.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ConvergenceError, InvalidInput, OrbitExit, ResourceLimit
from .observables import LipFunction
from .space import Space, as_points, normalize, pairwise_dist
from .systems import MapSystem
from .trajectory import Trajectory

# POT probes every installed deep-learning backend on import; we only need numpy.
for _backend in ("PYTORCH", "TENSORFLOW", "JAX", "CUPY"):
    os.environ.setdefault(f"POT_BACKEND_DISABLE_{_backend}", "1")
import ot  # noqa: E402

MERGE_TOL = 1e-12
AUDIT_TOL = 1e-9
DEFAULT_MAX_ATOMS = 2048


def _snap(space: Space, atoms: np.ndarray) -> np.ndarray:
    atoms = normalize(space, atoms)[0]
    if space.periodic:
        atoms[atoms > 1.0 - MERGE_TOL] = 0.0
    return atoms


def _merge(space: Space, atoms: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sort atoms lexicographically and sum weights of atoms within MERGE_TOL of the previous one."""
    order = np.lexsort(atoms.T[::-1])
    atoms, weights = atoms[order], weights[order]
    if len(atoms) < 2:
        return atoms, weights
    step = np.max(np.abs(np.diff(atoms, axis=0)), axis=1)
    new_group = np.concatenate([[True], step > MERGE_TOL])
    group = np.cumsum(new_group) - 1
    merged_w = np.bincount(group, weights=weights)
    return atoms[new_group], merged_w


@dataclass(frozen=True)
class DiscreteMeasure:
    """Atoms (rows) with positive weights summing to one; coincident atoms merged."""

    space: Space
    atoms: np.ndarray
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        atoms = np.atleast_2d(as_points(self.space, self.atoms)).astype(float)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(atoms) == 0 or len(atoms) != len(w):
            raise InvalidInput("a measure needs as many weights as atoms, and at least one atom")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise InvalidInput("measure weights must be positive")
        if abs(w.sum() - 1.0) > 1e-9:
            raise InvalidInput(f"measure weights sum to {w.sum()}, not 1")
        atoms, w = _merge(self.space, _snap(self.space, atoms), w)
        w = w / w.sum()
        atoms.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return len(self.weights)

    def integrate(self, phi) -> float:
        return float(np.dot(self.weights, phi(self.atoms)))

    def mass_in_ball(self, center, radius: float) -> float:
        from .space import dist

        return float(self.weights[dist(self.space, self.atoms, center) <= radius].sum())

    def to_dict(self) -> dict:
        return {
            "space": self.space.to_dict(),
            "atoms": self.atoms.tolist(),
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DiscreteMeasure":
        return cls(Space.from_dict(data["space"]), np.array(data["atoms"]), np.array(data["weights"]))

    def csv_rows(self) -> list[list[float]]:
        return [[*map(float, a), float(w)] for a, w in zip(self.atoms, self.weights)]


def uniform_measure(space: Space, points) -> DiscreteMeasure:
    pts = np.atleast_2d(as_points(space, points))
    return DiscreteMeasure(space, pts, np.full(len(pts), 1.0 / len(pts)))


def dirac(space: Space, p) -> DiscreteMeasure:
    return DiscreteMeasure(space, as_points(space, p).reshape(1, space.dim), np.ones(1))


def empirical_measure(traj: Trajectory, start: int, N: int) -> DiscreteMeasure:
    """``(1/N) sum_{k=start}^{start+N-1} delta(x_k)``."""
    if N < 1:
        raise InvalidInput("empirical measure needs N >= 1")
    return uniform_measure(traj.space, traj.segment(start, start + N - 1))


def mixture(measures: Sequence[DiscreteMeasure], coefficients: Sequence[float]) -> DiscreteMeasure:
    """Convex combination; zero coefficients are dropped."""
    parts = [(m, c) for m, c in zip(measures, coefficients) if c > 0]
    if not parts:
        raise InvalidInput("mixture needs a positive coefficient")
    total = sum(c for _, c in parts)
    space = parts[0][0].space
    atoms = np.concatenate([m.atoms for m, _ in parts])
    weights = np.concatenate([m.weights * (c / total) for m, c in parts])
    return DiscreteMeasure(space, atoms, weights)


def pushforward(f: MapSystem, mu: DiscreteMeasure) -> DiscreteMeasure:
    """Image measure: atoms mapped by ``f``, weights carried along, coincident images merged."""
    if f.space != mu.space:
        raise InvalidInput("map and measure live on different spaces")
    img, clamped = f.apply(mu.atoms)
    if np.any(clamped):
        raise OrbitExit(f"{f.label()} maps an atom outside its chart")
    return DiscreteMeasure(mu.space, img, mu.weights.copy())


@dataclass(frozen=True)
class MeasureSet:
    members: tuple[DiscreteMeasure, ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise InvalidInput("a measure set needs at least one member")
        labels = tuple(self.labels) or tuple(f"m{i}" for i in range(len(members)))
        if len(labels) != len(members):
            raise InvalidInput("one label per member")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.members)


def _signed_difference(mu: DiscreteMeasure, nu: DiscreteMeasure):
    atoms = np.concatenate([mu.atoms, nu.atoms])
    weights = np.concatenate([mu.weights, -nu.weights])
    atoms, net = _merge(mu.space, atoms, weights)
    return atoms, net


def _w1_line(x: np.ndarray, net: np.ndarray, period: float | None) -> float:
    """W1 of a signed zero-mass measure on a line (``period=None``) or circle."""
    order = np.argsort(x, kind="stable")
    x, net = x[order], net[order]
    F = np.cumsum(net)
    if period is None:
        return float(np.sum(np.abs(F[:-1]) * np.diff(x)))
    lengths = np.diff(np.concatenate([x, [x[0] + period]]))
    # on the circle the cumulative function is defined up to a constant; the
    # cheapest choice is a weighted median of F
    idx = np.argsort(F, kind="stable")
    cum = np.cumsum(lengths[idx])
    c = F[idx][np.searchsorted(cum, cum[-1] / 2.0)]
    return float(np.sum(lengths * np.abs(F - c)))


def _equal_weight_count(mu: DiscreteMeasure, nu: DiscreteMeasure) -> bool:
    n = len(mu)
    return (
        n == len(nu)
        and np.allclose(mu.weights, 1.0 / n, rtol=0, atol=1e-15)
        and np.allclose(nu.weights, 1.0 / n, rtol=0, atol=1e-15)
    )


def _w1_assignment(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    C = pairwise_dist(mu.space, mu.atoms, nu.atoms)
    r, c = linear_sum_assignment(C)
    return float(C[r, c].sum() / len(mu))


def _w1_network(space: Space, src, a, dst, b) -> float:
    mass = a.sum()
    a, b = a / mass, b / b.sum()
    C = pairwise_dist(space, src, dst)
    plan, log = ot.emd(a, b, C, numItermax=50_000_000, log=True)
    if log.get("warning"):
        raise ConvergenceError(f"transport solver stopped early: {log['warning']}")
    primal = float(np.sum(plan * C))
    # audit: marginals and the dual certificate reported by the solver
    if np.max(np.abs(plan.sum(axis=1) - a)) > AUDIT_TOL or np.max(np.abs(plan.sum(axis=0) - b)) > AUDIT_TOL:
        raise ConvergenceError("transport plan violates its marginals")
    u, v = log["u"], log["v"]
    dual = float(a @ u + b @ v)
    slack = np.max(u[:, None] + v[None, :] - C)
    if abs(primal - dual) > AUDIT_TOL or slack > AUDIT_TOL:
        raise ConvergenceError(f"transport optimality audit failed (gap {primal - dual:.2e}, slack {slack:.2e})")
    return primal * mass


def w1(mu: DiscreteMeasure, nu: DiscreteMeasure, max_atoms: int = DEFAULT_MAX_ATOMS, route: str = "auto") -> float:
    """Exact Kantorovich-Wasserstein distance with the space metric as cost.

    ``route`` forces a solver: ``"network"`` (network simplex after cancelling
    shared mass), ``"assignment"`` (equal-weight equal-count only) or
    ``"line"`` (one-dimensional closed form). ``max_atoms`` caps the
    transport problem at ``max_atoms ** 2`` arcs.
    """
    if mu.space != nu.space:
        raise InvalidInput("measures live on different spaces")
    space = mu.space
    if route == "assignment":
        if not _equal_weight_count(mu, nu):
            raise InvalidInput("assignment route needs equal-weight measures with equal atom counts")
        _check_cap(len(mu), len(nu), max_atoms)
        return _w1_assignment(mu, nu)

    atoms, net = _signed_difference(mu, nu)
    pos, neg = net > 0, net < 0
    if net[pos].sum() <= 1e-15:
        return 0.0
    if route == "line" or (route == "auto" and space.dim == 1):
        if space.dim != 1:
            raise InvalidInput("line route needs a one-dimensional space")
        return _w1_line(atoms[:, 0], net, 1.0 if space.periodic else None)
    if route == "auto" and _equal_weight_count(mu, nu) and pos.sum() == len(mu):
        _check_cap(len(mu), len(nu), max_atoms)
        return _w1_assignment(mu, nu)
    if route not in ("auto", "network"):
        raise InvalidInput(f"unknown w1 route {route!r}")
    _check_cap(int(pos.sum()), int(neg.sum()), max_atoms)
    return _w1_network(space, atoms[pos], net[pos], atoms[neg], -net[neg])


def _check_cap(n: int, m: int, max_atoms: int):
    if n * m > max_atoms * max_atoms:
        raise ResourceLimit(
            f"transport problem {n} x {m} exceeds the cap of {max_atoms} atoms per side; resample the measures"
        )


def w1_dual_lb(mu: DiscreteMeasure, nu: DiscreteMeasure, functions: Sequence[LipFunction]) -> float:
    """``max |int phi dmu - int phi dnu|`` over 1-Lipschitz ``functions``: a lower bound on W1."""
    best = 0.0
    for phi in functions:
        best = max(best, abs(mu.integrate(phi) - nu.integrate(phi)))
    return best


def invariance_residual(f: MapSystem, mu: DiscreteMeasure, max_atoms: int = DEFAULT_MAX_ATOMS) -> float:
    """``W1(mu, f# mu)``; zero exactly for invariant measures."""
    return w1(mu, pushforward(f, mu), max_atoms=max_atoms)


def convex_weights(members: int, step: float) -> list[tuple[float, ...]]:
    """Compositions of 1 into ``members`` strictly positive multiples of ``step``."""
    units = round(1.0 / step)
    if not math.isclose(units * step, 1.0):
        raise InvalidInput("weight step must divide 1")
    out = []
    for cut in itertools.combinations(range(1, units), members - 1):
        parts = np.diff((0,) + cut + (units,))
        out.append(tuple(float(p) / units for p in parts))
    return out


@dataclass(frozen=True)
class InclusionGap:
    """One-sided gap ``max_{mu in A} min_{nu in conv_grid(B)} W1(mu, nu)``.

    ``per_member`` lists, for each member of ``A``, its gap and the
    minimising combination as ``(gap, member indices, coefficients)``.
    ``skipped`` counts combinations dropped by the atom cap; they make the
    reported gap an upper bound for the grid-closure gap.
    """

    gap: float
    per_member: tuple[tuple[float, tuple[int, ...], tuple[float, ...]], ...]
    exact_evaluations: int
    skipped: int

    def to_dict(self, labels_a=None, labels_b=None) -> dict:
        rows = []
        for i, (g, idx, coef) in enumerate(self.per_member):
            rows.append(
                {
                    "member": labels_a[i] if labels_a else i,
                    "gap": g,
                    "closest": [labels_b[j] if labels_b else j for j in idx],
                    "coefficients": list(coef),
                }
            )
        return {"gap": self.gap, "members": rows, "exact_evaluations": self.exact_evaluations, "skipped": self.skipped}


def set_inclusion_gap(
    A: MeasureSet,
    B: MeasureSet,
    max_members: int = 3,
    step: float = 0.1,
    functions: Sequence[LipFunction] | None = None,
    max_atoms: int = DEFAULT_MAX_ATOMS,
) -> InclusionGap:
    """How far ``A`` is from lying inside the grid convex closure of ``B``, in W1.

    Combinations are visited in order of their dictionary lower bound, and
    exact W1 is only computed while that bound is below the incumbent, so the
    minimum over the weight grid is exact (up to cap-skipped combinations).
    """
    from .observables import lip_dictionary

    space = A.members[0].space
    if any(m.space != space for m in A.members + B.members):
        raise InvalidInput("measure sets live on different spaces")
    funcs = lip_dictionary(space) if functions is None else list(functions)
    IA = np.array([[m.integrate(phi) for phi in funcs] for m in A.members]).reshape(len(A), len(funcs))
    IB = np.array([[m.integrate(phi) for phi in funcs] for m in B.members]).reshape(len(B), len(funcs))

    combos: list[tuple[tuple[int, ...], tuple[float, ...]]] = []
    for size in range(1, min(max_members, len(B)) + 1):
        for idx in itertools.combinations(range(len(B)), size):
            for coef in convex_weights(size, step) if size > 1 else [(1.0,)]:
                combos.append((idx, coef))
    # integrals of each combination against the dictionary
    mixed = np.array([sum(c * IB[j] for j, c in zip(idx, coef)) for idx, coef in combos]).reshape(len(combos), len(funcs))
    sizes = np.array([sum(len(B.members[j]) for j in idx) for idx, _ in combos])

    per_member = []
    evaluations = skipped = 0
    for i, mu in enumerate(A.members):
        lb = np.max(np.abs(mixed - IA[i]), axis=1) if funcs else np.zeros(len(combos))
        best, best_combo = math.inf, None
        for c in np.argsort(lb, kind="stable"):
            if lb[c] >= best:
                break
            if len(mu) * sizes[c] > max_atoms * max_atoms and len(combos[c][0]) > 1:
                skipped += 1
                continue
            idx, coef = combos[c]
            nu = B.members[idx[0]] if len(idx) == 1 else mixture([B.members[j] for j in idx], coef)
            val = w1(mu, nu, max_atoms=max_atoms)
            evaluations += 1
            if val < best:
                best, best_combo = val, combos[c]
        if best_combo is None:
            raise ResourceLimit("every combination exceeds the atom cap; resample the measures")
        per_member.append((best, best_combo[0], best_combo[1]))
    return InclusionGap(max(g for g, _, _ in per_member), tuple(per_member), evaluations, skipped)
