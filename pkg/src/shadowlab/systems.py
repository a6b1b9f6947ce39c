"""Audited catalog of continuous self-maps of compact spaces.

Every entry knows its own Lipschitz constant, whether it is invertible, and
(for toral automorphisms) its hyperbolic splitting, so downstream code never
has to estimate any of these numerically.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InvalidInput, OrbitExit, UnsupportedOperation
from .space import Space, as_points, chart, circle, normalize, torus
from .trajectory import Trajectory

DEFAULT_CAT = ((2, 1), (1, 1))
GOLDEN_ROTATION = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class HyperbolicData:
    """Eigen-splitting of a hyperbolic 2x2 matrix.

    ``stable_row``/``unstable_row`` are the rows of the inverse eigenvector
    matrix, i.e. the linear functionals giving the stable and unstable
    coordinates of a displacement.
    """

    stable_eigenvalue: float
    unstable_eigenvalue: float
    stable_vector: np.ndarray
    unstable_vector: np.ndarray
    stable_row: np.ndarray
    unstable_row: np.ndarray

    @property
    def constant(self) -> float:
        """Shadowing constant C with sup-distance <= C * d for the tracer.

        Reduces to ``1/(1-|ls|) + 1/(|lu|-1)`` when the eigenvectors are
        orthonormal (symmetric matrices).
        """
        ls = abs(self.stable_eigenvalue)
        lu = abs(self.unstable_eigenvalue)
        return float(
            np.linalg.norm(self.stable_row) / (1.0 - ls) + np.linalg.norm(self.unstable_row) / (lu - 1.0)
        )

    def to_dict(self) -> dict:
        return {
            "stable_eigenvalue": self.stable_eigenvalue,
            "unstable_eigenvalue": self.unstable_eigenvalue,
            "stable_vector": self.stable_vector.tolist(),
            "unstable_vector": self.unstable_vector.tolist(),
            "constant": self.constant,
        }


def hyperbolic_splitting(A) -> HyperbolicData:
    A = np.asarray(A, dtype=float)
    vals, vecs = np.linalg.eig(A)
    if np.any(np.abs(vals.imag) > 0) or np.any(np.isclose(np.abs(vals.real), 1.0)):
        raise InvalidInput("matrix is not hyperbolic")
    vals = vals.real
    vecs = vecs.real
    order = np.argsort(np.abs(vals))
    vals, vecs = vals[order], vecs[:, order]
    if not (abs(vals[0]) < 1.0 < abs(vals[1])):
        raise InvalidInput("matrix needs one contracting and one expanding direction")
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    # fix signs so the leading nonzero component is positive
    for j in range(vecs.shape[1]):
        lead = vecs[np.flatnonzero(np.abs(vecs[:, j]) > 1e-12)[0], j]
        vecs[:, j] *= np.sign(lead)
    rows = np.linalg.inv(vecs)
    return HyperbolicData(
        stable_eigenvalue=float(vals[0]),
        unstable_eigenvalue=float(vals[1]),
        stable_vector=vecs[:, 0],
        unstable_vector=vecs[:, 1],
        stable_row=rows[0],
        unstable_row=rows[1],
    )


def _frac(x: Fraction) -> Fraction:
    return x - math.floor(x)


@dataclass(frozen=True)
class MapSystem:
    """A named continuous map of ``space`` into itself."""

    name: str = field(init=False)
    space: Space = field(init=False)
    invertible: bool = field(init=False, default=True)
    hyperbolic_data: HyperbolicData | None = field(init=False, default=None, repr=False, compare=False)

    @property
    def params(self) -> dict:
        return {}

    def descriptor(self) -> dict:
        return {"map": self.name, **self.params}

    def label(self) -> str:
        args = ",".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.name}({args})"

    # subclasses implement the lifted forward (and inverse) formulas
    def _forward(self, P: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _backward(self, P: np.ndarray) -> np.ndarray:
        raise UnsupportedOperation(f"{self.name} is not invertible")

    def apply(self, P) -> tuple[np.ndarray, np.ndarray | bool]:
        """Vectorised image with chart-exit mask, see :func:`space.normalize`."""
        return normalize(self.space, self._forward(as_points(self.space, P)))

    def apply_inverse(self, P) -> tuple[np.ndarray, np.ndarray | bool]:
        if not self.invertible:
            raise UnsupportedOperation(f"{self.name} is not invertible")
        return normalize(self.space, self._backward(as_points(self.space, P)))

    def eval(self, p) -> np.ndarray:
        out, clamped = self.apply(p)
        if np.any(clamped):
            raise OrbitExit(f"{self.label()} maps the point outside its chart", step=0)
        return out

    def inverse(self, p) -> np.ndarray:
        out, clamped = self.apply_inverse(p)
        if np.any(clamped):
            raise OrbitExit(f"inverse of {self.label()} leaves the chart", step=-1)
        return out

    def eval_exact(self, p: tuple[Fraction, ...]) -> tuple[Fraction, ...]:
        raise UnsupportedOperation(f"{self.name} has no exact rational evaluation")

    def lipschitz_bound(self) -> float:
        raise NotImplementedError

    def fixed_points(self) -> np.ndarray:
        """Catalogued fixed points (possibly a sample of a continuum)."""
        return np.empty((0, self.space.dim))

    def orbit(self, p, n_from: int = 0, n_to: int = 0) -> Trajectory:
        """``x_k = f^k(p)`` for ``k`` in ``[n_from, n_to]``; ``x_0 = p``.

        The window must contain 0. Chart exits truncate the trajectory.
        """
        if n_from > n_to:
            raise InvalidInput("orbit window needs n_from <= n_to")
        if not n_from <= 0 <= n_to:
            raise InvalidInput("orbit window must contain index 0")
        if n_from < 0 and not self.invertible:
            raise UnsupportedOperation(f"backward orbit of non-invertible {self.name}")
        x0, clamped = normalize(self.space, as_points(self.space, p).reshape(self.space.dim))
        if clamped:
            raise OrbitExit("initial point lies outside the chart", step=0)
        exit_index = None

        back = []
        x = x0
        for k in range(-1, n_from - 1, -1):
            x, out = self.apply_inverse(x)
            if out:
                exit_index = k
                break
            back.append(x)
        fwd = [x0]
        x = x0
        for k in range(1, n_to + 1):
            x, out = self.apply(x)
            if out:
                exit_index = k if exit_index is None else exit_index
                break
            fwd.append(x)
        pts = np.array(back[::-1] + fwd)
        return Trajectory(self.space, -len(back), pts, (n_from, n_to), exit_index)


@dataclass(frozen=True)
class Rotation(MapSystem):
    alpha: float = GOLDEN_ROTATION

    def __post_init__(self):
        object.__setattr__(self, "name", "rotation")
        object.__setattr__(self, "space", circle())
        object.__setattr__(self, "invertible", True)

    @property
    def params(self):
        return {"alpha": self.alpha}

    def _forward(self, P):
        return P + self.alpha

    def _backward(self, P):
        return P - self.alpha

    def eval_exact(self, p):
        return (_frac(p[0] + Fraction(self.alpha)),)

    def lipschitz_bound(self):
        return 1.0

    def fixed_points(self):
        if self.alpha % 1.0 == 0.0:
            return np.zeros((1, 1))
        return np.empty((0, 1))


@dataclass(frozen=True)
class Doubling(MapSystem):
    def __post_init__(self):
        object.__setattr__(self, "name", "doubling")
        object.__setattr__(self, "space", circle())
        object.__setattr__(self, "invertible", False)

    def _forward(self, P):
        return 2.0 * P

    def eval_exact(self, p):
        return (_frac(2 * p[0]),)

    def lipschitz_bound(self):
        return 2.0

    def fixed_points(self):
        return np.zeros((1, 1))


@dataclass(frozen=True)
class ToralAutomorphism(MapSystem):
    """``x -> A x mod 1`` for a hyperbolic integer matrix with ``|det A| = 1``."""

    A: tuple[tuple[int, ...], ...] = DEFAULT_CAT

    def __post_init__(self):
        A = tuple(tuple(int(a) for a in row) for row in self.A)
        M = np.array(A, dtype=float)
        if M.shape != (2, 2) or not np.array_equal(M, np.asarray(self.A, dtype=float)):
            raise InvalidInput("toral_auto needs a 2x2 integer matrix")
        det = A[0][0] * A[1][1] - A[0][1] * A[1][0]
        if abs(det) != 1:
            raise InvalidInput("toral_auto matrix must have determinant +1 or -1")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "name", "toral_auto")
        object.__setattr__(self, "space", torus(2))
        object.__setattr__(self, "invertible", True)
        object.__setattr__(self, "hyperbolic_data", hyperbolic_splitting(M))

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.A, dtype=float)

    @property
    def inverse_matrix(self) -> np.ndarray:
        (a, b), (c, d) = self.A
        det = a * d - b * c
        return np.array([[d, -b], [-c, a]], dtype=float) * det

    @property
    def params(self):
        return {"A": [list(r) for r in self.A]}

    def _forward(self, P):
        return P @ self.matrix.T

    def _backward(self, P):
        return P @ self.inverse_matrix.T

    def eval_exact(self, p):
        (a, b), (c, d) = self.A
        return (_frac(a * p[0] + b * p[1]), _frac(c * p[0] + d * p[1]))

    def lipschitz_bound(self):
        return float(np.linalg.norm(self.matrix, 2))

    def fixed_points(self):
        return np.array([point for orbit in self.periodic_orbits(1) for point in orbit], dtype=float)

    def periodic_orbits(self, period: int) -> list[list[tuple[Fraction, Fraction]]]:
        """All orbits of minimal period ``period``, computed in exact arithmetic."""
        if period < 1:
            raise InvalidInput("period must be positive")
        P = [[Fraction(int(i == j)) for j in range(2)] for i in range(2)]
        for _ in range(period):
            P = [[sum(P[i][k] * self.A[k][j] for k in range(2)) for j in range(2)] for i in range(2)]
        M = [[P[0][0] - 1, P[0][1]], [P[1][0], P[1][1] - 1]]
        det = M[0][0] * M[1][1] - M[0][1] * M[1][0]
        if det == 0:
            raise UnsupportedOperation("A^p - I is singular; periodic set is not finite")
        inv = [[M[1][1] / det, -M[0][1] / det], [-M[1][0] / det, M[0][0] / det]]
        n = abs(int(det))
        points = set()
        for i, j in itertools.product(range(n), repeat=2):
            points.add((_frac(inv[0][0] * i + inv[0][1] * j), _frac(inv[1][0] * i + inv[1][1] * j)))
        orbits = []
        seen = set()
        for pt in sorted(points):
            if pt in seen:
                continue
            orbit = [pt]
            q = self.eval_exact(pt)
            while q != pt:
                orbit.append(q)
                q = self.eval_exact(q)
            seen.update(orbit)
            if len(orbit) == period:
                orbits.append(orbit)
        return orbits


@dataclass(frozen=True)
class DegenerateCircleLine(MapSystem):
    """``(u, v) -> (u, v - beta sin(2 pi v) / (2 pi))`` on the 2-torus.

    Every point of the circle ``v = 0`` is fixed with derivative
    ``diag(1, 1 - beta)``; the circle ``v = 1/2`` is fixed and repelling.
    """

    beta: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise InvalidInput("beta must lie in [0, 1) for a homeomorphism")
        object.__setattr__(self, "name", "degenerate_circle_line")
        object.__setattr__(self, "space", torus(2))
        object.__setattr__(self, "invertible", True)

    @property
    def params(self):
        return {"beta": self.beta}

    def _forward(self, P):
        out = np.array(P, dtype=float, copy=True)
        v = P[..., 1]
        out[..., 1] = v - self.beta * np.sin(2.0 * np.pi * v) / (2.0 * np.pi)
        return out

    def _backward(self, P):
        # monotone in v with slope >= 1 - beta, so Newton from v = w converges
        w = np.mod(P[..., 1], 1.0)
        v = np.array(w, copy=True)
        for _ in range(60):
            F = v - self.beta * np.sin(2.0 * np.pi * v) / (2.0 * np.pi) - w
            step = F / (1.0 - self.beta * np.cos(2.0 * np.pi * v))
            v = v - step
            if np.all(np.abs(step) < 1e-16):
                break
        out = np.array(P, dtype=float, copy=True)
        out[..., 1] = v
        return out

    def preserves_axis(self, axis: int) -> bool:
        return axis == 0

    def lipschitz_bound(self):
        return 1.0 + self.beta

    def fixed_points(self):
        u = np.arange(8) / 8.0
        return np.concatenate(
            [np.stack([u, np.zeros(8)], axis=1), np.stack([u, np.full(8, 0.5)], axis=1)]
        )


@dataclass(frozen=True)
class ChartLinear(MapSystem):
    """``(u, v) -> (u, A v)`` on the square chart ``[-a, a]^2``; not invariant."""

    A: float = 0.5
    a: float = 0.25

    def __post_init__(self):
        A = self.A
        if isinstance(A, (list, tuple)):
            A = float(np.asarray(A, dtype=float).reshape(-1)[0])
        if self.a <= 0:
            raise InvalidInput("chart half-width a must be positive")
        object.__setattr__(self, "A", float(A))
        object.__setattr__(self, "name", "chart_linear")
        object.__setattr__(self, "space", chart([(-self.a, self.a), (-self.a, self.a)]))
        object.__setattr__(self, "invertible", self.A != 0.0)

    @property
    def params(self):
        return {"A": self.A, "a": self.a}

    def _forward(self, P):
        return P * np.array([1.0, self.A])

    def _backward(self, P):
        return P * np.array([1.0, 1.0 / self.A])

    def preserves_axis(self, axis: int) -> bool:
        return axis == 0

    def lipschitz_bound(self):
        return max(1.0, abs(self.A))

    def fixed_points(self):
        u = np.linspace(-self.a, self.a, 5)
        return np.stack([u, np.zeros(5)], axis=1)


CATALOG = {
    "rotation": Rotation,
    "doubling": Doubling,
    "toral_auto": ToralAutomorphism,
    "degenerate_circle_line": DegenerateCircleLine,
    "chart_linear": ChartLinear,
}


def make_map(descriptor: dict) -> MapSystem:
    """Build a catalog map from ``{"map": name, **params}``."""
    params = dict(descriptor)
    try:
        name = params.pop("map")
    except KeyError:
        raise InvalidInput("map descriptor needs a 'map' entry") from None
    if name not in CATALOG:
        raise InvalidInput(f"unknown map {name!r}; choose from {sorted(CATALOG)}")
    if name == "toral_auto" and "A" in params:
        params["A"] = tuple(tuple(r) for r in params["A"])
    try:
        return CATALOG[name](**params)
    except TypeError as exc:
        raise InvalidInput(f"bad parameters for {name}: {exc}") from None


def preserves_axis(f: MapSystem, axis: int) -> bool:
    """True when ``f`` leaves coordinate ``axis`` unchanged everywhere."""
    check = getattr(f, "preserves_axis", None)
    return bool(check(axis)) if check else False
