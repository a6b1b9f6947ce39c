"""Compact metric spaces: the circle, flat tori and rectangular charts.

Points are plain numpy arrays whose last axis holds coordinates, so every
function here works on a single point of shape ``(dim,)`` and on batches of
shape ``(n, dim)`` alike.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, ResourceLimit

KINDS = ("circle", "torus", "chart")

DEFAULT_GRID_CAP = 1 << 22


@dataclass(frozen=True)
class Space:
    kind: str
    dim: int = 1
    bounds: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInput(f"unknown space kind {self.kind!r}")
        if self.kind == "circle" and self.dim != 1:
            raise InvalidInput("a circle is one-dimensional")
        if self.kind == "chart":
            if not self.bounds:
                raise InvalidInput("chart needs per-axis bounds")
            bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
            for lo, hi in bounds:
                if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
                    raise InvalidInput(f"chart axis [{lo}, {hi}] must have positive length")
            object.__setattr__(self, "bounds", bounds)
            object.__setattr__(self, "dim", len(bounds))
        elif self.bounds is not None:
            raise InvalidInput(f"{self.kind} takes no bounds")
        if self.dim < 1:
            raise InvalidInput("dimension must be positive")

    @property
    def periodic(self) -> bool:
        return self.kind != "chart"

    @property
    def diameter(self) -> float:
        if self.periodic:
            return math.sqrt(self.dim) / 2.0
        return math.sqrt(sum((hi - lo) ** 2 for lo, hi in self.bounds))

    @property
    def lower(self) -> np.ndarray:
        if self.periodic:
            return np.zeros(self.dim)
        return np.array([lo for lo, _ in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        if self.periodic:
            return np.ones(self.dim)
        return np.array([hi for _, hi in self.bounds])

    @property
    def extent(self) -> np.ndarray:
        return self.upper - self.lower

    def to_dict(self) -> dict:
        if self.kind == "circle":
            return {"kind": "circle"}
        if self.kind == "torus":
            return {"kind": "torus", "dim": self.dim}
        return {"kind": "chart", "bounds": [list(b) for b in self.bounds]}

    @classmethod
    def from_dict(cls, data: dict) -> "Space":
        try:
            kind = data["kind"]
        except (KeyError, TypeError):
            raise InvalidInput("space descriptor needs a 'kind'") from None
        if kind == "circle":
            return circle()
        if kind == "torus":
            return torus(int(data.get("dim", 2)))
        if kind == "chart":
            return chart(data.get("bounds"))
        raise InvalidInput(f"unknown space kind {kind!r}")


def circle() -> Space:
    return Space("circle", 1)


def torus(dim: int = 2) -> Space:
    return Space("torus", dim)


def chart(bounds) -> Space:
    if bounds is None:
        raise InvalidInput("chart needs per-axis bounds")
    return Space("chart", bounds=tuple(tuple(b) for b in bounds))


def as_points(space: Space, p) -> np.ndarray:
    """Coerce ``p`` to a float array with trailing axis ``space.dim``.

    A bare scalar is accepted for one-dimensional spaces.
    """
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 0:
        if space.dim != 1:
            raise InvalidInput(f"scalar point given for a {space.dim}-dimensional space")
        arr = arr.reshape(1)
    if arr.shape[-1] != space.dim:
        raise InvalidInput(f"point has {arr.shape[-1]} coordinates, space has dimension {space.dim}")
    return arr


def wrap_diff(space: Space, p, q) -> np.ndarray:
    """Shortest displacement ``p - q``; on periodic spaces each axis lands in [-1/2, 1/2)."""
    diff = as_points(space, p) - as_points(space, q)
    if space.periodic:
        diff = diff - np.floor(diff + 0.5)
    return diff


def dist(space: Space, p, q) -> np.ndarray | float:
    """Quotient metric on circle/torus (l2 over per-axis circle distances), Euclidean on charts."""
    a = as_points(space, p)
    b = as_points(space, q)
    diff = np.abs(a - b)
    if space.periodic:
        diff = np.minimum(diff, 1.0 - diff)
    out = np.sqrt(np.sum(diff * diff, axis=-1))
    return float(out) if out.ndim == 0 else out


def pairwise_dist(space: Space, P, Q) -> np.ndarray:
    """Cost matrix ``C[i, j] = dist(P[i], Q[j])``."""
    P = np.atleast_2d(as_points(space, P))
    Q = np.atleast_2d(as_points(space, Q))
    diff = np.abs(P[:, None, :] - Q[None, :, :])
    if space.periodic:
        np.minimum(diff, 1.0 - diff, out=diff)
    np.multiply(diff, diff, out=diff)
    return np.sqrt(diff.sum(axis=-1))


def normalize(space: Space, p) -> tuple[np.ndarray, np.ndarray | bool]:
    """Reduce to the fundamental domain.

    Returns ``(coords, clamped)``. Periodic spaces reduce mod 1 and never
    clamp. Charts clamp to their bounds and report, per point, whether any
    coordinate had to move.
    """
    arr = as_points(space, p)
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("point has NaN or infinite coordinates")
    if space.periodic:
        out = np.mod(arr, 1.0)
        # x mod 1 rounds up to exactly 1.0 for tiny negative x
        out[out >= 1.0] = 0.0
        out = out + 0.0
        clamped = np.zeros(arr.shape[:-1], dtype=bool)
    else:
        out = np.clip(arr, space.lower, space.upper)
        clamped = np.any(out != arr, axis=-1)
    if clamped.ndim == 0:
        clamped = bool(clamped)
    return out, clamped


def grid(space: Space, resolution: int, cap: int = DEFAULT_GRID_CAP) -> np.ndarray:
    """Deterministic axis-uniform lattice of ``resolution ** dim`` points.

    Periodic axes use ``i / resolution`` (1.0 would alias 0); chart axes
    include both endpoints. Rows are in lexicographic order.
    """
    if resolution < 1:
        raise InvalidInput("grid resolution must be at least 1")
    count = resolution**space.dim
    if count > cap:
        raise ResourceLimit(f"grid of {count} points exceeds the cap of {cap}")
    axes = []
    for lo, hi in zip(space.lower, space.upper):
        if space.periodic:
            axes.append(np.arange(resolution) / resolution)
        elif resolution == 1:
            axes.append(np.array([(lo + hi) / 2.0]))
        else:
            axes.append(np.linspace(lo, hi, resolution))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def landmarks(space: Space, count: int = 32) -> np.ndarray:
    """``count`` deterministic grid points spread over the space."""
    resolution = max(1, math.ceil(count ** (1.0 / space.dim)))
    pts = grid(space, resolution)
    if len(pts) <= count:
        return pts
    idx = np.unique(np.round(np.linspace(0, len(pts) - 1, count)).astype(int))
    return pts[idx]
