from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .space import Space, dist


@dataclass(frozen=True)
class Trajectory:
    """Points ``x_k`` for consecutive integers ``k`` starting at ``start``.

    ``window`` is the requested index interval. When a chart orbit leaves its
    chart the trajectory is cut short and ``exit_index`` records the first
    index whose point would lie outside.
    """

    space: Space
    start: int
    points: np.ndarray
    window: tuple[int, int]
    exit_index: int | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.space.dim:
            raise InvalidInput("trajectory points must have shape (length, dim)")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def n_from(self) -> int:
        return self.start

    @property
    def n_to(self) -> int:
        return self.start + len(self.points) - 1

    @property
    def truncated(self) -> bool:
        return self.exit_index is not None

    def covers(self, a: int, b: int) -> bool:
        return self.n_from <= a and b <= self.n_to

    def at(self, k: int) -> np.ndarray:
        if not self.n_from <= k <= self.n_to:
            raise InvalidInput(f"index {k} outside trajectory [{self.n_from}, {self.n_to}]")
        return self.points[k - self.start]

    def segment(self, a: int, b: int) -> np.ndarray:
        """Points for indices ``a..b`` inclusive."""
        if not self.covers(a, b):
            raise InvalidInput(f"[{a}, {b}] not within trajectory [{self.n_from}, {self.n_to}]")
        return self.points[a - self.start : b - self.start + 1]

    def sup_distance(self, other: "Trajectory", a: int | None = None, b: int | None = None) -> float:
        a = max(self.n_from, other.n_from) if a is None else a
        b = min(self.n_to, other.n_to) if b is None else b
        return float(np.max(dist(self.space, self.segment(a, b), other.segment(a, b))))
