"""Distance-to-landmark observables, 1-Lipschitz by the triangle inequality."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .space import Space, as_points, dist, landmarks, normalize


@dataclass(frozen=True)
class LipFunction:
    """``x -> dist(x, landmark)``."""

    space: Space
    landmark: tuple[float, ...]
    label: str = ""

    def __post_init__(self):
        p = normalize(self.space, as_points(self.space, self.landmark).reshape(self.space.dim))[0]
        object.__setattr__(self, "landmark", tuple(float(c) for c in p))
        if not self.label:
            coords = ",".join(f"{c:.6g}" for c in self.landmark)
            object.__setattr__(self, "label", f"dist[{coords}]")

    def __call__(self, P):
        return dist(self.space, P, np.array(self.landmark))


def lip_dictionary(space: Space, count: int = 32) -> list[LipFunction]:
    """Distance functions to ``count`` deterministic landmark grid points."""
    return [LipFunction(space, tuple(p)) for p in landmarks(space, count)]
