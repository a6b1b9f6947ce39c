"""d-methods: sequences ``k -> g_k`` of maps uniformly close to a base map.

All kinds evaluate through :meth:`Method.apply`, which is vectorised over
rows of points and over per-row step indices, so the scalar helpers and the
batched searches in :mod:`shadowlab.shadowing` share one code path.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import CertificationError, InvalidInput, OrbitExit, UnsupportedOperation
from .space import as_points, dist, grid, normalize
from .systems import MapSystem, make_map
from .trajectory import Trajectory

CERT_MARGIN = 1e-9

_GOLDEN64 = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    z = np.asarray(x, dtype=np.uint64) + _GOLDEN64
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def hash_uniform(seed: int, *keys) -> np.ndarray:
    """Stateless uniforms in [0, 1) keyed by ``seed`` and integer arrays ``keys``."""
    h = _splitmix64(np.asarray([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))
    for key in keys:
        h = _splitmix64(h ^ np.asarray(key).astype(np.int64).astype(np.uint64))
    return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53


@dataclass(frozen=True)
class Method:
    base: MapSystem

    kind = "abstract"

    @property
    def space(self):
        return self.base.space

    @property
    def d_bound(self) -> float:
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def descriptor(self) -> dict:
        return {"kind": self.kind, **self.params()}

    def label(self) -> str:
        args = ",".join(f"{k}={v}" for k, v in self.params().items())
        return f"{self.kind}({args})"

    def _lift(self, k, P: np.ndarray) -> np.ndarray:
        """Unnormalised ``g_k(P)``; ``k`` is an int or one index per row."""
        raise NotImplementedError

    def apply(self, k, P) -> tuple[np.ndarray, np.ndarray | bool]:
        return normalize(self.space, self._lift(k, as_points(self.space, P)))

    def is_invertible(self) -> bool:
        return False

    def apply_inverse(self, k, P):
        raise UnsupportedOperation(f"{self.label()} has no inverse steps")


@dataclass(frozen=True)
class Constant(Method):
    """``g_k = g`` for every ``k``; ``g`` defaults to the base map itself."""

    g: MapSystem | None = None
    declared_bound: float = 0.0

    kind = "constant"

    def __post_init__(self):
        if self.g is not None and self.g.space != self.base.space:
            raise InvalidInput("perturbed map lives on a different space")
        if self.declared_bound < 0:
            raise InvalidInput("d_bound must be nonnegative")

    @property
    def map(self) -> MapSystem:
        return self.base if self.g is None else self.g

    @property
    def d_bound(self):
        return self.declared_bound

    def params(self):
        if self.g is None:
            return {}
        return {"g": self.g.descriptor(), "d_bound": self.declared_bound}

    def _lift(self, k, P):
        return self.map._forward(P)

    def is_invertible(self):
        return self.map.invertible

    def apply_inverse(self, k, P):
        return self.map.apply_inverse(P)


@dataclass(frozen=True)
class Drift(Method):
    """``g_k(p) = f(p) + delta * e_axis`` for every ``k``."""

    delta: float = 0.0
    axis: int = 0

    kind = "drift"

    def __post_init__(self):
        if not 0 <= self.axis < self.space.dim:
            raise InvalidInput(f"drift axis {self.axis} out of range")

    @property
    def d_bound(self):
        return abs(self.delta)

    def params(self):
        return {"delta": self.delta, "axis": self.axis}

    def _lift(self, k, P):
        out = self.base._forward(P)
        out[..., self.axis] += self.delta
        return out


@dataclass(frozen=True)
class OneShot(Method):
    """``g_k = f`` except ``g_{k0}(p) = f(p) + offset``."""

    k0: int = 0
    offset: tuple[float, ...] = ()

    kind = "oneshot"

    def __post_init__(self):
        off = tuple(float(o) for o in np.atleast_1d(self.offset))
        if len(off) != self.space.dim:
            raise InvalidInput("offset length must equal the space dimension")
        object.__setattr__(self, "offset", off)

    @property
    def d_bound(self):
        return float(np.linalg.norm(self.offset))

    def params(self):
        return {"k0": self.k0, "offset": list(self.offset)}

    def _lift(self, k, P):
        out = self.base._forward(P)
        hit = np.asarray(k) == self.k0
        if np.ndim(hit) == 0:
            if hit:
                out = out + np.array(self.offset)
        else:
            out[hit] += np.array(self.offset)
        return out


@dataclass(frozen=True)
class RandomBounded(Method):
    """``g_k(p) = f(p) + d * eta(k, p)`` with a seeded continuous field ``eta``.

    ``eta(k, .)`` takes hash-derived vectors of norm <= 1 at the nodes of a
    ``cells``-per-axis lattice (periodic on tori) and interpolates
    multilinearly, so each ``g_k`` is continuous and ``|eta| <= 1``.
    """

    d: float = 0.0
    seed: int = 0
    cells: int = 16

    kind = "random"

    def __post_init__(self):
        if self.d < 0:
            raise InvalidInput("d must be nonnegative")
        if self.cells < 1:
            raise InvalidInput("cells must be positive")

    @property
    def d_bound(self):
        return self.d

    def params(self):
        return {"d": self.d, "seed": self.seed, "cells": self.cells}

    def node_table(self, ks: np.ndarray) -> np.ndarray:
        """Node vectors, shape ``(len(ks), n_nodes, dim)``."""
        dim = self.space.dim
        per_axis = self.cells if self.space.periodic else self.cells + 1
        nodes = np.arange(per_axis**dim)
        ks = np.asarray(ks, dtype=np.int64)[:, None]
        comps = [hash_uniform(self.seed, ks, nodes[None, :], c) for c in range(dim)]
        return (2.0 * np.stack(comps, axis=-1) - 1.0) / math.sqrt(dim)

    def field(self, k, P) -> np.ndarray:
        space = self.space
        P = np.atleast_2d(as_points(space, P))
        n, dim = P.shape
        R = self.cells
        s = (P - space.lower) / space.extent * R
        if space.periodic:
            i0 = np.floor(s).astype(np.int64)
            t = s - i0
            i0 = np.mod(i0, R)
            per_axis = R
        else:
            i0 = np.clip(np.floor(s), 0, R - 1).astype(np.int64)
            t = np.clip(s - i0, 0.0, 1.0)
            per_axis = R + 1
        if np.ndim(k) == 0:
            table = self.node_table([int(k)])[0]
            k_idx = None
        else:
            ks = np.broadcast_to(np.asarray(k, dtype=np.int64), (n,))
            uniq, k_idx = np.unique(ks, return_inverse=True)
            table = self.node_table(uniq)
        weights = (1.0 - t, t)
        out = np.zeros((n, dim))
        for corner in itertools.product((0, 1), repeat=dim):
            flat = np.zeros(n, dtype=np.int64)
            w = np.ones(n)
            for ax, c in enumerate(corner):
                idx = i0[:, ax] + c
                if space.periodic and c:
                    idx[idx == R] = 0
                flat = flat * per_axis + idx
                w = w * weights[c][:, ax]
            vec = table[flat] if k_idx is None else table[k_idx, flat]
            out += w[:, None] * vec
        return out

    def _lift(self, k, P):
        out = self.base._forward(P)
        if self.d == 0.0:
            return out
        shape = out.shape
        return out + self.d * self.field(k, P).reshape(shape)


KINDS = {"constant": Constant, "drift": Drift, "oneshot": OneShot, "random": RandomBounded}


def method_from_dict(base: MapSystem, desc: dict) -> Method:
    desc = dict(desc)
    kind = desc.pop("kind", None)
    if kind not in KINDS:
        raise InvalidInput(f"unknown method kind {kind!r}; choose from {sorted(KINDS)}")
    if kind == "constant":
        g = desc.pop("g", None)
        bound = float(desc.pop("d_bound", 0.0))
        if desc:
            raise InvalidInput(f"unexpected keys for constant method: {sorted(desc)}")
        return Constant(base, None if g is None else make_map(g), bound)
    try:
        return KINDS[kind](base, **desc)
    except TypeError as exc:
        raise InvalidInput(f"bad parameters for {kind} method: {exc}") from None


def default_pool(base: MapSystem, d: float, seeds=(1, 2, 3), cells: int = 16) -> list[Method]:
    """Constant, drifts of +-d on each axis, a one-shot kick of size d, seeded random fields."""
    pool: list[Method] = [Constant(base)]
    for axis in range(base.space.dim):
        pool.append(Drift(base, d, axis))
        pool.append(Drift(base, -d, axis))
    offset = np.zeros(base.space.dim)
    offset[0] = d
    pool.append(OneShot(base, 0, tuple(offset)))
    pool.extend(RandomBounded(base, d, int(s), cells) for s in seeds)
    return pool


def method_step(m: Method, k: int, p) -> np.ndarray:
    out, clamped = m.apply(k, p)
    if np.any(clamped):
        raise OrbitExit(f"{m.label()} leaves the chart at step {k}", step=k)
    return out


def compose(m: Method, k: int, p, start: int = 0) -> np.ndarray:
    """``g_{start+k-1} o ... o g_start`` applied to ``p``; ``k = 0`` is the identity."""
    if k < 0:
        raise InvalidInput("composition length must be nonnegative")
    y = as_points(m.space, p)
    for j in range(start, start + k):
        y, clamped = m.apply(j, y)
        if np.any(clamped):
            raise OrbitExit(f"{m.label()} leaves the chart at step {j}", step=j)
    return y


def method_trajectory(m: Method, y0, window: tuple[int, int]) -> Trajectory:
    """``y_{k+1} = g_k(y_k)`` over ``window`` (which must contain 0) with ``y_0 = y0``."""
    a, b = window
    if a > b or not a <= 0 <= b:
        raise InvalidInput("trajectory window must satisfy n_from <= 0 <= n_to")
    if a < 0 and not m.is_invertible():
        raise UnsupportedOperation(f"backward trajectory needs invertible steps; {m.label()} has none")
    start, clamped = normalize(m.space, as_points(m.space, y0).reshape(m.space.dim))
    if clamped:
        raise OrbitExit("initial point lies outside the chart", step=0)
    exit_index = None
    back = []
    y = start
    for k in range(-1, a - 1, -1):
        y, out = m.apply_inverse(k, y)
        if out:
            exit_index = k
            break
        back.append(y)
    fwd = [start]
    y = start
    for k in range(0, b):
        y, out = m.apply(k, y)
        if out:
            exit_index = k + 1 if exit_index is None else exit_index
            break
        fwd.append(y)
    return Trajectory(m.space, -len(back), np.array(back[::-1] + fwd), (a, b), exit_index)


def verify_d_bound(m: Method, grid_resolution: int = 32, k_max: int = 8) -> float:
    """Largest ``dist(g_k(p), f(p))`` over a grid and ``k <= k_max``.

    Raises :class:`CertificationError` if it exceeds the stored bound.
    """
    P = grid(m.space, grid_resolution)
    f_lift = m.base._forward(P)
    worst, witness = 0.0, None
    for k in range(0, k_max + 1):
        g_lift = m._lift(k, P)
        if m.space.periodic:
            gaps = dist(m.space, normalize(m.space, g_lift)[0], normalize(m.space, f_lift)[0])
        else:
            gaps = np.linalg.norm(g_lift - f_lift, axis=-1)
        i = int(np.argmax(gaps))
        if gaps[i] > worst:
            worst, witness = float(gaps[i]), (k, P[i].copy())
    if worst > m.d_bound + CERT_MARGIN:
        raise CertificationError(
            f"{m.label()} moves {witness[1]} by {worst} at k={witness[0]}, above d_bound {m.d_bound}",
            witness=witness,
        )
    return worst
