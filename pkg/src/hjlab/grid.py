"""Periodic uniform grids, sampled fields and finite-difference primitives.

The domain is the torus with cell ``[0, l_1) x ... x [0, l_D)``; node ``i``
sits at ``x_i = i*h``.  All differences wrap periodically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import GridMismatch, IndexOutOfRange, NonFinite


@dataclass(frozen=True)
class Grid:
    lengths: tuple[float, ...]
    n: tuple[int, ...]

    def __post_init__(self):
        lengths = tuple(float(v) for v in self.lengths)
        n = tuple(int(v) for v in self.n)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "n", n)
        if len(lengths) not in (1, 2) or len(n) != len(lengths):
            raise ValueError("grid dimension must be 1 or 2")
        if any(v <= 0 or not math.isfinite(v) for v in lengths):
            raise ValueError("cell lengths must be positive")
        if any(v < 8 for v in n):
            raise ValueError("need at least 8 points per axis")

    @classmethod
    def uniform(cls, n: int, length: float = 2.0 * math.pi, dim: int = 1) -> "Grid":
        return cls((length,) * dim, (n,) * dim)

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(l / m for l, m in zip(self.lengths, self.n))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    def axes(self) -> list[np.ndarray]:
        return [np.arange(m) * hd for m, hd in zip(self.n, self.h)]

    def nodes(self) -> np.ndarray:
        """Node coordinates, shape ``(*n, D)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "lengths": list(self.lengths), "n": list(self.n)}


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Field:
    """One time slice of a scalar function sampled on ``grid``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise NonFinite("field contains non-finite values")
        object.__setattr__(self, "values", v)

    def __add__(self, other):
        return Field(self.grid, self.values + _values_of(other, self.grid))

    def __sub__(self, other):
        return Field(self.grid, self.values - _values_of(other, self.grid))

    def __neg__(self):
        return Field(self.grid, -self.values)


def _values_of(other, grid: Grid):
    if isinstance(other, Field):
        if other.grid != grid:
            raise ValueError("fields live on different grids")
        return other.values
    return other


@dataclass(frozen=True)
class SpaceTimeField:
    """Slices of a function on a uniform time lattice ``t_0 < ... < t_K``.

    ``values`` has shape ``(K+1, *grid.n)``.  ``meta`` carries free-form run
    metadata and does not take part in equality.
    """

    grid: Grid
    times: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        t = _frozen(self.times)
        v = _frozen(self.values)
        if t.ndim != 1 or t.size == 0:
            raise ValueError("times must be a nonempty 1D array")
        if v.shape != (t.size,) + self.grid.shape:
            raise ValueError("need one slice per time")
        if t.size > 1:
            steps = np.diff(t)
            if np.any(steps <= 0):
                raise ValueError("times must be strictly increasing")
            if np.max(np.abs(steps - steps.mean())) > 1e-12 * max(abs(steps.mean()), t[-1]):
                raise ValueError("time steps must be uniform")
        if not np.all(np.isfinite(v)):
            raise NonFinite("space-time field contains non-finite values")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def dt(self) -> float:
        if self.times.size < 2:
            return 0.0
        return float((self.times[-1] - self.times[0]) / (self.times.size - 1))

    def __len__(self) -> int:
        return self.times.size

    def slice(self, k: int) -> Field:
        return Field(self.grid, self.values[k])

    @property
    def slices(self) -> list[Field]:
        return [self.slice(k) for k in range(len(self))]

    @property
    def final(self) -> Field:
        return self.slice(len(self) - 1)

    def __sub__(self, other: "SpaceTimeField") -> "SpaceTimeField":
        check_same_lattice(self, other)
        return SpaceTimeField(self.grid, self.times, self.values - other.values)


def check_same_lattice(a: SpaceTimeField, b: SpaceTimeField) -> None:
    if a.grid != b.grid:
        raise GridMismatch(f"grids differ: {a.grid} vs {b.grid}")
    if a.times.shape != b.times.shape or not np.allclose(a.times, b.times, rtol=0, atol=1e-12):
        raise GridMismatch("time lattices differ")


def sample(grid: Grid, rule: Callable[[np.ndarray], np.ndarray]) -> Field:
    """Evaluate ``rule`` at the nodes; the rule sees points of shape ``(*n, D)``."""
    values = np.asarray(rule(grid.nodes()), dtype=float)
    if values.shape != grid.shape:
        values = np.broadcast_to(values, grid.shape)
    if not np.all(np.isfinite(values)):
        raise NonFinite("sampled rule produced non-finite values")
    return Field(grid, values)


def forward_differences(f: Field) -> np.ndarray:
    """(f_{i+e_d} - f_i)/h_d per axis, shape ``(*n, D)``."""
    return np.stack([(np.roll(f.values, -1, axis=d) - f.values) / hd
                     for d, hd in enumerate(f.grid.h)], axis=-1)


def backward_differences(f: Field) -> np.ndarray:
    return np.stack([(f.values - np.roll(f.values, 1, axis=d)) / hd
                     for d, hd in enumerate(f.grid.h)], axis=-1)


def gradient_fd(f: Field) -> np.ndarray:
    """Centered periodic gradient, shape ``(*n, D)``."""
    return np.stack([(np.roll(f.values, -1, axis=d) - np.roll(f.values, 1, axis=d)) / (2 * hd)
                     for d, hd in enumerate(f.grid.h)], axis=-1)


def directions(dim: int) -> list[tuple[int, ...]]:
    """Index steps used for second differences: axes, plus both diagonals in 2D."""
    if dim == 1:
        return [(1,)]
    return [(1, 0), (0, 1), (1, 1), (1, -1)]


def _shift(values: np.ndarray, step: Sequence[int]) -> np.ndarray:
    """values at index i + step (periodic)."""
    return np.roll(values, tuple(-s for s in step), axis=tuple(range(len(step))))


def second_difference_quotients(f: Field, direction: int | Sequence[int] = 0) -> np.ndarray:
    """(f(x+he) + f(x-he) - 2f(x)) / |he|^2 along an index step ``e``.

    ``direction`` is an axis number or an integer index step such as
    ``(1, -1)``.
    """
    grid = f.grid
    if isinstance(direction, (int, np.integer)):
        step = [0] * grid.dim
        step[int(direction)] = 1
    else:
        step = [int(s) for s in direction]
    if len(step) != grid.dim or not any(step):
        raise ValueError(f"bad direction {direction!r}")
    disp2 = sum((s * hd) ** 2 for s, hd in zip(step, grid.h))
    plus = _shift(f.values, step)
    minus = _shift(f.values, [-s for s in step])
    return (plus + minus - 2.0 * f.values) / disp2


def sup_norm(f: Field) -> float:
    return float(np.max(np.abs(f.values)))


def lipschitz_estimate(f: Field) -> float:
    """Largest one-sided difference quotient over all axes."""
    return float(np.max(np.abs(forward_differences(f))))


def time_derivative_fd(F: SpaceTimeField, k: int) -> Field:
    """Centered time difference at interior index ``k``."""
    K = len(F) - 1
    if not 1 <= k <= K - 1:
        raise IndexOutOfRange(f"time index {k} is not interior to 0..{K}")
    return Field(F.grid, (F.values[k + 1] - F.values[k - 1]) / (2.0 * F.dt))


def wrap_displacement(d: np.ndarray, lengths: Sequence[float]) -> np.ndarray:
    """Reduce displacement vectors (trailing axis D) to the nearest periodic image."""
    L = np.asarray(lengths, dtype=float)
    return d - L * np.round(d / L)


def periodic_distance(x: np.ndarray, y: np.ndarray, lengths: Sequence[float]) -> np.ndarray:
    """Euclidean distance on the torus between point arrays with trailing axis D."""
    return np.linalg.norm(wrap_displacement(np.asarray(x) - np.asarray(y), lengths), axis=-1)


def interpolate(grid: Grid, values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Periodic (bi)linear interpolation of nodal ``values`` at ``points``.

    ``values`` may carry extra trailing axes (e.g. gradient components);
    ``points`` has trailing axis D.  The result has shape
    ``points.shape[:-1] + values.shape[D:]``.
    """
    pts = np.asarray(points, dtype=float)
    D = grid.dim
    idx0, frac = [], []
    for d in range(D):
        s = pts[..., d] / grid.h[d]
        fl = np.floor(s)
        idx0.append(fl.astype(np.int64) % grid.n[d])
        frac.append(s - fl)
    extra = values.ndim - D
    out = 0.0
    for corner in np.ndindex(*(2,) * D):
        weight = 1.0
        index = []
        for d, c in enumerate(corner):
            weight = weight * (frac[d] if c else 1.0 - frac[d])
            index.append((idx0[d] + c) % grid.n[d])
        w = np.asarray(weight)
        out = out + w.reshape(w.shape + (1,) * extra) * values[tuple(index)]
    return out
