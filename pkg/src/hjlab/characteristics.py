"""Characteristic flow X' = -grad H(grad g(t, X)) of a sampled solution.

Paths are stored unwrapped (as lifts to R^D) so that straight-line and
order checks need no modular bookkeeping; distances between points are
always taken on the torus.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFinite, NotMonotone
from .grid import Grid, SpaceTimeField, gradient_fd, interpolate, periodic_distance
from .hamiltonian import HamiltonianSpec, InitialCondition

RK4_BUDGET = 10.0


@dataclass(frozen=True)
class CharacteristicBundle:
    """Seeds, their trajectories X(t_k, x_j) and grad g sampled along them.

    ``paths`` and ``grad_along`` have shape ``(K+1, J, D)``; ``start_index``
    is the position of ``times[0]`` in the lattice of the source solution.
    """

    seeds: np.ndarray
    times: np.ndarray
    paths: np.ndarray
    grad_along: np.ndarray
    drift_constant: float
    grid: Grid
    start_index: int = 0

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0


def _as_seeds(seeds, dim: int) -> np.ndarray:
    s = np.asarray(seeds, dtype=float)
    if s.ndim == 1 and dim == 1:
        s = s[:, None]
    if s.ndim != 2 or s.shape[1] != dim:
        raise ValueError(f"seeds must have shape (J, {dim})")
    return s


def uniform_seeds(grid: Grid, count: int) -> np.ndarray:
    """``count`` equally spaced seeds along each axis, shape ``(count**D, D)``."""
    axes = [np.arange(count) * (l / count) for l in grid.lengths]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, grid.dim)


def velocity_lipschitz(grid: Grid, velocity: np.ndarray) -> float:
    """Max one-sided difference quotient of a nodal vector field."""
    worst = 0.0
    for d, hd in enumerate(grid.h):
        jump = np.linalg.norm(np.roll(velocity, -1, axis=d) - velocity, axis=-1)
        worst = max(worst, float(np.max(jump)) / hd)
    return worst


def integrate_flow(g: SpaceTimeField, H: HamiltonianSpec, seeds, start_index: int = 0) -> CharacteristicBundle:
    """Classical RK4 on g's time lattice, starting from ``times[start_index]``.

    The velocity at an arbitrary (t, x) is -grad H applied to the gradient of
    g, itself obtained by centered differences on the stored slices,
    interpolated linearly in time and (bi)linearly in space.
    """
    grid = g.grid
    x = _as_seeds(seeds, grid.dim)
    times = g.times[start_index:]
    dt = g.dt
    grads = [gradient_fd(g.slice(k)) for k in range(len(g))]
    drift = max(velocity_lipschitz(grid, -H.grad_rule(G)) for G in grads[start_index:])

    def velocity(k, theta, pts):
        G = interpolate(grid, grads[k], pts)
        if theta:
            G = (1 - theta) * G + theta * interpolate(grid, grads[k + 1], pts)
        return -H.grad_rule(G)

    paths = np.empty((times.size,) + x.shape)
    along = np.empty_like(paths)
    paths[0] = x
    along[0] = interpolate(grid, grads[start_index], x)
    for j, k in enumerate(range(start_index, len(g) - 1)):
        X = paths[j]
        k1 = velocity(k, 0.0, X)
        k2 = velocity(k, 0.5, X + 0.5 * dt * k1)
        k3 = velocity(k, 0.5, X + 0.5 * dt * k2)
        k4 = velocity(k, 1.0, X + dt * k3)
        paths[j + 1] = X + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        along[j + 1] = interpolate(grid, grads[k + 1], paths[j + 1])
        if not np.all(np.isfinite(paths[j + 1])):
            raise NonFinite(f"trajectory overflow at t={times[j + 1]:g}")
    return CharacteristicBundle(x, times, paths, along, drift, grid, start_index)


@dataclass
class BiLipschitzReport:
    passed: bool
    worst_margin: float
    tol: float
    c: float
    order_preserved: bool | None
    worst_pair: tuple[int, int] = field(default=(0, 0))
    worst_time: float = 0.0

    def to_dict(self) -> dict:
        return {"passed": self.passed, "worst_margin": self.worst_margin, "tol": self.tol,
                "c": self.c, "order_preserved": self.order_preserved,
                "worst_pair": list(self.worst_pair), "worst_time": self.worst_time}


def seed_order_preserved(bundle: CharacteristicBundle) -> bool:
    """1D: the images of sorted seeds stay strictly increasing within one period.

    Repeated seeds must keep identical images.
    """
    if bundle.grid.dim != 1:
        raise ValueError("order preservation is a one-dimensional check")
    order = np.argsort(bundle.seeds[:, 0], kind="stable")
    same = np.diff(bundle.seeds[order, 0]) == 0
    P = bundle.paths[:, order, 0]
    gaps = np.diff(P, axis=1)
    period = bundle.grid.lengths[0]
    return bool(np.all(np.where(same, gaps == 0, gaps > 0)) and np.all(P[:, -1] - P[:, 0] < period))


def check_bilipschitz(bundle: CharacteristicBundle) -> BiLipschitzReport:
    """Check e^{-ct} d(x,y) - tol <= d(X^t x, X^t y) <= e^{ct} d(x,y) + tol.

    c is the measured drift constant and tol = 10 dt^2 (1+c) T.  The
    reported margin is the smallest slack of either inequality before tol.
    """
    J = bundle.seeds.shape[0]
    if J < 2:
        raise ValueError("need at least two seeds")
    c = bundle.drift_constant
    t = bundle.times - bundle.times[0]
    T = float(t[-1])
    tol = RK4_BUDGET * bundle.dt ** 2 * (1 + c) * T
    a, b = np.triu_indices(J, k=1)
    L = bundle.grid.lengths
    d0 = periodic_distance(bundle.seeds[a], bundle.seeds[b], L)
    dk = periodic_distance(bundle.paths[:, a], bundle.paths[:, b], L)
    grow = np.exp(c * t)[:, None]
    margin = np.minimum(dk - d0 / grow, grow * d0 - dk)
    k, m = np.unravel_index(int(np.argmin(margin)), margin.shape)
    worst = float(margin[k, m])
    order = seed_order_preserved(bundle) if bundle.grid.dim == 1 else None
    passed = worst >= -tol and order is not False
    return BiLipschitzReport(passed, worst, tol, c, order, (int(a[m]), int(b[m])), float(bundle.times[k]))


def inverse_flow(bundle: CharacteristicBundle, t: float, y: float) -> float:
    """(X^t)^{-1}(y) by monotone piecewise-linear inversion through the seed images.

    ``t`` is snapped to the nearest lattice time (with a warning if it is not
    on the lattice).  Raises :class:`NotMonotone` past the horizon.
    """
    if bundle.grid.dim != 1:
        raise ValueError("inverse_flow is one-dimensional")
    k = int(np.argmin(np.abs(bundle.times - t)))
    if abs(bundle.times[k] - t) > 1e-9 * max(1.0, abs(t)):
        warnings.warn(f"t={t:g} is not on the time lattice; using t={bundle.times[k]:g}",
                      stacklevel=2)
    period = bundle.grid.lengths[0]
    order = np.argsort(bundle.seeds[:, 0], kind="stable")
    s = bundle.seeds[order, 0]
    z = bundle.paths[k, order, 0]
    if not (np.all(np.diff(z) > 0) and z[-1] - z[0] < period):
        raise NotMonotone(f"seed images are not increasing at t={bundle.times[k]:g}")
    # one periodic copy so every y in [z_0, z_0 + period) is bracketed
    zz = np.append(z, z[0] + period)
    ss = np.append(s, s[0] + period)
    shift = math.floor((y - z[0]) / period) * period
    return float(np.interp(y - shift, zz, ss) + shift)


def _along(bundle: CharacteristicBundle, g: SpaceTimeField) -> np.ndarray:
    k0 = bundle.start_index
    if len(g) - k0 != bundle.times.size or not np.allclose(g.times[k0:], bundle.times, atol=1e-12):
        raise ValueError("solution lattice does not match the bundle")
    return np.stack([interpolate(g.grid, gradient_fd(g.slice(k0 + j)), bundle.paths[j])
                     for j in range(bundle.times.size)])


def check_gradient_constancy(bundle: CharacteristicBundle, g: SpaceTimeField,
                             psi: InitialCondition) -> float:
    """sup over seeds and times of |grad g(t, X(t,x)) - grad psi(x)|."""
    along = _along(bundle, g)
    dev = np.linalg.norm(along - psi.grad_rule(bundle.seeds)[None], axis=-1)
    return float(np.max(dev))


def straight_line_residual(bundle: CharacteristicBundle, H: HamiltonianSpec,
                           psi: InitialCondition) -> float:
    """sup over seeds and times of d(X(t,x), x - t grad H(grad psi(x)))."""
    t = (bundle.times - bundle.times[0])[:, None, None]
    speed = H.grad_rule(psi.grad_rule(bundle.seeds))
    predicted = bundle.seeds[None] - t * speed[None]
    return float(np.max(periodic_distance(bundle.paths, predicted, bundle.grid.lengths)))
