"""Two independent routes to the regular solution of  d_t g - H(grad g) = 0.

* :func:`solve_lax_friedrichs` -- explicit monotone Lax-Friedrichs marching,
  valid for any time (it converges to the viscosity solution);
* :func:`solve_characteristic_exact` -- straight characteristics plus value
  transport, exact up to resampling but only before the classical horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import Blowup, CFLViolation, HorizonExceeded
from .grid import Field, Grid, SpaceTimeField, backward_differences, forward_differences, \
    lipschitz_estimate, sample
from .hamiltonian import HamiltonianSpec, InitialCondition, grad_component_sup

BLOWUP = 1e12
HORIZON_CAP = 10.0
SIGMA_SAFETY = 1.1

Sigma = Union[str, float, Sequence[float]]


@dataclass(frozen=True)
class SchemeConfig:
    """Lax-Friedrichs parameters.

    ``sigma`` is the per-axis dissipation or ``"auto"``.  ``dt`` may be given
    explicitly; otherwise the largest step allowed by ``cfl`` is used,
    shrunk so that it divides ``T``.
    """

    T: float
    cfl: float = 0.4
    sigma: Sigma = "auto"
    dt: float | None = None

    def __post_init__(self):
        if not (0 < self.cfl <= 1):
            raise ValueError("cfl must lie in (0, 1]")
        if not self.T > 0:
            raise ValueError("horizon T must be positive")


def dissipation(H: HamiltonianSpec, psi: InitialCondition, grid: Grid, cfg: SchemeConfig) -> np.ndarray:
    """Per-axis dissipation coefficients.

    ``auto`` takes 1.1 times the sup of |dH/dp_d| over |p|_inf <= Lip(psi)+1,
    with Lip(psi) measured on the grid.
    """
    if isinstance(cfg.sigma, str):
        if cfg.sigma != "auto":
            raise ValueError(f"sigma must be numeric or 'auto', got {cfg.sigma!r}")
        radius = lipschitz_estimate(sample(grid, psi.value_rule)) + 1.0
        return SIGMA_SAFETY * grad_component_sup(H, radius)
    sigma = np.broadcast_to(np.asarray(cfg.sigma, dtype=float), (grid.dim,)).copy()
    if np.any(sigma < 0):
        raise ValueError("dissipation must be nonnegative")
    return sigma


def _cfl_ok(grid: Grid, sigma: np.ndarray, dt: float, cfl: float) -> bool:
    D = grid.dim
    return all(cfl * hd >= dt * s * D * 2 * (1 - 1e-12) for hd, s in zip(grid.h, sigma))


def time_lattice(H: HamiltonianSpec, psi: InitialCondition, grid: Grid,
                 cfg: SchemeConfig) -> tuple[np.ndarray, float, np.ndarray]:
    """Return ``(times, dt, sigma)`` for a Lax-Friedrichs run."""
    sigma = dissipation(H, psi, grid, cfg)
    if cfg.dt is not None:
        steps = max(1, round(cfg.T / cfg.dt))
        dt = cfg.T / steps
        if not _cfl_ok(grid, sigma, dt, cfg.cfl):
            raise CFLViolation(
                f"dt={dt:g} too large: need cfl*h_d >= 2*D*sigma_d*dt "
                f"(h={grid.h}, sigma={sigma.tolist()}, cfl={cfg.cfl})")
    else:
        limits = [cfg.cfl * hd / (2 * grid.dim * s) for hd, s in zip(grid.h, sigma) if s > 0]
        dt_max = min(limits) if limits else cfg.cfl * min(grid.h)
        steps = max(1, math.ceil(cfg.T / dt_max - 1e-9))
        dt = cfg.T / steps
    return np.arange(steps + 1) * dt, dt, sigma


def numerical_hamiltonian(H: HamiltonianSpec, p_minus: np.ndarray, p_plus: np.ndarray,
                          sigma: np.ndarray) -> np.ndarray:
    """H((p- + p+)/2) + sum_d sigma_d/2 (p+_d - p-_d)."""
    return H.value_rule(0.5 * (p_minus + p_plus)) + np.sum(0.5 * sigma * (p_plus - p_minus), axis=-1)


def lax_friedrichs_step(H: HamiltonianSpec, values: np.ndarray, grid: Grid, dt: float,
                        sigma: np.ndarray) -> np.ndarray:
    f = Field(grid, values)
    return values + dt * numerical_hamiltonian(H, backward_differences(f), forward_differences(f), sigma)


def solve_lax_friedrichs(H: HamiltonianSpec, psi: InitialCondition, grid: Grid,
                         cfg: SchemeConfig) -> SpaceTimeField:
    """March g^{n+1} = g^n + dt * Hhat(D-g^n, D+g^n) from g^0 = psi to cfg.T.

    The result's ``meta`` records the scheme, dissipation and step.
    """
    times, dt, sigma = time_lattice(H, psi, grid, cfg)
    out = np.empty((times.size,) + grid.shape)
    out[0] = sample(grid, psi.value_rule).values
    for k in range(times.size - 1):
        out[k + 1] = lax_friedrichs_step(H, out[k], grid, dt, sigma)
        if not np.all(np.abs(out[k + 1]) <= BLOWUP):
            raise Blowup(f"solution exceeded {BLOWUP:g} at t={times[k + 1]:g}")
    meta = {"scheme": "lax-friedrichs", "sigma": sigma.tolist(), "dt": dt, "cfl": cfg.cfl,
            "steps": times.size - 1, "hamiltonian": str(H), "psi": psi.label}
    return SpaceTimeField(grid, times, out, meta)


def _require_1d(grid: Grid, what: str) -> None:
    if grid.dim != 1:
        raise ValueError(f"{what} is only available in one dimension")


def _foot_images(H: HamiltonianSpec, psi: InitialCondition, x: np.ndarray, t: float):
    p = psi.grad_rule(x[:, None])
    return x - t * H.grad_rule(p)[:, 0], p


def _images_increasing(y: np.ndarray, period: float) -> bool:
    gaps = np.append(np.diff(y), y[0] + period - y[-1])
    return bool(np.all(gaps > 0))


def solve_characteristic_exact(H: HamiltonianSpec, psi: InitialCondition, grid: Grid,
                               t: float) -> Field:
    """Exact solution at time ``t`` by transporting values along characteristics.

    Foot point x moves to y = x - t grad H(grad psi(x)) carrying the value
    psi(x) + t (H(p) - p.grad H(p)) with p = grad psi(x); the scattered pairs
    are resampled on the nodes by periodic piecewise-linear interpolation.
    """
    _require_1d(grid, "the characteristic oracle")
    x = grid.axes()[0]
    if t == 0:
        return sample(grid, psi.value_rule)
    y, p = _foot_images(H, psi, x, t)
    period = grid.lengths[0]
    if not _images_increasing(y, period):
        raise HorizonExceeded(f"characteristics cross before t={t:g}")
    v = psi.value_rule(x[:, None]) + t * (H.value_rule(p) - np.sum(p * H.grad_rule(p), axis=-1))
    return Field(grid, np.interp(x, y, v, period=period))


def characteristic_solution(H: HamiltonianSpec, psi: InitialCondition, grid: Grid,
                            times: Sequence[float]) -> SpaceTimeField:
    """Stack :func:`solve_characteristic_exact` over a time lattice."""
    times = np.asarray(times, dtype=float)
    values = np.stack([solve_characteristic_exact(H, psi, grid, float(t)).values for t in times])
    meta = {"scheme": "characteristic-exact", "hamiltonian": str(H), "psi": psi.label}
    return SpaceTimeField(grid, times, values, meta)


def classical_horizon(H: HamiltonianSpec, psi: InitialCondition, grid: Grid,
                      rtol: float = 1e-6, cap: float = HORIZON_CAP) -> float:
    """Largest t <= cap for which the foot-point map stays increasing on the nodes."""
    _require_1d(grid, "the classical horizon")
    x = grid.axes()[0]
    period = grid.lengths[0]

    def monotone(t):
        return _images_increasing(_foot_images(H, psi, x, t)[0], period)

    if monotone(cap):
        return cap
    lo, hi = 0.0, cap
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if monotone(mid):
            lo = mid
        else:
            hi = mid
    return lo
