"""Executable form of the weak-strong uniqueness argument.

Given a candidate weak solution f and the regular solution g this module
checks the three defining conditions on f, measures the constants of the
difference-control inequality along characteristics, and assembles a
discrete Gronwall certificate bounding sup |f - g|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .characteristics import CharacteristicBundle
from .errors import ConeLeavesCell, GridMismatch, HypothesisUnmet
from .grid import Field, Grid, SpaceTimeField, backward_differences, check_same_lattice, \
    forward_differences, gradient_fd, interpolate, lipschitz_estimate, periodic_distance, \
    sample, sup_norm
from .hamiltonian import HamiltonianSpec, InitialCondition, hess_opnorm_sup
from .semiconcavity import estimate_constants, trace_constants

KINK_THRESHOLD = 0.2
ROUNDOFF = 1e-8
MAX_EXCLUDED = 0.05
LEMMA_BUDGET = 10.0
DEFAULT_RESIDUAL_TOL = 0.05


@dataclass
class WeakSolutionReport:
    initial_match: float
    residual_sup: float
    excluded_fraction: float
    semiconcavity_max: float
    semiconcavity_threshold: float
    initial_ok: bool
    equation_ok: bool | None  # None: too many excluded nodes to decide
    semiconcave_ok: bool

    @property
    def verdicts(self) -> tuple[bool, bool | None, bool]:
        return self.initial_ok, self.equation_ok, self.semiconcave_ok

    @property
    def passed(self) -> bool:
        return self.initial_ok and self.equation_ok is True and self.semiconcave_ok

    def to_dict(self) -> dict:
        return {
            "initial_match": self.initial_match,
            "residual_sup": self.residual_sup,
            "excluded_fraction": self.excluded_fraction,
            "semiconcavity_max": self.semiconcavity_max,
            "semiconcavity_threshold": self.semiconcavity_threshold,
            "verdicts": {"initial": self.initial_ok,
                         "equation": "inconclusive" if self.equation_ok is None else self.equation_ok,
                         "semiconcave": self.semiconcave_ok},
        }


def kink_mask(F: SpaceTimeField, k: int, lip_t: float) -> np.ndarray:
    """Nodes of slice ``k`` excluded from the residual check.

    A node is a kink when its one-sided slopes disagree by more than 20% of
    the slice's Lipschitz constant (in space) or of the run's time Lipschitz
    constant (in time).  An axis neighbour of a kink is excluded too unless
    its own slopes agree to roundoff.
    """
    f = F.slice(k)
    lip = lipschitz_estimate(f)
    jump = np.abs(forward_differences(f) - backward_differences(f))
    if lip > 0:
        mask = np.any(jump > KINK_THRESHOLD * lip, axis=-1)
        # a kink inside a cell also spoils the centered stencil of the other
        # end node, whose slopes then disagree by a smaller, nonzero amount
        bent = np.any(jump > ROUNDOFF * lip, axis=-1)
        near = np.zeros_like(mask)
        for d in range(f.grid.dim):
            near |= np.roll(mask, 1, axis=d) | np.roll(mask, -1, axis=d)
        mask |= near & bent
    else:
        mask = np.zeros(f.values.shape, bool)
    if lip_t > 0:
        dt = F.dt
        jump_t = np.abs((F.values[k + 1] - 2 * F.values[k] + F.values[k - 1]) / dt)
        mask |= jump_t > KINK_THRESHOLD * lip_t
    return mask


def check_weak_solution(f: SpaceTimeField, H: HamiltonianSpec, psi: InitialCondition,
                        c_threshold: float | None = None,
                        residual_tol: float = DEFAULT_RESIDUAL_TOL,
                        initial_tol: float = 1e-9) -> WeakSolutionReport:
    """Check the three conditions: f(0) = psi, the equation at almost every
    node, and a uniform-in-time semi-concavity constant.

    Kink cells are excluded from the residual (the equation is only required
    almost everywhere); their share is reported.  With ``c_threshold=None``
    condition (3) passes iff the running max of c_upper stays below ten times
    the t=0 constant plus one.
    """
    grid = f.grid
    if not np.allclose(grid.lengths, psi.cell, rtol=1e-12, atol=0):
        raise GridMismatch(f"grid cell {grid.lengths} does not match psi cell {psi.cell}")
    psi0 = sample(grid, psi.value_rule)
    initial_match = sup_norm(f.slice(0) - psi0)
    initial_ok = initial_match <= initial_tol * (1.0 + sup_norm(psi0))

    K = len(f) - 1
    residual_sup, excluded, total = 0.0, 0, 0
    if K >= 2:
        lip_t = float(np.max(np.abs(np.diff(f.values, axis=0)))) / f.dt
        for k in range(1, K):
            fk = f.slice(k)
            dtf = (f.values[k + 1] - f.values[k - 1]) / (2 * f.dt)
            res = np.abs(dtf - H.value_rule(gradient_fd(fk)))
            mask = kink_mask(f, k, lip_t)
            excluded += int(mask.sum())
            total += mask.size
            keep = res[~mask]
            if keep.size:
                residual_sup = max(residual_sup, float(keep.max()))
    excluded_fraction = excluded / total if total else 1.0
    if total == 0 or excluded_fraction >= MAX_EXCLUDED:
        equation_ok = None
    else:
        equation_ok = residual_sup <= residual_tol

    trace = trace_constants(f)
    c_max = trace.c_max
    if c_threshold is None:
        c_threshold = 10.0 * max(trace.reports[0].c_upper, 0.0) + 1.0
    semiconcave_ok = bool(math.isfinite(c_max) and c_max <= c_threshold)
    return WeakSolutionReport(initial_match, residual_sup, excluded_fraction, c_max, c_threshold,
                              bool(initial_ok), equation_ok, semiconcave_ok)


def galilean_reparametrize(f: SpaceTimeField, H: HamiltonianSpec) -> SpaceTimeField:
    """v(t,x) = f(t, x - t grad H(0)) - t H(0).

    v solves the equation for the normalized Hamiltonian
    p -> H(p) - H(0) - grad H(0).p.  The shift is resampled by periodic
    linear interpolation.
    """
    grid = f.grid
    if grid.dim != 1:
        raise ValueError("galilean_reparametrize is one-dimensional")
    zero = np.zeros((1, 1))
    h0 = float(H.value_rule(zero)[0])
    a = float(H.grad_rule(zero)[0, 0])
    x = grid.axes()[0]
    period = grid.lengths[0]
    out = np.empty_like(f.values)
    for k, t in enumerate(f.times):
        out[k] = np.interp(x - t * a, x, f.values[k], period=period) - t * h0
    return SpaceTimeField(grid, f.times, out, dict(f.meta, reparametrized=True))


def _max_lipschitz(*fields: SpaceTimeField) -> float:
    return max(lipschitz_estimate(F.slice(k)) for F in fields for k in range(len(F)))


def squared_gradient(u: Field) -> np.ndarray:
    """|grad u|^2 from one-sided differences, averaged over the two sides.

    At a kink the centered difference cancels; the mean of the one-sided
    squares keeps the almost-everywhere value.
    """
    fwd = forward_differences(u)
    bwd = backward_differences(u)
    return np.sum(0.5 * (fwd ** 2 + bwd ** 2), axis=-1)


@dataclass
class DifferenceControlReport:
    """Both sides of |u(t,X^t x)| <= c int_0^t |grad u(s,X^s x)|^2 ds per seed and time.

    ``integral`` is the time integral without the constant, so the sides can
    be compared with either the raw (``c_raw``) or inflated (``c``) constant.
    """

    c: float
    c_raw: float
    lip: float
    tol: float
    times: np.ndarray = field(repr=False)
    lhs: np.ndarray = field(repr=False)
    integral: np.ndarray = field(repr=False)
    worst_violation: float
    passed: bool
    strict_passed: bool

    @property
    def rhs(self) -> np.ndarray:
        return self.c * self.integral

    def to_dict(self) -> dict:
        return {"c": self.c, "c_raw": self.c_raw, "lip": self.lip, "tol": self.tol,
                "worst_violation": self.worst_violation, "passed": self.passed,
                "strict_passed": self.strict_passed,
                "max_lhs": float(self.lhs.max()), "max_rhs": float(self.rhs.max())}


def difference_control(f: SpaceTimeField, g: SpaceTimeField, bundle: CharacteristicBundle,
                       H: HamiltonianSpec) -> DifferenceControlReport:
    """Evaluate the difference-control inequality along every seed path.

    c = 1/2 sup_{|r| <= 2L} |Hess H(r)|_op with L the largest Lipschitz
    constant of any slice of f or g.  Time integrals use the trapezoid rule;
    u and |grad u|^2 are interpolated linearly at path points.  ``passed``
    allows the slack 10 (h + dt)(1 + c) T; ``strict_passed`` allows none.
    """
    check_same_lattice(f, g)
    k0 = bundle.start_index
    if len(f) - k0 != bundle.times.size:
        raise GridMismatch("bundle lattice does not match the solutions")
    grid = f.grid
    lip = _max_lipschitz(f, g)
    bound = hess_opnorm_sup(H, 2 * lip)
    c_raw, c = 0.5 * bound.sup, 0.5 * bound.inflated
    lhs = np.empty(bundle.paths.shape[:2])
    grad2 = np.empty_like(lhs)
    for j in range(bundle.times.size):
        u = f.slice(k0 + j) - g.slice(k0 + j)
        pts = bundle.paths[j]
        lhs[j] = np.abs(interpolate(grid, u.values, pts))
        grad2[j] = interpolate(grid, squared_gradient(u), pts)
    dt = bundle.dt
    integral = np.concatenate([np.zeros((1, lhs.shape[1])),
                               np.cumsum(0.5 * dt * (grad2[1:] + grad2[:-1]), axis=0)])
    T = float(bundle.times[-1] - bundle.times[0])
    tol = LEMMA_BUDGET * (max(grid.h) + dt) * (1 + c) * T
    violation = float(np.max(lhs - c * integral))
    return DifferenceControlReport(c, c_raw, lip, tol, bundle.times, lhs, integral, violation,
                                   violation <= tol, violation <= 0.0)


@dataclass
class UniquenessCertificate:
    """Discrete Gronwall certificate for u = f - g.

    ``m[k] = sup|u(t_k)|``; the verdict holds iff
    m[k] <= c_prime * dt * sum_{j<k} m[j] + eps for every k, in which case
    sup_k m[k] <= eps * exp(c_prime * T) = ``certified_bound``.
    """

    L: float
    lip_fg: float
    c: float
    c_u: float
    c_prime: float
    eps: float
    times: np.ndarray = field(repr=False)
    m: np.ndarray = field(repr=False)
    envelope: np.ndarray = field(repr=False)
    c_u_slices: np.ndarray = field(repr=False)
    verdict: bool
    certified_bound: float

    def to_dict(self) -> dict:
        return {"L": self.L, "lip_fg": self.lip_fg, "c": self.c, "c_u": self.c_u,
                "c_prime": self.c_prime, "eps": self.eps, "verdict": self.verdict,
                "certified_bound": self.certified_bound,
                "times": self.times.tolist(), "m": self.m.tolist(),
                "envelope": self.envelope.tolist(), "c_u_slices": self.c_u_slices.tolist()}


def gronwall_certificate(f: SpaceTimeField, g: SpaceTimeField, H: HamiltonianSpec, eps: float,
                         c_u_max: float | None = None) -> UniquenessCertificate:
    """Certify sup|f - g| <= eps * exp(c' T) with c' = 4 c c_u.

    c is the difference-control constant, c_u the measured semi-concavity
    constant of u = f - g.  Raises :class:`HypothesisUnmet` when c_u is not
    finite at grid scale: above ``c_u_max`` if given, otherwise when a single
    cell carries a slope jump c_u*h larger than 20% of the Lipschitz scale
    max(L_fg, 1) -- the signature of a convex kink.
    """
    check_same_lattice(f, g)
    grid = f.grid
    lip_fg = _max_lipschitz(f, g)
    L = max(lipschitz_estimate(Field(grid, gradient_fd(g.slice(k))[..., d]))
            for k in range(len(g)) for d in range(grid.dim))
    c = 0.5 * hess_opnorm_sup(H, 2 * lip_fg).inflated
    u = f - g
    c_u_slices = np.array([max(estimate_constants(u.slice(k)).c_upper, 0.0) for k in range(len(u))])
    c_u = float(c_u_slices.max())
    if c_u_max is not None:
        if c_u > c_u_max:
            raise HypothesisUnmet(f"semi-concavity constant of f-g is {c_u:g} > {c_u_max:g}")
    elif c_u * min(grid.h) > KINK_THRESHOLD * max(lip_fg, 1.0):
        raise HypothesisUnmet(
            f"f-g has a convex kink: second differences reach {c_u:g} ~ 1/h; "
            "no finite semi-concavity constant")
    m = np.array([sup_norm(u.slice(k)) for k in range(len(u))])
    if eps < m[0]:
        raise ValueError(f"eps={eps:g} is below the initial mismatch {m[0]:g}")
    c_prime = 4.0 * c * c_u
    dt = f.dt
    partial = np.concatenate([[0.0], np.cumsum(m[:-1])]) * dt
    verdict = bool(np.all(m <= c_prime * partial + eps))
    t = f.times - f.times[0]
    envelope = eps * np.exp(c_prime * t)
    return UniquenessCertificate(L, lip_fg, c, c_u, c_prime, float(eps), f.times, m, envelope,
                                 c_u_slices, verdict, float(envelope[-1]))


def counterexample_field(grid: Grid, times) -> SpaceTimeField:
    """f(t,x) = |x| - t inside the cone |x| <= t, 0 outside.

    |x| is the periodic distance to the node x = 0.  The field solves
    d_t f + |grad f|^2 = 0 almost everywhere with f(0) = 0, yet differs
    from the viscosity solution 0.
    """
    times = np.asarray(times, dtype=float)
    half = 0.5 * min(grid.lengths)
    if times.size and times.max() >= half:
        raise ConeLeavesCell(f"max time {times.max():g} reaches the half cell {half:g}")
    r = periodic_distance(grid.nodes(), np.zeros(grid.dim), grid.lengths)
    values = np.stack([np.minimum(r - t, 0.0) for t in times])
    return SpaceTimeField(grid, times, values, {"field": "counterexample"})
