"""Grid-scale semi-concavity constants and the gradient-control inequality.

A function h is c-semi-concave when (c/2)|x|^2 - h is convex, i.e. when
every second difference quotient is at most c.  For bounded h that is
c-semi-concave or c-semi-convex the gradient obeys

    sup |grad h|^2 <= 4 c sup |h|,

which :func:`check_gradient_bound` verifies on samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import HypothesisUnmet
from .grid import Field, Grid, SpaceTimeField, directions, gradient_fd, lipschitz_estimate, \
    second_difference_quotients, sup_norm

SLACK_FACTOR = 5.0
HYPOTHESIS_RTOL = 1e-9


@dataclass(frozen=True)
class Witness:
    index: tuple[int, ...]
    direction: tuple[int, ...]
    quotient: float


@dataclass
class SemiConcavityReport:
    c_upper: float
    c_lower: float
    witness_max: Witness
    witness_min: Witness
    gradient_bound_ok: bool | None = None
    gradient_bound_slack: float | None = None
    gradient_bound_ratio: float | None = None

    def to_dict(self) -> dict:
        return {
            "c_upper": self.c_upper,
            "c_lower": self.c_lower,
            "witness_max": {"index": list(self.witness_max.index),
                            "direction": list(self.witness_max.direction)},
            "witness_min": {"index": list(self.witness_min.index),
                            "direction": list(self.witness_min.direction)},
            "gradient_bound_ok": self.gradient_bound_ok,
            "gradient_bound_slack": self.gradient_bound_slack,
            "gradient_bound_ratio": self.gradient_bound_ratio,
        }


def _interior(q: np.ndarray, margin: int) -> np.ndarray:
    # NaN outside the window so nanargmax/nanargmin skip it
    out = np.full(q.shape, np.nan)
    window = tuple(slice(margin, m - margin) for m in q.shape)
    out[window] = q[window]
    return out


def estimate_constants(f: Field, c: float | None = None, margin: int = 0) -> SemiConcavityReport:
    """Extremes of the second difference quotients over nodes and directions.

    ``c_upper`` is the smallest c for which the samples are c-semi-concave at
    grid scale; ``-c_lower`` plays the same role for semi-convexity.  If ``c``
    is given the gradient bound is checked as well (when its hypothesis holds).
    ``margin`` > 0 ignores nodes within that many indices of the cell edge,
    for non-periodic samples whose wrap-around quotients are meaningless.
    """
    if margin and 2 * margin >= min(f.grid.n):
        raise ValueError("margin leaves no interior nodes")
    best_max = best_min = None
    for e in directions(f.grid.dim):
        q = second_difference_quotients(f, e)
        if margin:
            q = _interior(q, margin)
        i_max = np.unravel_index(int(np.nanargmax(q)), q.shape)
        i_min = np.unravel_index(int(np.nanargmin(q)), q.shape)
        if best_max is None or q[i_max] > best_max.quotient:
            best_max = Witness(tuple(int(i) for i in i_max), e, float(q[i_max]))
        if best_min is None or q[i_min] < best_min.quotient:
            best_min = Witness(tuple(int(i) for i in i_min), e, float(q[i_min]))
    report = SemiConcavityReport(best_max.quotient, best_min.quotient, best_max, best_min)
    if c is not None:
        try:
            ok, ratio = check_gradient_bound(f, c, report)
        except HypothesisUnmet:
            pass
        else:
            report.gradient_bound_ok = ok
            report.gradient_bound_ratio = ratio
            report.gradient_bound_slack = gradient_slack(f)
    return report


def gradient_slack(f: Field) -> float:
    """Relative discretization slack 5*h*Lip/||f||."""
    return SLACK_FACTOR * max(f.grid.h) * lipschitz_estimate(f) / max(sup_norm(f), 1e-12)


def check_gradient_bound(f: Field, c: float,
                         report: SemiConcavityReport | None = None) -> tuple[bool, float]:
    """Check max|grad f|^2 <= 4 c ||f|| (1 + slack) on the nodes.

    Returns ``(ok, ratio)`` with ``ratio = max|grad f|^2 / (4 c ||f||)``.
    Raises :class:`HypothesisUnmet` unless the samples are c-semi-concave or
    c-semi-convex at grid scale.
    """
    if c < 0:
        raise ValueError("c must be nonnegative")
    if report is None:
        report = estimate_constants(f)
    allowance = c + HYPOTHESIS_RTOL * max(1.0, abs(c))
    if not (report.c_upper <= allowance or -report.c_lower <= allowance):
        raise HypothesisUnmet(
            f"samples are neither {c:g}-semi-concave nor {c:g}-semi-convex "
            f"(c_upper={report.c_upper:g}, c_lower={report.c_lower:g})")
    grad2 = float(np.max(np.sum(gradient_fd(f) ** 2, axis=-1)))
    bound = 4.0 * c * sup_norm(f)
    if bound == 0.0:
        ratio = 0.0 if grad2 == 0.0 else float("inf")
    else:
        ratio = grad2 / bound
    return bool(ratio <= 1.0 + gradient_slack(f)), ratio


@dataclass
class ConstantsTrace:
    reports: list[SemiConcavityReport]
    running_max: np.ndarray = field(repr=False)

    @property
    def c_max(self) -> float:
        return float(self.running_max[-1])


def trace_constants(F: SpaceTimeField) -> ConstantsTrace:
    """One report per time slice, plus the running max of ``c_upper``."""
    reports = [estimate_constants(F.slice(k)) for k in range(len(F))]
    running = np.maximum.accumulate([r.c_upper for r in reports])
    return ConstantsTrace(reports, running)


def random_semiconcave_field(rng: np.random.Generator, grid: Grid, c: float,
                             max_kinks: int = 5) -> Field:
    """Bounded periodic samples that are exactly c'-semi-concave for some c' <= c.

    Builds (k/2) x^2 minus a convex piecewise-linear function with random
    concave kinks, plus the linear term that closes it up periodically
    (the kink weights sum to k * cell, so the slope also matches across
    the wrap).  Away from kinks every second difference equals k.
    """
    if grid.dim != 1:
        raise ValueError("the corpus generator is one-dimensional")
    ell = grid.lengths[0]
    kappa = c * rng.uniform(0.2, 1.0)
    m = int(rng.integers(1, max_kinks + 1))
    where = rng.uniform(0.0, ell, size=m)
    weights = kappa * ell * rng.dirichlet(np.ones(m))
    slope = (np.sum(weights * (ell - where)) - 0.5 * kappa * ell ** 2) / ell
    x = grid.axes()[0]
    ramps = np.maximum(x[:, None] - where[None, :], 0.0)
    values = 0.5 * kappa * x ** 2 - ramps @ weights + slope * x
    values += rng.uniform(-1.0, 1.0) * np.ptp(values)
    return Field(grid, values)
