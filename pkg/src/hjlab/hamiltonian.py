"""Hamiltonians H, initial conditions psi, and the transforms between them.

Both kinds of object are bundles of vectorized evaluation rules.  Every rule
takes an array whose trailing axis has length ``dim`` and evaluates over the
leading axes.  In one dimension the public methods also accept plain scalars
and arrays without the trailing axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import NotNormalized

Rule = Callable[[np.ndarray], np.ndarray]

TWO_PI = 2.0 * math.pi

# Scan resolution for sup over balls: 1D points, 2D points per axis.
SCAN_POINTS_1D = 10_001
SCAN_POINTS_2D = 300
INFLATION = 0.10


def _as_points(p, dim: int) -> tuple[np.ndarray, bool]:
    """Return ``(array with trailing axis dim, squeezed)``."""
    p = np.asarray(p, dtype=float)
    if dim == 1 and (p.ndim == 0 or p.shape[-1] != 1):
        return p[..., None], True
    if p.shape[-1] != dim:
        raise ValueError(f"expected trailing axis of length {dim}, got shape {p.shape}")
    return p, False


def _scalarize(out: np.ndarray):
    out = np.asarray(out)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class HamiltonianSpec:
    """A C^2 Hamiltonian H: R^D -> R with its gradient and Hessian rules.

    ``family`` is one of ``quadratic``, ``negsquare``, ``cosine`` or
    ``custom``; ``params`` are the family parameters.  Use the factory
    functions (:func:`quadratic`, :func:`neg_square`, :func:`cosine`,
    :func:`custom`) rather than the constructor.
    """

    family: str
    params: tuple[float, ...]
    dim: int
    value_rule: Rule = field(repr=False, compare=False)
    grad_rule: Rule = field(repr=False, compare=False)
    hess_rule: Rule = field(repr=False, compare=False)
    label: str = ""

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("dimension must be 1 or 2")

    def value(self, p):
        q, _ = _as_points(p, self.dim)
        return _scalarize(self.value_rule(q))

    def grad(self, p):
        q, squeezed = _as_points(p, self.dim)
        out = self.grad_rule(q)
        return _scalarize(out[..., 0] if squeezed else out)

    def hess(self, p):
        q, squeezed = _as_points(p, self.dim)
        out = self.hess_rule(q)
        return _scalarize(out[..., 0, 0] if squeezed else out)

    def to_string(self) -> str:
        """Config-string form, e.g. ``quadratic:0.5,0,0``."""
        if self.family == "custom":
            return f"custom:{self.label}"
        if not self.params:
            return self.family
        return self.family + ":" + ",".join(repr(float(v)) for v in self.params)

    def __str__(self) -> str:
        return self.label or self.to_string()


def quadratic(a: float, b: float = 0.0, c0: float = 0.0, dim: int = 1) -> HamiltonianSpec:
    """H(p) = a|p|^2 + b*(p_1 + ... + p_D) + c0."""
    a, b, c0 = float(a), float(b), float(c0)

    def value(p):
        return a * np.sum(p * p, axis=-1) + b * np.sum(p, axis=-1) + c0

    def grad(p):
        return 2.0 * a * p + b

    def hess(p):
        return np.broadcast_to(2.0 * a * np.eye(dim), p.shape[:-1] + (dim, dim)).copy()

    return HamiltonianSpec("quadratic", (a, b, c0), dim, value, grad, hess,
                           f"quadratic({a:g},{b:g},{c0:g})")


def neg_square(dim: int = 1) -> HamiltonianSpec:
    """H(p) = -|p|^2, the Hamiltonian of the non-uniqueness example."""

    def value(p):
        return -np.sum(p * p, axis=-1)

    def grad(p):
        return -2.0 * p

    def hess(p):
        return np.broadcast_to(-2.0 * np.eye(dim), p.shape[:-1] + (dim, dim)).copy()

    return HamiltonianSpec("negsquare", (), dim, value, grad, hess, "negsquare")


def cosine(amplitude: float = 1.0, k: float = 1.0, offset: float = 0.0,
           dim: int = 1) -> HamiltonianSpec:
    """H(p) = amplitude*cos(k*p_1) + offset; neither convex nor concave."""
    A, k, off = float(amplitude), float(k), float(offset)

    def value(p):
        return A * np.cos(k * p[..., 0]) + off

    def grad(p):
        out = np.zeros_like(p)
        out[..., 0] = -A * k * np.sin(k * p[..., 0])
        return out

    def hess(p):
        out = np.zeros(p.shape[:-1] + (dim, dim))
        out[..., 0, 0] = -A * k * k * np.cos(k * p[..., 0])
        return out

    params = (A, k) if off == 0.0 else (A, k, off)
    return HamiltonianSpec("cosine", params, dim, value, grad, hess,
                           f"cosine({A:g},{k:g}" + (f",{off:g})" if off else ")"))


def custom(value: Rule, grad: Rule, hess: Rule, dim: int = 1,
           label: str = "custom") -> HamiltonianSpec:
    """Wrap user rules.  All three must be vectorized over leading axes."""
    return HamiltonianSpec("custom", (), dim, value, grad, hess, label)


_FAMILIES = {
    "quadratic": (quadratic, 3),
    "negsquare": (neg_square, 0),
    "cosine": (cosine, 3),
}


def parse_hamiltonian(text: str, dim: int = 1) -> HamiltonianSpec:
    """Parse ``name[:p1,p2,...]`` into a builtin family."""
    name, _, rest = text.strip().partition(":")
    name = name.strip().lower().replace("_", "")
    aliases = {"quad": "quadratic", "neg_square": "negsquare", "cos": "cosine"}
    name = aliases.get(name, name)
    if name not in _FAMILIES:
        raise ValueError(f"unknown Hamiltonian family {name!r}; "
                         f"choose from {sorted(_FAMILIES)}")
    factory, max_params = _FAMILIES[name]
    params = [float(v) for v in rest.split(",") if v.strip()] if rest else []
    if len(params) > max_params:
        raise ValueError(f"{name} takes at most {max_params} parameters")
    return factory(*params, dim=dim)


class OpNormBound(NamedTuple):
    sup: float
    inflated: float


def _ball_samples(dim: int, radius: float, box: bool = False) -> np.ndarray:
    if radius == 0.0:
        return np.zeros((1, dim))
    if dim == 1:
        return np.linspace(-radius, radius, SCAN_POINTS_1D)[:, None]
    axis = np.linspace(-radius, radius, SCAN_POINTS_2D)
    P = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
    if not box:
        P = P[np.sum(P * P, axis=1) <= radius * radius * (1 + 1e-12)]
    return P


def hess_opnorm_sup(H: HamiltonianSpec, radius: float) -> OpNormBound:
    """Sup of the spectral norm of the Hessian over the closed ball |r| <= radius.

    Dense scan (10^4 points in 1D, 300x300 box masked to the ball in 2D);
    ``inflated`` adds a 10% safety margin over the scanned value.
    """
    radius = float(radius)
    if not math.isfinite(radius) or radius < 0:
        raise ValueError("radius must be finite and nonnegative")
    hs = H.hess_rule(_ball_samples(H.dim, radius))
    if H.dim == 1:
        norms = np.abs(hs[:, 0, 0])
    else:
        norms = np.max(np.abs(np.linalg.eigvalsh(hs)), axis=-1)
    s = float(np.max(norms))
    return OpNormBound(s, s * (1.0 + INFLATION))


def grad_component_sup(H: HamiltonianSpec, radius: float) -> np.ndarray:
    """Per-axis sup of |dH/dp_d| over the box |p|_inf <= radius (scanned)."""
    g = H.grad_rule(_ball_samples(H.dim, float(radius), box=True))
    return np.max(np.abs(g), axis=0)


def quadratic_remainder_constant(H: HamiltonianSpec, ell: float, tol: float = 1e-10) -> float:
    """Constant c(ell) with |H(p)| <= c(ell)|p|^2 on |p| <= ell.

    Requires H(0) = 0 and grad H(0) = 0; by Taylor's theorem half the Hessian
    bound over the ball suffices.
    """
    zero = np.zeros((1, H.dim))
    h0 = float(H.value_rule(zero)[0])
    g0 = float(np.max(np.abs(H.grad_rule(zero))))
    if abs(h0) > tol or g0 > tol:
        raise NotNormalized(f"H(0)={h0:g}, |grad H(0)|={g0:g}; apply normalize() first")
    return 0.5 * hess_opnorm_sup(H, ell).inflated


def normalize(H: HamiltonianSpec) -> HamiltonianSpec:
    """Return p -> H(p) - H(0) - grad H(0).p, which vanishes to first order at 0."""
    zero = np.zeros((1, H.dim))
    h0 = float(H.value_rule(zero)[0])
    g0 = np.asarray(H.grad_rule(zero)[0], dtype=float)
    if h0 == 0.0 and not np.any(g0):
        return H
    if H.family == "quadratic":
        return quadratic(H.params[0], 0.0, 0.0, dim=H.dim)
    if H.family == "cosine":
        A, k = H.params[0], H.params[1]
        return cosine(A, k, -A, dim=H.dim)

    def value(p):
        return H.value_rule(p) - h0 - p @ g0

    def grad(p):
        return H.grad_rule(p) - g0

    return custom(value, grad, H.hess_rule, H.dim, f"normalized({H})")


def reflect_hamiltonian(H: HamiltonianSpec) -> HamiltonianSpec:
    """p -> -H(-p)."""
    if H.family == "quadratic":
        a, b, c0 = H.params
        return quadratic(-a, b, -c0, dim=H.dim)
    if H.family == "negsquare":
        return quadratic(1.0, 0.0, 0.0, dim=H.dim)
    if H.family == "cosine":
        A, k = H.params[0], H.params[1]
        off = H.params[2] if len(H.params) > 2 else 0.0
        return cosine(-A, k, -off, dim=H.dim)

    def value(p):
        return -H.value_rule(-p)

    def grad(p):
        return H.grad_rule(-p)

    def hess(p):
        return -H.hess_rule(-p)

    return custom(value, grad, hess, H.dim, f"reflected({H})")


@dataclass(frozen=True)
class InitialCondition:
    """Periodic initial datum psi with declared Lipschitz constants.

    ``lip`` bounds |grad psi| and ``grad_lip`` bounds the Lipschitz constant
    of grad psi.  ``cell`` is the period along each axis.
    """

    value_rule: Rule = field(repr=False, compare=False)
    grad_rule: Rule = field(repr=False, compare=False)
    lip: float
    grad_lip: float
    cell: tuple[float, ...]
    label: str = "psi"

    @property
    def dim(self) -> int:
        return len(self.cell)

    def value(self, x):
        q, _ = _as_points(x, self.dim)
        return _scalarize(self.value_rule(q))

    def grad(self, x):
        q, squeezed = _as_points(x, self.dim)
        out = self.grad_rule(q)
        return _scalarize(out[..., 0] if squeezed else out)

    def negated(self) -> "InitialCondition":
        label = self.label[1:] if self.label.startswith("-") else "-" + self.label
        return InitialCondition(lambda x: -self.value_rule(x), lambda x: -self.grad_rule(x),
                                self.lip, self.grad_lip, self.cell, label)

    def shifted(self, offset: Sequence[float] | float) -> "InitialCondition":
        """x -> psi(x - offset)."""
        off = np.broadcast_to(np.asarray(offset, dtype=float), (self.dim,)).copy()
        return InitialCondition(lambda x: self.value_rule(x - off),
                                lambda x: self.grad_rule(x - off),
                                self.lip, self.grad_lip, self.cell,
                                f"{self.label}(x-{off.tolist()})")


def zero_psi(dim: int = 1, length: float = TWO_PI) -> InitialCondition:
    return InitialCondition(lambda x: np.zeros(x.shape[:-1]), lambda x: np.zeros_like(x),
                            0.0, 0.0, (length,) * dim, "zero")


def cos_psi(amplitude: float = 1.0, dim: int = 1) -> InitialCondition:
    """psi(x) = amplitude * sum_d cos(x_d) on the 2*pi torus."""
    A = float(amplitude)
    return InitialCondition(lambda x: A * np.sum(np.cos(x), axis=-1),
                            lambda x: -A * np.sin(x),
                            abs(A) * math.sqrt(dim), abs(A), (TWO_PI,) * dim,
                            "cos" if A == 1.0 else f"cos:{A:g}")


def sin_psi(amplitude: float = 1.0, dim: int = 1) -> InitialCondition:
    A = float(amplitude)
    return InitialCondition(lambda x: A * np.sum(np.sin(x), axis=-1),
                            lambda x: A * np.cos(x),
                            abs(A) * math.sqrt(dim), abs(A), (TWO_PI,) * dim,
                            "sin" if A == 1.0 else f"sin:{A:g}")


def trig_psi(amplitudes: Sequence[float], phases: Sequence[float] | None = None,
             dim: int = 1) -> InitialCondition:
    """psi(x) = sum_k a_k cos(k x + phi_k), summed over axes in 2D."""
    a = np.asarray(amplitudes, dtype=float)
    phi = np.zeros_like(a) if phases is None else np.asarray(phases, dtype=float)
    if phi.shape != a.shape:
        raise ValueError("need one phase per amplitude")
    k = np.arange(1, a.size + 1, dtype=float)

    def value(x):
        arg = k * x[..., None] + phi
        return np.sum(a * np.cos(arg), axis=(-2, -1))

    def grad(x):
        arg = k * x[..., None] + phi
        return np.sum(-a * k * np.sin(arg), axis=-1)

    lip = float(np.sum(k * np.abs(a))) * math.sqrt(dim)
    grad_lip = float(np.sum(k * k * np.abs(a)))
    text = ",".join(repr(float(v)) for v in np.concatenate([a, phi]))
    return InitialCondition(value, grad, lip, grad_lip, (TWO_PI,) * dim, f"trig:{text}")


def random_trig_psi(rng: np.random.Generator, modes: int = 3, max_amplitude: float = 0.3,
                    dim: int = 1) -> InitialCondition:
    """Random trigonometric polynomial with sup|psi| <= max_amplitude."""
    a = rng.uniform(0.0, max_amplitude / modes, size=modes)
    phi = rng.uniform(0.0, TWO_PI, size=modes)
    return trig_psi(a, phi, dim=dim)


def parse_psi(text: str, dim: int = 1, rng: np.random.Generator | None = None) -> InitialCondition:
    """Parse ``zero``, ``cos[:A]``, ``sin[:A]``, ``trig:a1,a2,a3[,phi1,phi2,phi3]``
    or ``trig-random`` (drawn from ``rng``)."""
    name, _, rest = text.strip().partition(":")
    name = name.strip().lower()
    vals = [float(v) for v in rest.split(",") if v.strip()] if rest else []
    if name == "zero":
        return zero_psi(dim)
    if name in ("cos", "sin"):
        return (cos_psi if name == "cos" else sin_psi)(vals[0] if vals else 1.0, dim=dim)
    if name == "trig":
        if not vals:
            raise ValueError("trig needs amplitudes")
        if len(vals) % 2 == 0 and len(vals) > 3:
            half = len(vals) // 2
            return trig_psi(vals[:half], vals[half:], dim=dim)
        return trig_psi(vals, dim=dim)
    if name == "trig-random":
        if rng is None:
            raise ValueError("trig-random needs a seeded generator")
        return random_trig_psi(rng, dim=dim)
    raise ValueError(f"unknown initial condition {text!r}")


def reflect(H: HamiltonianSpec, psi: InitialCondition) -> tuple[HamiltonianSpec, InitialCondition]:
    """(H, psi) -> (p -> -H(-p), -psi).  An involution on evaluation rules.

    If g solves the equation for (H, psi) then -g solves it for the reflected
    pair, which swaps semi-concavity for semi-convexity.
    """
    return reflect_hamiltonian(H), psi.negated()
