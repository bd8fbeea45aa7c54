import math
import warnings

import numpy as np
import pytest

from hjlab.characteristics import (CharacteristicBundle, check_bilipschitz,
                                   check_gradient_constancy, integrate_flow, inverse_flow,
                                   seed_order_preserved, straight_line_residual, uniform_seeds)
from hjlab.errors import NotMonotone
from hjlab.grid import Grid, SpaceTimeField
from hjlab.hamiltonian import cos_psi, neg_square, quadratic, zero_psi
from hjlab.solver import SchemeConfig, characteristic_solution, solve_lax_friedrichs, time_lattice
from hjlab.uniqueness import counterexample_field


def oracle_run(n=512, T=0.5, H=None, psi=None):
    H = H or quadratic(0.5)
    psi = psi or cos_psi()
    grid = Grid(psi.cell, (n,))
    times, _, _ = time_lattice(H, psi, grid, SchemeConfig(T))
    return H, psi, characteristic_solution(H, psi, grid, times)


@pytest.fixture(scope="module")
def smooth():
    H, psi, g = oracle_run()
    return H, psi, g, integrate_flow(g, H, uniform_seeds(g.grid, 64))


@pytest.fixture(scope="module")
def drift():
    H, psi = quadratic(0.5, 1.0, 3.0), zero_psi()
    grid = Grid.uniform(128)
    g = solve_lax_friedrichs(H, psi, grid, SchemeConfig(0.5))
    return H, psi, g, integrate_flow(g, H, uniform_seeds(grid, 16))


def test_constant_drift_paths(drift):
    H, psi, g, b = drift
    t = b.times[:, None, None]
    assert np.allclose(b.paths, b.seeds[None] - t * 1.0, atol=1e-12)
    assert straight_line_residual(b, H, psi) <= 1e-12
    assert check_gradient_constancy(b, g, psi) == 0.0


def test_smooth_paths_follow_straight_lines(smooth):
    H, psi, g, b = smooth
    x = b.seeds[:, 0]
    predicted = x[None] + b.times[:, None] * np.sin(x)[None]
    assert np.max(np.abs(b.paths[..., 0] - predicted)) <= 5e-3
    assert straight_line_residual(b, H, psi) <= 5e-3
    assert check_gradient_constancy(b, g, psi) <= 5e-2


def test_negsquare_paths_are_vertical():
    H = neg_square()
    grid = Grid.uniform(128)
    g = solve_lax_friedrichs(H, zero_psi(), grid, SchemeConfig(0.5))
    b = integrate_flow(g, H, grid.nodes().reshape(-1, 1))
    assert np.all(b.paths == b.seeds[None])
    assert check_gradient_constancy(b, g, zero_psi()) == 0.0


def test_counterexample_companion_has_constant_gradient():
    grid = Grid.uniform(256)
    H, psi, g = oracle_run(256, 0.5, neg_square(), zero_psi())
    b = integrate_flow(g, H, uniform_seeds(grid, 32))
    assert check_gradient_constancy(b, g, psi) == 0.0
    # the kinked field is not constant along the same vertical lines
    f = counterexample_field(grid, g.times)
    assert check_gradient_constancy(b, f, psi) >= 0.9


def test_t0_row_residual_is_zero(smooth):
    H, psi, g, b = smooth
    head = CharacteristicBundle(b.seeds, b.times[:1], b.paths[:1], b.grad_along[:1], b.drift_constant, b.grid)
    assert straight_line_residual(head, H, psi) == 0.0


def test_bilipschitz_constant_drift(drift):
    rep = check_bilipschitz(drift[3])
    assert rep.passed and rep.order_preserved
    assert rep.worst_margin == pytest.approx(0.0, abs=1e-12)


def test_bilipschitz_smooth(smooth):
    b = smooth[3]
    rep = check_bilipschitz(b)
    assert rep.passed and rep.order_preserved
    # velocity Lipschitz constant grows like 1/(1 - t): 1 at t=0, 2 at t=0.5
    assert 1.0 <= rep.c <= 2.1
    assert rep.c == pytest.approx(b.drift_constant)


def test_bilipschitz_identical_seeds():
    H, psi, g = oracle_run(128, 0.3)
    b = integrate_flow(g, H, np.array([[1.0], [1.0]]))
    rep = check_bilipschitz(b)
    assert rep.passed and rep.worst_margin == 0.0
    with pytest.raises(ValueError):
        check_bilipschitz(integrate_flow(g, H, np.array([[1.0]])))


def test_bilipschitz_detects_collapse(smooth):
    b = smooth[3]
    squeezed = b.paths.copy()
    squeezed[-1, 1] = squeezed[-1, 0] + 1e-6
    bad = CharacteristicBundle(b.seeds, b.times, squeezed, b.grad_along, b.drift_constant, b.grid)
    assert not check_bilipschitz(bad).passed


def test_seed_order(smooth):
    b = smooth[3]
    assert seed_order_preserved(b)
    swapped = b.paths.copy()
    swapped[-1, [3, 4]] = swapped[-1, [4, 3]]
    bad = CharacteristicBundle(b.seeds, b.times, swapped, b.grad_along, b.drift_constant, b.grid)
    assert not seed_order_preserved(bad)
    with pytest.raises(NotMonotone):
        inverse_flow(bad, b.times[-1], 1.0)


def test_inverse_flow_constant_drift(drift):
    b = drift[3]
    t = b.times[20]
    for y in (0.3, 2.0, 6.0, -1.0):
        assert inverse_flow(b, t, y) == pytest.approx(y + t * 1.0, abs=1e-12)
    assert inverse_flow(b, 0.0, 2.5) == pytest.approx(2.5, abs=1e-12)


def test_inverse_flow_round_trip(smooth):
    b = smooth[3]
    k = int(np.argmin(np.abs(b.times - 0.25)))
    t = b.times[k]
    h_seed = 2 * math.pi / 64
    for y in np.linspace(0.1, 6.0, 13):
        x = inverse_flow(b, t, y)
        image = x + t * math.sin(x)
        # piecewise-linear inversion through seed images: O(h_seed^2) interpolation
        assert abs(image - y) <= 1e-6 + h_seed ** 2


def test_inverse_flow_warns_off_lattice(smooth):
    b = smooth[3]
    with pytest.warns(UserWarning):
        inverse_flow(b, 0.2501234, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        inverse_flow(b, b.times[3], 1.0)


def test_semigroup(smooth):
    H, psi, g, b = smooth
    k = len(b.times) // 3
    restart = integrate_flow(g, H, b.paths[k], start_index=k)
    T = b.times[-1]
    budget = 2 * 10 * b.dt ** 2 * (1 + b.drift_constant) * T
    assert np.max(np.abs(restart.paths[-1] - b.paths[-1])) <= budget
    assert restart.times[0] == b.times[k]


def test_rk4_order_on_frozen_field():
    """Exact ODE X' = sin X (frozen g = cos x): tan(X/2) = tan(x/2) e^t."""
    grid = Grid.uniform(2 ** 16)
    x0 = np.array([0.3, 1.0, 2.0, 2.9, 4.0, 5.5])
    T = 1.0
    exact = 2 * np.arctan(np.tan(x0 / 2) * np.exp(T))
    exact = np.where(x0 > math.pi, exact + 2 * math.pi, exact)
    v = np.cos(grid.axes()[0])
    errors = []
    for K in (2, 4, 8, 16):
        g = SpaceTimeField(grid, np.linspace(0, T, K + 1), np.repeat(v[None], K + 1, axis=0))
        b = integrate_flow(g, quadratic(0.5), x0)
        errors.append(np.max(np.abs(b.paths[-1, :, 0] - exact)))
    floor = 1e-7
    for a, c in zip(errors, errors[1:]):
        if c > floor:
            assert a / c >= 8.0


def test_flow_in_2d():
    H, psi = quadratic(0.5, 1.0, 0.0, dim=2), zero_psi(dim=2)
    grid = Grid.uniform(16, dim=2)
    g = solve_lax_friedrichs(H, psi, grid, SchemeConfig(0.2))
    b = integrate_flow(g, H, uniform_seeds(grid, 4))
    assert b.paths.shape[1:] == (16, 2)
    assert np.allclose(b.paths[-1], b.seeds - b.times[-1] * 1.0)
    rep = check_bilipschitz(b)
    assert rep.passed and rep.order_preserved is None


def test_bad_seed_shape():
    H, psi, g = oracle_run(64, 0.1)
    with pytest.raises(ValueError):
        integrate_flow(g, H, np.zeros((3, 2)))


def test_constancy_needs_matching_lattice(smooth):
    H, psi, g, b = smooth
    _, _, other = oracle_run(512, 0.25)
    with pytest.raises(ValueError):
        check_gradient_constancy(b, other, psi)
