import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hjlab.characteristics import integrate_flow, uniform_seeds
from hjlab.errors import ConeLeavesCell, GridMismatch, HypothesisUnmet
from hjlab.grid import Grid, SpaceTimeField, sup_norm
from hjlab.hamiltonian import (InitialCondition, cos_psi, cosine, neg_square, normalize, quadratic,
                               random_trig_psi, trig_psi, zero_psi)
from hjlab.solver import (SchemeConfig, characteristic_solution, classical_horizon,
                          solve_characteristic_exact, solve_lax_friedrichs, time_lattice)
from hjlab.uniqueness import (check_weak_solution, counterexample_field, difference_control,
                              galilean_reparametrize, gronwall_certificate, kink_mask,
                              squared_gradient)


def lattice(H, psi, n, T):
    grid = Grid(psi.cell, (n,))
    times, _, _ = time_lattice(H, psi, grid, SchemeConfig(T))
    return grid, times


@pytest.fixture(scope="module")
def smooth_pair():
    H, psi = quadratic(0.5), cos_psi()
    grid = Grid.uniform(512)
    f = solve_lax_friedrichs(H, psi, grid, SchemeConfig(0.5))
    g = characteristic_solution(H, psi, grid, f.times)
    return H, psi, f, g


@pytest.fixture(scope="module")
def cex():
    H, psi = neg_square(), zero_psi()
    grid, times = lattice(H, psi, 512, 0.5)
    return H, psi, counterexample_field(grid, times)


def test_weak_solution_oracle(smooth_pair):
    H, psi, _, g = smooth_pair
    rep = check_weak_solution(g, H, psi)
    assert rep.passed and rep.residual_sup <= 0.05
    assert rep.verdicts == (True, True, True)


def test_weak_solution_counterexample(cex):
    H, psi, f = cex
    rep = check_weak_solution(f, H, psi)
    assert rep.initial_ok and rep.equation_ok is True
    assert rep.residual_sup <= 1e-12 and rep.excluded_fraction <= 0.02
    assert rep.semiconcave_ok is False and not rep.passed
    assert rep.semiconcavity_max >= 2 / f.grid.h[0] - 1e-6


def test_weak_solution_zero():
    H, psi = quadratic(0.5), zero_psi()
    grid, times = lattice(H, psi, 64, 0.5)
    rep = check_weak_solution(SpaceTimeField(grid, times, np.zeros((times.size, 64))), H, psi)
    assert rep.passed and rep.residual_sup == 0.0 and rep.excluded_fraction == 0.0


def test_weak_solution_detects_wrong_equation(smooth_pair):
    _, psi, _, g = smooth_pair
    rep = check_weak_solution(g, quadratic(0.5, 0.0, 0.3), psi)
    assert rep.equation_ok is False


def test_weak_solution_detects_wrong_initial_data(smooth_pair):
    H, _, _, g = smooth_pair
    assert check_weak_solution(g, H, cos_psi(1.1)).initial_ok is False


def test_weak_solution_cell_mismatch():
    psi = InitialCondition(lambda x: np.zeros(x.shape[:-1]), np.zeros_like, 0.0, 0.0, (1.0,), "zero")
    f = SpaceTimeField(Grid.uniform(16), [0.0, 0.1, 0.2], np.zeros((3, 16)))
    with pytest.raises(GridMismatch):
        check_weak_solution(f, quadratic(0.5), psi)


def test_weak_solution_inconclusive_when_too_few_slices():
    f = SpaceTimeField(Grid.uniform(16), [0.0, 0.1], np.zeros((2, 16)))
    assert check_weak_solution(f, quadratic(0.5), zero_psi()).equation_ok is None


def test_kink_mask_marks_the_cone_edges(cex):
    _, _, f = cex
    k = len(f) // 2
    lip_t = float(np.max(np.abs(np.diff(f.values, axis=0)))) / f.dt
    mask = kink_mask(f, k, lip_t)
    r = np.minimum(np.arange(512), 512 - np.arange(512)) * f.grid.h[0]
    assert mask[0]
    edge = int(np.argmin(np.abs(r[:256] - f.times[k])))
    assert mask[edge - 1: edge + 2].any()
    assert not mask[(r > f.times[k] + 3 * f.grid.h[0])].any()


def test_counterexample_examples():
    grid = Grid.uniform(512)
    f = counterexample_field(grid, [0.0, 0.5])
    assert np.all(f.values[0] == 0.0)
    assert f.values[1, 0] == -0.5
    # x = 1 lies outside the cone at t = 0.5; node 1 of a grid with h = 1
    F = counterexample_field(Grid((2 * math.pi,), (8,)), [0.5])
    F1 = counterexample_field(Grid((10.0,), (10,)), [0.5])
    assert F1.values[0, 1] == 0.0
    x = F.grid.axes()[0]
    assert np.all(F.values[0][(x > 0.5) & (x < 2 * math.pi - 0.5)] == 0.0)
    with pytest.raises(ConeLeavesCell):
        counterexample_field(grid, [0.0, 3.2])


def test_galilean_examples():
    grid = Grid.uniform(64)
    times = np.linspace(0, 0.5, 11)
    H = quadratic(0.0, 0.0, 3.0)
    f = SpaceTimeField(grid, times, np.repeat(3 * times[:, None], 64, axis=1))
    assert np.allclose(galilean_reparametrize(f, H).values, 0.0, atol=1e-14)
    # grad H(0) = 0: a pure vertical shift
    H = quadratic(0.5, 0.0, 2.0)
    g = SpaceTimeField(grid, times, np.sin(grid.axes()[0])[None] + 0 * times[:, None])
    v = galilean_reparametrize(g, H)
    assert np.allclose(v.values, g.values - 2.0 * times[:, None], atol=1e-14)


def test_galilean_recovers_initial_profile():
    """With grad H(0) = a and H(0) = b, f(t,x) = psi(x + a t) + b t is mapped to psi."""
    a, b = 1.0, 3.0
    H = quadratic(0.0, a, b)
    n = 64
    grid = Grid.uniform(n)
    h = grid.h[0]
    times = np.arange(11) * h / a  # shifts land on nodes so resampling is exact
    x = grid.axes()[0]
    f = SpaceTimeField(grid, times, np.stack([np.cos(x + a * t) + b * t for t in times]))
    v = galilean_reparametrize(f, H)
    assert np.allclose(v.values, np.cos(x)[None], atol=1e-12)


def test_galilean_conjugation_to_scheme_tolerance():
    H, psi = quadratic(0.5, 1.0, 3.0), cos_psi()
    grid = Grid.uniform(512)
    v = galilean_reparametrize(solve_lax_friedrichs(H, psi, grid, SchemeConfig(0.5)), H)
    Hn = normalize(H)
    direct = solve_lax_friedrichs(Hn, psi, grid, SchemeConfig(0.5))
    err = sup_norm(direct.final - solve_characteristic_exact(Hn, psi, grid, 0.5))
    assert sup_norm(v.final - direct.final) <= 2 * err


def test_squared_gradient_keeps_kink_slope():
    grid = Grid.uniform(64)
    f = counterexample_field(grid, [0.5]).final
    s = squared_gradient(f)
    assert s[0] == pytest.approx(1.0)


def test_difference_control_identical(smooth_pair):
    H, _, _, g = smooth_pair
    b = integrate_flow(g, H, uniform_seeds(g.grid, 16))
    rep = difference_control(g, g, b, H)
    assert rep.passed and rep.strict_passed
    assert np.all(rep.lhs == 0) and np.all(rep.rhs == 0)


def test_difference_control_sharp_on_counterexample(cex):
    H, _, f = cex
    grid = f.grid
    g = SpaceTimeField(grid, f.times, np.zeros_like(f.values))
    b = integrate_flow(g, H, grid.nodes().reshape(-1, 1))
    rep = difference_control(f, g, b, H)
    assert rep.c_raw == pytest.approx(1.0) and rep.c == pytest.approx(1.1)
    assert rep.passed
    h, dt = grid.h[0], f.dt
    r = np.minimum(np.arange(512), 512 - np.arange(512)) * h
    inside = r[None] < b.times[:, None] - 3 * h
    # both sides equal t - |x| inside the cone
    expected = (b.times[:, None] - r[None])[inside]
    assert np.max(np.abs(rep.lhs[inside] - expected)) <= 1e-12
    assert np.max(np.abs(rep.c_raw * rep.integral[inside] - expected)) <= 3 * (h + dt)


def test_difference_control_rejects_vertical_offset(smooth_pair):
    H, _, _, g = smooth_pair
    b = integrate_flow(g, H, uniform_seeds(g.grid, 16))
    for delta, budget_fails in ((1e-3, False), (1.0, True)):
        f = SpaceTimeField(g.grid, g.times, g.values + delta * g.times[:, None])
        rep = difference_control(f, g, b, H)
        assert not rep.strict_passed
        assert rep.worst_violation == pytest.approx(delta * 0.5, rel=1e-9)
        assert rep.passed is (not budget_fails)


def test_difference_control_lattice_mismatch(smooth_pair):
    H, _, _, g = smooth_pair
    short = SpaceTimeField(g.grid, g.times[:10], g.values[:10])
    b = integrate_flow(short, H, uniform_seeds(g.grid, 4))
    with pytest.raises(GridMismatch):
        difference_control(g, g, b, H)
    # a bundle started later on the same lattice is fine
    late = integrate_flow(g, H, uniform_seeds(g.grid, 4), start_index=3)
    assert difference_control(g, g, late, H).strict_passed


def test_certificate_identical(smooth_pair):
    H, _, _, g = smooth_pair
    cert = gronwall_certificate(g, g, H, eps=0.0)
    assert cert.verdict and cert.certified_bound == 0.0 and np.all(cert.m == 0)


def test_certificate_lf_vs_oracle(smooth_pair):
    H, _, f, g = smooth_pair
    cert = gronwall_certificate(f, g, H, eps=0.05)
    assert cert.verdict
    assert np.max(cert.m) <= 0.05 * math.exp(cert.c_prime * 0.5)
    assert cert.c_prime == pytest.approx(4 * cert.c * cert.c_u)
    assert cert.L > 0 and cert.lip_fg > 0


def test_certificate_counterexample(cex):
    H, _, f = cex
    zero = SpaceTimeField(f.grid, f.times, np.zeros_like(f.values))
    with pytest.raises(HypothesisUnmet):
        gronwall_certificate(f, zero, H, eps=1.0)


def test_certificate_explicit_cap_and_eps_floor(smooth_pair):
    H, psi, f, g = smooth_pair
    with pytest.raises(HypothesisUnmet):
        gronwall_certificate(f, g, H, eps=0.05, c_u_max=1e-6)
    shifted = SpaceTimeField(f.grid, f.times, f.values + 0.1)
    with pytest.raises(ValueError):
        gronwall_certificate(shifted, g, H, eps=0.05)


def test_certificate_fails_on_large_discrepancy(smooth_pair):
    H, _, f, g = smooth_pair
    drifted = SpaceTimeField(f.grid, f.times, f.values + 2.0 * f.times[:, None])
    assert not gronwall_certificate(drifted, g, H, eps=1e-3).verdict


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(["quadratic", "cosine"]))
def test_certificate_soundness(seed, family):
    psi = random_trig_psi(np.random.default_rng(seed))
    H = quadratic(0.5) if family == "quadratic" else cosine(1.0, 1.0)
    grid = Grid.uniform(128)
    T = min(0.4 * classical_horizon(H, psi, grid), 1.0)
    f = solve_lax_friedrichs(H, psi, grid, SchemeConfig(T))
    g = characteristic_solution(H, psi, grid, f.times)
    eps = float(np.max(np.abs(f.values - g.values)))
    cert = gronwall_certificate(f, g, H, eps)
    if cert.verdict:
        assert np.max([sup_norm(f.slice(k) - g.slice(k)) for k in range(len(f))]) <= cert.envelope[-1]


def test_certificate_nonconvex_hamiltonian():
    psi = trig_psi([0.1, 0.05, 0.03], [0.2, 1.0, 4.0])
    H = cosine(1.0, 1.0)
    grid = Grid.uniform(256)
    T = 0.4 * classical_horizon(H, psi, grid)
    f = solve_lax_friedrichs(H, psi, grid, SchemeConfig(T))
    g = characteristic_solution(H, psi, grid, f.times)
    eps = float(np.max(np.abs(f.values - g.values)))
    assert gronwall_certificate(f, g, H, eps).verdict
