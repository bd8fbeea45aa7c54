"""The acceptance pipeline: nine numbered checks, each returning a Criterion.

Every check is deterministic given its arguments (random corpora draw from
a seeded generator).  ``run_suite`` runs all of them and, when given an
output directory, writes one JSON report per check plus CSV plot data.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .characteristics import (check_bilipschitz, check_gradient_constancy, integrate_flow,
                              seed_order_preserved, straight_line_residual, uniform_seeds)
from .config import worker_count
from .errors import HypothesisUnmet
from .files import atomic_write, bundle_csv_text, field_csv_text, write_json
from .grid import Grid, SpaceTimeField, periodic_distance, sample, sup_norm
from .hamiltonian import (HamiltonianSpec, InitialCondition, cos_psi, cosine, neg_square,
                          normalize, quadratic, random_trig_psi, reflect, zero_psi)
from .semiconcavity import check_gradient_bound, estimate_constants, random_semiconcave_field
from .solver import (SchemeConfig, characteristic_solution, classical_horizon,
                     solve_characteristic_exact, solve_lax_friedrichs, time_lattice)
from .uniqueness import check_weak_solution, counterexample_field, difference_control, \
    galilean_reparametrize, gronwall_certificate


@dataclass
class Criterion:
    number: int
    title: str
    passed: bool
    measured: dict
    thresholds: dict
    artifacts: dict = field(default_factory=dict, repr=False)

    def line(self) -> str:
        return f"criterion {self.number} [{'PASS' if self.passed else 'FAIL'}] {self.title}"

    def to_dict(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": self.passed,
                "measured": self.measured, "thresholds": self.thresholds}


def table_csv(columns: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write("# " + ",".join(columns) + "\n")
    np.savetxt(buf, np.asarray(rows, dtype=float).reshape(-1, len(columns)), fmt="%.17g",
               delimiter=",")
    return buf.getvalue()


def lf_run(H: HamiltonianSpec, psi: InitialCondition, n: int, T: float, cfl: float = 0.4):
    grid = Grid(psi.cell, (n,) * psi.dim)
    return solve_lax_friedrichs(H, psi, grid, SchemeConfig(T, cfl=cfl))


def scheme_error(H: HamiltonianSpec, psi: InitialCondition, n: int, T: float) -> float:
    """sup |LF - characteristic oracle| at time T."""
    F = lf_run(H, psi, n, T)
    exact = solve_characteristic_exact(H, psi, F.grid, T)
    return sup_norm(F.final - exact)


# 1 -------------------------------------------------------------------------

def gradient_control(seed: int = 0, count: int = 50, n: int = 512,
                     amplitudes=(0.1, 1.0, 10.0), ratio_tol: float = 1e-3) -> Criterion:
    rng = np.random.default_rng(seed)
    grid = Grid.uniform(n)
    ratios, corpus_ok = [], True
    for _ in range(count):
        c = float(rng.uniform(0.1, 10.0))
        ok, ratio = check_gradient_bound(random_semiconcave_field(rng, grid, c), c)
        corpus_ok &= ok
        ratios.append(ratio)
    cos_ratios = {}
    for A in amplitudes:
        f = sample(grid, lambda x, A=A: A * np.cos(x[..., 0]))
        cos_ratios[str(A)] = check_gradient_bound(f, A)[1]
    cos_ok = all(abs(r - 0.25) <= ratio_tol for r in cos_ratios.values())
    rows = [[i, r] for i, r in enumerate(ratios)]
    return Criterion(1, "gradient-control inequality", bool(corpus_ok and cos_ok),
                     {"corpus_size": count, "corpus_all_pass": bool(corpus_ok),
                      "corpus_max_ratio": max(ratios), "cos_ratios": cos_ratios},
                     {"cos_ratio": 0.25, "cos_ratio_tol": ratio_tol},
                     {"c1_corpus_ratios.csv": table_csv(["field", "ratio"], rows)})


# 2 and 3 -------------------------------------------------------------------

def _smooth_bundle(n: int, T: float, seeds: int):
    H, psi = quadratic(0.5), cos_psi()
    grid = Grid.uniform(n)
    times, _, _ = time_lattice(H, psi, grid, SchemeConfig(T))
    g = characteristic_solution(H, psi, grid, times)
    return H, psi, g, integrate_flow(g, H, uniform_seeds(grid, seeds))


def straight_characteristics(n: int = 512, T: float = 0.5, seeds: int = 64,
                             residual_tol: float = 5e-3, constancy_tol: float = 5e-2,
                             min_ratio: float = 1.8) -> Criterion:
    out, bundles = {}, {}
    for m in (n, 2 * n):
        H, psi, g, b = _smooth_bundle(m, T, seeds)
        out[m] = (straight_line_residual(b, H, psi), check_gradient_constancy(b, g, psi))
        bundles[m] = b
    (r1, c1), (r2, c2) = out[n], out[2 * n]
    rr, cr = r1 / max(r2, 1e-300), c1 / max(c2, 1e-300)
    passed = r1 <= residual_tol and c1 <= constancy_tol and rr >= min_ratio and cr >= min_ratio
    return Criterion(2, "straight-line characteristics", bool(passed),
                     {"residual": r1, "constancy": c1, "residual_refined": r2,
                      "constancy_refined": c2, "residual_ratio": rr, "constancy_ratio": cr},
                     {"residual": residual_tol, "constancy": constancy_tol, "ratio": min_ratio},
                     {"c2_bundle.csv": bundle_csv_text(bundles[n])})


def bilipschitz_flow(n: int = 512, T: float = 0.5, seeds: int = 64) -> Criterion:
    _, _, _, b = _smooth_bundle(n, T, seeds)
    rep = check_bilipschitz(b)
    order = seed_order_preserved(b)
    return Criterion(3, "bi-Lipschitz flow", bool(rep.passed and order),
                     dict(rep.to_dict(), order_preserved=order),
                     {"worst_margin": -rep.tol})


# 4 -------------------------------------------------------------------------

def oracle_equivalence(sizes=(128, 256, 512, 1024), T: float = 0.5, min_ratio: float = 1.3,
                       max_error: float = 0.05, ref_n: int = 512) -> Criterion:
    H, psi = quadratic(0.5), cos_psi()
    errors = [scheme_error(H, psi, m, T) for m in sizes]
    ratios = [a / b for a, b in zip(errors, errors[1:])]
    ref = errors[list(sizes).index(ref_n)]
    passed = all(r >= min_ratio for r in ratios) and ref <= max_error
    return Criterion(4, "oracle equivalence", bool(passed),
                     {"n": list(sizes), "errors": errors, "ratios": ratios, "error_at_ref": ref},
                     {"ratio": min_ratio, "error": max_error, "ref_n": ref_n},
                     {"c4_convergence.csv": table_csv(["n", "error"], list(zip(sizes, errors)))})


# 5 -------------------------------------------------------------------------

def _certify_case(H: HamiltonianSpec, psi: InitialCondition, n: int, fraction: float) -> dict:
    grid = Grid(psi.cell, (n,))
    t_star = classical_horizon(H, psi, grid)
    T = fraction * t_star
    f = solve_lax_friedrichs(H, psi, grid, SchemeConfig(T))
    g = characteristic_solution(H, psi, grid, f.times)
    eps = float(np.max(np.abs(f.values - g.values)))
    cert = gronwall_certificate(f, g, H, eps)
    return {"hamiltonian": str(H), "psi": psi.label, "T_star": t_star, "T": T, "eps": eps,
            "c_u": cert.c_u, "c_prime": cert.c_prime, "certified_bound": cert.certified_bound,
            "verdict": cert.verdict}


def uniqueness_certificates(seed: int = 0, cases: int = 5, n: int = 512,
                            fraction: float = 0.4, workers: int | None = None) -> Criterion:
    rng = np.random.default_rng(seed)
    psis = [random_trig_psi(rng) for _ in range(cases)]
    jobs = [(H, psi) for psi in psis for H in (quadratic(0.5), cosine(1.0, 1.0))]
    with ThreadPoolExecutor(workers or worker_count()) as pool:
        results = list(pool.map(lambda job: _certify_case(job[0], job[1], n, fraction), jobs))
    passed = all(r["verdict"] for r in results)
    return Criterion(5, "uniqueness certificate", bool(passed),
                     {"cases": results}, {"verdict": True, "horizon_fraction": fraction})


# 6 and 7 -------------------------------------------------------------------

def counterexample_lattice(n: int, T: float = 0.5):
    H, psi = neg_square(), zero_psi()
    grid = Grid.uniform(n)
    times, dt, _ = time_lattice(H, psi, grid, SchemeConfig(T))
    return H, psi, counterexample_field(grid, times)


def counterexample_report(n: int = 512, T: float = 0.5) -> dict:
    H, psi, f = counterexample_lattice(n, T)
    rep = check_weak_solution(f, H, psi)
    c_upper = estimate_constants(f.final).c_upper
    zero = SpaceTimeField(f.grid, f.times, np.zeros_like(f.values))
    try:
        gronwall_certificate(f, zero, H, eps=1.0)
        certificate = "issued"
    except HypothesisUnmet as exc:
        certificate = f"HypothesisUnmet: {exc}"
    return {"n": n, "T": T, "h": f.grid.h[0], "weak_solution": rep.to_dict(),
            "c_upper": c_upper, "c_upper_times_h": c_upper * f.grid.h[0],
            "certificate": certificate, "field": f}


def counterexample_necessity(sizes=(128, 256, 512), T: float = 0.5, ref_n: int = 512,
                             residual_tol: float = 1e-12, max_excluded: float = 0.02) -> Criterion:
    reports = {m: counterexample_report(m, T) for m in sizes}
    ref = reports[ref_n]
    w = ref["weak_solution"]
    c_uppers = [reports[m]["c_upper"] for m in sizes]
    ratios = [b / a for a, b in zip(c_uppers, c_uppers[1:])]
    checks = {
        "initial_ok": w["verdicts"]["initial"] is True,
        "equation_ok": w["verdicts"]["equation"] is True,
        "residual": w["residual_sup"] <= residual_tol,
        "excluded": w["excluded_fraction"] <= max_excluded,
        "semiconcave_fails": w["verdicts"]["semiconcave"] is False,
        "c_upper": ref["c_upper"] >= 0.9 * 2 / ref["h"],
        "doubling": all(abs(r - 2.0) <= 0.1 for r in ratios),
        "hypothesis_unmet": all(reports[m]["certificate"].startswith("HypothesisUnmet")
                                for m in sizes),
    }
    measured = {"residual_sup": w["residual_sup"], "excluded_fraction": w["excluded_fraction"],
                "c_upper": ref["c_upper"], "two_over_h": 2 / ref["h"], "c_upper_n": c_uppers,
                "c_upper_ratios": ratios, "certificate": ref["certificate"], "checks": checks,
                "weak_solution": w}
    return Criterion(6, "counterexample necessity", all(checks.values()), measured,
                     {"residual": residual_tol, "excluded": max_excluded,
                      "c_upper_fraction_of_2_over_h": 0.9, "ratio": 2.0, "ratio_tol": 0.1},
                     {"c6_counterexample.csv": field_csv_text(ref["field"].final, ref["T"])})


def lemma_sharpness(n: int = 512, T: float = 0.5, margin_cells: float = 3.0) -> Criterion:
    H, _, f = counterexample_lattice(n, T)
    grid = f.grid
    g = SpaceTimeField(grid, f.times, np.zeros_like(f.values))
    bundle = integrate_flow(g, H, grid.nodes().reshape(-1, 1))
    rep = difference_control(f, g, bundle, H)
    h, dt = grid.h[0], f.dt
    r = periodic_distance(bundle.paths, np.zeros(1), grid.lengths)
    inside = r < bundle.times[:, None] - margin_cells * h
    gap = np.abs(rep.lhs - rep.c_raw * rep.integral)[inside]
    worst = float(gap.max()) if gap.size else math.nan
    budget = 3.0 * (h + dt)
    passed = gap.size > 0 and worst <= budget
    return Criterion(7, "lemma sharpness", bool(passed),
                     {"worst_gap": worst, "points": int(gap.size), "c_raw": rep.c_raw,
                      "h": h, "dt": dt}, {"gap": budget})


# 8 and 9 -------------------------------------------------------------------

def frame_change(n: int = 512, T: float = 0.5, factor: float = 2.0) -> Criterion:
    H, psi = quadratic(0.5, 1.0, 3.0), cos_psi()
    Hn = normalize(H)
    shifted = galilean_reparametrize(lf_run(H, psi, n, T), H)
    direct = lf_run(Hn, psi, n, T)
    diff = sup_norm(shifted.final - direct.final)
    err = sup_norm(direct.final - solve_characteristic_exact(Hn, psi, direct.grid, T))
    return Criterion(8, "frame change", bool(diff <= factor * err),
                     {"difference": diff, "scheme_error": err}, {"factor": factor})


def reflection_symmetry(n: int = 512, T: float = 0.5, factor: float = 2.0) -> Criterion:
    H, psi = cosine(1.0, 1.0), cos_psi()
    direct = lf_run(H, psi, n, T)
    Hr, psir = reflect(H, psi)
    mirrored = lf_run(Hr, psir, n, T)
    diff = sup_norm(direct.final + mirrored.final)
    err = sup_norm(direct.final - solve_characteristic_exact(H, psi, direct.grid, T))
    return Criterion(9, "reflection symmetry", bool(diff <= factor * err),
                     {"difference": diff, "scheme_error": err}, {"factor": factor})


def run_suite(seed: int = 0, out: str | Path | None = None, config: dict | None = None,
              workers: int | None = None) -> list[Criterion]:
    results = [
        gradient_control(seed),
        straight_characteristics(),
        bilipschitz_flow(),
        oracle_equivalence(),
        uniqueness_certificates(seed, workers=workers),
        counterexample_necessity(),
        lemma_sharpness(),
        frame_change(),
        reflection_symmetry(),
    ]
    if out is not None:
        out = Path(out)
        for r in results:
            write_json(out / f"criterion_{r.number}.json",
                       {"version": __version__, "config": config or {"seed": seed},
                        "criterion": r.to_dict()})
            for name, text in r.artifacts.items():
                atomic_write(out / name, text)
        write_json(out / "suite.json",
                   {"version": __version__, "config": config or {"seed": seed},
                    "passed": all(r.passed for r in results),
                    "criteria": [{"number": r.number, "title": r.title, "passed": r.passed}
                                 for r in results]})
    return results
