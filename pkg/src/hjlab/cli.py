"""Command-line driver: ``hjlab <subcommand> [flags]``.

Settings come from built-in defaults, then an optional ``--config`` file
(``key = value`` lines), then explicit flags.  Every subcommand writes CSV
data and a JSON report into ``--out``.  Exit codes: 0 pass, 1 fail, 2 usage.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .characteristics import (check_bilipschitz, check_gradient_constancy, integrate_flow,
                              straight_line_residual, uniform_seeds)
from .config import RunConfig
from .errors import HJLabError, HorizonExceeded, HypothesisUnmet
from .files import atomic_write, bundle_csv_text, read_field_csv, write_field_csv, write_json
from .grid import check_same_lattice
from .semiconcavity import estimate_constants, trace_constants
from .solver import (SchemeConfig, characteristic_solution, classical_horizon,
                     solve_lax_friedrichs, time_lattice)
from .uniqueness import check_weak_solution, gronwall_certificate

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("run configuration")
    g.add_argument("--config", help="key = value config file (flags override it)")
    g.add_argument("--hamiltonian", help="e.g. quadratic:0.5,0,0 | negsquare | cosine:1,1")
    g.add_argument("--psi", help="e.g. cos | cos:2 | sin | zero | trig:a1,a2,a3 | trig-random")
    g.add_argument("--n", type=int, help="nodes per axis")
    g.add_argument("--T", type=float, help="final time")
    g.add_argument("--cfl", type=float)
    g.add_argument("--sigma", help="'auto' or dissipation value(s)")
    g.add_argument("--seeds", type=int, help="characteristic seeds per axis")
    g.add_argument("--eps", type=float, help="certificate floor")
    g.add_argument("--out", help="output directory")
    g.add_argument("--seed", type=int, help="RNG seed")
    g.add_argument("--dim", type=int, choices=(1, 2))
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="hjlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hjlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="solve and write the space-time field")
    p.add_argument("--method", choices=("lf", "characteristic"), default="lf")

    p = sub.add_parser("characteristics", parents=[common],
                       help="integrate the characteristic flow and check it")
    p.add_argument("--method", choices=("lf", "characteristic"), default="characteristic")

    p = sub.add_parser("semiconcavity", parents=[common], help="semi-concavity constants of a field CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--c", type=float, help="also check the gradient bound with this constant")

    p = sub.add_parser("check-weak", parents=[common], help="weak-solution conditions of a field CSV")
    p.add_argument("--f", required=True)
    p.add_argument("--residual-tol", type=float, default=0.05)
    p.add_argument("--c-threshold", type=float)

    p = sub.add_parser("certify", parents=[common], help="Gronwall certificate for two field CSVs")
    p.add_argument("--f", required=True)
    p.add_argument("--g", required=True)

    sub.add_parser("counterexample", parents=[common], help="the kinked a.e. solution and its report")
    sub.add_parser("suite", parents=[common], help="run the full acceptance pipeline")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    try:
        if args.config:
            cfg = RunConfig.from_file(args.config)
        flags = {k: getattr(args, k) for k in RunConfig.__dataclass_fields__ if hasattr(args, k)}
        cfg = cfg.updated({k: v for k, v in flags.items() if v is not None})
        # parse now so bad specs are usage errors
        cfg.hamiltonian_spec()
        cfg.psi_spec()
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    return cfg


def _report(cfg: RunConfig, command: str, body: dict) -> dict:
    return {"version": __version__, "command": command, "config": cfg.to_dict(), **body}


def _read(path) :
    try:
        return read_field_csv(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read field {path}: {exc}") from exc


def _solution(cfg: RunConfig, method: str):
    H, psi, grid = cfg.hamiltonian_spec(), cfg.psi_spec(), cfg.grid()
    scheme = SchemeConfig(cfg.T, cfl=cfg.cfl, sigma=cfg.sigma_value())
    if method == "lf":
        return solve_lax_friedrichs(H, psi, grid, scheme)
    times, _, _ = time_lattice(H, psi, grid, scheme)
    return characteristic_solution(H, psi, grid, times)


def cmd_solve(args, cfg: RunConfig) -> int:
    out = Path(cfg.out)
    body = {"method": args.method}
    if cfg.dim == 1:
        body["classical_horizon"] = classical_horizon(cfg.hamiltonian_spec(), cfg.psi_spec(), cfg.grid())
    try:
        F = _solution(cfg, args.method)
    except HorizonExceeded as exc:
        write_json(out / "solve.json", _report(cfg, "solve", dict(body, passed=False, error=str(exc))))
        return EXIT_FAIL
    write_field_csv(out / "solution.csv", F, meta=F.meta)
    body.update(passed=True, steps=len(F) - 1, dt=F.dt, meta=F.meta)
    write_json(out / "solve.json", _report(cfg, "solve", body))
    return EXIT_PASS


def cmd_characteristics(args, cfg: RunConfig) -> int:
    H, psi = cfg.hamiltonian_spec(), cfg.psi_spec()
    g = _solution(cfg, args.method)
    bundle = integrate_flow(g, H, uniform_seeds(g.grid, cfg.seeds))
    bil = check_bilipschitz(bundle)
    body = {"method": args.method,
            "straight_line_residual": straight_line_residual(bundle, H, psi),
            "gradient_constancy": check_gradient_constancy(bundle, g, psi),
            "bilipschitz": bil.to_dict(), "passed": bil.passed}
    out = Path(cfg.out)
    atomic_write(out / "bundle.csv", bundle_csv_text(bundle))
    write_json(out / "characteristics.json", _report(cfg, "characteristics", body))
    return EXIT_PASS if bil.passed else EXIT_FAIL


def cmd_semiconcavity(args, cfg: RunConfig) -> int:
    F = _read(args.input)
    trace = trace_constants(F)
    final = estimate_constants(F.final, args.c)
    body = {"input": str(args.input), "final": final.to_dict(),
            "running_max": trace.running_max.tolist(), "c_max": trace.c_max}
    if args.c is None:
        passed = True
    else:
        passed = final.gradient_bound_ok is True
        if final.gradient_bound_ok is None:
            body["gradient_bound"] = f"hypothesis unmet for c={args.c:g}"
    body["passed"] = passed
    write_json(Path(cfg.out) / "semiconcavity.json", _report(cfg, "semiconcavity", body))
    return EXIT_PASS if passed else EXIT_FAIL


def cmd_check_weak(args, cfg: RunConfig) -> int:
    f = _read(args.f)
    rep = check_weak_solution(f, cfg.hamiltonian_spec(), cfg.psi_spec(),
                              c_threshold=args.c_threshold, residual_tol=args.residual_tol)
    body = {"f": str(args.f), "report": rep.to_dict(), "passed": rep.passed}
    write_json(Path(cfg.out) / "check_weak.json", _report(cfg, "check-weak", body))
    return EXIT_PASS if rep.passed else EXIT_FAIL


def cmd_certify(args, cfg: RunConfig) -> int:
    if cfg.eps is None:
        raise UsageError("certify needs --eps (or eps in the config file)")
    f, g = _read(args.f), _read(args.g)
    try:
        check_same_lattice(f, g)
    except HJLabError as exc:
        raise UsageError(str(exc)) from exc
    body = {"f": str(args.f), "g": str(args.g)}
    try:
        cert = gronwall_certificate(f, g, cfg.hamiltonian_spec(), cfg.eps)
    except HypothesisUnmet as exc:
        body.update(available=False, reason=str(exc), passed=False)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    else:
        body.update(available=True, certificate=cert.to_dict(), passed=cert.verdict)
    write_json(Path(cfg.out) / "certificate.json", _report(cfg, "certify", body))
    return EXIT_PASS if body["passed"] else EXIT_FAIL


def cmd_counterexample(args, cfg: RunConfig) -> int:
    from .suite import counterexample_report
    rep = counterexample_report(cfg.n, cfg.T)
    F = rep.pop("field")
    out = Path(cfg.out)
    write_field_csv(out / "counterexample.csv", F, meta={"field": "counterexample"})
    verdicts = rep["weak_solution"]["verdicts"]
    body = dict(rep, intended_counterexample=True,
                note="conditions (1)-(2) hold, the semi-concavity condition fails; "
                     "the field differs from the zero solution",
                passed=bool(verdicts["initial"] is True and verdicts["equation"] is True
                            and verdicts["semiconcave"] is True))
    write_json(out / "counterexample.json", _report(cfg, "counterexample", body))
    return EXIT_PASS if body["passed"] else EXIT_FAIL


def cmd_suite(args, cfg: RunConfig) -> int:
    from .suite import run_suite
    results = run_suite(cfg.seed, cfg.out, config=cfg.to_dict())
    for r in results:
        print(r.line())
    return EXIT_PASS if all(r.passed for r in results) else EXIT_FAIL


COMMANDS = {
    "solve": cmd_solve,
    "characteristics": cmd_characteristics,
    "semiconcavity": cmd_semiconcavity,
    "check-weak": cmd_check_weak,
    "certify": cmd_certify,
    "counterexample": cmd_counterexample,
    "suite": cmd_suite,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_PASS
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"hjlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HJLabError as exc:
        print(f"hjlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
