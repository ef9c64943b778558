"""Command-line front end.

    linode check <file>
    linode solve <file> [--explicit] [--verify] [--seed N] [--tol T] [--samples N] [--json OUT]
    linode selftest [--seed N]

Exit codes: 0 success, 1 input error (including a non-cubic right-hand side),
2 not linearisable, 3 failure at a later pipeline stage.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, replace
from importlib import metadata
from pathlib import Path
from typing import Sequence

import numpy as np
import sympy as sp

from .canonical import (
    BasisParams,
    GenericParams,
    ImplicitSolution,
    PipelineError,
    PointTransform,
    a as sym_a,
    alignment_residuals,
    delta,
    gamma,
    gamma_basis,
    generic_ode,
    lam,
    omega_basis,
    phi_basis,
    quadratic_solution,
    reduce_parameter,
    same_structure_constants,
    solve_pipeline,
)
from .expr import (
    DEFAULT_CONFIG,
    ExpressionError,
    Inconclusive,
    P,
    Q,
    W,
    X,
    Xt,
    Y,
    Yt,
    Z,
    ZeroTestConfig,
    equivalent_zero,
    parse_expression,
    to_string,
)
from .lintest import NotCubic, extract_cubic, invariant_conditions
from .vecfield import SecondOrderODE, VectorField, is_point_symmetry
from .verify import (
    EliminationFailed,
    NumericCheckConfig,
    SingularityError,
    check_solution,
    implicit_residual,
    rk4_compare,
)

EXIT_OK, EXIT_INPUT, EXIT_NOT_LINEARISABLE, EXIT_STAGE = 0, 1, 2, 3

RESERVED = {"x", "y", "p", "X", "Y", "P", "Xt", "Yt", "Pt", "Z", "W", "Q",
            "J1", "J2", "sqrt", "exp", "log"}


class ProblemError(ValueError):
    """Malformed problem file."""


@dataclass(frozen=True)
class Problem:
    ode: SecondOrderODE
    symmetries: tuple[VectorField, ...]
    transform: PointTransform | None
    zero_test: ZeroTestConfig
    numeric: NumericCheckConfig | None
    values: dict[str, float]


def _zero_config(opts: dict) -> ZeroTestConfig:
    boxes = {k: tuple(float(t) for t in v) for k, v in opts.get("boxes", {}).items()}
    return ZeroTestConfig(
        sample_count=int(opts.get("samples", DEFAULT_CONFIG.sample_count)),
        tolerance=float(opts.get("tolerance", DEFAULT_CONFIG.tolerance)),
        sample_box=boxes,
        rng_seed=int(opts.get("seed", DEFAULT_CONFIG.rng_seed)),
    )


def load_problem(path: str | Path) -> Problem:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ProblemError(f"cannot read problem file: {exc}") from None
    if not isinstance(raw, dict) or "ode" not in raw or "rhs" not in raw.get("ode", {}):
        raise ProblemError("problem file needs ode.rhs")
    try:
        params = raw.get("parameters", {}) or {}
        clash = set(params) & RESERVED
        if clash:
            raise ProblemError(f"parameter names clash with reserved symbols: {sorted(clash)}")
        fixed, free = {}, []
        for name, val in params.items():
            if val == "free":
                free.append(name)
            else:
                fixed[sp.Symbol(name)] = sp.Rational(str(val))

        def expr(s):
            return parse_expression(str(s)).xreplace(fixed)

        ode = SecondOrderODE(expr(raw["ode"]["rhs"]), params=tuple(free))
        syms = tuple(VectorField(expr(d["xi"]), expr(d["eta"])) for d in raw.get("symmetries", []))
        T = None
        if raw.get("transform") is not None:
            if len(syms) != 2:
                raise ProblemError("a transform needs exactly two symmetries")
            T = PointTransform(expr(raw["transform"]["X"]), expr(raw["transform"]["Y"]))
        opts = raw.get("options", {}) or {}
        zcfg = _zero_config(opts.get("zero_test", {}) or {})
        ncheck = opts.get("numeric_check")
        numeric, values = None, {}
        if ncheck:
            values = {k: float(v) for k, v in (ncheck.get("values") or {}).items()}
            numeric = NumericCheckConfig(
                float(ncheck.get("x_start", 0.0)), float(ncheck.get("x_end", 1.0)),
                float(ncheck.get("step", 1e-3)), float(ncheck.get("max_error", 1e-6)))
    except ProblemError:
        raise
    except (ExpressionError, KeyError, TypeError, ValueError) as exc:
        raise ProblemError(f"{type(exc).__name__}: {exc}") from None
    return Problem(ode, syms, T, zcfg, numeric, values)


def versions() -> dict[str, str]:
    out = {}
    for dist in ("artifact", "sympy", "numpy"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            out[dist] = "unknown"
    return out


def _plain(v):
    # numpy and sympy scalars sneak in through verdicts and deviations
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, (bool, np.bool_, sp.logic.boolalg.BooleanAtom)):
        return bool(v)
    if isinstance(v, (np.floating, sp.Float)):
        return float(v)
    if isinstance(v, (np.integer, sp.Integer)):
        return int(v)
    return v


def dump_report(report: dict) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(_plain(report), sort_keys=True, indent=2) + "\n"


def _overrides(cfg: ZeroTestConfig, args) -> ZeroTestConfig:
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["rng_seed"] = args.seed
    if getattr(args, "tol", None) is not None:
        changes["tolerance"] = args.tol
    if getattr(args, "samples", None) is not None:
        changes["sample_count"] = args.samples
    return replace(cfg, **changes) if changes else cfg


def _emit(report: dict, text: list[str], args) -> None:
    print("\n".join(text))
    out = getattr(args, "json", None)
    if out:
        Path(out).write_text(dump_report(report), encoding="utf-8")


def _yn(flag) -> str:
    return "yes" if flag else "no"


# ----------------------------------------------------------- check


def run_check(problem: Problem, cfg: ZeroTestConfig) -> tuple[dict, int]:
    try:
        coeffs = extract_cubic(problem.ode, cfg)
    except NotCubic as exc:
        return {"linearisable": False, "error": f"NotCubic: {exc}", "stage": "lintest"}, EXIT_INPUT
    r1, r2 = invariant_conditions(coeffs)
    ok = bool(equivalent_zero(r1, cfg)) and bool(equivalent_zero(r2, cfg))
    report = {"linearisable": ok, "residuals": [to_string(r1), to_string(r2)]}
    return report, EXIT_OK if ok else EXIT_NOT_LINEARISABLE


def cmd_check(args) -> int:
    try:
        problem = load_problem(args.file)
        cfg = _overrides(problem.zero_test, args)
        report, code = run_check(problem, cfg)
    except (ProblemError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report.update(seed=cfg.rng_seed, versions=versions())
    text = [f"equation: {problem.ode}", f"linearisable: {str(report['linearisable']).lower()}"]
    if "residuals" in report:
        text += [f"  R1 = {report['residuals'][0]}", f"  R2 = {report['residuals'][1]}"]
    if "error" in report:
        text.append(f"error: {report['error']}")
    _emit(report, text, args)
    return code


# ----------------------------------------------------------- solve


def _stage_fields(rep) -> dict:
    out: dict = {}
    if rep is None:
        return out
    if rep.linearisable is not None:
        out["linearisable"] = rep.linearisable
    if rep.residuals is not None:
        out["residuals"] = [to_string(r) for r in rep.residuals]
    if rep.pair_check is not None:
        out["pair_check"] = rep.pair_check.as_list()
    if rep.canonical_check is not None:
        out["canonical_check"] = rep.canonical_check
    if rep.generic is not None:
        out["generic"] = {"a": to_string(rep.generic.a), "b": to_string(rep.generic.b)}
    return out


def _verify(problem: Problem, sol: ImplicitSolution, cfg: ZeroTestConfig) -> dict:
    out: dict = {}
    try:
        verdict = check_solution(problem.ode, sol, cfg)
        out["residual"] = {"is_zero": verdict.is_zero, "method": verdict.method}
    except (EliminationFailed, Inconclusive) as exc:
        out["residual"] = {"is_zero": False, "method": "failed", "reason": str(exc)}
    rk4: dict = {"deviation": None}
    if problem.numeric is None:
        rk4["skipped"] = "no numeric_check options"
    elif not sol.explicit:
        rk4["skipped"] = "no explicit branch"
    else:
        branch = sol.explicit[0]
        missing = {s.name for s in branch.free_symbols | problem.ode.rhs.free_symbols} \
            - {c.name for c in problem.ode.coords} - set(problem.values)
        if missing:
            rk4["skipped"] = f"no values for {sorted(missing)}"
        else:
            try:
                dev = rk4_compare(problem.ode, branch, problem.numeric, problem.values)
                rk4.update(deviation=dev, max_error=problem.numeric.max_error,
                           passed=dev < problem.numeric.max_error)
            except SingularityError as exc:
                rk4.update(skipped=None, error=str(exc), passed=False)
    out["rk4"] = rk4
    out["passed"] = out["residual"]["is_zero"] and rk4.get("passed", True) is not False
    return out


def run_solve(problem: Problem, cfg: ZeroTestConfig, explicit: bool, verify: bool) -> tuple[dict, int]:
    if problem.transform is None or len(problem.symmetries) != 2:
        return {"error": "solve needs two symmetries and a transform", "stage": "input"}, EXIT_INPUT
    v1, v2 = problem.symmetries
    try:
        result = solve_pipeline(problem.ode, v1, v2, problem.transform, cfg)
    except PipelineError as exc:
        report = _stage_fields(exc.report)
        report.update(error=exc.message, stage=exc.stage)
        if exc.stage == "lintest":
            code = EXIT_INPUT if exc.message.startswith("NotCubic") else EXIT_NOT_LINEARISABLE
        else:
            code = EXIT_STAGE
        return report, code
    except Inconclusive as exc:
        return {"error": f"inconclusive zero test: {exc}", "stage": "sampling"}, EXIT_STAGE
    report = _stage_fields(result.report)
    sol = result.solution
    report["solution"] = {
        "implicit": to_string(sol.F),
        "constants": [c.name for c in sol.constants],
        "explicit": [to_string(b) for b in sol.explicit] if explicit else None,
    }
    code = EXIT_OK
    if verify:
        report["verification"] = _verify(problem, sol, cfg)
        if not report["verification"]["passed"]:
            report.update(stage="verify", error="verification failed")
            code = EXIT_STAGE
    return report, code


def cmd_solve(args) -> int:
    try:
        problem = load_problem(args.file)
        cfg = _overrides(problem.zero_test, args)
    except (ProblemError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report, code = run_solve(problem, cfg, args.explicit, args.verify)
    report.update(seed=cfg.rng_seed, versions=versions())
    text = [f"equation: {problem.ode}"]
    if "linearisable" in report:
        text.append(f"linearisable: {str(report['linearisable']).lower()}")
    if "pair_check" in report:
        pc = report["pair_check"]
        text.append(f"pair: X1 symmetry {_yn(pc[0])}, X2 symmetry {_yn(pc[1])}, "
                    f"[X1,X2]=X1 {_yn(pc[2])}, independent {_yn(pc[3])}")
    if "canonical_check" in report:
        text.append(f"canonical: {_yn(report['canonical_check'])}")
    if "generic" in report:
        text.append(f"generic form: a = {report['generic']['a']}, b = {report['generic']['b']}")
    if "solution" in report:
        text.append(f"solution: {report['solution']['implicit']} = 0")
        for b in report["solution"]["explicit"] or []:
            text.append(f"  y = {b}")
    if "verification" in report:
        ver = report["verification"]
        text.append(f"residual: {'zero' if ver['residual']['is_zero'] else 'NONZERO'} ({ver['residual']['method']})")
        rk = ver["rk4"]
        if rk.get("deviation") is not None:
            text.append(f"rk4: max deviation {rk['deviation']:.3e} ({'pass' if rk['passed'] else 'FAIL'})")
        else:
            text.append(f"rk4: {rk.get('error') or 'skipped, ' + str(rk.get('skipped'))}")
    if "error" in report:
        text.append(f"failed at {report['stage']}: {report['error']}")
    _emit(report, text, args)
    return code


# -------------------------------------------------------- selftest


SELFTEST_A = (sym_a, sp.Integer(1), sp.Integer(-1), sp.Rational(2, 3))
SELFTEST_AB = ((sp.Integer(1), sp.Integer(2)), (sp.Integer(-1), sp.Integer(3)),
               (sp.Rational(2, 3), sp.Rational(-1, 2)))


def run_selftest(cfg: ZeroTestConfig) -> dict:
    suites: dict = {}
    phi = {}
    for av in SELFTEST_A:
        params = ("a",) if av.free_symbols else ()
        ode = SecondOrderODE(P / X + av * P**3 / X, (X, Y, P), params)
        phi[to_string(av)] = [is_point_symmetry(v, ode, cfg) for v in phi_basis(av)]
    suites["phi_symmetries"] = phi
    free = SecondOrderODE(sp.S.Zero, (Z, W, Q))
    suites["omega_symmetries"] = [is_point_symmetry(v, free, cfg) for v in omega_basis()]
    bp = BasisParams(gamma, lam, delta)
    suites["structure_constants"] = same_structure_constants(gamma_basis(sym_a, bp), omega_basis(), cfg)
    suites["raw_phi_order_differs"] = not same_structure_constants(phi_basis(sym_a), omega_basis(), cfg)
    suites["alignment"] = [r == 0 for r in alignment_residuals(sym_a, bp)]
    mapping = []
    for ga, gb in SELFTEST_AB:
        g = GenericParams(ga, gb)
        sol = quadratic_solution(g.a, (Xt, Yt))
        T = reduce_parameter(g)
        pulled = ImplicitSolution(T.pull(sol.F), sol.constants, (X, Y))
        mapping.append(equivalent_zero(implicit_residual(generic_ode(g), pulled), cfg).is_zero)
    suites["solution_mapping"] = mapping

    def flat(v):
        if isinstance(v, dict):
            return [b for vv in v.values() for b in flat(vv)]
        if isinstance(v, list):
            return v
        return [v]

    return {"suites": suites, "passed": all(b for v in suites.values() for b in flat(v))}


def cmd_selftest(args) -> int:
    try:
        cfg = _overrides(DEFAULT_CONFIG, args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report = run_selftest(cfg)
    report.update(seed=cfg.rng_seed, versions=versions())
    s = report["suites"]
    text = []
    for av, verdicts in s["phi_symmetries"].items():
        text.append(f"Phi symmetries (a = {av}): {sum(verdicts)}/8")
    text.append(f"Omega symmetries: {sum(s['omega_symmetries'])}/8")
    text.append(f"structure constants match: {_yn(s['structure_constants'])}")
    text.append(f"raw Phi order differs: {_yn(s['raw_phi_order_differs'])}")
    text.append(f"alignment identities: {sum(s['alignment'])}/16")
    text.append(f"solution mapping: {sum(s['solution_mapping'])}/{len(s['solution_mapping'])}")
    text.append("selftest: " + ("PASS" if report["passed"] else "FAIL"))
    _emit(report, text, args)
    return EXIT_OK if report["passed"] else EXIT_STAGE


# ------------------------------------------------------------ main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="linode", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp_):
        sp_.add_argument("--seed", type=int, help="sampling seed")
        sp_.add_argument("--tol", type=float, help="relative tolerance of sampled zero tests")
        sp_.add_argument("--samples", type=int, help="points per sampled zero test")
        sp_.add_argument("--json", metavar="OUT", help="also write the report as JSON")

    chk = sub.add_parser("check", help="linearisability test only")
    chk.add_argument("file")
    common(chk)
    chk.set_defaults(func=cmd_check)

    sol = sub.add_parser("solve", help="full pipeline")
    sol.add_argument("file")
    sol.add_argument("--explicit", action="store_true", help="emit explicit branches y = ...")
    sol.add_argument("--verify", action="store_true", help="residual and RK4 checks")
    common(sol)
    sol.set_defaults(func=cmd_solve)

    st = sub.add_parser("selftest", help="built-in symmetry and algebra suites")
    common(st)
    st.set_defaults(func=cmd_selftest)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
