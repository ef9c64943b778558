"""Cubic-in-derivative extraction and the two invariant linearisation conditions."""
from __future__ import annotations

from dataclasses import dataclass, field

import sympy as sp

from .expr import DEFAULT_CONFIG, Expr, ZeroTestConfig, ZeroVerdict, equivalent_zero, tidy, x, y
from .vecfield import SecondOrderODE


class NotCubic(ValueError):
    pass


@dataclass(frozen=True)
class CubicCoeffs:
    """Coefficients of ``y'' = A p^3 + B p^2 + C p + D``."""

    A: Expr
    B: Expr
    C: Expr
    D: Expr
    coords: tuple[sp.Symbol, sp.Symbol] = (x, y)

    def reconstruct(self, dv: sp.Symbol) -> Expr:
        return self.A * dv**3 + self.B * dv**2 + self.C * dv + self.D


def extract_cubic(ode: SecondOrderODE, cfg: ZeroTestConfig = DEFAULT_CONFIG) -> CubicCoeffs:
    u, v, dv = ode.coords
    f = ode.rhs
    if not equivalent_zero(sp.diff(f, dv, 4), cfg):
        raise NotCubic(f"right-hand side is not cubic in {dv}")
    coeffs = [tidy(sp.diff(f, dv, k).subs(dv, 0) / sp.factorial(k)) for k in range(4)]
    if any(dv in c.free_symbols for c in coeffs):
        raise NotCubic("coefficients still depend on the derivative")
    c = CubicCoeffs(coeffs[3], coeffs[2], coeffs[1], coeffs[0], (u, v))
    if not equivalent_zero(c.reconstruct(dv) - f, cfg):
        raise NotCubic("cubic reconstruction does not reproduce the right-hand side")
    return c


def invariant_conditions(c: CubicCoeffs) -> tuple[Expr, Expr]:
    u, v = c.coords
    A, B, C, D = c.A, c.B, c.C, c.D

    def d(e, *vs):
        return sp.diff(e, *vs)

    r1 = (3 * d(A, u, u) + 3 * d(A, u) * C - 3 * d(A, v) * D + 3 * A * d(C, u) + d(C, v, v)
          - 6 * A * d(D, v) + B * d(C, v) - 2 * B * d(B, u) - 2 * d(B, u, v))
    r2 = (6 * d(A, u) * D - 3 * d(B, v) * D + 3 * A * d(D, u) + d(B, u, u) - 2 * d(C, u, v)
          - 3 * B * d(D, v) + 3 * d(D, v, v) + 2 * C * d(C, v) - C * d(B, u))
    return tidy(r1), tidy(r2)


@dataclass(frozen=True)
class LinearisabilityReport:
    linearisable: bool
    coeffs: CubicCoeffs | None = None
    residuals: tuple[Expr, Expr] | None = None
    verdicts: tuple[ZeroVerdict, ...] = field(default_factory=tuple)
    reason: str = ""

    @property
    def not_cubic(self) -> bool:
        return self.coeffs is None


def is_linearisable(ode: SecondOrderODE, cfg: ZeroTestConfig = DEFAULT_CONFIG) -> LinearisabilityReport:
    try:
        c = extract_cubic(ode, cfg)
    except NotCubic as exc:
        return LinearisabilityReport(False, reason=f"NotCubic: {exc}")
    r1, r2 = invariant_conditions(c)
    verdicts = (equivalent_zero(r1, cfg), equivalent_zero(r2, cfg))
    ok = all(verdicts)
    reason = "" if ok else "invariant conditions fail"
    return LinearisabilityReport(ok, c, (r1, r2), verdicts, reason)
