"""Independent checks of closed-form solutions: implicit residuals and RK4 comparison."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
import sympy as sp

from .canonical import ImplicitSolution
from .expr import (
    DEFAULT_CONFIG,
    EvaluationError,
    Expr,
    ZeroTestConfig,
    ZeroVerdict,
    compile_expression,
    equivalent_zero,
    tidy,
)
from .vecfield import SecondOrderODE


class EliminationFailed(ValueError):
    pass


class SingularityError(ArithmeticError):
    def __init__(self, location: float, message: str = ""):
        super().__init__(f"singularity near x = {location:.6g}" + (f": {message}" if message else ""))
        self.location = location


def _eliminate_constant(F: Expr, constants) -> tuple[sp.Symbol, Expr]:
    for k in constants:
        if k not in F.free_symbols:
            continue
        coeff = sp.diff(F, k)
        if k in coeff.free_symbols or coeff == 0:
            continue
        return k, -F.xreplace({k: 0}) / coeff
    raise EliminationFailed("no integration constant occurs linearly")


def implicit_residual(ode: SecondOrderODE, sol: ImplicitSolution) -> Expr:
    """``y'' - f(x, y, y')`` along the curve ``F = 0``.

    Derivatives come from implicit differentiation of ``F``; one linearly
    occurring constant is then eliminated using ``F = 0`` so the residual is
    an ordinary identity in the remaining symbols.  With no such constant the
    dependent variable is eliminated instead, when ``F`` is linear in it.
    """
    u, v, dv = ode.coords
    if sol.coords != (u, v):
        raise ValueError("solution and equation charts differ")
    F = sol.F
    Fx, Fy = sp.diff(F, u), sp.diff(F, v)
    slope = -Fx / Fy
    second = -(sp.diff(F, u, 2) + 2 * sp.diff(F, u, v) * slope + sp.diff(F, v, 2) * slope**2) / Fy
    residual = second - ode.rhs.xreplace({dv: slope})
    try:
        k, value = _eliminate_constant(F, sol.constants)
    except EliminationFailed:
        # a particular solution: restrict to the curve through v itself
        k, value = _eliminate_constant(F, (v,))
    return tidy(residual.xreplace({k: value}))


def check_solution(ode: SecondOrderODE, sol: ImplicitSolution,
                   cfg: ZeroTestConfig = DEFAULT_CONFIG) -> ZeroVerdict:
    return equivalent_zero(implicit_residual(ode, sol), cfg)


@dataclass(frozen=True)
class NumericCheckConfig:
    x_start: float = 0.0
    x_end: float = 1.0
    step: float = 1e-3
    max_error: float = 1e-6

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.step > (self.x_end - self.x_start) / 100 * (1 + 1e-12):
            raise ValueError("step must not exceed a hundredth of the interval")


def rk4_compare(ode: SecondOrderODE, explicit: Expr, cfg: NumericCheckConfig,
                values: Mapping[str, float] | None = None) -> float:
    """Largest deviation between RK4 integration and a closed-form solution.

    Initial data at ``cfg.x_start`` are read off ``explicit`` and its
    derivative; ``values`` fixes any remaining symbols.
    """
    u, v, dv = ode.coords
    values = {str(k): float(val) for k, val in (values or {}).items()}
    exact = compile_expression(explicit)
    slope = compile_expression(sp.diff(explicit, u))
    rhs = compile_expression(ode.rhs)
    un, vn, dn = u.name, v.name, dv.name

    def env(t, yv=None, pv=None):
        e = dict(values)
        e[un] = t
        if yv is not None:
            e[vn], e[dn] = yv, pv
        return e

    def f(t, state):
        try:
            return np.array([state[1], rhs(env(t, state[0], state[1]))])
        except EvaluationError as exc:
            raise SingularityError(t, str(exc)) from None

    n = int(round((cfg.x_end - cfg.x_start) / cfg.step))
    h = (cfg.x_end - cfg.x_start) / n
    try:
        state = np.array([exact(env(cfg.x_start)), slope(env(cfg.x_start))])
    except EvaluationError as exc:
        raise SingularityError(cfg.x_start, str(exc)) from None
    worst = 0.0
    t = cfg.x_start
    for i in range(n):
        k1 = f(t, state)
        k2 = f(t + h / 2, state + h / 2 * k1)
        k3 = f(t + h / 2, state + h / 2 * k2)
        k4 = f(t + h, state + h * k3)
        state = state + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = cfg.x_start + (i + 1) * h
        try:
            ref = exact(env(t))
        except EvaluationError as exc:
            raise SingularityError(t, str(exc)) from None
        if not math.isfinite(state[0]):
            raise SingularityError(t, "integration blew up")
        worst = max(worst, float(abs(state[0] - ref)))
    return worst
