"""Planar vector fields, second prolongation and symmetry checks."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import sympy as sp

from .expr import (
    DEFAULT_CONFIG,
    Expr,
    ZeroTestConfig,
    equivalent_zero,
    free_names,
    parse_expression,
    tidy,
    to_string,
    p,
    x,
    y,
)

Coords = tuple[sp.Symbol, sp.Symbol]

DERIVATIVE_SYMBOLS = {"p", "P", "Pt", "Q"}


@dataclass(frozen=True)
class VectorField:
    """The generator ``xi * d/du + eta * d/dv`` in the chart ``coords = (u, v)``."""

    xi: Expr
    eta: Expr
    coords: Coords = (x, y)

    def __post_init__(self):
        object.__setattr__(self, "xi", sp.sympify(self.xi))
        object.__setattr__(self, "eta", sp.sympify(self.eta))
        if (free_names(self.xi) | free_names(self.eta)) & DERIVATIVE_SYMBOLS:
            raise ValueError("vector field components may not reference a derivative symbol")

    @classmethod
    def parse(cls, xi: str, eta: str, coords: Coords = (x, y)) -> VectorField:
        return cls(parse_expression(xi), parse_expression(eta), coords)

    @classmethod
    def from_dict(cls, d: dict, coords: Coords = (x, y)) -> VectorField:
        return cls.parse(d["xi"], d["eta"], coords)

    def to_dict(self) -> dict[str, str]:
        return {"xi": to_string(self.xi), "eta": to_string(self.eta)}

    def __call__(self, f: Expr) -> Expr:
        u, v = self.coords
        return self.xi * sp.diff(f, u) + self.eta * sp.diff(f, v)

    def _check(self, other: VectorField) -> None:
        if self.coords != other.coords:
            raise ValueError(f"fields live in different charts: {self.coords} vs {other.coords}")

    def __add__(self, other: VectorField) -> VectorField:
        self._check(other)
        return VectorField(self.xi + other.xi, self.eta + other.eta, self.coords)

    def __sub__(self, other: VectorField) -> VectorField:
        self._check(other)
        return VectorField(self.xi - other.xi, self.eta - other.eta, self.coords)

    def __neg__(self) -> VectorField:
        return VectorField(-self.xi, -self.eta, self.coords)

    def __rmul__(self, c) -> VectorField:
        return VectorField(c * self.xi, c * self.eta, self.coords)

    def tidy(self) -> VectorField:
        return VectorField(tidy(self.xi), tidy(self.eta), self.coords)

    def is_zero(self, cfg: ZeroTestConfig = DEFAULT_CONFIG) -> bool:
        return bool(equivalent_zero(self.xi, cfg)) and bool(equivalent_zero(self.eta, cfg))

    def __str__(self) -> str:
        u, v = self.coords
        return f"({to_string(self.xi)})*d/d{u} + ({to_string(self.eta)})*d/d{v}"


def zero_field(coords: Coords = (x, y)) -> VectorField:
    return VectorField(sp.S.Zero, sp.S.Zero, coords)


@dataclass(frozen=True)
class SecondOrderODE:
    """``v'' = rhs(u, v, dv)`` with ``coords = (u, v, dv)``."""

    rhs: Expr
    coords: tuple[sp.Symbol, sp.Symbol, sp.Symbol] = (x, y, p)
    params: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "rhs", sp.sympify(self.rhs))
        object.__setattr__(self, "params", tuple(self.params))
        allowed = {c.name for c in self.coords} | set(self.params)
        stray = free_names(self.rhs) - allowed
        if stray:
            raise ValueError(f"undeclared symbols in right-hand side: {sorted(stray)}")

    @classmethod
    def parse(cls, rhs: str, params: Sequence[str] = (), coords=(x, y, p)) -> SecondOrderODE:
        return cls(parse_expression(rhs), coords, tuple(params))

    @property
    def chart(self) -> Coords:
        return self.coords[0], self.coords[1]

    def total_derivative(self, e: Expr) -> Expr:
        """Total derivative along solutions, with the second derivative replaced on-shell."""
        u, v, dv = self.coords
        return sp.diff(e, u) + dv * sp.diff(e, v) + self.rhs * sp.diff(e, dv)

    def __str__(self) -> str:
        return f"{self.coords[1]}'' = {to_string(self.rhs)}"


@dataclass(frozen=True)
class ProlongedField:
    xi: Expr
    eta: Expr
    eta1: Expr
    eta2: Expr


def _check_chart(v: VectorField, ode: SecondOrderODE) -> None:
    if v.coords != ode.chart:
        raise ValueError(f"field chart {v.coords} does not match equation chart {ode.chart}")


def prolong2(v: VectorField, ode: SecondOrderODE) -> ProlongedField:
    """Second prolongation of ``v`` evaluated on solutions of ``ode``."""
    _check_chart(v, ode)
    dv = ode.coords[2]
    eta1 = ode.total_derivative(v.eta) - dv * ode.total_derivative(v.xi)
    eta2 = ode.total_derivative(eta1) - ode.rhs * ode.total_derivative(v.xi)
    return ProlongedField(v.xi, v.eta, tidy(eta1), tidy(eta2))


def symmetry_residual(v: VectorField, ode: SecondOrderODE) -> Expr:
    u, w, dv = ode.coords
    pr = prolong2(v, ode)
    f = ode.rhs
    return pr.eta2 - pr.xi * sp.diff(f, u) - pr.eta * sp.diff(f, w) - pr.eta1 * sp.diff(f, dv)


def is_point_symmetry(v: VectorField, ode: SecondOrderODE, cfg: ZeroTestConfig = DEFAULT_CONFIG) -> bool:
    return equivalent_zero(symmetry_residual(v, ode), cfg).is_zero


def commutator(v: VectorField, w: VectorField) -> VectorField:
    v._check(w)
    return VectorField(tidy(v(w.xi) - w(v.xi)), tidy(v(w.eta) - w(v.eta)), v.coords)


def is_proportional(v: VectorField, w: VectorField, cfg: ZeroTestConfig = DEFAULT_CONFIG) -> bool:
    """True when the two fields are parallel everywhere (determinant identically zero)."""
    v._check(w)
    return equivalent_zero(v.xi * w.eta - w.xi * v.eta, cfg).is_zero


@dataclass(frozen=True)
class LiePairReport:
    first_is_symmetry: bool
    second_is_symmetry: bool
    commutator_is_first: bool
    not_proportional: bool

    @property
    def admissible(self) -> bool:
        return all(self.as_list())

    def as_list(self) -> list[bool]:
        return [self.first_is_symmetry, self.second_is_symmetry,
                self.commutator_is_first, self.not_proportional]


def check_lie_pair(v1: VectorField, v2: VectorField, ode: SecondOrderODE,
                   cfg: ZeroTestConfig = DEFAULT_CONFIG) -> LiePairReport:
    """Check that ``(v1, v2)`` is a non-commuting symmetry pair with ``[v1, v2] = v1``."""
    return LiePairReport(
        is_point_symmetry(v1, ode, cfg),
        is_point_symmetry(v2, ode, cfg),
        (commutator(v1, v2) - v1).is_zero(cfg),
        not is_proportional(v1, v2, cfg),
    )
