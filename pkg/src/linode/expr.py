"""Expression core: parsing, printing, calculus, normalisation and zero testing.

Expressions are plain sympy trees.  sympy's automatic evaluation already gives
the canonical shape we rely on: rationals in lowest terms, flattened n-ary sums
and products, ``sqrt(u)`` stored as ``u**(1/2)`` and unary minus stored as a
product with ``-1``.  What sympy does not give us is a grammar we control, a
real-domain evaluator that distinguishes its failure modes, and a cheap,
reproducible identity test; those live here.
"""
from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

import numpy as np
import sympy as sp

Expr = sp.Expr

x, y, p = sp.symbols("x y p")
X, Y, P = sp.symbols("X Y P")
Xt, Yt, Pt = sp.symbols("Xt Yt Pt")
Z, W, Q = sp.symbols("Z W Q")

FUNCTIONS = {"sqrt": sp.sqrt, "exp": sp.exp, "log": sp.log}


class ExpressionError(Exception):
    pass


class ParseError(ExpressionError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownFunction(ParseError):
    pass


class EvaluationError(ExpressionError):
    """Base class for failures of :func:`evaluate`; the zero tester resamples on these."""


class DivisionByZero(EvaluationError):
    pass


class DomainError(EvaluationError):
    """Negative radicand, non-positive logarithm argument or overflow."""


class UnassignedSymbol(EvaluationError):
    pass


class Inconclusive(ExpressionError):
    """Too many sample points fell on singularities to reach a verdict."""


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)|(?P<name>[A-Za-z][A-Za-z0-9_]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[bad]!r}", bad)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, op: str) -> None:
        kind, value, pos = self.advance()
        if kind != "op" or value != op:
            raise ParseError(f"expected {op!r}, found {value or 'end of input'!r}", pos)

    def parse(self) -> Expr:
        e = self.expr()
        kind, value, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {value!r}", pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.advance()[1]
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.advance()[1]
            rhs = self.factor()
            e = e * rhs if op == "*" else e / rhs
        return e

    def factor(self) -> Expr:
        base = self.base()
        if self.peek()[:2] == ("op", "^"):
            pos = self.advance()[2]
            exponent = self.factor()
            if not exponent.is_Rational:
                raise ParseError("exponent must be a rational constant", pos)
            return base**exponent
        return base

    def base(self) -> Expr:
        kind, value, pos = self.advance()
        if kind == "num":
            return sp.Rational(value)
        if kind == "name":
            if self.peek()[:2] == ("op", "("):
                if value not in FUNCTIONS:
                    raise UnknownFunction(f"unknown function {value!r}", pos)
                self.advance()
                arg = self.expr()
                self.expect(")")
                return FUNCTIONS[value](arg)
            if value in FUNCTIONS:
                raise ParseError(f"function {value!r} needs an argument", pos)
            return sp.Symbol(value)
        if kind == "op" and value == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "op" and value == "-":
            return -self.factor()
        raise ParseError(f"unexpected {value or 'end of input'!r}", pos)


def parse_expression(text: str) -> Expr:
    """Parse ``text`` in the expression grammar into a normalised tree.

    ``^`` is right associative and binds tighter than ``*``; decimals are read
    exactly (``0.25`` becomes ``1/4``).
    """
    return _Parser(text).parse()


# --------------------------------------------------------------- printing

_ADD, _MUL, _POW, _ATOM = 1, 2, 3, 4


def _paren(s: str, prec: int, ctx: int) -> str:
    return f"({s})" if prec < ctx else s


def _print_rational(q: sp.Rational) -> tuple[str, int]:
    if q.q == 1:
        return str(q.p), (_ATOM if q.p >= 0 else _ADD)
    return f"{q.p}/{q.q}", (_MUL if q.p > 0 else _ADD)


def _print_power(base: Expr, exponent: sp.Rational) -> tuple[str, int]:
    # exponent is positive here; negative powers are printed as denominators
    if exponent == sp.Rational(1, 2):
        return f"sqrt({_print(base)[0]})", _ATOM
    b, bp = _print(base)
    b = _paren(b, bp, _ATOM)
    if exponent.q == 1:
        return f"{b}^{exponent.p}", _POW
    return f"{b}^({exponent.p}/{exponent.q})", _POW


def _print_mul(e: Expr) -> tuple[str, int]:
    coeff, factors = e.as_coeff_mul()
    coeff = sp.Rational(coeff)
    num, den = [], []
    for f in factors:
        if f.is_Pow and f.exp.is_Rational and f.exp < 0:
            den.append(f.base if f.exp == -1 else sp.Pow(f.base, -f.exp, evaluate=False))
        else:
            num.append(f)
    sign = "-" if coeff < 0 else ""
    coeff = abs(coeff)
    num_parts = [str(coeff.p)] if coeff.p != 1 or not num else []
    for f in num:
        s, sp_ = _print(f)
        num_parts.append(_paren(s, sp_, _MUL))
    den_parts = [str(coeff.q)] if coeff.q != 1 else []
    for f in den:
        s, sp_ = _print(f)
        den_parts.append(_paren(s, sp_, _MUL))
    out = "*".join(num_parts)
    if den_parts:
        d = "*".join(den_parts)
        if len(den_parts) > 1:
            d = f"({d})"
        out = f"{out}/{d}"
    prec = _ADD if sign else _MUL
    return sign + out, prec


def _print(e: Expr) -> tuple[str, int]:
    if e.is_Rational:
        return _print_rational(e)
    if e.is_Symbol:
        return e.name, _ATOM
    if e is sp.E:
        return "exp(1)", _ATOM
    if e.is_Add:
        terms = e.as_ordered_terms()
        s, prec = _print(terms[0])
        parts = [s]
        for t in terms[1:]:
            if t.could_extract_minus_sign():
                s, prec = _print(-t)
                parts.append(" - " + _paren(s, prec, _MUL))
            else:
                s, prec = _print(t)
                parts.append(" + " + s)
        return "".join(parts), _ADD
    if e.is_Mul:
        return _print_mul(e)
    if e.is_Pow:
        if not e.exp.is_Rational:
            raise TypeError(f"non-rational exponent in {e}")
        if e.exp < 0:
            return _print_mul(e)
        return _print_power(e.base, e.exp)
    if isinstance(e, sp.exp):
        return f"exp({_print(e.args[0])[0]})", _ATOM
    if isinstance(e, sp.log):
        return f"log({_print(e.args[0])[0]})", _ATOM
    raise TypeError(f"cannot print {type(e).__name__}: {e}")


def to_string(e: Expr) -> str:
    """Print ``e`` in the expression grammar; ``parse_expression`` inverts it."""
    return _print(sp.sympify(e))[0]


# --------------------------------------------------- calculus and algebra


def differentiate(e: Expr, v: sp.Symbol) -> Expr:
    return sp.diff(e, v)


def substitute(e: Expr, bindings: Mapping[sp.Symbol, Expr]) -> Expr:
    """Replace every bound symbol simultaneously."""
    if not bindings:
        return e
    return sp.sympify(e).xreplace(dict(bindings))


def unique_nodes(e: Expr):
    """Each distinct subexpression once; shared subtrees are not revisited."""
    seen = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if node in seen:
            continue
        seen.add(node)
        yield node
        stack.extend(node.args)


def is_rational_function(e: Expr) -> bool:
    for node in unique_nodes(e):
        if node.is_Pow and not node.exp.is_Integer:
            return False
        if node.is_Function or node is sp.E or node.is_Float or node in (sp.pi, sp.I):
            return False
    return True


def normalise_rational(e: Expr) -> tuple[Expr, bool]:
    """Cancel a rational function to lowest terms.

    Returns ``(result, True)`` for rational input; anything carrying a
    radical, exponential or logarithm comes back unchanged with ``False``.
    """
    e = sp.sympify(e)
    if not is_rational_function(e):
        return e, False
    return cancel_rational(e), True


def cancel_rational(e: Expr) -> Expr:
    """Lowest-terms form of a rational function.

    The tree is folded bottom-up into a sparse fraction field, once per distinct
    subexpression, so shared subtrees cost nothing extra and intermediate
    swell is cancelled at every node.  Raises ``ZeroDivisionError`` when a
    denominator vanishes identically.
    """
    gens = sorted(e.free_symbols, key=sp.default_sort_key)
    if not gens:
        return sp.nsimplify(e) if e.has(sp.Float) else sp.cancel(e)
    K, *elems = sp.field(gens, sp.QQ)
    memo = dict(zip(gens, elems))
    stack = [(e, False)]
    while stack:
        node, ready = stack.pop()
        if node in memo:
            continue
        if node.is_Rational:
            memo[node] = K(node)
        elif not ready:
            stack.append((node, True))
            stack.extend((arg, False) for arg in node.args if arg not in memo)
        elif node.is_Add:
            acc = K(0)
            for arg in node.args:
                acc += memo[arg]
            memo[node] = acc
        elif node.is_Mul:
            acc = K(1)
            for arg in node.args:
                acc *= memo[arg]
            memo[node] = acc
        elif node.is_Pow and node.exp.is_Integer:
            memo[node] = memo[node.base] ** int(node.exp)
        else:
            raise ValueError(f"not a rational function: {node}")
    return sp.cancel(memo[e].as_expr())


def tidy(e: Expr, size_limit: int = 3000) -> Expr:
    """Cancel ``e`` when it is a rational function of moderate size."""
    e = sp.sympify(e)
    if tree_size(e) <= size_limit:
        e, _ = normalise_rational(e)
    return e


def tree_size(e: Expr) -> int:
    """Number of distinct subexpressions (DAG size, not printed length)."""
    return sum(1 for _ in unique_nodes(e))


def free_names(e: Expr) -> set[str]:
    return {s.name for s in sp.sympify(e).free_symbols}


# ------------------------------------------------------------- evaluation


class _Scale:
    __slots__ = ("value",)

    def __init__(self) -> None:
        self.value = 0.0


def _pow(b: float, e: float, integral: bool) -> float:
    if b == 0.0 and e < 0:
        raise DivisionByZero("zero raised to a negative power")
    if b < 0 and not integral:
        raise DomainError("fractional power of a negative number")
    try:
        return b**e
    except OverflowError as exc:
        raise DomainError("overflow") from exc
    except ZeroDivisionError as exc:
        raise DivisionByZero("division by zero") from exc


def _compile(e: Expr, scale: _Scale | None, cache: dict) -> Callable[[Mapping[str, float]], float]:
    if e in cache:
        return cache[e]
    fn = _compile_node(e, scale, cache)
    if scale is not None:
        inner = fn

        def fn(env, inner=inner):
            v = inner(env)
            a = abs(v)
            if a > scale.value:
                scale.value = a
            return v

    cache[e] = fn
    return fn


def _compile_node(e: Expr, scale: _Scale | None, cache: dict):
    if e.is_Rational:
        c = float(e.p) / float(e.q) if abs(e.p) < 2**1000 else float(Fraction(e.p, e.q))
        return lambda env: c
    if e.is_Float:
        c = float(e)
        return lambda env: c
    if e is sp.E:
        return lambda env: math.e
    if e is sp.pi:
        return lambda env: math.pi
    if e.is_Symbol:
        name = e.name

        def sym(env):
            try:
                return env[name]
            except KeyError:
                raise UnassignedSymbol(name) from None

        return sym
    if e is sp.zoo or e is sp.nan or e.is_infinite:
        def bad(env):
            raise DivisionByZero("expression contains an infinite constant")

        return bad
    if e.is_Add:
        parts = [_compile(a, scale, cache) for a in e.args]
        return lambda env: math.fsum(f(env) for f in parts)
    if e.is_Mul:
        parts = [_compile(a, scale, cache) for a in e.args]

        def mul(env):
            r = 1.0
            for f in parts:
                r *= f(env)
            return r

        return mul
    if e.is_Pow:
        if not e.exp.is_Rational:
            raise TypeError(f"non-rational exponent in {e}")
        base = _compile(e.base, scale, cache)
        integral = e.exp.is_Integer
        ex = int(e.exp) if integral else float(e.exp)
        if e.exp == sp.Rational(1, 2):
            def root(env):
                b = base(env)
                if b < 0:
                    raise DomainError("negative radicand")
                return math.sqrt(b)

            return root
        return lambda env: _pow(base(env), ex, integral)
    if isinstance(e, sp.exp):
        arg = _compile(e.args[0], scale, cache)

        def ex_(env):
            try:
                return math.exp(arg(env))
            except OverflowError as exc:
                raise DomainError("exp overflow") from exc

        return ex_
    if isinstance(e, sp.log):
        arg = _compile(e.args[0], scale, cache)

        def lg(env):
            a = arg(env)
            if a <= 0:
                raise DomainError("logarithm of a non-positive number")
            return math.log(a)

        return lg
    raise TypeError(f"cannot evaluate {type(e).__name__}: {e}")


def compile_expression(e: Expr) -> Callable[[Mapping[str, float]], float]:
    """Compile ``e`` into a callable taking a ``{name: value}`` mapping."""
    fn = _compile(sp.sympify(e), None, {})

    def run(env):
        try:
            v = fn(env)
        except ZeroDivisionError as exc:
            raise DivisionByZero(str(exc)) from exc
        if not math.isfinite(v):
            raise DomainError("non-finite value")
        return v

    return run


def evaluate(e: Expr, assignment: Mapping[str | sp.Symbol, float]) -> float:
    env = {(k.name if isinstance(k, sp.Symbol) else k): float(v) for k, v in assignment.items()}
    return compile_expression(e)(env)


def evaluate_with_scale(e: Expr, env: Mapping[str, float]) -> tuple[float, float]:
    """Evaluate and also report the largest magnitude of any subterm."""
    scale = _Scale()
    fn = _compile(sp.sympify(e), scale, {})
    try:
        v = fn(env)
    except ZeroDivisionError as exc:
        raise DivisionByZero(str(exc)) from exc
    if not math.isfinite(v) or not math.isfinite(scale.value):
        raise DomainError("non-finite value")
    return v, scale.value


# ----------------------------------------------------------- zero testing


@dataclass(frozen=True)
class ZeroTestConfig:
    sample_count: int = 24
    tolerance: float = 1e-8
    sample_box: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    default_box: tuple[float, float] = (-2.0, 2.0)
    rng_seed: int = 0
    max_retries: int = 2000
    exact_size_limit: int = 3000

    def __post_init__(self):
        if self.sample_count < 8:
            raise ValueError("sample_count must be at least 8")
        if not 0 < self.tolerance <= 1e-4:
            raise ValueError("tolerance must lie in (0, 1e-4]")
        if self.max_retries < 0:
            raise ValueError("max_retries must be non-negative")

    def __hash__(self):
        return hash((self.sample_count, self.tolerance, tuple(sorted(self.sample_box.items())),
                     self.default_box, self.rng_seed, self.max_retries, self.exact_size_limit))

    def box(self, name: str) -> tuple[float, float]:
        return tuple(self.sample_box.get(name, self.default_box))

    def with_box(self, **boxes: tuple[float, float]) -> ZeroTestConfig:
        merged = dict(self.sample_box)
        merged.update(boxes)
        return ZeroTestConfig(self.sample_count, self.tolerance, merged, self.default_box,
                              self.rng_seed, self.max_retries, self.exact_size_limit)


DEFAULT_CONFIG = ZeroTestConfig()


@dataclass(frozen=True)
class ZeroVerdict:
    is_zero: bool
    method: str  # "exact" or "sampled"
    witness: dict[str, float] | None = None
    samples: int = 0

    def __bool__(self) -> bool:
        return self.is_zero


def _digest(e: Expr) -> bytes:
    # structural hash memoised over shared subtrees; srepr is exponential on DAGs
    memo: dict = {}
    stack = [(e, False)]
    while stack:
        node, ready = stack.pop()
        if node in memo:
            continue
        if not node.args:
            memo[node] = hashlib.blake2b(f"{type(node).__name__}:{node}".encode(), digest_size=8).digest()
        elif ready:
            h = hashlib.blake2b(type(node).__name__.encode(), digest_size=8)
            for arg in node.args:
                h.update(memo[arg])
            memo[node] = h.digest()
        else:
            stack.append((node, True))
            stack.extend((arg, False) for arg in node.args if arg not in memo)
    return memo[e]


def expression_rng(e: Expr, seed: int) -> np.random.Generator:
    """Generator seeded from ``seed`` and a stable digest of ``e``."""
    digest = _digest(e)
    return np.random.default_rng([seed, int.from_bytes(digest, "little")])


_WIDEN_EVERY = 100


def sample_points(e: Expr, cfg: ZeroTestConfig, rng: np.random.Generator | None = None):
    """Yield ``(env, value, scale)`` at random points where ``e`` evaluates.

    Raises :class:`Inconclusive` once ``max_retries`` draws have failed.
    """
    e = sp.sympify(e)
    names = sorted(free_names(e))
    boxes = [cfg.box(n) for n in names]
    scale = _Scale()
    fn = _compile(e, scale, {})
    rng = rng if rng is not None else expression_rng(e, cfg.rng_seed)
    failures = hits = 0
    widen = 1.0
    while True:
        env = {n: float(rng.uniform(lo * widen, hi * widen)) for n, (lo, hi) in zip(names, boxes)}
        scale.value = 0.0
        try:
            v = fn(env)
            if not math.isfinite(v) or not math.isfinite(scale.value):
                raise DomainError("non-finite value")
        except (EvaluationError, ZeroDivisionError, OverflowError, ValueError):
            failures += 1
            if failures > cfg.max_retries:
                raise Inconclusive(f"{failures} sample points hit singularities") from None
            # a domain with no valid point in the box (e.g. a radicand
            # positive only far out) gets a wider box, deterministically
            if not hits and failures % _WIDEN_EVERY == 0:
                widen *= 4.0
            continue
        hits += 1
        yield env, v, scale.value


def equivalent_zero(e: Expr, cfg: ZeroTestConfig = DEFAULT_CONFIG) -> ZeroVerdict:
    """Decide whether ``e`` vanishes identically.

    Rational functions are settled exactly by cancellation.  Anything else is
    evaluated at ``cfg.sample_count`` seeded random points; a point passes when
    ``|value| <= tolerance * (1 + largest subterm magnitude)``.
    """
    e = sp.sympify(e)
    if e == 0:
        return ZeroVerdict(True, "exact")
    exact_nonzero = False
    if tree_size(e) <= cfg.exact_size_limit:
        reduced, rational = normalise_rational(e)
        if rational:
            if reduced == 0:
                return ZeroVerdict(True, "exact")
            exact_nonzero = True
            e = reduced
    if exact_nonzero and not e.free_symbols:
        return ZeroVerdict(False, "exact", {}, 0)
    if not e.free_symbols:
        try:
            v, scale = evaluate_with_scale(e, {})
        except EvaluationError as exc:
            raise Inconclusive(str(exc)) from None
        ok = abs(v) <= cfg.tolerance * (1.0 + scale)
        return ZeroVerdict(ok, "sampled", None if ok else {}, 1)
    taken = 0
    for env, v, scale in sample_points(e, cfg):
        taken += 1
        if abs(v) > cfg.tolerance * (1.0 + scale):
            return ZeroVerdict(False, "exact" if exact_nonzero else "sampled", env, taken)
        if taken >= cfg.sample_count:
            break
    if exact_nonzero:
        return ZeroVerdict(False, "exact", None, taken)
    return ZeroVerdict(True, "sampled", None, taken)


def is_zero(e: Expr, cfg: ZeroTestConfig = DEFAULT_CONFIG) -> bool:
    return equivalent_zero(e, cfg).is_zero


def constant_value(e: Expr, variables, cfg: ZeroTestConfig = DEFAULT_CONFIG) -> Expr | None:
    """Closed form of an expression known to be constant in ``variables``.

    Tries rational cancellation, then substitution of small rational points
    chosen so every radicand is a perfect square, then high-precision rational
    recognition when nothing symbolic remains.  Every candidate is confirmed
    with :func:`equivalent_zero`; ``None`` means no closed form was found.
    """
    e = sp.sympify(e)
    variables = [v for v in variables if v in e.free_symbols]
    if not variables:
        return tidy(e)
    reduced, rational = normalise_rational(e) if tree_size(e) <= cfg.exact_size_limit else (e, False)
    if rational and not (reduced.free_symbols & set(variables)):
        return reduced
    radicands = sorted({n.base for n in unique_nodes(e)
                        if n.is_Pow and n.exp.is_Rational and not n.exp.is_Integer}, key=sp.default_sort_key)
    for point in _reference_points(variables):
        try:
            if any(not _perfect_square(r.xreplace(point)) for r in radicands):
                continue
        except (TypeError, ValueError):
            continue
        value = _settle(e.xreplace(point))
        if value is None:
            continue
        if is_zero(e - value, cfg):
            return value
    for point in _reference_points(variables):
        value = _settle(e.xreplace(point), numeric_only=True)
        if value is not None and is_zero(e - value, cfg):
            return value
    return None


_REFERENCE_VALUES = [sp.Rational(v) for v in
                     ("2", "3", "-3", "1/2", "3/2", "5/2", "4", "5", "-1/2", "-2", "1", "-1",
                      "1/3", "2/3", "3/4", "5/4", "-5/4", "-8", "-15", "1/4", "9/4", "6", "8")]


def _reference_points(variables):
    import itertools

    for combo in itertools.product(_REFERENCE_VALUES, repeat=len(variables)):
        yield dict(zip(variables, combo))


def _perfect_square(r: Expr) -> bool:
    r = sp.sympify(r)
    if r.free_symbols:
        return False
    r = sp.nsimplify(r) if not r.is_Rational else r
    if not r.is_Rational or r <= 0:
        return False
    return sp.sqrt(r).is_Rational


def _settle(v: Expr, numeric_only: bool = False) -> Expr | None:
    if v.has(sp.zoo, sp.nan, sp.oo, -sp.oo):
        return None
    if not numeric_only and is_rational_function(v):
        try:
            v = cancel_rational(v)
        except (sp.PolynomialError, ZeroDivisionError, ValueError):
            return None
        return None if v.has(sp.zoo, sp.nan) else v
    if v.free_symbols:
        return None
    try:
        num = sp.N(v, 60)
    except (TypeError, ValueError):
        return None
    if not num.is_real or not num.is_finite:
        return None
    frac = Fraction(str(num)).limit_denominator(10**8)
    cand = sp.Rational(frac.numerator, frac.denominator)
    if abs(sp.N(v - cand, 60)) > sp.Float("1e-40"):
        return None
    return cand
