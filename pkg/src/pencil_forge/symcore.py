"""Exact symbolic arithmetic kernel.

Scalars live in the field of multivariate rational functions over Q,
optionally extended by a single square root and by logarithm atoms that
occur linearly.  Every expression has a canonical normal form

    a + b*sqrt(s) + sum_i (c_i + d_i*sqrt(s)) * ln(t_i)

where a, b, c_i, d_i are GCD-reduced polynomial fractions, s is a
canonical square-free radicand and the ln arguments t_i are canonical
rational functions.  Zero testing is a syntactic check on that form;
logarithm atoms and unevaluated univariate function atoms (with formal
derivative symbols such as gamma', gamma'') are treated as algebraically
independent.

Polynomial GCD, expansion and square-free decomposition are delegated to
sympy; the grammar, the normal form and the decision procedures here are
self-contained.
"""

from __future__ import annotations

import hashlib
import os
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import mpmath
import sympy as sp
from sympy.core.function import AppliedUndef

__all__ = [
    "Context",
    "Expr",
    "ParseError",
    "UnknownSymbolError",
    "NormalizationError",
    "MultipleRadicandsError",
    "NonlinearLogarithmError",
    "NotIntegrableError",
    "JetOrderError",
    "parse",
    "diff",
    "total_x_derivative",
    "is_zero",
    "antiderivative",
    "substitute",
    "render",
    "sqrt",
    "ln",
    "set_probe_points",
    "probe_report",
    "reset_probe_state",
]


class ParseError(ValueError):
    """Malformed expression text; ``position`` is the 1-based column."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (column {position})")
        self.position = position


class UnknownSymbolError(ParseError):
    """Identifier not declared in the context."""

    def __init__(self, name: str, position: int):
        super().__init__(f"unknown symbol '{name}'", position)
        self.name = name


class NormalizationError(ValueError):
    pass


class MultipleRadicandsError(NormalizationError):
    """More than one distinct radicand survives normalization."""


class NonlinearLogarithmError(NormalizationError):
    """Logarithm atoms occur non-linearly (products, powers or quotients)."""


class NotIntegrableError(ValueError):
    """Antiderivative outside the rational-plus-simple-poles class."""


class JetOrderError(ValueError):
    """Total x-derivative applied to an expression with second-order jets."""


# ---------------------------------------------------------------------------
# Context


class FunctionAtom:
    """Unevaluated univariate function of a declared argument expression.

    Derivatives are formal: order k is the applied symbol name + k primes,
    e.g. gamma, gamma', gamma''.  Orders are generated on demand and carry
    no evaluation rules beyond the chain rule used by :func:`diff`.
    """

    def __init__(self, name: str, arg: sp.Expr, nonzero: bool = False):
        self.name = name
        self.arg = arg
        self.nonzero = nonzero

    def applied(self, order: int) -> sp.Expr:
        return sp.Function(self.name + "'" * order)(self.arg)

    def __repr__(self):
        return f"FunctionAtom({self.name}({self.arg}))"


class Context:
    """Declares field variables with their jets, independent variables,
    parameters with nonzero assumptions, and function atoms.

    Immutable after construction; extension returns a new context that
    shares all symbol objects with the original.
    """

    def __init__(
        self,
        fields: Sequence[str],
        independents: Sequence[str] = ("x", "t"),
        parameters: Sequence[str] = (),
        functions: Sequence[tuple] = (),
        assume_nonzero: Sequence[str] = (),
    ):
        self.fields = tuple(fields)
        self.independents = tuple(independents)
        self.parameters = tuple(parameters)
        self.n = len(self.fields)

        names: dict[str, str] = {}

        def declare(name: str, kind: str) -> sp.Symbol:
            if not name or not (name[0].isalpha()):
                raise ValueError(f"invalid symbol name {name!r}")
            if name in names:
                raise ValueError(f"duplicate symbol name {name!r}")
            names[name] = kind
            return sp.Symbol(name)

        self._field_syms = tuple(declare(f, "field") for f in self.fields)
        self._indep_syms = tuple(declare(v, "independent") for v in self.independents)
        self._param_syms = tuple(declare(p, "parameter") for p in self.parameters)
        self._jet1_syms = tuple(declare(f + "_x", "jet1") for f in self.fields)
        self._jet2_syms = tuple(declare(f + "_xx", "jet2") for f in self.fields)
        self._kinds = names

        self._atoms: dict[str, FunctionAtom] = {}
        for spec_entry in functions:
            if len(spec_entry) == 3:
                fname, arg_text, nonzero = spec_entry
            else:
                fname, arg_text = spec_entry
                nonzero = False
            if fname in names or fname in self._atoms:
                raise ValueError(f"duplicate symbol name {fname!r}")
            arg = self._parse_sympy(arg_text)
            if arg.atoms(sp.log) or any(
                isinstance(p.exp, sp.Rational) and p.exp.q != 1
                for p in arg.atoms(sp.Pow)
            ):
                raise ValueError(
                    f"function atom argument must be rational: {arg_text!r}"
                )
            self._atoms[fname] = FunctionAtom(fname, arg, bool(nonzero))

        self.assumptions: tuple[Expr, ...] = tuple(
            self.parse(text) for text in assume_nonzero
        )

    # -- symbol lookup ------------------------------------------------

    def sym(self, name: str) -> sp.Symbol:
        if name not in self._kinds:
            raise KeyError(f"symbol {name!r} not declared")
        return sp.Symbol(name)

    def kind(self, name: str) -> str | None:
        return self._kinds.get(name)

    def has(self, name: str) -> bool:
        return name in self._kinds or self._base_atom(name) is not None

    def _base_atom(self, name: str) -> FunctionAtom | None:
        base = name.rstrip("'")
        return self._atoms.get(base)

    def atom(self, name: str) -> FunctionAtom:
        fa = self._base_atom(name)
        if fa is None:
            raise KeyError(f"function atom {name!r} not declared")
        return fa

    @property
    def field_syms(self) -> tuple[sp.Symbol, ...]:
        return self._field_syms

    @property
    def jet1_syms(self) -> tuple[sp.Symbol, ...]:
        return self._jet1_syms

    @property
    def jet2_syms(self) -> tuple[sp.Symbol, ...]:
        return self._jet2_syms

    @property
    def x(self) -> sp.Symbol:
        return sp.Symbol(self.independents[0])

    # -- construction helpers ------------------------------------------

    def number(self, value) -> "Expr":
        if isinstance(value, Fraction):
            value = sp.Rational(value.numerator, value.denominator)
        return Expr(self, sp.Rational(value))

    def var(self, name: str) -> "Expr":
        return Expr(self, self.sym(name))

    def applied_atom(self, name: str, order: int = 0) -> "Expr":
        return Expr(self, self.atom(name).applied(order))

    def parse(self, text: str) -> "Expr":
        return parse(text, self)

    def _parse_sympy(self, text: str) -> sp.Expr:
        return _Parser(text, self).parse()

    def extend(
        self,
        parameters: Sequence[str] = (),
        assume_nonzero: Sequence[str] = (),
    ) -> "Context":
        """New context with extra parameters, sharing all existing symbols."""
        for p in parameters:
            if self.has(p):
                raise ValueError(f"duplicate symbol name {p!r}")
        ctx = Context(
            fields=self.fields,
            independents=self.independents,
            parameters=self.parameters + tuple(parameters),
        )
        # function atoms carry parsed arguments; copy instead of reparsing
        ctx._atoms = dict(self._atoms)
        ctx.assumptions = self.assumptions + tuple(
            ctx.parse(text) for text in assume_nonzero
        )
        return ctx

    def subsumes(self, other: "Context") -> bool:
        if other is self:
            return True
        return (
            set(other._kinds) <= set(self._kinds)
            and set(other._atoms) <= set(self._atoms)
        )

    def classify_atom(self, applied: sp.Expr) -> tuple[FunctionAtom, int] | None:
        """Map an AppliedUndef node back to (family, derivative order)."""
        if not isinstance(applied, AppliedUndef):
            return None
        fname = applied.func.__name__
        base = fname.rstrip("'")
        fa = self._atoms.get(base)
        if fa is None:
            return None
        return fa, len(fname) - len(base)

    def __repr__(self):
        return f"Context(fields={self.fields}, parameters={self.parameters})"


def _join(a: Context, b: Context) -> Context:
    if a.subsumes(b):
        return a
    if b.subsumes(a):
        return b
    raise ValueError("expressions from incompatible contexts")


# ---------------------------------------------------------------------------
# Normal form


@dataclass(frozen=True)
class _NormalForm:
    """Canonical decomposition: parts maps (log_arg|None, radical?) to a
    GCD-reduced fraction (num, den) of expanded polynomials."""

    radicand: sp.Expr | None
    parts: tuple[tuple[tuple[sp.Expr | None, bool], tuple[sp.Expr, sp.Expr]], ...]

    @property
    def is_zero(self) -> bool:
        return not self.parts

    def rebuild(self) -> sp.Expr:
        total = sp.Integer(0)
        for (log_arg, has_rad), (num, den) in self.parts:
            term = num / den
            if has_rad:
                term = term * sp.sqrt(self.radicand)
            if log_arg is not None:
                term = term * sp.log(log_arg)
            total += term
        return total


def _split_square(m: int) -> tuple[int, int]:
    """m = a^2 * b with b square-free; returns (a, b)."""
    a = b = 1
    for p, e in sp.factorint(m).items():
        a *= p ** (e // 2)
        b *= p ** (e % 2)
    return a, b


def _canonical_radicand(r: sp.Expr) -> tuple[sp.Expr, sp.Expr]:
    """Write sqrt(r) = coeff * sqrt(core) with core a canonical square-free
    polynomial; returns (coeff, core)."""
    if any(
        isinstance(p.exp, sp.Rational) and p.exp.q != 1 for p in r.atoms(sp.Pow)
    ) or r.atoms(sp.log):
        raise NormalizationError(f"nested radical or logarithm in radicand {r}")
    num, den = sp.fraction(sp.cancel(r))
    poly = sp.expand(num * den)
    if poly == 0:
        return sp.Integer(0), sp.Integer(0)
    content, factors = sp.sqf_list(poly)
    core = sp.Integer(1)
    outside = sp.Integer(1)
    for base, exp in factors:
        outside *= base ** (exp // 2)
        if exp % 2:
            core *= base
    content = sp.Rational(content)
    sign = 1 if content > 0 else -1
    an, bn = _split_square(abs(content).p)
    ad, bd = _split_square(abs(content).q)
    coeff = outside * sp.Rational(an, ad * bd)
    core = sp.expand(core * sign * bn * bd)
    return coeff / den, core


def _normalize(raw: sp.Expr, ctx: Context) -> _NormalForm:
    if raw.has(sp.zoo, sp.oo, sp.nan):
        raise NormalizationError("division by zero or undefined constant")
    e = sp.together(raw)

    # -- pull out logarithm atoms (before radicals; their arguments are
    #    required to be rational) ------------------------------------------
    log_nodes = sorted(e.atoms(sp.log), key=sp.default_sort_key)
    log_syms: dict[sp.Expr, sp.Symbol] = {}
    if log_nodes:
        repl = {}
        for node in log_nodes:
            if any(
                isinstance(p.exp, sp.Rational) and p.exp.q != 1
                for p in node.args[0].atoms(sp.Pow)
            ):
                raise NormalizationError(
                    f"radical inside logarithm argument {node.args[0]}"
                )
            arg = sp.cancel(node.args[0])
            anum, aden = sp.fraction(arg)
            arg = sp.expand(anum) / sp.expand(aden)
            if arg not in log_syms:
                log_syms[arg] = sp.Dummy(f"ln{len(log_syms)}")
            repl[node] = log_syms[arg]
        e = e.xreplace(repl)

    # -- pull out square roots ------------------------------------------
    half_pows = [
        p for p in e.atoms(sp.Pow)
        if isinstance(p.exp, sp.Rational) and p.exp.q == 2
    ]
    radicand: sp.Expr | None = None
    t = sp.Dummy("rad")
    if half_pows:
        repl = {}
        for p in sorted(half_pows, key=sp.default_sort_key):
            coeff, core = _canonical_radicand(p.base)
            k = int(p.exp * 2)  # odd integer
            if core == 0:
                repl[p] = sp.Integer(0)
                continue
            stem = p.base ** ((k - 1) // 2) * coeff
            if core == 1:
                repl[p] = stem
                continue
            if radicand is None:
                radicand = core
            elif sp.expand(radicand - core) != 0:
                raise MultipleRadicandsError(
                    f"distinct radicands {radicand} and {core}"
                )
            repl[p] = stem * t
        e = e.xreplace(repl)

    combined = sp.cancel(e)
    if combined.has(sp.zoo, sp.oo, sp.nan):
        raise NormalizationError("denominator vanishes identically")
    num, den = sp.fraction(combined)
    num = sp.expand(num)
    den = sp.expand(den)
    if den == 0:
        raise NormalizationError("denominator vanishes identically")

    # -- reduce modulo t^2 = radicand -------------------------------------
    if radicand is not None:
        rule = t**2 - radicand
        if num.has(t):
            num = sp.expand(sp.rem(num, rule, t))
        if den.has(t):
            den = sp.expand(sp.rem(den, rule, t))
        if den.has(t):
            a = den.coeff(t, 0)
            b = den.coeff(t, 1)
            conj = a - b * t
            num = sp.expand(sp.rem(sp.expand(num * conj), rule, t))
            den = sp.expand(a * a - b * b * radicand)
            if den == 0:
                raise NormalizationError(
                    "denominator vanishes after radical conjugation"
                )

    # -- logarithm linearity ----------------------------------------------
    ls = list(log_syms.values())
    if ls:
        if any(den.has(L) for L in ls):
            raise NonlinearLogarithmError("logarithm atom in a denominator")
        p = sp.Poly(num, *ls)
        if p.total_degree() > 1:
            raise NonlinearLogarithmError("logarithm atoms occur non-linearly")

    # -- split into components ---------------------------------------------
    inv_log = {v: k for k, v in log_syms.items()}
    parts: list[tuple[tuple[sp.Expr | None, bool], tuple[sp.Expr, sp.Expr]]] = []

    def emit(log_arg: sp.Expr | None, piece: sp.Expr):
        for has_rad, comp in ((False, piece.coeff(t, 0)), (True, piece.coeff(t, 1))):
            if comp == 0:
                continue
            frac = sp.cancel(comp / den)
            fnum, fden = sp.fraction(frac)
            fnum = sp.expand(fnum)
            fden = sp.expand(fden)
            if fnum == 0:
                continue
            parts.append(((log_arg, has_rad), (fnum, fden)))

    if ls:
        const_piece = sp.expand(num - sum(
            num.coeff(L, 1) * L for L in ls
        ))
        emit(None, const_piece)
        for L in sorted(ls, key=lambda s: sp.default_sort_key(inv_log[s])):
            piece = sp.expand(num.coeff(L, 1))
            emit(inv_log[L], piece)
    else:
        emit(None, num)

    used_radical = any(has_rad for (_, has_rad), _ in parts)
    return _NormalForm(radicand if used_radical else None, tuple(parts))


# ---------------------------------------------------------------------------
# Expr


class Expr:
    """Immutable scalar expression bound to a context."""

    __slots__ = ("ctx", "raw", "_nf", "_canonical")

    def __init__(self, ctx: Context, raw: sp.Expr):
        object.__setattr__(self, "ctx", ctx)
        object.__setattr__(self, "raw", sp.sympify(raw))
        object.__setattr__(self, "_nf", None)
        object.__setattr__(self, "_canonical", None)

    def __setattr__(self, *a):
        raise AttributeError("Expr is immutable")

    # -- normal form ------------------------------------------------------

    def normal_form(self) -> _NormalForm:
        nf = object.__getattribute__(self, "_nf")
        if nf is None:
            nf = _normalize(self.raw, self.ctx)
            object.__setattr__(self, "_nf", nf)
        return nf

    @property
    def canonical(self) -> sp.Expr:
        c = object.__getattribute__(self, "_canonical")
        if c is None:
            c = self.normal_form().rebuild()
            object.__setattr__(self, "_canonical", c)
        return c

    def normalized(self) -> "Expr":
        out = Expr(self.ctx, self.canonical)
        object.__setattr__(out, "_nf", self.normal_form())
        object.__setattr__(out, "_canonical", self.canonical)
        return out

    # -- predicates ---------------------------------------------------------

    def is_rational_constant(self) -> bool:
        nf = self.normal_form()
        if nf.is_zero:
            return True
        if len(nf.parts) != 1:
            return False
        (key, (num, den)) = nf.parts[0]
        return key == (None, False) and num.is_Rational and den.is_Rational

    def as_fraction(self) -> Fraction:
        if not self.is_rational_constant():
            raise ValueError(f"not a rational constant: {self}")
        nf = self.normal_form()
        if nf.is_zero:
            return Fraction(0)
        (_, (num, den)) = nf.parts[0]
        q = sp.Rational(num) / sp.Rational(den)
        return Fraction(int(q.p), int(q.q))

    def depends_on(self, name: str) -> bool:
        return not is_zero(diff(self, name))

    def free_names(self) -> set[str]:
        out = set()
        for s in self.canonical.free_symbols:
            out.add(s.name)
        for a in self.canonical.atoms(AppliedUndef):
            info = self.ctx.classify_atom(a)
            if info is not None:
                out.add(info[0].name)
        return out

    def equals(self, other) -> bool:
        return is_zero(self - _coerce(self.ctx, other))

    # -- arithmetic -----------------------------------------------------------

    def __add__(self, other):
        o = _coerce(self.ctx, other)
        return Expr(_join(self.ctx, o.ctx), self.raw + o.raw)

    __radd__ = __add__

    def __sub__(self, other):
        o = _coerce(self.ctx, other)
        return Expr(_join(self.ctx, o.ctx), self.raw - o.raw)

    def __rsub__(self, other):
        o = _coerce(self.ctx, other)
        return Expr(_join(self.ctx, o.ctx), o.raw - self.raw)

    def __mul__(self, other):
        o = _coerce(self.ctx, other)
        return Expr(_join(self.ctx, o.ctx), self.raw * o.raw)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _coerce(self.ctx, other)
        return Expr(_join(self.ctx, o.ctx), self.raw / o.raw)

    def __rtruediv__(self, other):
        o = _coerce(self.ctx, other)
        return Expr(_join(self.ctx, o.ctx), o.raw / self.raw)

    def __neg__(self):
        return Expr(self.ctx, -self.raw)

    def __pow__(self, exponent: int):
        if not isinstance(exponent, int):
            raise TypeError("only integer powers are supported")
        return Expr(self.ctx, self.raw ** exponent)

    def __eq__(self, other):
        if not isinstance(other, Expr):
            return NotImplemented
        return self.canonical == other.canonical

    def __hash__(self):
        return hash(self.canonical)

    def __repr__(self):
        return f"Expr({render(self)})"

    def __str__(self):
        return render(self)


def _coerce(ctx: Context, value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, Fraction, sp.Rational)):
        return ctx.number(value)
    raise TypeError(f"cannot coerce {value!r} to Expr")


def sqrt(e: Expr) -> Expr:
    return Expr(e.ctx, sp.sqrt(e.raw))


def ln(e: Expr) -> Expr:
    return Expr(e.ctx, sp.log(e.raw))


# ---------------------------------------------------------------------------
# Parser

_FUNCS = ("sqrt", "ln")


class _Token:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind: str, text: str, pos: int):
        self.kind = kind
        self.text = text
        self.pos = pos


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        pos = i + 1
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(_Token("num", text[i:j], pos))
            i = j
        elif c.isalpha():
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            while j < n and text[j] == "'":
                j += 1
            tokens.append(_Token("ident", text[i:j], pos))
            i = j
        elif c in "+-*/^(),":
            tokens.append(_Token(c, c, pos))
            i += 1
        else:
            raise ParseError(f"unexpected character {c!r}", pos)
    tokens.append(_Token("end", "", n + 1))
    return tokens


class _Parser:
    """Recursive descent over: sums, products, unary minus, integer powers,
    sqrt/ln and declared function-atom applications."""

    def __init__(self, text: str, ctx: Context):
        self.tokens = _tokenize(text)
        self.ctx = ctx
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            prev = self.tokens[self.i - 1] if self.i else tok
            where = prev.pos if tok.kind == "end" else tok.pos
            raise ParseError(f"expected {kind!r}, found {tok.text or 'end of input'!r}", where)
        return self.next()

    def parse(self) -> sp.Expr:
        e = self.sum_()
        tok = self.peek()
        if tok.kind != "end":
            raise ParseError(f"unexpected {tok.text!r}", tok.pos)
        return e

    def sum_(self) -> sp.Expr:
        e = self.product()
        while self.peek().kind in ("+", "-"):
            op = self.next().kind
            rhs = self.product()
            e = e + rhs if op == "+" else e - rhs
        return e

    def product(self) -> sp.Expr:
        e = self.unary()
        while self.peek().kind in ("*", "/"):
            op = self.next().kind
            rhs = self.unary()
            e = e * rhs if op == "*" else e / rhs
        return e

    def unary(self) -> sp.Expr:
        if self.peek().kind == "-":
            self.next()
            return -self.unary()
        return self.power()

    def power(self) -> sp.Expr:
        base = self.atom()
        if self.peek().kind == "^":
            self.next()
            return base ** self.exponent()
        return base

    def exponent(self) -> sp.Integer:
        neg = False
        if self.peek().kind == "(":
            self.next()
            if self.peek().kind == "-":
                self.next()
                neg = True
            tok = self.expect("num")
            self.expect(")")
        else:
            if self.peek().kind == "-":
                self.next()
                neg = True
            tok = self.expect("num")
        value = int(tok.text)
        return sp.Integer(-value if neg else value)

    def atom(self) -> sp.Expr:
        tok = self.peek()
        if tok.kind == "num":
            self.next()
            return sp.Integer(int(tok.text))
        if tok.kind == "(":
            self.next()
            e = self.sum_()
            self.expect(")")
            return e
        if tok.kind == "ident":
            self.next()
            name = tok.text
            if self.peek().kind == "(":
                self.next()
                arg = self.sum_()
                self.expect(")")
                return self.apply(name, arg, tok.pos)
            if name in _FUNCS:
                raise ParseError(f"{name} requires an argument", tok.pos)
            if "'" in name or self.ctx._base_atom(name) is not None:
                fa = self.ctx._base_atom(name.rstrip("'"))
                if fa is None:
                    raise UnknownSymbolError(name, tok.pos)
                raise ParseError(
                    f"function atom {name!r} must be applied to its argument", tok.pos
                )
            if not self.ctx.has(name):
                raise UnknownSymbolError(name, tok.pos)
            return self.ctx.sym(name)
        raise ParseError(f"unexpected {tok.text or 'end of input'!r}", tok.pos)

    def apply(self, name: str, arg: sp.Expr, pos: int) -> sp.Expr:
        if name == "sqrt":
            return sp.sqrt(arg)
        if name == "ln":
            return sp.log(arg)
        base = name.rstrip("'")
        order = len(name) - len(base)
        fa = self.ctx._base_atom(base)
        if fa is None:
            raise UnknownSymbolError(name, pos)
        if sp.expand(sp.cancel(arg - fa.arg)) != 0:
            raise ParseError(
                f"function atom {base!r} is declared with argument"
                f" {sp.sstr(fa.arg)}", pos
            )
        return fa.applied(order)


def parse(text: str, ctx: Context) -> Expr:
    """Parse ``text`` in ``ctx``; raises ParseError / UnknownSymbolError."""
    return Expr(ctx, _Parser(text, ctx).parse())


# ---------------------------------------------------------------------------
# Renderer

_ADD, _MUL, _POW, _ATOM = 1, 2, 3, 4


def _render_sym(e: sp.Expr, ctx: Context, prec: int = 0) -> str:
    if isinstance(e, sp.Integer):
        s = str(e)
        return f"({s})" if e < 0 and prec >= _MUL else s
    if isinstance(e, sp.Rational):
        s = f"{e.p}/{e.q}"
        if e < 0 and prec >= _MUL:
            return f"({s})"
        return s
    if isinstance(e, sp.Symbol):
        return e.name
    if isinstance(e, AppliedUndef):
        return f"{e.func.__name__}({_render_sym(e.args[0], ctx)})"
    if isinstance(e, sp.log):
        return f"ln({_render_sym(e.args[0], ctx)})"
    if isinstance(e, sp.Pow):
        if e.exp == sp.Rational(1, 2):
            return f"sqrt({_render_sym(e.base, ctx)})"
        if e.exp == sp.Rational(-1, 2):
            return f"1/sqrt({_render_sym(e.base, ctx)})"
        if isinstance(e.exp, sp.Rational) and e.exp.q == 2:
            k = int(e.exp * 2)
            base = _render_sym(e.base ** ((k - 1) // 2) * sp.sqrt(e.base), ctx, prec)
            return base
        exp = int(e.exp)
        base = _render_sym(e.base, ctx, _POW)
        if exp >= 0:
            return f"{base}^{exp}"
        return f"{base}^(-{-exp})"
    if isinstance(e, sp.Add):
        terms = sp.Add.make_args(e)
        terms = sorted(terms, key=sp.default_sort_key)
        out = ""
        for i, term in enumerate(terms):
            neg, body = _split_sign(term)
            rendered = _render_sym(body, ctx, _ADD)
            if i == 0:
                out = ("-" if neg else "") + rendered
            else:
                out += (" - " if neg else " + ") + rendered
        return f"({out})" if prec >= _MUL else out
    if isinstance(e, sp.Mul):
        neg, body = _split_sign(e)
        num_parts: list[str] = []
        den_parts: list[str] = []
        coeff = sp.Integer(1)
        for f in sp.Mul.make_args(body):
            if isinstance(f, sp.Rational):
                coeff *= f
            elif isinstance(f, sp.Pow) and isinstance(f.exp, (sp.Integer,)) and f.exp < 0:
                den_parts.append(_render_sym(f.base ** (-f.exp), ctx, _MUL))
            else:
                num_parts.append(_render_sym(f, ctx, _MUL))
        if coeff != 1:
            if coeff.q != 1 and coeff.p == 1:
                den_parts.insert(0, str(coeff.q))
            elif coeff.q != 1:
                num_parts.insert(0, str(coeff.p))
                den_parts.insert(0, str(coeff.q))
            else:
                num_parts.insert(0, str(coeff.p))
        num = "*".join(num_parts) if num_parts else "1"
        if den_parts:
            den = "*".join(den_parts)
            if len(den_parts) > 1:
                den = f"({den})"
            out = f"{num}/{den}"
        else:
            out = num
        if neg:
            out = f"-{out}"
            return f"({out})" if prec >= _MUL else out
        return out
    raise NormalizationError(f"cannot render node {e!r}")


def _split_sign(e: sp.Expr) -> tuple[bool, sp.Expr]:
    if isinstance(e, sp.Mul):
        coeff = e.args[0]
        if isinstance(coeff, sp.Rational) and coeff < 0:
            return True, sp.Mul(-coeff, *e.args[1:])
    if isinstance(e, sp.Rational) and e < 0:
        return True, -e
    return False, e


def render(e: Expr) -> str:
    """Canonical text; reparsing yields an expression with equal normal form."""
    c = e.canonical
    if c == 0:
        return "0"
    return _render_sym(c, e.ctx)


# ---------------------------------------------------------------------------
# Differentiation and substitution


def _resolve_symbol(e_ctx: Context, s) -> sp.Symbol:
    if isinstance(s, Expr):
        if isinstance(s.raw, sp.Symbol):
            return s.raw
        raise ValueError(f"not a plain symbol: {s}")
    if isinstance(s, sp.Symbol):
        return s
    if isinstance(s, str):
        return e_ctx.sym(s)
    raise TypeError(f"cannot interpret {s!r} as a symbol")


def _sym_diff(raw: sp.Expr, var: sp.Symbol, ctx: Context) -> sp.Expr:
    atoms = sorted(raw.atoms(AppliedUndef), key=sp.default_sort_key)
    if not atoms:
        return sp.diff(raw, var)
    repl = {}
    for a in atoms:
        info = ctx.classify_atom(a)
        if info is None:
            raise NormalizationError(f"undeclared function application {a}")
        repl[a] = sp.Dummy(a.func.__name__)
    masked = raw.xreplace(repl)
    back = {d: a for a, d in repl.items()}
    total = sp.diff(masked, var)
    for a, d in repl.items():
        fa, order = ctx.classify_atom(a)
        darg = sp.diff(fa.arg, var)
        if darg == 0:
            continue
        total += sp.diff(masked, d) * fa.applied(order + 1) * darg
    return total.xreplace(back)


def diff(e: Expr, s) -> Expr:
    """Exact partial derivative with respect to a declared symbol."""
    var = _resolve_symbol(e.ctx, s)
    return Expr(e.ctx, _sym_diff(e.canonical, var, e.ctx)).normalized()


def total_x_derivative(e: Expr) -> Expr:
    """D_x e over the first jet space:
    D_x = d/dx + sum_k u^k_x d/du^k + sum_k u^k_xx d/du^k_x."""
    ctx = e.ctx
    c = e.canonical
    free = c.free_symbols
    for j2 in ctx.jet2_syms:
        if j2 in free:
            raise JetOrderError(
                f"{j2.name} present: total derivative would need third-order jets"
            )
    total = _sym_diff(c, ctx.x, ctx)
    for f, j1, j2 in zip(ctx.field_syms, ctx.jet1_syms, ctx.jet2_syms):
        total += _sym_diff(c, f, ctx) * j1
        total += _sym_diff(c, j1, ctx) * j2
    return Expr(ctx, total).normalized()


def substitute(e: Expr, bindings: Mapping) -> Expr:
    """Simultaneous substitution followed by normalization.

    Keys are declared symbols (by name or Expr) or function-atom names;
    binding an atom family rewrites every formal derivative by repeated
    differentiation of the bound expression in the atom argument.
    """
    ctx = e.ctx
    repl: dict[sp.Expr, sp.Expr] = {}
    result_ctx = ctx
    for key, value in bindings.items():
        val = _coerce(ctx, value) if not isinstance(value, Expr) else value
        result_ctx = _join(result_ctx, val.ctx)
        name = key if isinstance(key, str) else (
            key.raw.name if isinstance(key, Expr) and isinstance(key.raw, sp.Symbol)
            else None
        )
        if name is not None and name in ctx._atoms:
            fa = ctx._atoms[name]
            if not isinstance(fa.arg, sp.Symbol):
                raise ValueError(
                    f"cannot bind atom {name!r}: argument is not a single variable"
                )
            max_order = 0
            for a in e.canonical.atoms(AppliedUndef):
                info = ctx.classify_atom(a)
                if info and info[0].name == name:
                    max_order = max(max_order, info[1])
            deriv = val.canonical
            for order in range(max_order + 1):
                repl[fa.applied(order)] = deriv
                deriv = _sym_diff(deriv, fa.arg, val.ctx)
        else:
            sym = _resolve_symbol(ctx, key)
            repl[sym] = val.raw
    return Expr(result_ctx, e.canonical.xreplace(repl)).normalized()


# ---------------------------------------------------------------------------
# Zero test with optional numeric safety probes


def is_zero(e: Expr) -> bool:
    """Decides whether e is identically zero.

    True iff every component of the normal form vanishes; raises
    MultipleRadicandsError when more than one radicand survives.
    """
    result = e.normal_form().is_zero
    state = _probe_state()
    if state.points > 0:
        state.check(e, result)
    return result


class _ProbeState:
    """Cross-checks is_zero decisions by exact-or-high-precision evaluation
    at random rational points; disagreements are recorded, never raised."""

    def __init__(self, points: int):
        self.points = points
        self.checked = 0
        self.disagreements: list[str] = []

    def check(self, e: Expr, claimed_zero: bool):
        self.checked += 1
        verdict = _probe_expression(e, self.points)
        if verdict is None:
            return
        if verdict != claimed_zero:
            self.disagreements.append(
                f"is_zero={claimed_zero} but probe says {verdict}: {render(e)}"
            )


_STATE: _ProbeState | None = None


def _probe_state() -> _ProbeState:
    global _STATE
    if _STATE is None:
        _STATE = _ProbeState(int(os.environ.get("PENCIL_FORGE_PROBES", "0")))
    return _STATE


def set_probe_points(n: int):
    global _STATE
    _STATE = _ProbeState(n)


def reset_probe_state():
    global _STATE
    _STATE = None


def probe_report() -> tuple[int, list[str]]:
    state = _probe_state()
    return state.checked, list(state.disagreements)


def _probe_expression(e: Expr, points: int) -> bool | None:
    """Returns True if e evaluates to zero at all sampled points, False if
    some point is clearly nonzero, None when evaluation keeps failing."""
    raw = e.raw
    repl = {}
    for a in sorted(raw.atoms(AppliedUndef), key=sp.default_sort_key):
        repl[a] = sp.Dummy(a.func.__name__.replace("'", "p"))
    masked = raw.xreplace(repl)
    syms = sorted(masked.free_symbols, key=lambda s: s.name)
    if not syms:
        syms = [sp.Dummy("unused")]
    try:
        fn = sp.lambdify(syms, masked, modules="mpmath")
    except Exception:
        return None
    assumption_fns = []
    sym_set = set(syms)
    for a in e.ctx.assumptions:
        a_free = a.raw.free_symbols
        if a_free and a_free <= sym_set:
            asyms = sorted(a_free, key=lambda s: s.name)
            assumption_fns.append(
                (asyms, sp.lambdify(asyms, a.raw, modules="mpmath"))
            )
    seed = int(hashlib.sha256(sp.srepr(masked).encode()).hexdigest()[:12], 16)
    rng = random.Random(seed)
    old_dps = mpmath.mp.dps
    mpmath.mp.dps = 60
    try:
        sampled = 0
        attempts = 0
        saw_nonzero = False
        while sampled < points and attempts < 40 * points:
            attempts += 1
            point = {
                s: mpmath.mpf(rng.randint(1, 40)) / mpmath.mpf(rng.randint(1, 9))
                for s in syms
            }
            try:
                ok = True
                for asyms, afn in assumption_fns:
                    v = afn(*[point[s] for s in asyms])
                    if abs(v) < mpmath.mpf("1e-25"):
                        ok = False
                        break
                if not ok:
                    continue
                val = fn(*[point[s] for s in syms])
            except (ZeroDivisionError, ValueError, OverflowError, TypeError):
                continue
            except mpmath.libmp.NoConvergence:
                continue
            try:
                mag = abs(val)
            except TypeError:
                continue
            if not mpmath.isfinite(mag):
                continue
            sampled += 1
            if mag > mpmath.mpf("1e-24"):
                saw_nonzero = True
                break
        if sampled == 0:
            return None
        return not saw_nonzero
    finally:
        mpmath.mp.dps = old_dps


# ---------------------------------------------------------------------------
# Antidifferentiation


def antiderivative(e: Expr, s) -> Expr:
    """E with diff(E, s) = e, for integrands rational in s whose denominator
    splits into factors of degree at most one in s; simple poles integrate
    to logarithm atoms.  Raises NotIntegrableError otherwise."""
    ctx = e.ctx
    var = _resolve_symbol(ctx, s)
    nf = e.normal_form()
    if nf.is_zero:
        return ctx.number(0)
    total = sp.Integer(0)
    for (log_arg, has_rad), (num, den) in nf.parts:
        piece = num / den
        factor = sp.Integer(1)
        if has_rad:
            if nf.radicand is not None and var in nf.radicand.free_symbols:
                raise NotIntegrableError(
                    f"radicand depends on {var.name}"
                )
            factor = factor * sp.sqrt(nf.radicand)
        if log_arg is not None:
            if var in log_arg.free_symbols:
                raise NotIntegrableError(
                    f"logarithm argument depends on {var.name}"
                )
            factor = factor * sp.log(log_arg)
        for a in piece.atoms(AppliedUndef):
            info = ctx.classify_atom(a)
            if info is not None and var in info[0].arg.free_symbols:
                raise NotIntegrableError(
                    f"function atom argument depends on {var.name}"
                )
        total += _integrate_rational(piece, var) * factor
    return Expr(ctx, total).normalized()


def _integrate_rational(piece: sp.Expr, var: sp.Symbol) -> sp.Expr:
    if var not in piece.free_symbols:
        return piece * var
    try:
        parts = sp.Add.make_args(sp.apart(piece, var))
    except (sp.PolynomialError, NotImplementedError, ZeroDivisionError) as exc:
        raise NotIntegrableError(str(exc)) from exc
    total = sp.Integer(0)
    for term in parts:
        num, den = sp.fraction(sp.together(term))
        dpoly = sp.Poly(den, var)
        if dpoly.degree() == 0:
            total += _integrate_polynomial(num / den, var)
            continue
        if sp.Poly(num, var).degree() > 0:
            raise NotIntegrableError(f"improper partial fraction {term}")
        base, power = _linear_power(dpoly, var)
        if base is None:
            raise NotIntegrableError(
                f"denominator factor of degree > 1 in {var.name}: {den}"
            )
        const = sp.cancel(den / base**power)
        if var in const.free_symbols:
            raise NotIntegrableError(f"unexpected denominator shape {den}")
        a = base.coeff(var, 1)
        if power == 1:
            total += (num / (const * a)) * sp.log(base)
        else:
            total += (num / (const * a)) * base ** (1 - power) / (1 - power)
    return total


def _integrate_polynomial(p: sp.Expr, var: sp.Symbol) -> sp.Expr:
    poly = sp.Poly(p, var)
    total = sp.Integer(0)
    for (k,), coeff in poly.terms():
        total += coeff * var ** (k + 1) / (k + 1)
    return total


def _linear_power(dpoly: sp.Poly, var: sp.Symbol):
    """Match den = c * (a*var + b)^k; returns (a*var+b, k) or (None, 0)."""
    try:
        factors = sp.factor_list(dpoly.as_expr(), var)
    except sp.PolynomialError:
        return None, 0
    linear = None
    power = 0
    for base, exp in factors[1]:
        bp = sp.Poly(base, var)
        if bp.degree() == 0:
            continue
        if bp.degree() > 1 or linear is not None:
            return None, 0
        linear = base
        power = exp
    if linear is None:
        return None, 0
    return linear, power
