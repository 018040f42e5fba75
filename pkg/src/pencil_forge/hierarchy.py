"""Flows, Magri recursion and recursion operators over an operator pair.

Densities and covectors are jet-free functions of (x, u); applying an
operator produces a quasilinear flow u^i_t = V^i_j(x,u) u^j_x + sigma^i(x,u).
The nonlocal tail eps f^i dx^{-1} (f^j psi_j) only resolves when the kernel
f^j psi_j is free of field variables, in which case dx^{-1} is an explicit
antiderivative in x; everything else raises instead of introducing nonlocal
field variables.

Recursion operators R = B o A^{-1} are kept as formal symbol matrices
(coefficient * d_x, multiplication terms of jet degree one, and
left * dx^{-1} * right tails) with a trailing formal dx^{-1} factor; no
composition calculus is attempted beyond that factored display form.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import symcore as sc
from .operators import ConstantOp, NonlocalIsometryOp
from .symcore import Context, Expr

__all__ = [
    "NonlocalUnresolvedError",
    "NotExactError",
    "NotClosedError",
    "Density",
    "Covector",
    "QuasilinearFlow",
    "OperatorSymbol",
    "RecursionOperator",
    "variational_gradient",
    "apply_operator",
    "flow_from_density",
    "magri_step",
    "recursion_operator",
    "commute_check",
    "wdvv_flow",
    "operator_symbols",
    "symbols_equal",
]


class NonlocalUnresolvedError(ValueError):
    """The nonlocal kernel f^j psi_j depends on field variables."""


class NotExactError(ValueError):
    """A flow component is not a total x-derivative of a function of (x, u)."""


class NotClosedError(ValueError):
    """The candidate gradient covector is not closed in the field variables."""


def _require_jet_free(ctx: Context, e: Expr, what: str):
    jets = {s.name for s in ctx.jet1_syms} | {s.name for s in ctx.jet2_syms}
    used = e.free_names() & jets
    if used:
        raise ValueError(f"jet variables not allowed in {what}: {sorted(used)}")


@dataclass(frozen=True)
class Density:
    """Hydrodynamic density h(x, u); jet-free but possibly x-dependent."""

    h: Expr

    def __post_init__(self):
        _require_jet_free(self.h.ctx, self.h, "densities")

    @property
    def ctx(self) -> Context:
        return self.h.ctx


@dataclass(frozen=True)
class Covector:
    components: tuple[Expr, ...]

    def __post_init__(self):
        for c in self.components:
            _require_jet_free(c.ctx, c, "covectors")

    @property
    def ctx(self) -> Context:
        return self.components[0].ctx

    @property
    def n(self) -> int:
        return len(self.components)


@dataclass(frozen=True)
class QuasilinearFlow:
    """u^i_t = V^i_j u^j_x + sigma^i with jet-free V and sigma."""

    V: tuple[tuple[Expr, ...], ...]
    sigma: tuple[Expr, ...]

    @property
    def ctx(self) -> Context:
        return self.sigma[0].ctx

    @property
    def n(self) -> int:
        return len(self.sigma)

    def component(self, i: int) -> Expr:
        """The right-hand side of u^i_t as an expression in (x, u, u_x)."""
        ctx = self.ctx
        total = self.sigma[i]
        for j, jet in enumerate(ctx.jet1_syms):
            total = total + self.V[i][j] * Expr(ctx, jet)
        return total

    def equal(self, other: "QuasilinearFlow", sign: int = 1) -> bool:
        if self.n != other.n:
            return False
        for i in range(self.n):
            if not sc.is_zero(self.sigma[i] - sign * other.sigma[i]):
                return False
            for j in range(self.n):
                if not sc.is_zero(self.V[i][j] - sign * other.V[i][j]):
                    return False
        return True

    def negated(self) -> "QuasilinearFlow":
        return QuasilinearFlow(
            tuple(tuple(-e for e in row) for row in self.V),
            tuple(-e for e in self.sigma),
        )


@dataclass(frozen=True)
class OperatorSymbol:
    """coeff_dx * d_x + mult + sum_i left_i * dx^{-1} * right_i, where mult
    collects the multiplication terms (jet degree at most one)."""

    dx: Expr
    mult: Expr
    tails: tuple[tuple[Expr, Expr], ...]


@dataclass(frozen=True)
class RecursionOperator:
    """Matrix of operator symbols with a trailing formal dx^{-1} factor."""

    entries: tuple[tuple[OperatorSymbol, ...], ...]

    @property
    def n(self) -> int:
        return len(self.entries)

    @property
    def ctx(self) -> Context:
        return self.entries[0][0].dx.ctx


def variational_gradient(h: Density) -> Covector:
    """Euler operator for jet-free densities: psi_j = dh/du^j."""
    ctx = h.ctx
    return Covector(tuple(sc.diff(h.h, f) for f in ctx.fields))


def apply_operator(B: NonlocalIsometryOp, psi: Covector) -> QuasilinearFlow:
    """(B psi)^i split into velocity matrix and source.

    Requires c = 0 and a field-variable-free nonlocal kernel f^j psi_j;
    the kernel's dx^{-1} becomes an explicit antiderivative in x.
    """
    ctx = B.ctx
    n = B.n
    if not sc.is_zero(B.c):
        raise ValueError("apply_operator requires c = 0")
    if psi.n != n:
        raise ValueError("covector length mismatch")
    kernel = ctx.number(0)
    for j in range(n):
        kernel = kernel + B.isometry[j] * psi.components[j]
    kernel = kernel.normalized()
    for f in ctx.fields:
        if kernel.depends_on(f):
            raise NonlocalUnresolvedError(
                f"nonlocal kernel f^j psi_j = {kernel} depends on {f}"
            )
    tail_primitive = sc.antiderivative(kernel, ctx.independents[0])
    V = []
    sigma = []
    for i in range(n):
        row = []
        for j in range(n):
            total = ctx.number(0)
            for s in range(n):
                total = total + B.metric.entries[i][s] * sc.diff(
                    psi.components[s], ctx.fields[j]
                )
                total = total + B.gamma[i][s][j] * psi.components[s]
            row.append(total.normalized())
        V.append(tuple(row))
        src = ctx.number(0)
        for s in range(n):
            src = src + B.metric.entries[i][s] * sc.diff(
                psi.components[s], ctx.independents[0]
            )
        src = src + B.epsilon * B.isometry[i] * tail_primitive
        sigma.append(src.normalized())
    return QuasilinearFlow(tuple(V), tuple(sigma))


def flow_from_density(A: ConstantOp, h: Density) -> QuasilinearFlow:
    """u^i_t = eta^{ij} D_x(dh/du^j) expanded into velocity and source."""
    ctx = A.ctx
    n = A.n
    psi = variational_gradient(h)
    V = []
    sigma = []
    for i in range(n):
        row = []
        for k in range(n):
            total = ctx.number(0)
            for j in range(n):
                total = total + A.entries[i][j] * sc.diff(
                    psi.components[j], ctx.fields[k]
                )
            row.append(total.normalized())
        V.append(tuple(row))
        src = ctx.number(0)
        for j in range(n):
            src = src + A.entries[i][j] * sc.diff(
                psi.components[j], ctx.independents[0]
            )
        sigma.append(src.normalized())
    return QuasilinearFlow(tuple(V), tuple(sigma))


def _potential(ctx: Context, coords: tuple[str, ...], comps: list[Expr]) -> Expr:
    """phi with d(phi)/d(coords[j]) = comps[j]; closedness assumed."""
    total = ctx.number(0)
    for j, name in enumerate(coords):
        remainder = comps[j] - sc.diff(total, name)
        total = total + sc.antiderivative(remainder, name)
    return total.normalized()


def _invert_total_x(flow: QuasilinearFlow, i: int) -> Expr:
    """phi(x, u) with D_x phi equal to flow component i, or NotExactError."""
    ctx = flow.ctx
    n = flow.n
    x = ctx.independents[0]
    comps = [flow.sigma[i]] + [flow.V[i][j] for j in range(n)]
    coords = (x,) + ctx.fields
    for a in range(len(coords)):
        for b in range(a + 1, len(coords)):
            d = sc.diff(comps[a], coords[b]) - sc.diff(comps[b], coords[a])
            if not sc.is_zero(d):
                raise NotExactError(
                    f"component {i + 1} is not a total x-derivative:"
                    f" d/d{coords[b]} of {coords[a]}-part differs by {d.normalized()}"
                )
    return _potential(ctx, coords, comps)


def magri_step(A: ConstantOp, B: NonlocalIsometryOp, h_k: Density) -> Density:
    """Solves A grad(h_{k+1}) = B grad(h_k) for the next density.

    Each component of B grad(h_k) must be a total x-derivative D_x(phi^i);
    psi'_j = eta_{ji} phi^i must be closed in the field variables; the
    potential is integrated with zero constants, so the result is fixed up
    to Casimirs of A.
    """
    ctx = A.ctx
    n = A.n
    flow = apply_operator(B, variational_gradient(h_k))
    phi = [_invert_total_x(flow, i) for i in range(n)]
    eta_cov = A.covariant
    psi = []
    for j in range(n):
        total = ctx.number(0)
        for i in range(n):
            total = total + eta_cov[j][i] * phi[i]
        psi.append(total.normalized())
    for a in range(n):
        for b in range(a + 1, n):
            d = sc.diff(psi[a], ctx.fields[b]) - sc.diff(psi[b], ctx.fields[a])
            if not sc.is_zero(d):
                raise NotClosedError(
                    f"candidate gradient not closed in ({ctx.fields[a]},"
                    f" {ctx.fields[b]}): {d.normalized()}"
                )
    return Density(_potential(ctx, ctx.fields, psi))


def operator_symbols(B: NonlocalIsometryOp) -> tuple[tuple[OperatorSymbol, ...], ...]:
    """The matrix of formal symbols of B itself."""
    ctx = B.ctx
    n = B.n
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            mult = ctx.number(0)
            for k, jet in enumerate(ctx.jet1_syms):
                mult = mult + B.gamma[i][j][k] * Expr(ctx, jet)
            left = (B.epsilon * B.isometry[i]).normalized()
            right = B.isometry[j].normalized()
            tails = ()
            if not (sc.is_zero(left) or sc.is_zero(right)):
                tails = ((left, right),)
            row.append(OperatorSymbol(
                B.metric.entries[i][j].normalized(), mult.normalized(), tails
            ))
        out.append(tuple(row))
    return tuple(out)


def recursion_operator(A: ConstantOp, B: NonlocalIsometryOp) -> RecursionOperator:
    """R = B o A^{-1} as the symbol matrix M^i_k = sum_s B^{is} eta_{sk}
    followed by the trailing formal dx^{-1}."""
    ctx = B.ctx
    n = B.n
    eta_cov = A.covariant
    entries = []
    for i in range(n):
        row = []
        for k in range(n):
            dx = ctx.number(0)
            mult = ctx.number(0)
            right = ctx.number(0)
            for s in range(n):
                dx = dx + B.metric.entries[i][s] * eta_cov[s][k]
                for m, jet in enumerate(ctx.jet1_syms):
                    mult = mult + B.gamma[i][s][m] * eta_cov[s][k] * Expr(ctx, jet)
                right = right + B.isometry[s] * eta_cov[s][k]
            left = (B.epsilon * B.isometry[i]).normalized()
            right = right.normalized()
            tails = ()
            if not (sc.is_zero(left) or sc.is_zero(right)):
                tails = ((left, right),)
            row.append(OperatorSymbol(dx.normalized(), mult.normalized(), tails))
        entries.append(tuple(row))
    return RecursionOperator(tuple(entries))


def _tails_equal(ctx: Context, t1, t2) -> bool:
    """Tensor equality of sum_i l_i dx^{-1} r_i against another tail sum,
    decided on doubled field variables."""
    if not t1 and not t2:
        return True
    copies = tuple(f + "_cpy" for f in ctx.fields)
    ext = ctx.extend(parameters=copies)
    mapping = {f: ext.var(c) for f, c in zip(ctx.fields, copies)}
    total = ext.number(0)
    for left, right in t1:
        total = total + left * sc.substitute(right, mapping)
    for left, right in t2:
        total = total - left * sc.substitute(right, mapping)
    return sc.is_zero(total)


def symbols_equal(a: OperatorSymbol, b: OperatorSymbol) -> bool:
    if not sc.is_zero(a.dx - b.dx):
        return False
    if not sc.is_zero(a.mult - b.mult):
        return False
    ctx = a.dx.ctx
    return _tails_equal(ctx, a.tails, b.tails)


def commute_check(F1: QuasilinearFlow, F2: QuasilinearFlow) -> bool:
    """u^i_{t y} - u^i_{y t} = 0 with each flow substituted into the other's
    total time derivative; the residual is polynomial in (u_x, u_xx)."""
    ctx = F1.ctx
    n = F1.n
    if F2.n != n:
        raise ValueError("flows have different component counts")
    e1 = [F1.component(i) for i in range(n)]
    e2 = [F2.component(i) for i in range(n)]
    dxe1 = [sc.total_x_derivative(e) for e in e1]
    dxe2 = [sc.total_x_derivative(e) for e in e2]
    for i in range(n):
        residual = ctx.number(0)
        for k in range(n):
            residual = residual + sc.diff(e2[i], ctx.fields[k]) * e1[k]
            residual = residual + F2.V[i][k] * dxe1[k]
            residual = residual - sc.diff(e1[i], ctx.fields[k]) * e2[k]
            residual = residual - F1.V[i][k] * dxe2[k]
        if not sc.is_zero(residual):
            return False
    return True


def wdvv_flow(F: Expr, eta: ConstantOp, k: int) -> QuasilinearFlow:
    """k-th flow of a potential: u^i_{t_k} = eta^{im} (d^2 F / du^m du^k)_x,
    expanded to V^i_j = eta^{im} F_{,mkj}; k is 1-based."""
    ctx = eta.ctx
    n = eta.n
    _require_jet_free(ctx, F, "potentials")
    if not 1 <= k <= n:
        raise ValueError(f"flow index {k} out of range 1..{n}")
    V = []
    for i in range(n):
        row = []
        for j in range(n):
            total = ctx.number(0)
            for m in range(n):
                total = total + eta.entries[i][m] * sc.diff(
                    sc.diff(sc.diff(F, ctx.fields[m]), ctx.fields[k - 1]),
                    ctx.fields[j],
                )
            row.append(total.normalized())
        V.append(tuple(row))
    zero = ctx.number(0)
    return QuasilinearFlow(tuple(V), tuple(zero for _ in range(n)))
