"""Riemannian computations on contravariant metrics in flat-style coordinates.

Conventions (all indices 1-based in the docs, 0-based in code):

* metrics are stored contravariantly, entries g^{ij};
* lowered Christoffel symbols Gamma^i_{jk} come from the inverse metric by
  the standard Levi-Civita formula and are symmetric in (j, k);
* raised symbols follow Gamma^{ij}_k = -g^{is} Gamma^j_{sk};
* curvature uses R^i_{jkl} = d_k Gamma^i_{lj} - d_l Gamma^i_{kj}
  + Gamma^i_{ks} Gamma^s_{lj} - Gamma^i_{ls} Gamma^s_{kj}, raised to
  R^{ij}_{kl} = g^{is} R^j_{skl}.

Matrix inversion is by exact adjugate over determinant; all results are
normalized kernel expressions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import symcore as sc
from .symcore import Context, Expr

__all__ = [
    "DegenerateMetricError",
    "Metric",
    "Connection",
    "CurvatureTensor",
    "VectorField",
    "levi_civita",
    "riemann",
    "is_flat",
    "constant_curvature",
    "killing_check",
    "cyclic_check",
    "mat_det",
    "mat_inverse",
]


class DegenerateMetricError(ValueError):
    """Determinant is identically zero; no parameter assumption saves it."""


ExprMatrix = tuple[tuple[Expr, ...], ...]


def _freeze(rows: Sequence[Sequence[Expr]]) -> ExprMatrix:
    return tuple(tuple(row) for row in rows)


def mat_det(rows: Sequence[Sequence[Expr]]) -> Expr:
    """Exact determinant by cofactor expansion (intended for n <= 4)."""
    n = len(rows)
    if n == 1:
        return rows[0][0]
    total = None
    for j in range(n):
        minor = [
            [rows[i][k] for k in range(n) if k != j] for i in range(1, n)
        ]
        term = rows[0][j] * mat_det(minor)
        if j % 2:
            term = -term
        total = term if total is None else total + term
    return total


def mat_inverse(rows: Sequence[Sequence[Expr]], det: Expr | None = None) -> ExprMatrix:
    """Exact inverse via the adjugate; raises DegenerateMetricError on
    identically vanishing determinant."""
    n = len(rows)
    if det is None:
        det = mat_det(rows)
    if sc.is_zero(det):
        raise DegenerateMetricError("determinant vanishes identically")
    if n == 1:
        one = rows[0][0].ctx.number(1)
        return ((one / det,),)
    out = []
    for i in range(n):
        out_row = []
        for j in range(n):
            minor = [
                [rows[r][c] for c in range(n) if c != i]
                for r in range(n) if r != j
            ]
            cof = mat_det(minor)
            if (i + j) % 2:
                cof = -cof
            out_row.append(cof / det)
        out.append(out_row)
    return _freeze(out)


class Metric:
    """Contravariant n x n metric; determinant is the nondegeneracy witness.

    Construction does not enforce symmetry (validators report on it), but
    the geometric operations below require it.
    """

    def __init__(self, ctx: Context, entries: Sequence[Sequence[Expr]]):
        self.ctx = ctx
        self.entries = _freeze(entries)
        self.n = len(self.entries)
        if any(len(row) != self.n for row in self.entries):
            raise ValueError("metric entries must form a square matrix")
        self._det: Expr | None = None
        self._inverse: ExprMatrix | None = None
        self._connection: "Connection | None" = None
        self._curvature: "CurvatureTensor | None" = None

    @property
    def det(self) -> Expr:
        if self._det is None:
            self._det = mat_det(self.entries).normalized()
        return self._det

    @property
    def covariant(self) -> ExprMatrix:
        """Inverse matrix g_{ij}."""
        if self._inverse is None:
            self._inverse = mat_inverse(self.entries, self.det)
        return self._inverse

    def is_symmetric(self) -> bool:
        return all(
            sc.is_zero(self.entries[i][j] - self.entries[j][i])
            for i in range(self.n) for j in range(i + 1, self.n)
        )

    def is_degenerate(self) -> bool:
        return sc.is_zero(self.det)

    def __getitem__(self, ij: tuple[int, int]) -> Expr:
        return self.entries[ij[0]][ij[1]]

    def __repr__(self):
        rows = "; ".join(
            ", ".join(str(e) for e in row) for row in self.entries
        )
        return f"Metric[{rows}]"


@dataclass(frozen=True)
class Connection:
    """lower[i][j][k] = Gamma^i_{jk}; raised[i][j][k] = Gamma^{ij}_k."""

    ctx: Context
    lower: tuple
    raised: tuple

    @property
    def n(self) -> int:
        return len(self.lower)


class CurvatureTensor:
    """mixed[i][j][k][l] = R^i_{jkl}; raised (R^{ij}_{kl} = g^{is} R^j_{skl})
    is materialized on first access.  Both are antisymmetric in (k, l)."""

    def __init__(self, metric: "Metric", mixed: tuple):
        self.ctx = metric.ctx
        self.metric = metric
        self.mixed = mixed
        self._raised: tuple | None = None

    @property
    def n(self) -> int:
        return len(self.mixed)

    @property
    def raised(self) -> tuple:
        if self._raised is None:
            n = self.n
            g = self.metric
            zero = self.ctx.number(0)
            out = []
            for i in range(n):
                cube = []
                for j in range(n):
                    plane = [[zero] * n for _ in range(n)]
                    for k in range(n):
                        for l in range(k + 1, n):
                            total = self.ctx.number(0)
                            for s in range(n):
                                total = total + g.entries[i][s] * self.mixed[j][s][k][l]
                            total = total.normalized()
                            plane[k][l] = total
                            plane[l][k] = (-total).normalized()
                    cube.append(tuple(tuple(row) for row in plane))
                out.append(tuple(cube))
            self._raised = tuple(out)
        return self._raised

    def is_zero(self) -> bool:
        n = self.n
        return all(
            sc.is_zero(self.mixed[i][j][k][l])
            for i in range(n) for j in range(n)
            for k in range(n) for l in range(k + 1, n)
        )


@dataclass(frozen=True)
class VectorField:
    components: tuple[Expr, ...]

    @property
    def n(self) -> int:
        return len(self.components)

    def __getitem__(self, i: int) -> Expr:
        return self.components[i]


def _field_syms(ctx: Context):
    return [ctx.var(name) for name in ctx.fields]


def levi_civita(g: Metric) -> Connection:
    """Levi-Civita connection of the metric, lowered and raised forms."""
    if g._connection is not None:
        return g._connection
    if not g.is_symmetric():
        raise ValueError("metric must be symmetric")
    n = g.n
    ctx = g.ctx
    cov = g.covariant
    fields = ctx.fields
    d_cov = [
        [[sc.diff(cov[i][j], fields[k]) for k in range(n)] for j in range(n)]
        for i in range(n)
    ]
    lower = []
    for i in range(n):
        plane = []
        for j in range(n):
            row = []
            for k in range(n):
                total = ctx.number(0)
                for s in range(n):
                    total = total + g.entries[i][s] * (
                        d_cov[s][k][j] + d_cov[s][j][k] - d_cov[j][k][s]
                    )
                row.append((total / 2).normalized())
            plane.append(tuple(row))
        lower.append(tuple(plane))
    raised = []
    for i in range(n):
        plane = []
        for j in range(n):
            row = []
            for k in range(n):
                total = ctx.number(0)
                for s in range(n):
                    total = total - g.entries[i][s] * lower[j][s][k]
                row.append(total.normalized())
            plane.append(tuple(row))
        raised.append(tuple(plane))
    conn = Connection(ctx, tuple(lower), tuple(raised))
    g._connection = conn
    return conn


def riemann(g: Metric) -> CurvatureTensor:
    """Curvature of the Levi-Civita connection; only k < l components are
    computed, the rest follow by antisymmetry."""
    if g._curvature is not None:
        return g._curvature
    conn = levi_civita(g)
    n = g.n
    ctx = g.ctx
    fields = ctx.fields
    gamma = conn.lower
    d_cache: dict[tuple[int, int, int, int], Expr] = {}

    def d_gamma(i: int, j: int, k: int, m: int) -> Expr:
        key = (i, j, k, m)
        if key not in d_cache:
            d_cache[key] = sc.diff(gamma[i][j][k], fields[m])
        return d_cache[key]

    zero = ctx.number(0)
    mixed = []
    for i in range(n):
        cube = []
        for j in range(n):
            plane = [[zero] * n for _ in range(n)]
            for k in range(n):
                for l in range(k + 1, n):
                    total = d_gamma(i, l, j, k) - d_gamma(i, k, j, l)
                    for s in range(n):
                        total = total + gamma[i][k][s] * gamma[s][l][j]
                        total = total - gamma[i][l][s] * gamma[s][k][j]
                    total = total.normalized()
                    plane[k][l] = total
                    plane[l][k] = (-total).normalized()
            cube.append(tuple(tuple(row) for row in plane))
        mixed.append(tuple(cube))
    curv = CurvatureTensor(g, tuple(mixed))
    g._curvature = curv
    return curv


def is_flat(g: Metric) -> bool:
    return riemann(g).is_zero()


def constant_curvature(g: Metric) -> Expr | None:
    """Returns the sectional curvature c when it is constant, else None.

    In the stored convention this means R^{ij}_{kl} = c (d^i_l d^j_k -
    d^i_k d^j_l) identically; a round 2-sphere of radius 1 gives c = 1.
    """
    curv = riemann(g)
    n = g.n
    ctx = g.ctx
    if n == 1:
        return ctx.number(0)
    c = curv.raised[0][1][1][0]
    for name in ctx.fields:
        if not sc.is_zero(sc.diff(c, name)):
            return None
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    template = ctx.number(0)
                    if i == l and j == k:
                        template = template + c
                    if i == k and j == l:
                        template = template - c
                    if not sc.is_zero(curv.raised[i][j][k][l] - template):
                        return None
    return c.normalized()


def killing_defect(g: Metric, f: VectorField) -> tuple[int, int, Expr] | None:
    """First nonzero component of the Lie derivative of the contravariant
    metric along f: f^k d_k g^{ij} - g^{kj} d_k f^i - g^{ik} d_k f^j."""
    n = g.n
    ctx = g.ctx
    fields = ctx.fields
    for i in range(n):
        for j in range(i, n):
            total = ctx.number(0)
            for k in range(n):
                total = total + f[k] * sc.diff(g.entries[i][j], fields[k])
                total = total - g.entries[k][j] * sc.diff(f[i], fields[k])
                total = total - g.entries[i][k] * sc.diff(f[j], fields[k])
            if not sc.is_zero(total):
                return i, j, total.normalized()
    return None


def killing_check(g: Metric, f: VectorField) -> bool:
    """Vanishing Lie derivative of the contravariant metric along f."""
    return killing_defect(g, f) is None


def cyclic_defect(g: Metric, f: VectorField) -> tuple[int, int, int, Expr] | None:
    """First nonzero component of f^j grad^i f^k + f^k grad^j f^i
    + f^i grad^k f^j, with grad^i = g^{is} grad_s and
    grad_s f^k = d_s f^k + Gamma^k_{sm} f^m."""
    n = g.n
    ctx = g.ctx
    fields = ctx.fields
    conn = levi_civita(g)
    nabla_lower = [
        [
            sum(
                (conn.lower[k][s][m] * f[m] for m in range(n)),
                sc.diff(f[k], fields[s]),
            )
            for k in range(n)
        ]
        for s in range(n)
    ]
    nabla_upper = [
        [
            sum(
                (g.entries[i][s] * nabla_lower[s][k] for s in range(n)),
                ctx.number(0),
            )
            for k in range(n)
        ]
        for i in range(n)
    ]
    for i in range(n):
        for j in range(n):
            for k in range(n):
                total = (
                    f[j] * nabla_upper[i][k]
                    + f[k] * nabla_upper[j][i]
                    + f[i] * nabla_upper[k][j]
                )
                if not sc.is_zero(total):
                    return i, j, k, total.normalized()
    return None


def cyclic_check(g: Metric, f: VectorField) -> bool:
    """Vanishing cyclic sum over all index triples."""
    return cyclic_defect(g, f) is None
