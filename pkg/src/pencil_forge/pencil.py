"""Compatibility of metric pairs and the bi-Hamiltonian pair criterion.

A pair (g, gt) is almost compatible when the Levi-Civita symbols of
g + lambda*gt are affine in lambda, and compatible when additionally the
curvature splits, R_lambda = R + lambda*Rt, identically in lambda.  The
parameter lambda is adjoined to the context as an ordinary symbol, so the
"for every lambda" statements are decided exactly on rational functions
of lambda.

For a pair (eta*d_x, B) with B a nonlocal isometry extension and c = 0,
the pair is bi-Hamiltonian iff eta and the leading metric of B are
compatible and the isometry is Killing for both leading coefficients.
"""

from __future__ import annotations

from . import diffgeo as dg
from . import symcore as sc
from .diffgeo import Metric, VectorField
from .operators import CheckItem, ConstantOp, NonlocalIsometryOp, ValidationReport
from .symcore import Context, Expr

__all__ = [
    "DegeneratePencilError",
    "PENCIL_PARAMETER",
    "Pencil",
    "almost_compatible",
    "compatible",
    "pair_check",
]

PENCIL_PARAMETER = "lam"


class DegeneratePencilError(ValueError):
    """det(g + lambda*gt) vanishes identically as a rational matrix in lambda."""


class Pencil:
    """g + lambda*gt with a fresh parameter lambda adjoined to the context."""

    def __init__(self, g: Metric, gt: Metric):
        if g.n != gt.n:
            raise ValueError("pencil metrics must share the dimension")
        base = g.ctx
        if not base.subsumes(gt.ctx):
            base = gt.ctx if gt.ctx.subsumes(g.ctx) else None
            if base is None:
                raise ValueError("pencil metrics from incompatible contexts")
        if base.has(PENCIL_PARAMETER):
            raise ValueError(
                f"context already declares {PENCIL_PARAMETER!r};"
                " the pencil parameter must be fresh"
            )
        self.ctx = base.extend(parameters=(PENCIL_PARAMETER,))
        self.lam = self.ctx.var(PENCIL_PARAMETER)
        # keep the original metric objects: their cached connections and
        # curvatures stay valid in the extended context
        self.g = g
        self.gt = gt
        self.combined = Metric(self.ctx, [
            [self.g.entries[i][j] + self.lam * self.gt.entries[i][j]
             for j in range(g.n)]
            for i in range(g.n)
        ])
        if self.combined.is_degenerate():
            raise DegeneratePencilError(
                "det(g + lambda*gt) is identically zero"
            )

    @property
    def n(self) -> int:
        return self.g.n


def almost_compatible(g: Metric, gt: Metric) -> bool:
    """Levi-Civita symbols of g + lambda*gt equal Gamma + lambda*Gammat."""
    pencil = Pencil(g, gt)
    return _almost(pencil)


def _almost(pencil: Pencil) -> bool:
    n = pencil.n
    conn_l = dg.levi_civita(pencil.combined).raised
    conn_g = dg.levi_civita(pencil.g).raised
    conn_t = dg.levi_civita(pencil.gt).raised
    for i in range(n):
        for j in range(n):
            for k in range(n):
                d = conn_l[i][j][k] - conn_g[i][j][k] - pencil.lam * conn_t[i][j][k]
                if not sc.is_zero(d):
                    return False
    return True


def _connection_vanishes(g: Metric) -> bool:
    conn = dg.levi_civita(g).raised
    n = g.n
    return all(
        sc.is_zero(conn[i][j][k])
        for i in range(n) for j in range(n) for k in range(n)
    )


def compatible(g: Metric, gt: Metric) -> bool:
    """Almost compatible and the curvature of the pencil splits additively.

    When one side has identically vanishing Levi-Civita symbols (a constant
    metric in these coordinates) and almost-compatibility holds, the pencil
    connection coincides with the other side's connection, so the splitting
    reduces to the vanishing of the constant metric's raising of the mixed
    curvature; that shortcut is exact, not approximate.
    """
    # orient the constant-connection member, if any, into the gt slot
    if not _connection_vanishes(gt) and _connection_vanishes(g):
        g, gt = gt, g
    pencil = Pencil(g, gt)
    if not _almost(pencil):
        return False
    if _connection_vanishes(pencil.gt):
        curv = dg.riemann(pencil.g)
        n = pencil.n
        if curv.is_zero():
            return True
        # lambda-part of the raised pencil curvature: gt^{is} R^j_{skl}
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    for l in range(k + 1, n):
                        total = pencil.ctx.number(0)
                        for s in range(n):
                            total = total + (
                                pencil.gt.entries[i][s] * curv.mixed[j][s][k][l]
                            )
                        if not sc.is_zero(total):
                            return False
        return True
    curv_l = dg.riemann(pencil.combined).raised
    curv_g = dg.riemann(pencil.g).raised
    curv_t = dg.riemann(pencil.gt).raised
    n = pencil.n
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(k + 1, n):
                    d = (
                        curv_l[i][j][k][l]
                        - curv_g[i][j][k][l]
                        - pencil.lam * curv_t[i][j][k][l]
                    )
                    if not sc.is_zero(d):
                        return False
    return True


def pair_check(A: ConstantOp, B: NonlocalIsometryOp) -> ValidationReport:
    """Bi-Hamiltonian pair criterion for (eta*d_x, B) with c = 0:
    (i) eta and g_B compatible, (ii) f Killing for eta, (iii) f Killing
    for g_B; then A + lambda*B is Hamiltonian for every lambda."""
    if not sc.is_zero(B.c):
        raise ValueError("pair criterion requires a c = 0 nonlocal tail")
    eta_metric = Metric(B.ctx, A.entries)
    compat = compatible(B.metric, eta_metric)
    checks = [CheckItem(
        "pencil_compatible", compat,
        None if compat else
        "pencil symbols are not affine in lambda or the curvature"
        " does not split",
    )]
    for name, g in (("eta_killing", eta_metric), ("metric_killing", B.metric)):
        defect = dg.killing_defect(g, B.isometry)
        checks.append(CheckItem(
            name, defect is None,
            None if defect is None else
            f"Lie derivative component ({defect[0]+1},{defect[1]+1})"
            f" = {defect[2]}",
        ))
    return ValidationReport(tuple(checks))
