"""Flows, Magri steps, recursion operators, commutation."""

import pytest

from pencil_forge import catalog as cat
from pencil_forge import diffgeo as dg
from pencil_forge import hierarchy as hy
from pencil_forge import operators as ops
from pencil_forge import symcore as sc


@pytest.fixture
def astig():
    case = cat.builtin_case("astigmatism")
    return case.context(), case.eta(), case.operator()


@pytest.fixture
def wdvv():
    case = cat.builtin_case("wdvv3")
    return case.context(), case.eta(), case.operator()


def system20(ctx):
    P = ctx.parse
    V = (
        (P("0"), P("-3*v^2/(2*w^2)"), P("v^3/w^3")),
        (P("1"), P("3*v/w"), P("-3*v^2/(2*w^2)")),
        (P("0"), P("1"), P("0")),
    )
    sigma = (P("-x"), P("0"), P("0"))
    return hy.QuasilinearFlow(V, sigma)


class TestVariationalGradient:
    def test_casimir(self, astig):
        ctx, _, _ = astig
        psi = hy.variational_gradient(hy.Density(ctx.parse("-2*v")))
        assert psi.components[0].equals(ctx.number(0))
        assert psi.components[1].equals(ctx.number(-2))

    def test_wdvv_functional(self, wdvv):
        ctx, _, _ = wdvv
        P = ctx.parse
        psi = hy.variational_gradient(
            hy.Density(P("u*v + v^3/(2*w) - x^2*w/2")))
        assert psi.components[0].equals(P("v"))
        assert psi.components[1].equals(P("u + 3*v^2/(2*w)"))
        assert psi.components[2].equals(P("-v^3/(2*w^2) - x^2/2"))

    def test_zero(self, astig):
        ctx, _, _ = astig
        psi = hy.variational_gradient(hy.Density(ctx.number(0)))
        assert all(c.equals(ctx.number(0)) for c in psi.components)

    def test_jets_rejected(self, astig):
        ctx, _, _ = astig
        with pytest.raises(ValueError):
            hy.Density(ctx.parse("u*u_x"))


class TestApplyOperator:
    def test_astigmatism_casimir(self, astig):
        ctx, _, B = astig
        P = ctx.parse
        flow = hy.apply_operator(B, hy.variational_gradient(hy.Density(P("-2*v"))))
        want = hy.QuasilinearFlow(
            ((P("0"), P("1")), (P("alpha/u^2"), P("0"))),
            (P("0"), P("-2*epsilon*x")),
        )
        assert flow.equal(want)

    def test_wdvv_casimir_sign(self, wdvv):
        ctx, _, B = wdvv
        flow = hy.apply_operator(B, hy.variational_gradient(hy.Density(ctx.parse("u"))))
        assert flow.equal(system20(ctx), sign=-1)
        assert not flow.equal(system20(ctx))

    def test_zero_covector(self, astig):
        ctx, _, B = astig
        flow = hy.apply_operator(B, hy.Covector((ctx.number(0), ctx.number(0))))
        assert flow.equal(hy.QuasilinearFlow(
            ((ctx.number(0), ctx.number(0)), (ctx.number(0), ctx.number(0))),
            (ctx.number(0), ctx.number(0)),
        ))

    def test_field_dependent_kernel_rejected(self, astig):
        ctx, _, B = astig
        P = ctx.parse
        with pytest.raises(hy.NonlocalUnresolvedError):
            hy.apply_operator(B, hy.Covector((P("0"), P("u"))))

    def test_nonzero_curvature_tail_rejected(self, astig):
        ctx, _, B = astig
        bumped = ops.NonlocalIsometryOp(
            B.metric, B.gamma, ctx.number(1), B.epsilon, B.isometry)
        with pytest.raises(ValueError):
            hy.apply_operator(bumped, hy.Covector((ctx.number(0), ctx.number(1))))


class TestFlowFromDensity:
    def test_wdvv_system(self, wdvv):
        ctx, A, _ = wdvv
        flow = hy.flow_from_density(
            A, hy.Density(ctx.parse("u*v + v^3/(2*w) - x^2*w/2")))
        assert flow.equal(system20(ctx))

    def test_two_component_system(self, astig):
        ctx, A, _ = astig
        P = ctx.parse
        flow = hy.flow_from_density(A, hy.Density(P("v^2/2 - ln(u) - x^2*u")))
        want = hy.QuasilinearFlow(
            ((P("0"), P("1")), (P("1/u^2"), P("0"))),
            (P("0"), P("-2*x")),
        )
        assert flow.equal(want)

    def test_linear_density_is_casimir(self, astig):
        ctx, A, _ = astig
        P = ctx.parse
        flow = hy.flow_from_density(A, hy.Density(P("3*u - 7*v")))
        zero = ctx.number(0)
        assert flow.equal(hy.QuasilinearFlow(
            ((zero, zero), (zero, zero)), (zero, zero)))


class TestMagriStep:
    def test_astigmatism_chain(self, astig):
        ctx, A, B = astig
        P = ctx.parse
        h1 = hy.magri_step(A, B, hy.Density(P("-2*v")))
        assert h1.h.equals(P("v^2/2 - alpha*ln(u) - epsilon*x^2*u"))

    def test_wdvv_recovers_functional(self, wdvv):
        ctx, A, B = wdvv
        P = ctx.parse
        h1 = hy.magri_step(A, B, hy.Density(P("-u")))
        assert h1.h.equals(P("u*v + v^3/(2*w) - x^2*w/2"))

    def test_zero_density(self, astig):
        ctx, A, B = astig
        h1 = hy.magri_step(A, B, hy.Density(ctx.number(0)))
        assert h1.h.equals(ctx.number(0))

    def test_magri_identity(self, astig):
        ctx, A, B = astig
        P = ctx.parse
        h0 = hy.Density(P("-2*v"))
        h1 = hy.magri_step(A, B, h0)
        regenerated = hy.flow_from_density(A, h1)
        direct = hy.apply_operator(B, hy.variational_gradient(h0))
        assert regenerated.equal(direct)

    def test_not_exact(self):
        ctx = sc.Context(fields=("u", "v"))
        P = ctx.parse
        g = dg.Metric(ctx, [[P("0"), P("1")], [P("1"), P("0")]])
        zero = ctx.number(0)
        gamma = [[[zero, zero], [zero, zero]], [[zero, zero], [zero, zero]]]
        gamma[0][0][1] = P("u")  # row (V^1_v = u) is not a u-gradient row
        gamma = tuple(tuple(tuple(r) for r in p) for p in gamma)
        B = ops.NonlocalIsometryOp(
            g, gamma, zero, ctx.number(1), dg.VectorField((P("0"), P("1"))))
        A = ops.ConstantOp.antidiagonal(ctx)
        with pytest.raises(hy.NotExactError):
            hy.magri_step(A, B, hy.Density(P("u")))

    def test_not_closed(self):
        ctx = sc.Context(fields=("u", "v"))
        P = ctx.parse
        g = dg.Metric(ctx, [[P("0"), P("1")], [P("1"), P("0")]])
        zero = ctx.number(0)
        gamma = [[[zero, zero], [zero, zero]], [[zero, zero], [zero, zero]]]
        gamma[1][0][1] = P("1")  # phi = (0, v): psi' = (v, 0) is not closed
        gamma = tuple(tuple(tuple(r) for r in p) for p in gamma)
        B = ops.NonlocalIsometryOp(
            g, gamma, zero, ctx.number(0), dg.VectorField((P("0"), P("1"))))
        A = ops.ConstantOp.antidiagonal(ctx)
        with pytest.raises(hy.NotClosedError):
            hy.magri_step(A, B, hy.Density(P("u")))


class TestRecursionOperator:
    def test_constant_family(self):
        case = cat.builtin_case("g6")
        ctx = case.context()
        P = ctx.parse
        R = hy.recursion_operator(case.eta(), case.operator())
        want = [
            ["beta", "alpha"],
            ["gamma", "beta"],
        ]
        for i in range(2):
            for j in range(2):
                entry = R.entries[i][j]
                assert entry.dx.equals(P(want[i][j]))
                assert sc.is_zero(entry.mult)
                assert len(entry.tails) == 1
                left, right = entry.tails[0]
                assert left.equals(ctx.number(1))
                assert right.equals(ctx.number(1))

    def test_g3_printed_matrix(self):
        case = cat.builtin_case("g3")
        ctx = case.context()
        P = ctx.parse
        R = hy.recursion_operator(case.eta(), case.operator())
        want = [
            [("beta", "u_x/2", ()), ("0", "0", ((P("1"), P("1")),))],
            [("v", "v_x/2", ()), ("beta", "-u_x/2", ())],
        ]
        for i in range(2):
            for j in range(2):
                dx, mult, tails = want[i][j]
                ref = hy.OperatorSymbol(P(dx), P(mult), tails)
                assert hy.symbols_equal(R.entries[i][j], ref), (i, j)

    def test_astigmatism_printed_matrix(self):
        case = cat.builtin_case("astigmatism")
        ctx = case.context()
        P = ctx.parse
        bound = cat._bind_operator(
            case, {"alpha": "1", "beta": "0", "epsilon": "1"})
        R = hy.recursion_operator(case.eta(), bound)
        want = [
            [("0", "-v_x/2", ()), ("u", "u_x/2", ())],
            [("1/u", "-u_x/(2*u^2)", ((P("1"), P("1")),)),
             ("0", "v_x/2", ())],
        ]
        for i in range(2):
            for j in range(2):
                dx, mult, tails = want[i][j]
                ref = hy.OperatorSymbol(P(dx), P(mult), tails)
                assert hy.symbols_equal(R.entries[i][j], ref), (i, j)

    def test_column_permutation_property(self):
        # for the antidiagonal eta, M^i_k equals B^{i, n+1-k}; all nine
        # two-component families, the radical one included
        for case in cat.builtin_cases():
            if case.n != 2:
                continue
            op = case.operator()
            B = hy.operator_symbols(op)
            R = hy.recursion_operator(case.eta(), op)
            for i in range(2):
                for k in range(2):
                    assert hy.symbols_equal(R.entries[i][k], B[i][1 - k]), (
                        case.name, i, k)

    def test_tails_tensor_equality(self):
        ctx = sc.Context(fields=("u", "v"))
        P = ctx.parse
        a = hy.OperatorSymbol(P("0"), P("0"), ((P("u"), P("-v")),))
        b = hy.OperatorSymbol(P("0"), P("0"), ((P("-u"), P("v")),))
        c = hy.OperatorSymbol(P("0"), P("0"), ((P("u"), P("v")),))
        assert hy.symbols_equal(a, b)
        assert not hy.symbols_equal(a, c)


class TestCommuteCheck:
    def test_reduced_potential_flows(self):
        ctx = sc.Context(fields=("u", "v", "w"))
        P = ctx.parse
        eta = ops.ConstantOp.antidiagonal(ctx)
        F = P("u^2*w/2 + u*v^2/2 - v^4/16 * (-2/w)")
        f2 = hy.wdvv_flow(F, eta, 2)
        f3 = hy.wdvv_flow(F, eta, 3)
        assert hy.commute_check(f2, f3)

    def test_self_commute(self, wdvv):
        ctx, _, _ = wdvv
        flow = system20(ctx)
        assert hy.commute_check(flow, flow)

    def test_corrupted_flow_fails(self):
        ctx = sc.Context(fields=("u", "v", "w"))
        P = ctx.parse
        eta = ops.ConstantOp.antidiagonal(ctx)
        F = P("u^2*w/2 + u*v^2/2 - v^4/16 * (-2/w)")
        f2 = hy.wdvv_flow(F, eta, 2)
        f3 = hy.wdvv_flow(F, eta, 3)
        V = [list(row) for row in f3.V]
        V[2] = [P("1"), P("0"), P("0")]
        V[2][0] = P("0")
        V[2][1] = P("0")
        V[2][2] = P("1")  # w_y = w_x instead of u_x
        broken = hy.QuasilinearFlow(tuple(tuple(r) for r in V), f3.sigma)
        assert not hy.commute_check(f2, broken)

    def test_symmetric(self):
        ctx = sc.Context(fields=("u", "v", "w"))
        P = ctx.parse
        eta = ops.ConstantOp.antidiagonal(ctx)
        F = P("u^2*w/2 + u*v^2/2 - v^4/16 * (-2/w)")
        f2 = hy.wdvv_flow(F, eta, 2)
        f3 = hy.wdvv_flow(F, eta, 3)
        assert hy.commute_check(f2, f3) == hy.commute_check(f3, f2)


class TestWdvvFlow:
    def make(self, gamma_text):
        ctx = sc.Context(fields=("u", "v", "w"), functions=(("gamma", "w"),))
        P = ctx.parse
        F = sc.substitute(
            P("u^2*w/2 + u*v^2/2 - v^4*gamma(w)/16"),
            {"gamma": P(gamma_text)},
        )
        return ctx, ops.ConstantOp.antidiagonal(ctx), F

    def test_second_flow(self):
        ctx, eta, F = self.make("-2/w")
        P = ctx.parse
        flow = hy.wdvv_flow(F, eta, 2)
        want = hy.QuasilinearFlow(
            (
                (P("0"), P("-3*v^2/(2*w^2)"), P("v^3/w^3")),
                (P("1"), P("3*v/w"), P("-3*v^2/(2*w^2)")),
                (P("0"), P("1"), P("0")),
            ),
            (P("0"), P("0"), P("0")),
        )
        assert flow.equal(want)

    def test_third_flow(self):
        ctx, eta, F = self.make("-2/w")
        P = ctx.parse
        flow = hy.wdvv_flow(F, eta, 3)
        want = hy.QuasilinearFlow(
            (
                (P("0"), P("v^3/w^3"), P("-3*v^4/(4*w^4)")),
                (P("0"), P("-3*v^2/(2*w^2)"), P("v^3/w^3")),
                (P("1"), P("0"), P("0")),
            ),
            (P("0"), P("0"), P("0")),
        )
        assert flow.equal(want)

    def test_first_flow_is_identity(self):
        ctx, eta, F = self.make("-2/w")
        flow = hy.wdvv_flow(F, eta, 1)
        for i in range(3):
            assert flow.sigma[i].equals(ctx.number(0))
            for j in range(3):
                assert flow.V[i][j].equals(ctx.number(1 if i == j else 0))
