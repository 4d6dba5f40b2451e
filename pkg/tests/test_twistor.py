import numpy as np
import pytest

from twistorcheck import fibermap as fm, geometry as geo, jets, kahler, twistor as tw
from twistorcheck.errors import DomainError, InputError, UsageError


@pytest.fixture(scope="module")
def charts(request):
    out = {}
    for name in ("flat", "fubini_study", "eguchi_hanson", "burns"):
        out[name] = tw.TwistorChart.twistor(kahler.get_fixture(name))
    return out


def modified_chart(metric, perturb=0.0, profile_name="cylinder", c=0.0):
    prof = fm.get_profile(profile_name)
    emap = fm.solve_phi(prof, c=c, branch="quadrature")
    if perturb:
        emap = emap.perturbed(perturb)
    return tw.TwistorChart.modified(metric, prof, emap)


class TestKOperator:
    def test_s1_is_I(self, flat):
        e = np.eye(4)
        s1 = geo.TwoVector.wedge(e[0], e[1]) + geo.TwoVector.wedge(e[2], e[3])
        K = tw.K_operator(s1, flat, np.zeros(4))
        assert np.allclose(K, kahler.I_MATRIX, atol=1e-14)
        Km = tw.K_operator(-1.0 * s1, flat, np.zeros(4))
        assert np.allclose(Km, -kahler.I_MATRIX, atol=1e-14)

    def test_square_and_isometry(self, eguchi_hanson, rng):
        x = eguchi_hanson.chart.sample(1, rng)[0]
        g = eguchi_hanson.values_at(x)
        fr = kahler.adapted_frame(eguchi_hanson, x)
        basis = geo.sd_basis(fr.matrix, g)
        a = np.cos(0.7) * basis[0] + np.sin(0.7) * basis[2]
        K = tw.K_operator(a, eguchi_hanson, x)
        assert np.max(np.abs(K @ K + np.eye(4))) < 1e-12
        assert np.max(np.abs(K.T @ g @ K - g)) < 1e-12

    def test_input_validation(self, flat):
        e = np.eye(4)
        s1 = geo.TwoVector.wedge(e[0], e[1]) + geo.TwoVector.wedge(e[2], e[3])
        with pytest.raises(InputError):
            tw.K_operator(2.0 * s1, flat, np.zeros(4))
        t1 = geo.TwoVector.wedge(e[0], e[1]) - geo.TwoVector.wedge(e[2], e[3])
        with pytest.raises(InputError):
            tw.K_operator(t1, flat, np.zeros(4))


class TestHorizontalLift:
    def test_flat_lift_trivial(self, charts, rng):
        pt = charts["flat"].sample(1, rng)[0]
        X = np.array([1.0, -2.0, 0.5, 0.0])
        lift = tw.horizontal_lift(X, charts["flat"], pt)
        assert np.allclose(lift[:4], X) and np.allclose(lift[4:], 0.0)

    def test_coframe_annihilation_and_projection(self, charts, rng):
        chart = charts["burns"]
        pts = chart.sample(5, rng)
        ctx = tw.ChartEval(chart, pts)
        for _ in range(20):
            X = rng.normal(size=4)
            lift = ctx.horizontal_lift_values(X)
            pv, pw = ctx.vertical_coframe_pairing(lift)
            assert np.max(np.abs(pv)) < 1e-10
            assert np.max(np.abs(pw)) < 1e-10
            assert np.allclose(lift[..., :4], X)  # d pi (X^h) = X

    def test_epsilon_calibration(self, burns, eguchi_hanson):
        eps, diag = tw.chart_calibration(burns)
        assert eps == +1
        assert not diag["beta_negligible"]
        # the matched sign reproduces transport; the flipped one misses badly
        assert diag["match_residual"] < 1e-3 * abs(diag["beta_integral"]) + 1e-8
        assert diag["mismatch_ratio"] > 1.0
        eps_eh, diag_eh = tw.chart_calibration(eguchi_hanson)
        assert eps_eh == +1 and diag_eh["beta_negligible"]


class TestJField:
    def test_square_minus_identity(self, charts, rng):
        for name in ("flat", "eguchi_hanson", "fubini_study"):
            pts = charts[name].sample(50, rng)
            Jv = tw.J_field(charts[name], pts)
            JJ = np.einsum("...mk,...ka->...ma", Jv, Jv)
            assert np.max(np.abs(JJ + np.eye(6))) < 1e-12, name

    def test_metric_compatibility(self, charts, rng):
        pts = charts["burns"].sample(50, rng)
        ctx = tw.ChartEval(charts["burns"], pts)
        Jv, hv = ctx.J_values, ctx.h_values
        resid = np.einsum("...am,...ab,...bn->...mn", Jv, hv, Jv) - hv
        assert np.max(np.abs(resid)) < 1e-9

    def test_preserves_splitting(self, charts, rng):
        chart = charts["fubini_study"]
        pts = chart.sample(5, rng)
        ctx = tw.ChartEval(chart, pts)
        Jv = ctx.J_values
        X = rng.normal(size=4)
        JXh = np.einsum("...ma,...a->...m", Jv, ctx.horizontal_lift_values(X))
        pv, pw = ctx.vertical_coframe_pairing(JXh)
        assert np.max(np.abs(pv)) < 1e-12 and np.max(np.abs(pw)) < 1e-12
        vert = np.zeros(6)
        vert[4] = 0.7
        vert[5] = -0.4
        Jvert = np.einsum("...ma,a->...m", Jv, vert)
        assert np.max(np.abs(Jvert[..., :4])) < 1e-14

    def test_vertical_action_example(self, charts):
        # J d_v = -(1 - v^2)^{-1} d_w on the sphere fiber (outward normal,
        # cyclic cross product); exercised away from the equator too
        chart = charts["eguchi_hanson"]
        for v in (0.0, 0.3, -0.55):
            pt = np.array([0.5, 0.5, 0.5, 0.5, v, 0.0])
            J = tw.J_field(chart, pt)
            expect = np.zeros(6)
            expect[5] = -1.0 / (1.0 - v * v)
            assert np.allclose(J[:, 4], expect, atol=1e-12)

    def test_pole_proximity_rejected(self, charts):
        pt = np.array([0.5, 0.5, 0.5, 0.5, 1.0, 0.0])
        with pytest.raises(DomainError):
            tw.J_field(charts["eguchi_hanson"], pt)


class TestNijenhuis:
    def test_flat_vanishes(self, charts, rng):
        pts = charts["flat"].sample(20, rng)
        assert np.max(tw.nijenhuis_max(charts["flat"], pts)) < 1e-9

    def test_scalar_flat_twistor_vanishes(self, charts, rng):
        for name in ("eguchi_hanson", "burns"):
            pts = charts[name].sample(20, rng)
            assert np.max(tw.nijenhuis_max(charts[name], pts)) < 1e-6, name

    def test_fubini_study_obstructed(self, charts, rng):
        pts = charts["fubini_study"].sample(20, rng)
        assert np.max(tw.nijenhuis_max(charts["fubini_study"], pts)) > 1e-2

    def test_modified_chart_dichotomy(self, eguchi_hanson, rng):
        good = modified_chart(eguchi_hanson)
        pts = good.sample(10, rng)
        assert np.max(tw.nijenhuis_max(good, pts)) < 1e-6
        bad = modified_chart(eguchi_hanson, perturb=0.1)
        pts_b = bad.sample(10, rng)
        assert np.max(tw.nijenhuis_max(bad, pts_b)) > 1e-3

    def test_wrong_epsilon_breaks_integrability(self, charts, rng):
        chart = charts["burns"]
        pts = chart.sample(10, rng)
        flipped = chart.with_eps(-chart.eps)
        assert np.max(tw.nijenhuis_max(flipped, pts)) > 1e-3

    def test_antisymmetry(self, charts, rng):
        pts = charts["fubini_study"].sample(3, rng)
        N = tw.nijenhuis_bracket(charts["fubini_study"], pts)
        assert np.max(np.abs(N + np.swapaxes(N, -1, -2))) < 1e-12


class TestNijenhuisRoutes:
    def test_flat_both_zero(self, charts, rng):
        pt = charts["flat"].sample(1, rng)[0]
        A, B, C = rng.normal(size=(3, 6))
        assert abs(tw.nijenhuis_domega(charts["flat"], pt, A, B, C)) < 1e-10

    def test_cross_validation(self, charts, rng):
        for name in ("eguchi_hanson", "fubini_study"):
            pts = charts[name].sample(3, rng)
            agree = tw.nijenhuis_route_agreement(charts[name], pts, n_triples=20, seed=11)
            assert agree < 1e-6, name

    def test_fubini_study_routes_nonzero(self, charts, rng):
        pt = charts["fubini_study"].sample(1, rng)[0]
        ctx = tw.ChartEval(charts["fubini_study"], pt)
        N = tw.nijenhuis_bracket(charts["fubini_study"], pt)
        hv = ctx.h_values[0]
        found = False
        for _ in range(10):
            A, B, C = rng.normal(size=(3, 6))
            r1 = float(np.einsum("mab,a,b,mc,c->", N, A, B, hv, C))
            r2 = tw.nijenhuis_domega(charts["fubini_study"], pt, A, B, C)
            assert abs(r1 - r2) < 1e-6
            found = found or abs(r1) > 1e-2
        assert found


class TestStructureIdentities:
    def test_flat_trivial(self, charts, rng):
        pts = charts["flat"].sample(3, rng)
        res = tw.verify_structure_identities(charts["flat"], pts, n_random=4, seed=1)
        assert res.max_residual < 1e-12

    def test_all_fixtures(self, charts, rng):
        for name, chart in charts.items():
            pts = chart.sample(5, rng)
            res = tw.verify_structure_identities(chart, pts, n_random=5, seed=2)
            assert res.max_residual < 1e-6, (name, res)

    def test_cross_pairing_algebraic(self, charts, rng):
        # identity (cross/K pairing) holds independently of curvature
        pts = charts["fubini_study"].sample(10, rng)
        res = tw.verify_structure_identities(charts["fubini_study"], pts, n_random=8, seed=3)
        assert res.cross_k_pairing < 1e-9

    def test_requires_sphere_chart(self, eguchi_hanson, rng):
        chart = modified_chart(eguchi_hanson)
        pts = chart.sample(1, rng)
        with pytest.raises(UsageError):
            tw.verify_structure_identities(chart, pts)

    def test_horizontal_nijenhuis_curvature_form(self, charts, rng):
        # both sides nonzero on the positive-scalar base, yet equal
        for name in ("flat", "eguchi_hanson", "burns", "fubini_study"):
            pts = charts[name].sample(5, rng)
            resid = tw.horizontal_nijenhuis_residual(charts[name], pts, n_random=5, seed=9)
            assert resid < 1e-6, name

    def test_mixed_identity_holds_even_when_nonholomorphic(self, eguchi_hanson, rng):
        # the identity relates both sides whether or not f is holomorphic;
        # with the perturbed map both sides are nonzero and still agree
        chart = modified_chart(eguchi_hanson, perturb=0.1)
        pts = chart.sample(5, rng)
        ctx = tw.ChartEval(chart, pts)
        N = tw._nijenhuis_values(ctx)
        hv = ctx.h_values
        nonzero = False
        for _ in range(10):
            X, Z = rng.normal(size=(2, 4))
            U = rng.normal(size=2)
            resid = tw.mixed_nijenhuis_residual(chart, None, X, U, Z, _ctx=ctx, _N=N, _hv=hv)
            assert resid < 1e-6
            Xh = ctx.horizontal_lift_values(X)
            Zh = ctx.horizontal_lift_values(Z)
            Uv = np.zeros(Xh.shape)
            Uv[..., 4] = U[0]
            Uv[..., 5] = U[1]
            lhs = np.einsum("...mab,...a,...b,...mc,...c->...", N, Xh, Uv, hv, Zh)
            nonzero = nonzero or np.max(np.abs(lhs)) > 1e-3
        assert nonzero


class TestForms:
    def test_exterior_derivative_examples(self, charts, rng):
        chart = charts["flat"]
        pts = chart.sample(3, rng)
        f1 = tw.FormField(1, lambda ctx: {(1,): jets.Jet.variable(ctx.space, 0, ctx.points[:, 0])})
        d1 = tw.exterior_derivative(f1, chart, pts)
        assert np.allclose(d1.comps[(0, 1)], 1.0)
        assert all(np.allclose(v, 0.0) for k, v in d1.comps.items() if k != (0, 1))
        f2 = tw.FormField(2, lambda ctx: {(4, 5): ctx.one})
        assert tw.exterior_derivative(f2, chart, pts).max_abs() == 0.0

    def test_d_squared_zero(self, charts, rng):
        chart = charts["eguchi_hanson"]
        pts = chart.sample(3, rng)

        def one_form(ctx):
            x = [jets.Jet.variable(ctx.space, i, ctx.points[:, i]) for i in range(6)]
            return {(0,): x[1] * x[4] * x[2], (3,): x[0] * x[0] * x[5], (4,): x[2] * x[3]}

        ddf = tw.FormField(2, lambda ctx: tw.d_dict(one_form(ctx), to_values=False))
        assert tw.exterior_derivative(ddf, chart, pts).max_abs() < 1e-10

    def test_d_polynomial_two_form_oracle(self, charts, rng):
        # d(x0 x4 dx1^dx2) = x4 dx0^dx1^dx2 + x0 dx4^dx1^dx2
        chart = charts["flat"]
        pts = chart.sample(4, rng)

        def two_form(ctx):
            x = [jets.Jet.variable(ctx.space, i, ctx.points[:, i]) for i in range(6)]
            return {(1, 2): x[0] * x[4]}

        dv = tw.exterior_derivative(tw.FormField(2, two_form), chart, pts)
        assert np.allclose(dv.comps[(0, 1, 2)], pts[:, 4])
        assert np.allclose(dv.comps[(1, 2, 4)], pts[:, 0])

    def test_omega_h_vertical_coefficient(self, charts, rng):
        chart = charts["eguchi_hanson"]
        pts = chart.sample(5, rng)
        h = lambda z: -1.0 * jets.log(1.0 - z * z)
        fv = tw.omega_h(chart, h, 1.0, 1.0, pts)
        expect = -1.0 / (1.0 - pts[:, 4] ** 2)
        assert np.allclose(fv.comps[(4, 5)], expect, atol=1e-12)

    def test_positivity(self, charts, rng):
        for name in ("flat", "eguchi_hanson", "burns"):
            pts = charts[name].sample(5, rng)
            worst = tw.hermitian_positivity(charts[name], pts, None, 1.0, 1.0,
                                            n_vectors=50, seed=4)
            assert worst > 0.0, name

    def test_positivity_rejects_bad_parameters(self, charts, rng):
        with pytest.raises(InputError):
            tw.omega_ab_field(None, a=-1.0, b=1.0)
        with pytest.raises(InputError):
            tw.omega_ab_field(None, a=1.0, b=0.0)


class TestBalanced:
    H_FUNCS = (
        ("zero", None),
        ("log_pole", lambda z: -1.0 * jets.log(1.0 - z * z)),
        ("log_pole_2", lambda z: -2.0 * jets.log(1.0 - z * z)),
    )

    @pytest.mark.parametrize("label,h", H_FUNCS, ids=[h[0] for h in H_FUNCS])
    def test_scalar_flat_balanced(self, charts, label, h):
        for name in ("eguchi_hanson", "burns"):
            rep = tw.balanced_check(charts[name], h, sample_count=10, seed=6, h_label=label)
            assert rep.max_residual < 1e-7, (name, label)

    def test_flat_square_closed_but_form_not(self, charts, rng):
        pts = charts["flat"].sample(4, rng)
        rep = tw.balanced_check(charts["flat"], None, sample_count=6, seed=6)
        assert rep.max_residual < 1e-10
        # the tautological Hermitian 2-form itself is not closed, even flat
        field = tw.omega_ab_field(None, 1.0, 1.0)
        d1 = tw.exterior_derivative(tw.FormField(2, field.builder), charts["flat"], pts)
        assert d1.max_abs() > 0.1

    def test_x_weight_negative_control(self, charts):
        rep = tw.balanced_check(charts["eguchi_hanson"], None, sample_count=8, seed=6,
                                weight_mode="x_dependent")
        assert rep.max_residual > 1e-3

    def test_positive_scalar_not_balanced(self, charts):
        rep = tw.balanced_check(charts["fubini_study"], None, sample_count=6, seed=6)
        assert rep.max_residual > 1e-3


class TestCone:
    def test_flat_values_and_scaling(self, charts):
        r = tw.cone_wedge_constants(charts["flat"], 1.0, 1.0, sample_count=8, seed=8)
        assert r.c1 == pytest.approx(2.0, abs=1e-12)
        assert r.c2 == pytest.approx(4.0, abs=1e-12)
        r2 = tw.cone_wedge_constants(charts["flat"], 2.0, 1.0, sample_count=8, seed=8)
        assert r2.c1 == pytest.approx(8.0, abs=1e-12)
        assert r2.c2 == pytest.approx(8.0, abs=1e-12)

    def test_constancy_on_curved_chart(self, charts):
        r = tw.cone_wedge_constants(charts["eguchi_hanson"], 1.0, 1.0, sample_count=20, seed=8)
        assert r.c1_rel_variation < 1e-6
        assert r.c2_rel_variation < 1e-6
        assert r.c1 == pytest.approx(2.0, abs=1e-9)
        assert r.c2 == pytest.approx(4.0, abs=1e-9)

    def test_rejects_nonpositive_parameters(self, charts):
        with pytest.raises(InputError):
            tw.cone_wedge_constants(charts["flat"], 0.0, 1.0)


class TestTotalSpaceMetric:
    def test_splitting_structure(self, charts, rng):
        chart = charts["burns"]
        pts = chart.sample(4, rng)
        ctx = tw.ChartEval(chart, pts)
        hv = ctx.h_values
        g = ctx.gvals
        for _ in range(10):
            X, Y = rng.normal(size=(2, 4))
            Xh = ctx.horizontal_lift_values(X)
            Yh = ctx.horizontal_lift_values(Y)
            # h on lifts is the base metric
            hXY = np.einsum("...a,...ab,...b->...", Xh, hv, Yh)
            gXY = np.einsum("i,...ij,j->...", X, g, Y)
            assert np.max(np.abs(hXY - gXY)) < 1e-12
            # horizontal and vertical are h-orthogonal
            vert = np.zeros(6)
            vert[4:] = rng.normal(size=2)
            hXv = np.einsum("...a,...ab,b->...", Xh, hv, vert)
            assert np.max(np.abs(hXv)) < 1e-12
        # vertical block is the embedding metric of the fiber
        rho = ctx.rho.value
        rp = ctx.rho_p.value
        assert np.allclose(hv[..., 4, 4], rp * rp + 1.0)
        assert np.allclose(hv[..., 5, 5], rho * rho)
        tsm = tw.TotalSpaceMetric(chart)
        assert np.allclose(tsm.values_at(pts), hv)
