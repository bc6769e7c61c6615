"""Differential operators on charts, cross-checked against closed forms."""

import numpy as np
import pytest

from curvpinch import charts, models, tensor_core as tc


X4 = np.array([0.12, -0.2, 0.31, 0.05])


class TestChristoffel:
    def test_euclidean_vanishes(self, euclid4):
        gamma = charts.christoffel_at(euclid4, X4)
        assert np.max(np.abs(gamma)) < 1e-12

    def test_linear_conformal_closed_form(self):
        # phi = c x^1: Gamma^k_ij = c (d_i1 d^k_j + d_j1 d^k_i - d_ij d^k1)
        c = 0.3
        spec = models.ModelSpec(
            kind="conformal", n=4, phi=(models.PhiTerm("poly", c, powers=(1, 0, 0, 0)),)
        )
        chart = models.build_chart(spec)
        gamma = charts.christoffel_at(chart, X4)
        eye = np.eye(4)
        e1 = np.zeros(4)
        e1[0] = 1.0
        expected = c * (
            np.einsum("i,kj->kij", e1, eye)
            + np.einsum("j,ki->kij", e1, eye)
            - np.einsum("ij,k->kij", eye, e1)
        )
        assert np.max(np.abs(gamma - expected)) < 1e-12
        # analytic路 matches the finite-difference route
        assert charts.christoffel_consistency(chart, X4[None]) < 1e-8

    def test_warped_turning_point(self, warped4, warp_solution4):
        # at t = 0 the warping derivative vanishes: Gamma^t_ab = Gamma^a_tb = 0
        _, chart = warped4
        x = np.array([0.0, 0.4, -0.3, 0.2])
        gamma = charts.christoffel_at(chart, x)
        assert np.max(np.abs(gamma[0, 1:, 1:])) < 1e-9
        assert np.max(np.abs(gamma[1:, 0, :])) < 1e-9

    def test_consistency_audit_on_models(self, sphere4, product4, warped4, conformal4):
        rng = np.random.default_rng(0)
        for _, chart in (sphere4, product4, warped4, conformal4):
            pts = chart.sample_points(100, rng)
            assert charts.christoffel_consistency(chart, pts) < 1e-6

    def test_stencil_margin_error(self, euclid4):
        with pytest.raises(charts.StencilMarginError, match="insufficient stencil margin"):
            charts.riemann_at(euclid4, np.array([0.9999, 0.0, 0.0, 0.0]))

    def test_periodic_axis_has_no_margin(self, product4):
        # t = 0 sits on the periodic seam; stencils wrap
        _, chart = product4
        val = charts.scalar_at(chart, np.array([0.0, 0.1, -0.2, 0.15]))
        assert val == pytest.approx(6.0, abs=1e-8)


class TestCurvature:
    def test_euclidean_zero(self, euclid4):
        assert np.max(np.abs(charts.riemann_at(euclid4, X4))) < 1e-11
        assert abs(charts.scalar_at(euclid4, X4)) < 1e-11

    def test_sphere_scalar_at_origin(self, sphere4):
        _, chart = sphere4
        assert charts.scalar_at(chart, np.zeros(4)) == pytest.approx(12.0, abs=1e-9)

    def test_product_scalar_everywhere(self, product4):
        _, chart = product4
        rng = np.random.default_rng(2)
        for x in chart.sample_points(10, rng):
            assert charts.scalar_at(chart, x) == pytest.approx(6.0, abs=1e-8)

    def test_positive_definite_audit(self, sphere4, noncf4):
        rng = np.random.default_rng(3)
        _, chart = sphere4
        assert charts.positive_definite_audit(chart, chart.sample_points(100, rng))
        assert charts.positive_definite_audit(noncf4, noncf4.sample_points(100, rng))

    def test_fd_convergence_fourth_order(self, sphere4):
        # pure finite-difference path: halving h cuts the residual by >= 8x
        _, base = sphere4
        x = np.array([0.3, -0.2, 0.1, 0.25])
        errs = []
        for h in (0.02, 0.01):
            chart = charts.MetricChart(n=4, box=base.box, metric_fn=base.metric_fn, fd_step=h)
            errs.append(abs(charts.scalar_at(chart, x) - 12.0))
        assert errs[0] / errs[1] >= 8.0

    def test_riemann_invariants_on_noncf(self, noncf4):
        riem = charts.riemann_at(noncf4, X4)
        g = noncf4.metric_at(X4)
        scale = max(1.0, np.max(np.abs(riem)))
        assert np.max(np.abs(riem - np.einsum("jlik->ikjl", riem))) <= 1e-8 * scale
        bianchi = riem + np.einsum("kjil->ikjl", riem) + np.einsum("jikl->ikjl", riem)
        assert np.max(np.abs(bianchi)) <= 1e-8 * scale

    def test_cf_reconstruction_from_ricci_data(self, warped4, conformal4):
        # on conformally flat charts the curvature is recovered from (E, R)
        for _, chart in (warped4, conformal4):
            rng = np.random.default_rng(7)
            x = chart.sample_points(1, rng)[0]
            g = chart.metric_at(x)
            riem = charts.riemann_at(chart, x)
            ric = tc.ricci_contraction(g, riem)
            R = tc.trace(g, ric)
            recon = tc.cf_riemann_from_ricci(g, ric - (R / chart.n) * g, R)
            assert np.max(np.abs(recon - riem)) < 1e-6

    def test_cf_reconstruction_product_tight(self, product4):
        # the analytic-Christoffel product chart recovers to FD accuracy
        _, chart = product4
        rng = np.random.default_rng(17)
        for x in chart.sample_points(5, rng):
            g = chart.metric_at(x)
            riem = charts.riemann_at(chart, x)
            ric = tc.ricci_contraction(g, riem)
            R = tc.trace(g, ric)
            recon = tc.cf_riemann_from_ricci(g, ric - (R / chart.n) * g, R)
            assert np.max(np.abs(recon - riem)) < 1e-8


class TestCottonAndWeylDivergence:
    def test_euclidean_cotton_zero(self, euclid4):
        assert np.max(np.abs(charts.cotton_at(euclid4, X4))) < 1e-12

    def test_conformal_cotton_vanishes(self, conformal4):
        _, chart = conformal4
        rng = np.random.default_rng(4)
        worst = max(
            np.max(np.abs(charts.cotton_at(chart, x)))
            for x in chart.sample_points(5, rng)
        )
        assert worst < 1e-6

    def test_noncf_cotton_nonzero(self, noncf4):
        assert np.max(np.abs(charts.cotton_at(noncf4, X4))) > 1e-3

    def test_cotton_antisymmetry_and_traces(self, conformal4, noncf4):
        # trace-freeness is a genuine check of the differentiated machinery
        # (it encodes the contracted Bianchi identity); the pure-FD negative
        # control carries twice the nested-stencil noise of the analytic path
        _, chart = conformal4
        cases = (
            (chart, np.array([0.1, -0.15, 0.2, 0.12]), 1e-8),
            (noncf4, X4, 2e-8),
        )
        for ch, x, tol in cases:
            jet = charts.curvature_jet(ch, x)
            C = jet.cotton
            assert np.max(np.abs(C + np.einsum("ikj->ijk", C))) == 0.0
            for contraction in ("ij,ijk->k", "ik,ijk->j", "jk,ijk->i"):
                assert np.max(np.abs(np.einsum(contraction, jet.ginv, C))) <= tol

    def test_divergence_identity_requires_n4(self):
        spec = models.ModelSpec(kind="sphere", n=3, radius=1.0)
        chart = models.build_chart(spec)
        with pytest.raises(ValueError, match="n >= 4"):
            charts.weyl_divergence_defect_at(chart, np.array([0.2, -0.1, 0.3]))

    def test_divergence_identity_conformal(self, conformal4):
        _, chart = conformal4
        assert charts.weyl_divergence_defect_at(chart, np.array([0.1, -0.15, 0.2, 0.12])) < 1e-6

    def test_divergence_identity_noncf_nontrivial(self, noncf4):
        # the identity holds for a generic metric while each side is large
        jet = charts.curvature_jet(noncf4, X4)
        assert jet.weyl_divergence_defect() < 1e-5
        assert np.max(np.abs(jet.cotton)) > 1e-3

    def test_divergence_identity_warped_n5(self):
        spec = models.default_corpus(ns=(5,))[2]
        assert spec.kind == "warped"
        chart = models.build_chart(spec)
        rng = np.random.default_rng(6)
        for x in chart.sample_points(3, rng):
            assert charts.weyl_divergence_defect_at(chart, x) < 1e-5


class TestFieldOperators:
    def test_constant_field_euclidean(self, euclid4):
        field = charts.Sym2Field(chart=euclid4, eval=lambda x: np.diag([1.0, 2.0, -1.0, 0.5]))
        assert charts.codazzi_defect_at(euclid4, field, X4) < 1e-12

    def test_sphere_schouten_codazzi(self, sphere4):
        spec, chart = sphere4
        field = models.closed_form_schouten_field(spec, chart)
        rng = np.random.default_rng(8)
        for x in chart.sample_points(5, rng):
            assert charts.codazzi_defect_at(chart, field, x) < 1e-6

    def test_sphere_schouten_codazzi_curvature_route(self, sphere4):
        # same defect with the field computed from chart curvature
        _, chart = sphere4
        field = charts.curvature_schouten_field(chart)
        assert charts.codazzi_defect_at(chart, field, X4) < 1e-6

    def test_warped_ricci_field_codazzi(self, warped4):
        # harmonic curvature: the Ricci tensor itself satisfies the Codazzi equation
        spec, chart = warped4
        e_field = models.closed_form_e_field(spec, chart)
        R = 6.0

        def ric_eval(x):
            return e_field.at(x) + (R / 4.0) * chart.metric_at(x)

        ric_field = charts.Sym2Field(chart=chart, eval=ric_eval, reach=0.0)
        rng = np.random.default_rng(9)
        for x in chart.sample_points(5, rng):
            assert charts.codazzi_defect_at(chart, ric_field, x) < 1e-6

    def test_product_elliptic_both_sides_vanish(self, product4):
        spec, chart = product4
        field = models.closed_form_e_field(spec, chart)
        rng = np.random.default_rng(10)
        x = chart.sample_points(1, rng)[0]
        lap = charts.rough_laplacian_sym2(chart, field, x)
        assert np.max(np.abs(lap)) < 1e-6  # parallel field
        assert charts.elliptic_residual_at(chart, field, x) < 1e-6

    def test_zero_field_trivial(self, product4):
        _, chart = product4
        zero = charts.Sym2Field(chart=chart, eval=lambda x: np.zeros((4, 4)))
        rng = np.random.default_rng(11)
        x = chart.sample_points(1, rng)[0]
        assert charts.elliptic_residual_at(chart, zero, x) < 1e-12
        assert charts.weitzenbock_residual_at(chart, zero, x) < 1e-12

    def test_warped_elliptic_residual(self, warped4):
        spec, chart = warped4
        field = models.closed_form_e_field(spec, chart)
        rng = np.random.default_rng(12)
        worst = max(
            charts.elliptic_residual_at(chart, field, x)
            for x in chart.sample_points(20, rng)
        )
        assert worst < 1e-5

    def test_warped_weitzenbock_residual(self, warped4):
        spec, chart = warped4
        field = models.closed_form_e_field(spec, chart)
        rng = np.random.default_rng(13)
        worst = max(
            charts.weitzenbock_residual_at(chart, field, x)
            for x in chart.sample_points(20, rng)
        )
        assert worst < 1e-5

    def test_product_weitzenbock_gradient_term_vanishes(self, product4):
        spec, chart = product4
        field = models.closed_form_e_field(spec, chart)
        rng = np.random.default_rng(14)
        x = chart.sample_points(1, rng)[0]
        assert charts.grad_norm2_sym2(chart, field, x) < 1e-10
        assert charts.weitzenbock_residual_at(chart, field, x) < 1e-6

    def test_product_kato_parallel(self, product4):
        spec, chart = product4
        field = models.closed_form_e_field(spec, chart)
        rng = np.random.default_rng(15)
        x = chart.sample_points(1, rng)[0]
        assert abs(charts.kato_gap_at(chart, field, x)) < 1e-8

    def test_warped_kato_equality(self, warped4):
        # the refined Kato inequality is achieved: measured |gap| at noise level
        spec, chart = warped4
        field = models.closed_form_e_field(spec, chart)
        rng = np.random.default_rng(16)
        gaps = [
            charts.kato_gap_at(chart, field, x) for x in chart.sample_points(20, rng)
        ]
        assert min(gaps) >= -1e-7
        assert max(np.abs(gaps)) <= 1e-6

    def test_kato_vanishing_locus_error(self, sphere4):
        spec, chart = sphere4
        field = models.closed_form_e_field(spec, chart)  # identically zero
        with pytest.raises(charts.FieldPreconditionError, match="vanishing locus"):
            charts.kato_gap_at(chart, field, X4)

    def test_elliptic_precondition_errors(self, sphere4):
        _, chart = sphere4
        not_tf = charts.Sym2Field(chart=chart, eval=lambda x: np.eye(4))
        with pytest.raises(charts.FieldPreconditionError, match="not a trace-free Codazzi"):
            charts.elliptic_residual_at(chart, not_tf, X4)
        # trace-free but not Codazzi
        not_cod = charts.Sym2Field(
            chart=chart,
            eval=lambda x: np.diag([x[0] ** 2, np.sin(x[1]), 1.0, -1.0 - x[0] ** 2 - np.sin(x[1])]),
        )
        with pytest.raises(charts.FieldPreconditionError, match="not a trace-free Codazzi"):
            charts.elliptic_residual_at(chart, not_cod, X4)


class TestScalarLaplacian:
    def test_euclidean_coordinate_functions(self, euclid4):
        assert abs(charts.laplacian_scalar(euclid4, lambda x: x[1], X4)) < 1e-9
        # Delta |x|^2 = 2n on flat space
        val = charts.laplacian_scalar(euclid4, lambda x: float(x @ x), X4)
        assert val == pytest.approx(8.0, abs=1e-7)

    def test_curved_laplacian_of_constant(self, warped4):
        _, chart = warped4
        x = np.array([1.0, 0.2, -0.3, 0.4])
        assert abs(charts.laplacian_scalar(chart, lambda x: 3.5, x)) < 1e-9
