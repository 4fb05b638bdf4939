"""Bounds from weight potentials, checked against closed forms and values
frozen from independent runs.

Reference values:
    quartic x^4/4 family Z = eps x: best infimum 1.2408065 at eps 1.2712293
        (stationarity of eps - (2/3)(eps^2 - 3/2) s(eps), the polynomial
        root of 16 eps^4 - 24 eps^2 - 3 = 0)
    quartic Muckenhoupt product: B = 0.418646695 at x = 0.6742738 (argmax
        of tail * core computed independently with scipy.integrate.quad)
    quartic Rayleigh family sign(x)|x|^eps: min 1.42579758 at eps 0.85374057
    quartic weight exp(cumulative exp(-(x-1)^2)): infimum 0.59440290
    double well beta=1/2, same shape at slope 1.28: infimum 0.22228602
    reference eigenvalue of the quartic: 1.36859252
"""

import math

import numpy as np
import pytest
from scipy.special import gamma

from diffgap import bounds as bd
from diffgap import expr as ex
from diffgap import model as md
from diffgap import quad as q

QUARTIC_GAP = 1.36859252
Z_OPT = (1.2712293, 1.2408065)
RAYLEIGH_OPT = (0.85374057, 1.42579758)
MUCK_B = (0.6742738, 0.418646695)
LSI_QUARTIC_RHO = 0.59440290
LSI_DWELL_RHO = 0.22228602


def ou():
    return md.build_model(sigma="1", target_potential="x^2/2", name="ou")


def quartic():
    return md.build_model(sigma="1", target_potential="x^4/4", name="quartic")


def dwell(beta):
    return md.build_model(
        sigma="1", target_potential="(x^2-b)^2/4", params={"b": beta}, name="dw"
    )


def cauchy():
    return md.build_model(
        sigma="sqrt(1+x^2)", target_potential="2.5*log(1+x^2)", name="cauchy"
    )


def power(alpha):
    return md.build_model(
        sigma="1", target_potential=f"(x^2)^{alpha / 2}/{alpha}", name="power"
    )


class TestRhoOfWeight:
    def test_unit_weight_constant_rate(self):
        d = md.realize_weight(ou(), md.WeightSpec.direct("1"))
        assert bd.rho_of_weight(d) == 1.0

    def test_quartic_critical_slope(self):
        # at slope sqrt(3/2) the quadratic terms cancel and the rate is
        # sqrt(3/2) + x^6/4, infimum at the origin
        e = math.sqrt(1.5)
        d = md.realize_weight(quartic(), md.WeightSpec.z_form(ex.parse(f"{e!r}*x")))
        assert abs(bd.rho_of_weight(d) - e) < 1e-9

    @pytest.mark.parametrize("beta", [0.25, 0.5, 1.0])
    def test_double_well_critical_slope(self, beta):
        # rate at the critical slope is sqrt(3/2) - beta/2 + x^2(x^2-beta)^2/4
        e = math.sqrt(1.5)
        d = md.realize_weight(dwell(beta), md.WeightSpec.z_form(ex.parse(f"{e!r}*x")))
        assert abs(bd.rho_of_weight(d) - (e - beta / 2.0)) < 1e-9

    def test_reversible_weight_kills_nothing(self):
        d = md.realize_weight(ou(), md.WeightSpec.exp_w("-x^2/2"))
        assert bd.rho_of_weight(d) == 0.0
        # steeper potential: cancellation noise at the edge may demote the
        # flat rate to the conservative marker, but never to a positive claim
        d4 = md.realize_weight(quartic(), md.WeightSpec.exp_w("-x^4/4"))
        assert bd.rho_of_weight(d4) <= 1e-8

    def test_rate_decaying_outward_is_unbounded_marker(self):
        # V_sigma of the heavy-tailed model decreases toward 0 at the scan
        # edge; the infimum cannot be certified from a finite window
        d = md.realize_weight(cauchy(), md.WeightSpec.direct(cauchy().sigma))
        assert bd.rho_of_weight(d) == -math.inf

    def test_negative_divergence_is_unbounded_marker(self):
        d = md.realize_weight(ou(), md.WeightSpec.exp_w("x^2"))
        assert bd.rho_of_weight(d) == -math.inf

    def test_undefined_rate_rejected(self):
        d = md.realize_weight(ou(), md.WeightSpec.z_form(ex.parse("sqrt(x)")))
        with pytest.raises(bd.BoundError, match="not finite"):
            bd.rho_of_weight(d)

    def test_coarse_grid_rejected(self):
        d = md.realize_weight(ou(), md.WeightSpec.direct("1"))
        with pytest.raises(bd.BoundError, match="coarse"):
            bd.rho_of_weight(d, grid=32)


class TestChenWang:
    def test_ou_unit_weight_is_exact(self):
        r = bd.chen_wang_lower(ou(), md.WeightSpec.direct("1"))
        assert r.feasible and r.side == "lower" and r.target == "lambda1"
        assert r.value == 1.0

    def test_quartic_family_optimum(self):
        cfg = bd.OptConfig(box={"eps": (0.1, 3.0)})
        r = bd.chen_wang_lower(quartic(), md.WeightSpec.z_form(ex.parse("eps*x")), cfg)
        assert abs(r.value - Z_OPT[1]) < 1e-5
        assert abs(r.params["eps"] - Z_OPT[0]) < 1e-3
        assert r.error_budget["opt_gap"] >= 0.0
        assert r.value <= QUARTIC_GAP

    def test_double_well_family_optimum(self):
        cfg = bd.OptConfig(box={"eps": (0.1, 3.0)})
        r = bd.chen_wang_lower(dwell(0.5), md.WeightSpec.z_form(ex.parse("eps*x")), cfg)
        # at least the critical-slope value, at most the true gap
        assert r.value >= math.sqrt(1.5) - 0.25 - 1e-6
        assert r.value <= 1.062572 + 1e-6

    def test_unbounded_family_infeasible(self):
        r = bd.chen_wang_lower(ou(), md.WeightSpec.exp_w("x^2"))
        assert not r.feasible and r.value is None

    def test_missing_box_rejected(self):
        with pytest.raises(bd.BoundError, match="box"):
            bd.chen_wang_lower(ou(), md.WeightSpec.z_form(ex.parse("eps*x")))

    def test_too_many_parameters_rejected(self):
        spec = md.WeightSpec.z_form(ex.parse("a*x + b*x^2 + c*x^3 + d*x^4"))
        with pytest.raises(bd.BoundError, match="parameters"):
            bd.chen_wang_lower(ou(), spec, bd.OptConfig(box={}))


class TestVeysseire:
    def test_ou_exact(self):
        r = bd.veysseire_lower(ou())
        assert abs(r.value - 1.0) < 1e-12

    def test_heavy_tail_closed_form(self):
        # V_sigma = (2 beta - 1)/(1 + x^2) integrates to the closed form
        # (2 beta - 1)(beta - 3/2)/(beta - 1) = 8/3 at beta = 5/2
        r = bd.veysseire_lower(cauchy())
        assert abs(r.value - 8.0 / 3.0) < 1e-10

    def test_power_model_closed_form(self):
        r = bd.veysseire_lower(power(1.5))
        ref = bd.veysseire_power_formula(1.5)
        assert abs(r.value / ref - 1.0) < 1e-8

    def test_quartic_rate_vanishes_infeasible(self):
        # V_sigma = 3x^2 vanishes at the origin between grid nodes; 1/V is
        # not integrable there
        r = bd.veysseire_lower(quartic())
        assert not r.feasible and r.value is None

    def test_negative_rate_infeasible(self):
        r = bd.veysseire_lower(dwell(1.0))
        assert not r.feasible
        assert "positive" in r.notes[0]

    def test_dominates_pointwise_infimum(self):
        # harmonic-mean bound beats inf V by Jensen whenever inf V > 0
        m = md.build_model(sigma="1", target_potential="x^2/2 + x^4/20", name="m")
        d = md.realize_weight(m, md.WeightSpec.direct("1"))
        rho = bd.rho_of_weight(d)
        r = bd.veysseire_lower(m)
        assert rho > 0
        assert r.value >= rho - 1e-9


class TestMuckenhoupt:
    def test_quartic_frozen_product(self):
        mk = bd.muckenhoupt(quartic())
        assert abs(mk.b - MUCK_B[1]) < 5e-5
        assert abs(abs(mk.x_plus - mk.median) - MUCK_B[0]) < 5e-3
        assert abs(mk.b_plus - mk.b_minus) < 1e-6 * mk.b  # even density
        assert abs(mk.lower - 1.0 / (4 * mk.b)) < 1e-15
        assert abs(mk.upper - 2.0 / mk.b) < 1e-15
        assert mk.lower <= QUARTIC_GAP <= mk.upper

    def test_gaussian_bracket(self):
        mk = bd.muckenhoupt(ou())
        assert mk.lower <= 1.0 <= mk.upper

    def test_exponential_like_plateau(self):
        m = md.build_model(
            sigma="1", target_potential="sqrt(x^2 + 1e-6)", name="sexp"
        )
        mk = bd.muckenhoupt(m)
        # the product climbs to its supremum near 1; the bracket straddles
        # the true gap which sits just above 1/4
        assert 1.0 - 1e-6 <= mk.b <= 1.01
        assert mk.lower <= 0.2516 <= mk.upper

    def test_no_gap_detected(self):
        m = md.build_model(sigma="1", target_potential="1.5*log(1+x^2)", name="heavy")
        mk = bd.muckenhoupt(m)
        assert mk.diverging
        lo, hi = mk.reports()
        assert not lo.feasible and not hi.feasible

    def test_unit_sigma_required(self):
        with pytest.raises(bd.BoundError, match="unit diffusion"):
            bd.muckenhoupt(cauchy())

    def test_reports_sides(self):
        lo, hi = bd.muckenhoupt(ou()).reports()
        assert (lo.side, hi.side) == ("lower", "upper")
        assert lo.method == hi.method == "muckenhoupt"


class TestPowerFormulas:
    def test_relaxation_closed_form(self):
        assert abs(bd.muckenhoupt_power_formula(4.0) - 1.0 / (8.0 * gamma(1.25) ** 2)) < 1e-15
        assert abs(bd.muckenhoupt_power_formula(1.0) - 0.25) < 1e-15

    def test_integrated_closed_form_value(self):
        ref = 0.5 * 1.5 ** (-1.0 / 3.0) * gamma(2.0 / 3.0) / gamma(1.0)
        assert abs(bd.veysseire_power_formula(1.5) - ref) < 1e-15

    def test_relaxation_weaker_than_computed_bracket(self):
        mk = bd.muckenhoupt(quartic())
        assert bd.muckenhoupt_power_formula(4.0) <= mk.lower

    def test_crossover_location(self):
        a = bd.power_crossover()
        assert abs(a - 1.18746803) < 1e-6
        assert bd.veysseire_power_formula(a - 0.05) < bd.muckenhoupt_power_formula(a - 0.05)
        assert bd.veysseire_power_formula(a + 0.05) > bd.muckenhoupt_power_formula(a + 0.05)

    def test_domain_validation(self):
        with pytest.raises(bd.BoundError):
            bd.veysseire_power_formula(3.0)
        with pytest.raises(bd.BoundError):
            bd.veysseire_power_formula(1.0)
        with pytest.raises(bd.BoundError):
            bd.muckenhoupt_power_formula(-1.0)
        with pytest.raises(bd.BoundError, match="sign change"):
            bd.power_crossover(1.3, 1.4)


class TestBrascampLieb:
    def test_ou_equality_case(self):
        bl = bd.brascamp_lieb_var_bound(
            ou(), md.realize_weight(ou(), md.WeightSpec.direct("1")), "x"
        )
        assert abs(bl.bound - 1.0) < 1e-10
        assert abs(bl.variance - 1.0) < 1e-10
        assert abs(bl.slack) < 1e-9

    def test_quartic_inequality(self):
        m = quartic()
        d = md.realize_weight(m, md.WeightSpec.z_form(ex.parse("1.2712293*x")))
        bl = bd.brascamp_lieb_var_bound(m, d, "x")
        assert bl.slack >= 0.0
        assert bl.bound >= bl.variance

    def test_heavy_tail_matches_integrated_route(self):
        # with a = sigma and sigma f' = 1 the weighted-gradient integral is
        # exactly the harmonic mean from the integrated bound
        m = cauchy()
        d = md.realize_weight(m, md.WeightSpec.direct(m.sigma))
        bl = bd.brascamp_lieb_var_bound(m, d, "log(x + sqrt(1+x^2))")
        assert abs(bl.bound - 0.375) < 1e-9
        r = bd.veysseire_lower(m)
        assert abs(bl.bound - 1.0 / r.value) < 1e-9
        assert bl.slack >= 0.0

    def test_negative_rate_rejected(self):
        m = dwell(1.0)
        d = md.realize_weight(m, md.WeightSpec.direct("1"))
        with pytest.raises(bd.BoundError, match="positive killing rate"):
            bd.brascamp_lieb_var_bound(m, d, "x")


class TestRayleigh:
    def test_ou_linear_is_tight(self):
        r = bd.rayleigh_upper(ou(), "x")
        assert r.side == "upper"
        assert abs(r.value - 1.0) < 1e-8

    def test_quartic_family_minimum(self):
        cfg = bd.OptConfig(box={"eps": (0.55, 2.0)})
        r = bd.rayleigh_upper(quartic(), ex.parse("x*(x^2)^((eps-1)/2)"), cfg)
        assert abs(r.value - RAYLEIGH_OPT[1]) < 1e-6
        assert abs(r.params["eps"] - RAYLEIGH_OPT[0]) < 1e-4
        assert r.value >= QUARTIC_GAP

    def test_linear_member_is_inverse_variance(self):
        m = quartic()
        r = bd.rayleigh_upper(m, "x")
        f = q.functionals(m, ex.parse("x"))
        assert abs(r.value - 1.0 / f.var) < 1e-9

    def test_power_linear_matches_integrated_bound_scaling(self):
        # for the alpha family the linear trial quotient equals the
        # integrated lower bound divided by (3 - alpha)(alpha - 1)
        m = power(1.5)
        up = bd.rayleigh_upper(m, "x")
        lo = bd.veysseire_lower(m)
        assert abs(up.value - lo.value / ((3.0 - 1.5) * (1.5 - 1.0))) < 1e-6

    def test_constant_family_degenerate(self):
        r = bd.rayleigh_upper(ou(), "1")
        assert not r.feasible

    def test_missing_box_rejected(self):
        with pytest.raises(bd.BoundError, match="box"):
            bd.rayleigh_upper(ou(), ex.parse("x*(x^2)^((eps-1)/2)"))


class TestLsiLower:
    def test_ou_unit_weight(self):
        r = bd.lsi_lower(ou(), inc_family=md.WeightSpec.direct("1"))
        assert r.feasible and r.target == "cls"
        assert abs(r.value - 2.0) < 1e-12
        assert any("symmetric" in n for n in r.notes)

    def test_quartic_frozen_value(self):
        r = bd.lsi_lower(
            quartic(), dec_family=md.WeightSpec.a_form(ex.parse("-(x-1)^2"))
        )
        assert abs(r.value - 2.0 * LSI_QUARTIC_RHO) < 2e-6
        assert abs(r.params["rho_dec"] - LSI_QUARTIC_RHO) < 1e-6
        assert r.value <= 2.0 * QUARTIC_GAP

    def test_double_well_frozen_value(self):
        r = bd.lsi_lower(
            dwell(0.5), dec_family=md.WeightSpec.a_form(ex.parse("-(1.28*x-1)^2"))
        )
        assert abs(r.value - 2.0 * LSI_DWELL_RHO) < 2e-6

    def test_wrong_class_infeasible(self):
        # this weight realizes sigma/a decreasing, so the increasing slot
        # must refuse it
        r = bd.lsi_lower(
            quartic(), inc_family=md.WeightSpec.a_form(ex.parse("-(x-1)^2"))
        )
        assert not r.feasible
        assert "inc" in r.notes[0]

    def test_asymmetric_needs_both_classes(self):
        m = md.build_model(
            sigma="1", target_potential="x^2/2 + x^3/8 + x^4/16", name="asym"
        )
        r = bd.lsi_lower(m, inc_family=md.WeightSpec.direct("1"))
        assert not r.feasible
        assert "asymmetric" in r.notes[0]

    def test_no_family_rejected(self):
        with pytest.raises(bd.BoundError, match="at least one"):
            bd.lsi_lower(ou())


class TestAssemble:
    def test_quartic_pipeline(self):
        m = quartic()
        reports = [
            bd.chen_wang_lower(
                m, md.WeightSpec.z_form(ex.parse("eps*x")),
                bd.OptConfig(box={"eps": (0.1, 3.0)})),
            bd.rayleigh_upper(
                m, ex.parse("x*(x^2)^((eps-1)/2)"),
                bd.OptConfig(box={"eps": (0.55, 2.0)})),
            *bd.muckenhoupt(m).reports(),
            bd.lsi_lower(m, dec_family=md.WeightSpec.a_form(ex.parse("-(x-1)^2"))),
        ]

        class Ref:
            value = QUARTIC_GAP
            err_est = 1e-6

        doc = bd.assemble_report(m, reports, Ref())
        assert doc["violations"] == []
        lam = doc["targets"]["lambda1"]
        assert lam["bracket"][0] <= QUARTIC_GAP <= lam["bracket"][1]
        assert abs(lam["lower"] - Z_OPT[1]) < 1e-4
        assert abs(lam["upper"] - RAYLEIGH_OPT[1]) < 1e-4
        cls = doc["targets"]["cls"]
        assert abs(cls["lower"] - 2.0 * LSI_QUARTIC_RHO) < 1e-4
        assert abs(cls["upper"] - 2.0 * (QUARTIC_GAP + 1e-6)) < 1e-12
        assert cls["upper_source"] == "twice the reference eigenvalue"

    def test_empty_reports(self):
        doc = bd.assemble_report(ou(), [])
        assert doc["targets"] == {} and doc["violations"] == []

    def test_violation_flagged(self):
        mk = {"quad_err": 0.0, "opt_gap": 0.0, "truncation": 0.0}
        lo = bd.BoundReport("chen_wang", "lambda1", "lower", 2.0, {}, dict(mk))
        hi = bd.BoundReport("rayleigh", "lambda1", "upper", 1.0, {}, dict(mk))
        doc = bd.assemble_report(ou(), [lo, hi])
        assert len(doc["violations"]) == 1
        assert "exceeds" in doc["violations"][0]

    def test_oracle_ordering_flagged(self):
        mk = {"quad_err": 0.0, "opt_gap": 0.0, "truncation": 0.0}
        lo = bd.BoundReport("chen_wang", "lambda1", "lower", 2.0, {}, dict(mk))
        doc = bd.assemble_report(ou(), [lo], oracle=1.0)
        assert any("reference eigenvalue" in v for v in doc["violations"])

    def test_report_validation(self):
        mk = {"quad_err": 0.0, "opt_gap": 0.0, "truncation": 0.0}
        with pytest.raises(bd.BoundError):
            bd.BoundReport("m", "lambda2", "lower", 1.0, {}, dict(mk))
        with pytest.raises(bd.BoundError):
            bd.BoundReport("m", "lambda1", "below", 1.0, {}, dict(mk))
        with pytest.raises(bd.BoundError):
            bd.BoundReport("m", "lambda1", "lower", math.nan, {}, dict(mk))
        with pytest.raises(bd.BoundError):
            bd.BoundReport("m", "lambda1", "lower", 1.0, {}, dict(mk), feasible=False)
        r = bd.BoundReport("m", "cls", "lower", 1.0, {"a": 2.0},
                           {"quad_err": 0.25, "opt_gap": 0.5, "truncation": 0.25})
        assert r.budget_total == 1.0
        d = r.as_dict()
        assert d["method"] == "m" and d["params"] == {"a": 2.0} and d["feasible"]


class TestConjugationIdentities:
    PAIRS = [
        ("ou", md.WeightSpec.exp_w("-x^2/4")),
        ("quartic", md.WeightSpec.z_form(ex.parse("1.2*x"))),
        ("cauchy", md.WeightSpec.direct("1+x^2")),
        ("dw", md.WeightSpec.exp_w("-x^2/3")),
        ("gauss2", md.WeightSpec.direct("exp(x/2)")),
    ]

    def _model(self, tag):
        return {
            "ou": ou,
            "quartic": quartic,
            "cauchy": cauchy,
            "dw": lambda: dwell(0.5),
            "gauss2": ou,
        }[tag]()

    @pytest.mark.parametrize("tag,spec", PAIRS)
    def test_rate_shift_under_conjugation(self, tag, spec):
        # V_a = V_sigma - L(sigma/a)/(sigma/a): conjugating the sigma-weighted
        # flow by sigma/a shifts the killing rate by the generator action
        m = self._model(tag)
        d = md.realize_weight(m, spec)
        assert d.weight_expr is not None
        s = ex.simplify(ex.div(m.sigma, d.weight_expr))
        ds = ex.simplify(ex.differentiate(s))
        dds = ex.simplify(ex.differentiate(ds))
        sig2 = ex.mul(m.sigma, m.sigma)
        ls = ex.add(ex.mul(sig2, dds), ex.mul(m.drift, ds))
        dsig = md.realize_weight(m, md.WeightSpec.direct(m.sigma))
        xs = np.linspace(-5.0, 5.0, 401)
        lhs = np.asarray(d.v_fn(xs), dtype=float)
        rhs = np.asarray(dsig.v_fn(xs), dtype=float) - np.asarray(
            ex.evaluate(ls, xs), dtype=float
        ) / np.asarray(ex.evaluate(s, xs), dtype=float)
        scale = max(1.0, float(np.max(np.abs(lhs))))
        assert np.max(np.abs(lhs - rhs)) < 1e-8 * scale

    @pytest.mark.parametrize("tag,spec", PAIRS[:3])
    def test_generator_level_intertwining(self, tag, spec):
        # a (L f)' = (L_a - V_a)(a f') for smooth f
        m = self._model(tag)
        d = md.realize_weight(m, spec)
        a = d.weight_expr
        f = ex.parse("tanh(x) + x^2/10")
        df = ex.simplify(ex.differentiate(f))
        sig2 = ex.mul(m.sigma, m.sigma)
        lf = ex.add(ex.mul(sig2, ex.differentiate(df)), ex.mul(m.drift, df))
        lhs_e = ex.mul(a, ex.differentiate(lf))
        p = ex.simplify(ex.mul(a, df))
        dp = ex.simplify(ex.differentiate(p))
        rhs_e = ex.add(
            ex.mul(sig2, ex.differentiate(dp)),
            ex.mul(d.drift_expr, dp),
            ex.neg(ex.mul(d.v_expr, p)),
        )
        xs = np.linspace(-4.0, 4.0, 321)
        lhs = np.asarray(ex.evaluate(lhs_e, xs), dtype=float)
        rhs = np.asarray(ex.evaluate(rhs_e, xs), dtype=float)
        scale = max(1.0, float(np.max(np.abs(lhs))))
        assert np.max(np.abs(lhs - rhs)) < 1e-6 * scale
