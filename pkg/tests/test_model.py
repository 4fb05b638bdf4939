"""Model construction, weighted duals and the structural identities that
tie the two together.

The weighted-derivative dual is exercised through independent routes (a
given directly, a given as e^W, the potential given in closed form vs
recovered by quadrature) which must agree to quadrature accuracy.  Closed
forms used as references are stated next to each test.
"""

import math

import numpy as np
import pytest

from diffgap import expr as ex
from diffgap import model as md
from diffgap import quad as q

BETA = 2.5


def quartic():
    return md.build_model(sigma="1", target_potential="x^4/4", name="quartic")


def std_normal():
    return md.build_model(sigma="1", target_potential="x^2/2", name="std-normal")


def cauchy_sqrt(beta=BETA):
    return md.build_model(
        sigma="sqrt(1+x^2)",
        target_potential="b*log(1+x^2)",
        params={"b": beta},
        name="cauchy-sqrt",
    )


class TestBuildModel:
    def test_drift_and_target_routes_agree(self):
        # same diffusion given two ways: b = -x vs mu ~ e^{-x^2/2}
        m_drift = md.build_model(sigma="1", drift="-x")
        m_target = std_normal()
        xs = np.linspace(-3.0, 3.0, 101)
        assert np.max(np.abs(m_drift.U(xs) - m_target.U(xs))) < 1e-12
        assert np.max(np.abs(m_drift.drift_fn(xs) - m_target.drift_fn(xs))) < 1e-12
        z = math.sqrt(2.0 * math.pi)
        assert abs(m_drift.normalization() - z) < 1e-10 * z
        assert abs(m_target.normalization() - z) < 1e-10 * z

    def test_target_mode_drift_formula(self):
        # b = 2 sigma sigma' - sigma^2 Utilde'; for sigma^2 = 1 + x^2 and
        # Utilde = beta log(1+x^2) this collapses to b = 2(1-beta) x
        m = cauchy_sqrt()
        xs = np.linspace(-10.0, 10.0, 201)
        assert np.max(np.abs(m.drift_fn(xs) - 2.0 * (1.0 - BETA) * xs)) < 1e-10

    def test_target_mode_potential(self):
        # U = Utilde - 2 log sigma = (beta - 1) log(1+x^2), anchored at 0
        m = cauchy_sqrt()
        xs = np.linspace(-10.0, 10.0, 201)
        ref = (BETA - 1.0) * np.log1p(xs * xs)
        assert np.max(np.abs(m.U(xs) - ref)) < 1e-10
        assert m.U(0.0) == 0.0

    def test_heavy_tail_normalization(self):
        # int (1+x^2)^{-5/2} dx = 4/3
        m = cauchy_sqrt(2.5)
        assert m.tail_kind == "polynomial"
        assert abs(m.normalization() - 4.0 / 3.0) < 1e-10

    def test_interval_anchoring(self):
        m = md.build_model(sigma="1", target_potential="x", domain=(0.0, 10.0))
        assert m.anchor == 5.0
        assert abs(m.U(5.0)) < 1e-14
        assert abs(m.density(5.0) - 1.0) < 1e-14
        assert m.boundary == "neumann"

    def test_tail_classification(self):
        assert std_normal().tail_kind == "exponential"
        assert cauchy_sqrt().tail_kind == "polynomial"
        m = md.build_model(sigma="1", target_potential="x^2", domain=(-1.0, 1.0))
        assert m.tail_kind == "exponential"

    def test_tail_override(self):
        m = md.build_model(sigma="1", target_potential="x^2/2", tail_kind="polynomial")
        assert m.tail_kind == "polynomial"
        with pytest.raises(md.ModelError, match="tail_kind"):
            md.build_model(sigma="1", target_potential="x^2/2", tail_kind="gaussian")

    def test_parameter_binding(self):
        m = md.build_model(sigma="1", drift="-k*x", params={"k": 2.0})
        assert abs(m.U(1.0) - 1.0) < 1e-12  # U = k x^2 / 2

    def test_exactly_one_specification(self):
        with pytest.raises(md.ModelError, match="exactly one"):
            md.build_model(sigma="1", drift="-x", target_potential="x^2/2")
        with pytest.raises(md.ModelError, match="exactly one"):
            md.build_model(sigma="1")

    def test_sigma_positive_required(self):
        with pytest.raises(md.ModelError, match="positive"):
            md.build_model(sigma="x", drift="-x")
        with pytest.raises(md.ModelError, match="positive"):
            md.build_model(sigma="x^2", drift="-x")

    def test_unbound_parameter_rejected(self):
        with pytest.raises(md.ModelError, match="unbound"):
            md.build_model(sigma="1", drift="-k*x")

    def test_domain_validation(self):
        with pytest.raises(md.ModelError, match="domain"):
            md.build_model(sigma="1", drift="-x", domain="circle")
        with pytest.raises(md.ModelError, match="interval"):
            md.build_model(sigma="1", drift="-x", domain=(3.0, 1.0))
        with pytest.raises(md.ModelError, match="boundary"):
            md.build_model(sigma="1", drift="-x", boundary="neumann")
        with pytest.raises(md.ModelError, match="boundary"):
            md.build_model(sigma="1", drift="-x", domain=(0.0, 1.0), boundary="periodic")

    def test_parse_errors_surface(self):
        with pytest.raises(md.ModelError, match="drift"):
            md.build_model(sigma="1", drift="x +* 2")


class TestDensity:
    def test_pointwise_closed_form(self):
        # e^{-U}/sigma^2 = (1+x^2)^{-beta} for the heavy-tailed family
        m = cauchy_sqrt()
        xs = np.linspace(-5.0, 5.0, 101)
        ref = (1.0 + xs * xs) ** (-BETA)
        assert np.max(np.abs(m.density(xs) - ref)) < 1e-12
        assert np.max(np.abs(m.log_density(xs) - np.log(ref))) < 1e-12

    def test_normalization_cached(self):
        m = std_normal()
        assert m.normalization() == m.normalization()
        assert abs(m.logZ - 0.5 * math.log(2.0 * math.pi)) < 1e-10

    def test_numeric_potential_matches_exact(self):
        # drift route has no closed-form U; the cumulative route must still
        # deliver quadrature-level accuracy inside the working window
        m = md.build_model(sigma="1", drift="-x^3")
        xs = np.linspace(-5.0, 5.0, 101)
        assert np.max(np.abs(m.U(xs) - xs**4 / 4.0)) < 1e-10

    def test_numeric_potential_linear_continuation(self):
        m = md.build_model(sigma="1", drift="-x")
        # outside the working window U continues linearly: finite, increasing
        assert np.isfinite(m.U(40.0))
        assert m.U(40.0) > m.U(24.0) > m.U(10.0)


class TestWeightRealization:
    # each pair is realized through two independent parametrizations; the
    # killing rate, dual drift and log-weight must agree to quadrature
    # accuracy on the probe window
    PAIRS = [
        ("quartic", "2 + tanh(x)"),
        ("normal", "exp(-x^2/4)"),
        ("cauchy", "sqrt(1+x^2)"),
        ("cauchy", "1 + x^2"),
        ("dwell", "1 + x^2/2"),
    ]

    def _model(self, tag):
        if tag == "quartic":
            return quartic()
        if tag == "normal":
            return std_normal()
        if tag == "cauchy":
            return cauchy_sqrt()
        return md.build_model(
            sigma="1", target_potential="(x^2-b)^2/4", params={"b": 1.0}, name="dwell"
        )

    @pytest.mark.parametrize("tag,weight", PAIRS)
    def test_direct_and_log_routes_agree(self, tag, weight):
        m = self._model(tag)
        a = ex.parse(weight)
        d1 = md.realize_weight(m, md.WeightSpec.direct(a))
        d2 = md.realize_weight(m, md.WeightSpec.exp_w(ex.log(a)))
        xs = m.probe_grid(6.0, 401)
        scale = 1.0 + np.max(np.abs(d1.v_fn(xs)))
        assert np.max(np.abs(d1.v_fn(xs) - d2.v_fn(xs))) < 1e-8 * scale
        assert np.max(np.abs(d1.drift_fn(xs) - d2.drift_fn(xs))) < 1e-8 * scale
        assert np.max(np.abs(d1.log_weight(xs) - d2.log_weight(xs))) < 1e-8

    def test_unit_weight_reproduces_base(self):
        # a = 1: the dual is the base flow killed at rate -b'
        m = std_normal()
        d = md.realize_weight(m, md.WeightSpec.direct("1"))
        xs = np.linspace(-4.0, 4.0, 81)
        assert np.max(np.abs(d.v_fn(xs) - 1.0)) < 1e-12  # -b' = 1 for b = -x
        assert np.max(np.abs(d.drift_fn(xs) - m.drift_fn(xs))) < 1e-12
        assert np.max(np.abs(d.log_weight(xs))) < 1e-12

    def test_ground_state_weight_kills_nothing(self):
        # a = e^{-U} makes the killing rate vanish identically
        for m in (std_normal(), quartic()):
            d = md.realize_weight(m, md.WeightSpec.exp_w(ex.neg(m.u_expr)))
            xs = m.probe_grid(6.0, 401)
            scale = 1.0 + float(np.max(np.abs(ex.evaluate(m.u_prime, xs))) ** 2)
            assert np.max(np.abs(d.v_fn(xs))) < 1e-8 * scale

    def test_ground_state_weight_direct_route(self):
        m = std_normal()
        d = md.realize_weight(m, md.WeightSpec.direct(ex.exp(ex.neg(m.u_expr))))
        xs = m.probe_grid(6.0, 401)
        assert np.max(np.abs(d.v_fn(xs))) < 1e-8

    def test_z_form_killing_rate_closed_form(self):
        # sigma = 1, Z = eps x: V = eps + x^6/4 + (3/2 - eps^2) x^2
        m = quartic()
        eps = 1.2
        d = md.realize_weight(m, md.WeightSpec.z_form(ex.parse("1.2*x")))
        xs = np.linspace(-4.0, 4.0, 161)
        ref = eps + xs**6 / 4.0 + (1.5 - eps * eps) * xs * xs
        scale = 1.0 + np.max(np.abs(ref))
        assert np.max(np.abs(d.v_fn(xs) - ref)) < 1e-12 * scale

    def test_z_form_dual_drift_closed_form(self):
        # b_a = b - 2 W' = -2 eps x for the quartic with Z = eps x
        eps = 1.2
        d = md.realize_weight(quartic(), md.WeightSpec.z_form(ex.parse("1.2*x")))
        xs = np.linspace(-4.0, 4.0, 161)
        assert np.max(np.abs(d.drift_fn(xs) + 2.0 * eps * xs)) < 1e-12 * (1 + 2 * eps * 4)

    def test_z_form_closed_weight(self):
        # linear Z with exact U gives a closed-form weight e^{Z x^2/2 - U/2}
        eps = 1.2
        d = md.realize_weight(quartic(), md.WeightSpec.z_form(ex.parse("1.2*x")))
        assert d.weight_expr is not None
        xs = np.linspace(-3.0, 3.0, 61)
        ref = np.exp(eps * xs**2 / 2.0 - xs**4 / 8.0)
        assert np.max(np.abs(d.weight_fn(xs) - ref)) < 1e-12

    def test_z_form_matches_exp_w(self):
        m = quartic()
        dz = md.realize_weight(m, md.WeightSpec.z_form(ex.parse("1.2*x")))
        de = md.realize_weight(m, md.WeightSpec.exp_w(ex.parse("1.2*x^2/2 - x^4/8")))
        xs = m.probe_grid(6.0, 401)
        scale = 1.0 + np.max(np.abs(dz.v_fn(xs)))
        assert np.max(np.abs(dz.v_fn(xs) - de.v_fn(xs))) < 1e-10 * scale
        assert np.max(np.abs(dz.log_weight(xs) - de.log_weight(xs))) < 1e-10

    def test_z_form_requires_unit_sigma(self):
        with pytest.raises(md.ModelError, match="sigma"):
            md.realize_weight(cauchy_sqrt(), md.WeightSpec.z_form("x"))

    def test_z_form_nonlinear_weight_by_quadrature(self):
        # Z = tanh(x) on the normal model: W = log cosh x - x^2/4 exactly
        d = md.realize_weight(std_normal(), md.WeightSpec.z_form(ex.tanh(ex.X)))
        assert d.weight_expr is None
        xs = np.linspace(-6.0, 6.0, 121)
        ref = np.log(np.cosh(xs)) - xs * xs / 4.0
        assert np.max(np.abs(d.log_weight(xs) - ref)) < 1e-9

    def test_a_form_weight_by_quadrature(self):
        # W' = e^{-(x-1)^2}: W(x) = (sqrt(pi)/2)(erf(x-1) + erf(1))
        d = md.realize_weight(std_normal(), md.WeightSpec.a_form(ex.parse("-(x-1)^2")))
        xs = np.linspace(-5.0, 5.0, 101)
        ref = 0.5 * math.sqrt(math.pi) * (
            np.array([math.erf(v - 1.0) for v in xs]) + math.erf(1.0)
        )
        assert np.max(np.abs(d.log_weight(xs) - ref)) < 1e-9
        # W' = e^A > 0: the realized weight is increasing by construction
        w = d.log_weight(xs)
        assert np.all(np.diff(w) > 0)

    def test_a_form_killing_rate_against_finite_differences(self):
        # independent route: apply the defining formula to numeric values of
        # a obtained from the quadrature weight, differentiating by central
        # differences
        m = std_normal()
        d = md.realize_weight(m, md.WeightSpec.a_form(ex.parse("-(x-1)^2")))
        h = 1e-5
        for x in (-2.0, -0.5, 0.0, 0.7, 2.0):
            pts = np.array([x - 2 * h, x - h, x, x + h, x + 2 * h])
            a = np.exp(d.log_weight(pts))
            da = (a[3] - a[1]) / (2 * h)
            dda = (a[3] - 2 * a[2] + a[1]) / (h * h)
            b = float(m.drift_fn(x))
            db = float(ex.evaluate(ex.simplify(ex.differentiate(m.drift)), x))
            v_ref = dda / a[2] + b * da / a[2] - 2.0 * (da / a[2]) ** 2 - db
            assert abs(d.v_fn(x) - v_ref) < 1e-4 * (1.0 + abs(v_ref))

    def test_dual_measure_is_weighted_base(self):
        # d mu_a / d mu = (sigma/a)^2 pointwise (both sides unnormalized)
        m = cauchy_sqrt()
        d = md.realize_weight(m, md.WeightSpec.direct("1 + x^2"))
        xs = np.linspace(-5.0, 5.0, 101)
        ratio = d.density(xs) / m.density(xs)
        sig = ex.evaluate(m.sigma, xs)
        a = d.weight_fn(xs)
        assert np.max(np.abs(ratio - (sig / a) ** 2)) < 1e-10

    def test_dual_normalization_heavy_tails(self):
        # a = sigma leaves the measure unchanged
        m = cauchy_sqrt()
        d = md.realize_weight(m, md.WeightSpec.direct(m.sigma))
        assert abs(d.normalization() - m.normalization()) < 1e-9

    def test_weight_positivity_guard(self):
        m = std_normal()
        with pytest.raises(md.ModelError, match="positive"):
            md.realize_weight(m, md.WeightSpec.direct("tanh(x)"))
        with pytest.raises(md.ModelError, match="positive"):
            md.realize_weight(m, md.WeightSpec.direct("x^2"))

    def test_weight_underflow_guard(self):
        # a representable only near the origin is degenerate on the window
        with pytest.raises(md.ModelError):
            md.realize_weight(
                quartic(), md.WeightSpec.direct(ex.parse("exp(1.2*x^2/2 - x^4/8)"))
            )

    def test_weight_unbound_parameter(self):
        with pytest.raises(md.ModelError, match="unbound"):
            md.realize_weight(std_normal(), md.WeightSpec.direct("c + x^2"))

    def test_weight_parameter_binding(self):
        d = md.realize_weight(
            std_normal(), md.WeightSpec.direct("c + x^2"), params={"c": 2.0}
        )
        assert abs(d.weight_fn(0.0) - 2.0) < 1e-14

    def test_unknown_kind(self):
        with pytest.raises(md.ModelError, match="kind"):
            md.realize_weight(std_normal(), md.WeightSpec("mystery", ex.X))

    def test_killing_rate_formula_direct(self):
        # feynman_kac_potential against a by-hand evaluation for a = sigma
        # on the heavy-tailed model: V = (2 beta - 1)/(1 + x^2)
        m = cauchy_sqrt()
        v = md.feynman_kac_potential(m, m.sigma)
        xs = np.linspace(-8.0, 8.0, 161)
        ref = (2.0 * BETA - 1.0) / (1.0 + xs * xs)
        assert np.max(np.abs(ex.evaluate(v, xs) - ref)) < 1e-12


class TestAssumptions:
    def test_gaussian_all_clear(self):
        r = md.check_assumptions(std_normal())
        assert r.completeness == ("diverging", "diverging")
        assert r.non_explosion == ("diverging", "diverging")
        assert r.non_explosive
        assert r.sigma_min == 1.0

    def test_escaping_drift_flagged(self):
        # b = x^3/20 pushes outward hard enough to escape in finite time
        m = md.build_model(sigma="1", drift="x^3/20")
        r = md.check_assumptions(m)
        assert not r.non_explosive
        assert any("explosion" in n for n in r.notes)

    def test_completeness_depends_on_sigma_growth(self):
        # int dx/sigma: diverges for sigma ~ |x|, converges for sigma ~ x^2
        slow = cauchy_sqrt()
        fast = md.build_model(
            sigma="1+x^2", target_potential="2.5*log(1+x^2)", name="fast"
        )
        assert md.check_assumptions(slow).completeness == ("diverging", "diverging")
        assert md.check_assumptions(fast).completeness == ("converging", "converging")

    def test_interval_models_exempt(self):
        m = md.build_model(sigma="1", target_potential="x^2", domain=(-1.0, 1.0))
        r = md.check_assumptions(m)
        assert r.completeness == ("n/a", "n/a")
        assert r.non_explosive
        assert any("interval" in n for n in r.notes)

    def test_dual_with_comparable_weight_matches_base(self):
        # a = sigma keeps the dual measure equal to the base measure, so the
        # dual flow inherits the base verdicts
        m = cauchy_sqrt()
        d = md.realize_weight(m, md.WeightSpec.direct(m.sigma))
        rb = md.check_assumptions(m)
        rd = md.check_assumptions(d)
        assert rb.non_explosion == rd.non_explosion
        assert rb.non_explosive == rd.non_explosive


class TestDistance:
    def test_closed_form(self):
        # sigma = sqrt(1+x^2): d(0, y) = asinh(y)
        m = cauchy_sqrt()
        assert abs(md.distance(m, 0.0, 3.0) - math.asinh(3.0)) < 1e-12
        assert abs(md.distance(m, 3.0, 0.0) - math.asinh(3.0)) < 1e-12
        assert md.distance(m, 1.5, 1.5) == 0.0

    def test_unit_sigma_is_euclidean(self):
        m = std_normal()
        assert abs(md.distance(m, -2.0, 5.0) - 7.0) < 1e-12
