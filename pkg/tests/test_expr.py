"""Tests for the expression language: parsing, printing, evaluation,
symbolic differentiation and conservative simplification."""

import numpy as np
import numpy.testing as npt
import pytest

from diffgap import expr as ex


class TestParseAndPrint:
    def test_parse_polynomial(self):
        e = ex.parse("x^4/4")
        assert ex.evaluate(e, 2.0) == 4.0
        assert ex.evaluate(e, -2.0) == 4.0

    def test_parse_parameters(self):
        e = ex.parse("x^4/4 - beta*x^2/2")
        assert ex.evaluate(e, 2.0, {"beta": 1.0}) == 2.0
        assert ex.free_params(e) == {"beta"}

    def test_double_star_power(self):
        assert ex.evaluate(ex.parse("x**3"), 2.0) == 8.0

    def test_sqrt_sugar(self):
        e = ex.parse("sqrt(1+x^2)")
        npt.assert_allclose(ex.evaluate(e, 3.0), np.sqrt(10.0), rtol=1e-15)

    def test_unary_minus_chains(self):
        assert ex.evaluate(ex.parse("--x"), 3.0) == 3.0
        assert ex.evaluate(ex.parse("-x^2"), 3.0) == -9.0  # binds below power

    def test_right_associative_power(self):
        # 2^3^2 = 2^9, not 8^2
        assert ex.evaluate(ex.parse("2^3^2"), 0.0) == 512.0

    def test_scientific_notation(self):
        assert ex.evaluate(ex.parse("1e-3 + 2.5E+1"), 0.0) == 25.001

    def test_nonconstant_exponent_desugars(self):
        # abs(x)^eps must be expressible; realized as exp(eps*log(abs(x)))
        e = ex.parse("abs(x)^eps")
        assert ex.evaluate(e, -2.0, {"eps": 0.8}) == pytest.approx(2.0**0.8, rel=1e-15)
        assert ex.evaluate(e, 0.0, {"eps": 0.8}) == 0.0

    def test_syntax_error_reports_position(self):
        with pytest.raises(ex.ParseError) as info:
            ex.parse("x + * 2")
        assert info.value.pos == 4

    def test_unknown_function_rejected(self):
        with pytest.raises(ex.ParseError, match="unknown function"):
            ex.parse("sinh(x)")

    def test_unbalanced_parens_rejected(self):
        with pytest.raises(ex.ParseError):
            ex.parse("(x + 1")

    def test_trailing_garbage_rejected(self):
        with pytest.raises(ex.ParseError):
            ex.parse("x + 1 )")


class TestEvaluate:
    def test_array_input_preserves_shape(self):
        xs = np.linspace(-2, 2, 7)
        out = ex.evaluate(ex.parse("x^2"), xs)
        assert out.shape == xs.shape
        npt.assert_allclose(out, xs**2, rtol=1e-15)

    def test_constant_broadcasts_to_array_shape(self):
        xs = np.zeros(5)
        out = ex.evaluate(ex.parse("3"), xs)
        assert out.shape == (5,)
        assert np.all(out == 3.0)

    def test_sign_at_zero(self):
        assert ex.evaluate(ex.parse("sign(x)"), 0.0) == 0.0

    def test_infinities_propagate(self):
        # 1/x at 0 gives inf, not an exception
        assert np.isinf(ex.evaluate(ex.parse("1/x"), 0.0))

    def test_log_of_zero_is_minus_inf(self):
        assert ex.evaluate(ex.parse("log(x)"), 0.0) == -np.inf

    def test_log_of_negative_reports_offending_point(self):
        with pytest.raises(ex.EvalError, match="-2.0"):
            ex.evaluate(ex.parse("log(x)"), -2.0)
        with pytest.raises(ex.EvalError, match="log"):
            ex.evaluate(ex.parse("log(x)"), np.linspace(-1, 1, 5))

    def test_unbound_parameter_reported(self):
        with pytest.raises(ex.EvalError, match="beta"):
            ex.evaluate(ex.parse("beta*x"), 1.0)

    def test_substitute_binds_parameters(self):
        e = ex.substitute(ex.parse("eps*x"), {"eps": 2.0})
        assert ex.free_params(e) == set()
        assert ex.evaluate(e, 3.0) == 6.0

    def test_compile_fn_requires_all_parameters(self):
        with pytest.raises(ex.EvalError):
            ex.compile_fn(ex.parse("eps*x"))
        fn = ex.compile_fn(ex.parse("eps*x"), {"eps": 2.0})
        assert fn(3.0) == 6.0


class TestDifferentiate:
    def test_power_rule(self):
        d = ex.simplify(ex.differentiate(ex.parse("x^4/4")))
        assert d == ex.simplify(ex.parse("x^3"))

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_second_derivative_of_power_is_exact(self, n):
        dd = ex.simplify(ex.differentiate(ex.differentiate(ex.parse(f"x^{n}"))))
        expected = ex.simplify(ex.parse(f"{n * (n - 1)}*x^{n - 2}"))
        assert dd == expected

    def test_abs_derivative_is_sign(self):
        d = ex.simplify(ex.differentiate(ex.parse("abs(x)")))
        assert d == ex.parse("sign(x)")

    def test_sign_derivative_is_zero(self):
        assert ex.simplify(ex.differentiate(ex.parse("sign(x)"))) == ex.const(0.0)

    def test_tanh_derivative(self):
        d = ex.differentiate(ex.parse("tanh(x)"))
        xs = np.linspace(-2, 2, 9)
        npt.assert_allclose(ex.evaluate(d, xs), 1.0 - np.tanh(xs) ** 2, rtol=1e-14)

    def test_chain_rule_through_exp(self):
        d = ex.differentiate(ex.parse("exp(-(x-1)^2)"))
        xs = np.linspace(-1, 3, 9)
        npt.assert_allclose(
            ex.evaluate(d, xs), -2 * (xs - 1) * np.exp(-((xs - 1) ** 2)), rtol=1e-14
        )

    def test_quotient_rule(self):
        d = ex.differentiate(ex.parse("x/(1+x^2)"))
        xs = np.linspace(-2, 2, 9)
        npt.assert_allclose(
            ex.evaluate(d, xs), (1 - xs**2) / (1 + xs**2) ** 2, rtol=1e-13
        )


class TestSimplify:
    def test_zero_and_one_identities(self):
        assert ex.simplify(ex.parse("x + 0")) == ex.X
        assert ex.simplify(ex.parse("1*x")) == ex.X
        assert ex.simplify(ex.parse("0*x")) == ex.const(0.0)
        assert ex.simplify(ex.parse("x^1")) == ex.X
        assert ex.simplify(ex.parse("x^0")) == ex.const(1.0)
        assert ex.simplify(ex.parse("x/1")) == ex.X

    def test_constant_folding(self):
        assert ex.simplify(ex.parse("2*3 + 4")) == ex.const(10.0)
        assert ex.simplify(ex.parse("exp(0)")) == ex.const(1.0)

    def test_double_negation(self):
        assert ex.simplify(ex.neg(ex.neg(ex.X))) == ex.X

    def test_integer_power_merge(self):
        e = ex.simplify(ex.pow_(ex.pow_(ex.X, 2), 3))
        assert e == ex.pow_(ex.X, 6)

    def test_fractional_power_not_merged(self):
        # (x^2)^0.5 is abs(x), not x; the merge must not fire
        e = ex.simplify(ex.pow_(ex.pow_(ex.X, 2), 0.5))
        assert ex.evaluate(e, -2.0) == 2.0

    def test_simplify_preserves_values(self):
        xs = np.linspace(-3, 3, 13)
        for s in ["x^4/4 - beta*x^2/2", "exp(-(x-1)^2)*x", "(x+0)*(1*x)"]:
            e = ex.parse(s)
            npt.assert_allclose(
                ex.evaluate(ex.simplify(e), xs, {"beta": 0.5}),
                ex.evaluate(e, xs, {"beta": 0.5}),
                rtol=1e-12,
            )


def _random_expr(rng, depth, smooth_only):
    """Random expression of bounded depth with values kept representable.

    Division is through 1+u^2 and log through 1+u^2 so that every generated
    tree is total on the real line; abs/sign only appear when smooth_only is
    false.
    """
    if depth == 0:
        kind = rng.integers(0, 3)
        if kind == 0:
            return ex.X
        if kind == 1:
            return ex.const(float(rng.uniform(-2, 2)))
        return ex.param("p")
    ops = ["add", "mul", "neg", "tanh", "powint", "divsafe", "logsafe", "expsafe"]
    if not smooth_only:
        ops += ["abs", "sign"]
    op = ops[rng.integers(0, len(ops))]
    sub = lambda: _random_expr(rng, depth - 1, smooth_only)
    if op == "add":
        return ex.add(sub(), sub())
    if op == "mul":
        return ex.mul(sub(), sub())
    if op == "neg":
        return ex.neg(sub())
    if op == "tanh":
        return ex.tanh(sub())
    if op == "powint":
        return ex.pow_(sub(), int(rng.integers(1, 4)))
    if op == "divsafe":
        u = sub()
        return ex.div(sub(), ex.add(ex.const(1.0), ex.mul(u, u)))
    if op == "logsafe":
        u = sub()
        return ex.log(ex.add(ex.const(1.0), ex.mul(u, u)))
    if op == "expsafe":
        return ex.exp(ex.tanh(sub()))
    if op == "abs":
        return ex.absval(sub())
    return ex.sign(sub())


class TestRandomizedProperties:
    """Structure-independent properties over a seeded family of random trees."""

    def test_print_parse_round_trip(self):
        rng = np.random.default_rng(20240817)
        params = {"p": 0.7}
        checked = 0
        while checked < 200:
            e = _random_expr(rng, int(rng.integers(1, 7)), smooth_only=False)
            xs = rng.uniform(-3, 3, size=10)
            v1 = ex.evaluate(e, xs, params)
            if not np.all(np.isfinite(v1)) or np.max(np.abs(v1)) > 1e8:
                continue
            e2 = ex.parse(ex.to_string(e))
            v2 = ex.evaluate(e2, xs, params)
            npt.assert_allclose(v2, v1, rtol=1e-12, atol=1e-300)
            checked += 1

    def test_simplify_preserves_value(self):
        rng = np.random.default_rng(20240818)
        params = {"p": -0.4}
        checked = 0
        while checked < 200:
            e = _random_expr(rng, int(rng.integers(1, 7)), smooth_only=False)
            xs = rng.uniform(-3, 3, size=10)
            v1 = ex.evaluate(e, xs, params)
            if not np.all(np.isfinite(v1)) or np.max(np.abs(v1)) > 1e8:
                continue
            v2 = ex.evaluate(ex.simplify(e), xs, params)
            npt.assert_allclose(v2, v1, rtol=1e-12, atol=1e-12)
            checked += 1

    def test_derivative_matches_finite_differences(self):
        rng = np.random.default_rng(20240819)
        params = {"p": 1.3}
        h = 1e-6
        checked = 0
        while checked < 200:
            e = _random_expr(rng, int(rng.integers(1, 7)), smooth_only=True)
            d = ex.differentiate(e)
            xs = rng.uniform(-3, 3, size=10)
            v = ex.evaluate(e, xs, params)
            dv = ex.evaluate(d, xs, params)
            if not (np.all(np.isfinite(v)) and np.all(np.isfinite(dv))):
                continue
            if np.max(np.abs(v)) > 1e6 or np.max(np.abs(dv)) > 1e6:
                continue
            fd = (ex.evaluate(e, xs + h, params) - ex.evaluate(e, xs - h, params)) / (2 * h)
            npt.assert_allclose(dv, fd, rtol=1e-5, atol=1e-5)
            checked += 1
