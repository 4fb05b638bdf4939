"""Diffusion models on the line or an interval, and their weighted duals.

A model is the operator

    L f = sigma^2 f'' + b f'

acting on functions of one variable, together with its reversible measure

    d mu = h dx / Z,     h = e^{-U} / sigma^2,     U' = -b / sigma^2.

The corresponding SDE is dX_t = sqrt(2) sigma(X_t) dB_t + b(X_t) dt.  A model
can be built either from (sigma, drift) or from (sigma, target potential
Utilde) with mu proportional to e^{-Utilde} dx, in which case
U = Utilde - 2 log sigma and b = 2 sigma sigma' - sigma^2 Utilde'.  U is
anchored to 0 at the origin (interval models anchor at the midpoint); the
normalization Z absorbs the constant.

A positive weight a turns the derivative flow into a Feynman-Kac semigroup:
the weighted derivative a f' of the diffusion evolves under the dual
generator

    L_a g = sigma^2 g'' + b_a g',    b_a = b + 2 sigma sigma' - 2 sigma^2 (a'/a),

killed at rate

    V_a = sigma^2 a''/a + (b + 2 sigma sigma') a'/a - 2 sigma^2 (a'/a)^2 - b',

and inf V_a is a lower bound for the spectral gap (the Chen-Wang variational
principle; see the bounds module).  ``realize_weight`` accepts the weight in
several parametrizations:

    direct:  a itself
    exp_w:   a = e^W
    z_form:  sigma = 1 only; W' = Z - U'/2, so that
             V_a = Z' - Z^2 + U''/2 + (U')^2/4
    a_form:  W' = e^A (a automatically increasing), so that for sigma = 1
             V_a = (A' - e^A - U') e^A + U''

In every parametrization V_a and b_a are exact expressions; the weight's
pointwise values fall back to cumulative quadrature of W' when W has no
closed form (z_form with general Z, a_form).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from . import expr as ex
from . import quad

__all__ = [
    "ModelError",
    "DiffusionModel",
    "DualModel",
    "WeightSpec",
    "build_model",
    "feynman_kac_potential",
    "realize_weight",
    "check_assumptions",
    "AssumptionsReport",
    "distance",
]

_WORK_R = 24.0  # half-width of the numeric working window for U and W
_WORK_N = 8193


class ModelError(Exception):
    """Invalid model or weight construction."""


def _parse_or_expr(obj, what: str) -> ex.Expr:
    if isinstance(obj, ex.Expr):
        return obj
    if isinstance(obj, str):
        try:
            return ex.parse(obj)
        except ex.ParseError as err:
            raise ModelError(f"cannot parse {what}: {err}") from err
    if isinstance(obj, (int, float)):
        return ex.const(float(obj))
    raise ModelError(f"{what} must be an expression or string, got {type(obj)!r}")


@dataclass(eq=False)
class DiffusionModel:
    """Operator sigma^2 f'' + b f' with reversible density e^{-U}/sigma^2."""

    sigma: ex.Expr
    drift: ex.Expr
    u_prime: ex.Expr
    u_expr: ex.Expr | None
    domain: tuple
    boundary: str
    params: dict
    tail_kind: str
    name: str = "model"
    _u_interp: CubicSpline | None = field(default=None, repr=False)
    _u_edges: tuple | None = field(default=None, repr=False)
    _z_cache: dict = field(default_factory=dict, repr=False)
    _grid_cache: dict = field(default_factory=dict, repr=False)

    # ---- basic callables ------------------------------------------------

    @property
    def sigma_fn(self) -> Callable:
        return lambda x: ex.evaluate(self.sigma, x)

    @property
    def drift_fn(self) -> Callable:
        return lambda x: ex.evaluate(self.drift, x)

    @property
    def support(self) -> tuple[float, float]:
        if self.domain[0] == "line":
            return (-math.inf, math.inf)
        return self.domain[1]

    @property
    def anchor(self) -> float:
        if self.domain[0] == "line":
            return 0.0
        a, b = self.domain[1]
        return 0.5 * (a + b)

    def probe_grid(self, R: float = 12.0, n: int = 2049) -> np.ndarray:
        key = (R, n)
        if key not in self._grid_cache:
            if self.domain[0] == "line":
                g = quad.chebyshev_grid(R, n)
            else:
                a, b = self.domain[1]
                g = np.linspace(a, b, n)
            self._grid_cache[key] = g
        return self._grid_cache[key]

    def U(self, x):
        """Potential with U(anchor) = 0; exact expression when available,
        cumulative quadrature of U' otherwise (linear continuation outside
        the working window)."""
        if self.u_expr is not None:
            return ex.evaluate(self.u_expr, x)
        if self._u_interp is None:
            if self.domain[0] == "line":
                lo, hi = -_WORK_R, _WORK_R
            else:
                lo, hi = self.domain[1]
            grid = np.linspace(lo, hi, _WORK_N)
            up = ex.compile_fn(self.u_prime)
            vals = quad.cumulative_on_grid(up, grid)
            off = np.interp(self.anchor, grid, vals)
            self._u_interp = CubicSpline(grid, vals - off, extrapolate=False)
            self._u_edges = (lo, hi, vals[0] - off, vals[-1] - off,
                             float(up(np.asarray(lo))), float(up(np.asarray(hi))))
        xs = np.asarray(x, dtype=float)
        lo, hi, ulo, uhi, slo, shi = self._u_edges
        out = self._u_interp(np.clip(xs, lo, hi))
        out = np.where(xs > hi, uhi + shi * (xs - hi), out)
        out = np.where(xs < lo, ulo + slo * (xs - lo), out)
        return float(out) if np.isscalar(x) else out

    def density(self, x):
        """Unnormalized measure density h = e^{-U}/sigma^2 (IEEE semantics)."""
        xs = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            out = np.exp(-np.asarray(self.U(xs), dtype=float)) / ex.evaluate(self.sigma, xs) ** 2
        return float(out) if np.isscalar(x) else out

    def log_density(self, x):
        xs = np.asarray(x, dtype=float)
        out = -np.asarray(self.U(xs), dtype=float) - 2.0 * np.log(ex.evaluate(self.sigma, xs))
        return float(out) if np.isscalar(x) else out

    def normalization(self, cfg: quad.QuadConfig | None = None) -> float:
        cfg = cfg or quad.QuadConfig()
        key = (cfg.abs_tol, cfg.rel_tol, cfg.truncation_R, cfg.infinite_method)
        if key not in self._z_cache:
            lo, hi = self.support
            use = cfg
            if cfg.infinite_method == "auto" and self.tail_kind == "polynomial":
                from dataclasses import replace

                use = replace(cfg, infinite_method="tan")
            r = quad.integrate(self.density, lo, hi, use, breakpoints=(self.anchor,))
            if not r.converged:
                raise ModelError(
                    f"normalization did not converge (err {r.err_est:.3g} after {r.subdivisions} segments)"
                )
            self._z_cache[key] = r.value
        return self._z_cache[key]

    @property
    def logZ(self) -> float:
        return math.log(self.normalization())


def build_model(
    sigma="1",
    drift=None,
    target_potential=None,
    params: dict | None = None,
    domain="line",
    boundary: str | None = None,
    tail_kind: str | None = None,
    name: str = "model",
) -> DiffusionModel:
    """Construct a model from (sigma, drift) or (sigma, target_potential).

    Exactly one of drift / target_potential must be given.  Parameters
    appearing in the expressions must all be bound through ``params``.
    sigma must be strictly positive on the probe grid.
    """
    if (drift is None) == (target_potential is None):
        raise ModelError("give exactly one of drift or target_potential")
    params = dict(params or {})
    sig = ex.simplify(ex.substitute(_parse_or_expr(sigma, "sigma"), params))

    if isinstance(domain, str):
        if domain != "line":
            raise ModelError(f"unknown domain {domain!r}")
        dom = ("line",)
    else:
        a, b = float(domain[0]), float(domain[1])
        if not (math.isfinite(a) and math.isfinite(b) and a < b):
            raise ModelError(f"bad interval {domain!r}")
        dom = ("interval", (a, b))
    if boundary is None:
        boundary = "neumann" if dom[0] == "interval" else "none"
    if boundary not in ("neumann", "dirichlet", "none"):
        raise ModelError(f"unknown boundary {boundary!r}")
    if dom[0] == "line" and boundary != "none":
        raise ModelError("boundary conditions only apply to interval domains")

    dsig = ex.simplify(ex.differentiate(sig))
    if target_potential is not None:
        ut = ex.simplify(ex.substitute(_parse_or_expr(target_potential, "target_potential"), params))
        _check_bound(ut, "target_potential")
        _check_bound(sig, "sigma")
        # U = Utilde - 2 log sigma, anchored to 0; b = 2 sigma sigma' - sigma^2 Utilde'
        u_raw = ex.add(ut, ex.neg(ex.mul(ex.const(2.0), ex.log(sig))))
        anchor = 0.0 if dom[0] == "line" else 0.5 * (dom[1][0] + dom[1][1])
        shift = ex.evaluate(u_raw, anchor)
        if not math.isfinite(shift):
            raise ModelError(f"target potential not finite at the anchor x = {anchor}")
        u_exprs = ex.simplify(ex.add(u_raw, ex.const(-shift)))
        b = ex.simplify(
            ex.add(
                ex.mul(ex.const(2.0), sig, dsig),
                ex.neg(ex.mul(sig, sig, ex.simplify(ex.differentiate(ut)))),
            )
        )
        u_prime = ex.simplify(ex.differentiate(u_exprs))
    else:
        b = ex.simplify(ex.substitute(_parse_or_expr(drift, "drift"), params))
        _check_bound(b, "drift")
        _check_bound(sig, "sigma")
        u_exprs = None
        u_prime = ex.simplify(ex.div(ex.neg(b), ex.mul(sig, sig)))

    m = DiffusionModel(
        sigma=sig,
        drift=b,
        u_prime=u_prime,
        u_expr=u_exprs,
        domain=dom,
        boundary=boundary,
        params=params,
        tail_kind=tail_kind or "unset",
        name=name,
    )
    grid = m.probe_grid()
    sigvals = ex.evaluate(sig, grid)
    if not np.all(np.isfinite(sigvals)) or np.min(sigvals) <= 0:
        bad = grid[int(np.argmin(sigvals))]
        raise ModelError(f"sigma must be strictly positive (sigma({bad:.6g}) = {np.min(sigvals):.3g})")
    if tail_kind is None:
        m.tail_kind = _classify_tails(m)
    elif tail_kind not in ("exponential", "polynomial"):
        raise ModelError(f"unknown tail_kind {tail_kind!r}")
    else:
        m.tail_kind = tail_kind
    hvals = m.density(grid)
    if not np.all(np.isfinite(hvals)):
        bad = grid[~np.isfinite(hvals)][0]
        raise ModelError(f"measure density not finite at probe point x = {bad:.6g}")
    return m


def _check_bound(e: ex.Expr, what: str) -> None:
    missing = ex.free_params(e)
    if missing:
        raise ModelError(f"{what} has unbound parameters {sorted(missing)!r}")


def _classify_tails(m: DiffusionModel) -> str:
    """Rough tail class from x U'(x) at the working edge: bounded growth of
    U on a log scale means polynomial tails (Cauchy-type)."""
    if m.domain[0] == "interval":
        return "exponential"  # compact support; truncation is exact
    R = 12.0
    try:
        t = max(abs(ex.evaluate(m.u_prime, R) * R), abs(ex.evaluate(m.u_prime, -R) * R))
    except ex.EvalError:
        return "exponential"
    if not math.isfinite(t):
        return "exponential"
    return "polynomial" if t < 20.0 else "exponential"


# ---- weights and duals --------------------------------------------------


@dataclass(frozen=True)
class WeightSpec:
    """Parametrization of a positive weight a (see module docstring)."""

    kind: str  # 'direct' | 'exp_w' | 'z_form' | 'a_form'
    payload: ex.Expr

    @staticmethod
    def direct(a) -> "WeightSpec":
        return WeightSpec("direct", _parse_or_expr(a, "weight"))

    @staticmethod
    def exp_w(w) -> "WeightSpec":
        return WeightSpec("exp_w", _parse_or_expr(w, "log-weight W"))

    @staticmethod
    def z_form(z) -> "WeightSpec":
        return WeightSpec("z_form", _parse_or_expr(z, "Z"))

    @staticmethod
    def a_form(a_exponent) -> "WeightSpec":
        return WeightSpec("a_form", _parse_or_expr(a_exponent, "A"))


@dataclass(eq=False)
class DualModel:
    """The weighted-derivative dual of a model: same sigma, drift b_a,
    killing rate V_a, invariant density e^{-U}/a^2 (up to normalization)."""

    base: DiffusionModel
    kind: str
    weight_expr: ex.Expr | None
    log_weight_prime: ex.Expr
    log_weight_prime2: ex.Expr
    v_expr: ex.Expr
    drift_expr: ex.Expr
    params: dict
    _w_interp: CubicSpline | None = field(default=None, repr=False)
    _w_edges: tuple | None = field(default=None, repr=False)
    _z_cache: dict = field(default_factory=dict, repr=False)

    @property
    def sigma(self) -> ex.Expr:
        return self.base.sigma

    @property
    def sigma_fn(self):
        return self.base.sigma_fn

    @property
    def support(self):
        return self.base.support

    @property
    def tail_kind(self):
        return self.base.tail_kind

    def probe_grid(self, R: float = 12.0, n: int = 2049) -> np.ndarray:
        return self.base.probe_grid(R, n)

    def v_fn(self, x):
        return ex.evaluate(self.v_expr, x)

    def drift_fn(self, x):
        return ex.evaluate(self.drift_expr, x)

    def log_weight(self, x):
        """W(x) = log a(x), anchored to W = 0 at the base anchor."""
        if self.weight_expr is not None:
            out = np.log(ex.evaluate(self.weight_expr, x))
            c = math.log(ex.evaluate(self.weight_expr, self.base.anchor))
            return out - c
        if self._w_interp is None:
            lo, hi = (-_WORK_R, _WORK_R) if self.base.domain[0] == "line" else self.base.domain[1]
            grid = np.linspace(lo, hi, _WORK_N)
            wp = ex.compile_fn(self.log_weight_prime)
            vals = quad.cumulative_on_grid(wp, grid)
            off = np.interp(self.base.anchor, grid, vals)
            object.__setattr__(self, "_w_interp", CubicSpline(grid, vals - off, extrapolate=False))
            object.__setattr__(self, "_w_edges", (lo, hi, vals[0] - off, vals[-1] - off,
                                                  float(wp(np.asarray(lo))), float(wp(np.asarray(hi)))))
        xs = np.asarray(x, dtype=float)
        lo, hi, wlo, whi, slo, shi = self._w_edges
        out = self._w_interp(np.clip(xs, lo, hi))
        out = np.where(xs > hi, whi + shi * (xs - hi), out)
        out = np.where(xs < lo, wlo + slo * (xs - lo), out)
        return float(out) if np.isscalar(x) else out

    def weight_fn(self, x):
        """a(x), normalized to a(anchor) = 1 when realized numerically."""
        if self.weight_expr is not None:
            return ex.evaluate(self.weight_expr, x)
        out = np.exp(self.log_weight(x))
        return out

    def log_density(self, x):
        xs = np.asarray(x, dtype=float)
        out = -np.asarray(self.base.U(xs), dtype=float) - 2.0 * np.asarray(self.log_weight(xs), dtype=float)
        return float(out) if np.isscalar(x) else out

    def density(self, x):
        """Unnormalized dual measure density e^{-U}/a^2 = (sigma/a)^2 h."""
        xs = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            out = np.exp(self.log_density(xs))
        return float(out) if np.isscalar(x) else out

    def normalization(self, cfg: quad.QuadConfig | None = None) -> float:
        cfg = cfg or quad.QuadConfig()
        key = (cfg.abs_tol, cfg.rel_tol, cfg.truncation_R, cfg.infinite_method)
        if key not in self._z_cache:
            lo, hi = self.support
            use = cfg
            if cfg.infinite_method == "auto" and self.tail_kind == "polynomial":
                from dataclasses import replace

                use = replace(cfg, infinite_method="tan")
            r = quad.integrate(self.density, lo, hi, use, breakpoints=(self.base.anchor,))
            if not r.converged:
                raise ModelError(
                    f"dual normalization did not converge (err {r.err_est:.3g} after {r.subdivisions} segments)"
                )
            self._z_cache[key] = r.value
        return self._z_cache[key]


def feynman_kac_potential(m: DiffusionModel, a) -> ex.Expr:
    """Killing rate of the weighted derivative flow, as an expression:

        V_a = sigma^2 a''/a + (b + 2 sigma sigma') a'/a - 2 sigma^2 (a'/a)^2 - b'
    """
    a = _parse_or_expr(a, "weight")
    da = ex.simplify(ex.differentiate(a))
    dda = ex.simplify(ex.differentiate(da))
    sig, b = m.sigma, m.drift
    dsig = ex.simplify(ex.differentiate(sig))
    db = ex.simplify(ex.differentiate(b))
    sig2 = ex.mul(sig, sig)
    ratio = ex.div(da, a)
    v = ex.add(
        ex.mul(sig2, ex.div(dda, a)),
        ex.mul(ex.add(b, ex.mul(ex.const(2.0), sig, dsig)), ratio),
        ex.neg(ex.mul(ex.const(2.0), sig2, ratio, ratio)),
        ex.neg(db),
    )
    return ex.simplify(v)


def _v_from_w(m: DiffusionModel, wp: ex.Expr, wpp: ex.Expr) -> ex.Expr:
    """V_a in terms of W' and W'' (a = e^W):
    V = sigma^2 W'' - sigma^2 (W')^2 + (b + 2 sigma sigma') W' - b'."""
    sig, b = m.sigma, m.drift
    dsig = ex.simplify(ex.differentiate(sig))
    db = ex.simplify(ex.differentiate(b))
    sig2 = ex.mul(sig, sig)
    v = ex.add(
        ex.mul(sig2, wpp),
        ex.neg(ex.mul(sig2, wp, wp)),
        ex.mul(ex.add(b, ex.mul(ex.const(2.0), sig, dsig)), wp),
        ex.neg(db),
    )
    return ex.simplify(v)


def _dual_drift(m: DiffusionModel, wp: ex.Expr) -> ex.Expr:
    sig, b = m.sigma, m.drift
    dsig = ex.simplify(ex.differentiate(sig))
    return ex.simplify(
        ex.add(
            b,
            ex.mul(ex.const(2.0), sig, dsig),
            ex.neg(ex.mul(ex.const(2.0), sig, sig, wp)),
        )
    )


def _sigma_is_one(m: DiffusionModel) -> bool:
    g = m.probe_grid()
    vals = ex.evaluate(m.sigma, g)
    return bool(np.all(np.abs(vals - 1.0) <= 1e-14))


def realize_weight(m: DiffusionModel, spec: WeightSpec, params: dict | None = None) -> DualModel:
    """Build the dual model for a weight given in any supported form.

    All parameters in the weight payload must be bound.  direct weights must
    be strictly positive and finite on the probe grid (values beyond 1e300 or
    below 1e-300 are treated as degenerate).
    """
    params = dict(params or {})
    payload = ex.simplify(ex.substitute(spec.payload, params))
    _check_bound(payload, f"{spec.kind} weight payload")

    if spec.kind == "direct":
        a = payload
        g = m.probe_grid()
        with np.errstate(all="ignore"):
            avals = ex.evaluate(a, g)
        if not np.all(np.isfinite(avals)) or np.min(avals) <= 0:
            bad = g[int(np.argmin(avals))]
            raise ModelError(f"weight must be positive and finite on the probe grid (a({bad:.6g}) = {np.min(avals):.3g})")
        if np.max(avals) > 1e300 or np.min(avals) < 1e-300:
            raise ModelError("weight is degenerate on the probe grid (|a| beyond 1e+-300)")
        da = ex.simplify(ex.differentiate(a))
        wp = ex.simplify(ex.div(da, a))
        wpp = ex.simplify(ex.differentiate(wp))
        v = feynman_kac_potential(m, a)
        return DualModel(
            base=m, kind="direct", weight_expr=a,
            log_weight_prime=wp, log_weight_prime2=wpp,
            v_expr=v, drift_expr=_dual_drift(m, wp), params=params,
        )

    if spec.kind == "exp_w":
        w = payload
        wp = ex.simplify(ex.differentiate(w))
        wpp = ex.simplify(ex.differentiate(wp))
        return DualModel(
            base=m, kind="exp_w", weight_expr=ex.exp(w),
            log_weight_prime=wp, log_weight_prime2=wpp,
            v_expr=_v_from_w(m, wp, wpp), drift_expr=_dual_drift(m, wp), params=params,
        )

    if spec.kind == "z_form":
        if not _sigma_is_one(m):
            raise ModelError("z_form weights require sigma = 1")
        z = payload
        dz = ex.simplify(ex.differentiate(z))
        up = m.u_prime
        upp = ex.simplify(ex.differentiate(up))
        wp = ex.simplify(ex.add(z, ex.neg(ex.mul(ex.const(0.5), up))))
        wpp = ex.simplify(ex.differentiate(wp))
        # V = Z' - Z^2 + U''/2 + (U')^2/4
        v = ex.simplify(
            ex.add(
                dz,
                ex.neg(ex.mul(z, z)),
                ex.mul(ex.const(0.5), upp),
                ex.mul(ex.const(0.25), up, up),
            )
        )
        weight_expr = None
        if m.u_expr is not None:
            zint = _symbolic_linear_integral(z)
            if zint is not None:
                weight_expr = ex.simplify(
                    ex.exp(ex.add(zint, ex.neg(ex.mul(ex.const(0.5), m.u_expr))))
                )
        return DualModel(
            base=m, kind="z_form", weight_expr=weight_expr,
            log_weight_prime=wp, log_weight_prime2=wpp,
            v_expr=v, drift_expr=_dual_drift(m, wp), params=params,
        )

    if spec.kind == "a_form":
        aexp = payload
        daexp = ex.simplify(ex.differentiate(aexp))
        wp = ex.exp(aexp)
        wpp = ex.simplify(ex.mul(daexp, ex.exp(aexp)))
        return DualModel(
            base=m, kind="a_form", weight_expr=None,
            log_weight_prime=wp, log_weight_prime2=wpp,
            v_expr=_v_from_w(m, wp, wpp), drift_expr=_dual_drift(m, wp), params=params,
        )

    raise ModelError(f"unknown weight kind {spec.kind!r}")


def _symbolic_linear_integral(z: ex.Expr) -> ex.Expr | None:
    """Antiderivative for the simple shapes eps*x and constants; None otherwise.

    Only used to keep a closed-form weight expression for the common linear
    Z; every computation path works without it.
    """
    s = ex.simplify(z)
    if s.op == "const":
        return ex.mul(s, ex.X)
    if s == ex.X:
        return ex.mul(ex.const(0.5), ex.X, ex.X)
    if s.op == "mul" and len(s.args) == 2 and s.args[0].op == "const" and s.args[1] == ex.X:
        return ex.mul(ex.const(0.5 * s.args[0].value), ex.X, ex.X)
    return None


# ---- assumption checks --------------------------------------------------


@dataclass(frozen=True)
class AssumptionsReport:
    sigma_min: float
    completeness: tuple[str, str]  # verdict per side: diverging/converging/inconclusive
    non_explosion: tuple[str, str]
    non_explosive: bool
    notes: tuple[str, ...]


def _trend(j1: float, j2: float, j3: float) -> str:
    """Verdict from values at R, 2R, 4R.  The increments of a convergent
    integral collapse geometrically under radius doubling (ratio < 1); a
    logarithmically or faster divergent one keeps the increment ratio at or
    above 1."""
    if not all(map(math.isfinite, (j1, j2, j3))):
        return "diverging"
    d1, d2 = j2 - j1, j3 - j2
    if j3 <= 0:
        return "inconclusive"
    if d2 <= 1e-6 * max(j3, 1e-300):
        return "converging"
    if d1 <= 0:
        return "inconclusive"
    r = d2 / d1
    if r >= 0.8:
        return "diverging"
    if r <= 0.6:
        return "converging"
    return "inconclusive"


def check_assumptions(m, radii=(5.0, 10.0, 20.0)) -> AssumptionsReport:
    """Completeness of the sigma-metric and non-explosion of the diffusion.

    Works for a base model or a dual (anything with sigma_fn/density).  The
    non-explosion integrals J(R) = int_0^R [int_0^x h] / (sigma^2 h) dx are
    evaluated on grids with an overflow escape: once the outer integrand
    exceeds e^600 the integral is declared diverging outright.  Non-explosion
    holds when both sides diverge.
    """
    base = m.base if isinstance(m, DualModel) else m
    sig_fn = m.sigma_fn
    grid = base.probe_grid()
    sigma_min = float(np.min(sig_fn(grid)))
    notes = []
    if base.domain[0] == "interval":
        return AssumptionsReport(
            sigma_min=sigma_min,
            completeness=("n/a", "n/a"),
            non_explosion=("n/a", "n/a"),
            non_explosive=True,
            notes=("interval model: boundary conditions replace growth conditions",),
        )

    r1, r2, r3 = radii
    comp = []
    for side in (+1, -1):
        vals = []
        for R in radii:
            r = quad.integrate(lambda x: 1.0 / np.asarray(sig_fn(x), dtype=float), 0.0, side * R)
            vals.append(abs(r.value))
        comp.append(_trend(*vals))

    nonexp = []
    for side in (+1, -1):
        vals = []
        overflowed = False
        for R in radii:
            j, of = _nonexplosion_integral(m, side, R)
            if of:
                overflowed = True
                break
            vals.append(j)
        if overflowed:
            nonexp.append("diverging")
        else:
            nonexp.append(_trend(*vals))

    non_explosive = nonexp[0] == "diverging" and nonexp[1] == "diverging"
    if "converging" in nonexp:
        notes.append("a non-explosion integral saturates: explosion cannot be ruled out")
    return AssumptionsReport(
        sigma_min=sigma_min,
        completeness=(comp[0], comp[1]),
        non_explosion=(nonexp[0], nonexp[1]),
        non_explosive=non_explosive,
        notes=tuple(notes),
    )


def _nonexplosion_integral(m, side: int, R: float, n: int = 2001):
    """J(R) on one side, computed in log space so that densities far beyond
    floating range (either direction) keep the integrand representable.  The
    overflow escape fires when the J-integrand itself passes e^600: past that
    the integral is divergent for any practical purpose."""
    xs = np.linspace(0.0, side * R, n)
    with np.errstate(all="ignore"):
        logh = np.asarray(m.log_density(xs), dtype=float)
        sig = np.asarray(m.sigma_fn(xs), dtype=float)
    # cumulative trapezoid of h in log space: cell_i = (h_i + h_{i+1}) dx/2
    dx = np.abs(np.diff(xs))
    with np.errstate(all="ignore"):
        log_cells = np.logaddexp(logh[:-1], logh[1:]) + np.log(0.5 * dx)
    log_inner = np.full_like(logh, -np.inf)
    np.logaddexp.accumulate(log_cells, out=log_inner[1:])
    with np.errstate(all="ignore"):
        log_outer = log_inner - 2.0 * np.log(sig) - logh
    finite = np.isfinite(log_outer)
    if np.any(log_outer[finite] > 600.0):
        return math.inf, True
    with np.errstate(all="ignore"):
        outer = np.where(finite, np.exp(np.where(finite, log_outer, 0.0)), 0.0)
    j = abs(_trapz_cumulative(outer, xs)[-1])
    return float(j), False


def _trapz_cumulative(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x), out=out[1:])
    return out


def distance(m: DiffusionModel, x: float, y: float) -> float:
    """Intrinsic metric d(x, y) = |int_x^y du / sigma(u)|."""
    if x == y:
        return 0.0
    sig_fn = m.sigma_fn
    r = quad.integrate(lambda u: 1.0 / np.asarray(sig_fn(u), dtype=float), x, y)
    return abs(r.value)
