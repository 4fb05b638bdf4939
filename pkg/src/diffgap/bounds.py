"""Spectral-gap and log-Sobolev bounds from weight potentials.

Every lower bound here is of the same shape: pick a positive weight a, form
its killing rate V_a, and take an infimum (pointwise for the Chen-Wang
route, harmonic-mean for the integrated route).  Upper bounds come from
Rayleigh quotients of trial functions.  The Muckenhoupt product criterion
closes the circle with a two-sided bracket built from tail and core
integrals around the median.

Weight optimization is deterministic: a coarse grid over the parameter box
followed by a Nelder-Mead polish started at the grid argmax.  Each report
carries an explicit error budget (quadrature error, optimizer gain,
truncation) so the assembler can check bound ordering honestly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.special import gamma as _gamma

from . import expr as ex
from . import model as md
from . import quad as q

__all__ = [
    "BoundError",
    "BoundReport",
    "OptConfig",
    "rho_of_weight",
    "chen_wang_lower",
    "veysseire_lower",
    "MuckenhouptResult",
    "muckenhoupt",
    "muckenhoupt_power_formula",
    "veysseire_power_formula",
    "power_crossover",
    "BLBound",
    "brascamp_lieb_var_bound",
    "rayleigh_upper",
    "lsi_lower",
    "assemble_report",
]

_U_WINDOW = 600.0  # exp(U) stays below overflow inside the scan window


class BoundError(Exception):
    pass


@dataclass(frozen=True)
class OptConfig:
    """Knobs shared by the bound operations.

    box maps parameter names to (lo, hi); required whenever the weight or
    trial family has free parameters.  R overrides the scan radius (half
    width on the line); scan_points is the dense-grid resolution for
    infima and for the Muckenhoupt product.
    """

    box: Mapping[str, tuple[float, float]] | None = None
    grid_points: int = 41
    nm_max_iter: int = 500
    param_tol: float = 1e-6
    R: float | None = None
    scan_points: int = 1600
    quad: q.QuadConfig | None = None

    def quad_cfg(self) -> q.QuadConfig:
        return self.quad or q.QuadConfig()


@dataclass(frozen=True)
class BoundReport:
    method: str
    target: str  # 'lambda1' | 'cls'
    side: str  # 'lower' | 'upper'
    value: float | None
    params: dict
    error_budget: dict
    notes: tuple[str, ...] = ()
    feasible: bool = True

    def __post_init__(self):
        if self.target not in ("lambda1", "cls"):
            raise BoundError(f"unknown target {self.target!r}")
        if self.side not in ("lower", "upper"):
            raise BoundError(f"unknown side {self.side!r}")
        if self.feasible and (self.value is None or not math.isfinite(self.value)):
            raise BoundError("feasible report requires a finite value")
        if not self.feasible and self.value is not None:
            raise BoundError("infeasible report must not carry a value")

    @property
    def budget_total(self) -> float:
        return float(sum(abs(v) for v in self.error_budget.values()))

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "target": self.target,
            "side": self.side,
            "value": self.value,
            "params": dict(self.params),
            "error_budget": dict(self.error_budget),
            "notes": list(self.notes),
            "feasible": self.feasible,
        }


def _infeasible(method: str, target: str, side: str, reason: str, **params) -> BoundReport:
    return BoundReport(
        method=method,
        target=target,
        side=side,
        value=None,
        params=dict(params),
        error_budget={"quad_err": 0.0, "opt_gap": 0.0, "truncation": 0.0},
        notes=(reason,),
        feasible=False,
    )


# ---- infimum of the killing rate ----------------------------------------


def _scan_window(obj, R: float | None) -> tuple[float, float, bool]:
    """Scan interval (lo, hi) and whether the ends are true boundary points."""
    lo, hi = obj.support
    if math.isfinite(lo) and math.isfinite(hi):
        inset = 1e-7 * (hi - lo)
        return lo + inset, hi - inset, True
    if R is None:
        R = 20.0 if getattr(obj, "tail_kind", "exponential") == "polynomial" else 12.0
    return -float(R), float(R), False


def rho_of_weight(d: md.DualModel, R: float | None = None, grid: int = 1600,
                  refine: bool = True) -> float:
    """inf of the killing rate V_a over the scan window.

    Returns -inf when V_a is still decreasing outward at the window edge
    (the infimum then lives in the tail and cannot be trusted from a finite
    scan), so a caller can only ever under-claim.  The grid minimum is
    sharpened by bounded scalar minimization around the lowest grid points.
    """
    if grid < 64:
        raise BoundError(f"scan grid too coarse ({grid} < 64)")
    lo, hi, finite_ends = _scan_window(d, R)
    # even count keeps the midpoint off exact 0 where power-law weights kink
    xs = np.linspace(lo, hi, grid + (grid % 2))
    with np.errstate(all="ignore"):
        vals = np.asarray(d.v_fn(xs), dtype=float)
    if np.any(np.isnan(vals)):
        bad = xs[int(np.flatnonzero(np.isnan(vals))[0])]
        raise BoundError(f"killing rate is not finite on the scan grid (V({bad:.6g}) = nan)")
    if np.any(np.isneginf(vals)):
        return -math.inf
    if not finite_ends:
        tol = 1e-12 * max(1.0, float(np.max(np.abs(vals[[0, -1]]))))
        if vals[-1] < vals[-2] - tol or vals[0] < vals[1] - tol:
            return -math.inf
    best = float(np.min(vals))
    if not refine:
        return best
    for i in np.argpartition(vals, 3)[:3]:
        a, b = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
        if b <= a:
            continue
        r = minimize_scalar(
            lambda t: float(d.v_fn(float(t))),
            bounds=(a, b),
            method="bounded",
            options={"xatol": 1e-10 * (hi - lo)},
        )
        if np.isfinite(r.fun):
            best = min(best, float(r.fun))
    return best


# ---- weight-family optimization -----------------------------------------


@dataclass(frozen=True)
class _RhoOpt:
    params: dict
    rho: float
    start: float
    opt_gap: float
    dual: md.DualModel


def _family_names(spec: md.WeightSpec) -> list[str]:
    return sorted(ex.free_params(spec.payload))


def _maximize_rho(
    m: md.DiffusionModel,
    spec: md.WeightSpec,
    cfg: OptConfig,
    admissible: Callable[[md.DualModel], bool] | None = None,
) -> _RhoOpt | None:
    """Maximize rho_a over the family's parameter box; None if nothing is
    admissible.  Deterministic: full grid scan, then Nelder-Mead."""
    names = _family_names(spec)
    if len(names) > 3:
        raise BoundError(f"weight family has {len(names)} free parameters (limit 3)")

    def realize(theta):
        try:
            d = md.realize_weight(m, spec, dict(zip(names, theta)))
        except md.ModelError:
            return None
        if admissible is not None and not admissible(d):
            return None
        return d

    def rho_at(theta, refine):
        d = realize(theta)
        if d is None:
            return -math.inf, None
        try:
            r = rho_of_weight(d, cfg.R, cfg.scan_points, refine=refine)
        except BoundError:
            return -math.inf, None
        return r, d

    if not names:
        r, d = rho_at((), refine=True)
        if d is None or r == -math.inf:
            return None
        return _RhoOpt(params={}, rho=r, start=r, opt_gap=0.0, dual=d)

    if cfg.box is None or any(n not in cfg.box for n in names):
        missing = [n for n in names if not cfg.box or n not in cfg.box]
        raise BoundError(f"parameter box required for {missing}")
    axes = [np.linspace(cfg.box[n][0], cfg.box[n][1], cfg.grid_points) for n in names]
    best_theta, best_val = None, -math.inf
    for theta in itertools.product(*axes):
        r, _ = rho_at(theta, refine=False)
        if r > best_val:
            best_val, best_theta = r, theta
    if best_theta is None or best_val == -math.inf:
        return None

    start, d0 = rho_at(best_theta, refine=True)

    def neg(theta):
        for n, t in zip(names, theta):
            lo, hi = cfg.box[n]
            if not lo <= t <= hi:
                return math.inf
        r, _ = rho_at(theta, refine=True)
        return -r

    nm = minimize(
        neg,
        np.asarray(best_theta, dtype=float),
        method="Nelder-Mead",
        options={
            "maxiter": cfg.nm_max_iter,
            "xatol": cfg.param_tol,
            "fatol": 1e-12,
        },
    )
    theta_star, val_star = best_theta, start
    if np.isfinite(nm.fun) and -nm.fun > start:
        theta_star, val_star = tuple(nm.x), -float(nm.fun)
    _, d_star = rho_at(theta_star, refine=True)
    return _RhoOpt(
        params=dict(zip(names, (float(t) for t in theta_star))),
        rho=val_star,
        start=start,
        opt_gap=val_star - start,
        dual=d_star if d_star is not None else d0,
    )


def chen_wang_lower(
    m: md.DiffusionModel, w: md.WeightSpec, opt_cfg: OptConfig | None = None
) -> BoundReport:
    """Lower bound lambda1 >= sup_a inf_x V_a over a weight family."""
    cfg = opt_cfg or OptConfig()
    res = _maximize_rho(m, w, cfg)
    if res is None:
        return _infeasible("chen_wang", "lambda1", "lower",
                           "no admissible weight in the family (rho unbounded below or weight degenerate)")
    if res.rho <= 0.0:
        return _infeasible("chen_wang", "lambda1", "lower",
                           f"best killing-rate infimum is not positive (rho = {res.rho:.6g})",
                           **res.params)
    return BoundReport(
        method="chen_wang",
        target="lambda1",
        side="lower",
        value=res.rho,
        params={**res.params, "rho": res.rho, "kind": w.kind},
        error_budget={"quad_err": 0.0, "opt_gap": res.opt_gap, "truncation": 0.0},
        notes=("killing rate verified increasing outward at the scan edge",),
    )


# ---- integrated lower bound ---------------------------------------------


def _require_unit_sigma(m: md.DiffusionModel, method: str) -> None:
    g = m.probe_grid()
    vals = np.asarray(ex.evaluate(m.sigma, g), dtype=float)
    if not np.all(np.abs(vals - 1.0) <= 1e-12):
        raise BoundError(f"{method} requires unit diffusion coefficient")


def veysseire_lower(m: md.DiffusionModel, cfg: OptConfig | None = None) -> BoundReport:
    """Integrated lower bound lambda1 >= 1 / mu(1/V_sigma), V_sigma > 0."""
    cfg = cfg or OptConfig()
    d = md.realize_weight(m, md.WeightSpec.direct(m.sigma))
    lo, hi, _ = _scan_window(d, cfg.R)
    xs = np.linspace(lo, hi, cfg.scan_points + (cfg.scan_points % 2))
    with np.errstate(all="ignore"):
        vals = np.asarray(d.v_fn(xs), dtype=float)
    if np.any(np.isnan(vals)):
        bad = xs[int(np.flatnonzero(np.isnan(vals))[0])]
        raise BoundError(f"V_sigma is not defined on the working grid (x = {bad:.6g})")
    vmin = float(np.min(vals))
    # sharpen interior minima off the grid; a rate vanishing between nodes
    # (quartic: V_sigma = U'' ~ x^2 at the origin) must fail the check
    for i in np.argpartition(vals, 3)[:3]:
        a, b = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
        if b > a:
            r0 = minimize_scalar(lambda t: float(d.v_fn(float(t))), bounds=(a, b),
                                 method="bounded", options={"xatol": 1e-12 * (hi - lo)})
            if np.isfinite(r0.fun):
                vmin = min(vmin, float(r0.fun))
    if vmin <= 1e-12:
        return _infeasible("veysseire", "lambda1", "lower",
                           f"V_sigma is not strictly positive on the working grid (min {vmin:.3g})")
    qc = cfg.quad_cfg()
    z = m.normalization(qc)
    anchor = m.anchor
    try:
        with np.errstate(all="ignore"):
            r = q._mu_integral(m, lambda x: 1.0 / np.asarray(d.v_fn(x), dtype=float),
                               qc, breakpoints=(anchor,))
    except q.QuadError:
        return _infeasible("veysseire", "lambda1", "lower",
                           "1/V_sigma is not mu-integrable")
    integral = r.value / z
    if not (r.converged and math.isfinite(integral) and integral > 0):
        return _infeasible("veysseire", "lambda1", "lower",
                           "1/V_sigma is not mu-integrable")
    value = 1.0 / integral
    quad_err = (r.err_est / z) / integral**2
    return BoundReport(
        method="veysseire",
        target="lambda1",
        side="lower",
        value=value,
        params={"mu_inverse_rate": integral, "min_V_sigma": vmin},
        error_budget={"quad_err": quad_err, "opt_gap": 0.0, "truncation": 0.0},
        notes=(f"V_sigma positivity checked on [{lo:.3g}, {hi:.3g}]",),
    )


# ---- Muckenhoupt two-sided criterion ------------------------------------


def _simpson_cells(fn, t: np.ndarray) -> np.ndarray:
    mids = 0.5 * (t[:-1] + t[1:])
    ft = np.asarray(fn(t), dtype=float)
    fm = np.asarray(fn(mids), dtype=float)
    h = np.diff(t)
    return (h / 6.0) * (ft[:-1] + 4.0 * fm + ft[1:])


@dataclass(frozen=True)
class MuckenhouptResult:
    b: float
    b_plus: float
    b_minus: float
    lower: float
    upper: float
    median: float
    x_plus: float
    x_minus: float
    error_budget: dict = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    @property
    def diverging(self) -> bool:
        return not math.isfinite(self.b)

    def reports(self) -> tuple[BoundReport, BoundReport]:
        params = {"B": self.b, "median": self.median,
                  "x_plus": self.x_plus, "x_minus": self.x_minus}
        if self.diverging:
            reason = "B diverging on the scan window: no spectral gap detected"
            return (
                _infeasible("muckenhoupt", "lambda1", "lower", reason, **params),
                _infeasible("muckenhoupt", "lambda1", "upper", reason, **params),
            )
        budget = dict(self.error_budget)
        return (
            BoundReport("muckenhoupt", "lambda1", "lower", self.lower, params,
                        budget, self.notes),
            BoundReport("muckenhoupt", "lambda1", "upper", self.upper, params,
                        budget, self.notes),
        )


def _muck_side(m: md.DiffusionModel, med: float, sgn: int, cfg: OptConfig):
    """sup over t > 0 of tail(med + sgn t) * core(med -> med + sgn t)."""
    lo, hi = m.support
    edge = (hi - med) if sgn > 0 else (med - lo)
    R = cfg.R if cfg.R is not None else 40.0
    T = min(R, edge if math.isfinite(edge) else R)

    # clip the window where U exceeds the overflow guard; beyond it the
    # product has already decayed by a factor exp(-(U - window)) at least
    probe = np.linspace(0.0, T, 2001)[1:]
    uvals = np.asarray(m.U(med + sgn * probe), dtype=float)
    over = np.flatnonzero(np.maximum.accumulate(uvals) > _U_WINDOW)
    clipped = over.size > 0
    if clipped:
        T = float(probe[over[0]])

    points = max(400, cfg.scan_points // 4)
    t = np.concatenate([[0.0], np.geomspace(max(1e-4, 1e-6 * T), T, points - 1)])
    dens = lambda u: np.asarray(m.density(med + sgn * np.asarray(u)), dtype=float)
    coref = lambda u: np.exp(np.asarray(m.U(med + sgn * np.asarray(u)), dtype=float))
    core = q.cumulative_on_grid(coref, t)
    cells = _simpson_cells(dens, t)
    qc = cfg.quad_cfg()
    qc = replace(qc, truncation_R=max(qc.truncation_R, abs(med) + T + 10.0))
    if math.isfinite(edge) and T >= edge:
        beyond = 0.0
    elif sgn > 0:
        beyond = q.integrate(m.density, med + T, hi, qc).value
    else:
        beyond = q.integrate(m.density, lo, med - T, qc).value
    tail = np.empty_like(t)
    tail[-1] = beyond
    tail[:-1] = beyond + np.cumsum(cells[::-1])[::-1]
    prod = tail * core

    i = int(np.argmax(prod))
    b_grid = float(prod[i])
    # plateau / divergence classification at the window edge
    j = int(np.searchsorted(t, 0.8 * T))
    edge_ratio = prod[-1] / prod[j] if prod[j] > 0 else math.inf
    if i == len(t) - 1 and not (math.isfinite(edge) and T >= edge):
        if edge_ratio > 1.02:
            return math.inf, float(med + sgn * t[i]), 0.0, ("diverging",)
        # supremum approached in the tail limit; the grid edge already sits
        # on the plateau
        return b_grid, float(med + sgn * t[i]), abs(b_grid - float(prod[j])), (
            "supremum attained in the tail limit",)

    def prod_direct(tt: float) -> float:
        if sgn > 0:
            tl = q.integrate(m.density, med + tt, hi, qc).value
        else:
            tl = q.integrate(m.density, lo, med - tt, qc).value
        cr = q.integrate(coref, 0.0, tt, qc).value
        return tl * cr

    a, b = t[max(i - 1, 1)], t[min(i + 1, len(t) - 1)]
    r = minimize_scalar(lambda tt: -prod_direct(float(tt)), bounds=(a, b),
                        method="bounded", options={"xatol": 1e-9 * T})
    b_best, x_best = b_grid, float(med + sgn * t[i])
    if np.isfinite(r.fun) and -r.fun > b_best:
        b_best, x_best = -float(r.fun), float(med + sgn * r.x)
    return b_best, x_best, abs(b_best - b_grid), ()


def muckenhoupt(m: md.DiffusionModel, cfg: OptConfig | None = None) -> MuckenhouptResult:
    """Two-sided gap bracket 1/(4B) <= lambda1 <= 2/B from the product of
    tail mass and reciprocal-density core integral around the median."""
    cfg = cfg or OptConfig()
    _require_unit_sigma(m, "the Muckenhoupt criterion")
    med = q.median(m, cfg.quad_cfg())
    bp, xp, ep, notes_p = _muck_side(m, med, +1, cfg)
    bm, xm, em, notes_m = _muck_side(m, med, -1, cfg)
    b = max(bp, bm)
    notes = tuple(dict.fromkeys(notes_p + notes_m))
    if not math.isfinite(b):
        return MuckenhouptResult(
            b=math.inf, b_plus=bp, b_minus=bm, lower=0.0, upper=math.inf,
            median=med, x_plus=xp, x_minus=xm, notes=notes or ("diverging",),
        )
    err = ep if bp >= bm else em
    rel = err / b if b > 0 else 0.0
    return MuckenhouptResult(
        b=b, b_plus=bp, b_minus=bm,
        lower=1.0 / (4.0 * b), upper=2.0 / b,
        median=med, x_plus=xp, x_minus=xm,
        error_budget={"quad_err": rel * (1.0 / (4.0 * b) + 2.0 / b),
                      "opt_gap": 0.0, "truncation": 0.0},
        notes=notes,
    )


def muckenhoupt_power_formula(alpha: float) -> float:
    """Closed-form relaxation of 1/(4B) for the measure exp(-|x|^alpha)."""
    if alpha <= 0:
        raise BoundError("alpha must be positive")
    return 1.0 / (4.0 * alpha ** (2.0 / alpha) * _gamma(1.0 + 1.0 / alpha) ** 2)


def veysseire_power_formula(alpha: float) -> float:
    """Closed form of the integrated bound for exp(-|x|^alpha), 1 < alpha < 3."""
    if not 1.0 < alpha < 3.0:
        raise BoundError(f"closed form requires 1 < alpha < 3, got {alpha}")
    return ((alpha - 1.0) * alpha ** (1.0 - 2.0 / alpha)
            * _gamma(1.0 / alpha) / _gamma((3.0 - alpha) / alpha))


def power_crossover(lo: float = 1.01, hi: float = 1.5, tol: float = 1e-10) -> float:
    """alpha where the integrated bound overtakes the Muckenhoupt relaxation."""
    f = lambda a: veysseire_power_formula(a) - muckenhoupt_power_formula(a)
    flo, fhi = f(lo), f(hi)
    if flo * fhi > 0:
        raise BoundError(f"no sign change of the difference on [{lo}, {hi}]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if flo * f(mid) <= 0:
            hi = mid
        else:
            lo, flo = mid, f(mid)
    return 0.5 * (lo + hi)


# ---- Brascamp-Lieb variance bound ---------------------------------------


@dataclass(frozen=True)
class BLBound:
    bound: float
    variance: float
    slack: float
    min_rate: float


def brascamp_lieb_var_bound(
    m: md.DiffusionModel, d: md.DualModel, f, cfg: OptConfig | None = None
) -> BLBound:
    """Var_mu(f) <= mu(sigma^2 (f')^2 / V_a), valid when V_a > 0.

    Positivity is checked pointwise on the working grid; the rate may still
    decay to zero in the tails (the weighted-gradient integral then simply
    carries the growing factor 1/V_a).
    """
    cfg = cfg or OptConfig()
    lo, hi, _ = _scan_window(d, cfg.R)
    xs = np.linspace(lo, hi, cfg.scan_points + (cfg.scan_points % 2))
    with np.errstate(all="ignore"):
        vals = np.asarray(d.v_fn(xs), dtype=float)
    if np.any(np.isnan(vals)):
        bad = xs[int(np.flatnonzero(np.isnan(vals))[0])]
        raise BoundError(f"killing rate is not defined on the working grid (x = {bad:.6g})")
    vmin = float(np.min(vals))
    if not vmin > 1e-12:
        raise BoundError(f"positive killing rate required (min V_a = {vmin:.6g})")
    f = md._parse_or_expr(f, "test function")
    df = ex.simplify(ex.differentiate(f))
    sig = m.sigma_fn
    qc = cfg.quad_cfg()
    anchor = m.anchor

    def integrand(x):
        s = np.asarray(sig(x), dtype=float)
        return (s * np.asarray(ex.evaluate(df, x), dtype=float)) ** 2 / np.asarray(
            d.v_fn(x), dtype=float
        )

    with np.errstate(all="ignore"):
        bound = q.mu_expectation(m, integrand, qc, breakpoints=(anchor,))
        mean = q.mu_expectation(m, f, qc, breakpoints=(anchor,))
        second = q.mu_expectation(m, ex.mul(f, f), qc, breakpoints=(anchor,))
    var = second - mean * mean
    return BLBound(bound=bound, variance=var, slack=bound - var, min_rate=vmin)


# ---- Rayleigh-quotient upper bound --------------------------------------


def rayleigh_upper(
    m: md.DiffusionModel, f_family, opt_cfg: OptConfig | None = None
) -> BoundReport:
    """Upper bound lambda1 <= min over the family of E(f,f)/Var(f)."""
    cfg = opt_cfg or OptConfig()
    fam = md._parse_or_expr(f_family, "trial family")
    names = sorted(ex.free_params(fam))
    if len(names) > 3:
        raise BoundError(f"trial family has {len(names)} free parameters (limit 3)")
    qc = cfg.quad_cfg()
    sig = m.sigma_fn
    anchor = m.anchor
    z = m.normalization(qc)

    def quotient(theta):
        f = ex.simplify(ex.substitute(fam, dict(zip(names, theta))))
        df = ex.simplify(ex.differentiate(f))

        def energy_integrand(x):
            s = np.asarray(sig(x), dtype=float)
            return (s * np.asarray(ex.evaluate(df, x), dtype=float)) ** 2

        try:
            with np.errstate(all="ignore"):
                num = q._mu_integral(m, energy_integrand, qc, breakpoints=(anchor,))
                mean = q._mu_integral(m, f, qc, breakpoints=(anchor,))
                second = q._mu_integral(m, ex.mul(f, f), qc, breakpoints=(anchor,))
        except q.QuadError:
            return math.inf, math.inf
        var_scaled = second.value - mean.value**2 / z
        if not (math.isfinite(num.value) and math.isfinite(var_scaled)):
            return math.inf, math.inf
        if var_scaled <= 1e-13 * abs(second.value):
            return math.inf, math.inf
        val = num.value / var_scaled
        err = (num.err_est + val * (second.err_est + 2.0 * abs(mean.value) * mean.err_est / z)) / var_scaled
        return val, err

    if not names:
        val, err = quotient(())
        if not math.isfinite(val):
            return _infeasible("rayleigh", "lambda1", "upper",
                               "trial function is degenerate (zero variance)")
        return BoundReport("rayleigh", "lambda1", "upper", val, {},
                           {"quad_err": err, "opt_gap": 0.0, "truncation": 0.0})

    if cfg.box is None or any(n not in cfg.box for n in names):
        missing = [n for n in names if not cfg.box or n not in cfg.box]
        raise BoundError(f"parameter box required for {missing}")
    axes = [np.linspace(cfg.box[n][0], cfg.box[n][1], cfg.grid_points) for n in names]
    best_theta, best_val = None, math.inf
    for theta in itertools.product(*axes):
        v, _ = quotient(theta)
        if v < best_val:
            best_val, best_theta = v, theta
    if best_theta is None or not math.isfinite(best_val):
        return _infeasible("rayleigh", "lambda1", "upper",
                           "every family member is degenerate (zero variance)")
    start = best_val

    def obj(theta):
        for n, tv in zip(names, theta):
            lo, hi = cfg.box[n]
            if not lo <= tv <= hi:
                return math.inf
        return quotient(theta)[0]

    nm = minimize(obj, np.asarray(best_theta, dtype=float), method="Nelder-Mead",
                  options={"maxiter": cfg.nm_max_iter, "xatol": cfg.param_tol,
                           "fatol": 1e-12})
    theta_star, val_star = best_theta, start
    if np.isfinite(nm.fun) and float(nm.fun) < start:
        theta_star, val_star = tuple(nm.x), float(nm.fun)
    _, err_star = quotient(theta_star)
    return BoundReport(
        method="rayleigh",
        target="lambda1",
        side="upper",
        value=val_star,
        params=dict(zip(names, (float(tv) for tv in theta_star))),
        error_budget={"quad_err": err_star, "opt_gap": start - val_star,
                      "truncation": 0.0},
    )


# ---- monotone-weight log-Sobolev bound ----------------------------------


def _monotone_class(d: md.DualModel, R: float | None, n: int = 801):
    """Direction of sigma/a on the grid: 'inc', 'dec', 'const', or None."""
    lo, hi, _ = _scan_window(d, R)
    xs = np.linspace(lo, hi, n + (n % 2))
    with np.errstate(all="ignore"):
        logs = np.asarray(np.log(np.asarray(d.base.sigma_fn(xs), dtype=float))
                          - np.asarray(d.log_weight(xs), dtype=float))
    if not np.all(np.isfinite(logs)):
        return None, (math.nan, math.nan)
    dlog = np.diff(logs)
    scale = max(1e-300, float(np.max(np.abs(logs)) ))
    tol = 1e-10 * max(1.0, scale)
    up, down = bool(np.any(dlog > tol)), bool(np.any(dlog < -tol))
    # ratio range of a/sigma after anchoring the free scale at the center
    mid = len(logs) // 2
    rel = -(logs - logs[mid])
    ratio = (float(np.exp(np.min(rel))), float(np.exp(np.max(rel))))
    if up and down:
        return None, ratio
    if not up and not down:
        return "const", ratio
    return ("dec" if down else "inc"), ratio


def _symmetric_measure(m: md.DiffusionModel, med: float) -> bool:
    ts = np.geomspace(1e-3, 10.0, 120)
    with np.errstate(all="ignore"):
        hp = np.asarray(m.density(med + ts), dtype=float)
        hm = np.asarray(m.density(med - ts), dtype=float)
    ok = hp > 0
    return bool(np.all(np.abs(hp[ok] - hm[ok]) <= 1e-9 * hp[ok]))


def lsi_lower(
    m: md.DiffusionModel,
    inc_family: md.WeightSpec | None = None,
    dec_family: md.WeightSpec | None = None,
    opt_cfg: OptConfig | None = None,
) -> BoundReport:
    """Log-Sobolev lower bound 2 min over the two monotone weight classes.

    Each family must realize sigma/a monotone in the stated direction
    (constant qualifies for both).  For a symmetric measure one class
    determines the other by reflection, so a single family suffices.
    """
    cfg = opt_cfg or OptConfig()
    if inc_family is None and dec_family is None:
        raise BoundError("at least one weight family is required")
    med = q.median(m, cfg.quad_cfg())
    symmetric = _symmetric_measure(m, med)

    sups: dict[str, _RhoOpt] = {}
    notes: list[str] = []
    for label, fam in (("inc", inc_family), ("dec", dec_family)):
        if fam is None:
            continue

        def admissible(d, _label=label):
            cls, _ = _monotone_class(d, cfg.R)
            return cls in (_label, "const")

        res = _maximize_rho(m, fam, cfg, admissible=admissible)
        if res is None:
            return _infeasible(
                "lsi_monotone", "cls", "lower",
                f"no admissible weight in the {label} class (monotonicity of sigma/a violated or rho unbounded below)")
        sups[label] = res
        _, ratio = _monotone_class(res.dual, cfg.R)
        notes.append(f"{label}: sigma/a ratio range [{ratio[0]:.3g}, {ratio[1]:.3g}] about the center")
        if ratio[0] < 1e-6 or ratio[1] > 1e6:
            notes.append(f"{label}: a and sigma are not uniformly comparable on the scan window")

    if len(sups) == 1:
        if not symmetric:
            return _infeasible("lsi_monotone", "cls", "lower",
                               "both monotone classes are required for an asymmetric measure")
        only = next(iter(sups))
        other = "dec" if only == "inc" else "inc"
        sups[other] = sups[only]
        notes.append("symmetric measure: the mirrored family covers the other class")

    val = 2.0 * min(sups["inc"].rho, sups["dec"].rho)
    if val <= 0.0:
        return _infeasible("lsi_monotone", "cls", "lower",
                           f"best class infimum is not positive (value {val:.6g})")
    params = {}
    for label, res in sups.items():
        params[f"rho_{label}"] = res.rho
        for k, v in res.params.items():
            params[f"{k}_{label}"] = v
    opt_gap = 2.0 * max(res.opt_gap for res in sups.values())
    return BoundReport(
        method="lsi_monotone",
        target="cls",
        side="lower",
        value=val,
        params=params,
        error_budget={"quad_err": 0.0, "opt_gap": opt_gap, "truncation": 0.0},
        notes=tuple(notes),
    )


# ---- report assembly ----------------------------------------------------


def assemble_report(m: md.DiffusionModel, reports, oracle=None) -> dict:
    """Merge bound reports into brackets per target and flag violations."""
    reports = list(reports)
    doc: dict = {"model": m.name, "targets": {}, "violations": []}
    if oracle is not None:
        o_val = float(getattr(oracle, "value", oracle))
        o_err = float(getattr(oracle, "err_est", 0.0))
        doc["oracle"] = {"lambda1": o_val, "err_est": o_err}
    for target in ("lambda1", "cls"):
        rs = [r for r in reports if r.target == target]
        if not rs:
            continue
        feas = [r for r in rs if r.feasible]
        lowers = [r for r in feas if r.side == "lower"]
        uppers = [r for r in feas if r.side == "upper"]
        best_lo = max(lowers, key=lambda r: r.value) if lowers else None
        best_hi = min(uppers, key=lambda r: r.value) if uppers else None
        entry = {
            "lower": best_lo.value if best_lo else None,
            "upper": best_hi.value if best_hi else None,
            "bracket": ([best_lo.value, best_hi.value]
                        if best_lo and best_hi else None),
            "methods": [r.as_dict() for r in rs],
        }
        if target == "cls" and oracle is not None:
            # C_LS <= 2 lambda1 closes the bracket from above
            cap = 2.0 * (o_val + o_err)
            if entry["upper"] is None or cap < entry["upper"]:
                entry["upper"] = cap
                entry["bracket"] = ([entry["lower"], cap]
                                    if entry["lower"] is not None else None)
                entry["upper_source"] = "twice the reference eigenvalue"
        doc["targets"][target] = entry
        if best_lo and best_hi and best_lo.value > best_hi.value + (
                best_lo.budget_total + best_hi.budget_total):
            doc["violations"].append(
                f"{target}: lower {best_lo.value:.6g} ({best_lo.method}) exceeds "
                f"upper {best_hi.value:.6g} ({best_hi.method}) beyond budgets")
        if oracle is not None and target == "lambda1":
            for r in lowers:
                if r.value > o_val + o_err + r.budget_total:
                    doc["violations"].append(
                        f"lambda1: lower bound {r.value:.6g} ({r.method}) exceeds "
                        f"the reference eigenvalue {o_val:.6g}")
            for r in uppers:
                if r.value < o_val - o_err - r.budget_total:
                    doc["violations"].append(
                        f"lambda1: upper bound {r.value:.6g} ({r.method}) undercuts "
                        f"the reference eigenvalue {o_val:.6g}")
        if oracle is not None and target == "cls":
            for r in lowers:
                if r.value > 2.0 * (o_val + o_err) + r.budget_total:
                    doc["violations"].append(
                        f"cls: lower bound {r.value:.6g} ({r.method}) exceeds twice "
                        f"the reference eigenvalue")
    return doc
