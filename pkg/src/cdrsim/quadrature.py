"""Adaptive quadrature and quadrature-built similarity profiles.

``quad`` is a vectorised adaptive Gauss-Kronrod (7/15) rule. The profile
constructors tabulate the indefinite integrals that appear in the closed-form
solutions of the reduced equation (first-order, conserving case and the
integrating-factor solution of the general case) as piecewise Hermite
polynomials, so nested integrals cost one pass per level instead of one
inner quadrature per outer node.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass
from typing import Callable, Mapping, Optional

import numpy as np
from scipy.interpolate import BPoly

from . import expr as ex

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# 15 abscissae on [-1, 1] and the matching Kronrod / Gauss weights
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS = np.zeros(15)
_GAUSS[1:7:2] = _WG[:3]
_GAUSS[7] = _WG[3]
_GAUSS[9:14:2] = _WG[2::-1]

DEFAULT_MAX_DEPTH = 30
MAX_PANELS = 50_000


class QuadratureError(RuntimeError):
    pass


class DivergentIntegralError(QuadratureError):
    pass


def max_depth() -> int:
    """Bisection depth cap, overridable with ``CDR_MAX_QUAD_DEPTH``."""
    raw = os.environ.get("CDR_MAX_QUAD_DEPTH")
    if raw is None:
        return DEFAULT_MAX_DEPTH
    try:
        depth = int(raw)
    except ValueError:
        raise QuadratureError(f"CDR_MAX_QUAD_DEPTH must be an integer, got {raw!r}")
    if depth < 1:
        raise QuadratureError("CDR_MAX_QUAD_DEPTH must be positive")
    return depth


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    evaluations: int


def _sample(f, x):
    vals = np.broadcast_to(np.asarray(f(x), dtype=float), x.shape)
    if not np.all(np.isfinite(vals)):
        bad = x[~np.isfinite(vals)][0]
        raise QuadratureError(f"integrand is not finite at z={bad!r}")
    return vals


def gauss_kronrod_panels(f, lo, hi):
    """One G7/K15 pass on every panel [lo[i], hi[i]]; returns (values, errors)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = mid[:, None] + half[:, None] * _NODES[None, :]
    fx = _sample(f, x)
    kronrod = half * (fx @ _KRONROD)
    gauss = half * (fx @ _GAUSS)
    return kronrod, np.abs(kronrod - gauss)


def quad(f: Callable, a: float, b: float, tol: float = 1e-10,
         rtol: float = 1e-10) -> QuadratureResult:
    """Adaptive Gauss-Kronrod quadrature of a vectorised ``f`` over [a, b].

    Panels whose error exceeds their share of the tolerance are bisected,
    all at once, until the summed error estimate is below
    ``max(tol, rtol*|value|)``. Node placement depends only on ``f``, the
    interval and the tolerances.
    """
    a = float(a)
    b = float(b)
    if not (np.isfinite(a) and np.isfinite(b)):
        raise QuadratureError("quadrature limits must be finite")
    if b < a:
        raise QuadratureError(f"need a <= b, got [{a}, {b}]")
    if a == b:
        return QuadratureResult(0.0, 0.0, 0)
    depth_cap = max_depth()
    lo = np.array([a])
    hi = np.array([b])
    depth = np.array([0])
    vals, errs = gauss_kronrod_panels(f, lo, hi)
    evaluations = 15
    width = b - a
    while True:
        value = float(np.sum(vals))
        error = float(np.sum(errs))
        target = max(tol, rtol * abs(value))
        if error <= target:
            return QuadratureResult(value, error, evaluations)
        share = target * (hi - lo) / width
        split = (errs > share) & (depth < depth_cap)
        if not np.any(split):
            candidates = np.where(depth < depth_cap, errs, -1.0)
            worst = int(np.argmax(candidates))
            if candidates[worst] < 0:
                raise QuadratureError(
                    f"tolerance {target:.3g} not met on [{a}, {b}] "
                    f"(error {error:.3g}) at maximum bisection depth {depth_cap}")
            split[worst] = True
        if len(lo) + int(split.sum()) > MAX_PANELS:
            raise QuadratureError(
                f"tolerance {target:.3g} not met on [{a}, {b}] within {MAX_PANELS} panels")
        mid = 0.5 * (lo[split] + hi[split])
        new_lo = np.concatenate([lo[split], mid])
        new_hi = np.concatenate([mid, hi[split]])
        new_depth = np.concatenate([depth[split], depth[split]]) + 1
        new_vals, new_errs = gauss_kronrod_panels(f, new_lo, new_hi)
        evaluations += 15 * len(new_lo)
        keep = ~split
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        depth = np.concatenate([depth[keep], new_depth])
        vals = np.concatenate([vals[keep], new_vals])
        errs = np.concatenate([errs[keep], new_errs])


# --------------------------------------------------------------------------
# Tabulated antiderivatives


class AntiderivativeTable:
    """F(z) = integral of ``integrand`` from ``anchor`` to z on [lo, hi].

    F is tabulated at nodes spaced at most ``step`` apart and interpolated
    by Hermite polynomials matching F and F' = integrand (cubic), plus
    F'' when ``integrand_derivative`` is given (quintic).
    """

    def __init__(self, integrand: Callable, lo: float, hi: float, anchor: float,
                 integrand_derivative: Optional[Callable] = None,
                 step: float = 0.01, tol: float = 1e-12):
        if not lo <= anchor <= hi or lo >= hi:
            raise ValueError(f"need lo <= anchor <= hi and lo < hi, got {lo}, {anchor}, {hi}")
        self.lo, self.hi, self.anchor = float(lo), float(hi), float(anchor)
        self.integrand = integrand
        self.integrand_derivative = integrand_derivative

        n_left = int(np.ceil((anchor - lo) / step))
        n_right = int(np.ceil((hi - anchor) / step))
        left = np.linspace(lo, anchor, n_left + 1) if n_left else np.array([anchor])
        right = np.linspace(anchor, hi, n_right + 1) if n_right else np.array([anchor])
        nodes = np.concatenate([left, right[1:]])
        i_anchor = len(left) - 1

        p_lo, p_hi = nodes[:-1], nodes[1:]
        pieces, errs = gauss_kronrod_panels(integrand, p_lo, p_hi)
        self.evaluations = 15 * len(p_lo)
        share = tol * (p_hi - p_lo) / (hi - lo)
        for i in np.nonzero(errs > share)[0]:
            res = quad(integrand, p_lo[i], p_hi[i], tol=share[i], rtol=0.0)
            pieces[i] = res.value
            self.evaluations += res.evaluations

        cumulative = np.concatenate([[0.0], np.cumsum(pieces)])
        values = cumulative - cumulative[i_anchor]
        columns = [values, _sample(integrand, nodes)]
        if integrand_derivative is not None:
            columns.append(_sample(integrand_derivative, nodes))
        self.evaluations += len(nodes) * (len(columns) - 1)
        self.nodes = nodes
        self._poly = BPoly.from_derivatives(nodes, np.column_stack(columns))

    def _check(self, z):
        z = np.asarray(z, dtype=float)
        slack = 1e-12 * max(1.0, abs(self.lo), abs(self.hi))
        if np.any(z < self.lo - slack) or np.any(z > self.hi + slack):
            raise ValueError(
                f"z outside the tabulated window [{self.lo}, {self.hi}]")
        return z

    def __call__(self, z):
        out = self._poly(self._check(z))
        return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# Profiles built by quadrature


def _as_float(out):
    return float(out) if np.ndim(out) == 0 else out


class TabulatedProfile:
    """A similarity profile y(z) backed by antiderivative tables.

    Callable for values; ``derivative(z, 1)`` and ``derivative(z, 2)`` use
    the exact differential relations of the construction rather than
    differentiating the interpolant.
    """

    expr = None

    def __init__(self, value: Callable, first: Callable, second: Callable,
                 window: tuple, evaluations: int):
        self._value = value
        self._first = first
        self._second = second
        self.window = window
        self.evaluations = evaluations

    def __call__(self, z):
        with np.errstate(all="ignore"):
            return _as_float(self._value(np.asarray(z, dtype=float)))

    def derivative(self, z, order: int = 1):
        z = np.asarray(z, dtype=float)
        with np.errstate(all="ignore"):
            if order == 1:
                return _as_float(self._first(z))
            if order == 2:
                return _as_float(self._second(z))
        raise ValueError("only first and second derivatives are available")


def _to_expr(e, params: Mapping[str, float], variables=("z",)) -> ex.Expr:
    if isinstance(e, str):
        return ex.parse(e, variables, params.keys())
    return e


def _compile(e: ex.Expr, params: Mapping[str, float]) -> Callable:
    bound = dict(params)

    def f(z):
        return np.broadcast_to(ex.evaluate(e, {**bound, "z": z}), np.shape(z))
    return f


def _check_window(sigma: ex.Expr, params, window, z0):
    lo, hi = window
    if not lo <= z0 <= hi:
        raise ValueError(f"anchor z0={z0} outside window {window}")
    probe = np.linspace(lo, hi, 2001)
    s = ex.evaluate(sigma, {**params, "z": probe})
    s = np.broadcast_to(s, probe.shape)
    interior = s[1:-1]
    if np.any(interior == 0) or np.any(np.sign(interior[1:]) != np.sign(interior[:-1])):
        raise ValueError("sigma vanishes inside the window")
    if not np.all(np.isfinite(interior)):
        raise ValueError("sigma is not finite inside the window")


def _default_window(z0: float, window):
    if window is None:
        return (z0 - 10.0, z0 + 10.0)
    return (float(window[0]), float(window[1]))


def _warn_budget(evaluations: int, budget: Optional[int]):
    if budget is not None and evaluations > budget:
        warnings.warn(
            f"quadrature used {evaluations} integrand evaluations (budget {budget})",
            RuntimeWarning, stacklevel=3)


def exp_integral_profile(rate, z0: float = 0.0, *, params=None, window=None,
                         step: float = 0.01, tol: float = 1e-10) -> TabulatedProfile:
    """y(z) = exp(integral of ``rate`` from z0 to z), so y' = rate*y."""
    params = dict(params or {})
    window = _default_window(z0, window)
    rate = _to_expr(rate, params)
    if ex.depends_on(rate, "y"):
        raise ValueError("rate must be a function of z only")
    d_rate = ex.differentiate(rate, "z")
    g, dg = _compile(rate, params), _compile(d_rate, params)
    table = AntiderivativeTable(g, window[0], window[1], z0, dg, step=step, tol=tol)

    def value(z):
        return np.exp(table(z))

    def first(z):
        return g(z) * np.exp(table(z))

    def second(z):
        return (dg(z) + g(z) ** 2) * np.exp(table(z))

    return TabulatedProfile(value, first, second, window, table.evaluations)


def fp_type_profile(sigma, tau, beta, alpha: float, z0: float = 0.0, *,
                    params=None, window=None, step: float = 0.01,
                    tol: float = 1e-10) -> TabulatedProfile:
    """Fokker-Planck type profile, conserving case.

    y(z) = exp( int_{z0}^z (beta + tau - alpha*z')/sigma dz' ), normalised
    so that y(z0) = 1.
    """
    params = dict(params or {})
    window = _default_window(z0, window)
    sigma, tau, beta = (_to_expr(e, params) for e in (sigma, tau, beta))
    _check_window(sigma, params, window, z0)
    drift = ex.sub(ex.add(beta, tau), ex.mul(ex.num(alpha), ex.Var("z")))
    return exp_integral_profile(ex.div(drift, sigma), z0, params=params,
                                window=window, step=step, tol=tol)


def non_fp_profile(sigma, tau, rho_bar, alpha: float, const_C: float,
                   z0: float = 0.0, *, params=None, window=None,
                   step: float = 0.01, tol: float = 1e-8) -> TabulatedProfile:
    """General solution of the once-integrated conserving equation.

    y(z) = e^{-I(z)} ( int_{z0}^z e^{I} rho_bar/sigma dz' + C ),
    I(z) = int_{z0}^z (alpha*z' - tau)/sigma dz'.
    """
    params = dict(params or {})
    window = _default_window(z0, window)
    sigma, tau, rho_bar = (_to_expr(e, params) for e in (sigma, tau, rho_bar))
    if ex.depends_on(rho_bar, "y"):
        raise ValueError("rho_bar must be given as a function of z")
    _check_window(sigma, params, window, z0)
    z = ex.Var("z")
    i_rate = ex.div(ex.sub(ex.mul(ex.num(alpha), z), tau), sigma)
    q = ex.div(rho_bar, sigma)
    di, dq = ex.differentiate(i_rate, "z"), ex.differentiate(q, "z")
    i_f, di_f, q_f, dq_f = (_compile(e, params) for e in (i_rate, di, q, dq))
    lo, hi = window

    table_i = AntiderivativeTable(i_f, lo, hi, z0, di_f, step=step, tol=tol * 1e-2)

    def j_rate(zz):
        return np.exp(table_i(zz)) * q_f(zz)

    def j_rate_d(zz):
        return np.exp(table_i(zz)) * (i_f(zz) * q_f(zz) + dq_f(zz))

    table_j = AntiderivativeTable(j_rate, lo, hi, z0, j_rate_d, step=step, tol=tol)

    def value(zz):
        return np.exp(-table_i(zz)) * (table_j(zz) + const_C)

    def first(zz):
        return -i_f(zz) * value(zz) + q_f(zz)

    def second(zz):
        return -di_f(zz) * value(zz) - i_f(zz) * first(zz) + dq_f(zz)

    return TabulatedProfile(value, first, second, window,
                            table_i.evaluations + table_j.evaluations)


def formal_solution_mu_neq(sigma, tau, rho_tilde, alpha: float, const_C: float,
                           const_Cprime: float, z0: float = 0.0, *, params=None,
                           window=None, step: float = 0.01, tol: float = 1e-7,
                           eval_budget: Optional[int] = 5_000_000) -> TabulatedProfile:
    """Integrating-factor solution of y'' + ((sigma' + alpha z - tau)/sigma) y' = rho_tilde/sigma.

    y(z) = int_{z0}^z e^{-G(z')} [ int_{z0}^{z'} e^{G} rho_tilde/sigma dz'' + C' ] dz' + C
    with G(z) = int_{z0}^z (sigma' + alpha z - tau)/sigma.
    """
    params = dict(params or {})
    window = _default_window(z0, window)
    sigma, tau, rho_tilde = (_to_expr(e, params) for e in (sigma, tau, rho_tilde))
    if ex.depends_on(rho_tilde, "y"):
        raise ValueError("rho_tilde must be given as a function of z")
    _check_window(sigma, params, window, z0)
    z = ex.Var("z")
    g_rate = ex.div(
        ex.sub(ex.add(ex.differentiate(sigma, "z"), ex.mul(ex.num(alpha), z)), tau), sigma)
    p = ex.div(rho_tilde, sigma)
    dg, dp = ex.differentiate(g_rate, "z"), ex.differentiate(p, "z")
    g_f, dg_f, p_f, dp_f = (_compile(e, params) for e in (g_rate, dg, p, dp))
    lo, hi = window

    table_g = AntiderivativeTable(g_f, lo, hi, z0, dg_f, step=step, tol=tol * 1e-3)

    def k_rate(zz):
        return np.exp(table_g(zz)) * p_f(zz)

    def k_rate_d(zz):
        return np.exp(table_g(zz)) * (g_f(zz) * p_f(zz) + dp_f(zz))

    table_k = AntiderivativeTable(k_rate, lo, hi, z0, k_rate_d, step=step, tol=tol * 1e-2)

    def y_rate(zz):
        return np.exp(-table_g(zz)) * (table_k(zz) + const_Cprime)

    def y_rate_d(zz):
        return -g_f(zz) * y_rate(zz) + p_f(zz)

    table_y = AntiderivativeTable(y_rate, lo, hi, z0, y_rate_d, step=step, tol=tol)
    evaluations = table_g.evaluations + table_k.evaluations + table_y.evaluations
    _warn_budget(evaluations, eval_budget)

    def value(zz):
        return table_y(zz) + const_C

    return TabulatedProfile(value, y_rate, y_rate_d, window, evaluations)
