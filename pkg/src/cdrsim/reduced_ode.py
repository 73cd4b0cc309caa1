"""Residuals of the reduced ODE and continuity-equation diagnostics.

The reduced equation for the similarity profile is

    sigma y'' + (sigma' + alpha z - tau) y' - (tau' + mu) y + rho(z, y) = 0,

and integrating the PDE over the domain gives the particle balance

    (alpha + mu) int y dz = int rho dz + Delta(sigma y' - tau y),

which, combined with the integrated ODE, reduces to Delta(alpha z y) = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

from . import expr as ex
from .quadrature import DivergentIntegralError, quad
from .scaling import DomainKind, ExponentSet, ProfileSet, SolvableSystem

DECAY_THRESHOLD = 1e-14
TRUNCATION_PAD = 1.2
SAMPLE_CAP = 50.0
_SCAN = np.concatenate([np.arange(0.0, 50.0 + 1e-9, 0.05),
                        np.geomspace(50.0, 1e4, 200)[1:]])


class CertificationError(RuntimeError):
    pass


class ExponentMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class YTriple:
    y: float
    y1: float
    y2: float


def _values(e: ex.Expr, bindings: Mapping[str, object], z):
    out = ex.evaluate(e, bindings)
    if np.ndim(z) and np.ndim(out) == 0:
        out = np.full(np.shape(z), out)
    return out


def residual(profiles: ProfileSet, exponents: ExponentSet, yt: YTriple, z,
             params: Optional[Mapping[str, float]] = None):
    """sigma y'' + (sigma' + alpha z - tau) y' - (tau' + mu) y + rho(z, y).

    Works elementwise when z and the entries of ``yt`` are arrays.
    """
    a, m = exponents.alpha, exponents.mu
    b = {**(params or {}), "alpha": a, "mu": m, "z": z, "y": yt.y}
    sigma = _values(profiles.sigma, b, z)
    if not np.all(np.isfinite(sigma)):
        raise ValueError("sigma is not finite at the requested point")
    d_sigma = _values(profiles.d_sigma, b, z)
    tau = _values(profiles.tau, b, z)
    d_tau = _values(profiles.d_tau, b, z)
    rho = _values(profiles.rho, b, z)
    with np.errstate(all="ignore"):
        out = (sigma * yt.y2 + (d_sigma + a * np.asarray(z) - tau) * yt.y1
               - (d_tau + m) * yt.y + rho)
    return float(out) if np.ndim(out) == 0 else out


def y_triple(sys: SolvableSystem, z) -> YTriple:
    return YTriple(sys.y(z), sys.y.derivative(z, 1), sys.y.derivative(z, 2))


def fd_y_triple(sys: SolvableSystem, z, h: float = 1e-5) -> YTriple:
    """y, y', y'' with central differences in place of the derivatives."""
    z = np.asarray(z, dtype=float)
    yp, y0, ym = sys.y(z + h), sys.y(z), sys.y(z - h)
    return YTriple(y0, (yp - ym) / (2 * h), (yp - 2 * y0 + ym) / h ** 2)


def system_residual(sys: SolvableSystem, z, finite_difference: bool = False):
    yt = fd_y_triple(sys, z) if finite_difference else y_triple(sys, z)
    return residual(sys.profiles, sys.exponents, yt, z, sys.params)


# --------------------------------------------------------------------------
# Finite differences on uniform grids


def fd4_derivative(values, h: float):
    """Fourth-order first derivative on a uniform grid.

    Central five-point stencil in the interior, one-sided five-point
    stencils at the two points nearest each end.
    """
    f = np.asarray(values, dtype=float)
    n = f.shape[0]
    if n < 5:
        raise ValueError("need at least 5 grid points for a fourth-order stencil")
    d = np.empty_like(f)
    d[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    d[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    d[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * h)
    d[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * h)
    d[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * h)
    return d


def uniform_spacing(z) -> float:
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or len(z) < 2:
        raise ValueError("grid must be a 1-D array with at least two points")
    steps = np.diff(z)
    h = float(np.mean(steps))
    if h <= 0 or np.max(np.abs(steps - h)) > 1e-9 * max(h, abs(z).max()):
        raise ValueError("grid must be uniform and increasing")
    return h


def _require_conserving(exponents: ExponentSet):
    if abs(exponents.mu + exponents.alpha) > 1e-12 * max(1.0, abs(exponents.alpha)):
        raise ExponentMismatchError(
            f"conserving form needs mu = -alpha (got alpha={exponents.alpha}, mu={exponents.mu})")


def conserved_form_residual(profiles: ProfileSet, exponents: ExponentSet, z, y,
                            params: Optional[Mapping[str, float]] = None) -> float:
    """max |d/dz(sigma y' + (alpha z - tau) y) + rho| on a uniform grid, mu = -alpha."""
    _require_conserving(exponents)
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    h = uniform_spacing(z)
    b = {**(params or {}), "alpha": exponents.alpha, "mu": exponents.mu, "z": z, "y": y}
    sigma = _values(profiles.sigma, b, z)
    tau = _values(profiles.tau, b, z)
    rho = _values(profiles.rho, b, z)
    bracket = sigma * fd4_derivative(y, h) + (exponents.alpha * z - tau) * y
    return float(np.max(np.abs(fd4_derivative(bracket, h) + rho)))


def first_integral_residual(profiles: ProfileSet, exponents: ExponentSet, yt: YTriple,
                            z, constant: float = 0.0,
                            params: Optional[Mapping[str, float]] = None):
    """sigma y' + (alpha z - tau) y - rho_bar - constant (conserving case)."""
    if profiles.rho_bar is None:
        raise ValueError("profiles have no rho_bar")
    _require_conserving(exponents)
    b = {**(params or {}), "alpha": exponents.alpha, "mu": exponents.mu, "z": z, "y": yt.y}
    sigma = _values(profiles.sigma, b, z)
    tau = _values(profiles.tau, b, z)
    rho_bar = _values(profiles.rho_bar, b, z)
    out = sigma * yt.y1 + (exponents.alpha * np.asarray(z) - tau) * yt.y - rho_bar - constant
    return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# Domain truncation


@dataclass(frozen=True)
class Extent:
    """Integration window [lo, hi] in z; ``divergent`` if y or rho never decays."""
    lo: float
    hi: float
    divergent: bool


def _decay_point(sys: SolvableSystem, direction: float):
    """Truncation point on one side, or None when no decay is found."""
    scan = _SCAN
    window = getattr(sys.y, "window", None)
    if window is not None:
        edge = window[1] if direction > 0 else -window[0]
        scan = scan[scan <= edge]
    z = direction * scan
    y = np.asarray(sys.y(z), dtype=float)
    rho = np.asarray(sys.profile_values("rho", z, y=y), dtype=float)
    with np.errstate(invalid="ignore"):
        big = ~((np.abs(y) < DECAY_THRESHOLD) & (np.abs(rho) < DECAY_THRESHOLD))
    idx = np.nonzero(big)[0]
    if len(idx) == 0:
        return 0.0
    last = idx[-1]
    if last == len(scan) - 1:
        if window is not None and scan[-1] < _SCAN[-1]:
            return float(scan[-1]) / TRUNCATION_PAD
        return None
    return float(scan[last + 1])


def truncation_extent(sys: SolvableSystem) -> Extent:
    """Cut the domain where |y| and |rho| fall below 1e-14, padded by 20%."""
    hi = _decay_point(sys, 1.0)
    if sys.domain.kind is DomainKind.HALF_LINE:
        lo = 0.0
    else:
        lo = _decay_point(sys, -1.0)
    divergent = hi is None or lo is None
    hi_z = SAMPLE_CAP if hi is None else TRUNCATION_PAD * hi
    if sys.domain.kind is DomainKind.HALF_LINE:
        lo_z = 0.0
    else:
        lo_z = -SAMPLE_CAP if lo is None else -TRUNCATION_PAD * lo
    return Extent(lo_z, hi_z, divergent)


def sample_points(sys: SolvableSystem, n: int = 50, window=None):
    """n interior points (cell midpoints) of the sampling window.

    The window is the truncated domain, capped at |z| = 50 when the profile
    does not decay.
    """
    if window is None:
        ext = truncation_extent(sys)
        lo, hi = max(ext.lo, -SAMPLE_CAP), min(ext.hi, SAMPLE_CAP)
        if hi <= lo:
            lo, hi = (0.0, 1.0) if sys.domain.kind is DomainKind.HALF_LINE else (-1.0, 1.0)
    else:
        lo, hi = window
    return lo + (hi - lo) * (np.arange(n) + 0.5) / n


# --------------------------------------------------------------------------
# Certification


@dataclass(frozen=True)
class CertificationReport:
    residual_max: float
    points: int
    tol: float
    sigma_nonzero: bool
    rho_bar_mismatch: Optional[float]
    passed: bool

    def to_dict(self) -> dict:
        return {
            "residual_max": self.residual_max,
            "points": self.points,
            "tol": self.tol,
            "sigma_nonzero": self.sigma_nonzero,
            "rho_bar_mismatch": self.rho_bar_mismatch,
            "passed": self.passed,
        }


def _rho_bar_mismatch(sys: SolvableSystem, z) -> float:
    """max relative gap between rho and -d(rho_bar)/dz along the solution."""
    p = sys.profiles
    y1_name = "__y1"
    deriv = ex.total_derivative(p.rho_bar, "z", {"y": ex.Var(y1_name)})
    b = sys.bindings(z=z, y=sys.y(z))
    b[y1_name] = sys.y.derivative(z, 1)
    minus_d = -np.asarray(_values(deriv, b, z))
    rho = np.asarray(_values(p.rho, b, z))
    scale = np.maximum(1.0, np.abs(rho))
    return float(np.max(np.abs(minus_d - rho) / scale))


def certify(sys: SolvableSystem, points: int = 50, tol: float = 1e-8,
            finite_difference: bool = False, window=None) -> CertificationReport:
    """Check the reduced ODE residual at ``points`` interior samples."""
    z = sample_points(sys, points, window)
    sigma = np.asarray(sys.profile_values("sigma", z))
    sigma_ok = bool(np.all(np.isfinite(sigma)) and np.all(sigma != 0))
    res = np.asarray(system_residual(sys, z, finite_difference=finite_difference))
    res_max = float(np.max(np.abs(res))) if np.all(np.isfinite(res)) else math.inf
    mismatch = None
    ok = sigma_ok and res_max <= tol
    if sys.profiles.rho_bar is not None:
        mismatch = _rho_bar_mismatch(sys, z)
        ok = ok and mismatch <= 1e-9
    return CertificationReport(res_max, points, tol, sigma_ok, mismatch, ok)


def require_certified(sys: SolvableSystem, points: int = 50, tol: float = 1e-8) -> CertificationReport:
    report = certify(sys, points, tol)
    if not report.passed:
        detail = f"residual {report.residual_max:.3e} > {tol:g}"
        if not report.sigma_nonzero:
            detail = "sigma vanishes or is not finite at a sample point"
        elif report.rho_bar_mismatch is not None and report.rho_bar_mismatch > 1e-9:
            detail = f"rho differs from -d(rho_bar)/dz by {report.rho_bar_mismatch:.3e}"
        raise CertificationError(f"system {sys.name!r} failed certification: {detail}")
    return report


# --------------------------------------------------------------------------
# Continuity


@dataclass(frozen=True)
class ContinuityReport:
    integral_y: Optional[float]
    integral_rho: Optional[float]
    boundary_flux: float
    lhs: Optional[float]
    delta_alpha_z_y: float
    tol: float
    divergent: bool
    window: tuple
    satisfied: bool
    n_of_t: Callable = field(repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "integral_y": "divergent" if self.divergent else self.integral_y,
            "integral_rho": "divergent" if self.divergent else self.integral_rho,
            "boundary_flux": self.boundary_flux,
            "lhs": "divergent" if self.divergent else self.lhs,
            "delta_alpha_z_y": self.delta_alpha_z_y,
            "window": list(self.window),
            "tol": self.tol,
            "satisfied": self.satisfied,
        }


def _flux(sys: SolvableSystem, z: float) -> float:
    sigma = sys.profile_values("sigma", z)
    tau = sys.profile_values("tau", z)
    return float(sigma * sys.y.derivative(z, 1) - tau * sys.y(z))


def _integrals(sys: SolvableSystem, lo: float, hi: float, tol: float, rtol: float):
    iy = quad(lambda z: sys.y(z), lo, hi, tol=tol, rtol=rtol).value
    irho = quad(lambda z: sys.profile_values("rho", z), lo, hi, tol=tol, rtol=rtol).value
    return iy, irho


def continuity_report(sys: SolvableSystem, tol: float = 1e-6,
                      quad_tol: float = 1e-10) -> ContinuityReport:
    """Particle balance and Delta(alpha z y) over the (truncated) domain.

    When y or rho does not decay the integrals are reported as divergent and
    only the boundary condition Delta(alpha z y) = 0 is checked.
    """
    a, m = sys.alpha, sys.mu
    ext = truncation_extent(sys)
    lo, hi = ext.lo, ext.hi

    def delta_azy(lo_, hi_):
        if a == 0:
            return 0.0
        return float(a * hi_ * sys.y(hi_) - a * lo_ * sys.y(lo_))

    flux = _flux(sys, hi) - _flux(sys, lo)
    dazy = delta_azy(lo, hi)
    if ext.divergent:
        def n_of_t(t):
            raise DivergentIntegralError("particle number diverges: y is not integrable")
        return ContinuityReport(None, None, flux, None, dazy, tol, True, (lo, hi),
                                abs(dazy) <= tol, n_of_t)

    iy, irho = _integrals(sys, lo, hi, quad_tol, quad_tol)
    lhs = (a + m) * iy
    ok = abs(lhs - irho - flux) <= tol and abs(dazy) <= tol

    def n_of_t(t):
        return float(t) ** (a + m) * iy
    return ContinuityReport(iy, irho, flux, lhs, dazy, tol, False, (lo, hi), ok, n_of_t)


def particle_number(sys: SolvableSystem, t: float, quad_tol: float = 1e-10) -> float:
    """N(t) = t^(alpha+mu) * integral of y over the domain."""
    if t <= 0:
        raise ValueError("time must be positive")
    ext = truncation_extent(sys)
    if ext.divergent:
        raise DivergentIntegralError("particle number diverges: y is not integrable")
    iy = quad(lambda z: sys.y(z), ext.lo, ext.hi, tol=quad_tol, rtol=quad_tol).value
    return float(t) ** (sys.alpha + sys.mu) * iy
