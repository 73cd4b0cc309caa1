"""Equivalent systems: different (sigma, tau, rho) sharing the same y, alpha, mu.

Two systems share a solution y exactly when

    d/dz[(s~ - s) y'] - d/dz[(t~ - t) y] + (r~ - r) = 0,

so choosing s~ and t~ fixes r~.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import expr as ex
from .quadrature import quad
from .reduced_ode import (CertificationError, certify, fd4_derivative, truncation_extent,
                          uniform_spacing)
from .scaling import Z_VARS, ProfileSet, SolvableSystem


class EquivalenceError(ValueError):
    pass


@dataclass(frozen=True)
class EquivalentSpec:
    tilde_sigma: ex.Expr
    tilde_tau: ex.Expr

    @classmethod
    def parse(cls, tilde_sigma: str, tilde_tau: str, base: SolvableSystem) -> "EquivalentSpec":
        names = tuple(base.params) + ("alpha", "mu")
        return cls(ex.parse(tilde_sigma, Z_VARS, names), ex.parse(tilde_tau, Z_VARS, names))

    def __post_init__(self):
        for label in ("tilde_sigma", "tilde_tau"):
            if ex.depends_on(getattr(self, label), "y"):
                raise EquivalenceError(f"{label} may not depend on y")


def equivalent_rho(base: SolvableSystem, spec: EquivalentSpec) -> ex.Expr:
    """Symbolic r~ = r - d/dz[(s~ - s) y'] + d/dz[(t~ - t) y].

    The undifferentiated y stays a symbol (so a y-dependent reaction keeps
    its form); derivatives of y are taken from the closed form.
    """
    y_expr = base.y_expr
    if y_expr is None:
        raise EquivalenceError(
            "symbolic construction needs a closed-form y; use equivalent_rho_numeric")
    p = base.profiles
    y1 = ex.differentiate(y_expr, "z")
    d_sigma = ex.sub(spec.tilde_sigma, p.sigma)
    d_tau = ex.sub(spec.tilde_tau, p.tau)
    diffusive = ex.differentiate(ex.mul(d_sigma, y1), "z")
    convective = ex.add(ex.mul(ex.differentiate(d_tau, "z"), ex.Var("y")), ex.mul(d_tau, y1))
    return ex.add(ex.sub(p.rho, diffusive), convective)


def equivalent_system(base: SolvableSystem, spec: EquivalentSpec, *, tol: float = 1e-10,
                      name: Optional[str] = None) -> SolvableSystem:
    """Build the equivalent system and certify it (an internal error if it fails)."""
    rho = equivalent_rho(base, spec)
    profiles = ProfileSet(sigma=spec.tilde_sigma, tau=spec.tilde_tau, rho=rho,
                          domain=base.profiles.domain)
    sys = SolvableSystem(base.exponents, profiles, base.y, base.params,
                         name=name or f"{base.name}-equivalent", reaction=base.reaction)
    report = certify(sys, tol=tol)
    if not report.passed:
        raise CertificationError(
            f"equivalent system failed certification (residual {report.residual_max:.3e}); "
            "this indicates a differentiation error")
    return sys


def equivalent_rho_numeric(base: SolvableSystem, spec: EquivalentSpec, z) -> np.ndarray:
    """r~ sampled on a uniform z grid using fourth-order finite differences."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or len(z) < 9:
        raise EquivalenceError("grid too coarse: need at least 9 points")
    h = uniform_spacing(z)
    if not base.domain.contains(z):
        raise EquivalenceError("grid leaves the domain")
    b = base.bindings(z=z)

    def values(e):
        return np.broadcast_to(ex.evaluate(e, b), z.shape)

    p = base.profiles
    y = np.asarray(base.y(z), dtype=float)
    y1 = fd4_derivative(y, h)
    d_sigma = values(spec.tilde_sigma) - values(p.sigma)
    d_tau = values(spec.tilde_tau) - values(p.tau)
    rho = np.asarray(base.profile_values("rho", z, y=y), dtype=float)
    return rho - fd4_derivative(d_sigma * y1, h) + fd4_derivative(d_tau * y, h)


@dataclass(frozen=True)
class IdentityReport:
    lhs: float
    rhs: float
    difference: float
    window: tuple


def _balance(sys: SolvableSystem, lo: float, hi: float, tol: float) -> float:
    def flux(zz):
        return float(sys.profile_values("sigma", zz) * sys.y.derivative(zz, 1)
                     - sys.profile_values("tau", zz) * sys.y(zz))
    integral = quad(lambda zz: sys.profile_values("rho", zz), lo, hi, tol=tol, rtol=tol).value
    return integral + flux(hi) - flux(lo)


def continuity_identity_check(base: SolvableSystem, equivalent: SolvableSystem,
                              window: Optional[tuple] = None,
                              tol: float = 1e-12) -> IdentityReport:
    """Compare int r + Delta(s y' - t y) between two systems sharing y.

    Without a window the truncated domain of the base is used; systems whose
    profiles never decay need an explicit finite window.
    """
    if base.exponents != equivalent.exponents:
        raise EquivalenceError("systems must share alpha and mu")
    if window is None:
        ext = truncation_extent(base)
        if ext.divergent:
            raise EquivalenceError("base profile does not decay: pass a finite window")
        ext2 = truncation_extent(equivalent)
        window = (min(ext.lo, ext2.lo), max(ext.hi, ext2.hi))
    lo, hi = float(window[0]), float(window[1])
    lhs = _balance(base, lo, hi, tol)
    rhs = _balance(equivalent, lo, hi, tol)
    return IdentityReport(lhs, rhs, abs(lhs - rhs), (lo, hi))
