"""Catalog of exactly solvable CDR families.

Each family fixes sigma, tau, rho and a closed-form similarity profile y in
terms of a few parameters; instantiating one certifies the reduced ODE
residual before the system is handed out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from . import expr as ex
from .quadrature import exp_integral_profile
from .reduced_ode import require_certified
from .scaling import (HALF_LINE, REAL_LINE, ZY_VARS, Z_VARS, DomainSpec, ExprProfile,
                      ProfileSet, SolvableSystem, derive_exponents)


class FamilyError(ValueError):
    pass


class ContinuityViolation(FamilyError):
    """Parameters for which the boundary condition Delta(alpha z y) = 0 fails."""


@dataclass(frozen=True)
class ParamSpec:
    name: str
    default: float
    constraint: str = "any"  # "positive", "nonzero" or "any"

    def check(self, value: float) -> None:
        if not math.isfinite(value):
            raise FamilyError(f"parameter {self.name} must be finite")
        if self.constraint == "positive" and not value > 0:
            raise FamilyError(f"parameter {self.name} must be > 0, got {value}")
        if self.constraint == "nonzero" and value == 0:
            raise FamilyError(f"parameter {self.name} must be nonzero")

    def describe(self) -> str:
        rule = {"positive": ">0", "nonzero": "!=0", "any": ""}[self.constraint]
        return f"{self.name}{rule} (default {self.default:g})"


@dataclass(frozen=True)
class FamilyDescriptor:
    id: str
    summary: str
    params: tuple
    domain: DomainSpec
    conserving: bool
    alpha_fixed: Optional[float] = None
    pde_xrange: Optional[tuple] = None

    @property
    def param_names(self) -> tuple:
        return tuple(p.name for p in self.params)


_CATALOG = (
    FamilyDescriptor(
        "example1", "sigma=1, tau=alpha z, y=exp(-c z^2/2)",
        (ParamSpec("c", 1.0, "positive"),), REAL_LINE, conserving=False),
    FamilyDescriptor(
        "example2", "sigma=beta z, tau=(alpha-beta a) z+beta, y=z exp(-a z)",
        (ParamSpec("a", 2.0, "positive"), ParamSpec("beta", 0.3, "nonzero")),
        HALF_LINE, conserving=False, pde_xrange=(0.0, 25.0)),
    FamilyDescriptor(
        "example3", "sigma=-(alpha+mu) z^2/2, tau=-mu z, y=exp(int g), g=-k z by default",
        (ParamSpec("k", 1.0, "positive"),), REAL_LINE, conserving=False),
    FamilyDescriptor(
        "example4_nonlinear", "sigma=1, tau const, y=1/(sqrt(lambda/2) z+C)",
        (ParamSpec("lambda", 2.0, "positive"), ParamSpec("C", 3.0, "positive"),
         ParamSpec("tau", 2.4)),
        HALF_LINE, conserving=False, alpha_fixed=0.0, pde_xrange=(0.5, 30.0)),
)

_BY_ID = {d.id: d for d in _CATALOG}

# reference parameter sets for the two plot-data examples
FIG1 = {"alpha": 0.5, "mu": 1.0, "params": {"a": 2.0, "beta": 0.3}}
FIG2 = {"alpha": 0.0, "mu": 1.3, "params": {"lambda": 2.0, "C": 3.0, "tau": 2.4}}

_TEMPLATES = {
    "example1": dict(
        sigma="1", tau="alpha*z",
        rho="(-c^2*z^2 + c + alpha + mu)*y",
        y="exp(-0.5*c*z^2)"),
    "example2": dict(
        sigma="beta*z", tau="(alpha - beta*a)*z + beta",
        rho="(alpha + mu)*z*exp(-a*z)",
        y="z*exp(-a*z)"),
    "example4_nonlinear": dict(
        sigma="1", tau="tau",
        rho="mu*y + (alpha*z - tau)*sqrt(lambda/2)*y^2 - lambda*y^3",
        y="1/(sqrt(lambda/2)*z + C)"),
}

EXAMPLE3_WINDOW = 40.0
EXAMPLE3_DECAY = 1e-10


def catalog() -> list:
    return list(_CATALOG)


def descriptor(family_id: str) -> FamilyDescriptor:
    try:
        return _BY_ID[family_id]
    except KeyError:
        known = ", ".join(_BY_ID)
        raise FamilyError(f"unknown family {family_id!r} (known: {known})") from None


def _resolve_params(desc: FamilyDescriptor, params: Mapping[str, float]) -> dict:
    unknown = set(params) - set(desc.param_names)
    if unknown:
        raise FamilyError(f"{desc.id} does not take parameters {sorted(unknown)}")
    out = {}
    for spec in desc.params:
        value = float(params.get(spec.name, spec.default))
        spec.check(value)
        out[spec.name] = value
    return out


def instantiate(family_id: str, params: Optional[Mapping[str, float]] = None,
                alpha: float = 0.0, mu: float = 0.0, *, g=None,
                name: Optional[str] = None) -> SolvableSystem:
    """Build and certify one catalog system.

    ``g`` (example3 only) replaces the default g(z) = -k z; it may be an
    expression string or tree in z and the family parameters.
    """
    desc = descriptor(family_id)
    p = _resolve_params(desc, params or {})
    exponents = derive_exponents(alpha, mu)
    if desc.alpha_fixed is not None and exponents.alpha != desc.alpha_fixed:
        raise ContinuityViolation(
            f"{family_id} requires alpha = {desc.alpha_fixed:g}: with y ~ 1/z the "
            f"continuity condition Delta(alpha z y) = 0 fails at infinity "
            f"for alpha = {exponents.alpha:g}")
    if g is not None and family_id != "example3":
        raise FamilyError("only example3 takes a g function")
    names = tuple(p) + ("alpha", "mu")

    if family_id == "example3":
        profiles, y, p = _example3(p, exponents, g, names)
    else:
        t = _TEMPLATES[family_id]
        profiles = ProfileSet(
            sigma=ex.parse(t["sigma"], Z_VARS, names),
            tau=ex.parse(t["tau"], Z_VARS, names),
            rho=ex.parse(t["rho"], ZY_VARS, names),
            domain=desc.domain)
        y = ExprProfile(ex.parse(t["y"], Z_VARS, names),
                        {**p, "alpha": exponents.alpha, "mu": exponents.mu})

    reaction = "state" if family_id == "example4_nonlinear" else "source"
    sys = SolvableSystem(exponents, profiles, y, p, name=name or family_id,
                         reaction=reaction, family=family_id)
    require_certified(sys)
    return sys


def _example3(p, exponents, g, names):
    s = exponents.alpha + exponents.mu
    if s == 0:
        raise FamilyError("example3 requires alpha + mu != 0 (sigma would vanish)")
    bind = {**p, "alpha": exponents.alpha, "mu": exponents.mu}
    if g is None:
        g_expr = ex.parse("-k*z", Z_VARS, names)
        y = ExprProfile(ex.parse("exp(-0.5*k*z^2)", Z_VARS, names), bind)
    else:
        g_expr = ex.parse(g, Z_VARS, names) if isinstance(g, str) else g
        if ex.depends_on(g_expr, "y"):
            raise FamilyError("g must be a function of z only")
        y = exp_integral_profile(g_expr, 0.0, params=bind,
                                 window=(-EXAMPLE3_WINDOW, EXAMPLE3_WINDOW))
    edges = np.array([-EXAMPLE3_WINDOW, EXAMPLE3_WINDOW])
    tails = np.abs(np.asarray(y(edges), dtype=float))
    if not np.all(tails <= EXAMPLE3_DECAY):
        raise FamilyError(
            "example3 needs int g -> -infinity at both ends; "
            f"|y(+-{EXAMPLE3_WINDOW:g})| = {tails.max():.3g}")
    dg = ex.differentiate(g_expr, "z")
    half_s = ex.mul(ex.num(0.5), ex.BinOp("+", ex.Param("alpha"), ex.Param("mu")))
    z2 = ex.power(ex.Var("z"), ex.Num(2.0))
    rho = ex.mul(ex.mul(ex.mul(half_s, z2),
                        ex.add(ex.power(g_expr, ex.Num(2.0)), dg)), ex.Var("y"))
    profiles = ProfileSet(
        sigma=ex.parse("-0.5*(alpha + mu)*z^2", Z_VARS, names),
        tau=ex.parse("-mu*z", Z_VARS, names),
        rho=rho, domain=REAL_LINE, g=g_expr)
    return profiles, y, p


def custom_system(sigma, tau, rho, y, params: Optional[Mapping[str, float]] = None,
                  alpha: float = 0.0, mu: float = 0.0, domain="real_line", *,
                  rho_bar=None, name: str = "custom", reaction: str = "source",
                  certify_now: bool = True) -> SolvableSystem:
    """A system from user expressions (strings or trees).

    sigma, tau and y are functions of z; rho and rho_bar may also use y.
    Parameter names come from ``params`` plus ``alpha`` and ``mu``.
    """
    p = {k: float(v) for k, v in (params or {}).items()}
    for reserved in ("alpha", "mu", "z", "y"):
        if reserved in p:
            raise FamilyError(f"{reserved!r} is reserved and cannot be a parameter")
    names = tuple(p) + ("alpha", "mu")

    def to_expr(e, variables):
        return ex.parse(e, variables, names) if isinstance(e, str) else e

    exponents = derive_exponents(alpha, mu)
    dom = domain if isinstance(domain, DomainSpec) else DomainSpec(domain)
    profiles = ProfileSet(
        sigma=to_expr(sigma, Z_VARS), tau=to_expr(tau, Z_VARS),
        rho=to_expr(rho, ZY_VARS), domain=dom,
        rho_bar=None if rho_bar is None else to_expr(rho_bar, ZY_VARS))
    y_profile = y if hasattr(y, "derivative") else ExprProfile(
        to_expr(y, Z_VARS), {**p, "alpha": exponents.alpha, "mu": exponents.mu})
    sys = SolvableSystem(exponents, profiles, y_profile, p, name=name, reaction=reaction)
    if certify_now:
        require_certified(sys)
    return sys
