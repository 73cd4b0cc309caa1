"""Scaling exponents, similarity variable and physical-space reconstruction.

With the similarity variable z = x / t^alpha the fields take the forms

    W = t^mu y(z),  C = t^(alpha-1) tau(z),  D = t^(2 alpha-1) sigma(z),
    R = t^(mu-1) rho(z, y(z)),

so alpha and mu are the only free exponents.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from . import expr as ex


class ScalingError(ValueError):
    pass


# --------------------------------------------------------------------------
# Exponents


@dataclass(frozen=True)
class ExponentSet:
    alpha: float
    mu: float
    gamma: float
    delta: float
    rho_exp: float

    @property
    def conserving(self) -> bool:
        return self.alpha + self.mu == 0


def derive_exponents(alpha: float, mu: float) -> ExponentSet:
    alpha, mu = float(alpha), float(mu)
    if not (math.isfinite(alpha) and math.isfinite(mu)):
        raise ScalingError(f"exponents must be finite, got alpha={alpha}, mu={mu}")
    return ExponentSet(alpha=alpha, mu=mu, gamma=alpha - 1.0,
                       delta=2.0 * alpha - 1.0, rho_exp=mu - 1.0)


def similarity_variable(x, t, alpha: float):
    """z = x / t^alpha (t > 0)."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ScalingError("time must be positive")
    z = np.asarray(x, dtype=float) / t ** alpha
    return float(z) if np.ndim(z) == 0 else z


# --------------------------------------------------------------------------
# Domains and profiles


class DomainKind(str, enum.Enum):
    REAL_LINE = "real_line"
    HALF_LINE = "half_line"


@dataclass(frozen=True)
class DomainSpec:
    kind: DomainKind = DomainKind.REAL_LINE

    def __post_init__(self):
        object.__setattr__(self, "kind", DomainKind(self.kind))

    @property
    def lower(self) -> float:
        return 0.0 if self.kind is DomainKind.HALF_LINE else -math.inf

    def contains(self, x) -> bool:
        return bool(np.all(np.asarray(x) >= self.lower))


REAL_LINE = DomainSpec(DomainKind.REAL_LINE)
HALF_LINE = DomainSpec(DomainKind.HALF_LINE)

Z_VARS = ("z",)
ZY_VARS = ("z", "y")


@dataclass(frozen=True)
class ProfileSet:
    """Reduced diffusion (sigma), convection (tau) and reaction (rho) profiles.

    ``rho`` may depend on ``y``; ``rho_bar`` satisfies rho = -d(rho_bar)/dz
    along the solution, ``drift_beta`` gives rho_bar = beta*y and ``g`` is the
    free function of the z^2-diffusion family.
    """

    sigma: ex.Expr
    tau: ex.Expr
    rho: ex.Expr
    domain: DomainSpec = REAL_LINE
    rho_bar: Optional[ex.Expr] = None
    drift_beta: Optional[ex.Expr] = None
    g: Optional[ex.Expr] = None
    d_sigma: ex.Expr = field(init=False, repr=False, compare=False)
    d_tau: ex.Expr = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("sigma", "tau", "drift_beta", "g"):
            e = getattr(self, name)
            if e is not None and ex.depends_on(e, "y"):
                raise ScalingError(f"{name} may not depend on y")
        object.__setattr__(self, "d_sigma", ex.differentiate(self.sigma, "z"))
        object.__setattr__(self, "d_tau", ex.differentiate(self.tau, "z"))


# --------------------------------------------------------------------------
# Similarity profiles y(z)


class ExprProfile:
    """Closed-form y(z) with symbolic first and second derivatives."""

    def __init__(self, expr: ex.Expr, params: Mapping[str, float]):
        if ex.depends_on(expr, "y"):
            raise ScalingError("the similarity profile may not reference y")
        self.expr = expr
        self.params = dict(params)
        self.d1 = ex.differentiate(expr, "z")
        self.d2 = ex.differentiate(self.d1, "z")

    def _eval(self, e, z):
        out = ex.evaluate(e, {**self.params, "z": z})
        if np.ndim(z) and np.ndim(out) == 0:
            out = np.full(np.shape(z), out)
        return out

    def __call__(self, z):
        return self._eval(self.expr, z)

    def derivative(self, z, order: int = 1):
        if order == 1:
            return self._eval(self.d1, z)
        if order == 2:
            return self._eval(self.d2, z)
        raise ValueError("only first and second derivatives are available")


@dataclass(frozen=True)
class SolvableSystem:
    """Profiles, exponents and a similarity solution y.

    ``y`` is an :class:`ExprProfile` for closed forms or any object with the
    same call/derivative interface (quadrature-built profiles).
    ``reaction`` selects how the PDE verifier treats R: ``"source"``
    substitutes the known solution, ``"state"`` keeps R a function of W.
    """

    exponents: ExponentSet
    profiles: ProfileSet
    y: object
    params: Mapping[str, float]
    name: str = "custom"
    reaction: str = "source"
    family: Optional[str] = None

    def __post_init__(self):
        if self.reaction not in ("source", "state"):
            raise ScalingError(f"reaction mode must be 'source' or 'state', got {self.reaction!r}")

    @property
    def alpha(self) -> float:
        return self.exponents.alpha

    @property
    def mu(self) -> float:
        return self.exponents.mu

    @property
    def y_expr(self) -> Optional[ex.Expr]:
        return getattr(self.y, "expr", None)

    @property
    def domain(self) -> DomainSpec:
        return self.profiles.domain

    def bindings(self, **extra) -> dict:
        return {**self.params, "alpha": self.alpha, "mu": self.mu, **extra}

    def profile_values(self, name: str, z, y=None):
        """Evaluate one of the reduced profiles at z (and y where needed)."""
        e = getattr(self.profiles, name)
        if e is None:
            raise ScalingError(f"system has no {name} profile")
        b = self.bindings(z=z)
        if ex.depends_on(e, "y"):
            b["y"] = self.y(z) if y is None else y
        out = ex.evaluate(e, b)
        if np.ndim(z) and np.ndim(out) == 0:
            out = np.full(np.shape(z), out)
        return out


# --------------------------------------------------------------------------
# Physical-space fields


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ScalingError("time must be positive")
    return t


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


def reconstruct_W(sys: SolvableSystem, x, t):
    """W(x, t) = t^mu y(x / t^alpha)."""
    t = _check_t(t)
    if not sys.domain.contains(x):
        raise ScalingError(f"x outside the {sys.domain.kind.value} domain")
    z = np.asarray(x, dtype=float) / t ** sys.alpha
    return _scalar(t ** sys.mu * sys.y(_scalar(z)))


def physical_fields(sys: SolvableSystem, x, t):
    """(C, D, R) at (x, t) from the reduced profiles."""
    t = _check_t(t)
    z = _scalar(np.asarray(x, dtype=float) / t ** sys.alpha)
    e = sys.exponents
    c = t ** e.gamma * sys.profile_values("tau", z)
    d = t ** e.delta * sys.profile_values("sigma", z)
    r = t ** e.rho_exp * sys.profile_values("rho", z)
    return _scalar(c), _scalar(d), _scalar(r)


def reaction_of_state(sys: SolvableSystem, w, x, t):
    """R(W, x, t) = t^(mu-1) rho(z, t^-mu W): the reaction as a function of W."""
    t = _check_t(t)
    z = np.asarray(x, dtype=float) / t ** sys.alpha
    y = np.asarray(w, dtype=float) * t ** (-sys.mu)
    return _scalar(t ** sys.exponents.rho_exp * sys.profile_values("rho", z, y=y))


@dataclass(frozen=True)
class ScalingReport:
    max_relative_deviation: float
    per_field: dict
    samples: int


def _rel_dev(lhs, rhs):
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    scale = np.maximum(np.abs(lhs), np.abs(rhs))
    diff = np.abs(lhs - rhs)
    with np.errstate(all="ignore"):
        out = np.where(scale > 0, diff / np.where(scale > 0, scale, 1.0), 0.0)
    out = np.where(np.isnan(diff), np.inf, out)
    return float(np.max(out)) if out.size else 0.0


def scaling_symmetry_check(sys: SolvableSystem, epsilon: float, a: float, b: float,
                           samples: Sequence) -> ScalingReport:
    """Check W, C, D, R against the scale transformation x -> eps^a x, t -> eps^b t.

    W picks up eps^(mu b), C eps^(b(alpha-1)), D eps^(b(2 alpha-1)) and
    R eps^(b(mu-1)). Returns the largest relative deviation over samples.
    """
    if b == 0:
        raise ScalingError("b must be nonzero")
    if epsilon <= 0:
        raise ScalingError("epsilon must be positive")
    if abs(a / b - sys.alpha) > 1e-12 * max(1.0, abs(sys.alpha)):
        raise ScalingError(f"a/b = {a / b} does not match alpha = {sys.alpha}")
    pts = np.asarray(samples, dtype=float).reshape(-1, 2)
    x, t = pts[:, 0], pts[:, 1]
    xs, ts = epsilon ** a * x, epsilon ** b * t
    e = sys.exponents
    w0, w1 = reconstruct_W(sys, x, t), reconstruct_W(sys, xs, ts)
    c0, d0, r0 = physical_fields(sys, x, t)
    c1, d1, r1 = physical_fields(sys, xs, ts)
    per_field = {
        "W": _rel_dev(w1, epsilon ** (e.mu * b) * w0),
        "C": _rel_dev(c1, epsilon ** (e.gamma * b) * c0),
        "D": _rel_dev(d1, epsilon ** (e.delta * b) * d0),
        "R": _rel_dev(r1, epsilon ** (e.rho_exp * b) * r0),
    }
    return ScalingReport(max(per_field.values()), per_field, len(pts))
