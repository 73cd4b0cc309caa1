"""Finite-difference integration of the full CDR equation.

    dW/dt = d/dx(D dW/dx) - d/dx(C W) + R

Space: conservative flux form with face-averaged D and centred, face-averaged
C W. Time: Crank-Nicolson for diffusion and convection; a reaction that is a
known source is averaged over the step (trapezoid), a W-dependent reaction is
advanced with Heun's method. Dirichlet data at both ends come from the
closed-form solution.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.integrate import trapezoid
from scipy.linalg import solve_banded

from .scaling import SolvableSystem, physical_fields, reaction_of_state, reconstruct_W

log = logging.getLogger(__name__)


class PDEDivergenceError(RuntimeError):
    def __init__(self, step: int, time: float):
        super().__init__(f"solution became non-finite at step {step} (t={time:.6g})")
        self.step = step
        self.time = time


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    nx: int
    t0: float
    t1: float
    nt: int

    def __post_init__(self):
        if self.nx < 9:
            raise ValueError("need nx >= 9")
        if not self.x_max > self.x_min:
            raise ValueError("need x_max > x_min")
        if not self.t0 > 0:
            raise ValueError("t0 must be positive")
        if self.t1 < self.t0:
            raise ValueError("need t1 >= t0")
        if self.nt < 1:
            raise ValueError("need nt >= 1")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def dt(self) -> float:
        return (self.t1 - self.t0) / self.nt

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    def refined(self, level: int) -> "Grid1D":
        """Grid with dx and dt halved ``level`` times."""
        k = 2 ** level
        return Grid1D(self.x_min, self.x_max, (self.nx - 1) * k + 1,
                      self.t0, self.t1, self.nt * k)


@dataclass
class GridField:
    x: np.ndarray
    times: List[float]
    values: List[np.ndarray]
    steps: int = 0

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]

    def mass(self) -> np.ndarray:
        """Trapezoid-rule particle number for each stored snapshot."""
        return np.array([trapezoid(v, self.x) for v in self.values])


@dataclass(frozen=True)
class ErrorReport:
    linf: float
    l2: float
    relative_linf: float
    converged: bool

    def to_dict(self) -> dict:
        return {"linf": self.linf, "l2": self.l2,
                "relative_linf": self.relative_linf, "converged": self.converged}


class _Operator:
    """Tridiagonal coefficients of the semi-discrete diffusion-convection operator."""

    def __init__(self, sys: SolvableSystem, x: np.ndarray, dx: float, t: float):
        c, d, r = physical_fields(sys, x, t)
        self.source = np.asarray(r, dtype=float)
        d_face = 0.5 * (d[:-1] + d[1:])
        inv2 = 1.0 / dx ** 2
        self.sub = d_face[:-1] * inv2 + c[:-2] / (2 * dx)
        self.diag = -(d_face[1:] + d_face[:-1]) * inv2
        self.sup = d_face[1:] * inv2 - c[2:] / (2 * dx)
        self.max_d = float(np.max(np.abs(d)))

    def apply(self, w: np.ndarray) -> np.ndarray:
        """L w on interior nodes."""
        return self.sub * w[:-2] + self.diag * w[1:-1] + self.sup * w[2:]


def _banded(op: _Operator, dt: float, n: int) -> np.ndarray:
    ab = np.zeros((3, n))
    ab[1, 0] = ab[1, -1] = 1.0
    ab[1, 1:-1] = 1.0 - 0.5 * dt * op.diag
    ab[0, 2:] = -0.5 * dt * op.sup
    ab[2, :-2] = -0.5 * dt * op.sub
    return ab


def integrate(sys: SolvableSystem, grid: Grid1D, snapshot_every: Optional[int] = None) -> GridField:
    """Advance W from the closed form at t0 to t1.

    Stores the initial and final states, plus every ``snapshot_every`` steps
    when given. Raises :class:`PDEDivergenceError` on non-finite values.
    """
    x = grid.x
    w = np.asarray(reconstruct_W(sys, x, grid.t0), dtype=float)
    out = GridField(x, [grid.t0], [w.copy()])
    if grid.t1 == grid.t0:
        return out
    n, dx, dt = grid.nx, grid.dx, grid.dt
    state = sys.reaction == "state"
    t = grid.t0
    op = _Operator(sys, x, dx, t)
    if state and dt > dx ** 2 / (2 * op.max_d):
        log.warning("explicit reaction step dt=%.3g exceeds dx^2/(2 max D)=%.3g",
                    dt, dx ** 2 / (2 * op.max_d))
    for step in range(1, grid.nt + 1):
        t_next = grid.t0 + step * dt
        op_next = _Operator(sys, x, dx, t_next)
        ab = _banded(op_next, dt, n)
        explicit = w[1:-1] + 0.5 * dt * op.apply(w)
        bc = reconstruct_W(sys, np.array([x[0], x[-1]]), t_next)
        rhs = np.empty(n)
        rhs[0], rhs[-1] = bc
        if state:
            # non-finite values are caught after the solve and reported with the step
            r_now = np.asarray(reaction_of_state(sys, w, x, t), dtype=float)
            rhs[1:-1] = explicit + dt * r_now[1:-1]
            w_pred = solve_banded((1, 1), ab, rhs, check_finite=False)
            r_pred = np.asarray(reaction_of_state(sys, w_pred, x, t_next), dtype=float)
            rhs[1:-1] = explicit + 0.5 * dt * (r_now[1:-1] + r_pred[1:-1])
        else:
            rhs[1:-1] = explicit + 0.5 * dt * (op.source[1:-1] + op_next.source[1:-1])
        w = solve_banded((1, 1), ab, rhs, check_finite=False)
        if not np.all(np.isfinite(w)):
            raise PDEDivergenceError(step, t_next)
        op, t = op_next, t_next
        if snapshot_every and step % snapshot_every == 0 and step != grid.nt:
            out.times.append(t)
            out.values.append(w.copy())
    out.times.append(grid.t1)
    out.values.append(w.copy())
    out.steps = grid.nt
    return out


def compare(f: GridField, sys: SolvableSystem) -> ErrorReport:
    """Error norms of the final snapshot against the closed form."""
    w = np.asarray(f.final, dtype=float)
    if not np.all(np.isfinite(w)):
        raise PDEDivergenceError(f.steps, f.times[-1])
    exact = np.asarray(reconstruct_W(sys, f.x, f.times[-1]), dtype=float)
    diff = np.abs(w - exact)
    dx = float(f.x[1] - f.x[0])
    linf = float(np.max(diff))
    l2 = float(np.sqrt(dx * np.sum(diff ** 2)))
    scale = float(np.max(np.abs(exact)))
    rel = linf / scale if scale > 0 else linf
    return ErrorReport(linf, l2, rel, True)


@dataclass(frozen=True)
class LevelResult:
    nx: int
    nt: int
    error: ErrorReport


@dataclass(frozen=True)
class ConvergenceReport:
    levels: tuple
    orders: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "levels": [{"nx": lv.nx, "nt": lv.nt, **lv.error.to_dict()} for lv in self.levels],
            "orders": list(self.orders),
        }


def _order(e_coarse: float, e_fine: float) -> Optional[float]:
    if e_coarse > 0 and e_fine > 0 and math.isfinite(e_coarse) and math.isfinite(e_fine):
        return math.log2(e_coarse / e_fine)
    return None


def refinement_study(sys: SolvableSystem, base_grid: Grid1D, levels: int) -> ConvergenceReport:
    """Errors on ``levels`` successively halved grids and the observed orders.

    An order is ``None`` when either error is zero (nothing to measure).
    """
    if levels < 1:
        raise ValueError("need at least one level")
    results = []
    for k in range(levels):
        g = base_grid.refined(k)
        results.append(LevelResult(g.nx, g.nt, compare(integrate(sys, g), sys)))
    orders = tuple(_order(a.error.linf, b.error.linf) for a, b in zip(results, results[1:]))
    return ConvergenceReport(tuple(results), orders)


def convergence_order(sys: SolvableSystem, base_grid: Grid1D, levels: int = 3) -> ConvergenceReport:
    if levels < 3:
        raise ValueError("convergence order estimates need at least 3 levels")
    return refinement_study(sys, base_grid, levels)
