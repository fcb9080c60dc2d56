"""Exact line search for objectives that are quartic along lines.

The line restriction p(t) = f(x + t d) of a degree-4 polynomial objective is
itself a quartic, so the exact step argmin_{t >= 0} p(t) only needs the real
roots of the cubic p'.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Protocol

import numpy as np


@dataclass(frozen=True)
class QuarticPoly:
    """p(t) = c4 t^4 + c3 t^3 + c2 t^2 + c1 t + c0."""

    c4: float
    c3: float
    c2: float
    c1: float
    c0: float

    @property
    def coeffs(self) -> tuple[float, float, float, float, float]:
        return (self.c4, self.c3, self.c2, self.c1, self.c0)

    def __call__(self, t):
        return (((self.c4 * t + self.c3) * t + self.c2) * t + self.c1) * t + self.c0

    def derivative(self, t):
        return ((4.0 * self.c4 * t + 3.0 * self.c3) * t + 2.0 * self.c2) * t + self.c1

    def second_derivative(self, t):
        return (12.0 * self.c4 * t + 6.0 * self.c3) * t + 2.0 * self.c2

    def scaled(self, factor: float) -> "QuarticPoly":
        return QuarticPoly(*(factor * c for c in self.coeffs))


@dataclass(frozen=True)
class LineSearchResult:
    t_star: float
    p_at_t: float
    candidates: tuple = ()


class UnboundedLineSearch(ValueError):
    """The line restriction is unbounded below on t >= 0."""


def _quadratic_roots(a: float, b: float, c: float) -> list[float]:
    if a == 0.0:
        return [] if b == 0.0 else [-c / b]
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return []
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    roots = [q / a]
    if q != 0.0:
        roots.append(c / q)
    return roots


def _companion_roots(coeffs) -> list[float]:
    roots = np.roots(coeffs)
    scale = max(1.0, float(np.max(np.abs(roots)))) if roots.size else 1.0
    return [float(r.real) for r in roots if abs(r.imag) <= 1e-7 * scale]


def _cbrt(v: float) -> float:
    return math.copysign(abs(v) ** (1.0 / 3.0), v)


def cubic_real_roots(a: float, b: float, c: float, d: float,
                     degenerate_tol: float = 1e-12) -> list[float]:
    """Real roots of a t^3 + b t^2 + c t + d, polished with Newton steps.

    Closed form on the depressed cubic; when the discriminant is within
    ``degenerate_tol`` (relative) of zero the roots come from a companion
    matrix eigensolve instead.
    """
    if a == 0.0:
        return _quadratic_roots(b, c, d)
    B, C, D = b / a, c / a, d / a
    shift = B / 3.0
    p = C - B * B / 3.0
    q = 2.0 * B ** 3 / 27.0 - B * C / 3.0 + D
    disc = 4.0 * p ** 3 + 27.0 * q * q  # -(discriminant)
    size = 4.0 * abs(p) ** 3 + 27.0 * q * q
    if size == 0.0:
        roots = [-shift]
    elif abs(disc) <= degenerate_tol * size:
        roots = _companion_roots([1.0, B, C, D])
    elif disc > 0.0:
        # one real root (Cardano)
        r = math.sqrt(disc / 108.0)
        u = _cbrt(-q / 2.0 + r) if q <= 0 else _cbrt(-q / 2.0 - r)
        y = u - p / (3.0 * u) if u != 0.0 else _cbrt(-q)
        roots = [y - shift]
    else:
        m = 2.0 * math.sqrt(-p / 3.0)
        arg = 3.0 * q / (p * m)
        phi = math.acos(max(-1.0, min(1.0, arg))) / 3.0
        roots = [m * math.cos(phi - 2.0 * math.pi * k / 3.0) - shift for k in range(3)]

    def f(t):
        return ((a * t + b) * t + c) * t + d

    def df(t):
        return (3.0 * a * t + 2.0 * b) * t + c

    polished = []
    for t in roots:
        for _ in range(3):
            g = df(t)
            if g == 0.0:
                break
            t_new = t - f(t) / g
            if abs(f(t_new)) >= abs(f(t)):
                break
            t = t_new
        polished.append(t)
    return polished


def _check_bounded(q: QuarticPoly) -> None:
    # sign of the leading nonzero coefficient decides behaviour as t -> inf
    for c in q.coeffs[:-1]:
        if c != 0.0:
            if c < 0.0:
                raise UnboundedLineSearch(f"{q} is unbounded below on t >= 0")
            return


def minimize_quartic_nonneg(q: QuarticPoly) -> LineSearchResult:
    """Global minimiser of ``q`` over t >= 0.

    Candidates are t = 0 and the nonnegative real stationary points; the
    smallest value wins and ties go to the smaller t.  Raises
    :class:`UnboundedLineSearch` if ``q`` is unbounded below on t >= 0.
    """
    _check_bounded(q)
    crit = cubic_real_roots(4.0 * q.c4, 3.0 * q.c3, 2.0 * q.c2, q.c1)
    cands = sorted({0.0, *(t for t in crit if t > 0.0 and math.isfinite(t))})
    best_t, best_v = 0.0, q(0.0)
    for t in cands[1:]:
        v = q(t)
        if v < best_v:
            best_t, best_v = t, v
    return LineSearchResult(best_t, best_v, tuple(cands))


class Objective(Protocol):
    """Anything with a value and a gradient.

    Objectives may also provide ``line_quartic(x, d)`` returning the exact
    :class:`QuarticPoly` of t -> f(x + t d), and ``direction_and_quartic(x)``
    returning (d, grad_norm, quartic) with d = -grad f(x) in one pass.
    """

    def value(self, x: np.ndarray) -> float: ...

    def grad(self, x: np.ndarray) -> np.ndarray: ...


_FIT_NODES = np.array([-1.0, -0.5, 0.0, 0.5, 1.0])


def quartic_from_samples(f, x: np.ndarray, d: np.ndarray) -> QuarticPoly:
    """Interpolate t -> f(x + t d) at five nodes; exact for degree <= 4."""
    vals = [f(x + t * d) for t in _FIT_NODES]
    return QuarticPoly(*np.linalg.solve(np.vander(_FIT_NODES, 5), vals))


def line_restriction(obj: Objective, x: np.ndarray, d: np.ndarray) -> QuarticPoly:
    """Quartic p(t) = f(x + t d), with d the (descent) search direction."""
    if hasattr(obj, "line_quartic"):
        return obj.line_quartic(x, d)
    return quartic_from_samples(obj.value, x, d)


@dataclass
class GenericTrajectory:
    xs: list = field(default_factory=list)
    values: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    converged: bool = False
    stalled: bool = False

    @property
    def iterations(self) -> int:
        return len(self.steps)

    @property
    def x(self) -> np.ndarray:
        return self.xs[-1]


def _direction(obj, x):
    if hasattr(obj, "direction_and_quartic"):
        return obj.direction_and_quartic(x)
    g = obj.grad(x)
    d = -g
    return d, float(np.linalg.norm(g)), None


def els_gd_generic(obj: Objective, x0: np.ndarray, tol_grad: float = 1e-10,
                   max_k: int = 10_000, f_tol: Optional[float] = None,
                   stop=None) -> GenericTrajectory:
    """Gradient descent with exact line search on a quartic-along-lines objective.

    Iterates d = -grad f(x), t* = argmin_{t >= 0} f(x + t d), x <- x + t* d
    until ||grad f|| <= tol_grad, f <= f_tol, ``stop(x)`` returns True, or
    ``max_k`` steps.  A zero step with a nonzero gradient ends the run with
    ``stalled=True``.
    """
    x = np.array(x0, dtype=float)
    traj = GenericTrajectory()
    exact = hasattr(obj, "line_quartic") or hasattr(obj, "direction_and_quartic")
    for k in range(max_k + 1):
        d, gnorm, quartic = _direction(obj, x)
        if quartic is None:
            quartic = line_restriction(obj, x, d)
        # an exact line quartic carries f(x) as its constant term
        fx = quartic.c0 if exact else float(obj.value(x))
        traj.xs.append(x.copy())
        traj.values.append(fx)
        traj.grad_norms.append(gnorm)
        if (gnorm <= tol_grad or (f_tol is not None and fx <= f_tol)
                or (stop is not None and stop(x))):
            traj.converged = True
            break
        if k == max_k:
            break
        t = minimize_quartic_nonneg(quartic).t_star
        if t == 0.0:
            traj.stalled = True
            break
        x = x + t * d
        traj.steps.append(t)
    return traj


def constant_step_generic(obj: Objective, x0: np.ndarray, step: float,
                          tol_grad: float = 1e-10, max_k: int = 10_000,
                          f_tol: Optional[float] = None, stop=None) -> GenericTrajectory:
    """Plain GD x <- x - step * grad f(x), same stopping rules as the exact one."""
    x = np.array(x0, dtype=float)
    traj = GenericTrajectory()
    for k in range(max_k + 1):
        g = obj.grad(x)
        gnorm = float(np.linalg.norm(g))
        fx = float(obj.value(x))
        traj.xs.append(x.copy())
        traj.values.append(fx)
        traj.grad_norms.append(gnorm)
        if (gnorm <= tol_grad or (f_tol is not None and fx <= f_tol)
                or (stop is not None and stop(x))):
            traj.converged = True
            break
        if k == max_k:
            break
        x = x - step * g
        traj.steps.append(step)
    return traj
