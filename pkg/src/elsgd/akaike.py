"""Akaike's simplex representation of exact line-search GD.

A nonzero state x is identified, up to scaling and sign flips, with the
probability vector p_i = lambda_i^2 x_i^2 / sum_j lambda_j^2 x_j^2.  In these
coordinates one GD step becomes the map

    T(p)_i = p_i (mean(p) - lambda_i)^2 / var(p),

which pushes all mass onto the two extremal eigenvalues and settles into a
2-cycle [1-s, 0, ..., 0, s] <-> [s, 0, ..., 0, 1-s].  The limit probability
s determines the rate of convergence of the run.

Conventions: ``s`` in :class:`LimitResult` is the mass on the smallest
eigenvalue.  The Jacobian routines take the mass on the *largest* eigenvalue
(the first coordinate of the reduced map), as the stability analysis is
symmetric under s -> 1 - s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .quadratic import Spectrum, _check_dim


def sigma(x: np.ndarray, s: Spectrum) -> np.ndarray:
    x = _check_dim(x, s)
    if not np.any(x):
        raise ValueError("sigma is undefined at the origin")
    w = (s.values / s.lmax * x / np.max(np.abs(x))) ** 2
    return w / w.sum()


def sigma_inv(p: np.ndarray, s: Spectrum) -> np.ndarray:
    """Representative x_j = sqrt(p_j) / lambda_j of the class sigma^-1(p)."""
    p = _check_simplex(p, s)
    return np.sqrt(p) / s.values


def _check_simplex(p, s: Spectrum, tol: float = 1e-12) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (s.n,):
        raise ValueError(f"probability vector has shape {p.shape}, expected ({s.n},)")
    if np.any(p < 0) or abs(p.sum() - 1.0) > tol:
        raise ValueError(f"{p} is not on the probability simplex")
    return p


def _require_distinct(s: Spectrum) -> None:
    if s.n < 2 or s.has_ties:
        raise ValueError("Akaike's map needs n >= 2 distinct eigenvalues")


def _t_rows(P: np.ndarray, unit: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise T on a 2-d array; also returns the unnormalised variances.

    ``unit`` holds the eigenvalues mapped affinely onto [0, 1]; T is
    invariant under affine changes of the eigenvalues.
    """
    mean = P @ unit
    W = P * (mean[:, None] - unit[None, :]) ** 2
    var = W.sum(axis=1)
    # vertices have zero variance; callers check ``var`` themselves
    with np.errstate(invalid="ignore", divide="ignore"):
        return W / var[:, None], var


def t_map_batch(P: np.ndarray, s: Spectrum) -> np.ndarray:
    """Apply T to every row of ``P`` (rows must lie in dom(T))."""
    _require_distinct(s)
    out, _ = _t_rows(np.asarray(P, dtype=float), s.unit)
    return out


def t_map(p: np.ndarray, s: Spectrum) -> np.ndarray:
    _require_distinct(s)
    p = _check_simplex(p, s)
    out, var = _t_rows(p[None, :], s.unit)
    if not var[0] > 0:
        raise ValueError(f"{p} is a vertex of the simplex; T is undefined there")
    return out[0]


def variance(p: np.ndarray, s: Spectrum) -> float:
    """Variance of the eigenvalue distribution that puts mass p_i on lambda_i."""
    p = _check_simplex(p, s)
    mean = float(p @ s.values)
    return float(p @ (s.values - mean) ** 2)


@dataclass(frozen=True)
class LimitResult:
    s: float
    iterations: int
    residual: float
    roc: float
    converged: bool
    middle_mass: float = 0.0


def limit_probabilities(P0: np.ndarray, s: Spectrum, tol: float = 1e-12,
                        max_iter: int = 1_000_000):
    """Iterate T^2 on each row of ``P0`` until it reaches its 2-cycle.

    A row is converged once one T^2 step moves it by at most ``tol`` in the
    sup norm and its intermediate coordinates are all at most ``tol``.  Rows
    with p_1 = 0 or p_n = 0 can never lose their intermediate mass; they
    stop, unconverged, once they are stationary.

    Returns
    -------
    limit_s : ndarray
        Mass on lambda_n of the even-subsequence limit (last iterate for
        unconverged rows).
    iterations : ndarray of int
        Number of T^2 applications before convergence was detected.
    residual : ndarray
        Final sup-norm displacement of one T^2 step.
    middle : ndarray
        Final maximum intermediate coordinate.
    converged : ndarray of bool
    """
    _require_distinct(s)
    P = np.array(P0, dtype=float, ndmin=2)
    N = P.shape[0]
    limit_s = np.empty(N)
    iterations = np.full(N, max_iter, dtype=np.int64)
    residual = np.empty(N)
    middle = np.empty(N)
    converged = np.zeros(N, dtype=bool)
    active = np.arange(N)
    unit = s.unit
    for k in range(max_iter + 1):
        Q, _ = _t_rows(P, unit)
        Q, _ = _t_rows(Q, unit)
        res = np.max(np.abs(Q - P), axis=1)
        mid = np.max(P[:, 1:-1], axis=1, initial=0.0)
        good = (res <= tol) & (mid <= tol)
        # a 2-cycle that keeps intermediate mass (only when p_1 or p_n is
        # zero, and T preserves zeros) is stationary too but is not the
        # Akaike limit; such rows stop as soon as they stop moving
        stuck = (res <= tol) & ((P[:, 0] == 0.0) | (P[:, -1] == 0.0))
        done = good | stuck
        if k == max_iter:
            done[:] = True
        idx = active[done]
        limit_s[idx] = P[done, -1]
        residual[idx] = res[done]
        middle[idx] = mid[done]
        converged[idx] = good[done]
        iterations[idx] = k
        keep = ~done
        active, P = active[keep], Q[keep]
        # renormalise to stop drift off the simplex
        P /= P.sum(axis=1, keepdims=True)
        if active.size == 0:
            break
    return limit_s, iterations, residual, middle, converged


def limit_probability(p0: np.ndarray, s: Spectrum, tol: float = 1e-12,
                      max_iter: int = 1_000_000) -> LimitResult:
    """Limit probability of the even subsequence T^{2k}(p0).

    Non-convergence within ``max_iter`` is reported through
    ``LimitResult.converged``, never raised.
    """
    p0 = _check_simplex(p0, s)
    if np.count_nonzero(p0) < 2:
        raise ValueError(f"{p0} is a vertex of the simplex; T is undefined there")
    ls, it, res, mid, ok = limit_probabilities(p0, s, tol, max_iter)
    sv = float(ls[0])
    return LimitResult(s=sv, iterations=int(it[0]), residual=float(res[0]),
                       roc=float(roc_from_s(sv, s.a)), converged=bool(ok[0]),
                       middle_mass=float(mid[0]))


def roc_from_s(sv, a):
    """Rate of convergence for limit probability ``sv``.

    sqrt(1 - 1/((1 - s + s a)(1 - s + s/a))), evaluated as sqrt(q / (1 + q))
    with q = s (1 - s) (1 - a)^2 / a to avoid cancellation.  Symmetric under
    s -> 1 - s; works elementwise on arrays.
    """
    sv = np.asarray(sv, dtype=float)
    q = sv * (1.0 - sv) * (1.0 - a) ** 2 / a
    out = np.sqrt(q / (1.0 + q))
    return float(out) if out.ndim == 0 else out


def theta_from_s(sv, a):
    """Limit angle atan(sqrt(s / (1 - s)) / a), in [0, pi/2]."""
    sv = np.asarray(sv, dtype=float)
    out = np.arctan2(np.sqrt(sv), a * np.sqrt(1.0 - sv))
    return float(out) if out.ndim == 0 else out


def s_from_theta(theta, a):
    theta = np.asarray(theta, dtype=float)
    num = (a * np.sin(theta)) ** 2
    out = num / (np.cos(theta) ** 2 + num)
    return float(out) if out.ndim == 0 else out


def theta_map(q: np.ndarray, s: Spectrum) -> np.ndarray:
    """T written in the first n-1 coordinates, with p_n = 1 - sum(q).

    The rational formula is evaluated as is, so the map also makes sense on
    a neighbourhood of the simplex (used for finite differences).
    """
    _require_distinct(s)
    q = np.asarray(q, dtype=float)
    p = np.append(q, 1.0 - q.sum())
    mean = p @ s.unit
    w = p * (mean - s.unit) ** 2
    return (w / w.sum())[:-1]


class Interval(NamedTuple):
    lo: float
    hi: float
    index: int  # position of the intermediate eigenvalue closest to the midpoint

    def __contains__(self, sv) -> bool:
        return self.lo <= sv <= self.hi


def attracting_interval(s: Spectrum) -> Interval:
    """Limit probabilities whose 2-cycle has no expanding direction.

    I = {s : |s - 1/2| <= sqrt(1 - 2 alpha (1 - alpha)) / 2}, with alpha the
    intermediate position closest to 1/2.
    """
    if s.n < 3:
        raise ValueError("the attracting interval needs an intermediate eigenvalue")
    _require_distinct(s)
    i = int(np.argmin(np.abs(s.alphas - 0.5)))
    alpha = s.alphas[i]
    w = 0.5 * math.sqrt(1.0 - 2.0 * alpha * (1.0 - alpha))
    return Interval(0.5 - w, 0.5 + w, i + 1)


def mu(sv: float, alphas) -> np.ndarray:
    """Non-trivial eigenvalues of the Jacobian of T^2 at its 2-cycle."""
    alphas = np.asarray(alphas, dtype=float)
    g = sv * (1.0 - sv)
    return ((g - alphas * (1.0 - alphas)) / g) ** 2


def _jacobian(sv: float, alphas: np.ndarray) -> np.ndarray:
    m = len(alphas) + 1
    J = np.zeros((m, m))
    J[0, 0] = -1.0
    J[0, 1:] = -alphas ** 2 / sv
    J[np.arange(1, m), np.arange(1, m)] = (alphas - sv) ** 2 / (sv * (1.0 - sv))
    return J


@dataclass(frozen=True)
class StabilityReport:
    s: float
    jacobian: np.ndarray
    product: np.ndarray
    mu: np.ndarray
    in_I: bool
    singular: bool


def jacobian_at_fixed_point(sv: float, s: Spectrum) -> StabilityReport:
    """Stability data of the 2-cycle through [sv, 0, ..., 0, 1 - sv].

    ``jacobian`` is the derivative of :func:`theta_map` there and
    ``product`` the derivative of its square, D(1 - sv) @ D(sv).
    ``singular`` flags sv in {alpha_i, 1 - alpha_i}, where the square stops
    being a local diffeomorphism.
    """
    if not 0.0 < sv < 1.0:
        raise ValueError("sv must lie strictly between 0 and 1")
    if s.n < 3:
        raise ValueError("need an intermediate eigenvalue")
    _require_distinct(s)
    alphas = s.alphas
    J = _jacobian(sv, alphas)
    product = _jacobian(1.0 - sv, alphas) @ J
    m = mu(sv, alphas)
    singular = bool(np.any(np.isclose(alphas, sv, rtol=0, atol=1e-14)
                           | np.isclose(alphas, 1.0 - sv, rtol=0, atol=1e-14)))
    return StabilityReport(s=sv, jacobian=J, product=product, mu=m,
                           in_I=sv in attracting_interval(s), singular=singular)


def akaike_lower_bound(s: Spectrum, absolute: bool = False) -> float:
    """Essential infimum of the rate of convergence over seeds.

    (1 - a) / sqrt((1 + a)^2 + B a) with B = 4 (1 + d^2) / (1 - d^2), where d
    is the smallest signed offset (lambda_i - mid) / half-width over the
    intermediate eigenvalues.  With ``absolute=True`` the offset of smallest
    magnitude is used instead; that choice matches
    :func:`attracting_interval` and gives the tight bound when several
    intermediate eigenvalues are present.
    """
    if s.n < 3:
        raise ValueError("the bound needs an intermediate eigenvalue")
    _require_distinct(s)
    offsets = 2.0 * s.alphas - 1.0
    d = float(offsets[np.argmin(np.abs(offsets))] if absolute else offsets.min())
    if d * d >= 1.0:
        # intermediate eigenvalue indistinguishable from an extreme one: B -> inf
        return 0.0
    B = 4.0 * (1.0 + d * d) / (1.0 - d * d)
    a = s.a
    return (1.0 - a) / math.sqrt((1.0 + a) ** 2 + B * a)
