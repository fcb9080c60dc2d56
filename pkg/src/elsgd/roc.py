"""Rate-of-convergence estimates: single seeds, averages, limit angles."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from . import akaike
from .quadratic import Spectrum, _check_dim, gd_step, shrink_factor

# Monte Carlo draws come in fixed-size chunks, each from its own spawned
# stream, so results do not depend on how chunks are spread over workers.
CHUNK = 8192
THREADS_ENV = "ELS_GD_THREADS"


@dataclass(frozen=True)
class RocEstimate:
    rho_star: float
    method: str  # "geometric-mean" or "limit-probability"
    k_used: int
    residual: float
    limit_s: Optional[float] = None
    converged: bool = True
    other: Optional[float] = None  # estimate from the other method, if run


def _geometric_mean_roc(x0: np.ndarray, s: Spectrum, tol: float, max_k: int,
                        window: int):
    x = x0 / np.max(np.abs(x0))
    logs = []
    prev = None
    for k in range(max_k):
        rho = shrink_factor(x, s)
        if rho == 0.0:
            return 0.0, k + 1, 0.0, True
        logs.append(math.log(rho))
        x = gd_step(x, s)
        # shrink factors are scale free; renormalising avoids underflow
        x /= np.max(np.abs(x))
        if len(logs) % window == 0:
            gm = math.exp(math.fsum(logs[-window:]) / window)
            if prev is not None and abs(gm - prev) <= tol:
                return gm, k + 1, abs(gm - prev), True
            prev = gm
    tail = logs[-window:]
    gm = math.exp(math.fsum(tail) / len(tail))
    return gm, max_k, abs(gm - prev) if prev is not None else math.inf, False


def estimate_roc(x0: np.ndarray, s: Spectrum, tol: float = 1e-8,
                 max_k: int = 100_000, method: str = "both",
                 window: int = 50, lp_tol: float = 1e-12) -> RocEstimate:
    """Estimate rho*(x0), the asymptotic contraction rate of exact line-search GD.

    Parameters
    ----------
    x0 : ndarray
        Nonzero seed.
    s : Spectrum
    tol : float
        Stabilisation tolerance of the geometric-mean method: successive
        window means must agree to ``tol``.
    max_k : int
        Step budget of the geometric-mean method.
    method : {"both", "limit-probability", "geometric-mean"}
        With "both" the limit-probability estimate is reported (falling back
        to the geometric mean if the Akaike iteration did not converge) and
        the other estimate is kept in ``other``.
    window : int
        Tail window length for the geometric mean.
    lp_tol : float
        Tolerance handed to :func:`akaike.limit_probability`.
    """
    x0 = _check_dim(x0, s)
    if not np.any(x0):
        raise ValueError("x0 must be nonzero")
    if method not in ("both", "limit-probability", "geometric-mean"):
        raise ValueError(f"unknown method {method!r}")

    if s.n == 1 or (s.n == 2 and not s.has_ties):
        # in 2-D the shrink factor is constant along the run
        rho = shrink_factor(x0, s)
        sv = float(akaike.sigma(x0, s)[-1]) if s.n == 2 else None
        return RocEstimate(rho, "limit-probability", 0, 0.0, sv, True,
                           rho if method == "both" else None)

    gm = lp = None
    if method in ("both", "geometric-mean"):
        gm = _geometric_mean_roc(x0, s, tol, max_k, window)
    if method in ("both", "limit-probability"):
        lp = akaike.limit_probability(akaike.sigma(x0, s), s, tol=lp_tol)

    if lp is not None and (lp.converged or gm is None):
        return RocEstimate(lp.roc, "limit-probability", lp.iterations,
                           max(lp.residual, lp.middle_mass), lp.s, lp.converged,
                           gm[0] if gm else None)
    rho, k, resid, ok = gm
    return RocEstimate(rho, "geometric-mean", k, resid,
                       lp.s if lp else None, ok, lp.roc if lp else None)


def estimate_roc_batch(X: np.ndarray, s: Spectrum, tol: float = 1e-12,
                       max_iter: int = 1_000_000):
    """Limit-probability estimates of rho* for every row of ``X``.

    Returns (rho_star, limit_s, converged) arrays.
    """
    X = np.asarray(X, dtype=float)
    if s.n == 2:
        rho = _shrink_rows(X, s)
        return rho, _sigma_rows(X, s)[:, -1], np.ones(len(X), dtype=bool)
    ls, _, _, _, ok = akaike.limit_probabilities(_sigma_rows(X, s), s, tol, max_iter)
    return akaike.roc_from_s(ls, s.a), ls, ok


def _sigma_rows(X: np.ndarray, s: Spectrum) -> np.ndarray:
    W = (X / np.max(np.abs(X), axis=1, keepdims=True) * (s.values / s.lmax)) ** 2
    return W / W.sum(axis=1, keepdims=True)


def _shrink_rows(X: np.ndarray, s: Spectrum) -> np.ndarray:
    # same pairwise (Lagrange identity) form as quadratic.shrink_factor
    W = (X / np.max(np.abs(X), axis=1, keepdims=True)) ** 2
    lam = s.values / s.lmax
    i, j = np.triu_indices(s.n, k=1)
    pair = lam[i] * lam[j] * (lam[i] - lam[j]) ** 2
    num = (W[:, i] * W[:, j]) @ pair
    den = (W @ lam) * (W @ lam ** 3)
    return np.sqrt(np.clip(num / den, 0.0, 1.0))


def sample_unit_sphere(n: int, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Uniform draw(s) on the unit sphere in R^n via normalised Gaussians."""
    if n < 1:
        raise ValueError("n must be positive")
    shape = (n,) if size is None else (size, n)
    while True:
        g = rng.standard_normal(shape)
        norms = np.linalg.norm(g, axis=-1, keepdims=True)
        if np.all(norms > 0):
            return g / norms


def average_sq_roc_closed_form_2d(a: float) -> float:
    """Average of rho^2 over seeds on the quarter circle, two eigenvalues."""
    r = math.sqrt(a)
    return r * (1.0 - r) ** 2 / ((1.0 + a) * (1.0 - r + a))


@dataclass(frozen=True)
class AverageRocResult:
    mean: float
    std_error: float
    samples: int
    a: float
    mean_sq: float = math.nan
    seed: Optional[int] = None
    nonconverged: int = 0


def _rho_of_theta(theta, a):
    return akaike.roc_from_s(akaike.s_from_theta(theta, a), a)


def average_roc_quadrature_2d(a: float, which: str = "first",
                              tol: float = 1e-10) -> AverageRocResult:
    """(2/pi) * integral over [0, pi/2] of rho or rho^2 for seed (cos t, sin t).

    ``which`` is "first" or "second" (moment).  The integrand peaks near
    atan(1/a), which is passed to the integrator as a breakpoint.
    """
    if not 0.0 < a <= 1.0:
        raise ValueError("a must lie in (0, 1]")
    power = {"first": 1, "second": 2}[which]
    if a == 1.0:
        return AverageRocResult(0.0, 0.0, 0, a, 0.0)
    peak = math.atan(1.0 / a)
    points = sorted({peak, math.atan(1.0 / math.sqrt(a))})
    val, _ = integrate.quad(lambda t: _rho_of_theta(t, a) ** power, 0.0, math.pi / 2,
                            points=points, epsabs=tol, epsrel=1e-12, limit=500)
    mean = val / (math.pi / 2)
    if power == 1:
        sq, _ = integrate.quad(lambda t: _rho_of_theta(t, a) ** 2, 0.0, math.pi / 2,
                               points=points, epsabs=tol, epsrel=1e-12, limit=500)
        return AverageRocResult(mean, 0.0, 0, a, sq / (math.pi / 2))
    return AverageRocResult(mean, 0.0, 0, a, mean)


def _workers(workers: Optional[int]) -> int:
    if workers is None:
        workers = int(os.environ.get(THREADS_ENV, "1") or 1)
    return max(1, workers)


def _chunked(n_samples: int, seed: int):
    sizes = [CHUNK] * (n_samples // CHUNK)
    if n_samples % CHUNK:
        sizes.append(n_samples % CHUNK)
    streams = np.random.SeedSequence(seed).spawn(len(sizes))
    return list(zip(sizes, streams))


def _map_chunks(fn, n_samples: int, seed: int, workers: Optional[int]):
    jobs = _chunked(n_samples, seed)
    w = _workers(workers)
    if w == 1:
        return [fn(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=w) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def sample_rocs(s: Spectrum, n_samples: int, seed: int, workers: Optional[int] = None):
    """rho*, limit probability and convergence flag for uniform seeds."""
    def run(size, stream):
        X = sample_unit_sphere(s.n, np.random.default_rng(stream), size)
        return estimate_roc_batch(X, s)

    parts = _map_chunks(run, n_samples, seed, workers)
    return tuple(np.concatenate(col) for col in zip(*parts))


def average_roc_monte_carlo(s: Spectrum, n_samples: int = 100_000, seed: int = 0,
                            workers: Optional[int] = None) -> AverageRocResult:
    """Mean of rho* over seeds drawn uniformly from the unit sphere.

    The result depends only on ``(seed, n_samples)``; ``workers`` (default
    from ``$ELS_GD_THREADS``) only changes how chunks are scheduled.
    """
    if n_samples < 100:
        raise ValueError("use at least 100 samples")
    rho, _, ok = sample_rocs(s, n_samples, seed, workers)
    mean = float(np.mean(rho))
    se = float(np.std(rho, ddof=1) / math.sqrt(n_samples))
    return AverageRocResult(mean, se, n_samples, s.a, float(np.mean(rho ** 2)),
                            seed, int(np.count_nonzero(~ok)))


@dataclass(frozen=True)
class AngleHistogram:
    bin_edges: np.ndarray
    densities: np.ndarray
    samples: int
    nonconverged: int
    seed: Optional[int] = None

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    def mode_bin(self) -> tuple[float, float]:
        i = int(np.argmax(self.densities))
        return float(self.bin_edges[i]), float(self.bin_edges[i + 1])


def angle_histogram(limit_s: np.ndarray, converged: np.ndarray, a: float,
                    bins: int = 200, seed: Optional[int] = None) -> AngleHistogram:
    """Histogram of limit angles from precomputed limit probabilities."""
    theta = akaike.theta_from_s(limit_s[converged], a)
    dens, edges = np.histogram(theta, bins=bins, range=(0.0, math.pi / 2), density=True)
    return AngleHistogram(edges, dens, len(limit_s),
                          int(np.count_nonzero(~converged)), seed)


def limit_angle_histogram(s: Spectrum, n_samples: int = 100_000, bins: int = 200,
                          seed: int = 0, workers: Optional[int] = None) -> AngleHistogram:
    """Density of the limit angle over uniformly drawn seeds.

    Seeds whose Akaike iteration does not converge are left out of the
    histogram and counted in ``nonconverged``.
    """
    if s.n < 3:
        raise ValueError("limit angles need an intermediate eigenvalue (n >= 3)")
    _, ls, ok = sample_rocs(s, n_samples, seed, workers)
    return angle_histogram(ls, ok, s.a, bins, seed)
