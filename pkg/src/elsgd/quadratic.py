"""Gradient descent on diagonal convex quadratics f(x) = x^T A x / 2.

A = diag(lambda) is represented by a :class:`Spectrum`.  Iterates are plain
1-d numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

# Components smaller than this are flushed to zero after a GD step.
SNAP = 1e-300
# els_gd_run stops once the A-norm falls below this, whatever the tolerance.
UNDERFLOW_NORM = 1e-280
# gd_step uses the O(n^2) cancellation-free step factor up to this size.
PAIRWISE_MAX_N = 256


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of a diagonal Hessian, largest first.

    ``a`` is lambda_n / lambda_1 (the reciprocal condition number) and
    ``alphas`` holds the barycentric positions of the intermediate
    eigenvalues, lambda_i = alpha_i lambda_1 + (1 - alpha_i) lambda_n.
    """

    values: np.ndarray
    a: float
    alphas: np.ndarray
    has_ties: bool = False
    unit: np.ndarray = field(repr=False, default=None)

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def lmax(self) -> float:
        return float(self.values[0])

    @property
    def lmin(self) -> float:
        return float(self.values[-1])

    def __len__(self) -> int:
        return self.n


SpectrumLike = Union[Spectrum, Sequence[float], np.ndarray]


def make_spectrum(values: Sequence[float], allow_ties: bool = False) -> Spectrum:
    """Build a :class:`Spectrum` from eigenvalues sorted in decreasing order.

    Ties are rejected unless ``allow_ties`` is set; tied spectra should
    normally be collapsed with :func:`reduce_multiplicities` first.
    """
    lam = np.asarray(values, dtype=float).ravel()
    if lam.size == 0:
        raise ValueError("spectrum must be nonempty")
    if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
        raise ValueError(f"eigenvalues must be finite and positive, got {lam}")
    gaps = np.diff(lam)
    if np.any(gaps > 0):
        raise ValueError(f"eigenvalues must be sorted in decreasing order, got {lam}")
    ties = bool(np.any(gaps == 0))
    if ties and not allow_ties:
        raise ValueError(
            f"tied eigenvalues {lam}; collapse them with reduce_multiplicities")
    l1, ln = lam[0], lam[-1]
    if l1 > ln:
        unit = (lam - ln) / (l1 - ln)
        unit[0], unit[-1] = 1.0, 0.0
    else:
        unit = np.full_like(lam, np.nan)
    return Spectrum(values=_frozen(lam), a=float(ln / l1),
                    alphas=_frozen(unit[1:-1]), has_ties=ties, unit=_frozen(unit))


def _extremes(s: SpectrumLike) -> tuple[float, float]:
    if isinstance(s, Spectrum):
        return s.lmax, s.lmin
    lam = np.asarray(s, dtype=float)
    return float(lam.max()), float(lam.min())


def _check_dim(x: np.ndarray, s: Spectrum) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (s.n,):
        raise ValueError(f"state has shape {x.shape}, spectrum has {s.n} eigenvalues")
    return x


def is_eigenvector(x: np.ndarray, s: Spectrum) -> bool:
    """True if the nonzero components of ``x`` all sit on one eigenvalue."""
    support = s.values[np.asarray(x) != 0]
    return support.size > 0 and support[0] == support[-1]


def _weights(x: np.ndarray, s: Spectrum) -> tuple[np.ndarray, np.ndarray]:
    # rho and the step direction are scale free in both x and lambda;
    # normalising keeps the squares away from under/overflow.
    scale = np.max(np.abs(x))
    return (x / scale) ** 2, s.values / s.lmax


def a_norm(x: np.ndarray, s: Spectrum) -> float:
    x = _check_dim(x, s)
    scale = float(np.max(np.abs(x), initial=0.0))
    if scale == 0.0:
        return 0.0
    return scale * math.sqrt(math.fsum(s.values * (x / scale) ** 2))


def step_size(x: np.ndarray, s: Spectrum) -> float:
    """Exact line-search step x^T A^2 x / x^T A^3 x (0 at the origin)."""
    x = _check_dim(x, s)
    if not np.any(x):
        return 0.0
    w, lam = _weights(x, s)
    return math.fsum(lam ** 2 * w) / math.fsum(lam ** 3 * w) / s.lmax


def gd_step(x: np.ndarray, s: Spectrum) -> np.ndarray:
    """One exact line-search GD step, x - (x^T A^2 x / x^T A^3 x) A x.

    Returns exact zeros at the origin and at eigenvectors.
    """
    x = _check_dim(x, s)
    if not np.any(x) or is_eigenvector(x, s):
        return np.zeros_like(x)
    if s.n > PAIRWISE_MAX_N:
        out = x - step_size(x, s) * s.values * x
    else:
        # 1 - s_k lambda_i = sum_j w_j l_j^2 (l_j - l_i) / sum_j w_j l_j^3; the
        # j = i term drops out exactly, so near-eigenvectors keep full accuracy
        w, lam = _weights(x, s)
        wl2 = w * lam ** 2
        factor = (wl2 @ (lam[:, None] - lam[None, :])) / math.fsum(wl2 * lam)
        out = x * factor
    out[np.abs(out) < SNAP] = 0.0
    return out


def shrink_factor(x: np.ndarray, s: Spectrum) -> float:
    """One-step contraction of the A-norm under :func:`gd_step`.

    rho^2 = 1 - (sum l^2 x^2)^2 / (sum l x^2 * sum l^3 x^2).  The numerator
    of 1 - ratio is expanded with Lagrange's identity as a sum of
    nonnegative pair terms, so no cancellation occurs.
    """
    x = _check_dim(x, s)
    if not np.any(x):
        raise ValueError("shrink factor is undefined at the origin")
    w, lam = _weights(x, s)
    i, j = np.triu_indices(s.n, k=1)
    pairs = w[i] * w[j] * lam[i] * lam[j] * (lam[i] - lam[j]) ** 2
    rho2 = math.fsum(pairs) / (math.fsum(lam * w) * math.fsum(lam ** 3 * w))
    return math.sqrt(min(max(rho2, 0.0), 1.0))


def worst_case_roc(s: SpectrumLike) -> float:
    l1, ln = _extremes(s)
    return (l1 - ln) / (l1 + ln)


def optimal_constant_step(s: SpectrumLike) -> float:
    l1, ln = _extremes(s)
    return 2.0 / (l1 + ln)


@dataclass(frozen=True)
class Trajectory:
    """States x_0..x_K plus the shrink factor and step used at each step."""

    states: np.ndarray
    shrink_factors: np.ndarray
    step_sizes: np.ndarray

    @property
    def steps(self) -> int:
        return len(self.step_sizes)


def constant_step_gd(x0: np.ndarray, s: Spectrum, step: float, k: int) -> Trajectory:
    """k iterations of x <- (I - step A) x.

    The recorded shrink factor is the per-step A-norm ratio (nan once the
    iterate is zero).
    """
    if step < 0:
        raise ValueError("step must be nonnegative")
    x = _check_dim(x0, s).copy()
    factor = 1.0 - step * s.values
    states, rhos = [x.copy()], []
    for _ in range(k):
        before = a_norm(x, s)
        x = factor * x
        rhos.append(a_norm(x, s) / before if before > 0 else math.nan)
        states.append(x.copy())
    return Trajectory(np.array(states), np.array(rhos), np.full(k, float(step)))


def els_gd_run(x0: np.ndarray, s: Spectrum, max_k: int = 10_000,
               tol: float = 1e-12) -> Trajectory:
    """Exact line-search GD from x0.

    Stops once ||x||_A <= tol * ||x0||_A, the iterate underflows, or after
    ``max_k`` steps.
    """
    x = _check_dim(x0, s).copy()
    if not np.any(x):
        raise ValueError("x0 must be nonzero")
    stop = tol * a_norm(x, s)
    states, rhos, steps = [x.copy()], [], []
    for _ in range(max_k):
        norm = a_norm(x, s)
        if norm <= stop or norm < UNDERFLOW_NORM:
            break
        rhos.append(shrink_factor(x, s))
        steps.append(step_size(x, s))
        x = gd_step(x, s)
        states.append(x.copy())
        if not np.any(x):
            break
    return Trajectory(np.array(states), np.array(rhos), np.array(steps))


def worst_seed(s: Spectrum, normalize: bool = True) -> np.ndarray:
    """Seed on the x_1-x_n plane with lambda_1 |x_1| = lambda_n |x_n|.

    Every exact line-search step from it contracts by (1 - a) / (1 + a).
    """
    if s.n < 2:
        raise ValueError("worst seed needs at least two eigenvalues")
    x = np.zeros(s.n)
    x[0], x[-1] = s.a, 1.0
    if normalize:
        x /= np.linalg.norm(x)
    return x


def reduce_multiplicities(x0: np.ndarray, values: Sequence[float]) -> tuple[np.ndarray, Spectrum]:
    """Collapse repeated eigenvalues.

    Each block of equal eigenvalues becomes one coordinate holding the
    Euclidean norm of the corresponding block of ``x0``.  GD on the reduced
    system has the same shrink factors as on the original one.
    """
    lam = np.asarray(values, dtype=float).ravel()
    x0 = np.asarray(x0, dtype=float).ravel()
    if lam.shape != x0.shape:
        raise ValueError("x0 and values differ in length")
    make_spectrum(lam, allow_ties=True)  # validates positivity and ordering
    starts = np.flatnonzero(np.r_[True, lam[1:] != lam[:-1]])
    blocks = np.split(np.arange(lam.size), starts[1:])
    x_hat = np.array([np.linalg.norm(x0[b]) for b in blocks])
    return x_hat, make_spectrum(lam[starts])
