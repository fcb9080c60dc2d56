"""Degree-4 polynomial objectives: phase retrieval, matrix completion, Rosenbrock.

Each objective has free functions for value / gradient / exact line quartic
plus a small wrapper class usable with :func:`elsgd.quartic.els_gd_generic`.
"""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .quadratic import Spectrum
from .quartic import QuarticPoly


class IndefiniteHessianWarning(RuntimeWarning):
    pass


class PowerIterationWarning(RuntimeWarning):
    pass


def _quartic_of_square(e0, e1, e2) -> QuarticPoly:
    """Coefficients of sum_k (e0 + e1 t + e2 t^2)^2 for arrays e0, e1, e2."""
    return QuarticPoly(float(e2 @ e2), float(2.0 * e1 @ e2),
                       float(e1 @ e1 + 2.0 * e0 @ e2), float(2.0 * e0 @ e1),
                       float(e0 @ e0))


# ---------------------------------------------------------------- quadratic

class QuadraticObjective:
    """f(x) = x^T diag(lambda) x / 2."""

    def __init__(self, spectrum: Spectrum):
        self.spectrum = spectrum
        self.lam = np.asarray(spectrum.values)

    def value(self, x):
        return 0.5 * float(x @ (self.lam * x))

    def grad(self, x):
        return self.lam * x

    def line_quartic(self, x, d):
        Ad = self.lam * d
        return QuarticPoly(0.0, 0.0, 0.5 * float(d @ Ad), float(x @ Ad), self.value(x))


# ---------------------------------------------------------- phase retrieval

@dataclass(frozen=True)
class PhaseRetrievalInstance:
    """Real phase retrieval with Gaussian sensors.

    ``sensors`` is m x n with the sensing vectors a_j as rows, so
    ``sensors @ x`` is the vector of a_j^T x.
    """

    sensors: np.ndarray
    y: np.ndarray
    x_true: np.ndarray
    seed: int
    normalize: bool = True

    @property
    def m(self) -> int:
        return self.sensors.shape[0]

    @property
    def n(self) -> int:
        return self.sensors.shape[1]

    def to_json(self) -> dict:
        return {"kind": "phase_retrieval", "n": self.n, "m": self.m,
                "seed": self.seed, "normalize": self.normalize,
                "recipe": "rng=numpy.default_rng(seed); x=rng.standard_normal(n) "
                          "(divided by its norm if normalize); "
                          "sensors=rng.standard_normal((m, n)); y=(sensors@x)**2"}

    @classmethod
    def from_json(cls, d: dict) -> "PhaseRetrievalInstance":
        return gen_phase_retrieval(d["n"], d["m"], d["seed"], d.get("normalize", True))


def gen_phase_retrieval(n: int, m: int, seed: int, normalize: bool = True) -> PhaseRetrievalInstance:
    if n < 1 or m < 1:
        raise ValueError("need n >= 1 and m >= 1")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    if normalize:
        x /= np.linalg.norm(x)
    A = rng.standard_normal((m, n))
    return PhaseRetrievalInstance(A, (A @ x) ** 2, x, seed, normalize)


def _matvec(M, v, ops: Optional[Counter]):
    if ops is not None:
        ops["matvec"] += 1
    return M @ v


def pr_value(inst: PhaseRetrievalInstance, x) -> float:
    r = inst.y - (inst.sensors @ x) ** 2
    return float(r @ r) / (4 * inst.m)


def pr_grad(inst: PhaseRetrievalInstance, x) -> np.ndarray:
    Ax = inst.sensors @ x
    return inst.sensors.T @ ((Ax ** 2 - inst.y) * Ax) / inst.m


def pr_hessian(inst: PhaseRetrievalInstance, x) -> np.ndarray:
    Ax = inst.sensors @ x
    w = 3.0 * Ax ** 2 - inst.y
    return inst.sensors.T @ (w[:, None] * inst.sensors) / inst.m


def pr_line_quartic(inst: PhaseRetrievalInstance, x, d,
                    ops: Optional[Counter] = None) -> QuarticPoly:
    """Quartic in t equal to 4m f(x + t d).

    The 1/(4m) factor of f is left out, as in the usual coefficient
    pipeline; it does not move the minimiser.
    """
    Ax = _matvec(inst.sensors, x, ops)
    Ad = _matvec(inst.sensors, d, ops)
    return _pr_quartic(inst, Ax, Ad)


def _pr_quartic(inst, Ax, Ad) -> QuarticPoly:
    alpha = Ax ** 2 - inst.y
    beta = 2.0 * Ax * Ad
    gamma = Ad ** 2
    return _quartic_of_square(alpha, beta, gamma)


def pr_direction_and_quartic(inst: PhaseRetrievalInstance, x,
                             ops: Optional[Counter] = None):
    """Descent direction and line quartic from three m x n products.

    Returns (d, ||grad f||, p) with d = -grad f(x) and p(t) = 4m f(x + t d).
    """
    Ax = _matvec(inst.sensors, x, ops)
    alpha = Ax ** 2 - inst.y
    d = -_matvec(inst.sensors.T, alpha * Ax, ops) / inst.m
    Ad = _matvec(inst.sensors, d, ops)
    return d, float(np.linalg.norm(d)), _pr_quartic(inst, Ax, Ad)


def spectral_init(inst: PhaseRetrievalInstance, tol: float = 1e-10,
                  max_iter: int = 10_000) -> np.ndarray:
    """Scaled leading eigenvector of (1/m) sum_j y_j a_j a_j^T.

    Power iteration; the result has norm sqrt(mean(y)) and its first nonzero
    coordinate positive.  Non-convergence raises a
    :class:`PowerIterationWarning` and returns the last iterate.
    """
    if inst.m == 0:
        raise ValueError("spectral initialisation needs at least one measurement")
    A, y = inst.sensors, inst.y
    v = np.random.default_rng(inst.seed + 1).standard_normal(inst.n)
    v /= np.linalg.norm(v)
    for _ in range(max_iter):
        w = A.T @ (y * (A @ v))
        w /= np.linalg.norm(w)
        if w @ v < 0:
            w = -w
        if np.linalg.norm(w - v) <= tol:
            v = w
            break
        v = w
    else:
        warnings.warn("power iteration did not converge", PowerIterationWarning)
    nz = np.flatnonzero(v)
    if nz.size and v[nz[0]] < 0:
        v = -v
    return math.sqrt(float(np.mean(y))) * v


def hessian_cond(inst: PhaseRetrievalInstance, x) -> float:
    """Condition number of the Hessian at ``x`` (dense symmetric eigensolve).

    If the Hessian is not positive definite the ratio of the extreme
    absolute eigenvalues is returned and an
    :class:`IndefiniteHessianWarning` is issued.
    """
    ev = np.linalg.eigvalsh(pr_hessian(inst, x))
    if ev[0] <= 0:
        warnings.warn(f"Hessian is not positive definite (min eigenvalue {ev[0]:.3g})",
                      IndefiniteHessianWarning)
        mags = np.abs(ev)
        return float(mags.max() / mags.min())
    return float(ev[-1] / ev[0])


def pr_rel_error(inst: PhaseRetrievalInstance, x) -> float:
    """Distance to the nearer of +-x_true, relative to ||x_true||."""
    xt = inst.x_true
    return float(min(np.linalg.norm(x - xt), np.linalg.norm(x + xt)) / np.linalg.norm(xt))


class PhaseRetrievalObjective:
    def __init__(self, inst: PhaseRetrievalInstance, ops: Optional[Counter] = None):
        self.inst = inst
        self.ops = ops

    def value(self, x):
        return pr_value(self.inst, x)

    def grad(self, x):
        return pr_grad(self.inst, x)

    def line_quartic(self, x, d):
        return pr_line_quartic(self.inst, x, d, self.ops).scaled(1.0 / (4 * self.inst.m))

    def direction_and_quartic(self, x):
        d, gnorm, p = pr_direction_and_quartic(self.inst, x, self.ops)
        return d, gnorm, p.scaled(1.0 / (4 * self.inst.m))


# -------------------------------------------------------- matrix completion

@dataclass(frozen=True)
class MatrixCompletionInstance:
    shape: tuple[int, int]
    rank: int
    mask: np.ndarray  # boolean m x n, True on observed entries
    m_obs: np.ndarray  # observed values, in row-major order of the mask
    x_true: np.ndarray
    y_true: np.ndarray
    seed: int
    sample_fraction: float

    @property
    def omega(self) -> list[tuple[int, int]]:
        return list(zip(*map(np.ndarray.tolist, np.nonzero(self.mask))))

    def to_json(self) -> dict:
        m, n = self.shape
        return {"kind": "matrix_completion", "m": m, "n": n, "r": self.rank,
                "sample_fraction": self.sample_fraction, "seed": self.seed,
                "recipe": "rng=numpy.default_rng(seed); X=rng.standard_normal((m, r)); "
                          "Y=rng.standard_normal((n, r)); mask=rng.random((m, n)) < "
                          "sample_fraction; M=X@Y.T observed on mask"}

    @classmethod
    def from_json(cls, d: dict) -> "MatrixCompletionInstance":
        return gen_matrix_completion(d["m"], d["n"], d["r"], d["sample_fraction"], d["seed"])


def gen_matrix_completion(m: int, n: int, r: int, sample_fraction: float,
                          seed: int) -> MatrixCompletionInstance:
    if not 0.0 < sample_fraction <= 1.0:
        raise ValueError("sample_fraction must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((m, r))
    Y = rng.standard_normal((n, r))
    mask = rng.random((m, n)) < sample_fraction
    if not mask.any():
        raise ValueError("no entries were sampled; increase sample_fraction")
    return MatrixCompletionInstance((m, n), r, mask, (X @ Y.T)[mask], X, Y, seed,
                                    sample_fraction)


def _mc_residual(inst, X, Y):
    return (X @ Y.T)[inst.mask] - inst.m_obs


def mc_value(inst: MatrixCompletionInstance, X, Y) -> float:
    r = _mc_residual(inst, X, Y)
    return float(r @ r)


def mc_grad(inst: MatrixCompletionInstance, X, Y):
    R = np.zeros(inst.shape)
    R[inst.mask] = _mc_residual(inst, X, Y)
    return 2.0 * R @ Y, 2.0 * R.T @ X


def mc_line_quartic(inst: MatrixCompletionInstance, X, Y, DX, DY) -> QuarticPoly:
    """Exact quartic of t -> mc_value(X + t DX, Y + t DY)."""
    mask = inst.mask
    e0 = _mc_residual(inst, X, Y)
    e1 = (X @ DY.T + DX @ Y.T)[mask]
    e2 = (DX @ DY.T)[mask]
    return _quartic_of_square(e0, e1, e2)


class MatrixCompletionObjective:
    """Matrix completion on the stacked vector [vec(X), vec(Y)]."""

    def __init__(self, inst: MatrixCompletionInstance):
        self.inst = inst
        m, n = inst.shape
        self._split = m * inst.rank
        self._shapes = ((m, inst.rank), (n, inst.rank))

    def unpack(self, z):
        return (z[:self._split].reshape(self._shapes[0]),
                z[self._split:].reshape(self._shapes[1]))

    @staticmethod
    def pack(X, Y):
        return np.concatenate([X.ravel(), Y.ravel()])

    def value(self, z):
        return mc_value(self.inst, *self.unpack(z))

    def grad(self, z):
        return self.pack(*mc_grad(self.inst, *self.unpack(z)))

    def line_quartic(self, z, d):
        return mc_line_quartic(self.inst, *self.unpack(z), *self.unpack(d))


# --------------------------------------------------------------- Rosenbrock

def _check_rosen(x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("Rosenbrock needs n >= 2")
    return x


def rosenbrock_value(x) -> float:
    x = _check_rosen(x)
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))


def rosenbrock_grad(x) -> np.ndarray:
    x = _check_rosen(x)
    inner = x[1:] - x[:-1] ** 2
    g = np.zeros_like(x)
    g[1:] += 200.0 * inner
    g[:-1] += -400.0 * x[:-1] * inner - 2.0 * (1.0 - x[:-1])
    return g


def rosenbrock_hessian(x) -> np.ndarray:
    x = _check_rosen(x)
    n = x.size
    H = np.zeros((n, n))
    i = np.arange(n - 1)
    H[i, i] += 1200.0 * x[:-1] ** 2 - 400.0 * x[1:] + 2.0
    H[i + 1, i + 1] += 200.0
    H[i, i + 1] = H[i + 1, i] = -400.0 * x[:-1]
    return H


def rosenbrock_line_quartic(x, d) -> QuarticPoly:
    x = _check_rosen(x)
    d = np.asarray(d, dtype=float)
    xp, xn, dp, dn = x[:-1], x[1:], d[:-1], d[1:]
    ten = 10.0
    # 100 inner^2 = (10 inner)^2, with inner quadratic in t
    e0 = np.concatenate([ten * (xn - xp ** 2), 1.0 - xp])
    e1 = np.concatenate([ten * (dn - 2.0 * xp * dp), -dp])
    e2 = np.concatenate([-ten * dp ** 2, np.zeros_like(dp)])
    return _quartic_of_square(e0, e1, e2)


class RosenbrockObjective:
    def value(self, x):
        return rosenbrock_value(x)

    def grad(self, x):
        return rosenbrock_grad(x)

    def line_quartic(self, x, d):
        return rosenbrock_line_quartic(x, d)
