"""Acceptance criteria, one test per criterion.

Run with ``pytest tests/test_acceptance.py``; a PASS/FAIL line per criterion
is printed in the "acceptance criteria" section of the terminal summary.
"""

import math
import sys
import time

import numpy as np
import pytest
from scipy import stats

from elsgd import akaike, objectives, quadratic, quartic, roc
from elsgd.cli import hessian_table_row

from oracles import brute_force_quartic_min, central_jacobian


def midpoint_spectrum(a):
    return quadratic.make_spectrum([1.0, (1.0 + a) / 2.0, a])


@pytest.mark.criterion(1, "2-D quadrature of the mean squared rate matches its closed form")
def test_c01_quadrature_closed_form():
    t0 = time.perf_counter()
    for a in (0.5, 0.1, 0.01, 0.001):
        q = roc.average_roc_quadrature_2d(a, "second")
        closed = roc.average_sq_roc_closed_form_2d(a)
        assert abs(q.mean - closed) <= 1e-8 * closed
    assert time.perf_counter() - t0 < 1.0


@pytest.mark.criterion(2, "2-D Monte Carlo average rate at a=1e-6 is below 0.05")
def test_c02_average_rate_vanishes():
    t0 = time.perf_counter()
    r = roc.average_roc_monte_carlo(quadratic.make_spectrum([1.0, 1e-6]), 100_000, seed=0)
    assert r.mean + 3 * r.std_error < 0.05
    assert r.mean ** 2 <= r.mean_sq
    assert math.sqrt(roc.average_sq_roc_closed_form_2d(1e-6)) == pytest.approx(0.0316, abs=1e-4)
    assert time.perf_counter() - t0 < 30.0


@pytest.mark.criterion(3, "Akaike lower bound is tight for the midpoint spectrum, a=0.01")
def test_c03_bound_tightness():
    t0 = time.perf_counter()
    a = 0.01
    s = midpoint_spectrum(a)
    bound = akaike.akaike_lower_bound(s)
    assert bound == pytest.approx(0.99 / math.sqrt(1.01 ** 2 + 0.04), rel=1e-14)
    assert bound == pytest.approx(0.961481, abs=1e-4)
    X = roc.sample_unit_sphere(3, np.random.default_rng(3), 10_000)
    rho, _, ok = roc.estimate_roc_batch(X, s)
    assert ok.all()
    assert bound - 1e-4 <= rho.min() <= bound + 5e-3
    assert rho.max() <= (1 - a) / (1 + a) + 1e-6
    assert time.perf_counter() - t0 < 300.0


@pytest.mark.criterion(4, "limit probabilities of 1e5 seeds all lie in the attracting interval")
def test_c04_limits_in_interval():
    s = midpoint_spectrum(0.01)
    _, ls, ok = roc.sample_rocs(s, 100_000, seed=4)
    I = akaike.attracting_interval(s)
    conv = ls[ok]
    assert np.count_nonzero(~ok) / ok.size < 1e-3
    assert np.all((conv >= I.lo - 1e-6) & (conv <= I.hi + 1e-6))


@pytest.mark.criterion(5, "worst seeds attain the worst-case rate at every step")
def test_c05_worst_case_attainment():
    rng = np.random.default_rng(5)
    for _ in range(20):
        n = int(rng.integers(2, 7))
        lam = np.sort(rng.uniform(0.01, 1.0, n))[::-1]
        s = quadratic.make_spectrum(lam)
        tr = quadratic.els_gd_run(quadratic.worst_seed(s), s, max_k=50, tol=0.0)
        assert tr.steps == 50
        np.testing.assert_allclose(tr.shrink_factors, quadratic.worst_case_roc(s), rtol=0, atol=1e-10)


@pytest.mark.criterion(6, "Kantorovich bound holds on 1e5 random (x, lambda)")
def test_c06_kantorovich():
    rng = np.random.default_rng(6)
    violations = 0
    for _ in range(100_000):
        n = int(rng.integers(2, 7))
        lam = np.sort(10.0 ** rng.uniform(-3, 3, n))[::-1]
        s = quadratic.make_spectrum(lam)
        x = rng.standard_normal(n)
        violations += quadratic.shrink_factor(x, s) > quadratic.worst_case_roc(s) + 1e-12
    assert violations == 0


@pytest.mark.criterion(7, "variance never decreases under Akaike's map (1e5 random cases)")
def test_c07_variance_monotone():
    rng = np.random.default_rng(7)
    violations = 0
    for _ in range(100_000):
        n = int(rng.integers(2, 7))
        s = quadratic.make_spectrum(np.sort(rng.uniform(0.01, 1.0, n))[::-1])
        p = rng.dirichlet(np.ones(n))
        violations += akaike.variance(akaike.t_map(p, s), s) < akaike.variance(p, s) - 1e-12
    assert violations == 0


@pytest.mark.criterion(8, "Jacobian at the 2-cycle matches finite differences; product spectrum")
def test_c08_jacobian():
    rng = np.random.default_rng(8)
    for _ in range(100):
        n = int(rng.integers(3, 7))
        alphas = np.sort(rng.uniform(0.02, 0.98, n - 2))[::-1]
        a = rng.uniform(0.01, 0.9)
        s = quadratic.make_spectrum(np.r_[1.0, alphas + (1 - alphas) * a, a])
        sv = rng.uniform(0.05, 0.95)
        rep = akaike.jacobian_at_fixed_point(sv, s)
        fd = central_jacobian(lambda q: akaike.theta_map(q, s), np.r_[sv, np.zeros(n - 2)], 1e-6)
        assert np.max(np.abs(fd - rep.jacobian)) <= 1e-6
        ev = np.sort(np.linalg.eigvals(rep.product).real)
        np.testing.assert_allclose(ev, np.sort(np.r_[1.0, rep.mu]), rtol=0, atol=1e-8)


@pytest.mark.criterion(9, "sigma conjugates the GD step to Akaike's map")
def test_c09_conjugacy():
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(10_000):
        n = int(rng.integers(2, 7))
        s = quadratic.make_spectrum(np.sort(rng.uniform(0.01, 1.0, n))[::-1])
        x = rng.standard_normal(n)
        lhs = akaike.sigma(quadratic.gd_step(x, s), s)
        rhs = akaike.t_map(akaike.sigma(x, s), s)
        worst = max(worst, np.max(np.abs(lhs - rhs)))
    assert worst <= 1e-12


@pytest.mark.criterion(10, "quartic line search matches a brute-force grid+refine oracle")
def test_c10_quartic_oracle():
    rng = np.random.default_rng(10)
    N = 10_000
    C = np.column_stack([rng.uniform(0.1, 2.0, N), rng.standard_normal((N, 4)) * 2.0])
    t0 = time.perf_counter()
    results = [quartic.minimize_quartic_nonneg(quartic.QuarticPoly(*c)) for c in C]
    solver_time = time.perf_counter() - t0
    ts, vs = brute_force_quartic_min(C, npts=1_000_000)
    t_err = np.array([abs(r.t_star - t) for r, t in zip(results, ts)])
    v_err = np.array([abs(r.p_at_t - v) for r, v in zip(results, vs)])
    assert t_err.max() <= 1e-6
    assert v_err.max() <= 1e-10
    assert solver_time < 60.0


@pytest.mark.criterion(11, "phase retrieval: exact line search needs <= 2/3 the constant-step iterations")
def test_c11_phase_retrieval():
    inst = objectives.gen_phase_retrieval(100, 1000, seed=1)
    x0 = objectives.spectral_init(inst)
    obj = objectives.PhaseRetrievalObjective(inst)

    def stop(x):
        return objectives.pr_rel_error(inst, x) <= 1e-10

    e = quartic.els_gd_generic(obj, x0, tol_grad=0.0, max_k=5000, stop=stop)
    c = quartic.constant_step_generic(obj, x0, 0.1, tol_grad=0.0, max_k=5000, stop=stop)
    assert e.converged and c.converged
    assert e.iterations <= (2 / 3) * c.iterations
    a = 1.0 / objectives.hessian_cond(inst, inst.x_true)
    contraction = (objectives.pr_rel_error(inst, e.x) / objectives.pr_rel_error(inst, x0)) ** (1 / e.iterations)
    assert contraction < (1 - a) / (1 + a)


@pytest.mark.criterion(12, "Rosenbrock: cond at the minimiser ~2500; >=90% of runs beat the worst case")
def test_c12_rosenbrock():
    cond = float(np.linalg.cond(objectives.rosenbrock_hessian(np.ones(2))))
    assert 2400 <= cond <= 2600
    r = (1 - 1 / cond) / (1 + 1 / cond)
    Z = np.random.default_rng(0).standard_normal((100, 2))
    beat = 0
    for z in Z:
        tr = quartic.els_gd_generic(objectives.RosenbrockObjective(), 1 + z, tol_grad=0.0,
                                    max_k=100_000, f_tol=1e-10)
        k_ref = math.ceil(math.log(1e-10 / tr.values[0]) / (2 * math.log(r)))
        beat += tr.converged and tr.iterations < k_ref
    assert beat >= 90


@pytest.mark.criterion(13, "Hessian table: growth along a_1 only")
def test_c13_hessian_table():
    sizes = [100, 200, 400]
    rows = np.array([hessian_table_row(n, seed=0) for n in sizes])
    along_a1 = rows[:, 3]
    assert np.all(np.diff(along_a1) > 0)
    for col in (2, 4, 5, 6):
        assert stats.spearmanr(sizes, rows[:, col])[0] <= 0
    assert 5 <= rows[0, 2] <= 50


@pytest.mark.criterion(14, "limit-angle histogram peaks at atan(1/a)")
def test_c14_angle_mode():
    s = quadratic.make_spectrum([1.0, 0.55, 0.1])
    h = roc.limit_angle_histogram(s, 100_000, bins=200, seed=0)
    lo, hi = h.mode_bin()
    assert lo <= math.atan(10) <= hi
    assert math.atan(10) == pytest.approx(1.4711, abs=1e-4)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
