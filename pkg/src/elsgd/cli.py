"""Command-line harness: reproduce the figures and tables as CSV files.

Every command writes ``--out`` (CSV, LF line endings) and a JSON sidecar
next to it (``<out>`` with its suffix replaced by ``.json``) holding the
full run configuration, the library version, column definitions and a
summary.  Exit codes: 0 success, 2 usage error, 3 numerical
non-convergence (output written anyway).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import stats

from . import __version__, akaike, objectives, quadratic, quartic, roc

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED = 0, 2, 3


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    params: dict
    out: str


@dataclass
class Output:
    columns: dict  # name -> definition, in column order
    rows: list
    summary: dict = field(default_factory=dict)
    converged: bool = True


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


def sidecar_path(out: str) -> Path:
    return Path(out).with_suffix(".json")


def write_output(cfg: RunConfig, res: Output) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(res.columns))
    for row in res.rows:
        w.writerow([_fmt(v) for v in row])
    out = Path(cfg.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(buf.getvalue(), encoding="utf-8", newline="")
    meta = {
        "config": asdict(cfg),
        "version": __version__,
        "columns": [{"name": k, "definition": v} for k, v in res.columns.items()],
        "converged": res.converged,
        "summary": res.summary,
    }
    sidecar_path(cfg.out).write_text(
        json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- parsing helpers

def _floats(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc
    return vals


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def spectrum_from_args(lam: Optional[list[float]], n: Optional[int], a: Optional[float],
                       alpha: Optional[list[float]]) -> quadratic.Spectrum:
    """Spectrum from ``--lambda`` or from ``--n --a [--alpha]``.

    With ``--n`` the spectrum is lambda_1 = 1, lambda_n = a and intermediate
    eigenvalues alpha_i + (1 - alpha_i) a; the alphas default to evenly
    spaced positions (the midpoint when n = 3).
    """
    if lam is not None:
        if n is not None or a is not None or alpha is not None:
            raise UsageError("give either --lambda or --n/--a/--alpha, not both")
        try:
            return quadratic.make_spectrum(lam)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    if n is None or a is None:
        raise UsageError("give --lambda or both --n and --a")
    if n < 2:
        raise UsageError("--n must be at least 2")
    if not 0.0 < a < 1.0:
        raise UsageError("--a must lie in (0, 1)")
    if alpha is None:
        alpha = [1.0 - j / (n - 1) for j in range(1, n - 1)]
    if len(alpha) != n - 2:
        raise UsageError(f"--alpha needs n - 2 = {n - 2} values")
    if any(not 0.0 < t < 1.0 for t in alpha):
        raise UsageError("--alpha values must lie in (0, 1)")
    alpha = sorted(alpha, reverse=True)
    values = [1.0] + [t + (1.0 - t) * a for t in alpha] + [a]
    try:
        return quadratic.make_spectrum(values)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _add_spectrum_args(p: argparse.ArgumentParser, with_n: bool = True) -> None:
    p.add_argument("--lambda", dest="lam", type=_floats,
                   help="eigenvalues, comma separated, decreasing")
    if with_n:
        p.add_argument("--n", type=int, help="dimension (with --a)")
    p.add_argument("--alpha", type=_floats,
                   help="positions of the intermediate eigenvalues in (0, 1)")


# ---------------------------------------------------------------- commands

def cmd_roc_trace(args) -> Output:
    s = spectrum_from_args(args.lam, args.n, args.a, args.alpha)
    if args.x0 is not None and args.seed is not None:
        raise UsageError("give either --x0 or --seed, not both")
    if args.x0 == "worst":
        if s.n < 2:
            raise UsageError("the worst seed needs two eigenvalues")
        x0 = quadratic.worst_seed(s)
    elif args.x0 is not None:
        try:
            x0 = np.array(_floats(args.x0))
        except argparse.ArgumentTypeError as exc:
            raise UsageError(str(exc)) from exc
        if x0.shape != (s.n,):
            raise UsageError(f"--x0 needs {s.n} values")
        if not np.any(x0):
            raise UsageError("--x0 must be nonzero")
    else:
        seed = 0 if args.seed is None else args.seed
        x0 = roc.sample_unit_sphere(s.n, np.random.default_rng(seed))
    traj = quadratic.els_gd_run(x0, s, max_k=args.max_k, tol=args.tol)
    norms = [quadratic.a_norm(x, s) for x in traj.states]
    rows = [(k, norms[k], traj.shrink_factors[k], traj.step_sizes[k])
            for k in range(traj.steps)]
    final = norms[-1]
    converged = final <= args.tol * norms[0] or final < quadratic.UNDERFLOW_NORM
    summary = {
        "steps": traj.steps,
        "final_a_norm": final,
        "worst_case_roc": quadratic.worst_case_roc(s),
        "a": s.a,
        "x0": x0,
    }
    if traj.steps:
        summary["last_rho"] = traj.shrink_factors[-1]
    if s.n >= 3:
        summary["akaike_lower_bound"] = akaike.akaike_lower_bound(s)
    return Output({
        "k": "iteration index",
        "a_norm": "A-norm sqrt(x_k^T A x_k) before step k",
        "rho_k": "shrink factor ||x_{k+1}||_A / ||x_k||_A",
        "s_k": "exact line-search step size x^T A^2 x / x^T A^3 x",
    }, rows, summary, converged)


def _average_row_quad(a: float):
    if a == 1.0:
        return (a, 0.0, 0.0, 0.0, 0.0, 0)
    res = roc.average_roc_quadrature_2d(a)
    worst = (1.0 - a) / (1.0 + a)
    return (a, worst, res.mean, math.sqrt(roc.average_sq_roc_closed_form_2d(a)), 0.0, 0)


def cmd_average_roc(args) -> Output:
    if args.sweep is not None:
        if args.a is not None or args.lam is not None:
            raise UsageError("--sweep replaces --a/--lambda")
        if args.sweep < 0:
            raise UsageError("--sweep must be nonnegative")
        a_values = [10.0 ** (-k / 4) for k in range(args.sweep + 1)]
    else:
        a_values = args.a
    n = args.n
    if args.lam is not None:
        if a_values is not None or n is not None:
            raise UsageError("give either --lambda or --a/--n")
        spectra = [spectrum_from_args(args.lam, None, None, None)]
    else:
        if not a_values:
            raise UsageError("give --a, --sweep or --lambda")
        if any(not 0.0 < a <= 1.0 for a in a_values):
            raise UsageError("--a values must lie in (0, 1]")
        n = 2 if n is None else n
        if n < 2:
            raise UsageError("--n must be at least 2")
        spectra = []
        for a in a_values:
            if a == 1.0:
                spectra.append(None)
            else:
                spectra.append(spectrum_from_args(None, n, a, args.alpha))
    dims = {sp.n for sp in spectra if sp is not None} or {n or 2}
    if args.method == "quad" and dims != {2}:
        raise UsageError("--method quad only handles n = 2; use --method mc")

    rows, nonconv = [], 0
    for a, sp in zip(a_values or [spectra[0].a], spectra):
        if sp is None:
            rows.append((1.0, 0.0, 0.0, 0.0, 0.0, 0))
        elif args.method == "quad":
            rows.append(_average_row_quad(sp.a))
        else:
            r = roc.average_roc_monte_carlo(sp, args.samples, args.seed)
            nonconv += r.nonconverged
            rows.append((sp.a, quadratic.worst_case_roc(sp), r.mean, math.sqrt(r.mean_sq),
                         r.std_error, r.samples))
    summary = {"nonconverged": nonconv, "n": sorted(dims)[0]}
    if args.lam is not None and spectra[0].n >= 3:
        summary["akaike_lower_bound"] = akaike.akaike_lower_bound(spectra[0])
    return Output({
        "a": "lambda_n / lambda_1",
        "worst": "worst-case rate (1 - a) / (1 + a)",
        "average": "mean of rho* over seeds uniform on the unit sphere",
        "sqrt_avg_square": "sqrt of the mean of rho*^2",
        "std_error": "Monte Carlo standard error of 'average' (0 for quadrature)",
        "samples": "Monte Carlo sample count (0 for quadrature)",
    }, rows, summary, nonconv == 0)


def cmd_limit_angles(args) -> Output:
    s = spectrum_from_args(args.lam, args.n, args.a, args.alpha)
    if s.n < 3:
        raise UsageError("limit angles need n >= 3 (an intermediate eigenvalue)")
    if args.samples < 1 or args.bins < 1:
        raise UsageError("--samples and --bins must be positive")
    rho, ls, ok = roc.sample_rocs(s, args.samples, args.seed)
    hist = roc.angle_histogram(ls, ok, s.a, args.bins, args.seed)
    centers = hist.bin_centers
    rows = [(c, d, akaike.roc_from_s(akaike.s_from_theta(c, s.a), s.a))
            for c, d in zip(centers, hist.densities)]
    interval = akaike.attracting_interval(s)
    conv_s = ls[ok]
    outside = int(np.count_nonzero((conv_s < interval.lo - 1e-6) | (conv_s > interval.hi + 1e-6)))
    lo, hi = hist.mode_bin()
    summary = {
        "akaike_lower_bound": akaike.akaike_lower_bound(s),
        "worst_case_roc": quadratic.worst_case_roc(s),
        "atan_inv_a": math.atan(1.0 / s.a),
        "mode_bin": [lo, hi],
        "attracting_interval": [interval.lo, interval.hi],
        "outside_interval": outside,
        "nonconverged": hist.nonconverged,
        "samples": hist.samples,
        "mean_roc": float(np.mean(rho[ok])) if ok.any() else math.nan,
        "min_roc": float(np.min(rho[ok])) if ok.any() else math.nan,
        "spectrum": s.values,
    }
    return Output({
        "bin_center": "limit angle atan(sqrt(s / (1 - s)) / a), radians",
        "density": "histogram density (integrates to 1 over [0, pi/2])",
        "roc": "rate of convergence of a seed whose limit angle is bin_center",
    }, rows, summary, hist.nonconverged == 0)


def _pr_run(inst, x0, method: str, step: float, tol: float, max_k: int):
    obj = objectives.PhaseRetrievalObjective(inst)

    def stop(x):
        return objectives.pr_rel_error(inst, x) <= tol

    if method == "els":
        return quartic.els_gd_generic(obj, x0, tol_grad=0.0, max_k=max_k, stop=stop)
    return quartic.constant_step_generic(obj, x0, step, tol_grad=0.0, max_k=max_k, stop=stop)


def cmd_phase_retrieval(args) -> Output:
    if args.n < 1 or args.m < 1:
        raise UsageError("--n and --m must be positive")
    if args.n > 1000:
        raise UsageError("--n above 1000 is outside the supported desk scale")
    inst = objectives.gen_phase_retrieval(args.n, args.m, args.seed)
    x0 = inst.x_true.copy() if args.init == "truth" else objectives.spectral_init(inst)
    methods = ["els", "const"] if args.method == "both" else [args.method]
    rows, summary, ok_all = [], {}, True
    cond = objectives.hessian_cond(inst, inst.x_true)
    a = 1.0 / cond
    for method in methods:
        tr = _pr_run(inst, x0, method, args.step, args.tol, args.max_k)
        errs = [objectives.pr_rel_error(inst, x) for x in tr.xs]
        rows += [(method, k, e, f) for k, (e, f) in enumerate(zip(errs, tr.values))]
        K = tr.iterations
        contraction = (errs[-1] / errs[0]) ** (1.0 / K) if K and errs[0] > 0 else math.nan
        summary[method] = {"iterations": K, "converged": tr.converged,
                           "final_rel_error": errs[-1], "contraction": contraction}
        ok_all &= tr.converged
    if len(methods) == 2 and summary["const"]["iterations"]:
        summary["iteration_ratio"] = summary["els"]["iterations"] / summary["const"]["iterations"]
    summary.update(hessian_cond=cond, reference_rate=(1.0 - a) / (1.0 + a),
                   instance={"n": inst.n, "m": inst.m, "seed": inst.seed,
                             "normalize": inst.normalize})
    return Output({
        "method": "els (exact line search) or const (constant step)",
        "k": "iteration index",
        "rel_error": "min(||x - x_true||, ||x + x_true||) / ||x_true||",
        "f": "objective (1/4m) sum ((a_j^T x)^2 - y_j)^2",
    }, rows, summary, ok_all)


def cmd_rosenbrock(args) -> Output:
    if args.n < 2:
        raise UsageError("--n must be at least 2")
    if args.seeds < 1:
        raise UsageError("--seeds must be positive")
    xstar = np.ones(args.n)
    cond = float(np.linalg.cond(objectives.rosenbrock_hessian(xstar)))
    a = 1.0 / cond
    r = (1.0 - a) / (1.0 + a)
    Z = np.random.default_rng(args.seed).standard_normal((args.seeds, args.n))
    obj = objectives.RosenbrockObjective()
    rows, beat, ratios, ok_all = [], 0, [], True
    for run, z in enumerate(Z):
        x0 = xstar + z
        tr = quartic.els_gd_generic(obj, x0, tol_grad=0.0, max_k=args.max_k, f_tol=args.f_tol)
        f0 = tr.values[0]
        k_ref = math.ceil(math.log(args.f_tol / f0) / (2.0 * math.log(r))) if f0 > args.f_tol else 0
        for k, f in enumerate(tr.values):
            if k % args.stride == 0 or k == tr.iterations:
                rows.append((run, k, f, f0 * r ** (2 * k)))
        ok_all &= tr.converged
        beat += tr.converged and tr.iterations < k_ref
        if k_ref:
            ratios.append(tr.iterations / k_ref)
    summary = {
        "hessian_cond": cond,
        "reference_rate": r,
        "runs": args.seeds,
        "runs_beating_reference": beat,
        "fraction_beating_reference": beat / args.seeds,
        "median_iteration_ratio": float(np.median(ratios)) if ratios else math.nan,
    }
    return Output({
        "run": "run index (row of the seeded start matrix)",
        "k": "iteration index",
        "f": "Rosenbrock value at x_k",
        "reference": "worst-case curve f_0 ((1 - a) / (1 + a))^(2k), a = 1 / cond(Hessian at x*)",
    }, rows, summary, ok_all)


def hessian_table_row(n: int, seed: int, offset: float = 0.5) -> tuple:
    """Hessian condition numbers for one phase-retrieval size.

    m = round(n log2 n).  Conditions at x_true, at x_true + offset * a_1 / ||a_1||
    and at x_true + offset * z / ||z|| for three Gaussian directions z.
    """
    m = int(round(n * math.log2(n)))
    inst = objectives.gen_phase_retrieval(n, m, seed)
    rng = np.random.default_rng([seed, n])
    xs = inst.x_true
    a1 = inst.sensors[0]
    conds = [objectives.hessian_cond(inst, xs),
             objectives.hessian_cond(inst, xs + offset * a1 / np.linalg.norm(a1))]
    for _ in range(3):
        z = rng.standard_normal(n)
        conds.append(objectives.hessian_cond(inst, xs + offset * z / np.linalg.norm(z)))
    return (n, m, *conds)


def cmd_hessian_table(args) -> Output:
    sizes = args.sizes
    if not sizes:
        raise UsageError("--sizes must list at least one size")
    if any(n < 2 or n > 1000 for n in sizes):
        raise UsageError("--sizes must lie in [2, 1000]")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", objectives.IndefiniteHessianWarning)
        rows = [hessian_table_row(n, args.seed, args.offset) for n in sizes]
    cols = ["cond_at_xstar", "cond_along_a1", "cond_random_1", "cond_random_2", "cond_random_3"]
    # an indefinite Hessian contributes |lambda|max / |lambda|min instead
    summary = {"indefinite_hessians": sum(issubclass(w.category, objectives.IndefiniteHessianWarning)
                                          for w in caught)}
    if len(sizes) >= 2:
        for j, c in enumerate(cols):
            vals = [row[2 + j] for row in rows]
            rho = stats.spearmanr(sizes, vals)[0]
            summary[c] = {"spearman_vs_n": float(rho),
                          "strictly_increasing": bool(np.all(np.diff(vals) > 0))}
    return Output({
        "n": "signal dimension",
        "m": "number of measurements, round(n log2 n)",
        "cond_at_xstar": "Hessian condition number at x_true",
        "cond_along_a1": "condition number at x_true + offset a_1 / ||a_1||",
        "cond_random_1": "condition number at x_true + offset z / ||z||, Gaussian z",
        "cond_random_2": "as cond_random_1, second direction",
        "cond_random_3": "as cond_random_1, third direction",
    }, rows, summary, True)


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="elsgd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("roc-trace", help="per-step shrink factors of one run")
    _add_spectrum_args(p)
    p.add_argument("--a", type=float, help="lambda_n / lambda_1 (with --n)")
    p.add_argument("--x0", help="'worst' or comma-separated start vector")
    p.add_argument("--seed", type=int, help="draw x0 uniformly on the sphere")
    p.add_argument("--max-k", type=int, default=10_000)
    p.add_argument("--tol", type=float, default=1e-12, help="stop at ||x||_A <= tol ||x0||_A")
    p.set_defaults(func=cmd_roc_trace)

    p = sub.add_parser("average-roc", help="worst, average and rms rate of convergence")
    _add_spectrum_args(p)
    p.add_argument("--a", type=_floats, help="comma-separated a values")
    p.add_argument("--sweep", type=int, help="use a = 10^(-k/4) for k = 0..SWEEP")
    p.add_argument("--method", choices=["quad", "mc"], default="quad")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_average_roc)

    p = sub.add_parser("limit-angles", help="histogram of limit angles")
    _add_spectrum_args(p)
    p.add_argument("--a", type=float, help="lambda_n / lambda_1 (with --n)")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--bins", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_limit_angles)

    p = sub.add_parser("phase-retrieval", help="exact line search vs constant step")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--m", type=int, default=1000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--method", choices=["els", "const", "both"], default="both")
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--tol", type=float, default=1e-10, help="target relative error")
    p.add_argument("--max-k", type=int, default=5000)
    p.add_argument("--init", choices=["spectral", "truth"], default="spectral")
    p.set_defaults(func=cmd_phase_retrieval)

    p = sub.add_parser("rosenbrock", help="exact line search on the Rosenbrock function")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--seeds", type=int, default=100, help="number of seeded runs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--f-tol", type=float, default=1e-10)
    p.add_argument("--max-k", type=int, default=100_000)
    p.add_argument("--stride", type=int, default=1, help="write every STRIDE-th iterate")
    p.set_defaults(func=cmd_rosenbrock)

    p = sub.add_parser("hessian-table", help="phase-retrieval Hessian condition numbers")
    p.add_argument("--sizes", type=_ints, default=[100, 200, 400])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--offset", type=float, default=0.5)
    p.set_defaults(func=cmd_hessian_table)

    for p in sub.choices.values():
        p.add_argument("--out", required=True, help="CSV output path")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "command")}
    cfg = RunConfig(args.command, params, args.out)
    try:
        if getattr(args, "stride", 1) < 1:
            raise UsageError("--stride must be positive")
        res = args.func(args)
    except UsageError as exc:
        parser.error(f"{args.command}: {exc}")
    write_output(cfg, res)
    if not res.converged:
        print(f"{args.command}: numerical non-convergence, partial output in {args.out}",
              file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
