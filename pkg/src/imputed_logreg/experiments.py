"""Experiment drivers behind the command-line interface.

Every command maps a config record to a :class:`ResultTable`. Grid cells and
Monte Carlo trials are independent jobs; results are assembled in job order,
so the worker count never changes the output.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata
import csv
import io
import itertools
import math

import numpy as np

from .bayes import BayesParams, solve_overlap
from .config import CONFIG_TYPES, parse_config, serialize_config
from .errors import CompleteCaseEmpty, DegenerateSigma, InvalidParams, NotConverged
from .lab import (
    DesignSpec, GroundTruth, Observation, derive_seed, fit_ridge_logistic, make_dataset,
    ridge_logistic_newton, state_of,
)
from .quadrature import make_rule
from .state_evolution import (
    ProblemParams, optimal_lambda, phi_angle, phi_test, solve_fixed_point,
)


def library_version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


@dataclass
class ResultTable:
    """Rectangular table with a ``#``-prefixed metadata block.

    A row is fatal when its ``status`` starts with ``error``.
    """

    command: str
    columns: list
    config: object
    rows: list = field(default_factory=list)

    def __post_init__(self):
        for r in self.rows:
            if len(r) != len(self.columns):
                raise ValueError(f"row of length {len(r)} for {len(self.columns)} columns")

    @property
    def statuses(self):
        if "status" not in self.columns:
            return []
        k = self.columns.index("status")
        return [r[k] for r in self.rows]

    @property
    def has_fatal(self):
        return any(str(s).startswith("error") for s in self.statuses)

    def column(self, name):
        k = self.columns.index(name)
        return [r[k] for r in self.rows]

    def to_csv(self):
        buf = io.StringIO()
        buf.write(f"# artifact {library_version()}\n")
        buf.write(f"# command = {self.command}\n")
        for line in serialize_config(self.config).splitlines():
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()


def read_table(text):
    """Inverse of :meth:`ResultTable.to_csv`; cells stay as strings."""
    meta, body = [], []
    for line in text.splitlines():
        (meta if line.startswith("#") else body).append(line)
    command = None
    cfg_lines = []
    for line in meta[1:]:
        item = line[1:].strip()
        if item.startswith("command ="):
            command = item.split("=", 1)[1].strip()
        else:
            cfg_lines.append(item)
    cfg = parse_config("\n".join(cfg_lines), CONFIG_TYPES[command])
    rows = list(csv.reader(body))
    return ResultTable(command, rows[0], cfg, [tuple(r) for r in rows[1:]])


def run_jobs(fn, jobs, threads=1):
    """``[fn(j) for j in jobs]``, optionally on a process pool."""
    jobs = list(jobs)
    if threads <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, jobs))


def _problem(kind, lam, delta, R, alpha, alpha_2):
    return Observation(kind, alpha, alpha_2).problem_params(lam, delta, R)


def _grid_alpha_2(cfg):
    # alpha_2 is a free parameter only for the error-in-variables ensemble
    return cfg.alpha_2 if cfg.observation == "eiv" else (1.0,)


# fixed-point ---------------------------------------------------------------

FIXED_POINT_COLUMNS = [
    "lam", "delta", "R", "alpha_c", "alpha_2", "sigma_star", "xi_star", "gamma_star",
    "loss_value", "phi_test", "phi_angle", "residual_1", "residual_2", "residual_3",
    "iterations", "status",
]


def _fixed_point_row(job):
    kind, lam, delta, R, alpha, alpha_2, order = job
    nan = float("nan")
    try:
        params = _problem(kind, lam, delta, R, alpha, alpha_2)
    except InvalidParams:
        return [lam, delta, R, alpha, alpha_2] + [nan] * 9 + [0, "error:invalid_params"]
    rule = make_rule(order)
    status = "ok"
    try:
        fp = solve_fixed_point(params, rule)
    except NotConverged as exc:
        fp, status = exc.result, "error:not_converged"
    except DegenerateSigma as exc:
        fp, status = exc.result, "error:degenerate_sigma"
    if fp.sigma_star == 0 and fp.xi_star == 0:
        angle = nan
    else:
        angle = phi_angle(fp.state, params.R)
    return [
        params.lam, params.delta, params.R, params.alpha_c, params.alpha_2,
        fp.sigma_star, fp.xi_star, fp.gamma_star, fp.loss_value,
        phi_test(params, fp.state, rule), angle, *fp.residuals, fp.iterations, status,
    ]


def cmd_fixed_point(cfg, threads=1):
    jobs = [
        (cfg.observation, lam, d, R, a, a2, cfg.quad_order)
        for lam, d, R, a, a2 in itertools.product(
            cfg.lam, cfg.delta, cfg.R, cfg.alpha, _grid_alpha_2(cfg))
    ]
    return ResultTable("fixed-point", FIXED_POINT_COLUMNS, cfg, run_jobs(_fixed_point_row, jobs, threads))


# bayes ---------------------------------------------------------------------

BAYES_COLUMNS = [
    "alpha", "delta", "varrho", "q_star", "r_star", "rs_value",
    "bayes_test_error", "bayes_angle_error", "status",
]


def _bayes_row(job):
    alpha, delta, varrho, order = job
    try:
        params = BayesParams(alpha, delta, varrho)
        sol = solve_overlap(params, make_rule(order))
    except InvalidParams:
        return [alpha, delta, varrho] + [float("nan")] * 5 + ["error:invalid_params"]
    except NotConverged:
        return [alpha, delta, varrho] + [float("nan")] * 5 + ["error:not_converged"]
    return [
        alpha, delta, varrho, sol.q_star, sol.r_star, sol.rs_value,
        sol.test_error, sol.angle_error, "boundary" if sol.at_boundary else "ok",
    ]


def cmd_bayes(cfg, threads=1):
    jobs = [(a, d, R, cfg.quad_order) for a, d, R in itertools.product(cfg.alpha, cfg.delta, cfg.R)]
    return ResultTable("bayes", BAYES_COLUMNS, cfg, run_jobs(_bayes_row, jobs, threads))


# optimal-lambda ------------------------------------------------------------

OPTIMAL_LAMBDA_COLUMNS = [
    "delta", "R", "alpha_c", "alpha_2", "lambda_opt", "test_error",
    "sigma_star", "xi_star", "gamma_star", "n_evals", "status",
]


def _search(params, lo, hi, tol, rule):
    """Optimal lambda, then a cold solve there so the result is reproducible
    by a standalone fixed-point run at the printed lambda."""
    search = optimal_lambda(params, (lo, hi), rule, tol=tol)
    p = params.with_lambda(search.lambda_opt)
    fp = solve_fixed_point(p, rule)
    return search, fp, phi_test(p, fp.state, rule)


def _optimal_lambda_row(job):
    kind, delta, R, alpha, alpha_2, lo, hi, tol, order = job
    params = _problem(kind, 1.0, delta, R, alpha, alpha_2)
    head = [delta, R, params.alpha_c, params.alpha_2]
    try:
        search, fp, t = _search(params, lo, hi, tol, make_rule(order))
    except (NotConverged, DegenerateSigma):
        return head + [float("nan")] * 5 + [0, "error:not_converged"]
    return head + [search.lambda_opt, t, fp.sigma_star, fp.xi_star, fp.gamma_star, search.n_evals, "ok"]


def cmd_optimal_lambda(cfg, threads=1):
    jobs = [
        (cfg.observation, d, R, a, a2, cfg.lambda_min, cfg.lambda_max, cfg.lambda_tol, cfg.quad_order)
        for d, R, a, a2 in itertools.product(cfg.delta, cfg.R, cfg.alpha, _grid_alpha_2(cfg))
    ]
    return ResultTable("optimal-lambda", OPTIMAL_LAMBDA_COLUMNS, cfg,
                       run_jobs(_optimal_lambda_row, jobs, threads))


# contour -------------------------------------------------------------------

CONTOUR_COLUMNS = [
    "R", "delta", "lambda_opt", "T_opt", "sigma_star", "xi_star",
    "q_star", "bayes_test_error", "difference", "status",
]


def _contour_cell(job):
    alpha, R, delta, lo, hi, tol, order = job
    rule = make_rule(order)
    nan = float("nan")
    try:
        search, fp, t = _search(ProblemParams.single_imputation(1.0, delta, R, alpha), lo, hi, tol, rule)
    except (NotConverged, DegenerateSigma):
        return [R, delta, nan, nan, nan, nan, nan, nan, nan, "error:not_converged"]
    try:
        sol = solve_overlap(BayesParams(alpha, delta, R), rule)
    except NotConverged:
        return [R, delta, search.lambda_opt, t, fp.sigma_star, fp.xi_star, nan, nan, nan,
                "error:bayes_not_converged"]
    return [R, delta, search.lambda_opt, t, fp.sigma_star, fp.xi_star, sol.q_star,
            sol.test_error, t - sol.test_error, "ok"]


def cmd_contour(cfg, threads=1):
    jobs = [
        (cfg.alpha, R, d, cfg.lambda_min, cfg.lambda_max, cfg.lambda_tol, cfg.quad_order)
        for R, d in itertools.product(cfg.R, cfg.delta)
    ]
    return ResultTable("contour", CONTOUR_COLUMNS, cfg, run_jobs(_contour_cell, jobs, threads))


# simulate ------------------------------------------------------------------

SIMULATE_COLUMNS = [
    "delta", "n", "p", "observation", "lam", "trials_ok", "trials_failed",
    "test_mean", "test_se", "test_q25", "test_q50", "test_q75",
    "angle_mean", "angle_se", "angle_q25", "angle_q50", "angle_q75",
    "sigma_hat_mean", "sigma_hat_se", "xi_hat_mean", "xi_hat_se",
    "sigma_star", "xi_star", "phi_test", "phi_angle",
    "bayes_test_error", "bayes_angle_error", "status",
]


def _summary(values):
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return [float("nan")] * 5
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else float("nan")
    q25, q50, q75 = (float(q) for q in np.quantile(v, [0.25, 0.5, 0.75]))
    return [float(v.mean()), se, q25, q50, q75]


def _mean_se(values):
    return _summary(values)[:2]


def _simulate_asymptotics(job):
    """Lambda list and fixed points for one (delta, observation) pair."""
    cfg, delta, kind = job
    rule = make_rule(cfg.quad_order)
    obs = Observation(kind, cfg.alpha, cfg.alpha_2)
    out = []
    try:
        if cfg.lambda_policy == "opt":
            params = obs.problem_params(1.0, delta, cfg.R)
            search, fp, t = _search(params, cfg.lambda_min, cfg.lambda_max, cfg.lambda_tol, rule)
            out.append((search.lambda_opt, fp.sigma_star, fp.xi_star, t, phi_angle(fp.state, cfg.R), "ok"))
        else:
            for lam in cfg.lam:
                params = obs.problem_params(lam, delta, cfg.R)
                fp = solve_fixed_point(params, rule)
                out.append((lam, fp.sigma_star, fp.xi_star, phi_test(params, fp.state, rule),
                            phi_angle(fp.state, cfg.R), "ok"))
    except (NotConverged, DegenerateSigma):
        nan = float("nan")
        lams = cfg.lam if cfg.lambda_policy == "fixed" else (nan,)
        out = [(lam, nan, nan, nan, nan, "error:not_converged") for lam in lams]
    return out


def _simulate_bayes(job):
    alpha, delta, R, order = job
    try:
        sol = solve_overlap(BayesParams(alpha, delta, R), make_rule(order))
    except NotConverged:
        return float("nan"), float("nan")
    return sol.test_error, sol.angle_error


def _truth(cfg, n):
    return GroundTruth.make(cfg.p, cfg.R, kind=cfg.truth, n=n, seed=derive_seed(cfg.seed, 0))


def _simulate_trial(job):
    """Fit every (observation, lambda) on one trial's data.

    All observation kinds share the trial seed, hence the same design,
    labels, mask and holdout, so comparisons between them are paired.
    """
    cfg, i_delta, delta, k, lam_table = job
    n = int(round(delta * cfg.p))
    spec = DesignSpec(cfg.design, n, cfg.p)
    truth = _truth(cfg, n)
    seed = derive_seed(cfg.seed, 1, i_delta, k)
    results = []
    for kind, lams in zip(cfg.observation, lam_table):
        data = make_dataset(spec, truth, Observation(kind, cfg.alpha, cfg.alpha_2), seed)
        for lam in lams:
            if not lam > 0:
                results.append(None)
                continue
            try:
                rep = fit_ridge_logistic(data, lam, n_test=cfg.n_test)
            except NotConverged:
                results.append(None)
                continue
            results.append((rep.empirical_test_error, rep.angle, rep.sigma_hat, rep.xi_hat))
    return results


def cmd_simulate(cfg, threads=1):
    if cfg.lambda_policy not in ("opt", "fixed"):
        raise ValueError(f"lambda_policy must be 'opt' or 'fixed', got {cfg.lambda_policy!r}")
    table = ResultTable("simulate", SIMULATE_COLUMNS, cfg)
    if cfg.trials == 0:
        return table
    asym_jobs = [(cfg, d, kind) for d in cfg.delta for kind in cfg.observation]
    asym = run_jobs(_simulate_asymptotics, asym_jobs, threads)
    asym = {(d, kind): a for (_, d, kind), a in zip(asym_jobs, asym)}
    if cfg.bayes:
        bay = run_jobs(_simulate_bayes, [(cfg.alpha, d, cfg.R, cfg.quad_order) for d in cfg.delta], threads)
    else:
        bay = [(float("nan"), float("nan"))] * len(cfg.delta)

    trial_jobs = []
    for i, d in enumerate(cfg.delta):
        lam_table = [tuple(a[0] for a in asym[(d, kind)]) for kind in cfg.observation]
        trial_jobs += [(cfg, i, d, k, lam_table) for k in range(cfg.trials)]
    trials = run_jobs(_simulate_trial, trial_jobs, threads)

    for i, d in enumerate(cfg.delta):
        per_delta = trials[i * cfg.trials:(i + 1) * cfg.trials]
        slot = 0
        for kind in cfg.observation:
            for lam, s_star, x_star, t_star, a_star, a_status in asym[(d, kind)]:
                ok = [t[slot] for t in per_delta if t[slot] is not None]
                slot += 1
                failed = cfg.trials - len(ok)
                cols = list(zip(*ok)) if ok else [(), (), (), ()]
                if a_status != "ok":
                    status = a_status
                elif not ok:
                    status = "error:all_trials_failed"
                elif failed:
                    status = "partial"
                else:
                    status = "ok"
                table.rows.append([
                    d, int(round(d * cfg.p)), cfg.p, kind, lam, len(ok), failed,
                    *_summary(cols[0]), *_summary(cols[1]), *_mean_se(cols[2]), *_mean_se(cols[3]),
                    s_star, x_star, t_star, a_star, *bay[i], status,
                ])
    return table


# lowdim --------------------------------------------------------------------

LOWDIM_COLUMNS = [
    "n", "strategy", "trials_ok", "trials_failed", "angle_mean", "angle_se",
    "mse_mean", "mse_se", "status",
]
STRATEGIES = ("single", "prior", "complete")


def _lowdim_fit(strategy, cfg, spec, truth, seed):
    data = make_dataset(spec, truth, Observation(strategy if strategy != "complete" else "single", cfg.alpha), seed)
    if strategy == "complete":
        rows = data.mask.all(axis=1)
        if not rows.any():
            raise CompleteCaseEmpty
        z, y = data.design[rows], data.labels[rows]
    else:
        z, y = data.observed, data.labels
    fit = ridge_logistic_newton(z, y, cfg.lam)
    if not fit.converged:
        raise NotConverged("Newton did not converge")
    return fit.theta


def _lowdim_trial(job):
    cfg, i_n, n, k = job
    spec = DesignSpec(cfg.design, n, cfg.p)
    truth = GroundTruth.make(cfg.p, cfg.R)
    seed = derive_seed(cfg.seed, 1, i_n, k)
    out = []
    for strategy in cfg.strategies:
        try:
            theta = _lowdim_fit(strategy, cfg, spec, truth, seed)
        except CompleteCaseEmpty:
            out.append("CompleteCaseEmpty")
            continue
        except NotConverged:
            out.append("NotConverged")
            continue
        st = state_of(theta, truth)
        angle = phi_angle(st, truth.R) if (st.sigma > 0 or st.xi != 0) else math.pi / 2
        out.append((angle, float(np.sum((theta - truth.theta0) ** 2))))
    return out


def cmd_lowdim(cfg, threads=1):
    bad = [s for s in cfg.strategies if s not in STRATEGIES]
    if bad:
        raise ValueError(f"unknown strategies {bad}; expected a subset of {STRATEGIES}")
    table = ResultTable("lowdim", LOWDIM_COLUMNS, cfg)
    if cfg.trials == 0:
        return table
    jobs = [(cfg, i, n, k) for i, n in enumerate(cfg.n) for k in range(cfg.trials)]
    res = run_jobs(_lowdim_trial, jobs, threads)
    for i, n in enumerate(cfg.n):
        block = res[i * cfg.trials:(i + 1) * cfg.trials]
        for j, strategy in enumerate(cfg.strategies):
            ok = [b[j] for b in block if not isinstance(b[j], str)]
            flags = sorted({b[j] for b in block if isinstance(b[j], str)})
            failed = cfg.trials - len(ok)
            if not ok:
                status = "error:" + "+".join(flags)
            elif failed:
                status = "partial:" + "+".join(flags)
            else:
                status = "ok"
            angles = [a for a, _ in ok]
            mses = [m for _, m in ok]
            table.rows.append([n, strategy, len(ok), failed, *_mean_se(angles), *_mean_se(mses), status])
    return table


COMMANDS = {
    "fixed-point": cmd_fixed_point,
    "bayes": cmd_bayes,
    "contour": cmd_contour,
    "optimal-lambda": cmd_optimal_lambda,
    "simulate": cmd_simulate,
    "lowdim": cmd_lowdim,
}
