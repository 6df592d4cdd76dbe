"""Experiment engine behind ``solve``, ``estimate``, ``sweep`` and ``bench``.

A sweep is the full factorial grid ``seeds x n x d x lambda``.  Work is
split into groups sharing one trajectory and one projection, ``(seed, n,
d)``, and every random draw is keyed by the master seed plus the cell
coordinates, so the rows do not depend on the order in which groups run or
on how many workers run them.  Results are collected and written in cell
order by the parent process.
"""

import math
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from multiprocessing import get_context

import numpy as np
from threadpoolctl import threadpool_limits

from .. import _rng, bounds
from ..chain import (ChainError, ConvergenceError, exact_value, make_chain, mu_norm,
                     sample_trajectory, stationary_distribution)
from ..features import (FeatureError, FeatureMap, ProjectionOperator, SingularGramError, gram,
                        m_functional, make_features)
from ..kernels import BACKEND, _reference
from ..lstd import (fixed_point_residual, lstd_lambda_batch, lstd_lambda_rp_incremental,
                    lstd_rp_batch, model_fixed_point, solve_theta)
from ..rp import apply, identity_projection, sample_projection
from .config import ConfigError

ESTIMATORS = ("lstd_lambda_rp", "lstd_rp", "lstd_lambda")

RESULT_COLUMNS = [
    "config_hash", "cell", "seed", "n", "d", "lambda", "estimator", "status",
    "estimation_error", "approximation_error", "total_error",
    "estimation_bound", "approximation_bound", "total_bound", "bound_hypotheses_ok",
    "solve_kind", "condition_estimate",
]
TIMING_COLUMNS = ["config_hash", "cell", "estimator", "seconds", "backend"]


@dataclass
class Setup:
    """Exact quantities shared by every cell of an experiment."""

    mrp: object
    mu: object
    features: FeatureMap
    V: np.ndarray
    proj_F: ProjectionOperator
    approx_error_F: float
    m_pi_f_v: float
    _fixed_cache: dict = field(default_factory=dict, repr=False)

    @property
    def nu_F(self):
        return self.proj_F.gram.nu_min

    def baseline_fixed_point(self, lam):
        if lam not in self._fixed_cache:
            self._fixed_cache[lam] = model_fixed_point(self.mrp, self.mu, self.features, lam)
        return self._fixed_cache[lam]


def build_setup(cfg):
    """Chain, features and exact value; module precondition failures become config errors."""
    c, f = cfg.chain, cfg.features
    try:
        mrp = make_chain(c["kind"], c["n_states"], c.get("params"), seed=c["seed"],
                         gamma=c["gamma"], reward_kind=c.get("reward_kind"),
                         rewards=c.get("rewards"), strict=c.get("strict", True))
        mu = stationary_distribution(mrp)
        features = make_features(f["kind"], mrp.n_states, f["D"], L=f["L"], seed=f["seed"])
        proj_F = ProjectionOperator(features, mu)
    except (ChainError, FeatureError, SingularGramError, ConvergenceError) as exc:
        raise ConfigError([f"{type(exc).__name__}: {exc}"]) from exc
    V = exact_value(mrp)
    pi_V, alpha = proj_F.project(V)
    return Setup(mrp, mu, features, V, proj_F, mu_norm(mu, V - pi_V),
                 m_functional(alpha, features))


def _projection(cfg, d, D, key):
    if cfg.projection.get("identity", False):
        if d != D:
            raise ConfigError([f"identity projection needs d == D, got d={d}, D={D}"])
        return identity_projection(D)
    return sample_projection(d, D, cfg.seed, key)


def _trajectory(cfg, setup, traj_seed, n):
    rng = _rng.stream(cfg.seed, _rng.TRAJECTORY, traj_seed, n)
    return sample_trajectory(setup.mrp, n, traj_seed, stationary_start=cfg.stationary_start,
                             mu=setup.mu, rng=rng)


def bound_values(cfg, setup, n, d, lam):
    """Explicit bound parts for one grid point; ``nan`` where undefined."""
    inp = bounds.BoundInputs(n=n, d=d, D=setup.features.D, delta=cfg.delta,
                             gamma=setup.mrp.gamma, lam=lam, L=setup.features.L,
                             nu_F=setup.nu_F, v_max=setup.mrp.v_max, mixing=cfg.mixing,
                             m_pi_f_v=setup.m_pi_f_v)
    out = {"m_n_lambda": bounds.m_n_lambda(n, lam, inp.gamma),
           "approximation_coefficient": bounds.approximation_coefficient(lam, inp.gamma)}
    for key, fn in (("estimation_bound", lambda: bounds.estimation_bound(inp, strict=False)),
                    ("approximation_bound",
                     lambda: bounds.approximation_bound(inp, setup.approx_error_F, strict=False)),
                    ("total_bound",
                     lambda: bounds.total_bound(inp, setup.approx_error_F, strict=False).total_bound)):
        try:
            out[key] = fn()
        except bounds.BoundDomainError:
            out[key] = math.nan
    out["bound_hypotheses_ok"] = not any(not ok for ok, _ in bounds.total_hypotheses(inp))
    return out


def _error_row(base, message):
    row = dict(base, status=f"error: {message}")
    for k in ("estimation_error", "approximation_error", "total_error", "condition_estimate"):
        row[k] = math.nan
    row["solve_kind"] = ""
    return row


def run_group(cfg, setup, traj_seed, n, d, first_cell):
    """All ``lambda`` cells sharing one trajectory and one projection.

    Returns ``(rows, timings)``; estimator failures become error rows.
    """
    traj = _trajectory(cfg, setup, traj_seed, n)
    H = _projection(cfg, d, setup.features.D, traj_seed)
    Psi = apply(H, setup.features)
    rows, timings = [], []
    rp_fixed = {}
    for li, lam in enumerate(cfg.lambdas):
        cell = first_cell + li
        bvals = {lam_key: bound_values(cfg, setup, n, d, lam_key) for lam_key in {lam, 0.0}}
        for est in ESTIMATORS:
            base = {"config_hash": cfg.config_hash, "cell": cell, "seed": traj_seed, "n": n,
                    "d": d, "lambda": lam, "estimator": est}
            blam = 0.0 if est == "lstd_rp" else lam
            if est == "lstd_lambda":
                base.update(estimation_bound=math.nan, approximation_bound=math.nan,
                            total_bound=math.nan, bound_hypotheses_ok="")
            else:
                b = bvals[blam]
                base.update({k: b[k] for k in ("estimation_bound", "approximation_bound",
                                               "total_bound", "bound_hypotheses_ok")})
            try:
                t0 = time.perf_counter()
                if est == "lstd_lambda_rp":
                    sol = lstd_lambda_rp_incremental(traj, setup.features, H.H, setup.mrp.gamma, lam)
                elif est == "lstd_rp":
                    sol = lstd_rp_batch(traj, setup.features, H.H, setup.mrp.gamma)
                else:
                    sol = lstd_lambda_batch(traj, setup.features, setup.mrp.gamma, lam)
                elapsed = time.perf_counter() - t0
                if est == "lstd_lambda":
                    fp, basis = setup.baseline_fixed_point(lam), setup.features.Phi
                else:
                    if blam not in rp_fixed:
                        rp_fixed[blam] = model_fixed_point(setup.mrp, setup.mu, Psi, blam)
                    fp, basis = rp_fixed[blam], Psi.Phi
            except (np.linalg.LinAlgError, ValueError) as exc:
                rows.append(_error_row(base, exc))
                continue
            V_hat = basis @ sol.theta
            mu = setup.mu
            rows.append(dict(base, status="ok",
                             estimation_error=mu_norm(mu, V_hat - fp.V_fixed),
                             approximation_error=mu_norm(mu, setup.V - fp.V_fixed),
                             total_error=mu_norm(mu, setup.V - V_hat),
                             solve_kind=sol.solve_kind,
                             condition_estimate=sol.condition_estimate))
            timings.append({"config_hash": cfg.config_hash, "cell": cell, "estimator": est,
                            "seconds": elapsed, "backend": BACKEND})
    return rows, timings


# ---------------------------------------------------------------------------
# parallel driver

_WORKER = {}


def _worker_init(raw, seed):
    from .config import from_dict

    _WORKER["limits"] = threadpool_limits(1)
    cfg = from_dict(raw, seed_override=seed)
    _WORKER["cfg"], _WORKER["setup"] = cfg, build_setup(cfg)


def _worker_run(task):
    return run_group(_WORKER["cfg"], _WORKER["setup"], *task)


def _tasks(cfg):
    L = len(cfg.lambdas)
    tasks = []
    for si, s in enumerate(cfg.seeds):
        for ni, n in enumerate(cfg.ns):
            for di, d in enumerate(cfg.ds):
                first = ((si * len(cfg.ns) + ni) * len(cfg.ds) + di) * L
                tasks.append((s, n, d, first))
    return tasks


def resolve_jobs(jobs):
    if jobs is None:
        env = os.environ.get("PROJLSTD_JOBS")
        jobs = int(env) if env else 1
    if jobs < 1:
        raise ConfigError([f"jobs must be >= 1, got {jobs}"])
    return jobs


def run_grid(cfg, jobs=1, setup=None):
    """Run every cell; returns ``(rows, timings)`` in cell order."""
    tasks = _tasks(cfg)
    if jobs == 1 or len(tasks) == 1:
        setup = setup or build_setup(cfg)
        with threadpool_limits(1):
            results = [run_group(cfg, setup, *t) for t in tasks]
    else:
        build_setup(cfg)  # surface config errors before spawning
        ctx = get_context("spawn")
        with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx, initializer=_worker_init,
                                 initargs=(cfg.raw, cfg.seed)) as pool:
            results = list(pool.map(_worker_run, tasks))
    rows = [r for res in results for r in res[0]]
    timings = [t for res in results for t in res[1]]
    return rows, timings


# ---------------------------------------------------------------------------
# summaries

def _argmin(values):
    """Index of the smallest finite value (first on ties), or ``None``."""
    best = None
    for i, v in enumerate(values):
        if math.isfinite(v) and (best is None or v < values[best]):
            best = i
    return best


def _mean(xs):
    xs = [x for x in xs if math.isfinite(x)]
    return statistics.fmean(xs) if xs else math.nan


TRADEOFF_COLUMNS = [
    "config_hash", "n", "d", "lambda", "runs", "mean_estimation_error",
    "mean_approximation_error", "mean_total_error", "m_n_lambda", "estimation_bound",
    "approximation_coefficient", "approximation_bound", "total_bound",
]
SUMMARY_COLUMNS = [
    "config_hash", "axis", "n", "held_fixed", "empirical_argmin", "empirical_min_total_error",
    "reference_total_error", "bound_argmin", "bound_min_total",
]


def tradeoff_table(cfg, setup, rows, estimator="lstd_lambda_rp"):
    """Mean measured errors next to the bound components for each grid point."""
    grouped = {}
    for r in rows:
        if r["estimator"] == estimator and r["status"] == "ok":
            grouped.setdefault((r["n"], r["d"], r["lambda"]), []).append(r)
    out = []
    for n in cfg.ns:
        for d in cfg.ds:
            for lam in cfg.lambdas:
                rs = grouped.get((n, d, lam), [])
                b = bound_values(cfg, setup, n, d, lam)
                out.append({
                    "config_hash": cfg.config_hash, "n": n, "d": d, "lambda": lam,
                    "runs": len(rs),
                    "mean_estimation_error": _mean([r["estimation_error"] for r in rs]),
                    "mean_approximation_error": _mean([r["approximation_error"] for r in rs]),
                    "mean_total_error": _mean([r["total_error"] for r in rs]),
                    **{k: b[k] for k in ("m_n_lambda", "estimation_bound",
                                          "approximation_coefficient", "approximation_bound",
                                          "total_bound")},
                })
    return out


def argmin_summary(cfg, table):
    """Empirical and bound-predicted minimizers over ``lambda`` and over ``d``.

    For the ``lambda`` axis ``reference_total_error`` is the measured error
    at ``lambda = 0`` (``nan`` if 0 is not on the grid).
    """
    index = {(t["n"], t["d"], t["lambda"]): t for t in table}
    out = []
    for n in cfg.ns:
        for d in cfg.ds:
            ts = [index[(n, d, lam)] for lam in cfg.lambdas]
            out.append(_summary_row(cfg, "lambda", n, d, cfg.lambdas, ts,
                                    index.get((n, d, 0.0), {}).get("mean_total_error", math.nan)))
        for lam in cfg.lambdas:
            ts = [index[(n, d, lam)] for d in cfg.ds]
            out.append(_summary_row(cfg, "d", n, lam, cfg.ds, ts, math.nan))
    return out


def _summary_row(cfg, axis, n, held, grid, ts, reference):
    emp = _argmin([t["mean_total_error"] for t in ts])
    bnd = _argmin([t["total_bound"] for t in ts])
    return {
        "config_hash": cfg.config_hash, "axis": axis, "n": n, "held_fixed": held,
        "empirical_argmin": grid[emp] if emp is not None else math.nan,
        "empirical_min_total_error": ts[emp]["mean_total_error"] if emp is not None else math.nan,
        "reference_total_error": reference,
        "bound_argmin": grid[bnd] if bnd is not None else math.nan,
        "bound_min_total": ts[bnd]["total_bound"] if bnd is not None else math.nan,
    }


# ---------------------------------------------------------------------------
# solve

SOLVE_STATE_COLUMNS = ["state", "mu", "V", "pi_F_V", "pi_G_V"]
SOLVE_SUMMARY_COLUMNS = [
    "config_hash", "d", "D", "lambda", "nu_F", "nu_G", "approx_error_F", "approx_error_G",
    "approximation_error", "fixed_point_residual",
]


def solve_tables(cfg):
    """Exact quantities for the configured projection (``projection.d`` or the first grid ``d``).

    Returns ``(state_columns, state_rows, summary_rows)``; the state table
    carries one ``V_fixed_lambda=<value>`` column per grid ``lambda``.
    """
    setup = build_setup(cfg)
    d = int(cfg.projection.get("d", cfg.ds[0]))
    D = setup.features.D
    H = _projection(cfg, d, D, int(cfg.projection.get("seed", 0)))
    Psi = apply(H, setup.features)
    mu, V = setup.mu, setup.V
    try:
        proj_G = ProjectionOperator(Psi, mu)
    except SingularGramError as exc:
        raise ConfigError([f"projected Gram matrix is singular: {exc}"]) from exc
    pi_F_V, pi_G_V = setup.proj_F(V), proj_G(V)
    nu_G = gram(Psi, mu).nu_min
    columns = list(SOLVE_STATE_COLUMNS)
    states = [{"state": x, "mu": float(mu.mu[x]), "V": float(V[x]), "pi_F_V": float(pi_F_V[x]),
               "pi_G_V": float(pi_G_V[x])} for x in range(setup.mrp.n_states)]
    summary = []
    for lam in cfg.lambdas:
        fp = model_fixed_point(setup.mrp, mu, Psi, lam)
        col = f"V_fixed_lambda={lam!r}"
        columns.append(col)
        for x, row in enumerate(states):
            row[col] = float(fp.V_fixed[x])
        summary.append({
            "config_hash": cfg.config_hash, "d": d, "D": D, "lambda": lam,
            "nu_F": setup.nu_F, "nu_G": nu_G, "approx_error_F": setup.approx_error_F,
            "approx_error_G": mu_norm(mu, V - pi_G_V),
            "approximation_error": mu_norm(mu, V - fp.V_fixed),
            "fixed_point_residual": fixed_point_residual(setup.mrp, mu, Psi, lam, fp.V_fixed,
                                                         proj=proj_G),
        })
    return columns, states, summary


# ---------------------------------------------------------------------------
# timing benchmark

BENCH_DEFAULTS = {"D": 2048, "d": 32, "n": 10000, "lambda": 0.5, "gamma": 0.9,
                  "repeats": 5, "warmup": 1, "equal_dim": {"D": 256, "n": 2000},
                  "include_python": True}
BENCH_COLUMNS = ["label", "estimator", "backend", "D", "d", "n", "lambda", "repeats",
                 "median_s", "min_s", "max_s"]
BENCH_SUMMARY_COLUMNS = ["metric", "value"]


def _timeit(fn, repeats, warmup):
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), min(times), max(times)


def _bench_problem(D, n, gamma, seed):
    """Ring chain on ``D`` states with a cosine basis (orthogonal by construction)."""
    mrp = make_chain("ring", D, {"stay": 0.1}, seed=seed, gamma=gamma)
    features = make_features("fourier_on_index", D, D, validate=False)
    mu = np.full(D, 1.0 / D)  # ring chains are doubly stochastic
    traj = sample_trajectory(mrp, n, seed, mu=mu, rng=_rng.stream(seed, _rng.TRAJECTORY, n, D))
    return mrp, features, traj


def _rp_incremental(traj, Phi, d, D, gamma, lam, seed, accumulate=None):
    H = sample_projection(d, D, seed).H
    if accumulate is None:
        return lstd_lambda_rp_incremental(traj, Phi, H, gamma, lam)
    A, b = accumulate(Phi, H, traj.states, traj.rewards, gamma, lam)
    return solve_theta(A, b)


def _rp_batch(traj, Phi, d, D, gamma, lam, seed):
    H = sample_projection(d, D, seed).H
    # only the visited rows are projected
    visited = np.unique(traj.states)
    Psi = np.zeros((Phi.shape[0], d))
    Psi[visited] = Phi[visited] @ H.T
    return lstd_lambda_batch(traj, Psi, gamma, lam)


def run_bench(cfg):
    """Median-of-k wall-clock comparison, single-threaded BLAS.

    Returns ``(rows, summary)``.
    """
    p = dict(BENCH_DEFAULTS, **cfg.bench)
    D, d, n, lam, gamma = int(p["D"]), int(p["d"]), int(p["n"]), float(p["lambda"]), float(p["gamma"])
    reps, warm = int(p["repeats"]), int(p["warmup"])
    seed = cfg.seed
    rows, times = [], {}

    def record(label, est, backend, D_, d_, n_, fn):
        med, lo, hi = _timeit(fn, reps, warm)
        times[label] = med
        rows.append({"label": label, "estimator": est, "backend": backend, "D": D_, "d": d_,
                     "n": n_, "lambda": lam, "repeats": reps, "median_s": med, "min_s": lo,
                     "max_s": hi})

    with threadpool_limits(1):
        _, feats, traj = _bench_problem(D, 2 * n, gamma, seed)
        Phi = feats.Phi
        half = type(traj)(traj.states[:n], traj.rewards[:n], traj.seed, traj.stationary_start)
        record("baseline", "lstd_lambda", "blas", D, D, n,
               lambda: lstd_lambda_batch(half, Phi, gamma, lam))
        record("rp_incremental", "lstd_lambda_rp", BACKEND, D, d, n,
               lambda: _rp_incremental(half, Phi, d, D, gamma, lam, seed))
        record("rp_incremental_2n", "lstd_lambda_rp", BACKEND, D, d, 2 * n,
               lambda: _rp_incremental(traj, Phi, d, D, gamma, lam, seed))
        record("rp_batch", "lstd_lambda_rp", "blas", D, d, n,
               lambda: _rp_batch(half, Phi, d, D, gamma, lam, seed))
        if p.get("include_python", True):
            record("rp_incremental_python", "lstd_lambda_rp", "python", D, d, n,
                   lambda: _rp_incremental(half, Phi, d, D, gamma, lam, seed,
                                           accumulate=_reference.lstd_accumulate))
        eq = p.get("equal_dim") or {}
        if eq:
            De, ne = int(eq["D"]), int(eq["n"])
            _, fe, te = _bench_problem(De, ne, gamma, seed)
            record("equal_dim_baseline", "lstd_lambda", "blas", De, De, ne,
                   lambda: lstd_lambda_batch(te, fe.Phi, gamma, lam))
            record("equal_dim_rp_batch", "lstd_lambda_rp", "blas", De, De, ne,
                   lambda: _rp_batch(te, fe.Phi, De, De, gamma, lam, seed))

    summary = [
        {"metric": "backend", "value": BACKEND},
        {"metric": "speedup_rp_incremental", "value": times["baseline"] / times["rp_incremental"]},
        {"metric": "speedup_rp_batch", "value": times["baseline"] / times["rp_batch"]},
        {"metric": "doubling_ratio_rp_incremental",
         "value": times["rp_incremental_2n"] / times["rp_incremental"]},
    ]
    if "rp_incremental_python" in times:
        summary.append({"metric": "compiled_over_python_speedup",
                        "value": times["rp_incremental_python"] / times["rp_incremental"]})
    if "equal_dim_baseline" in times:
        summary.append({"metric": "equal_dim_ratio",
                        "value": times["equal_dim_rp_batch"] / times["equal_dim_baseline"]})
    return rows, summary
