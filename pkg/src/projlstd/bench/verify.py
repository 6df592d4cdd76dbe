"""Statistical and deterministic verification suites.

Each suite returns rows ``{suite, check, params, empirical, analytic, slack,
passed}``.  Statistical checks compare a Monte-Carlo rate against an
analytic rate with a ``3 sigma`` binomial allowance; deterministic checks
require every trial to pass.  Parameters come from the config's ``verify``
section, keyed by suite name, over the defaults below.
"""

import json

import numpy as np
from threadpoolctl import threadpool_limits

from .. import _rng, bounds
from ..chain import (bellman_lambda, exact_value, make_chain, mu_norm, sample_trajectory,
                     stationary_distribution)
from ..features import ProjectionOperator, make_features
from ..lstd import lstd_lambda_rp_incremental, model_fixed_point
from ..rp import (apply, binomial_slack, inner_product_min_dim, gram_eig_relation_rate,
                  inner_product_distortion, jl_distortion_rate, jl_failure_bound,
                  sample_projection)
from .experiments import build_setup

SUITES = ("jl", "contraction", "gram_eig", "mixing", "bounds_cert")
COLUMNS = ["suite", "check", "params", "empirical", "analytic", "slack", "passed"]

DEFAULTS = {
    "jl": {"D": 256, "n_vectors": 10000, "n_draws": 50, "cases": [[64, 0.5], [128, 0.3]],
           "inner": {"n": 100, "delta": 0.05, "eps": 0.5, "D": 512, "n_draws": 400,
                     "min_fraction": 0.95}},
    "contraction": {"pairs": 1000, "lambdas": [0.0, 0.25, 0.5, 0.75, 1.0], "tol": 1e-10},
    "gram_eig": {"D": 1024, "d": 16, "delta": 0.1, "n_draws": 1000},
    "mixing": {"trajectories": 500, "n": 2000, "delta": 0.1},
    "bounds_cert": {
        "runs": 200, "delta": 0.1, "n": 1000, "lambda": 0.5, "target": 0.9,
        "chain": {"kind": "random_ergodic", "n_states": 300, "gamma": 0.9,
                  "reward_kind": "uniform"},
        "features": {"kind": "random_bounded", "D": 280, "L": 1.0}, "d": 180,
        "approx_projections": 500, "approx_lambdas": [0.0, 0.5, 0.9], "approx_tol": 1e-9,
    },
}


def suite_params(cfg, suite):
    params = dict(DEFAULTS[suite])
    params.update(cfg.verify.get(suite, {}))
    return params


def _row(suite, check, params, empirical, analytic, slack, passed):
    return {"suite": suite, "check": check, "params": json.dumps(params, sort_keys=True),
            "empirical": float(empirical), "analytic": float(analytic), "slack": float(slack),
            "passed": bool(passed)}


def _projection_dim(cfg):
    return int(cfg.projection.get("d", cfg.ds[0]))


def run_jl(cfg, p):
    rows = []
    D = int(p["D"])
    rng = _rng.stream(cfg.seed, _rng.VERIFY, 0)
    U = rng.standard_normal((int(p["n_vectors"]), D))
    for d, eps in p["cases"]:
        rates = [jl_distortion_rate(sample_projection(d, D, cfg.seed, 100, k), U, eps)
                 for k in range(int(p["n_draws"]))]
        bound = jl_failure_bound(d, eps)
        slack = binomial_slack(bound, U.shape[0] * len(rates))
        rate = float(np.mean(rates))
        rows.append(_row("jl", "norm_distortion", {"d": d, "eps": eps, "D": D}, rate, bound,
                         slack, rate <= bound + slack))
    q = p["inner"]
    n, delta, eps, Dq = int(q["n"]), float(q["delta"]), float(q["eps"]), int(q["D"])
    d = inner_product_min_dim(n, delta, eps)
    rng = _rng.stream(cfg.seed, _rng.VERIFY, 1)
    us, w = rng.standard_normal((n, Dq)), rng.standard_normal(Dq)
    ok = [inner_product_distortion(sample_projection(d, Dq, cfg.seed, 200, k), us, w) <= eps
          for k in range(int(q["n_draws"]))]
    frac = float(np.mean(ok))
    rows.append(_row("jl", "inner_product", {"n": n, "delta": delta, "eps": eps, "d": d, "D": Dq},
                     frac, q["min_fraction"], 0.0, frac >= q["min_fraction"]))
    return rows


def run_contraction(cfg, p):
    setup = build_setup(cfg)
    mrp, mu = setup.mrp, setup.mu
    d = _projection_dim(cfg)
    Psi = apply(sample_projection(d, setup.features.D, cfg.seed, 300), setup.features)
    proj = ProjectionOperator(Psi, mu)
    rng = _rng.stream(cfg.seed, _rng.VERIFY, 2)
    rows = []
    for lam in p["lambdas"]:
        coef = mrp.gamma * (1.0 - lam) / (1.0 - mrp.gamma * lam)
        violations = 0
        for _ in range(int(p["pairs"])):
            f1, f2 = rng.standard_normal((2, mrp.n_states)) * 10.0
            lhs = mu_norm(mu, proj(bellman_lambda(mrp, lam, f1)) - proj(bellman_lambda(mrp, lam, f2)))
            violations += lhs > coef * mu_norm(mu, f1 - f2) + p["tol"]
        rows.append(_row("contraction", "projected_multistep", {"lambda": lam, "d": d},
                         violations, 0, 0.0, violations == 0))
    return rows


def run_gram_eig(cfg, p):
    D, d, delta, draws = int(p["D"]), int(p["d"]), float(p["delta"]), int(p["n_draws"])
    mrp = make_chain("random_ergodic", D, seed=cfg.seed)
    mu = stationary_distribution(mrp)
    feats = make_features("fourier_on_index", D, D)
    rate, bound, nu_F = gram_eig_relation_rate(feats, mu, d, delta, draws, cfg.seed)
    target = 1.0 - delta
    slack = binomial_slack(target, draws)
    return [_row("gram_eig", "min_eigenvalue_relation",
                 {"D": D, "d": d, "delta": delta, "nu_F": nu_F, "lower_bound": bound},
                 rate, target, slack, rate >= target - slack)]


def run_mixing(cfg, p):
    setup = build_setup(cfg)
    mrp, mu = setup.mrp, setup.mu
    n, delta, T = int(p["n"]), float(p["delta"]), int(p["trajectories"])
    h = np.cos(2.0 * np.pi * np.arange(mrp.n_states) / mrp.n_states)
    M_h = float(np.max(np.abs(h)))
    mean_h = float(mu.mu @ h)
    radius = bounds.mixing_hoeffding_radius(n, delta, M_h, cfg.mixing)
    exceed = 0
    for k in range(T):
        traj = sample_trajectory(mrp, n, k, mu=mu, rng=_rng.stream(cfg.seed, _rng.VERIFY, 3, k))
        exceed += abs(float(np.mean(h[traj.states])) - mean_h) > radius
    rate = exceed / T
    slack = binomial_slack(delta, T)
    return [_row("mixing", "hoeffding_radius",
                 {"n": n, "delta": delta, "trajectories": T, "radius": radius},
                 rate, delta, slack, rate <= delta + slack)]


def _approximation_inequality(cfg, p):
    """Deterministic given the projection: ||V - V_fixed|| <= coef ||V - Pi_G V||."""
    setup = build_setup(cfg)
    mrp, mu, V = setup.mrp, setup.mu, setup.V
    d = _projection_dim(cfg)
    rows = []
    for lam in p["approx_lambdas"]:
        coef = bounds.approximation_coefficient(lam, mrp.gamma)
        violations = 0
        for k in range(int(p["approx_projections"])):
            Psi = apply(sample_projection(d, setup.features.D, cfg.seed, 400, k), setup.features)
            V_fixed = model_fixed_point(mrp, mu, Psi, lam).V_fixed
            resid = mu_norm(mu, V - ProjectionOperator(Psi, mu)(V))
            violations += mu_norm(mu, V - V_fixed) > coef * resid + p["approx_tol"]
        rows.append(_row("bounds_cert", "approximation_inequality",
                         {"lambda": lam, "d": d, "projections": int(p["approx_projections"])},
                         violations, 0, 0.0, violations == 0))
    return rows


def certification_setup(cfg, p):
    c, f = p["chain"], p["features"]
    mrp = make_chain(c["kind"], c["n_states"], c.get("params"), seed=cfg.seed,
                     gamma=c.get("gamma", 0.9), reward_kind=c.get("reward_kind"))
    mu = stationary_distribution(mrp)
    feats = make_features(f["kind"], mrp.n_states, f["D"], L=f.get("L", 1.0), seed=cfg.seed)
    proj_F = ProjectionOperator(feats, mu)
    V = exact_value(mrp)
    pi_V, alpha = proj_F.project(V)
    inp = bounds.BoundInputs(n=int(p["n"]), d=int(p["d"]), D=feats.D, delta=float(p["delta"]),
                             gamma=mrp.gamma, lam=float(p["lambda"]), L=feats.L,
                             nu_F=proj_F.gram.nu_min, v_max=mrp.v_max, mixing=cfg.mixing,
                             m_pi_f_v=float(np.linalg.norm(alpha) * feats.max_row_norm()))
    return mrp, mu, feats, V, mu_norm(mu, V - pi_V), inp


def run_bounds_cert(cfg, p):
    rows = _approximation_inequality(cfg, p)
    mrp, mu, feats, V, approx_F, inp = certification_setup(cfg, p)
    est_bound = bounds.estimation_bound(inp, strict=True)
    app_bound = bounds.approximation_bound(inp, approx_F, strict=True)
    runs = int(p["runs"])
    est_ok = app_ok = 0
    for k in range(runs):
        traj = sample_trajectory(mrp, inp.n, k, mu=mu,
                                 rng=_rng.stream(cfg.seed, _rng.VERIFY, 5, k))
        H = sample_projection(inp.d, inp.D, cfg.seed, 500, k)
        Psi = apply(H, feats)
        V_fixed = model_fixed_point(mrp, mu, Psi, inp.lam).V_fixed
        sol = lstd_lambda_rp_incremental(traj, feats, H, mrp.gamma, inp.lam)
        est_ok += mu_norm(mu, Psi.Phi @ sol.theta - V_fixed) <= est_bound
        app_ok += mu_norm(mu, V - V_fixed) <= app_bound
    target = float(p["target"])
    params = {"n": inp.n, "d": inp.d, "D": inp.D, "delta": inp.delta, "lambda": inp.lam,
              "runs": runs, "h_term_omitted": True}
    slack = binomial_slack(target, runs)
    rows.append(_row("bounds_cert", "estimation_bound", dict(params, bound=est_bound),
                     est_ok / runs, target, slack, est_ok / runs >= target - slack))
    target_a = 1.0 - inp.delta
    slack_a = binomial_slack(target_a, runs)
    rows.append(_row("bounds_cert", "approximation_bound", dict(params, bound=app_bound),
                     app_ok / runs, target_a, slack_a, app_ok / runs >= target_a - slack_a))
    return rows


RUNNERS = {"jl": run_jl, "contraction": run_contraction, "gram_eig": run_gram_eig,
           "mixing": run_mixing, "bounds_cert": run_bounds_cert}


def run_suite(cfg, suite):
    if suite not in RUNNERS:
        raise ValueError(f"unknown suite {suite!r}; choose from {SUITES}")
    with threadpool_limits(1):
        return RUNNERS[suite](cfg, suite_params(cfg, suite))
