"""Acceptance criteria, one test per criterion.

Each test records a ``ACCEPTANCE k PASS|FAIL`` line (shown in the terminal
summary) before asserting, so a failure still leaves its line behind.
"""
import filecmp
import math
import os
import subprocess
import sys
import time
from contextlib import contextmanager

import numpy as np
import pytest

from projlstd import _rng
from projlstd.bench import cli, experiments, io, verify
from projlstd.bench.config import from_dict, load
from projlstd.chain import exact_value, sample_trajectory, stationary_distribution
from projlstd.features import make_features
from projlstd.lstd import (fixed_point_residual, lstd_lambda_batch, lstd_lambda_rp_incremental,
                           lstd_rp_batch, model_fixed_point)
from projlstd.rp import apply, identity_projection, sample_projection

from .conftest import ACCEPTANCE_LINES, random_mrp


class Criterion:
    def __init__(self, number, title, limit_s):
        self.number, self.title, self.limit_s = number, title, limit_s
        self.detail = ""
        self.ok = False


@contextmanager
def criterion(number, title, limit_s, prior_s=0.0):
    """``prior_s`` counts work done in a shared fixture before the block."""
    c = Criterion(number, title, limit_s)
    start = time.perf_counter()
    try:
        yield c
    finally:
        elapsed = time.perf_counter() - start + prior_s
        in_time = elapsed < limit_s
        verdict = "PASS" if c.ok and in_time else "FAIL"
        ACCEPTANCE_LINES.append(f"ACCEPTANCE {number} {verdict} {title}: {c.detail} "
                                f"[{elapsed:.1f}s < {limit_s:g}s: {in_time}]")
    assert in_time, f"criterion {number} took {elapsed:.1f}s"


def rel(x, y):
    x, y = np.asarray(x), np.asarray(y)
    return float(np.linalg.norm(x - y) / max(np.linalg.norm(y), 1e-300))


def random_problem(k, n):
    """Seeded random chain, features, projection and trajectory for config ``k``."""
    rng = _rng.stream(k, _rng.VERIFY, 50)
    S = int(rng.integers(6, 30))
    D = int(rng.integers(3, S + 1))
    d = int(rng.integers(1, D + 1))
    lam = float(rng.choice([0.0, 1.0, rng.random()]))
    mrp = random_mrp(k, S, gamma=float(rng.uniform(0.5, 0.95)))
    mu = stationary_distribution(mrp)
    fm = make_features("random_bounded", S, D, seed=k)
    H = sample_projection(d, D, k)
    traj = sample_trajectory(mrp, n, seed=k, mu=mu)
    return mrp, mu, fm, H, traj, lam


def worst(pairs):
    return max(rel(a, b) for a, b in pairs)


class TestAcceptance:
    def test_01_reductions(self):
        with criterion(1, "reductions to LSTD-RP and LSTD(lambda)", 10) as c:
            errs = []
            for k in range(50):
                mrp, _, fm, H, traj, lam = random_problem(k, 400)
                a = lstd_lambda_rp_incremental(traj, fm, H, mrp.gamma, 0.0)
                b = lstd_rp_batch(traj, fm, H, mrp.gamma)
                errs.append(worst([(a.A_hat, b.A_hat), (a.b_hat, b.b_hat), (a.theta, b.theta)]))
                a = lstd_lambda_rp_incremental(traj, fm, identity_projection(fm.D), mrp.gamma, lam)
                b = lstd_lambda_batch(traj, fm, mrp.gamma, lam)
                errs.append(worst([(a.A_hat, b.A_hat), (a.b_hat, b.b_hat), (a.theta, b.theta)]))
            c.ok = max(errs) <= 1e-10
            c.detail = f"max relative error {max(errs):.2e} over 50 configs (limit 1e-10)"
        assert c.ok, c.detail

    def test_02_incremental_equals_batch(self):
        with criterion(2, "incremental running average equals batch sums", 10) as c:
            errs = []
            for k in range(100):
                mrp, _, fm, H, traj, lam = random_problem(1000 + k, 300)
                a = lstd_lambda_rp_incremental(traj, fm, H, mrp.gamma, lam)
                b = lstd_lambda_batch(traj, apply(H, fm), mrp.gamma, lam)
                errs.append(worst([(a.A_hat, b.A_hat), (a.b_hat, b.b_hat)]))
            c.ok = max(errs) <= 1e-10
            c.detail = f"max relative error {max(errs):.2e} over 100 configs (limit 1e-10)"
        assert c.ok, c.detail

    def test_03_fixed_point(self):
        with criterion(3, "model fixed point", 20) as c:
            resid = []
            for k in range(100):
                mrp, mu, fm, H, _, lam = random_problem(2000 + k, 2)
                Psi = apply(H, fm)
                fp = model_fixed_point(mrp, mu, Psi, lam)
                resid.append(fixed_point_residual(mrp, mu, Psi, lam, fp.V_fixed))
            exact = []
            for k in range(20):
                mrp = random_mrp(3000 + k, 5 + k)
                mu = stationary_distribution(mrp)
                fm = make_features("one_hot", mrp.n_states, mrp.n_states)
                for lam in (0.0, 0.5, 1.0):
                    V_fixed = model_fixed_point(mrp, mu, fm, lam).V_fixed
                    exact.append(float(np.max(np.abs(V_fixed - exact_value(mrp)))))
            c.ok = max(resid) <= 1e-8 and max(exact) <= 1e-9
            c.detail = (f"max residual {max(resid):.2e} (limit 1e-8), "
                        f"one-hot max |V_fixed - V| {max(exact):.2e} (limit 1e-9)")
        assert c.ok, c.detail

    def test_04_contraction(self):
        cfg = load(cli.default_config_path("ring5.json"))
        with criterion(4, "projected multistep contraction", 10) as c:
            rows = verify.run_suite(cfg, "contraction")
            total = sum(int(r["empirical"]) for r in rows)
            c.ok = len(rows) == 5 and total == 0 and all(r["passed"] for r in rows)
            c.detail = f"{total} violations over 1000 pairs x {len(rows)} lambdas"
        assert c.ok, c.detail

    def test_05_approximation_inequality(self):
        cfg = load(cli.default_config_path("ring5.json"))
        with criterion(5, "deterministic approximation inequality", 30) as c:
            rows = verify._approximation_inequality(cfg, verify.suite_params(cfg, "bounds_cert"))
            total = sum(int(r["empirical"]) for r in rows)
            c.ok = len(rows) == 3 and total == 0
            c.detail = f"{total} violations over 500 projections x lambda in (0, 0.5, 0.9)"
        assert c.ok, c.detail

    def test_06_jl(self):
        cfg = load(cli.default_config_path("ring5.json"))
        with criterion(6, "JL norm distortion", 60) as c:
            rows = [r for r in verify.run_suite(cfg, "jl") if r["check"] == "norm_distortion"]
            c.ok = len(rows) == 2 and all(r["passed"] for r in rows)
            c.detail = ", ".join(f"{r['params']}: rate {r['empirical']:.4f} <= "
                                 f"{r['analytic']:.4f} + {r['slack']:.4f}" for r in rows)
        assert c.ok, c.detail

    def test_07_gram_eigenvalue(self):
        cfg = load(cli.default_config_path("ring5.json"))
        with criterion(7, "projected Gram eigenvalue relation", 60) as c:
            (row,) = verify.run_suite(cfg, "gram_eig")
            c.ok = row["passed"]
            c.detail = (f"rate {row['empirical']:.3f} >= {row['analytic']:.2f} - "
                        f"{row['slack']:.3f} over 1000 draws")
        assert c.ok, c.detail

    def test_08_estimation_rate(self):
        raw = load(cli.default_config_path("ring5.json")).raw
        grid = {"lambdas": [0.5], "n": [1000, 10000, 100000], "d": [3]}
        cfg = from_dict(dict(raw, grid=grid, seeds={"count": 20}))
        with criterion(8, "estimation error rate", 300) as c:
            rows, _ = experiments.run_grid(cfg)
            ns = cfg.ns
            means = [np.mean([r["estimation_error"] for r in rows
                              if r["n"] == n and r["estimator"] == "lstd_lambda_rp"]) for n in ns]
            slope = float(np.polyfit(np.log(ns), np.log(means), 1)[0])
            c.ok = -0.65 <= slope <= -0.35
            c.detail = f"log-log slope {slope:.3f} (window [-0.65, -0.35])"
        assert c.ok, c.detail

    def test_09_bound_certification(self):
        cfg = load(cli.default_config_path("ring5.json"))
        with criterion(9, "estimation bound certification", 300) as c:
            rows = verify.run_suite(cfg, "bounds_cert")
            (row,) = [r for r in rows if r["check"] == "estimation_bound"]
            c.ok = row["passed"] and math.isfinite(row["empirical"])
            c.detail = (f"coverage {row['empirical']:.3f} >= {row['analytic']:.2f} - "
                        f"{row['slack']:.3f} over 200 runs, h-term omitted")
        assert c.ok, c.detail

    def test_10_complexity(self, bench_summary):
        summary, elapsed = bench_summary
        with criterion(10, "RP speedup over full-dimension LSTD(lambda)", 300, elapsed) as c:
            speedup = summary["speedup_rp_incremental"]
            c.ok = speedup >= 5.0
            c.detail = f"median-of-5 speedup {speedup:.1f}x at D=2048, d=32, n=1e4"
        assert c.ok, c.detail

    def test_11_lambda_tradeoff(self, tmp_path):
        with criterion(11, "lambda trade-off", 300) as c:
            out = tmp_path / "sweep"
            code = cli.main(["sweep", "--config", cli.default_config_path("ring_sweep.json"),
                             "--out", str(out), "-q"])
            table = io.read_csv(str(out / "tradeoff.csv"))
            summary = [r for r in io.read_csv(str(out / "summary.csv")) if r["axis"] == "lambda"]
            problems = []
            for d in sorted({r["d"] for r in table}):
                group = sorted((r for r in table if r["d"] == d), key=lambda r: float(r["lambda"]))
                est = [float(r["estimation_bound"]) for r in group]
                coef = [float(r["approximation_coefficient"]) for r in group]
                if not all(np.isfinite(est)) or np.any(np.diff(est) < 0):
                    problems.append(f"d={d}: estimation bound not nondecreasing")
                if np.any(np.diff(coef) >= 0):
                    problems.append(f"d={d}: approximation coefficient not decreasing")
            for r in summary:
                if float(r["empirical_min_total_error"]) > float(r["reference_total_error"]):
                    problems.append(f"d={r['held_fixed']}: error at lambda* exceeds lambda=0")
            c.ok = code == 0 and len(summary) == 3 and not problems
            c.detail = (f"{len(summary)} d values, lambda* = "
                        f"{[float(r['empirical_argmin']) for r in summary]}; "
                        + ("; ".join(problems) or "monotone bounds, lambda* no worse than 0"))
        assert c.ok, c.detail

    def test_12_determinism(self, tmp_path):
        config = cli.default_config_path("ring_sweep.json")
        with criterion(12, "byte-identical sweep output across --jobs", 120) as c:
            dirs = []
            for jobs in (1, 2):
                out = tmp_path / f"jobs{jobs}"
                subprocess.run([sys.executable, "-m", "projlstd.bench.cli", "sweep", "--config",
                                config, "--out", str(out), "--jobs", str(jobs), "-q"], check=True)
                dirs.append(out)
            csvs = sorted(f for f in os.listdir(dirs[0]) if f.endswith(".csv") and f != "timings.csv")
            match, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], csvs, shallow=False)
            c.ok = len(csvs) == 3 and not mismatch and not errors
            c.detail = f"identical: {match}, differing: {mismatch + errors} (timings.csv excluded)"
        assert c.ok, c.detail


@pytest.fixture(scope="module")
def bench_summary():
    cfg = load(cli.default_config_path("bench.json"))
    start = time.perf_counter()
    _, summary = experiments.run_bench(cfg)
    return {r["metric"]: r["value"] for r in summary}, time.perf_counter() - start


class TestBenchShape:
    def test_rp_cost_linear_in_n(self, bench_summary):
        ratio = bench_summary[0]["doubling_ratio_rp_incremental"]
        assert 1.6 <= ratio <= 2.6
