"""End-to-end gates: solver exactness, calibration targets, coverage
replication against published operating characteristics, determinism,
and the full synthetic workflow.

The heavy simulation tests take several minutes each; together with the
band-calibration test the whole file runs in under an hour on one core.
"""

import itertools
import json
import math
import os
import shutil
import subprocess
import time

import numpy as np
import pytest
from numpy.random import SeedSequence, default_rng

from qroc import (BiomarkerDataset, CaseSample, ControlSample, RocCurve,
                  ScenarioConfig, adjusted_roc, confidence_band, fit_path,
                  fit_quantile, gen_cases, gen_controls, monotonize_roc,
                  pointwise_ci, pooled_specificity, run_scenario, true_beta,
                  true_specificity, write_csv, z_value)

from test_monotone import random_step_curve

# Published Monte-Carlo operating characteristics for the pooled raw
# estimator (bias and SD in 1e-4 units; coverage in percent), keyed by
# (rho0, n) with n1 = n0 = n.  Columns: bias, SD, then Wald and logit
# coverage for the sample-based SE and for the bootstrap SE.  The
# source study used 5000 replicates.
PUBLISHED_RAW = {
    (0.95, 100): (191, 799, 93.82, 94.84, 94.14, 93.20),
    (0.95, 500): (33, 362, 94.48, 94.80, 95.50, 95.38),
    (0.90, 100): (65, 760, 95.22, 96.30, 95.94, 97.04),
    (0.90, 500): (15, 344, 95.40, 95.80, 95.70, 95.78),
    (0.85, 100): (20, 725, 95.42, 96.22, 95.86, 96.68),
    (0.85, 500): (4, 330, 95.54, 95.80, 95.74, 95.86),
    (0.80, 100): (-3, 695, 95.58, 96.48, 95.36, 96.80),
    (0.80, 500): (3, 318, 95.10, 95.24, 95.12, 95.34),
}
PUBLISHED_REPS = 5000
REPS = 2000
LEVELS = (0.95, 0.90, 0.85, 0.80)


def brute_force_minimum(Z, y, tau):
    """Minimum pinball objective over all exact-fit basis candidates.

    Every vertex of the feasible polytope interpolates m = p + 1
    observations, so scanning all m-subsets with nonsingular designs
    finds the global minimum without touching the solver under test.
    """
    n, m = Z.shape
    idx = np.array(list(itertools.combinations(range(n), m)))
    sub = Z[idx]
    dets = np.abs(np.linalg.det(sub))
    good = dets > 1e-10 * max(1.0, float(np.max(np.abs(Z))) ** m)
    beta = np.linalg.solve(sub[good], y[idx[good]][..., None])[..., 0]
    resid = y[None, :] - beta @ Z.T
    obj = np.sum(resid * (tau - (resid < 0.0)), axis=1)
    return float(obj.min())


def test_solver_matches_brute_force_minimum():
    rng = default_rng(SeedSequence(202601))
    solver_time = 0.0
    for _ in range(200):
        n = int(rng.integers(10, 26))
        p = int(rng.integers(1, 3))
        zcov = rng.normal(size=(n, p))
        y = rng.normal(size=n) + zcov[:, 0]
        rho = float(rng.uniform(0.15, 0.85))
        cases = CaseSample(y, zcov)
        t0 = time.perf_counter()
        sol = fit_quantile(cases, rho)
        solver_time += time.perf_counter() - t0
        oracle = brute_force_minimum(cases.design, y, 1.0 - rho)
        assert sol.objective == pytest.approx(oracle, rel=1e-9, abs=1e-12)
    assert solver_time < 5.0


def test_path_matches_pointwise_fits():
    for i in range(50):
        rng = default_rng(SeedSequence(entropy=31000 + i))
        cases = gen_cases(200, rng)
        path = fit_path(cases)
        grid = np.linspace(path.rho_lo + 1e-3, path.rho_hi - 1e-3, 99)
        betas = path.beta_at(grid)
        resid = cases.markers[None, :] - betas @ cases.design.T
        taus = 1.0 - grid
        path_obj = np.sum(resid * (taus[:, None] - (resid < 0.0)), axis=1)
        for k, rho in enumerate(grid):
            direct = fit_quantile(cases, float(rho)).objective
            assert path_obj[k] == pytest.approx(direct, rel=1e-9)


def test_full_path_runs_under_one_second():
    fit_path(gen_cases(60, default_rng(SeedSequence(1))))  # warm the kernels
    cases = gen_cases(500, default_rng(SeedSequence(777)))
    t0 = time.perf_counter()
    path = fit_path(cases)
    elapsed = time.perf_counter() - t0
    assert path.n_segments > 10
    assert elapsed < 1.0


def test_true_specificity_targets_and_mc_oracle():
    targets = {0.95: 0.24, 0.90: 0.36, 0.85: 0.45, 0.80: 0.52}
    n = 10_000_000
    rng = default_rng(SeedSequence(55))
    z = rng.random((n, 2))
    m0 = rng.normal(-1.0 - 0.5 * z[:, 0] - 0.5 * z[:, 1], 2.0)
    for rho, target in targets.items():
        quad = true_specificity(rho)
        assert quad == pytest.approx(target, abs=5e-3)
        b = true_beta(rho)
        thr = b[0] + b[1] * z[:, 0] + b[2] * z[:, 1]
        mc = float(np.mean(m0 <= thr))
        assert quad == pytest.approx(mc, abs=1e-3)


def test_pooled_estimator_replicates_published_coverage():
    t_start = time.perf_counter()
    rows = {}
    for n in (100, 500):
        cfg = ScenarioConfig(n1=n, n0=n, rho0=LEVELS, reps=REPS,
                             seed=9100 + n, B=500, estimators=("raw",),
                             variance_methods=("sample", "bootstrap"))
        report = run_scenario(cfg)
        assert report.n_failed == 0
        for row in report.rows:
            rows[(row["rho0"], n, row["method"])] = row
    elapsed = time.perf_counter() - t_start

    for (rho0, n), pub in PUBLISHED_RAW.items():
        bias_pub, sd_pub, cov_s, lcov_s, cov_b, lcov_b = pub
        r_s = rows[(rho0, n, "sample")]
        r_b = rows[(rho0, n, "bootstrap")]
        # the bias of two independent replications of the same design
        # should agree within joint Monte-Carlo noise
        tol = 3.0 * math.sqrt(r_s["SD"] ** 2 / REPS
                              + sd_pub ** 2 / PUBLISHED_REPS)
        assert abs(r_s["Bias"] - bias_pub) <= tol, (rho0, n)
        checks = ((r_s["Cov"], cov_s), (r_s["LCov"], lcov_s),
                  (r_b["Cov"], cov_b), (r_b["LCov"], lcov_b))
        for ours, published in checks:
            if 94.0 <= published <= 96.5:
                assert 93.0 <= ours <= 97.0, (rho0, n, ours, published)
    assert elapsed <= 1800.0


@pytest.fixture(scope="module")
def monotone_estimator_rows():
    rows = {}
    for n in (100, 200, 500, 1000):
        cfg = ScenarioConfig(
            n1=n, n0=n, rho0=LEVELS, reps=REPS, seed=9700 + n, B=100,
            estimators=("raw", "reg-monotone", "roc-monotone"),
            variance_methods=("sample",))
        report = run_scenario(cfg)
        assert report.n_failed == 0
        for row in report.rows:
            rows[(row["rho0"], n, row["estimator"])] = row
    return rows


def test_curve_monotonized_estimator_covers(monotone_estimator_rows):
    for rho0 in LEVELS:
        for n in (200, 500, 1000):
            row = monotone_estimator_rows[(rho0, n, "roc-monotone")]
            assert 93.0 <= row["Cov"] <= 97.0, (rho0, n)
            assert 93.0 <= row["LCov"] <= 97.0, (rho0, n)


def test_coefficient_monotonization_does_not_inflate_sd(
        monotone_estimator_rows):
    # Known to fail at the smallest samples under the highest controlled
    # levels: the coefficient-scale repair rejects path segments
    # greedily, and at (0.95, n=100/200) and (0.90, n=100) its SD runs
    # well above the raw estimator's.  The reference operating
    # characteristics this suite replicates show the same three cells
    # above the 1.05 ratio.  The gate is kept as stated rather than
    # weakened; see the failure message for the measured ratios.
    violations = []
    for rho0 in LEVELS:
        for n in (100, 200, 500, 1000):
            sd_reg = monotone_estimator_rows[(rho0, n, "reg-monotone")]["SD"]
            sd_raw = monotone_estimator_rows[(rho0, n, "raw")]["SD"]
            if sd_reg > sd_raw * 1.05:
                violations.append(
                    f"rho0={rho0} n={n}: SD ratio {sd_reg / sd_raw:.3f}")
    assert not violations, "; ".join(violations)


def test_binary_covariate_reduces_to_stratified_estimator():
    rng = default_rng(SeedSequence(606))
    for _ in range(100):
        na, nb = (int(v) for v in rng.integers(15, 41, size=2))
        n0a, n0b = (int(v) for v in rng.integers(15, 41, size=2))
        y = np.r_[rng.normal(2.0, 1.0, na), rng.normal(3.0, 1.2, nb)]
        g1 = np.r_[np.zeros(na), np.ones(nb)]
        m0 = np.r_[rng.normal(0.0, 1.0, n0a), rng.normal(0.5, 1.0, n0b)]
        g0 = np.r_[np.zeros(n0a), np.ones(n0b)]
        while True:
            rho = float(rng.uniform(0.25, 0.75))
            tau = 1.0 - rho
            offs = (abs(tau * na - round(tau * na)),
                    abs(tau * nb - round(tau * nb)))
            if min(offs) > 0.05:
                break
        cases = CaseSample(y, g1[:, None])
        controls = ControlSample(m0, g0[:, None])
        sol = fit_quantile(cases, rho)
        phi = pooled_specificity(controls, sol).phi
        hits = 0
        for g, yv, mv in ((0.0, y[:na], m0[:n0a]), (1.0, y[na:], m0[n0a:])):
            t_g = float(sol.beta[0] + sol.beta[1] * g)
            ys = np.sort(yv)
            k = math.ceil(tau * yv.size)
            slack = 1e-9 * (1.0 + abs(t_g))
            assert ys[k - 1] - slack <= t_g <= ys[k] + slack
            hits += int(np.sum(mv <= t_g))
        assert phi == hits / m0.size


def test_monotonization_properties_and_vanishing_gap():
    rng = default_rng(SeedSequence(707))
    for _ in range(1000):
        curve = random_step_curve(rng)
        mono = monotonize_roc(curve)
        assert np.all(np.diff(mono.phis) <= 1e-12)
        again = monotonize_roc(
            RocCurve(rho=mono.rhos, phi=mono.phis,
                     rho_hi=float(mono.rhos[-1]) + 0.02))
        assert again.n_rejected == 0
        assert np.array_equal(again.phis, mono.phis)

    def sup_gap(n, entropy):
        g = default_rng(SeedSequence(entropy))
        step = adjusted_roc(fit_path(gen_cases(n, g)), gen_controls(n, g))
        mono = monotonize_roc(step)
        mask = (step.rho >= 0.05) & (step.rho <= 0.95)
        return float(np.max(np.abs(step.phi[mask]
                                   - mono.evaluate(step.rho[mask]))))

    gap_small = np.mean([sup_gap(100, 1000 + i) for i in range(30)])
    gap_large = np.mean([sup_gap(1000, 2000 + i) for i in range(30)])
    assert gap_large < 0.5 * gap_small


def test_band_simultaneous_coverage():
    grid = np.round(np.arange(0.20, 0.9005, 0.05), 10)
    truth = np.array([true_specificity(r) for r in grid])
    z95 = z_value(0.95)
    hits = 0
    eta_ok = 0
    for r in range(1000):
        rng = default_rng(SeedSequence(entropy=88, spawn_key=(r, 0)))
        ds = BiomarkerDataset(gen_cases(500, rng), gen_controls(500, rng))
        band = confidence_band(ds, SeedSequence(entropy=88, spawn_key=(r, 1)),
                               grid=grid, n_boot=1000)
        ok = band.se > 0.0
        covered = np.all((band.lower[ok] - 1e-12 <= truth[ok])
                         & (truth[ok] <= band.upper[ok] + 1e-12))
        hits += bool(covered)
        eta_ok += band.eta >= z95 - 1e-12
    assert hits >= 930
    assert eta_ok >= 950


class TestWorkerCountReproducibility:
    """Randomized commands must not let scheduling touch the streams."""

    @staticmethod
    def _run(args, outdir, threads):
        exe = shutil.which("qroc")
        assert exe is not None, "console script not installed"
        env = dict(os.environ, QROC_THREADS=str(threads))
        res = subprocess.run([exe] + args + ["--out", str(outdir)],
                             env=env, capture_output=True, text=True)
        assert res.returncode == 0, res.stderr
        return {p.name: p.read_bytes() for p in sorted(outdir.iterdir())}

    def _byte_identical(self, args, tmp_path):
        outs = [self._run(args, tmp_path / f"w{t}", t) for t in (1, 4, 16)]
        assert outs[0] == outs[1] == outs[2]
        assert len(outs[0]) > 0

    def test_simulate(self, tmp_path):
        self._byte_identical(
            ["simulate", "--n1", "80", "--n0", "80", "--rho0", "0.85",
             "--reps", "24", "--boot", "150", "--seed", "17"], tmp_path)

    def test_fit(self, tmp_path):
        demo = tmp_path / "demo.csv"
        rng = default_rng(SeedSequence(14))
        write_csv(BiomarkerDataset(gen_cases(80, rng), gen_controls(90, rng)),
                  str(demo))
        self._byte_identical(
            ["fit", str(demo), "--rho0", "0.8", "--boot", "150",
             "--seed", "5"], tmp_path)

    def test_roc_with_band(self, tmp_path):
        demo = tmp_path / "demo.csv"
        rng = default_rng(SeedSequence(15))
        write_csv(BiomarkerDataset(gen_cases(80, rng), gen_controls(90, rng)),
                  str(demo))
        self._byte_identical(
            ["roc", str(demo), "--band", "--boot", "150",
             "--band-grid", "0.3:0.7:0.1", "--seed", "9"], tmp_path)


def test_logit_interval_reproduces_published_row():
    # published: estimate 0.196 with logit-scale 95% CI (0.108, 0.330)
    phi, lo, hi = 0.196, 0.108, 0.330
    z = z_value(0.95)
    width = math.log(hi / (1 - hi)) - math.log(lo / (1 - lo))
    se = (width / (2.0 * z)) * phi * (1.0 - phi)
    ci = pointwise_ci(phi, se, level=0.95)
    assert ci.logit_defined
    assert ci.logit[0] == pytest.approx(lo, abs=5e-4)
    assert ci.logit[1] == pytest.approx(hi, abs=5e-4)
    assert round(ci.logit[0], 3) == lo
    assert round(ci.logit[1], 3) == hi


def test_synthetic_workflow_end_to_end(tmp_path):
    exe = shutil.which("qroc")
    assert exe is not None
    rng = default_rng(SeedSequence(2026))
    ds = BiomarkerDataset(gen_cases(150, rng), gen_controls(352, rng))
    demo = tmp_path / "study.csv"
    write_csv(ds, str(demo))

    fit_out = tmp_path / "fit"
    res = subprocess.run(
        [exe, "fit", str(demo), "--boot", "300", "--seed", "12",
         "--out", str(fit_out)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    report = json.loads((fit_out / "report.json").read_text())
    assert [r["rho0"] for r in report["results"]] == list(LEVELS)
    for row in report["results"]:
        blk = row["estimates"]["raw"]
        for key in ("sample", "bootstrap"):
            lo, hi = blk[key]["logit"]
            assert 0.0 < lo < blk["phi"] < hi < 1.0

    roc_out = tmp_path / "roc"
    res = subprocess.run(
        [exe, "roc", str(demo), "--band", "--boot", "400", "--seed", "12",
         "--out", str(roc_out)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    for name in ("roc_step.csv", "roc_mono_reg.csv", "roc_mono_roc.csv",
                 "roc_unadjusted.csv", "band.csv", "roc.svg", "report.json"):
        assert (roc_out / name).exists(), name

    thr_out = tmp_path / "thr"
    res = subprocess.run(
        [exe, "thresholds", str(demo), "--rho0", "0.95", "--sweep", "z1",
         "--out", str(thr_out)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (thr_out / "thresholds.svg").exists()


def test_large_sample_estimate_near_oracle():
    rng = default_rng(SeedSequence(424242))
    cases = gen_cases(1000, rng)
    controls = gen_controls(1000, rng)
    est = pooled_specificity(controls, fit_quantile(cases, 0.95))
    assert abs(est.phi - 0.24) <= 0.03
