"""Synthetic-data study harness.

Cases are generated so the conditional (1 - rho)-quantile of the
marker is exactly linear in the covariates at every rho, with
coefficient vector (log(-log rho), 1 - rho, (1 - rho)^2); controls are
Gaussian with a covariate-shifted mean.  The true pooled specificity
at any controlled sensitivity is then available by quadrature, which
is what coverage is scored against.
"""

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict
from multiprocessing import get_context

import numpy as np
from scipy.special import ndtr

from .data import BiomarkerDataset, CaseSample, ControlSample
from .errors import SolverError, ValidationError
from .inference import bootstrap_variance, pointwise_ci, sample_variance
from .monotone import monotonize_path, monotonize_roc
from .qreg import fit_path, fit_quantile
from .roc import adjusted_roc, pooled_specificity

ESTIMATORS = ("raw", "reg-monotone", "roc-monotone")
VARIANCE_METHODS = ("sample", "bootstrap")

_U_GUARD = 1e-12


def true_beta(rho):
    """Generative quantile coefficients (intercept and two slopes)."""
    return np.array([math.log(-math.log(rho)), 1.0 - rho, (1.0 - rho) ** 2])


def gen_cases(n1, rng):
    """Draw case covariates and markers from the generative model."""
    z = rng.random(size=(n1, 2))
    u = rng.random(n1)
    while True:
        bad = (u < _U_GUARD) | (u > 1.0 - _U_GUARD)
        if not np.any(bad):
            break
        u[bad] = rng.random(int(bad.sum()))
    m = np.log(-np.log(u)) + (1.0 - u) * z[:, 0] + (1.0 - u) ** 2 * z[:, 1]
    return CaseSample(m, z)


def gen_controls(n0, rng):
    """Draw control covariates and markers (Gaussian, sd 2)."""
    z = rng.random(size=(n0, 2))
    m = rng.normal(-1.0 - 0.5 * z[:, 0] - 0.5 * z[:, 1], 2.0)
    return ControlSample(m, z)


def true_specificity(rho0, order=48):
    """Oracle pooled specificity at controlled sensitivity rho0.

    Averages the control CDF at the true threshold over the uniform
    covariate square by tensor Gauss-Legendre quadrature.
    """
    if not 0.0 < rho0 < 1.0:
        raise ValidationError(f"rho0 must be in (0, 1), got {rho0}")
    x, w = np.polynomial.legendre.leggauss(order)
    t = (x + 1.0) / 2.0
    wt = w / 2.0
    b = true_beta(rho0)
    z1 = t[:, None]
    z2 = t[None, :]
    thr = b[0] + b[1] * z1 + b[2] * z2
    vals = ndtr((thr + 1.0 + 0.5 * z1 + 0.5 * z2) / 2.0)
    return float(wt @ vals @ wt)


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulation scenario; rho0 may be a single level or a tuple."""

    n1: int
    n0: int
    rho0: tuple
    reps: int
    seed: int
    B: int = 500
    estimators: tuple = ("raw",)
    variance_methods: tuple = ("sample", "bootstrap")
    level: float = 0.95

    def __post_init__(self):
        rho0 = self.rho0 if isinstance(self.rho0, (tuple, list)) else (self.rho0,)
        object.__setattr__(self, 'rho0', tuple(float(r) for r in rho0))
        object.__setattr__(self, 'estimators', tuple(self.estimators))
        object.__setattr__(self, 'variance_methods', tuple(self.variance_methods))
        if self.reps < 1:
            raise ValidationError(f"reps must be >= 1, got {self.reps}")
        if not self.rho0:
            raise ValidationError("at least one rho0 level is required")
        for r in self.rho0:
            if not 0.0 < r < 1.0:
                raise ValidationError(f"rho0 must be in (0, 1), got {r}")
        bad = set(self.estimators) - set(ESTIMATORS)
        if bad or not self.estimators:
            raise ValidationError(
                f"estimators must be a non-empty subset of {ESTIMATORS}")
        bad = set(self.variance_methods) - set(VARIANCE_METHODS)
        if bad or not self.variance_methods:
            raise ValidationError(
                f"variance_methods must be a non-empty subset of {VARIANCE_METHODS}")
        if "bootstrap" in self.variance_methods and self.B < 2:
            raise ValidationError(f"B must be >= 2 for bootstrap SEs, got {self.B}")
        if not 0.0 < self.level < 1.0:
            raise ValidationError(f"level must be in (0, 1), got {self.level}")


def _replicate(cfg, rep):
    """One replicate: returns (phi[E, R], se[M, R], failed)."""
    E = len(cfg.estimators)
    M = len(cfg.variance_methods)
    R = len(cfg.rho0)
    phis = np.full((E, R), np.nan)
    ses = np.full((M, R), np.nan)
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=cfg.seed, spawn_key=(rep, 0)))
    try:
        cases = gen_cases(cfg.n1, rng)
        controls = gen_controls(cfg.n0, rng)
        dataset = BiomarkerDataset(cases, controls)
        need_path = any(e != "raw" for e in cfg.estimators)
        path = mono_reg = mono_roc = None
        if need_path:
            path = fit_path(cases)
            if "reg-monotone" in cfg.estimators:
                mono_reg = monotonize_path(path, cases)
            if "roc-monotone" in cfg.estimators:
                mono_roc = monotonize_roc(adjusted_roc(path, controls))
        Z0, m0 = controls.design, controls.markers
        for r, rho0 in enumerate(cfg.rho0):
            warm = path.beta_at(rho0) if path is not None else None
            sol = fit_quantile(cases, rho0, _warm_beta=warm)
            for e, est in enumerate(cfg.estimators):
                if est == "raw":
                    phis[e, r] = pooled_specificity(controls, sol).phi
                elif est == "reg-monotone":
                    beta = mono_reg.beta_at(rho0)
                    phis[e, r] = np.mean(m0 <= Z0 @ beta)
                else:
                    phis[e, r] = mono_roc.evaluate(rho0)
            for mth, method in enumerate(cfg.variance_methods):
                if method == "sample":
                    ses[mth, r] = sample_variance(dataset, rho0,
                                                  solution=sol).se_phi
                else:
                    bseed = np.random.SeedSequence(
                        entropy=cfg.seed, spawn_key=(rep, 1, r))
                    ses[mth, r] = bootstrap_variance(
                        dataset, rho0, seed=bseed, n_boot=cfg.B,
                        solution=sol).se_phi
    except (SolverError, ValidationError):
        return phis, ses, True
    return phis, ses, False


def _replicate_star(args):
    return _replicate(*args)


def resolve_workers(workers=None):
    """Worker count: explicit argument, else QROC_THREADS, else 1."""
    if workers is None:
        env = os.environ.get("QROC_THREADS", "").strip()
        workers = int(env) if env else 1
    if workers < 1:
        raise ValidationError(f"worker count must be >= 1, got {workers}")
    return workers


@dataclass(frozen=True)
class SimulationReport:
    """Aggregated scenario statistics in table conventions.

    Bias, SD, and SE are reported on the 1e4 scale; Cov and LCov in
    percent.  SD and coverage are None when undefined (reps < 2, or an
    SE method not requested).
    """

    config: ScenarioConfig
    rows: tuple
    n_failed: int

    def to_csv(self, path):
        cols = ["n1", "n0", "rho0", "estimator", "method", "reps",
                "n_failed", "true_phi", "Bias", "SD", "SE", "Cov", "LCov"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for row in self.rows:
                out = []
                for c in cols:
                    v = row[c]
                    if v is None:
                        out.append("NA")
                    elif isinstance(v, float):
                        out.append(f"{v:.17g}")
                    else:
                        out.append(v)
                w.writerow(out)

    def to_json(self, path):
        payload = {
            "config": asdict(self.config),
            "n_failed": self.n_failed,
            "rows": list(self.rows),
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def run_scenario(cfg, workers=None):
    """Run all replicates of a scenario and aggregate the table statistics.

    Replicates are independent tasks keyed by (seed, replicate index),
    so the report is identical for any worker count.  The scenario
    fails if more than 1% of replicates fail.
    """
    workers = resolve_workers(workers)
    tasks = ((cfg, rep) for rep in range(cfg.reps))
    if workers == 1 or cfg.reps == 1:
        results = [_replicate(cfg, rep) for rep in range(cfg.reps)]
    else:
        chunk = max(1, cfg.reps // (8 * workers))
        with ProcessPoolExecutor(max_workers=workers,
                                 mp_context=get_context("fork")) as ex:
            results = list(ex.map(_replicate_star, tasks, chunksize=chunk))
    E, M, R = len(cfg.estimators), len(cfg.variance_methods), len(cfg.rho0)
    phis = np.stack([r[0] for r in results])
    ses = np.stack([r[1] for r in results])
    failed = np.array([r[2] for r in results])
    n_failed = int(failed.sum())
    if n_failed > 0.01 * cfg.reps:
        raise SolverError(
            f"{n_failed} of {cfg.reps} replicates failed (over the 1% budget)")
    good = ~failed
    n_good = int(good.sum())
    phis = phis[good]
    ses = ses[good]
    rows = []
    for r, rho0 in enumerate(cfg.rho0):
        phi0 = true_specificity(rho0)
        for e, est in enumerate(cfg.estimators):
            vals = phis[:, e, r]
            bias = float(np.mean(vals) - phi0) * 1e4
            sd = float(np.std(vals, ddof=1)) * 1e4 if n_good > 1 else None
            for mth, method in enumerate(cfg.variance_methods):
                sevals = ses[:, mth, r]
                hits_w = 0
                hits_l = 0
                for i in range(n_good):
                    ci = pointwise_ci(float(vals[i]), float(sevals[i]),
                                      level=cfg.level)
                    hits_w += ci.wald[0] <= phi0 <= ci.wald[1]
                    hits_l += ci.logit[0] <= phi0 <= ci.logit[1]
                rows.append({
                    "n1": cfg.n1,
                    "n0": cfg.n0,
                    "rho0": rho0,
                    "estimator": est,
                    "method": method,
                    "reps": cfg.reps,
                    "n_failed": n_failed,
                    "true_phi": phi0,
                    "Bias": bias,
                    "SD": sd,
                    "SE": float(np.mean(sevals)) * 1e4,
                    "Cov": 100.0 * hits_w / n_good,
                    "LCov": 100.0 * hits_l / n_good,
                })
    return SimulationReport(config=cfg, rows=tuple(rows), n_failed=n_failed)
