"""Variance estimation, confidence intervals, and confidence bands.

Two variance routes for the pooled specificity:

- sample-based: perturb the stacked estimating equations by the
  columns of a square root of the plug-in variance of the equation
  values, re-solve each perturbed system exactly at a vertex, and read
  the spread of the re-solved parameters;
- bootstrap: resample cases and controls separately with sizes
  preserved, refit, and take the empirical covariance.

Both produce a covariance for (beta, phi) jointly.  Bands calibrate a
sup-statistic over a sensitivity grid so the whole curve is covered at
the requested level.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from . import _kernel
from .data import BiomarkerDataset, CaseSample
from .errors import InferenceError, SolverError, ValidationError
from .monotone import monotonize_path, monotonize_roc
from .qreg import _max_pivots, estimating_residual, fit_path, fit_quantile
from .roc import RocCurve, pooled_specificity

CENTER_METHODS = ("raw", "reg-monotone", "roc-monotone")


def z_value(level):
    """Two-sided normal quantile rounded to 6 decimals (1.959964 at 95%)."""
    if not 0.0 < level < 1.0:
        raise ValidationError(f"level must be in (0, 1), got {level}")
    return round(float(norm.ppf(0.5 + level / 2.0)), 6)


@dataclass(frozen=True)
class EstimatingSystem:
    """The stacked case/control estimating equations at one level."""

    dataset: BiomarkerDataset
    rho: float

    @property
    def dim(self):
        return self.dataset.p + 2

    def evaluate(self, nu):
        return gn_eval(nu, self.dataset, self.rho)


def gn_eval(nu, dataset, rho):
    """Stacked estimating equations at nu = (beta, phi).

    Case block: mean design-weighted excess of exceedances over rho.
    Control block: below-threshold control fraction minus phi.
    """
    nu = np.asarray(nu, dtype=np.float64)
    p = dataset.p
    if nu.shape != (p + 2,):
        raise ValidationError(f"nu has shape {nu.shape}, expected ({p + 2},)")
    beta, phi = nu[:-1], nu[-1]
    case_block = estimating_residual(dataset.cases, beta, rho)
    ctrl = dataset.controls
    control_block = np.mean(ctrl.markers <= ctrl.design @ beta) - phi
    return np.append(case_block, control_block)


def sigma_hat(dataset, beta, phi, rho):
    """Plug-in variance of the stacked equation values, block diagonal."""
    beta = np.asarray(beta, dtype=np.float64)
    cases, ctrl = dataset.cases, dataset.controls
    Z1 = cases.design
    w1 = (((cases.markers > Z1 @ beta) - rho) ** 2)
    top = (Z1 * w1[:, None]).T @ Z1 / cases.n ** 2
    w0 = ((ctrl.markers <= ctrl.design @ beta) - phi) ** 2
    bottom = np.sum(w0) / ctrl.n ** 2
    p = dataset.p
    out = np.zeros((p + 2, p + 2))
    out[:p + 1, :p + 1] = top
    out[-1, -1] = bottom
    return out


def _matrix_sqrt(S):
    """Lower-triangular square root, eigenvalue fallback when degenerate."""
    dmax = float(np.max(np.diag(S)))
    if dmax > 0.0:
        try:
            C = np.linalg.cholesky(S)
            if not np.any(np.diag(C) ** 2 <= 1e-12 * dmax):
                return C, False
        except np.linalg.LinAlgError:
            pass
    w, Q = np.linalg.eigh(S)
    return Q * np.sqrt(np.clip(w, 0.0, None)), True


@dataclass(frozen=True)
class CovarianceEstimate:
    """Joint covariance of (beta, phi) with the phi SE pulled out."""

    matrix: np.ndarray
    se_phi: float
    method: str
    n_boot: int = 0
    n_redrawn: int = 0
    sqrt_fallback: bool = False


def sample_variance(dataset, rho, solution=None):
    """Covariance of (beta, phi) by exact re-solves of perturbed systems.

    Each column of the square root of the plug-in equation variance is
    used as a right-hand side; the case part is absorbed as a tilt of
    the fitting objective and the control part shifts phi in closed
    form.  The spread of the perturbed solutions estimates the
    covariance.
    """
    sol = solution if solution is not None else fit_quantile(dataset.cases, rho)
    est = pooled_specificity(dataset.controls, sol)
    S = sigma_hat(dataset, sol.beta, est.phi, rho)
    C, fallback = _matrix_sqrt(S)
    L = dataset.p + 2
    nu_hat = np.append(sol.beta, est.phi)
    ctrl = dataset.controls
    D = np.empty((L, L))
    for l in range(L):
        c = C[:, l]
        if np.max(np.abs(c[:-1])) == 0.0:
            beta_l = sol.beta
        else:
            try:
                beta_l = fit_quantile(dataset.cases, rho,
                                      _tilt=-dataset.cases.n * c[:-1],
                                      _warm_beta=sol.beta).beta
            except SolverError as exc:
                raise InferenceError(
                    f"perturbed system {l + 1}/{L} at rho={rho}: {exc}") from None
        phi_l = float(np.mean(ctrl.markers <= ctrl.design @ beta_l)) - c[-1]
        D[:, l] = np.append(beta_l, phi_l) - nu_hat
    V = D @ D.T
    return CovarianceEstimate(
        matrix=V,
        se_phi=float(math.sqrt(max(V[-1, -1], 0.0))),
        method="sample",
        sqrt_fallback=fallback,
    )


def _resample_until_ok(run, rng, n_boot, shapes):
    """Draw index matrices, rerun failures with fresh draws, cap 10x."""
    (n1, n0) = shapes
    idx1 = rng.integers(0, n1, size=(n_boot, n1))
    idx0 = rng.integers(0, n0, size=(n_boot, n0))
    out, ok = run(idx1, idx0)
    redrawn = 0
    while not np.all(ok):
        bad = np.flatnonzero(~ok)
        redrawn += bad.size
        if redrawn > 10 * n_boot:
            raise InferenceError(
                f"{bad.size} bootstrap resamples kept failing after "
                f"{redrawn} redraws (degenerate resampled designs)")
        idx1b = rng.integers(0, n1, size=(bad.size, n1))
        idx0b = rng.integers(0, n0, size=(bad.size, n0))
        outb, okb = run(idx1b, idx0b)
        out[bad] = outb
        ok[bad] = okb
    return out, redrawn


def bootstrap_variance(dataset, rho, seed, n_boot=1000, solution=None):
    """Covariance of (beta, phi) from separate case/control resampling.

    Arm sizes are preserved; rank-deficient resamples are redrawn (at
    most 10x the requested count in total).  Deterministic given seed.
    """
    if n_boot < 2:
        raise ValidationError(f"n_boot must be >= 2, got {n_boot}")
    sol = solution if solution is not None else fit_quantile(dataset.cases, rho)
    cases, ctrl = dataset.cases, dataset.controls
    Z1, y1 = cases.design, cases.markers
    Z0, m0 = ctrl.design, ctrl.markers
    tau = 1.0 - rho
    max_piv = _max_pivots(cases.n)
    rng = np.random.default_rng(seed)

    def run(idx1, idx0):
        nu = np.empty((idx1.shape[0], dataset.p + 2))
        ok = np.empty(idx1.shape[0], dtype=np.bool_)
        _kernel.boot_reps(Z1, y1, Z0, m0, tau, idx1, idx0, sol.beta,
                          nu, ok, max_piv)
        return nu, ok

    nu, redrawn = _resample_until_ok(run, rng, n_boot, (cases.n, ctrl.n))
    V = np.atleast_2d(np.cov(nu, rowvar=False, ddof=1))
    return CovarianceEstimate(
        matrix=V,
        se_phi=float(math.sqrt(max(V[-1, -1], 0.0))),
        method="bootstrap",
        n_boot=n_boot,
        n_redrawn=redrawn,
    )


@dataclass(frozen=True)
class CiPair:
    """Wald and logit-scale confidence intervals for a specificity."""

    wald: tuple
    logit: tuple
    logit_defined: bool
    level: float
    z: float


def pointwise_ci(phi, se, level=0.95):
    """Normal-theory intervals for one specificity value.

    The Wald interval is truncated to [0, 1].  The logit interval uses
    the delta method on log(phi/(1-phi)); at phi in {0, 1} it is
    undefined and the Wald interval is returned in its place, flagged.
    """
    z = z_value(level)
    if not 0.0 <= phi <= 1.0:
        raise ValidationError(f"phi must be in [0, 1], got {phi}")
    if se < 0.0:
        raise ValidationError(f"se must be nonnegative, got {se}")
    wald = (max(phi - z * se, 0.0), min(phi + z * se, 1.0))
    if 0.0 < phi < 1.0:
        lphi = math.log(phi / (1.0 - phi))
        lse = se / (phi * (1.0 - phi))
        lo = 1.0 / (1.0 + math.exp(-(lphi - z * lse)))
        hi = 1.0 / (1.0 + math.exp(-(lphi + z * lse)))
        return CiPair(wald=wald, logit=(lo, hi), logit_defined=True,
                      level=level, z=z)
    return CiPair(wald=wald, logit=wald, logit_defined=False, level=level, z=z)


@dataclass(frozen=True)
class BandEstimate:
    """Equal-precision band: center +- eta * SE over a sensitivity grid."""

    grid: np.ndarray
    center: np.ndarray
    se: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    eta: float
    level: float
    n_boot: int
    method: str
    excluded: tuple = ()
    n_redrawn: int = 0


def _default_band_grid(cases):
    edge = (cases.p + 2) / cases.n
    lo = max(0.02, edge)
    hi = min(0.98, 1.0 - edge)
    g = np.round(np.arange(0.10, 0.9005, 0.01), 10)
    return g[(g >= lo) & (g <= hi)]


def _mono_rows(phi_mat):
    """Row-wise specificity-scale repair over the shared grid."""
    out = np.empty_like(phi_mat)
    K = phi_mat.shape[1]
    grid = np.arange(K, dtype=np.float64)
    for b in range(phi_mat.shape[0]):
        row = phi_mat[b]
        keep = np.zeros(K, dtype=bool)
        keep[0] = True
        ref = row[0]
        for k in range(1, K):
            if row[k] <= ref + 1e-12 * (1.0 + abs(ref)):
                keep[k] = True
                ref = row[k]
        xs = grid[keep]
        ys = row[keep]
        if not keep[-1]:
            xs = np.append(xs, grid[-1])
            ys = np.append(ys, min(row[-1], ys[-1]))
        out[b] = np.interp(grid, xs, ys)
    return out


def confidence_band(dataset, seed, grid=None, n_boot=1000, level=0.95,
                    center="raw"):
    """Simultaneous band for the specificity curve over a grid.

    The multiplier eta is the level-percentile of the bootstrap
    sup-statistic max_rho |phi*(rho) - phi_hat(rho)| / SE(rho), with SE
    the pointwise bootstrap standard deviation.  Grid points with zero
    SE are excluded from the sup and flagged.
    """
    if center not in CENTER_METHODS:
        raise ValidationError(
            f"center must be one of {CENTER_METHODS}, got {center!r}")
    if n_boot < 100:
        raise ValidationError(
            f"band calibration needs n_boot >= 100, got {n_boot}")
    if not 0.0 < level < 1.0:
        raise ValidationError(f"level must be in (0, 1), got {level}")
    cases, ctrl = dataset.cases, dataset.controls
    if grid is None:
        grid = _default_band_grid(cases)
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValidationError("band grid is empty after clipping to the path domain")
    if np.any(np.diff(grid) <= 0):
        raise ValidationError("band grid must be strictly increasing")
    for r in (grid[0], grid[-1]):
        if not 0.0 < r < 1.0:
            raise ValidationError(f"band grid value {r} outside (0, 1)")
    Z1, y1 = cases.design, cases.markers
    Z0, m0 = ctrl.design, ctrl.markers
    taus = 1.0 - grid
    max_piv = _max_pivots(cases.n)

    warm = fit_quantile(cases, float(grid[0])).beta
    if center == "reg-monotone":
        mono = monotonize_path(fit_path(cases), cases)
        center_betas = np.atleast_2d(mono.beta_at(grid))
    else:
        center_betas = np.empty((grid.size, cases.p + 1))
        st = _kernel.grid_fits(Z1, y1, taus, warm, center_betas, max_piv)
        if st != _kernel.STATUS_OK:
            raise SolverError(f"grid fits failed with status {st}")
    phi_center = np.array(
        [_kernel.pooled_count(Z0, m0, b) for b in center_betas])
    if center == "roc-monotone":
        step = RocCurve(rho=grid, phi=phi_center, rho_hi=float(grid[-1]))
        phi_center = monotonize_roc(step).evaluate(grid)

    rng = np.random.default_rng(seed)
    if center == "reg-monotone":
        def run(idx1, idx0):
            nb = idx1.shape[0]
            phis = np.empty((nb, grid.size))
            ok = np.zeros(nb, dtype=np.bool_)
            for b in range(nb):
                cs = CaseSample(y1[idx1[b]], cases.covariates[idx1[b]])
                try:
                    mono_b = monotonize_path(fit_path(cs), cs)
                except SolverError:
                    continue
                bet = np.atleast_2d(mono_b.beta_at(grid))
                Z0b = np.ascontiguousarray(Z0[idx0[b]])
                m0b = m0[idx0[b]]
                phis[b] = [_kernel.pooled_count(Z0b, m0b, bb) for bb in bet]
                ok[b] = True
            return phis, ok
    else:
        def run(idx1, idx0):
            phis = np.empty((idx1.shape[0], grid.size))
            ok = np.empty(idx1.shape[0], dtype=np.bool_)
            _kernel.band_reps(Z1, y1, Z0, m0, taus, idx1, idx0, warm,
                              phis, ok, max_piv)
            return phis, ok

    phi_mat, redrawn = _resample_until_ok(run, rng, n_boot, (cases.n, ctrl.n))
    if center == "roc-monotone":
        phi_mat = _mono_rows(phi_mat)

    se = phi_mat.std(axis=0, ddof=1)
    valid = se > 0.0
    if not np.any(valid):
        raise InferenceError(
            "all grid points have zero bootstrap SE; no band is identifiable")
    ratios = np.abs(phi_mat[:, valid] - phi_center[valid]) / se[valid]
    sups = ratios.max(axis=1)
    k = math.ceil(level * n_boot)
    eta = float(np.sort(sups)[k - 1])
    lower = np.clip(phi_center - eta * se, 0.0, 1.0)
    upper = np.clip(phi_center + eta * se, 0.0, 1.0)
    return BandEstimate(
        grid=grid,
        center=phi_center,
        se=se,
        lower=lower,
        upper=upper,
        eta=eta,
        level=level,
        n_boot=n_boot,
        method=center,
        excluded=tuple(int(i) for i in np.flatnonzero(~valid)),
        n_redrawn=redrawn,
    )
