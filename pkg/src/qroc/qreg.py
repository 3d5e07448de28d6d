"""Quantile regression for the diseased arm.

The threshold model ties a controlled sensitivity rho to the
(1 - rho)-th conditional quantile of the case markers, so fits are run
at level tau = 1 - rho.  Solutions are vertices that interpolate
exactly p + 1 observations (up to ties); the solver never smooths.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernel
from .data import CaseSample
from .errors import (ExtremeQuantileError, SingularDesignError, SolverError,
                     ValidationError)

# |marker - fitted threshold| below this counts as interpolated
EXACT_FIT_RTOL = 1e-8


def check_loss(u, tau):
    """Pinball loss u * (tau - 1{u < 0}), elementwise."""
    if not 0.0 < tau < 1.0:
        raise ValidationError(f"tau must be in (0, 1), got {tau}")
    u = np.asarray(u, dtype=np.float64)
    return u * (tau - (u < 0.0))


def estimating_residual(cases, beta, rho):
    """Mean design-weighted excess of exceedances over rho.

    Returns (1/n1) * sum_i Z_i (1{M_i > Z_i' beta} - rho), the exact
    finite-sample estimating-equation value; no smoothing.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValidationError(f"rho must be in [0, 1], got {rho}")
    beta = np.asarray(beta, dtype=np.float64)
    Z = cases.design
    if beta.shape != (Z.shape[1],):
        raise ValidationError(
            f"beta has shape {beta.shape}, expected ({Z.shape[1]},)")
    exceed = cases.markers > Z @ beta
    return Z.T @ (exceed - rho) / cases.n


@dataclass(frozen=True)
class QuantileSolution:
    """A vertex solution at a single sensitivity level."""

    beta: np.ndarray
    rho: float
    basis: tuple
    objective: float
    residual_norm: float
    interpolated: tuple
    n_pivots: int

    @property
    def tau(self):
        return 1.0 - self.rho


def _check_rho(rho, n1):
    if not 0.0 < rho < 1.0:
        raise ValidationError(f"rho must be in (0, 1), got {rho}")
    if rho * n1 < 1.0 or (1.0 - rho) * n1 < 1.0:
        raise ExtremeQuantileError(
            f"rho={rho} leaves no interior vertex with n1={n1} "
            f"(need rho*n1 >= 1 and (1-rho)*n1 >= 1)")


def _warm_start(markers, tau, m):
    beta0 = np.zeros(m)
    beta0[0] = np.quantile(markers, tau)
    return beta0


def _max_pivots(n):
    return 60 * n + 600


def _raise_for_status(status):
    if status == _kernel.STATUS_SINGULAR:
        raise SingularDesignError("design rows are rank deficient at a basis")
    if status == _kernel.STATUS_MAX_PIVOTS:
        raise SolverError("pivot budget exhausted without certifying a vertex")
    if status == _kernel.STATUS_UNBOUNDED:
        raise SolverError("objective is unbounded along a pivot direction")
    if status != _kernel.STATUS_OK:
        raise SolverError(f"solver failed with status {status}")


def fit_quantile(cases, rho, _tilt=None, _warm_beta=None):
    """Fit the case-quantile coefficients at controlled sensitivity rho.

    Returns a QuantileSolution whose beta interpolates the basis rows
    exactly and minimizes the pinball objective at tau = 1 - rho.
    """
    if not isinstance(cases, CaseSample):
        cases = CaseSample(*cases)
    _check_rho(rho, cases.n)
    tau = 1.0 - rho
    Z = cases.design
    y = cases.markers
    m = Z.shape[1]
    tilt = np.zeros(m) if _tilt is None else np.asarray(_tilt, dtype=np.float64)
    beta0 = _warm_start(y, tau, m) if _warm_beta is None else np.asarray(_warm_beta, dtype=np.float64)
    h = np.empty(m, dtype=np.int64)
    st = _kernel.select_basis(Z, y, beta0, h)
    if st != _kernel.STATUS_OK:
        raise SingularDesignError("case design matrix has rank < p + 1")
    beta, st, npiv = _kernel.simplex(Z, y, tau, tilt, h, _max_pivots(cases.n))
    _raise_for_status(st)
    resid = np.abs(y - Z @ beta)
    interp = np.flatnonzero(resid <= EXACT_FIT_RTOL * (1.0 + np.abs(y)))
    sup = float(np.max(np.abs(estimating_residual(cases, beta, rho))))
    return QuantileSolution(
        beta=beta,
        rho=float(rho),
        basis=tuple(int(i) for i in np.sort(h)),
        objective=float(_kernel.pinball_objective(Z, y, beta, tau)),
        residual_norm=sup,
        interpolated=tuple(int(i) for i in interp),
        n_pivots=int(npiv),
    )


@dataclass(frozen=True)
class CoefficientPath:
    """Piecewise-constant coefficients over a sensitivity interval.

    Segment s covers rho in [knots[s], knots[s+1]) with row betas[s];
    the path is right-continuous and the last segment is closed at the
    upper endpoint.
    """

    knots: np.ndarray
    betas: np.ndarray
    fallback_grid: bool = False

    @property
    def rho_lo(self):
        return float(self.knots[0])

    @property
    def rho_hi(self):
        return float(self.knots[-1])

    @property
    def n_segments(self):
        return self.betas.shape[0]

    @property
    def breakpoints(self):
        """Interior knots where the optimal vertex changes."""
        return self.knots[1:-1]

    def in_domain(self, rho):
        rho = np.asarray(rho, dtype=np.float64)
        return (rho >= self.rho_lo) & (rho <= self.rho_hi)

    def segment_index(self, rho):
        rho = np.clip(np.asarray(rho, dtype=np.float64), self.rho_lo, self.rho_hi)
        idx = np.searchsorted(self.knots, rho, side='right') - 1
        return np.clip(idx, 0, self.n_segments - 1)

    def beta_at(self, rho):
        """Coefficients at rho; out-of-domain rho clamps to the endpoint."""
        scalar = np.isscalar(rho)
        out = self.betas[self.segment_index(rho)]
        return out[0] if scalar and out.ndim == 2 else out


def _grid_path(Z, y, rho_lo, rho_hi, n_points, warm_beta, max_piv):
    rhos = np.linspace(rho_lo, rho_hi, n_points)
    taus = 1.0 - rhos
    betas = np.empty((n_points, Z.shape[1]))
    st = _kernel.grid_fits(Z, y, taus, warm_beta, betas, max_piv)
    _raise_for_status(st)
    keep = [0]
    for g in range(1, n_points):
        if not np.array_equal(betas[g], betas[keep[-1]]):
            keep.append(g)
    knots = np.append(rhos[keep], rho_hi)
    return CoefficientPath(knots=knots, betas=betas[keep], fallback_grid=True)


def fit_path(cases, rho_lo=None, rho_hi=None, fallback_points=999):
    """Trace the full coefficient path over [rho_lo, rho_hi].

    Defaults clip the domain to [0.02, 0.98] intersected with
    [(p+2)/n1, 1-(p+2)/n1].  Exact breakpoints come from a parametric
    sweep; if the sweep degenerates the path falls back to fits on a
    fixed grid and flags itself.
    """
    if not isinstance(cases, CaseSample):
        cases = CaseSample(*cases)
    n1, p = cases.n, cases.p
    edge = (p + 2) / n1
    lo = max(0.02, edge) if rho_lo is None else float(rho_lo)
    hi = min(0.98, 1.0 - edge) if rho_hi is None else float(rho_hi)
    if not lo < hi:
        raise ValidationError(
            f"empty path domain [{lo:.4g}, {hi:.4g}] (n1={n1}, p={p})")
    _check_rho(lo, n1)
    _check_rho(hi, n1)
    Z = cases.design
    y = cases.markers
    m = Z.shape[1]
    max_piv = _max_pivots(n1)
    start = fit_quantile(cases, lo)
    h = np.array(start.basis, dtype=np.int64)
    max_seg = min(64 + int(8 * n1 * max(1.0, math.log(n1))), 1_500_000)
    knots = np.empty(max_seg + 1)
    betas = np.empty((max_seg, m))
    nseg, st = _kernel.path_sweep(Z, y, lo, hi, h, knots, betas)
    if st in (_kernel.STATUS_CYCLING, _kernel.STATUS_CAP):
        return _grid_path(Z, y, lo, hi, fallback_points, start.beta, max_piv)
    _raise_for_status(st)
    return CoefficientPath(
        knots=knots[:nseg + 1].copy(),
        betas=betas[:nseg].copy(),
        fallback_grid=False,
    )
