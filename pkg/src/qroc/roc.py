"""Pooled specificity and the covariate-adjusted ROC curve.

For a controlled sensitivity rho the fitted covariate-specific
thresholds are (1, z') beta(rho); the pooled specificity is the
fraction of controls at or below their own thresholds.  Sweeping rho
over the coefficient path yields the adjusted ROC as a step function
of rho, constant between path knots.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernel
from .data import BiomarkerDataset, CaseSample, ControlSample
from .errors import ValidationError
from .qreg import CoefficientPath, QuantileSolution, fit_path


@dataclass(frozen=True)
class SpecificityEstimate:
    """Pooled specificity at one controlled sensitivity level."""

    phi: float
    rho: float
    n0: int
    beta: np.ndarray


@dataclass(frozen=True)
class RocCurve:
    """Adjusted ROC as a step function of controlled sensitivity.

    phi[k] applies on [rho[k], rho[k+1]) and the curve is closed at
    rho_hi.  Evaluation outside [rho[0], rho_hi] clamps to the nearer
    end.
    """

    rho: np.ndarray
    phi: np.ndarray
    rho_hi: float
    swapped: bool = False

    def __post_init__(self):
        if self.rho.shape != self.phi.shape or self.rho.ndim != 1:
            raise ValidationError("rho and phi grids must be 1-d and aligned")
        if self.rho.size == 0:
            raise ValidationError("empty ROC grid")
        if np.any(np.diff(self.rho) <= 0):
            raise ValidationError("ROC grid must be strictly increasing")
        if np.any(self.phi < 0.0) or np.any(self.phi > 1.0):
            raise ValidationError("specificity values must lie in [0, 1]")

    def evaluate(self, at):
        """Step-interpolate specificity at the given sensitivity levels."""
        scalar = np.isscalar(at)
        at = np.clip(np.asarray(at, dtype=np.float64), self.rho[0], self.rho_hi)
        idx = np.clip(np.searchsorted(self.rho, at, side='right') - 1,
                      0, self.rho.size - 1)
        out = self.phi[idx]
        return float(out) if scalar else out


def _beta_of(solution):
    if isinstance(solution, QuantileSolution):
        return solution.beta
    return np.asarray(solution, dtype=np.float64)


def pooled_specificity(controls, solution, rho=None):
    """Fraction of controls at or below their covariate-specific threshold.

    solution is a QuantileSolution (rho taken from it) or a raw
    coefficient vector (rho must then be given).  Ties count as
    correctly classified controls.
    """
    if not isinstance(controls, ControlSample):
        controls = ControlSample(*controls)
    beta = _beta_of(solution)
    if rho is None:
        if not isinstance(solution, QuantileSolution):
            raise ValidationError("rho is required when passing a bare coefficient vector")
        rho = solution.rho
    Z0 = controls.design
    if beta.shape != (Z0.shape[1],):
        raise ValidationError(
            f"coefficient length {beta.shape[0]} does not match p + 1 = {Z0.shape[1]}")
    phi = _kernel.pooled_count(Z0, controls.markers, beta)
    return SpecificityEstimate(phi=float(phi), rho=float(rho),
                               n0=controls.n, beta=beta)


def covariate_thresholds(solution, covariates):
    """Fitted marker thresholds (1, z') beta for each covariate row."""
    beta = _beta_of(solution)
    covariates = np.asarray(covariates, dtype=np.float64)
    if covariates.ndim == 1:
        covariates = covariates[:, None]
    if covariates.shape[1] != beta.shape[0] - 1:
        raise ValidationError(
            f"covariate rows have p={covariates.shape[1]} but the fit "
            f"has p={beta.shape[0] - 1}")
    return beta[0] + covariates @ beta[1:]


def adjusted_roc(path, controls, grid=None):
    """Pooled specificity along a coefficient path.

    With grid=None the curve is evaluated at every path segment start,
    which represents the step function exactly.  A custom grid gives
    the curve sampled at those sensitivity levels.
    """
    if not isinstance(path, CoefficientPath):
        raise ValidationError("path must be a CoefficientPath")
    if not isinstance(controls, ControlSample):
        controls = ControlSample(*controls)
    Z0 = controls.design
    if path.betas.shape[1] != Z0.shape[1]:
        raise ValidationError(
            f"path has p={path.betas.shape[1] - 1} but controls have p={controls.p}")
    if grid is None:
        rho = path.knots[:-1].copy()
        betas = path.betas
    else:
        rho = np.asarray(grid, dtype=np.float64)
        if rho.ndim != 1 or rho.size == 0:
            raise ValidationError("grid must be a non-empty 1-d array")
        if np.any(np.diff(rho) <= 0):
            raise ValidationError("grid must be strictly increasing")
        betas = path.beta_at(rho)
    phi = np.array([_kernel.pooled_count(Z0, controls.markers, b) for b in betas])
    return RocCurve(rho=rho, phi=phi, rho_hi=path.rho_hi)


def unadjusted_roc(dataset, rho_lo=None, rho_hi=None, grid=None):
    """Pooled empirical ROC ignoring covariates (intercept-only fit)."""
    cases = CaseSample(dataset.cases.markers, np.zeros((dataset.cases.n, 0)))
    controls = ControlSample(dataset.controls.markers,
                             np.zeros((dataset.controls.n, 0)))
    path = fit_path(cases, rho_lo=rho_lo, rho_hi=rho_hi)
    return adjusted_roc(path, controls, grid=grid)


def swap_roles(dataset):
    """Exchange arms and negate markers.

    Controlled sensitivity on the swapped data is controlled
    specificity on the original, so specificity-at-sensitivity
    machinery computes sensitivity-at-specificity after the swap.
    Applying the swap twice restores the original dataset.
    """
    if not isinstance(dataset, BiomarkerDataset):
        raise ValidationError("swap_roles expects a BiomarkerDataset")
    return BiomarkerDataset(
        cases=CaseSample(-dataset.controls.markers, dataset.controls.covariates),
        controls=ControlSample(-dataset.cases.markers, dataset.cases.covariates),
        covariate_names=dataset.covariate_names,
        marker_name=dataset.marker_name,
        factor_levels=dataset.factor_levels,
        n_dropped=dataset.n_dropped,
        swapped=not dataset.swapped,
    )
