"""Monotone repairs of the step estimators.

Two repairs are provided.  The path repair works on the coefficient
scale: walking the path segments in ascending rho, a segment is kept
only if its fitted threshold at every observed case covariate row is
at or below the last kept segment's, and coefficients are linearly
interpolated between kept levels.  The curve repair works on the
specificity scale directly: offending points are dropped and the curve
linearly interpolated across the gap.  Neither is a least-squares
isotonic projection; both preserve the kept values exactly.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernel
from .data import CaseSample
from .errors import ValidationError
from .qreg import CoefficientPath
from .roc import RocCurve


@dataclass(frozen=True)
class MonotonePath:
    """Monotonized coefficients, linear in rho between accepted levels."""

    rhos: np.ndarray
    betas: np.ndarray
    rho_hi: float
    n_rejected: int

    def beta_at(self, rho):
        """Interpolated coefficients; constant beyond the accepted range."""
        scalar = np.isscalar(rho)
        rho = np.atleast_1d(np.asarray(rho, dtype=np.float64))
        out = np.empty((rho.size, self.betas.shape[1]))
        for j in range(self.betas.shape[1]):
            out[:, j] = np.interp(rho, self.rhos, self.betas[:, j])
        return out[0] if scalar else out

    def thresholds_at(self, covariates, rho):
        """Fitted thresholds (1, z') beta(rho) for covariate rows z."""
        covariates = np.asarray(covariates, dtype=np.float64)
        if covariates.ndim == 1:
            covariates = covariates[:, None]
        beta = np.atleast_2d(self.beta_at(rho))
        return beta[:, 0][:, None] + beta[:, 1:] @ covariates.T


@dataclass(frozen=True)
class MonotoneRoc:
    """Monotonized specificity curve, linear in rho between kept points."""

    rhos: np.ndarray
    phis: np.ndarray
    n_rejected: int
    swapped: bool = False

    def evaluate(self, at):
        scalar = np.isscalar(at)
        out = np.interp(np.asarray(at, dtype=np.float64), self.rhos, self.phis)
        return float(out) if scalar else out


def monotonize_path(path, cases):
    """Coefficient-scale repair of a path against observed case rows.

    The first segment is always kept; later segments are kept when
    their thresholds do not exceed the last kept segment's at any
    observed case covariate row (ties kept).
    """
    if not isinstance(path, CoefficientPath):
        raise ValidationError("path must be a CoefficientPath")
    if not isinstance(cases, CaseSample):
        cases = CaseSample(*cases)
    if path.betas.shape[1] != cases.p + 1:
        raise ValidationError(
            f"path has p={path.betas.shape[1] - 1} but cases have p={cases.p}")
    keep = np.empty(path.n_segments, dtype=np.bool_)
    _kernel.mono_path_scan(path.betas, cases.design, keep)
    rhos = path.knots[:-1][keep]
    betas = path.betas[keep]
    return MonotonePath(
        rhos=rhos,
        betas=betas,
        rho_hi=path.rho_hi,
        n_rejected=int(path.n_segments - betas.shape[0]),
    )


def monotonize_roc(roc):
    """Specificity-scale repair of a step ROC curve.

    Keeps points whose specificity does not rise above the last kept
    value (ties kept); if the final grid point is rejected it is
    re-added clamped to the running minimum so the domain end survives.
    """
    if not isinstance(roc, RocCurve):
        raise ValidationError("roc must be a RocCurve")
    rho = roc.rho
    phi = roc.phi
    keep = np.zeros(rho.size, dtype=bool)
    keep[0] = True
    ref = phi[0]
    for k in range(1, rho.size):
        if phi[k] <= ref + 1e-12 * (1.0 + abs(ref)):
            keep[k] = True
            ref = phi[k]
    rhos = rho[keep]
    phis = phi[keep]
    rejected = int(rho.size - rhos.size)
    if not keep[-1]:
        rhos = np.append(rhos, rho[-1])
        phis = np.append(phis, min(phi[-1], ref))
    return MonotoneRoc(rhos=rhos, phis=phis, n_rejected=rejected,
                       swapped=roc.swapped)
