import numpy as np
import pytest

from qroc import (CoefficientPath, RocCurve, adjusted_roc, fit_path,
                  monotonize_path, monotonize_roc)

from conftest import synth_dataset


def random_step_curve(rng, max_points=40):
    k = int(rng.integers(2, max_points))
    rho = np.unique(rng.uniform(0.05, 0.95, k))
    while rho.size < 2:
        rho = np.unique(rng.uniform(0.05, 0.95, k))
    phi = rng.random(rho.size)
    return RocCurve(rho=rho, phi=phi, rho_hi=float(rho[-1]) + 0.02)


class TestMonotonizeRoc:
    def test_output_nonincreasing(self, rng):
        for _ in range(100):
            curve = random_step_curve(rng)
            mono = monotonize_roc(curve)
            grid = np.linspace(curve.rho[0], curve.rho[-1], 101)
            vals = mono.evaluate(grid)
            assert np.all(np.diff(vals) <= 1e-12)

    def test_idempotent(self, rng):
        for _ in range(100):
            curve = random_step_curve(rng)
            mono = monotonize_roc(curve)
            again = monotonize_roc(
                RocCurve(rho=mono.rhos, phi=mono.phis, rho_hi=curve.rho_hi))
            assert again.n_rejected == 0
            assert np.array_equal(again.phis, mono.phis)

    def test_monotone_input_unchanged(self):
        rho = np.array([0.2, 0.4, 0.6, 0.8])
        phi = np.array([0.9, 0.7, 0.7, 0.1])
        mono = monotonize_roc(RocCurve(rho=rho, phi=phi, rho_hi=0.85))
        assert mono.n_rejected == 0
        assert np.array_equal(mono.phis, phi)

    def test_violations_removed_not_averaged(self):
        # this scan keeps admissible points as-is; it is not a
        # projection that redistributes mass
        rho = np.array([0.2, 0.4, 0.6, 0.8])
        phi = np.array([0.5, 0.9, 0.4, 0.3])
        mono = monotonize_roc(RocCurve(rho=rho, phi=phi, rho_hi=0.85))
        assert mono.n_rejected == 1
        assert 0.5 in mono.phis
        assert 0.9 not in mono.phis

    def test_final_point_clamped_when_rejected(self):
        rho = np.array([0.2, 0.5, 0.8])
        phi = np.array([0.4, 0.3, 0.9])
        mono = monotonize_roc(RocCurve(rho=rho, phi=phi, rho_hi=0.85))
        # the right endpoint stays in the grid so evaluation does not
        # extrapolate, but its value drops to the running minimum
        assert mono.rhos[-1] == 0.8
        assert mono.phis[-1] == pytest.approx(0.3)

    def test_scalar_evaluate(self, rng):
        curve = random_step_curve(rng)
        mono = monotonize_roc(curve)
        v = mono.evaluate(float(curve.rho[0]))
        assert np.isscalar(v) or np.ndim(v) == 0


class TestMonotonizePath:
    def test_thresholds_dominate_at_case_rows(self, medium_dataset):
        path = fit_path(medium_dataset.cases)
        mono = monotonize_path(path, medium_dataset.cases)
        Z = medium_dataset.cases.design
        grid = np.linspace(mono.rhos[0], mono.rhos[-1], 60)
        prev = Z @ mono.beta_at(grid[0])
        for g in grid[1:]:
            cur = Z @ mono.beta_at(g)
            assert np.all(cur <= prev + 1e-9)
            prev = cur

    def test_idempotent(self, medium_dataset):
        path = fit_path(medium_dataset.cases)
        mono = monotonize_path(path, medium_dataset.cases)
        rebuilt = CoefficientPath(
            knots=np.append(mono.rhos, mono.rhos[-1] + 1e-3),
            betas=np.asarray(mono.betas))
        again = monotonize_path(rebuilt, medium_dataset.cases)
        assert again.n_rejected == 0

    def test_first_breakpoint_kept(self, small_dataset):
        path = fit_path(small_dataset.cases)
        mono = monotonize_path(path, small_dataset.cases)
        assert mono.rhos[0] == path.knots[0]
        assert np.array_equal(mono.betas[0], path.betas[0])

    def test_rejection_counted(self, medium_dataset):
        path = fit_path(medium_dataset.cases)
        mono = monotonize_path(path, medium_dataset.cases)
        assert mono.n_rejected == path.n_segments - len(mono.rhos)
        assert mono.n_rejected >= 0

    def test_interpolation_constant_outside(self, small_dataset):
        path = fit_path(small_dataset.cases)
        mono = monotonize_path(path, small_dataset.cases)
        assert np.array_equal(mono.beta_at(0.001), mono.betas[0])
        assert np.array_equal(mono.beta_at(0.999), mono.betas[-1])

    def test_thresholds_at_matches_beta(self, small_dataset):
        path = fit_path(small_dataset.cases)
        mono = monotonize_path(path, small_dataset.cases)
        Z = small_dataset.cases.covariates[:5]
        t = mono.thresholds_at(Z, 0.5)
        b = mono.beta_at(0.5)
        assert np.allclose(t, b[0] + Z @ b[1:])


class TestAsymptoticAgreement:
    def test_mono_roc_close_to_raw_at_large_n(self):
        # the repair is asymptotically inactive: the gap it introduces
        # shrinks as the sample grows
        def mean_gap(n, seeds):
            gaps = []
            for s in seeds:
                ds = synth_dataset(n, n, s)
                step = adjusted_roc(fit_path(ds.cases), ds.controls)
                mono = monotonize_roc(step)
                gaps.append(np.max(np.abs(mono.evaluate(step.rho) - step.phi)))
            return float(np.mean(gaps))

        small = mean_gap(100, range(700, 706))
        large = mean_gap(1000, range(800, 806))
        assert large < small
