import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.optimize import minimize_scalar
from scipy.stats import norm

from extrema_gp import (Dataset, FlatCurvatureError, Hyperparams, KernelSpec,
                        PosteriorGrid, build_report, confidence_interval,
                        count_extrema, fit, gp_extrema_in_segment, hpd_region,
                        joint_confidence, mean_f, mean_fprime)
from extrema_gp.summarize import normal_quantile


def synthetic_grid(pdf, size=2001):
    step = 1.0 / size
    ts = step * (np.arange(size) + 0.5)
    return PosteriorGrid.from_density(ts, pdf(ts))


def two_bump_grid():
    return synthetic_grid(lambda t: 0.5 * (norm.pdf(t, 0.3, 0.01)
                                           + norm.pdf(t, 0.7, 0.01)))


def brute_force_threshold(grid, level):
    """Smallest density cutoff whose superlevel set holds at least `level`
    mass, found by scanning every candidate cutoff."""
    best = None
    for c in np.sort(np.unique(grid.density))[::-1]:
        mass = float(grid.density[grid.density >= c].sum() * grid.grid_step)
        if mass >= level:
            best = c
            break
    return best


class TestHpdRegion:
    def test_two_gaussian_segments(self):
        grid = two_bump_grid()
        hpd = hpd_region(grid, alpha=0.05)
        assert count_extrema(hpd) == 2
        (a0, b0), (a1, b1) = hpd.segments
        assert a0 < 0.3 < b0 and a1 < 0.7 < b1
        # water filling agrees with the brute-force threshold search
        oracle = brute_force_threshold(grid, 0.95)
        included = grid.density >= hpd.threshold
        included_oracle = grid.density >= oracle
        assert np.array_equal(included, included_oracle)

    def test_mass_property(self):
        grid = two_bump_grid()
        for alpha in (0.01, 0.05, 0.2, 0.5):
            hpd = hpd_region(grid, alpha)
            mass = 0.0
            for lo, hi in hpd.segments:
                sel = (grid.ts >= lo) & (grid.ts <= hi)
                mass += float(grid.density[sel].sum() * grid.grid_step)
            slack = grid.grid_step * grid.density.max()
            assert hpd.level - slack <= mass <= hpd.level + slack

    def test_tiny_mass_shrinks_to_mode(self):
        grid = synthetic_grid(lambda t: norm.pdf(t, 0.4, 0.02))
        hpd = hpd_region(grid, alpha=0.999)
        assert count_extrema(hpd) == 1
        lo, hi = hpd.segments[0]
        assert lo < 0.4 < hi and (hi - lo) < 0.01
        mass = float(grid.density[(grid.ts >= lo) & (grid.ts <= hi)].sum()
                     * grid.grid_step)
        assert abs(mass - 0.001) <= grid.grid_step * grid.density.max()

    def test_degenerate_flat_density(self):
        size = 501
        grid = synthetic_grid(lambda t: np.ones_like(t), size)
        hpd = hpd_region(grid, 0.05)
        assert hpd.degenerate
        assert hpd.segments == ((grid.t_lo, grid.t_hi),)

    def test_single_gaussian_counts_one(self):
        grid = synthetic_grid(lambda t: norm.pdf(t, 0.6, 0.03))
        assert count_extrema(hpd_region(grid, 0.05)) == 1

    def test_rejects_bad_alpha(self):
        grid = two_bump_grid()
        for alpha in (0.0, 1.0, -0.5):
            with pytest.raises(ValueError):
                hpd_region(grid, alpha)

    def test_modes_inside_segments(self):
        grid = two_bump_grid()
        hpd = hpd_region(grid, 0.05)
        for (lo, hi), mode in zip(hpd.segments, hpd.modes):
            assert lo <= mode <= hi


def parabola_model(scale=1.0, n=60):
    x = (np.arange(n) + 0.5) / n
    y = scale * (x - 0.5) ** 2
    data = Dataset(x=x, y=y)
    hyper = Hyperparams(lam=1e-4 / n, h=0.2, sigma2=1e-4)
    return fit(data, hyper, KernelSpec(h=hyper.h))


class TestRootFinding:
    def test_vertex_recovered(self):
        model = parabola_model()
        roots = gp_extrema_in_segment(model, (0.3, 0.7), step=1e-3)
        assert len(roots) == 1
        oracle = minimize_scalar(lambda t: mean_f(model, t), bounds=(0.3, 0.7),
                                 method="bounded", options={"xatol": 1e-12})
        assert abs(roots[0] - oracle.x) < 1e-8
        y_scale = 1.0 + np.abs(model.data.y).max()
        assert abs(mean_fprime(model, roots[0], 0)) < 1e-10 * y_scale

    def test_zero_data_no_roots(self):
        data = Dataset(x=[0.1, 0.5, 0.9], y=[0.0, 0.0, 0.0])
        model = fit(data, Hyperparams(lam=0.1, h=0.2, sigma2=0.1), KernelSpec(h=0.2))
        assert gp_extrema_in_segment(model, (0.2, 0.8), step=1e-3) == []


class TestConfidenceInterval:
    def test_normal_quantile_against_rational_approximation(self):
        # Acklam's rational approximation as an independent oracle.
        def acklam(p):
            a = [-3.969683028665376e+01, 2.209460984245205e+02,
                 -2.759285104469687e+02, 1.383577518672690e+02,
                 -3.066479806614716e+01, 2.506628277459239e+00]
            b = [-5.447609879822406e+01, 1.615858368580409e+02,
                 -1.556989798598866e+02, 6.680131188771972e+01,
                 -1.328068155288572e+01]
            c = [-7.784894002430293e-03, -3.223964580411365e-01,
                 -2.400758277161838e+00, -2.549732539343734e+00,
                 4.374664141464968e+00, 2.938163982698783e+00]
            d = [7.784695709041462e-03, 3.224671290700398e-01,
                 2.445134137142996e+00, 3.754408661907416e+00]
            plow, phigh = 0.02425, 1 - 0.02425
            if p < plow:
                q = math.sqrt(-2 * math.log(p))
                return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
                    ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1)
            if p > phigh:
                return -acklam(1 - p)
            q = p - 0.5
            r = q * q
            return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
                (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1)

        assert abs(normal_quantile(1 - 0.025) - 1.959964) < 1e-6
        for p in (0.005, 0.025, 0.05, 0.5, 0.975, 0.995):
            assert abs(normal_quantile(p) - acklam(p)) < 1e-7

    def test_width_scales_inversely_with_curvature(self):
        m1 = parabola_model(scale=1.0)
        m2 = parabola_model(scale=2.0)
        r1 = gp_extrema_in_segment(m1, (0.3, 0.7), step=1e-3)[0]
        r2 = gp_extrema_in_segment(m2, (0.3, 0.7), step=1e-3)[0]
        lo1, hi1, _ = confidence_interval(m1, r1, 0.05)
        lo2, hi2, _ = confidence_interval(m2, r2, 0.05)
        ratio = (hi2 - lo2) / (hi1 - lo1)
        assert abs(ratio - 0.5) < 0.05 * 0.5

    def test_center_is_bias_corrected_point(self, doppler_model_100):
        model = doppler_model_100
        roots = gp_extrema_in_segment(model, (0.05, 0.15), step=1e-4)
        t_hat = roots[0]
        lo, hi, bias = confidence_interval(model, t_hat, 0.05)
        assert lo < t_hat + bias < hi
        assert_allclose(0.5 * (lo + hi), t_hat + bias, rtol=1e-12)

    def test_flat_curvature_raises(self):
        data = Dataset(x=[0.1, 0.5, 0.9], y=[0.0, 0.0, 0.0])
        model = fit(data, Hyperparams(lam=0.1, h=0.2, sigma2=0.1), KernelSpec(h=0.2))
        with pytest.raises(FlatCurvatureError, match="0.5"):
            confidence_interval(model, 0.5, 0.05)

    def test_bonferroni_nesting(self, doppler_model_100):
        model = doppler_model_100
        t_hats = []
        for seg in ((0.05, 0.15), (0.25, 0.4), (0.6, 0.9)):
            t_hats.append(gp_extrema_in_segment(model, seg, step=1e-4)[0])
        marginal = [confidence_interval(model, t, 0.05) for t in t_hats]
        joint = joint_confidence(model, t_hats, 0.05)
        for (ml, mh, _), (jl, jh, _) in zip(marginal, joint):
            assert jl < ml and mh < jh

    def test_joint_of_single_estimate_is_marginal(self, doppler_model_100):
        model = doppler_model_100
        t_hat = gp_extrema_in_segment(model, (0.05, 0.15), step=1e-4)[0]
        assert joint_confidence(model, [t_hat], 0.05)[0] == \
            confidence_interval(model, t_hat, 0.05)


class TestReport:
    def test_benchmark_report(self, doppler_model_500):
        from extrema_gp import PriorSpec, compute_posterior

        model = doppler_model_500
        grid = compute_posterior(model, PriorSpec(2, 3))
        hpd = hpd_region(grid, 0.05)
        report = build_report(model, grid, hpd, 0.05)
        assert report.m_hat == len(report.estimates) == len(report.joint)
        d = report.to_json_dict()
        assert set(d) == {"m_hat", "segments", "modes", "estimates", "joint"}
        for e in d["estimates"]:
            assert set(e) == {"t_hat", "kind", "ci_lo", "ci_hi",
                              "bias_correction", "boundary_flag", "source"}
        kinds = [e.kind for e in report.estimates if e.source == "derivative_root"]
        assert set(kinds) <= {"max", "min"}
        for est, j in zip(report.estimates, report.joint):
            if est.ci_lo is not None:
                assert est.ci_lo < est.t_hat + est.bias_correction < est.ci_hi
                assert j.ci_lo < est.ci_lo and est.ci_hi < j.ci_hi
