import itertools
import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pytest import approx

from filmcrit.campaign import CampaignGrid, simulate_campaign
from filmcrit.fit import (
    CriticalPoint,
    SingularFitError,
    confidence_band,
    fd_jacobian,
    fit_critical_field,
    model_field,
    residual_sensitivity,
)
from filmcrit.model import SignalModel, critical_field_parallel
from filmcrit.synth import ApparatusParams

from conftest import AL300

T_GRID = np.linspace(0.95, 0.99, 20)


def _exact_points(p, t=T_GRID, rel_sigma=1e-3):
    h = critical_field_parallel(p, t)
    return [CriticalPoint(float(a), float(b), rel_sigma * float(b)) for a, b in zip(t, h)]


def _truth(p):
    return np.array([p.amplitude, p.t_c, p.correction])


def _noisy_points(p, seed, rel=2e-3):
    rng = np.random.default_rng(seed)
    pts = _exact_points(p, rel_sigma=rel)
    return [pt._replace(h=pt.h + pt.sigma_h * rng.standard_normal()) for pt in pts]


@pytest.mark.parametrize("signs", list(itertools.product([-1, 1], repeat=3)))
def test_noiseless_recovery_from_ten_percent_off(al300, signs):
    f = [1 + 0.1 * s for s in signs]
    init = al300.replace(lambda0=al300.lambda0 * f[0], t_c=al300.t_c * f[1], xi0=al300.xi0 * f[2])
    fr = fit_critical_field(_exact_points(al300), init, t_ref=al300.t_c)
    assert fr.converged
    assert np.max(np.abs(np.array(fr.theta) / _truth(al300) - 1)) < 1e-6
    assert fr.chi2 < 1e-12
    assert fr.params.lambda0 == approx(al300.lambda0, rel=1e-6)
    assert fr.params.xi0 == approx(al300.xi0, rel=1e-6)


def test_permutation_invariance(al300):
    pts = _noisy_points(al300, 3)
    init = al300.replace(lambda0=110.0)
    a = fit_critical_field(pts, init, t_ref=al300.t_c)
    perm = np.random.default_rng(0).permutation(len(pts))
    b = fit_critical_field([pts[i] for i in perm], init, t_ref=al300.t_c)
    assert np.allclose(a.theta, b.theta, rtol=1e-8, atol=0)
    assert np.allclose(a.covariance, b.covariance, rtol=1e-6, atol=0)


@pytest.mark.parametrize("k", [0.1, 3.0, 1000.0])
def test_rescaling_fields_scales_only_amplitude(al300, k):
    pts = _noisy_points(al300, 4)
    init = al300.replace(lambda0=110.0)
    a = fit_critical_field(pts, init, t_ref=al300.t_c)
    scaled = [pt._replace(h=k * pt.h, sigma_h=k * pt.sigma_h) for pt in pts]
    b = fit_critical_field(scaled, init.replace(h_t0=k * init.h_t0), t_ref=al300.t_c)
    assert b.theta[0] == approx(k * a.theta[0], rel=1e-8)
    assert b.theta[1] == approx(a.theta[1], rel=1e-10)
    assert b.theta[2] == approx(a.theta[2], rel=1e-6)
    assert b.sigma["t_c"] == approx(a.sigma["t_c"], rel=1e-5)


def _oracle_covariance(points, correction, t_ref, center):
    """Brute force on the (amplitude, t_c) plane: zoom a grid onto the chi2 minimum,
    then fit a quadratic surface to chi2 samples around it. cov = 2 H^-1."""
    t = np.array([p.t for p in points])
    h = np.array([p.h for p in points])
    s = np.array([p.sigma_h for p in points])

    def chi2(a, tc):
        x = t[:, None, None] * t_ref / tc[None]
        x = np.minimum(x, 1.0)
        m = a[None] * np.sqrt((1 - x) * (1 + x) / (1 + x * x)) * (1 + correction * (1 - x))
        return (((h[:, None, None] - m) / s[:, None, None]) ** 2).sum(axis=0)

    a0, tc0 = center
    half = np.array([0.05 * a0, 1e-3 * tc0])
    for _ in range(30):
        aa, tt = np.meshgrid(np.linspace(a0 - half[0], a0 + half[0], 21), np.linspace(tc0 - half[1], tc0 + half[1], 21))
        c = chi2(aa, tt)
        i = np.unravel_index(np.argmin(c), c.shape)
        a0, tc0 = aa[i], tt[i]
        half = half / 2.0
    cmin = chi2(np.array([[a0]]), np.array([[tc0]]))[0, 0]

    def reach(axis):
        # step along one axis until chi2 rises by ~1
        d = 1e-9 * (a0 if axis == 0 else tc0)
        while True:
            a1 = np.array([[a0 + d]]) if axis == 0 else np.array([[a0]])
            t1 = np.array([[tc0 + d]]) if axis == 1 else np.array([[tc0]])
            if chi2(a1, t1)[0, 0] - cmin > 1.0:
                return d
            d *= 1.5

    da, dt = reach(0), reach(1)
    u, v = np.meshgrid(np.linspace(-2, 2, 9), np.linspace(-2, 2, 9))
    c = chi2(a0 + da * u, tc0 + dt * v).ravel()
    u, v = u.ravel(), v.ravel()
    X = np.column_stack([np.ones_like(u), u, v, u * u, u * v, v * v])
    coef = np.linalg.lstsq(X, c, rcond=None)[0]
    hess = np.array([[2 * coef[3], coef[4]], [coef[4], 2 * coef[5]]])
    scale = np.diag([da, dt])
    return scale @ (2.0 * np.linalg.inv(hess)) @ scale, (a0, tc0)


def test_covariance_matches_brute_force_oracle(al300):
    pts = _noisy_points(al300, 8)
    init = al300.replace(lambda0=110.0)
    fr = fit_critical_field(pts, init, fixed=["correction"], t_ref=al300.t_c)
    cov, (a0, tc0) = _oracle_covariance(pts, al300.correction, al300.t_c, (al300.amplitude, al300.t_c))
    assert fr.theta[0] == approx(a0, rel=1e-6)
    assert fr.theta[1] == approx(tc0, rel=1e-8)
    assert np.allclose(fr.covariance, cov, rtol=0.05)


def test_duplicated_points_shrink_sigma_by_root_two(al300):
    pts = _noisy_points(al300, 9)
    init = al300.replace(lambda0=110.0)
    one = fit_critical_field(pts, init, fixed=["correction"], t_ref=al300.t_c)
    two = fit_critical_field(pts + pts, init, fixed=["correction"], t_ref=al300.t_c)
    center = (al300.amplitude, al300.t_c)
    cov1, _ = _oracle_covariance(pts, al300.correction, al300.t_c, center)
    cov2, _ = _oracle_covariance(pts + pts, al300.correction, al300.t_c, center)
    for i, name in enumerate(("amplitude", "t_c")):
        assert one.sigma[name] / two.sigma[name] == approx(math.sqrt(2), rel=0.05)
        assert math.sqrt(cov1[i, i] / cov2[i, i]) == approx(math.sqrt(2), rel=0.05)
    # the full three-parameter fit shows the same scaling
    full1 = fit_critical_field(pts, init, t_ref=al300.t_c)
    full2 = fit_critical_field(pts + pts, init, t_ref=al300.t_c)
    for name in ("amplitude", "t_c", "correction"):
        assert full1.sigma[name] / full2.sigma[name] == approx(math.sqrt(2), rel=0.05)


def test_fd_jacobian_against_mpmath(al300):
    mpmath.mp.dps = 40
    t_ref = 1.29
    ts = [0.951, 0.97, 0.989]
    theta = _truth(al300)

    def h_mp(a, tc, b, t):
        x = mpmath.mpf(t) * t_ref / tc
        return a * mpmath.sqrt((1 - x * x) / (1 + x * x)) * (1 + b * (1 - x))

    J = fd_jacobian(lambda th: model_field(th, np.array(ts), t_ref), theta, [0, 1, 2])
    for i, t in enumerate(ts):
        args = [mpmath.mpf(v) for v in theta]
        for j in range(3):
            def f(v, j=j):
                a = list(args)
                a[j] = v
                return h_mp(*a, t)
            expected = float(mpmath.diff(f, args[j]))
            assert J[i, j] == approx(expected, rel=1e-6)


def _campaign_fit(seed, a):
    c = simulate_campaign(AL300, SignalModel.single_film(), a, CampaignGrid(), seed)
    init = AL300.replace(lambda0=115.0, t_c=AL300.t_c * 1.00005, xi0=54.0)
    return fit_critical_field(c.points, init, t_ref=c.t_ref)


def test_band_collapses_and_grows_with_level(al300):
    fr = _campaign_fit(1, ApparatusParams())
    t = np.linspace(0.95, 0.99, 9)
    mid = fr.model(t)
    widths = []
    for level in (1e-9, 0.5, 0.68, 0.9, 0.95, 0.99):
        lo, hi = confidence_band(fr, t, level)
        assert np.all(lo <= mid) and np.all(mid <= hi)
        widths.append(hi - lo)
    widths = np.array(widths)
    assert np.all(widths[0] < 1e-8 * mid)
    assert np.all(np.diff(widths, axis=0) > 0)
    half = 0.5 * widths[4] / mid
    assert np.all((1e-3 < half) & (half < 1e-2))  # order 3e-3 at the campaign's precision
    lo, hi = fr.band(0.97)
    arr_lo, arr_hi = fr.band(np.array([0.97]))
    assert isinstance(lo, float) and (lo, hi) == (arr_lo[0], arr_hi[0])


def test_band_rejects_bad_level_and_warns_outside_range(al300):
    fr = fit_critical_field(_noisy_points(al300, 1), al300, t_ref=al300.t_c)
    with pytest.raises(ValueError):
        confidence_band(fr, 0.97, 1.0)
    with pytest.warns(UserWarning, match="extrapolated"):
        confidence_band(fr, 0.9)


def test_residual_sensitivity_zero_without_noise(al300):
    fr = fit_critical_field(_exact_points(al300), al300.replace(lambda0=110.0), t_ref=al300.t_c)
    assert residual_sensitivity(fr) < 1e-12


def test_residual_sensitivity_scales_with_noise():
    base = ApparatusParams()
    ratios = []
    for seed in range(5):
        r1 = residual_sensitivity(_campaign_fit(seed, base))
        r2 = residual_sensitivity(
            _campaign_fit(seed, base.replace(noise_sigma=2 * base.noise_sigma, current_rel_err=2 * base.current_rel_err))
        )
        ratios.append(r2 / r1)
    assert np.mean(ratios) == approx(2.0, rel=0.2)


def test_residual_sensitivity_window(al300):
    fr = fit_critical_field(_noisy_points(al300, 2), al300, t_ref=al300.t_c)
    assert residual_sensitivity(fr, (0.95, 0.99)) == residual_sensitivity(fr)
    with pytest.raises(ValueError, match="no fitted points"):
        residual_sensitivity(fr, (0.5, 0.6))


def test_degenerate_points_are_singular(al300):
    pts = [CriticalPoint(0.97, float(critical_field_parallel(al300, 0.97)), 0.1)] * 8
    with pytest.raises(SingularFitError):
        fit_critical_field(pts, al300.replace(lambda0=110.0), t_ref=al300.t_c)


def test_fixed_parameters_and_aliases(al300):
    pts = _noisy_points(al300, 5)
    init = al300.replace(lambda0=110.0, xi0=70.0)
    fr = fit_critical_field(pts, init, fixed=["xi0"], t_ref=al300.t_c)
    assert fr.free == ("amplitude", "t_c")
    assert fr.theta[2] == init.correction
    assert fr.covariance.shape == (2, 2)
    assert "xi0" not in fr.sigma
    assert fr.dof == len(pts) - 2
    with pytest.raises(ValueError, match="unknown fit parameter"):
        fit_critical_field(pts, init, fixed=["bogus"])
    with pytest.raises(ValueError, match="nothing to fit"):
        fit_critical_field(pts, init, fixed=["amplitude", "t_c", "correction"])


def test_start_below_data_is_lifted(al300):
    init = al300.replace(t_c=0.9 * al300.t_c)
    fr = fit_critical_field(_exact_points(al300), init, t_ref=al300.t_c)
    assert fr.theta[1] == approx(al300.t_c, rel=1e-9)
    with pytest.raises(ValueError, match="hottest point"):
        fit_critical_field(_exact_points(al300), init, fixed=["t_c"], t_ref=al300.t_c)


def test_unweighted_points_scale_covariance(al300):
    pts = [pt._replace(sigma_h=math.nan) for pt in _noisy_points(al300, 6)]
    fr = fit_critical_field(pts, al300, t_ref=al300.t_c)
    assert fr.scaled
    assert fr.reduced_chi2 == approx(fr.chi2 / fr.dof)


def test_nonconvergence_warns(al300):
    init = al300.replace(lambda0=150.0)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        fr = fit_critical_field(_noisy_points(al300, 7), init, t_ref=al300.t_c, max_iter=1)
    assert not fr.converged
    assert any("did not converge" in str(w.message) for w in rec)


def test_rejects_out_of_range_points(al300):
    bad = _exact_points(al300) + [CriticalPoint(1.0, 1.0, 0.1)]
    with pytest.raises(ValueError):
        fit_critical_field(bad, al300)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.97, 1.03), st.floats(0.9995, 1.0005), st.floats(0.8, 1.25))
def test_noiseless_recovery_from_random_starts(fa, ft, fx):
    init = AL300.replace(lambda0=AL300.lambda0 * fa, t_c=AL300.t_c * ft, xi0=AL300.xi0 * fx)
    fr = fit_critical_field(_exact_points(AL300), init, t_ref=AL300.t_c)
    assert np.max(np.abs(np.array(fr.theta) / _truth(AL300) - 1)) < 1e-6
