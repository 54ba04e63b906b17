import math
import warnings

import mpmath as mp
import numpy as np
import pytest

from zeno_opt import bath as bathlib
from zeno_opt.bath import (
    BathParams,
    CorrelationTable,
    QuadratureError,
    SpectralDensity,
    correlation,
    delta_phase,
    gamma,
    ohmic_closed_forms,
    spectral_density,
    tabulate_correlation,
    thermal_correlation_series,
)

COLD = 1e6


def ohmic(G=0.01, wc=50.0, beta=COLD, s=1.0):
    return BathParams(SpectralDensity(G, s, wc), beta)


def mp_integral(f, wc, t=0.0):
    # independent oracle: mpmath tanh-sinh, panels at half periods of the
    # oscillation and at the cutoff scale, truncated where exp(-w/wc) < 1e-30
    top = 70 * wc
    pts = {0.0, wc / 10, wc, 10 * wc, top}
    if t:
        pts.update(np.arange(1, int(top * abs(t) / math.pi) + 1) * math.pi / abs(t))
    return float(mp.quad(f, sorted(p for p in pts if p <= top)))


def oracle_gamma(b: BathParams, t):
    sd = b.spectral

    def f(w):
        J = sd.G * w**sd.s * sd.omega_c ** (1 - sd.s) * mp.exp(-w / sd.omega_c)
        return 4 * J * (1 - mp.cos(w * t)) / w**2 * mp.coth(b.beta * w / 2)

    return mp_integral(f, sd.omega_c, t)


def oracle_correlation(b: BathParams, t):
    sd = b.spectral

    def J(w):
        return sd.G * w**sd.s * sd.omega_c ** (1 - sd.s) * mp.exp(-w / sd.omega_c)

    re = mp_integral(lambda w: J(w) * mp.coth(b.beta * w / 2) * mp.cos(w * t), sd.omega_c, t)
    im = -mp_integral(lambda w: J(w) * mp.sin(w * t), sd.omega_c, t)
    return complex(re, im)


# --- spectral density ------------------------------------------------------


def test_spectral_density_examples():
    sd = SpectralDensity(0.01, 1, 50)
    assert spectral_density(sd, 0.0) == 0.0
    assert spectral_density(sd, 50.0) == pytest.approx(0.01 * 50 * math.exp(-1), rel=1e-14)
    assert spectral_density(SpectralDensity(1, 2, 10), 10.0) == pytest.approx(10 * math.exp(-1))


def test_spectral_density_rejects_negative_frequency():
    with pytest.raises(ValueError):
        spectral_density(SpectralDensity(0.01, 1, 50), -1.0)


@pytest.mark.parametrize("kw", [dict(G=-1, s=1, omega_c=1), dict(G=1, s=0, omega_c=1), dict(G=1, s=1, omega_c=0)])
def test_spectral_density_validation(kw):
    with pytest.raises(ValueError):
        SpectralDensity(**kw)


def test_bath_rejects_nonpositive_beta():
    with pytest.raises(ValueError):
        BathParams(SpectralDensity(0.01, 1, 50), 0.0)


# --- correlation function ------------------------------------------------------


def test_zero_coupling_gives_zero():
    b = ohmic(G=0.0)
    for t in (0.0, 0.3, 4.0):
        assert correlation(b, t) == 0
        assert gamma(b, t) == 0
        assert delta_phase(b.spectral, t) == 0


@pytest.mark.parametrize("G,wc", [(0.01, 50.0), (0.1, 10.0)])
@pytest.mark.parametrize("t", [0.01, 0.1, 1.0, 10.0])
def test_quadrature_matches_zero_temperature_closed_forms(G, wc, t):
    b = ohmic(G, wc)
    g_ref, d_ref, c_ref = ohmic_closed_forms(b.spectral, t)
    assert gamma(b, t) == pytest.approx(g_ref, rel=1e-6)
    assert delta_phase(b.spectral, t) == pytest.approx(d_ref, rel=1e-6)
    c = correlation(b, t)
    assert abs(c - c_ref) / abs(c_ref) < 1e-6


def test_closed_forms_reject_non_ohmic():
    with pytest.raises(ValueError):
        ohmic_closed_forms(SpectralDensity(0.01, 2, 10), 1.0)


def test_imaginary_part_independent_of_temperature():
    for t in (0.05, 0.7, 3.0):
        ims = [correlation(ohmic(0.05, 10, beta), t).imag for beta in (0.3, 2.0, 100.0)]
        np.testing.assert_allclose(ims, ims[0], rtol=1e-9)


@pytest.mark.parametrize("s", [0.8, 1.0, 2.0])
@pytest.mark.parametrize("beta", [0.5, 5.0])
def test_correlation_against_mpmath(s, beta):
    b = ohmic(0.02, 10.0, beta, s)
    for t in (0.0, 0.2, 1.5):
        ref = oracle_correlation(b, t)
        assert abs(correlation(b, t) - ref) <= 1e-8 * abs(ref)


def test_negative_time_is_conjugate_of_defining_integral():
    b = ohmic(0.05, 10.0, 1.0)
    for t in (0.3, 2.0):
        ref = oracle_correlation(b, -t)
        assert abs(correlation(b, -t) - ref) <= 1e-8 * abs(ref)
        c = correlation(b, t)
        assert correlation(b, -t) == pytest.approx(c.conjugate(), rel=1e-14)


@pytest.mark.parametrize("s", [0.8, 1.0, 2.0])
@pytest.mark.parametrize("beta", [0.5, 1.0, 100.0])
def test_series_route_agrees_with_quadrature(s, beta):
    b = ohmic(0.01, 10.0, beta, s)
    ts = np.array([0.0, 0.01, 0.3, 2.0, 12.5])
    series = thermal_correlation_series(b, ts)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", bathlib.QuadratureRetryWarning)
        quad = np.array([correlation(b, t) for t in ts])
    np.testing.assert_allclose(series, quad, rtol=1e-9, atol=1e-12 * abs(quad[0]))


# --- dephasing integrals ---------------------------------------------------------


def test_gamma_at_zero_and_linearity():
    assert gamma(ohmic(), 0.0) == 0.0
    for t in (0.05, 1.0, 7.0):
        g1 = gamma(ohmic(0.01, 10, 0.5), t)
        g2 = gamma(ohmic(0.02, 10, 0.5), t)
        assert g2 == pytest.approx(2 * g1, rel=1e-12)
        d1 = delta_phase(SpectralDensity(0.01, 1, 10), t)
        d2 = delta_phase(SpectralDensity(0.02, 1, 10), t)
        assert d2 == pytest.approx(2 * d1, rel=1e-12)


def test_gamma_monotone_for_ohmic_baths():
    for b in (ohmic(0.1, 10, 0.5), ohmic(0.01, 50, 1.0), ohmic(0.01, 50, 100.0)):
        vals = [gamma(b, t) for t in np.linspace(0.0, 8.0, 41)]
        assert np.all(np.diff(vals) >= 0)


@pytest.mark.parametrize("s,beta", [(1.0, 0.5), (0.8, 2.0), (2.0, 1.0)])
def test_gamma_against_mpmath(s, beta):
    b = ohmic(0.1, 10.0, beta, s)
    for t in (0.02, 0.5, 3.0):
        assert gamma(b, t) == pytest.approx(oracle_gamma(b, t), rel=1e-8)


def test_gamma_cold_limit():
    for t in (0.1, 1.0, 5.0):
        a = gamma(ohmic(0.01, 10, 1e6), t)
        b = gamma(ohmic(0.01, 10, 1e8), t)
        assert a == pytest.approx(b, rel=1e-6)


def test_gamma_rejects_negative_time():
    with pytest.raises(ValueError):
        gamma(ohmic(), -1.0)
    with pytest.raises(ValueError):
        delta_phase(ohmic().spectral, -1.0)


def test_delta_phase_sign_and_origin():
    sd = SpectralDensity(0.01, 0.8, 20)
    assert delta_phase(sd, 0.0) == 0.0
    assert all(delta_phase(sd, t) <= 0 for t in np.linspace(0.01, 10, 25))


@pytest.mark.parametrize("s", [0.8, 1.0, 2.0])
def test_delta_phase_small_time_series(s):
    # (sin x - x) ~ -x^3/6: Delta ~ -(2/3) t^3 int J(w) w dw, next order +x^5/120
    sd = SpectralDensity(0.01, s, 10.0)
    t = 1e-3
    A = sd.G * sd.omega_c ** (1 - s)
    m1 = A * math.gamma(s + 2) * sd.omega_c ** (s + 2)
    m3 = A * math.gamma(s + 4) * sd.omega_c ** (s + 4)
    approx = 4 * (-m1 * t**3 / 6 + m3 * t**5 / 120)
    assert delta_phase(sd, t) == pytest.approx(approx, rel=1e-6)


# --- tabulation -----------------------------------------------------------------


def test_table_first_entry_and_spot_checks():
    b = ohmic(0.01, 50, 100.0)
    tab = tabulate_correlation(b, 2.0, 0.004)
    assert isinstance(tab, CorrelationTable)
    assert tab.values[0] == pytest.approx(correlation(b, 0.0), rel=1e-10)
    rng = np.random.default_rng(5)
    for k in rng.integers(0, len(tab.values), 8):
        ref = correlation(b, k * tab.dt)
        assert abs(tab.values[k] - ref) < 1e-8 * max(1.0, abs(ref))
    assert tab.t_max >= 2.0


def test_table_boundary_two_points():
    tab = tabulate_correlation(ohmic(), 0.01, 0.01)
    assert len(tab.values) == 2
    np.testing.assert_allclose(tab.times, [0.0, 0.01])


def test_table_is_read_only():
    tab = tabulate_correlation(ohmic(), 0.1, 0.01)
    with pytest.raises(ValueError):
        tab.values[0] = 1.0


def test_table_rejects_bad_grid():
    with pytest.raises(ValueError):
        tabulate_correlation(ohmic(), 1.0, 0.0)
    with pytest.raises(ValueError):
        tabulate_correlation(ohmic(), 0.001, 0.01)


def test_unconverged_quadrature_is_reported(monkeypatch):
    from scipy.integrate import IntegrationWarning

    def never_converges(*a, **kw):
        warnings.warn("The maximum number of subdivisions has been achieved.", IntegrationWarning)
        return 0.0, 1.0

    monkeypatch.setattr(bathlib, "quad", never_converges)
    with pytest.raises(QuadratureError, match="gamma"):
        gamma(ohmic(0.1, 10, 0.5), 3.0)


def test_large_error_estimate_is_reported(monkeypatch):
    monkeypatch.setattr(bathlib, "quad", lambda *a, **kw: (1.0, 0.5))
    with pytest.raises(QuadratureError, match="error estimate"):
        correlation(ohmic(0.1, 10, 0.5), 1.0)


def test_roundoff_retry_warns_and_succeeds(monkeypatch):
    from scipy.integrate import IntegrationWarning
    from scipy.integrate import quad as real_quad

    def flaky(*a, **kw):
        if kw["epsrel"] == bathlib.QUAD_EPSREL:
            warnings.warn("roundoff error is detected", IntegrationWarning)
        return real_quad(*a, **kw)

    monkeypatch.setattr(bathlib, "quad", flaky)
    b = ohmic(0.1, 10, COLD)
    with pytest.warns(bathlib.QuadratureRetryWarning):
        g = gamma(b, 1.0)
    assert g == pytest.approx(ohmic_closed_forms(b.spectral, 1.0)[0], rel=1e-6)
