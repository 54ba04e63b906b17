"""Bosonic bath with spectral density ``J(w) = G w^s wc^(1-s) exp(-w/wc)``.

Every bath quantity is a frequency integral against ``J(w)``. The public
functions evaluate them by adaptive quadrature (QUADPACK through scipy): the
low-frequency end carries the ``w^(s-1)`` singularity as an algebraic weight,
the oscillatory high-frequency part uses the Fourier-weighted rules, and the
upper limit is cut at ``50 wc``.

:func:`tabulate_correlation` takes a different route for speed: the
zero-temperature part of ``C(t)`` in closed form plus the Bose series of the
thermal part. The two routes are checked against each other in the tests.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import IntegrationWarning, quad

CUTOFF_MULTIPLE = 50.0
QUAD_EPSREL = 1e-10
QUAD_RETRY_EPSREL = 1e-8
QUAD_EPSABS = 1e-14
QUAD_LIMIT = 2000


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not meet its error target."""


class QuadratureRetryWarning(UserWarning):
    """An integral only converged at the relaxed tolerance."""


@dataclass(frozen=True)
class SpectralDensity:
    G: float
    s: float
    omega_c: float

    def __post_init__(self):
        if self.G < 0:
            raise ValueError(f"G must be >= 0, got {self.G}")
        if self.s <= 0:
            raise ValueError(f"s must be > 0, got {self.s}")
        if self.omega_c <= 0:
            raise ValueError(f"omega_c must be > 0, got {self.omega_c}")

    @property
    def prefactor(self) -> float:
        """``G wc^(1-s)``, so that ``J(w) = prefactor * w^s exp(-w/wc)``."""
        return self.G * self.omega_c ** (1 - self.s)

    @property
    def omega_max(self) -> float:
        return CUTOFF_MULTIPLE * self.omega_c


@dataclass(frozen=True)
class BathParams:
    spectral: SpectralDensity
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")


@dataclass(frozen=True)
class CorrelationTable:
    """``C(k dt)`` for ``k = 0 .. n``; read-only after construction."""

    dt: float
    values: NDArray[np.complex128]

    def __post_init__(self):
        self.values.setflags(write=False)

    @property
    def t_max(self) -> float:
        return self.dt * (len(self.values) - 1)

    @property
    def times(self) -> NDArray[np.float64]:
        return self.dt * np.arange(len(self.values))


def spectral_density(bath: SpectralDensity, omega: float) -> float:
    if omega < 0:
        raise ValueError(f"omega must be >= 0, got {omega}")
    if omega == 0:
        return 0.0
    return bath.prefactor * omega**bath.s * math.exp(-omega / bath.omega_c)


# --- stable elementary kernels -------------------------------------------


def _x_coth(x):
    """``x coth(x)`` with the removable singularity at 0 filled in."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    xs = np.where(small, 1.0, x)
    return np.where(small, 1 + x * x / 3, xs / np.tanh(xs))


def _one_minus_cos_over_sq(w, t):
    """``(1 - cos(w t)) / w^2`` without cancellation near ``w t = 0``."""
    w = np.asarray(w, dtype=float)
    safe = np.where(w == 0, 1.0, w)
    return np.where(w == 0, 0.5 * t * t, 2 * np.sin(0.5 * safe * t) ** 2 / safe**2)


def _sin_minus_x(x):
    """``sin(x) - x``, series for small ``|x|``."""
    x = np.asarray(x, dtype=float)
    x2 = x * x
    series = -x * x2 / 6 * (1 - x2 / 20 * (1 - x2 / 42 * (1 - x2 / 72 * (1 - x2 / 110))))
    return np.where(np.abs(x) < 0.1, series, np.sin(x) - x)


# --- quadrature plumbing -------------------------------------------------


def _quad(f, a, b, what, **kw):
    """scipy ``quad`` that raises instead of returning an unconverged value.

    A roundoff complaint at the default target triggers one retry at
    ``QUAD_RETRY_EPSREL``; the retry is announced as a warning.
    """
    if b <= a:
        return 0.0
    for epsrel in (QUAD_EPSREL, QUAD_RETRY_EPSREL):
        with warnings.catch_warnings():
            warnings.simplefilter("error", IntegrationWarning)
            try:
                val, err = quad(
                    f, a, b, epsabs=QUAD_EPSABS, epsrel=epsrel, limit=QUAD_LIMIT, **kw
                )
            except IntegrationWarning as exc:
                last = str(exc).split(".")[0]
                continue
        if epsrel != QUAD_EPSREL:
            warnings.warn(
                f"{what}: quadrature retried at epsrel={epsrel:g}", QuadratureRetryWarning,
                stacklevel=3,
            )
        if err > max(1e-7 * abs(val), 1e-12):
            raise QuadratureError(f"{what}: error estimate {err:.2e} for value {val:.6e}")
        return val
    raise QuadratureError(f"{what}: {last}")


def _split_point(bath: SpectralDensity, t: float) -> float:
    """Boundary between the singular low-frequency piece and the oscillatory tail."""
    w = bath.omega_c
    if t > 0:
        w = min(w, 1.0 / t)
    return w


def _spectral_integral(
    bath: SpectralDensity,
    smooth,
    t: float,
    what: str,
    osc=None,
    beta: float | None = None,
) -> float:
    """Integrate ``prefactor * w^(s-1) * smooth(w)`` over ``[0, 50 wc]``.

    ``osc`` optionally names a trigonometric factor ``('cos' | 'sin', g)`` with
    ``smooth(w) = g(w) * trig(w t)`` on the tail; the tail then uses the
    Fourier-weighted rule on ``g`` instead of resolving every oscillation.
    """
    s = bath.s
    split = _split_point(bath, t)
    # thermal structure near w ~ 1/beta is resolved by its own panel
    knee = min(split, 20.0 / beta) if beta is not None else split
    total = _quad(smooth, 0.0, knee, what, weight="alg", wvar=(s - 1, 0))
    if knee < split:
        total += _quad(lambda w: w ** (s - 1) * smooth(w), knee, split, what)
    if osc is None or t == 0:
        total += _quad(lambda w: w ** (s - 1) * smooth(w), split, bath.omega_max, what)
    else:
        kind, g = osc
        total += _quad(
            lambda w: w ** (s - 1) * g(w), split, bath.omega_max, what, weight=kind, wvar=t
        )
    return bath.prefactor * total


def correlation(bath: BathParams, t: float) -> complex:
    """Bath correlation ``C(t) = int J(w) [coth(beta w/2) cos(wt) - i sin(wt)] dw``.

    Extended to ``t < 0`` through ``C(-t) = conj(C(t))``.
    """
    if t < 0:
        return correlation(bath, -t).conjugate()
    sd = bath.spectral
    if sd.G == 0:
        return 0j
    beta, wc = bath.beta, sd.omega_c

    # w coth(beta w / 2) = (2/beta) * x coth(x), x = beta w / 2
    def thermal(w):
        return (2.0 / beta) * _x_coth(0.5 * beta * w) * np.exp(-w / wc)

    re = _spectral_integral(
        sd, lambda w: thermal(w) * np.cos(w * t), t, f"Re C({t})", ("cos", thermal), beta
    )

    def plain(w):
        return w * np.exp(-w / wc)

    im = -_spectral_integral(
        sd, lambda w: plain(w) * np.sin(w * t), t, f"Im C({t})", ("sin", plain)
    )
    return complex(re, im)


def gamma(bath: BathParams, t: float) -> float:
    """Dephasing exponent ``4 int J(w) (1 - cos wt)/w^2 coth(beta w/2) dw``."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    sd = bath.spectral
    if t == 0 or sd.G == 0:
        return 0.0
    beta, wc = bath.beta, sd.omega_c

    def thermal(w):
        return (2.0 / beta) * _x_coth(0.5 * beta * w) * np.exp(-w / wc)

    # on the tail (1 - cos)/w^2 splits into a smooth part and a Fourier part
    split = _split_point(sd, t)
    knee = min(split, 20.0 / beta)
    s = sd.s
    what = f"gamma({t})"

    def f_low(w):
        return thermal(w) * _one_minus_cos_over_sq(w, t)

    total = _quad(f_low, 0.0, knee, what, weight="alg", wvar=(s - 1, 0))
    if knee < split:
        total += _quad(lambda w: w ** (s - 1) * f_low(w), knee, split, what)

    def g_tail(w):
        return w ** (s - 3) * thermal(w)

    total += _quad(g_tail, split, sd.omega_max, what)
    total -= _quad(g_tail, split, sd.omega_max, what, weight="cos", wvar=t)
    return 4 * sd.prefactor * total


def delta_phase(bath: SpectralDensity, t: float) -> float:
    """Bath-mediated phase ``4 int J(w) (sin wt - wt)/w^2 dw`` (always <= 0)."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if t == 0 or bath.G == 0:
        return 0.0
    s, wc = bath.s, bath.omega_c
    split = _split_point(bath, t)
    what = f"delta({t})"

    def f_low(w):
        return np.exp(-w / wc) * _sin_minus_x(w * t) / np.where(w == 0, 1.0, w)

    total = _quad(f_low, 0.0, split, what, weight="alg", wvar=(s - 1, 0))
    total += _quad(
        lambda w: w ** (s - 2) * np.exp(-w / wc), split, bath.omega_max, what,
        weight="sin", wvar=t,
    )
    total -= t * _quad(lambda w: w ** (s - 1) * np.exp(-w / wc), split, bath.omega_max, what)
    return 4 * bath.prefactor * total


# --- closed forms --------------------------------------------------------


def zero_temperature_correlation(bath: SpectralDensity, t):
    """``int J(w) exp(-iwt) dw = G wc^(1-s) Gamma(s+1) (1/wc + it)^-(s+1)``."""
    t = np.asarray(t, dtype=float)
    return bath.prefactor * math.gamma(bath.s + 1) * (1 / bath.omega_c + 1j * t) ** (
        -(bath.s + 1)
    )


def _bose_series(c, beta: float, p: float, n_terms: int = 48):
    """``sum_{k>=1} (c + k beta)^(-p)`` with an Euler-Maclaurin tail.

    ``c`` may be a complex array with positive real part.
    """
    c = np.asarray(c, dtype=complex)
    k = np.arange(1, n_terms)
    head = np.sum((c[..., None] + k * beta) ** (-p), axis=-1)
    z = c + n_terms * beta
    tail = (
        z ** (1 - p) / ((p - 1) * beta)
        + 0.5 * z ** (-p)
        + p * beta * z ** (-p - 1) / 12
        - p * (p + 1) * (p + 2) * beta**3 * z ** (-p - 3) / 720
        + p * (p + 1) * (p + 2) * (p + 3) * (p + 4) * beta**5 * z ** (-p - 5) / 30240
    )
    return head + tail


def thermal_correlation_series(bath: BathParams, t):
    """Full ``C(t)`` from ``coth(x/2) = 1 + 2 sum_k exp(-k x)``.

    Each Bose term integrates in closed form, so
    ``C(t) = A [(a + it)^-p + sum_k ((a_k + it)^-p + (a_k - it)^-p)]`` with
    ``a_k = 1/wc + k beta``, ``p = s + 1`` and ``A = G wc^(1-s) Gamma(p)``.
    """
    sd = bath.spectral
    t = np.asarray(t, dtype=float)
    p = sd.s + 1
    amp = sd.prefactor * math.gamma(p)
    a = 1 / sd.omega_c
    thermal = _bose_series(a + 1j * t, bath.beta, p) + _bose_series(a - 1j * t, bath.beta, p)
    return zero_temperature_correlation(sd, t) + amp * thermal


def ohmic_closed_forms(bath: SpectralDensity, t: float) -> tuple[float, float, complex]:
    """Zero-temperature ``(gamma, Delta, C)`` for an Ohmic (``s = 1``) bath."""
    if bath.s != 1:
        raise ValueError("closed forms exist only for s = 1")
    G, wc = bath.G, bath.omega_c
    x = wc * t
    return (
        2 * G * math.log1p(x * x),
        4 * G * (math.atan(x) - x),
        G / complex(1 / wc, t) ** 2,
    )


def tabulate_correlation(
    bath: BathParams, t_max: float, dt: float, chunk: int = 8192
) -> CorrelationTable:
    """Tabulate ``C(k dt)`` for ``k dt`` covering ``[0, t_max]``.

    The grid ends at the first multiple of ``dt`` that is ``>= t_max`` (within
    rounding), so ``t_max = dt`` gives the two points ``{0, dt}``.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if t_max < dt:
        raise ValueError(f"t_max ({t_max}) must be >= dt ({dt})")
    n = int(math.ceil(t_max / dt - 1e-9))
    times = dt * np.arange(n + 1)
    values = np.empty(n + 1, dtype=complex)
    if bath.spectral.G == 0:
        values[:] = 0
    else:
        for lo in range(0, n + 1, chunk):
            block = times[lo : lo + chunk]
            values[lo : lo + chunk] = thermal_correlation_series(bath, block)
    if not np.all(np.isfinite(values)):
        bad = times[~np.isfinite(values)][0]
        raise QuadratureError(f"correlation table not finite at t = {bad}")
    return CorrelationTable(dt=dt, values=values)
