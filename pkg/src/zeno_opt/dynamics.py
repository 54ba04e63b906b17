"""System dynamics: exact dephasing propagators and a time-local Redfield solver.

All states are density matrices stored as complex ``numpy`` arrays. The
"measurement picture" used throughout is ``exp(iH_S t) rho(t) exp(-iH_S t)``,
i.e. the lab-frame state with the free system evolution undone.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from . import bath as bathlib
from .bath import BathParams, CorrelationTable
from .quantum import (
    angular_momentum,
    check_density,
    evolve_unitary,
    hermitize,
    m_values,
    pauli,
    spin_dim,
)

TRACE_TOL = 1e-8
POSITIVITY_TOL = 1e-6
# max dt * (fastest system or bath frequency)
STEP_RULE = 0.5
# table spacing target, in units of 1/omega_c
TABLE_RESOLUTION = 0.01


class ModelKind(str, enum.Enum):
    POPULATION_DECAY = "population_decay"
    PURE_DEPHASING = "pure_dephasing"
    SPIN_BOSON = "spin_boson"
    LARGE_SPIN_DEPHASING = "large_spin_dephasing"
    LARGE_SPIN = "large_spin"

    @property
    def is_qubit(self) -> bool:
        return self in (ModelKind.POPULATION_DECAY, ModelKind.PURE_DEPHASING, ModelKind.SPIN_BOSON)

    @property
    def exactly_solvable(self) -> bool:
        return self in (ModelKind.PURE_DEPHASING, ModelKind.LARGE_SPIN_DEPHASING)


@dataclass(frozen=True)
class ModelSpec:
    """System Hamiltonian, coupling operator and bath of one model.

    Qubit models use ``H_S = (eps/2) sz + (delta/2) sx``; large-spin models
    use ``H_S = eps Jz + delta Jx``. The coupling ``F (x) B`` has
    ``F = sx`` for population decay, ``sz`` for the other qubit models and
    ``2 Jz`` for large spins.
    """

    kind: ModelKind
    epsilon: float
    bath: BathParams
    delta: float = 0.0
    J: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        spin_dim(self.J)
        if self.kind.is_qubit and self.J != 0.5:
            raise ValueError(f"{self.kind.value} is a qubit model; J must be 1/2")
        if self.kind in (
            ModelKind.POPULATION_DECAY,
            ModelKind.PURE_DEPHASING,
            ModelKind.LARGE_SPIN_DEPHASING,
        ) and self.delta != 0:
            raise ValueError(f"{self.kind.value} has no tunnelling term; delta must be 0")

    @property
    def dim(self) -> int:
        return spin_dim(self.J)

    @property
    def hamiltonian(self) -> NDArray[np.complex128]:
        if self.kind.is_qubit:
            sx, _, sz = pauli()
            return 0.5 * self.epsilon * sz + 0.5 * self.delta * sx
        jx, _, jz = angular_momentum(self.J)
        return self.epsilon * jz + self.delta * jx

    @property
    def coupling(self) -> NDArray[np.complex128]:
        sx, _, sz = pauli()
        if self.kind is ModelKind.POPULATION_DECAY:
            return sx
        if self.kind.is_qubit:
            return sz
        return 2 * angular_momentum(self.J)[2]

    @property
    def fastest_frequency(self) -> float:
        return max(abs(self.epsilon), abs(self.delta), self.bath.spectral.omega_c)


@dataclass(frozen=True)
class Trajectory:
    """Lab-frame states on a uniform time grid starting at 0."""

    times: NDArray[np.float64]
    states: NDArray[np.complex128]
    frame_removed: bool = False
    warnings: tuple[str, ...] = field(default=())

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


# --- exact pure-dephasing propagators -------------------------------------


def dephasing_factors(J: float, gamma_t: float, delta_t: float = 0.0) -> NDArray[np.complex128]:
    """Entrywise factors ``exp(-i Delta (m^2 - n^2) - gamma (m - n)^2)``."""
    m = m_values(J)
    dm = m[:, None] - m[None, :]
    dsq = m[:, None] ** 2 - m[None, :] ** 2
    return np.exp(-1j * delta_t * dsq - gamma_t * dm**2)


def dephasing_propagate_qubit(rho0, t: float, bath: BathParams) -> NDArray[np.complex128]:
    """Measurement-picture qubit state: coherences scaled by ``exp(-gamma(t))``."""
    rho0 = check_density(rho0)
    if rho0.shape != (2, 2):
        raise ValueError(f"expected a qubit state, got shape {rho0.shape}")
    return rho0 * dephasing_factors(0.5, bathlib.gamma(bath, t))


def dephasing_propagate_large_spin(rho0, t: float, bath: BathParams, J: float):
    rho0 = check_density(rho0)
    if rho0.shape[0] != spin_dim(J):
        raise ValueError(f"state of dimension {rho0.shape[0]} does not match J = {J}")
    g = bathlib.gamma(bath, t)
    d = bathlib.delta_phase(bath.spectral, t)
    return rho0 * dephasing_factors(J, g, d)


# --- Redfield kernel -------------------------------------------------------


def _cumulative_simpson(f: NDArray, h: float) -> NDArray:
    """Running integral of samples ``f`` at spacing ``h``.

    Even indices get composite Simpson; odd indices add a three-point
    half-panel to the preceding even value.
    """
    n = f.shape[0]
    out = np.zeros_like(f)
    if n < 2:
        return out
    if n == 2:
        out[1] = 0.5 * h * (f[0] + f[1])
        return out
    pairs = (f[0:-2:2] + 4 * f[1:-1:2] + f[2::2]) * (h / 3)
    out[2::2] = np.cumsum(pairs, axis=0)
    odd = np.arange(1, n - 1, 2)
    out[odd] = out[odd - 1] + (5 * f[odd - 1] + 8 * f[odd] - f[odd + 1]) * (h / 12)
    if n % 2 == 0:
        # last point has no right neighbour: mirror the half-panel rule
        k = n - 1
        out[k] = out[k - 1] + (5 * f[k] + 8 * f[k - 1] - f[k - 2]) * (h / 12)
    return out


class RedfieldKernel:
    """``K(t) = int_0^t C(u) exp(-iH u) F exp(iH u) du`` on a correlation table.

    In the eigenbasis of ``H`` the integrand factorises per Bohr frequency
    ``w_ab = E_a - E_b``, so each distinct frequency needs one running
    integral of ``C(u) exp(-i w_ab u)``.
    """

    def __init__(self, model: ModelSpec, table: CorrelationTable):
        self.model = model
        self.table = table
        evals, vecs = np.linalg.eigh(model.hamiltonian)
        self._vecs = vecs
        self._f_eig = vecs.conj().T @ model.coupling @ vecs
        bohr = evals[:, None] - evals[None, :]
        freqs, inverse = np.unique(np.round(bohr, 12), return_inverse=True)
        self._freq_index = inverse.reshape(bohr.shape)
        u = table.times
        samples = table.values[:, None] * np.exp(-1j * u[:, None] * freqs[None, :])
        self._running = _cumulative_simpson(samples, table.dt)

    def _integrals_at(self, t: float) -> NDArray:
        h = self.table.dt
        x = t / h
        k = int(round(x))
        if abs(x - k) < 1e-9:
            if k > len(self.table.values) - 1:
                raise ValueError(f"t = {t} beyond the correlation table ({self.table.t_max})")
            return self._running[k]
        k = int(math.floor(x))
        if k + 1 > len(self.table.values) - 1:
            raise ValueError(f"t = {t} beyond the correlation table ({self.table.t_max})")
        # off-grid: linear interpolation of the running integral
        w = x - k
        c0 = self._running[k + 1] - self._running[k]
        return self._running[k] + w * c0

    def __call__(self, t: float) -> NDArray[np.complex128]:
        if t < 0:
            raise ValueError("t must be >= 0")
        vals = self._integrals_at(t)
        k_eig = self._f_eig * vals[self._freq_index]
        return self._vecs @ k_eig @ self._vecs.conj().T


def redfield_kernel(model: ModelSpec, table: CorrelationTable, t: float):
    return RedfieldKernel(model, table)(t)


def table_spacing(dt: float, omega_c: float) -> float:
    """Correlation-table spacing: an even subdivision of the half step."""
    half = 0.5 * dt
    r = max(2, math.ceil(half * omega_c / TABLE_RESOLUTION))
    r += r % 2
    return half / r


def check_step(model: ModelSpec, dt: float) -> None:
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    fastest = model.fastest_frequency
    if dt * fastest >= STEP_RULE:
        raise ValueError(
            f"dt = {dt} does not resolve the fastest frequency {fastest:g}: "
            f"need dt < {STEP_RULE / fastest:.4g} (suggested {0.1 / fastest:.4g})"
        )


def redfield_integrate(model: ModelSpec, rho0, t_max: float, dt: float) -> Trajectory:
    """Integrate ``drho/dt = -i[H, rho] + ([K(t) rho, F] + h.c.)`` with fixed-step RK4.

    States are re-Hermitised after every step. The returned trajectory is on
    the grid ``0, dt, ..., n dt`` with ``n dt >= t_max``.
    """
    rho0 = check_density(rho0)
    check_step(model, dt)
    if rho0.shape[0] != model.dim:
        raise ValueError(f"state dimension {rho0.shape[0]} != model dimension {model.dim}")
    n_steps = max(1, int(math.ceil(t_max / dt - 1e-9)))
    times = dt * np.arange(n_steps + 1)

    h_tab = table_spacing(dt, model.bath.spectral.omega_c)
    table = bathlib.tabulate_correlation(model.bath, times[-1], h_tab)
    kernel = RedfieldKernel(model, table)
    half_steps = 0.5 * dt * np.arange(2 * n_steps + 1)
    ks = np.array([kernel(t) for t in half_steps])

    H = model.hamiltonian
    F = model.coupling

    def rhs(k, rho):
        x = k @ rho @ F - F @ k @ rho
        return -1j * (H @ rho - rho @ H) + x + x.conj().T

    states = np.empty((n_steps + 1,) + rho0.shape, dtype=complex)
    states[0] = rho0
    rho = rho0.copy()
    for i in range(n_steps):
        k0, kh, k1 = ks[2 * i], ks[2 * i + 1], ks[2 * i + 2]
        a = rhs(k0, rho)
        b = rhs(kh, rho + 0.5 * dt * a)
        c = rhs(kh, rho + 0.5 * dt * b)
        d = rhs(k1, rho + dt * c)
        rho = hermitize(rho + dt / 6 * (a + 2 * b + 2 * c + d))
        states[i + 1] = rho

    notes = []
    drift = float(np.max(np.abs(np.trace(states, axis1=1, axis2=2) - 1)))
    if drift > TRACE_TOL:
        notes.append(f"trace drift {drift:.2e} exceeds {TRACE_TOL:g}")
    min_eig = float(np.min(np.linalg.eigvalsh(states)))
    if min_eig < -POSITIVITY_TOL:
        notes.append(
            f"positivity breach: min eigenvalue {min_eig:.2e} "
            f"(G={model.bath.spectral.G}, omega_c={model.bath.spectral.omega_c}, dt={dt})"
        )
    return Trajectory(times=times, states=states, warnings=tuple(notes))


def frame_removed_state(model: ModelSpec, traj: Trajectory, tau: float):
    """Measurement-picture state ``exp(iH tau) rho(tau) exp(-iH tau)``.

    Between grid points the two neighbouring states are first moved to the
    measurement picture, then interpolated linearly and re-Hermitised.
    """
    if traj.frame_removed:
        raise ValueError("trajectory is already in the measurement picture")
    t_end = traj.times[-1]
    if tau < 0 or tau > t_end * (1 + 1e-12):
        raise ValueError(f"tau = {tau} outside the trajectory range [0, {t_end}]")
    H = model.hamiltonian
    x = tau / traj.dt
    k = int(round(x))
    if abs(x - k) < 1e-9:
        return hermitize(evolve_unitary(traj.states[k], H, -traj.times[k]))
    k = int(math.floor(x))
    w = x - k
    lo = evolve_unitary(traj.states[k], H, -traj.times[k])
    hi = evolve_unitary(traj.states[k + 1], H, -traj.times[k + 1])
    return hermitize((1 - w) * lo + w * hi)
