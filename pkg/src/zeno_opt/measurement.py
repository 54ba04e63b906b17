"""Survival probabilities, optimal projectors and effective decay rates.

A measurement round prepares ``|psi>``, lets the system evolve for ``tau``,
projects onto ``|chi>`` and rotates ``|chi>`` back to ``|psi>``. The survival
probability is ``s = <chi| rho(tau) |chi>`` with ``rho(tau)`` in the
measurement picture, and ``Gamma = -ln(s) / tau``.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import minimize

from . import bath as bathlib
from .bath import BathParams
from .dynamics import (
    ModelKind,
    ModelSpec,
    Trajectory,
    dephasing_factors,
    frame_removed_state,
    redfield_integrate,
)
from .quantum import (
    CoherentStateSpec,
    bloch_angles,
    bloch_from_angles,
    bloch_from_density,
    coherent_amplitudes,
    coherent_state,
    projector,
)

DOMINANCE_TOL = 1e-12
NORM_TOL = 1e-9
DEGENERATE_BLOCH = 1e-12


class SweepError(RuntimeError):
    """A sweep point failed; ``tau`` names the offending interval."""

    def __init__(self, tau: float, cause: Exception):
        super().__init__(f"at tau = {tau}: {cause}")
        self.tau = tau


class FlipTimeNotFound(RuntimeError):
    def __init__(self, final_nz: float):
        super().__init__(f"n_z never changes sign (final n_z = {final_nz:.6g})")
        self.final_nz = final_nz


def survival(rho_tau, chi) -> float:
    """``<chi| rho |chi>`` clamped to ``[0, 1]``."""
    rho_tau = np.asarray(rho_tau, dtype=complex)
    chi = np.asarray(chi, dtype=complex)
    if chi.shape != (rho_tau.shape[0],):
        raise ValueError(f"projector of length {chi.shape} does not match state {rho_tau.shape}")
    if abs(np.linalg.norm(chi) - 1) > NORM_TOL:
        raise ValueError("projector state is not normalised")
    s = float(np.real(chi.conj() @ rho_tau @ chi))
    return min(1.0, max(0.0, s))


def optimal_qubit(rho_tau, tie_break) -> tuple[NDArray[np.float64], float]:
    """Projector Bloch vector parallel to ``n(tau)`` and ``s* = (1 + |n|)/2``.

    For a maximally mixed state every projector is optimal and ``tie_break``
    (normally the initial Bloch vector) is returned.
    """
    n = bloch_from_density(rho_tau)
    r = float(np.linalg.norm(n))
    if r < DEGENERATE_BLOCH:
        tb = np.asarray(tie_break, dtype=float)
        return tb / np.linalg.norm(tb), 0.5
    return n / r, 0.5 * (1 + min(r, 1.0))


def decay_rate(s: float, tau: float) -> float:
    """``-ln(s) / tau``; ``s = 0`` gives ``inf``."""
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    if not 0 <= s <= 1:
        raise ValueError(f"survival probability {s} outside [0, 1]")
    if s == 0:
        return math.inf
    if s == 1:
        return 0.0
    return -math.log(s) / tau


def survival_after_N(s: float, N: int) -> float:
    if N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    if not 0 <= s <= 1:
        raise ValueError(f"survival probability {s} outside [0, 1]")
    return s**N


def _check_unit(n0) -> NDArray[np.float64]:
    n0 = np.asarray(n0, dtype=float)
    if abs(np.linalg.norm(n0) - 1) > NORM_TOL:
        raise ValueError("initial Bloch vector must be a unit vector")
    return n0


def dephasing_survival_unopt(n0, gamma_t: float) -> float:
    """Survival when re-measuring the initial pure state under pure dephasing."""
    nx, ny, nz = _check_unit(n0)
    return 0.5 * (1 + nz * nz + math.exp(-gamma_t) * (nx * nx + ny * ny))


def dephasing_survival_opt(n0, gamma_t: float) -> float:
    nx, ny, nz = _check_unit(n0)
    return 0.5 * (1 + math.sqrt(nz * nz + math.exp(-2 * gamma_t) * (nx * nx + ny * ny)))


# --- coherent-state projectors --------------------------------------------


def coherent_landscape(rho_tau, J: float, theta, phi) -> NDArray[np.float64]:
    """Survival against coherent projectors for arrays of angles."""
    z = coherent_amplitudes(J, theta, phi)
    return np.real(np.einsum("...i,ij,...j->...", z.conj(), rho_tau, z))


def dephased_coherent_state(eta: CoherentStateSpec, t: float, bath: BathParams):
    """``|eta><eta|`` after the exact large-spin dephasing map."""
    rho0 = projector(coherent_state(eta))
    if t == 0:
        return rho0
    g = bathlib.gamma(bath, t)
    d = bathlib.delta_phase(bath.spectral, t)
    return rho0 * dephasing_factors(eta.J, g, d)


def coherent_survival(
    eta: CoherentStateSpec, zeta: CoherentStateSpec, t: float, bath: BathParams
) -> float:
    """Probability of finding ``|zeta>`` after preparing ``|eta>`` and dephasing for ``t``."""
    if eta.J != zeta.J:
        raise ValueError(f"spin mismatch: {eta.J} vs {zeta.J}")
    if t < 0:
        raise ValueError("t must be >= 0")
    return survival(dephased_coherent_state(eta, t, bath), coherent_state(zeta))


class CoherentOptimum(NamedTuple):
    theta: float
    phi: float
    survival: float


def _wrap_angles(theta: float, phi: float) -> tuple[float, float]:
    theta = theta % (2 * np.pi)
    if theta > np.pi:
        theta = 2 * np.pi - theta
        phi += np.pi
    return float(theta), float(phi % (2 * np.pi))


def optimize_coherent_state(
    rho_tau,
    J: float,
    grid: int = 64,
    candidates: Sequence[tuple[float, float]] = (),
    refine: bool = True,
) -> CoherentOptimum:
    """Maximise the coherent-projector survival over ``(theta, phi)``.

    A ``grid x grid`` scan over ``[0, pi] x [0, 2 pi)`` plus the explicit
    ``candidates`` picks a start point, which Nelder-Mead then polishes. The
    result is never worse than the best scanned point.
    """
    th = np.linspace(0, np.pi, grid)
    ph = 2 * np.pi * np.arange(grid) / grid
    tt, pp = np.meshgrid(th, ph, indexing="ij")
    tt = tt.ravel()
    pp = pp.ravel()
    if candidates:
        c = np.asarray(candidates, dtype=float)
        tt = np.concatenate([tt, c[:, 0]])
        pp = np.concatenate([pp, c[:, 1]])
    values = coherent_landscape(rho_tau, J, tt, pp)
    best = int(np.argmax(values))
    best_theta, best_phi, best_val = float(tt[best]), float(pp[best]), float(values[best])
    if refine:
        step = np.pi / max(grid - 1, 1)
        x0 = np.array([best_theta, best_phi])
        simplex = np.array([x0, x0 + [step, 0], x0 + [0, step]])
        res = minimize(
            lambda x: -float(coherent_landscape(rho_tau, J, x[0], x[1])),
            x0,
            method="Nelder-Mead",
            options={
                "initial_simplex": simplex,
                "xatol": 1e-9,
                "fatol": 1e-14,
                "maxiter": 4000,
            },
        )
        if -res.fun > best_val:
            best_theta, best_phi = _wrap_angles(*res.x)
            best_val = -float(res.fun)
    return CoherentOptimum(best_theta, best_phi, min(1.0, max(0.0, best_val)))


def optimize_coherent(
    eta: CoherentStateSpec,
    t: float,
    bath: BathParams | None = None,
    state=None,
    grid: int = 64,
) -> CoherentOptimum:
    """Best coherent projector at time ``t`` after preparing ``|eta>``.

    With ``bath`` the state comes from the exact dephasing map; otherwise
    ``state`` must hold the measurement-picture density matrix.
    """
    if not t > 0:
        raise ValueError("t must be > 0")
    if state is None:
        if bath is None:
            raise ValueError("need either a bath or a state")
        state = dephased_coherent_state(eta, t, bath)
    return optimize_coherent_state(state, eta.J, grid, candidates=[(eta.theta, eta.phi)])


# --- flip time and regime changes -----------------------------------------


def flip_time(model: ModelSpec, traj: Trajectory, resolution: float = 1e-6) -> float:
    """First time the measurement-picture ``n_z`` changes sign."""
    if model.kind is not ModelKind.POPULATION_DECAY:
        raise ValueError("flip time is defined for the population decay model")

    def nz(tau):
        return bloch_from_density(frame_removed_state(model, traj, tau))[2]

    # H_S is diagonal here, so grid values of n_z are frame independent
    grid_nz = (traj.states[:, 0, 0] - traj.states[:, 1, 1]).real
    sign = np.sign(grid_nz)
    change = np.nonzero(sign[1:] != sign[:-1])[0]
    if change.size == 0:
        raise FlipTimeNotFound(float(grid_nz[-1]))
    i = int(change[0])
    lo, hi = float(traj.times[i]), float(traj.times[i + 1])
    f_lo = nz(lo)
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        f_mid = nz(mid)
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def transition_candidates(taus, rates) -> list[tuple[float, str]]:
    """Sign changes of the centred slope of ``Gamma(tau)``.

    Returns ``(tau, label)`` pairs with label ``"zeno->anti-zeno"`` where the
    rate stops increasing and ``"anti-zeno->zeno"`` where it starts again.
    """
    taus = np.asarray(taus, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if len(taus) < 4:
        return []
    slope = (rates[2:] - rates[:-2]) / (taus[2:] - taus[:-2])
    mids = taus[1:-1]
    out = []
    for k in range(len(slope) - 1):
        a, b = slope[k], slope[k + 1]
        if a > 0 >= b:
            out.append((0.5 * (mids[k] + mids[k + 1]), "zeno->anti-zeno"))
        elif a < 0 <= b:
            out.append((0.5 * (mids[k] + mids[k + 1]), "anti-zeno->zeno"))
    return out


# --- sweeps --------------------------------------------------------------


class ProjectorKind(str, enum.Enum):
    INITIAL_STATE = "initial_state"
    OPTIMAL_QUBIT = "optimal_qubit"
    OPTIMAL_COHERENT = "optimal_coherent"


@dataclass(frozen=True)
class ProjectorChoice:
    kind: ProjectorKind
    grid: int = 64
    refine: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", ProjectorKind(self.kind))
        if self.grid < 2:
            raise ValueError("optimizer grid needs at least 2 points per axis")

    @classmethod
    def default_for(cls, model: ModelSpec, grid: int = 64) -> "ProjectorChoice":
        kind = ProjectorKind.OPTIMAL_QUBIT if model.dim == 2 else ProjectorKind.OPTIMAL_COHERENT
        return cls(kind, grid)


@dataclass(frozen=True)
class InitialState:
    """Pure initial state given by Bloch-sphere (or coherent-state) angles."""

    theta: float
    phi: float

    @classmethod
    def from_bloch(cls, n) -> "InitialState":
        theta, phi = bloch_angles(_check_unit(n))
        return cls(theta, phi)

    @property
    def bloch(self) -> NDArray[np.float64]:
        return bloch_from_angles(self.theta, self.phi)

    def vector(self, J: float = 0.5):
        return coherent_state(CoherentStateSpec(J, self.theta, self.phi))


@dataclass(frozen=True)
class MeasurementOutcome:
    tau: float
    s_unopt: float
    s_opt: float
    gamma_unopt: float
    gamma_opt: float
    opt_theta: float
    opt_phi: float

    def __post_init__(self):
        for s in (self.s_unopt, self.s_opt):
            if not 0 <= s <= 1:
                raise ValueError(f"survival {s} outside [0, 1] at tau = {self.tau}")
        if self.s_opt < self.s_unopt - DOMINANCE_TOL:
            raise ValueError(
                f"optimised survival {self.s_opt} below baseline {self.s_unopt} at tau = {self.tau}"
            )

    @classmethod
    def build(cls, tau, s_unopt, s_opt, theta, phi) -> "MeasurementOutcome":
        return cls(
            tau, s_unopt, s_opt, decay_rate(s_unopt, tau), decay_rate(s_opt, tau), theta, phi
        )


@dataclass(frozen=True)
class DecaySweep:
    model: ModelSpec
    initial: InitialState
    outcomes: tuple[MeasurementOutcome, ...]
    warnings: tuple[str, ...] = ()
    trajectory: Trajectory | None = None

    def __post_init__(self):
        taus = [o.tau for o in self.outcomes]
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise ValueError("sweep taus must be strictly increasing")

    def column(self, name: str) -> NDArray[np.float64]:
        return np.array([getattr(o, name) for o in self.outcomes])


def default_threads() -> int:
    raw = os.environ.get("ZENO_OPT_THREADS")
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"ZENO_OPT_THREADS must be an integer, got {raw!r}") from None


def sweep(
    model: ModelSpec,
    initial: InitialState,
    taus: Sequence[float],
    choice: ProjectorChoice | None = None,
    dt: float | None = None,
    method: str = "auto",
    threads: int | None = None,
) -> DecaySweep:
    """Unoptimised and optimised survival over a grid of measurement intervals.

    ``method`` is ``"exact"`` (dephasing models only), ``"redfield"`` or
    ``"auto"``, which picks the exact map whenever the model has one. Every
    interval restarts from the initial state, so a single trajectory up to
    ``max(taus)`` serves the whole grid.
    """
    taus = [float(t) for t in taus]
    if not taus or taus[0] <= 0 or any(b <= a for a, b in zip(taus, taus[1:])):
        raise ValueError("taus must be positive and strictly increasing")
    choice = choice or ProjectorChoice.default_for(model)
    if choice.kind is ProjectorKind.OPTIMAL_QUBIT and model.dim != 2:
        raise ValueError("closed-form optimal projector needs a qubit model")
    if choice.kind is ProjectorKind.OPTIMAL_COHERENT and model.kind.is_qubit:
        raise ValueError("coherent projectors are for the large-spin models")
    if method == "auto":
        method = "exact" if model.kind.exactly_solvable else "redfield"
    if method == "exact" and not model.kind.exactly_solvable:
        raise ValueError(f"{model.kind.value} has no exact solution; use redfield")
    if method not in ("exact", "redfield"):
        raise ValueError(f"unknown method {method!r}")

    psi0 = initial.vector(model.J)
    rho0 = projector(psi0)
    traj = None
    if method == "redfield":
        if dt is None:
            dt = 0.1 / model.fastest_frequency
        traj = redfield_integrate(model, rho0, taus[-1], dt)

    def state_at(tau):
        if traj is not None:
            return frame_removed_state(model, traj, tau)
        g = bathlib.gamma(model.bath, tau)
        d = bathlib.delta_phase(model.bath.spectral, tau) if model.J != 0.5 else 0.0
        return rho0 * dephasing_factors(model.J, g, d)

    def evaluate(tau):
        try:
            rho = state_at(tau)
            s_unopt = survival(rho, psi0)
            if choice.kind is ProjectorKind.OPTIMAL_QUBIT:
                n_opt, s_opt = optimal_qubit(rho, initial.bloch)
                theta, phi = bloch_angles(n_opt)
            elif choice.kind is ProjectorKind.OPTIMAL_COHERENT:
                best = optimize_coherent_state(
                    rho, model.J, choice.grid, [(initial.theta, initial.phi)], choice.refine
                )
                theta, phi, s_opt = best
            else:
                theta, phi, s_opt = initial.theta, initial.phi, s_unopt
            return MeasurementOutcome.build(tau, s_unopt, s_opt, theta, phi)
        except (ValueError, RuntimeError, ArithmeticError) as exc:
            raise SweepError(tau, exc) from exc

    n_threads = threads or default_threads()
    if n_threads > 1:
        with ThreadPoolExecutor(n_threads) as pool:
            outcomes = list(pool.map(evaluate, taus))
    else:
        outcomes = [evaluate(t) for t in taus]
    notes = traj.warnings if traj is not None else ()
    return DecaySweep(model, initial, tuple(outcomes), tuple(notes), traj)
