"""Dense small-matrix quantum mechanics shared by every model.

Conventions
-----------
- Qubit basis is ``(|up_z>, |down_z>)``.
- Spin-J basis is ordered ``m = J, J-1, ..., -J``.
- Density matrices and state vectors are plain complex ``numpy`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
from numpy.typing import NDArray

# structural checks (Hermiticity, trace, positivity)
STRUCT_TOL = 1e-9
# numerical comparisons between two computed quantities
COMPARE_TOL = 1e-10

ComplexArray = NDArray[np.complex128]


def pauli() -> tuple[ComplexArray, ComplexArray, ComplexArray]:
    """Return ``(sigma_x, sigma_y, sigma_z)`` in the ``(up, down)`` basis."""
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    return sx, sy, sz


def spin_dim(J: float) -> int:
    """Hilbert-space dimension ``2J + 1``; rejects anything but half-integers."""
    twoJ = 2 * J
    if J < 0 or abs(twoJ - round(twoJ)) > 1e-12:
        raise ValueError(f"J must be a non-negative half-integer, got {J!r}")
    return int(round(twoJ)) + 1


def m_values(J: float) -> NDArray[np.float64]:
    """Magnetic quantum numbers in storage order ``J, J-1, ..., -J``."""
    return J - np.arange(spin_dim(J))


def angular_momentum(J: float) -> tuple[ComplexArray, ComplexArray, ComplexArray]:
    """Spin-J operators ``(Jx, Jy, Jz)`` in the ``J_z`` eigenbasis."""
    m = m_values(J)
    jz = np.diag(m).astype(complex)
    # <m+1|J+|m> = sqrt(J(J+1) - m(m+1)); row index of m+1 is one above m
    raise_amp = np.sqrt(J * (J + 1) - m[1:] * (m[1:] + 1))
    jp = np.diag(raise_amp, k=1).astype(complex)
    jm = jp.conj().T
    jx = 0.5 * (jp + jm)
    jy = -0.5j * (jp - jm)
    return jx, jy, jz


def hermiticity_residual(a: NDArray) -> float:
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def hermitize(rho: ComplexArray) -> ComplexArray:
    return 0.5 * (rho + rho.conj().T)


def check_density(rho: NDArray, tol: float = STRUCT_TOL) -> ComplexArray:
    """Validate a density matrix and return it as a complex array.

    Raises ``ValueError`` when ``rho`` is not square, not Hermitian, not of unit
    trace, or has an eigenvalue below ``-tol``.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] < 1:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    if hermiticity_residual(rho) > tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ValueError(f"density matrix trace {np.trace(rho).real:.3g} != 1")
    if np.linalg.eigvalsh(hermitize(rho))[0] < -tol:
        raise ValueError("density matrix has a negative eigenvalue")
    return rho


def projector(psi: NDArray) -> ComplexArray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def bloch_from_density(rho: NDArray) -> NDArray[np.float64]:
    """Bloch vector ``n_i = Tr(sigma_i rho)`` of a qubit density matrix."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise ValueError(f"Bloch vectors need a 2x2 density matrix, got {rho.shape}")
    return np.array(
        [
            2 * rho[0, 1].real,
            -2 * rho[0, 1].imag,
            (rho[0, 0] - rho[1, 1]).real,
        ]
    )


def density_from_bloch(n: NDArray, tol: float = STRUCT_TOL) -> ComplexArray:
    """``(1 + n . sigma) / 2``; rejects vectors outside the unit ball."""
    nx, ny, nz = np.asarray(n, dtype=float)
    if np.sqrt(nx * nx + ny * ny + nz * nz) > 1 + tol:
        raise ValueError(f"Bloch vector {n!r} has norm > 1")
    return 0.5 * np.array([[1 + nz, nx - 1j * ny], [nx + 1j * ny, 1 - nz]], dtype=complex)


def bloch_angles(n: NDArray) -> tuple[float, float]:
    """Polar and azimuthal angle of ``n``; azimuth lies in ``[0, 2 pi)``."""
    nx, ny, nz = np.asarray(n, dtype=float)
    rho = np.hypot(nx, ny)
    if rho == 0 and nz == 0:
        return 0.0, 0.0
    # arctan2 keeps full precision near the poles, unlike arccos
    theta = float(np.arctan2(rho, nz))
    phi = float(np.arctan2(ny, nx) % (2 * np.pi))
    return theta, phi


def bloch_from_angles(theta: float, phi: float) -> NDArray[np.float64]:
    return np.array(
        [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)]
    )


@dataclass(frozen=True)
class CoherentStateSpec:
    """SU(2) coherent state ``|zeta, J>`` with ``zeta = exp(i phi) tan(theta/2)``."""

    J: float
    theta: float
    phi: float

    def __post_init__(self):
        spin_dim(self.J)
        if not (-1e-12 <= self.theta <= np.pi + 1e-12):
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")

    @property
    def zeta(self) -> complex:
        return np.exp(1j * self.phi) * np.tan(self.theta / 2)


def _binomial_roots(J: float) -> NDArray[np.float64]:
    twoJ = spin_dim(J) - 1
    m = m_values(J)
    return np.sqrt([comb(twoJ, int(round(J + mi))) for mi in m])


def coherent_amplitudes(J: float, theta, phi) -> ComplexArray:
    """Coherent-state amplitudes for arrays of angles.

    Returns an array of shape ``broadcast(theta, phi).shape + (2J+1,)``. The
    amplitude on ``|J, m>`` is ``sqrt(C(2J, J+m)) cos(theta/2)^(J+m)
    (sin(theta/2) e^{i phi})^(J-m)``, which equals the ``zeta``-series
    normalised by ``(1 + |zeta|^2)^(-J)`` and stays finite at ``theta = pi``.
    """
    theta = np.asarray(theta, dtype=float)[..., None]
    phi = np.asarray(phi, dtype=float)[..., None]
    m = m_values(J)
    up = (J + m).astype(int)
    down = (J - m).astype(int)
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    return _binomial_roots(J) * c**up * s**down * np.exp(1j * down * phi)


def coherent_state(spec: CoherentStateSpec) -> ComplexArray:
    return coherent_amplitudes(spec.J, spec.theta, spec.phi)


def evolve_unitary(rho: NDArray, H: NDArray, t: float) -> ComplexArray:
    """``exp(-iHt) rho exp(iHt)`` via the eigendecomposition of ``H``.

    A negative ``t`` undoes free evolution, which is how the measurement picture
    ``exp(iH tau) rho exp(-iH tau)`` is obtained.
    """
    H = np.asarray(H, dtype=complex)
    if hermiticity_residual(H) > STRUCT_TOL:
        raise ValueError("Hamiltonian is not Hermitian")
    evals, vecs = np.linalg.eigh(hermitize(H))
    u = (vecs * np.exp(-1j * evals * t)) @ vecs.conj().T
    return u @ np.asarray(rho, dtype=complex) @ u.conj().T
