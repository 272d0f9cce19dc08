"""Dipole-dipole coupling matrices from the free-space Green's tensor.

For a pair of atoms separated by r = r_j - r_i with x = k r the projected
coupling used throughout is

    M_ji = (3 pi gamma_e / k) p^* . G(r_j, r_i, k) . p
         = (3 gamma_e / 4) (e^{ix} / x) [ (1 - |u|^2) + (1 - 3 |u|^2) (i/x - 1/x^2) ]

with u = p^ . r^ the dipole projection on the separation direction.  The
coherent shift and the collective decay follow as

    V_ji     = Re M_ji
    Gamma_ji = 2 Im M_ji

which for a real transverse dipole reduce to the familiar closed forms

    V_ji     = (3 gamma_e / 4) [ (1 - u^2) cos x / x - (1 - 3 u^2) (sin x / x^2 + cos x / x^3) ]
    Gamma_ji = (3 gamma_e / 2) [ (1 - u^2) sin x / x + (1 - 3 u^2) (cos x / x^2 - sin x / x^3) ]

and Gamma_jj -> gamma_e as r -> 0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .geometry import AtomArray

# Separations below this are treated as coincident atoms (meters).
MIN_SEPARATION = 1e-15

# Gamma matrix eigenvalues may dip below zero by this fraction of gamma_e
# before we call it a bug.
PSD_TOLERANCE = 1e-10


class SingularSeparationError(ValueError):
    """Two atoms (numerically) coincide; the coupling diverges."""


class PsdViolationError(RuntimeError):
    """The collective decay matrix has a significantly negative eigenvalue."""


def green_tensor(r: np.ndarray, rp: np.ndarray, k: float) -> np.ndarray:
    """Free-space dyadic Green's tensor between points r and rp at wavenumber k.

    Returns the 3x3 complex tensor

        G = (e^{ix} / 4 pi d) [ (1 + i/x - 1/x^2) I + (-1 - 3i/x + 3/x^2) r^ r^ ]

    with d = |r - rp| and x = k d.  Contracting with the dipole orientation
    and scaling by 3 pi gamma_e / k yields V + i Gamma / 2 as used by
    build_coupling.
    """
    rvec = np.asarray(r, dtype=float) - np.asarray(rp, dtype=float)
    d = float(np.linalg.norm(rvec))
    if d < MIN_SEPARATION:
        raise SingularSeparationError(f"separation {d:.3e} m is below {MIN_SEPARATION:.0e} m")
    rhat = rvec / d
    x = k * d
    f1 = 1.0 + 1j / x - 1.0 / x**2
    f2 = -1.0 - 3j / x + 3.0 / x**2
    outer = np.outer(rhat, rhat)
    return np.exp(1j * x) / (4.0 * np.pi * d) * (f1 * np.eye(3) + f2 * outer)


def _projected_coupling(positions: np.ndarray, k: float, dipole: np.ndarray, gamma_e: float):
    """Vectorized dipole-projected coupling M = V + i Gamma/2 for all pairs.

    Off-diagonal entries only; the diagonal is returned as zero and filled
    by the caller.
    """
    n = positions.shape[0]
    rvec = positions[:, None, :] - positions[None, :, :]
    d = np.linalg.norm(rvec, axis=-1)
    close = d < MIN_SEPARATION
    np.fill_diagonal(close, False)
    if np.any(close):
        i, j = np.argwhere(close)[0]
        raise SingularSeparationError(
            f"atoms {i} and {j} are separated by {d[i, j]:.3e} m"
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        rhat = rvec / d[..., None]
        # |p^ . r^|^2; the identity part of the tensor contracts to 1 for a
        # unit dipole, real or complex.
        u2 = np.abs(rhat @ dipole) ** 2
        x = k * d
        bracket = (1.0 - u2) + (1.0 - 3.0 * u2) * (1j / x - 1.0 / x**2)
        m = 0.75 * gamma_e * np.exp(1j * x) / x * bracket
    idx = np.arange(n)
    m[idx, idx] = 0.0
    if not np.all(np.isfinite(m)):
        raise FloatingPointError("non-finite dipole coupling encountered")
    return m


@dataclass(frozen=True)
class CouplingKernel:
    """Coupling matrices and collective decay channels for one atom array.

    v_matrix and gamma_matrix are real symmetric (N, N); channel_rates holds
    the eigenvalues of gamma_matrix sorted in descending order and
    channel_modes the matching orthonormal eigenvectors as rows, so that
    gamma_matrix = channel_modes.T @ diag(channel_rates) @ channel_modes.
    """

    array: AtomArray
    v_matrix: np.ndarray
    gamma_matrix: np.ndarray
    channel_rates: np.ndarray
    channel_modes: np.ndarray

    @property
    def n_atoms(self) -> int:
        return self.array.n_atoms

    @property
    def gamma_e(self) -> float:
        return self.array.species.gamma_e


def build_coupling(array: AtomArray) -> CouplingKernel:
    """Compute V, Gamma and the collective channel decomposition for an array.

    Diagonal terms are V_jj = 0 and Gamma_jj = gamma_e.  The Gamma matrix is
    validated to be positive semidefinite within -PSD_TOLERANCE * gamma_e.
    """
    species = array.species
    n = array.n_atoms
    if n == 0:
        empty = np.zeros((0, 0))
        return CouplingKernel(array, empty, empty.copy(), np.zeros(0), empty.copy())
    m = _projected_coupling(array.positions, species.wavenumber, species.dipole, species.gamma_e)
    v = np.real(m)
    gamma = 2.0 * np.imag(m)
    idx = np.arange(n)
    gamma[idx, idx] = species.gamma_e
    # eigh ascending; flip for superradiant-first ordering
    rates, vecs = np.linalg.eigh(gamma)
    rates = rates[::-1]
    modes = vecs[:, ::-1].T.copy()
    if rates[-1] < -PSD_TOLERANCE * species.gamma_e:
        raise PsdViolationError(
            f"collective decay matrix has eigenvalue {rates[-1]:.3e} rad/s"
        )
    return CouplingKernel(array, v, gamma, rates, modes)


def collective_channels(kernel: CouplingKernel) -> tuple[np.ndarray, np.ndarray]:
    """Return (channel rates, channel modes) of the collective decay matrix."""
    return kernel.channel_rates, kernel.channel_modes


def channels_to_csv(kernel: CouplingKernel, path: str) -> None:
    """Dump the channel spectrum as CSV: channel index, rate / gamma_e."""
    ge = kernel.gamma_e
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["channel", "rate_over_gamma_e"])
        for l, rate in enumerate(kernel.channel_rates):
            writer.writerow([l, f"{rate / ge:.17g}"])
