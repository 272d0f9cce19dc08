"""Probe beam mode, pulse envelope and control-field parameters.

The probe is a paraxial Gaussian mode propagating along +z with waist w0 at
the array plane z = 0,

    g(r) = (zeta / q*(z)) exp[ i k (z + (x^2 + y^2) / (2 q*(z))) ],
    q(z) = z + i zeta,   zeta = k w0^2 / 2,

normalized so |g(0)| = 1 and the effective mode area is A = pi w0^2 / 2.
The backward (reflected) mode is the complex conjugate profile.

A pulse carrying nbar photons in a Gaussian envelope of duration tau is

    alpha_p(t) = sqrt(nbar) (sqrt(2 pi) tau)^{-1/2} exp[-((t - t0) / (2 tau))^2]

with integral |alpha_p|^2 dt = nbar.  The drive Rabi frequency at an atom is
Omega_p(r, t) = C g(r) alpha_p(t) where the flux-to-Rabi constant

    C = sqrt(3 gamma_e lambda^2 / (8 pi A)) = sqrt(3 gamma_e) / (k w0)

is fixed by matching the single-mode photon flux to the free-space decay
rate.  The same C converts atomic polarization back into mode amplitudes in
observables; energy balance p_T + p_R + p_S = 1 holds only with a consistent
constant on both ends.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import TWO_PI, AtomArray, AtomSpecies


@dataclass(frozen=True)
class BeamGeometry:
    """Gaussian probe mode: waist (m) at the array plane and wavelength (m)."""

    waist: float = 3 * 780e-9
    wavelength: float = 780e-9

    def __post_init__(self):
        if self.waist <= 0 or self.wavelength <= 0:
            raise ValueError("waist and wavelength must be positive")

    @property
    def wavenumber(self) -> float:
        return TWO_PI / self.wavelength

    @property
    def rayleigh_range(self) -> float:
        return self.wavenumber * self.waist**2 / 2.0

    @property
    def mode_area(self) -> float:
        return np.pi * self.waist**2 / 2.0


def gaussian_mode(r: np.ndarray, beam: BeamGeometry, backward: bool = False) -> np.ndarray:
    """Evaluate the mode profile at positions r of shape (..., 3).

    backward=True returns the conjugate profile (propagation along -z).
    """
    r = np.asarray(r, dtype=float)
    k = beam.wavenumber
    zeta = beam.rayleigh_range
    z = r[..., 2]
    rho2 = r[..., 0] ** 2 + r[..., 1] ** 2
    qc = z - 1j * zeta  # q*(z)
    g = (zeta / qc) * np.exp(1j * k * (z + rho2 / (2.0 * qc)))
    return np.conj(g) if backward else g


@dataclass(frozen=True)
class ProbePulse:
    """Gaussian probe pulse: duration tau (s), mean photon number, center t0."""

    tau: float = 2e-6
    photons: float = 1.0
    t0: float | None = None  # defaults to 4 tau

    def __post_init__(self):
        if self.tau <= 0 or self.photons < 0:
            raise ValueError("tau must be positive and photons non-negative")
        if self.t0 is None:
            object.__setattr__(self, "t0", 4.0 * self.tau)

    @property
    def window(self) -> float:
        """Default simulation window covering the pulse."""
        return 2.0 * self.t0


def pulse_envelope(t: np.ndarray, pulse: ProbePulse) -> np.ndarray:
    """Flux amplitude alpha_p(t) in photons^(1/2)/s^(1/2); real, non-negative."""
    t = np.asarray(t, dtype=float)
    peak = np.sqrt(pulse.photons) * (np.sqrt(2.0 * np.pi) * pulse.tau) ** -0.5
    return peak * np.exp(-(((t - pulse.t0) / (2.0 * pulse.tau)) ** 2))


def flux_rabi_constant(species: AtomSpecies, beam: BeamGeometry) -> float:
    """The constant C with Omega_p(r, t) = C g(r) alpha_p(t)."""
    return np.sqrt(
        3.0 * species.gamma_e * species.wavelength**2 / (8.0 * np.pi * beam.mode_area)
    )


def probe_rabi(
    r: np.ndarray,
    t: np.ndarray,
    species: AtomSpecies,
    beam: BeamGeometry,
    pulse: ProbePulse,
) -> np.ndarray:
    """Probe Rabi frequency Omega_p(r, t) = C g(r) alpha_p(t) in rad/s."""
    c = flux_rabi_constant(species, beam)
    return c * gaussian_mode(r, beam) * pulse_envelope(t, pulse)


def _default_drive_wavevector() -> np.ndarray:
    # in-plane propagation; 480 nm is typical for the upper transition
    return np.array([TWO_PI / 480e-9, 0.0, 0.0])


@dataclass(frozen=True)
class DriveField:
    """Classical control field on the excited-to-Rydberg transition.

    rabi is Omega_d (rad/s), detuning is Delta_d (rad/s), wavevector the
    in-plane propagation vector (rad/m).  The wavevector only imprints a
    static phase per atom and drops out of all singles-sector observables.
    """

    rabi: float
    detuning: float
    wavevector: np.ndarray = field(default_factory=_default_drive_wavevector)

    def phases(self, positions: np.ndarray) -> np.ndarray:
        """e^{i k_d . r_j} for each atom."""
        kvec = np.asarray(self.wavevector, dtype=float)
        return np.exp(1j * (positions @ kvec))


@dataclass(frozen=True)
class CavityCoupling:
    """Microwave cavity photon coupling the two Rydberg states.

    eta is the vacuum coupling rate (rad/s), detuning is Delta_c (rad/s) and
    photons the cavity occupation; the effective Rabi frequency is
    Omega_c = eta sqrt(n_c).
    """

    eta: float
    detuning: float
    photons: float = 0.0

    def __post_init__(self):
        if self.photons < 0:
            raise ValueError("cavity photon number must be non-negative")

    @property
    def rabi(self) -> float:
        return self.eta * np.sqrt(self.photons)


@dataclass(frozen=True)
class ProbeDrive:
    """Probe drive data evaluated at the atom positions.

    weights[j] = C g(r_j) is the Rabi frequency per unit flux amplitude;
    fwd_profile and bwd_profile are the mode values used for field
    projection; envelope maps time to flux amplitude alpha_p(t).
    """

    coupling: float
    fwd_profile: np.ndarray
    bwd_profile: np.ndarray
    envelope: Callable[[np.ndarray], np.ndarray]

    @property
    def weights(self) -> np.ndarray:
        return self.coupling * self.fwd_profile


def build_probe_drive(
    array: AtomArray,
    beam: BeamGeometry,
    pulse: ProbePulse,
    swap_direction: bool = False,
) -> ProbeDrive:
    """Assemble the probe drive for an array.

    swap_direction exchanges the roles of the forward and backward modes
    (incidence from -z), used by the reciprocity check.
    """
    fwd = gaussian_mode(array.positions, beam, backward=swap_direction)
    bwd = gaussian_mode(array.positions, beam, backward=not swap_direction)
    return ProbeDrive(
        coupling=flux_rabi_constant(array.species, beam),
        fwd_profile=fwd,
        bwd_profile=bwd,
        envelope=lambda t: pulse_envelope(t, pulse),
    )
