"""Shared fixtures and helpers for the test suite."""

import numpy as np
import pytest

from atomarray.geometry import AtomArray, AtomSpecies, build_square_lattice
from atomarray.kernel import build_coupling
from atomarray.modes import BeamGeometry, ProbeDrive, ProbePulse, build_probe_drive

GAMMA_E = 2 * np.pi * 6e6
WAVELENGTH = 780e-9


@pytest.fixture(scope="session")
def species():
    return AtomSpecies()


@pytest.fixture(scope="session")
def small_array():
    return build_square_lattice(4, 4)


@pytest.fixture(scope="session")
def small_kernel(small_array):
    return build_coupling(small_array)


@pytest.fixture(scope="session")
def beam():
    return BeamGeometry()


@pytest.fixture(scope="session")
def pulse():
    return ProbePulse()


def pair_array(separation, species=None):
    """Two atoms on the x axis, symmetric about the origin."""
    sp = species if species is not None else AtomSpecies()
    pos = np.array([[-separation / 2, 0.0, 0.0], [separation / 2, 0.0, 0.0]])
    return AtomArray(positions=pos, species=sp, spacing=separation)


def cw_drive(n_atoms, rabi, envelope_value=1.0):
    """Uniform constant-envelope drive; weights equal `rabi` on every atom.

    The mode projections are unit forward / conjugate backward profiles,
    adequate for dynamics tests that do not integrate fluxes.
    """
    profile = np.full(n_atoms, rabi / envelope_value, dtype=complex)
    return ProbeDrive(
        coupling=1.0,
        fwd_profile=profile,
        bwd_profile=np.conj(profile),
        envelope=lambda t: envelope_value * np.ones_like(np.asarray(t, dtype=float)),
    )


def zero_drive(n_atoms):
    profile = np.zeros(n_atoms, dtype=complex)
    return ProbeDrive(
        coupling=1.0,
        fwd_profile=profile,
        bwd_profile=profile,
        envelope=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
    )


def gaussian_drive(array, beam=None, pulse=None, swap=False):
    b = beam if beam is not None else BeamGeometry()
    p = pulse if pulse is not None else ProbePulse()
    return build_probe_drive(array, b, p, swap_direction=swap)
