"""Atom species data and planar lattice geometry."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


def _circular_dipole() -> np.ndarray:
    # sigma+ orientation in the lattice plane
    return np.array([1.0, 1.0j, 0.0]) / np.sqrt(2.0)


@dataclass(frozen=True)
class AtomSpecies:
    """Two-level emitter parameters; defaults are rubidium-like.

    wavelength is the transition wavelength in meters, gamma_e the radiative
    linewidth in rad/s, dipole the (complex) transition dipole orientation.
    """

    wavelength: float = 780e-9
    gamma_e: float = TWO_PI * 6e6
    dipole: np.ndarray = field(default_factory=_circular_dipole)

    def __post_init__(self):
        if self.wavelength <= 0 or self.gamma_e <= 0:
            raise ValueError("wavelength and gamma_e must be positive")
        d = np.asarray(self.dipole, dtype=complex)
        if d.shape != (3,):
            raise ValueError("dipole must be a 3-vector")
        norm = np.sqrt(np.real(np.vdot(d, d)))
        if norm == 0 or not np.isfinite(norm):
            raise ValueError("dipole must be a finite nonzero vector")
        object.__setattr__(self, "dipole", d / norm)

    @property
    def wavenumber(self) -> float:
        return TWO_PI / self.wavelength


@dataclass(frozen=True)
class AtomArray:
    """A set of atom positions with the species they carry.

    positions has shape (N, 3) in meters.  spacing records the lattice
    constant the array was built with; sigma_xy and sigma_z record the
    disorder that was applied (zero for an ideal lattice).
    """

    positions: np.ndarray
    species: AtomSpecies = field(default_factory=AtomSpecies)
    spacing: float = 532e-9
    sigma_xy: float = 0.0
    sigma_z: float = 0.0

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError("positions must have shape (N, 3)")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions contain non-finite values")
        object.__setattr__(self, "positions", pos)

    @property
    def n_atoms(self) -> int:
        return self.positions.shape[0]


def build_square_lattice(
    nx: int,
    ny: int,
    spacing: float = 532e-9,
    species: AtomSpecies | None = None,
) -> AtomArray:
    """Build an nx-by-ny square lattice in the z = 0 plane, centered on the origin.

    nx or ny equal to zero gives an empty array (useful for the no-atom
    reference pipeline).
    """
    if nx < 0 or ny < 0:
        raise ValueError("lattice dimensions must be non-negative")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    if species is None:
        species = AtomSpecies()
    xs = (np.arange(nx) - (nx - 1) / 2.0) * spacing
    ys = (np.arange(ny) - (ny - 1) / 2.0) * spacing
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    n = nx * ny
    positions = np.column_stack([X.ravel(), Y.ravel(), np.zeros(n)])
    return AtomArray(positions=positions, species=species, spacing=spacing)


def apply_disorder(
    array: AtomArray,
    sigma_xy: float,
    sigma_z: float,
    rng: np.random.Generator,
) -> AtomArray:
    """Return a copy of the array with Gaussian positional disorder applied.

    Displacements are independent per atom and axis with standard deviation
    sigma_xy along x and y and sigma_z along z.  The input array is left
    untouched; zero disorder returns identical positions.
    """
    if sigma_xy < 0 or sigma_z < 0:
        raise ValueError("disorder sigmas must be non-negative")
    pos = array.positions.copy()
    if sigma_xy > 0 or sigma_z > 0:
        n = array.n_atoms
        scale = np.array([sigma_xy, sigma_xy, sigma_z])
        pos += rng.normal(size=(n, 3)) * scale
    return AtomArray(
        positions=pos,
        species=array.species,
        spacing=array.spacing,
        sigma_xy=sigma_xy,
        sigma_z=sigma_z,
    )


def positions_to_csv(array: AtomArray, path: str) -> None:
    """Dump atom positions as CSV with columns x, y, z in meters."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "z"])
        for row in array.positions:
            writer.writerow([f"{v:.17g}" for v in row])
