"""Lattice construction, species defaults, and position disorder."""

import numpy as np
import numpy.testing as npt
import pytest

from atomarray.geometry import (
    AtomArray,
    AtomSpecies,
    apply_disorder,
    build_square_lattice,
    positions_to_csv,
)


def test_species_defaults(species):
    assert species.wavelength == 780e-9
    assert species.gamma_e == pytest.approx(2 * np.pi * 6e6, rel=1e-15)
    npt.assert_allclose(np.vdot(species.dipole, species.dipole).real, 1.0, rtol=1e-14)
    # circular polarization in the lattice plane
    npt.assert_allclose(species.dipole, np.array([1.0, 1.0j, 0.0]) / np.sqrt(2))
    assert species.wavenumber == pytest.approx(2 * np.pi / 780e-9)


def test_species_validation():
    with pytest.raises(ValueError):
        AtomSpecies(wavelength=-1.0)
    with pytest.raises(ValueError):
        AtomSpecies(dipole=np.zeros(3))
    with pytest.raises(ValueError):
        AtomSpecies(dipole=np.ones(4))
    # dipole is normalized on construction
    sp = AtomSpecies(dipole=np.array([2.0, 0.0, 0.0]))
    npt.assert_allclose(sp.dipole, [1.0, 0.0, 0.0])


def test_square_lattice_layout():
    arr = build_square_lattice(4, 3, spacing=532e-9)
    assert arr.n_atoms == 12
    assert arr.positions.shape == (12, 3)
    # centered at the origin, planar
    npt.assert_allclose(arr.positions.mean(axis=0), 0.0, atol=1e-20)
    npt.assert_allclose(arr.positions[:, 2], 0.0)
    # nearest-neighbour spacing along both axes
    xs = np.unique(arr.positions[:, 0])
    ys = np.unique(arr.positions[:, 1])
    npt.assert_allclose(np.diff(xs), 532e-9, rtol=1e-12)
    npt.assert_allclose(np.diff(ys), 532e-9, rtol=1e-12)
    assert len(xs) == 4 and len(ys) == 3


def test_lattice_default_spacing_is_subwavelength():
    arr = build_square_lattice(2, 2)
    assert arr.spacing == 532e-9
    assert arr.spacing < arr.species.wavelength


def test_empty_lattice():
    arr = build_square_lattice(0, 0)
    assert arr.n_atoms == 0
    assert arr.positions.shape == (0, 3)


def test_positions_validation(species):
    with pytest.raises(ValueError):
        AtomArray(positions=np.zeros((3, 2)), species=species, spacing=1e-6)
    bad = np.zeros((2, 3))
    bad[1, 0] = np.nan
    with pytest.raises(ValueError):
        AtomArray(positions=bad, species=species, spacing=1e-6)


def test_disorder_statistics():
    arr = build_square_lattice(100, 100)
    rng = np.random.default_rng(5)
    shaken = apply_disorder(arr, sigma_xy=20e-9, sigma_z=8e-9, rng=rng)
    delta = shaken.positions - arr.positions
    # per-axis standard deviations; 1e4 samples pin them to a few percent
    npt.assert_allclose(delta[:, 0].std(), 20e-9, rtol=0.05)
    npt.assert_allclose(delta[:, 1].std(), 20e-9, rtol=0.05)
    npt.assert_allclose(delta[:, 2].std(), 8e-9, rtol=0.05)
    assert abs(delta.mean()) < 1e-9
    assert shaken.sigma_xy == 20e-9 and shaken.sigma_z == 8e-9
    # the source array is untouched
    npt.assert_allclose(arr.positions[:, 2], 0.0)


def test_disorder_axes_are_independent():
    arr = build_square_lattice(10, 10)
    rng = np.random.default_rng(2)
    only_z = apply_disorder(arr, sigma_xy=0.0, sigma_z=15e-9, rng=rng)
    npt.assert_array_equal(only_z.positions[:, :2], arr.positions[:, :2])
    assert only_z.positions[:, 2].std() > 0
    only_xy = apply_disorder(arr, sigma_xy=15e-9, sigma_z=0.0, rng=np.random.default_rng(2))
    npt.assert_array_equal(only_xy.positions[:, 2], arr.positions[:, 2])


def test_zero_disorder_is_identity_and_consumes_no_randomness():
    arr = build_square_lattice(3, 3)
    rng = np.random.default_rng(7)
    state_before = rng.bit_generator.state
    out = apply_disorder(arr, 0.0, 0.0, rng)
    npt.assert_array_equal(out.positions, arr.positions)
    assert rng.bit_generator.state == state_before


def test_disorder_rejects_negative_sigma():
    arr = build_square_lattice(2, 2)
    with pytest.raises(ValueError):
        apply_disorder(arr, -1e-9, 0.0, np.random.default_rng(0))


def test_positions_csv_roundtrip(tmp_path):
    arr = build_square_lattice(3, 2)
    path = tmp_path / "positions.csv"
    positions_to_csv(arr, str(path))
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    npt.assert_allclose(data, arr.positions, rtol=0, atol=0)
