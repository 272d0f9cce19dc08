"""Field projection, probability integrals and ensemble reduction."""

import json

import numpy as np
import numpy.testing as npt
import pytest

from atomarray.dynamics import SchemeConfig, TrajectoryState, evolve_trajectory, output_grid
from atomarray.geometry import build_square_lattice
from atomarray.kernel import build_coupling
from atomarray.modes import ProbePulse, pulse_envelope
from atomarray.observables import (
    FieldRecord,
    SpectrumResult,
    WindowTooShortWarning,
    check_window,
    integrate_probabilities,
    polarization,
    project_fields,
    reduce_ensemble,
    reduce_probabilities,
)

from conftest import GAMMA_E, gaussian_drive


def test_polarization_trivial_states():
    ground = TrajectoryState.ground(3)
    npt.assert_array_equal(polarization(ground), np.zeros(3))
    # no ground amplitude and no doubles: nothing to interfere with
    s = TrajectoryState.ground(2)
    s.a = 0.0
    s.b = np.array([1.0 + 0j, 0.0])
    npt.assert_array_equal(polarization(s), np.zeros(2))
    # equal superposition of |G> and |e>: sigma = 1/2
    s = TrajectoryState.ground(1)
    s.a = 1.0 / np.sqrt(2.0)
    s.b = np.array([1.0 / np.sqrt(2.0) + 0j])
    npt.assert_allclose(polarization(s), [0.5], rtol=1e-12)


def test_polarization_doubles_term():
    # |Psi> = (|e_1> + |e_1 e_2>)/sqrt(2): sigma_2 = <e_1|sigma_2|e_1 e_2> = 1/2
    s = TrajectoryState.ground(2, doubles=True)
    s.a = 0.0
    s.b = np.array([1.0 / np.sqrt(2.0) + 0j, 0.0])
    s.b2 = np.array([1.0 / np.sqrt(2.0) + 0j])
    sig = polarization(s)
    npt.assert_allclose(sig, [0.0, 0.5], atol=1e-12)
    # normalization uses the recomputed norm, not the tracked one
    s.norm2 = 0.3
    npt.assert_allclose(polarization(s), sig, atol=1e-12)


def test_project_fields_identity_without_atoms():
    sigma = np.zeros((5, 3), dtype=complex)
    fwd = np.full(3, 1j)
    alpha_p = np.linspace(0.0, 2.0, 5)
    alpha_t, alpha_r = project_fields(sigma, fwd, np.conj(fwd), 4.0, alpha_p)
    npt.assert_array_equal(alpha_t, alpha_p)
    npt.assert_array_equal(alpha_r, np.zeros(5))


def test_project_fields_hand_value():
    # one atom, g = i, sigma = 0.1: alpha_T = alpha_p + i C sigma g* = alpha_p + C sigma
    sigma = np.array([0.1 + 0j])
    alpha_t, alpha_r = project_fields(sigma, np.array([1j]), np.array([-1j]), 2.0, 1.0)
    npt.assert_allclose(alpha_t, 1.0 + 0.2j * (-1j), rtol=1e-15)
    npt.assert_allclose(alpha_r, 1j * 2.0 * 0.1 * 1j, rtol=1e-15)


def _synthetic_record(t_coeff, r_coeff, pulse=None):
    p = pulse if pulse is not None else ProbePulse()
    times = np.linspace(0.0, p.window, 2001)
    alpha_p = pulse_envelope(times, p)
    return FieldRecord(
        times=times,
        alpha_p=alpha_p,
        alpha_t=t_coeff * alpha_p,
        alpha_r=r_coeff * alpha_p,
        norm2=np.ones_like(times),
        p1=np.zeros_like(times),
    )


def test_integrate_probabilities_empty_array_is_exact():
    rec = _synthetic_record(1.0, 0.0)
    p_t, p_r, p_s = integrate_probabilities(rec)
    assert p_t == 1.0
    assert p_r == 0.0
    assert p_s == 0.0


def test_integrate_probabilities_flat_coefficients():
    rec = _synthetic_record(0.6 * np.exp(0.3j), 0.5j)
    p_t, p_r, p_s = integrate_probabilities(rec)
    npt.assert_allclose(p_t, 0.36, rtol=1e-12)
    npt.assert_allclose(p_r, 0.25, rtol=1e-12)
    npt.assert_allclose(p_s, 0.39, rtol=1e-12)


def test_integrate_probabilities_rejects_dark_pulse():
    rec = _synthetic_record(1.0, 0.0)
    rec.alpha_p = np.zeros_like(rec.alpha_p)
    with pytest.raises(ValueError):
        integrate_probabilities(rec)


def test_window_warning():
    pulse = ProbePulse()
    short = np.linspace(pulse.t0 - 2 * pulse.tau, pulse.t0 + 2 * pulse.tau, 400)
    with pytest.warns(WindowTooShortWarning):
        check_window(short, pulse_envelope(short, pulse), pulse.photons)
    full = np.linspace(0.0, pulse.window, 4000)
    with np.errstate(all="raise"):
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("error", WindowTooShortWarning)
            check_window(full, pulse_envelope(full, pulse), pulse.photons)
            check_window(full, pulse_envelope(full, pulse), 0.0)


def test_reduce_identical_records():
    rec = _synthetic_record(0.8, 0.1j)
    est = reduce_ensemble([rec] * 7)
    assert est.n_traj == 7
    # identical samples: spread is rounding noise only
    assert est.err_t <= 1e-15
    assert est.err_r <= 1e-15
    assert est.err_s <= 1e-15
    assert est.mean_jumps == 0.0
    npt.assert_allclose(est.p_t, 0.64, rtol=1e-12)
    npt.assert_allclose(est.p_t + est.p_r + est.p_s, 1.0, rtol=1e-12)


def test_reduce_probabilities_stderr():
    t = np.array([0.2, 0.4, 0.6, 0.8])
    r = np.array([0.1, 0.1, 0.2, 0.2])
    est = reduce_probabilities(t, r, np.array([0, 1, 2, 1]))
    npt.assert_allclose(est.p_t, 0.5, rtol=1e-12)
    npt.assert_allclose(est.err_t, np.std(t, ddof=1) / 2.0, rtol=1e-12)
    npt.assert_allclose(est.p_s, 1.0 - 0.5 - 0.15, rtol=1e-12)
    assert est.mean_jumps == 1.0
    # a single sample has no spread estimate
    single = reduce_probabilities(np.array([0.3]), np.array([0.1]), np.array([2]))
    assert single.err_t == 0.0 and single.n_traj == 1


def _tiny_spectrum():
    return SpectrumResult(
        detunings=np.array([0.0, 0.5 * GAMMA_E]),
        p_t=np.array([0.9, 0.98]),
        p_r=np.array([0.05, 0.01]),
        p_s=np.array([0.05, 0.01]),
        err_t=np.array([0.01, 0.02]),
        err_r=np.array([0.005, 0.001]),
        err_s=np.array([0.005, 0.001]),
        metadata={"gamma_e": GAMMA_E, "label": "unit"},
    )


GOLDEN_CSV = (
    "delta_over_gamma,p_t,err_t,p_r,err_r,p_s,err_s\n"
    "0,0.9,0.01,0.05,0.005,0.05,0.005\n"
    "0.5,0.98,0.02,0.01,0.001,0.01,0.001\n"
)


def test_spectrum_csv_golden(tmp_path):
    path = tmp_path / "spec.csv"
    spec = _tiny_spectrum()
    spec.to_csv(path)
    assert path.read_text() == GOLDEN_CSV
    # deterministic: a second write is byte identical
    again = tmp_path / "spec2.csv"
    spec.to_csv(again)
    assert again.read_bytes() == path.read_bytes()


def test_spectrum_json_roundtrip(tmp_path):
    path = tmp_path / "spec.json"
    spec = _tiny_spectrum()
    spec.to_json(path)
    doc = json.loads(path.read_text())
    assert doc["metadata"]["label"] == "unit"
    assert doc["points"][1]["p_t"] == 0.98
    assert doc["points"][0]["delta_over_gamma"] == 0.0
    assert [p["err_r"] for p in doc["points"]] == [0.005, 0.001]


def test_reflection_reciprocity_ordered_array():
    # planar array in the beam focus: incidence from either side gives the
    # same reflection probability
    arr = build_square_lattice(3, 4)
    ker = build_coupling(arr)
    pulse = ProbePulse(tau=0.4e-6)
    grid = output_grid(pulse.window, GAMMA_E)
    probs = []
    for swap in (False, True):
        drive = gaussian_drive(arr, pulse=pulse, swap=swap)
        _, rec, _ = evolve_trajectory(
            TrajectoryState.ground(12),
            SchemeConfig(delta_p=0.2 * GAMMA_E),
            ker,
            drive,
            grid,
            jump_mode="no-jump",
        )
        probs.append(integrate_probabilities(rec))
    npt.assert_allclose(probs[0], probs[1], rtol=1e-10, atol=1e-12)
