"""Mode-projected fields, transfer probabilities and ensemble statistics.

The transmitted and reflected flux amplitudes follow from the normalized
atomic polarization sigma_j(t) = <sigma_ge^j> in the probe rotating frame,

    alpha_T(t) = alpha_p(t) + i C sum_j g*(r_j) sigma_j(t)
    alpha_R(t) = i C sum_j g(r_j) sigma_j(t)

with the same flux-to-Rabi constant C that drives the atoms.  Transfer
probabilities are time integrals of |alpha|^2 normalized by the on-grid
integral of |alpha_p|^2, so an empty array gives p_T = 1 identically and
window truncation cancels.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:
    from .dynamics import TrajectoryState

# Warn when more than this fraction of the pulse energy falls outside the
# simulation window.
WINDOW_TAIL_TOLERANCE = 1e-4


class WindowTooShortWarning(UserWarning):
    """The time grid clips a non-negligible part of the pulse."""


def polarization(state: "TrajectoryState") -> np.ndarray:
    """Normalized polarization <sigma_ge^j> of a trajectory state.

    sigma_j = (a* b_j + sum_{i != j} b_i* b2_ij) / |Psi|^2 in the rotating
    frame of the state amplitudes; the doubles term is absent when the state
    carries no doubly-excited sector.
    """
    n = state.b.shape[0]
    num = np.conj(state.a) * state.b
    if state.b2 is not None and n > 1:
        full = np.zeros((n, n), dtype=complex)
        iu = np.triu_indices(n, k=1)
        full[iu] = state.b2
        full += full.T
        num = num + full @ np.conj(state.b)
    return num / state.norm2_recomputed()


def project_fields(
    sigma: np.ndarray,
    fwd_profile: np.ndarray,
    bwd_profile: np.ndarray,
    coupling: float,
    alpha_p: np.ndarray | float,
) -> tuple[np.ndarray, np.ndarray]:
    """Map polarization onto the transmitted and reflected mode amplitudes.

    sigma may be (N,) for one time or (..., N) for a batch of times; the
    mode profiles are the forward and backward values g(r_j) and g*(r_j).
    """
    s_t = np.tensordot(sigma, np.conj(fwd_profile), axes=([-1], [0]))
    s_r = np.tensordot(sigma, np.conj(bwd_profile), axes=([-1], [0]))
    alpha_t = np.asarray(alpha_p) + 1j * coupling * s_t
    alpha_r = 1j * coupling * s_r
    return alpha_t, alpha_r


@dataclass
class FieldRecord:
    """Per-trajectory time series on the shared output grid.

    times is the uniform quadrature grid; alpha_p the incident envelope on
    that grid; alpha_t and alpha_r the projected amplitudes; norm2 the
    squared state norm; p1 (and p2 when doubles are evolved) the
    singly/doubly excited populations.  jump_times lists fired jumps.
    """

    times: np.ndarray
    alpha_p: np.ndarray
    alpha_t: np.ndarray
    alpha_r: np.ndarray
    norm2: np.ndarray
    p1: np.ndarray
    p2: np.ndarray | None = None
    jump_times: list = field(default_factory=list)


def integrate_probabilities(record: FieldRecord) -> tuple[float, float, float]:
    """Trapezoidal (p_T, p_R, p_S) from one field record.

    Normalization uses the on-grid pulse energy; warns when the window
    clips more than WINDOW_TAIL_TOLERANCE of the nominal photon number.
    """
    t = record.times
    pulse_energy = np.trapezoid(np.abs(record.alpha_p) ** 2, t)
    if pulse_energy <= 0:
        raise ValueError("pulse carries no photons on the record grid")
    p_t = np.trapezoid(np.abs(record.alpha_t) ** 2, t) / pulse_energy
    p_r = np.trapezoid(np.abs(record.alpha_r) ** 2, t) / pulse_energy
    return float(p_t), float(p_r), float(1.0 - p_t - p_r)


def check_window(times: np.ndarray, alpha_p: np.ndarray, photons: float) -> None:
    """Emit WindowTooShortWarning when the grid clips the pulse."""
    if photons <= 0:
        return
    captured = np.trapezoid(np.abs(alpha_p) ** 2, times)
    missing = 1.0 - captured / photons
    if missing > WINDOW_TAIL_TOLERANCE:
        warnings.warn(
            f"simulation window misses {missing:.2e} of the pulse energy",
            WindowTooShortWarning,
            stacklevel=2,
        )


@dataclass
class PointEstimate:
    """Ensemble statistics of the transfer probabilities at one parameter point."""

    p_t: float
    p_r: float
    p_s: float
    err_t: float
    err_r: float
    err_s: float
    n_traj: int
    mean_jumps: float
    samples_t: np.ndarray
    samples_r: np.ndarray


def _mean_stderr(samples: np.ndarray) -> tuple[float, float]:
    m = float(np.mean(samples))
    if samples.size < 2:
        return m, 0.0
    return m, float(np.std(samples, ddof=1) / np.sqrt(samples.size))


def reduce_probabilities(
    samples_t: np.ndarray, samples_r: np.ndarray, jump_counts: np.ndarray
) -> PointEstimate:
    """Reduce per-trajectory (p_T, p_R) samples in their given (fixed) order."""
    samples_t = np.asarray(samples_t, dtype=float)
    samples_r = np.asarray(samples_r, dtype=float)
    p_t, err_t = _mean_stderr(samples_t)
    p_r, err_r = _mean_stderr(samples_r)
    p_s, err_s = _mean_stderr(1.0 - samples_t - samples_r)
    return PointEstimate(
        p_t=p_t,
        p_r=p_r,
        p_s=p_s,
        err_t=err_t,
        err_r=err_r,
        err_s=err_s,
        n_traj=samples_t.size,
        mean_jumps=float(np.mean(jump_counts)) if jump_counts.size else 0.0,
        samples_t=samples_t,
        samples_r=samples_r,
    )


def reduce_ensemble(records: Sequence[FieldRecord]) -> PointEstimate:
    """Ensemble means and standard errors over a list of field records."""
    if not records:
        raise ValueError("need at least one record")
    probs = [integrate_probabilities(r) for r in records]
    samples_t = np.array([p[0] for p in probs])
    samples_r = np.array([p[1] for p in probs])
    jumps = np.array([len(r.jump_times) for r in records])
    return reduce_probabilities(samples_t, samples_r, jumps)


@dataclass
class SpectrumResult:
    """Transfer probabilities versus probe detuning with MC standard errors."""

    detunings: np.ndarray  # rad/s
    p_t: np.ndarray
    p_r: np.ndarray
    p_s: np.ndarray
    err_t: np.ndarray
    err_r: np.ndarray
    err_s: np.ndarray
    metadata: dict

    def _rows(self):
        ge = self.metadata["gamma_e"]
        for i, d in enumerate(self.detunings):
            yield (
                d / ge,
                self.p_t[i],
                self.err_t[i],
                self.p_r[i],
                self.err_r[i],
                self.p_s[i],
                self.err_s[i],
            )

    def to_csv(self, path: str) -> None:
        """One row per detuning; deterministic %.12g formatting."""
        header = "delta_over_gamma,p_t,err_t,p_r,err_r,p_s,err_s"
        lines = [header]
        for row in self._rows():
            lines.append(",".join(f"{v:.12g}" for v in row))
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")

    def to_json(self, path: str) -> None:
        doc = {
            "metadata": self.metadata,
            "points": [
                {
                    "delta_over_gamma": row[0],
                    "p_t": row[1],
                    "err_t": row[2],
                    "p_r": row[3],
                    "err_r": row[4],
                    "p_s": row[5],
                    "err_s": row[6],
                }
                for row in self._rows()
            ],
        }
        with open(path, "w", newline="\n") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
