"""Sweep orchestration: configuration, presets, parallel ensembles, output.

A run is described by a RunConfig of six frozen blocks (array, species,
probe, scheme, mc, output).  Detuning and disorder sweeps execute the
Monte-Carlo ensemble point by point; trajectories are processed in fixed
chunks of mc.chunk columns so that batched integration arithmetic, and
therefore the emitted CSV, is byte-identical for any --threads value.

Seeding: every random draw descends from SeedSequence entropy
[seed, point_index, trajectory_index, stream] with stream 0 for position
disorder and 1 for jump thresholds/channels.  Frozen disorder uses the
single realization [seed, 0, 0, 0] everywhere.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from configparser import ConfigParser
from dataclasses import dataclass

import numpy as np

from . import __version__
from .dynamics import ATOL, RTOL, SchemeConfig, make_context, output_grid, propagate_batch
from .geometry import TWO_PI, AtomSpecies, apply_disorder, build_square_lattice
from .kernel import build_coupling
from .modes import BeamGeometry, CavityCoupling, DriveField, ProbePulse, build_probe_drive
from .observables import (
    PointEstimate,
    SpectrumResult,
    integrate_probabilities,
    reduce_probabilities,
)

_DIPOLES = ("circular", "x", "y")
_SCHEMES = ("two-level", "scheme-a", "scheme-b")
_JUMP_MODES = ("stochastic", "no-jump")


class BandwidthWarning(UserWarning):
    """Probe pulse bandwidth exceeds the scheme's switching bandwidth."""


@dataclass(frozen=True)
class ArrayBlock:
    nx: int = 16
    ny: int = 16
    spacing: float = 532e-9
    sigma_xy: float = 0.0
    sigma_z: float = 0.0
    frozen_disorder: bool = False


@dataclass(frozen=True)
class SpeciesBlock:
    wavelength: float = 780e-9
    gamma_e: float = TWO_PI * 6e6
    dipole: str = "circular"


@dataclass(frozen=True)
class ProbeBlock:
    tau: float = 2e-6
    photons: float = 1.0
    waist: float | None = None  # None resolves to 3 wavelengths
    detunings: tuple = ()  # units of gamma_e; empty resolves to the default scan


@dataclass(frozen=True)
class SchemeBlock:
    kind: str = "two-level"
    include_doubles: bool = False
    rabi_d: float = 0.0  # rad/s
    delta_d: float = 0.0
    eta: float = 0.0
    delta_c: float = 0.0
    cavity_photons: float = 0.0
    gamma_s: float = 0.0
    gamma_r: float = 0.0


@dataclass(frozen=True)
class McBlock:
    trajectories: int = 200
    seed: int = 1
    jump_mode: str = "stochastic"
    chunk: int = 64
    rtol: float = RTOL
    atol: float = ATOL


@dataclass(frozen=True)
class OutputBlock:
    directory: str = "."
    formats: tuple = ("csv", "json")
    label: str = "spectrum"


# default detuning scan in units of gamma_e (matches the mirror spectrum plots)
_DEFAULT_SCAN = tuple(np.linspace(-1.0, 1.0, 41))

# cooperative resonance shift of the default lattice, units of gamma_e
RESONANCE_SHIFT = 0.172


@dataclass(frozen=True)
class RunConfig:
    """Complete, immutable description of one simulation run."""

    array: ArrayBlock = ArrayBlock()
    species: SpeciesBlock = SpeciesBlock()
    probe: ProbeBlock = ProbeBlock()
    scheme: SchemeBlock = SchemeBlock()
    mc: McBlock = McBlock()
    output: OutputBlock = OutputBlock()

    def __post_init__(self):
        if self.scheme.kind not in _SCHEMES:
            raise ValueError(f"scheme kind must be one of {_SCHEMES}")
        if self.species.dipole not in _DIPOLES:
            raise ValueError(f"dipole must be one of {_DIPOLES}")
        if self.mc.jump_mode not in _JUMP_MODES:
            raise ValueError(f"jump mode must be one of {_JUMP_MODES}")
        if self.mc.trajectories < 1:
            raise ValueError("need at least one trajectory")
        if self.scheme.kind != "two-level" and self.scheme.include_doubles:
            raise ValueError("the doubly-excited sector is limited to the two-level scheme")

    # -- derived physics objects ------------------------------------------

    def species_obj(self) -> AtomSpecies:
        vectors = {
            "circular": None,  # AtomSpecies default
            "x": np.array([1.0, 0.0, 0.0]),
            "y": np.array([0.0, 1.0, 0.0]),
        }
        dip = vectors[self.species.dipole]
        if dip is None:
            return AtomSpecies(self.species.wavelength, self.species.gamma_e)
        return AtomSpecies(self.species.wavelength, self.species.gamma_e, dipole=dip)

    def ordered_array(self):
        return build_square_lattice(
            self.array.nx, self.array.ny, self.array.spacing, self.species_obj()
        )

    def beam(self) -> BeamGeometry:
        waist = self.probe.waist
        if waist is None:
            waist = 3.0 * self.species.wavelength
        return BeamGeometry(waist=waist, wavelength=self.species.wavelength)

    def pulse(self) -> ProbePulse:
        return ProbePulse(tau=self.probe.tau, photons=self.probe.photons)

    def scheme_config(self, delta_p: float) -> SchemeConfig:
        s = self.scheme
        if s.kind == "two-level":
            return SchemeConfig(delta_p=delta_p, include_doubles=s.include_doubles)
        drive = DriveField(rabi=s.rabi_d, detuning=s.delta_d)
        cavity = CavityCoupling(eta=s.eta, detuning=s.delta_c, photons=s.cavity_photons)
        return SchemeConfig(
            delta_p=delta_p,
            drive=drive,
            cavity=cavity,
            gamma_s=s.gamma_s,
            gamma_r=s.gamma_r,
        )

    def detunings(self) -> np.ndarray:
        """Probe detuning scan in rad/s."""
        scan = self.probe.detunings if self.probe.detunings else _DEFAULT_SCAN
        return np.asarray(scan, dtype=float) * self.species.gamma_e


def preset(name: str) -> RunConfig:
    """Named parameter sets for the mirror and switch demonstrations.

    fig1        two-level mirror spectrum of the ordered 16x16 array
    fig3-empty  EIT switch, resonant cavity, no cavity photon (transmit)
    fig3-photon same with one cavity photon (reflect)
    fig4-empty  Raman switch, detuned drive, no cavity photon (reflect)
    fig4-photon same with one cavity photon (transmit)
    """
    gamma_e = SpeciesBlock().gamma_e
    scheme_a = SchemeBlock(
        kind="scheme-a",
        rabi_d=TWO_PI * 2e6,
        delta_d=-RESONANCE_SHIFT * gamma_e,
        eta=TWO_PI * 2e6,
        delta_c=0.0,
        gamma_s=1e-3 * gamma_e,
        gamma_r=1e-3 * gamma_e,
    )
    scheme_b = SchemeBlock(
        kind="scheme-b",
        rabi_d=TWO_PI * 4e6,
        delta_d=-TWO_PI * 20e6,
        eta=TWO_PI * 4e6,
        delta_c=TWO_PI * 20e6 - RESONANCE_SHIFT * gamma_e,
        gamma_s=1e-3 * gamma_e,
        gamma_r=1e-3 * gamma_e,
    )
    presets = {
        "fig1": RunConfig(),
        "fig3-empty": RunConfig(scheme=scheme_a),
        "fig3-photon": RunConfig(scheme=dataclasses.replace(scheme_a, cavity_photons=1.0)),
        "fig4-empty": RunConfig(scheme=scheme_b),
        "fig4-photon": RunConfig(scheme=dataclasses.replace(scheme_b, cavity_photons=1.0)),
    }
    if name not in presets:
        raise ValueError(f"unknown preset {name!r}; available: {', '.join(sorted(presets))}")
    return presets[name]


# ---------------------------------------------------------------------------
# configuration files

_NM = 1e-9
_UM = 1e-6
_US = 1e-6
_MHZ = TWO_PI * 1e6  # keys in MHz are cyclic frequencies

# section -> key -> (block field, converter applied to the raw string)
_CONFIG_KEYS = {
    "array": {
        "nx": ("nx", int),
        "ny": ("ny", int),
        "spacing_nm": ("spacing", lambda s: float(s) * _NM),
        "sigma_xy_nm": ("sigma_xy", lambda s: float(s) * _NM),
        "sigma_z_nm": ("sigma_z", lambda s: float(s) * _NM),
        "frozen_disorder": ("frozen_disorder", None),  # boolean
    },
    "species": {
        "wavelength_nm": ("wavelength", lambda s: float(s) * _NM),
        "gamma_e_mhz": ("gamma_e", lambda s: float(s) * _MHZ),
        "dipole": ("dipole", str),
    },
    "probe": {
        "tau_us": ("tau", lambda s: float(s) * _US),
        "photons": ("photons", float),
        "waist_um": ("waist", lambda s: float(s) * _UM),
        "detunings_gamma": (
            "detunings",
            lambda s: tuple(float(tok) for tok in s.replace(",", " ").split()),
        ),
    },
    "scheme": {
        "kind": ("kind", str),
        "include_doubles": ("include_doubles", None),
        "rabi_d_mhz": ("rabi_d", lambda s: float(s) * _MHZ),
        "delta_d_mhz": ("delta_d", lambda s: float(s) * _MHZ),
        "eta_mhz": ("eta", lambda s: float(s) * _MHZ),
        "delta_c_mhz": ("delta_c", lambda s: float(s) * _MHZ),
        "cavity_photons": ("cavity_photons", float),
        "gamma_s_gamma": ("gamma_s", float),  # scaled by gamma_e after parse
        "gamma_r_gamma": ("gamma_r", float),
    },
    "mc": {
        "trajectories": ("trajectories", int),
        "seed": ("seed", int),
        "jump_mode": ("jump_mode", str),
        "chunk": ("chunk", int),
        "rtol": ("rtol", float),
        "atol": ("atol", float),
    },
    "output": {
        "directory": ("directory", str),
        "formats": ("formats", lambda s: tuple(tok.strip() for tok in s.split(",") if tok.strip())),
        "label": ("label", str),
    },
}


def load_config(path: str, base: RunConfig | None = None) -> RunConfig:
    """Parse an INI-style config; unknown sections or keys are hard errors."""
    parser = ConfigParser(inline_comment_prefixes=("#", ";"))
    with open(path) as fh:
        parser.read_file(fh)
    config = base if base is not None else RunConfig()
    blocks = {name: dict() for name in _CONFIG_KEYS}
    for section in parser.sections():
        if section not in _CONFIG_KEYS:
            raise ValueError(f"unknown config section [{section}] in {path}")
        known = _CONFIG_KEYS[section]
        for key, raw in parser.items(section):
            if key not in known:
                raise ValueError(f"unknown key {key!r} in section [{section}] of {path}")
            field_name, convert = known[key]
            if convert is None:
                blocks[section][field_name] = parser.getboolean(section, key)
            else:
                try:
                    blocks[section][field_name] = convert(raw)
                except ValueError as exc:
                    raise ValueError(f"bad value for {section}.{key}: {raw!r}") from exc
    # gamma-scaled scheme decay rates need the final gamma_e
    gamma_e = blocks["species"].get("gamma_e", config.species.gamma_e)
    for field_name in ("gamma_s", "gamma_r"):
        if field_name in blocks["scheme"]:
            blocks["scheme"][field_name] *= gamma_e
    return RunConfig(
        array=dataclasses.replace(config.array, **blocks["array"]),
        species=dataclasses.replace(config.species, **blocks["species"]),
        probe=dataclasses.replace(config.probe, **blocks["probe"]),
        scheme=dataclasses.replace(config.scheme, **blocks["scheme"]),
        mc=dataclasses.replace(config.mc, **blocks["mc"]),
        output=dataclasses.replace(config.output, **blocks["output"]),
    )


def config_to_dict(config: RunConfig) -> dict:
    return {
        name: dataclasses.asdict(getattr(config, name))
        for name in ("array", "species", "probe", "scheme", "mc", "output")
    }


def config_hash(config: RunConfig) -> str:
    """Digest of the blocks that determine the computed numbers.

    The output block only addresses file placement, so runs that differ
    only in destination or format share a hash.
    """
    doc = {
        name: dataclasses.asdict(getattr(config, name))
        for name in ("array", "species", "probe", "scheme", "mc")
    }
    text = json.dumps(doc, sort_keys=True, default=list)
    return hashlib.sha256(text.encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# bandwidth guard

def collective_linewidth(config: RunConfig) -> float:
    """Cooperative decay rate of the sub-wavelength lattice, rad/s."""
    lam = config.species.wavelength
    return 0.75 / np.pi * (lam / config.array.spacing) ** 2 * config.species.gamma_e


def check_bandwidth(config: RunConfig) -> None:
    """Warn when the pulse bandwidth 2pi/tau exceeds the switch bandwidth."""
    s = config.scheme
    if s.kind == "two-level":
        return
    gamma_e = config.species.gamma_e
    pulse_bw = TWO_PI / config.probe.tau
    if s.kind == "scheme-a":
        couplings = [abs(s.rabi_d)]
        if s.cavity_photons > 0:
            couplings.append(abs(s.eta) * np.sqrt(s.cavity_photons))
        limit = min(c**2 for c in couplings) / gamma_e
        label = "|Omega|^2/gamma_e"
    else:
        raman = abs(s.eta * np.sqrt(max(s.cavity_photons, 1.0)) * s.rabi_d / s.delta_d)
        limit = min(collective_linewidth(config), raman**2 / gamma_e)
        label = "min(collective linewidth, |Omega_c Omega_d / Delta_d|^2 / gamma_e)"
    if pulse_bw > limit:
        warnings.warn(
            f"pulse bandwidth 2pi/tau = {pulse_bw:.3e} rad/s exceeds the "
            f"switch bandwidth {label} = {limit:.3e} rad/s; expect reduced fidelity",
            BandwidthWarning,
            stacklevel=2,
        )


# ---------------------------------------------------------------------------
# ensemble execution

def _chunk_ranges(total: int, size: int):
    return [(lo, min(lo + size, total)) for lo in range(0, total, size)]


def _disordered_realizations(config: RunConfig, point_index: int, indices: range):
    """One (kernel, drive) pair per trajectory, fresh or frozen positions."""
    base = config.ordered_array()
    beam = config.beam()
    pulse = config.pulse()
    kernels, drives = [], []
    frozen_pair = None
    for traj in indices:
        if config.array.frozen_disorder:
            if frozen_pair is None:
                rng = np.random.default_rng([config.mc.seed, 0, 0, 0])
                arr = apply_disorder(base, config.array.sigma_xy, config.array.sigma_z, rng)
                frozen_pair = (build_coupling(arr), build_probe_drive(arr, beam, pulse))
            kernels.append(frozen_pair[0])
            drives.append(frozen_pair[1])
        else:
            rng = np.random.default_rng([config.mc.seed, point_index, traj, 0])
            arr = apply_disorder(base, config.array.sigma_xy, config.array.sigma_z, rng)
            kernels.append(build_coupling(arr))
            drives.append(build_probe_drive(arr, beam, pulse))
    return kernels, drives


def _run_chunk(config: RunConfig, delta_p: float, point_index: int, indices: range):
    """Integrate one chunk of trajectories; returns per-trajectory samples."""
    disordered = config.array.sigma_xy > 0 or config.array.sigma_z > 0
    scheme = config.scheme_config(delta_p)
    if disordered:
        kernels, drives = _disordered_realizations(config, point_index, indices)
        ctx = make_context(kernels, drives, scheme)
    else:
        arr = config.ordered_array()
        kernel = build_coupling(arr)
        drive = build_probe_drive(arr, config.beam(), config.pulse())
        ctx = make_context(kernel, drive, scheme, ncols=len(indices))
    grid = output_grid(config.pulse().window, config.species.gamma_e)
    rngs = [np.random.default_rng([config.mc.seed, point_index, traj, 1]) for traj in indices]
    result = propagate_batch(
        ctx, grid, rngs, config.mc.jump_mode, rtol=config.mc.rtol, atol=config.mc.atol
    )
    samples = [integrate_probabilities(result.record(c)) for c in range(len(indices))]
    jumps = [len(result.jump_logs[c]) for c in range(len(indices))]
    return (
        np.array([s[0] for s in samples]),
        np.array([s[1] for s in samples]),
        np.array(jumps),
    )


def _work_unit(payload):
    config, delta_p, point_index, chunk_id, lo, hi = payload
    t, r, j = _run_chunk(config, delta_p, point_index, range(lo, hi))
    return point_index, chunk_id, t, r, j


def run_point(
    config: RunConfig, delta_p: float, point_index: int = 0, pool=None
) -> PointEstimate:
    """Monte-Carlo estimate of (p_T, p_R, p_S) at one probe detuning."""
    ranges = _chunk_ranges(config.mc.trajectories, config.mc.chunk)
    payloads = [
        (config, delta_p, point_index, cid, lo, hi) for cid, (lo, hi) in enumerate(ranges)
    ]
    if pool is None:
        parts = [_work_unit(p) for p in payloads]
    else:
        parts = sorted(pool.map(_work_unit, payloads), key=lambda x: (x[0], x[1]))
    samples_t = np.concatenate([p[2] for p in parts])
    samples_r = np.concatenate([p[3] for p in parts])
    jumps = np.concatenate([p[4] for p in parts])
    return reduce_probabilities(samples_t, samples_r, jumps)


def _spectrum_metadata(config: RunConfig) -> dict:
    return {
        "n_atoms": config.array.nx * config.array.ny,
        "spacing": config.array.spacing,
        "sigma_xy": config.array.sigma_xy,
        "sigma_z": config.array.sigma_z,
        "scheme": config.scheme.kind,
        "cavity_photons": config.scheme.cavity_photons,
        "trajectories": config.mc.trajectories,
        "jump_mode": config.mc.jump_mode,
        "seed": config.mc.seed,
        "gamma_e": config.species.gamma_e,
        "config_hash": config_hash(config),
        "version": __version__,
    }


def sweep_detuning(
    config: RunConfig, detunings=None, threads: int = 1, log=None
) -> SpectrumResult:
    """Run the ensemble at each probe detuning (rad/s) and reduce to a spectrum."""
    check_bandwidth(config)
    deltas = np.asarray(
        config.detunings() if detunings is None else detunings, dtype=float
    )
    if deltas.size == 0:
        raise ValueError("empty detuning list")
    estimates = []
    pool = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for i, dp in enumerate(deltas):
            try:
                est = run_point(config, float(dp), point_index=i, pool=pool)
            except Exception as exc:
                raise RuntimeError(
                    f"detuning point {i} (delta_p = {dp:.6e} rad/s) failed: {exc}"
                ) from exc
            estimates.append(est)
            if log is not None:
                log(
                    f"point {i + 1}/{len(deltas)}  delta/gamma={dp / config.species.gamma_e:+.4f}"
                    f"  p_T={est.p_t:.4f}  p_R={est.p_r:.4f}  p_S={est.p_s:.4f}"
                )
    finally:
        if pool is not None:
            pool.shutdown()
    return SpectrumResult(
        detunings=deltas,
        p_t=np.array([e.p_t for e in estimates]),
        p_r=np.array([e.p_r for e in estimates]),
        p_s=np.array([e.p_s for e in estimates]),
        err_t=np.array([e.err_t for e in estimates]),
        err_r=np.array([e.err_r for e in estimates]),
        err_s=np.array([e.err_s for e in estimates]),
        metadata=_spectrum_metadata(config),
    )


@dataclass
class DisorderResult:
    """Transfer probabilities versus position spread at fixed detuning."""

    sigmas: np.ndarray  # m
    axis: str
    delta_p: float
    p_t: np.ndarray
    p_r: np.ndarray
    p_s: np.ndarray
    err_t: np.ndarray
    err_r: np.ndarray
    err_s: np.ndarray
    metadata: dict

    def to_csv(self, path: str) -> None:
        lines = ["sigma_nm,p_t,err_t,p_r,err_r,p_s,err_s"]
        for i, s in enumerate(self.sigmas):
            row = (
                s / _NM,
                self.p_t[i],
                self.err_t[i],
                self.p_r[i],
                self.err_r[i],
                self.p_s[i],
                self.err_s[i],
            )
            lines.append(",".join(f"{v:.12g}" for v in row))
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


def sweep_disorder(
    config: RunConfig, sigmas, axis: str = "xy", threads: int = 1, log=None
) -> DisorderResult:
    """Scan the position spread (m) along xy or z at a fixed probe detuning.

    The detuning is the configured scan point when there is exactly one,
    otherwise the cooperative resonance of the default lattice.
    """
    if axis not in ("xy", "z"):
        raise ValueError("axis must be 'xy' or 'z'")
    scan = config.detunings()
    delta_p = float(scan[0]) if scan.size == 1 else RESONANCE_SHIFT * config.species.gamma_e
    sigmas = np.asarray(sigmas, dtype=float)
    estimates = []
    pool = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for i, sigma in enumerate(sigmas):
            if axis == "xy":
                block = dataclasses.replace(config.array, sigma_xy=float(sigma))
            else:
                block = dataclasses.replace(config.array, sigma_z=float(sigma))
            variant = dataclasses.replace(config, array=block)
            est = run_point(variant, delta_p, point_index=i, pool=pool)
            estimates.append(est)
            if log is not None:
                log(
                    f"sigma={sigma / _NM:.1f} nm ({axis})  p_T={est.p_t:.4f}"
                    f"  p_R={est.p_r:.4f}  p_S={est.p_s:.4f}"
                )
    finally:
        if pool is not None:
            pool.shutdown()
    meta = _spectrum_metadata(config)
    meta["disorder_axis"] = axis
    meta["delta_p"] = delta_p
    return DisorderResult(
        sigmas=sigmas,
        axis=axis,
        delta_p=delta_p,
        p_t=np.array([e.p_t for e in estimates]),
        p_r=np.array([e.p_r for e in estimates]),
        p_s=np.array([e.p_s for e in estimates]),
        err_t=np.array([e.err_t for e in estimates]),
        err_r=np.array([e.err_r for e in estimates]),
        err_s=np.array([e.err_s for e in estimates]),
        metadata=meta,
    )


# ---------------------------------------------------------------------------
# full run with file output

def run(config: RunConfig, threads: int = 1, out_dir: str | None = None, log=None) -> SpectrumResult:
    """Execute the configured detuning sweep and write result files.

    Emits <label>.csv and/or <label>.json per output.formats, plus
    run-meta.json with the config echo, versions, and wall time.
    """
    started = time.time()
    spectrum = sweep_detuning(config, threads=threads, log=log)
    directory = out_dir if out_dir is not None else config.output.directory
    os.makedirs(directory, exist_ok=True)
    label = config.output.label
    paths = []
    if "csv" in config.output.formats:
        path = os.path.join(directory, f"{label}.csv")
        spectrum.to_csv(path)
        paths.append(path)
    if "json" in config.output.formats:
        path = os.path.join(directory, f"{label}.json")
        spectrum.to_json(path)
        paths.append(path)
    import scipy

    meta = {
        "config": config_to_dict(config),
        "config_hash": config_hash(config),
        "wall_time_s": time.time() - started,
        "threads": threads,
        "outputs": [os.path.basename(p) for p in paths],
        "versions": {
            "package": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    with open(os.path.join(directory, "run-meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=list)
        fh.write("\n")
    return spectrum
