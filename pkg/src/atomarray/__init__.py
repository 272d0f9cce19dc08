"""Monte Carlo simulator for cooperative light scattering on 2D atom arrays.

Submodules:
    geometry     lattice construction and positional disorder
    kernel       dipole-dipole coupling matrices and collective decay channels
    modes        Gaussian probe mode, pulse envelope, control drive fields
    dynamics     stochastic-wavefunction evolution of the driven array
    observables  field projection, transfer probabilities, ensemble reduction
    runner       presets, detuning/disorder sweeps, output files
    cli          the `simulate` command line entry point

Top-level imports are lazy so that the CLI can configure BLAS threading
before numpy is loaded.
"""

__version__ = "0.1.0"

_EXPORTS = {
    "AtomSpecies": "geometry",
    "AtomArray": "geometry",
    "build_square_lattice": "geometry",
    "apply_disorder": "geometry",
    "CouplingKernel": "kernel",
    "build_coupling": "kernel",
    "collective_channels": "kernel",
    "BeamGeometry": "modes",
    "ProbePulse": "modes",
    "DriveField": "modes",
    "CavityCoupling": "modes",
    "SchemeConfig": "dynamics",
    "TrajectoryState": "dynamics",
    "evolve_trajectory": "dynamics",
    "FieldRecord": "observables",
    "SpectrumResult": "observables",
    "RunConfig": "runner",
    "preset": "runner",
    "sweep_detuning": "runner",
    "sweep_disorder": "runner",
}


def __getattr__(name):
    if name in _EXPORTS:
        import importlib

        module = importlib.import_module(f".{_EXPORTS[name]}", __name__)
        return getattr(module, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_EXPORTS))
