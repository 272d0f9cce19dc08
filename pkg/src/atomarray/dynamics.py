"""Stochastic-wavefunction evolution of the driven atom array.

The state is truncated to at most one excitation shared between the atoms
(optionally two for the bare two-level scheme) and integrated in the probe
rotating frame, where the amplitude equations are autonomous apart from the
slow pulse envelope:

    da/dt   =  i sum_j Omega_p*(r_j, t) B_j
    dB_j/dt =  i Delta_p B_j + i Omega_p(r_j, t) a
               + i sum_{i != j} Omega_p*(r_i, t) B2_ij
               - sum_i [ (1/2) Gamma_ji - i V_ji ] B_i
    dB2_ij/dt = (2 i Delta_p - gamma_e) B2_ij
               + i [ Omega_p(r_i, t) B_j + Omega_p(r_j, t) B_i ]
               - sum_{k != i,j} [ (1/2) Gamma_jk - i V_jk ] B2_ik + (i <-> j)

Here B_j = b_j e^{i Delta_p t} and B2_ij = b2_ij e^{2 i Delta_p t}; the
off-diagonal damping carries the same 1/2 as the diagonal, as dictated by
the non-Hermitian effective Hamiltonian.  The V sign convention is fixed by
the requirement that the collective resonance of the sub-wavelength lattice
is blue shifted.

The four-level ladder (ground, excited, and two Rydberg states coupled by a
classical drive Omega_d and a cavity field Omega_c = eta sqrt(n_c)) adds

    dB_j/dt += i Omega_d* e^{-i k_d . r_j} C_j
    dC_j/dt  = i (Delta_p + Delta_d) C_j - (1/2) Gamma_s C_j
               + i Omega_d e^{i k_d . r_j} B_j + i Omega_c* D_j
    dD_j/dt  = i (Delta_p + Delta_d + Delta_c) D_j - (1/2) Gamma_r D_j
               + i Omega_c C_j

with singly-excited amplitudes only.

Quantum jumps use the norm-threshold unraveling: the squared norm decays
under the non-Hermitian evolution and a jump fires when it crosses a
uniform random threshold.  The jump time is localized by bisection on the
integrator's dense output.  With only single excitations every jump
projects onto the ground state; with the doubly-excited sector the
collective channel l is drawn with probability proportional to
Gamma_l <Psi| Sigma_l^+ Sigma_l |Psi> and the state becomes Sigma_l |Psi>,
renormalized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import RK45

from .kernel import CouplingKernel
from .modes import CavityCoupling, DriveField, ProbeDrive
from .observables import FieldRecord

# Integrator defaults; the step-halving test in the suite guards accuracy.
RTOL = 1e-6
ATOL = 1e-10

# Output grid density: points per 1/gamma_e of simulated time.
OUTPUT_DENSITY = 40

# Jump times are located to this many 1/gamma_e.
JUMP_TIME_TOL = 1e-3


class IntegrationFailureError(RuntimeError):
    """The adaptive integrator could not complete a step."""


@dataclass(frozen=True)
class SchemeConfig:
    """Level scheme and probe detuning for one run.

    delta_p is the probe detuning (rad/s).  A two-level run leaves drive and
    cavity unset; include_doubles switches on the doubly-excited sector.
    A four-level run sets drive (and usually cavity); it is restricted to
    single excitations, and gamma_s / gamma_r damp the two Rydberg states.
    """

    delta_p: float = 0.0
    include_doubles: bool = False
    drive: DriveField | None = None
    cavity: CavityCoupling | None = None
    gamma_s: float = 0.0
    gamma_r: float = 0.0

    def __post_init__(self):
        if self.drive is not None and self.include_doubles:
            raise ValueError("the doubly-excited sector is supported for the two-level scheme only")
        if self.gamma_s < 0 or self.gamma_r < 0:
            raise ValueError("Rydberg decay rates must be non-negative")

    @property
    def four_level(self) -> bool:
        return self.drive is not None


@dataclass
class TrajectoryState:
    """Unnormalized amplitudes of one stochastic trajectory.

    Amplitudes are stored in the probe rotating frame: a on the ground
    state, b on single excitations, b2 on the upper triangle (i < j) of the
    doubly-excited sector, c and d on the two Rydberg levels.  norm2 tracks
    the squared norm; jumps reset it to 1.
    """

    a: complex
    b: np.ndarray
    b2: np.ndarray | None = None
    c: np.ndarray | None = None
    d: np.ndarray | None = None
    t: float = 0.0
    norm2: float = 1.0
    jump_count: int = 0
    rng: np.random.Generator | None = None

    @classmethod
    def ground(
        cls,
        n_atoms: int,
        doubles: bool = False,
        four_level: bool = False,
        rng: np.random.Generator | None = None,
    ) -> "TrajectoryState":
        n_pairs = n_atoms * (n_atoms - 1) // 2
        return cls(
            a=1.0 + 0.0j,
            b=np.zeros(n_atoms, dtype=complex),
            b2=np.zeros(n_pairs, dtype=complex) if doubles else None,
            c=np.zeros(n_atoms, dtype=complex) if four_level else None,
            d=np.zeros(n_atoms, dtype=complex) if four_level else None,
            rng=rng,
        )

    def norm2_recomputed(self) -> float:
        total = abs(self.a) ** 2 + float(np.sum(np.abs(self.b) ** 2))
        for sector in (self.b2, self.c, self.d):
            if sector is not None:
                total += float(np.sum(np.abs(sector) ** 2))
        return total


# ---------------------------------------------------------------------------
# batched right-hand side

@dataclass
class _Context:
    """Precomputed arrays for a batch of trajectories at one detuning.

    Columns are trajectories; a_matrix is shared (n, n) or stacked
    (m, n, n) when the batch carries per-trajectory disorder.
    """

    kind: str  # "two" | "doubles" | "four"
    n: int
    ncols: int
    dim: int
    gamma_e: float
    delta_p: float
    a_matrix: np.ndarray
    stacked: bool
    weights: np.ndarray  # (n, m) probe Rabi per unit flux amplitude
    proj_t: np.ndarray  # (n, m) C g*(r_j), forward-mode projector
    proj_r: np.ndarray  # (n, m) C g(r_j), backward-mode projector
    envelope: object
    # doubles sector
    iu: tuple | None = None
    k_matrix: np.ndarray | None = None  # off-diagonal couplings, shared or stacked
    channel_rates: np.ndarray | None = None
    channel_modes: np.ndarray | None = None
    # four-level sector
    rabi_d: float = 0.0
    phase_d: np.ndarray | None = None  # (n, m) e^{i k_d . r_j}
    rabi_c: float = 0.0
    delta_d: float = 0.0
    delta_c: float = 0.0
    gamma_s: float = 0.0
    gamma_r: float = 0.0

    def apply_coupling(self, mat: np.ndarray, b: np.ndarray) -> np.ndarray:
        """mat @ b per column for shared (n, n) or stacked (m, n, n) mat."""
        if not self.stacked:
            return mat @ b
        return np.einsum("cij,jc->ic", mat, b)


def _as_list(x, m):
    if isinstance(x, (list, tuple)):
        if len(x) != m:
            raise ValueError("need one entry per trajectory column")
        return list(x)
    return [x] * m


def make_context(
    kernels: CouplingKernel | Sequence[CouplingKernel],
    drives: ProbeDrive | Sequence[ProbeDrive],
    scheme: SchemeConfig,
    ncols: int | None = None,
) -> _Context:
    """Bundle kernel, drive and scheme data for a batch of trajectories.

    Pass single objects for an ordered ensemble (shared coupling matrix) or
    per-trajectory sequences for disordered ensembles.
    """
    shared = not isinstance(kernels, (list, tuple))
    if ncols is None:
        ncols = 1 if shared else len(kernels)
    kernel_list = _as_list(kernels, ncols)
    drive_list = _as_list(drives, ncols)
    k0 = kernel_list[0]
    n = k0.n_atoms
    gamma_e = k0.gamma_e if n else k0.array.species.gamma_e

    def full_coupling(k: CouplingKernel) -> np.ndarray:
        return 0.5 * k.gamma_matrix - 1j * k.v_matrix

    if shared:
        a_matrix = full_coupling(k0)
    else:
        a_matrix = np.stack([full_coupling(k) for k in kernel_list])

    weights = np.stack([d.weights for d in drive_list], axis=1)
    proj_t = np.stack([d.coupling * np.conj(d.fwd_profile) for d in drive_list], axis=1)
    proj_r = np.stack([d.coupling * np.conj(d.bwd_profile) for d in drive_list], axis=1)

    ctx = _Context(
        kind="two",
        n=n,
        ncols=ncols,
        dim=1 + n,
        gamma_e=gamma_e,
        delta_p=scheme.delta_p,
        a_matrix=a_matrix,
        stacked=not shared,
        weights=weights,
        proj_t=proj_t,
        proj_r=proj_r,
        envelope=drive_list[0].envelope,
    )
    if scheme.include_doubles:
        ctx.kind = "doubles"
        ctx.iu = np.triu_indices(n, k=1)
        ctx.dim = 1 + n + n * (n - 1) // 2

        def off_diag(k: CouplingKernel) -> np.ndarray:
            km = full_coupling(k).copy()
            np.fill_diagonal(km, 0.0)
            return km

        ctx.k_matrix = off_diag(k0) if shared else np.stack([off_diag(k) for k in kernel_list])
        if shared:
            ctx.channel_rates = k0.channel_rates
            ctx.channel_modes = k0.channel_modes
        else:
            ctx.channel_rates = np.stack([k.channel_rates for k in kernel_list])
            ctx.channel_modes = np.stack([k.channel_modes for k in kernel_list])
    elif scheme.four_level:
        ctx.kind = "four"
        ctx.dim = 1 + 3 * n
        ctx.rabi_d = scheme.drive.rabi
        ctx.delta_d = scheme.drive.detuning
        ctx.phase_d = np.stack(
            [scheme.drive.phases(k.array.positions) for k in kernel_list], axis=1
        )
        if scheme.cavity is not None:
            ctx.rabi_c = scheme.cavity.rabi
            ctx.delta_c = scheme.cavity.detuning
        ctx.gamma_s = scheme.gamma_s
        ctx.gamma_r = scheme.gamma_r
    return ctx


def _expand_pairs(ctx: _Context, b2: np.ndarray) -> np.ndarray:
    """Upper-triangle pair amplitudes (P, m) to full symmetric (m, n, n)."""
    m = b2.shape[1]
    full = np.zeros((m, ctx.n, ctx.n), dtype=complex)
    full[:, ctx.iu[0], ctx.iu[1]] = b2.T
    full += full.transpose(0, 2, 1)
    return full


def _rhs(ctx: _Context, t: float, y: np.ndarray) -> np.ndarray:
    """Time derivative of the batched state (dim, m)."""
    n = ctx.n
    a = y[0]
    b = y[1 : 1 + n]
    ap = ctx.envelope(t)
    dy = np.empty_like(y)
    # ground and singles
    dy[0] = 1j * ap * np.einsum("jc,jc->c", np.conj(ctx.weights), b)
    db = (1j * ctx.delta_p) * b - ctx.apply_coupling(ctx.a_matrix, b)
    db += (1j * ap) * ctx.weights * a[None, :]
    if ctx.kind == "doubles" and n > 1:
        b2 = y[1 + n :]
        full = _expand_pairs(ctx, b2)
        # drive from the doubly-excited sector back onto singles
        db += 1j * ap * np.einsum("cij,ic->jc", full, np.conj(ctx.weights))
        # pair dynamics: detuning, double damping, drive up, coherent hopping
        drive_up = ctx.weights.T[:, :, None] * b.T[:, None, :]
        dfull = (2j * ctx.delta_p - ctx.gamma_e) * full + 1j * ap * (
            drive_up + drive_up.transpose(0, 2, 1)
        )
        if ctx.stacked:
            dfull -= np.matmul(ctx.k_matrix, full) + np.matmul(full, ctx.k_matrix)
        else:
            dfull -= np.matmul(ctx.k_matrix[None, :, :], full) + np.matmul(
                full, ctx.k_matrix[None, :, :]
            )
        dy[1 + n :] = dfull[:, ctx.iu[0], ctx.iu[1]].T
    elif ctx.kind == "four":
        c = y[1 + n : 1 + 2 * n]
        d = y[1 + 2 * n :]
        db += 1j * np.conj(ctx.rabi_d) * np.conj(ctx.phase_d) * c
        dy[1 + n : 1 + 2 * n] = (
            (1j * (ctx.delta_p + ctx.delta_d) - 0.5 * ctx.gamma_s) * c
            + 1j * ctx.rabi_d * ctx.phase_d * b
            + 1j * np.conj(ctx.rabi_c) * d
        )
        dy[1 + 2 * n :] = (
            (1j * (ctx.delta_p + ctx.delta_d + ctx.delta_c) - 0.5 * ctx.gamma_r) * d
            + 1j * ctx.rabi_c * c
        )
    dy[1 : 1 + n] = db
    return dy


# ---------------------------------------------------------------------------
# spec-level derivative entry points (single trajectory)

def _state_to_column(state: TrajectoryState, ctx: _Context) -> np.ndarray:
    if len(state.b) != ctx.n:
        raise ValueError(f"state holds {len(state.b)} atoms, scheme expects {ctx.n}")
    y = np.zeros((ctx.dim, 1), dtype=complex)
    y[0, 0] = state.a
    y[1 : 1 + ctx.n, 0] = state.b
    if ctx.kind == "doubles":
        if state.b2 is None or len(state.b2) != ctx.n * (ctx.n - 1) // 2:
            raise ValueError("state lacks the doubly-excited sector the scheme requires")
        y[1 + ctx.n :, 0] = state.b2
    elif ctx.kind == "four":
        if state.c is None or state.d is None:
            raise ValueError("state lacks the Rydberg sectors the scheme requires")
        y[1 + ctx.n : 1 + 2 * ctx.n, 0] = state.c
        y[1 + 2 * ctx.n :, 0] = state.d
    return y


def derivative_two_level(
    state: TrajectoryState,
    t: float,
    kernel: CouplingKernel,
    drive: ProbeDrive,
    scheme: SchemeConfig,
) -> tuple[complex, np.ndarray, np.ndarray | None]:
    """(da/dt, db/dt, db2/dt) for a two-level state; db2 is None without doubles."""
    if scheme.four_level:
        raise ValueError("scheme carries a control drive; use derivative_four_level")
    ctx = make_context(kernel, drive, scheme)
    dy = _rhs(ctx, t, _state_to_column(state, ctx))
    db2 = dy[1 + ctx.n :, 0].copy() if scheme.include_doubles else None
    return complex(dy[0, 0]), dy[1 : 1 + ctx.n, 0].copy(), db2


def derivative_four_level(
    state: TrajectoryState,
    t: float,
    kernel: CouplingKernel,
    drive: ProbeDrive,
    scheme: SchemeConfig,
) -> tuple[complex, np.ndarray, np.ndarray, np.ndarray]:
    """(da/dt, db/dt, dc/dt, dd/dt) for a four-level state."""
    if not scheme.four_level:
        raise ValueError("scheme carries no control drive; use derivative_two_level")
    ctx = make_context(kernel, drive, scheme)
    dy = _rhs(ctx, t, _state_to_column(state, ctx))
    n = ctx.n
    return (
        complex(dy[0, 0]),
        dy[1 : 1 + n, 0].copy(),
        dy[1 + n : 1 + 2 * n, 0].copy(),
        dy[1 + 2 * n :, 0].copy(),
    )


# ---------------------------------------------------------------------------
# batched propagation with norm-threshold jumps

@dataclass
class BatchResult:
    """Output of one batch propagation over the shared grid."""

    times: np.ndarray
    alpha_p: np.ndarray
    alpha_t: np.ndarray  # (m, nt)
    alpha_r: np.ndarray
    norm2: np.ndarray
    p1: np.ndarray
    p2: np.ndarray | None
    jump_logs: list
    final: np.ndarray  # (dim, m)

    def record(self, col: int) -> FieldRecord:
        return FieldRecord(
            times=self.times,
            alpha_p=self.alpha_p,
            alpha_t=self.alpha_t[col],
            alpha_r=self.alpha_r[col],
            norm2=self.norm2[col],
            p1=self.p1[col],
            p2=None if self.p2 is None else self.p2[col],
            jump_times=list(self.jump_logs[col]),
        )


def _column_norm2(y: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(y) ** 2, axis=0)


def _emit(ctx: _Context, out: BatchResult, ts: np.ndarray, states: np.ndarray, k0: int):
    """Fill output arrays for grid times ts from interpolated states (dim, m, nt)."""
    n = ctx.n
    nt = len(ts)
    sl = slice(k0, k0 + nt)
    norm2 = np.sum(np.abs(states) ** 2, axis=0)
    a = states[0]
    b = states[1 : 1 + n]
    s_t = np.conj(a) * np.einsum("jc,jct->ct", ctx.proj_t, b)
    s_r = np.conj(a) * np.einsum("jc,jct->ct", ctx.proj_r, b)
    if ctx.kind == "doubles" and n > 1:
        b2 = states[1 + n :]
        bi = np.conj(b[ctx.iu[0]])
        bj = np.conj(b[ctx.iu[1]])
        # sum_{i<j} b_i* b2_ij proj_j + b_j* b2_ij proj_i
        s_t += np.einsum("pct,pc->ct", bi * b2, ctx.proj_t[ctx.iu[1]])
        s_t += np.einsum("pct,pc->ct", bj * b2, ctx.proj_t[ctx.iu[0]])
        s_r += np.einsum("pct,pc->ct", bi * b2, ctx.proj_r[ctx.iu[1]])
        s_r += np.einsum("pct,pc->ct", bj * b2, ctx.proj_r[ctx.iu[0]])
        out.p2[:, sl] = np.sum(np.abs(b2) ** 2, axis=0) / norm2
    ap = out.alpha_p[sl][None, :]
    out.alpha_t[:, sl] = ap + 1j * s_t / norm2
    out.alpha_r[:, sl] = 1j * s_r / norm2
    out.norm2[:, sl] = norm2
    out.p1[:, sl] = np.sum(np.abs(b) ** 2, axis=0) / norm2


def _bisect_jump(sol, dim: int, ncols: int, col: int, u: float, lo: float, hi: float, tol: float) -> float:
    """Locate the norm-threshold crossing of one column inside a step."""

    def excess(t: float) -> float:
        y = sol(t).reshape(dim, ncols)
        return float(np.sum(np.abs(y[:, col]) ** 2)) - u

    if excess(lo) <= 0.0:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _collapse_column(ctx: _Context, y: np.ndarray, col: int, rng: np.random.Generator) -> int:
    """Apply a quantum jump to one column in place; returns the channel index.

    Without the doubly-excited sector every jump lands in the ground state
    (channel -1).  With it, the collective channel is drawn with weight
    Gamma_l ||Sigma_l Psi||^2 and the state becomes Sigma_l Psi, normalized.
    """
    n = ctx.n
    if ctx.kind != "doubles" or n == 0:
        y[:, col] = 0.0
        y[0, col] = 1.0
        return -1
    rates = ctx.channel_rates if not ctx.stacked else ctx.channel_rates[col]
    modes = ctx.channel_modes if not ctx.stacked else ctx.channel_modes[col]
    b = y[1 : 1 + n, col]
    full = np.zeros((n, n), dtype=complex)
    full[ctx.iu] = y[1 + n :, col]
    full += full.T
    a_new = modes @ b  # (L,) amplitude landing on |G> per channel
    b_new = modes @ full  # (L, n) singles amplitudes per channel
    weights = np.clip(rates, 0.0, None) * (
        np.abs(a_new) ** 2 + np.sum(np.abs(b_new) ** 2, axis=1)
    )
    total = weights.sum()
    if total <= 0.0:
        y[:, col] = 0.0
        y[0, col] = 1.0
        return -1
    channel = int(np.searchsorted(np.cumsum(weights), rng.uniform() * total, side="right"))
    channel = min(channel, len(weights) - 1)
    y[:, col] = 0.0
    y[0, col] = a_new[channel]
    y[1 : 1 + n, col] = b_new[channel]
    y[:, col] /= np.sqrt(np.sum(np.abs(y[:, col]) ** 2))
    return channel


def propagate_batch(
    ctx: _Context,
    t_grid: np.ndarray,
    rngs: Sequence[np.random.Generator] | None,
    jump_mode: str = "stochastic",
    rtol: float = RTOL,
    atol: float = ATOL,
    y0: np.ndarray | None = None,
) -> BatchResult:
    """Integrate a batch of trajectories over a shared uniform output grid.

    jump_mode "stochastic" draws norm thresholds from the per-column rngs;
    "no-jump" follows the deterministic non-Hermitian evolution.
    """
    if jump_mode not in ("stochastic", "no-jump"):
        raise ValueError(f"unknown jump mode {jump_mode!r}")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 2 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing with at least two points")
    m = ctx.ncols
    dim = ctx.dim
    stochastic = jump_mode == "stochastic"
    if stochastic:
        if rngs is None or len(rngs) != m:
            raise ValueError("stochastic mode needs one rng per trajectory")
        thresholds = np.array([rng.uniform() for rng in rngs])
    if y0 is None:
        y0 = np.zeros((dim, m), dtype=complex)
        y0[0] = 1.0
    else:
        y0 = np.array(y0, dtype=complex)
    nt = len(t_grid)
    t_end = t_grid[-1]
    time_tol = JUMP_TIME_TOL / ctx.gamma_e
    out = BatchResult(
        times=t_grid,
        alpha_p=np.asarray(ctx.envelope(t_grid), dtype=float),
        alpha_t=np.empty((m, nt), dtype=complex),
        alpha_r=np.empty((m, nt), dtype=complex),
        norm2=np.empty((m, nt)),
        p1=np.empty((m, nt)),
        p2=np.empty((m, nt)) if ctx.kind == "doubles" else None,
        jump_logs=[[] for _ in range(m)],
        final=y0,
    )
    _emit(ctx, out, t_grid[:1], y0[:, :, None], 0)
    k_out = 1  # next grid index to emit

    def fun(t, y_flat):
        return _rhs(ctx, t, y_flat.reshape(dim, m)).ravel()

    def new_solver(t0, y, first_step=None):
        return RK45(fun, t0, y.ravel(), t_end, rtol=rtol, atol=atol, first_step=first_step)

    solver = new_solver(t_grid[0], y0)
    y_current = y0
    while solver.status == "running":
        solver.step()
        if solver.status == "failed":
            raise IntegrationFailureError(
                f"integrator failed at t = {solver.t:.6e} s (step {solver.h_abs:.3e} s)"
            )
        sol = solver.dense_output()
        y_current = solver.y.reshape(dim, m)
        t_lo, t_hi = sol.t_min, sol.t_max
        t_stop = t_hi
        jump_col = None
        if stochastic:
            crossed = np.where(_column_norm2(y_current) < thresholds)[0]
            if crossed.size:
                t_stars = np.array(
                    [
                        _bisect_jump(sol, dim, m, c, thresholds[c], t_lo, t_hi, time_tol)
                        for c in crossed
                    ]
                )
                first = int(np.argmin(t_stars))
                jump_col = int(crossed[first])
                t_stop = float(t_stars[first])
        # emit grid points covered by this step (up to a jump, if any)
        k_hi = int(np.searchsorted(t_grid, t_stop + 1e-18 * max(1.0, abs(t_stop)), side="right"))
        if k_hi > k_out:
            ts = t_grid[k_out:k_hi]
            states = sol(ts).reshape(dim, m, len(ts))
            _emit(ctx, out, ts, states, k_out)
            k_out = k_hi
        if jump_col is not None:
            y_jump = sol(t_stop).reshape(dim, m).copy()
            channel = _collapse_column(ctx, y_jump, jump_col, rngs[jump_col])
            out.jump_logs[jump_col].append((t_stop, channel))
            thresholds[jump_col] = rngs[jump_col].uniform()
            y_current = y_jump
            if t_end - t_stop <= time_tol:
                break
            solver = new_solver(t_stop, y_jump, first_step=min(solver.h_abs, t_end - t_stop))
    if k_out < nt:
        # grid points at/after the last event; state is constant only in the
        # degenerate break above, otherwise this is just the final time
        ts = t_grid[k_out:]
        states = np.repeat(y_current[:, :, None], len(ts), axis=2)
        _emit(ctx, out, ts, states, k_out)
    out.final = y_current
    return out


# ---------------------------------------------------------------------------
# single-trajectory interface

def evolve_trajectory(
    initial: TrajectoryState,
    scheme: SchemeConfig,
    kernel: CouplingKernel,
    drive: ProbeDrive,
    t_grid: np.ndarray,
    jump_mode: str = "stochastic",
    rtol: float = RTOL,
    atol: float = ATOL,
) -> tuple[TrajectoryState, FieldRecord, list]:
    """Evolve one trajectory over t_grid; returns (final state, record, jump log)."""
    ctx = make_context(kernel, drive, scheme)
    if jump_mode == "stochastic" and initial.rng is None:
        raise ValueError("stochastic evolution needs a TrajectoryState carrying an rng")
    y0 = _state_to_column(initial, ctx)
    rngs = [initial.rng] if initial.rng is not None else None
    result = propagate_batch(ctx, t_grid, rngs, jump_mode, rtol=rtol, atol=atol, y0=y0)
    y = result.final[:, 0]
    n = ctx.n
    final = TrajectoryState(
        a=complex(y[0]),
        b=y[1 : 1 + n].copy(),
        b2=y[1 + n :].copy() if ctx.kind == "doubles" else None,
        c=y[1 + n : 1 + 2 * n].copy() if ctx.kind == "four" else None,
        d=y[1 + 2 * n :].copy() if ctx.kind == "four" else None,
        t=float(t_grid[-1]),
        norm2=float(np.sum(np.abs(y) ** 2)),
        jump_count=len(result.jump_logs[0]),
        rng=initial.rng,
    )
    record = result.record(0)
    return final, record, list(result.jump_logs[0])


def output_grid(window: float, gamma_e: float, density: int = OUTPUT_DENSITY) -> np.ndarray:
    """Uniform quadrature grid covering [0, window] at `density` points per 1/gamma_e."""
    n = max(2, int(np.ceil(window * gamma_e * density)) + 1)
    return np.linspace(0.0, window, n)
