"""Real- and imaginary-time propagation of the 1D GP equation.

Covers the quench protocol (obstacle switched on over a ramp, optional
stochastic modulation, interaction scaling), the three initial-state
families (homogeneous flow, unstable stationary laser configuration,
ground state seeded with an incoming gray soliton), plus the imaginary-time
and Newton solvers used to construct them.

Propagation is second-order Strang splitting with the kinetic factor
applied spectrally; the dimensionless units of core.py apply throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from .core import (
    FieldState,
    Grid1D,
    SeededRng,
    chemical_potential,
    gp_residual,
    observables,
    spectral_gradient,
)


class NumericalBlowup(RuntimeError):
    """Raised when the field leaves the representable range mid-run."""

    def __init__(self, time, max_abs):
        super().__init__(f"non-finite field at t={time:.6g} (max |psi| = {max_abs:.3g})")
        self.time = time
        self.max_abs = max_abs


class ConvergenceError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Obstacles and scenarios
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ObstacleSpec:
    """Quenched obstacle: what V(x) (and, for the flat-profile model, g(x))
    look like after the ramp.

    kinds:
      square    -- V = -depth for |x| < width/2            (depth > 0)
      gaussian  -- V = -depth * exp(-x^2 / sigma^2)
      delta     -- repulsive barrier of area Z, regularized as a
                   single-grid-cell top hat (bounded potential for the
                   spectral propagator; the area is the physical knob)
      flat_bhl  -- sound speed c(x) = 1 outside, c2 < v inside a window of
                   size width, with g(x) n0 + V(x) = barrier_level so the
                   homogeneous flow stays a stationary solution
      none      -- free propagation
    """

    kind: str = "square"
    depth: float = 1.0
    width: float = 2.0
    sigma: float = 1.0
    area: float = 0.5
    c2: float = 0.4
    barrier_level: float | None = None  # flat_bhl only; defaults to lam * n0

    def __post_init__(self):
        if self.kind not in ("square", "gaussian", "delta", "flat_bhl", "none"):
            raise ValueError(f"unknown obstacle kind {self.kind!r}")
        if self.kind in ("square", "gaussian") and self.depth < 0:
            raise ValueError("well depth must be >= 0")
        if self.kind in ("square", "flat_bhl") and self.width <= 0:
            raise ValueError("width must be positive")

    def potential(self, grid: Grid1D, lam: float = 1.0) -> np.ndarray:
        x = grid.x
        if self.kind == "square":
            return -self.depth * _window_fraction(x, grid.dx, 0.5 * self.width)
        if self.kind == "gaussian":
            return -self.depth * np.exp(-(x**2) / self.sigma**2)
        if self.kind == "delta":
            v = np.zeros_like(x)
            v[np.argmin(np.abs(x))] = self.area / grid.dx
            return v
        if self.kind == "flat_bhl":
            level = lam if self.barrier_level is None else self.barrier_level
            return level - self.coupling(grid, lam)
        return np.zeros_like(x)

    def coupling(self, grid: Grid1D, lam: float = 1.0) -> np.ndarray:
        """Pointwise interaction coefficient multiplying |psi|^2."""
        x = grid.x
        if self.kind == "flat_bhl":
            frac = _window_fraction(x, grid.dx, 0.5 * self.width)
            c_sq = 1.0 + (self.c2**2 - 1.0) * frac
            return lam * c_sq
        return np.full_like(x, lam)


def _window_fraction(x: np.ndarray, dx: float, half_width: float) -> np.ndarray:
    """Cell-averaged indicator of |x| < half_width.

    Pointwise sampling of a sharp edge loses up to half a cell of width,
    which shifts well eigenvalues by O(dE/dX * dx); averaging the indicator
    over each cell keeps the integrated strength exact.
    """
    lo = np.maximum(x - 0.5 * dx, -half_width)
    hi = np.minimum(x + 0.5 * dx, half_width)
    return np.clip((hi - lo) / dx, 0.0, 1.0)


@dataclass(frozen=True)
class QuenchScenario:
    """Declarative description of one run."""

    v: float = 0.65
    obstacle: ObstacleSpec = field(default_factory=ObstacleSpec)
    tau: float = 0.0  # ramp time; 0 = sudden quench
    noise_eps: float = 0.0
    noise_target: str = "potential"  # or "coupling"
    noise_refresh: float = 0.1  # white-noise hold time; h is constant per interval
    lam: float = 1.0
    initial_family: str = "ihfc"  # ihfc | bhl | sgs
    bhl_noise: float = 1e-3
    v_sol: float = 0.5
    soliton_x0: float | None = None  # default -L/4
    t_max: float = 100.0
    dt: float = 1e-3
    sponge: float = 0.0  # absorbing-layer strength; 0 = off (paper-like box)

    def __post_init__(self):
        if self.v < 0:
            raise ValueError("flow velocity must be >= 0")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("interaction scale lam must lie in [0, 1]")
        if self.noise_eps < 0 or self.tau < 0 or self.t_max < 0 or self.dt <= 0:
            raise ValueError("tau, noise_eps, t_max must be >= 0 and dt > 0")
        if self.noise_refresh <= 0:
            raise ValueError("noise_refresh must be positive")
        if self.noise_target not in ("potential", "coupling"):
            raise ValueError("noise target must be 'potential' or 'coupling'")
        if self.initial_family not in ("ihfc", "bhl", "sgs"):
            raise ValueError("initial family must be ihfc, bhl or sgs")
        if not 0.0 <= self.v_sol < 1.0:
            raise ValueError("v_sol must lie in [0, 1)")

    def check_grid(self, grid: Grid1D):
        if self.dt > 0.5 * grid.dx**2:
            raise ValueError(
                f"dt={self.dt} violates the stability margin 0.5*dx^2={0.5 * grid.dx ** 2}"
            )


def ramp_envelope(t: float, tau: float) -> float:
    """sin^2 switch-on over the time scale tau; 1 for a sudden quench."""
    if tau <= 0 or t >= tau:
        return 1.0
    if t <= 0:
        return 0.0
    return math.sin(0.5 * math.pi * t / tau) ** 2


def sponge_profile(grid: Grid1D, strength: float) -> np.ndarray:
    """Absorbing-layer relaxation rate ramped over the outer 5% of the box.

    The layer relaxes the field toward the unperturbed flowing background
    e^{i(v x - mu t)} (fresh condensate at the inlet, radiation swallowed at
    the outlet), which emulates the thermodynamic limit: emitted waves and
    solitons leave instead of wrapping around.  Off by default, where the
    closed box reproduces finite-size physics (wrap-around collapse).
    """
    if strength <= 0:
        return np.zeros(grid.npoints)
    edge = 0.05 * grid.length
    dist = 0.5 * grid.length - np.abs(grid.x)
    w = np.clip(1.0 - dist / edge, 0.0, 1.0)
    return strength * w**2


# ---------------------------------------------------------------------------
# Recording
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RecorderSpec:
    """What to sample while evolving.

    Strides are in integrator steps.  Probe densities are always recorded;
    full density frames and complex tail frames are opt-in because of their
    memory cost.
    """

    probe_positions: tuple = (-100.0, -40.0, -10.0, 0.0, 10.0, 40.0, 100.0)
    probe_stride: int = 50
    density_stride: int = 0  # 0 = off
    complex_stride: int = 0  # 0 = off
    complex_start: float = 0.0  # record complex frames for t >= this
    complex_xwindow: float = 0.0  # 0 = full box; else keep |x| <= window
    record_complex_probes: bool = False  # keep psi (not just |psi|^2) at probes

    def probe_indices(self, grid: Grid1D) -> np.ndarray:
        idx = [int(np.argmin(np.abs(grid.x - p))) for p in self.probe_positions]
        return np.asarray(idx, dtype=np.intp)


@dataclass
class Trajectory:
    """Recorded output of one evolve() call."""

    scenario: QuenchScenario
    grid: Grid1D
    v_eff: float
    probe_x: np.ndarray
    probe_times: np.ndarray
    probe_density: np.ndarray  # (n_probes, n_times)
    density_times: np.ndarray
    density_frames: np.ndarray  # (n_frames, M) or empty
    complex_times: np.ndarray
    complex_frames: np.ndarray  # (n_frames, M or slice) complex or empty
    complex_x: np.ndarray  # x coordinates of the complex-frame columns
    final_state: FieldState
    diagnostics: dict
    probe_values: np.ndarray | None = None  # (n_probes, n_times) complex, opt-in


# ---------------------------------------------------------------------------
# Real-time propagation
# ---------------------------------------------------------------------------


def _kinetic_apply(psi: np.ndarray, factor: np.ndarray) -> np.ndarray:
    return np.fft.ifft(factor * np.fft.fft(psi))


def evolve(
    state: FieldState,
    scenario: QuenchScenario,
    rng: SeededRng | None = None,
    recorder: RecorderSpec | None = None,
) -> Trajectory:
    """Propagate the GP equation through a quench scenario.

    Strang chain K/2 (P K)^(n-1) P K/2 with the potential factor evaluated
    at each substep midpoint: V(x) * ramp(t) * (1 + eps h(t)) plus the
    pointwise interaction g(x)|psi|^2.  Noise h is piecewise constant over
    the scenario's refresh interval with h ~ Normal(0,1) per hold, so the
    modulation strength eps has a fixed meaning independent of dt; with
    eps=0 no draws are consumed and the run is fully deterministic.
    """
    grid = state.grid
    scenario.check_grid(grid)
    recorder = recorder or RecorderSpec()
    dt = scenario.dt
    nsteps = int(round(scenario.t_max / dt))

    v_pot = scenario.obstacle.potential(grid, scenario.lam)
    g_arr = scenario.obstacle.coupling(grid, scenario.lam)
    sponge = sponge_profile(grid, scenario.sponge)
    has_sponge = scenario.sponge > 0
    if has_sponge:
        sp_idx = np.nonzero(sponge > 0)[0]
        sp_rate = np.exp(-dt * sponge[sp_idx])
        v_eff = grid.snap_velocity(scenario.v)
        sp_ref0 = np.exp(1j * v_eff * grid.x[sp_idx])
        # gauge strip just inside the inlet edge of the layer: the reference
        # inherits the interior's global phase, so only relative deviations
        # (waves, solitons) are damped and no secular phase twist builds up
        inlet = sp_idx[grid.x[sp_idx] < 0][-1]
        gauge_idx = np.arange(inlet + 1, min(inlet + 33, grid.npoints))
        gauge_conj = np.exp(-1j * v_eff * grid.x[gauge_idx])

    kin_half = np.exp(-0.25j * grid.k**2 * dt)
    kin_full = kin_half * kin_half

    gen = (rng or SeededRng(0)).generator() if scenario.noise_eps > 0 else None
    noise_hold = max(int(round(scenario.noise_refresh / dt)), 1)
    h_now = 0.0

    probe_idx = recorder.probe_indices(grid)
    cplx_cols = (
        np.nonzero(np.abs(grid.x) <= recorder.complex_xwindow)[0]
        if recorder.complex_xwindow > 0
        else slice(None)
    )
    probe_t, probe_d, probe_v = [], [], []
    dens_t, dens_f = [], []
    cplx_t, cplx_f = [], []

    psi = state.values.copy()
    t0 = state.t

    def record(step, psi_now):
        t = t0 + step * dt
        if step % max(recorder.probe_stride, 1) == 0:
            vals = psi_now[probe_idx]
            d = np.abs(vals) ** 2
            if not np.all(np.isfinite(d)):
                raise NumericalBlowup(t, float(np.nanmax(np.abs(psi_now))))
            probe_t.append(t)
            probe_d.append(d)
            if recorder.record_complex_probes:
                probe_v.append(vals)
        if recorder.density_stride and step % recorder.density_stride == 0:
            dens_t.append(t)
            dens_f.append(np.abs(psi_now) ** 2)
        if (
            recorder.complex_stride
            and t >= recorder.complex_start - 1e-12
            and step % recorder.complex_stride == 0
        ):
            cplx_t.append(t)
            cplx_f.append(psi_now[cplx_cols].copy())

    record(0, psi)
    needs_record = _record_steps(recorder, nsteps, dt, t0)

    norm0 = float(np.sum(np.abs(psi) ** 2) * grid.dx)

    in_k_split = False
    for step in range(nsteps):
        if not in_k_split:
            psi = _kinetic_apply(psi, kin_half)
            in_k_split = True
        tm = t0 + (step + 0.5) * dt
        r = ramp_envelope(tm, scenario.tau)
        if gen is not None:
            if step % noise_hold == 0:
                h_now = gen.standard_normal()
            f = 1.0 + scenario.noise_eps * h_now
        else:
            f = 1.0
        if scenario.noise_target == "potential":
            v_now = v_pot * (r * f)
            g_now = g_arr
        else:
            v_now = v_pot * r
            g_now = g_arr * f
        dens = psi.real**2 + psi.imag**2
        phase = v_now + g_now * dens
        psi = psi * np.exp(-1j * dt * phase)
        if has_sponge:
            g_ph = np.sum(psi[gauge_idx] * gauge_conj)
            g_ph /= max(abs(g_ph), 1e-300)
            ref = sp_ref0 * g_ph
            psi[sp_idx] = ref + (psi[sp_idx] - ref) * sp_rate
        if step + 1 == nsteps or needs_record[step + 1]:
            psi = _kinetic_apply(psi, kin_half)
            in_k_split = False
            record(step + 1, psi)
        else:
            psi = _kinetic_apply(psi, kin_full)

    if not np.all(np.isfinite(psi.view(np.float64))):
        raise NumericalBlowup(t0 + nsteps * dt, float(np.nanmax(np.abs(psi))))

    final = FieldState(grid, t0 + nsteps * dt, psi)
    norm1 = final.norm()
    diagnostics = {
        "steps": nsteps,
        "norm_initial": norm0,
        "norm_final": norm1,
        "norm_drift": abs(norm1 - norm0) / norm0 if norm0 > 0 else 0.0,
    }
    n_cols = grid.npoints if isinstance(cplx_cols, slice) else len(cplx_cols)
    return Trajectory(
        scenario=scenario,
        grid=grid,
        v_eff=grid.snap_velocity(scenario.v),
        probe_x=grid.x[probe_idx],
        probe_times=np.asarray(probe_t),
        probe_density=np.asarray(probe_d).T if probe_d else np.empty((len(probe_idx), 0)),
        density_times=np.asarray(dens_t),
        density_frames=np.asarray(dens_f) if dens_f else np.empty((0, grid.npoints)),
        complex_times=np.asarray(cplx_t),
        complex_frames=(
            np.asarray(cplx_f) if cplx_f else np.empty((0, n_cols), dtype=complex)
        ),
        complex_x=grid.x[cplx_cols],
        final_state=final,
        diagnostics=diagnostics,
        probe_values=np.asarray(probe_v).T if probe_v else None,
    )


def _record_steps(recorder: RecorderSpec, nsteps: int, dt: float, t0: float) -> np.ndarray:
    steps = np.arange(nsteps + 1)
    mask = steps % max(recorder.probe_stride, 1) == 0
    if recorder.density_stride:
        mask |= steps % recorder.density_stride == 0
    if recorder.complex_stride:
        t = t0 + steps * dt
        mask |= (steps % recorder.complex_stride == 0) & (t >= recorder.complex_start - 1e-12)
    return mask


# ---------------------------------------------------------------------------
# Imaginary-time ground state
# ---------------------------------------------------------------------------


def ground_state(
    potential: np.ndarray,
    lam: float,
    v: float,
    grid: Grid1D,
    dtau: float = 0.05,
    tol: float = 1e-10,
    max_iter: int = 200000,
    target_norm: float | None = None,
) -> FieldState:
    """Lowest stationary state by imaginary-time descent with norm restoration.

    For a flowing condensate (v > 0) the state is written psi = e^{ivx} chi
    and chi is evolved under the gauged kinetic energy (k+v)^2/2, which
    pins the plane-wave phase on the asymptotics while the winding of chi
    stays zero.  The norm is restored to target_norm (default: mean density
    one) after every step; iteration stops when the energy is stationary
    to `tol` between iterations.
    """
    v = grid.snap_velocity(v)
    potential = np.asarray(potential, dtype=np.float64)
    n_target = grid.length if target_norm is None else target_norm
    kin = 0.5 * (grid.k + v) ** 2
    kin_fac = np.exp(-dtau * kin)
    chi = np.ones(grid.npoints, dtype=np.complex128)

    def energy_of(c):
        # energy functional of the gauged field: matches observables() on
        # psi = e^{ivx} chi
        ck = np.fft.fft(c)
        ekin = np.sum(kin * np.abs(ck) ** 2) / grid.npoints**2 * grid.length
        dens = np.abs(c) ** 2
        return float(ekin + np.sum((potential + 0.5 * lam * dens) * dens) * grid.dx)

    e_prev = energy_of(chi)
    for it in range(max_iter):
        chi = np.fft.ifft(kin_fac * np.fft.fft(chi))
        dens = chi.real**2 + chi.imag**2
        chi = chi * np.exp(-dtau * (potential + lam * dens))
        nrm = np.sum(chi.real**2 + chi.imag**2) * grid.dx
        chi *= math.sqrt(n_target / nrm)
        if (it + 1) % 20 == 0:
            e_now = energy_of(chi)
            if abs(e_now - e_prev) <= tol * max(1.0, abs(e_now)):
                break
            e_prev = e_now
    else:
        raise ConvergenceError(
            f"imaginary time did not converge in {max_iter} iterations "
            f"(last dE={abs(e_now - e_prev):.3g})"
        )
    psi = np.exp(1j * v * grid.x) * chi
    return FieldState(grid, 0.0, psi)


def imaginary_time_energies(
    potential: np.ndarray,
    lam: float,
    grid: Grid1D,
    n_iter: int,
    dtau: float = 0.05,
) -> np.ndarray:
    """Energy after each imaginary-time step (v=0), for monotonicity checks."""
    kin_fac = np.exp(-dtau * 0.5 * grid.k**2)
    chi = np.ones(grid.npoints, dtype=np.complex128)
    out = np.empty(n_iter)
    for it in range(n_iter):
        chi = np.fft.ifft(kin_fac * np.fft.fft(chi))
        dens = chi.real**2 + chi.imag**2
        chi = chi * np.exp(-dtau * (potential + lam * dens))
        nrm = np.sum(chi.real**2 + chi.imag**2) * grid.dx
        chi *= math.sqrt(grid.length / nrm)
        state = FieldState(grid, 0.0, chi)
        out[it] = observables(state, potential, lam)["energy"]
    return out


# ---------------------------------------------------------------------------
# Newton solver for stationary solutions
# ---------------------------------------------------------------------------


def _spectral_preconditioner(grid: Grid1D, v: float, shift: float, extra: int = 0):
    """Inverse of the constant-coefficient part (k+v)^2/2 + shift, as a
    LinearOperator on the stacked (Re chi, Im chi [, aux]) vector.  Makes
    Newton-Krylov iteration counts grid-independent."""
    from scipy.sparse.linalg import LinearOperator

    m = grid.npoints
    diag = 1.0 / (0.5 * (grid.k + v) ** 2 + shift)

    def apply(z):
        chi = z[:m] + 1j * z[m : 2 * m]
        chi = np.fft.ifft(diag * np.fft.fft(chi))
        out = np.concatenate([chi.real, chi.imag, z[2 * m :]])
        return out

    n = 2 * m + extra
    return LinearOperator((n, n), matvec=apply)


def stationary_solution(
    guess: FieldState,
    potential: np.ndarray,
    lam: float,
    v: float,
    mu: float | None = None,
    coupling: np.ndarray | None = None,
    f_tol: float = 1e-10,
    max_iter: int = 100,
) -> tuple[FieldState, float]:
    """Stationary GP solution by preconditioned Newton-Krylov on the gauged
    field.

    psi = e^{ivx} chi; the residual is [(k+v)^2/2 + V + g|chi|^2 - mu] chi.
    mu defaults to the homogeneous value v^2/2 + g_edge matching unit
    asymptotic density.  Returns (state, mu); raises ConvergenceError with
    the last residual if Newton diverges.
    """
    grid = guess.grid
    v = grid.snap_velocity(v)
    potential = np.asarray(potential, dtype=np.float64)
    g_arr = (
        np.full(grid.npoints, lam) if coupling is None else np.asarray(coupling, float)
    )
    if mu is None:
        mu = 0.5 * v**2 + float(g_arr[0])  # box edge: x = -L/2
    kin = 0.5 * (grid.k + v) ** 2

    def residual(z):
        chi = z[: grid.npoints] + 1j * z[grid.npoints :]
        res = np.fft.ifft(kin * np.fft.fft(chi))
        res += (potential + g_arr * (chi.real**2 + chi.imag**2) - mu) * chi
        return np.concatenate([res.real, res.imag])

    chi0 = guess.values * np.exp(-1j * v * grid.x)
    z0 = np.concatenate([chi0.real, chi0.imag])
    if np.max(np.abs(residual(z0))) <= f_tol:
        sol = z0
    else:
        precond = _spectral_preconditioner(grid, v, shift=abs(mu) + 2.0 * float(np.max(g_arr)))
        try:
            sol = optimize.newton_krylov(
                residual,
                z0,
                f_tol=f_tol,
                maxiter=max_iter,
                method="lgmres",
                inner_M=precond,
                verbose=0,
            )
        except Exception as exc:  # scipy raises NoConvergence / KrylovFailure
            last = np.max(np.abs(residual(z0)))
            raise ConvergenceError(
                f"Newton did not converge (starting residual {last:.3g}): {exc}"
            ) from exc
    chi = sol[: grid.npoints] + 1j * sol[grid.npoints :]
    psi = np.exp(1j * v * grid.x) * chi
    return FieldState(grid, 0.0, psi), float(mu)


def _polish_eigenstate(
    chi0: np.ndarray,
    potential: np.ndarray,
    lam: float,
    v: float,
    grid: Grid1D,
    norm_target: float,
    f_tol: float = 1e-10,
) -> tuple[np.ndarray, float]:
    """Newton polish of (H_GP - mu) chi = 0 with mu free and the norm pinned.

    The split-step imaginary-time fixed point carries an O(dtau [K,V]) bias
    concentrated at sharp potential edges; this drives the discrete residual
    to round-off.  The augmented unknown vector is (Re chi, Im chi, mu).
    """
    m = grid.npoints
    kin = 0.5 * (grid.k + v) ** 2
    dx = grid.dx

    def residual(z):
        chi = z[:m] + 1j * z[m : 2 * m]
        mu = z[2 * m]
        res = np.fft.ifft(kin * np.fft.fft(chi))
        res += (potential + lam * (chi.real**2 + chi.imag**2) - mu) * chi
        norm_res = (np.sum(chi.real**2 + chi.imag**2) * dx - norm_target) / norm_target
        return np.concatenate([res.real, res.imag, [norm_res]])

    mu0 = 0.0
    h_chi = np.fft.ifft(kin * np.fft.fft(chi0)) + (
        potential + lam * np.abs(chi0) ** 2
    ) * chi0
    nrm = np.sum(np.abs(chi0) ** 2) * dx
    mu0 = float(np.real(np.vdot(chi0, h_chi)) * dx / nrm)
    z0 = np.concatenate([chi0.real, chi0.imag, [mu0]])
    precond = _spectral_preconditioner(grid, v, shift=abs(mu0) + 2.0 * lam + 1.0, extra=1)
    sol = optimize.newton_krylov(
        residual, z0, f_tol=f_tol, maxiter=100, method="lgmres", inner_M=precond
    )
    return sol[:m] + 1j * sol[m : 2 * m], float(sol[2 * m])


def bhl_stationary(
    scenario: QuenchScenario,
    grid: Grid1D,
    n_continuation: int = 12,
    c2_seed: float | None = None,
) -> tuple[FieldState, float]:
    """Unstable stationary laser solution for a square-well scenario.

    Continuation path: start from the flat-profile configuration (where the
    homogeneous flow is an exact stationary solution with a supersonic
    window) and morph (V, g) linearly into the target square well, Newton-
    polishing at every step.  This lands on the dip-shaped supersonic-branch
    solution rather than the ground-state branch.
    """
    if scenario.obstacle.kind != "square":
        raise ValueError("the continuation recipe targets the square-well obstacle")
    lam = scenario.lam
    v = grid.snap_velocity(scenario.v)
    c2 = c2_seed if c2_seed is not None else 0.5 * v / math.sqrt(max(lam, 1e-12))
    fp = ObstacleSpec(kind="flat_bhl", width=scenario.obstacle.width, c2=c2)
    v_fp = fp.potential(grid, lam)
    g_fp = fp.coupling(grid, lam)
    v_sq = scenario.obstacle.potential(grid, lam)
    g_sq = np.full(grid.npoints, lam)
    mu = 0.5 * v**2 + lam

    state = FieldState(grid, 0.0, np.exp(1j * v * grid.x))
    for s in np.linspace(0.0, 1.0, n_continuation + 1)[1:]:
        v_s = (1 - s) * v_fp + s * v_sq
        g_s = (1 - s) * g_fp + s * g_sq
        state, _ = stationary_solution(
            state, v_s, lam, v, mu=mu, coupling=g_s
        )
    return state, mu


# ---------------------------------------------------------------------------
# Initial-state families
# ---------------------------------------------------------------------------


def gray_soliton_factor(
    grid: Grid1D, v_sol: float, x0: float, lam: float = 1.0
) -> np.ndarray:
    """Gray-soliton multiplier on a unit background with sound speed sqrt(lam).

    S = i vbar + gbar tanh(sqrt(lam) gbar (x - x0)), vbar = v_sol/sqrt(lam),
    gbar = sqrt(1 - vbar^2).  Contrast vanishes as v_sol -> sqrt(lam).
    """
    if lam <= 0:
        raise ValueError("a soliton needs interactions (lam > 0)")
    vbar = v_sol / math.sqrt(lam)
    if not 0.0 <= vbar < 1.0:
        raise ValueError("soliton speed must be below the sound speed")
    gbar = math.sqrt(1.0 - vbar**2)
    return 1j * vbar + gbar * np.tanh(math.sqrt(lam) * gbar * (grid.x - x0))


def soliton_ode_residual(
    values: np.ndarray, grid: Grid1D, v_sol: float, lam: float = 1.0
) -> np.ndarray:
    """Residual of the traveling-soliton equation
    S''/2 - i v_sol S' + lam (1 - |S|^2) S on the given profile."""
    d1 = spectral_gradient(values, grid)
    d2 = spectral_gradient(d1, grid)
    return 0.5 * d2 - 1j * v_sol * d1 + lam * (1.0 - np.abs(values) ** 2) * values


def make_initial(
    family: str,
    scenario: QuenchScenario,
    grid: Grid1D,
    rng: SeededRng | None = None,
) -> FieldState:
    """Construct the configured initial state on the grid.

    ihfc: homogeneous flow e^{ivx} (velocity snapped to the box).
    bhl:  unstable stationary solution plus additive complex Gaussian noise
          of per-point standard deviation scenario.bhl_noise.
    sgs:  flowing ground state multiplied by an upstream gray-soliton factor
          of velocity v_sol.
    """
    v = grid.snap_velocity(scenario.v)
    if family == "ihfc":
        return FieldState(grid, 0.0, np.exp(1j * v * grid.x))
    if family == "bhl":
        base, _ = bhl_stationary(scenario, grid)
        gen = (rng or SeededRng(0)).generator()
        amp = scenario.bhl_noise
        noise = amp * (
            gen.standard_normal(grid.npoints) + 1j * gen.standard_normal(grid.npoints)
        ) / math.sqrt(2.0)
        return FieldState(grid, 0.0, base.values + noise)
    if family == "sgs":
        pot = scenario.obstacle.potential(grid, scenario.lam)
        gs = ground_state(pot, scenario.lam, v, grid)
        x0 = scenario.soliton_x0 if scenario.soliton_x0 is not None else -0.25 * grid.length
        fac = gray_soliton_factor(grid, scenario.v_sol, x0, scenario.lam)
        return FieldState(grid, 0.0, gs.values * fac)
    raise ValueError(f"unknown initial family {family!r}")
