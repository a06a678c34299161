"""Lattice realizations of the self-oscillation machinery: discrete GP
evolution, time-dependent Gutzwiller mean field with local Fock truncation,
and the periodicity check of the linearized (BdG-type) operators around a
recorded background.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import NumericalBlowup


class TruncationOverflow(RuntimeError):
    pass


@dataclass(frozen=True)
class LatticeSpec:
    """Hopping lattice with on-site interaction.

    hopping[i, j] = t_ij (symmetric); on-site energies eps_i; chemical
    potential mu; interaction U; n_max bounds the local Fock space for
    Gutzwiller evolution.
    """

    hopping: np.ndarray
    onsite: np.ndarray
    mu: float = 0.0
    interaction: float = 0.0
    n_max: int = 8

    def __post_init__(self):
        t = np.asarray(self.hopping, dtype=float)
        e = np.asarray(self.onsite, dtype=float)
        if t.ndim != 2 or t.shape[0] != t.shape[1] or t.shape[0] != e.size:
            raise ValueError("hopping must be square and match onsite length")
        if not np.allclose(t, t.T):
            raise ValueError("hopping matrix must be symmetric")
        if self.n_max < 2:
            raise ValueError("n_max must be >= 2")
        object.__setattr__(self, "hopping", t)
        object.__setattr__(self, "onsite", e)

    @property
    def n_sites(self) -> int:
        return self.onsite.size

    @classmethod
    def ring(cls, n_sites: int, t_hop: float, mu: float = 0.0,
             interaction: float = 0.0, n_max: int = 8) -> "LatticeSpec":
        t = np.zeros((n_sites, n_sites))
        for i in range(n_sites):
            t[i, (i + 1) % n_sites] = t_hop
            t[(i + 1) % n_sites, i] = t_hop
        return cls(t, np.zeros(n_sites), mu, interaction, n_max)


@dataclass
class LatticeTrajectory:
    times: np.ndarray
    frames: np.ndarray  # (n_times, n_sites) complex amplitudes / order params
    norms: np.ndarray
    energies: np.ndarray | None = None
    extras: dict = field(default_factory=dict)


def _gp_rhs(psi: np.ndarray, spec: LatticeSpec) -> np.ndarray:
    h_psi = -spec.hopping @ psi + (
        spec.onsite - spec.mu + spec.interaction * np.abs(psi) ** 2
    ) * psi
    return -1j * h_psi


def discrete_gp_energy(psi: np.ndarray, spec: LatticeSpec) -> float:
    dens = np.abs(psi) ** 2
    hop = -np.real(np.conj(psi) @ (spec.hopping @ psi))
    return float(
        hop + np.sum((spec.onsite - spec.mu) * dens) + 0.5 * spec.interaction * np.sum(dens**2)
    )


def evolve_discrete_gp(
    psi0: np.ndarray,
    spec: LatticeSpec,
    t_max: float,
    dt: float,
    sample_stride: int = 10,
) -> LatticeTrajectory:
    """Classic fourth-order Runge-Kutta on the discrete GP equation."""
    psi = np.asarray(psi0, dtype=np.complex128).copy()
    if psi.shape != (spec.n_sites,):
        raise ValueError("psi0 must have one amplitude per site")
    nsteps = int(round(t_max / dt))
    times, frames, norms, energies = [], [], [], []

    def sample(step):
        t = step * dt
        if not np.all(np.isfinite(psi.view(np.float64))):
            raise NumericalBlowup(t, float(np.nanmax(np.abs(psi))))
        times.append(t)
        frames.append(psi.copy())
        norms.append(float(np.sum(np.abs(psi) ** 2)))
        energies.append(discrete_gp_energy(psi, spec))

    sample(0)
    for step in range(nsteps):
        k1 = _gp_rhs(psi, spec)
        k2 = _gp_rhs(psi + 0.5 * dt * k1, spec)
        k3 = _gp_rhs(psi + 0.5 * dt * k2, spec)
        k4 = _gp_rhs(psi + dt * k3, spec)
        psi = psi + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if (step + 1) % sample_stride == 0 or step + 1 == nsteps:
            sample(step + 1)
    return LatticeTrajectory(
        times=np.asarray(times),
        frames=np.asarray(frames),
        norms=np.asarray(norms),
        energies=np.asarray(energies),
    )


# ---------------------------------------------------------------------------
# Gutzwiller evolution
# ---------------------------------------------------------------------------


def order_parameters(c: np.ndarray) -> np.ndarray:
    """Psi_i = sum_n sqrt(n+1) conj(c_{i,n}) c_{i,n+1}."""
    n = np.arange(c.shape[1] - 1)
    return np.sum(np.sqrt(n + 1.0) * np.conj(c[:, :-1]) * c[:, 1:], axis=1)


def coherent_gutzwiller(alphas: np.ndarray, n_max: int) -> np.ndarray:
    """Site-factorized coherent state |alpha_i> truncated at n_max."""
    alphas = np.asarray(alphas, dtype=np.complex128)
    n = np.arange(n_max + 1)
    log_fact = np.cumsum(np.concatenate([[0.0], np.log(np.arange(1, n_max + 1))]))
    c = np.exp(
        -0.5 * np.abs(alphas[:, None]) ** 2
        + n[None, :] * np.log(np.where(alphas[:, None] == 0, 1.0, alphas[:, None]))
        - 0.5 * log_fact[None, :]
    )
    c[alphas == 0] = 0.0
    c[alphas == 0, 0] = 1.0
    nrm = np.sqrt(np.sum(np.abs(c) ** 2, axis=1, keepdims=True))
    return c / nrm


def _gutzwiller_rhs(c: np.ndarray, spec: LatticeSpec) -> np.ndarray:
    n = np.arange(c.shape[1])
    diag = n[None, :] * (spec.onsite[:, None] - spec.mu) + 0.5 * spec.interaction * n[
        None, :
    ] * (n[None, :] - 1)
    psi = order_parameters(c)
    phi = spec.hopping @ psi  # mean field seen by each site
    out = diag * c
    sq = np.sqrt(n[1:])
    # H[n, n-1] = -phi sqrt(n);  H[n, n+1] = -conj(phi) sqrt(n+1)
    out[:, 1:] += -phi[:, None] * sq[None, :] * c[:, :-1]
    out[:, :-1] += -np.conj(phi)[:, None] * sq[None, :] * c[:, 1:]
    return -1j * out


def evolve_gutzwiller(
    c0: np.ndarray,
    spec: LatticeSpec,
    t_max: float,
    dt: float,
    sample_stride: int = 10,
    leak_limit: float = 1e-3,
) -> LatticeTrajectory:
    """RK4 on the Gutzwiller equations with the self-consistent mean field
    recomputed at every stage.

    Requires the initial top-level occupancy sum_i |c_{i,n_max}|^2 <= 1e-6;
    raises TruncationOverflow if it ever exceeds `leak_limit`.
    """
    c = np.asarray(c0, dtype=np.complex128).copy()
    if c.ndim != 2 or c.shape[0] != spec.n_sites or c.shape[1] != spec.n_max + 1:
        raise ValueError("c0 must be (n_sites, n_max + 1)")
    top0 = float(np.sum(np.abs(c[:, -1]) ** 2))
    if top0 > 1e-6:
        raise ValueError(
            f"initial top-level occupancy {top0:.2e} exceeds 1e-6; raise n_max"
        )
    nsteps = int(round(t_max / dt))
    times, frames, norms, leaks = [], [], [], []

    def sample(step):
        t = step * dt
        if not np.all(np.isfinite(c.view(np.float64))):
            raise NumericalBlowup(t, float(np.nanmax(np.abs(c))))
        leak = float(np.sum(np.abs(c[:, -1]) ** 2))
        if leak > leak_limit:
            raise TruncationOverflow(
                f"top-level occupancy {leak:.2e} at t={t:.4g} exceeds {leak_limit:.0e}"
            )
        times.append(t)
        frames.append(order_parameters(c))
        norms.append(float(np.min(np.sum(np.abs(c) ** 2, axis=1))))
        leaks.append(leak)

    sample(0)
    for step in range(nsteps):
        k1 = _gutzwiller_rhs(c, spec)
        k2 = _gutzwiller_rhs(c + 0.5 * dt * k1, spec)
        k3 = _gutzwiller_rhs(c + 0.5 * dt * k2, spec)
        k4 = _gutzwiller_rhs(c + dt * k3, spec)
        c = c + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if (step + 1) % sample_stride == 0 or step + 1 == nsteps:
            sample(step + 1)
    return LatticeTrajectory(
        times=np.asarray(times),
        frames=np.asarray(frames),
        norms=np.asarray(norms),
        extras={"leakage": np.asarray(leaks), "coefficients": c},
    )


# ---------------------------------------------------------------------------
# Discrete BdG periodicity check
# ---------------------------------------------------------------------------


def discrete_bdg_periodicity(
    times: np.ndarray,
    frames: np.ndarray,
    period: float,
    spec: LatticeSpec,
    mu: float = 0.0,
) -> dict:
    """Max entry mismatch of the linearized operators between t and t + T.

    N(t) carries the background only through 2 U |u_i(t)|^2 on the diagonal
    and A_i(t) = U u_i(t)^2, where u is the periodic envelope: pass the
    rotation rate mu to strip the e^{-i mu t} phase off raw frames.  Frames
    are matched to the nearest recorded time (the stride bounds the error).
    """
    times = np.asarray(times, dtype=float)
    frames = np.asarray(frames)
    if mu != 0.0:
        frames = frames * np.exp(1j * mu * times)[:, None]
    u = spec.interaction
    worst_n = worst_a = 0.0
    stride = float(np.mean(np.diff(times)))
    n_shift = int(round(period / stride))
    if n_shift < 1 or n_shift >= len(times):
        raise ValueError("period outside the recorded span")
    pairs = 0
    for i in range(len(times) - n_shift):
        f0, f1 = frames[i], frames[i + n_shift]
        worst_n = max(worst_n, 2.0 * u * float(np.max(np.abs(np.abs(f1) ** 2 - np.abs(f0) ** 2))))
        worst_a = max(worst_a, u * float(np.max(np.abs(f1**2 - f0**2))))
        pairs += 1
    return {
        "max_n_mismatch": worst_n,
        "max_a_mismatch": worst_a,
        "pairs_compared": pairs,
        "time_alignment_error": abs(n_shift * stride - period),
    }
