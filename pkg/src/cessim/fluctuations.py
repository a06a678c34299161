"""Linearized fluctuations around periodic backgrounds (one-period monodromy,
quasi-energy spectra) and stochastic phase-space sampling of the initial
quantum noise (Truncated Wigner) with streaming correlation estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import FieldState, Grid1D, SeededRng
from .dynamics import QuenchScenario, RecorderSpec, evolve
from .theory import dispersion
from .tomography import FloquetDecomposition

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# BdG generator and one-period monodromy
# ---------------------------------------------------------------------------


class BdgGenerator:
    """Periodic linearization data around a Floquet background.

    The background enters through the periodic envelope u(x,t) (the field
    with its dominant-line phase removed) and the rotation rate mu, so that
      N(t) = -d_xx/2 + V + 2 g |u|^2 - mu,   A(t) = g u^2
    are T-periodic by construction.
    """

    def __init__(
        self,
        grid: Grid1D,
        potential: np.ndarray,
        coupling: np.ndarray | float,
        period: float,
        mu: float,
        envelope,
    ):
        self.grid = grid
        self.potential = np.asarray(potential, dtype=np.float64)
        self.coupling = (
            np.full(grid.npoints, float(coupling))
            if np.isscalar(coupling)
            else np.asarray(coupling, dtype=np.float64)
        )
        self.period = float(period)
        self.mu = float(mu)
        self._envelope = envelope

    @classmethod
    def from_decomposition(
        cls,
        decomp: FloquetDecomposition,
        grid: Grid1D,
        potential: np.ndarray,
        coupling: np.ndarray | float,
    ) -> "BdgGenerator":
        n_vals = decomp.n_values
        comps = decomp.components

        def envelope(t):
            phases = np.exp(-1j * n_vals * decomp.omega0 * (t - decomp.t_start))
            return phases @ comps

        return cls(grid, potential, coupling, decomp.period, decomp.mu_absolute, envelope)

    @classmethod
    def homogeneous(
        cls, grid: Grid1D, v: float, lam: float = 1.0, period: float = 2.0
    ) -> "BdgGenerator":
        """Uniform flowing background; any artificial period works since the
        envelope e^{ivx} is time-independent."""
        v = grid.snap_velocity(v)
        mu = 0.5 * v**2 + lam
        u = np.exp(1j * v * grid.x)

        def envelope(t):
            return u

        return cls(grid, np.zeros(grid.npoints), lam, period, mu, envelope)

    def envelope_at(self, t: float) -> np.ndarray:
        return self._envelope(t)


@dataclass
class QuasiEnergySpectrum:
    """Eigendata of the one-period propagator of the BdG equations."""

    period: float
    omega0: float
    multipliers: np.ndarray  # eigenvalues z of the monodromy
    quasi_energies: np.ndarray  # complex: Re in (-omega0/2, omega0/2], Im = growth
    bogoliubov_norms: np.ndarray  # int (|phi|^2 - |chi|^2) dx per eigenvector
    goldstone_residual: float
    pairing_defect: float  # max over z of min_w |w - 1/conj(z)|


def monodromy_spectrum(
    gen: BdgGenerator,
    steps_per_period: int = 2000,
    compute_vectors: bool = True,
) -> QuasiEnergySpectrum:
    """Propagate a full basis over one period and eigendecompose.

    Strang splitting with the kinetic half applied spectrally and the local
    2x2 block [[W, A], [-A*, -W]] exponentiated in closed form; both factors
    respect the particle-hole structure, so the multiplier pairing
    (z, 1/z*) survives to round-off.  Dense route, meant for grids with
    M <= 512.
    """
    grid = gen.grid
    m = grid.npoints
    if m > 512:
        raise ValueError("dense monodromy is limited to grids with <= 512 points")
    dt = gen.period / steps_per_period
    kin = 0.5 * grid.k**2
    kin_half_top = np.exp(-0.5j * kin * dt)
    kin_half_bot = np.conj(kin_half_top)

    z = np.eye(2 * m, dtype=np.complex128)
    top, bot = z[:m], z[m:]

    def kinetic_half(top, bot):
        top = np.fft.ifft(kin_half_top[:, None] * np.fft.fft(top, axis=0), axis=0)
        bot = np.fft.ifft(kin_half_bot[:, None] * np.fft.fft(bot, axis=0), axis=0)
        return top, bot

    for j in range(steps_per_period):
        tm = (j + 0.5) * dt
        u = gen.envelope_at(tm)
        w = gen.potential + 2.0 * gen.coupling * (u.real**2 + u.imag**2) - gen.mu
        a = gen.coupling * u * u
        s = np.sqrt((w * w - np.abs(a) ** 2).astype(np.complex128))
        sd = s * dt
        cos_f = np.cos(sd)
        small = np.abs(sd) < 1e-8
        sinc_f = np.where(small, dt * (1.0 - sd * sd / 6.0), np.sin(sd) / np.where(small, 1.0, s))

        top, bot = kinetic_half(top, bot)
        new_top = cos_f[:, None] * top - 1j * sinc_f[:, None] * (
            w[:, None] * top + a[:, None] * bot
        )
        new_bot = cos_f[:, None] * bot - 1j * sinc_f[:, None] * (
            -np.conj(a)[:, None] * top - w[:, None] * bot
        )
        top, bot = kinetic_half(new_top, new_bot)

    mono = np.vstack([top, bot])
    if compute_vectors:
        vals, vecs = np.linalg.eig(mono)
        phi, chi = vecs[:m], vecs[m:]
        bnorms = ((np.abs(phi) ** 2 - np.abs(chi) ** 2).sum(axis=0) * grid.dx).real
    else:
        vals = np.linalg.eigvals(mono)
        bnorms = np.full(2 * m, np.nan)

    omega0 = TWO_PI / gen.period
    # z = exp(-i eps T): Re eps = -arg(z)/T lands in the reduced zone by the
    # principal branch; Im eps = ln|z|/T is the Floquet growth rate
    quasi = (-np.angle(vals) + 1j * np.log(np.abs(vals))) / gen.period

    u0 = gen.envelope_at(0.0)
    z0 = np.concatenate([u0, -np.conj(u0)])
    gres = float(np.linalg.norm(mono @ z0 - z0) / np.linalg.norm(z0))

    inv_conj = 1.0 / np.conj(vals)
    order = np.argsort(vals.real + 1e-9 * vals.imag)
    sorted_vals = vals[order]
    idx = np.searchsorted(sorted_vals.real + 1e-9 * sorted_vals.imag, inv_conj.real + 1e-9 * inv_conj.imag)
    defect = 0.0
    for i, w_t in enumerate(inv_conj):
        j0 = max(idx[i] - 3, 0)
        j1 = min(idx[i] + 3, len(sorted_vals))
        d = np.min(np.abs(sorted_vals[j0:j1] - w_t)) if j1 > j0 else np.inf
        defect = max(defect, float(d))

    return QuasiEnergySpectrum(
        period=gen.period,
        omega0=omega0,
        multipliers=vals,
        quasi_energies=quasi,
        bogoliubov_norms=bnorms,
        goldstone_residual=gres,
        pairing_defect=defect,
    )


def fold_to_zone(omega, omega0: float):
    """Reduce frequencies to the zone (-omega0/2, omega0/2]."""
    w = np.asarray(omega, dtype=float)
    folded = w - omega0 * np.round(w / omega0)
    folded = np.where(np.isclose(folded, -0.5 * omega0), 0.5 * omega0, folded)
    return folded


def homogeneous_quasi_energies(grid: Grid1D, v: float, lam: float, period: float) -> np.ndarray:
    """Closed-form spectrum of the uniform flowing background on the grid.

    The pairing field couples the particle component at grid momentum p to
    the hole component at p - 2v wrapped into the principal band, giving
      omega(p) = (p^2 - q^2)/4 +- sqrt( ((p^2 + q^2)/4 + W)^2 - lam^2 ),
      W = lam - v^2/2,  q = wrap(p - 2v).
    Away from the band edge q = p - 2v and this reduces to the Doppler-
    shifted Bogoliubov branch k v +- Omega_k with k = p - v.  Values are
    folded into (-omega0/2, omega0/2].
    """
    v = grid.snap_velocity(v)
    p = grid.k
    band = TWO_PI / grid.dx
    q = p - 2.0 * v
    q = (q + 0.5 * band) % band - 0.5 * band
    w_diag = lam - 0.5 * v**2
    half_sum = 0.25 * (p**2 + q**2) + w_diag
    half_dif = 0.25 * (p**2 - q**2)
    root = np.sqrt(np.maximum(half_sum**2 - lam**2, 0.0))
    raw = np.concatenate([half_dif + root, half_dif - root])
    return np.sort(fold_to_zone(raw, TWO_PI / period))


# ---------------------------------------------------------------------------
# Truncated Wigner sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WignerEnsembleSpec:
    """Ensemble parameters; temperature is fixed to zero in this package."""

    n_trajectories: int = 100
    k_cut: float = 5.0
    n_total: float = 1e6  # condensate particle number N
    box_length: float = 0.0  # 0 = use the grid length
    number_conserving: bool = True

    def __post_init__(self):
        if self.n_trajectories < 1 or self.k_cut <= 0 or self.n_total <= 0:
            raise ValueError("need n_trajectories >= 1, k_cut > 0, n_total > 0")

    def density(self, grid: Grid1D) -> float:
        length = self.box_length if self.box_length > 0 else grid.length
        return self.n_total / length


class NegativeDensity(RuntimeError):
    pass


def _mode_data(grid: Grid1D, k_cut: float):
    sel = (np.abs(grid.k) < k_cut) & (grid.k != 0.0)
    k = grid.k[sel]
    om = dispersion(k)
    rho = np.sqrt(0.5 * k**2 / om)
    theta = -1j * np.sqrt(0.5 * om / k**2)
    u = (0.5 * k**2 + om) / np.sqrt(2.0 * k**2 * om)
    vv = (0.5 * k**2 - om) / np.sqrt(2.0 * k**2 * om)
    # e^{i k x_j} on the centered grid equals a plain inverse FFT with the
    # alternating-sign correction for the half-box origin shift
    m_idx = np.nonzero(sel)[0]
    signs = np.where(m_idx % 2 == 0, 1.0, -1.0) if grid.npoints % 2 == 0 else None
    return sel, k, om, rho, theta, u, vv, m_idx, signs


def sample_wigner_initial(
    spec: WignerEnsembleSpec,
    v: float,
    grid: Grid1D,
    rng: SeededRng | np.random.Generator,
    max_redraws: int = 100,
) -> tuple[FieldState, dict]:
    """One stochastic initial state of the flowing quasi-condensate.

    Mode amplitudes alpha_k are complex Gaussians with <|alpha_k|^2> = 1/2
    for 0 < |k| < k_cut; density and phase fluctuations are assembled with
    the Bogoliubov weights rho_k, theta_k and the state is
    sqrt(base + dn/n0) e^{ivx} e^{i dtheta}, where base = 1 - N_nc/N in the
    number-conserving variant and 1 otherwise.  A draw whose radicand goes
    negative anywhere is rejected and redrawn (counted in the info dict).
    """
    gen = rng.generator() if isinstance(rng, SeededRng) else rng
    v = grid.snap_velocity(v)
    n0 = spec.density(grid)
    sel, k, om, rho, theta, u, vv, m_idx, signs = _mode_data(grid, spec.k_cut)
    n_modes = k.size
    if n_modes == 0:
        raise ValueError("no modes below k_cut on this grid")
    m = grid.npoints
    length = grid.length

    redraws = 0
    for _ in range(max_redraws):
        alpha = 0.5 * (gen.standard_normal(n_modes) + 1j * gen.standard_normal(n_modes))
        spec_n = np.zeros(m, dtype=np.complex128)
        spec_t = np.zeros(m, dtype=np.complex128)
        corr = signs if signs is not None else 1.0
        spec_n[m_idx] = alpha * rho * corr
        spec_t[m_idx] = alpha * theta * corr
        sum_n = m * np.fft.ifft(spec_n)
        sum_t = m * np.fft.ifft(spec_t)
        dn = np.sqrt(n0 / length) * 2.0 * sum_n.real
        dtheta = (1.0 / np.sqrt(n0 * length)) * 2.0 * sum_t.real

        base = 1.0
        n_nc = 0.0
        if spec.number_conserving:
            n_nc = float(
                np.sum((u**2 + vv**2) * (np.abs(alpha) ** 2 - 0.5) + vv**2)
            )
            base = 1.0 - n_nc / spec.n_total
        radicand = base + dn / n0
        if np.all(radicand >= 0.0):
            psi = np.sqrt(radicand) * np.exp(1j * (v * grid.x + dtheta))
            info = {"redraws": redraws, "n_noncondensed": n_nc, "n_modes": n_modes}
            return FieldState(grid, 0.0, psi), info
        redraws += 1
    raise NegativeDensity(f"radicand stayed negative after {max_redraws} redraws")


# ---------------------------------------------------------------------------
# Ensemble accumulation
# ---------------------------------------------------------------------------


@dataclass
class EnsembleAccumulator:
    """Streaming first/second moments of pair correlators over trajectories.

    merge() is a plain sum of the streaming sums, so combining partial
    ensembles is exactly associative.
    """

    pair_positions: tuple  # ((x_a, x_b), ...)
    times: np.ndarray
    g_sum: np.ndarray  # (n_pairs, n_times) complex sums of psi*(x_a,t) psi(x_b,0)
    g_sqsum: np.ndarray  # same shape, sums of |...|^2
    corr_sum: np.ndarray | None = None  # translation-averaged equal-time G(dx)
    count: int = 0
    failures: int = 0

    @classmethod
    def empty(cls, pair_positions, times, n_x: int = 0) -> "EnsembleAccumulator":
        times = np.asarray(times, dtype=float)
        shape = (len(pair_positions), times.size)
        return cls(
            pair_positions=tuple(map(tuple, pair_positions)),
            times=times,
            g_sum=np.zeros(shape, dtype=np.complex128),
            g_sqsum=np.zeros(shape, dtype=np.float64),
            corr_sum=np.zeros(n_x, dtype=np.complex128) if n_x else None,
        )

    def add_trajectory(self, probe_values: np.ndarray, pair_idx, corr: np.ndarray | None = None):
        ref = probe_values[:, 0]
        for i, (ia, ib) in enumerate(pair_idx):
            g = np.conj(probe_values[ia]) * ref[ib]
            self.g_sum[i] += g
            self.g_sqsum[i] += np.abs(g) ** 2
        if corr is not None and self.corr_sum is not None:
            self.corr_sum += corr
        self.count += 1

    def merge(self, other: "EnsembleAccumulator") -> "EnsembleAccumulator":
        if self.pair_positions != other.pair_positions or self.times.shape != other.times.shape:
            raise ValueError("incompatible accumulators")
        out = EnsembleAccumulator(
            pair_positions=self.pair_positions,
            times=self.times,
            g_sum=self.g_sum + other.g_sum,
            g_sqsum=self.g_sqsum + other.g_sqsum,
            corr_sum=(
                self.corr_sum + other.corr_sum if self.corr_sum is not None else None
            ),
            count=self.count + other.count,
            failures=self.failures + other.failures,
        )
        return out

    def mean(self) -> np.ndarray:
        return self.g_sum / max(self.count, 1)

    def stderr(self) -> np.ndarray:
        n = max(self.count, 1)
        var = self.g_sqsum / n - np.abs(self.g_sum / n) ** 2
        return np.sqrt(np.maximum(var, 0.0) / n)

    def spatial_correlation(self) -> np.ndarray | None:
        if self.corr_sum is None:
            return None
        return self.corr_sum / max(self.count, 1)


def _translation_correlation(psi: np.ndarray) -> np.ndarray:
    """(1/M) sum_x conj(psi(x)) psi(x + dx) for every shift, via FFT."""
    f = np.fft.fft(psi)
    return np.fft.ifft(np.abs(f) ** 2).conj() / psi.size


def run_wigner_ensemble(
    spec: WignerEnsembleSpec,
    scenario: QuenchScenario,
    grid: Grid1D,
    pair_positions,
    rng: SeededRng,
    probe_stride: int = 100,
    collect_spatial: bool = False,
    fluctuations_on: bool = True,
    min_survival: float = 0.9,
) -> EnsembleAccumulator:
    """Evolve an ensemble of sampled initial states and accumulate the pair
    correlators G(x_a, x_b, t, 0) on the recorded time grid.

    Trajectory failures are dropped and counted; the ensemble is rejected if
    fewer than `min_survival` of the trajectories survive.  Stream i uses
    rng.child(i), so results do not depend on scheduling.
    """
    positions = sorted({p for ab in pair_positions for p in ab})
    pos_index = {p: i for i, p in enumerate(positions)}
    pair_idx = [(pos_index[a], pos_index[b]) for a, b in pair_positions]
    rec = RecorderSpec(
        probe_positions=tuple(positions),
        probe_stride=probe_stride,
        record_complex_probes=True,
    )
    nsteps = int(round(scenario.t_max / scenario.dt))
    times = np.arange(0, nsteps + 1, probe_stride) * scenario.dt
    acc = EnsembleAccumulator.empty(
        pair_positions, times, n_x=grid.npoints if collect_spatial else 0
    )
    for i in range(spec.n_trajectories):
        child = rng.child(i)
        try:
            if fluctuations_on:
                state, _ = sample_wigner_initial(spec, scenario.v, grid, child)
            else:
                v = grid.snap_velocity(scenario.v)
                state = FieldState(grid, 0.0, np.exp(1j * v * grid.x))
            corr = _translation_correlation(state.values) if collect_spatial else None
            traj = evolve(state, scenario, child, rec)
            acc.add_trajectory(traj.probe_values, pair_idx, corr)
        except Exception:
            acc.failures += 1
    total = acc.count + acc.failures
    if total and acc.count < min_survival * total:
        raise RuntimeError(
            f"only {acc.count}/{total} trajectories survived (< {min_survival:.0%})"
        )
    return acc


def equilibrium_correlation(
    spec: WignerEnsembleSpec,
    v: float,
    grid: Grid1D,
    rng: SeededRng,
) -> tuple[np.ndarray, np.ndarray]:
    """Translation-averaged equal-time G(dx) of the sampled initial ensemble
    (no evolution; the t = 0 statistics carry the quasi-condensate decay)."""
    acc = np.zeros(grid.npoints, dtype=np.complex128)
    for i in range(spec.n_trajectories):
        state, _ = sample_wigner_initial(spec, v, grid, rng.child(i))
        acc += _translation_correlation(state.values)
    g = acc / spec.n_trajectories
    shifts = np.arange(grid.npoints) * grid.dx
    return shifts, g
