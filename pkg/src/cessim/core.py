"""Grids, fields, spectral kernels, and seeded random streams.

Everything downstream (propagators, tomography, ensembles) works on the
uniform periodic grid defined here.  Units throughout the package:
hbar = m = 1, background speed of sound c0 = 1, healing length xi = 1,
so the rescaled wavefunction has background density |psi|^2 ~ 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


class Grid1D:
    """Uniform periodic grid of M points spanning [-L/2, L/2).

    M must be a power of two (>= 16) so the spectral kernels stay fast and
    the FFT layout [0 .. M/2-1, -M/2 .. -1] is unambiguous.
    """

    def __init__(self, length: float, npoints: int):
        if npoints < 16 or (npoints & (npoints - 1)) != 0:
            raise ValueError(f"npoints must be a power of two >= 16, got {npoints}")
        if length <= 0:
            raise ValueError(f"length must be positive, got {length}")
        self.length = float(length)
        self.npoints = int(npoints)
        self.dx = self.length / self.npoints
        self.x = (np.arange(self.npoints) - self.npoints // 2) * self.dx
        # wavenumbers on the standard FFT layout, Delta k = 2 pi / L
        self.k = TWO_PI * np.fft.fftfreq(self.npoints, d=self.dx)

    def __eq__(self, other):
        return (
            isinstance(other, Grid1D)
            and self.length == other.length
            and self.npoints == other.npoints
        )

    def __hash__(self):
        return hash((self.length, self.npoints))

    def __repr__(self):
        return f"Grid1D(length={self.length}, npoints={self.npoints})"

    def snap_velocity(self, v: float) -> float:
        """Nearest flow velocity whose plane wave e^{ivx} is periodic on the box.

        The winding number v*L/(2 pi) must be an integer, so requested
        velocities are quantized in steps of 2 pi / L.
        """
        n = round(v * self.length / TWO_PI)
        return n * TWO_PI / self.length


@dataclass
class FieldState:
    """Complex wavefunction samples on a grid at time t."""

    grid: Grid1D
    t: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != (self.grid.npoints,):
            raise ValueError(
                f"values shape {self.values.shape} does not match grid "
                f"({self.grid.npoints} points)"
            )

    def copy(self) -> "FieldState":
        return FieldState(self.grid, self.t, self.values.copy())

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def norm(self) -> float:
        return float(np.sum(self.density) * self.grid.dx)


@dataclass(frozen=True)
class SeededRng:
    """Deterministic random source addressed by (master seed, stream index).

    Identical (seed, stream) pairs give identical draw sequences on every
    platform and under any worker scheduling, which is what makes sweeps
    and ensembles replayable.
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng([self.seed, self.stream])

    def child(self, stream: int) -> "SeededRng":
        return SeededRng(self.seed, stream)


def forward_transform(state: FieldState) -> np.ndarray:
    """Spectrum of the field on the standard FFT layout (numpy convention).

    inverse_transform(forward_transform(s), s.grid) recovers the input to
    round-off; Parseval holds as sum |psi|^2 dx = sum |psi_k|^2 dx / M.
    """
    return np.fft.fft(state.values)


def inverse_transform(spectrum: np.ndarray, grid: Grid1D, t: float = 0.0) -> FieldState:
    return FieldState(grid, t, np.fft.ifft(spectrum))


def spectral_gradient(values: np.ndarray, grid: Grid1D) -> np.ndarray:
    """d/dx via the spectral derivative; matches the propagator's accuracy."""
    return np.fft.ifft(1j * grid.k * np.fft.fft(values))


def observables(state: FieldState, potential: np.ndarray, lam: float) -> dict:
    """Norm, energy, and mean density of a field in an external potential.

    Energy density: |d psi/dx|^2 / 2 + V |psi|^2 + (lam/2) |psi|^4, summed
    with the Riemann measure dx.  The kinetic term is evaluated spectrally.
    """
    potential = np.asarray(potential, dtype=np.float64)
    if potential.shape != (state.grid.npoints,):
        raise ValueError("potential must be sampled on the state's grid")
    dx = state.grid.dx
    dens = state.density
    grad = spectral_gradient(state.values, state.grid)
    kinetic = 0.5 * np.sum(np.abs(grad) ** 2) * dx
    pot = np.sum(potential * dens) * dx
    inter = 0.5 * lam * np.sum(dens**2) * dx
    norm = float(np.sum(dens) * dx)
    return {
        "norm": norm,
        "energy": float(kinetic + pot + inter),
        "mean_density": norm / state.grid.length,
    }


def chemical_potential(state: FieldState, potential: np.ndarray, lam: float) -> float:
    """GP chemical potential <psi|H_GP|psi> / <psi|psi>.

    Differs from energy per particle: the interaction enters with weight
    lam, not lam/2.
    """
    dx = state.grid.dx
    dens = state.density
    grad = spectral_gradient(state.values, state.grid)
    h_exp = (
        0.5 * np.sum(np.abs(grad) ** 2) + np.sum((potential + lam * dens) * dens)
    ) * dx
    return float(h_exp / state.norm())


def gp_residual(
    state: FieldState, potential: np.ndarray, lam: float, mu: float
) -> np.ndarray:
    """Pointwise residual (H_GP - mu) psi of the time-independent GP equation."""
    psi = state.values
    kin = np.fft.ifft(0.5 * state.grid.k**2 * np.fft.fft(psi))
    return kin + (potential + lam * np.abs(psi) ** 2 - mu) * psi
