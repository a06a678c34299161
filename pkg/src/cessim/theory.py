"""Closed-form reference results: square-well bound states, Bogoliubov mode
data, and the space-time phase-correlation asymptotics of a quasi-condensate.

These are pure functions with no caching, used as independent oracles by the
numerical modules' tests and exposed on the CLI as the `theory` subcommand.
The symbol T is reserved for the oscillation period everywhere in this
package; temperature is always called Temp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special


# ---------------------------------------------------------------------------
# Bogoliubov modes of the homogeneous condensate (units: hbar = m = c0 = 1)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BogoliubovMode:
    """Mode data at wavenumber k for the homogeneous background."""

    k: float
    omega: float  # dispersion sqrt(k^2 + k^4/4)
    u: float
    v: float
    rho: float  # density-fluctuation weight u + v = sqrt(k^2 / 2 omega)
    theta: complex  # phase-fluctuation weight (u - v) / 2i

    def occupation(self, temp: float) -> float:
        if temp <= 0:
            return 0.0
        return 1.0 / math.expm1(self.omega / temp)


def dispersion(k):
    """Bogoliubov dispersion sqrt(k^2 + k^4/4)."""
    k = np.asarray(k, dtype=np.float64)
    return np.sqrt(k**2 + 0.25 * k**4)


def bogoliubov_mode(k: float) -> BogoliubovMode:
    if k == 0:
        raise ValueError("k = 0 has no Bogoliubov mode (phase zero mode)")
    om = float(dispersion(k))
    u = (0.5 * k**2 + om) / math.sqrt(2.0 * k**2 * om)
    v = (0.5 * k**2 - om) / math.sqrt(2.0 * k**2 * om)
    return BogoliubovMode(
        k=k,
        omega=om,
        u=u,
        v=v,
        rho=u + v,
        theta=(u - v) / 2j,
    )


# ---------------------------------------------------------------------------
# Attractive square well: bound-state energies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WellSpectrum:
    depth: float
    width: float
    energies: tuple  # bound energies E_n < 0, ascending
    count: int


def bound_state_count(depth: float, width: float) -> int:
    """floor(sqrt(2 V0) X / pi) + 1; the 1D attractive well always binds."""
    return int(math.floor(math.sqrt(2.0 * depth) * width / math.pi)) + 1


def _parity_roots(depth: float, width: float, even: bool) -> list:
    # Regularized forms with no tan poles: roots in the inside wavenumber
    #   even:  k sin(k X/2) - kappa cos(k X/2) = 0
    #   odd:   k cos(k X/2) + kappa sin(k X/2) = 0
    # with kappa = sqrt(2 V0 - k^2) and E = k^2/2 - V0.
    kmax = math.sqrt(2.0 * depth)

    def f(k):
        kappa = math.sqrt(max(2.0 * depth - k * k, 0.0))
        half = 0.5 * k * width
        if even:
            return k * math.sin(half) - kappa * math.cos(half)
        return k * math.cos(half) + kappa * math.sin(half)

    ks = np.linspace(1e-12 * kmax, kmax * (1.0 - 1e-12), 20001)
    vals = np.array([f(k) for k in ks])
    roots = []
    for i in range(len(ks) - 1):
        if vals[i] == 0.0:
            roots.append(ks[i])
        elif vals[i] * vals[i + 1] < 0:
            roots.append(optimize.brentq(f, ks[i], ks[i + 1], xtol=1e-14, rtol=1e-15))
    return roots


def bound_states(depth: float, width: float) -> WellSpectrum:
    """Bound energies of V(x) = -depth for |x| < width/2, by bracketed roots
    of both parity branches, cross-checked against the count formula."""
    if depth <= 0 or width <= 0:
        raise ValueError("depth and width must be positive")
    ks = _parity_roots(depth, width, even=True) + _parity_roots(depth, width, even=False)
    energies = sorted(0.5 * k * k - depth for k in ks)
    expected = bound_state_count(depth, width)
    if len(energies) != expected:
        raise RuntimeError(
            f"found {len(energies)} bound states, count formula gives {expected} "
            f"for depth={depth}, width={width}"
        )
    return WellSpectrum(depth=depth, width=width, energies=tuple(energies), count=expected)


def transcendental_residual(energy: float, depth: float, width: float) -> float:
    """Smallest residual of the two parity conditions at a candidate energy.

    Written in the pole-free k-space form so the residual is well defined at
    every E in (-depth, 0).
    """
    k = math.sqrt(2.0 * (energy + depth))
    kappa = math.sqrt(-2.0 * energy)
    half = 0.5 * k * width
    scale = math.hypot(k, kappa)
    even = abs(k * math.sin(half) - kappa * math.cos(half)) / scale
    odd = abs(k * math.cos(half) + kappa * math.sin(half)) / scale
    return min(even, odd)


# ---------------------------------------------------------------------------
# Phase-correlation asymptotics and the f, g integrals
# ---------------------------------------------------------------------------


def f_integral(x: float) -> float:
    """f(x) = int_0^|x| (1 - cos z)/z dz = ln|x| + gamma - Ci(|x|), f(0) = 0.

    Grows logarithmically; controls the T=0 phase variance.
    """
    ax = abs(x)
    if ax == 0.0:
        return 0.0
    _, ci = special.sici(ax)
    return math.log(ax) + np.euler_gamma - ci


def g_integral(x: float) -> float:
    """g(x) = |x| int_0^|x| (1 - cos z)/z^2 dz = |x| Si(|x|) - (1 - cos x).

    Grows linearly, g(x) ~ (pi/2)|x|; controls the thermal phase variance.
    """
    ax = abs(x)
    if ax == 0.0:
        return 0.0
    si, _ = special.sici(ax)
    return ax * si - (1.0 - math.cos(ax))


def special_functions(x: float) -> dict:
    """Quadrature values of the defining integrals for f and g.

    Direct adaptive quadrature; the closed forms above are the fast path and
    agree to quadrature tolerance.  The asymptotes are ln|x| + gamma and
    (pi/2)|x|, accurate to a couple of percent beyond |x| ~ 50.
    """
    ax = abs(x)
    if ax == 0.0:
        return {"f": 0.0, "g": 0.0}
    f_val, _ = integrate.quad(lambda z: (1.0 - math.cos(z)) / z, 0.0, ax, limit=400)
    g_val, _ = integrate.quad(lambda z: (1.0 - math.cos(z)) / z**2, 0.0, ax, limit=400)
    return {"f": f_val, "g": ax * g_val}


def phase_correlation_asymptotics(
    x: float, t: float, n0: float, temp: float = 0.0
) -> dict:
    """Large-separation phase variances of a 1D quasi-condensate.

    Theta0 = ln|x^2 - t^2| / (2 pi n0) diverges logarithmically at Temp = 0;
    the thermal part Theta_T = (Temp / 2 n0)(|x - t| + |x + t|) diverges
    linearly.  The phase commutator decays like |t|^{-1/2} and is reported
    as 0 in this regime.  Also returns the implied attenuation factors
    exp(-Theta/2) of the one-body correlation function.
    """
    if n0 <= 0:
        raise ValueError("n0 must be positive")
    if abs(abs(x) - abs(t)) < 1e-12:
        raise ValueError("light-cone singularity: |x| == |t|")
    theta0 = math.log(abs(x * x - t * t)) / (2.0 * math.pi * n0)
    theta_temp = 0.0
    if temp > 0:
        theta_temp = (temp / (2.0 * n0)) * (abs(x - t) + abs(x + t))
    asymptotic_ok = min(abs(x - t), abs(x + t)) >= 10.0
    return {
        "Theta0": theta0,
        "ThetaT": theta_temp,
        "commutator": 0.0,
        "attenuation0": math.exp(-0.5 * theta0),
        "attenuationT": math.exp(-0.5 * theta_temp),
        "asymptotic_ok": asymptotic_ok,
    }


def zero_temp_phase_integral(x: float, t: float, n0: float) -> float:
    """Defining cut integral for the T=0 phase variance (quadrature oracle).

    Theta0(x,t) = (1/ pi n0) int_{-1}^{1} dk |theta_k|^2 [1 - cos(k x - Omega_k t)]
    with the long-wavelength weight |theta_k|^2 = 1/(2|k|); equals
    [f(x-t) + f(x+t)] / (2 pi n0) exactly.
    """
    return (f_integral(x - t) + f_integral(x + t)) / (2.0 * math.pi * n0)


def thermal_phase_integral(x: float, t: float, n0: float, temp: float) -> float:
    """Thermal counterpart, [g(x-t) + g(x+t)] * Temp / (pi n0)."""
    return temp * (g_integral(x - t) + g_integral(x + t)) / (math.pi * n0)


def coherence_scales(n0: float, temp: float, dim: int = 1) -> dict:
    """Phase-coherence length (1D) and algebraic exponent (2D).

    L_theta = 4 n0 / Temp in code units; eta = Temp / (2 pi n0).  At Temp = 0
    the 1D length is infinite and the 2D exponent vanishes (true long-range
    order in time).
    """
    if dim not in (1, 2):
        raise ValueError("dim must be 1 or 2")
    if temp < 0:
        raise ValueError("temperature must be >= 0")
    if temp == 0:
        return {"L_theta": math.inf, "eta": 0.0, "zero_temperature_order": True}
    return {
        "L_theta": 4.0 * n0 / temp,
        "eta": temp / (2.0 * math.pi * n0),
        "zero_temperature_order": False,
    }
