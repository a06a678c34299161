"""Period detection, Floquet-component extraction, and truncated
reconstruction of self-oscillating states from recorded trajectory tails.

The analysis is pure: it consumes (times, frames) arrays produced by the
propagator and never touches solver state, so it parallelizes trivially
and can be re-run on serialized trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# Calibrated gates, shared with the phase-scan classifier.
PROMINENCE_THRESHOLD = 0.2  # autocorrelation peak at lag T relative to lag 0
COMB_COVERAGE_MIN = 0.8  # fraction of AC spectral power on the harmonic comb
STATIONARY_RELSTD = 1e-3  # trailing relative std below which a tail is flat


class NoPeriodicity(RuntimeError):
    """Tail is stationary, quasi-periodic, or too short to call periodic."""

    def __init__(self, reason: str, diagnostics: dict | None = None):
        super().__init__(reason)
        self.reason = reason
        self.diagnostics = diagnostics or {}


class PeakOverlap(RuntimeError):
    """Adjacent Floquet lines are unresolvable on the analysis window."""


@dataclass(frozen=True)
class PeriodEstimate:
    period: float
    omega0: float
    confidence: float  # autocorrelation prominence in [0, 1]
    comb_coverage: float
    n_periods: float  # window span in units of the period


@dataclass
class FloquetDecomposition:
    """Result of the component extraction.

    components[i] is the spatial profile at frequency mu + n_values[i]*omega0
    with the convention mu in [0, omega0) and n = 0 carrying maximal power.
    off_peak_residual is defined as the deficit window_norm - sum(powers), so
    the Parseval ledger closes exactly; fit_residual is the relative L2
    misfit of the Floquet model on the analyzed frames.
    """

    period: float
    omega0: float
    mu: float  # reduced to [0, omega0)
    mu_absolute: float  # frequency of the dominant (n = 0) line
    n_values: np.ndarray
    components: np.ndarray  # (2 n_max + 1, M) complex
    powers: np.ndarray
    dx: float
    window_norm: float
    off_peak_residual: float
    fit_residual: float
    t_start: float
    source_times: np.ndarray | None = None
    source_frames: np.ndarray | None = None

    @property
    def frequencies(self) -> np.ndarray:
        """Absolute line positions omega_n = mu_absolute + n * omega0.

        mu_absolute and the reduced mu differ by an integer multiple of
        omega0; the component labels are pinned to the dominant line, so the
        absolute comb is what enters reconstruction.
        """
        return self.mu_absolute + self.n_values * self.omega0

    def component(self, n: int) -> np.ndarray:
        i = int(np.where(self.n_values == n)[0][0])
        return self.components[i]


def _parabolic_vertex(y_m1: float, y_0: float, y_p1: float) -> float:
    """Fractional offset of the vertex of a parabola through three samples."""
    denom = y_m1 - 2.0 * y_0 + y_p1
    if denom == 0:
        return 0.0
    delta = 0.5 * (y_m1 - y_p1) / denom
    return float(np.clip(delta, -0.5, 0.5))


def _detrend(signals: np.ndarray) -> np.ndarray:
    """Remove per-row linear trends (slow upstream filling, box drift)."""
    n = signals.shape[1]
    t = np.arange(n, dtype=float)
    t -= t.mean()
    t2 = float(t @ t)
    out = signals - signals.mean(axis=1, keepdims=True)
    slope = (out @ t) / t2
    return out - slope[:, None] * t


def _mean_autocorrelation(signals: np.ndarray) -> np.ndarray:
    """Unbiased autocorrelation averaged over detrended probe rows."""
    n = signals.shape[1]
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    acc = np.zeros(n)
    for row in _detrend(signals):
        f = np.fft.rfft(row, nfft)
        c = np.fft.irfft(f * np.conj(f), nfft)[:n]
        acc += c
    acc /= np.arange(n, 0, -1)  # unbiased: divide by overlap count
    return acc


def detect_period(
    times: np.ndarray,
    probe_density: np.ndarray,
    prominence_threshold: float = PROMINENCE_THRESHOLD,
    comb_coverage_min: float = COMB_COVERAGE_MIN,
    stationary_relstd: float = STATIONARY_RELSTD,
    min_periods: float = 8.0,
) -> PeriodEstimate:
    """Period of the tail oscillation from probe density time series.

    Steps: detrended mean autocorrelation over probes; dominant positive-lag
    peak, refined by parabolic interpolation; further refined by the mean
    spacing of the spectral lines of the probe signals; a quasi-periodicity
    gate requires most AC spectral power to sit on the harmonic comb.

    Raises NoPeriodicity for stationary tails (relative std below
    `stationary_relstd`), sub-threshold prominence, off-comb power
    (incommensurate tones), or windows shorter than `min_periods` periods.
    """
    times = np.asarray(times, dtype=float)
    sig = np.atleast_2d(np.asarray(probe_density, dtype=float))
    if sig.shape[1] != times.size:
        raise ValueError("probe_density columns must match times")
    if times.size < 16:
        raise NoPeriodicity("window too short", {"n_samples": times.size})
    dt_s = float(np.mean(np.diff(times)))

    rel_std = float(np.max(sig.std(axis=1) / np.maximum(np.abs(sig.mean(axis=1)), 1e-30)))
    if rel_std <= stationary_relstd:
        raise NoPeriodicity("stationary", {"rel_std": rel_std})

    corr = _mean_autocorrelation(sig)
    max_lag = times.size // 2
    c0 = corr[0]
    if c0 <= 0:
        raise NoPeriodicity("degenerate autocorrelation", {"c0": c0})
    c = corr[:max_lag] / c0

    # local maxima at positive lag
    interior = np.arange(2, max_lag - 1)
    peaks = interior[(c[interior] > c[interior - 1]) & (c[interior] >= c[interior + 1])]
    if peaks.size == 0:
        raise NoPeriodicity("no autocorrelation peak", {"rel_std": rel_std})
    c_best = float(np.max(c[peaks]))
    prominence = float(np.clip(c_best, 0.0, 1.0))
    if prominence < prominence_threshold:
        raise NoPeriodicity(
            "prominence below threshold",
            {"prominence": prominence, "rel_std": rel_std},
        )
    span = times[-1] - times[0]

    # candidate fundamentals: every sufficiently tall peak (a strictly
    # periodic signal peaks at all multiples of T, recurrences of distorted
    # states show up elsewhere); the first candidate whose refined harmonic
    # comb captures the line spectrum wins, smallest lag preferred
    cands = [int(p) for p in peaks[c[peaks] >= max(prominence_threshold, 0.5 * c_best)]]
    base = cands[0]
    for mult in (2, 3):
        if base * mult < max_lag - 1 and base * mult not in cands:
            cands.append(base * mult)
    cands = sorted(set(cands))[:10]

    last_diag = {"prominence": prominence}
    for lag in cands:
        lag_ref = lag + _parabolic_vertex(c[lag - 1], c[lag], c[lag + 1])
        period = lag_ref * dt_s
        if span / period < min_periods:
            last_diag = {"n_periods": span / period, "period": period,
                         "prominence": prominence}
            continue
        omega0, coverage = _comb_refine(sig, dt_s, TWO_PI / period)
        period = TWO_PI / omega0
        n_periods = span / period
        if n_periods >= min_periods and coverage >= comb_coverage_min:
            return PeriodEstimate(
                period=period,
                omega0=omega0,
                confidence=float(np.clip(c[lag], 0.0, 1.0)),
                comb_coverage=coverage,
                n_periods=n_periods,
            )
        last_diag = {
            "comb_coverage": coverage,
            "prominence": prominence,
            "period": period,
        }
    raise NoPeriodicity("spectral power off the harmonic comb", last_diag)


def _comb_refine(sig: np.ndarray, dt_s: float, omega0: float) -> tuple[float, float]:
    """Refine omega0 by the spacing of spectral lines; return comb coverage.

    Lines are located by parabolic interpolation near each expected harmonic
    and fitted through the origin (omega_h = h * omega0).  Coverage is the
    power-weighted fraction of the *prominent* spectral lines that sit on
    the refined comb; broadband floor and sub-omega0/2 drift are excluded,
    so stochastic modulation does not mask a genuinely periodic state while
    an incommensurate second tone still shows up as off-comb power.
    """
    n = sig.shape[1]
    power = np.zeros(n // 2 + 1)
    for row in _detrend(sig):
        power += np.abs(np.fft.rfft(row)) ** 2
    freqs = TWO_PI * np.fft.rfftfreq(n, d=dt_s)
    dw = freqs[1]

    num = den = 0.0
    max_harm = int(freqs[-1] / omega0)
    for h in range(1, min(max_harm, 12) + 1):
        target = h * omega0
        lo = max(int((target - omega0 / 4) / dw), 1)
        hi = min(int((target + omega0 / 4) / dw) + 1, power.size - 1)
        if hi <= lo + 1:
            continue
        b = lo + int(np.argmax(power[lo:hi]))
        if 0 < b < power.size - 1:
            off = _parabolic_vertex(power[b - 1], power[b], power[b + 1])
            w_line = (b + off) * dw
            wgt = power[b]
            num += wgt * h * w_line
            den += wgt * h * h
    if den > 0:
        omega0 = num / den

    # prominent lines: local maxima above a small fraction of the strongest
    interior = np.arange(2, power.size - 1)
    line_bins = interior[
        (power[interior] > power[interior - 1]) & (power[interior] >= power[interior + 1])
    ]
    if line_bins.size == 0:
        return omega0, 0.0
    floor = 0.005 * float(np.max(power[line_bins]))
    line_bins = line_bins[power[line_bins] >= floor]
    tol = max(omega0 / 8.0, 2.5 * dw)
    on = off_comb = 0.0
    for b in line_bins:
        w = freqs[b]
        if w < 0.5 * omega0:
            continue  # slow drift, not evidence either way
        h = round(w / omega0)
        if h >= 1 and abs(w - h * omega0) <= tol:
            on += power[b]
        else:
            off_comb += power[b]
    total = on + off_comb
    coverage = on / total if total > 0 else 0.0
    return omega0, coverage


# ---------------------------------------------------------------------------
# Component extraction
# ---------------------------------------------------------------------------


def extract_components(
    times: np.ndarray,
    frames: np.ndarray,
    period: float,
    n_max: int = 8,
    dx: float = 1.0,
    refine_mu: bool = True,
    keep_source: bool = True,
) -> FloquetDecomposition:
    """Floquet components u_n(x) of complex frames known to be T-periodic.

    The window is trimmed to an integer number of periods (flat window, no
    taper).  The dominant line is located on the temporal FFT, fixing the
    quasi-chemical potential mu = omega_dominant mod omega0 with n = 0
    assigned to the maximal-power component; the profiles are then the
    least-squares projection of the frames onto the 2 n_max + 1 Floquet
    exponentials, which is leak-free for arbitrary mu (an integer-period
    DFT window would smear lines that fall between bins).
    """
    times = np.asarray(times, dtype=float)
    frames = np.asarray(frames)
    if frames.ndim != 2 or frames.shape[0] != times.size:
        raise ValueError("frames must be (n_times, n_x) matching times")
    omega0 = TWO_PI / period
    span = times[-1] - times[0]
    n_per = int(math.floor(span / period + 1e-9))
    if n_per < 2:
        raise ValueError("window must span at least two periods")
    if omega0 <= 2.0 * TWO_PI / span:
        raise PeakOverlap(
            f"line spacing {omega0:.3g} unresolvable on a window of span {span:.3g}"
        )
    keep = times - times[0] <= n_per * period + 1e-9
    times = times[keep]
    frames = frames[keep]
    t0 = times[0]

    # dominant line on the temporal FFT; with the e^{-i omega t} convention
    # used everywhere here, fft bin b carries omega = -2 pi f_b
    nt = times.size
    spec = np.fft.fft(frames, axis=0) / nt
    power = (np.abs(spec) ** 2).sum(axis=1) * dx
    freqs = -TWO_PI * np.fft.fftfreq(nt, d=float(np.mean(np.diff(times))))
    b = int(np.argmax(power))
    # parabolic refinement on the circular bin neighborhood
    off = _parabolic_vertex(power[b - 1], power[b], power[(b + 1) % nt])
    w_dom = freqs[b] + off * (freqs[1] - freqs[0])

    def solve(w_center):
        n_vals = np.arange(-n_max, n_max + 1)
        w_n = w_center + n_vals * omega0
        a = np.exp(-1j * np.outer(times - t0, w_n))
        coef, res, *_ = np.linalg.lstsq(a, frames, rcond=None)
        fit = a @ coef
        resid = float(np.linalg.norm(frames - fit) / max(np.linalg.norm(frames), 1e-300))
        return n_vals, coef, resid

    if refine_mu:
        # polish the comb offset by minimizing the least-squares misfit on a
        # column subsample (the time structure is shared by all columns)
        from scipy.optimize import minimize_scalar

        dwb = abs(freqs[1] - freqs[0])
        sub = frames[:, :: max(1, frames.shape[1] // 256)]
        n_sub = np.arange(-n_max, n_max + 1)

        def misfit(delta):
            # parametrized by the offset from the coarse estimate so the
            # minimizer's relative-tolerance floor does not bite near zero
            a = np.exp(-1j * np.outer(times - t0, w_dom + delta + n_sub * omega0))
            cf, *_ = np.linalg.lstsq(a, sub, rcond=None)
            return float(np.linalg.norm(sub - a @ cf))

        res = minimize_scalar(
            misfit,
            bounds=(-0.6 * dwb, 0.6 * dwb),
            method="bounded",
            options={"xatol": 1e-13, "maxiter": 120},
        )
        w_dom = float(w_dom + res.x)
    n_vals, coef, resid = solve(w_dom)

    powers = (np.abs(coef) ** 2).sum(axis=1) * dx
    n_dom = int(np.argmax(powers))
    # near-degenerate dominant peaks: lower |omega| wins
    w_all = w_dom + n_vals * omega0
    near = np.where(powers >= 0.99 * powers[n_dom])[0]
    if near.size > 1:
        n_dom = int(near[np.argmin(np.abs(w_all[near]))])
    if n_vals[n_dom] != 0:
        n_vals, coef, resid = solve(w_all[n_dom])
        powers = (np.abs(coef) ** 2).sum(axis=1) * dx
        w_dom = w_all[n_dom]

    mu = w_dom % omega0

    window_norm = float((np.abs(frames) ** 2).sum() * dx / nt)
    total_comp = float(powers.sum())
    decomp = FloquetDecomposition(
        period=period,
        omega0=omega0,
        mu=float(mu),
        mu_absolute=float(w_dom),
        n_values=n_vals,
        components=np.ascontiguousarray(coef),
        powers=powers,
        dx=dx,
        window_norm=window_norm,
        off_peak_residual=window_norm - total_comp,
        fit_residual=resid,
        t_start=float(t0),
        source_times=times if keep_source else None,
        source_frames=frames if keep_source else None,
    )
    return decomp


def reconstruct(
    decomp: FloquetDecomposition,
    n_trunc: int,
    times: np.ndarray | None = None,
) -> tuple[np.ndarray, float]:
    """Truncated approximant sum_{|n|<=N} u_n e^{-i omega_n t} on the absolute
    comb omega_n = mu_absolute + n * omega0, with its relative L2 error
    against the stored frames over one period.

    Component phases are referenced to the analysis window start (t_start),
    so `times` are absolute trajectory times.
    """
    n_maxed = int(np.max(decomp.n_values))
    if n_trunc > n_maxed:
        raise ValueError(f"n_trunc={n_trunc} exceeds available n_max={n_maxed}")
    if times is None:
        if decomp.source_times is None:
            raise ValueError("no stored frames; pass explicit times")
        m = decomp.source_times - decomp.t_start <= decomp.period + 1e-9
        times = decomp.source_times[m]
    times = np.asarray(times, dtype=float)

    keep = np.abs(decomp.n_values) <= n_trunc
    w_n = decomp.mu_absolute + decomp.n_values[keep] * decomp.omega0
    phases = np.exp(-1j * np.outer(times - decomp.t_start, w_n))
    frames = phases @ decomp.components[keep]

    err = math.nan
    if decomp.source_times is not None:
        # compare on the overlap of requested times with stored frames
        stored_idx, wanted_idx = _match_times(decomp.source_times, times)
        if stored_idx.size:
            ref = decomp.source_frames[stored_idx]
            num = np.linalg.norm(ref - frames[wanted_idx])
            den = np.linalg.norm(ref)
            err = float(num / den) if den > 0 else math.nan
    return frames, err


def _match_times(stored: np.ndarray, wanted: np.ndarray):
    tol = 1e-9 * max(1.0, float(np.max(np.abs(stored))))
    idx = np.searchsorted(stored, wanted)
    idx = np.clip(idx, 0, stored.size - 1)
    ok = np.abs(stored[idx] - wanted) <= tol
    return idx[ok], np.nonzero(ok)[0]


def truncation_error_curve(decomp: FloquetDecomposition, n_list=None) -> dict:
    """e(N) for a list of truncation orders (nonincreasing in N)."""
    if n_list is None:
        n_list = range(int(np.max(decomp.n_values)) + 1)
    return {int(n): reconstruct(decomp, int(n))[1] for n in n_list}


def _second_derivative_stencil(frames: np.ndarray, dx: float) -> np.ndarray:
    """8th-order central second derivative along the last axis.

    Tomography slices are not periodic, so the propagator's spectral rule
    does not apply; the stencil error is far below the fit residuals here.
    """
    c = np.array([-1.0 / 560, 8.0 / 315, -1.0 / 5, 8.0 / 5, -205.0 / 72,
                  8.0 / 5, -1.0 / 5, 8.0 / 315, -1.0 / 560])
    out = np.zeros_like(frames)
    n = frames.shape[-1]
    for i, ci in enumerate(c):
        sh = i - 4
        lo, hi = max(sh, 0), min(n + sh, n)
        out[..., lo - sh : hi - sh] += ci * frames[..., lo:hi]
    return out / dx**2


def component_equation_residual(
    decomp: FloquetDecomposition,
    potential: np.ndarray,
    coupling: np.ndarray | float,
    margin: int = 8,
) -> dict:
    """Residual of the self-consistent component equations on the extracted
    profiles: for each n,
      R_n = [-d_xx/2 + V - mu - n omega0] u_n + sum_{m,k} g u_k^* u_{k+n-m} u_m
    with mu the dominant-line frequency.  Relative size is measured against
    the summed magnitudes of the constituent terms, and `margin` boundary
    points are dropped (one-sided stencils are not worth the noise).

    Returns per-n relative residuals, keyed by component index.
    """
    u = decomp.components
    n_vals = decomp.n_values
    n_max = int(np.max(n_vals))
    g = coupling if np.isscalar(coupling) else np.asarray(coupling)
    dx = decomp.dx
    kin = -0.5 * _second_derivative_stencil(u, dx)
    sl = slice(margin, u.shape[1] - margin)

    idx = {int(n): i for i, n in enumerate(n_vals)}
    out = {}
    for n in n_vals:
        conv = np.zeros(u.shape[1], dtype=np.complex128)
        for m in n_vals:
            for k in n_vals:
                j = int(k + n - m)
                if j in idx:
                    conv += np.conj(u[idx[int(k)]]) * u[idx[j]] * u[idx[int(m)]]
        i = idx[int(n)]
        lin = kin[i] + (potential - decomp.mu_absolute - n * decomp.omega0) * u[i]
        res = lin + g * conv
        scale = (
            np.linalg.norm(kin[i][sl])
            + np.linalg.norm(((potential - decomp.mu_absolute - n * decomp.omega0) * u[i])[sl])
            + np.linalg.norm((g * conv)[sl])
        )
        out[int(n)] = float(np.linalg.norm(res[sl]) / max(scale, 1e-300))
    return out


def spectral_lines(
    times: np.ndarray,
    frames: np.ndarray,
    n_lines: int = 8,
    floor: float = 1e-3,
    dx: float = 1.0,
) -> np.ndarray:
    """Positions of the strongest lines of the temporal spectrum of complex
    frames, refined by parabolic interpolation, strongest first.

    Line positions use the e^{-i omega t} sign convention of the Floquet
    expansion, so a plane wave e^{i(vx - mu t)} shows up at omega = +mu.
    """
    times = np.asarray(times, dtype=float)
    frames = np.asarray(frames)
    nt = times.size
    spec = np.fft.fft(frames, axis=0) / nt
    power = (np.abs(spec) ** 2).sum(axis=1) * dx
    freqs = -TWO_PI * np.fft.fftfreq(nt, d=float(np.mean(np.diff(times))))
    order = np.argsort(freqs)
    freqs, power = freqs[order], power[order]
    peaks = [
        i
        for i in range(1, nt - 1)
        if power[i] > power[i - 1] and power[i] >= power[i + 1]
        and power[i] >= floor * power.max()
    ]
    peaks.sort(key=lambda i: -power[i])
    out = []
    for i in peaks[:n_lines]:
        off = _parabolic_vertex(power[i - 1], power[i], power[i + 1])
        out.append(freqs[i] + off * (freqs[1] - freqs[0]))
    return np.asarray(out)
