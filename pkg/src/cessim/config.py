"""Flat `section.key = value` configuration with strict validation.

Unknown keys and duplicates are hard errors (no silent typos); every
resolved value, including defaults the user never wrote, is echoed into the
run manifest.  CLI flags mirror the same keys and win over the file.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import Grid1D
from .dynamics import ObstacleSpec, QuenchScenario, RecorderSpec


class ConfigError(ValueError):
    """Carries the offending line number / key for actionable messages."""


def _positive(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _unit(x):
    return 0.0 <= x <= 1.0


def _pow2(x):
    return x >= 16 and (x & (x - 1)) == 0


# key -> (type, default, validator or None, description)
SCHEMA = {
    "grid.L": (float, 819.2, _positive, "box length in healing lengths"),
    "grid.M": (int, 8192, _pow2, "grid points, power of two >= 16"),
    "flow.v": (float, 0.65, _nonneg, "flow velocity in units of c0"),
    "potential.type": (str, "square", None, "square|gaussian|delta|flat_bhl|none"),
    "potential.V0": (float, 1.0, _nonneg, "well depth"),
    "potential.X": (float, 2.0, _positive, "well width"),
    "potential.sigma": (float, 1.0, _positive, "gaussian width"),
    "potential.Z": (float, 0.5, _nonneg, "delta barrier area"),
    "potential.c2": (float, 0.4, _positive, "inner sound speed (flat_bhl)"),
    "ramp.tau": (float, 0.0, _nonneg, "switch-on time; 0 = sudden"),
    "noise.eps": (float, 0.0, _nonneg, "stochastic modulation strength"),
    "noise.target": (str, "potential", None, "potential|coupling"),
    "noise.refresh": (float, 0.1, _positive, "white-noise hold interval"),
    "interaction.lambda": (float, 1.0, _unit, "interaction scale in [0,1]"),
    "initial.family": (str, "ihfc", None, "ihfc|bhl|sgs"),
    "initial.noise": (float, 1e-3, _nonneg, "BHL seed noise amplitude"),
    "initial.v_sol": (float, 0.5, lambda x: 0 <= x < 1, "SGS soliton speed"),
    "run.t_max": (float, 450.0, _nonneg, "integration time"),
    "run.dt": (float, 2e-3, _positive, "time step"),
    "run.seed": (int, 0, None, "master seed"),
    "run.sponge": (float, 0.0, _nonneg, "absorbing layer strength; 0 = closed box"),
    "recorder.probe_stride": (int, 25, _positive, "steps between probe samples"),
    "recorder.density_stride": (int, 0, _nonneg, "steps between density frames; 0 off"),
    "recorder.complex_stride": (int, 0, _nonneg, "steps between complex frames; 0 off"),
    "recorder.complex_start": (float, 0.0, _nonneg, "first time with complex frames"),
    "recorder.complex_xwindow": (float, 0.0, _nonneg, "|x| cut for complex frames; 0 full"),
    "scan.axis": (str, "v", None, "v|depth|width|lam|noise_eps"),
    "scan.min": (float, 0.3, None, "axis start"),
    "scan.max": (float, 1.2, None, "axis end"),
    "scan.steps": (int, 8, _positive, "number of points"),
    "scan.axis2": (str, "", None, "optional second axis"),
    "scan.min2": (float, 0.5, None, "second axis start"),
    "scan.max2": (float, 3.0, None, "second axis end"),
    "scan.steps2": (int, 8, _positive, "second axis points"),
    "scan.workers": (int, 1, _positive, "worker processes"),
    "scan.transient_frac": (float, 0.4, _unit, "discarded fraction of the window"),
    "scan.fit": (int, 0, _nonneg, "1 = fit a critical power law to a 1D scan"),
    "tomography.n_max": (int, 8, _positive, "Floquet component cut"),
    "tomography.window_start": (float, -1.0, None, "analysis start; <0 = auto"),
    "tomography.window_end": (float, -1.0, None, "analysis end; <0 = auto"),
    "tomography.xwindow": (float, 80.0, _positive, "|x| window for components"),
    "bdg.M": (int, 256, _pow2, "monodromy grid points (<= 512)"),
    "bdg.L": (float, 25.6, _positive, "monodromy box length"),
    "bdg.steps": (int, 4000, _positive, "steps per period"),
    "bdg.period": (float, 2.0, _positive, "artificial period (homogeneous)"),
    "wigner.trajectories": (int, 100, _positive, "ensemble size"),
    "wigner.k_cut": (float, 5.0, _positive, "mode cutoff"),
    "wigner.n_total": (float, 1e6, _positive, "condensate particle number"),
    "wigner.conserving": (int, 1, _nonneg, "1 = number-conserving sampling"),
    "wigner.mode": (str, "equilibrium", None, "equilibrium|dynamics"),
    "wigner.pair_a": (float, -100.0, None, "correlator probe x_a"),
    "wigner.pair_b": (float, 100.0, None, "correlator probe x_b"),
    "wigner.probe_stride": (int, 100, _positive, "steps between correlator samples"),
    "lattice.model": (str, "gp", None, "gp|gutzwiller"),
    "lattice.sites": (int, 8, _positive, "ring size"),
    "lattice.t_hop": (float, 1.0, None, "hopping amplitude"),
    "lattice.mu": (float, 0.0, None, "chemical potential"),
    "lattice.U": (float, 0.1, _nonneg, "on-site interaction"),
    "lattice.n_max": (int, 16, _positive, "Fock truncation (gutzwiller)"),
    "lattice.filling": (float, 1.0, _positive, "mean filling"),
    "lattice.t_max": (float, 10.0, _positive, "integration time"),
    "lattice.dt": (float, 1e-3, _positive, "time step"),
    "theory.table": (str, "bound_states", None, "bound_states|modes|phase|fg|coherence"),
    "theory.V0": (float, 1.0, _positive, "well depth"),
    "theory.X": (float, 2.0, _positive, "well width"),
    "theory.n0": (float, 50.0, _positive, "density n0 xi"),
    "theory.Temp": (float, 0.0, _nonneg, "temperature (0 allowed)"),
    "theory.x": (float, 100.0, None, "separation / argument"),
    "theory.t": (float, 0.0, None, "time separation"),
    "theory.kmin": (float, 0.05, _positive, "mode table k start"),
    "theory.kmax": (float, 5.0, _positive, "mode table k end"),
    "theory.kn": (int, 32, _positive, "mode table size"),
}


def parse_config(text: str, overrides: dict | None = None) -> dict:
    """Parse the flat key=value text and apply overrides (CLI flags).

    Returns the fully resolved mapping with defaults filled in.  Raises
    ConfigError with a line number for syntax errors, unknown keys,
    duplicates, type errors, and range violations.
    """
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen[key] = (val, lineno)

    resolved = {}
    for key, (typ, default, check, _help) in SCHEMA.items():
        if key in seen:
            raw_val, lineno = seen[key]
            try:
                value = typ(raw_val)
            except ValueError as exc:
                raise ConfigError(
                    f"line {lineno}: key {key!r} expects {typ.__name__}, got {raw_val!r}"
                ) from exc
            if check is not None and not check(value):
                raise ConfigError(f"line {lineno}: key {key!r} out of range: {value!r}")
            resolved[key] = value
        else:
            resolved[key] = default

    for key, raw_val in (overrides or {}).items():
        if key not in SCHEMA:
            raise ConfigError(f"flag: unknown key {key!r}")
        typ, _, check, _ = SCHEMA[key]
        try:
            value = typ(raw_val)
        except ValueError as exc:
            raise ConfigError(f"flag {key!r} expects {typ.__name__}, got {raw_val!r}") from exc
        if check is not None and not check(value):
            raise ConfigError(f"flag {key!r} out of range: {value!r}")
        resolved[key] = value
    return resolved


def grid_from_config(cfg: dict) -> Grid1D:
    return Grid1D(cfg["grid.L"], cfg["grid.M"])


def obstacle_from_config(cfg: dict) -> ObstacleSpec:
    return ObstacleSpec(
        kind=cfg["potential.type"],
        depth=cfg["potential.V0"],
        width=cfg["potential.X"],
        sigma=cfg["potential.sigma"],
        area=cfg["potential.Z"],
        c2=cfg["potential.c2"],
    )


def scenario_from_config(cfg: dict) -> QuenchScenario:
    return QuenchScenario(
        v=cfg["flow.v"],
        obstacle=obstacle_from_config(cfg),
        tau=cfg["ramp.tau"],
        noise_eps=cfg["noise.eps"],
        noise_target=cfg["noise.target"],
        noise_refresh=cfg["noise.refresh"],
        lam=cfg["interaction.lambda"],
        initial_family=cfg["initial.family"],
        bhl_noise=cfg["initial.noise"],
        v_sol=cfg["initial.v_sol"],
        t_max=cfg["run.t_max"],
        dt=cfg["run.dt"],
        sponge=cfg["run.sponge"],
    )


def recorder_from_config(cfg: dict) -> RecorderSpec:
    return RecorderSpec(
        probe_stride=cfg["recorder.probe_stride"],
        density_stride=cfg["recorder.density_stride"],
        complex_stride=cfg["recorder.complex_stride"],
        complex_start=cfg["recorder.complex_start"],
        complex_xwindow=cfg["recorder.complex_xwindow"],
    )
