"""Deterministic synthetic measurement campaigns from ground-truth parameters.

The generator writes the same four traces a real campaign records: shot
reference, detector dark noise, and the squeezed / anti-squeezed noise
spectra.  Recorded powers are modeled as optical noise plus electronic
noise in the linear domain, so running the generated traces through
dark correction and shot normalization recovers the detected model
variance exactly when the trace noise is zero.  Trace noise is additive
Gaussian in dB with sigma scaled by 1/sqrt(n_averages); the random
source is numpy's seeded PCG64 generator, deterministic per seed on a
given build.
"""

from __future__ import annotations

import configparser
import io
import math
import os
from dataclasses import dataclass

import numpy as np

from .detector import ImbalanceModel, LinearityPoint
from .errors import TraceParseError
from .opo import OpoParams, variance_detected
from .traces import Trace

# clearance vs frequency: either a constant or two (frequency, dB) anchors
# interpolated linearly in log10(f) and clamped outside
ClearanceSpec = float | tuple[tuple[float, float], tuple[float, float]]


def clearance_at(spec: ClearanceSpec, f) -> np.ndarray:
    f = np.atleast_1d(np.asarray(f, dtype=np.float64))
    if isinstance(spec, (int, float)):
        return np.full_like(f, float(spec))
    (f1, c1), (f2, c2) = spec
    if not (f1 > 0 and f2 > f1):
        raise ValueError("clearance anchors need 0 < f1 < f2")
    t = (np.log10(f) - math.log10(f1)) / (math.log10(f2) - math.log10(f1))
    return c1 + np.clip(t, 0.0, 1.0) * (c2 - c1)


@dataclass(frozen=True)
class Scenario:
    """Ground truth plus measurement-chain settings for one synthetic campaign."""

    params: OpoParams
    grid: np.ndarray  # Hz
    shot_level_dbm: float = -50.0
    dark_clearance_db: ClearanceSpec = 15.0
    trace_noise_sigma_db: float = 0.0
    n_averages: int = 1
    imbalance: ImbalanceModel | None = None
    lo_powers: tuple[float, ...] = ()
    saturation_knee: float | None = None
    seed: int = 0

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=np.float64).copy()
        if grid.ndim != 1 or len(grid) < 2:
            raise ValueError("grid needs at least 2 samples")
        if not np.all(grid > 0) or not np.all(np.diff(grid) > 0):
            raise ValueError("grid must be positive and strictly increasing")
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        if self.trace_noise_sigma_db < 0:
            raise ValueError("trace_noise_sigma_db must be >= 0")
        if self.n_averages < 1:
            raise ValueError("n_averages must be >= 1")
        if np.any(clearance_at(self.dark_clearance_db, grid) <= 0):
            raise ValueError("dark clearance must be positive everywhere")
        lo = tuple(float(p) for p in self.lo_powers)
        if any(p <= 0 for p in lo):
            raise ValueError("lo_powers must be positive")
        object.__setattr__(self, "lo_powers", lo)
        if self.saturation_knee is not None and self.saturation_knee <= 0:
            raise ValueError("saturation_knee must be positive")

    @property
    def noise_sigma_effective(self) -> float:
        return self.trace_noise_sigma_db / math.sqrt(self.n_averages)


@dataclass(frozen=True)
class Campaign:
    shot: Trace
    dark: Trace
    squeezed: Trace
    antisqueezed: Trace
    linearity: tuple[LinearityPoint, ...]


def _mixed_variances(s: Scenario):
    v_sqz = variance_detected(s.grid, s.params, "squeezed")
    v_anti = variance_detected(s.grid, s.params, "antisqueezed")
    if s.imbalance is None:
        return v_sqz, v_anti
    half = 0.5 * s.imbalance.delta(s.grid)
    c2, s2 = np.cos(half) ** 2, np.sin(half) ** 2
    return c2 * v_sqz + s2 * v_anti, c2 * v_anti + s2 * v_sqz


def _noisy(powers_dbm: np.ndarray, sigma: float, rng) -> np.ndarray:
    if sigma == 0.0:
        return powers_dbm
    return powers_dbm + rng.normal(0.0, sigma, powers_dbm.shape)


def generate_campaign(s: Scenario) -> Campaign:
    """All four spectra (plus the linearity ladder when LO powers are given).

    Noise draws happen in a fixed order (shot, dark, squeezed,
    anti-squeezed, then the ladder), so a repeated seed reproduces every
    trace bit for bit.
    """
    rng = np.random.default_rng(s.seed)
    sigma = s.noise_sigma_effective

    shot_lin = 10.0 ** (s.shot_level_dbm / 10.0)
    dark_lin = shot_lin * 10.0 ** (-clearance_at(s.dark_clearance_db, s.grid) / 10.0)
    optical_lin = shot_lin - dark_lin

    v_sqz, v_anti = _mixed_variances(s)
    shot_dbm = np.full_like(s.grid, s.shot_level_dbm)
    dark_dbm = 10.0 * np.log10(dark_lin)
    sqz_dbm = 10.0 * np.log10(optical_lin * v_sqz + dark_lin)
    anti_dbm = 10.0 * np.log10(optical_lin * v_anti + dark_lin)

    # the shot reference is the calibration level and stays clean; the
    # dark and quadrature traces carry the analyzer's dB-domain scatter
    shot = Trace(s.grid, shot_dbm, "shot")
    dark = Trace(s.grid, _noisy(dark_dbm, sigma, rng), "dark")
    squeezed = Trace(s.grid, _noisy(sqz_dbm, sigma, rng), "squeezed")
    antisqueezed = Trace(s.grid, _noisy(anti_dbm, sigma, rng), "antisqueezed")

    linearity = tuple(_linearity_series(s, rng)) if s.lo_powers else ()
    return Campaign(shot, dark, squeezed, antisqueezed, linearity)


def generate_linearity_series(s: Scenario) -> list[LinearityPoint]:
    """Blocked-signal noise ladder over the scenario's LO powers."""
    if not s.lo_powers:
        raise ValueError("scenario has no lo_powers")
    rng = np.random.default_rng(s.seed)
    return list(_linearity_series(s, rng))


def _effective_power(p: float, knee: float | None) -> float:
    # soft compression: linear well below the knee, saturating above it
    if knee is None:
        return p
    return knee * (1.0 - math.exp(-p / knee))


def _linearity_series(s: Scenario, rng):
    sigma = s.noise_sigma_effective
    shot_lin = 10.0 ** (s.shot_level_dbm / 10.0)
    dark_lin = shot_lin * 10.0 ** (-clearance_at(s.dark_clearance_db, s.grid) / 10.0)
    optical_ref = shot_lin - dark_lin
    p_ref = _effective_power(s.lo_powers[0], s.saturation_knee)
    points = []
    for p in s.lo_powers:
        scale = _effective_power(p, s.saturation_knee) / p_ref
        noise_dbm = 10.0 * np.log10(optical_ref * scale + dark_lin)
        dark_dbm = 10.0 * np.log10(dark_lin)
        noise = Trace(s.grid, _noisy(noise_dbm, sigma, rng), f"noise_{p:g}W")
        dark = Trace(s.grid, _noisy(dark_dbm, sigma, rng), f"dark_{p:g}W")
        points.append(LinearityPoint(lo_power=p, noise=noise, dark=dark))
    return points


# ---- scenario file (INI-style key = value with [section] headers) ----

_REQUIRED = {"opo": ("gamma_fwhm_hz", "pump_x", "eta"), "grid": ("start_hz", "stop_hz", "points")}
_KNOWN_KEYS = {
    "opo": {"gamma_fwhm_hz", "pump_x", "eta"},
    "grid": {"start_hz", "stop_hz", "points", "spacing"},
    "noise": {"shot_level_dbm", "clearance_db", "sigma_db", "averages"},
    "imbalance": {"slope_rad_per_hz", "amplitude", "f0_hz", "width_hz"},
    "linearity": {"lo_powers_w", "knee_w"},
    "run": {"seed"},
}


def read_scenario(path) -> Scenario:
    path = os.fspath(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_scenario(fh.read())
    except OSError as exc:
        raise TraceParseError(f"cannot read scenario {path}: {exc}") from exc


def _parse_clearance(raw: str) -> ClearanceSpec:
    if ":" not in raw:
        return float(raw)
    pairs = []
    for chunk in raw.split(","):
        f_str, c_str = chunk.split(":")
        pairs.append((float(f_str), float(c_str)))
    if len(pairs) != 2:
        raise ValueError(f"clearance_db wants one value or two f:db anchors, got {raw!r}")
    return (pairs[0], pairs[1])


def parse_scenario(text: str) -> Scenario:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise TraceParseError(f"scenario syntax error: {exc}") from exc

    for section in cp.sections():
        if section not in _KNOWN_KEYS:
            raise TraceParseError(f"unknown scenario section [{section}]")
        unknown = set(cp[section]) - _KNOWN_KEYS[section]
        if unknown:
            raise TraceParseError(f"unknown key(s) in [{section}]: {sorted(unknown)}")
    for section, keys in _REQUIRED.items():
        if section not in cp:
            raise TraceParseError(f"scenario missing section [{section}]")
        for key in keys:
            if key not in cp[section]:
                raise TraceParseError(f"scenario missing {key} in [{section}]")

    try:
        params = OpoParams(
            gamma_fwhm=cp.getfloat("opo", "gamma_fwhm_hz"),
            x=cp.getfloat("opo", "pump_x"),
            eta=cp.getfloat("opo", "eta"),
        )
        start = cp.getfloat("grid", "start_hz")
        stop = cp.getfloat("grid", "stop_hz")
        points = cp.getint("grid", "points")
        spacing = cp.get("grid", "spacing", fallback="linear")
        if spacing == "linear":
            grid = np.linspace(start, stop, points)
        elif spacing == "log":
            grid = np.geomspace(start, stop, points)
        else:
            raise ValueError(f"spacing must be linear or log, got {spacing!r}")

        shot_level = cp.getfloat("noise", "shot_level_dbm", fallback=-50.0)
        clearance = _parse_clearance(cp.get("noise", "clearance_db", fallback="15"))
        sigma = cp.getfloat("noise", "sigma_db", fallback=0.0)
        averages = cp.getint("noise", "averages", fallback=1)

        imbalance = None
        if "imbalance" in cp:
            imbalance = ImbalanceModel(
                slope=cp.getfloat("imbalance", "slope_rad_per_hz", fallback=0.0),
                amplitude=cp.getfloat("imbalance", "amplitude", fallback=0.0),
                f0=cp.getfloat("imbalance", "f0_hz", fallback=1e9),
                width=cp.getfloat("imbalance", "width_hz", fallback=5e7),
            )

        lo_powers: tuple[float, ...] = ()
        knee = None
        if "linearity" in cp:
            raw = cp.get("linearity", "lo_powers_w", fallback="")
            lo_powers = tuple(float(tok) for tok in raw.replace(",", " ").split())
            if cp.get("linearity", "knee_w", fallback="").strip():
                knee = cp.getfloat("linearity", "knee_w")

        seed = cp.getint("run", "seed", fallback=0)

        return Scenario(
            params=params,
            grid=grid,
            shot_level_dbm=shot_level,
            dark_clearance_db=clearance,
            trace_noise_sigma_db=sigma,
            n_averages=averages,
            imbalance=imbalance,
            lo_powers=lo_powers,
            saturation_knee=knee,
            seed=seed,
        )
    except (ValueError, TypeError) as exc:
        raise TraceParseError(f"bad scenario value: {exc}") from exc


def scenario_to_ini(s: Scenario) -> str:
    """Serialize a scenario back to the INI format (round-trips parse_scenario)."""
    buf = io.StringIO()
    buf.write("[opo]\n")
    buf.write(f"gamma_fwhm_hz = {s.params.gamma_fwhm!r}\n")
    buf.write(f"pump_x = {s.params.x!r}\n")
    buf.write(f"eta = {s.params.eta!r}\n\n")
    buf.write("[grid]\n")
    buf.write(f"start_hz = {s.grid[0]!r}\n")
    buf.write(f"stop_hz = {s.grid[-1]!r}\n")
    buf.write(f"points = {len(s.grid)}\n")
    step = np.diff(s.grid)
    spacing = "linear" if np.allclose(step, step[0]) else "log"
    buf.write(f"spacing = {spacing}\n\n")
    buf.write("[noise]\n")
    buf.write(f"shot_level_dbm = {s.shot_level_dbm!r}\n")
    if isinstance(s.dark_clearance_db, (int, float)):
        buf.write(f"clearance_db = {float(s.dark_clearance_db)!r}\n")
    else:
        (f1, c1), (f2, c2) = s.dark_clearance_db
        buf.write(f"clearance_db = {f1!r}:{c1!r}, {f2!r}:{c2!r}\n")
    buf.write(f"sigma_db = {s.trace_noise_sigma_db!r}\n")
    buf.write(f"averages = {s.n_averages}\n\n")
    if s.imbalance is not None:
        buf.write("[imbalance]\n")
        buf.write(f"slope_rad_per_hz = {s.imbalance.slope!r}\n")
        buf.write(f"amplitude = {s.imbalance.amplitude!r}\n")
        buf.write(f"f0_hz = {s.imbalance.f0!r}\n")
        buf.write(f"width_hz = {s.imbalance.width!r}\n\n")
    if s.lo_powers:
        buf.write("[linearity]\n")
        buf.write("lo_powers_w = " + " ".join(repr(p) for p in s.lo_powers) + "\n")
        if s.saturation_knee is not None:
            buf.write(f"knee_w = {s.saturation_knee!r}\n")
        buf.write("\n")
    buf.write("[run]\n")
    buf.write(f"seed = {s.seed}\n")
    return buf.getvalue()
