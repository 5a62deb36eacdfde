"""Homodyne-detector diagnostics.

Two independent tools live here: the shot-noise linearity test (noise
power vs local-oscillator power on a log-log scale; slope 1 means the
detector is quantum-noise limited, slope 2 means technical noise,
slope < 1 means saturation) and a minimal phase-imbalance response model
that mixes the two quadratures when the electronics delay the two
photodiode voltages differently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyResultError, InsufficientDataError
from .traces import Trace, require_same_grid

VERDICTS = ("shot_limited", "technical", "saturating")

_DB_PER_OCTAVE = 10.0 * math.log10(2.0)


@dataclass(frozen=True)
class LinearityPoint:
    """One rung of the linearity ladder: blocked-signal noise at a given LO power."""

    lo_power: float  # W
    noise: Trace
    dark: Trace

    def __post_init__(self):
        if not (self.lo_power > 0.0 and math.isfinite(self.lo_power)):
            raise ValueError(f"lo_power must be positive, got {self.lo_power}")
        require_same_grid(self.noise, self.dark)


@dataclass(frozen=True)
class LinearityResult:
    exponent: float
    db_per_doubling: float
    frequencies: np.ndarray  # band frequencies used
    per_freq_exponents: np.ndarray  # NaN where any power level corrected to <= 0
    band: tuple[float, float]
    n_powers: int


def linearity_fit(points, f_band: tuple[float, float]) -> LinearityResult:
    """Log-log slope of band-averaged dark-corrected noise vs LO power.

    Band averaging happens on linear powers before the regression; the
    per-frequency slopes are also returned so narrow pickup lines stand
    out.
    """
    points = list(points)
    if len({p.lo_power for p in points}) < 2:
        raise InsufficientDataError("need at least 2 distinct LO power levels")
    for p in points[1:]:
        require_same_grid(points[0].noise, p.noise)

    lo, hi = f_band
    freqs = points[0].noise.frequencies
    in_band = (freqs >= lo) & (freqs <= hi)
    if not np.any(in_band):
        raise InsufficientDataError(f"no samples inside band [{lo:g}, {hi:g}] Hz")

    corrected = np.vstack(
        [
            10.0 ** (p.noise.powers[in_band] / 10.0)
            - 10.0 ** (p.dark.powers[in_band] / 10.0)
            for p in points
        ]
    )
    band_mean = corrected.mean(axis=1)
    if np.any(band_mean <= 0.0):
        raise EmptyResultError("dark-corrected band average non-positive at some LO power")

    log_p = np.log10([p.lo_power for p in points])
    exponent = float(np.polyfit(log_p, np.log10(band_mean), 1)[0])

    per_freq = np.full(corrected.shape[1], np.nan)
    ok = np.all(corrected > 0.0, axis=0)
    if np.any(ok):
        logc = np.log10(corrected[:, ok])
        design = np.vstack([log_p, np.ones_like(log_p)]).T
        slopes, _, _, _ = np.linalg.lstsq(design, logc, rcond=None)
        per_freq[ok] = slopes[0]

    return LinearityResult(
        exponent=exponent,
        db_per_doubling=exponent * _DB_PER_OCTAVE,
        frequencies=freqs[in_band],
        per_freq_exponents=per_freq,
        band=(float(lo), float(hi)),
        n_powers=len(points),
    )


def saturation_verdict(exponent: float, tol: float = 0.05) -> str:
    """Classify the linearity exponent: ~1 shot-limited, >1 technical, <1 saturating."""
    if not math.isfinite(exponent):
        raise ValueError("exponent must be finite")
    if abs(exponent - 1.0) <= tol:
        return "shot_limited"
    if exponent < 1.0 - tol:
        return "saturating"
    return "technical"


@dataclass(frozen=True)
class ImbalanceModel:
    """Inter-channel phase error delta(f): linear slope plus one electronic resonance.

    delta(f) = slope*f + amplitude * f*f0 / ((f0^2 - f^2)^2 + (f*width)^2)

    The peak phase error at resonance is amplitude/(f0*width^2)*f0^2 =
    amplitude/width^2.  Parameter values are illustrative defaults for
    the simulator, not calibrated quantities.
    """

    slope: float = 0.0  # rad/Hz
    amplitude: float = 0.0
    f0: float = 1e9  # Hz
    width: float = 5e7  # Hz

    def __post_init__(self):
        if not self.f0 > 0.0:
            raise ValueError(f"f0 must be positive, got {self.f0}")
        if not self.width > 0.0:
            raise ValueError(f"width must be positive, got {self.width}")

    def delta(self, f):
        f = np.asarray(f, dtype=np.float64)
        resonance = self.amplitude * (f * self.f0) / (
            (self.f0**2 - f**2) ** 2 + (f * self.width) ** 2
        )
        out = self.slope * f + resonance
        return float(out) if out.ndim == 0 else out


def apply_imbalance(model: ImbalanceModel, v_sqz, v_anti, f, target: str = "squeezed"):
    """Measured variance when the readout phase error mixes the quadratures.

    V_meas = cos^2(delta/2) * V_target + sin^2(delta/2) * V_orthogonal;
    the pairwise sum over both targets is conserved for any delta.
    """
    v_sqz = np.asarray(v_sqz, dtype=np.float64)
    v_anti = np.asarray(v_anti, dtype=np.float64)
    if np.any(v_sqz <= 0.0) or np.any(v_anti <= 0.0):
        raise ValueError("variances must be positive")
    half = 0.5 * model.delta(f)
    c2, s2 = np.cos(half) ** 2, np.sin(half) ** 2
    if target == "squeezed":
        out = c2 * v_sqz + s2 * v_anti
    elif target == "antisqueezed":
        out = c2 * v_anti + s2 * v_sqz
    else:
        raise ValueError(f"unknown target quadrature {target!r}")
    return float(out) if out.ndim == 0 else out
