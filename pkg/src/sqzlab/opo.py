"""Below-threshold OPO output spectrum with detection loss, plus loss budgeting.

The squeezed / anti-squeezed noise variance at sideband frequency f
(shot-noise units) is the standard single-mode form

    V_-/+ (f) = 1 -/+ 4x / ((1 +/- x)^2 + (2 f / gamma)^2)

with gamma the resonator FWHM linewidth in Hz and x = sqrt(P/P_th) the
normalized pump amplitude.  Imperfect detection mixes in vacuum:
V_det = eta*V + (1 - eta).  Phase jitter is deliberately not modeled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InconsistencyError, ThresholdError

QUADRATURES = ("squeezed", "antisqueezed")


def quadrature_sign(quadrature: str) -> float:
    """-1 for the squeezed quadrature, +1 for the anti-squeezed one."""
    if quadrature == "squeezed":
        return -1.0
    if quadrature == "antisqueezed":
        return 1.0
    raise ValueError(f"unknown quadrature {quadrature!r}; choose from {QUADRATURES}")


@dataclass(frozen=True)
class OpoParams:
    """One squeeze-laser/detector system: linewidth, pump amplitude, efficiency."""

    gamma_fwhm: float  # Hz
    x: float
    eta: float

    def __post_init__(self):
        if not (math.isfinite(self.gamma_fwhm) and self.gamma_fwhm > 0.0):
            raise ValueError(f"gamma_fwhm must be positive, got {self.gamma_fwhm}")
        if not (0.0 <= self.x):
            raise ValueError(f"x must be >= 0, got {self.x}")
        if self.x >= 1.0:
            raise ThresholdError(f"pump amplitude x={self.x} at or above threshold")
        if not (0.0 < self.eta <= 1.0):
            raise ValueError(f"eta must be in (0, 1], got {self.eta}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.gamma_fwhm, self.x, self.eta)


def _check_model_args(gamma_fwhm: float, x: float):
    if not (math.isfinite(gamma_fwhm) and gamma_fwhm > 0.0):
        raise ValueError(f"gamma_fwhm must be positive, got {gamma_fwhm}")
    if x >= 1.0:
        raise ThresholdError(f"pump amplitude x={x} at or above threshold")
    if x < 0.0:
        raise ValueError(f"x must be >= 0, got {x}")


def variance_pure(f, gamma_fwhm: float, x: float, quadrature: str):
    """Lossless spectrum in shot-noise units; scalar or array f (Hz)."""
    _check_model_args(gamma_fwhm, x)
    sign = quadrature_sign(quadrature)
    scalar = np.isscalar(f) or np.ndim(f) == 0
    out = _kernels.detected_variance(np.atleast_1d(np.asarray(f, dtype=np.float64)),
                                     gamma_fwhm, x, 1.0, sign)
    return float(out[0]) if scalar else out


def variance_detected(f, params: OpoParams, quadrature: str):
    """Spectrum after detection loss: eta*V + (1 - eta); scalar or array f."""
    sign = quadrature_sign(quadrature)
    scalar = np.isscalar(f) or np.ndim(f) == 0
    out = _kernels.detected_variance(np.atleast_1d(np.asarray(f, dtype=np.float64)),
                                     params.gamma_fwhm, params.x, params.eta, sign)
    return float(out[0]) if scalar else out


def max_squeezing_db(eta: float) -> float:
    """Loss floor -10*log10(1 - eta): the x->1, f->0 limit of detected squeezing."""
    if not (0.0 < eta) or not math.isfinite(eta):
        raise ValueError(f"eta must be in (0, 1), got {eta}")
    if eta >= 1.0:
        raise ValueError("eta = 1 has no loss floor (unbounded squeezing)")
    return -10.0 * math.log10(1.0 - eta)


def pump_from_antisqueezing(v_plus_db_at_dc: float, eta: float) -> float:
    """Invert the DC anti-squeezing 1 + eta*4x/(1-x)^2 = 10^(v/10) for x in [0, 1).

    The quadratic in x has reciprocal roots; the one below 1 is returned.
    """
    if not (0.0 < eta <= 1.0):
        raise ValueError(f"eta must be in (0, 1], got {eta}")
    if not math.isfinite(v_plus_db_at_dc) or v_plus_db_at_dc <= 0.0:
        raise InconsistencyError(
            f"anti-squeezing must exceed shot noise (v > 0 dB), got {v_plus_db_at_dc}"
        )
    excess = 10.0 ** (v_plus_db_at_dc / 10.0) - 1.0
    # x = (A + 2*eta - 2*sqrt(eta*(eta+A)))/A, rationalized for small A
    x = excess / (excess + 2.0 * eta + 2.0 * math.sqrt(eta * (eta + excess)))
    if not (0.0 <= x < 1.0):
        raise InconsistencyError(
            f"no pump amplitude in [0, 1) reproduces {v_plus_db_at_dc} dB at eta={eta}"
        )
    return x


def squeeze_bandwidth(params: OpoParams, threshold_db: float) -> float:
    """Frequency where detected squeezing falls to ``threshold_db``.

    The detected squeezing is a monotone Lorentzian in f, so the crossing
    is unique; it is found in closed form and is 0 when the threshold
    equals the DC value.
    """
    v_dc = variance_detected(0.0, params, "squeezed")
    dc_db = -10.0 * math.log10(v_dc)
    if threshold_db <= 0.0 or threshold_db > dc_db:
        raise ValueError(
            f"threshold {threshold_db} dB never reached (DC squeezing {dc_db:.4g} dB)"
        )
    v_thr = 10.0 ** (-threshold_db / 10.0)
    omega2 = 4.0 * params.eta * params.x / (1.0 - v_thr) - (1.0 + params.x) ** 2
    return 0.5 * params.gamma_fwhm * math.sqrt(max(omega2, 0.0))


@dataclass(frozen=True)
class LossBudget:
    """Named multiplicative efficiency contributions, optionally vs a fitted eta."""

    components: tuple[tuple[str, float], ...]
    fitted_eta: float | None = None

    def __post_init__(self):
        components = tuple((str(name), float(eff)) for name, eff in self.components)
        for name, eff in components:
            if not (0.0 < eff <= 1.0):
                raise ValueError(f"component {name!r} efficiency {eff} outside (0, 1]")
        if self.fitted_eta is not None and not (0.0 < self.fitted_eta <= 1.0):
            raise ValueError(f"fitted_eta {self.fitted_eta} outside (0, 1]")
        object.__setattr__(self, "components", components)


def loss_budget_product(budget: LossBudget) -> tuple[float, float | None]:
    """Product of the component efficiencies and, when a fitted eta is given,
    the ratio fitted/product (the efficiency left unexplained by the budget)."""
    product = 1.0
    for _, eff in budget.components:
        product *= eff
    residual = None if budget.fitted_eta is None else budget.fitted_eta / product
    return product, residual
