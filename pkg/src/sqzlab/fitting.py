"""Damped nonlinear least-squares fit of the OPO spectrum to normalized data.

The cost is the sum of squared dB residuals over both quadratures
jointly (one physical system produced both traces), with uniform
weights.  Bounds are enforced by smooth reparameterization rather than
clipping: the solver iterates in (log gamma, logit x, logit eta) space,
which keeps gamma > 0, x in (0, 1) and eta in (0, 1) without
constraining the linear algebra.  Uncertainties come from the usual
linearized covariance rms^2 * (J^T J)^-1, mapped back through the
transform jacobian.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    DegeneracyError,
    DegeneracyWarning,
    InsufficientDataError,
    NumericError,
)
from .normalize import NormalizedSpectrum
from .opo import OpoParams, pump_from_antisqueezing, quadrature_sign

PARAM_NAMES = ("gamma_fwhm", "x", "eta")

JACOBIAN_MODES = ("analytic", "finite_difference")

_FD_REL_STEP = 1e-6
_COND_SINGULAR = 1e15


@dataclass(frozen=True)
class FitDataset:
    """Joint squeezed/anti-squeezed data with excluded frequency intervals.

    ``antisqueezed`` may be None for diagnostic squeezed-only fits; such
    fits are prone to a pump/efficiency degeneracy and will warn.
    """

    squeezed: NormalizedSpectrum
    antisqueezed: NormalizedSpectrum | None
    mask: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        mask = tuple((float(lo), float(hi)) for lo, hi in self.mask)
        for lo, hi in mask:
            if not lo < hi:
                raise ValueError(f"mask interval ({lo}, {hi}) must satisfy lo < hi")
        object.__setattr__(self, "mask", mask)
        for name, spec in (("squeezed", self.squeezed), ("antisqueezed", self.antisqueezed)):
            if spec is None:
                continue
            n = int(np.count_nonzero(selected_points(spec, mask)))
            if n < 3:
                raise InsufficientDataError(
                    f"{name} spectrum has {n} valid unmasked point(s); need >= 3"
                )

    def quadratures(self):
        """(quadrature name, spectrum) pairs actually present, fixed order."""
        pairs = [("squeezed", self.squeezed)]
        if self.antisqueezed is not None:
            pairs.append(("antisqueezed", self.antisqueezed))
        return pairs


def selected_points(spec: NormalizedSpectrum, mask) -> np.ndarray:
    """Valid points whose frequency falls in no masked interval."""
    use = spec.valid.copy()
    for lo, hi in mask:
        use &= ~((spec.frequencies >= lo) & (spec.frequencies <= hi))
    return use


@dataclass(frozen=True)
class FitOptions:
    max_iter: int = 100
    cost_tol: float = 1e-10
    step_tol: float = 1e-12
    multistart: int = 5
    seed: int = 0
    jacobian: str = "analytic"
    lambda0: float = 1e-3
    cond_warn: float = 1e8


@dataclass(frozen=True)
class FitResult:
    params: OpoParams
    sigma: np.ndarray  # 1-sigma per parameter, order (gamma_fwhm, x, eta)
    covariance: np.ndarray  # 3x3
    rms_residual_db: float
    n_points: int
    converged: bool
    iterations: int
    mask: tuple[tuple[float, float], ...] = ()
    condition_number: float = float("nan")
    cost: float = float("nan")


def _assemble(data: FitDataset):
    """Flatten to (sign, f, y) per quadrature: squeezed ascending f, then anti."""
    parts = []
    for quadrature, spec in data.quadratures():
        use = selected_points(spec, data.mask)
        parts.append(
            (quadrature_sign(quadrature), spec.frequencies[use], spec.rel_power_db[use])
        )
    return parts


def residuals(params: OpoParams, data: FitDataset) -> np.ndarray:
    """data_dB - model_dB for every valid unmasked point, deterministic order."""
    gamma, x, eta = params.as_tuple()
    chunks = [
        y - _kernels.model_db(f, gamma, x, eta, sign) for sign, f, y in _assemble(data)
    ]
    return np.concatenate(chunks)


def _residuals_and_jacobian(params: OpoParams, data: FitDataset):
    gamma, x, eta = params.as_tuple()
    r_chunks, j_chunks = [], []
    for sign, f, y in _assemble(data):
        model, jac = _kernels.model_db_jacobian(f, gamma, x, eta, sign)
        r_chunks.append(y - model)
        j_chunks.append(-jac)  # residual = data - model
    return np.concatenate(r_chunks), np.vstack(j_chunks)


def jacobian(params: OpoParams, data: FitDataset, mode: str = "analytic") -> np.ndarray:
    """d(residual)/d(gamma_fwhm, x, eta) as an (n_points, 3) matrix."""
    if mode not in JACOBIAN_MODES:
        raise ValueError(f"unknown jacobian mode {mode!r}; choose from {JACOBIAN_MODES}")
    if mode == "analytic":
        return _residuals_and_jacobian(params, data)[1]
    p0 = np.array(params.as_tuple())
    cols = []
    for k in range(3):
        h = _FD_REL_STEP * abs(p0[k])
        if h == 0.0 or p0[k] + h == p0[k]:
            raise NumericError(
                f"finite-difference step underflow for parameter {PARAM_NAMES[k]}"
            )
        p_hi, p_lo = p0.copy(), p0.copy()
        p_hi[k] += h
        p_lo[k] -= h
        r_hi = residuals(OpoParams(*p_hi), data)
        r_lo = residuals(OpoParams(*p_lo), data)
        cols.append((r_hi - r_lo) / (2.0 * h))
    return np.column_stack(cols)


# ---- smooth bound transforms ----

_T_CLIP = 36.0  # keeps sigmoid comfortably away from exact 0/1


def _sigmoid(t: float) -> float:
    if t >= 0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


def _logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def _to_transformed(params: OpoParams) -> np.ndarray:
    x = min(max(params.x, 1e-9), 1.0 - 1e-9)
    eta = min(max(params.eta, 1e-9), 1.0 - 1e-12)
    return np.array([math.log(params.gamma_fwhm), _logit(x), _logit(eta)])


def _from_transformed(t: np.ndarray) -> OpoParams:
    t = np.clip(t, -_T_CLIP, _T_CLIP)
    return OpoParams(math.exp(t[0]), _sigmoid(t[1]), _sigmoid(t[2]))


def _transform_scale(params: OpoParams) -> np.ndarray:
    """dp/dt along the diagonal: chain factor between the two spaces."""
    return np.array(
        [
            params.gamma_fwhm,
            params.x * (1.0 - params.x),
            params.eta * (1.0 - params.eta),
        ]
    )


def _degenerate_direction(v: np.ndarray) -> str:
    terms = [
        f"{c:+.2f}*{name}" for c, name in zip(v, PARAM_NAMES) if abs(c) >= 0.05
    ]
    return " ".join(terms) if terms else "(numerically null direction)"


def _covariance(params: OpoParams, data: FitDataset, cost: float, n: int, cond_warn: float):
    """rms^2 (J^T J)^-1 in transformed space, mapped back via the chain factors."""
    _, j_phys = _residuals_and_jacobian(params, data)
    scale = _transform_scale(params)
    j_t = j_phys * scale[np.newaxis, :]
    _, s, vt = np.linalg.svd(j_t, full_matrices=False)
    if s[0] == 0.0 or s[-1] == 0.0 or (s[0] / s[-1]) ** 2 > _COND_SINGULAR:
        direction = vt[-1] * scale
        nrm = np.linalg.norm(direction)
        direction = direction / nrm if nrm > 0 else vt[-1]
        raise DegeneracyError(
            "normal matrix singular; ill-constrained direction ~ "
            + _degenerate_direction(direction)
        )
    cond = (s[0] / s[-1]) ** 2
    if cond > cond_warn:
        direction = vt[-1] * scale
        direction = direction / np.linalg.norm(direction)
        warnings.warn(
            f"normal-matrix condition number {cond:.2e}; parameters nearly "
            "confounded along " + _degenerate_direction(direction),
            DegeneracyWarning,
            stacklevel=3,
        )
    dof = n - 3
    s2 = cost / dof if dof > 0 else 0.0
    cov_t = (vt.T * (1.0 / s**2)) @ vt * s2
    cov = (scale[:, np.newaxis] * cov_t) * scale[np.newaxis, :]
    cov = 0.5 * (cov + cov.T)
    return cov, cond


def _lm_minimize(data: FitDataset, init: OpoParams, options: FitOptions):
    """Damped Gauss-Newton in transformed space; objective never increases."""
    t = _to_transformed(init)
    params = _from_transformed(t)
    r, j_phys = _residuals_and_jacobian(params, data)
    cost = float(r @ r)
    lam = options.lambda0
    iterations = 0
    converged = cost == 0.0
    while not converged and iterations < options.max_iter:
        iterations += 1
        j_t = j_phys * _transform_scale(params)[np.newaxis, :]
        a = j_t.T @ j_t
        g = j_t.T @ r
        diag = np.maximum(np.diag(a), 1e-12)
        accepted = False
        for _ in range(50):
            try:
                step = np.linalg.solve(a + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            t_new = np.clip(t + step, -_T_CLIP, _T_CLIP)
            params_new = _from_transformed(t_new)
            r_new = residuals(params_new, data)
            cost_new = float(r_new @ r_new)
            if cost_new <= cost:
                accepted = True
                break
            lam *= 4.0
        if not accepted:
            break
        lam = max(lam / 3.0, 1e-12)
        step_norm = float(np.linalg.norm(t_new - t))
        rel_drop = (cost - cost_new) / cost if cost > 0 else 0.0
        t, params, cost = t_new, params_new, cost_new
        r, j_phys = _residuals_and_jacobian(params, data)
        if cost == 0.0 or rel_drop < options.cost_tol or step_norm < options.step_tol:
            converged = True
    return params, cost, iterations, converged


def fit(
    data: FitDataset,
    init: OpoParams | None = None,
    options: FitOptions | None = None,
) -> FitResult:
    """Joint least-squares fit; falls back to jittered restarts on non-convergence."""
    options = options or FitOptions()
    if init is None:
        init = initial_guess(data)
    n = sum(len(f) for _, f, _ in _assemble(data))

    params, cost, iterations, converged = _lm_minimize(data, init, options)
    best = (cost, 0, params, iterations, converged)
    if not converged and options.multistart > 0:
        rng = np.random.default_rng(options.seed)
        for start in range(1, options.multistart + 1):
            jitter = OpoParams(
                init.gamma_fwhm * math.exp(rng.uniform(-0.35, 0.35)),
                _sigmoid(_logit(min(max(init.x, 1e-6), 1 - 1e-6)) + rng.uniform(-0.8, 0.8)),
                _sigmoid(_logit(min(max(init.eta, 1e-6), 1 - 1e-6)) + rng.uniform(-0.8, 0.8)),
            )
            p_s, c_s, it_s, ok_s = _lm_minimize(data, jitter, options)
            # converged runs beat unconverged ones; then lowest cost, lowest index
            better = (not best[4] and ok_s) or (
                best[4] == ok_s and c_s < best[0]
            )
            if better:
                best = (c_s, start, p_s, it_s, ok_s)
        cost, _, params, iterations, converged = best

    covariance, cond = _covariance(params, data, cost, n, options.cond_warn)
    sigma = np.sqrt(np.maximum(np.diag(covariance), 0.0))
    return FitResult(
        params=params,
        sigma=sigma,
        covariance=covariance,
        rms_residual_db=math.sqrt(cost / n),
        n_points=n,
        converged=converged,
        iterations=iterations,
        mask=data.mask,
        condition_number=cond,
        cost=cost,
    )


def initial_guess(data: FitDataset) -> OpoParams:
    """Heuristic start: x from DC anti-squeezing, eta from the DC squeezing
    floor, gamma from the anti-squeezing half-saturation frequency."""
    sq = data.squeezed
    use_sq = selected_points(sq, data.mask)
    f_sq = sq.frequencies[use_sq]
    y_sq = sq.rel_power_db[use_sq]
    n_dc = max(3, len(f_sq) // 20)
    v_minus_dc = 10.0 ** (float(np.median(y_sq[:n_dc])) / 10.0)

    anti = data.antisqueezed
    if anti is not None:
        use_a = selected_points(anti, data.mask)
        f_a = anti.frequencies[use_a]
        y_a = anti.rel_power_db[use_a]
        n_dc_a = max(3, len(f_a) // 20)
        v_plus_dc_db = float(np.median(y_a[:n_dc_a]))
        x0 = pump_from_antisqueezing(max(v_plus_dc_db, 0.05), 1.0)
        v_pure_dc = 1.0 - 4.0 * x0 / (1.0 + x0) ** 2
        eta0 = (1.0 - v_minus_dc) / (1.0 - v_pure_dc) if v_pure_dc < 1.0 else 0.5
        # half-saturation of the linear anti-squeezing excess fixes the linewidth
        excess = 10.0 ** (y_a / 10.0) - 1.0
        dc_excess = max(float(np.median(excess[:n_dc_a])), 1e-12)
        below = np.nonzero(excess < 0.5 * dc_excess)[0]
        f_half = float(f_a[below[0]]) if below.size else float(f_a[-1])
        gamma0 = 2.0 * f_half / max(1.0 - x0, 1e-3)
    else:
        x0 = 0.9
        eta0 = 1.0 - v_minus_dc
        deficit = 1.0 - 10.0 ** (y_sq / 10.0)
        dc_deficit = max(float(np.median(deficit[:n_dc])), 1e-12)
        below = np.nonzero(deficit < 0.5 * dc_deficit)[0]
        f_half = float(f_sq[below[0]]) if below.size else float(f_sq[-1])
        gamma0 = 2.0 * f_half / (1.0 + x0)

    x0 = min(max(x0, 1e-3), 0.999)
    eta0 = min(max(eta0, 0.05), 0.999)
    gamma0 = min(max(gamma0, 1e-3 * f_sq[-1]), 1e3 * f_sq[-1])
    return OpoParams(gamma0, x0, eta0)


# ---- report rendering ----

def format_pm(value: float, sigma: float, unit: str = "") -> str:
    """Paired value +/- sigma with sigma at two significant digits."""
    suffix = f" {unit}" if unit else ""
    if not math.isfinite(sigma) or sigma < 1e-6:
        return f"{value:.6g} ± <1e-06{suffix}"
    decimals = max(0, 1 - math.floor(math.log10(sigma)))
    return f"{value:.{decimals}f} ± {sigma:.{decimals}f}{suffix}"


def _format_mask(mask) -> str:
    if not mask:
        return "none"
    return ", ".join(f"{lo:g}:{hi:g} Hz" for lo, hi in mask)


def fit_report(result: FitResult) -> str:
    """Human-readable fit summary."""
    p, s = result.params, result.sigma
    lines = ["squeeze-spectrum fit", "===================="]
    if result.converged:
        lines.append(f"converged: yes ({result.iterations} iterations)")
    else:
        lines.append(f"*** NOT CONVERGED after {result.iterations} iterations ***")
    lines.append(
        f"points used: {result.n_points}   rms residual: {result.rms_residual_db:.4g} dB"
    )
    lines.append("gamma_fwhm = " + format_pm(p.gamma_fwhm / 1e9, s[0] / 1e9, "GHz"))
    lines.append("x          = " + format_pm(p.x, s[1]))
    lines.append("eta        = " + format_pm(100.0 * p.eta, 100.0 * s[2], "%"))
    lines.append(f"mask: {_format_mask(result.mask)}")
    lines.append(f"normal-matrix condition number: {result.condition_number:.3g}")
    return "\n".join(lines) + "\n"
