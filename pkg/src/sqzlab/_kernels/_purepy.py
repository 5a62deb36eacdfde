"""Pure-numpy kernel implementations (fallback when the extension is absent).

Conventions shared with the compiled backend:
  * sign = -1 for the squeezed quadrature, +1 for the anti-squeezed one;
  * the cavity response uses omega = 2*f/gamma with gamma the FWHM
    linewidth in ordinary frequency, so V = 1 + sign*4x/((1-sign*x)^2 + omega^2);
  * detection loss acts as a beamsplitter: V_det = eta*V + (1 - eta);
  * jacobians are of the model in dB, columns ordered (gamma, x, eta).
"""

import numpy as np

BACKEND = "python"

_TEN_OVER_LN10 = 10.0 / np.log(10.0)


def detected_variance(f, gamma, x, eta, sign):
    f = np.asarray(f, dtype=np.float64)
    omega2 = (2.0 * f / gamma) ** 2
    # ratio form of 1 + sign*4x/((1-sign*x)^2 + omega^2); avoids the
    # catastrophic cancellation of the subtractive form near x -> 1
    numer = (1.0 + sign * x) ** 2 + omega2
    denom = (1.0 - sign * x) ** 2 + omega2
    v_pure = numer / denom
    return eta * v_pure + (1.0 - eta)


def model_db(f, gamma, x, eta, sign):
    return 10.0 * np.log10(detected_variance(f, gamma, x, eta, sign))


def model_db_jacobian(f, gamma, x, eta, sign):
    """Model in dB plus its (n, 3) jacobian wrt (gamma, x, eta)."""
    f = np.asarray(f, dtype=np.float64)
    omega2 = (2.0 * f / gamma) ** 2
    numer = (1.0 + sign * x) ** 2 + omega2
    denom = (1.0 - sign * x) ** 2 + omega2
    v_pure = numer / denom
    v_det = eta * v_pure + (1.0 - eta)

    dv_dgamma = 8.0 * sign * x * omega2 / (gamma * denom**2)
    dv_dx = (4.0 * sign * denom + 8.0 * x * (1.0 - sign * x)) / denom**2

    scale = _TEN_OVER_LN10 / v_det
    jac = np.empty((f.size, 3), dtype=np.float64)
    jac[:, 0] = scale * eta * dv_dgamma
    jac[:, 1] = scale * eta * dv_dx
    jac[:, 2] = scale * (v_pure - 1.0)
    return 10.0 * np.log10(v_det), jac
