# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the detected OPO noise spectrum and its jacobian.

Mirrors _purepy exactly; see that module for the conventions.  These
loops sit inside the damped least-squares iteration and the Monte-Carlo
campaigns, where per-call numpy overhead dominates on short grids.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport log, log10

cnp.import_array()

BACKEND = "compiled"

cdef double TEN_OVER_LN10 = 10.0 / log(10.0)


def detected_variance(f, double gamma, double x, double eta, double sign):
    cdef const double[::1] fv = np.ascontiguousarray(f, dtype=np.float64)
    cdef Py_ssize_t n = fv.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    cdef double omega, numer, denom, v_pure
    for i in range(n):
        omega = 2.0 * fv[i] / gamma
        # ratio form avoids cancellation in the squeezed branch near x -> 1
        numer = (1.0 + sign * x) ** 2 + omega * omega
        denom = (1.0 - sign * x) ** 2 + omega * omega
        v_pure = numer / denom
        ov[i] = eta * v_pure + (1.0 - eta)
    return out


def model_db(f, double gamma, double x, double eta, double sign):
    cdef const double[::1] fv = np.ascontiguousarray(f, dtype=np.float64)
    cdef Py_ssize_t n = fv.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    cdef double omega, numer, denom, v_pure
    for i in range(n):
        omega = 2.0 * fv[i] / gamma
        numer = (1.0 + sign * x) ** 2 + omega * omega
        denom = (1.0 - sign * x) ** 2 + omega * omega
        v_pure = numer / denom
        ov[i] = 10.0 * log10(eta * v_pure + (1.0 - eta))
    return out


def model_db_jacobian(f, double gamma, double x, double eta, double sign):
    """Model in dB plus its (n, 3) jacobian wrt (gamma, x, eta)."""
    cdef const double[::1] fv = np.ascontiguousarray(f, dtype=np.float64)
    cdef Py_ssize_t n = fv.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] m = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] jac = np.empty((n, 3), dtype=np.float64)
    cdef double[::1] mv = m
    cdef double[:, ::1] jv = jac
    cdef Py_ssize_t i
    cdef double omega2, numer, denom, v_pure, v_det, scale, one_minus_sx
    for i in range(n):
        omega2 = 2.0 * fv[i] / gamma
        omega2 = omega2 * omega2
        one_minus_sx = 1.0 - sign * x
        numer = (1.0 + sign * x) ** 2 + omega2
        denom = one_minus_sx * one_minus_sx + omega2
        v_pure = numer / denom
        v_det = eta * v_pure + (1.0 - eta)
        scale = TEN_OVER_LN10 / v_det
        jv[i, 0] = scale * eta * 8.0 * sign * x * omega2 / (gamma * denom * denom)
        jv[i, 1] = scale * eta * (4.0 * sign * denom + 8.0 * x * one_minus_sx) / (denom * denom)
        jv[i, 2] = scale * (v_pure - 1.0)
        mv[i] = 10.0 * log10(v_det)
    return m, jac
