"""Closed-form coherence of stationary isotropic sound fields.

Spherically isotropic (diffuse) fields give ``sin(kd)/(kd)``; fields confined
to a plane containing the sensor axis give ``J0(kd)``.  Both special
functions are implemented here so their accuracy can be checked against
independent quadrature.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

_SINC_SERIES_BELOW = 1e-4
_J0_SERIES_LIMIT = 8.0
_J0_SERIES_TERMS = 48
_RESCALE_ABOVE = 1e200


def _as_finite_array(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} must be finite")
    return arr


def _restore_scalar(x, out):
    return float(out) if np.ndim(x) == 0 else out


def sinc_unnormalized(x):
    """Return ``sin(x)/x`` with the removable singularity filled in.

    Small arguments use a Taylor series so the result is exactly 1 at 0 and
    free of cancellation near it.
    """
    arr = _as_finite_array(x)
    out = np.empty_like(arr)
    small = np.abs(arr) < _SINC_SERIES_BELOW
    xs = arr[small]
    x2 = xs * xs
    out[small] = 1.0 - x2 / 6.0 + x2 * x2 / 120.0
    xl = arr[~small]
    out[~small] = np.sin(xl) / xl
    return _restore_scalar(x, out)


def _j0_series(x):
    # sum_m (-x^2/4)^m / (m!)^2, accurate to ~1e-13 absolute for |x| <= 8
    q = -0.25 * x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for m in range(1, _J0_SERIES_TERMS):
        term = term * q / (m * m)
        total = total + term
    return total


def _j0_miller(x):
    """J0 by Miller's backward recurrence normalised with J0 + 2*sum J_2k = 1."""
    x_max = float(np.max(x))
    start = int(np.ceil(x_max + 40.0 + 4.0 * np.sqrt(x_max)))
    start += start % 2
    upper = np.zeros_like(x)          # order j + 1
    current = np.full_like(x, 1e-30)  # order j
    norm = np.zeros_like(x)
    for j in range(start, 0, -1):
        lower = (2.0 * j / x) * current - upper
        upper, current = current, lower
        order = j - 1
        if order > 0 and order % 2 == 0:
            norm = norm + 2.0 * current
        big = np.abs(current) > _RESCALE_ABOVE
        if np.any(big):
            scale = np.where(big, 1.0 / _RESCALE_ABOVE, 1.0)
            upper = upper * scale
            current = current * scale
            norm = norm * scale
    norm = norm + current
    return current / norm


def bessel_j0(x):
    """Zeroth-order Bessel function of the first kind for real arguments.

    Uses the power series for ``|x| <= 8`` and Miller's backward recurrence
    beyond it. Absolute error stays below 1e-12 for ``|x| <= 100``.
    """
    arr = np.abs(_as_finite_array(x))
    out = np.empty_like(arr)
    near = arr <= _J0_SERIES_LIMIT
    out[near] = _j0_series(arr[near])
    if np.any(~near):
        out[~near] = _j0_miller(arr[~near])
    return _restore_scalar(x, out)


def _check_kd(k, d):
    k_arr = _as_finite_array(k, "k")
    if np.any(k_arr < 0.0):
        raise ValidationError("wavenumber must be >= 0")
    d = float(d)
    if not np.isfinite(d) or d < 0.0:
        raise ValidationError("spacing d must be finite and >= 0")
    return k_arr * d


def spherical_coherence(k, d):
    """Coherence of a spherically isotropic (diffuse) field, ``sinc(k*d)``."""
    out = sinc_unnormalized(_check_kd(k, d))
    return _restore_scalar(k, np.asarray(out))


def cylindrical_coherence(k, d):
    """Coherence of a cylindrically isotropic field, ``J0(k*d)``."""
    out = bessel_j0(_check_kd(k, d))
    return _restore_scalar(k, np.asarray(out))
