"""Exponentially weighted polynomial moments on the unit interval.

Everything in this package that integrates a polynomial against an
exponential reduces to the family

    I_k(r) = integral_0^1 y^k * exp(r*y) dy,   k >= 0, r complex,

computed here by stable recurrences in every parameter regime:

* ``|r| < 1e-4``  — Taylor series (the recurrences lose all digits near 0),
* moderate ``|r|`` — upward recurrence while it is contractive (k < |r|),
  switching to a zero-seeded downward (Miller-style) pass above,
* anchored variants ``integral_0^1 y^k exp(r*(y-1)) dy`` for arguments with a
  large positive real part, where exp(r) itself would overflow.

The scalar entry point :func:`exp_weighted_moment` is the public contract
(re-exported by :mod:`lindley_alt.solver`); the array helpers are private to
the package.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

__all__ = ["exp_weighted_moment"]

#: Moment orders are capped: beyond this, callers should reformulate.
MAX_ORDER = 64

#: Below this magnitude the recurrences are replaced by the Taylor series.
_TAYLOR_RADIUS = 1e-4

#: Target relative accuracy of the zero-seeded downward recurrence.
_MILLER_EPS = 1e-18


def _expm1c(z: complex) -> complex:
    """exp(z) - 1 without cancellation for small |z| (complex argument)."""
    x, y = z.real, z.imag
    if y == 0.0:
        return complex(math.expm1(x), 0.0)
    # Real part: expm1(x)*cos(y) - 2*sin^2(y/2); imaginary part: e^x*sin(y).
    return complex(
        math.expm1(x) * math.cos(y) - 2.0 * math.sin(0.5 * y) ** 2,
        math.exp(x) * math.sin(y),
    )


def _taylor_moments(kmax: int, r: complex) -> list[complex]:
    """I_0..I_kmax by the series sum_m r^m / (m! * (k+m+1)), |r| small."""
    out = []
    for k in range(kmax + 1):
        term = complex(1.0)  # r^m / m! at m = 0
        total = term / (k + 1)
        m = 0
        while True:
            m += 1
            term *= r / m
            inc = term / (k + m + 1)
            total += inc
            if abs(inc) <= 1e-20 * abs(total) or m > 40:
                break
        out.append(total)
    return out


def _downward_start(kmax: int, mag: float) -> int:
    """Start index for the zero-seeded downward recurrence.

    Error introduced by the zero seed contracts by |r|/j at step j; run the
    start index out until the accumulated contraction beats ``_MILLER_EPS``.
    """
    start = max(kmax, int(math.ceil(mag)))
    shrink = 1.0
    while shrink > _MILLER_EPS and start < kmax + 400:
        start += 1
        shrink *= min(1.0, mag / start)
    return start


def _moments(kmax: int, r: complex) -> list[complex]:
    """I_0..I_kmax for one complex argument (internal, unvalidated)."""
    mag = abs(r)
    if mag < _TAYLOR_RADIUS:
        return _taylor_moments(kmax, r)

    er = cmath.exp(r) if r.real <= 709.0 else complex(math.inf)
    out: list[complex] = [_expm1c(r) / r]
    # Upward while contractive: the error amplification at step k is k/|r|.
    k_up = min(kmax, int(mag))
    for k in range(1, k_up + 1):
        out.append((er - k * out[k - 1]) / r)
    if k_up == kmax:
        return out

    # Downward (Miller-style) for the remaining orders, from a zero seed.
    start = _downward_start(kmax, mag)
    high = [complex(0.0)] * (start + 1)
    for k in range(start, k_up + 1, -1):
        high[k - 1] = (er - r * high[k]) / k
    return out + high[k_up + 1 : kmax + 1]


def exp_weighted_moment(k: int, r: complex) -> complex:
    """Return the moment integral_0^1 y^k * exp(r*y) dy.

    Parameters
    ----------
    k:
        Moment order, ``0 <= k <= 64``.
    r:
        Complex exponential rate.

    Returns
    -------
    complex
        The integral, accurate to close to machine precision in every
        magnitude regime of ``r``.

    Raises
    ------
    ValueError
        If ``k`` is negative or exceeds the supported maximum order.
    """
    if not 0 <= k <= MAX_ORDER:
        raise ValueError(f"moment order must be in [0, {MAX_ORDER}], got {k}")
    return _moments(k, complex(r))[k]


def moment_table(kmax: int, r: complex) -> list[complex]:
    """All of I_0(r)..I_kmax(r) in one pass (shares the recurrence work)."""
    if not 0 <= kmax <= MAX_ORDER:
        raise ValueError(f"moment order must be in [0, {MAX_ORDER}], got {kmax}")
    return _moments(kmax, complex(r))


def anchored_moment_table(kmax: int, r: complex) -> list[complex]:
    """All of integral_0^1 y^k * exp(r*(y-1)) dy for k = 0..kmax.

    Equals ``exp(-r) * I_k(r)`` but stays finite for any ``Re r >= 0``; on
    [0, 1] the integrand's magnitude never exceeds 1, so neither does the
    result. Used to build mode quantities anchored at x = 1.
    """
    if not 0 <= kmax <= MAX_ORDER:
        raise ValueError(f"moment order must be in [0, {MAX_ORDER}], got {kmax}")
    r = complex(r)
    if r.real <= 700.0:
        scale = cmath.exp(-r)
        return [scale * v for v in _moments(kmax, r)]
    # exp(r) overflows: run the recurrence directly on the anchored values,
    # where the upward pass is contractive because k/|r| << 1.
    emr = cmath.exp(-r)  # underflows harmlessly toward 0
    out = [(1.0 - emr) / r]
    for k in range(1, kmax + 1):
        out.append((1.0 - k * out[k - 1]) / r)
    return out


def moment_grid(kmax: int, z: np.ndarray) -> np.ndarray:
    """Vectorized I_k over an array of nonpositive real arguments.

    Returns an array of shape ``(kmax + 1,) + z.shape`` with rows k = 0..kmax.
    Uses the zero-seeded downward recurrence only — stable for all entries at
    once (the start index adapts to the largest magnitude present) and exact
    at z = 0, where it reproduces 1/(k+1).
    """
    z = np.asarray(z, dtype=float)
    if np.any(z > 0.0):
        raise ValueError("moment_grid expects nonpositive real arguments")
    start = _downward_start(kmax, float(np.max(np.abs(z))) if z.size else 0.0)
    ez = np.exp(z)
    cur = np.zeros_like(z)
    rows = [np.empty(0)] * (kmax + 1)
    for k in range(start, 0, -1):
        cur = (ez - z * cur) / k
        if k - 1 <= kmax:
            rows[k - 1] = cur
    return np.stack(rows, axis=0)
