"""Log-gamma, digamma and trigamma on positive reals.

Strategy: upward recurrence shifts the argument to x >= 10, then a
Stirling-type asymptotic series finishes the job. Accepts scalars or
numpy arrays; scalar in, scalar out.
"""

from __future__ import annotations

import numpy as np

_HALF_LOG_2PI = 0.9189385332046727417803297364056176

# Stirling series for ln Gamma: coefficients B_{2n} / (2n (2n-1)).
_LNGAMMA_SERIES = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
)

# Asymptotic series for digamma: coefficients B_{2n} / (2n).
_DIGAMMA_SERIES = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)

# Asymptotic series for trigamma: Bernoulli numbers B_{2n}.
_TRIGAMMA_SERIES = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
)

_SHIFT_THRESHOLD = 10.0


def _prepare(x, name: str):
    arr = np.asarray(x, dtype=np.float64)
    if arr.size and (np.any(~np.isfinite(arr)) or np.any(arr <= 0.0)):
        raise ValueError(f"{name} requires finite x > 0")
    scalar = arr.ndim == 0
    return np.atleast_1d(arr).copy(), scalar


def _finish(res: np.ndarray, scalar: bool):
    return float(res[0]) if scalar else res


def ln_gamma(x):
    """Natural log of the gamma function for x > 0."""
    z, scalar = _prepare(x, "ln_gamma")
    shift = np.zeros_like(z)
    # After ten unit shifts any positive argument exceeds the threshold.
    for _ in range(10):
        mask = z < _SHIFT_THRESHOLD
        if not mask.any():
            break
        shift[mask] += np.log(z[mask])
        z[mask] += 1.0
    inv2 = 1.0 / (z * z)
    series = np.zeros_like(z)
    term = 1.0 / z
    for c in _LNGAMMA_SERIES:
        series += c * term
        term *= inv2
    res = (z - 0.5) * np.log(z) - z + _HALF_LOG_2PI + series - shift
    return _finish(res, scalar)


def digamma(x):
    """Logarithmic derivative of the gamma function for x > 0."""
    z, scalar = _prepare(x, "digamma")
    shift = np.zeros_like(z)
    for _ in range(10):
        mask = z < _SHIFT_THRESHOLD
        if not mask.any():
            break
        shift[mask] += 1.0 / z[mask]
        z[mask] += 1.0
    inv2 = 1.0 / (z * z)
    series = np.zeros_like(z)
    term = inv2.copy()
    for c in _DIGAMMA_SERIES:
        series += c * term
        term *= inv2
    res = np.log(z) - 0.5 / z - series - shift
    return _finish(res, scalar)


def trigamma(x):
    """Second derivative of ln Gamma for x > 0 (internal helper for
    closed-form KL gradients; not part of the public surface)."""
    z, scalar = _prepare(x, "trigamma")
    shift = np.zeros_like(z)
    for _ in range(10):
        mask = z < _SHIFT_THRESHOLD
        if not mask.any():
            break
        shift[mask] += 1.0 / (z[mask] * z[mask])
        z[mask] += 1.0
    inv2 = 1.0 / (z * z)
    series = np.zeros_like(z)
    term = inv2 / z
    for c in _TRIGAMMA_SERIES:
        series += c * term
        term *= inv2
    res = 1.0 / z + 0.5 * inv2 + series + shift
    return _finish(res, scalar)
