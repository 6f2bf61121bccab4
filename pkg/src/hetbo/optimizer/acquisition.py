"""Acquisition functions: log expected improvement and exact 2-D EHVI."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfcx, ndtr

from .pareto import ParetoFront

LOG_FLOOR = -1e6

_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)
_SQRT_HALF_PI = math.sqrt(math.pi / 2)


def _log_h(z: np.ndarray) -> np.ndarray:
    """log(phi(z) + z * Phi(z)), stable for very negative z."""
    out = np.empty_like(z)
    upper = z > -1.0
    zu = z[upper]
    out[upper] = np.log(np.exp(-0.5 * zu * zu - _LOG_SQRT_2PI) + zu * ndtr(zu))
    mid = (z <= -1.0) & (z > -1e3)
    zm = -z[mid]
    out[mid] = -0.5 * zm * zm - _LOG_SQRT_2PI + np.log1p(-zm * _SQRT_HALF_PI * erfcx(zm / math.sqrt(2)))
    tail = z <= -1e3
    zt = -z[tail]
    inv2 = 1.0 / (zt * zt)
    # Mills-ratio expansion: h(z) ~ phi(z)/z^2 * (1 - 3/z^2 + 15/z^4)
    out[tail] = -0.5 * zt * zt - _LOG_SQRT_2PI - 2.0 * np.log(zt) + np.log1p(-3.0 * inv2 + 15.0 * inv2 * inv2)
    return out


def log_expected_improvement(mean, variance, best_loss: float) -> np.ndarray:
    """ln E[max(best_loss - Y, 0)] for Y ~ N(mean, variance).

    Zero variance gives ln(max(best - mean, 0)); ``-inf`` saturates at
    ``LOG_FLOOR`` everywhere.
    """
    mean = np.asarray(mean, dtype=float)
    variance = np.asarray(variance, dtype=float)
    mean, variance = np.broadcast_arrays(mean, variance)
    sigma = np.sqrt(np.maximum(variance, 0.0))
    out = np.full(mean.shape, LOG_FLOOR)
    pos = sigma > 0
    if np.any(pos):
        z = (best_loss - mean[pos]) / sigma[pos]
        out[pos] = _log_h(z) + np.log(sigma[pos])
    det = ~pos & (mean < best_loss)
    out[det] = np.log(best_loss - mean[det])
    return np.maximum(out, LOG_FLOOR)


def _partial_moment(c: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """E[max(c - Y, 0)] for Y ~ N(mu, sigma^2); broadcasts."""
    diff = c - mu
    with np.errstate(divide="ignore", invalid="ignore"):
        z = diff / sigma
        val = diff * ndtr(z) + sigma * np.exp(-0.5 * z * z - _LOG_SQRT_2PI)
    det = np.broadcast_to(sigma == 0, val.shape)
    val = np.where(det, np.maximum(diff, 0.0), val)
    return np.where(np.isneginf(c), 0.0, val)


def ehvi(mean, variance, front: ParetoFront, ref) -> np.ndarray:
    """Expected hypervolume improvement of independent Gaussian predictions.

    ``mean`` and ``variance`` have shape (m, 2). The region the front does
    not dominate is split into vertical strips between consecutive front
    points; the improvement integrates in closed form strip by strip.
    """
    mean = np.atleast_2d(np.asarray(mean, dtype=float))
    sigma = np.sqrt(np.maximum(np.atleast_2d(np.asarray(variance, dtype=float)), 0.0))
    r1, r2 = float(ref[0]), float(ref[1])
    pts = front.points
    xs = np.concatenate([[-np.inf], pts[:, 0], [r1]])
    tops = np.concatenate([[r2], pts[:, 1]])
    g1 = _partial_moment(xs[None, :], mean[:, :1], sigma[:, :1])
    g2 = _partial_moment(tops[None, :], mean[:, 1:], sigma[:, 1:])
    val = ((g1[:, 1:] - g1[:, :-1]) * g2).sum(1)
    return np.maximum(val, 0.0)

