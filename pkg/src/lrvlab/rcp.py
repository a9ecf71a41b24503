"""Rough centering: remove obvious jumps, then segment-wise linear trends.

The centering is deliberately crude.  It only has to shrink the mean
variation seen by the difference statistics; consistent change-point
estimation is not attempted.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .estimators import as_series
from .exceptions import DomainError, InsufficientDataError

__all__ = ["RcpReport", "batch_length", "remove_jumps", "remove_slopes", "rough_center"]

log = logging.getLogger(__name__)


@dataclass
class RcpReport:
    """What the centering found.

    ``detected_jumps`` holds ``(time, raw_jump, winsorized_jump)`` with
    1-based times, in detection order.
    """

    detected_jumps: list = field(default_factory=list)
    slopes: list = field(default_factory=list)
    M: float = 0.0
    b: int = 0
    max_jumps: int = 10

    @property
    def N(self) -> int:
        return len(self.detected_jumps)

    @property
    def jump_times(self) -> list:
        return sorted(t for t, _, _ in self.detected_jumps)

    def to_dict(self) -> dict:
        return {
            "detected_jumps": [
                {"time": int(t), "raw_jump": float(r), "winsorized_jump": float(w)} for t, r, w in self.detected_jumps
            ],
            "slopes": [{"intercept": float(a0), "slope": float(a1)} for a0, a1 in self.slopes],
            "M": float(self.M),
            "b": int(self.b),
            "N": self.N,
            "max_jumps": int(self.max_jumps),
        }


def batch_length(n: int) -> int:
    """``floor(n^(1/3))`` computed without floating-point cube-root slop."""
    b = int(round(n ** (1.0 / 3.0)))
    while b**3 > n:
        b -= 1
    while (b + 1) ** 3 <= n:
        b += 1
    return b


def _batch_differences(x, b):
    """Forward minus backward batch means at 1-based times ``b+1, ..., n-b+1``.

    ``xi_i = mean(X_i..X_{i+b-1}) - mean(X_{i-b}..X_{i-1})``.
    """
    n = x.size
    # anchoring at the first value keeps constant stretches exactly zero
    csum = np.concatenate([[0.0], np.cumsum(x - x[0])])
    times = np.arange(b + 1, n - b + 2)
    forward = (csum[times - 1 + b] - csum[times - 1]) / b
    backward = (csum[times - 1] - csum[times - 1 - b]) / b
    return times, forward - backward


def remove_jumps(x, max_jumps: int = 10, M_prime: float = 100.0):
    """Step 1: iteratively subtract winsorized steps at Tukey-fence outliers.

    Returns the jump-removed series and an :class:`RcpReport`.
    """
    y = as_series(x).column(0).copy()
    n = y.size
    if n < 8:
        raise InsufficientDataError(f"rough centering needs n >= 8, got {n}")
    b = batch_length(n)
    incr = np.diff(y)
    M = M_prime * math.sqrt(float(np.dot(incr, incr)) / (2 * n))
    report = RcpReport(M=M, b=b, max_jumps=int(max_jumps))
    if b < 2:
        log.warning("batch length %d < 2; jump scan skipped", b)
        return y, report
    excluded = set()
    for _ in range(int(max_jumps)):
        times, xi = _batch_differences(y, b)
        q1, q3 = np.percentile(xi, [25.0, 75.0])
        upper, lower = 4.0 * q3 - 3.0 * q1, 4.0 * q1 - 3.0 * q3
        dist = np.maximum(0.0, np.maximum(xi - upper, lower - xi))
        # exceedances at rounding level (collapsed fences on smooth data) are not jumps;
        # batch means carry rounding error relative to the data, not to xi
        dist[dist <= 1e-9 * float(np.max(np.abs(xi))) + 1e-12 * float(np.max(np.abs(y)))] = 0.0
        if excluded:
            dist[np.isin(times, list(excluded))] = 0.0
        if not np.any(dist > 0):
            break
        pos = int(np.argmax(dist))  # first maximum on ties
        t = int(times[pos])
        raw = float(y[t - 1] - y[t - 2])
        step = min(max(raw, -M), M)
        y[t - 1 :] -= step
        excluded.add(t)
        report.detected_jumps.append((t, raw, step))
    return y, report


def _segment_fit(seg):
    if seg.size < 2:
        return float(seg[0]), 0.0
    u = np.arange(seg.size, dtype=float)
    uc = u - u.mean()
    mean = float(seg.mean())
    slope = float(np.dot(uc, seg - mean) / np.dot(uc, uc))
    return mean - slope * float(u.mean()), slope


def remove_slopes(x_dagger, jump_times, report: RcpReport | None = None) -> np.ndarray:
    """Step 2: subtract continuity-preserving segmented regression lines.

    Each segment ``[t_j, t_{j+1})`` is regressed on ``0, ..., len - 1``.  The
    subtracted line has the fitted slope and, as offset, the accumulated rise
    of the earlier segments; fitted intercepts are not subtracted, so a global
    level remains.
    """
    y = as_series(x_dagger).column(0)
    n = y.size
    bounds = [1] + sorted(int(t) for t in jump_times) + [n + 1]
    if any(b1 <= b0 for b0, b1 in zip(bounds, bounds[1:])):
        raise DomainError(f"jump times must be distinct and inside (1, n]; got {list(jump_times)}")
    out = y.copy()
    offset = 0.0
    fits = []
    for t0, t1 in zip(bounds, bounds[1:]):
        seg = y[t0 - 1 : t1 - 1]
        intercept, slope = _segment_fit(seg)
        fits.append((intercept, slope))
        out[t0 - 1 : t1 - 1] = seg - (offset + slope * np.arange(seg.size))
        offset += slope * (t1 - 1 - t0)
    if report is not None:
        report.slopes = fits
    return out


def rough_center(x, max_jumps: int = 10, M_prime: float = 100.0):
    """Both centering steps; returns ``(x_ddagger, report)``."""
    x_dagger, report = remove_jumps(x, max_jumps=max_jumps, M_prime=M_prime)
    x_ddagger = remove_slopes(x_dagger, report.jump_times, report)
    return x_ddagger, report
