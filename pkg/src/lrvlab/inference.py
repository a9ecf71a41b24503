"""Change-point tests, local-linear trend estimation and simultaneous bands.

All procedures take the long-run variance as an input; pass the output of
:func:`lrvlab.selection.suggested_estimator` for robustness against trends
and jumps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .estimators import LrvResult, as_series
from .exceptions import DomainError, NumericError
from .mc import run_replications
from .selection import PlugInConfig, ceil_guarded, suggested_estimator

__all__ = [
    "TestResult",
    "TrendBand",
    "kolmogorov_cdf",
    "kolmogorov_quantile",
    "ks_statistic",
    "ks_test",
    "wz_window",
    "wz_scan",
    "wz_critical_value",
    "wz_test",
    "smoother_matrix",
    "local_linear_trend",
    "default_b_star",
    "band_grid",
    "scb_quantile",
    "scb",
]


@dataclass
class TestResult:
    """Outcome of a change-point test; ``reject`` is ``statistic > critical_value``."""

    statistic: float
    critical_value: float
    level: float
    reject: bool
    lrv_used: LrvResult | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "statistic": float(self.statistic),
            "critical_value": float(self.critical_value),
            "level": float(self.level),
            "reject": bool(self.reject),
        }
        if self.lrv_used is not None:
            out["lrv"] = self.lrv_used.to_dict()
        out.update(self.extras)
        return out


@dataclass
class TrendBand:
    """Trend estimate on a grid with a constant simultaneous half-width."""

    grid: np.ndarray
    mu_hat: np.ndarray
    half_width: float
    level: float
    bandwidth: float
    extras: dict = field(default_factory=dict)

    @property
    def lower(self) -> np.ndarray:
        return self.mu_hat - self.half_width

    @property
    def upper(self) -> np.ndarray:
        return self.mu_hat + self.half_width

    def covers(self, mu_true) -> bool:
        """Whether ``mu_true`` (values on ``grid``) lies inside the band everywhere."""
        return bool(np.all(np.abs(np.asarray(mu_true) - self.mu_hat) <= self.half_width))

    def to_dict(self) -> dict:
        out = {
            "grid": self.grid.tolist(),
            "mu_hat": self.mu_hat.tolist(),
            "half_width": float(self.half_width),
            "level": float(self.level),
            "bandwidth": float(self.bandwidth),
        }
        out.update(self.extras)
        return out


def _check_level(level, lo=0.0, hi=1.0):
    level = float(level)
    if not lo < level < hi:
        raise DomainError(f"level must lie in ({lo}, {hi}), got {level}")
    return level


def _check_v(v_hat):
    value = float(v_hat.value if isinstance(v_hat, LrvResult) else v_hat)
    if not value > 0 or not math.isfinite(value):
        raise DomainError(f"long-run variance must be positive, got {value}")
    return value


# -- Kolmogorov-Smirnov type test -------------------------------------------

def kolmogorov_cdf(x: float, terms: int = 50) -> float:
    """``P(sup |Brownian bridge| <= x) = 1 - 2 sum_k (-1)^(k-1) exp(-2 k^2 x^2)``."""
    if x <= 0:
        return 0.0
    k = np.arange(1, terms + 1)
    return float(1.0 - 2.0 * np.sum((-1.0) ** (k - 1) * np.exp(-2.0 * k**2 * x * x)))


def kolmogorov_quantile(prob: float, terms: int = 50) -> float:
    """Inverse of :func:`kolmogorov_cdf`; ``prob = 0.95`` gives 1.3581."""
    prob = _check_level(prob)
    return float(brentq(lambda x: kolmogorov_cdf(x, terms) - prob, 0.2, 10.0, xtol=1e-14))


def ks_statistic(x, v_hat: float) -> tuple[float, int]:
    """``max_k |sum_{i<=k} (X_i - mean)| / sqrt(n v)`` and its 1-based argmax."""
    y = as_series(x).column(0)
    v = _check_v(v_hat)
    partial = np.abs(np.cumsum(y - y.mean()))
    k = int(np.argmax(partial))
    return float(partial[k] / math.sqrt(y.size * v)), k + 1


def ks_test(x, v_hat, level: float = 0.05) -> TestResult:
    """CUSUM test of a constant mean, normalized by ``v_hat``.

    ``v_hat`` may be a number or an :class:`LrvResult`.
    """
    level = _check_level(level)
    stat, k = ks_statistic(x, v_hat)
    crit = kolmogorov_quantile(1.0 - level)
    lrv_used = v_hat if isinstance(v_hat, LrvResult) else None
    return TestResult(stat, crit, level, stat > crit, lrv_used, {"test": "ks", "argmax": k})


# -- Wu-Zhao structural break test ------------------------------------------

def wz_window(n: int, beta: float) -> int:
    """``k_n = ceil(n^beta)``, validated."""
    beta = float(beta)
    if not 0.5 < beta < 2.0 / 3.0:
        raise DomainError(f"beta must lie in (1/2, 2/3), got {beta}")
    k = ceil_guarded(n**beta)
    if 2 * k >= n:
        raise DomainError(f"window k_n={k} too wide for n={n}")
    return k


def wz_scan(y: np.ndarray, k: int) -> np.ndarray:
    """``|sum_{i+1..i+k} X - sum_{i-k+1..i} X| / k`` for ``i = k, ..., n-k`` (rows of ``y``)."""
    y = np.asarray(y, dtype=float)
    csum = np.concatenate([np.zeros((1,) + y.shape[1:]), np.cumsum(y, axis=0)])
    n = y.shape[0]
    i = np.arange(k, n - k + 1)
    forward = csum[i + k] - csum[i]
    backward = csum[i] - csum[i - k]
    return np.abs(forward - backward) / k


def _wz_null_stats(rng, index, n, k):
    return float(np.max(wz_scan(rng.standard_normal(n), k)))


_WZ_CACHE: dict = {}


def wz_critical_value(n: int, beta: float = 0.6, level: float = 0.05, reps: int = 10_000,
                      seed: int = 20240601, workers: int | None = None) -> float:
    """Upper ``level`` quantile of the scan statistic under iid N(0,1) noise with ``v = 1``.

    Results are cached per ``(n, beta, level, reps, seed)``.
    """
    level = _check_level(level)
    k = wz_window(n, beta)
    key = (int(n), float(beta), level, int(reps), int(seed))
    if key not in _WZ_CACHE:
        stats = np.array(run_replications(_wz_null_stats, reps, seed, (n, k), workers))
        _WZ_CACHE[key] = float(np.quantile(np.sort(stats), 1.0 - level))
    return _WZ_CACHE[key]


def wz_test(x, v_hat, beta: float = 0.6, level: float = 0.05, reps: int = 10_000, seed: int = 20240601,
            workers: int | None = None) -> TestResult:
    """Maximal difference of adjacent window sums, normalized by ``k_n sqrt(v_hat)``.

    The argmax (1-based split point ``i``) is reported as a break-location
    diagnostic only.
    """
    y = as_series(x).column(0)
    v = _check_v(v_hat)
    k = wz_window(y.size, beta)
    scan = wz_scan(y, k) / math.sqrt(v)
    pos = int(np.argmax(scan))
    stat = float(scan[pos])
    crit = wz_critical_value(y.size, beta, level, reps, seed, workers)
    lrv_used = v_hat if isinstance(v_hat, LrvResult) else None
    extras = {"test": "wz", "k_n": k, "beta": float(beta), "argmax": pos + k}
    return TestResult(stat, crit, level, stat > crit, lrv_used, extras)


# -- local linear trend and bands --------------------------------------------

def _gaussian(u):
    return np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)


def smoother_matrix(n: int, b: float, grid=None) -> np.ndarray:
    """Rows map the data to the jackknifed trend ``2 mu_b - mu_{b sqrt 2}`` at each grid point.

    Each Gaussian smoother is normalized to unit row sums, so constants are
    reproduced exactly.
    """
    b = float(b)
    if not 0.0 < b < 0.5:
        raise DomainError(f"trend bandwidth must lie in (0, 1/2), got {b}")
    t = np.arange(1, n + 1) / n if grid is None else np.asarray(grid, dtype=float)
    design = np.arange(1, n + 1) / n
    rows = []
    for bw in (b, b * math.sqrt(2.0)):
        w = _gaussian((t[:, None] - design[None, :]) / bw)
        total = w.sum(axis=1, keepdims=True)
        if np.any(total <= 1e-300):
            raise NumericError("kernel weights vanish at some grid point")
        rows.append(w / total)
    return 2.0 * rows[0] - rows[1]


def local_linear_trend(x, b: float, grid=None) -> np.ndarray:
    """Jackknife-corrected Gaussian smoother ``2 mu_b(t) - mu_{b sqrt 2}(t)``.

    Evaluated at ``i/n`` unless ``grid`` is given.  Linear in the data.
    """
    ts = as_series(x)
    return smoother_matrix(ts.n, b, grid) @ ts.data[:, 0]


def default_b_star(n: int) -> float:
    """Reference iid bandwidth ``0.017 (200/n)^(1/5)``."""
    return 0.017 * (200.0 / n) ** 0.2


def band_grid(b: float, size: int = 201) -> np.ndarray:
    return np.linspace(b, 1.0 - b, size)


def _scb_null_sup(rng, index, W):
    return float(np.max(np.abs(W @ rng.standard_normal(W.shape[1]))))


_SCB_CACHE: dict = {}


def scb_quantile(n: int, b: float, level: float = 0.95, reps: int = 1000, seed: int = 0,
                 grid_size: int = 201, workers: int | None = None) -> float:
    """``level`` quantile of ``sup_t |trend(t)|`` for iid N(0,1) data, on the band grid."""
    level = _check_level(level, 0.5, 1.0)
    if reps < 200:
        raise DomainError(f"need at least 200 replications, got {reps}")
    key = (int(n), float(b), level, int(reps), int(seed), int(grid_size))
    if key not in _SCB_CACHE:
        W = smoother_matrix(n, b, band_grid(b, grid_size))
        sups = np.array(run_replications(_scb_null_sup, reps, seed, (W,), workers))
        _SCB_CACHE[key] = float(np.quantile(np.sort(sups), level))
    return _SCB_CACHE[key]


def scb(x, level: float = 0.95, b_star: float | None = None, reps: int = 1000, seed: int = 0,
        v_hat=None, bandwidth: float | None = None, plugin: PlugInConfig | None = None,
        grid_size: int = 201, workers: int | None = None) -> TrendBand:
    """Simultaneous confidence band ``trend_{b_n}(t) +- sqrt(v) q_level``.

    Parameters
    ----------
    x : array_like
        Univariate series.
    level : float
        Coverage level in ``(0.5, 1)``.
    b_star : float, optional
        Reference iid bandwidth; defaults to :func:`default_b_star`.
    reps : int
        Monte Carlo replications for the quantile (at least 200).
    v_hat : float or LrvResult, optional
        Long-run variance; the suggested estimator when omitted.  Values
        below a tiny floor are raised to it.
    bandwidth : float, optional
        Use this smoothing bandwidth instead of ``2 (v/gamma_0)^(1/5) b_star``.

    Notes
    -----
    The quantile is simulated for the bandwidth actually used on the data.
    """
    ts = as_series(x)
    y = ts.column(0)
    n = ts.n
    level = _check_level(level, 0.5, 1.0)
    b_star = default_b_star(n) if b_star is None else float(b_star)
    lrv_result = None
    if v_hat is None:
        lrv_result = suggested_estimator(y, plugin)
        v = float(lrv_result.value)
    else:
        lrv_result = v_hat if isinstance(v_hat, LrvResult) else None
        v = float(v_hat.value if isinstance(v_hat, LrvResult) else v_hat)
    scale = float(np.dot(y - y.mean(), y - y.mean()) / n)
    floor = 1e-12 * max(scale, 1e-300)
    v_used = max(v, floor)
    resid = y - local_linear_trend(y, b_star)
    gamma0 = float(np.dot(resid, resid) / n)
    if bandwidth is None:
        ratio = v_used / gamma0 if gamma0 > floor else 1.0
        b_n = 2.0 * ratio**0.2 * b_star
    else:
        b_n = float(bandwidth)
    if not 0.0 < b_n < 0.5:
        raise DomainError(f"selected trend bandwidth {b_n:.4g} outside (0, 1/2); reduce b_star")
    grid = band_grid(b_n, grid_size)
    mu_hat = local_linear_trend(y, b_n, grid)
    q = scb_quantile(n, b_n, level, reps, seed, grid_size, workers)
    half = math.sqrt(v_used) * q
    extras = {"v_hat": v, "v_used": v_used, "gamma0": gamma0, "b_star": b_star, "quantile": q}
    if lrv_result is not None:
        extras["ell"] = lrv_result.config_used.ell
    return TrendBand(grid, mu_hat, half, level, b_n, extras)

