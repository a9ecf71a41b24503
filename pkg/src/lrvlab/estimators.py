"""Difference-based long-run variance estimators.

The lag-``h`` difference statistics ``D_i = sum_j d_j X_{i - j h}`` remove a
slowly varying mean.  Their sample autocovariances (always divided by ``n``)
are smoothed with a lag window to estimate

    v_p = sum_k |k|^p gamma_k,

of which ``p = 0`` is the long-run variance.  Both the kernel form and the
subsampling (batch) form are provided, for univariate and multivariate
series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .diffseq import DifferenceSequence, zero_sequence
from .exceptions import ConfigError, DomainError, InsufficientDataError, NumericError
from .kernels import KernelSpec, k_diff_weights, parse_kernel

__all__ = [
    "TimeSeries",
    "as_series",
    "EstimatorConfig",
    "LrvResult",
    "REGIMES",
    "regime",
    "difference_statistics",
    "gamma_hat_d",
    "autocovariances_d",
    "lrv",
    "lrv_subsampling",
    "lrv_multivariate",
    "lrv_diff_kernel",
    "sample_acvf",
    "acvf_identity_check",
    "long_run_correlation",
    "classical_config",
    "with_moment",
]

REGIMES = ("optimal", "may_be_optimal", "suboptimal", "inconsistent")


@dataclass(frozen=True)
class TimeSeries:
    """Ordered real observations stored as an ``n x S`` array."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise DomainError(f"series must be 1-D or 2-D, got shape {arr.shape}")
        if arr.shape[0] < 2:
            raise InsufficientDataError(f"need at least 2 observations, got {arr.shape[0]}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("series contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def S(self) -> int:
        return self.data.shape[1]

    def column(self, j: int = 0) -> np.ndarray:
        return self.data[:, j]

    def __len__(self):
        return self.n


def as_series(x) -> TimeSeries:
    return x if isinstance(x, TimeSeries) else TimeSeries(x)


def _as_1d(x) -> np.ndarray:
    ts = as_series(x)
    if ts.S != 1:
        raise DomainError(f"expected a univariate series, got {ts.S} columns")
    return ts.column(0)


@dataclass(frozen=True)
class EstimatorConfig:
    """Order, kernel, bandwidth ``ell``, lag ``h`` and moment order ``p``.

    ``center_differences=None`` means: the zeroth-order statistics are
    globally centered (always), higher orders are used uncentered.
    ``True`` additionally subtracts ``sum(D)/n`` for ``m >= 1``.
    """

    seq: DifferenceSequence
    kernel: KernelSpec
    ell: int
    h: int = 1
    p: int = 0
    center_differences: bool | None = None

    def __post_init__(self):
        object.__setattr__(self, "kernel", parse_kernel(self.kernel))
        if int(self.ell) != self.ell or self.ell < 1:
            raise ConfigError(f"bandwidth must be a positive integer, got {self.ell}")
        if int(self.h) != self.h or self.h < 1:
            raise ConfigError(f"lag must be a positive integer, got {self.h}")
        if int(self.p) != self.p or self.p < 0:
            raise ConfigError(f"moment order must be a non-negative integer, got {self.p}")
        object.__setattr__(self, "ell", int(self.ell))
        object.__setattr__(self, "h", int(self.h))
        object.__setattr__(self, "p", int(self.p))
        if self.seq.m == 0 and self.center_differences is False:
            raise ConfigError("zeroth-order statistics are globally centered by definition")

    @property
    def m(self) -> int:
        return self.seq.m

    @property
    def lam(self) -> float:
        return self.h / self.ell

    def check(self, n: int):
        if self.m * self.h + self.ell >= n:
            raise InsufficientDataError(
                f"need m*h + ell < n, got m={self.m}, h={self.h}, ell={self.ell}, n={n}"
            )

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "d": self.seq.d.tolist(),
            "kernel": str(self.kernel),
            "ell": self.ell,
            "h": self.h,
            "lambda": self.lam,
            "p": self.p,
            "center_differences": bool(self.center_differences),
        }


@dataclass
class LrvResult:
    """Estimate with the smoothed autocovariances and a regime tag.

    ``gamma_d[k]`` holds the autocovariance of the difference statistics at
    lag ``k = 0, ..., ell - 1`` (scalars, or ``S x S`` matrices).
    """

    value: float | np.ndarray
    gamma_d: np.ndarray
    config_used: EstimatorConfig
    regime: str
    raw: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.value)

    def to_dict(self) -> dict:
        value = self.value
        out = {
            "value": value.tolist() if isinstance(value, np.ndarray) else float(value),
            "regime": self.regime,
            "config": self.config_used.to_dict(),
            "gamma_d": np.asarray(self.gamma_d).tolist(),
        }
        if self.raw is not None:
            out["raw"] = np.asarray(self.raw).tolist()
        out.update(self.extras)
        return out


def regime(m: int, ell: int, h: int, kernel: KernelSpec | None = None) -> str:
    """Convergence class of a fixed-order configuration from the ratio ``h/ell``.

    A ratio of exactly one is rate optimal only for kernels at least as flat
    at the boundary as at the origin; when both exponents are known and the
    boundary one is smaller the configuration is tagged ``suboptimal``.
    """
    if m == 0:
        return "optimal"
    if h < ell:
        return "inconsistent"
    if h == ell:
        if kernel is not None and kernel.q is not None and kernel.q_prime is not None and kernel.q_prime < kernel.q:
            return "suboptimal"
        return "may_be_optimal"
    return "optimal"


def difference_statistics(x, seq: DifferenceSequence, h: int = 1) -> np.ndarray:
    """``D_i = sum_j d_j X_{i - j h}`` for ``i = m h + 1, ..., n``.

    For ``m = 0`` the globally centered ``X_i - mean(X)`` is returned.  The
    output keeps the shape convention of the input (1-D or ``n x S``).
    """
    data = np.asarray(x.data if isinstance(x, TimeSeries) else x, dtype=float)
    squeeze = data.ndim == 1
    arr = data[:, None] if squeeze else data
    n, m, h = arr.shape[0], seq.m, int(h)
    if h < 1:
        raise DomainError(f"lag must be >= 1, got {h}")
    if m == 0:
        out = arr - arr.mean(axis=0)
    else:
        if m * h >= n:
            raise InsufficientDataError(f"need m*h < n, got m={m}, h={h}, n={n}")
        length = n - m * h
        out = np.zeros((length, arr.shape[1]))
        for j, dj in enumerate(seq.d):
            start = m * h - j * h
            out += dj * arr[start : start + length]
    return out[:, 0] if squeeze else out


def gamma_hat_d(D, k: int, n: int):
    """``(1/n) sum_i D_i D_{i-|k|}^T`` over the available statistics."""
    D = np.asarray(D, dtype=float)
    k = abs(int(k))
    length = D.shape[0]
    if k >= length:
        raise DomainError(f"lag {k} out of range for {length} difference statistics")
    lead, lag = D[k:], D[: length - k]
    if D.ndim == 1:
        return float(np.dot(lead, lag)) / n
    return lead.T @ lag / n


def autocovariances_d(D, max_lag: int, n: int) -> np.ndarray:
    """Stacked ``gamma_hat_d`` for lags ``0, ..., max_lag``."""
    D = np.asarray(D, dtype=float)
    if max_lag >= D.shape[0]:
        raise InsufficientDataError(f"lag {max_lag} out of range for {D.shape[0]} difference statistics")
    return np.array([gamma_hat_d(D, k, n) for k in range(max_lag + 1)])


def _centered_statistics(x, config: EstimatorConfig):
    data = x.data if isinstance(x, TimeSeries) else np.asarray(x, dtype=float)
    n = data.shape[0]
    config.check(n)
    D = difference_statistics(data, config.seq, config.h)
    if config.m > 0 and config.center_differences:
        D = D - D.sum(axis=0) / n
    return D, n


def _lag_weights(config: EstimatorConfig) -> np.ndarray:
    k = np.arange(config.ell, dtype=float)
    weights = config.kernel.evaluate(k / config.ell) * np.where(k == 0, 1.0 if config.p == 0 else 0.0, k**config.p)
    return np.atleast_1d(weights)


def lrv(x, config: EstimatorConfig) -> LrvResult:
    """Kernel-form estimate ``sum_{|k|<ell} |k|^p K(k/ell) gamma_hat_k^D``.

    Multivariate input is delegated to :func:`lrv_multivariate`.
    """
    ts = as_series(x)
    if ts.S > 1:
        return lrv_multivariate(ts, config)
    D, n = _centered_statistics(ts.column(0), config)
    gammas = autocovariances_d(D, config.ell - 1, n)
    w = _lag_weights(config)
    value = float(w[0] * gammas[0] + 2.0 * np.dot(w[1:], gammas[1:]))
    return LrvResult(value, gammas, config, regime(config.m, config.ell, config.h, config.kernel))


def lrv_multivariate(x, config: EstimatorConfig, symmetrize: bool = True) -> LrvResult:
    """Matrix estimate; the returned value is ``(M + M^T)/2`` unless ``symmetrize=False``.

    ``M`` pairs each lag with ``gamma_hat_{|k|}`` as printed, so it may be
    asymmetric; ``raw`` always holds it.
    """
    ts = as_series(x)
    D, n = _centered_statistics(ts.data, config)
    gammas = autocovariances_d(D, config.ell - 1, n)
    w = _lag_weights(config)
    raw = w[0] * gammas[0] + 2.0 * np.tensordot(w[1:], gammas[1:], axes=1)
    value = 0.5 * (raw + raw.T) if symmetrize else raw.copy()
    return LrvResult(value, gammas, config, regime(config.m, config.ell, config.h, config.kernel), raw=raw)


def lrv_subsampling(x, config: EstimatorConfig, overlap: str = "full") -> LrvResult:
    """Subsampling form: average of ``sum_{t,t'} K(|t-t'|/ell)/(ell-|t-t'|) D_t D_t'``.

    Windows ``{i-ell+1, ..., i}`` end at ``i`` in ``{mh+ell, ..., n}`` for
    ``overlap="full"`` and at the multiples of ``mh+1+ell`` for ``"none"``.
    """
    if overlap not in ("full", "none"):
        raise DomainError(f"overlap must be 'full' or 'none', got {overlap!r}")
    y = _as_1d(x)
    n = y.size
    m, h, ell = config.m, config.h, config.ell
    if m * h >= n:
        raise InsufficientDataError(f"need m*h < n, got m={m}, h={h}, n={n}")
    D = difference_statistics(y, config.seq, h)
    if m > 0 and config.center_differences:
        D = D - D.sum() / n
    if overlap == "full":
        ends = np.arange(m * h + ell, n + 1)
    else:
        step = m * h + 1 + ell
        ends = step * np.arange(1, n // step + 1)
    if ends.size == 0:
        raise InsufficientDataError(f"no complete subsample of length {ell} in {n} observations")
    # position of 1-based time i within D is i - (m h + 1)
    end_pos = ends - (m * h + 1)
    total = np.zeros(ends.size)
    for u in range(ell):
        weight = config.kernel.evaluate(u / ell) / (ell - u)
        if weight == 0.0:
            continue
        prod = D[u:] * D[: D.size - u]  # prod[j] = D_{j+u} D_j (positions)
        csum = np.concatenate([[0.0], np.cumsum(prod)])
        # pairs (t, t-u) inside the window: t runs over [end-ell+1+u, end]
        hi = end_pos - u + 1
        lo = end_pos - ell + 1
        window = csum[hi] - csum[lo]
        total += (1.0 if u == 0 else 2.0) * weight * window
    value = float(total.mean())
    return LrvResult(value, np.array([]), config, regime(m, ell, h, config.kernel), extras={"subsamples": int(ends.size)})


def sample_acvf(x, max_lag: int) -> np.ndarray:
    """Globally centered sample autocovariances (divisor ``n``) for lags ``0..max_lag``."""
    y = _as_1d(x)
    c = y - y.mean()
    n = y.size
    return np.array([np.dot(c[k:], c[: n - k]) / n for k in range(max_lag + 1)])


def lrv_diff_kernel(x, config: EstimatorConfig) -> float:
    """``sum_{|k| <= ell + m h} K_diff(k/ell) gamma_hat_k^X`` on the raw series."""
    y = _as_1d(x)
    lags, weights = k_diff_weights(config.kernel, config.seq, config.ell, config.h)
    span = int(lags[-1])
    if span >= y.size:
        raise InsufficientDataError(f"need ell + m h < n, got {span} >= {y.size}")
    acvf = sample_acvf(y, span)
    return float(np.dot(weights, acvf[np.abs(lags)]))


def acvf_identity_check(x, k: int) -> tuple[float, float]:
    """Both sides of the lag-``k`` sample autocovariance identity.

    ``gamma_k = gamma_0 - (1/2n) sum (x_j - x_{j-|k|})^2 - (1/2n){edge terms}``
    where the edge terms are the squared centered values of the first and
    last ``|k|`` observations.
    """
    y = _as_1d(x)
    n = y.size
    k = abs(int(k))
    if k > n - 1:
        raise DomainError(f"lag {k} out of range for n={n}")
    c = y - y.mean()
    lhs = float(np.dot(c[k:], c[: n - k]) / n)
    gamma0 = float(np.dot(c, c) / n)
    diffs = y[k:] - y[: n - k]
    edges = float(np.sum(c[:k] ** 2) + np.sum(c[n - k :] ** 2)) if k > 0 else 0.0
    rhs = gamma0 - float(np.dot(diffs, diffs)) / (2 * n) - edges / (2 * n)
    return lhs, rhs


def long_run_correlation(x, config: EstimatorConfig) -> float:
    """``v[0,1] / sqrt(v[0,0] v[1,1])`` from the matrix estimate, clamped to [-1, 1]."""
    ts = as_series(x)
    if ts.S != 2:
        raise DomainError(f"long-run correlation needs exactly 2 columns, got {ts.S}")
    v = lrv_multivariate(ts, config).value
    # diagonals at rounding level (e.g. a constant column) count as zero
    floor = 1e-12 * np.max(ts.data**2, axis=0)
    if v[0, 0] <= floor[0] or v[1, 1] <= floor[1]:
        raise NumericError(
            "non-positive diagonal long-run variance; use a longer series or a different bandwidth"
        )
    return float(np.clip(v[0, 1] / math.sqrt(v[0, 0] * v[1, 1]), -1.0, 1.0))


def classical_config(kernel, ell: int) -> EstimatorConfig:
    """Zeroth-order (globally centered) configuration."""
    return EstimatorConfig(zero_sequence(), kernel, ell, 1)


def with_moment(config: EstimatorConfig, p: int) -> EstimatorConfig:
    return replace(config, p=p)
