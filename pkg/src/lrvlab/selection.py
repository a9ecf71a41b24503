"""Plug-in bandwidth selection and the suggested robust LRV estimator.

The bandwidth minimizing the leading-order MSE of the order-``m``
estimator is

    ell* = {q (v_q / v)^2 B^2 n / (2 A Delta_m)}^(1/(1+2q)),

where ``v_q = sum_k |k|^q gamma_k``.  The ratio ``v_q / v`` is replaced by
two pilot estimates computed on the roughly centered series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diffseq import DifferenceSequence, optimal_sequence, zero_sequence
from .estimators import EstimatorConfig, LrvResult, as_series, lrv, regime
from .exceptions import ConfigError, DomainError, InsufficientDataError, NumericError
from .kernels import KernelSpec, parse_kernel, parzen_poly
from .rcp import rough_center

__all__ = [
    "PlugInConfig",
    "PRESETS",
    "preset",
    "ceil_guarded",
    "optimal_bandwidth",
    "pilot_bandwidths",
    "pilot_estimates",
    "suggested_estimator",
    "bias_variance_constant",
    "asymptotic_mse_constant",
]

_PILOT_KERNEL = parzen_poly(2)
_DEGENERATE_RATIO = 1e-10


def ceil_guarded(x: float, tol: float = 1e-9) -> int:
    """Ceiling that ignores floating-point overshoot just above an integer."""
    r = round(x)
    if abs(x - r) <= tol * max(1.0, abs(x)):
        return int(r)
    return int(math.ceil(x))


@dataclass(frozen=True)
class PlugInConfig:
    """Settings of the suggested estimator.

    Parameters
    ----------
    m : int
        Order of the difference sequence; ``0`` gives the classical globally
        centered estimator with a plug-in bandwidth.
    kernel : KernelSpec or str
        Kernel of the final estimate; must declare ``q`` and ``B``.
    q : int, optional
        Characteristic exponent; taken from the kernel when omitted and
        rejected when it disagrees.
    apply_rcp : bool
        Roughly center the series before estimating.
    fallback_exponent : float, optional
        Exponent of the fallback bandwidth ``1.5 n^e``; defaults to
        ``1/(1+2q)``.
    seq : DifferenceSequence, optional
        Overrides the optimal sequence of order ``m``.
    """

    m: int = 3
    kernel: KernelSpec = parzen_poly(2)
    q: int | None = None
    apply_rcp: bool = True
    fallback_exponent: float | None = None
    seq: DifferenceSequence | None = None

    def __post_init__(self):
        kernel = parse_kernel(self.kernel)
        object.__setattr__(self, "kernel", kernel)
        q, _ = kernel.require_plugin_constants()
        if self.q is not None and int(self.q) != q:
            raise ConfigError(f"q={self.q} does not match the characteristic exponent {q} of {kernel}")
        object.__setattr__(self, "q", int(q))
        if int(self.m) != self.m or self.m < 0:
            raise ConfigError(f"order must be a non-negative integer, got {self.m}")
        object.__setattr__(self, "m", int(self.m))
        if self.seq is None:
            seq = zero_sequence() if self.m == 0 else optimal_sequence(self.m)
            object.__setattr__(self, "seq", seq)
        elif self.seq.m != self.m:
            raise ConfigError(f"sequence order {self.seq.m} does not match m={self.m}")
        if self.fallback_exponent is None:
            object.__setattr__(self, "fallback_exponent", 1.0 / (1 + 2 * self.q))

    @property
    def lam(self) -> float:
        return 2.0

    @property
    def big_delta(self) -> float:
        return self.seq.big_delta

    def estimator_config(self, ell: int, p: int = 0, kernel: KernelSpec | None = None) -> EstimatorConfig:
        h = 1 if self.m == 0 else 2 * int(ell)
        return EstimatorConfig(self.seq, self.kernel if kernel is None else kernel, int(ell), h, p)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "kernel": str(self.kernel),
            "q": self.q,
            "lambda": self.lam,
            "apply_rcp": self.apply_rcp,
            "fallback_exponent": self.fallback_exponent,
            "d": self.seq.d.tolist(),
        }


PRESETS = {
    "paper-default": dict(m=3, kernel="parzen_poly:q=2", apply_rcp=True),
    "v0*": dict(m=0, kernel="parzen_poly:q=2", apply_rcp=False),
    "v1*": dict(m=1, kernel="parzen_poly:q=2", apply_rcp=True),
    "v2*": dict(m=2, kernel="parzen_poly:q=2", apply_rcp=True),
    "v3*": dict(m=3, kernel="parzen_poly:q=2", apply_rcp=True),
}


def preset(name: str, **overrides) -> PlugInConfig:
    """Named configuration, with keyword overrides."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    kwargs = dict(PRESETS[name])
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return PlugInConfig(**kwargs)


def optimal_bandwidth(vq_over_v: float, kernel, m_or_delta, n: int, q: int | None = None) -> float:
    """Unrounded MSE-optimal bandwidth.

    Parameters
    ----------
    vq_over_v : float
        The ratio ``v_q / v`` (its sign is irrelevant).
    kernel : KernelSpec or str
        Supplies ``B`` and ``A`` (and ``q`` when not given).
    m_or_delta : int, DifferenceSequence or float
        An order (the optimal sequence of that order is used, ``0`` meaning
        ``Delta = 1``), a sequence, or ``Delta_m`` itself when a float.
    n : int
        Sample size, at least 10.
    q : int, optional
        Must match the kernel's exponent.

    Raises
    ------
    NumericError
        When ``vq_over_v`` is zero, i.e. the spectrum is flat to order ``q``.
    """
    kernel = parse_kernel(kernel)
    kq, B = kernel.require_plugin_constants()
    if q is not None and int(q) != kq:
        raise ConfigError(f"q={q} does not match the characteristic exponent {kq} of {kernel}")
    if n < 10:
        raise InsufficientDataError(f"plug-in bandwidth needs n >= 10, got {n}")
    if vq_over_v == 0 or not math.isfinite(vq_over_v):
        raise NumericError(f"degenerate ratio v_q/v = {vq_over_v}; the bandwidth formula needs v_q != 0")
    delta = _big_delta(m_or_delta)
    num = kq * vq_over_v**2 * B**2 * n
    return (num / (2.0 * kernel.A * delta)) ** (1.0 / (1 + 2 * kq))


def _big_delta(m_or_delta) -> float:
    if isinstance(m_or_delta, DifferenceSequence):
        return m_or_delta.big_delta
    if isinstance(m_or_delta, (int, np.integer)):
        return 1.0 if m_or_delta == 0 else optimal_sequence(int(m_or_delta)).big_delta
    return float(m_or_delta)


def pilot_bandwidths(n: int, q: int) -> tuple[int, int]:
    """Rounded pilot bandwidths ``ceil(2 n^(1/(5+2q)))`` and ``ceil(2 n^(1/5))``."""
    return ceil_guarded(2.0 * n ** (1.0 / (5 + 2 * q))), ceil_guarded(2.0 * n ** (1.0 / 5))


def pilot_estimates(x, cfg: PlugInConfig | None = None, details: bool = False):
    """Pilot estimates ``(v_sharp, vq_sharp)`` on an already centered series.

    Both use the order-2 Parzen kernel and ``h = 2 ell`` with the rounded
    pilot bandwidths.  With ``details=True`` a third element carries the
    pilot ``gamma_0^D`` and the bandwidths.
    """
    cfg = PlugInConfig() if cfg is None else cfg
    y = np.asarray(x.data if hasattr(x, "data") else x, dtype=float)
    n = y.shape[0]
    ell_q, ell_0 = pilot_bandwidths(n, cfg.q)
    for ell in (ell_q, ell_0):
        h = 1 if cfg.m == 0 else 2 * ell
        if cfg.m * h + ell >= n:
            raise InsufficientDataError(f"pilot bandwidth {ell} too large for n={n} and m={cfg.m}")
    r_q = lrv(y, cfg.estimator_config(ell_q, p=cfg.q, kernel=_PILOT_KERNEL))
    r_0 = lrv(y, cfg.estimator_config(ell_0, p=0, kernel=_PILOT_KERNEL))
    if not details:
        return r_0.value, r_q.value
    info = {"ell_v": ell_0, "ell_vq": ell_q, "gamma0_d": r_0.gamma_d[0]}
    return r_0.value, r_q.value, info


def _select_bandwidth(y, cfg: PlugInConfig):
    """Rounded and clamped plug-in bandwidth for one centered column."""
    n = y.size
    v, vq, info = pilot_estimates(y, cfg, details=True)
    ratio_sq = (vq / v) ** 2 if v != 0 else math.inf
    # difference statistics at rounding level (a constant series) carry no information
    flat = info["gamma0_d"] <= _DEGENERATE_RATIO**2 * float(np.mean(y * y))
    fallback = flat or v <= _DEGENERATE_RATIO * info["gamma0_d"] or ratio_sq > n or vq == 0
    if fallback:
        ell_star = 1.5 * n**cfg.fallback_exponent
    else:
        ell_star = optimal_bandwidth(vq / v, cfg.kernel, cfg.big_delta, n)
    upper = (n - 1) // (2 * cfg.m + 2)
    ell = min(max(ceil_guarded(ell_star), 2), upper)
    if ell < 2:
        raise InsufficientDataError(f"series of length {n} too short for order {cfg.m}")
    diag = {
        "ell_star": float(ell_star),
        "fallback": bool(fallback),
        "pilot_v": float(v),
        "pilot_vq": float(vq),
        "pilot_ell_v": info["ell_v"],
        "pilot_ell_vq": info["ell_vq"],
    }
    return ell, diag


def suggested_estimator(x, cfg: PlugInConfig | None = None) -> LrvResult:
    """Robust plug-in estimate of the long-run variance.

    Steps: optional rough centering, pilot estimates, plug-in bandwidth
    ``ceil(ell*)`` clamped to ``[2, floor((n-1)/(2m+2))]``, then the
    order-``m`` estimate with ``h = 2 ell``.  When the pilots are degenerate
    the bandwidth falls back to ``ceil(1.5 n^(1/(1+2q)))``.

    For multivariate input every column is centered separately and the
    common bandwidth is the rounded-up mean of the per-column choices.
    """
    cfg = PlugInConfig() if cfg is None else cfg
    ts = as_series(x)
    if ts.n < 50:
        raise InsufficientDataError(f"suggested estimator needs n >= 50, got {ts.n}")
    columns, reports = [], []
    for j in range(ts.S):
        col = ts.column(j)
        if cfg.apply_rcp:
            col, report = rough_center(col)
            reports.append(report)
        columns.append(col)
    choices = [_select_bandwidth(col, cfg) for col in columns]
    if ts.S == 1:
        ell, diag = choices[0]
        data = columns[0]
    else:
        ell = ceil_guarded(float(np.mean([c[0] for c in choices])))
        diag = {"per_column": [dict(c[1], ell=c[0]) for c in choices]}
        data = np.column_stack(columns)
    config = cfg.estimator_config(ell)
    result = lrv(data, config)
    result.extras.update(diag)
    result.extras.update({"ell": config.ell, "h": config.h, "plugin": cfg.to_dict()})
    if cfg.apply_rcp:
        result.extras["rcp"] = reports[0].to_dict() if ts.S == 1 else [r.to_dict() for r in reports]
    result.regime = regime(config.m, config.ell, config.h, config.kernel)
    return result


def bias_variance_constant(bias_sq: float, variance: float, q: int) -> float:
    """Minimum over ``ell`` of ``bias_sq / ell^(2q) + variance * ell``, times ``n^(2q/(1+2q))``.

    Equals ``(1+2q) bias_sq^(1/(1+2q)) (variance/(2q))^(2q/(1+2q))``.
    """
    if bias_sq < 0 or variance <= 0 or q < 1:
        raise DomainError("need bias_sq >= 0, variance > 0 and q >= 1")
    e = 1.0 / (1 + 2 * q)
    return (1 + 2 * q) * bias_sq**e * (variance / (2 * q)) ** (2 * q * e)


def asymptotic_mse_constant(kernel, m_or_delta=3, q: int | None = None, eta_q: float = 1.0) -> float:
    """Limit of ``n^(2q/(1+2q)) MSE / v^2`` at the optimal bandwidth.

    ``(1+2q) {B^2 (2 A Delta_m / q)^(2q) eta_q^2}^(1/(1+2q))`` with
    ``eta_q = |v_q / v|``.  The order argument is interpreted as in
    :func:`optimal_bandwidth`.
    """
    kernel = parse_kernel(kernel)
    kq, B = kernel.require_plugin_constants()
    if q is not None and int(q) != kq:
        raise ConfigError(f"q={q} does not match the characteristic exponent {kq} of {kernel}")
    delta = _big_delta(m_or_delta)
    return bias_variance_constant(B**2 * eta_q**2, 4.0 * kernel.A * delta, kq)
