"""Lag-window kernels with their analytic constants, and the differencing kernel.

Every kernel here is even, equals 1 at the origin and vanishes for
``|t| >= 1``.  Besides evaluation, each :class:`KernelSpec` knows

* ``q, B``  -- near-origin behaviour ``(K(t) - 1)/|t|^q -> B``;
* ``q_prime, B_prime`` -- near-boundary behaviour ``(K(1) - K(1-t))/t^q' -> B'``;
* ``A = int_0^1 K^2``, ``A_p = int_0^1 t^{2p} K^2`` and ``kappa = int_{-1}^1 K``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate

from .exceptions import ConfigError, DomainError

__all__ = [
    "KernelSpec",
    "bartlett",
    "parzen_poly",
    "tukey_hanning",
    "parzen_classic",
    "modified_poly",
    "truncated",
    "trapezoidal",
    "lugsail",
    "parse_kernel",
    "CATALOG",
    "k_diff",
    "k_diff_lattice",
    "k_diff_weights",
]

_QUAD_TOL = 1e-10


def _modified_coefficients(q):
    return 4.0 - (q + 1) * 2.0**q, q * 2.0 ** (q + 1) - 4.0


@lru_cache(maxsize=None)
def _modified_pieces(q):
    """Inner (|t| <= 1/2) and outer (1/2 < |t| <= 1) polynomials in |t|."""
    a, b = _modified_coefficients(q)
    inner = Polynomial([1.0]) - Polynomial.basis(q) + a * Polynomial.basis(q + 1) + b * Polynomial.basis(q + 2)
    u = Polynomial([1.0, -1.0])  # 1 - |t|
    outer = u**q - a * u ** (q + 1) - b * u ** (q + 2)
    return inner, outer


@dataclass(frozen=True)
class KernelSpec:
    """A named kernel together with its tuning parameters.

    Construct through the module-level factories (:func:`bartlett`,
    :func:`parzen_poly`, ...) or :func:`parse_kernel`.
    """

    name: str
    params: tuple = ()
    base: "KernelSpec | None" = field(default=None, compare=True)

    # -- parameters -------------------------------------------------------
    def param(self, key, default=None):
        return dict(self.params).get(key, default)

    def __str__(self):
        parts = [f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}" for k, v in self.params]
        if self.base is not None:
            base_name, _, base_opts = str(self.base).partition(":")
            parts = [f"base={base_name}"] + ([base_opts] if base_opts else []) + parts
        return self.name + (":" + ",".join(parts) if parts else "")

    # -- evaluation -------------------------------------------------------
    def __call__(self, t):
        return self.evaluate(t)

    def evaluate(self, t):
        """Kernel value(s); support is cut exactly at ``|t| >= 1``."""
        arr = np.abs(np.asarray(t, dtype=float))
        out = np.where(arr < 1.0, self._raw(np.minimum(arr, 1.0)), 0.0)
        return float(out) if out.ndim == 0 else out

    def _raw(self, a):
        name = self.name
        if name == "bartlett":
            return 1.0 - a
        if name == "parzen_poly":
            return 1.0 - a ** self.param("q")
        if name == "tukey_hanning":
            return 0.5 * (1.0 + np.cos(np.pi * a))
        if name == "parzen_classic":
            return np.where(a <= 0.5, 1.0 - 6.0 * a**2 + 6.0 * a**3, 2.0 * (1.0 - a) ** 3)
        if name == "modified_poly":
            inner, outer = _modified_pieces(self.param("q"))
            return np.where(a <= 0.5, inner(a), outer(a))
        if name == "truncated":
            return np.ones_like(a)
        if name == "trapezoidal":
            c = self.param("c")
            return np.where(a <= c, 1.0, (1.0 - a) / (1.0 - c))
        if name == "lugsail":
            r, c = self.param("r"), self.param("c")
            return (self.base.evaluate(a) - c * self.base.evaluate(r * a)) / (1.0 - c)
        raise ConfigError(f"unknown kernel {name!r}")

    # -- characteristic exponents ----------------------------------------
    @property
    def q(self):
        """Characteristic exponent, or ``None`` when the kernel has none."""
        name = self.name
        if name == "bartlett":
            return 1
        if name in ("parzen_poly", "modified_poly"):
            return self.param("q")
        if name in ("tukey_hanning", "parzen_classic"):
            return 2
        if name == "lugsail":
            return self.base.q if self.B is not None else None
        return None

    @property
    def B(self):
        name = self.name
        if name in ("bartlett", "parzen_poly", "modified_poly"):
            return -1.0
        if name == "tukey_hanning":
            return -(math.pi**2) / 4.0
        if name == "parzen_classic":
            return -6.0
        if name == "lugsail":
            q0, b0 = self.base.q, self.base.B
            if q0 is None:
                return None
            r, c = self.param("r"), self.param("c")
            value = b0 * (1.0 - c * r**q0) / (1.0 - c)
            return None if abs(value) < 1e-14 else value
        return None

    @property
    def q_prime(self):
        name = self.name
        if name in ("bartlett", "parzen_poly", "trapezoidal"):
            return 1
        if name == "tukey_hanning":
            return 2
        if name == "parzen_classic":
            return 3
        if name == "modified_poly":
            return self.param("q")
        return None

    @property
    def B_prime(self):
        name = self.name
        if name == "bartlett":
            return -1.0
        if name == "parzen_poly":
            return -float(self.param("q"))
        if name == "tukey_hanning":
            return -(math.pi**2) / 4.0
        if name == "parzen_classic":
            return -2.0
        if name == "modified_poly":
            return -1.0
        if name == "trapezoidal":
            return -1.0 / (1.0 - self.param("c"))
        return None

    # -- integral constants ----------------------------------------------
    def _breakpoints(self):
        if self.name in ("parzen_classic", "modified_poly"):
            return [0.5]
        if self.name == "trapezoidal":
            return [self.param("c")]
        if self.name == "lugsail":
            r = self.param("r")
            pts = [1.0 / r] if r > 1 else []
            pts += list(self.base._breakpoints())
            pts += [p / r for p in self.base._breakpoints()]
            return sorted({p for p in pts if 0.0 < p < 1.0})
        return []

    def _quad(self, fn):
        value, _ = integrate.quad(
            fn, 0.0, 1.0, points=self._breakpoints() or None, epsabs=_QUAD_TOL * 1e-2, epsrel=_QUAD_TOL * 1e-2, limit=200
        )
        return value

    def A_p(self, p: float = 0) -> float:
        """``int_0^1 t^{2p} K(t)^2 dt``."""
        if p < 0:
            raise DomainError(f"moment order must be >= 0, got {p}")
        return self._A_p_cached(float(p))

    @cached_property
    def A(self) -> float:
        """``int_0^1 K(t)^2 dt``."""
        return self.A_p(0)

    @cached_property
    def kappa(self) -> float:
        """``int_{-1}^1 K(t) dt``."""
        name = self.name
        if name == "bartlett":
            return 1.0
        if name == "parzen_poly":
            q = self.param("q")
            return 2.0 * q / (q + 1.0)
        if name == "truncated":
            return 2.0
        if name == "modified_poly":
            inner, outer = _modified_pieces(self.param("q"))
            ii, oi = inner.integ(), outer.integ()
            return 2.0 * ((ii(0.5) - ii(0.0)) + (oi(1.0) - oi(0.5)))
        return 2.0 * self._quad(self.evaluate)

    def _A_p_cached(self, p):
        cache = self.__dict__.setdefault("_ap_cache", {})
        if p not in cache:
            cache[p] = self._compute_A_p(p)
        return cache[p]

    def _compute_A_p(self, p):
        name = self.name
        if name in ("bartlett", "parzen_poly"):
            q = 1 if name == "bartlett" else self.param("q")
            return 1.0 / (2 * p + 1) - 2.0 / (2 * p + q + 1) + 1.0 / (2 * p + 2 * q + 1)
        if name == "truncated":
            return 1.0 / (2 * p + 1)
        if name == "modified_poly" and float(p).is_integer():
            inner, outer = _modified_pieces(self.param("q"))
            w = Polynomial.basis(int(2 * p))
            ii, oi = (w * inner**2).integ(), (w * outer**2).integ()
            return float((ii(0.5) - ii(0.0)) + (oi(1.0) - oi(0.5)))
        return self._quad(lambda t: t ** (2 * p) * self.evaluate(t) ** 2)

    def constants(self, p: float = 0) -> tuple[float, float, float]:
        """Return ``(A, A_p, kappa)``."""
        return self.A, self.A_p(p), self.kappa

    def require_plugin_constants(self):
        """Return ``(q, B)``; raise :class:`ConfigError` unless both are declared."""
        if self.q is None or self.B is None:
            raise ConfigError(f"kernel {self} has no characteristic exponent; it cannot drive the optimal bandwidth")
        return self.q, self.B


def bartlett() -> KernelSpec:
    return KernelSpec("bartlett")


def parzen_poly(q: int = 2) -> KernelSpec:
    """Polynomial kernel ``(1 - |t|^q)^+``."""
    q = int(q)
    if q < 1:
        raise DomainError(f"polynomial kernel order must be >= 1, got {q}")
    return KernelSpec("parzen_poly", (("q", q),))


def tukey_hanning() -> KernelSpec:
    return KernelSpec("tukey_hanning")


def parzen_classic() -> KernelSpec:
    return KernelSpec("parzen_classic")


def modified_poly(q: int = 2) -> KernelSpec:
    """Smooth polynomial kernel whose boundary flatness matches its origin flatness."""
    q = int(q)
    if q < 1:
        raise DomainError(f"modified polynomial order must be >= 1, got {q}")
    return KernelSpec("modified_poly", (("q", q),))


def truncated() -> KernelSpec:
    return KernelSpec("truncated")


def trapezoidal(c: float = 0.5) -> KernelSpec:
    c = float(c)
    if not 0.0 < c < 1.0:
        raise DomainError(f"trapezoidal flat-top fraction must lie in (0, 1), got {c}")
    return KernelSpec("trapezoidal", (("c", c),))


def lugsail(base: KernelSpec | None = None, r: float = 3.0, c: float = 0.5) -> KernelSpec:
    base = bartlett() if base is None else base
    r, c = float(r), float(c)
    if r < 1.0 or not 0.0 <= c < 1.0:
        raise DomainError(f"lugsail needs r >= 1 and 0 <= c < 1, got r={r}, c={c}")
    if base.name == "lugsail":
        raise DomainError("nested lugsail kernels are not supported")
    return KernelSpec("lugsail", (("r", r), ("c", c)), base=base)


_FACTORIES = {
    "bartlett": bartlett,
    "parzen_poly": parzen_poly,
    "tukey_hanning": tukey_hanning,
    "parzen_classic": parzen_classic,
    "modified_poly": modified_poly,
    "truncated": truncated,
    "trapezoidal": trapezoidal,
}

#: One representative of every kernel family, used by catalog-wide checks.
CATALOG = (
    bartlett(),
    parzen_poly(1),
    parzen_poly(2),
    parzen_poly(3),
    tukey_hanning(),
    parzen_classic(),
    modified_poly(1),
    modified_poly(2),
    truncated(),
    trapezoidal(0.5),
    lugsail(bartlett(), 3.0, 0.5),
    lugsail(parzen_poly(2), 3.0, 0.25),
)


def _number(text):
    value = float(text)
    return int(value) if value.is_integer() and "." not in text else value


def parse_kernel(text: str | KernelSpec) -> KernelSpec:
    """Build a kernel from strings such as ``"parzen_poly:q=2"``.

    Lugsail takes its base inline: ``"lugsail:base=parzen_poly,q=2,r=3,c=0.25"``.
    """
    if isinstance(text, KernelSpec):
        return text
    name, _, rest = str(text).strip().partition(":")
    kwargs = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"malformed kernel option {item!r} in {text!r}")
        kwargs[key.strip()] = value.strip()
    if name == "lugsail":
        base_name = kwargs.pop("base", "bartlett")
        r = float(kwargs.pop("r", 3.0))
        c = float(kwargs.pop("c", 0.5))
        base = parse_kernel(base_name + (":" + ",".join(f"{k}={v}" for k, v in kwargs.items()) if kwargs else ""))
        return lugsail(base, r, c)
    if name not in _FACTORIES:
        raise ConfigError(f"unknown kernel {name!r}; choose from {sorted(_FACTORIES) + ['lugsail']}")
    try:
        return _FACTORIES[name](**{k: _number(v) for k, v in kwargs.items()})
    except TypeError as exc:
        raise ConfigError(f"bad options for kernel {name!r}: {exc}") from exc


# -- differencing kernel ---------------------------------------------------

def k_diff(kernel: KernelSpec, seq, lam: float, t):
    """Effective kernel ``sum_s delta_{|s|} K(t + lam s)`` applied to raw autocovariances."""
    lam = float(lam)
    if not lam > 0:
        raise DomainError(f"lag ratio must be positive, got {lam}")
    t_arr = np.asarray(t, dtype=float)
    lo = np.ceil(-(1.0 + t_arr) / lam)
    hi = np.floor((1.0 - t_arr) / lam)
    out = np.zeros_like(t_arr)
    for s in range(-seq.m, seq.m + 1):
        active = (lo <= s) & (s <= hi)
        out = out + np.where(active, seq.delta(s) * kernel.evaluate(t_arr + lam * s), 0.0)
    return float(out) if out.ndim == 0 else out


def k_diff_lattice(kernel: KernelSpec, seq, ell: int, h: int, k: int) -> float:
    """``K_diff(k / ell)`` with ``lam = h / ell``; summation limits in exact integers."""
    ell, h, k = int(ell), int(h), int(k)
    lo = -((ell + k) // h)  # ceil(-(ell + k) / h)
    hi = (ell - k) // h  # floor((ell - k) / h)
    total = 0.0
    for s in range(max(lo, -seq.m), min(hi, seq.m) + 1):
        total += seq.delta(s) * kernel.evaluate((k + h * s) / ell)
    return total


def k_diff_weights(kernel: KernelSpec, seq, ell: int, h: int) -> tuple[np.ndarray, np.ndarray]:
    """Lags ``k`` with ``|k| <= ell + m h`` and the weights ``K_diff(k / ell)``."""
    span = int(ell) + seq.m * int(h)
    ell, h = int(ell), int(h)
    lags = np.arange(-span, span + 1)
    lo = -((ell + lags) // h)
    hi = (ell - lags) // h
    weights = np.zeros(lags.size)
    for s in range(-seq.m, seq.m + 1):
        active = (lo <= s) & (s <= hi)
        weights += np.where(active, seq.delta(s) * np.asarray(kernel.evaluate((lags + h * s) / ell)), 0.0)
    return lags, weights
