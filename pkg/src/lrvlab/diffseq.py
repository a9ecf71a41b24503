"""Difference sequences: construction, normalization and lagged-product profiles.

A difference sequence of order ``m`` is a coefficient vector ``d_0, ..., d_m``
summing to zero.  It is *normalized* when ``sum(d**2) == 1``.  Everything the
estimators need from it is carried by the lagged self-products

    delta_s = sum_{j=|s|}^{m} d_j d_{j-|s|},   |s| <= m,

and by ``Delta_m = sum_{|s|<=m} delta_s**2``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError, FactorizationError

__all__ = [
    "DifferenceSequence",
    "binomial_sequence",
    "local_sequence",
    "optimal_sequence",
    "zero_sequence",
    "normalize",
    "lagged_products",
    "unambiguity_diagnostic",
]

_ZERO_SUM_TOL = 1e-9


def lagged_products(d) -> np.ndarray:
    """Return ``delta_0, ..., delta_m`` for the coefficient vector ``d``."""
    d = np.asarray(d, dtype=float)
    m = d.size - 1
    return np.correlate(d, d, mode="full")[m:]


@dataclass(frozen=True)
class DifferenceSequence:
    """Normalized difference sequence with its lagged self-products.

    Parameters
    ----------
    d : array_like
        Coefficients ``d_0, ..., d_m``.  The order is ``len(d) - 1``.

    Notes
    -----
    The order-0 sequence ``d = (1,)`` is a sentinel for the classical,
    globally centered estimator; it is the only sequence exempt from the
    zero-sum condition.
    """

    d: np.ndarray
    deltas: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        d = np.array(self.d, dtype=float).ravel()
        if d.size == 0:
            raise DomainError("difference sequence needs at least one coefficient")
        d.setflags(write=False)
        deltas = lagged_products(d)
        deltas.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "deltas", deltas)

    def __eq__(self, other):
        if not isinstance(other, DifferenceSequence):
            return NotImplemented
        return self.d.shape == other.d.shape and bool(np.all(self.d == other.d))

    def __hash__(self):
        return hash(self.d.tobytes())

    @property
    def m(self) -> int:
        return self.d.size - 1

    def delta(self, s: int) -> float:
        """``delta_{|s|}``; zero outside ``|s| <= m``."""
        s = abs(int(s))
        return float(self.deltas[s]) if s <= self.m else 0.0

    @property
    def big_delta(self) -> float:
        """``Delta_m = sum_{|s|<=m} delta_s**2``, the variance factor."""
        return float(self.deltas[0] ** 2 + 2.0 * np.sum(self.deltas[1:] ** 2))

    def symmetric_deltas(self) -> np.ndarray:
        """``delta_{-m}, ..., delta_m`` as one array."""
        return np.concatenate([self.deltas[:0:-1], self.deltas])

    def to_dict(self) -> dict:
        return {"m": self.m, "d": self.d.tolist(), "deltas": self.deltas.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, payload: dict) -> "DifferenceSequence":
        seq = cls(payload["d"])
        if "m" in payload and int(payload["m"]) != seq.m:
            raise DomainError(f"order m={payload['m']} does not match {seq.m + 1} coefficients")
        if "deltas" in payload and not np.allclose(payload["deltas"], seq.deltas, atol=1e-10):
            raise DomainError("stored deltas disagree with the coefficients")
        return seq

    @classmethod
    def from_json(cls, text: str) -> "DifferenceSequence":
        return cls.from_dict(json.loads(text))


def zero_sequence() -> DifferenceSequence:
    """Order-0 sentinel used by the classical (globally centered) estimator."""
    return DifferenceSequence([1.0])


def normalize(coefficients) -> DifferenceSequence:
    """Rescale a raw zero-sum vector to unit sum of squares.

    Vectors whose sum is within ``1e-9`` of zero are re-centered (mean
    subtracted) before scaling, so user rounding is tolerated.
    """
    d = np.asarray(coefficients, dtype=float).ravel()
    if d.size < 2:
        raise DomainError("a difference sequence of positive order needs >= 2 coefficients")
    if not np.all(np.isfinite(d)):
        raise DomainError("coefficients must be finite")
    total = float(np.sum(d))
    if abs(total) > _ZERO_SUM_TOL:
        raise DomainError(f"coefficients must sum to zero (sum={total:.3e})")
    d = d - total / d.size
    norm = math.sqrt(float(np.dot(d, d)))
    if norm == 0.0:
        raise DomainError("all-zero coefficient vector cannot be normalized")
    return DifferenceSequence(d / norm)


def binomial_sequence(m: int) -> DifferenceSequence:
    """Binomial differencing ``d_j = C(m, j) (-1)^j / C(2m, m)^{1/2}``."""
    m = int(m)
    if not 1 <= m <= 30:
        raise DomainError(f"binomial order must be in [1, 30], got {m}")
    c = np.empty(m + 1)
    c[0] = 1.0
    for j in range(1, m + 1):
        c[j] = c[j - 1] * (m - j + 1) / j
    # C(2m, m) by the same running product
    central = 1.0
    for j in range(1, m + 1):
        central = central * (m + j) / j
    signs = np.where(np.arange(m + 1) % 2 == 0, 1.0, -1.0)
    return DifferenceSequence(signs * c / math.sqrt(central))


def local_sequence(m: int) -> DifferenceSequence:
    """Local differencing: ``d_0 = sqrt(m/(m+1))`` and ``d_j = -1/sqrt(m^2+m)``."""
    m = int(m)
    if m < 1:
        raise DomainError(f"local differencing needs m >= 1, got {m}")
    d = np.full(m + 1, -1.0 / math.sqrt(m * m + m))
    d[0] = math.sqrt(m / (m + 1))
    return DifferenceSequence(d)


def _root_groups(roots):
    """Split roots into real singletons and complex-conjugate pairs."""
    groups = []
    pending = list(roots)
    while pending:
        r = pending.pop(0)
        if abs(r.imag) <= 1e-9 * max(1.0, abs(r)):
            groups.append([complex(r.real, 0.0)])
            continue
        j = int(np.argmin([abs(s - np.conj(r)) for s in pending]))
        groups.append([r, pending.pop(j)])
    return groups


def _newton_polish(d, target, max_iter=50, tol=1e-14):
    """Solve ``lagged_products(d) == target`` by Newton's method from ``d``."""
    m = d.size - 1
    residual = np.inf
    for it in range(1, max_iter + 1):
        resid = lagged_products(d) - target
        residual = float(np.max(np.abs(resid)))
        if residual < tol:
            return d, it, residual
        jac = np.zeros((m + 1, m + 1))
        for s in range(m + 1):
            for k in range(m + 1):
                if k - s >= 0:
                    jac[s, k] += d[k - s]
                if k + s <= m:
                    jac[s, k] += d[k + s]
        try:
            step = np.linalg.solve(jac, resid)
        except np.linalg.LinAlgError as exc:
            raise FactorizationError("singular Jacobian during refinement", it, residual) from exc
        d = d - step
    resid = lagged_products(d) - target
    return d, max_iter, float(np.max(np.abs(resid)))


def optimal_sequence(m: int, phase: str = "interlaced") -> DifferenceSequence:
    """MSE-optimal sequence with ``delta_1 = ... = delta_m = -1/(2m)``.

    The coefficients are a spectral factor of the Laurent polynomial
    ``sum_{|s|<=m} delta_s z^s``: its roots come in reciprocal pairs
    (plus a double root at ``z = 1``) and one root of each pair is kept.

    Parameters
    ----------
    m : int
        Order, ``1 <= m <= 10``.
    phase : {"interlaced", "minimum", "maximum"}
        Which root of each reciprocal pair to keep.  ``"minimum"`` keeps the
        roots inside the unit circle, ``"maximum"`` those outside.
        ``"interlaced"`` orders the root groups by angle and alternates
        inside/outside; it reproduces the commonly tabulated coefficients
        for ``m <= 4``.  All choices share the same lagged-product profile.

    Raises
    ------
    FactorizationError
        If the Newton refinement does not reach the target profile.
    """
    m = int(m)
    if not 1 <= m <= 10:
        raise DomainError(f"optimal order must be in [1, 10], got {m}")
    if phase not in ("interlaced", "minimum", "maximum"):
        raise DomainError(f"unknown phase {phase!r}")
    target = np.r_[1.0, np.full(m, -1.0 / (2 * m))]
    laurent = np.r_[target[:0:-1], target]  # palindromic, degree 2m
    # strip the double root at z = 1 before root finding
    reduced, rem = np.polydiv(laurent, np.array([1.0, -2.0, 1.0]))
    if np.max(np.abs(rem)) > 1e-10:
        raise FactorizationError("profile does not vanish at z = 1", 0, float(np.max(np.abs(rem))))
    roots = np.roots(reduced) if reduced.size > 1 else np.array([], dtype=complex)
    inside = [r for r in roots if abs(r) < 1.0]
    if len(inside) != m - 1:
        raise FactorizationError("roots on or near the unit circle", 0, float("nan"))
    groups = _root_groups(inside)
    groups.sort(key=lambda g: (abs(np.angle(g[0])), abs(g[0])))
    chosen = [1.0 + 0j]
    for k, g in enumerate(groups):
        keep_inside = phase == "minimum" or (phase == "interlaced" and k % 2 == 0)
        chosen.extend(g if keep_inside else [1.0 / r for r in g])
    d = np.real(np.poly(np.array(chosen)))
    d /= math.sqrt(float(np.dot(d, d)))
    d, iters, residual = _newton_polish(d, target)
    if residual > 1e-12:
        raise FactorizationError("refinement did not converge", iters, residual)
    if d[0] < 0:
        d = -d
    return DifferenceSequence(d)


def unambiguity_diagnostic(seq: DifferenceSequence, kernel, lam: float) -> float:
    """Finite-order limit ``2 sum_{s=1}^{floor(1/lam)} delta_s K(lam s)``.

    A nonzero value with ``lam < 1`` flags a configuration that cannot be
    consistent.  Returns 0 for ``lam >= 1``.
    """
    lam = float(lam)
    if not lam > 0:
        raise DomainError(f"lag ratio must be positive, got {lam}")
    if lam >= 1:
        return 0.0
    top = math.floor(1.0 / lam)
    total = 0.0
    for s in range(1, top + 1):
        total += seq.delta(s) * kernel(lam * s)
    return 2.0 * total
