"""Noise models, mean functions and Monte Carlo experiments.

Every experiment is a list of independent replications; replication ``i``
uses the random stream seeded by ``(seed, i)`` and all summaries are formed
in index order, so tables are identical for any number of workers.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .estimators import classical_config, lrv
from .exceptions import ConfigError, DomainError
from .inference import kolmogorov_quantile, ks_statistic, scb, wz_critical_value, wz_scan, wz_window
from .kernels import bartlett
from .mc import run_replications
from .selection import preset, suggested_estimator

__all__ = [
    "NoiseModel",
    "MeanFunctionSpec",
    "MEAN_KINDS",
    "generate",
    "lrv_oracle",
    "cache_dir",
    "ExperimentTable",
    "estimator_set",
    "mse_experiment",
    "power_experiment",
    "coverage_experiment",
    "run_experiment",
    "BURN_IN",
]

log = logging.getLogger(__name__)

BURN_IN = 1000


# -- noise ------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseModel:
    """Stationary noise: ``iid_normal``, ``ar``, ``ma`` or ``tar``.

    ``coeffs`` holds the AR or MA coefficients; ``theta`` the two TAR
    regime coefficients (used when the previous value is ``>= 0`` and
    ``< 0``, respectively).  With ``normalize_to_unit_lrv`` the noise is
    divided by the square root of its long-run variance.
    """

    kind: str = "iid_normal"
    coeffs: tuple = ()
    sigma: float = 1.0
    theta: tuple = (0.5, 0.5)
    normalize_to_unit_lrv: bool = False

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        object.__setattr__(self, "theta", tuple(float(c) for c in self.theta))
        if self.kind not in ("iid_normal", "ar", "ma", "tar"):
            raise DomainError(f"unknown noise kind {self.kind!r}")
        if not self.sigma > 0:
            raise DomainError(f"innovation scale must be positive, got {self.sigma}")
        if self.kind == "ar" and self.coeffs:
            companion = np.zeros((len(self.coeffs), len(self.coeffs)))
            companion[0] = self.coeffs
            companion[1:, :-1] = np.eye(len(self.coeffs) - 1)
            if np.max(np.abs(np.linalg.eigvals(companion))) >= 1.0:
                raise DomainError(f"AR coefficients {self.coeffs} are not stationary")
        if self.kind == "tar":
            if len(self.theta) != 2 or max(abs(t) for t in self.theta) >= 1.0:
                raise DomainError(f"TAR coefficients must satisfy |theta| < 1, got {self.theta}")

    @classmethod
    def iid(cls, sigma: float = 1.0, normalize: bool = False) -> "NoiseModel":
        return cls("iid_normal", sigma=sigma, normalize_to_unit_lrv=normalize)

    @classmethod
    def ar(cls, coeffs, sigma: float = 1.0, normalize: bool = False) -> "NoiseModel":
        return cls("ar", tuple(coeffs), sigma=sigma, normalize_to_unit_lrv=normalize)

    @classmethod
    def ma(cls, coeffs, sigma: float = 1.0, normalize: bool = False) -> "NoiseModel":
        return cls("ma", tuple(coeffs), sigma=sigma, normalize_to_unit_lrv=normalize)

    @classmethod
    def tar(cls, theta1: float, theta2: float = 0.5, normalize: bool = True) -> "NoiseModel":
        return cls("tar", theta=(theta1, theta2), normalize_to_unit_lrv=normalize)

    @classmethod
    def from_dict(cls, payload: dict) -> "NoiseModel":
        payload = dict(payload)
        kind = payload.pop("kind", "iid_normal")
        normalize = bool(payload.pop("normalize", payload.pop("normalize_to_unit_lrv", kind == "tar")))
        if kind == "tar":
            return cls.tar(payload.get("theta1", 0.4), payload.get("theta2", 0.5), normalize)
        return cls(kind, tuple(payload.get("coeffs", ())), float(payload.get("sigma", 1.0)),
                   normalize_to_unit_lrv=normalize)

    def to_dict(self) -> dict:
        return asdict(self)

    def raw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Unnormalized draw of length ``n`` after the burn-in."""
        eps = rng.standard_normal(BURN_IN + n) * self.sigma
        if self.kind == "iid_normal":
            z = eps
        elif self.kind == "ar":
            z = lfilter([1.0], np.r_[1.0, -np.asarray(self.coeffs)], eps)
        elif self.kind == "ma":
            z = lfilter(np.r_[1.0, np.asarray(self.coeffs)], [1.0], eps)
        else:
            z = _tar_path(eps, *self.theta)
        return z[BURN_IN:]

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        z = self.raw(n, rng)
        if self.normalize_to_unit_lrv:
            z = z / math.sqrt(lrv_oracle(self, normalized=False))
        return z


def _tar_path(eps, theta1, theta2):
    z = np.empty_like(eps)
    prev = 0.0
    for i, e in enumerate(eps.tolist()):
        prev = (theta1 if prev >= 0.0 else theta2) * prev + e
        z[i] = prev
    return z


def _tar_chains(theta1, theta2, chains, length, burn, seed):
    """``length * var(chain mean)`` over independent chains; the ``O(1/length)`` bias is negligible."""
    rng = np.random.default_rng(seed)
    z = np.zeros(chains)
    total = np.zeros(chains)
    for step in range(burn + length):
        z = np.where(z >= 0.0, theta1, theta2) * z + rng.standard_normal(chains)
        if step >= burn:
            total += z
    means = total / length
    return float(length * np.var(means, ddof=1))


def _tar_presim(theta1, theta2, seed):
    rng = np.random.default_rng(seed)
    path = _tar_path(rng.standard_normal(10_000 + 1_000_000), theta1, theta2)[10_000:]
    return float(lrv(path, classical_config(bartlett(), 1000)).value)


def cache_dir() -> Path:
    """Directory for cached TAR constants (``LRVLAB_CACHE`` or ``~/.cache/lrvlab``)."""
    root = os.environ.get("LRVLAB_CACHE")
    return Path(root) if root else Path.home() / ".cache" / "lrvlab"


_ORACLE_MEMO: dict = {}
_ORACLE_SEED = 20240601


def _tar_key(theta1, theta2, method):
    return f"tar:{theta1!r}:{theta2!r}:{method}"


def lrv_oracle(noise: NoiseModel, normalized: bool | None = None, method: str = "chains") -> float:
    """Long-run variance of the noise model.

    Closed forms ``sigma^2 (sum psi)^2`` for iid, AR and MA noise.  TAR
    noise with unequal regimes has no closed form; the constant is
    simulated once and cached on disk keyed by the two coefficients.

    Parameters
    ----------
    normalized : bool, optional
        Report the variance of the normalized noise (``1``); defaults to the
        model's own flag.
    method : {"chains", "presim"}
        TAR simulation: ``"chains"`` averages 20000 independent chains of
        length 10^4; ``"presim"`` applies the Bartlett estimator with
        bandwidth 1000 to a single path of length 10^6.
    """
    normalized = noise.normalize_to_unit_lrv if normalized is None else normalized
    if normalized:
        return 1.0
    s2 = noise.sigma**2
    if noise.kind == "iid_normal":
        return s2
    if noise.kind == "ar":
        return s2 / (1.0 - sum(noise.coeffs)) ** 2
    if noise.kind == "ma":
        return s2 * (1.0 + sum(noise.coeffs)) ** 2
    theta1, theta2 = noise.theta
    if theta1 == theta2:
        return 1.0 / (1.0 - theta1) ** 2
    if method not in ("chains", "presim"):
        raise DomainError(f"unknown oracle method {method!r}")
    key = _tar_key(theta1, theta2, method)
    if key in _ORACLE_MEMO:
        return _ORACLE_MEMO[key]
    path = cache_dir() / "tar_lrv.json"
    stored = {}
    try:
        stored = json.loads(path.read_text())
    except (OSError, ValueError):
        stored = {}
    if key not in stored:
        log.info("simulating TAR long-run variance for %s", key)
        if method == "chains":
            value = _tar_chains(theta1, theta2, 20_000, 10_000, BURN_IN, _ORACLE_SEED)
        else:
            value = _tar_presim(theta1, theta2, _ORACLE_SEED)
        stored[key] = value
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(f".{os.getpid()}.tmp")
            tmp.write_text(json.dumps(stored, indent=1, sort_keys=True))
            tmp.replace(path)
        except OSError as exc:
            log.warning("cannot write oracle cache %s: %s", path, exc)
    _ORACLE_MEMO[key] = float(stored[key])
    return _ORACLE_MEMO[key]


# -- mean functions ---------------------------------------------------------

MEAN_KINDS = (
    "zero",
    "h1a",
    "h1b",
    "h1c",
    "exp_three_jumps",
    "linear",
    "steps",
    "linear_plus_steps",
    "cosine",
    "spike",
)


@dataclass(frozen=True)
class MeanFunctionSpec:
    """Mean function ``mu(t)`` on ``[0, 1]``, evaluated at ``t = i/n``.

    ``xi`` scales the jump families and the cosine; ``C`` and ``S`` are the
    slope and step height of the ``linear``/``steps`` families.
    """

    kind: str = "zero"
    xi: float = 1.0
    C: float = 1.0
    S: float = 1.0

    def __post_init__(self):
        if self.kind not in MEAN_KINDS:
            raise DomainError(f"unknown mean function {self.kind!r}; choose from {MEAN_KINDS}")

    @classmethod
    def from_dict(cls, payload: dict) -> "MeanFunctionSpec":
        return cls(**{k: payload[k] for k in ("kind", "xi", "C", "S") if k in payload})

    def with_xi(self, xi: float) -> "MeanFunctionSpec":
        return MeanFunctionSpec(self.kind, float(xi), self.C, self.S)

    def parts(self, t):
        """Continuous part and list of ``(threshold, size)`` steps (``size`` added for ``t > threshold``)."""
        t = np.asarray(t, dtype=float)
        xi, k = self.xi, self.kind
        zero = np.zeros_like(t)
        if k == "zero":
            return zero, []
        if k == "h1a":
            return zero, [(0.2, xi)]
        if k == "h1b":
            return xi * np.sin(2 * np.pi * t) / 2, [(0.2, xi)]
        if k == "h1c":
            return zero, [(0.2, xi), (0.8, -xi)]
        if k == "exp_three_jumps":
            return xi * np.exp(t), [(0.3, xi), (0.6, 2 * xi), (0.8, 4 * xi)]
        if k == "linear":
            return self.C * t, []
        if k == "steps":
            return zero, [(0.25, self.S), (0.5, self.S), (0.75, self.S)]
        if k == "linear_plus_steps":
            return self.C * t, [(0.25, self.S), (0.5, self.S), (0.75, self.S)]
        if k == "cosine":
            return xi * np.cos(2 * np.pi * t), []
        return zero, [(0.3, 10 * xi), (0.35, -9 * xi)]

    def lattice_steps(self, n: int):
        """Steps as ``(T, size)`` with ``T`` the first 1-based index where they apply."""
        i = np.arange(1, n + 1)
        _, steps = self.parts(i / n)
        out = {}
        for threshold, size in steps:
            if self.kind == "h1c" and size < 0:
                active = i >= 8 * n / 10  # 1(2n/10 < i < 8n/10) switches off at i = 8n/10
            else:
                active = i > threshold * n if self.kind in ("h1a", "h1b", "h1c") else i / n > threshold
            idx = np.flatnonzero(active)
            if idx.size == 0 or size == 0:
                continue
            T = int(idx[0]) + 1
            out[T] = out.get(T, 0.0) + size
        return sorted((T, s) for T, s in out.items() if T > 1 and s != 0.0)

    def evaluate(self, n: int) -> np.ndarray:
        """``mu_i = mu(i/n)`` for ``i = 1, ..., n``."""
        i = np.arange(1, n + 1)
        cont, _ = self.parts(i / n)
        mu = np.array(cont, dtype=float)
        for T, size in self.lattice_steps(n):
            mu[T - 1 :] += size
        return mu

    def diagnostics(self, n: int) -> dict:
        """Trend slope bound ``C``, step bound ``S``, jump count ``J``, gap ``G`` and variability ``V``."""
        i = np.arange(1, n + 1)
        cont, _ = self.parts(i / n)
        steps = self.lattice_steps(n)
        times = [1] + [T for T, _ in steps] + [n + 1]
        mu = self.evaluate(n)
        return {
            "C": float(np.max(np.abs(np.diff(cont))) * n) if n > 1 else 0.0,
            "S": float(max((abs(s) for _, s in steps), default=0.0)),
            "J": len(steps),
            "G": int(min(b - a for a, b in zip(times, times[1:]))),
            "V": float(np.mean((mu - mu.mean()) ** 2)),
        }


def generate(noise: NoiseModel, mean: MeanFunctionSpec, n: int, seed) -> np.ndarray:
    """``X_i = mu(i/n) + Z_i``; ``seed`` is an int, a seed sequence or a Generator."""
    if n < 8:
        raise DomainError(f"need n >= 8, got {n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return mean.evaluate(n) + noise.draw(n, rng)


# -- experiment tables ------------------------------------------------------

@dataclass
class ExperimentTable:
    """Rows of an experiment summary with a fixed column order."""

    columns: list
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in self.columns])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"columns": self.columns, "rows": self.rows, "meta": self.meta}

    def lookup(self, **match) -> dict:
        for row in self.rows:
            if all(row[k] == v for k, v in match.items()):
                return row
        raise KeyError(match)


def estimator_set(names) -> list:
    """Resolve names such as ``"v3*"`` or ``"paper-default"`` to ``(name, PlugInConfig)`` pairs."""
    out = []
    for item in names:
        if isinstance(item, tuple):
            out.append(item)
        else:
            out.append((item, preset(item)))
    return out


def _prime_noise(noise):
    # simulate the TAR constant once in the parent, not in every worker
    if noise.normalize_to_unit_lrv:
        lrv_oracle(noise, normalized=False)


def _mse_rep(rng, index, noise, mean, n, estimators):
    x = generate(noise, mean, n, rng)
    return [float(suggested_estimator(x, cfg).value) for _, cfg in estimators]


def mse_experiment(estimators, noise: NoiseModel, mean: MeanFunctionSpec, n: int, reps: int = 2000,
                   seed: int = 0, workers: int | None = None) -> ExperimentTable:
    """Mean squared error of each estimator against the noise's long-run variance.

    All estimators see the same simulated series in each replication;
    ``meta["paired_se"]["a-b"]`` is the standard error of ``MSE(a) - MSE(b)``.
    """
    estimators = estimator_set(estimators)
    if reps < 1:
        raise DomainError("need at least one replication")
    _prime_noise(noise)
    target = lrv_oracle(noise)
    values = np.array(run_replications(_mse_rep, reps, seed, (noise, mean, n, estimators), workers))
    err2_all = (values - target) ** 2
    paired = {}
    for a, (name_a, _) in enumerate(estimators):
        for b, (name_b, _) in enumerate(estimators):
            if a < b and reps > 1:
                diff = err2_all[:, a] - err2_all[:, b]
                paired[f"{name_a}-{name_b}"] = float(np.std(diff, ddof=1) / math.sqrt(reps))
    table = ExperimentTable(["estimator", "n", "xi", "mse", "se", "bias", "mean"],
                            meta={"reps": reps, "seed": seed, "target": target, "paired_se": paired})
    for j, (name, _) in enumerate(estimators):
        err2 = err2_all[:, j]
        se = float(np.std(err2, ddof=1) / math.sqrt(reps)) if reps > 1 else float("nan")
        table.rows.append({
            "estimator": name,
            "n": n,
            "xi": float(mean.xi),
            "mse": float(np.mean(err2)),
            "se": se,
            "bias": float(np.mean(values[:, j]) - target),
            "mean": float(np.mean(values[:, j])),
        })
    return table


def _test_statistic(test, x, v, beta):
    if test == "ks":
        return ks_statistic(x, v)[0]
    k = wz_window(x.size, beta)
    return float(np.max(wz_scan(x, k)) / math.sqrt(v))


def _power_rep(rng, index, test, noise, mean, xi_grid, n, estimators, beta):
    z = noise.draw(n, rng)
    shape = mean.with_xi(1.0).evaluate(n) if mean.kind not in ("linear", "steps", "linear_plus_steps") else None
    out = []
    for xi in xi_grid:
        mu = xi * shape if shape is not None else mean.evaluate(n)
        x = mu + z
        row = []
        for _, cfg in estimators:
            v = float(suggested_estimator(x, cfg).value)
            row.append(_test_statistic(test, x, v, beta) if v > 0 else math.inf)
        out.append(row)
    return out


def power_experiment(test: str, estimators, mean_family: MeanFunctionSpec, xi_grid, n: int, reps: int = 2000,
                     seed: int = 0, noise: NoiseModel | None = None, level: float = 0.05, beta: float = 0.6,
                     workers: int | None = None) -> ExperimentTable:
    """Rejection rates of the KS or WZ test for each estimator and jump size.

    Each replication reuses one noise path for every ``xi``.  The
    size-adjusted power compares the statistic with its empirical
    ``1 - level`` quantile at ``xi = 0`` (simulated even when ``0`` is not in
    the grid).
    """
    if test not in ("ks", "wz"):
        raise DomainError(f"test must be 'ks' or 'wz', got {test!r}")
    estimators = estimator_set(estimators)
    noise = NoiseModel.tar(0.4) if noise is None else noise
    _prime_noise(noise)
    grid = [float(v) for v in xi_grid]
    full = grid if 0.0 in grid else [0.0] + grid
    stats = np.array(run_replications(_power_rep, reps, seed,
                                      (test, noise, mean_family, full, n, estimators, beta), workers))
    crit = kolmogorov_quantile(1.0 - level) if test == "ks" else wz_critical_value(n, beta, level)
    null_idx = full.index(0.0)
    table = ExperimentTable(["estimator", "test", "n", "xi", "power", "se", "adjusted_power"],
                            meta={"reps": reps, "seed": seed, "critical_value": crit, "level": level})
    for j, (name, _) in enumerate(estimators):
        null_q = float(np.quantile(np.sort(stats[:, null_idx, j]), 1.0 - level))
        for a, xi in enumerate(full):
            if xi not in grid:
                continue
            s = stats[:, a, j]
            p = float(np.mean(s > crit))
            table.rows.append({
                "estimator": name,
                "test": test,
                "n": n,
                "xi": xi,
                "power": p,
                "se": math.sqrt(p * (1 - p) / reps),
                "adjusted_power": float(np.mean(s > null_q)),
            })
    return table


def _coverage_rep(rng, index, noise, mean, n, b_grid, estimators, level, mode, quantile_reps):
    x = generate(noise, mean, n, rng)
    out = []
    for _, cfg in estimators:
        v = suggested_estimator(x, cfg)
        for b in b_grid:
            if mode == "fixed":
                band = scb(x, level, reps=quantile_reps, v_hat=v, bandwidth=b)
            else:
                band = scb(x, level, b_star=b, reps=quantile_reps, v_hat=v)
            truth = mean.parts(band.grid)[0]
            out.append((band.covers(truth), band.half_width))
    return out


def coverage_experiment(n: int = 200, b_grid=(0.05,), noise: NoiseModel | None = None, reps: int = 500,
                        seed: int = 0, estimators=("v3*",), level: float = 0.95, mode: str = "fixed",
                        quantile_reps: int = 1000, workers: int | None = None) -> ExperimentTable:
    """Coverage and mean half-width of simultaneous bands for ``mu(t) = cos(2 pi t)``.

    ``mode="fixed"`` smooths with ``b`` itself; ``mode="plugin"`` treats
    ``b`` as the reference bandwidth and rescales it by ``2 (v/gamma_0)^(1/5)``.
    """
    if reps < 1:
        raise DomainError("need at least one replication")
    if mode not in ("fixed", "plugin"):
        raise DomainError(f"mode must be 'fixed' or 'plugin', got {mode!r}")
    estimators = estimator_set(estimators)
    noise = NoiseModel.tar(0.4) if noise is None else noise
    _prime_noise(noise)
    mean = MeanFunctionSpec("cosine", 1.0)
    b_grid = [float(b) for b in b_grid]
    res = run_replications(_coverage_rep, reps, seed,
                           (noise, mean, n, b_grid, estimators, level, mode, quantile_reps), workers)
    table = ExperimentTable(["estimator", "n", "b", "coverage", "se", "half_width"],
                            meta={"reps": reps, "seed": seed, "level": level, "mode": mode})
    for j, (name, _) in enumerate(estimators):
        for a, b in enumerate(b_grid):
            col = [r[j * len(b_grid) + a] for r in res]
            cov = float(np.mean([c for c, _ in col]))
            table.rows.append({
                "estimator": name,
                "n": n,
                "b": b,
                "coverage": cov,
                "se": math.sqrt(cov * (1 - cov) / reps),
                "half_width": float(np.mean([h for _, h in col])),
            })
    return table


def run_experiment(config: dict, seed: int | None = None, workers: int | None = None) -> ExperimentTable:
    """Dispatch an experiment described by a JSON/TOML-style mapping.

    Keys: ``experiment`` (``mse``, ``power``, ``coverage``), ``noise``,
    ``mean``, ``n``, ``reps``, ``estimators``, and per experiment
    ``xi_grid``, ``test``, ``beta``, ``level``, ``b_grid``, ``mode``.
    ``xi_grid`` in an ``mse`` experiment runs one row block per value.
    """
    config = dict(config)
    kind = config.get("experiment", "mse")
    seed = int(config.get("seed", 0) if seed is None else seed)
    noise = NoiseModel.from_dict(config.get("noise", {"kind": "tar", "theta1": 0.4}))
    mean = MeanFunctionSpec.from_dict(config.get("mean", {"kind": "zero"}))
    n = int(config.get("n", 200))
    reps = int(config.get("reps", 2000 if kind != "coverage" else 500))
    names = config.get("estimators", ["v0*", "v1*", "v2*", "v3*"] if kind == "mse" else ["v3*"])
    if kind == "mse":
        grid = config.get("xi_grid", [mean.xi])
        table = None
        for xi in grid:
            part = mse_experiment(names, noise, mean.with_xi(xi), n, reps, seed, workers)
            if table is None:
                table = part
            else:
                table.rows.extend(part.rows)
        return table
    if kind == "power":
        return power_experiment(config.get("test", "ks"), names, mean, config.get("xi_grid", [0, 1, 2, 3, 4]),
                                n, reps, seed, noise, float(config.get("level", 0.05)),
                                float(config.get("beta", 0.6)), workers)
    if kind == "coverage":
        return coverage_experiment(n, config.get("b_grid", [0.05]), noise, reps, seed, names,
                                   float(config.get("level", 0.95)), config.get("mode", "fixed"),
                                   int(config.get("quantile_reps", 1000)), workers)
    raise ConfigError(f"unknown experiment {kind!r}")
