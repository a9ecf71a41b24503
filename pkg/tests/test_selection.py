import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar
from scipy.signal import lfilter

from lrvlab.diffseq import local_sequence, optimal_sequence
from lrvlab.exceptions import ConfigError, DomainError, InsufficientDataError, NumericError
from lrvlab.kernels import bartlett, parzen_poly, truncated, tukey_hanning
from lrvlab.selection import (
    PRESETS,
    PlugInConfig,
    asymptotic_mse_constant,
    bias_variance_constant,
    ceil_guarded,
    optimal_bandwidth,
    pilot_bandwidths,
    pilot_estimates,
    preset,
    suggested_estimator,
)


def test_ceil_guarded():
    assert ceil_guarded(3.0) == 3
    assert ceil_guarded(3.0 + 1e-12) == 3
    assert ceil_guarded(3.2) == 4
    assert ceil_guarded(2.9999999) == 3
    assert ceil_guarded(8 ** (1 / 3) * 2) == 4


@settings(max_examples=100)
@given(st.integers(-10**6, 10**6))
def test_ceil_guarded_integers(k):
    assert ceil_guarded(float(k)) == k
    assert ceil_guarded(k + 0.25) == k + 1


def test_config_defaults():
    cfg = PlugInConfig()
    assert cfg.m == 3 and cfg.q == 2 and cfg.lam == 2.0 and cfg.apply_rcp
    assert cfg.fallback_exponent == pytest.approx(0.2)
    assert cfg.big_delta == pytest.approx(1 + 1 / 6, abs=1e-8)
    c = cfg.estimator_config(5)
    assert (c.ell, c.h, c.m) == (5, 10, 3)
    assert PlugInConfig(m=0).estimator_config(5).h == 1
    assert cfg.to_dict()["kernel"] == "parzen_poly:q=2"


def test_config_validation():
    with pytest.raises(ConfigError):
        PlugInConfig(q=1)
    with pytest.raises(ConfigError):
        PlugInConfig(kernel=truncated())
    with pytest.raises(ConfigError):
        PlugInConfig(m=-1)
    with pytest.raises(ConfigError):
        PlugInConfig(m=2, seq=optimal_sequence(3))
    assert PlugInConfig(m=2, seq=local_sequence(2)).big_delta == pytest.approx(1 + 5 / 18)


def test_presets():
    assert set(PRESETS) == {"paper-default", "v0*", "v1*", "v2*", "v3*"}
    assert preset("v0*").m == 0 and not preset("v0*").apply_rcp
    assert preset("v2*").m == 2
    assert preset("v3*", m=None, kernel="bartlett").kernel == bartlett()
    with pytest.raises(ConfigError):
        preset("v9*")


def _mse_oracle(ratio, kernel, delta, n):
    q, B = kernel.q, kernel.B
    f = lambda ell: (B * ratio) ** 2 / ell ** (2 * q) + 4 * kernel.A * delta * ell / n
    res = minimize_scalar(f, bounds=(1e-3, 1e6), method="bounded", options={"xatol": 1e-10})
    return res.x, res.fun


@settings(max_examples=60, deadline=None)
@given(
    st.floats(0.05, 20),
    st.sampled_from([bartlett(), parzen_poly(2), tukey_hanning(), parzen_poly(3)]),
    st.sampled_from([0, 1, 2, 3, 5]),
    st.integers(50, 10**5),
)
def test_optimal_bandwidth_minimizes_mse(ratio, kernel, m, n):
    delta = 1.0 if m == 0 else optimal_sequence(m).big_delta
    ell_ref, _ = _mse_oracle(ratio, kernel, delta, n)
    assert optimal_bandwidth(ratio, kernel, m, n) == pytest.approx(ell_ref, rel=1e-4)
    assert optimal_bandwidth(-ratio, kernel, delta, n) == optimal_bandwidth(ratio, kernel, m, n)


def test_optimal_bandwidth_examples():
    # q = 1, B = -1, A = 1/3, Delta = 1.5: (1000 / 1)^(1/3)
    assert optimal_bandwidth(1.0, bartlett(), 1.5, 1000) == pytest.approx(10.0, abs=1e-12)
    # q = 2, B = -1, A = 8/15, Delta = 5/4, ratio 2: (6 n)^(1/5), so n = 6^4 gives 6
    assert optimal_bandwidth(2.0, parzen_poly(2), 2, 6**4) == pytest.approx(6.0, abs=1e-9)
    assert optimal_bandwidth(2.0, parzen_poly(2), optimal_sequence(2), 6**4) == pytest.approx(6.0, abs=1e-9)


def test_optimal_bandwidth_errors():
    with pytest.raises(NumericError):
        optimal_bandwidth(0.0, bartlett(), 3, 100)
    with pytest.raises(InsufficientDataError):
        optimal_bandwidth(1.0, bartlett(), 3, 9)
    with pytest.raises(ConfigError):
        optimal_bandwidth(1.0, bartlett(), 3, 100, q=2)
    with pytest.raises(ConfigError):
        optimal_bandwidth(1.0, truncated(), 3, 100)


def test_pilot_bandwidths():
    assert pilot_bandwidths(512, 2) == (4, 7)
    assert pilot_bandwidths(1024, 1) == (ceil_guarded(2 * 1024 ** (1 / 7)), ceil_guarded(2 * 1024**0.2))
    assert pilot_bandwidths(32, 2)[1] == 4


def test_pilot_estimates_details():
    x = np.random.default_rng(0).standard_normal(512)
    v, vq, info = pilot_estimates(x, details=True)
    assert (info["ell_vq"], info["ell_v"]) == (4, 7)
    v2, vq2 = pilot_estimates(x)
    assert (v, vq) == (v2, vq2)
    with pytest.raises(InsufficientDataError):
        pilot_estimates(np.zeros(20))


def test_fallback_on_constant():
    res = suggested_estimator(np.full(200, 3.0))
    assert res.extras["fallback"]
    assert res.config_used.ell == ceil_guarded(1.5 * 200**0.2)
    assert abs(res.value) < 1e-20


def test_clamp_upper():
    rng = np.random.default_rng(1)
    e = rng.standard_normal(1100)
    x = lfilter([1.0], [1.0, -0.97], e)[1000:]
    res = suggested_estimator(x, PlugInConfig(apply_rcp=False))
    assert res.config_used.ell <= (100 - 1) // 8
    assert res.config_used.ell >= 2


def test_short_series_rejected():
    with pytest.raises(InsufficientDataError):
        suggested_estimator(np.zeros(49))


def test_iid_unbiased_enough():
    vals = [suggested_estimator(np.random.default_rng([2, i]).standard_normal(2000)).value for i in range(60)]
    assert abs(np.mean(vals) - 1.0) < 0.08


def test_ar1_consistent():
    vals = []
    for i in range(40):
        e = np.random.default_rng([3, i]).standard_normal(6000)
        vals.append(suggested_estimator(lfilter([1.0], [1.0, -0.5], e)[1000:]).value)
    assert np.mean(vals) == pytest.approx(4.0, rel=0.15)


def test_robust_to_jump_and_trend():
    rng = np.random.default_rng(4)
    n = 1000
    x = rng.standard_normal(n) + 3 * np.arange(n) / n
    x[500:] += 8
    robust = suggested_estimator(x).value
    classical = suggested_estimator(x, preset("v0*")).value
    assert abs(robust - 1.0) < 0.4
    assert classical > 5


def test_extras_and_regime():
    x = np.random.default_rng(5).standard_normal(400)
    res = suggested_estimator(x)
    for key in ("ell_star", "fallback", "pilot_v", "pilot_vq", "ell", "h", "plugin", "rcp"):
        assert key in res.extras
    assert res.config_used.h == 2 * res.config_used.ell and res.regime == "optimal"
    assert "rcp" not in suggested_estimator(x, preset("v0*")).extras


def test_multivariate_common_bandwidth():
    rng = np.random.default_rng(6)
    x = rng.standard_normal((500, 2))
    x[:, 1] = lfilter([1.0], [1.0, -0.6], x[:, 1])
    res = suggested_estimator(x)
    ells = [c["ell"] for c in res.extras["per_column"]]
    assert res.config_used.ell == math.ceil(np.mean(ells) - 1e-9)
    assert res.value.shape == (2, 2) and len(res.extras["rcp"]) == 2


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-3, 100), st.floats(1e-3, 100), st.integers(1, 4))
def test_bias_variance_constant(b2, V, q):
    n = 1e6
    f = lambda ell: b2 / ell ** (2 * q) + V * ell / n
    res = minimize_scalar(f, bounds=(1e-6, 1e8), method="bounded", options={"xatol": 1e-12})
    assert bias_variance_constant(b2, V, q) == pytest.approx(res.fun * n ** (2 * q / (1 + 2 * q)), rel=1e-6)


def test_bias_variance_errors():
    with pytest.raises(DomainError):
        bias_variance_constant(-1, 1, 2)
    with pytest.raises(DomainError):
        bias_variance_constant(1, 0, 2)


@pytest.mark.parametrize("kernel", [bartlett(), parzen_poly(2), tukey_hanning()], ids=str)
@pytest.mark.parametrize("m", [1, 2, 3, 5, 10])
def test_mse_constant_scaling(kernel, m):
    q = kernel.q
    ratio = asymptotic_mse_constant(kernel, m) / asymptotic_mse_constant(kernel, 0)
    assert ratio == pytest.approx(optimal_sequence(m).big_delta ** (2 * q / (1 + 2 * q)), rel=1e-10)


def test_mse_constant_matches_optimized_mse():
    kernel = parzen_poly(2)
    delta = optimal_sequence(3).big_delta
    n = 10**6
    _, mse = _mse_oracle(0.7, kernel, delta, n)
    assert asymptotic_mse_constant(kernel, 3, eta_q=0.7) == pytest.approx(mse * n**0.8, rel=1e-6)


def test_mse_constant_decreasing_in_m():
    values = [asymptotic_mse_constant(parzen_poly(2), m) for m in range(0, 11)]
    assert values[0] < values[1] and all(a > b for a, b in zip(values[1:], values[2:]))
