import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from lrvlab.exceptions import DomainError, InsufficientDataError
from lrvlab.rcp import RcpReport, _batch_differences, batch_length, remove_jumps, remove_slopes, rough_center


@pytest.mark.parametrize("n,b", [(8, 2), (26, 2), (27, 3), (63, 3), (64, 4), (124, 4), (125, 5), (1000, 10), (999, 9)])
def test_batch_length(n, b):
    assert batch_length(n) == b


@settings(max_examples=200)
@given(st.integers(1, 10**7))
def test_batch_length_exact(n):
    b = batch_length(n)
    assert b**3 <= n < (b + 1) ** 3


def test_batch_differences_brute():
    x = np.random.default_rng(0).standard_normal(30)
    b = 3
    times, xi = _batch_differences(x, b)
    assert times[0] == b + 1 and times[-1] == 30 - b + 1
    for t, v in zip(times, xi):
        fwd = x[t - 1 : t - 1 + b].mean()
        bwd = x[t - 1 - b : t - 1].mean()
        assert v == pytest.approx(fwd - bwd, abs=1e-12)


def test_single_jump_detected():
    rng = np.random.default_rng(1)
    n = 500
    x = rng.standard_normal(n)
    x[300:] += 10.0
    y, rep = remove_jumps(x)
    assert 301 in rep.jump_times
    t, raw, step = rep.detected_jumps[0]
    assert t == 301 and raw == pytest.approx(x[300] - x[299]) and step == raw
    assert abs(y[300:].mean() - y[:300].mean()) < 1.0


def test_jump_winsorized():
    rng = np.random.default_rng(2)
    x = rng.standard_normal(400)
    x[200:] += 1e6
    _, rep = remove_jumps(x, M_prime=1.0)
    t, raw, step = rep.detected_jumps[0]
    assert t == 201 and raw > rep.M and step == pytest.approx(rep.M)


def test_max_jumps_zero_is_identity():
    x = np.random.default_rng(3).standard_normal(100)
    x[50:] += 20
    y, rep = remove_jumps(x, max_jumps=0)
    assert np.array_equal(y, x) and rep.N == 0


def test_jump_cap_respected():
    x = np.random.default_rng(4).standard_normal(1000)
    for t in range(100, 1000, 60):
        x[t:] += 15
    _, rep = rough_center(x, max_jumps=5)
    assert rep.N == 5 and len(set(rep.jump_times)) == 5


def test_constant_series():
    y, rep = rough_center(np.full(100, 7.0))
    assert rep.N == 0 and np.allclose(y, 7.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(-10, 10), st.integers(8, 300))
@example(a=8.0, s=1e-9, n=12)  # tiny slope on a large level
def test_affine_becomes_constant(a, s, n):
    x = a + s * np.arange(n)
    y, rep = rough_center(x)
    assert rep.N == 0
    assert np.ptp(y) <= 1e-9 * (1 + abs(a) + abs(s) * n)


def test_remove_slopes_segments():
    x = np.concatenate([np.arange(10) * 2.0, 100 + np.arange(10) * -1.0])
    rep = RcpReport()
    out = remove_slopes(x, [11], rep)
    assert rep.slopes[0][1] == pytest.approx(2.0) and rep.slopes[1][1] == pytest.approx(-1.0)
    assert np.ptp(out[:10]) < 1e-12 and np.ptp(out[10:]) < 1e-12
    with pytest.raises(DomainError):
        remove_slopes(x, [11, 11])
    with pytest.raises(DomainError):
        remove_slopes(x, [1])


def test_short_series():
    with pytest.raises(InsufficientDataError):
        rough_center(np.zeros(5))


def test_report_dict():
    x = np.random.default_rng(5).standard_normal(300)
    x[150:] += 12
    _, rep = rough_center(x)
    d = rep.to_dict()
    assert d["N"] == rep.N and d["b"] == 6 and len(d["slopes"]) == rep.N + 1
    assert d["detected_jumps"][0]["time"] == 151


def test_iid_rarely_flags():
    flags = 0
    for s in range(30):
        _, rep = rough_center(np.random.default_rng(s).standard_normal(500))
        flags += rep.N
    assert flags <= 3


def _subtract_increments(x, times):
    out = x.copy()
    for t in times:
        out[t - 1 :] -= x[t - 1] - x[t - 2]
    return out


@settings(max_examples=60, deadline=None)
@given(
    st.floats(-100, 100),
    st.floats(-5, 5),
    st.integers(20, 200),
    st.lists(st.integers(2, 200), max_size=5, unique=True),
)
def test_affine_constant_for_any_partition(a, s, n, times):
    times = sorted(t for t in times if t <= n)
    x = a + s * np.arange(1, n + 1)
    out = remove_slopes(_subtract_increments(x, times), times)
    assert np.ptp(out) <= 1e-10 * (1 + abs(a) + abs(s) * n)


def test_remove_slopes_alone_leaves_seam_steps():
    # the continuity shift assumes step 1 already removed the seam increment
    x = 2.0 + 0.5 * np.arange(1, 41)
    out = remove_slopes(x, [21])
    assert np.ptp(out[:20]) < 1e-12 and np.ptp(out[20:]) < 1e-12
    assert out[20] - out[19] == pytest.approx(0.5, abs=1e-12)


def test_noiseless_step():
    x = np.r_[np.zeros(100), np.full(100, 10.0)]
    y, rep = remove_jumps(x)
    assert rep.jump_times == [101] and np.all(y == 0.0)
    z, rep2 = rough_center(x)
    assert np.all(z == 0.0)


def test_constant_identity_exact():
    x = np.full(64, -3.25)
    y, rep = rough_center(x)
    assert np.array_equal(y, x) and rep.N == 0


def test_winsorization_bound_and_distinct_times():
    rng = np.random.default_rng(12)
    for trial in range(20):
        x = rng.standard_normal(300)
        for t in rng.choice(np.arange(20, 280), size=4, replace=False):
            x[t:] += rng.choice([-1, 1]) * 10 ** rng.uniform(0, 6)
        _, rep = remove_jumps(x, M_prime=float(rng.uniform(1, 100)))
        times = [t for t, _, _ in rep.detected_jumps]
        assert len(times) == len(set(times))
        assert all(abs(w) <= rep.M for _, _, w in rep.detected_jumps)


def _ar2(n, rng):
    e = rng.standard_normal(n + 1000)
    z = np.zeros_like(e)
    for i in range(2, e.size):
        z[i] = z[i - 1] / 2 + z[i - 2] / 5 + e[i]
    return z[1000:]


def _h1a_detection_rate(xi, reps=500):
    n, hits = 200, 0
    b = batch_length(n)
    for i in range(reps):
        rng = np.random.default_rng([13, i])
        x = _ar2(n, rng) + xi * (np.arange(1, n + 1) > 2 * n / 10)
        _, rep = rough_center(x)
        hits += any(abs(t - 41) <= b for t in rep.jump_times)
    return hits / reps


@pytest.mark.xfail(strict=True, reason="a jump of 2 in AR(2) noise with LRV 11.1 is not Tukey-obvious; about 1% detected")
def test_h1a_detection_rate_xi2():
    assert _h1a_detection_rate(2.0) >= 0.8


def test_h1a_detection_rate_xi8():
    assert _h1a_detection_rate(8.0) >= 0.8


def test_rcp_harmless_on_pure_noise():
    from lrvlab.selection import preset, suggested_estimator

    with_rcp, without = preset("v3*"), preset("v3*", apply_rcp=False)
    diffs = []
    for i in range(300):
        x = np.random.default_rng([14, i]).standard_normal(400)
        diffs.append(suggested_estimator(x, with_rcp).value - suggested_estimator(x, without).value)
    diffs = np.asarray(diffs)
    assert abs(diffs.mean()) < 3 * diffs.std(ddof=1) / np.sqrt(diffs.size) + 1e-12
