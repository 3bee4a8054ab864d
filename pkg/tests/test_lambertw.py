import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgeshare.lambertw import (BRANCH_POINT, lambert_w0, rate_from_dual,
                                w0p1)


def _bisect_wew(target, lo, hi, iters=200):
    """Independent oracle: bisection on w*exp(w) - target."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid * math.exp(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_anchors():
    assert lambert_w0(0.0) == 0.0
    assert lambert_w0(math.e) == pytest.approx(1.0, abs=1e-15)
    assert lambert_w0(BRANCH_POINT) == -1.0


def test_against_bisection_oracle():
    w = lambert_w0(10.0)
    w_ref = _bisect_wew(10.0, 0.0, 10.0)
    assert w == pytest.approx(w_ref, abs=1e-13)
    assert abs(w * math.exp(w) - 10.0) <= 1e-13 * 10.0


def test_domain_error():
    with pytest.raises(ValueError):
        lambert_w0(BRANCH_POINT - 1e-6)


def test_branch_point_clamp():
    # arguments within 1e-12 below -1/e are treated as the branch point
    assert lambert_w0(BRANCH_POINT - 5e-13) == -1.0


def test_identity_sweep():
    x = BRANCH_POINT + np.logspace(-18, np.log10(1e8 - BRANCH_POINT), 20000)
    w = lambert_w0(x)
    resid = np.abs(w * np.exp(w) - x)
    assert np.all(resid <= 1e-13 * np.maximum(1.0, np.abs(x)))


def test_monotone_increasing(rng):
    x = np.sort(rng.uniform(-0.36, 100.0, 5000))
    w = lambert_w0(x)
    assert np.all(np.diff(w) > 0)


@settings(max_examples=300, deadline=None)
@given(x=st.floats(-0.367879, 1e8))
def test_identity_property(x):
    w = lambert_w0(x)
    assert abs(w * math.exp(w) - x) <= 1e-13 * max(1.0, abs(x))


def test_w0p1_anchors_and_lambert_consistency():
    assert w0p1(0.0) == 0.0
    assert w0p1(1.0) == pytest.approx(1.0, abs=1e-15)
    s = np.logspace(-3, 6, 500)
    direct = lambert_w0((s - 1.0) / math.e) + 1.0
    assert np.allclose(w0p1(s), direct, rtol=1e-11, atol=1e-13)


def test_rate_from_dual_anchors():
    assert rate_from_dual(0.0, 1e-9, 1e-14, 1e6) == 0.0
    # price*gain/noise = 1 puts the Lambert argument at 0: rate = W/ln2
    noise, gain = 1.2589254117941663e-14, 1e-9
    price = noise / gain
    assert rate_from_dual(price, gain, noise, 1e6) == pytest.approx(
        1e6 / math.log(2.0), rel=1e-13)
    with pytest.raises(ValueError):
        rate_from_dual(-1.0, gain, noise, 1e6)


def test_rate_from_dual_stationarity_identity(rng):
    """f(r) - r f'(r) = -price*gain at the returned rate."""
    w, n0 = 1e6, 1.2589254117941663e-14
    ln2 = math.log(2.0)
    price = 10 ** rng.uniform(-14, 2, 1000)
    gain = 10 ** rng.uniform(-13, -9, 1000)
    r = rate_from_dual(price, gain, n0, w)
    f = n0 * np.expm1(r / w * ln2)
    fp = n0 * ln2 / w * np.exp(r / w * ln2)
    lhs = f - r * fp
    assert np.all(np.abs(lhs + price * gain)
                  <= 1e-9 * np.maximum(price * gain, 1e-300))


def test_rate_from_dual_monotone(rng):
    w, n0 = 1e6, 1e-14
    prices = np.sort(10 ** rng.uniform(-12, 2, 300))
    r = rate_from_dual(prices, 1e-10, n0, w)
    assert np.all(np.diff(r) >= 0)
    gains = np.sort(10 ** rng.uniform(-13, -9, 300))
    r2 = rate_from_dual(1e-4, gains, n0, w)
    assert np.all(np.diff(r2) >= 0)


def test_inverse_recovers_rate(rng):
    """Reconstruct r from y = f(r) - r f'(r) via the Lambert-W closed form."""
    w, n0 = 1e6, 1.2589254117941663e-14
    ln2 = math.log(2.0)
    z = 10 ** rng.uniform(-4, np.log10(30.0), 1000)
    r = z * w
    f = n0 * np.expm1(z * ln2)
    fp = n0 * ln2 / w * np.exp(z * ln2)
    y = f - r * fp
    r_rec = w / ln2 * w0p1(-y / n0)
    assert np.all(np.abs(r_rec - r) <= 1e-9 * r)
