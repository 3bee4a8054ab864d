"""Principal-branch Lambert W and the rate closed form built on it.

``lambert_w0`` inverts w*exp(w) = x for x >= -1/e with w >= -1, using series
initialization near the branch point, a log-based start elsewhere, and Halley
refinement.  ``w0p1`` evaluates W0((s-1)/e) + 1 directly from s >= 0, which
avoids the catastrophic cancellation of forming (s-1)/e near the branch point;
optimal transmission rates are exactly of this shape with s = price*gain/noise.
"""

from __future__ import annotations

import math

import numpy as np

E = math.e
BRANCH_POINT = -1.0 / math.e
_BRANCH_SLACK = 1e-12
_MAX_ITER = 50


class ConvergenceError(RuntimeError):
    pass


def _halley(w, x, active):
    """Halley refinement of w*exp(w) = x on the `active` mask, in place.

    Converges when the residual reaches 1e-15*max(1, |x|) or the update falls
    below a few ulps of w (the float floor: exp amplifies the last ulp of w
    by |w|, so the residual itself may stall slightly above 1e-15*|x|).
    """
    rtol = 1e-15 * np.maximum(1.0, np.abs(x))
    for _ in range(_MAX_ITER):
        if not np.any(active):
            return None
        ew = np.exp(w, where=active, out=np.ones_like(w))
        resid = w * ew - x
        active = active & (np.abs(resid) > rtol)
        if not np.any(active):
            return None
        wp1 = np.where(np.abs(w + 1.0) > 1e-12, w + 1.0, 1e-12)
        denom = ew * wp1 - (w + 2.0) * resid / (2.0 * wp1)
        step = np.where(active & (denom != 0),
                        resid / np.where(denom != 0, denom, 1.0), 0.0)
        w -= step
        active = active & (np.abs(step) > 4e-16 * (1.0 + np.abs(w)))
    ew = np.exp(w)
    bad = np.abs(w * ew - x) > 1e-13 * np.maximum(1.0, np.abs(x))
    if np.any(bad):
        return x[bad]
    return None


def lambert_w0(x):
    """Principal branch W0(x) for real x >= -1/e.

    Satisfies |W0(x)*exp(W0(x)) - x| <= 1e-13*max(1, |x|) across the domain.
    Raises ValueError below the branch point and ConvergenceError if Halley
    fails to settle within 50 iterations.
    """
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(~np.isfinite(x)):
        raise ValueError("lambert_w0 requires finite arguments")
    if np.any(x < BRANCH_POINT - _BRANCH_SLACK):
        raise ValueError(f"lambert_w0 argument below -1/e: min={x.min()!r}")
    x = np.maximum(x, BRANCH_POINT)

    w = np.empty_like(x)
    near = x < -0.25
    large = x > E
    mid = ~near & ~large

    if np.any(near):
        # series about the branch point in p = sqrt(2*(1 + e*x))
        p = np.sqrt(np.maximum(2.0 * (1.0 + E * x[near]), 0.0))
        w[near] = -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0)))
    if np.any(mid):
        w[mid] = np.log1p(x[mid])
    if np.any(large):
        lx = np.log(x[large])
        w[large] = lx - np.log(lx)

    # branch-point args are exact; tiny p needs no refinement and Halley's
    # denominator degenerates there anyway
    active = x > BRANCH_POINT + 1e-300
    bad = _halley(w, x, active)
    if bad is not None:
        raise ConvergenceError(f"lambert_w0 did not converge for x={bad[:5]}")
    w = np.maximum(w, -1.0)
    return float(w[0]) if scalar else w


def _fq_small(q):
    # (q-1)*exp(q) + 1 = sum_{k>=2} (k-1)/k! * q^k, truncated at k = 12
    coeffs = [1.0 / 2, 1.0 / 3, 1.0 / 8, 1.0 / 30, 1.0 / 144, 1.0 / 840,
              1.0 / 5760, 1.0 / 45360, 1.0 / 403200, 1.0 / 3991680,
              11.0 / 479001600]
    acc = np.zeros_like(q)
    for c in reversed(coeffs):
        acc = q * (c + acc)
    return q * acc


def w0p1(s):
    """W0((s-1)/e) + 1 evaluated stably for s >= 0.

    This is the bracketed factor of the optimal-rate closed form; it is 0 at
    s = 0, strictly increasing, and equals 1 at s = 1.  It solves
    (q-1)*exp(q) + 1 = s by Newton from region-specific starts, keeping full
    relative accuracy near the branch point where forming (s-1)/e first would
    lose half the digits.
    """
    scalar = np.ndim(s) == 0
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s < 0):
        raise ValueError("w0p1 requires s >= 0")
    out = np.empty_like(s)

    # q <= ~0.25 here, where the naive (q-1)e^q + 1 cancels: use the series
    small = s < 0.0338
    if np.any(small):
        ss = s[small]
        q = np.sqrt(2.0 * ss)
        q *= (1.0 + q * (-1.0 / 3.0 + q * (11.0 / 72.0)))
        for _ in range(4):
            fp = q * np.exp(q)
            dq = np.where(q > 0, (_fq_small(q) - ss) / np.where(q > 0, fp, 1.0), 0.0)
            q -= dq
        out[small] = np.maximum(q, 0.0)

    rest = ~small
    if np.any(rest):
        ss = s[rest]
        x = (ss - 1.0) / E
        p = np.sqrt(2.0 * ss)
        q_series = p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0)))
        with np.errstate(divide="ignore", invalid="ignore"):
            lx = np.log(np.maximum(x, 1.1))
            q_log = np.where(x > E, lx - np.log(lx) + 1.0, np.log1p(np.maximum(x, 0.0)) + 1.0)
        q = np.where(ss <= 2.0, q_series, q_log)
        for _ in range(9):
            eq = np.exp(q)
            f = (q - 1.0) * eq + 1.0 - ss
            qn = q - f / (q * eq)
            q = np.where(qn > 0, qn, 0.5 * q)
        out[rest] = q

    return float(out[0]) if scalar else out


def rate_from_dual(price, gain, noise: float, bandwidth: float):
    """Optimal transmission rate given the dual price of the slot's time.

    Stationarity of (t/gain)*f(b/t) + price*t in t fixes the rate at
    (W/ln2)*[W0((price*gain/noise - 1)/e) + 1]; price 0 maps exactly to rate 0.
    """
    price = np.asarray(price, dtype=float)
    if np.any(price < 0):
        raise ValueError("price must be nonnegative")
    s = price * np.asarray(gain, dtype=float) / noise
    r = bandwidth / math.log(2.0) * w0p1(s)
    return float(r) if np.ndim(r) == 0 else r
