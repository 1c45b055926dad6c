"""Numeric kernel: regularized incomplete beta, its inverse, and normal
CDF/quantile.

All routines are self-contained (math/numpy only).  The incomplete beta uses
the classic continued-fraction evaluation; the inverse keeps a hard bracket
around Newton iterations so it cannot escape [0, 1].  The normal quantile is
the PPND16 rational approximation, good to ~1e-15 and vectorizable.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import SolverError

_MAXIT_CF = 400
_EPS_CF = 1e-16
_FPMIN = 1e-300


def ln_beta(a: float, b: float) -> float:
    """log of the complete beta function B(a, b)."""
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz continued fraction for the incomplete beta
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAXIT_CF + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS_CF:
            return h
    raise SolverError(
        f"incomplete beta continued fraction did not converge: a={a}, b={b}, x={x}"
    )


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError(f"shape parameters must be positive, got a={a}, b={b}")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_bt = a * math.log(x) + b * math.log1p(-x) - ln_beta(a, b)
    bt = math.exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def beta_pdf(a: float, b: float, x: float) -> float:
    """Density of the Beta(a, b) distribution at x."""
    if x < 0.0 or x > 1.0:
        return 0.0
    if x == 0.0:
        if a < 1.0:
            return math.inf
        return math.exp(-ln_beta(a, b)) if a == 1.0 else 0.0
    if x == 1.0:
        if b < 1.0:
            return math.inf
        return math.exp(-ln_beta(a, b)) if b == 1.0 else 0.0
    return math.exp((a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x) - ln_beta(a, b))


def betaincinv(a: float, b: float, p: float) -> float:
    """Inverse of the regularized incomplete beta: x with I_x(a, b) = p.

    Newton iterations on the CDF residual, kept inside a shrinking bracket;
    any step that leaves the bracket is replaced by bisection.
    """
    if a <= 0.0 or b <= 0.0:
        raise ValueError(f"shape parameters must be positive, got a={a}, b={b}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must be in [0, 1], got {p}")
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0

    # solve the smaller tail for conditioning; mirror afterwards
    if p > 0.5:
        return 1.0 - betaincinv(b, a, 1.0 - p)

    lo, hi = 0.0, 1.0
    x = a / (a + b)  # posterior-mean start; the bracket guards poor starts
    if not lo < x < hi:
        x = 0.5
    f = betainc(a, b, x) - p
    for _ in range(200):
        if f > 0.0:
            hi = x
        else:
            lo = x
        if abs(f) < 1e-14 or hi - lo < 1e-16:
            return x
        dens = beta_pdf(a, b, x)
        if dens > 0.0 and math.isfinite(dens):
            step = f / dens
            x_new = x - step
        else:
            x_new = math.nan
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        if x_new == x:
            return x
        x = x_new
        f = betainc(a, b, x) - p
    raise SolverError(
        f"beta quantile inversion did not converge: a={a}, b={b}, p={p}, "
        f"bracket=({lo}, {hi}), residual={f:.3e}"
    )


def norm_cdf(x: float) -> float:
    """Standard normal CDF via erfc."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


# PPND16 coefficients (rational approximations on three regions)
_PPND_A = (
    3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
    1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
    3.3430575583588128105e4, 2.5090809287301226727e3,
)
_PPND_B = (
    1.0, 4.2313330701600911252e1, 6.8718700749205790830e2,
    5.3941960214247511077e3, 2.1213794301586595867e4, 3.9307895800092710610e4,
    2.8729085735721942674e4, 5.2264952788528545610e3,
)
_PPND_C = (
    1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
    3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
    2.27238449892691845833e-2, 7.74545014278341407640e-4,
)
_PPND_D = (
    1.0, 2.05319162663775882187e0, 1.67638483018380384940e0,
    6.89767334985100004550e-1, 1.48103976427480074590e-1, 1.51986665636164571966e-2,
    5.47593808499534494600e-4, 1.05075007164441684324e-9,
)
_PPND_E = (
    6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
    2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
    2.71155556874348757815e-5, 2.01033439929228813265e-7,
)
_PPND_F = (
    1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1,
    1.48753612908506148525e-2, 7.86869131145613259100e-4, 1.84631831751005468180e-5,
    1.42151175831644588870e-7, 2.04426310338993978564e-15,
)


def _poly(coeffs, r):
    acc = coeffs[7]
    for c in reversed(coeffs[:7]):
        acc = acc * r + c
    return acc


def norm_ppf(p):
    """Standard normal quantile (PPND16).  Accepts scalars or ndarrays."""
    arr = np.asarray(p, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any((arr < 0.0) | (arr > 1.0)):
        raise ValueError("probabilities must be in [0, 1]")
    out = np.empty_like(arr)
    out[arr == 0.0] = -np.inf
    out[arr == 1.0] = np.inf

    q = arr - 0.5
    central = np.abs(q) <= 0.425
    if np.any(central):
        r = 0.180625 - q[central] ** 2
        out[central] = q[central] * _poly(_PPND_A, r) / _poly(_PPND_B, r)

    tails = ~central & (arr > 0.0) & (arr < 1.0)
    if np.any(tails):
        pt = arr[tails]
        smaller = np.minimum(pt, 1.0 - pt)
        r = np.sqrt(-np.log(smaller))
        val = np.empty_like(r)
        near = r <= 5.0
        rn = r[near] - 1.6
        val[near] = _poly(_PPND_C, rn) / _poly(_PPND_D, rn)
        rf = r[~near] - 5.0
        val[~near] = _poly(_PPND_E, rf) / _poly(_PPND_F, rf)
        out[tails] = np.where(pt < 0.5, -val, val)

    return float(out[0]) if scalar else out


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_min(func, lo: float, hi: float, tol: float):
    """Minimize a unimodal scalar function on [lo, hi]; returns (x, f(x))."""
    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1, f2 = func(x1), func(x2)
    while hi - lo > tol:
        if f1 < f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INVPHI * (hi - lo)
            f1 = func(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INVPHI * (hi - lo)
            f2 = func(x2)
    x = 0.5 * (lo + hi)
    return x, func(x)
