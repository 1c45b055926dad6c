"""Two-proportion power analysis and sample-size planning for demonstrating
that one classifier is better than another.

The analytic formulas are the classic normal-approximation family for two
independent proportions (pooled variance under the null, unpooled under the
alternative, no continuity correction).  The approximation overestimates
power for small sample sizes; `simulated_power` gives the exact Monte Carlo
check of the same two-sided pooled-variance z-test.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import InfeasibleError
from .rng import RngSeed, spawn_generator
from .special import norm_cdf, norm_ppf

__all__ = [
    "TwoProportionSpec",
    "SampleSizePlan",
    "MonteCarloPower",
    "analytic_power",
    "simulated_power",
    "equal_allocation_samsize",
    "allocation_samsize",
    "n_new_for_fixed_n_old",
    "max_power_vs_infinite_test",
    "PRACTICAL_INFINITY",
]

# test sample size treated as infinite for practical purposes
PRACTICAL_INFINITY = 10**5

# fraction search interval for the constrained-n1 solver
_FRACTION_LO = 1e-5
_FRACTION_HI = 0.5


@dataclass(frozen=True)
class TwoProportionSpec:
    """A two-arm comparison: old classifier (p1, n1) vs new (p2, n2)."""

    p1: float
    p2: float
    n1: float
    n2: float
    alpha: float = 0.05

    def __post_init__(self):
        for name in ("p1", "p2"):
            p = getattr(self, name)
            if not 0 <= p <= 1:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        for name in ("n1", "n2"):
            n = getattr(self, name)
            if n < 1:
                raise ValueError(f"{name} must be at least 1, got {n}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class SampleSizePlan:
    n1: float
    n2: float
    fraction: float
    power: float
    alpha: float

    def __post_init__(self):
        if abs(self.fraction - self.n1 / (self.n1 + self.n2)) > 1e-9:
            raise ValueError("fraction must equal n1/(n1+n2)")
        if not 0 < self.power < 1:
            raise ValueError(f"power must be in (0, 1), got {self.power}")

    @property
    def total(self) -> float:
        return self.n1 + self.n2


@dataclass(frozen=True)
class MonteCarloPower:
    estimate: float
    ci_lower: float
    ci_upper: float
    replicates: int
    seed: int
    n_rounded: bool = False

    def __post_init__(self):
        if not self.ci_lower <= self.estimate <= self.ci_upper:
            raise ValueError("estimate must lie inside its interval")


def analytic_power(spec: TwoProportionSpec) -> float:
    """Normal-approximation power of the two-sided two-proportion z-test.

    With the pooled proportion p-bar weighting by the group sizes,
    s0 = z_{1-alpha/2} * sqrt((1/n1 + 1/n2) * pbar*(1-pbar)) under the null
    and s1 = sqrt(p1*q1/n1 + p2*q2/n2) under the alternative, the power is
    1 - Phi((s0 - d)/s1) + Phi((-s0 - d)/s1) for d = |p1 - p2|.
    """
    p1, p2, n1, n2 = spec.p1, spec.p2, spec.n1, spec.n2
    q1, q2 = 1.0 - p1, 1.0 - p2
    s1 = math.sqrt(p1 * q1 / n1 + p2 * q2 / n2)
    if s1 == 0.0:
        raise ValueError(
            "both proportions are degenerate (0 or 1); the alternative "
            "variance vanishes and the z-test power is undefined"
        )
    z = norm_ppf(1.0 - spec.alpha / 2.0)
    pbar = (n1 * p1 + n2 * p2) / (n1 + n2)
    s0 = z * math.sqrt((1.0 / n1 + 1.0 / n2) * pbar * (1.0 - pbar))
    d = abs(p1 - p2)
    return 1.0 - norm_cdf((s0 - d) / s1) + norm_cdf((-s0 - d) / s1)


_SIM_BLOCK = 8192  # fixed partition size keeps results worker-count independent


def _simulate_block(spec: TwoProportionSpec, n1: int, n2: int, z_crit: float,
                    reps: int, seed: int, block: int) -> int:
    rng = spawn_generator(seed, 7, block)
    k1 = rng.binomial(n1, spec.p1, reps)
    k2 = rng.binomial(n2, spec.p2, reps)
    p1h = k1 / n1
    p2h = k2 / n2
    pp = (k1 + k2) / (n1 + n2)
    var = pp * (1.0 - pp) * (1.0 / n1 + 1.0 / n2)
    d = np.abs(p1h - p2h)
    # degenerate pooled proportion has zero variance; reject on any difference
    reject = np.where(var > 0.0, d >= z_crit * np.sqrt(np.maximum(var, 0.0)), d > 0.0)
    return int(reject.sum())


def simulated_power(
    spec: TwoProportionSpec,
    replicates: int,
    seed: int | RngSeed = 0,
    workers: int = 1,
) -> MonteCarloPower:
    """Monte Carlo power of the two-sided pooled-variance z-test.

    Per replicate, k1 ~ Binomial(n1, p1) and k2 ~ Binomial(n2, p2) are drawn
    and the two-sided pooled z-test at ``spec.alpha`` is applied; the
    rejection fraction is returned with a 95% normal-approximation binomial
    interval.  Replicates are partitioned into fixed-size blocks with
    deterministically derived RNG substreams, so the result depends only on
    the seed, never on the worker count.
    """
    if replicates < 1000:
        raise ValueError(f"at least 1000 replicates required, got {replicates}")
    base_seed = seed.seed if isinstance(seed, RngSeed) else int(seed)
    n1, n2 = round(spec.n1), round(spec.n2)
    rounded = (n1 != spec.n1) or (n2 != spec.n2)
    z_crit = norm_ppf(1.0 - spec.alpha / 2.0)

    blocks = [
        (i, min(_SIM_BLOCK, replicates - i * _SIM_BLOCK))
        for i in range((replicates + _SIM_BLOCK - 1) // _SIM_BLOCK)
    ]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(
                pool.map(
                    lambda br: _simulate_block(spec, n1, n2, z_crit, br[1], base_seed, br[0]),
                    blocks,
                )
            )
    else:
        counts = [
            _simulate_block(spec, n1, n2, z_crit, reps, base_seed, block)
            for block, reps in blocks
        ]
    estimate = sum(counts) / replicates
    se = math.sqrt(estimate * (1.0 - estimate) / replicates)
    half = 1.959963984540054 * se
    return MonteCarloPower(
        estimate=estimate,
        ci_lower=max(0.0, estimate - half),
        ci_upper=min(1.0, estimate + half),
        replicates=replicates,
        seed=base_seed,
        n_rounded=rounded,
    )


def _samsize_n1(p1: float, p2: float, fraction: float, alpha: float, power: float) -> float:
    """Required n1 for the unequal-allocation design with n2 = r*n1."""
    za = norm_ppf(1.0 - alpha / 2.0)
    zb = norm_ppf(power)
    q1, q2 = 1.0 - p1, 1.0 - p2
    r = (1.0 - fraction) / fraction
    pbar = (p1 + r * p2) / (r + 1.0)
    qbar = 1.0 - pbar
    num = za * math.sqrt((r + 1.0) * pbar * qbar) + zb * math.sqrt(r * p1 * q1 + p2 * q2)
    return num * num / (r * (p1 - p2) ** 2)


def equal_allocation_samsize(
    p1: float, p2: float, alpha: float = 0.05, power: float = 0.8
) -> float:
    """Sample size per group for equal allocation, returned unrounded."""
    _check_two_proportions(p1, p2, alpha, power)
    return _samsize_n1(p1, p2, 0.5, alpha, power)


def allocation_samsize(
    p1: float,
    p2: float,
    fraction: float = 0.5,
    alpha: float = 0.05,
    power: float = 0.8,
) -> SampleSizePlan:
    """Sample sizes (n1, n2) when group 1 receives ``fraction`` of the total.

    Reduces to `equal_allocation_samsize` at fraction = 0.5.
    """
    _check_two_proportions(p1, p2, alpha, power)
    if not 0 < fraction < 1:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    n1 = _samsize_n1(p1, p2, fraction, alpha, power)
    n2 = (1.0 - fraction) / fraction * n1
    return SampleSizePlan(n1=n1, n2=n2, fraction=fraction, power=power, alpha=alpha)


def n_new_for_fixed_n_old(
    p_old: float,
    n_old: int,
    p_new: float,
    alpha: float = 0.05,
    power: float = 0.8,
) -> int:
    """Test cases needed for the new classifier when the old one was tested
    with a fixed n_old.

    Searches the allocation fraction f in (1e-5, 0.5] minimizing
    (n1(f) - n_old)^2 and returns ceil(n_old/f - n_old).  Raises
    InfeasibleError, naming the maximal achievable power, when no allocation
    reaches the target (the old test set is simply too small).
    """
    if n_old < 1:
        raise ValueError(f"n_old must be at least 1, got {n_old}")
    _check_two_proportions(p_old, p_new, alpha, power)

    def objective(f: float) -> float:
        return (_samsize_n1(p_old, p_new, f, alpha, power) - n_old) ** 2

    res = minimize_scalar(
        objective,
        bounds=(_FRACTION_LO, _FRACTION_HI),
        method="bounded",
        options={"xatol": 1e-12},
    )
    fraction = float(res.x)
    n1 = _samsize_n1(p_old, p_new, fraction, alpha, power)
    if n1 > n_old + 1e-6:
        max_power = max_power_vs_infinite_test(p_old, n_old, p_new, alpha)
        raise InfeasibleError(
            f"power {power} is unattainable with n_old={n_old}: even an "
            f"arbitrarily large new test set yields power {max_power:.4f}"
        )
    return math.ceil(n_old / fraction - n_old)


def max_power_vs_infinite_test(
    p_old: float, n_old: float, p_new: float, alpha: float = 0.05
) -> float:
    """Power ceiling when the new classifier's test set is practically
    infinite (10^5 cases)."""
    return analytic_power(
        TwoProportionSpec(p1=p_old, p2=p_new, n1=n_old, n2=PRACTICAL_INFINITY, alpha=alpha)
    )


def _check_two_proportions(p1: float, p2: float, alpha: float, power: float):
    for name, p in (("p1", p1), ("p2", p2)):
        if not 0 <= p <= 1:
            raise ValueError(f"{name} must be in [0, 1], got {p}")
    if p1 == p2:
        raise InfeasibleError(
            "p1 == p2: no sample size can demonstrate a difference that does not exist"
        )
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if not 0 < power < 1:
        raise ValueError(f"power must be in (0, 1), got {power}")
