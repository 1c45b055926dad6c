"""Beta-posterior interval estimation for tested proportions and the test
sample sizes needed for a prescribed interval width.

A classification test is treated as a Bernoulli process: ``trials`` cases
tested, ``successes`` of them correct.  Success counts may be real-valued so
that pooled per-patient or per-batch fractions can be used directly with the
number of independent units as the trial count.

Interval methods
----------------
``hpd``
    The planning interval used throughout this package.  When the posterior
    density is monotone (e.g. all successes or all failures under a uniform
    prior) the interval collapses to one side and touches 0 or 1, which is
    the minimal-width interval there.  Otherwise the tail masses are split
    equally.  For symmetric posteriors this again equals the minimal-width
    interval; for skewed interior posteriors it is the central interval,
    matching the convention of the published planning tables this package
    reproduces.
``min_width``
    The strict minimal-width (highest posterior density) interval, found by
    minimizing the width over the lower tail mass.  Narrower than ``hpd``
    for skewed interior posteriors.
``equal_tailed``
    Plain Beta quantiles at (1-level)/2 and 1-(1-level)/2, with no one-sided
    collapse.
``clopper_pearson``
    Exact frequentist tail-inversion interval (integer success counts only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InfeasibleError, SolverError
from .special import betainc, betaincinv, golden_section_min

__all__ = [
    "BinomialObservation",
    "PriorSpec",
    "BetaParams",
    "CredibleInterval",
    "UNIFORM_PRIOR",
    "point_estimate",
    "sampling_stddev",
    "posterior",
    "hpd_interval",
    "min_width_interval",
    "equal_tailed_interval",
    "clopper_pearson",
    "interval",
    "min_ntest_for_width",
    "worst_case_ntest",
]

MASS_TOL = 1e-8
GOLDEN_TOL = 1e-10


@dataclass(frozen=True)
class BinomialObservation:
    """A tested proportion: real-valued success count over a test sample size."""

    successes: float
    trials: float

    def __post_init__(self):
        if self.trials <= 0:
            raise ValueError(f"trials must be positive, got {self.trials}")
        if not 0 <= self.successes <= self.trials:
            raise ValueError(
                f"successes must be in [0, trials], got {self.successes} of {self.trials}"
            )


@dataclass(frozen=True)
class PriorSpec:
    """Beta prior; the default (1, 1) is the uniform prior."""

    prior_a: float = 1.0
    prior_b: float = 1.0

    def __post_init__(self):
        if self.prior_a <= 0 or self.prior_b <= 0:
            raise ValueError("prior shapes must be strictly positive")


UNIFORM_PRIOR = PriorSpec(1.0, 1.0)


@dataclass(frozen=True)
class BetaParams:
    shape1: float
    shape2: float

    def __post_init__(self):
        if self.shape1 <= 0 or self.shape2 <= 0:
            raise ValueError("Beta shapes must be strictly positive")

    @property
    def mean(self) -> float:
        return self.shape1 / (self.shape1 + self.shape2)


@dataclass(frozen=True)
class CredibleInterval:
    lower: float
    upper: float
    level: float
    method: str

    def __post_init__(self):
        if not 0 <= self.lower <= self.upper <= 1:
            raise ValueError(f"bounds out of order: [{self.lower}, {self.upper}]")
        if not 0 < self.level < 1:
            raise ValueError(f"level must be in (0, 1), got {self.level}")

    @property
    def width(self) -> float:
        return self.upper - self.lower


def point_estimate(obs: BinomialObservation) -> float:
    """Observed proportion: successes / trials."""
    return obs.successes / obs.trials


def sampling_stddev(p: float, n: float) -> float:
    """Standard deviation of an observed proportion, sqrt(p(1-p)/n).

    Maximized over p at p = 0.5 with value 0.5/sqrt(n), the conservative
    bound used to size reference test sets.
    """
    if not 0 <= p <= 1:
        raise ValueError(f"p must be in [0, 1], got {p}")
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    return math.sqrt(p * (1.0 - p) / n)


def posterior(obs: BinomialObservation, prior: PriorSpec = UNIFORM_PRIOR) -> BetaParams:
    """Beta posterior of the true proportion given the observation."""
    return BetaParams(obs.successes + prior.prior_a, obs.trials - obs.successes + prior.prior_b)


def _check_mass(post: BetaParams, lower: float, upper: float, level: float, what: str):
    mass = betainc(post.shape1, post.shape2, upper) - betainc(post.shape1, post.shape2, lower)
    if abs(mass - level) > MASS_TOL:
        raise SolverError(
            f"{what} interval mass {mass:.12f} deviates from level {level} by "
            f"{abs(mass - level):.3e} (> {MASS_TOL:g}); shapes="
            f"({post.shape1}, {post.shape2}), bounds=({lower}, {upper})"
        )


def _monotone_interval(post: BetaParams, level: float):
    """One-sided interval when the posterior density is monotone, else None."""
    a, b = post.shape1, post.shape2
    if a <= 1.0 and b <= 1.0:
        if a == 1.0 and b == 1.0:
            return None  # flat posterior; central split still well defined
        raise ValueError(
            "posterior density is U-shaped (both shapes < 1); "
            "the highest-density region is not an interval"
        )
    if a <= 1.0:
        return 0.0, betaincinv(a, b, level)
    if b <= 1.0:
        return betaincinv(a, b, 1.0 - level), 1.0
    return None


def hpd_interval(
    obs: BinomialObservation,
    level: float = 0.95,
    prior: PriorSpec = UNIFORM_PRIOR,
) -> CredibleInterval:
    """Planning interval of the Beta posterior (see module docstring).

    One-sided when the posterior density is monotone; equal tail masses
    otherwise.  The posterior mass over the returned interval equals
    ``level`` within 1e-8 or a SolverError is raised.
    """
    _check_level(level)
    post = posterior(obs, prior)
    sided = _monotone_interval(post, level)
    if sided is not None:
        lower, upper = sided
    else:
        t = (1.0 - level) / 2.0
        lower = betaincinv(post.shape1, post.shape2, t)
        upper = betaincinv(post.shape1, post.shape2, t + level)
    _check_mass(post, lower, upper, level, "hpd")
    return CredibleInterval(lower, upper, level, "hpd")


def min_width_interval(
    obs: BinomialObservation,
    level: float = 0.95,
    prior: PriorSpec = UNIFORM_PRIOR,
) -> CredibleInterval:
    """Strict minimal-width interval containing posterior mass = level.

    Candidate intervals are parameterized by the lower tail mass
    t in [0, 1-level]; bounds are the Beta quantiles at t and t+level and
    the width is minimized over t by golden-section search (tolerance 1e-10
    on t).  Monotone posteriors collapse to a one-sided interval.
    """
    _check_level(level)
    post = posterior(obs, prior)
    a, b = post.shape1, post.shape2
    if a == 1.0 and b == 1.0:
        raise ValueError("flat posterior: the minimal-width interval is not unique")
    sided = _monotone_interval(post, level)
    if sided is not None:
        lower, upper = sided
    else:
        def width(t: float) -> float:
            return betaincinv(a, b, t + level) - betaincinv(a, b, t)

        t_opt, _ = golden_section_min(width, 0.0, 1.0 - level, GOLDEN_TOL)
        lower = betaincinv(a, b, t_opt)
        upper = betaincinv(a, b, t_opt + level)
    _check_mass(post, lower, upper, level, "min_width")
    return CredibleInterval(lower, upper, level, "min_width")


def equal_tailed_interval(
    obs: BinomialObservation,
    level: float = 0.95,
    prior: PriorSpec = UNIFORM_PRIOR,
) -> CredibleInterval:
    """Central interval: Beta quantiles at (1-level)/2 and 1-(1-level)/2."""
    _check_level(level)
    post = posterior(obs, prior)
    t = (1.0 - level) / 2.0
    lower = betaincinv(post.shape1, post.shape2, t)
    upper = betaincinv(post.shape1, post.shape2, 1.0 - t)
    _check_mass(post, lower, upper, level, "equal_tailed")
    return CredibleInterval(lower, upper, level, "equal_tailed")


def clopper_pearson(obs: BinomialObservation, level: float = 0.95) -> CredibleInterval:
    """Exact tail-inversion interval; requires an integer success count.

    Coverage is at least ``level`` for every true proportion.
    """
    _check_level(level)
    k, n = obs.successes, obs.trials
    if k != int(k):
        raise ValueError(f"Clopper-Pearson requires an integer success count, got {k}")
    if n != int(n):
        raise ValueError(f"Clopper-Pearson requires an integer trial count, got {n}")
    alpha = 1.0 - level
    lower = 0.0 if k == 0 else betaincinv(k, n - k + 1.0, alpha / 2.0)
    upper = 1.0 if k == n else betaincinv(k + 1.0, n - k, 1.0 - alpha / 2.0)
    return CredibleInterval(lower, upper, level, "clopper_pearson")


_METHODS = {
    "hpd": hpd_interval,
    "min_width": min_width_interval,
    "equal_tailed": equal_tailed_interval,
}


def interval(
    obs: BinomialObservation,
    level: float = 0.95,
    prior: PriorSpec = UNIFORM_PRIOR,
    method: str = "hpd",
) -> CredibleInterval:
    """Dispatch to one of the interval methods by name."""
    if method == "clopper_pearson":
        return clopper_pearson(obs, level)
    try:
        fn = _METHODS[method]
    except KeyError:
        raise ValueError(
            f"unknown method {method!r}; expected one of "
            f"{sorted(_METHODS) + ['clopper_pearson']}"
        ) from None
    return fn(obs, level, prior)


def min_ntest_for_width(
    expected_p_hat: float,
    max_width: float,
    level: float = 0.95,
    prior: PriorSpec = UNIFORM_PRIOR,
    cap: int = 10**6,
) -> int:
    """Smallest integer test sample size whose planning interval is narrow
    enough.

    At each candidate n the expected success count is ``expected_p_hat * n``
    (used real-valued, no rounding) and the ``hpd`` interval width is
    compared against ``max_width``.  The scan is linear from n = 1 because
    the width is not strictly monotone at tiny n with real-valued counts.
    """
    if not 0 <= expected_p_hat <= 1:
        raise ValueError(f"expected_p_hat must be in [0, 1], got {expected_p_hat}")
    if not 0 < max_width < 1:
        raise ValueError(f"max_width must be in (0, 1), got {max_width}")
    for n in range(1, cap + 1):
        ci = hpd_interval(BinomialObservation(expected_p_hat * n, n), level, prior)
        if ci.width <= max_width:
            return n
    raise InfeasibleError(
        f"no test sample size up to the cap ({cap}) achieves interval width "
        f"<= {max_width} at level {level} for expected proportion {expected_p_hat}"
    )


def worst_case_ntest(
    max_width: float,
    level: float = 0.95,
    prior: PriorSpec = UNIFORM_PRIOR,
    cap: int = 10**6,
) -> int:
    """Conservative planning size: `min_ntest_for_width` at p-hat = 0.5,
    where the interval is widest."""
    return min_ntest_for_width(0.5, max_width, level, prior, cap)


def _check_level(level: float):
    if not 0 < level < 1:
        raise ValueError(f"level must be in (0, 1), got {level}")
