"""Binomial point estimates with Wilson score intervals."""

import math
from dataclasses import dataclass, field

from scipy.stats import norm

Z95 = float(norm.ppf(0.975))
Z99 = float(norm.ppf(0.995))


def wilson_interval(successes, trials, z=Z95):
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        return 0.0, 1.0
    phat = successes / trials
    denom = 1.0 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def score_sigma(p0, trials):
    """Standard error of a proportion under the null value ``p0``."""
    return math.sqrt(p0 * (1 - p0) / trials)


@dataclass(frozen=True)
class Estimate:
    """A Monte Carlo proportion ``successes / trials`` with its Wilson 95% interval."""

    successes: int
    trials: int
    seed: int = 0
    params: dict = field(default_factory=dict, compare=False)

    @property
    def point(self):
        return self.successes / self.trials

    @property
    def interval(self):
        return wilson_interval(self.successes, self.trials)

    @property
    def sigma(self):
        p = self.point
        return math.sqrt(p * (1 - p) / self.trials)

    def consistent_with(self, p0, z=3.0):
        """True when ``p0`` lies in the Wilson interval at ``z`` standard errors.

        Equivalent to the score test ``|phat - p0| <= z * sqrt(p0 (1-p0) / n)``.
        """
        if p0 <= 0.0:
            return self.successes == 0
        if p0 >= 1.0:
            return self.successes == self.trials
        lo, hi = wilson_interval(self.successes, self.trials, z)
        return lo <= p0 <= hi

    def at_most(self, p0, z=3.0):
        """One-sided check: the estimate is not significantly above ``p0``."""
        lo, _ = wilson_interval(self.successes, self.trials, z)
        return lo <= p0

    def at_least(self, p0, z=3.0):
        _, hi = wilson_interval(self.successes, self.trials, z)
        return hi >= p0

    def to_dict(self):
        lo, hi = self.interval
        return {
            "successes": self.successes,
            "trials": self.trials,
            "estimate": self.point,
            "lo95": lo,
            "hi95": hi,
            "seed": self.seed,
            **self.params,
        }
