"""Two-sample Z-test on mean target errors."""

import math
from dataclasses import dataclass

from .exceptions import DegenerateVariance, ValidationError


def normal_cdf(z):
    """Standard normal CDF via the complementary error function."""
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


@dataclass(frozen=True)
class ZTestResult:
    z: float
    p_two_sided: float
    se1: float
    se2: float
    mean_diff: float
    label1: str = "sample 1"
    label2: str = "sample 2"

    def to_dict(self):
        return {
            "compared": [self.label1, self.label2],
            "z": self.z,
            "p_two_sided": self.p_two_sided,
            "se1": self.se1,
            "se2": self.se2,
            "mean_diff": self.mean_diff,
        }


def z_test(mean1, sd1, n1, mean2, sd2, n2, label1="sample 1", label2="sample 2"):
    """Two-sided two-sample Z-test with ``z = |m1 - m2| / sqrt(se1^2 + se2^2)``.

    ``se_i = sd_i / sqrt(n_i)``.  ``mean_diff`` keeps its sign
    (``mean1 - mean2``); ``z`` is the absolute value.
    """
    if n1 < 2 or n2 < 2:
        raise ValidationError("each sample needs n >= 2")
    if sd1 < 0 or sd2 < 0:
        raise ValidationError("standard deviations must be >= 0")
    se1 = sd1 / math.sqrt(n1)
    se2 = sd2 / math.sqrt(n2)
    denom = se1 * se1 + se2 * se2
    if denom == 0:
        raise DegenerateVariance("both samples have zero variance")
    diff = mean1 - mean2
    z = abs(diff) / math.sqrt(denom)
    # erfc keeps precision in the far tail where 1 - cdf would cancel
    p = min(1.0, math.erfc(z / math.sqrt(2.0)))
    return ZTestResult(z, p, se1, se2, diff, label1, label2)


def z_test_summaries(a, b, pooled=True):
    """Z-test between two :class:`ExperimentSummary` objects.

    With ``pooled`` the fiducial-level mean/SD/n are used; otherwise the
    trial-average row with ``n = sum(n_fiducials)``.
    """
    if pooled and a.pooled is not None and b.pooled is not None:
        m1, s1, n1 = a.pooled
        m2, s2, n2 = b.pooled
    else:
        m1, s1, n1 = a.error, a.sd, a.n_total
        m2, s2, n2 = b.error, b.sd, b.n_total
    return z_test(m1, s1, n1, m2, s2, n2, label1=a.experiment_kind, label2=b.experiment_kind)
