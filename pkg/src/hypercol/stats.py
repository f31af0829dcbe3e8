"""Small helpers for Monte Carlo estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    trials: int

    @classmethod
    def from_samples(cls, samples) -> "Estimate":
        x = np.asarray(samples, dtype=float)
        n = x.size
        if n == 0:
            raise ValueError("no samples")
        se = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
        return cls(float(x.mean()), se, n)

    def zscore(self, value: float) -> float:
        """Signed distance of ``value`` from the estimate in standard errors."""
        if self.stderr == 0:
            return 0.0 if value == self.mean else math.copysign(math.inf, value - self.mean)
        return (value - self.mean) / self.stderr

    def within(self, value: float, sigmas: float = 3.0) -> bool:
        return abs(self.mean - value) <= sigmas * self.stderr + 1e-15


def binomial_stderr(p: float, trials: int) -> float:
    """Standard error of a frequency; the p(1-p) floor avoids a zero error bar."""
    p = min(max(p, 1.0 / (trials + 1)), 1.0 - 1.0 / (trials + 1))
    return math.sqrt(p * (1.0 - p) / trials)
