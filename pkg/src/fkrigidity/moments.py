"""Monte Carlo summary of a trace functional."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

__all__ = ["TraceMoments", "moments_from_samples"]


@dataclass(frozen=True)
class TraceMoments:
    mean: float
    variance: float
    stderr_mean: float
    stderr_variance: float
    n_paths: int
    t: float

    def to_dict(self) -> dict:
        return asdict(self)


def moments_from_samples(x: np.ndarray, t: float) -> TraceMoments:
    """Sample mean and variance with their standard errors.

    The variance standard error uses the fourth central moment,
    ``sqrt((m4 - s^4) / n)``.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    mean = float(x.mean())
    var = float(x.var(ddof=1)) if n > 1 else 0.0
    m4 = float(np.mean((x - mean) ** 4))
    se_var = math.sqrt(max(m4 - var * var, 0.0) / n)
    return TraceMoments(mean, var, math.sqrt(var / n), se_var, n, float(t))
