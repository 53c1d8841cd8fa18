"""Monte Carlo estimate containers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class TailEstimate:
    """A probability estimate at a level, with its sampling error.

    ``method`` records how the number was obtained: ``"crude"`` for plain
    Monte Carlo, ``"tilted"`` for importance-sampled estimates, ``"exact"``
    for closed-form / quadrature values (``std_err`` is then 0).
    """

    level_x: float
    p_hat: float
    std_err: float
    n_samples: int
    method: str = "crude"

    def __post_init__(self):
        if not (-1e-12 <= self.p_hat <= 1 + 1e-12):
            raise ValueError(f"p_hat out of [0,1]: {self.p_hat}")
        if self.std_err < 0:
            raise ValueError("negative standard error")
        self.p_hat = float(min(1.0, max(0.0, self.p_hat)))


def binomial_estimate(level: float, hits: int, n: int, method: str = "crude") -> TailEstimate:
    """Tail estimate from a hit count, normal-approximation standard error."""
    p = hits / n
    se = float(np.sqrt(p * (1.0 - p) / n))
    return TailEstimate(level_x=level, p_hat=p, std_err=se, n_samples=n, method=method)
