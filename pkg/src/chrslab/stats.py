"""Small statistics helpers shared by the experiments."""

from __future__ import annotations

from statsmodels.stats.proportion import proportion_confint


def wilson_interval(successes: int, trials: int, alpha: float = 0.05) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    low, high = proportion_confint(successes, trials, alpha=alpha, method="wilson")
    return float(low), float(high)
