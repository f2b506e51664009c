import inspect
from typing import NamedTuple

import numpy as np
from scipy import stats as st

from nominator.config import DEFAULT_N_BOOT
from nominator.logger import create_logger

# resamples drawn per batch on the generic (non-binary) path
_BATCH = 1000


class Interval(NamedTuple):
    lower: float
    upper: float


def bootstrap_means(x: np.ndarray, n_boot: int, rng: np.random.Generator) -> np.ndarray:
    """
    Means of `n_boot` resamples with replacement. For 0/1 data the resampled mean is exactly a
    binomial proportion, which is drawn directly.
    """
    n = x.size
    if np.isin(x, [0.0, 1.0]).all():
        return rng.binomial(n, float(x.mean()), size=n_boot) / n

    means = np.empty(n_boot)
    for start in range(0, n_boot, _BATCH):
        stop = min(start + _BATCH, n_boot)
        means[start:stop] = x[rng.integers(0, n, size=(stop - start, n))].mean(axis=1)
    return means


def jackknife_means(x: np.ndarray) -> np.ndarray:
    return (x.sum() - x) / (x.size - 1)


def acceleration(jackknife_values: np.ndarray) -> float | None:
    """Skewness-based acceleration; `None` when the jackknife values do not vary."""
    d = jackknife_values.mean() - jackknife_values
    denominator = float((d**2).sum())
    if denominator == 0.0:
        return None
    return float((d**3).sum() / (6.0 * denominator**1.5))


def bca_ci(
    samples,
    level: float = 0.95,
    n_boot: int = DEFAULT_N_BOOT,
    rng: np.random.Generator | None = None,
) -> Interval:
    """
    Equal-tail bias-corrected and accelerated bootstrap interval for the mean.

    :param samples: per-trial outcomes (0/1 flags or any numeric values)
    :param level: coverage, e.g. 0.95
    :param n_boot: bootstrap resamples
    :return: (lower, upper); a point interval when all samples are equal
    """
    logger = create_logger(inspect.currentframe().f_code.co_name)  # type: ignore
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("bootstrap needs at least one sample")
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level must lie in (0, 1), got {level}")
    if n_boot < 1:
        raise ValueError(f"n_boot must be positive, got {n_boot}")

    theta = float(x.mean())
    if np.all(x == x[0]):
        return Interval(theta, theta)

    rng = np.random.default_rng() if rng is None else rng
    boot = bootstrap_means(x, n_boot, rng)
    alpha = 1.0 - level

    a_hat = acceleration(jackknife_means(x))
    if a_hat is None:
        logger.warning("jackknife values do not vary, falling back to the percentile interval")
        low, high = np.quantile(boot, [alpha / 2.0, 1.0 - alpha / 2.0])
        return Interval(float(low), float(high))

    below = float(np.count_nonzero(boot < theta)) / n_boot
    below = min(max(below, 0.5 / n_boot), 1.0 - 0.5 / n_boot)
    z0 = st.norm.ppf(below)

    percentiles = []
    for z_alpha in st.norm.ppf([alpha / 2.0, 1.0 - alpha / 2.0]):
        shifted = z0 + z_alpha
        percentiles.append(st.norm.cdf(z0 + shifted / (1.0 - a_hat * shifted)))
    low, high = np.quantile(boot, percentiles)
    return Interval(float(low), float(high))


def percentile_ci(
    samples,
    level: float = 0.95,
    n_boot: int = DEFAULT_N_BOOT,
    rng: np.random.Generator | None = None,
) -> Interval:
    x = np.asarray(samples, dtype=np.float64)
    rng = np.random.default_rng() if rng is None else rng
    boot = bootstrap_means(x, n_boot, rng)
    alpha = 1.0 - level
    low, high = np.quantile(boot, [alpha / 2.0, 1.0 - alpha / 2.0])
    return Interval(float(low), float(high))
