"""
Binomial convolution likelihoods for the (r, s) vertex statistics, the prior stack over
(Y, p1, p2, q2, psi) and the conditional prior inverse CDFs used as Metropolis proposals.

Everything is evaluated in log space. Convolutions run on probabilities rescaled by their
maximum with the log of the scale carried along, so short supports stay exact without FFT
round-off.
"""

import math
from dataclasses import dataclass
from enum import auto
from typing import Self, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import stats as st
from scipy.special import gammaln, xlog1py, xlogy

from nominator.graph.models import (
    Color,
    FullColoring,
    IdEnum,
    ModelParams,
    StatsBundle,
    VertexStats,
)

NORMALIZATION_TOL = 1e-9
MARGINAL_TOL = 1e-10
IDENTITY_TOL = 1e-12


class InvalidConfigError(ValueError):
    pass


def _check_probability(p: float) -> None:
    if not 0.0 <= p <= 1.0 or math.isnan(p):
        raise ValueError(f"probability must lie in [0, 1], got {p}")


def binom_log_pmf(k, n: int, p: float):
    """
    Log binomial mass via log-gamma; `k` outside [0, n] has log-probability -inf.
    """
    _check_probability(p)
    k = np.asarray(k, dtype=np.float64)
    inside = (k >= 0) & (k <= n)
    kk = np.where(inside, k, 0.0)
    log_mass = (
        gammaln(n + 1.0)
        - gammaln(kk + 1.0)
        - gammaln(n - kk + 1.0)
        + xlogy(kk, p)
        + xlog1py(n - kk, -p)
    )
    log_mass = np.where(inside, log_mass, -np.inf)
    return float(log_mass) if log_mass.ndim == 0 else log_mass


def binom_pmf(k, n: int, p: float):
    return np.exp(binom_log_pmf(k, n, p))


@dataclass(frozen=True)
class Pmf:
    """
    Finitely supported mass function on `offset, offset + 1, ...`. `weights` are scaled so their
    maximum is 1; the mass at a point is `weights * exp(log_scale)`.
    """

    offset: int
    weights: np.ndarray
    log_scale: float

    @classmethod
    def point_mass(cls, at: int = 0) -> Self:
        return cls(at, np.ones(1), 0.0)

    @classmethod
    def binomial(cls, n: int, p: float) -> Self:
        if n < 0:
            raise ValueError(f"binomial size must be non-negative, got {n}")
        log_mass = binom_log_pmf(np.arange(n + 1), n, p)
        anchor = float(np.max(log_mass))
        return cls(0, np.exp(log_mass - anchor), anchor)

    @classmethod
    def from_probabilities(cls, probabilities, offset: int = 0) -> Self:
        probabilities = np.asarray(probabilities, dtype=np.float64)
        anchor = float(probabilities.max())
        return cls(offset, probabilities / anchor, math.log(anchor))

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + self.weights.size)

    def probabilities(self) -> np.ndarray:
        return self.weights * math.exp(self.log_scale)

    def total(self) -> float:
        return float(self.weights.sum() * math.exp(self.log_scale))

    def log_pmf(self, k):
        k = np.asarray(k, dtype=np.int64)
        index = k - self.offset
        inside = (index >= 0) & (index < self.weights.size)
        with np.errstate(divide="ignore"):
            values = np.log(self.weights[np.where(inside, index, 0)]) + self.log_scale
        values = np.where(inside, values, -np.inf)
        return float(values) if values.ndim == 0 else values

    def pmf(self, k):
        return np.exp(self.log_pmf(k))

    def log_table(self, length: int) -> np.ndarray:
        """Log-masses at 0..length-1, -inf outside the support."""
        table = np.full(length, -np.inf)
        start = max(self.offset, 0)
        stop = min(self.offset + self.weights.size, length)
        if start < stop:
            with np.errstate(divide="ignore"):
                table[start:stop] = (
                    np.log(self.weights[start - self.offset : stop - self.offset])
                    + self.log_scale
                )
        return table


def convolve(g: Pmf, h: Pmf) -> Pmf:
    weights = np.convolve(g.weights, h.weights)
    anchor = float(weights.max())
    return Pmf(g.offset + h.offset, weights / anchor, g.log_scale + h.log_scale + math.log(anchor))


def double_convolve(f: Pmf, g: Pmf, h: Pmf) -> Pmf:
    return convolve(f, convolve(g, h))


class Family(IdEnum):
    """Distribution family of a vertex's statistics."""

    GREEN = auto()
    LATENT_RED = auto()
    OBSERVED_RED = auto()


def _thinning(numerator: float, denominator: float) -> float:
    # p1 + p2 == 0 only happens on the support boundary, R is then 0 almost surely
    return min(numerator / denominator, 1.0) if denominator > 0.0 else 0.0


def _check_red_count(family: Family, m: int, n: int, m_prime: int) -> None:
    lowest = m_prime + 1 if family == Family.LATENT_RED else m_prime
    if not lowest <= m <= n:
        raise ValueError(f"{family} vertices need {lowest} <= m <= {n}, got m={m}")


def conditional_s_pmf(
    family: Family, r: int, params: ModelParams, n: int, m_prime: int, m: int | None = None
) -> Pmf:
    """
    Distribution of S given R = r:
    green: Bin(n-m'-1, p2) * Bin(r, p2/(p1+p2));
    latent red: Bin(n-m, p2) * Bin(m-m'-1, q2) * Bin(r, q2/(p1+q2));
    observed red: Bin(n-m, p2) * Bin(m-m', q2) * Bin(r, q2/(p1+q2)).
    """
    if family == Family.GREEN:
        return convolve(
            Pmf.binomial(n - m_prime - 1, params.p2),
            Pmf.binomial(r, _thinning(params.p2, params.p1 + params.p2)),
        )

    assert m is not None
    _check_red_count(family, m, n, m_prime)
    red_partners = m - m_prime - 1 if family == Family.LATENT_RED else m - m_prime
    return double_convolve(
        Pmf.binomial(n - m, params.p2),
        Pmf.binomial(red_partners, params.q2),
        Pmf.binomial(r, _thinning(params.q2, params.p1 + params.q2)),
    )


def r_marginal_log_pmf(family: Family, r, params: ModelParams, m_prime: int):
    # sums are clipped so closure-boundary parameters survive rounding
    if family == Family.GREEN:
        return binom_log_pmf(r, m_prime, min(params.p1 + params.p2, 1.0))
    if family == Family.LATENT_RED:
        return binom_log_pmf(r, m_prime, min(params.p1 + params.q2, 1.0))
    return binom_log_pmf(r, m_prime - 1, min(params.p1 + params.q2, 1.0))


def _joint_log(
    family: Family, t: VertexStats, params: ModelParams, n: int, m_prime: int, m: int | None
) -> float:
    r_max = m_prime - 1 if family == Family.OBSERVED_RED else m_prime
    if not 0 <= t.r <= r_max:
        return -math.inf
    log_r = r_marginal_log_pmf(family, t.r, params, m_prime)
    return float(conditional_s_pmf(family, t.r, params, n, m_prime, m).log_pmf(t.s) + log_r)


def f1_log(t: VertexStats, params: ModelParams, n: int, m_prime: int) -> float:
    """Joint log-mass of (R, S) for a green vertex."""
    return _joint_log(Family.GREEN, t, params, n, m_prime, None)


def f2_log(t: VertexStats, m: int, params: ModelParams, n: int, m_prime: int) -> float:
    """Joint log-mass of (R, S) for a latent red vertex when the graph holds m reds."""
    return _joint_log(Family.LATENT_RED, t, params, n, m_prime, m)


def fprime_log(t: VertexStats, m: int, params: ModelParams, n: int, m_prime: int) -> float:
    """Joint log-mass of (R, S) for an observed red vertex when the graph holds m reds."""
    return _joint_log(Family.OBSERVED_RED, t, params, n, m_prime, m)


def f1_s_marginal(params: ModelParams, n: int) -> Pmf:
    return Pmf.binomial(n - 1, params.p2)


def f2_s_marginal(m: int, params: ModelParams, n: int) -> Pmf:
    return convolve(Pmf.binomial(n - m, params.p2), Pmf.binomial(m - 1, params.q2))


def fprime_s_marginal(m: int, params: ModelParams, n: int) -> Pmf:
    # same form as the latent red marginal: both see m-1 red partners
    return f2_s_marginal(m, params, n)


class LikelihoodTables:
    """
    Memo of conditional and joint log-mass tables indexed `[r, s]` for fixed parameters, keyed by
    (family, m). One instance serves one chain for as long as the parameters do not change.

    A conditional table is the r-free base (the binomial part of S that does not come from the
    observed reds) convolved with the thinning kernel of every r at once. Bases only depend on
    (p2, q2) and are handed over by `with_params` when those stay put.
    """

    def __init__(self, params: ModelParams, n: int, m_prime: int):
        self.params = params
        self.n = n
        self.m_prime = m_prime
        self._bases: dict[tuple[Family, int], Pmf] = {}
        self._conditional: dict[tuple[Family, int], np.ndarray] = {}
        self._joint: dict[tuple[Family, int], np.ndarray] = {}
        r = np.arange(m_prime + 1)
        self._r_marginal = {
            family: np.asarray(r_marginal_log_pmf(family, r, params, m_prime))
            for family in Family
        }
        self._kernels = {
            Family.GREEN: _thinning_kernels(m_prime, _thinning(params.p2, params.p1 + params.p2)),
            Family.LATENT_RED: _thinning_kernels(
                m_prime, _thinning(params.q2, params.p1 + params.q2)
            ),
        }
        self._kernels[Family.OBSERVED_RED] = self._kernels[Family.LATENT_RED]

    def with_params(self, params: ModelParams) -> Self:
        tables = type(self)(params, self.n, self.m_prime)
        if params.p2 == self.params.p2:
            same_q2 = params.q2 == self.params.q2
            tables._bases = {
                key: base
                for key, base in self._bases.items()
                if key[0] == Family.GREEN or same_q2
            }
        return tables

    def base(self, family: Family, m: int = 0) -> Pmf:
        key = (family, 0 if family == Family.GREEN else m)
        if (base := self._bases.get(key)) is None:
            if family == Family.GREEN:
                base = Pmf.binomial(self.n - self.m_prime - 1, self.params.p2)
            else:
                _check_red_count(family, m, self.n, self.m_prime)
                red_partners = m - self.m_prime - int(family == Family.LATENT_RED)
                base = convolve(
                    Pmf.binomial(self.n - m, self.params.p2),
                    Pmf.binomial(red_partners, self.params.q2),
                )
            self._bases[key] = base
        return base

    def conditional(self, family: Family, m: int = 0) -> np.ndarray:
        key = (family, 0 if family == Family.GREEN else m)
        if (table := self._conditional.get(key)) is None:
            base = self.base(family, m)
            width = self.m_prime + 1
            padded = np.zeros(self.n + width - 1)
            length = min(base.weights.size, self.n)
            padded[width - 1 : width - 1 + length] = base.weights[:length]
            # shifted[s, j] = base[s - j]
            shifted = sliding_window_view(padded, width)[: self.n, ::-1]
            with np.errstate(divide="ignore"):
                table = np.log(self._kernels[family] @ shifted.T) + base.log_scale
            self._conditional[key] = table
        return table

    def joint(self, family: Family, m: int = 0) -> np.ndarray:
        key = (family, 0 if family == Family.GREEN else m)
        if (table := self._joint.get(key)) is None:
            table = self.conditional(family, m) + self._r_marginal[family][:, None]
            self._joint[key] = table
        return table

    def log_likelihood(self, stats: StatsBundle, y_latent: np.ndarray) -> float:
        red = y_latent == Color.RED
        m = stats.m_prime + int(np.count_nonzero(red))
        green = ~red

        total = float(self.joint(Family.GREEN)[stats.latent_r[green], stats.latent_s[green]].sum())
        if m > stats.m_prime:
            latent_red = self.joint(Family.LATENT_RED, m)
            total += float(latent_red[stats.latent_r[red], stats.latent_s[red]].sum())
        observed = self.joint(Family.OBSERVED_RED, m)
        total += float(observed[stats.observed_r, stats.observed_s].sum())
        return total


def _thinning_kernels(m_prime: int, p: float) -> np.ndarray:
    """Row r holds the Bin(r, p) masses at 0..m'."""
    r = np.arange(m_prime + 1)
    return st.binom.pmf(r[None, :], r[:, None], p)


def log_likelihood(stats: StatsBundle, coloring: FullColoring, params: ModelParams) -> float:
    """
    Product over vertices of f1 (latent green), f2 (latent red) and f' (observed red), in log
    space, with m the total red count of the coloring.
    """
    if coloring.n != stats.n:
        raise ValueError(f"coloring has {coloring.n} vertices, statistics cover {stats.n}")
    if np.any(coloring.y[stats.observed_ids] != Color.RED):
        raise ValueError("observed red vertices must be colored red")
    tables = LikelihoodTables(params, stats.n, stats.m_prime)
    return tables.log_likelihood(stats, coloring.y[stats.latent_ids])


@dataclass(frozen=True)
class PriorConfig:
    """
    Beta(alpha, beta) hyperprior on psi, truncated to (0, psi_upper). The (p1, p2, q2) prior is
    fixed: Dirichlet(1, 1, 1) on (p1, p2) and q2 uniform on (p2, 1 - p1).
    """

    alpha: float
    beta: float
    psi_upper: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise InvalidConfigError(f"alpha must be positive, got {self.alpha}")
        if not self.beta > 0:
            raise InvalidConfigError(f"beta must be positive, got {self.beta}")
        if not 0.0 < self.psi_upper <= 1.0:
            raise InvalidConfigError(f"psi_upper must lie in (0, 1], got {self.psi_upper}")

    @property
    def dirichlet(self) -> tuple[float, float, float]:
        return 1.0, 1.0, 1.0

    def as_dict(self) -> dict[str, float]:
        return {"alpha": self.alpha, "beta": self.beta, "psi_upper": self.psi_upper}


def _values(params: ModelParams | Sequence[float]) -> tuple[float, float, float]:
    if isinstance(params, ModelParams):
        return params.p1, params.p2, params.q2
    p1, p2, q2 = params
    return float(p1), float(p2), float(q2)


def log_prior_pq(params: ModelParams | Sequence[float]) -> float:
    """log of 2 / (1 - p1 - p2) on the open support, -inf outside."""
    p1, p2, q2 = _values(params)
    if 0.0 < p1 < 1.0 and 0.0 < p2 < 1.0 - p1 and p2 < q2 < 1.0 - p1:
        return math.log(2.0) - math.log(1.0 - p1 - p2)
    return -math.inf


def prior_p_marginal(p: float) -> float:
    """beta(1, 2) density shared by p1 and p2."""
    return 2.0 * (1.0 - p) if 0.0 < p < 1.0 else 0.0


def prior_q2_marginal(q2: float) -> float:
    if not 0.0 < q2 < 1.0:
        return 0.0
    return 2.0 * (q2 * math.log((1.0 - q2) / q2) - math.log1p(-q2))


def prior_psi_density(psi: float, prior: PriorConfig) -> float:
    if not 0.0 < psi < prior.psi_upper:
        return 0.0
    mass = st.beta.cdf(prior.psi_upper, prior.alpha, prior.beta)
    return float(st.beta.pdf(psi, prior.alpha, prior.beta) / mass)


def log_posterior_kernel(
    stats: StatsBundle,
    coloring: FullColoring,
    params: ModelParams,
    psi: float,
    prior: PriorConfig,
) -> float:
    """Unnormalised log posterior of (Y, p1, p2, q2, psi)."""
    if not 0.0 < psi < prior.psi_upper:
        return -math.inf
    log_prior = log_prior_pq(params)
    if log_prior == -math.inf:
        return -math.inf

    m, m_prime, n = coloring.m, stats.m_prime, stats.n
    return (
        log_likelihood(stats, coloring, params)
        + (m - m_prime + prior.alpha - 1.0) * math.log(psi)
        + (n - m + prior.beta - 1.0) * math.log1p(-psi)
        + log_prior
    )


def _check_unit(u: float) -> None:
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"uniform deviate must lie in [0, 1], got {u}")


def _check_p1_conditioning(p2: float, q2: float) -> None:
    if not 0.0 <= p2 < q2 < 1.0:
        raise ValueError(f"p1 | p2, q2 needs 0 <= p2 < q2 < 1, got p2={p2}, q2={q2}")


def _check_p2_conditioning(p1: float, q2: float) -> None:
    if not (0.0 <= p1 < 1.0 and 0.0 < q2 < 1.0 - p1):
        raise ValueError(f"p2 | p1, q2 needs 0 < q2 < 1 - p1, got p1={p1}, q2={q2}")


def _check_q2_conditioning(p1: float, p2: float) -> None:
    if not (0.0 <= p1 < 1.0 and 0.0 <= p2 < 1.0 - p1):
        raise ValueError(f"q2 | p1, p2 needs 0 <= p2 < 1 - p1, got p1={p1}, p2={p2}")


def sample_p1_given(p2: float, q2: float, u: float) -> float:
    """Inverse CDF of p1 | p2, q2, whose density is proportional to 1/(1-p1-p2) on (0, 1-q2)."""
    _check_p1_conditioning(p2, q2)
    _check_unit(u)
    return 1.0 - p2 - math.exp(u * math.log(q2 - p2) + (1.0 - u) * math.log1p(-p2))


def cdf_p1_given(p1: float, p2: float, q2: float) -> float:
    _check_p1_conditioning(p2, q2)
    p1 = min(max(p1, 0.0), 1.0 - q2)
    return (math.log1p(-p2) - math.log(1.0 - p1 - p2)) / (math.log1p(-p2) - math.log(q2 - p2))


def sample_p2_given(p1: float, q2: float, u: float) -> float:
    """Inverse CDF of p2 | p1, q2, whose density is proportional to 1/(1-p1-p2) on (0, q2)."""
    _check_p2_conditioning(p1, q2)
    _check_unit(u)
    return 1.0 - p1 - math.exp(u * math.log(1.0 - p1 - q2) + (1.0 - u) * math.log1p(-p1))


def cdf_p2_given(p2: float, p1: float, q2: float) -> float:
    _check_p2_conditioning(p1, q2)
    p2 = min(max(p2, 0.0), q2)
    return (math.log1p(-p1) - math.log(1.0 - p1 - p2)) / (
        math.log1p(-p1) - math.log(1.0 - p1 - q2)
    )


def sample_q2_given(p1: float, p2: float, u: float) -> float:
    """q2 | p1, p2 is uniform on (p2, 1 - p1)."""
    _check_q2_conditioning(p1, p2)
    _check_unit(u)
    return p2 + u * (1.0 - p1 - p2)


def cdf_q2_given(q2: float, p1: float, p2: float) -> float:
    _check_q2_conditioning(p1, p2)
    return min(max((q2 - p2) / (1.0 - p1 - p2), 0.0), 1.0)


def sample_params_from_prior(rng: np.random.Generator) -> ModelParams:
    """(p1, p2) from Dirichlet(1, 1, 1), then q2 uniform on (p2, 1 - p1); redraws off-support."""
    while True:
        p1, p2, _ = rng.dirichlet([1.0, 1.0, 1.0])
        q2 = rng.uniform(p2, 1.0 - p1)
        params = ModelParams(float(p1), float(p2), float(min(q2, 1.0 - p1)))
        if params.in_support():
            return params
