"""
Metropolis-within-Gibbs sampler: a sequential Gibbs sweep over the latent colors, a conjugate
beta draw for psi and three Metropolis-Hastings updates of p1, p2 and q2 whose proposals are the
conditional priors (so the acceptance ratio reduces to a likelihood ratio).
"""

import inspect
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Self

import numpy as np
from scipy import stats as st
from scipy.special import expit

from nominator.graph import compute_stats
from nominator.graph.models import AttributedGraph, Color, ModelParams, Param, StatsBundle
from nominator.likelihood import (
    Family,
    InvalidConfigError,
    LikelihoodTables,
    PriorConfig,
    sample_p1_given,
    sample_p2_given,
    sample_params_from_prior,
    sample_q2_given,
)
from nominator.logger import create_logger

# proposals are kept this far inside the open support
BOUNDARY_EPS = 1e-12
# simplified vs full conditional probability of a latent vertex being red
GAMMA_CHECK_TOL = 1e-8
ACCEPTANCE_BOUNDS = (0.001, 0.999)


class SamplerConsistencyError(RuntimeError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    """
    :param burn_in: iterations discarded before recording
    :param samples: recorded iterations
    :param seed: seed of the chain's random stream
    :param record_traces: keep per-iteration colors and the burn-in history
    :param check_rate: fraction of Gibbs updates re-derived from full likelihoods
    :param require_latent_red: prior forcing at least one latent red vertex (not supported)
    """

    burn_in: int = 1000
    samples: int = 1000
    seed: int = 0
    record_traces: bool = False
    check_rate: float = 0.01
    require_latent_red: bool = False

    def __post_init__(self):
        if self.burn_in < 0:
            raise InvalidConfigError(f"burn_in must be >= 0, got {self.burn_in}")
        if self.samples < 1:
            raise InvalidConfigError(f"samples must be >= 1, got {self.samples}")
        if not 0.0 <= self.check_rate <= 1.0:
            raise InvalidConfigError(f"check_rate must lie in [0, 1], got {self.check_rate}")
        if self.require_latent_red:
            raise InvalidConfigError(
                "a prior requiring at least one latent red vertex has no conjugate psi update "
                "and is not supported; use the independent Bernoulli prior"
            )

    @property
    def iterations(self) -> int:
        return self.burn_in + self.samples

    def as_dict(self) -> dict:
        return {
            "burn_in": self.burn_in,
            "samples": self.samples,
            "seed": self.seed,
            "record_traces": self.record_traces,
            "check_rate": self.check_rate,
        }


@dataclass(frozen=True)
class ChainState:
    """
    :param y: colors of the latent vertices (ascending id), 1 green / 2 red
    :param h: iteration index
    """

    y: np.ndarray
    params: ModelParams
    psi: float
    n: int
    m_prime: int
    h: int = 0

    def __post_init__(self):
        y = np.array(self.y, dtype=np.int8)
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

    @property
    def m(self) -> int:
        return self.m_prime + int(np.count_nonzero(self.y == Color.RED))

    def check(self) -> Self:
        self.params.require_support()
        if not 0.0 < self.psi < 1.0:
            raise SamplerConsistencyError(f"psi left (0, 1): {self.psi}")
        if self.y.size != self.n - self.m_prime:
            raise SamplerConsistencyError("latent color vector has the wrong length")
        return self


class ConditionalTerms:
    """
    Log-odds of a latent vertex being red given all other coordinates. The R-marginal factors
    of the other red vertices do not depend on m and cancel, so only conditional S tables enter.
    Per-m sums over the current red vertices are memoised and moved along with every
    `set_red`, so one update costs a handful of lookups (fixed parameters).
    """

    def __init__(self, tables: LikelihoodTables, stats: StatsBundle, psi: float, red: np.ndarray):
        self.tables = tables
        self.stats = stats
        self.prior_log_odds = math.log(psi) - math.log1p(-psi)
        self.green = tables.joint(Family.GREEN)[stats.latent_r, stats.latent_s]
        self.red = np.array(red, dtype=bool)
        self.n_red = int(np.count_nonzero(self.red))
        self._latent_red: dict[int, np.ndarray] = {}
        self._latent_red_joint: dict[int, np.ndarray] = {}
        self._observed: dict[int, float] = {}
        self._red_sums: dict[int, float] = {}

    def latent_red_conditional(self, m: int) -> np.ndarray:
        if (values := self._latent_red.get(m)) is None:
            table = self.tables.conditional(Family.LATENT_RED, m)
            values = table[self.stats.latent_r, self.stats.latent_s]
            self._latent_red[m] = values
        return values

    def latent_red_joint(self, m: int) -> np.ndarray:
        if (values := self._latent_red_joint.get(m)) is None:
            table = self.tables.joint(Family.LATENT_RED, m)
            values = table[self.stats.latent_r, self.stats.latent_s]
            self._latent_red_joint[m] = values
        return values

    def observed_conditional(self, m: int) -> float:
        if (value := self._observed.get(m)) is None:
            table = self.tables.conditional(Family.OBSERVED_RED, m)
            value = float(table[self.stats.observed_r, self.stats.observed_s].sum())
            self._observed[m] = value
        return value

    def _red_sum_without(self, m: int, i: int) -> float:
        values = self.latent_red_conditional(m)
        if (total := self._red_sums.get(m)) is None:
            total = float(values[self.red].sum())
            self._red_sums[m] = total
        if self.red[i]:
            total -= float(values[i])
        if not math.isfinite(total):
            # an impossible red vertex poisons the running sum
            mask = self.red.copy()
            mask[i] = False
            total = float(values[mask].sum())
        return total

    def set_red(self, i: int, red: bool) -> None:
        if self.red[i] == red:
            return
        self.red[i] = red
        self.n_red += 1 if red else -1
        sign = 1.0 if red else -1.0
        for m in self._red_sums:
            self._red_sums[m] += sign * float(self._latent_red[m][i])

    def log_odds(self, i: int) -> float:
        others = self.n_red - int(self.red[i])
        m_minus = self.stats.m_prime + others

        # log of f(Y(i)=1, ...) / f(Y(i)=2, ...)
        delta = (
            -self.prior_log_odds
            + self.green[i]
            - self.latent_red_joint(m_minus + 1)[i]
            + self.observed_conditional(m_minus)
            - self.observed_conditional(m_minus + 1)
        )
        if others:
            delta += self._red_sum_without(m_minus, i) - self._red_sum_without(m_minus + 1, i)
        return -float(delta)


def _tables_for(state: ChainState, tables: LikelihoodTables | None) -> LikelihoodTables:
    if tables is None:
        return LikelihoodTables(state.params, state.n, state.m_prime)
    if tables.params == state.params:
        return tables
    return tables.with_params(state.params)


def gamma_i(
    i: int, state: ChainState, stats: StatsBundle, tables: LikelihoodTables | None = None
) -> float:
    """Conditional posterior probability that latent vertex `i` is red."""
    terms = ConditionalTerms(_tables_for(state, tables), stats, state.psi, state.y == Color.RED)
    return float(expit(terms.log_odds(i)))


def gamma_i_full(
    i: int, state: ChainState, stats: StatsBundle, tables: LikelihoodTables | None = None
) -> float:
    """Same probability computed from two complete likelihood evaluations."""
    tables = _tables_for(state, tables)
    y_red = np.array(state.y)
    y_red[i] = Color.RED
    y_green = np.array(state.y)
    y_green[i] = Color.GREEN
    log_odds = (
        tables.log_likelihood(stats, y_red)
        - tables.log_likelihood(stats, y_green)
        + math.log(state.psi)
        - math.log1p(-state.psi)
    )
    return float(expit(log_odds))


GammaFn = Callable[[int, ChainState, StatsBundle, LikelihoodTables], float]


def gibbs_sweep_y(
    state: ChainState,
    stats: StatsBundle,
    rng: np.random.Generator,
    *,
    tables: LikelihoodTables | None = None,
    gamma_fn: GammaFn | None = None,
    check_rng: np.random.Generator | None = None,
    check_rate: float = 0.0,
) -> ChainState:
    """
    Resample Y(1), ..., Y(n - m') in ascending order, each from its conditional given the
    freshest values of all other coordinates.

    :param gamma_fn: replaces the conditional probability (used to force degenerate sweeps)
    :param check_rng: independent stream deciding which updates are cross-checked
    """
    tables = _tables_for(state, tables)
    y = np.array(state.y)
    terms = ConditionalTerms(tables, stats, state.psi, y == Color.RED)
    uniforms = rng.random(y.size)
    checks = check_rng.random(y.size) < check_rate if check_rng is not None else None

    for i in range(y.size):
        if gamma_fn is not None:
            gamma = gamma_fn(i, replace(state, y=y), stats, tables)
        else:
            gamma = float(expit(terms.log_odds(i)))
            if checks is not None and checks[i]:
                full = gamma_i_full(i, replace(state, y=y), stats, tables)
                if abs(full - gamma) > GAMMA_CHECK_TOL:
                    raise SamplerConsistencyError(
                        f"conditional of latent vertex {i}: simplified {gamma} vs full {full}"
                    )
        is_red = bool(uniforms[i] < gamma)
        terms.set_red(i, is_red)
        y[i] = Color.RED if is_red else Color.GREEN

    return replace(state, y=y)


def gibbs_update_psi(state: ChainState, prior: PriorConfig, rng: np.random.Generator) -> ChainState:
    """psi ~ beta(m - m' + alpha, n - m + beta), truncated to (0, psi_upper)."""
    a = state.m - state.m_prime + prior.alpha
    b = state.n - state.m + prior.beta
    if prior.psi_upper < 1.0:
        upper_mass = st.beta.cdf(prior.psi_upper, a, b)
        psi = float(st.beta.ppf(rng.random() * upper_mass, a, b))
    else:
        psi = float(rng.beta(a, b))
    psi = min(max(psi, BOUNDARY_EPS), prior.psi_upper - BOUNDARY_EPS)
    return replace(state, psi=psi)


def propose(param: Param, params: ModelParams, u: float) -> float | None:
    """
    Draw from the conditional prior of `param` given the other two by inverse CDF, clamped
    `BOUNDARY_EPS` inside the support; `None` if the support interval has collapsed.
    """
    match param:
        case Param.P1:
            value, low, high = sample_p1_given(params.p2, params.q2, u), 0.0, 1.0 - params.q2
        case Param.P2:
            value, low, high = sample_p2_given(params.p1, params.q2, u), 0.0, params.q2
        case _:
            value = sample_q2_given(params.p1, params.p2, u)
            low, high = params.p2, 1.0 - params.p1

    if high - low <= 2 * BOUNDARY_EPS:
        return None
    return min(max(value, low + BOUNDARY_EPS), high - BOUNDARY_EPS)


@dataclass(frozen=True)
class MhResult:
    state: ChainState
    accepted: bool
    log_likelihood: float
    tables: LikelihoodTables


def mh_update_param(
    param: Param,
    state: ChainState,
    stats: StatsBundle,
    rng: np.random.Generator,
    *,
    tables: LikelihoodTables | None = None,
    log_likelihood: float | None = None,
) -> MhResult:
    """
    Metropolis-Hastings step for one of p1, p2, q2 with the conditional prior as proposal; the
    acceptance probability is min(1, likelihood ratio).
    """
    tables = _tables_for(state, tables)
    if log_likelihood is None:
        log_likelihood = tables.log_likelihood(stats, state.y)

    value = propose(param, state.params, rng.random())
    u = rng.random()
    if value is None:
        return MhResult(state, False, log_likelihood, tables)

    proposed = state.params.replace(param, value)
    if not proposed.in_support():
        return MhResult(state, False, log_likelihood, tables)

    proposed_tables = tables.with_params(proposed)
    proposed_log_likelihood = proposed_tables.log_likelihood(stats, state.y)
    log_ratio = proposed_log_likelihood - log_likelihood
    if log_ratio >= 0.0 or u < math.exp(log_ratio):
        return MhResult(
            replace(state, params=proposed), True, proposed_log_likelihood, proposed_tables
        )
    return MhResult(state, False, log_likelihood, tables)


@dataclass
class TraceHistory:
    """Every iteration from 1 (burn-in included), for moving-average diagnostics."""

    indicators: np.ndarray
    params: np.ndarray
    psi: np.ndarray


@dataclass
class ChainTrace:
    """
    Post-burn-in record of a chain. `red_counts[i]` counts the recorded iterations in which latent
    vertex `latent_ids[i]` was red; `indicators` holds the colors themselves when traces are kept.
    """

    latent_ids: np.ndarray
    burn_in: int
    params: np.ndarray
    psi: np.ndarray
    m: np.ndarray
    accepted: np.ndarray
    red_counts: np.ndarray
    indicators: np.ndarray | None = None
    history: TraceHistory | None = None
    burn_in_accepted: np.ndarray = field(default_factory=lambda: np.zeros(3, dtype=np.int64))

    @property
    def samples(self) -> int:
        return int(self.psi.size)

    def acceptance_rates(self) -> dict[str, float]:
        rates = self.accepted.mean(axis=0)
        return {param.value: float(rate) for param, rate in zip(Param, rates)}

    def _require_history(self) -> TraceHistory:
        if self.history is None:
            raise ValueError("moving averages need a chain run with record_traces enabled")
        return self.history

    def moving_marginals(self) -> np.ndarray:
        """Running estimate, per iteration, of P(Y(i) = 2) over iterations 1..h."""
        history = self._require_history()
        counts = np.cumsum(history.indicators == Color.RED, axis=0)
        return counts / np.arange(1, counts.shape[0] + 1)[:, None]

    def moving_param_means(self) -> np.ndarray:
        """Running means of (p1, p2, q2, psi) over iterations 1..h."""
        history = self._require_history()
        values = np.column_stack([history.params, history.psi])
        return np.cumsum(values, axis=0) / np.arange(1, values.shape[0] + 1)[:, None]


def initial_state(stats: StatsBundle, prior: PriorConfig, rng: np.random.Generator) -> ChainState:
    """All latent vertices green, (p1, p2, q2) from their prior, psi at its prior mean."""
    psi = prior.alpha / (prior.alpha + prior.beta)
    if psi >= prior.psi_upper:
        psi = prior.psi_upper / 2.0
    return ChainState(
        y=np.full(stats.n_latent, Color.GREEN, dtype=np.int8),
        params=sample_params_from_prior(rng),
        psi=psi,
        n=stats.n,
        m_prime=stats.m_prime,
    )


def run_chain(
    graph: AttributedGraph,
    prior: PriorConfig,
    config: SamplerConfig,
    *,
    stats: StatsBundle | None = None,
) -> ChainTrace:
    logger = create_logger(
        inspect.currentframe().f_code.co_name, seed=config.seed  # type: ignore
    )
    stats = compute_stats(graph) if stats is None else stats
    rng = np.random.default_rng(config.seed)
    check_rng = np.random.default_rng([config.seed, 1])

    state = initial_state(stats, prior, rng)
    tables = LikelihoodTables(state.params, state.n, state.m_prime)
    n_latent, total = stats.n_latent, config.iterations

    params = np.empty((config.samples, 3))
    psi = np.empty(config.samples)
    m = np.empty(config.samples, dtype=np.int64)
    accepted = np.zeros((config.samples, 3), dtype=bool)
    burn_in_accepted = np.zeros(3, dtype=np.int64)
    red_counts = np.zeros(n_latent, dtype=np.int64)
    indicators = (
        np.empty((config.samples, n_latent), dtype=np.int8) if config.record_traces else None
    )
    history = (
        TraceHistory(
            np.empty((total, n_latent), dtype=np.int8), np.empty((total, 3)), np.empty(total)
        )
        if config.record_traces
        else None
    )

    logger.debug(f"{n_latent} latent vertices, {config.burn_in}+{config.samples} iterations")
    for h in range(1, total + 1):
        state = gibbs_sweep_y(
            state, stats, rng, tables=tables, check_rng=check_rng, check_rate=config.check_rate
        )
        state = gibbs_update_psi(state, prior, rng)
        log_likelihood = tables.log_likelihood(stats, state.y)
        step_accepted = []
        for param in Param:
            result = mh_update_param(
                param, state, stats, rng, tables=tables, log_likelihood=log_likelihood
            )
            state, tables, log_likelihood = result.state, result.tables, result.log_likelihood
            step_accepted.append(result.accepted)
        state = replace(state, h=h).check()

        if history is not None:
            history.indicators[h - 1] = state.y
            history.params[h - 1] = state.params.as_array()
            history.psi[h - 1] = state.psi
        if h <= config.burn_in:
            burn_in_accepted += step_accepted
            continue

        k = h - config.burn_in - 1
        params[k] = state.params.as_array()
        psi[k] = state.psi
        m[k] = state.m
        accepted[k] = step_accepted
        red_counts += state.y == Color.RED
        if indicators is not None:
            indicators[k] = state.y

    trace = ChainTrace(
        latent_ids=stats.latent_ids.copy(),
        burn_in=config.burn_in,
        params=params,
        psi=psi,
        m=m,
        accepted=accepted,
        red_counts=red_counts,
        indicators=indicators,
        history=history,
        burn_in_accepted=burn_in_accepted,
    )
    rates = trace.acceptance_rates()
    logger.debug(f"acceptance rates {rates}")
    low, high = ACCEPTANCE_BOUNDS
    if config.samples >= 1000 and any(not low < rate < high for rate in rates.values()):
        logger.warning(f"acceptance rates outside ({low}, {high}): {rates}")
    return trace


def autocorrelation(series, max_lag: int) -> np.ndarray:
    """
    Sample autocorrelation at lags 0..max_lag, normalised by the lag-0 sum of squares; a constant
    series yields NaN at every lag.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.size <= max_lag:
        raise ValueError(f"series of length {x.size} is too short for lag {max_lag}")
    d = x - x.mean()
    denominator = float(d @ d)
    if denominator == 0.0:
        return np.full(max_lag + 1, np.nan)
    return np.array([float(d[: x.size - k] @ d[k:]) / denominator for k in range(max_lag + 1)])
