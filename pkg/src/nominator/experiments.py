"""
Monte Carlo studies: repeated generate, infer and nominate trials with correct-nomination rates,
BCA intervals, conditional-success curves and comparisons against the fusion statistic.
"""

import inspect
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from nominator.bootstrap import Interval, bca_ci
from nominator.config import DEFAULT_JOBS, DEFAULT_N_BOOT
from nominator.graph import compute_stats, generate_study_graph
from nominator.graph.models import AttributedGraph, InvalidGraphError, ModelParams
from nominator.helper import derive_seed
from nominator.likelihood import (
    InvalidConfigError,
    PriorConfig,
    prior_p_marginal,
    prior_psi_density,
    prior_q2_marginal,
)
from nominator.logger import create_logger
from nominator.mcmc import SamplerConfig, run_chain
from nominator.nomination import (
    DEFAULT_FUSION_GRID,
    FusionSweep,
    fusion_correct,
    summarize,
    sweep_from_flags,
)
from nominator.presets import default_prior, hyperprior

DEFAULT_THRESHOLDS = tuple(round(0.05 * k, 2) for k in range(19))
# stream index reserved for bootstrap resampling; trials use 0..n_graphs-1
_BOOTSTRAP_STREAM = -1


@dataclass(frozen=True)
class StudySpec:
    """
    :param n_graphs: independent trials, each on a freshly generated graph
    :param prior: psi hyperprior; `None` selects beta(2, n - m')
    :param master_seed: every trial derives its own seed from this and its index
    """

    n: int
    m: int
    m_prime: int
    params: ModelParams
    n_graphs: int
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    prior: PriorConfig | None = None
    fusion_grid: tuple[float, ...] = DEFAULT_FUSION_GRID
    master_seed: int = 0

    def __post_init__(self):
        if not 2 <= self.m_prime <= self.m <= self.n:
            raise InvalidConfigError(
                f"2 <= m' <= m <= n violated (n={self.n}, m={self.m}, m'={self.m_prime})"
            )
        if self.m == self.m_prime:
            raise InvalidConfigError(
                f"m = m' = {self.m} leaves no latent red vertex, nomination cannot succeed"
            )
        if self.n_graphs < 1:
            raise InvalidConfigError(f"n_graphs must be >= 1, got {self.n_graphs}")
        if not self.fusion_grid:
            raise InvalidConfigError("fusion grid must not be empty")
        for lam in self.fusion_grid:
            if not 0.0 <= lam <= 1.0:
                raise InvalidConfigError(f"fusion weight must lie in [0, 1], got {lam}")

    def effective_prior(self) -> PriorConfig:
        return default_prior(self.n, self.m_prime) if self.prior is None else self.prior

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "m_prime": self.m_prime,
            "params": self.params.as_dict(),
            "n_graphs": self.n_graphs,
            "sampler": self.sampler.as_dict(),
            "prior": self.effective_prior().as_dict(),
            "fusion_grid": list(self.fusion_grid),
            "master_seed": self.master_seed,
        }


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    nominee: int
    nominee_prob: float
    correct: bool
    param_means: dict[str, float]
    fusion_correct: tuple[bool, ...] = ()
    latent_red: tuple[int, ...] = ()

    def as_row(self) -> dict:
        return {
            "trial": self.trial,
            "nominee": self.nominee,
            "nominee_prob": self.nominee_prob,
            "correct": int(self.correct),
            **{f"mean_{k}": v for k, v in self.param_means.items()},
        }


@dataclass(frozen=True)
class ThresholdPoint:
    threshold: float
    rate: float
    ci: Interval
    n_support: int

    def as_row(self) -> dict:
        return {
            "threshold": self.threshold,
            "rate": self.rate,
            "ci_lo": self.ci.lower,
            "ci_hi": self.ci.upper,
            "n_support": self.n_support,
        }


@dataclass(frozen=True)
class StudyResult:
    spec: StudySpec
    records: list[TrialRecord]
    rate: float
    ci: Interval
    chance: float
    odds_ratio_vs_chance: float
    curve: list[ThresholdPoint]
    fusion: FusionSweep
    fusion_ci: Interval

    @property
    def odds_ratio_vs_fusion(self) -> float:
        return odds_ratio(self.rate, self.fusion.best_rate)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.as_dict(),
            "trials": len(self.records),
            "rate": self.rate,
            "ci": list(self.ci),
            "chance_rate": self.chance,
            "odds_ratio_vs_chance": self.odds_ratio_vs_chance,
            "threshold_curve": [point.as_row() for point in self.curve],
            "fusion": {**self.fusion.to_dict(), "best_ci": list(self.fusion_ci)},
            "odds_ratio_vs_fusion": self.odds_ratio_vs_fusion,
        }


def chance_rate(n: int, m: int, m_prime: int) -> float:
    """Probability that a uniformly random latent vertex is red."""
    if not 0 <= m_prime < m <= n:
        raise InvalidConfigError(f"m' < m <= n violated (n={n}, m={m}, m'={m_prime})")
    return (m - m_prime) / (n - m_prime)


def odds_ratio(rate_a: float, rate_b: float) -> float:
    """(a / (1 - a)) / (b / (1 - b)); NaN when either rate is 0 or 1."""
    for rate in (rate_a, rate_b):
        if math.isnan(rate) or not 0.0 < rate < 1.0:
            return math.nan
    return (rate_a / (1.0 - rate_a)) / (rate_b / (1.0 - rate_b))


def run_trial(spec: StudySpec, trial: int) -> TrialRecord:
    seed = derive_seed(spec.master_seed, trial)
    graph, coloring = generate_study_graph(
        spec.n, spec.m, spec.m_prime, spec.params, np.random.default_rng(seed)
    )
    stats = compute_stats(graph)
    sampler = replace(spec.sampler, seed=derive_seed(seed, 1), record_traces=False)
    summary = summarize(run_chain(graph, spec.effective_prior(), sampler, stats=stats))

    latent_red = tuple(sorted(set(coloring.red_ids.tolist()) - set(graph.observed_red)))
    return TrialRecord(
        trial=trial,
        nominee=summary.nominee,
        nominee_prob=summary.nominee_prob,
        correct=summary.nominee in latent_red,
        param_means=summary.param_means,
        fusion_correct=tuple(bool(f) for f in fusion_correct(stats, latent_red, spec.fusion_grid)),
        latent_red=latent_red,
    )


def _run_trials(spec: StudySpec, jobs: int) -> list[TrialRecord]:
    logger = create_logger(inspect.currentframe().f_code.co_name)  # type: ignore
    if jobs < 1:
        raise InvalidConfigError(f"jobs must be >= 1, got {jobs}")

    indices = range(spec.n_graphs)
    if jobs == 1:
        records = []
        for trial in indices:
            records.append(run_trial(spec, trial))
            logger.debug(f"trial {trial + 1}/{spec.n_graphs} done")
        return records

    with ProcessPoolExecutor(max_workers=jobs) as executor:
        chunksize = max(1, spec.n_graphs // (4 * jobs))
        records = list(
            executor.map(run_trial, itertools.repeat(spec), indices, chunksize=chunksize)
        )
    logger.debug(f"{spec.n_graphs} trials done on {jobs} workers")
    return sorted(records, key=lambda record: record.trial)


def threshold_curve(
    records: Sequence[TrialRecord],
    thresholds: Iterable[float] = DEFAULT_THRESHOLDS,
    *,
    level: float = 0.95,
    n_boot: int = DEFAULT_N_BOOT,
    rng: np.random.Generator | None = None,
) -> list[ThresholdPoint]:
    """
    Success rate among trials whose nominee's marginal exceeds each threshold; a threshold of 0
    or below keeps every trial. Thresholds nobody exceeds get a NaN rate and zero support.
    """
    if not records:
        raise ValueError("threshold curve needs at least one trial")
    rng = np.random.default_rng() if rng is None else rng
    probs = np.array([record.nominee_prob for record in records])
    correct = np.array([record.correct for record in records], dtype=np.float64)

    points = []
    for threshold in thresholds:
        mask = np.ones(probs.size, dtype=bool) if threshold <= 0.0 else probs > threshold
        support = int(mask.sum())
        if support == 0:
            points.append(ThresholdPoint(threshold, math.nan, Interval(math.nan, math.nan), 0))
            continue
        flags = correct[mask]
        ci = bca_ci(flags, level=level, n_boot=n_boot, rng=rng)
        points.append(ThresholdPoint(threshold, float(flags.mean()), ci, support))
    return points


def run_study(
    spec: StudySpec,
    *,
    jobs: int = DEFAULT_JOBS,
    thresholds: Iterable[float] = DEFAULT_THRESHOLDS,
    level: float = 0.95,
    n_boot: int = DEFAULT_N_BOOT,
) -> StudyResult:
    logger = create_logger(
        inspect.currentframe().f_code.co_name, m=spec.m, mprime=spec.m_prime  # type: ignore
    )
    logger.info(
        f"study n={spec.n} m={spec.m} m'={spec.m_prime} params={spec.params.as_dict()} "
        f"over {spec.n_graphs} graphs"
    )
    records = _run_trials(spec, jobs)

    rng = np.random.default_rng(derive_seed(spec.master_seed, _BOOTSTRAP_STREAM))
    correct = np.array([record.correct for record in records], dtype=np.float64)
    rate = float(correct.mean())
    ci = bca_ci(correct, level=level, n_boot=n_boot, rng=rng)
    curve = threshold_curve(records, thresholds, level=level, n_boot=n_boot, rng=rng)

    flags = np.array([record.fusion_correct for record in records], dtype=bool)
    fusion = sweep_from_flags(spec.fusion_grid, flags)
    best = spec.fusion_grid.index(fusion.best_lambda)
    fusion_ci = bca_ci(flags[:, best].astype(np.float64), level=level, n_boot=n_boot, rng=rng)

    chance = chance_rate(spec.n, spec.m, spec.m_prime)
    logger.info(f"rate {rate:.4f} ({ci.lower:.4f}, {ci.upper:.4f}), chance {chance:.4f}")
    return StudyResult(
        spec=spec,
        records=records,
        rate=rate,
        ci=ci,
        chance=chance,
        odds_ratio_vs_chance=odds_ratio(rate, chance),
        curve=curve,
        fusion=fusion,
        fusion_ci=fusion_ci,
    )


@dataclass(frozen=True)
class ComparisonColumn:
    m: int
    m_prime: int
    bvn_rate: float
    bvn_ci: Interval
    fusion_rate: float
    fusion_ci: Interval
    fusion_lambda: float

    @property
    def odds_ratio(self) -> float:
        return odds_ratio(self.bvn_rate, self.fusion_rate)

    def as_row(self) -> dict:
        return {
            "m": self.m,
            "m_prime": self.m_prime,
            "bvn_rate": self.bvn_rate,
            "bvn_ci_lo": self.bvn_ci.lower,
            "bvn_ci_hi": self.bvn_ci.upper,
            "cp_rate": self.fusion_rate,
            "cp_ci_lo": self.fusion_ci.lower,
            "cp_ci_hi": self.fusion_ci.upper,
            "cp_lambda": self.fusion_lambda,
            "odds_ratio": self.odds_ratio,
        }


def comparison_column(result: StudyResult) -> ComparisonColumn:
    return ComparisonColumn(
        m=result.spec.m,
        m_prime=result.spec.m_prime,
        bvn_rate=result.rate,
        bvn_ci=result.ci,
        fusion_rate=result.fusion.best_rate,
        fusion_ci=result.fusion_ci,
        fusion_lambda=result.fusion.best_lambda,
    )


def comparison_table(
    specs: Sequence[StudySpec], *, jobs: int = DEFAULT_JOBS, n_boot: int = DEFAULT_N_BOOT
) -> list[ComparisonColumn]:
    """One column per spec: posterior nominator vs the oracle-tuned fusion statistic."""
    if not specs:
        raise ValueError("comparison table needs at least one study")
    return [comparison_column(run_study(spec, jobs=jobs, n_boot=n_boot)) for spec in specs]


def format_comparison(columns: Sequence[ComparisonColumn]) -> str:
    header = ["", *(f"m={c.m} m'={c.m_prime}" for c in columns)]
    rows = [
        ["BVN", *(f"{c.bvn_rate:.2f} ({c.bvn_ci[0]:.2f}, {c.bvn_ci[1]:.2f})" for c in columns)],
        ["C&P", *(f"{c.fusion_rate:.2f} (lambda={c.fusion_lambda:.2f})" for c in columns)],
        ["OR", *(f"{c.odds_ratio:.2f}" for c in columns)],
    ]
    widths = [max(len(row[k]) for row in [header, *rows]) for k in range(len(header))]
    return "\n".join(
        "  ".join(cell.ljust(width) for cell, width in zip(row, widths)) for row in [header, *rows]
    )


@dataclass(frozen=True)
class CombinationRecord:
    observed: tuple[int, ...]
    nominee: int
    nominee_prob: float
    correct: bool
    param_means: dict[str, float]


@dataclass(frozen=True)
class CombinationResult:
    records: list[CombinationRecord]
    rate: float
    ci: Interval
    chance: float

    def mean_params(self) -> ModelParams:
        """Posterior means of (p1, p2, q2) averaged over every combination."""
        means = {
            key: float(np.mean([record.param_means[key] for record in self.records]))
            for key in ("p1", "p2", "q2")
        }
        return ModelParams.from_dict(means)

    def to_dict(self, index_base: int = 0) -> dict:
        return {
            "combinations": len(self.records),
            "rate": self.rate,
            "ci": list(self.ci),
            "chance_rate": self.chance,
            "odds_ratio_vs_chance": odds_ratio(self.rate, self.chance),
            "mean_params": self.mean_params().as_dict(),
            "index_base": index_base,
        }


def _run_combination(
    graph: AttributedGraph,
    red: frozenset[int],
    observed: tuple[int, ...],
    prior: PriorConfig,
    sampler: SamplerConfig,
) -> CombinationRecord:
    subgraph = AttributedGraph(graph.edge_attr, observed)
    summary = summarize(run_chain(subgraph, prior, sampler))
    return CombinationRecord(
        observed=observed,
        nominee=summary.nominee,
        nominee_prob=summary.nominee_prob,
        correct=summary.nominee in red - set(observed),
        param_means=summary.param_means,
    )


def run_combination_study(
    graph: AttributedGraph,
    red_ids: Iterable[int],
    m_prime: int,
    prior: PriorConfig | None = None,
    sampler: SamplerConfig | None = None,
    seed: int = 0,
    *,
    level: float = 0.95,
    n_boot: int = DEFAULT_N_BOOT,
) -> CombinationResult:
    """
    Leave-m'-in protocol on a graph with a known red set: every m'-subset of the reds is treated
    as observed in turn and the nominee is scored against the remaining reds.
    """
    logger = create_logger(inspect.currentframe().f_code.co_name)  # type: ignore
    red = frozenset(int(v) for v in red_ids)
    if any(not 0 <= v < graph.n for v in red):
        raise InvalidGraphError(f"red ids must lie in [0, {graph.n})")
    if not 2 <= m_prime < len(red):
        raise InvalidConfigError(f"2 <= m' < m violated (m={len(red)}, m'={m_prime})")

    prior = default_prior(graph.n, m_prime) if prior is None else prior
    sampler = SamplerConfig() if sampler is None else sampler
    subsets = list(itertools.combinations(sorted(red), m_prime))
    logger.info(f"{len(subsets)} combinations of {m_prime} observed reds out of {len(red)}")

    records = [
        _run_combination(graph, red, observed, prior, replace(sampler, seed=derive_seed(seed, k)))
        for k, observed in enumerate(subsets)
    ]
    correct = np.array([record.correct for record in records], dtype=np.float64)
    ci = bca_ci(
        correct,
        level=level,
        n_boot=n_boot,
        rng=np.random.default_rng(derive_seed(seed, _BOOTSTRAP_STREAM)),
    )
    return CombinationResult(
        records=records,
        rate=float(correct.mean()),
        ci=ci,
        chance=chance_rate(graph.n, len(red), m_prime),
    )


def hyperprior_sensitivity(
    spec: StudySpec,
    names: Iterable[str],
    *,
    jobs: int = DEFAULT_JOBS,
    n_boot: int = DEFAULT_N_BOOT,
) -> dict[str, StudyResult]:
    """The same study (same graphs, same chain seeds) under each named psi hyperprior."""
    return {
        name: run_study(
            replace(spec, prior=hyperprior(name).prior(spec.n, spec.m_prime)),
            jobs=jobs,
            n_boot=n_boot,
        )
        for name in names
    }


def prior_marginal_table(grid: Iterable[float], prior: PriorConfig) -> np.ndarray:
    """
    Prior densities on a grid, columns (x, p1, p2, q2, psi); p1 and p2 share one marginal.
    """
    rows = []
    for x in grid:
        p = prior_p_marginal(x)
        rows.append([x, p, p, prior_q2_marginal(x), prior_psi_density(x, prior)])
    return np.array(rows, dtype=np.float64).reshape(-1, 5)
