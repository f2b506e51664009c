from dataclasses import dataclass
from typing import Iterable, Self

import numpy as np

from nominator.graph.models import StatsBundle
from nominator.likelihood import InvalidConfigError
from nominator.mcmc import ChainTrace

DEFAULT_FUSION_GRID = tuple(round(0.05 * k, 2) for k in range(21))
# relative slack when comparing fusion scores for ties
_TIE_SLACK = 1e-9


@dataclass(frozen=True)
class PosteriorSummary:
    """
    :param marginal_red: estimated P(Y(v) = 2 | data) per latent vertex, aligned with `latent_ids`
    :param param_means: posterior means of p1, p2, q2 and psi
    """

    latent_ids: np.ndarray
    marginal_red: np.ndarray
    param_means: dict[str, float]
    nominee: int
    nominee_prob: float
    samples: int

    def marginal(self, vertex: int) -> float:
        hits = np.flatnonzero(self.latent_ids == vertex)
        if not hits.size:
            raise KeyError(vertex)
        return float(self.marginal_red[hits[0]])

    def to_dict(self, index_base: int = 0) -> dict:
        return {
            "nominee": self.nominee + index_base,
            "nominee_prob": self.nominee_prob,
            "marginals": {
                str(int(v) + index_base): float(p)
                for v, p in zip(self.latent_ids, self.marginal_red)
            },
            "param_means": dict(self.param_means),
            "samples": self.samples,
            "index_base": index_base,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Self:
        base = int(d.get("index_base", 0))
        marginals = sorted((int(k) - base, float(v)) for k, v in d["marginals"].items())
        return cls(
            latent_ids=np.array([v for v, _ in marginals], dtype=np.int64),
            marginal_red=np.array([p for _, p in marginals]),
            param_means={k: float(v) for k, v in d["param_means"].items()},
            nominee=int(d["nominee"]) - base,
            nominee_prob=float(d["nominee_prob"]),
            samples=int(d.get("samples", 0)),
        )


def summarize(trace: ChainTrace) -> PosteriorSummary:
    """
    Time averages over the recorded (post-burn-in) iterations; the nominee is the latent vertex
    red most often, ties going to the lowest id.
    """
    if trace.samples < 1:
        raise ValueError("cannot summarize an empty trace")
    if trace.red_counts.size == 0:
        raise ValueError("graph has no latent vertex to nominate")

    # integer counts keep ties exact
    best = int(np.argmax(trace.red_counts))
    marginal_red = trace.red_counts / trace.samples
    p1, p2, q2 = trace.params.mean(axis=0)
    return PosteriorSummary(
        latent_ids=trace.latent_ids,
        marginal_red=marginal_red,
        param_means={
            "p1": float(p1),
            "p2": float(p2),
            "q2": float(q2),
            "psi": float(trace.psi.mean()),
        },
        nominee=int(trace.latent_ids[best]),
        nominee_prob=float(marginal_red[best]),
        samples=trace.samples,
    )


def rank(summary: PosteriorSummary) -> list[tuple[int, float]]:
    """Latent vertices by decreasing marginal probability, ties by id."""
    order = sorted(
        zip(summary.latent_ids.tolist(), summary.marginal_red.tolist()),
        key=lambda item: (-item[1], item[0]),
    )
    return [(int(v), float(p)) for v, p in order]


def _check_lambda(lam: float) -> None:
    if not 0.0 <= lam <= 1.0:
        raise InvalidConfigError(f"fusion weight must lie in [0, 1], got {lam}")


@dataclass(frozen=True)
class FusionConfig:
    lam: float = 0.5
    grid: tuple[float, ...] = DEFAULT_FUSION_GRID

    def __post_init__(self):
        _check_lambda(self.lam)
        if not self.grid:
            raise InvalidConfigError("fusion grid must not be empty")
        for value in self.grid:
            _check_lambda(value)


@dataclass(frozen=True)
class FusionResult:
    lam: float
    nominee: int
    latent_ids: np.ndarray
    tau: np.ndarray


def fusion_scores(stats: StatsBundle, lam: float) -> np.ndarray:
    """tau = (1 - lam) R + lam S for every latent vertex."""
    _check_lambda(lam)
    return (1.0 - lam) * stats.latent_r + lam * stats.latent_s


def _argmax_lowest(values: np.ndarray) -> int:
    best = float(values.max())
    return int(np.flatnonzero(values >= best - _TIE_SLACK * max(1.0, abs(best)))[0])


def fusion_nominate(stats: StatsBundle, lam: float) -> FusionResult:
    if stats.n_latent == 0:
        raise ValueError("graph has no latent vertex to nominate")
    tau = fusion_scores(stats, lam)
    return FusionResult(lam, int(stats.latent_ids[_argmax_lowest(tau)]), stats.latent_ids, tau)


def fusion_correct(stats: StatsBundle, red_ids: Iterable[int], grid: Iterable[float]) -> np.ndarray:
    """Per grid value, whether the fusion nominee is a latent red vertex."""
    red = set(int(v) for v in red_ids)
    return np.array([fusion_nominate(stats, lam).nominee in red for lam in grid], dtype=bool)


@dataclass(frozen=True)
class FusionSweep:
    grid: tuple[float, ...]
    rates: np.ndarray
    best_lambda: float
    best_rate: float

    def to_dict(self) -> dict:
        return {
            "grid": list(self.grid),
            "rates": [float(rate) for rate in self.rates],
            "best_lambda": self.best_lambda,
            "best_rate": self.best_rate,
        }


def sweep_from_flags(grid: Iterable[float], flags: np.ndarray) -> FusionSweep:
    """
    :param flags: shape (graphs, len(grid)) correct-nomination indicators
    """
    grid = tuple(float(lam) for lam in grid)
    rates = np.asarray(flags, dtype=np.float64).mean(axis=0)
    # the oracle-tuned weight; ties go to the smallest weight
    best = int(np.argmax(rates))
    return FusionSweep(grid, rates, grid[best], float(rates[best]))


def fusion_oracle_sweep(
    collection: Iterable[tuple[StatsBundle, Iterable[int]]],
    grid: Iterable[float] = DEFAULT_FUSION_GRID,
) -> FusionSweep:
    """
    Correct-nomination rate of the fusion statistic at every grid value over graphs with known
    colorings, and the best of them.
    """
    grid = tuple(grid)
    for lam in grid:
        _check_lambda(lam)
    flags = [fusion_correct(stats, red_ids, grid) for stats, red_ids in collection]
    if not flags:
        raise ValueError("fusion sweep needs at least one graph")
    return sweep_from_flags(grid, np.vstack(flags))
