import csv
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from nominator.experiments import (
    CombinationResult,
    ComparisonColumn,
    StudyResult,
    ThresholdPoint,
)
from nominator.graph.models import Param, StatsBundle
from nominator.helper import write_json
from nominator.mcmc import ChainTrace
from nominator.nomination import FusionResult, PosteriorSummary, rank

TRACE_COLUMNS = [
    "iteration",
    "psi",
    "p1",
    "p2",
    "q2",
    "accepted_p1",
    "accepted_p2",
    "accepted_q2",
    "m",
]
THRESHOLD_COLUMNS = ["threshold", "rate", "ci_lo", "ci_hi", "n_support"]


def write_rows(path: Path, fieldnames: Sequence[str], rows: Iterable[dict]) -> Path:
    with path.open("w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return path


def write_marginals(
    path: Path, summary: PosteriorSummary, stats: StatsBundle, index_base: int = 0
) -> Path:
    rows = []
    for vertex, probability in rank(summary):
        t = stats.for_vertex(vertex)
        rows.append({"vertex": vertex + index_base, "marginal": probability, "r": t.r, "s": t.s})
    return write_rows(path, ["vertex", "marginal", "r", "s"], rows)


def write_trace(path: Path, trace: ChainTrace) -> Path:
    """Recorded iterations, numbered from the start of the chain."""
    rows = []
    for k in range(trace.samples):
        p1, p2, q2 = trace.params[k]
        rows.append(
            {
                "iteration": trace.burn_in + k + 1,
                "psi": float(trace.psi[k]),
                "p1": float(p1),
                "p2": float(p2),
                "q2": float(q2),
                **{
                    f"accepted_{param}": int(trace.accepted[k, j])
                    for j, param in enumerate(Param)
                },
                "m": int(trace.m[k]),
            }
        )
    return write_rows(path, TRACE_COLUMNS, rows)


def write_moving_averages(path: Path, trace: ChainTrace, index_base: int = 0) -> Path:
    """Running means from iteration 1 (burn-in included) of the parameters and every marginal."""
    params = trace.moving_param_means()
    marginals = trace.moving_marginals()
    vertices = [f"v{int(v) + index_base}" for v in trace.latent_ids]
    fieldnames = ["iteration", "p1", "p2", "q2", "psi", *vertices]
    rows = (
        {
            "iteration": h + 1,
            **dict(zip(fieldnames[1:5], map(float, params[h]))),
            **dict(zip(vertices, map(float, marginals[h]))),
        }
        for h in range(params.shape[0])
    )
    return write_rows(path, fieldnames, rows)


def write_prior_marginals(path: Path, table: np.ndarray) -> Path:
    fieldnames = ["x", "p1", "p2", "q2", "psi"]
    return write_rows(path, fieldnames, (dict(zip(fieldnames, map(float, row))) for row in table))


def write_fusion(path: Path, results: Sequence[FusionResult], index_base: int = 0) -> Path:
    rows = [
        {"lambda": result.lam, "vertex": int(v) + index_base, "tau": float(tau)}
        for result in results
        for v, tau in zip(result.latent_ids, result.tau)
    ]
    return write_rows(path, ["lambda", "vertex", "tau"], rows)


def write_trials(path: Path, result: StudyResult) -> Path:
    fieldnames = [
        "trial",
        "nominee",
        "nominee_prob",
        "correct",
        "mean_p1",
        "mean_p2",
        "mean_q2",
        "mean_psi",
        *(f"cp_correct_{lam:g}" for lam in result.spec.fusion_grid),
    ]
    rows = (
        {
            **record.as_row(),
            **{
                f"cp_correct_{lam:g}": int(flag)
                for lam, flag in zip(result.spec.fusion_grid, record.fusion_correct)
            },
        }
        for record in result.records
    )
    return write_rows(path, fieldnames, rows)


def write_threshold_curve(path: Path, curve: Sequence[ThresholdPoint]) -> Path:
    return write_rows(path, THRESHOLD_COLUMNS, (point.as_row() for point in curve))


def write_comparison(path: Path, columns: Sequence[ComparisonColumn]) -> Path:
    return write_rows(
        path,
        [
            "m",
            "m_prime",
            "bvn_rate",
            "bvn_ci_lo",
            "bvn_ci_hi",
            "cp_rate",
            "cp_ci_lo",
            "cp_ci_hi",
            "cp_lambda",
            "odds_ratio",
        ],
        (column.as_row() for column in columns),
    )


def write_combinations(path: Path, result: CombinationResult, index_base: int = 0) -> Path:
    rows = (
        {
            "observed": " ".join(str(v + index_base) for v in record.observed),
            "nominee": record.nominee + index_base,
            "nominee_prob": record.nominee_prob,
            "correct": int(record.correct),
            **{f"mean_{k}": v for k, v in record.param_means.items()},
        }
        for record in result.records
    )
    fieldnames = [
        "observed",
        "nominee",
        "nominee_prob",
        "correct",
        "mean_p1",
        "mean_p2",
        "mean_q2",
        "mean_psi",
    ]
    return write_rows(path, fieldnames, rows)


def _flatten(d: dict, prefix: str = "") -> Iterable[tuple[str, object]]:
    for key, value in d.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            yield from _flatten(value, f"{name}.")
        elif isinstance(value, (list, tuple)) and any(isinstance(v, dict) for v in value):
            for k, item in enumerate(value):
                yield from _flatten(item, f"{name}.{k}.")
        elif isinstance(value, (list, tuple)):
            yield name, " ".join(str(v) for v in value)
        else:
            yield name, value


def write_flat(path: Path, d: dict) -> Path:
    """Nested summary as `key,value` rows with dotted keys."""
    return write_rows(path, ["key", "value"], ({"key": k, "value": v} for k, v in _flatten(d)))


def write_document(directory: Path, stem: str, d: dict, fmt: str) -> Path:
    if fmt == "csv":
        return write_flat(directory / f"{stem}.csv", d)
    return write_json(directory / f"{stem}.json", d)
