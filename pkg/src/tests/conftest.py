from pathlib import Path

import numpy as np
import pytest

from nominator.graph import compute_stats, generate_graph, study_coloring, table1_graph
from nominator.graph.models import AttributedGraph, ModelParams, StatsBundle
from nominator.likelihood import sample_params_from_prior

DATA_DIR = Path(__file__).resolve().parents[2] / "data"


@pytest.fixture
def table1() -> AttributedGraph:
    return table1_graph()


@pytest.fixture
def table1_stats(table1) -> StatsBundle:
    return compute_stats(table1)


@pytest.fixture
def table1_path() -> Path:
    return DATA_DIR / "table1.txt"


def random_small_graph(
    rng: np.random.Generator, n: int = 6, m: int = 3, m_prime: int = 2
) -> tuple[AttributedGraph, ModelParams]:
    params = sample_params_from_prior(rng)
    coloring, observed = study_coloring(n, m, m_prime)
    return generate_graph(n, coloring, params, rng, observed_red=observed), params


@pytest.fixture
def small_graphs() -> list[AttributedGraph]:
    rng = np.random.default_rng(2024)
    return [random_small_graph(rng)[0] for _ in range(5)]
