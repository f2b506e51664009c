import numpy as np
import pytest
from scipy import stats as st

from nominator.graph import (
    TABLE1_RED,
    compute_stats,
    generate_graph,
    generate_study_graph,
    relabel,
    study_coloring,
)
from nominator.graph.models import (
    AttributedGraph,
    Color,
    FullColoring,
    InvalidGraphError,
    InvalidParamsError,
    ModelParams,
    Param,
    VertexStats,
)
from nominator.likelihood import (
    Family,
    LikelihoodTables,
    binom_pmf,
    f1_s_marginal,
    f2_s_marginal,
)


def test_table1_statistics(table1, table1_stats):
    assert table1.n == 12
    assert table1.observed_red == (0, 1)
    assert table1_stats.for_vertex(2) == VertexStats(1, 4)
    assert table1_stats.for_vertex(0) == VertexStats(1, 4)
    assert table1_stats.for_vertex(1) == VertexStats(1, 1)
    assert table1_stats.latent_ids.tolist() == list(range(2, 12))


def test_statistics_count_every_red_edge_twice(table1, table1_stats):
    total_s = table1_stats.observed_s.sum() + table1_stats.latent_s.sum()
    assert total_s == 2 * table1.red_edge_count()


def test_context_statistic_is_bounded_by_observed_count(small_graphs):
    for graph in small_graphs:
        stats = compute_stats(graph)
        assert np.all(stats.latent_r <= graph.m_prime)
        assert np.all(stats.observed_r <= graph.m_prime - 1)
        assert np.all(stats.latent_s <= graph.n - 1)


def test_relabeling_permutes_statistics(table1, table1_stats):
    permutation = np.random.default_rng(3).permutation(table1.n)
    relabeled = compute_stats(relabel(table1, permutation))
    for v in range(table1.n):
        assert relabeled.for_vertex(int(permutation[v])) == table1_stats.for_vertex(v)


def test_relabel_rejects_non_permutation(table1):
    with pytest.raises(InvalidGraphError):
        relabel(table1, [0] * table1.n)


@pytest.mark.parametrize(
    "edge_attr, observed, message",
    [
        (np.array([[0, 1], [2, 0]]), (0, 1), "symmetric"),
        (np.array([[1, 0], [0, 0]]), (0, 1), "self-loops"),
        (np.array([[0, 3], [3, 0]]), (0, 1), "0 \\(none\\)"),
        (np.zeros((3, 3)), (0,), "at least 2"),
        (np.zeros((3, 3)), (0, 0), "distinct"),
        (np.zeros((3, 3)), (0, 5), "must lie in"),
    ],
)
def test_invalid_graphs_are_rejected(edge_attr, observed, message):
    with pytest.raises(InvalidGraphError, match=message):
        AttributedGraph(edge_attr, observed)


def test_from_edges_rejects_duplicates_and_loops():
    with pytest.raises(InvalidGraphError, match="duplicate"):
        AttributedGraph.from_edges(3, [(0, 1, 1), (1, 0, 2)], [0, 1])
    with pytest.raises(InvalidGraphError, match="self-loop"):
        AttributedGraph.from_edges(3, [(1, 1, 1)], [0, 1])


def test_full_coloring_consistency(table1):
    coloring = FullColoring.from_red(table1.n, TABLE1_RED)
    assert coloring.m == 5
    assert coloring.check_consistent(table1) is coloring
    assert coloring.latent(table1).tolist() == [Color.RED] * 3 + [Color.GREEN] * 7
    with pytest.raises(InvalidGraphError):
        FullColoring.from_red(table1.n, [2, 3]).check_consistent(table1)


def test_model_params_support():
    params = ModelParams(0.25, 0.15, 0.25)
    assert params.q1 == params.p1
    assert params.p0 == pytest.approx(0.6)
    assert params.q0 == pytest.approx(0.5)
    assert params.in_support()
    assert params.replace(Param.Q2, 0.3).q2 == 0.3

    assert ModelParams(0.2, 0.3, 0.3).violated_constraint() == "p2 < q2"
    assert ModelParams(0.0, 0.3, 0.4).violated_constraint() == "0 < p1 < 1"
    with pytest.raises(InvalidParamsError, match="p2 < q2"):
        ModelParams(0.2, 0.3, 0.3).require_support()
    with pytest.raises(InvalidParamsError, match="p2 <= q2"):
        ModelParams(0.2, 0.4, 0.3)
    with pytest.raises(InvalidParamsError, match="q2 <= 1 - p1"):
        ModelParams(0.5, 0.1, 0.6)


def test_study_coloring_marks_first_ids():
    coloring, observed = study_coloring(12, 5, 2)
    assert coloring.red_ids.tolist() == [0, 1, 2, 3, 4]
    assert observed == (0, 1)
    with pytest.raises(InvalidGraphError):
        study_coloring(12, 1, 2)


def test_generate_graph_is_deterministic():
    coloring, observed = study_coloring(20, 6, 3)
    params = ModelParams(0.2, 0.1, 0.4)
    a = generate_graph(20, coloring, params, np.random.default_rng(5), observed_red=observed)
    b = generate_graph(20, coloring, params, np.random.default_rng(5), observed_red=observed)
    assert np.array_equal(a.edge_attr, b.edge_attr)


def test_degenerate_parameters_drive_the_generator():
    coloring, observed = study_coloring(8, 3, 2)
    rng = np.random.default_rng(0)
    always_green = ModelParams(1.0, 0.0, 0.0)
    graph = generate_graph(8, coloring, always_green, rng, observed_red=observed)
    assert np.all(graph.edge_attr[~np.eye(8, dtype=bool)] == Color.GREEN)
    empty = generate_graph(8, coloring, ModelParams(0.0, 0.0, 0.0), rng, observed_red=observed)
    assert empty.red_edge_count() == 0


def _chi_square_pvalue(observed_values: np.ndarray, pmf: np.ndarray) -> float:
    counts = np.bincount(observed_values, minlength=pmf.size)[: pmf.size]
    expected = pmf * observed_values.size
    # pool sparse cells into their neighbours so every cell expects at least 5
    bins_obs, bins_exp, acc_o, acc_e = [], [], 0.0, 0.0
    for o, e in zip(counts, expected):
        acc_o, acc_e = acc_o + o, acc_e + e
        if acc_e >= 5:
            bins_obs.append(acc_o)
            bins_exp.append(acc_e)
            acc_o, acc_e = 0.0, 0.0
    bins_obs[-1] += acc_o
    bins_exp[-1] += acc_e
    obs, exp = np.array(bins_obs), np.array(bins_exp)
    return float(st.chisquare(obs, exp * obs.sum() / exp.sum()).pvalue)


def test_generated_statistics_follow_their_mass_functions():
    n, m, m_prime = 10, 4, 2
    params = ModelParams(0.3, 0.15, 0.35)
    coloring, observed = study_coloring(n, m, m_prime)
    rng = np.random.default_rng(11)

    green_r, green_s, red_s = [], [], []
    for _ in range(3000):
        stats = compute_stats(generate_graph(n, coloring, params, rng, observed_red=observed))
        t = stats.for_vertex(n - 1)
        green_r.append(t.r)
        green_s.append(t.s)
        red_s.append(stats.for_vertex(m - 1).s)

    r_pmf = binom_pmf(np.arange(m_prime + 1), m_prime, params.p1 + params.p2)
    assert _chi_square_pvalue(np.array(green_r), r_pmf) > 0.001
    assert _chi_square_pvalue(np.array(green_s), f1_s_marginal(params, n).probabilities()) > 0.001
    red_pmf = f2_s_marginal(m, params, n)
    assert red_pmf.offset == 0
    assert _chi_square_pvalue(np.array(red_s), red_pmf.probabilities()) > 0.001


def test_study_graphs_use_random_labels():
    params = ModelParams(0.2, 0.1, 0.4)
    rng = np.random.default_rng(3)
    red_sets = set()
    for _ in range(10):
        graph, coloring = generate_study_graph(20, 6, 3, params, rng)
        assert coloring.m == 6
        assert set(graph.observed_red) <= set(coloring.red_ids.tolist())
        assert list(graph.observed_red) == sorted(graph.observed_red)
        red_sets.add(tuple(coloring.red_ids.tolist()))
    assert len(red_sets) > 1


@pytest.mark.slow
def test_generated_statistics_follow_their_joint_mass_functions():
    n, m, m_prime = 10, 4, 2
    params = ModelParams(0.3, 0.15, 0.35)
    coloring, observed = study_coloring(n, m, m_prime)
    tables = LikelihoodTables(params, n, m_prime)
    rng = np.random.default_rng(12)

    cells: dict[Family, list[int]] = {family: [] for family in Family}
    for _ in range(20000):
        stats = compute_stats(generate_graph(n, coloring, params, rng, observed_red=observed))
        for family, vertex in [
            (Family.GREEN, n - 1),
            (Family.LATENT_RED, m - 1),
            (Family.OBSERVED_RED, 0),
        ]:
            t = stats.for_vertex(vertex)
            cells[family].append(t.r * n + t.s)

    for family, values in cells.items():
        pmf = np.exp(tables.joint(family, m)).ravel()
        assert _chi_square_pvalue(np.array(values), pmf) > 0.001, family
