import numpy as np

from nominator.graph.models import (
    AttributedGraph,
    Color,
    FullColoring,
    InvalidGraphError,
    ModelParams,
    StatsBundle,
)

# upper triangle of the illustrative 12-vertex graph, 1-based rows 1..11 against columns i+1..12;
# vertices 1 and 2 are observed red, 3, 4 and 5 are the latent reds
TABLE1_ROWS = [
    [2, 2, 0, 2, 2, 0, 1, 0, 1, 1, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 1],
    [2, 0, 0, 0, 1, 2, 2, 0, 1],
    [0, 0, 1, 0, 1, 1, 0, 0],
    [2, 1, 0, 1, 0, 1, 0],
    [0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 2],
    [1, 0, 0, 0],
    [1, 0, 1],
    [0, 1],
    [0],
]
TABLE1_OBSERVED_RED = (0, 1)
TABLE1_RED = (0, 1, 2, 3, 4)


def from_upper_rows(rows: list[list[int]], observed_red) -> AttributedGraph:
    n = len(rows) + 1
    edge_attr = np.zeros((n, n), dtype=np.int8)
    for i, row in enumerate(rows):
        if len(row) != n - i - 1:
            raise InvalidGraphError(f"row {i} holds {len(row)} entries, expected {n - i - 1}")
        edge_attr[i, i + 1 :] = row
    return AttributedGraph(edge_attr + edge_attr.T, tuple(observed_red))


def table1_graph() -> AttributedGraph:
    return from_upper_rows(TABLE1_ROWS, TABLE1_OBSERVED_RED)


def compute_stats(graph: AttributedGraph) -> StatsBundle:
    """
    :return: context statistic r (observed red neighbours) and content statistic s (incident red
        edges) for every vertex, split into observed red and latent vertices
    """
    connected = graph.edge_attr != Color.NONE
    observed = np.array(graph.observed_red, dtype=np.int64)
    r = connected[:, observed].sum(axis=1)
    s = (graph.edge_attr == Color.RED).sum(axis=1)
    latent = graph.latent_ids

    return StatsBundle(
        n=graph.n,
        observed_ids=observed,
        observed_r=r[observed],
        observed_s=s[observed],
        latent_ids=latent,
        latent_r=r[latent],
        latent_s=s[latent],
    )


def study_coloring(n: int, m: int, m_prime: int) -> tuple[FullColoring, tuple[int, ...]]:
    """
    Coloring used by simulation studies: vertices `0..m-1` are red and the first `m_prime` of them
    are observed.
    """
    if not 2 <= m_prime <= m <= n:
        raise InvalidGraphError(f"2 <= m' <= m <= n violated (n={n}, m={m}, m'={m_prime})")
    return FullColoring.from_red(n, range(m)), tuple(range(m_prime))


def generate_graph(
    n: int,
    coloring: FullColoring,
    params: ModelParams,
    rng: np.random.Generator,
    *,
    observed_red: tuple[int, ...],
) -> AttributedGraph:
    """
    Draw every unordered pair independently: red-red pairs get (none, green, red) with
    probabilities (q0, p1, q2), all other pairs with (p0, p1, p2).

    :param observed_red: red vertices the analyst gets to see
    :param rng: stream owned by the caller, so parallel trials never share state
    """
    if coloring.n != n:
        raise InvalidGraphError(f"coloring has {coloring.n} vertices, expected {n}")
    if any(coloring.y[v] != Color.RED for v in observed_red):
        raise InvalidGraphError("observed red vertices must be red in the coloring")

    rows, cols = np.triu_indices(n, k=1)
    is_red = coloring.y == Color.RED
    both_red = is_red[rows] & is_red[cols]
    red_prob = np.where(both_red, params.q2, params.p2)

    u = rng.random(rows.size)
    attr = np.where(
        u < red_prob, Color.RED, np.where(u < red_prob + params.p1, Color.GREEN, Color.NONE)
    ).astype(np.int8)

    edge_attr = np.zeros((n, n), dtype=np.int8)
    edge_attr[rows, cols] = attr
    edge_attr[cols, rows] = attr
    return AttributedGraph(edge_attr, observed_red)


def relabel(graph: AttributedGraph, permutation) -> AttributedGraph:
    """
    :param permutation: `permutation[old] = new` vertex id
    """
    permutation = np.asarray(permutation)
    if sorted(permutation.tolist()) != list(range(graph.n)):
        raise InvalidGraphError("relabeling must be a permutation of the vertex ids")
    inverse = np.argsort(permutation)
    edge_attr = graph.edge_attr[np.ix_(inverse, inverse)]
    observed = sorted(int(permutation[v]) for v in graph.observed_red)
    return AttributedGraph(edge_attr, tuple(observed))


def generate_study_graph(
    n: int, m: int, m_prime: int, params: ModelParams, rng: np.random.Generator
) -> tuple[AttributedGraph, FullColoring]:
    """
    Study graph under a uniformly random labelling, so red vertices hold no particular ids and
    lowest-id tie-breaks cannot favour them.

    :return: the graph and its true coloring
    """
    coloring, observed = study_coloring(n, m, m_prime)
    graph = generate_graph(n, coloring, params, rng, observed_red=observed)
    permutation = rng.permutation(n)
    red = [int(permutation[v]) for v in coloring.red_ids]
    return relabel(graph, permutation), FullColoring.from_red(n, red)
