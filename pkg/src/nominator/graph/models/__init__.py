from dataclasses import dataclass
from typing import Iterator, Self

import numpy as np

from nominator.graph.models.common import (
    Color,
    IdEnum,
    InvalidParamsError,
    ModelParams,
    Param,
    StatsBundle,
    VertexStats,
)

__all__ = [
    "AttributedGraph",
    "Color",
    "FullColoring",
    "IdEnum",
    "InvalidGraphError",
    "InvalidParamsError",
    "ModelParams",
    "Param",
    "StatsBundle",
    "VertexStats",
]


class InvalidGraphError(ValueError):
    pass


@dataclass(frozen=True)
class AttributedGraph:
    """
    Undirected graph with green/red edge attributes and a set of vertices observed to be red.

    `edge_attr` is a dense symmetric matrix with entries `Color.NONE`, `Color.GREEN` and
    `Color.RED`; the diagonal is zero. Vertex ids are 0-based.
    """

    edge_attr: np.ndarray
    observed_red: tuple[int, ...]

    def __post_init__(self):
        edge_attr = np.array(self.edge_attr, dtype=np.int8)
        if edge_attr.ndim != 2 or edge_attr.shape[0] != edge_attr.shape[1]:
            raise InvalidGraphError(f"edge attributes must be square, got {edge_attr.shape}")
        if not np.isin(edge_attr, [Color.NONE, Color.GREEN, Color.RED]).all():
            raise InvalidGraphError("edge attributes must be 0 (none), 1 (green) or 2 (red)")
        if not np.array_equal(edge_attr, edge_attr.T):
            u, v = np.argwhere(edge_attr != edge_attr.T)[0]
            raise InvalidGraphError(f"edge attributes are not symmetric at ({u}, {v})")
        if np.any(np.diag(edge_attr) != 0):
            raise InvalidGraphError("self-loops are not allowed")
        edge_attr.setflags(write=False)
        object.__setattr__(self, "edge_attr", edge_attr)

        observed_red = tuple(int(v) for v in self.observed_red)
        n = edge_attr.shape[0]
        if len(set(observed_red)) != len(observed_red):
            raise InvalidGraphError("observed red vertices must be distinct")
        if any(not 0 <= v < n for v in observed_red):
            raise InvalidGraphError(f"observed red vertex ids must lie in [0, {n})")
        if not 2 <= len(observed_red) <= n:
            raise InvalidGraphError(
                f"at least 2 observed red vertices are required, got {len(observed_red)}"
            )
        object.__setattr__(self, "observed_red", observed_red)

    @property
    def n(self) -> int:
        return int(self.edge_attr.shape[0])

    @property
    def m_prime(self) -> int:
        return len(self.observed_red)

    @property
    def latent_ids(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        mask[list(self.observed_red)] = False
        return np.flatnonzero(mask)

    def edges(self) -> Iterator[tuple[int, int, int]]:
        for u, v in zip(*np.triu_indices(self.n, k=1)):
            if attr := int(self.edge_attr[u, v]):
                yield int(u), int(v), attr

    def red_edge_count(self) -> int:
        return int(np.count_nonzero(np.triu(self.edge_attr == Color.RED, k=1)))

    @classmethod
    def from_edges(
        cls, n: int, edges: list[tuple[int, int, int]], observed_red: list[int]
    ) -> Self:
        edge_attr = np.zeros((n, n), dtype=np.int8)
        for u, v, attr in edges:
            if u == v:
                raise InvalidGraphError(f"self-loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise InvalidGraphError(f"edge ({u}, {v}) references a vertex outside [0, {n})")
            if attr not in (Color.GREEN, Color.RED):
                raise InvalidGraphError(f"edge ({u}, {v}) has attribute {attr}, expected 1 or 2")
            if edge_attr[u, v]:
                raise InvalidGraphError(f"duplicate edge ({u}, {v})")
            edge_attr[u, v] = edge_attr[v, u] = attr

        return cls(edge_attr, tuple(observed_red))

    def to_dict(self, index_base: int = 0) -> dict:
        return {
            "n": self.n,
            "index_base": index_base,
            "observed_red": [v + index_base for v in self.observed_red],
            "edges": [[u + index_base, v + index_base, attr] for u, v, attr in self.edges()],
        }

    @classmethod
    def from_dict(cls, d: dict, index_base: int | None = None) -> Self:
        base = int(d.get("index_base", 0)) if index_base is None else index_base
        return cls.from_edges(
            int(d["n"]),
            [(int(u) - base, int(v) - base, int(attr)) for u, v, attr in d["edges"]],
            [int(v) - base for v in d["observed_red"]],
        )


@dataclass(frozen=True)
class FullColoring:
    """Vertex colors for all n vertices, consistent with the observed red set."""

    y: np.ndarray

    def __post_init__(self):
        y = np.array(self.y, dtype=np.int8)
        if not np.isin(y, [Color.GREEN, Color.RED]).all():
            raise InvalidGraphError("vertex colors must be 1 (green) or 2 (red)")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return int(self.y.size)

    @property
    def m(self) -> int:
        return int(np.count_nonzero(self.y == Color.RED))

    @property
    def red_ids(self) -> np.ndarray:
        return np.flatnonzero(self.y == Color.RED)

    def check_consistent(self, graph: AttributedGraph) -> Self:
        if self.n != graph.n:
            raise InvalidGraphError(f"coloring has {self.n} vertices, graph has {graph.n}")
        if any(self.y[v] != Color.RED for v in graph.observed_red):
            raise InvalidGraphError("every observed red vertex must be colored red")
        return self

    def latent(self, graph: AttributedGraph) -> np.ndarray:
        """Colors of the latent vertices, ordered by ascending id."""
        return self.y[graph.latent_ids]

    @classmethod
    def from_red(cls, n: int, red_ids) -> Self:
        y = np.full(n, Color.GREEN, dtype=np.int8)
        y[list(red_ids)] = Color.RED
        return cls(y)
