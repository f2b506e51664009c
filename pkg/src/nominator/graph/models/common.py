from dataclasses import dataclass
from enum import Enum, IntEnum, auto
from typing import Self

import numpy as np

# slack for closure checks on sums such as 1 - p1
_CLOSURE_SLACK = 1e-12


class IdEnum(Enum):
    @staticmethod
    def _generate_next_value_(name: str, start: int, count: int, last_values: list) -> str:
        return name.lower()

    @classmethod
    def from_key(cls, s: str) -> Self:
        return cls(s.strip().lower().replace("-", "_"))

    def __str__(self):
        return str(self.value)


class Color(IntEnum):
    """Vertex attribute Y and edge attribute Z; `NONE` marks an absent edge."""

    NONE = 0
    GREEN = 1
    RED = 2


class Param(IdEnum):
    P1 = auto()
    P2 = auto()
    Q2 = auto()


class InvalidParamsError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    """
    Edge-color probabilities. Pairs that are not both red produce no edge, a green edge or a
    red edge with probabilities (p0, p1, p2); red-red pairs with (q0, q1, q2) where q1 = p1.

    Construction only enforces the closed region (so degenerate values can drive the graph
    generator); the sampler requires the open support via `require_support`.
    """

    p1: float
    p2: float
    q2: float

    def __post_init__(self):
        for param in Param:
            value = self.get(param)
            if not (0.0 <= value <= 1.0):
                raise InvalidParamsError(f"{param} must lie in [0, 1], got {value}")
        if self.p2 > 1.0 - self.p1 + _CLOSURE_SLACK:
            raise InvalidParamsError(f"p2 <= 1 - p1 violated (p1={self.p1}, p2={self.p2})")
        if self.q2 < self.p2:
            raise InvalidParamsError(f"p2 <= q2 violated (p2={self.p2}, q2={self.q2})")
        if self.q2 > 1.0 - self.p1 + _CLOSURE_SLACK:
            raise InvalidParamsError(f"q2 <= 1 - p1 violated (p1={self.p1}, q2={self.q2})")

    @property
    def p0(self) -> float:
        return max(0.0, 1.0 - self.p1 - self.p2)

    @property
    def q1(self) -> float:
        return self.p1

    @property
    def q0(self) -> float:
        return max(0.0, 1.0 - self.p1 - self.q2)

    def get(self, param: Param) -> float:
        return float(getattr(self, param.value))

    def replace(self, param: Param, value: float) -> "ModelParams":
        values = self.as_dict()
        values[param.value] = value
        return ModelParams(**values)

    def violated_constraint(self) -> str | None:
        """
        :return: the first violated inequality of the open support, `None` inside it
        """
        if not 0.0 < self.p1 < 1.0:
            return "0 < p1 < 1"
        if not 0.0 < self.p2 < 1.0 - self.p1:
            return "0 < p2 < 1 - p1"
        if not self.p2 < self.q2:
            return "p2 < q2"
        if not self.q2 < 1.0 - self.p1:
            return "q2 < 1 - p1"
        return None

    def in_support(self) -> bool:
        return self.violated_constraint() is None

    def require_support(self) -> Self:
        """
        :raises InvalidParamsError: naming the violated constraint
        """
        if constraint := self.violated_constraint():
            raise InvalidParamsError(
                f"parameters ({self.p1}, {self.p2}, {self.q2}) violate {constraint}"
            )
        return self

    def as_dict(self) -> dict[str, float]:
        return {"p1": self.p1, "p2": self.p2, "q2": self.q2}

    def as_array(self) -> np.ndarray:
        return np.array([self.p1, self.p2, self.q2])

    @classmethod
    def from_dict(cls, d: dict) -> Self:
        return cls(float(d["p1"]), float(d["p2"]), float(d["q2"]))


@dataclass(frozen=True)
class VertexStats:
    """Context statistic `r` (observed red neighbours) and content statistic `s` (red edges)."""

    r: int
    s: int


def _frozen(values) -> np.ndarray:
    array = np.array(values, dtype=np.int64)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class StatsBundle:
    """
    (r, s) statistics split into observed-red vertices (ordered as `observed_red`) and latent
    vertices (ascending id).
    """

    n: int
    observed_ids: np.ndarray
    observed_r: np.ndarray
    observed_s: np.ndarray
    latent_ids: np.ndarray
    latent_r: np.ndarray
    latent_s: np.ndarray

    def __post_init__(self):
        for name in [
            "observed_ids",
            "observed_r",
            "observed_s",
            "latent_ids",
            "latent_r",
            "latent_s",
        ]:
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def m_prime(self) -> int:
        return int(self.observed_ids.size)

    @property
    def n_latent(self) -> int:
        return int(self.latent_ids.size)

    def observed(self) -> list[VertexStats]:
        return [VertexStats(int(r), int(s)) for r, s in zip(self.observed_r, self.observed_s)]

    def latent(self) -> list[VertexStats]:
        return [VertexStats(int(r), int(s)) for r, s in zip(self.latent_r, self.latent_s)]

    def for_vertex(self, vertex: int) -> VertexStats:
        for ids, rs, ss in [
            (self.observed_ids, self.observed_r, self.observed_s),
            (self.latent_ids, self.latent_r, self.latent_s),
        ]:
            hits = np.flatnonzero(ids == vertex)
            if hits.size:
                return VertexStats(int(rs[hits[0]]), int(ss[hits[0]]))

        raise KeyError(vertex)
