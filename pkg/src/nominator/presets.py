from dataclasses import dataclass
from enum import auto
from typing import Any

from nominator.graph.models import IdEnum, ModelParams
from nominator.likelihood import InvalidConfigError, PriorConfig


class Hyperprior(IdEnum):
    SPARSE = auto()
    FLAT = auto()
    FLAT_HALF = auto()
    MEAN_MATCHED = auto()

    def prior(self, n: int, m_prime: int) -> PriorConfig:
        """
        :param n: vertex count
        :param m_prime: observed red vertices
        """
        match self:
            case Hyperprior.SPARSE:
                return PriorConfig(2.0, float(n - m_prime))
            case Hyperprior.FLAT:
                return PriorConfig(1.0, 1.0)
            case Hyperprior.FLAT_HALF:
                return PriorConfig(1.0, 1.0, psi_upper=0.5)
            case Hyperprior.MEAN_MATCHED:
                if n - 2 * m_prime <= 0:
                    raise InvalidConfigError(
                        f"mean-matched hyperprior needs n > 2 m' (n={n}, m'={m_prime})"
                    )
                return PriorConfig(float(m_prime), float(n - 2 * m_prime))

    def description(self) -> str:
        return {
            Hyperprior.SPARSE: "beta(2, n - m'), the default; favours few latent reds",
            Hyperprior.FLAT: "beta(1, 1)",
            Hyperprior.FLAT_HALF: "uniform on (0, 0.5)",
            Hyperprior.MEAN_MATCHED: "beta(m', n - 2m'); prior mean m'/(n - m')",
        }[self]


DEFAULT_HYPERPRIOR = Hyperprior.SPARSE


def default_prior(n: int, m_prime: int) -> PriorConfig:
    return DEFAULT_HYPERPRIOR.prior(n, m_prime)


@dataclass(frozen=True)
class SamplerPreset:
    burn_in: int
    samples: int
    description: str


SAMPLER_PRESETS: dict[str, SamplerPreset] = {
    "default": SamplerPreset(1000, 1000, "1000 burn-in + 1000 recorded iterations"),
    "long": SamplerPreset(10000, 10000, "10000 burn-in + 10000 recorded iterations"),
}


@dataclass(frozen=True)
class StudyPreset:
    """Simulation settings of a published experiment; `provenance` is shown by `--help`."""

    name: str
    n: int
    m: int
    m_prime: int
    params: ModelParams
    provenance: str
    trials: int = 1000
    burn_in: int = 1000
    samples: int = 1000

    def as_options(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "m": self.m,
            "m_prime": self.m_prime,
            **self.params.as_dict(),
            "trials": self.trials,
            "burn_in": self.burn_in,
            "samples": self.samples,
        }


STUDY_PRESETS: dict[str, StudyPreset] = {
    preset.name: preset
    for preset in [
        StudyPreset(
            "toy-12",
            n=12,
            m=5,
            m_prime=2,
            params=ModelParams(0.25, 0.15, 0.25),
            provenance="12-vertex toy simulation; reported rate 0.44, CI (0.41, 0.47)",
        ),
        StudyPreset(
            "table3-m8",
            n=184,
            m=8,
            m_prime=4,
            params=ModelParams(0.2, 0.2, 0.4),
            provenance="184-vertex comparison with the fusion statistic, m = 8 (m' in 2..6)",
        ),
        StudyPreset(
            "table3-m32",
            n=184,
            m=32,
            m_prime=16,
            params=ModelParams(0.2, 0.2, 0.4),
            provenance="184-vertex comparison with the fusion statistic, m = 32 (m' in 8..24)",
        ),
        StudyPreset(
            "enron-sim",
            n=184,
            m=10,
            m_prime=5,
            params=ModelParams(0.0168, 0.0111, 0.1298),
            provenance="simulation at parameters averaged over Enron leave-5-in fits; rate 0.50",
        ),
    ]
}


def study_preset(name: str) -> StudyPreset:
    try:
        return STUDY_PRESETS[name]
    except KeyError:
        raise InvalidConfigError(
            f"unknown study preset {name!r}, choose from {', '.join(STUDY_PRESETS)}"
        ) from None


def sampler_preset(name: str) -> SamplerPreset:
    try:
        return SAMPLER_PRESETS[name]
    except KeyError:
        raise InvalidConfigError(
            f"unknown sampler preset {name!r}, choose from {', '.join(SAMPLER_PRESETS)}"
        ) from None


def hyperprior(name: str) -> Hyperprior:
    try:
        return Hyperprior.from_key(name)
    except ValueError:
        choices = ", ".join(str(h).replace("_", "-") for h in Hyperprior)
        raise InvalidConfigError(f"unknown hyperprior {name!r}, choose from {choices}") from None


def presets_help() -> str:
    lines = ["study presets:"]
    lines += [
        f"  {p.name}: n={p.n} m={p.m} m'={p.m_prime} ({p.provenance})"
        for p in STUDY_PRESETS.values()
    ]
    lines.append("sampler presets:")
    lines += [f"  {name}: {p.description}" for name, p in SAMPLER_PRESETS.items()]
    lines.append("hyperpriors:")
    lines += [f"  {str(h).replace('_', '-')}: {h.description()}" for h in Hyperprior]
    return "\n".join(lines)
