import dataclasses
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path
from types import NoneType, UnionType
from typing import Any

from nominator.config import DEFAULT_JOBS, DEFAULT_N_BOOT, DEFAULT_SEED
from nominator.experiments import DEFAULT_THRESHOLDS, StudySpec
from nominator.graph.models import ModelParams
from nominator.likelihood import InvalidConfigError, PriorConfig
from nominator.mcmc import SamplerConfig
from nominator.nomination import DEFAULT_FUSION_GRID, FusionConfig
from nominator.presets import (
    SAMPLER_PRESETS,
    STUDY_PRESETS,
    hyperprior,
    sampler_preset,
    study_preset,
)

OUTPUT_FORMATS = ("json", "csv")


@dataclass(frozen=True)
class RunConfig:
    """
    :param preset: a study preset (toy-12, table3-m8, ...) or a sampler preset (default, long)
    :param alpha: psi hyperprior alpha, overrides the hyperprior preset together with `beta`
    :param hyperprior: named psi hyperprior (sparse, flat, flat-half, mean-matched)
    :param m_prime: observed red vertices; a list runs one study per value
    :param lam: fusion weight for a single baseline nomination
    :param grid: fusion weights swept against ground truth
    :param one_based: report vertex ids starting at 1 instead of the input file's base
    :param traces: keep per-iteration traces and write moving averages
    """

    preset: str | None = None
    seed: int = DEFAULT_SEED
    burn_in: int = 1000
    samples: int = 1000
    check_rate: float = 0.01
    alpha: float | None = None
    beta: float | None = None
    hyperprior: str = "sparse"
    n: int | None = None
    m: int | None = None
    m_prime: list[int] | None = None
    p1: float | None = None
    p2: float | None = None
    q2: float | None = None
    trials: int = 1000
    count: int = 1
    jobs: int = DEFAULT_JOBS
    n_boot: int = DEFAULT_N_BOOT
    level: float = 0.95
    lam: float = 0.5
    grid: list[float] | None = None
    thresholds: list[float] = field(default_factory=lambda: list(DEFAULT_THRESHOLDS))
    hyperpriors: list[str] | None = None
    out: str = "out"
    format: str = "json"
    one_based: bool = False
    traces: bool = False

    def __post_init__(self):
        if self.seed < 0:
            raise InvalidConfigError(f"seed must be >= 0, got {self.seed}")
        for key in ["trials", "count", "jobs", "n_boot"]:
            if getattr(self, key) < 1:
                raise InvalidConfigError(f"{key} must be >= 1, got {getattr(self, key)}")
        if not 0.0 < self.level < 1.0:
            raise InvalidConfigError(f"level must lie in (0, 1), got {self.level}")
        if self.format not in OUTPUT_FORMATS:
            raise InvalidConfigError(f"format must be one of {', '.join(OUTPUT_FORMATS)}")
        if (self.alpha is None) != (self.beta is None):
            raise InvalidConfigError("alpha and beta must be given together")
        if self.m_prime is not None and not self.m_prime:
            raise InvalidConfigError("m_prime must name at least one value")
        hyperprior(self.hyperprior)
        for name in self.hyperpriors or []:
            hyperprior(name)
        # sampler and fusion invariants are checked here, before any work starts
        self.sampler()
        FusionConfig(self.lam, tuple(self.grid or DEFAULT_FUSION_GRID))

    def sampler(self) -> SamplerConfig:
        return SamplerConfig(
            burn_in=self.burn_in,
            samples=self.samples,
            seed=self.seed,
            record_traces=self.traces,
            check_rate=self.check_rate,
        )

    def prior(self, n: int, m_prime: int) -> PriorConfig:
        if self.alpha is not None and self.beta is not None:
            return PriorConfig(self.alpha, self.beta)
        return hyperprior(self.hyperprior).prior(n, m_prime)

    def params(self) -> ModelParams:
        """Generating parameters, checked against the closed region only."""
        missing = [key for key in ["p1", "p2", "q2"] if getattr(self, key) is None]
        if missing:
            raise InvalidConfigError(f"missing parameter(s) {', '.join(missing)}")
        return ModelParams(self.p1, self.p2, self.q2)  # type: ignore

    def study_counts(self) -> tuple[int, int, list[int]]:
        missing = [key for key in ["n", "m", "m_prime"] if getattr(self, key) is None]
        if missing:
            raise InvalidConfigError(f"missing study option(s) {', '.join(missing)}")
        return self.n, self.m, list(self.m_prime)  # type: ignore

    def study_specs(self) -> list[StudySpec]:
        n, m, m_primes = self.study_counts()
        params = self.params()
        return [
            StudySpec(
                n=n,
                m=m,
                m_prime=m_prime,
                params=params,
                n_graphs=self.trials,
                sampler=self.sampler(),
                prior=self.prior(n, m_prime),
                fusion_grid=tuple(self.grid or DEFAULT_FUSION_GRID),
                master_seed=self.seed,
            )
            for m_prime in m_primes
        ]

    def as_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def default_run_args() -> dict[str, Any]:
    return {f.name: getattr(RunConfig(), f.name) for f in dataclasses.fields(RunConfig)}


def _allowed_types(annotation: Any) -> tuple[type, ...]:
    if isinstance(annotation, UnionType) or typing.get_origin(annotation) is typing.Union:
        return tuple(t for arg in typing.get_args(annotation) for t in _allowed_types(arg))
    origin = typing.get_origin(annotation)
    return (origin,) if origin is not None else (annotation,)


def validate_keyword_types(kwargs: dict) -> None:
    """
    :raises InvalidConfigError: for unknown keys or values not matching the expected type
    """
    hints = typing.get_type_hints(RunConfig)
    for keyword, value in kwargs.items():
        if keyword not in hints:
            raise InvalidConfigError(f"unknown option {keyword!r}")
        allowed = _allowed_types(hints[keyword])
        if value is None:
            if NoneType not in allowed:
                raise InvalidConfigError(f"{keyword} must not be empty")
        elif bool in allowed:
            if not isinstance(value, bool):
                raise InvalidConfigError(f"invalid boolean value for {keyword}")
        elif int in allowed or float in allowed:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise InvalidConfigError(f"invalid int/float input for {keyword}")
            if int in allowed and float not in allowed and not float(value).is_integer():
                raise InvalidConfigError(f"invalid integer input for {keyword}")
        elif list in allowed:
            if not isinstance(value, list):
                raise InvalidConfigError(f"{keyword} expects a list")
        elif str in allowed and not isinstance(value, str):
            raise InvalidConfigError(f"invalid string value for {keyword}")


def _coerce(kwargs: dict) -> dict:
    hints = typing.get_type_hints(RunConfig)
    coerced = {}
    for keyword, value in kwargs.items():
        allowed = _allowed_types(hints[keyword])
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = float(value) if float in allowed else int(value)
        elif keyword == "m_prime" and isinstance(value, list):
            value = [int(v) for v in value]
        elif keyword in ("grid", "thresholds") and isinstance(value, list):
            value = [float(v) for v in value]
        coerced[keyword] = value
    # a single m' in a config file is accepted as well as a list
    if isinstance(coerced.get("m_prime"), int):
        coerced["m_prime"] = [coerced["m_prime"]]
    return coerced


def load_config_file(path: Path | str) -> dict[str, Any]:
    """
    :raises InvalidConfigError: for malformed JSON or unknown and wrongly typed options
    :raises OSError: if the file cannot be read
    """
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise InvalidConfigError(f"{path}: line {e.lineno}: {e.msg}") from e
    if not isinstance(d, dict):
        raise InvalidConfigError(f"{path}: config file must hold a JSON object")

    d = {key.replace("-", "_"): value for key, value in d.items()}
    if isinstance(d.get("m_prime"), int):
        d["m_prime"] = [d["m_prime"]]
    validate_keyword_types(d)
    return d


def preset_args(name: str) -> dict[str, Any]:
    if name in STUDY_PRESETS:
        options = study_preset(name).as_options()
        options["m_prime"] = [options["m_prime"]]
        return options
    if name in SAMPLER_PRESETS:
        preset = sampler_preset(name)
        return {"burn_in": preset.burn_in, "samples": preset.samples}
    choices = ", ".join([*STUDY_PRESETS, *SAMPLER_PRESETS])
    raise InvalidConfigError(f"unknown preset {name!r}, choose from {choices}")


def resolve_run_config(
    flags: dict[str, Any], config_file: Path | str | None = None
) -> RunConfig:
    """
    Layers options with precedence flags > config file > preset > defaults; flags left unset
    (`None`) do not override anything.
    """
    flags = {key: value for key, value in flags.items() if value is not None}
    validate_keyword_types(flags)
    from_file = load_config_file(config_file) if config_file is not None else {}

    kwargs = default_run_args()
    if preset := flags.get("preset", from_file.get("preset")):
        kwargs.update(preset_args(preset))
    kwargs.update(from_file)
    kwargs.update(flags)
    return RunConfig(**_coerce(kwargs))
