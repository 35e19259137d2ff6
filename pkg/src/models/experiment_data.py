"""
Settings and experiment configuration models
"""
import os
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ValidationError, field_validator, model_validator

from .chain_data import ChainConfig, ProposalKind
from .divergence_data import PhiSpec
from .errors import ConfigError
from .model_data import SEQUENCE_PRIORS, Hyperparams

ESTIMATORS = ("cobpm", "pc1", "pc10", "hist", "twostep")


class ModelSettings(BaseModel):
    delta: float = 0.5
    sigma: Optional[float] = None
    p_up: float = 0.5
    max_depth: int = 200
    sequence_prior: str = "flat"

    @field_validator("sequence_prior")
    @classmethod
    def known_prior(cls, value: str) -> str:
        if value not in SEQUENCE_PRIORS:
            raise ValueError(f"sequence_prior must be one of {SEQUENCE_PRIORS}")
        return value

    def hyperparams(self, dimension: int) -> Hyperparams:
        return Hyperparams.for_dimension(
            dimension, sigma=self.sigma, delta=self.delta, p_up=self.p_up,
            max_depth=self.max_depth, sequence_prior=self.sequence_prior,
        )


class SamplerSettings(BaseModel):
    iters: int = 8000
    burnin: int = 5000
    thin: int = 1
    proposal: Optional[ProposalKind] = None
    chains: int = 1
    progress_every: int = 0

    @model_validator(mode="after")
    def burnin_inside_run(self) -> "SamplerSettings":
        if not 0 <= self.burnin < self.iters:
            raise ValueError(f"burnin ({self.burnin}) must lie in [0, iters={self.iters})")
        if self.thin < 1:
            raise ValueError(f"thin must be at least 1, got {self.thin}")
        if self.chains < 1:
            raise ValueError(f"chains must be at least 1, got {self.chains}")
        return self

    def chain_config(self, hyperparams: Hyperparams, seed: int) -> ChainConfig:
        return ChainConfig(
            iterations=self.iters,
            burnin=self.burnin,
            thin=self.thin,
            seed=seed,
            proposal=self.proposal,
            hyperparams=hyperparams,
            progress_every=self.progress_every,
        )


class DivergenceSettings(BaseModel):
    phi: str = "tv,hellinger,kl,renyi:2"
    level: float = 0.95

    @field_validator("phi")
    @classmethod
    def parseable(cls, value: str) -> str:
        if not PhiSpec.parse_list(value):
            raise ValueError("at least one discrepancy is required")
        return value

    @field_validator("level")
    @classmethod
    def probability(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError(f"credible level must lie in (0, 1), got {value}")
        return value

    @property
    def phis(self) -> List[PhiSpec]:
        return PhiSpec.parse_list(self.phi)


class OracleSettings(BaseModel):
    mc_draws: int = 10_000_000
    workers: int = 1
    chunk_size: int = 250_000


class BaselineSettings(BaseModel):
    k: List[int] = [1, 10]
    bins: int = 8


class RuntimeSettings(BaseModel):
    seed: int = 0
    threads: int = 1
    out: str = "results"

    @field_validator("threads")
    @classmethod
    def positive_threads(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f"threads must be at least 1, got {value}")
        return value


class LoggingSettings(BaseModel):
    level: str = "INFO"
    format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    file: Optional[str] = None
    max_size: int = 10 * 1024 * 1024
    backup_count: int = 5


class Settings(BaseModel):
    """Resolved contents of config/config.yaml after environment and flag overrides"""
    model: ModelSettings = ModelSettings()
    sampler: SamplerSettings = SamplerSettings()
    divergence: DivergenceSettings = DivergenceSettings()
    oracle: OracleSettings = OracleSettings()
    baselines: BaselineSettings = BaselineSettings()
    runtime: RuntimeSettings = RuntimeSettings()
    logging: LoggingSettings = LoggingSettings()


class ExperimentMode(str, Enum):
    ESTIMATE = "estimate"
    ORACLE = "oracle"
    BASELINE = "baseline"
    SANITY = "sanity"
    SWEEP = "sweep"


class ExperimentConfig(BaseModel):
    """One command invocation: mode, sample sources and resolved settings"""
    mode: ExperimentMode
    settings: Settings = Settings()
    x_path: Optional[str] = None
    y_path: Optional[str] = None
    p: Optional[str] = None
    q: Optional[str] = None
    setup: Optional[str] = None
    n: Optional[int] = None
    sizes: List[int] = []
    estimators: List[str] = ["cobpm", "pc1"]
    replicas: int = 1
    rescale: bool = False
    augment: float = 0.0
    write_trace: bool = True

    @field_validator("replicas")
    @classmethod
    def at_least_one_replica(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f"replicas must be at least 1, got {value}")
        return value

    @field_validator("augment")
    @classmethod
    def augment_fraction(cls, value: float) -> float:
        if not 0.0 <= value < 1.0:
            raise ValueError(f"augment must lie in [0, 1), got {value}")
        return value

    @field_validator("estimators")
    @classmethod
    def known_estimators(cls, value: List[str]) -> List[str]:
        unknown = [e for e in value if e not in ESTIMATORS]
        if unknown:
            raise ValueError(f"unknown estimators {unknown}; choose from {ESTIMATORS}")
        return value

    @model_validator(mode="after")
    def sources_match_mode(self) -> "ExperimentConfig":
        files = self.x_path is not None or self.y_path is not None
        densities = self.p is not None or self.q is not None
        if files and (self.x_path is None or self.y_path is None):
            raise ValueError("both --x and --y are required when reading samples from files")
        if densities and (self.p is None or self.q is None):
            raise ValueError("both --p and --q are required when sampling from densities")
        if sum([files, densities, self.setup is not None]) > 1:
            raise ValueError("give exactly one of --x/--y, --p/--q or --setup")
        for path in (self.x_path, self.y_path):
            if path is not None and not os.path.isfile(path):
                raise ValueError(f"input file {path} does not exist")

        if self.mode == ExperimentMode.SANITY:
            if files or densities:
                raise ValueError("sanity runs use the built-in pairs; pass --setup sanity-signed or sanity-piecewise")
            return self
        if not (files or densities or self.setup):
            raise ValueError(f"{self.mode.value} needs --x/--y, --p/--q or --setup")
        if self.mode in (ExperimentMode.ORACLE, ExperimentMode.SWEEP) and files:
            raise ValueError(f"{self.mode.value} draws from densities; pass --p/--q or --setup")
        if self.mode == ExperimentMode.SWEEP and not self.sizes:
            raise ValueError("sweep needs at least one sample size")
        if self.mode in (ExperimentMode.ESTIMATE, ExperimentMode.BASELINE) and not files and not self.n:
            raise ValueError(f"{self.mode.value} from densities needs --n")
        return self

    @classmethod
    def build(cls, **values: Any) -> "ExperimentConfig":
        """Validate, reporting failures as ConfigError"""
        try:
            return cls(**values)
        except ValidationError as e:
            raise ConfigError(_describe(e))

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


def _describe(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(p) for p in item["loc"]) or "config"
        parts.append(f"{location}: {item['msg']}")
    return "; ".join(parts)


def validate_settings(data: Dict[str, Any]) -> Settings:
    try:
        return Settings(**data)
    except ValidationError as e:
        raise ConfigError(_describe(e))
