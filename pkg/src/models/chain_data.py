"""
Markov chain configuration and trace data models
"""
import json
import math
from enum import Enum
from typing import Dict, Any, List, Optional
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .model_data import Hyperparams, MassPair

GUIDED_MAX_DIMENSION = 5


class ProposalKind(str, Enum):
    GUIDED = "guided"
    UNIFORM = "uniform"

    @classmethod
    def default_for(cls, dimension: int) -> "ProposalKind":
        return cls.GUIDED if dimension <= GUIDED_MAX_DIMENSION else cls.UNIFORM


@dataclass
class ChainConfig:
    """Length, thinning, seed, kernel and hyperparameters of one chain"""
    iterations: int = 8000
    burnin: int = 5000
    thin: int = 1
    seed: int = 0
    proposal: Optional[ProposalKind] = None  # None picks by dimension
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    progress_every: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError(f"iterations must be positive, got {self.iterations}")
        if not 0 <= self.burnin < self.iterations:
            raise ConfigError(f"burn-in {self.burnin} must lie in [0, {self.iterations})")
        if self.thin < 1:
            raise ConfigError(f"thinning stride must be at least 1, got {self.thin}")
        if self.proposal is not None:
            self.proposal = ProposalKind(self.proposal)

    @property
    def retained_count(self) -> int:
        return math.ceil((self.iterations - self.burnin) / self.thin)

    def is_retained(self, iteration: int) -> bool:
        return iteration >= self.burnin and (iteration - self.burnin) % self.thin == 0

    def resolved_proposal(self, dimension: int) -> ProposalKind:
        return self.proposal or ProposalKind.default_for(dimension)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "iterations": self.iterations,
            "burnin": self.burnin,
            "thin": self.thin,
            "seed": self.seed,
            "proposal": self.proposal.value if self.proposal else None,
            "hyperparams": self.hyperparams.to_dict(),
        }


@dataclass
class TraceRecord:
    iteration: int
    depth: int
    sequence: str
    masses: MassPair
    log_marginal: float
    accepted: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "iteration": self.iteration,
            "depth": self.depth,
            "sequence": self.sequence,
            "m1": self.masses.m1.tolist(),
            "m2": self.masses.m2.tolist(),
            "log_marginal": self.log_marginal,
            "accepted": self.accepted,
        }


@dataclass
class Trace:
    """Retained states of one chain plus run-wide counters"""
    config: ChainConfig
    proposal: ProposalKind
    records: List[TraceRecord] = field(default_factory=list)
    proposals: int = 0
    acceptances: int = 0
    depth_cap_hits: int = 0

    @property
    def acceptance_rate(self) -> float:
        return self.acceptances / self.proposals if self.proposals else 0.0

    @property
    def depths(self) -> np.ndarray:
        return np.array([r.depth for r in self.records], dtype=np.int64)

    @property
    def mean_depth(self) -> float:
        return float(self.depths.mean()) if self.records else 0.0

    def depth_histogram(self) -> Dict[int, int]:
        values, counts = np.unique(self.depths, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}

    def map_record(self) -> TraceRecord:
        """Retained state with the largest log-marginal (first one on ties)"""
        return max(self.records, key=lambda r: r.log_marginal)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict()) + "\n" for r in self.records)

    def summary_dict(self) -> Dict[str, Any]:
        return {
            "proposal": self.proposal.value,
            "acceptance_rate": self.acceptance_rate,
            "mean_depth": self.mean_depth,
            "retained": len(self.records),
            "depth_histogram": self.depth_histogram(),
            "depth_cap_hits": self.depth_cap_hits,
        }
