"""
Model parameter and state data structures for the co-BPM divergence estimator
"""
from typing import Dict, Any, Optional
from dataclasses import dataclass, asdict
import json

import numpy as np

from .errors import AlignmentError, ConfigError
from .partition import Partition
from .sample_data import CountPair

SEQUENCE_PRIORS = ("flat", "uniform")


@dataclass(frozen=True)
class Hyperparams:
    """Dirichlet pseudo-count, depth penalty and depth-move probabilities"""
    delta: float = 0.5
    sigma: float = 2.0
    p_up: float = 0.5
    max_depth: int = 200
    sequence_prior: str = "flat"

    def __post_init__(self):
        if not self.delta > 0:
            raise ConfigError(f"delta must be positive, got {self.delta}")
        if not self.sigma > 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if not 0.0 <= self.p_up <= 1.0:
            raise ConfigError(f"p_up must lie in [0, 1], got {self.p_up}")
        if self.max_depth < 2:
            raise ConfigError(f"max_depth must be at least 2, got {self.max_depth}")
        if self.sequence_prior not in SEQUENCE_PRIORS:
            raise ConfigError(f"sequence_prior must be one of {SEQUENCE_PRIORS}, got {self.sequence_prior}")

    @classmethod
    def for_dimension(cls, dimension: int, sigma: Optional[float] = None, **kwargs) -> "Hyperparams":
        """Defaults with sigma = d + 1 unless given"""
        return cls(sigma=float(dimension + 1) if sigma is None else float(sigma), **kwargs)

    def up_probability(self, depth: int) -> float:
        """p(l+1 | l), forced to 1 at the root and 0 at the depth cap"""
        if depth >= self.max_depth:
            return 0.0
        if depth <= 1:
            return 1.0
        return self.p_up

    def down_probability(self, depth: int) -> float:
        if depth <= 1:
            return 0.0
        return 1.0 - self.up_probability(depth)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class MassPair:
    """Region masses of the two samples, each a point on the simplex"""
    m1: np.ndarray
    m2: np.ndarray

    def __post_init__(self):
        self.m1 = np.asarray(self.m1, dtype=float)
        self.m2 = np.asarray(self.m2, dtype=float)
        if self.m1.shape != self.m2.shape or self.m1.ndim != 1:
            raise AlignmentError(f"Mass vectors have shapes {self.m1.shape} and {self.m2.shape}")
        for name, m in (("m1", self.m1), ("m2", self.m2)):
            if np.any(m < 0) or abs(m.sum() - 1.0) > 1e-9:
                raise ValueError(f"{name} is not a probability vector: {m.tolist()}")

    @property
    def depth(self) -> int:
        return int(self.m1.shape[0])

    def swapped(self) -> "MassPair":
        return MassPair(self.m2, self.m1)

    def to_dict(self) -> Dict[str, Any]:
        return {"m1": self.m1.tolist(), "m2": self.m2.tolist()}

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


@dataclass
class Theta:
    """Sampler state: partition (with its decision sequence), masses and cached counts"""
    partition: Partition
    masses: MassPair
    counts: CountPair
    log_marginal: float

    def __post_init__(self):
        depth = self.partition.depth
        if self.masses.depth != depth:
            raise AlignmentError(f"Masses cover {self.masses.depth} regions, partition has {depth}")
        self.counts.check_alignment(depth)

    @property
    def depth(self) -> int:
        return self.partition.depth
