"""
Discrepancy functionals and posterior summaries
"""
import json
from enum import Enum
from typing import Callable, Dict, Any, List, Optional
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


class PhiKind(str, Enum):
    TOTAL_VARIATION = "tv"
    HELLINGER = "hellinger"
    KL = "kl"
    RENYI = "renyi"
    GENERIC = "generic"


@dataclass(frozen=True)
class PhiSpec:
    """Which discrepancy to evaluate; GENERIC carries a convex phi with phi(1) = 0"""
    kind: PhiKind
    alpha: Optional[float] = None
    function: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    name: str = ""

    def __post_init__(self):
        if self.kind == PhiKind.RENYI:
            if self.alpha is None or self.alpha == 1.0:
                raise ConfigError(f"Renyi divergence needs alpha != 1, got {self.alpha}")
        if self.kind == PhiKind.GENERIC:
            if self.function is None:
                raise ConfigError("Generic phi needs a function")
            at_one = float(np.asarray(self.function(np.array([1.0])), dtype=float).reshape(-1)[0])
            if abs(at_one) > 1e-10:
                raise ConfigError(f"Generic phi must vanish at 1, got phi(1) = {at_one}")

    @classmethod
    def total_variation(cls) -> "PhiSpec":
        return cls(PhiKind.TOTAL_VARIATION)

    @classmethod
    def hellinger(cls) -> "PhiSpec":
        return cls(PhiKind.HELLINGER)

    @classmethod
    def kl(cls) -> "PhiSpec":
        return cls(PhiKind.KL)

    @classmethod
    def renyi(cls, alpha: float) -> "PhiSpec":
        return cls(PhiKind.RENYI, alpha=float(alpha))

    @classmethod
    def generic(cls, function: Callable[[np.ndarray], np.ndarray], name: str = "generic") -> "PhiSpec":
        return cls(PhiKind.GENERIC, function=function, name=name)

    @classmethod
    def parse(cls, text: str) -> "PhiSpec":
        """One of tv, hellinger, kl, renyi:ALPHA"""
        token = text.strip().lower()
        if token in ("tv", "total_variation"):
            return cls.total_variation()
        if token == "hellinger":
            return cls.hellinger()
        if token == "kl":
            return cls.kl()
        if token.startswith("renyi"):
            _, _, alpha = token.partition(":")
            try:
                return cls.renyi(float(alpha or 2.0))
            except ValueError:
                raise ConfigError(f"Invalid Renyi order in '{text}'")
        raise ConfigError(f"Unknown discrepancy '{text}' (expected tv, hellinger, kl or renyi:ALPHA)")

    @classmethod
    def parse_list(cls, text: str) -> List["PhiSpec"]:
        return [cls.parse(token) for token in text.split(",") if token.strip()]

    @property
    def label(self) -> str:
        if self.kind == PhiKind.RENYI:
            return f"renyi:{self.alpha:g}"
        if self.kind == PhiKind.GENERIC:
            return self.name or "generic"
        return self.kind.value


@dataclass
class BoxPlotStats:
    """Quartiles and 1.5 IQR whiskers of a draw vector"""
    q1: float
    median: float
    q3: float
    whisker_low: float
    whisker_high: float
    n_outliers: int
    n_draws: int

    @classmethod
    def from_draws(cls, draws: np.ndarray) -> "BoxPlotStats":
        q1, median, q3 = np.quantile(draws, [0.25, 0.5, 0.75])
        iqr = q3 - q1
        inside = draws[(draws >= q1 - 1.5 * iqr) & (draws <= q3 + 1.5 * iqr)]
        return cls(
            q1=float(q1),
            median=float(median),
            q3=float(q3),
            whisker_low=float(inside.min()),
            whisker_high=float(inside.max()),
            n_outliers=int(draws.size - inside.size),
            n_draws=int(draws.size),
        )


@dataclass
class PosteriorSummary:
    phi: PhiSpec
    median: float
    mean: float
    std: float
    ci_low: float
    ci_high: float
    level: float
    ess: float
    draws: np.ndarray = field(repr=False)

    @property
    def n_draws(self) -> int:
        return int(self.draws.size)

    def boxplot(self) -> BoxPlotStats:
        return BoxPlotStats.from_draws(self.draws)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "phi": self.phi.label,
            "median": self.median,
            "mean": self.mean,
            "std": self.std,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n_draws": self.n_draws,
            "ess": self.ess,
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


@dataclass
class OracleResult:
    """Monte Carlo reference value of one discrepancy"""
    phi: PhiSpec
    estimate: float
    se: float
    n_draws: int
    workers: int = 1
    seed: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "phi": self.phi.label,
            "estimate": self.estimate,
            "se": self.se,
            "n_draws": self.n_draws,
            "workers": self.workers,
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, default=str)


@dataclass
class BaselineResult:
    method: str  # "pc" or "hist"
    phi: str
    estimate: float
    k: Optional[int] = None
    bins: Optional[int] = None
    clamped: Optional[int] = None  # zero neighbour distances raised to distance_clamp
    distance_clamp: float = 1e-12

    def to_dict(self) -> Dict[str, Any]:
        data = {"method": self.method, "phi": self.phi, "estimate": self.estimate}
        if self.k is not None:
            data["k"] = self.k
        if self.clamped is not None:
            data["distance_clamp"] = self.distance_clamp
            data["clamped"] = self.clamped
        if self.bins is not None:
            data["bins"] = self.bins
        return data
