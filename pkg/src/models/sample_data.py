"""
Sample and count data models for the co-BPM divergence estimator
"""
from typing import Dict, Any, List, Optional, Tuple
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, InvalidDimensionError, OutOfDomainError

RESCALE_EPSILON = 1e-9


@dataclass(frozen=True)
class RescaleRecord:
    """Per-axis affine map from [minimum, maximum] onto [epsilon, 1 - epsilon]"""
    minimum: Tuple[float, ...]
    maximum: Tuple[float, ...]
    epsilon: float = RESCALE_EPSILON

    def apply(self, points: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.minimum, dtype=float)
        span = np.asarray(self.maximum, dtype=float) - lo
        safe_span = np.where(span > 0, span, 1.0)
        unit = np.where(span > 0, (points - lo) / safe_span, 0.5)
        return np.clip(self.epsilon + unit * (1.0 - 2.0 * self.epsilon), 0.0, 1.0)

    def to_dict(self) -> Dict[str, Any]:
        return {"minimum": list(self.minimum), "maximum": list(self.maximum), "epsilon": self.epsilon}


@dataclass
class Sample:
    """n points in [0,1]^d with a label (X or Y)"""
    points: np.ndarray
    label: str = "X"
    rescale: Optional[RescaleRecord] = None
    source: str = ""

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(-1, 1) if points.size else points.reshape(0, 0)
        if points.ndim != 2:
            raise InvalidDimensionError(f"Sample {self.label} must be a 2-d array, got {points.ndim} dims")
        if points.size and (np.isnan(points).any() or points.min() < 0.0 or points.max() > 1.0):
            raise OutOfDomainError(f"Sample {self.label} has coordinates outside [0, 1]")
        points.setflags(write=False)
        self.points = points

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    @property
    def dimension(self) -> int:
        return int(self.points.shape[1])

    def with_points(self, points: np.ndarray) -> "Sample":
        return Sample(points=points, label=self.label, rescale=self.rescale, source=self.source)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "size": self.size,
            "dimension": self.dimension,
            "source": self.source,
            "rescale": self.rescale.to_dict() if self.rescale else None,
        }


@dataclass
class CountPair:
    """Per-region counts of X and Y aligned with a partition's region list

    The point-index lists are cached so that a split only revisits the
    points of the region being split.
    """
    x_points: np.ndarray
    y_points: np.ndarray
    x_members: List[np.ndarray] = field(default_factory=list)
    y_members: List[np.ndarray] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.x_members)

    @property
    def n1(self) -> np.ndarray:
        return np.fromiter((len(m) for m in self.x_members), dtype=np.int64, count=self.depth)

    @property
    def n2(self) -> np.ndarray:
        return np.fromiter((len(m) for m in self.y_members), dtype=np.int64, count=self.depth)

    @property
    def totals(self) -> Tuple[int, int]:
        return int(self.x_points.shape[0]), int(self.y_points.shape[0])

    def check_alignment(self, depth: int):
        if self.depth != depth or len(self.y_members) != depth:
            raise AlignmentError(f"Counts cover {self.depth} regions, partition has {depth}")

    def to_dict(self) -> Dict[str, Any]:
        return {"n1": self.n1.tolist(), "n2": self.n2.tolist()}
