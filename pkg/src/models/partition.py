"""
Binary partition data models for the co-BPM divergence estimator

Regions are dyadic boxes of the unit cube stored as integer numerators and
exponents, so every midpoint split and every volume is exact.
"""
import math
import re
from dataclasses import dataclass, field
from typing import Dict, Any, List, Iterator, Sequence, Tuple

import numpy as np

from .errors import (
    CannotShrinkError,
    DepthLimitError,
    InvalidActionError,
    InvalidDimensionError,
    InvalidPartitionError,
    OutOfDomainError,
)

MAX_EXPONENT = 63

_SEQUENCE_STEP = re.compile(r"^\((\d+),(\d+)\)$")


@dataclass(frozen=True)
class Region:
    """Dyadic box: axis j spans [num_j / 2^e_j, (num_j + 1) / 2^e_j)"""
    numerators: Tuple[int, ...]
    exponents: Tuple[int, ...]

    def __post_init__(self):
        if len(self.numerators) != len(self.exponents):
            raise InvalidDimensionError("Region numerators and exponents differ in length")
        for num, exp in zip(self.numerators, self.exponents):
            if exp < 0 or not 0 <= num < (1 << exp):
                raise InvalidPartitionError(f"Invalid dyadic interval numerator={num} exponent={exp}")

    @classmethod
    def unit(cls, dimension: int) -> "Region":
        return cls(numerators=(0,) * dimension, exponents=(0,) * dimension)

    @property
    def dimension(self) -> int:
        return len(self.exponents)

    @property
    def total_exponent(self) -> int:
        """-log2 of the volume"""
        return sum(self.exponents)

    @property
    def volume(self) -> float:
        return math.ldexp(1.0, -self.total_exponent)

    @property
    def lower(self) -> Tuple[float, ...]:
        return tuple(math.ldexp(num, -exp) for num, exp in zip(self.numerators, self.exponents))

    @property
    def upper(self) -> Tuple[float, ...]:
        return tuple(math.ldexp(num + 1, -exp) for num, exp in zip(self.numerators, self.exponents))

    @property
    def center(self) -> Tuple[float, ...]:
        return tuple(math.ldexp(2 * num + 1, -exp - 1) for num, exp in zip(self.numerators, self.exponents))

    def contains(self, point: Sequence[float]) -> bool:
        """Half-open membership; faces lying on the top of the unit cube are closed"""
        for x, num, exp in zip(point, self.numerators, self.exponents):
            scaled = math.ldexp(float(x), exp)
            if scaled < num:
                return False
            if scaled >= num + 1 and not (x == 1.0 and num + 1 == (1 << exp)):
                return False
        return True

    def split(self, axis: int) -> Tuple["Region", "Region"]:
        """Halve along a 0-based axis, returning (lower, upper)"""
        exp = self.exponents[axis] + 1
        if exp > MAX_EXPONENT:
            raise DepthLimitError(f"Axis {axis + 1} cannot be split beyond 2^-{MAX_EXPONENT}")
        num = self.numerators[axis]
        exponents = self.exponents[:axis] + (exp,) + self.exponents[axis + 1:]
        lower = Region(self.numerators[:axis] + (2 * num,) + self.numerators[axis + 1:], exponents)
        upper = Region(self.numerators[:axis] + (2 * num + 1,) + self.numerators[axis + 1:], exponents)
        return lower, upper

    def parent(self, axis: int) -> "Region":
        """Undo a split along a 0-based axis"""
        exp = self.exponents[axis]
        if exp == 0:
            raise CannotShrinkError(f"Region is not split along axis {axis + 1}")
        return Region(
            self.numerators[:axis] + (self.numerators[axis] >> 1,) + self.numerators[axis + 1:],
            self.exponents[:axis] + (exp - 1,) + self.exponents[axis + 1:],
        )

    def _interval(self, axis: int, exponent: int) -> Tuple[int, int]:
        shift = exponent - self.exponents[axis]
        start = self.numerators[axis] << shift
        return start, start + (1 << shift)

    def overlap_volume(self, other: "Region") -> float:
        """Exact volume of the intersection with another dyadic region"""
        total_exponent = 0
        overlap = 1
        for axis in range(self.dimension):
            exponent = max(self.exponents[axis], other.exponents[axis])
            lo_a, hi_a = self._interval(axis, exponent)
            lo_b, hi_b = other._interval(axis, exponent)
            width = min(hi_a, hi_b) - max(lo_a, lo_b)
            if width <= 0:
                return 0.0
            overlap *= width
            total_exponent += exponent
        return math.ldexp(overlap, -total_exponent)

    def intersects(self, other: "Region") -> bool:
        return self.overlap_volume(other) > 0.0

    def is_subset_of(self, other: "Region") -> bool:
        for axis in range(self.dimension):
            if self.exponents[axis] < other.exponents[axis]:
                return False
            if self.numerators[axis] >> (self.exponents[axis] - other.exponents[axis]) != other.numerators[axis]:
                return False
        return True

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lower": list(self.lower),
            "upper": list(self.upper),
            "volume": self.volume,
        }


@dataclass(frozen=True)
class Action:
    """Split of region `target` along `axis` (both 1-based)"""
    target: int
    axis: int

    def to_text(self) -> str:
        return f"({self.target},{self.axis})"


@dataclass(frozen=True)
class Partition:
    """Partition of [0,1]^d produced by a decision sequence of midpoint splits"""
    dimension: int
    actions: Tuple[Action, ...] = ()
    regions: Tuple[Region, ...] = field(default=())

    @classmethod
    def root(cls, dimension: int) -> "Partition":
        if dimension < 1:
            raise InvalidDimensionError(f"Partition dimension must be at least 1, got {dimension}")
        return cls(dimension=dimension, actions=(), regions=(Region.unit(dimension),))

    @classmethod
    def replay(cls, dimension: int, actions: Sequence[Action]) -> "Partition":
        partition = cls.root(dimension)
        for action in actions:
            partition = partition.extend(action)
        return partition

    @property
    def depth(self) -> int:
        return len(self.regions)

    def validate_action(self, action: Action):
        if not 1 <= action.target <= self.depth:
            raise InvalidActionError(f"Target region {action.target} outside 1..{self.depth}")
        if not 1 <= action.axis <= self.dimension:
            raise InvalidActionError(f"Axis {action.axis} outside 1..{self.dimension}")

    def extend(self, action: Action) -> "Partition":
        """Split the target region; lower half keeps its index, upper half goes last"""
        self.validate_action(action)
        lower, upper = self.regions[action.target - 1].split(action.axis - 1)
        regions = list(self.regions)
        regions[action.target - 1] = lower
        regions.append(upper)
        return Partition(self.dimension, self.actions + (action,), tuple(regions))

    def shrink(self) -> Tuple["Partition", Action]:
        """Remove the last action and merge the two regions it created"""
        if self.depth < 2:
            raise CannotShrinkError("The root partition cannot be shrunk")
        action = self.actions[-1]
        regions = list(self.regions[:-1])
        regions[action.target - 1] = regions[action.target - 1].parent(action.axis - 1)
        return Partition(self.dimension, self.actions[:-1], tuple(regions)), action

    def candidate_actions(self) -> Iterator[Action]:
        """All l*d extensions in (region, axis) row-major order"""
        for target in range(1, self.depth + 1):
            for axis in range(1, self.dimension + 1):
                yield Action(target, axis)

    def _check_point(self, point: Sequence[float]) -> np.ndarray:
        x = np.asarray(point, dtype=float).reshape(-1)
        if x.shape[0] != self.dimension:
            raise InvalidDimensionError(f"Point has {x.shape[0]} coordinates, partition has {self.dimension}")
        if np.any(x < 0.0) or np.any(x > 1.0) or np.any(np.isnan(x)):
            raise OutOfDomainError(f"Point {x.tolist()} lies outside the unit cube")
        return x

    def locate(self, point: Sequence[float]) -> int:
        """1-based index of the region containing the point"""
        x = self._check_point(point)
        for index, region in enumerate(self.regions, start=1):
            if region.contains(x):
                return index
        raise OutOfDomainError(f"Point {x.tolist()} matched no region")

    def assign(self, points: np.ndarray) -> np.ndarray:
        """0-based region index of every row, by replaying the decision sequence"""
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or (points.shape[0] and points.shape[1] != self.dimension):
            raise InvalidDimensionError(f"Expected an (n, {self.dimension}) array, got shape {points.shape}")
        if points.size and (points.min() < 0.0 or points.max() > 1.0):
            raise OutOfDomainError("Sample contains coordinates outside [0, 1]")
        labels = np.zeros(points.shape[0], dtype=np.int64)
        regions = [Region.unit(self.dimension)]
        for step, action in enumerate(self.actions, start=1):
            target = action.target - 1
            axis = action.axis - 1
            region = regions[target]
            members = np.flatnonzero(labels == target)
            upper = np.ldexp(points[members, axis], region.exponents[axis] + 1) >= 2 * region.numerators[axis] + 1
            labels[members[upper]] = step
            lower_half, upper_half = region.split(axis)
            regions[target] = lower_half
            regions.append(upper_half)
        return labels

    def common_refinement(self, other: "Partition") -> "Partition":
        """A partition in which every region of self and of other is a union of cells

        Starts from this partition's own sequence and keeps splitting any cell
        that straddles a region of `other`, along an axis where the cell is
        still coarser than that region. Not necessarily minimal.
        """
        if self.dimension != other.dimension:
            raise InvalidDimensionError(
                f"Cannot refine partitions of dimension {self.dimension} and {other.dimension}"
            )
        refined = self
        pending = True
        while pending:
            pending = False
            for index, cell in enumerate(refined.regions, start=1):
                for target in other.regions:
                    if not cell.intersects(target) or cell.is_subset_of(target):
                        continue
                    axis = next(
                        j for j in range(self.dimension) if cell.exponents[j] < target.exponents[j]
                    )
                    refined = refined.extend(Action(index, axis + 1))
                    pending = True
                    break
                if pending:
                    break
        return refined

    def to_sequence_string(self) -> str:
        return ";".join([str(self.dimension)] + [action.to_text() for action in self.actions])

    @classmethod
    def from_sequence_string(cls, text: str) -> "Partition":
        parts = [part.strip() for part in text.strip().split(";")]
        try:
            dimension = int(parts[0])
        except ValueError as e:
            raise InvalidPartitionError(f"Invalid partition sequence '{text}': {e}")
        actions: List[Action] = []
        for part in parts[1:]:
            match = _SEQUENCE_STEP.match(part.replace(" ", ""))
            if not match:
                raise InvalidPartitionError(f"Invalid action '{part}' in partition sequence '{text}'")
            actions.append(Action(int(match.group(1)), int(match.group(2))))
        return cls.replay(dimension, actions)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dimension": self.dimension,
            "depth": self.depth,
            "sequence": self.to_sequence_string(),
            "regions": [region.to_dict() for region in self.regions],
        }
