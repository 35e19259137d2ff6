"""
Per-region point counting with incremental updates under extend/shrink
"""
import logging
from typing import List, Tuple

import numpy as np

from ..models.errors import AlignmentError, CannotShrinkError, InvalidDimensionError
from ..models.partition import Action, Partition
from ..models.sample_data import CountPair, Sample

logger = logging.getLogger(__name__)


def _check_dimension(sample: Sample, partition: Partition):
    if sample.size and sample.dimension != partition.dimension:
        raise InvalidDimensionError(
            f"Sample {sample.label} has dimension {sample.dimension}, partition has {partition.dimension}"
        )


def _as_points(sample: Sample, dimension: int) -> np.ndarray:
    if sample.size == 0:
        return np.empty((0, dimension), dtype=float)
    return sample.points


def _group(labels: np.ndarray, depth: int) -> List[np.ndarray]:
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(depth + 1))
    return [order[bounds[i]:bounds[i + 1]] for i in range(depth)]


def count(x: Sample, y: Sample, partition: Partition) -> CountPair:
    """Full recount of both samples over the partition's regions"""
    _check_dimension(x, partition)
    _check_dimension(y, partition)
    x_points = _as_points(x, partition.dimension)
    y_points = _as_points(y, partition.dimension)
    return CountPair(
        x_points=x_points,
        y_points=y_points,
        x_members=_group(partition.assign(x_points), partition.depth),
        y_members=_group(partition.assign(y_points), partition.depth),
    )


def split_members(points: np.ndarray, members: np.ndarray, partition: Partition, action: Action) -> Tuple[np.ndarray, np.ndarray]:
    """Indices of a region's points falling in its lower and upper half"""
    region = partition.regions[action.target - 1]
    axis = action.axis - 1
    upper = np.ldexp(points[members, axis], region.exponents[axis] + 1) >= 2 * region.numerators[axis] + 1
    return members[~upper], members[upper]


def child_counts(points: np.ndarray, members: np.ndarray, region) -> Tuple[np.ndarray, np.ndarray]:
    """Lower/upper child counts of one region for every axis at once"""
    if members.size == 0:
        zeros = np.zeros(len(region.exponents), dtype=np.int64)
        return zeros, zeros.copy()
    scaled = np.ldexp(points[members], np.asarray(region.exponents) + 1)
    upper = (scaled >= 2 * np.asarray(region.numerators, dtype=float) + 1).sum(axis=0)
    return members.size - upper, upper


def recount_extend(counts: CountPair, partition: Partition, action: Action) -> CountPair:
    """Counts for partition.extend(action), touching only the split region's points"""
    try:
        counts.check_alignment(partition.depth)
        partition.validate_action(action)
    except AlignmentError:
        logger.error(f"Count cache misaligned with partition {partition.to_sequence_string()}")
        raise
    target = action.target - 1
    x_lower, x_upper = split_members(counts.x_points, counts.x_members[target], partition, action)
    y_lower, y_upper = split_members(counts.y_points, counts.y_members[target], partition, action)
    x_members = list(counts.x_members)
    y_members = list(counts.y_members)
    x_members[target] = x_lower
    y_members[target] = y_lower
    x_members.append(x_upper)
    y_members.append(y_upper)
    return CountPair(counts.x_points, counts.y_points, x_members, y_members)


def recount_shrink(counts: CountPair, partition: Partition) -> CountPair:
    """Counts for partition.shrink()[0]: the last region merges back into its sibling"""
    counts.check_alignment(partition.depth)
    if partition.depth < 2:
        raise CannotShrinkError("The root partition cannot be shrunk")
    target = partition.actions[-1].target - 1
    x_members = list(counts.x_members[:-1])
    y_members = list(counts.y_members[:-1])
    x_members[target] = np.concatenate([x_members[target], counts.x_members[-1]])
    y_members[target] = np.concatenate([y_members[target], counts.y_members[-1]])
    return CountPair(counts.x_points, counts.y_points, x_members, y_members)
