"""
Reference estimators: k-nearest-neighbour KL and regular histograms
"""
import logging
from typing import Tuple, Union

import numpy as np
from sklearn.neighbors import NearestNeighbors

from ..models.divergence_data import BaselineResult, PhiSpec
from ..models.errors import EstimatorError, InvalidDimensionError
from ..models.sample_data import Sample
from .divergence import discrepancy_from_vectors

logger = logging.getLogger(__name__)

DISTANCE_FLOOR = 1e-12
MAX_HISTOGRAM_CELLS = 1 << 26

PointsLike = Union[Sample, np.ndarray]


def _points(sample: PointsLike) -> np.ndarray:
    if isinstance(sample, Sample):
        return sample.points
    return np.atleast_2d(np.asarray(sample, dtype=float))


def _check_pair(x: np.ndarray, y: np.ndarray):
    if x.shape[1] != y.shape[1]:
        raise InvalidDimensionError(f"Samples have dimensions {x.shape[1]} and {y.shape[1]}")


def knn_kl_with_clamps(x: PointsLike, y: PointsLike, k: int = 1) -> Tuple[float, int]:
    """k-NN plug-in estimate of KL(p_x || p_y) and the number of clamped distances

    rho is the distance from each x to its k-th neighbour in X without itself,
    nu the distance to its k-th neighbour in Y. Zero distances from duplicate
    points are clamped to DISTANCE_FLOOR.
    """
    x = _points(x)
    y = _points(y)
    _check_pair(x, y)
    n1, d = x.shape
    n2 = y.shape[0]
    if k < 1 or n1 <= k or n2 < k:
        raise EstimatorError(f"k = {k} needs more than k points in X and at least k in Y (got {n1}, {n2})")

    rho = NearestNeighbors(n_neighbors=k + 1).fit(x).kneighbors(x, return_distance=True)[0][:, k]
    nu = NearestNeighbors(n_neighbors=k).fit(y).kneighbors(x, return_distance=True)[0][:, k - 1]

    clamped = int((rho < DISTANCE_FLOOR).sum() + (nu < DISTANCE_FLOOR).sum())
    if clamped:
        logger.warning(f"Clamped {clamped} zero neighbour distances to {DISTANCE_FLOOR}")
    rho = np.maximum(rho, DISTANCE_FLOOR)
    nu = np.maximum(nu, DISTANCE_FLOOR)
    return float(d * np.mean(np.log(nu / rho)) + np.log(n2 / (n1 - 1))), clamped


def knn_kl(x: PointsLike, y: PointsLike, k: int = 1) -> float:
    """PC-k estimate of KL(p_x || p_y); may be negative"""
    return knn_kl_with_clamps(x, y, k)[0]


def histogram_counts(points: np.ndarray, bins: int) -> np.ndarray:
    """Point counts on a regular grid, cells in row-major order"""
    n, d = points.shape
    cells = bins ** d
    index = np.clip(np.floor(points * bins).astype(np.int64), 0, bins - 1)
    flat = np.ravel_multi_index(index.T, (bins,) * d) if n else np.empty(0, dtype=np.int64)
    return np.bincount(flat, minlength=cells).astype(float)


def histogram_divergence(x: PointsLike, y: PointsLike, bins: int, phi: PhiSpec, delta: float = 0.5) -> float:
    """Discrepancy of delta-smoothed histograms with `bins` equal intervals per axis"""
    x = _points(x)
    y = _points(y)
    _check_pair(x, y)
    if bins < 1:
        raise EstimatorError(f"bins must be at least 1, got {bins}")
    d = x.shape[1]
    if bins ** d > MAX_HISTOGRAM_CELLS:
        raise EstimatorError(f"{bins}^{d} histogram cells exceed the limit of {MAX_HISTOGRAM_CELLS}")

    c1 = histogram_counts(x, bins)
    c2 = histogram_counts(y, bins)
    if delta == 0 and (x.shape[0] == 0 or y.shape[0] == 0):
        raise EstimatorError("Unsmoothed histogram of an empty sample")
    empty = int(((c1 + c2) == 0).sum())
    if empty:
        logger.warning(f"{empty} of {c1.size} histogram cells hold no data from either sample")
    m1 = (c1 + delta) / (c1.sum() + delta * c1.size)
    m2 = (c2 + delta) / (c2.sum() + delta * c2.size)
    return discrepancy_from_vectors(phi, m1, m2)


def run_baselines(x: PointsLike, y: PointsLike, phis, ks=(1, 10), bins: int = 8, delta: float = 0.5):
    """PC-k for KL at each k, histogram for every phi"""
    results = []
    for k in ks:
        try:
            estimate, clamped = knn_kl_with_clamps(x, y, k)
            results.append(BaselineResult("pc", "kl", estimate, k=k, clamped=clamped, distance_clamp=DISTANCE_FLOOR))
        except EstimatorError as e:
            logger.warning(f"Skipping PC-{k}: {str(e)}")
    for phi in phis:
        results.append(BaselineResult("hist", phi.label, histogram_divergence(x, y, bins, phi, delta), bins=bins))
    return results
