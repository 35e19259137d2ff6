"""
Monte Carlo ground truth for discrepancies between two densities
"""
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from ..models.divergence_data import OracleResult, PhiKind, PhiSpec
from ..models.errors import DensitySpecError, InvalidDimensionError, SingularMassError
from ..models.partition import Region
from .densities import DensitySpec
from .divergence import MassOracle

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 250_000


@dataclass
class RunningMoments:
    """Count, mean and centred sum of squares; merge() is associative"""
    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @classmethod
    def of(cls, values: np.ndarray) -> "RunningMoments":
        if values.size == 0:
            return cls()
        mean = float(values.mean())
        return cls(int(values.size), mean, float(((values - mean) ** 2).sum()))

    def merge(self, other: "RunningMoments") -> "RunningMoments":
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        total = self.count + other.count
        delta = other.mean - self.mean
        return RunningMoments(
            count=total,
            mean=self.mean + delta * other.count / total,
            m2=self.m2 + other.m2 + delta * delta * self.count * other.count / total,
        )

    @property
    def standard_error(self) -> float:
        if self.count < 2:
            return 0.0
        return math.sqrt(self.m2 / (self.count - 1) / self.count)


def _integrand(phi: PhiSpec, ratio: np.ndarray) -> np.ndarray:
    """Per-draw term whose mean under p is transformed into the discrepancy"""
    with np.errstate(divide="ignore", over="ignore"):
        if phi.kind == PhiKind.TOTAL_VARIATION:
            return 0.5 * np.abs(1.0 - ratio)
        if phi.kind == PhiKind.HELLINGER:
            return np.sqrt(ratio)
        if phi.kind == PhiKind.KL:
            return -np.log(ratio)
        if phi.kind == PhiKind.RENYI:
            return np.power(ratio, 1.0 - phi.alpha)
        return np.asarray(phi.function(ratio), dtype=float)


def _finish(phi: PhiSpec, moments: RunningMoments) -> Tuple[float, float]:
    """Estimate and delta-method standard error from the integrand moments"""
    mean, se = moments.mean, moments.standard_error
    if phi.kind == PhiKind.HELLINGER:
        gap = max(1.0 - mean, 0.0)
        estimate = math.sqrt(gap)
        return estimate, se / (2.0 * estimate) if estimate > 0 else se
    if phi.kind == PhiKind.RENYI:
        if mean <= 0:
            raise SingularMassError(f"Renyi integrand has non-positive mean {mean}")
        return math.log(mean) / (phi.alpha - 1.0), se / (abs(phi.alpha - 1.0) * mean)
    return mean, se


def _worker(p: DensitySpec, q: DensitySpec, phis: Sequence[PhiSpec], n_draws: int,
            seed_sequence: np.random.SeedSequence, chunk_size: int) -> Tuple[List[RunningMoments], int]:
    rng = np.random.default_rng(seed_sequence)
    moments = [RunningMoments() for _ in phis]
    dropped = 0
    remaining = n_draws
    while remaining > 0:
        size = min(chunk_size, remaining)
        points = p.sample(size, rng)
        p_values = p.pdf(points)
        support = p_values > 0
        dropped += int(size - support.sum())
        ratio = q.pdf(points[support]) / p_values[support]
        for index, phi in enumerate(phis):
            moments[index] = moments[index].merge(RunningMoments.of(_integrand(phi, ratio)))
        remaining -= size
    return moments, dropped


def mc_truths(p: DensitySpec, q: DensitySpec, phis: Sequence[PhiSpec], n_draws: int = 10_000_000,
              seed: int = 0, workers: int = 1, chunk_size: int = DEFAULT_CHUNK_SIZE) -> List[OracleResult]:
    """Importance-form estimates E_{x~p}[phi(q(x)/p(x))] for several discrepancies from one set of draws

    Draws are split across `workers` with sub-seeds spawned from `seed`; the
    result is deterministic for a given (seed, workers) pair.
    """
    if p.dimension != q.dimension:
        raise InvalidDimensionError(f"Densities have dimensions {p.dimension} and {q.dimension}")
    if n_draws < 2:
        raise DensitySpecError(f"Oracle needs at least 2 draws, got {n_draws}")
    workers = max(1, min(int(workers), n_draws))
    started = time.perf_counter()
    shares = [n_draws // workers + (1 if i < n_draws % workers else 0) for i in range(workers)]
    seeds = np.random.SeedSequence(int(seed)).spawn(workers)

    logger.info(f"Oracle: {n_draws} draws over {workers} workers for {', '.join(phi.label for phi in phis)}")
    try:
        if workers == 1:
            partials = [_worker(p, q, phis, shares[0], seeds[0], chunk_size)]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                partials = list(pool.map(
                    lambda task: _worker(p, q, phis, task[0], task[1], chunk_size), zip(shares, seeds)
                ))
    except Exception as e:
        logger.error(f"Error running Monte Carlo oracle: {str(e)}")
        raise

    dropped = sum(d for _, d in partials)
    if dropped:
        logger.warning(f"Oracle dropped {dropped} draws where the sampling density vanished")

    results = []
    for index, phi in enumerate(phis):
        moments = RunningMoments()
        for worker_moments, _ in partials:
            moments = moments.merge(worker_moments[index])
        if not math.isfinite(moments.mean):
            raise SingularMassError(f"Discrepancy '{phi.label}' is infinite: q vanishes where p does not")
        estimate, se = _finish(phi, moments)
        results.append(OracleResult(phi=phi, estimate=estimate, se=se, n_draws=moments.count,
                                    workers=workers, seed=int(seed)))
    logger.info(f"Oracle finished in {time.perf_counter() - started:.2f}s: " + ", ".join(
        f"{r.phi.label}={r.estimate:.4f}±{r.se:.4f}" for r in results
    ))
    return results


def mc_truth(p: DensitySpec, q: DensitySpec, phi: PhiSpec, n_draws: int = 10_000_000,
             seed: int = 0, workers: int = 1, chunk_size: int = DEFAULT_CHUNK_SIZE) -> OracleResult:
    return mc_truths(p, q, [phi], n_draws, seed, workers, chunk_size)[0]


def mc_normalization(spec: DensitySpec, n_draws: int = 100_000, seed: int = 0) -> Tuple[float, float]:
    """Integral of the density over the unit cube by uniform draws, with its standard error"""
    rng = np.random.default_rng(seed)
    moments = RunningMoments.of(spec.pdf(rng.random((n_draws, spec.dimension))))
    return moments.mean, moments.standard_error


def density_mass_oracle(p: DensitySpec, q: DensitySpec) -> MassOracle:
    """Exact (P(r), Q(r)) for dyadic regions"""
    if p.dimension != q.dimension:
        raise InvalidDimensionError(f"Densities have dimensions {p.dimension} and {q.dimension}")

    def oracle(region: Region) -> Tuple[float, float]:
        return p.region_mass(region), q.region_mass(region)

    return oracle
