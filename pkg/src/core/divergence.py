"""
Discrepancy functionals on coupled mass vectors and posterior summaries
"""
import logging
import math
from fractions import Fraction
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp, rel_entr

from ..models.chain_data import Trace
from ..models.divergence_data import PhiKind, PhiSpec, PosteriorSummary
from ..models.errors import EmptyTraceError, InvalidDimensionError, SingularMassError
from ..models.model_data import MassPair
from ..models.partition import Partition, Region
from ..models.sample_data import Sample

logger = logging.getLogger(__name__)

MassOracle = Callable[[Region], Tuple[float, float]]


def discrepancy_from_vectors(phi: PhiSpec, m1: np.ndarray, m2: np.ndarray) -> float:
    """Partition plug-in value sum_i m1_i phi(m2_i / m1_i) in the reporting convention of each kind"""
    m1 = np.asarray(m1, dtype=float)
    m2 = np.asarray(m2, dtype=float)
    if phi.kind == PhiKind.TOTAL_VARIATION:
        return 0.5 * float(np.abs(m1 - m2).sum())
    if phi.kind == PhiKind.HELLINGER:
        affinity = float(np.sqrt(m1 * m2).sum())
        return math.sqrt(max(0.0, 1.0 - affinity))
    if phi.kind == PhiKind.KL:
        value = float(rel_entr(m1, m2).sum())
        if not np.isfinite(value):
            raise SingularMassError("KL divergence needs m2 > 0 wherever m1 > 0")
        return value
    if phi.kind == PhiKind.RENYI:
        alpha = phi.alpha
        support = m1 > 0
        if np.any(m2[support] == 0) and alpha > 1:
            raise SingularMassError(f"Renyi divergence of order {alpha} needs m2 > 0 wherever m1 > 0")
        with np.errstate(divide="ignore"):
            log_terms = alpha * np.log(m1[support]) + (1.0 - alpha) * np.log(m2[support])
        return float(logsumexp(log_terms)) / (alpha - 1.0)
    if np.any(m1 == 0):
        raise SingularMassError(f"Discrepancy '{phi.label}' divides by m1, which has zero entries")
    return float((m1 * np.asarray(phi.function(m2 / m1), dtype=float)).sum())


def discrepancy(phi: PhiSpec, masses: MassPair) -> float:
    return discrepancy_from_vectors(phi, masses.m1, masses.m2)


def effective_sample_size(draws: np.ndarray) -> float:
    """ESS from the initial positive sequence of autocorrelation pairs"""
    n = draws.size
    if n < 4:
        return float(n)
    centered = draws - draws.mean()
    variance = float(centered @ centered) / n
    if variance <= 0:
        return float(n)
    spectrum = np.fft.rfft(centered, n=2 * n)
    autocov = np.fft.irfft(spectrum * np.conj(spectrum))[:n] / n
    rho = autocov / variance
    total = 0.0
    for t in range(0, n - 1, 2):
        pair = rho[t] + rho[t + 1]
        if pair <= 0:
            break
        total += pair
    tau = max(2.0 * total - 1.0, 1.0 / n)
    return float(min(n / tau, n))


def summarize_draws(phi: PhiSpec, draws: np.ndarray, level: float = 0.95) -> PosteriorSummary:
    if draws.size == 0:
        raise EmptyTraceError("Cannot summarise an empty trace")
    if not 0.0 < level < 1.0:
        raise ValueError(f"Credible level must lie in (0, 1), got {level}")
    tail = (1.0 - level) / 2.0
    ci_low, median, ci_high = np.quantile(draws, [tail, 0.5, 1.0 - tail])
    return PosteriorSummary(
        phi=phi,
        median=float(median),
        mean=float(draws.mean()),
        std=float(draws.std(ddof=1)) if draws.size > 1 else 0.0,
        ci_low=float(ci_low),
        ci_high=float(ci_high),
        level=level,
        ess=effective_sample_size(draws),
        draws=draws,
    )


def summarize(trace: Trace, phi: PhiSpec, level: float = 0.95) -> PosteriorSummary:
    """Posterior summary of one discrepancy over every retained mass draw"""
    if not trace.records:
        raise EmptyTraceError("Cannot summarise an empty trace")
    draws = np.array([discrepancy(phi, record.masses) for record in trace.records])
    return summarize_draws(phi, draws, level)


def exact_masses(partition: Partition, mass_oracle: MassOracle) -> MassPair:
    pairs = np.array([mass_oracle(region) for region in partition.regions], dtype=float)
    pairs = np.clip(pairs, 0.0, None)
    return MassPair(pairs[:, 0] / pairs[:, 0].sum(), pairs[:, 1] / pairs[:, 1].sum())


def plugin_lower_bound(phi: PhiSpec, partition: Partition, mass_oracle: MassOracle) -> float:
    """Discrepancy of the exact region masses, a lower bound of the true divergence"""
    try:
        masses = exact_masses(partition, mass_oracle)
    except Exception as e:
        logger.error(f"Mass oracle failed on partition {partition.to_sequence_string()}: {str(e)}")
        raise
    return discrepancy(phi, masses)


def push_masses(source: Partition, masses: Sequence[float], target: Partition) -> np.ndarray:
    """Spread masses of `source` over a refinement in proportion to cell volume"""
    masses = np.asarray(masses, dtype=float)
    pushed = np.empty(target.depth)
    for index, cell in enumerate(target.regions):
        owner = source.locate(cell.center) - 1
        pushed[index] = masses[owner] * cell.volume / source.regions[owner].volume
    return pushed


def two_step_estimate(phi: PhiSpec, partition_a: Partition, masses_a: Sequence[float],
                      partition_b: Partition, masses_b: Sequence[float]) -> float:
    """Naive baseline: fit each density on its own partition, compare on a common refinement"""
    if partition_a.dimension != partition_b.dimension:
        raise InvalidDimensionError(
            f"Partitions have dimensions {partition_a.dimension} and {partition_b.dimension}"
        )
    refinement = partition_a.common_refinement(partition_b)
    m1 = push_masses(partition_a, masses_a, refinement)
    m2 = push_masses(partition_b, masses_b, refinement)
    return discrepancy_from_vectors(phi, m1, m2)


def augment_count(size: int, fraction: float) -> int:
    """Exact ceil(fraction * size / (1 - fraction)), reading fraction as the nearest short rational"""
    ratio = Fraction(fraction).limit_denominator(10**6)
    return -(-ratio.numerator * size // (ratio.denominator - ratio.numerator))


def augment_uniform(x: Sample, y: Sample, fraction: float,
                    rng: Optional[np.random.Generator] = None, seed: int = 0) -> Tuple[Sample, Sample]:
    """Append ceil(fraction * n / (1 - fraction)) uniform points to each sample

    Smooths the masses towards uniform, trading bias for variance in the
    division-based discrepancies.
    """
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"Augmentation fraction must lie in [0, 1), got {fraction}")
    if fraction == 0.0:
        return x, y
    rng = rng or np.random.default_rng(seed)
    augmented = []
    for sample in (x, y):
        extra = augment_count(sample.size, fraction)
        if extra == 0:
            augmented.append(sample)
            continue
        noise = rng.random((extra, sample.dimension))
        augmented.append(sample.with_points(np.vstack([sample.points, noise])))
    logger.info(f"Augmented samples with uniform fraction {fraction}: sizes {augmented[0].size}, {augmented[1].size}")
    return augmented[0], augmented[1]
