"""
Coupled binary partition posterior: prior, likelihood and Dirichlet mass draws

All quantities are computed in log space with log-Gamma so that products
over regions become sums.
"""
import logging
import math
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from ..models.errors import AlignmentError
from ..models.model_data import Hyperparams, MassPair
from ..models.partition import Partition
from ..models.sample_data import CountPair

logger = logging.getLogger(__name__)

LOG2 = math.log(2.0)


def log_multinomial_beta(z: np.ndarray) -> float:
    """log of prod Gamma(z_i) / Gamma(sum z_i)"""
    return float(gammaln(z).sum() - gammaln(z.sum()))


def region_exponents(partition: Partition) -> np.ndarray:
    return np.fromiter((r.total_exponent for r in partition.regions), dtype=float, count=partition.depth)


class PiecewiseDensity:
    """Density equal to m_i / |r_i| on region r_i"""

    def __init__(self, partition: Partition, masses: Sequence[float]):
        masses = np.asarray(masses, dtype=float)
        if masses.shape != (partition.depth,):
            raise AlignmentError(f"{masses.shape[0]} masses for a partition of depth {partition.depth}")
        self.partition = partition
        self.masses = masses
        self.heights = masses / np.array([r.volume for r in partition.regions])

    def __call__(self, point: Sequence[float]) -> float:
        return float(self.heights[self.partition.locate(point) - 1])

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return self.heights[self.partition.assign(points)]

    def integral(self) -> float:
        return float(self.masses.sum())


class PosteriorModel:
    """Unnormalised posterior of the coupled binary partition model"""

    def __init__(self, hyperparams: Hyperparams):
        self.hyperparams = hyperparams

    def _log_depth_prior(self, partition: Partition) -> float:
        depth = partition.depth
        value = -self.hyperparams.sigma * depth
        if self.hyperparams.sequence_prior == "uniform":
            # uniform over the (l-1)! * d^(l-1) sequences of each depth
            value -= gammaln(depth) + (depth - 1) * math.log(partition.dimension)
        return float(value)

    def log_psi(self, partition: Partition, masses: MassPair, counts: CountPair) -> float:
        """log psi(Theta | X, Y), the joint unnormalised posterior including masses"""
        counts.check_alignment(partition.depth)
        if masses.depth != partition.depth:
            raise AlignmentError(f"Masses cover {masses.depth} regions, partition has {partition.depth}")
        delta = self.hyperparams.delta
        n1, n2 = counts.n1, counts.n2
        with np.errstate(divide="ignore"):
            mass_terms = ((delta + n1 - 1) * np.log(masses.m1)).sum() + ((delta + n2 - 1) * np.log(masses.m2)).sum()
        volume_term = LOG2 * float(((n1 + n2) * region_exponents(partition)).sum())
        return self._log_depth_prior(partition) + volume_term + float(mass_terms)

    def log_marginal(self, partition: Partition, counts: CountPair) -> float:
        """log p(A_l, l | X, Y) up to a constant, masses integrated out"""
        counts.check_alignment(partition.depth)
        delta = self.hyperparams.delta
        n1, n2 = counts.n1, counts.n2
        beta_terms = log_multinomial_beta(delta + n1) + log_multinomial_beta(delta + n2)
        volume_term = LOG2 * float(((n1 + n2) * region_exponents(partition)).sum())
        return self._log_depth_prior(partition) + beta_terms + volume_term

    def sample_masses(self, counts: CountPair, rng: np.random.Generator) -> MassPair:
        """Independent Dirichlet(delta + n_ki) draws built from Gamma variates"""
        delta = self.hyperparams.delta
        tiny = np.finfo(float).tiny
        g1 = np.maximum(rng.standard_gamma(delta + counts.n1), tiny)
        g2 = np.maximum(rng.standard_gamma(delta + counts.n2), tiny)
        return MassPair(g1 / g1.sum(), g2 / g2.sum())

    def posterior_mean_masses(self, counts: CountPair) -> MassPair:
        delta = self.hyperparams.delta
        a1 = delta + counts.n1
        a2 = delta + counts.n2
        return MassPair(a1 / a1.sum(), a2 / a2.sum())

    @staticmethod
    def piecewise_density(partition: Partition, masses: Sequence[float]) -> PiecewiseDensity:
        return PiecewiseDensity(partition, masses)
