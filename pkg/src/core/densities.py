"""
Synthetic densities on the unit cube: evaluation, sampling and exact region masses
"""
import logging
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from ..models.errors import DensitySpecError, InvalidDimensionError, OutOfDomainError
from ..models.partition import Action, Partition, Region
from .posterior import PiecewiseDensity

logger = logging.getLogger(__name__)

_MIXTURE_TERM = re.compile(r"\+(?=[-+]?[\d.]+(?:[eE][-+]?\d+)?\*)")


class DensitySpec(ABC):
    """A density on [0,1]^d that can be evaluated, sampled and integrated over dyadic boxes"""

    dimension: int

    @abstractmethod
    def pdf(self, points: np.ndarray) -> np.ndarray:
        """Density at each row of an (n, d) array"""

    @abstractmethod
    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n i.i.d. draws as an (n, d) array"""

    @abstractmethod
    def region_mass(self, region: Region) -> float:
        """Exact probability of a dyadic region"""

    @abstractmethod
    def describe(self) -> str:
        """Text form accepted by parse_density"""

    def evaluate(self, point: Sequence[float]) -> float:
        x = np.asarray(point, dtype=float).reshape(1, -1)
        if x.shape[1] != self.dimension:
            raise InvalidDimensionError(f"Point has {x.shape[1]} coordinates, density has {self.dimension}")
        if np.any(x < 0) or np.any(x > 1):
            raise OutOfDomainError(f"Point {x.ravel().tolist()} lies outside the unit cube")
        return float(self.pdf(x)[0])

    def _check_points(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.dimension:
            raise InvalidDimensionError(f"Points have {points.shape[1]} columns, density has {self.dimension}")
        return points


class Uniform(DensitySpec):
    def __init__(self, dimension: int):
        if dimension < 1:
            raise DensitySpecError(f"Uniform density needs dimension >= 1, got {dimension}")
        self.dimension = dimension

    def pdf(self, points):
        points = self._check_points(points)
        inside = np.all((points >= 0) & (points <= 1), axis=1)
        return inside.astype(float)

    def sample(self, n, rng):
        return rng.random((n, self.dimension))

    def region_mass(self, region):
        return region.volume

    def describe(self):
        return f"uniform:{self.dimension}"


class BetaProduct(DensitySpec):
    """Independent beta marginals, one (a, b) pair per axis"""

    def __init__(self, shapes: Sequence[Tuple[float, float]]):
        shapes = [(float(a), float(b)) for a, b in shapes]
        if not shapes:
            raise DensitySpecError("Beta product needs at least one (a, b) pair")
        if any(a <= 0 or b <= 0 for a, b in shapes):
            raise DensitySpecError(f"Beta shapes must be positive, got {shapes}")
        self.shapes = shapes
        self.dimension = len(shapes)
        self._a = np.array([a for a, _ in shapes])
        self._b = np.array([b for _, b in shapes])

    def pdf(self, points):
        points = self._check_points(points)
        return np.prod(stats.beta.pdf(points, self._a, self._b), axis=1)

    def sample(self, n, rng):
        return np.column_stack([rng.beta(a, b, size=n) for a, b in self.shapes]) if n else np.empty((0, self.dimension))

    def region_mass(self, region):
        lower = np.array(region.lower)
        upper = np.array(region.upper)
        return float(np.prod(stats.beta.cdf(upper, self._a, self._b) - stats.beta.cdf(lower, self._a, self._b)))

    def describe(self):
        if self.dimension == 1:
            return f"beta:{self.shapes[0][0]:g},{self.shapes[0][1]:g}"
        return "betaprod:" + ",".join(f"{a:g},{b:g}" for a, b in self.shapes)


class TruncGaussian(DensitySpec):
    """Product of normals N(mu_j, scale^2) truncated to [0, 1] on every axis"""

    def __init__(self, mean, scale: float, dimension: Optional[int] = None):
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        if dimension is not None and mean.size == 1:
            mean = np.full(dimension, mean[0])
        if dimension is not None and mean.size != dimension:
            raise DensitySpecError(f"Mean has {mean.size} entries for dimension {dimension}")
        if not scale > 0:
            raise DensitySpecError(f"Gaussian scale must be positive, got {scale}")
        self.mean = mean
        self.scale = float(scale)
        self.dimension = int(mean.size)
        self._cdf_lo = stats.norm.cdf((0.0 - mean) / self.scale)
        self._cdf_hi = stats.norm.cdf((1.0 - mean) / self.scale)
        self._box_mass = self._cdf_hi - self._cdf_lo
        if np.any(self._box_mass <= 0):
            raise DensitySpecError("Truncation box carries no Gaussian mass")

    def pdf(self, points):
        points = self._check_points(points)
        inside = np.all((points >= 0) & (points <= 1), axis=1)
        axis_density = stats.norm.pdf((points - self.mean) / self.scale) / self.scale / self._box_mass
        return np.where(inside, np.prod(axis_density, axis=1), 0.0)

    def sample(self, n, rng):
        u = rng.random((n, self.dimension))
        quantile = self._cdf_lo + u * self._box_mass
        return np.clip(self.mean + self.scale * stats.norm.ppf(quantile), 0.0, 1.0)

    def region_mass(self, region):
        lower = stats.norm.cdf((np.array(region.lower) - self.mean) / self.scale)
        upper = stats.norm.cdf((np.array(region.upper) - self.mean) / self.scale)
        return float(np.prod((upper - lower) / self._box_mass))

    def describe(self):
        if np.all(self.mean == self.mean[0]):
            return f"truncnorm:{self.mean[0]:g},{self.scale:g},{self.dimension}"
        return "truncnorm:" + ";".join(f"{m:g}" for m in self.mean) + f",{self.scale:g}"


class Mixture(DensitySpec):
    """Weighted sum of component densities; signed weights are allowed if the sum stays non-negative"""

    def __init__(self, weights: Sequence[float], components: Sequence[DensitySpec]):
        weights = np.asarray(weights, dtype=float)
        if weights.size != len(components) or weights.size == 0:
            raise DensitySpecError(f"{weights.size} weights for {len(components)} components")
        if abs(weights.sum() - 1.0) > 1e-9:
            raise DensitySpecError(f"Mixture weights must sum to 1, got {weights.sum()}")
        dimensions = {c.dimension for c in components}
        if len(dimensions) != 1:
            raise DensitySpecError(f"Mixture components disagree on dimension: {sorted(dimensions)}")
        self.weights = weights
        self.components = list(components)
        self.dimension = dimensions.pop()
        self._positive = weights > 0

    @property
    def is_signed(self) -> bool:
        return bool(np.any(self.weights < 0))

    def pdf(self, points):
        points = self._check_points(points)
        total = sum(w * c.pdf(points) for w, c in zip(self.weights, self.components))
        return np.clip(total, 0.0, None)

    def _sample_positive_part(self, n, rng):
        weights = np.where(self._positive, self.weights, 0.0)
        sizes = rng.multinomial(n, weights / weights.sum())
        parts = [c.sample(k, rng) for c, k in zip(self.components, sizes) if k]
        points = np.vstack(parts) if parts else np.empty((0, self.dimension))
        return points[rng.permutation(points.shape[0])]

    def sample(self, n, rng):
        if not self.is_signed:
            return self._sample_positive_part(n, rng)
        # rejection from the positive part, which dominates the signed sum
        accepted: List[np.ndarray] = []
        remaining = n
        positive_weight = self.weights[self._positive].sum()
        while remaining > 0:
            batch = max(int(remaining * positive_weight * 1.2), 16)
            candidates = self._sample_positive_part(batch, rng)
            envelope = sum(w * c.pdf(candidates) for w, c, keep in
                           zip(self.weights, self.components, self._positive) if keep)
            keep = rng.random(batch) * envelope <= self.pdf(candidates)
            accepted.append(candidates[keep][:remaining])
            remaining -= accepted[-1].shape[0]
        return np.vstack(accepted) if accepted else np.empty((0, self.dimension))

    def region_mass(self, region):
        return float(sum(w * c.region_mass(region) for w, c in zip(self.weights, self.components)))

    def describe(self):
        return "mix:" + "+".join(f"{w:g}*{c.describe()}" for w, c in zip(self.weights, self.components))


class PiecewiseConstant(DensitySpec):
    """Density m_i / |r_i| on the regions of a binary partition"""

    def __init__(self, partition: Partition, masses: Sequence[float]):
        masses = np.asarray(masses, dtype=float)
        if masses.shape != (partition.depth,) or np.any(masses < 0) or abs(masses.sum() - 1.0) > 1e-9:
            raise DensitySpecError(f"Masses {masses.tolist()} do not form a distribution over {partition.depth} regions")
        self.partition = partition
        self.masses = masses
        self.dimension = partition.dimension
        self._density = PiecewiseDensity(partition, masses)

    def pdf(self, points):
        return self._density.evaluate(self._check_points(points))

    def sample(self, n, rng):
        labels = rng.choice(self.partition.depth, size=n, p=self.masses)
        lower = np.array([r.lower for r in self.partition.regions])
        upper = np.array([r.upper for r in self.partition.regions])
        u = rng.random((n, self.dimension))
        return lower[labels] + u * (upper[labels] - lower[labels])

    def region_mass(self, region):
        return float(sum(
            m * region.overlap_volume(r) / r.volume
            for m, r in zip(self.masses, self.partition.regions) if m > 0
        ))

    def describe(self):
        return f"piecewise:{self.partition.to_sequence_string()}|" + ",".join(f"{m:.17g}" for m in self.masses)


def _numbers(text: str, spec: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise DensitySpecError(f"Non-numeric parameter in density '{spec}'")


def parse_density(text: str) -> DensitySpec:
    """Parse beta:a,b | betaprod:a1,b1,... | truncnorm:mu,scale,d | uniform:d | mix:w*SPEC+... | piecewise:SEQ|m,..."""
    spec = text.strip()
    kind, _, body = spec.partition(":")
    kind = kind.lower()
    try:
        if kind == "uniform":
            return Uniform(int(body))
        if kind == "beta":
            values = _numbers(body, spec)
            if len(values) != 2:
                raise DensitySpecError(f"beta needs two shapes, got '{spec}'")
            return BetaProduct([tuple(values)])
        if kind == "betaprod":
            values = _numbers(body, spec)
            if len(values) % 2 or not values:
                raise DensitySpecError(f"betaprod needs (a, b) pairs, got '{spec}'")
            return BetaProduct(list(zip(values[0::2], values[1::2])))
        if kind == "truncnorm":
            head, _, rest = body.partition(",")
            if ";" in head:
                scale = _numbers(rest, spec)
                return TruncGaussian([float(v) for v in head.split(";")], scale[0])
            values = _numbers(body, spec)
            if len(values) != 3:
                raise DensitySpecError(f"truncnorm needs mean,scale,dimension, got '{spec}'")
            return TruncGaussian(values[0], values[1], int(values[2]))
        if kind == "mix":
            weights, components = [], []
            for term in _MIXTURE_TERM.split(body):
                weight, star, component = term.partition("*")
                if not star:
                    raise DensitySpecError(f"Mixture term '{term}' lacks a weight")
                weights.append(float(weight))
                components.append(parse_density(component))
            return Mixture(weights, components)
        if kind == "piecewise":
            sequence, bar, masses = body.partition("|")
            if not bar:
                raise DensitySpecError(f"piecewise needs SEQUENCE|masses, got '{spec}'")
            return PiecewiseConstant(Partition.from_sequence_string(sequence), _numbers(masses, spec))
    except DensitySpecError:
        raise
    except ValueError as e:
        raise DensitySpecError(f"Invalid density '{spec}': {str(e)}")
    raise DensitySpecError(f"Unknown density kind '{kind}' in '{spec}'")


def sanity_partition() -> Partition:
    """Six dyadic cells of the unit square used by the piecewise sanity pair

    Region order: [0,1/2]x[0,1/2], [1/2,1]x[0,1/2], [0,1/2]x[1/2,1],
    [1/2,3/4]x[1/2,1], [3/4,1]x[1/2,3/4], [3/4,1]x[3/4,1].
    """
    return Partition.replay(2, [Action(1, 1), Action(1, 2), Action(2, 2), Action(4, 1), Action(5, 2)])


def sanity_coarse_partition() -> Partition:
    return Partition.replay(2, [Action(1, 1), Action(1, 2)])


def signed_sanity_pair() -> Tuple[DensitySpec, DensitySpec]:
    """Pair whose equal-weight mixture is exactly uniform"""
    bump = BetaProduct([(2, 2), (2, 2)])
    return (
        Mixture([9 / 5, -4 / 5], [Uniform(2), bump]),
        Mixture([1 / 5, 4 / 5], [Uniform(2), bump]),
    )


def piecewise_sanity_pair() -> Tuple[DensitySpec, DensitySpec]:
    """Both densities live on sanity_partition(); the first is also constant on a coarser one"""
    partition = sanity_partition()
    volumes = np.array([r.volume for r in partition.regions])
    # heights per region in the replay order above
    coarse = np.array([2 / 3, 1.0, 4 / 3, 1.0, 1.0, 1.0])
    fine = np.array([2 / 3, 1 / 2, 4 / 3, 1.0, 4 / 3, 8 / 3])
    return PiecewiseConstant(partition, coarse * volumes), PiecewiseConstant(partition, fine * volumes)


def skewed_mixture_pair(dimension: int) -> Tuple[DensitySpec, DensitySpec]:
    return (
        Mixture([24 / 25, 1 / 25], [BetaProduct([(1, 5)] * dimension), Uniform(dimension)]),
        Mixture([49 / 50, 1 / 50], [BetaProduct([(5, 1)] * dimension), Uniform(dimension)]),
    )


@dataclass
class ExperimentSetup:
    """Named pair of densities with published reference values"""
    name: str
    p: DensitySpec
    q: DensitySpec
    truths: Dict[str, float] = field(default_factory=dict)
    sigma: Optional[float] = None
    description: str = ""

    @property
    def dimension(self) -> int:
        return self.p.dimension


def _build_setups() -> Dict[str, ExperimentSetup]:
    signed_p, signed_q = signed_sanity_pair()
    piece_p, piece_q = piecewise_sanity_pair()
    skew5_p, skew5_q = skewed_mixture_pair(5)
    skew10_p, skew10_q = skewed_mixture_pair(10)
    four_truths = ("tv", "hellinger", "kl", "renyi:2")
    setups = [
        ExperimentSetup(
            "beta-1d", BetaProduct([(6, 5)]), BetaProduct([(5, 6)]),
            dict(zip(four_truths, (0.2461, 0.2207, 0.2000, 0.4056))),
            description="beta(6,5) against beta(5,6)",
        ),
        ExperimentSetup(
            "beta-mixture-3d",
            parse_density("mix:0.4*betaprod:1,2,2,3,3,4+0.6*betaprod:4,3,3,2,2,1"),
            parse_density("mix:0.4*betaprod:1,3,3,5,5,7+0.6*betaprod:7,5,5,3,3,1"),
            dict(zip(four_truths, (0.2301, 0.2129, 0.2133, 0.6769))),
            sigma=4.0,
            description="two-component beta-product mixtures in 3 dimensions",
        ),
        ExperimentSetup(
            "truncnorm-4d", TruncGaussian(1 / 3, 1 / 5, 4), TruncGaussian(1 / 2, 1 / 5, 4),
            {"kl": 2.2196},
            description="truncated Gaussians in [0,1]^4, 500 points each in the variance study",
        ),
        ExperimentSetup(
            "uniform-vs-normal-3d", Uniform(3), TruncGaussian(0.0, 1 / 3, 3),
            description="uniform against a truncated N(0, (1/3)^2 I)",
        ),
        ExperimentSetup(
            "normal-shift-3d", TruncGaussian(0.0, 1 / 2, 3), TruncGaussian(1.0, 1 / 2, 3),
            description="truncated N(0, (1/2)^2 I) against truncated N(1, (1/2)^2 I)",
        ),
        ExperimentSetup(
            "skewed-mixture-5d", skew5_p, skew5_q,
            dict(zip(four_truths, (0.9756, 0.9520, 7.6365, 8.9440))),
            description="beta(1,5) and beta(5,1) products with a uniform floor, 5 dimensions",
        ),
        ExperimentSetup(
            "skewed-mixture-10d", skew10_p, skew10_q,
            dict(zip(four_truths, (0.9790, 0.9779, 11.3819, 13.8341))),
            description="beta(1,5) and beta(5,1) products with a uniform floor, 10 dimensions",
        ),
        ExperimentSetup(
            "beta-histogram-2d", BetaProduct([(3, 5), (3, 5)]), Uniform(2),
            dict(zip(four_truths, (0.5518, 0.5204, 0.8604, 1.0769))),
            description="beta(3,5)^2 against uniform; reference values are qualitative",
        ),
        ExperimentSetup(
            "sanity-signed", signed_p, signed_q,
            description="pair whose pooled sample is uniform",
        ),
        ExperimentSetup(
            "sanity-piecewise", piece_p, piece_q,
            description="piecewise constant pair, the second finer than the first",
        ),
    ]
    return {setup.name: setup for setup in setups}


NAMED_SETUPS: Dict[str, ExperimentSetup] = _build_setups()


def get_setup(name: str) -> ExperimentSetup:
    try:
        return NAMED_SETUPS[name]
    except KeyError:
        raise DensitySpecError(f"Unknown setup '{name}'; available: {', '.join(sorted(NAMED_SETUPS))}")
