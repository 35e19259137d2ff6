"""
Metropolis-Hastings sampler over coupled binary partitions

The chain moves the depth by +/-1. Extend moves draw a (region, axis) cut
either uniformly or guided by the marginal-posterior ratio of each cut;
shrink moves drop the last action of the decision sequence.
"""
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.special import gammaln, logsumexp

from ..models.chain_data import ChainConfig, ProposalKind, Trace, TraceRecord
from ..models.errors import DepthLimitError, InvalidDimensionError
from ..models.model_data import Hyperparams, Theta
from ..models.partition import MAX_EXPONENT, Action, Partition, Region
from ..models.sample_data import CountPair, Sample
from .counting import child_counts, count, recount_extend, recount_shrink
from .posterior import LOG2, PosteriorModel

logger = logging.getLogger(__name__)

WEIGHT_CACHE_LIMIT = 200_000


@dataclass
class Proposal:
    theta: Theta
    forward_log_prob: float
    reverse_log_prob: float
    move: str  # "extend" or "shrink"
    action: Action


def _log(probability: float) -> float:
    return math.log(probability) if probability > 0 else -math.inf


def shared_dimension(x: Sample, y: Sample) -> int:
    if x.size and y.size and x.dimension != y.dimension:
        raise InvalidDimensionError(f"Samples have dimensions {x.dimension} and {y.dimension}")
    dimension = x.dimension if x.size else y.dimension
    if dimension < 1:
        raise InvalidDimensionError("Both samples are empty; the dimension is unknown")
    return dimension


def chain_seed(master_seed: int, chain_index: int) -> int:
    """Seed of replica `chain_index`: SeedSequence([master_seed, chain_index]) hashed to 63 bits"""
    state = np.random.SeedSequence([int(master_seed), int(chain_index)]).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


class PartitionSampler:
    """Proposal kernels, acceptance ratio and chain driver for one chain"""

    def __init__(self, hyperparams: Hyperparams, proposal: ProposalKind = ProposalKind.GUIDED):
        self.hyperparams = hyperparams
        self.proposal = ProposalKind(proposal)
        self.model = PosteriorModel(hyperparams)
        self._local_weights: Dict[Region, np.ndarray] = {}
        self._cached_points: Tuple[Optional[np.ndarray], Optional[np.ndarray]] = (None, None)

    def reset_cache(self):
        self._local_weights.clear()
        self._cached_points = (None, None)

    def _bind_cache(self, counts: CountPair):
        """Drop cached weights computed on other point arrays"""
        x_cached, y_cached = self._cached_points
        if counts.x_points is not x_cached or counts.y_points is not y_cached:
            self._local_weights.clear()
            self._cached_points = (counts.x_points, counts.y_points)

    def initial_state(self, x: Sample, y: Sample, rng: np.random.Generator) -> Theta:
        partition = Partition.root(shared_dimension(x, y))
        counts = count(x, y, partition)
        return Theta(
            partition=partition,
            masses=self.model.sample_masses(counts, rng),
            counts=counts,
            log_marginal=self.model.log_marginal(partition, counts),
        )

    def _region_log_weights(self, region: Region, counts: CountPair, index: int) -> np.ndarray:
        """Candidate-dependent part of the extend ratio for the d cuts of one region"""
        self._bind_cache(counts)
        cached = self._local_weights.get(region)
        if cached is not None:
            return cached
        delta = self.hyperparams.delta
        x_members = counts.x_members[index]
        y_members = counts.y_members[index]
        n1 = x_members.size
        n2 = y_members.size
        x_lower, x_upper = child_counts(counts.x_points, x_members, region)
        y_lower, y_upper = child_counts(counts.y_points, y_members, region)
        weights = (n1 + n2) * LOG2 + (
            gammaln(delta + x_lower) + gammaln(delta + x_upper) - gammaln(delta + n1)
            + gammaln(delta + y_lower) + gammaln(delta + y_upper) - gammaln(delta + n2)
        )
        weights = np.where(np.asarray(region.exponents) < MAX_EXPONENT, weights, -np.inf)
        if len(self._local_weights) >= WEIGHT_CACHE_LIMIT:
            self._local_weights.clear()
        self._local_weights[region] = weights
        return weights

    def _valid_mask(self, partition: Partition) -> np.ndarray:
        return np.array(
            [[exp < MAX_EXPONENT for exp in region.exponents] for region in partition.regions]
        ).reshape(-1)

    def extend_log_weights(self, theta: Theta) -> np.ndarray:
        """Normalised log-probabilities of the l*d extensions, row-major in (region, axis)"""
        partition = theta.partition
        if partition.depth >= self.hyperparams.max_depth:
            raise DepthLimitError(f"Depth cap {self.hyperparams.max_depth} reached")
        if self.proposal == ProposalKind.UNIFORM:
            valid = self._valid_mask(partition)
            return np.where(valid, -math.log(valid.sum()), -np.inf)
        log_weights = np.concatenate([
            self._region_log_weights(region, theta.counts, index)
            for index, region in enumerate(partition.regions)
        ])
        return log_weights - logsumexp(log_weights)

    def extend_weights(self, theta: Theta) -> np.ndarray:
        return np.exp(self.extend_log_weights(theta))

    @staticmethod
    def action_index(action: Action, dimension: int) -> int:
        return (action.target - 1) * dimension + (action.axis - 1)

    def _moved_state(self, partition: Partition, counts: CountPair, rng: np.random.Generator) -> Theta:
        return Theta(
            partition=partition,
            masses=self.model.sample_masses(counts, rng),
            counts=counts,
            log_marginal=self.model.log_marginal(partition, counts),
        )

    def propose(self, theta: Theta, rng: np.random.Generator) -> Proposal:
        """Draw a +/-1 depth move and return both transition log-probabilities"""
        depth = theta.depth
        partition = theta.partition
        h = self.hyperparams
        if rng.random() < h.up_probability(depth):
            log_weights = self.extend_log_weights(theta)
            cumulative = np.cumsum(np.exp(log_weights))
            index = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"))
            index = min(index, cumulative.size - 1)
            while not np.isfinite(log_weights[index]):
                index -= 1
            action = Action(index // partition.dimension + 1, index % partition.dimension + 1)
            new_partition = partition.extend(action)
            new_counts = recount_extend(theta.counts, partition, action)
            forward = _log(h.up_probability(depth)) + float(log_weights[index])
            reverse = _log(h.down_probability(depth + 1))
            return Proposal(self._moved_state(new_partition, new_counts, rng), forward, reverse, "extend", action)

        new_partition, action = partition.shrink()
        new_counts = recount_shrink(theta.counts, partition)
        new_theta = self._moved_state(new_partition, new_counts, rng)
        forward = _log(h.down_probability(depth))
        reverse_weights = self.extend_log_weights(new_theta)
        reverse = _log(h.up_probability(depth - 1)) + float(
            reverse_weights[self.action_index(action, partition.dimension)]
        )
        return Proposal(new_theta, forward, reverse, "shrink", action)

    @staticmethod
    def accept_prob(theta: Theta, proposed: Theta, forward_log_prob: float, reverse_log_prob: float) -> float:
        """min{1, p(A', l') q(back) / (p(A, l) q(forth))}; the mass terms cancel"""
        log_ratio = proposed.log_marginal + reverse_log_prob - theta.log_marginal - forward_log_prob
        if np.isnan(log_ratio):
            return 0.0
        return 1.0 if log_ratio >= 0 else math.exp(log_ratio)

    def run(self, x: Sample, y: Sample, config: ChainConfig) -> Trace:
        rng = np.random.default_rng(config.seed)
        self.reset_cache()
        trace = Trace(config=config, proposal=self.proposal)
        state = self.initial_state(x, y, rng)
        cap_warned = False
        started = time.perf_counter()

        for iteration in range(config.iterations):
            proposal = self.propose(state, rng)
            trace.proposals += 1
            accepted = rng.random() < self.accept_prob(
                state, proposal.theta, proposal.forward_log_prob, proposal.reverse_log_prob
            )
            if accepted:
                state = proposal.theta
                trace.acceptances += 1
                if state.depth >= self.hyperparams.max_depth:
                    trace.depth_cap_hits += 1
                    if not cap_warned:
                        logger.warning(f"Chain reached the depth cap {self.hyperparams.max_depth}")
                        cap_warned = True

            if config.is_retained(iteration):
                # Gibbs refresh of the masses from their full conditional
                masses = self.model.sample_masses(state.counts, rng)
                trace.records.append(TraceRecord(
                    iteration=iteration,
                    depth=state.depth,
                    sequence=state.partition.to_sequence_string(),
                    masses=masses,
                    log_marginal=state.log_marginal,
                    accepted=accepted,
                ))

            if config.progress_every and (iteration + 1) % config.progress_every == 0:
                logger.info(
                    f"Iteration {iteration + 1}/{config.iterations}: depth {state.depth}, "
                    f"acceptance {trace.acceptance_rate:.3f}"
                )

        logger.info(
            f"Chain finished: {config.iterations} iterations, {self.proposal.value} kernel, "
            f"acceptance {trace.acceptance_rate:.3f}, mean depth {trace.mean_depth:.2f}, "
            f"{time.perf_counter() - started:.2f}s"
        )
        return trace


def run_chain(x: Sample, y: Sample, config: ChainConfig) -> Trace:
    """Run one chain from the root partition; deterministic given config.seed"""
    proposal = config.resolved_proposal(shared_dimension(x, y))
    return PartitionSampler(config.hyperparams, proposal).run(x, y, config)


def run_chains(x: Sample, y: Sample, config: ChainConfig, chains: int = 1, threads: int = 1) -> List[Trace]:
    """Independent replicas with seeds derived from config.seed by chain_seed"""
    configs = [
        ChainConfig(
            iterations=config.iterations,
            burnin=config.burnin,
            thin=config.thin,
            seed=chain_seed(config.seed, index),
            proposal=config.proposal,
            hyperparams=config.hyperparams,
            progress_every=config.progress_every,
        )
        for index in range(chains)
    ]
    if threads <= 1 or chains <= 1:
        return [run_chain(x, y, c) for c in configs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda c: run_chain(x, y, c), configs))
