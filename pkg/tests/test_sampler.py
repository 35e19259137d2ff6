"""
Tests for the Metropolis-Hastings partition sampler
"""
import math
from collections import Counter

import numpy as np
import pytest
from scipy.special import logsumexp

from src.core.counting import count
from src.core.posterior import PosteriorModel
from src.core.sampler import PartitionSampler, chain_seed, run_chain, run_chains
from src.models.chain_data import ChainConfig, ProposalKind
from src.models.errors import ConfigError, DepthLimitError
from src.models.model_data import Hyperparams, Theta
from src.models.partition import Action, Partition
from src.models.sample_data import Sample


def state_at(sampler, partition, x, y, rng):
    counts = count(x, y, partition)
    return Theta(partition, sampler.model.sample_masses(counts, rng), counts,
                 sampler.model.log_marginal(partition, counts))


def propose_until(sampler, theta, rng, move):
    for _ in range(200):
        proposal = sampler.propose(theta, rng)
        if proposal.move == move:
            return proposal
    raise AssertionError(f"no {move} proposal in 200 tries")


def enumerate_sequences(dimension, max_depth):
    found = []

    def walk(partition):
        found.append(partition)
        if partition.depth < max_depth:
            for action in partition.candidate_actions():
                walk(partition.extend(action))

    walk(Partition.root(dimension))
    return found


def exact_distribution(x, y, hyperparams):
    model = PosteriorModel(hyperparams)
    partitions = enumerate_sequences(x.dimension, hyperparams.max_depth)
    log_values = np.array([model.log_marginal(p, count(x, y, p)) for p in partitions])
    probabilities = np.exp(log_values - logsumexp(log_values))
    return {p.to_sequence_string(): float(w) for p, w in zip(partitions, probabilities)}


def visit_distance(trace, exact):
    visits = Counter(r.sequence for r in trace.records)
    total = len(trace.records)
    assert set(visits) <= set(exact)
    return 0.5 * sum(abs(visits.get(key, 0) / total - value) for key, value in exact.items())


class TestExtendWeights:
    def test_no_data_is_uniform(self, empty_pair, rng):
        sampler = PartitionSampler(Hyperparams(), ProposalKind.GUIDED)
        theta = state_at(sampler, Partition.from_sequence_string("2;(1,1);(2,2)"), *empty_pair, rng)
        np.testing.assert_allclose(sampler.extend_weights(theta), np.full(6, 1 / 6))

    def test_single_candidate(self, rng):
        x = Sample(np.array([[0.1], [0.2], [0.3], [0.4]]))
        y = Sample(np.array([[0.6], [0.7], [0.8], [0.9]]), label="Y")
        sampler = PartitionSampler(Hyperparams.for_dimension(1), ProposalKind.GUIDED)
        theta = sampler.initial_state(x, y, rng)
        np.testing.assert_allclose(sampler.extend_weights(theta), [1.0])

    def test_guided_matches_marginal_ratios(self, rng):
        x = Sample(np.array([[0.1, 0.2], [0.3, 0.7], [0.8, 0.1], [0.6, 0.6], [0.2, 0.9]]))
        y = Sample(np.array([[0.7, 0.8], [0.9, 0.9], [0.4, 0.3]]), label="Y")
        sampler = PartitionSampler(Hyperparams.for_dimension(2), ProposalKind.GUIDED)
        partition = Partition.root(2).extend(Action(1, 1))
        theta = state_at(sampler, partition, x, y, rng)
        ratios = np.array([
            sampler.model.log_marginal(partition.extend(a), count(x, y, partition.extend(a)))
            for a in partition.candidate_actions()
        ])
        np.testing.assert_allclose(sampler.extend_weights(theta), np.exp(ratios - logsumexp(ratios)), rtol=1e-10)

    def test_weights_follow_new_data(self, rng):
        partition = Partition.from_sequence_string("2;(1,1);(2,2)")
        left = Sample(rng.beta(1, 4, size=(80, 2)))
        right = Sample(rng.beta(4, 1, size=(80, 2)), label="Y")
        sampler = PartitionSampler(Hyperparams.for_dimension(2), ProposalKind.GUIDED)
        first = sampler.extend_weights(state_at(sampler, partition, left, right, rng))
        other = state_at(sampler, partition, Sample(rng.random((50, 2))), Sample(rng.random((50, 2)), label="Y"), rng)
        fresh = PartitionSampler(Hyperparams.for_dimension(2), ProposalKind.GUIDED)
        expected = fresh.extend_weights(other)
        assert not np.allclose(first, expected)
        np.testing.assert_allclose(sampler.extend_weights(other), expected, rtol=1e-12)

    def test_uniform_kernel_ignores_data(self, uniform_pair, rng):
        sampler = PartitionSampler(Hyperparams(), ProposalKind.UNIFORM)
        theta = state_at(sampler, Partition.from_sequence_string("2;(1,1)"), *uniform_pair, rng)
        np.testing.assert_allclose(sampler.extend_weights(theta), np.full(4, 0.25))

    def test_depth_cap(self, uniform_pair, rng):
        sampler = PartitionSampler(Hyperparams(max_depth=3))
        theta = state_at(sampler, Partition.from_sequence_string("2;(1,1);(1,2)"), *uniform_pair, rng)
        with pytest.raises(DepthLimitError):
            sampler.extend_weights(theta)


class TestPropose:
    def test_root_always_extends(self, uniform_pair, rng):
        sampler = PartitionSampler(Hyperparams())
        theta = sampler.initial_state(*uniform_pair, rng)
        assert all(sampler.propose(theta, rng).move == "extend" for _ in range(20))

    def test_uniform_forward_probability(self, uniform_pair, rng):
        sampler = PartitionSampler(Hyperparams(), ProposalKind.UNIFORM)
        theta = state_at(sampler, Partition.from_sequence_string("2;(1,1);(1,2)"), *uniform_pair, rng)
        proposal = propose_until(sampler, theta, rng, "extend")
        assert proposal.forward_log_prob == pytest.approx(math.log(0.5) - math.log(6))
        assert proposal.reverse_log_prob == pytest.approx(math.log(0.5))
        assert proposal.theta.depth == 4

    @pytest.mark.parametrize("kind", [ProposalKind.GUIDED, ProposalKind.UNIFORM])
    def test_round_trip_bookkeeping(self, uniform_pair, rng, kind):
        sampler = PartitionSampler(Hyperparams(), kind)
        theta = state_at(sampler, Partition.from_sequence_string("2;(1,1);(2,2)"), *uniform_pair, rng)
        forth = propose_until(sampler, theta, rng, "extend")
        back = propose_until(sampler, forth.theta, rng, "shrink")
        assert back.theta.partition == theta.partition
        assert back.action == forth.action
        assert back.forward_log_prob == pytest.approx(forth.reverse_log_prob)
        assert back.reverse_log_prob == pytest.approx(forth.forward_log_prob)
        assert back.theta.log_marginal == pytest.approx(theta.log_marginal)


class TestAcceptance:
    def test_identity_accepts(self, uniform_pair, rng):
        sampler = PartitionSampler(Hyperparams())
        theta = sampler.initial_state(*uniform_pair, rng)
        assert sampler.accept_prob(theta, theta, -1.0, -1.0) == 1.0

    def test_no_data_first_extend(self, empty_pair, rng):
        sigma = 3.0
        sampler = PartitionSampler(Hyperparams(delta=0.5, sigma=sigma), ProposalKind.UNIFORM)
        theta = sampler.initial_state(*empty_pair, rng)
        proposal = sampler.propose(theta, rng)
        # beta(1/2, 1/2) = pi for each of the two mass vectors
        expected = min(1.0, math.exp(-sigma) * 0.5 / (1.0 / 2) * math.pi ** 2)
        value = sampler.accept_prob(theta, proposal.theta, proposal.forward_log_prob, proposal.reverse_log_prob)
        assert value == pytest.approx(expected, rel=1e-12)

    def test_probabilities_in_unit_interval(self, uniform_pair, rng):
        sampler = PartitionSampler(Hyperparams(max_depth=8))
        theta = sampler.initial_state(*uniform_pair, rng)
        for _ in range(300):
            proposal = sampler.propose(theta, rng)
            value = sampler.accept_prob(theta, proposal.theta, proposal.forward_log_prob, proposal.reverse_log_prob)
            assert 0.0 <= value <= 1.0
            if rng.random() < value:
                theta = proposal.theta


class TestRunChain:
    def test_retained_count(self, uniform_pair):
        config = ChainConfig(iterations=10, burnin=3, thin=2, seed=1)
        trace = run_chain(*uniform_pair, config)
        assert len(trace.records) == config.retained_count == 4
        assert [r.iteration for r in trace.records] == [3, 5, 7, 9]
        assert 0.0 <= trace.acceptance_rate <= 1.0
        assert sum(trace.depth_histogram().values()) == 4

    def test_deterministic(self, uniform_pair):
        config = ChainConfig(iterations=300, burnin=100, seed=99)
        assert run_chain(*uniform_pair, config).to_jsonl() == run_chain(*uniform_pair, config).to_jsonl()

    def test_prior_dominates_without_data(self, empty_pair):
        config = ChainConfig(iterations=2000, burnin=0, seed=3, hyperparams=Hyperparams(sigma=20.0))
        trace = run_chain(*empty_pair, config)
        assert trace.depth_histogram().get(1, 0) >= 0.99 * len(trace.records)

    def test_default_kernel_by_dimension(self, uniform_pair):
        trace = run_chain(*uniform_pair, ChainConfig(iterations=5, burnin=0))
        assert trace.proposal == ProposalKind.GUIDED
        assert ProposalKind.default_for(6) == ProposalKind.UNIFORM

    def test_depth_cap_is_a_warning(self, separated_1d):
        config = ChainConfig(iterations=500, burnin=0, seed=4,
                             hyperparams=Hyperparams(sigma=0.1, max_depth=3))
        trace = run_chain(*separated_1d, config)
        assert trace.depths.max() <= 3
        assert trace.depth_cap_hits > 0

    def test_replicas_differ(self, uniform_pair):
        traces = run_chains(*uniform_pair, ChainConfig(iterations=200, burnin=50, seed=5), chains=2, threads=2)
        assert len(traces) == 2
        assert traces[0].config.seed == chain_seed(5, 0)
        assert traces[0].to_jsonl() != traces[1].to_jsonl()

    def test_burnin_must_be_below_iterations(self):
        with pytest.raises(ConfigError):
            ChainConfig(iterations=100, burnin=100)


class TestStationarity:
    """Visit frequencies against the exactly normalised marginal over all sequences up to depth 4"""

    @pytest.mark.parametrize("kind", [ProposalKind.GUIDED, ProposalKind.UNIFORM])
    def test_short_chain(self, separated_1d, kind):
        hyperparams = Hyperparams.for_dimension(1, max_depth=4)
        exact = exact_distribution(*separated_1d, hyperparams)
        assert len(exact) == 10
        config = ChainConfig(iterations=40000, burnin=1000, seed=11, proposal=kind, hyperparams=hyperparams)
        assert visit_distance(run_chain(*separated_1d, config), exact) < 0.1

    @pytest.mark.slow
    @pytest.mark.parametrize("kind", [ProposalKind.GUIDED, ProposalKind.UNIFORM])
    def test_long_chain(self, separated_1d, kind):
        hyperparams = Hyperparams.for_dimension(1, max_depth=4)
        exact = exact_distribution(*separated_1d, hyperparams)
        config = ChainConfig(iterations=200000, burnin=2000, seed=12, proposal=kind, hyperparams=hyperparams)
        assert visit_distance(run_chain(*separated_1d, config), exact) < 0.05


class TestDepthGrowth:
    @pytest.mark.slow
    def test_mean_depth_grows_with_sample_size(self):
        from src.core.densities import get_setup

        setup = get_setup("beta-mixture-3d")
        hyperparams = Hyperparams.for_dimension(3, sigma=setup.sigma)
        depths = []
        for n in (50, 1250):
            rng = np.random.default_rng(n)
            x = Sample(setup.p.sample(n, rng))
            y = Sample(setup.q.sample(n, rng), label="Y")
            config = ChainConfig(iterations=8000, burnin=5000, seed=n, hyperparams=hyperparams)
            depths.append(run_chain(x, y, config).mean_depth)
        assert depths[1] > depths[0]
