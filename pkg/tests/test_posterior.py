"""
Tests for the coupled binary partition posterior
"""
import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import betaln, gammaln
from scipy.stats import dirichlet

from src.core.counting import count
from src.core.posterior import LOG2, PosteriorModel
from src.models.errors import AlignmentError, ConfigError, OutOfDomainError
from src.models.model_data import Hyperparams, MassPair
from src.models.partition import Action, Partition
from src.models.sample_data import Sample

from test_partition import random_partition

HALVES_1D = Partition.root(1).extend(Action(1, 1))


def samples_1d(x_values, y_values):
    return (Sample(np.reshape(x_values, (-1, 1))),
            Sample(np.reshape(y_values, (-1, 1)), label="Y"))


class TestHyperparams:
    def test_defaults_for_dimension(self):
        h = Hyperparams.for_dimension(3)
        assert h.sigma == 4.0
        assert h.delta == 0.5
        assert h.p_up == 0.5

    def test_boundary_move_probabilities(self):
        h = Hyperparams(max_depth=4)
        assert h.up_probability(1) == 1.0
        assert h.down_probability(1) == 0.0
        assert h.up_probability(2) == 0.5
        assert h.up_probability(4) == 0.0
        assert h.down_probability(4) == 1.0

    @pytest.mark.parametrize("kwargs", [{"delta": 0}, {"sigma": -1}, {"p_up": 1.5},
                                        {"max_depth": 1}, {"sequence_prior": "poisson"}])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            Hyperparams(**kwargs)


class TestLogPsi:
    def test_root_is_depth_penalty(self, uniform_pair):
        model = PosteriorModel(Hyperparams(sigma=3.0))
        partition = Partition.root(2)
        value = model.log_psi(partition, MassPair([1.0], [1.0]), count(*uniform_pair, partition))
        assert value == pytest.approx(-3.0, abs=1e-12)

    def test_two_halves_by_hand(self):
        sigma = 2.0
        model = PosteriorModel(Hyperparams(delta=0.5, sigma=sigma))
        x, y = samples_1d([0.2, 0.7], [0.6, 0.9])
        counts = count(x, y, HALVES_1D)
        value = model.log_psi(HALVES_1D, MassPair([0.5, 0.5], [0.5, 0.5]), counts)
        assert value == pytest.approx(-2 * sigma + 2 * LOG2, abs=1e-12)

    def test_misaligned_masses(self):
        model = PosteriorModel(Hyperparams())
        partition = HALVES_1D.extend(Action(1, 1))
        counts = count(*samples_1d([0.1], [0.2]), partition)
        with pytest.raises(AlignmentError):
            model.log_psi(partition, MassPair([0.5, 0.5], [0.5, 0.5]), counts)


class TestLogMarginal:
    def test_root(self, uniform_pair):
        model = PosteriorModel(Hyperparams(sigma=2.5))
        assert model.log_marginal(Partition.root(2), count(*uniform_pair, Partition.root(2))) == pytest.approx(-2.5)

    def test_two_halves_closed_form(self):
        sigma = 2.0
        model = PosteriorModel(Hyperparams(delta=0.5, sigma=sigma))
        counts = count(*samples_1d([0.1, 0.3], [0.6, 0.8]), HALVES_1D)
        expected = -2 * sigma + 4 * LOG2 + betaln(2.5, 0.5) + betaln(0.5, 2.5)
        assert model.log_marginal(HALVES_1D, counts) == pytest.approx(expected, abs=1e-12)

    def test_integrates_log_psi_over_simplices(self):
        # m = sin(t)^2 removes the endpoint singularities of the Dirichlet kernel
        model = PosteriorModel(Hyperparams(delta=0.5, sigma=2.0))
        counts = count(*samples_1d([0.1, 0.3], [0.6, 0.8]), HALVES_1D)

        def integrand(s, t):
            m1 = math.sin(t) ** 2
            m2 = math.sin(s) ** 2
            jacobian = 4 * math.sin(t) * math.cos(t) * math.sin(s) * math.cos(s)
            masses = MassPair([m1, 1 - m1], [m2, 1 - m2])
            return math.exp(model.log_psi(HALVES_1D, masses, counts)) * jacobian

        value, _ = integrate.dblquad(integrand, 1e-9, math.pi / 2 - 1e-9, 1e-9, math.pi / 2 - 1e-9,
                                     epsabs=0, epsrel=1e-8)
        assert math.log(value) == pytest.approx(model.log_marginal(HALVES_1D, counts), abs=1e-5)

    def test_psi_over_marginal_is_dirichlet_density(self, rng):
        model = PosteriorModel(Hyperparams(delta=0.5, sigma=3.0))
        x = Sample(rng.random((40, 2)))
        y = Sample(rng.beta(2, 3, size=(25, 2)), label="Y")
        for _ in range(10):
            partition = random_partition(rng, 2, int(rng.integers(1, 7)))
            counts = count(x, y, partition)
            masses = model.sample_masses(counts, rng)
            difference = model.log_psi(partition, masses, counts) - model.log_marginal(partition, counts)
            if partition.depth == 1:
                expected = 0.0
            else:
                expected = (dirichlet.logpdf(masses.m1, 0.5 + counts.n1)
                            + dirichlet.logpdf(masses.m2, 0.5 + counts.n2))
            assert difference == pytest.approx(expected, abs=1e-8)

    def test_one_more_point_ratio(self, rng):
        delta = 0.5
        model = PosteriorModel(Hyperparams(delta=delta, sigma=3.0))
        x = Sample(rng.random((30, 2)))
        y = Sample(rng.beta(2, 3, size=(20, 2)), label="Y")
        for _ in range(20):
            partition = random_partition(rng, 2, int(rng.integers(1, 8)))
            before = count(x, y, partition)
            index = int(rng.integers(partition.depth))
            region = partition.regions[index]
            grown = Sample(np.vstack([x.points, [region.center]]))
            gain = model.log_marginal(partition, count(grown, y, partition)) - model.log_marginal(partition, before)
            n1i = before.n1[index]
            expected = math.log((delta + n1i) / (x.size + delta * partition.depth)) - math.log(region.volume)
            assert gain == pytest.approx(expected, abs=1e-9)

    def test_finite_with_empty_regions(self, empty_pair):
        model = PosteriorModel(Hyperparams())
        partition = Partition.from_sequence_string("2;(1,1);(2,2);(1,2)")
        assert np.isfinite(model.log_marginal(partition, count(*empty_pair, partition)))

    def test_uniform_sequence_prior_offset(self, uniform_pair):
        partition = Partition.from_sequence_string("2;(1,1);(2,2);(1,2)")
        counts = count(*uniform_pair, partition)
        flat = PosteriorModel(Hyperparams(sequence_prior="flat")).log_marginal(partition, counts)
        uniform = PosteriorModel(Hyperparams(sequence_prior="uniform")).log_marginal(partition, counts)
        assert flat - uniform == pytest.approx(gammaln(4) + 3 * math.log(2))


class TestSampleMasses:
    def test_root_masses(self, uniform_pair):
        model = PosteriorModel(Hyperparams())
        masses = model.sample_masses(count(*uniform_pair, Partition.root(2)), np.random.default_rng(0))
        assert masses.m1.tolist() == [1.0]
        assert masses.m2.tolist() == [1.0]

    def test_dirichlet_means(self):
        model = PosteriorModel(Hyperparams(delta=0.5))
        counts = count(*samples_1d([0.1, 0.2, 0.3, 0.9], [0.7]), HALVES_1D)
        rng = np.random.default_rng(7)
        draws = np.array([model.sample_masses(counts, rng).m1 for _ in range(20000)])
        expected = model.posterior_mean_masses(counts).m1
        np.testing.assert_allclose(expected, [3.5 / 5, 1.5 / 5])
        se = draws.std(axis=0) / math.sqrt(draws.shape[0])
        assert np.all(np.abs(draws.mean(axis=0) - expected) < 3 * se + 1e-12)

    def test_deterministic_given_seed(self, uniform_pair):
        model = PosteriorModel(Hyperparams())
        partition = Partition.from_sequence_string("2;(1,1);(1,2)")
        counts = count(*uniform_pair, partition)
        a = model.sample_masses(counts, np.random.default_rng(42))
        b = model.sample_masses(counts, np.random.default_rng(42))
        np.testing.assert_array_equal(a.m1, b.m1)
        np.testing.assert_array_equal(a.m2, b.m2)


class TestPiecewiseDensity:
    def test_root_constant(self):
        density = PosteriorModel.piecewise_density(Partition.root(2), [1.0])
        assert density([0.3, 0.8]) == 1.0
        assert density.integral() == 1.0

    def test_halves(self):
        density = PosteriorModel.piecewise_density(HALVES_1D, [0.75, 0.25])
        assert density([0.2]) == 1.5
        assert density([0.9]) == 0.5
        np.testing.assert_array_equal(density.evaluate(np.array([[0.1], [0.5], [1.0]])), [1.5, 0.5, 0.5])

    def test_out_of_domain(self):
        with pytest.raises(OutOfDomainError):
            PosteriorModel.piecewise_density(HALVES_1D, [0.5, 0.5])([1.5])

    def test_misaligned(self):
        with pytest.raises(AlignmentError):
            PosteriorModel.piecewise_density(HALVES_1D, [1.0])
