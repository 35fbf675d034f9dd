import math

import numpy as np
from joblib import parallel_config
from pytest import approx, raises

from ergodic_in.base import (
    CHUNK_TRIALS, DimensionMismatchError, ParameterDomainError, RandomStream, RateEstimate, chunk_plan, monte_carlo,
)
from ergodic_in.fading import FadingModel
from ergodic_in.rates import (
    db_to_linear, gap_mc, jensen_upper, linear_to_db, log_cos_identity, log_cos_mc, rate_in_closed_uniform, rate_in_mc,
    rate_mimo_closed_uniform, rate_mimo_mc, rate_mimo_samples, rate_point_mc, rate_ratio_mc,
)



class TestMonteCarlo:
    def test_chunk_plan(self):
        assert chunk_plan(1) == [1]
        assert chunk_plan(CHUNK_TRIALS) == [CHUNK_TRIALS]
        assert chunk_plan(2 * CHUNK_TRIALS + 5) == [CHUNK_TRIALS, CHUNK_TRIALS, 5]
        with raises(ParameterDomainError):
            chunk_plan(0)


    def test_rate_estimate(self):
        estimate = RateEstimate.from_samples(np.array([1.0, 2.0, 3.0]))
        assert estimate.mean == 2.0
        assert estimate.std_error == approx(1 / math.sqrt(3))
        assert estimate.agrees_with(3.5)
        assert not estimate.agrees_with(4.0)
        assert RateEstimate.from_samples(np.array([5.0])).std_error == 0.0
        assert RateEstimate.exact(1.5).lower() == 1.5


    def test_results_do_not_depend_on_the_worker_count(self):
        sampler = lambda generator, n: generator.standard_normal(n)
        stream = RandomStream(seed=99)
        with parallel_config(n_jobs=1):
            single = monte_carlo(sampler, 3 * CHUNK_TRIALS + 17, stream)
        with parallel_config(n_jobs=4, prefer='threads'):
            several = monte_carlo(sampler, 3 * CHUNK_TRIALS + 17, stream)
        assert single == several



class TestRates:
    uniform = FadingModel.uniform_phase()
    rayleigh = FadingModel.rayleigh()


    def test_closed_forms(self):
        assert rate_in_closed_uniform(1.0) == approx(0.910079, abs=1e-6)
        assert rate_mimo_closed_uniform(1.0) == approx(2.776968, abs=1e-6)
        assert rate_in_closed_uniform(0.0) == 0.0
        with raises(ParameterDomainError):
            rate_in_closed_uniform(-1.0)


    def test_monte_carlo_matches_closed_forms(self):
        for k, p in enumerate((0.1, 1.0, 10.0, 100.0)):
            stream = RandomStream(seed=31, key=(k,))
            assert rate_in_mc(TestRates.uniform, 2, p, 100_000, stream).agrees_with(rate_in_closed_uniform(p))
            assert rate_mimo_mc(TestRates.uniform, 2, p, 100_000, stream).agrees_with(rate_mimo_closed_uniform(p))


    def test_rate_point_shares_draws(self):
        stream = RandomStream(seed=3)
        point = rate_point_mc(TestRates.rayleigh, 4, 10.0, 20_000, stream)
        assert point.r_in.mean == approx(rate_in_mc(TestRates.rayleigh, 4, 10.0, 20_000, stream).mean, rel=1e-12)
        assert point.r_mimo.mean == approx(rate_mimo_mc(TestRates.rayleigh, 4, 10.0, 20_000, stream).mean, rel=1e-12)
        assert point.gap.mean == approx(point.r_mimo.mean - point.r_in.mean)
        # Common draws make the paired gap tighter than independent estimates.
        assert point.gap.std_error < math.hypot(point.r_in.std_error, point.r_mimo.std_error)
        assert gap_mc(TestRates.rayleigh, 4, 10.0, 20_000, stream) == point.gap


    def test_achievable_rate_stays_below_the_cut_set_bound(self):
        point = rate_point_mc(TestRates.rayleigh, 2, 100.0, 20_000, RandomStream(seed=8))
        assert point.r_in.mean < point.r_mimo.mean
        assert 0 < point.ratio.mean < 1


    def test_rate_ratios(self):
        for k, (snr_db, target) in enumerate(((20, 0.71), (30, 0.79), (40, 0.84), (50, 0.87), (60, 0.89))):
            ratio = rate_ratio_mc(TestRates.rayleigh, 2, db_to_linear(snr_db), 100_000, RandomStream(seed=41, key=(k,)))
            assert ratio.mean >= target - 0.01


    def test_mimo_rate_of_an_orthogonal_channel(self):
        h = np.array([[[1, 0], [0, 1]]], dtype=complex)
        assert rate_mimo_samples(h, 3.0) == approx([4.0])


    def test_jensen_upper(self):
        assert jensen_upper(1.0, 1) == 4.0
        assert jensen_upper(0.0, 3) == 0.0
        for k, p in enumerate((1.0, 10.0, 100.0)):
            estimate = rate_mimo_mc(TestRates.rayleigh, 3, p, 20_000, RandomStream(seed=12, key=(k,)))
            assert estimate.mean <= jensen_upper(p, 1) + 3 * estimate.std_error
        with raises(ParameterDomainError):
            jensen_upper(10.0, 0)


    def test_log_cos_identity(self):
        for k, x in enumerate((0.0, 0.25, 0.5, 0.75, 1.0)):
            assert log_cos_mc(x, 100_000, RandomStream(seed=5, key=(k,))).agrees_with(log_cos_identity(x))
        assert log_cos_identity(1.0) == -1.0
        assert log_cos_identity(0.0) == 0.0
        for x in np.linspace(0, 1, 11):
            assert log_cos_identity(x) <= 0
            assert log_cos_identity(-x) == log_cos_identity(x)
        with raises(ParameterDomainError):
            log_cos_identity(1.5)


    def test_rates_grow_with_power(self):
        powers = (0.1, 1.0, 10.0, 100.0, 1000.0)
        # Same stream for every P, so both rates are compared on the same draws.
        points = [rate_point_mc(TestRates.rayleigh, 4, p, 10_000, RandomStream(seed=14)) for p in powers]
        for a, b in zip(points, points[1:]):
            assert a.r_in.mean <= b.r_in.mean
            assert a.r_mimo.mean <= b.r_mimo.mean
        closed = [rate_in_closed_uniform(p) for p in powers]
        assert closed == sorted(closed)


    def test_rates_vanish_at_low_power(self):
        means = [rate_in_mc(TestRates.rayleigh, 2, p, 10_000, RandomStream(seed=15)).mean for p in (1e-2, 1e-4, 1e-6)]
        assert means == sorted(means, reverse=True)
        assert means[-1] < 1e-8
        assert rate_in_closed_uniform(1e-6) < 1e-8
        assert rate_mimo_mc(TestRates.rayleigh, 2, 0.0, 100, RandomStream(seed=15)).mean == 0.0


    def test_doubling_the_relay_pairs_adds_two_bits(self):
        # At large P the per-destination SINR scales like M²/(M + 1), which about doubles from M = 16 to 32.
        stream = RandomStream(seed=16)
        small = rate_in_mc(TestRates.uniform, 32, 1e4, 20_000, stream.substream(0))
        large = rate_in_mc(TestRates.uniform, 64, 1e4, 20_000, stream.substream(1))
        assert large.mean - small.mean == approx(2.1, abs=0.1)


    def test_power_conversions_and_arguments(self):
        assert db_to_linear(30) == approx(1000.0)
        assert linear_to_db(100.0) == approx(20.0)
        with raises(ParameterDomainError):
            linear_to_db(0.0)
        with raises(DimensionMismatchError):
            rate_in_mc(TestRates.rayleigh, 1, 1.0, 10, RandomStream(seed=0))
        with raises(ParameterDomainError):
            rate_mimo_mc(TestRates.rayleigh, 2, math.inf, 10, RandomStream(seed=0))
