import math

import numpy as np
from pytest import approx, raises

from ergodic_in.base import ParameterDomainError, RandomStream, RateEstimate
from ergodic_in.enum import GapBoundKindEnum
from ergodic_in.fading import FadingModel
from ergodic_in.gaps import (
    ABS_DET_SQUARED, RAYLEIGH_ABS_DET, UNIFORM_ABS_DET, UNIFORM_TWO_RELAY_BOUND, GapReport, abs_det_moments, abs_det_samples,
    amplitude_finite_bound, amplitude_gap_bound_mc, amplitude_gap_limit, amplitude_gap_terms, delta_limit, delta_m,
    expected_abs_det_mc, expected_abs_det_squared_mc, gap_vs_relays, log_sum_lower, log_sum_mc, uniform_finite_bound,
    uniform_gap_closed, uniform_gap_limit,
)



class TestConstants:
    def test_uniform_gap_closed_stays_below_four(self):
        gaps = [uniform_gap_closed(p) for p in np.logspace(-3, 6, 61)]
        assert max(gaps) <= 4
        assert gaps[-1] == approx(4, abs=0.01)
        assert uniform_gap_closed(1.0) == approx(1.866889, abs=1e-6)
        with raises(ParameterDomainError):
            uniform_gap_closed(0.0)


    def test_limits(self):
        assert uniform_gap_limit() == approx(2.605985, abs=1e-6)
        assert amplitude_gap_limit(RAYLEIGH_ABS_DET) == approx(3.054, abs=1e-3)
        assert amplitude_gap_limit(UNIFORM_ABS_DET) == approx(uniform_gap_limit())
        assert 2 * delta_limit(UNIFORM_ABS_DET, 0.1) == approx(0.47202, abs=1e-5)
        with raises(ParameterDomainError):
            amplitude_gap_limit(0.0)


    def test_abs_det_moments(self):
        stream = RandomStream(seed=51)
        for k, (model, first) in enumerate(((FadingModel.rayleigh(), RAYLEIGH_ABS_DET), (FadingModel.uniform_phase(), UNIFORM_ABS_DET))):
            assert expected_abs_det_mc(model, 1_000_000, stream.substream(k, 0)).agrees_with(first)
            assert expected_abs_det_squared_mc(model, 1_000_000, stream.substream(k, 1)).agrees_with(ABS_DET_SQUARED)
            assert abs_det_moments(model, 10, stream) == (first, ABS_DET_SQUARED)

        edet, edet2 = abs_det_moments(FadingModel.nakagami(2.0), 100_000, stream.substream(2))
        # Less fading than Rayleigh, and the second moment does not depend on the law.
        assert RAYLEIGH_ABS_DET < edet < math.sqrt(2)
        assert edet2 == approx(2, rel=0.05)


    def test_abs_det_samples(self):
        assert abs_det_samples(np.stack([np.eye(2), np.array([[1, 1], [1, -1]])])) == approx([1, 2])



class TestBounds:
    def test_rayleigh_two_relay_bound(self):
        stream = RandomStream(seed=61)
        bound = amplitude_gap_bound_mc(FadingModel.rayleigh(), 100_000, stream.substream(0))
        assert bound.mean == approx(4.7, abs=0.1)
        for k, p in enumerate((1, 10, 1e2, 1e3, 1e4)):
            (report,) = gap_vs_relays(FadingModel.rayleigh(), p, [2], 100_000, stream.substream(1, k))
            assert report.bound_kind == GapBoundKindEnum.AMPLITUDE_TWO_RELAY
            assert report.applies
            assert report.within_bound


    def test_uniform_amplitude_bound_is_deterministic(self):
        # All amplitudes 1: A = 2, B = 4, G = 2.
        expected = 2 * math.log2(2.25 * math.sqrt(2)) + 2
        assert expected == approx(5.33985, abs=1e-5)
        assert amplitude_gap_terms(np.ones((1, 2, 2))) == approx([expected])
        bound = amplitude_gap_bound_mc(FadingModel.uniform_phase(), 1000, RandomStream(seed=65))
        assert bound.mean == approx(expected)
        assert bound.std_error == approx(0, abs=1e-12)
        assert bound.mean > UNIFORM_TWO_RELAY_BOUND


    def test_uniform_two_relay_bound(self):
        for k, p in enumerate((1, 100, 1e4)):
            (report,) = gap_vs_relays(FadingModel.uniform_phase(), p, [2], 50_000, RandomStream(seed=62, key=(k,)))
            assert report.bound == 4
            assert report.gap_estimate.agrees_with(uniform_gap_closed(p))
            assert report.within_bound


    def test_large_relay_limits(self):
        p = 1e4
        for k, (model, limit) in enumerate(((FadingModel.uniform_phase(), 2.605985), (FadingModel.rayleigh(), 3.054))):
            reports = gap_vs_relays(model, p, [2, 4, 16, 64], 10_000, RandomStream(seed=63, key=(k,)))
            gaps = [r.gap_estimate for r in reports]
            assert gaps[-1].mean == approx(limit, abs=0.3)
            for a, b in zip(gaps, gaps[1:]):
                assert b.mean <= a.mean + 3 * math.hypot(a.std_error, b.std_error)
            assert reports[-1].bound == approx(limit, abs=1e-3)
            assert reports[-1].bound_kind in (GapBoundKindEnum.UNIFORM_LIMIT, GapBoundKindEnum.AMPLITUDE_LIMIT)
            assert not reports[-1].applies
            assert reports[-1].within_bound


    def test_finite_bounds(self):
        p = 100.0
        # Finite relay bounds hold at every M and tend to the limit plus 2δ_∞.
        assert uniform_finite_bound(p, 10 ** 6, 0.3) == approx(uniform_gap_limit() + 2 * delta_limit(UNIFORM_ABS_DET, 0.3), abs=0.01)
        amplitude = amplitude_finite_bound(p, 10 ** 6, RAYLEIGH_ABS_DET, ABS_DET_SQUARED, 0.3)
        assert amplitude == approx(amplitude_gap_limit(RAYLEIGH_ABS_DET) + 2 * delta_limit(RAYLEIGH_ABS_DET, 0.3), abs=0.01)
        (report,) = gap_vs_relays(FadingModel.uniform_phase(), p, [8], 20_000, RandomStream(seed=64))
        assert report.gap_estimate.upper() <= report.finite_bound
        assert report.limit_slack == approx(2 * delta_limit(UNIFORM_ABS_DET, 0.3))


    def test_gap_vs_relays_arguments(self):
        with raises(ParameterDomainError):
            gap_vs_relays(FadingModel.rayleigh(), 1.0, [1], 10, RandomStream(seed=0))


    def test_gap_report_without_an_applicable_bound(self):
        report = GapReport(
            model='rayleigh', p=1.0, relays=8, gap_estimate=RateEstimate(mean=9.0, std_error=0.1, trials=100),
            bound=3.054, bound_kind=GapBoundKindEnum.AMPLITUDE_LIMIT,
        )
        assert not report.applies
        assert report.within_bound



class TestLogSum:
    def test_lower_bound_holds(self):
        stream = RandomStream(seed=71)
        for k, (m, c) in enumerate((m, c) for m in (1, 2, 4, 8, 16) for c in (0.1, 1.0, 10.0)):
            estimate = log_sum_mc(c, m, 20_000, stream.substream(k))
            assert estimate.upper() >= log_sum_lower(c, m, UNIFORM_ABS_DET, ABS_DET_SQUARED, 0.3)


    def test_delta_vanishes_for_many_terms(self):
        # With c fixed the second term tends to δ_∞ and the first to 0.
        assert delta_m(1.0, 10 ** 7, UNIFORM_ABS_DET, ABS_DET_SQUARED, 0.3) == approx(delta_limit(UNIFORM_ABS_DET, 0.3), abs=1e-3)


    def test_delta_domain(self):
        with raises(ParameterDomainError):
            delta_m(1.0, 2, UNIFORM_ABS_DET, ABS_DET_SQUARED, 2.0)
        with raises(ParameterDomainError):
            delta_m(-1.0, 2, UNIFORM_ABS_DET, ABS_DET_SQUARED, 0.3)
        with raises(ParameterDomainError):
            delta_m(1.0, 0, UNIFORM_ABS_DET, ABS_DET_SQUARED, 0.3)
        with raises(ParameterDomainError):
            delta_m(1.0, 2, UNIFORM_ABS_DET, 1.0, 0.3)
        with raises(ParameterDomainError):
            log_sum_mc(1.0, 0, 10, RandomStream(seed=0))
