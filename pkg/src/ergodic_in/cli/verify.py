'''
Self checks behind `ergodic-in verify`. Every check compares an estimator against a closed form, a bound or an identity
and reports pass or fail with a one line detail; Monte Carlo comparisons allow three standard errors.
'''
import math
from typing import Callable, ClassVar

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field
from scipy import stats

from ergodic_in.base import RandomStream, monte_carlo
from ergodic_in.enum import SinrEstimatorEnum, VerifySuiteEnum
from ergodic_in.fading import FadingModel, block_dets, f_map_array
from ergodic_in.gaps import (
    ABS_DET_SQUARED, RAYLEIGH_ABS_DET, UNIFORM_ABS_DET, amplitude_gap_bound_mc, amplitude_gap_limit, delta_limit,
    expected_abs_det_mc, expected_abs_det_squared_mc, gap_vs_relays, log_sum_lower, log_sum_mc, uniform_gap_closed,
    uniform_gap_limit,
)
from ergodic_in.icgap import (
    HALF_LOG_THREE_HALVES, IcConfig, abs_log_ratio_integral, abs_log_ratio_samples, gain_ratio_samples, ia_gap_bound_mc,
    instant_gap, instant_gap_bound, rate_ia_mc, rate_ia_rayleigh_quad,
)
from ergodic_in.neutralization import gain_diagonal, gamma_factor, relay_power_mc, sinr_exact
from ergodic_in.neutralization.block import simulate_block
from ergodic_in.pairing import GridQuantizer, PhaseQuantizer, codes, codes_image_under_f
from ergodic_in.pairing.matching import index_set_concentration
from ergodic_in.rates import db_to_linear, log_cos_identity, log_cos_mc, rate_in_mc, rate_ratio_mc



IDENTITY_DRAWS = 10_000
EXAMPLE_RATIOS = {20: 0.71, 30: 0.79, 40: 0.84, 50: 0.87, 60: 0.89} # SNR in dB: least R_in / R_mimo, Rayleigh, L = 2



class CheckResult(BaseModel):
    name: str = Field(description='Check name, `suite.check`.')
    passed: bool = Field(description='Whether the check held.')
    detail: str = Field(description='Measured values behind the verdict.')

    _example: ClassVar[dict] = {'name': 'constants.abs_det_rayleigh', 'passed': True, 'detail': '1.17812 ± 0.00093 vs 1.17810'}
    model_config = ConfigDict(frozen=True, json_schema_extra={'examples': [_example]})

    @property
    def status(self) -> str:
        return 'pass' if self.passed else 'fail'



def _agreement(name: str, estimate, value: float) -> CheckResult:
    return CheckResult(
        name=name, passed=estimate.agrees_with(value),
        detail=f'{estimate.mean:.6f} ± {estimate.std_error:.6f} vs {value:.6f}',
    )



def lemmas_suite(trials: int, stream: RandomStream) -> list[CheckResult]:
    results = []

    # Cell commutation: quantize(F(H)) is the image of quantize(H), on every draw.
    draws = min(trials, IDENTITY_DRAWS)
    for k, (name, model, first_q) in enumerate((
        ('grid', FadingModel.rayleigh(), GridQuantizer(delta=0.25, n=8, dims=(4, 2))),
        ('phase', FadingModel.uniform_phase(), PhaseQuantizer(n=32, dims=(4, 2))),
    )):
        h = model.sample(stream.substream(0, k).generator(), (draws, 4, 2))
        first_codes, first_valid = codes(first_q, h)
        second_codes, second_valid = codes(first_q.with_dims((2, 4)), f_map_array(h, 2))
        same = np.all(codes_image_under_f(first_codes, 2) == second_codes, axis=(-3, -2, -1)) & (first_valid == second_valid)
        results.append(CheckResult(
            name=f'lemmas.cell_commutation_{name}', passed=bool(same.all()), detail=f'{int(same.sum())}/{draws} draws commute',
        ))

    report = index_set_concentration(PhaseQuantizer(n=4, dims=(2, 2)), FadingModel.uniform_phase(), 10_000, 0.25, 50, stream.substream(1))
    results.append(CheckResult(
        name='lemmas.concentration', passed=report.honors_bound,
        detail=f'event frequency {report.event_frequency:.3f} vs bound {report.bound:.3f}',
    ))

    for k, x in enumerate((0.0, 0.25, 0.5, 0.75, 1.0)):
        results.append(_agreement(f'lemmas.log_cos_x={x:g}', log_cos_mc(x, trials, stream.substream(2, k)), log_cos_identity(x)))

    failures, tested = [], 0
    for k, (m, c) in enumerate((m, c) for m in (1, 2, 4, 8, 16) for c in (0.1, 1.0, 10.0)):
        estimate = log_sum_mc(c, m, trials, stream.substream(3, k))
        lower = log_sum_lower(c, m, UNIFORM_ABS_DET, ABS_DET_SQUARED, 0.3)
        tested += 1
        if estimate.upper() < lower: failures.append(f'(m={m}, c={c:g})')
    results.append(CheckResult(
        name='lemmas.log_sum_lower', passed=not failures,
        detail=f'{tested - len(failures)}/{tested} (m, c) hold' + (f'; failing {", ".join(failures)}' if failures else ''),
    ))
    return results



def constants_suite(trials: int, stream: RandomStream) -> list[CheckResult]:
    rayleigh, uniform = FadingModel.rayleigh(), FadingModel.uniform_phase()
    results = [
        _agreement('constants.abs_det_rayleigh', expected_abs_det_mc(rayleigh, trials, stream.substream(0)), RAYLEIGH_ABS_DET),
        _agreement('constants.abs_det_uniform', expected_abs_det_mc(uniform, trials, stream.substream(1)), UNIFORM_ABS_DET),
        _agreement('constants.abs_det_squared_rayleigh', expected_abs_det_squared_mc(rayleigh, trials, stream.substream(2)), ABS_DET_SQUARED),
        _agreement('constants.abs_det_squared_uniform', expected_abs_det_squared_mc(uniform, trials, stream.substream(3)), ABS_DET_SQUARED),
    ]

    gaps = [uniform_gap_closed(p) for p in np.logspace(-3, 6, 61)]
    results.append(CheckResult(
        name='constants.uniform_gap_closed', passed=max(gaps) <= 4 and abs(gaps[-1] - 4) < 0.01,
        detail=f'max {max(gaps):.6f}, at P = 1e6 {gaps[-1]:.6f}',
    ))
    slack = 2 * delta_limit(UNIFORM_ABS_DET, 0.1)
    results.append(CheckResult(name='constants.delta_limit', passed=abs(slack - 0.47202) < 1e-4, detail=f'2δ_∞(ε = 0.1) = {slack:.6f}'))
    return results



def neutralization_suite(trials: int, stream: RandomStream) -> list[CheckResult]:
    results = []
    draws = min(trials, IDENTITY_DRAWS)
    p = 10.0
    for pairs in (1, 2, 3):
        h = FadingModel.rayleigh().sample(stream.substream(0, pairs).generator(), (draws, 2 * pairs, 2))
        diagonal, _ = gain_diagonal(h, p)
        end_to_end = (f_map_array(h, pairs) * diagonal[..., np.newaxis, :]) @ h
        off = max(np.abs(end_to_end[:, 0, 1]).max(), np.abs(end_to_end[:, 1, 0]).max())
        expected = gamma_factor(p) * np.sum(np.abs(block_dets(h, pairs)), axis=-1)
        relative = max(
            np.max(np.abs(end_to_end[:, 0, 0] - expected) / expected),
            np.max(np.abs(end_to_end[:, 1, 1] + expected) / expected),
        )
        results.append(CheckResult(
            name=f'neutralization.identity_M={pairs}', passed=bool(off < 1e-12 and relative < 1e-10),
            detail=f'max off-diagonal {off:.2e}, max relative diagonal error {relative:.2e}',
        ))

    h = np.array([[1, 1], [1, -1]], dtype=complex)
    pair = sinr_exact(h, f_map_array(h, 1), 1.0)
    results.append(CheckResult(
        name='neutralization.sinr_example', passed=math.isclose(pair.sinr1, 0.8) and math.isclose(pair.sinr2, 0.8),
        detail=f'SINR = ({pair.sinr1:.6f}, {pair.sinr2:.6f}) vs 0.8',
    ))

    estimates = relay_power_mc(FadingModel.rayleigh(), 4, p, trials, stream.substream(1))
    results.append(CheckResult(
        name='neutralization.relay_power', passed=all(e.lower() <= p for e in estimates),
        detail='per relay ' + ', '.join(f'{e.mean:.4f}' for e in estimates) + f' vs P = {p:g}',
    ))

    model, p = FadingModel.uniform_phase(), db_to_linear(10)
    reference = rate_in_mc(model, 2, p, trials, stream.substream(2))
    large = simulate_block(model, 2, p, 100_000, PhaseQuantizer(n=32, dims=(2, 2)), stream.substream(3), SinrEstimatorEnum.REALIZED)
    small = simulate_block(model, 2, p, 1_000, PhaseQuantizer(n=32, dims=(2, 2)), stream.substream(4), SinrEstimatorEnum.REALIZED)
    per_user = (large.matched_rate1 + large.matched_rate2) / 2
    results.append(CheckResult(
        name='neutralization.pairing_rate', passed=abs(per_user - reference.mean / 2) <= 0.05 * reference.mean / 2,
        detail=(
            f'per user over matched pairs {per_user:.4f} vs R_in/2 = {reference.mean / 2:.4f}; '
            f'block rate {large.sum_rate / 2:.4f} at {large.matched_fraction:.1%} matched'
        ),
    ))
    results.append(CheckResult(
        name='neutralization.matched_fraction', passed=large.matched_fraction > small.matched_fraction,
        detail=f'n_B = 1e5: {large.matched_fraction:.4f}, n_B = 1e3: {small.matched_fraction:.4f}',
    ))
    return results



def gaps_suite(trials: int, stream: RandomStream) -> list[CheckResult]:
    rayleigh, uniform = FadingModel.rayleigh(), FadingModel.uniform_phase()
    bound = amplitude_gap_bound_mc(rayleigh, trials, stream.substream(0))
    results = [CheckResult(
        name='gaps.rayleigh_two_relay_bound', passed=abs(bound.mean - 4.7) <= 0.1, detail=f'{bound.mean:.4f} vs 4.7 ± 0.1',
    )]

    for k, model in enumerate((rayleigh, uniform)):
        reports = [gap_vs_relays(model, p, [2], trials, stream.substream(1, k, j))[0] for j, p in enumerate((1, 10, 1e2, 1e3, 1e4))]
        results.append(CheckResult(
            name=f'gaps.two_relay_bound_{model.name}', passed=all(r.within_bound for r in reports),
            detail=', '.join(f'{r.gap_estimate.mean:.3f} ≤ {r.bound:.3f}' for r in reports),
        ))

    failures = []
    for k, (snr_db, target) in enumerate(EXAMPLE_RATIOS.items()):
        ratio = rate_ratio_mc(rayleigh, 2, db_to_linear(snr_db), trials, stream.substream(2, k))
        if ratio.mean < target - 0.01: failures.append(f'{snr_db} dB: {ratio.mean:.4f} < {target}')
    results.append(CheckResult(
        name='gaps.rate_ratios', passed=not failures, detail='; '.join(failures) or 'every ratio reaches its target',
    ))

    draws = min(trials, IDENTITY_DRAWS)
    for k, (model, limit) in enumerate(((uniform, uniform_gap_limit()), (rayleigh, amplitude_gap_limit(RAYLEIGH_ABS_DET)))):
        reports = gap_vs_relays(model, db_to_linear(40), [2, 4, 16, 64], draws, stream.substream(3, k))
        gaps = [r.gap_estimate for r in reports]
        monotone = all(b.mean <= a.mean + 3 * math.hypot(a.std_error, b.std_error) for a, b in zip(gaps, gaps[1:]))
        results.append(CheckResult(
            name=f'gaps.large_relay_limit_{model.name}', passed=abs(gaps[-1].mean - limit) <= 0.3 and monotone,
            detail=f'L = 64: {gaps[-1].mean:.4f} vs {limit:.4f}; ' + ('nonincreasing in L' if monotone else 'increases with L'),
        ))
    return results



def ic_suite(trials: int, stream: RandomStream) -> list[CheckResult]:
    rayleigh, uniform = FadingModel.rayleigh(), FadingModel.uniform_phase()
    results = [
        _agreement('ic.gap_bound_rayleigh', ia_gap_bound_mc(rayleigh, trials, stream.substream(0)), 0.5 * math.log2(6)),
        _agreement('ic.rate_ia_rayleigh', rate_ia_mc(IcConfig(k=2, p=10.0, model=rayleigh), trials, stream.substream(1)), rate_ia_rayleigh_quad(10.0)),
        _agreement(
            'ic.abs_log_ratio', monte_carlo(lambda generator, n: abs_log_ratio_samples(rayleigh, generator, n), trials, stream.substream(2)), 2.0,
        ),
    ]

    uniform_gap = ia_gap_bound_mc(uniform, trials, stream.substream(3))
    results.append(CheckResult(
        name='ic.gap_bound_uniform', passed=uniform_gap.mean == HALF_LOG_THREE_HALVES and uniform_gap.std_error == 0,
        detail=f'{uniform_gap.mean!r} vs ½log₂(3/2) = {HALF_LOG_THREE_HALVES!r}',
    ))
    integral = abs_log_ratio_integral()
    results.append(CheckResult(name='ic.abs_log_ratio_integral', passed=abs(integral - 2) < 1e-6, detail=f'{integral:.9f} vs 2'))

    ratios = gain_ratio_samples(rayleigh, stream.substream(4).generator(), min(trials, IDENTITY_DRAWS))
    ks = stats.kstest(ratios, lambda x: x / (1 + x))
    results.append(CheckResult(name='ic.ratio_density', passed=ks.pvalue > 0.01, detail=f'KS statistic {ks.statistic:.4f}, p = {ks.pvalue:.3f}'))

    generator = stream.substream(5).generator()
    h11, h22, h12 = (rayleigh.sample_amplitude(generator, (min(trials, IDENTITY_DRAWS),)) ** 2 for _ in range(3))
    excess = instant_gap(h11, h22, h12, 100.0) - instant_gap_bound(h11, h22, h12)
    results.append(CheckResult(
        name='ic.instant_gap_bound', passed=bool(np.all(excess <= 1e-12)), detail=f'largest excess {excess.max():.3e}',
    ))
    return results



SUITES: dict[VerifySuiteEnum, Callable[[int, RandomStream], list[CheckResult]]] = {
    VerifySuiteEnum.LEMMAS: lemmas_suite,
    VerifySuiteEnum.CONSTANTS: constants_suite,
    VerifySuiteEnum.NEUTRALIZATION: neutralization_suite,
    VerifySuiteEnum.GAPS: gaps_suite,
    VerifySuiteEnum.IC: ic_suite,
}



def run_suite(suite: VerifySuiteEnum, trials: int, stream: RandomStream) -> list[CheckResult]:
    'Run one suite, or every suite in order for ALL. Suite number k draws from `stream.substream(k)`.'
    selected = list(SUITES) if suite == VerifySuiteEnum.ALL else [suite]
    results = []
    for k, key in enumerate(SUITES):
        if key not in selected: continue
        logger.info('verify: running {} suite', key.value)
        results.extend(SUITES[key](trials, stream.substream(k)))
    for result in results:
        if not result.passed: logger.warning('verify: {} failed ({})', result.name, result.detail)
    return results
