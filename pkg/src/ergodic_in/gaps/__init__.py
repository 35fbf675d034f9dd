import math
from typing import Annotated, ClassVar, Final

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from ergodic_in.base import ParameterDomainError, RandomStream, RateEstimate, monte_carlo
from ergodic_in.enum import FadingKindEnum, GapBoundKindEnum
from ergodic_in.fading import FadingModel, det2
from ergodic_in.rates import gap_mc, rate_in_closed_uniform, rate_mimo_closed_uniform



UNIFORM_ABS_DET: Final[float] = 4 / math.pi # E[√(2 − 2cos θ)]
RAYLEIGH_ABS_DET: Final[float] = 3 * math.pi / 8
ABS_DET_SQUARED: Final[float] = 2.0 # E[|det 𝐇₁|²] for every unit second moment law
UNIFORM_TWO_RELAY_BOUND: Final[float] = 4.0
DEFAULT_EPS: Final[float] = 0.3



class GapReport(BaseModel):
    '''
    Observed R_mimo − R_in at one (P, L) next to the bound that applies.

    Two relay bounds hold at L = 2 for every P; limit bounds only hold as L → ∞ and are reference lines at finite L.
    '''
    model: str = Field(description='Fading model name.')
    p: float = Field(description='Transmit power P, linear.', gt=0)
    relays: int = Field(description='Number of relays L.', ge=2)
    gap_estimate: RateEstimate = Field(description='R_mimo − R_in on common draws.')
    bound: float = Field(description='Upper bound on the gap.', allow_inf_nan=False)
    bound_std_error: float = Field(description='Standard error of a Monte Carlo bound, 0 for a closed form.', ge=0, default=0.0)
    bound_kind: GapBoundKindEnum = Field(description='Which bound `bound` is.')
    finite_bound: Annotated[float | None, Field(description='Finite M bound whose L → ∞ value is the limit line.')] = None
    limit_slack: Annotated[float | None, Field(description='2δ_∞, the ε dependent slack the limit line carries.')] = None

    _example: ClassVar[dict] = {
        'model': 'rayleigh', 'p': 100.0, 'relays': 2,
        'gap_estimate': {'mean': 3.51, 'std_error': 0.006, 'trials': 100000},
        'bound': 4.7, 'bound_std_error': 0.004, 'bound_kind': 'amplitude-two-relay',
    }
    model_config = ConfigDict(frozen=True, json_schema_extra={'examples': [_example]})

    @property
    def applies(self) -> bool:
        return self.bound_kind in (GapBoundKindEnum.UNIFORM_TWO_RELAY, GapBoundKindEnum.AMPLITUDE_TWO_RELAY) and self.relays == 2

    @property
    def within_bound(self) -> bool:
        'The gap stays below the bound within 3 combined standard errors, or the bound does not apply at this L.'
        if not self.applies: return True
        combined = math.hypot(self.gap_estimate.std_error, self.bound_std_error)
        return self.gap_estimate.mean <= self.bound + 3 * combined



def uniform_gap_closed(p: float) -> float:
    'R_mimo − R_in for uniform phase fading and L = 2, from the closed forms. At most 4, and tends to 4 as P → ∞.'
    if p <= 0: raise ParameterDomainError(f'power must be positive, got {p}')
    return rate_mimo_closed_uniform(p) - rate_in_closed_uniform(p)



def amplitude_gap_terms(a: np.ndarray) -> np.ndarray:
    '''
    2log₂(√A(A + B²) / (B(A + √(A² − G²)))) + 2 per amplitude matrix of a (n, 2, 2) batch, with
    A = a₁₁²a₂₂² + a₁₂²a₂₁², B = a₁₁² + a₂₁² + 2 and G = 2a₁₁a₁₂a₂₁a₂₂.
    '''
    a11, a12, a21, a22 = a[..., 0, 0], a[..., 0, 1], a[..., 1, 0], a[..., 1, 1]
    big_a = a11 ** 2 * a22 ** 2 + a12 ** 2 * a21 ** 2
    big_b = a11 ** 2 + a21 ** 2 + 2
    big_g = 2 * a11 * a12 * a21 * a22
    # A ≥ G, so a negative radicand is rounding.
    root = np.sqrt(np.maximum(big_a ** 2 - big_g ** 2, 0.0))
    return 2 * np.log2(np.sqrt(big_a) * (big_a + big_b ** 2) / (big_b * (big_a + root))) + 2



def amplitude_gap_bound_mc(model: FadingModel, trials: int, stream: RandomStream) -> RateEstimate:
    '''
    Bound on C_sum − R_in at L = 2 for any law whose density depends on |x| only. The expectation is over the amplitudes
    alone and does not depend on P.
    '''
    return monte_carlo(lambda generator, n: amplitude_gap_terms(model.sample_amplitude(generator, (n, 2, 2))), trials, stream)



def delta_m(c: float, m: int, ex: float, ex2: float, eps: float) -> float:
    '''
    Correction δ_m of the law of large numbers bound E[log₂(1 + cS_m²)] ≥ log₂(1 + cm²E[X]²) − δ_m, where S_m sums m
    i.i.d. nonnegative X with E[X] = `ex` and E[X²] = `ex2`:

    δ_m = E[X²]/(mε²)·log₂(1 + cm²(E[X] − ε)²) − log₂(1 − cm²ε(2E[X] − ε)/(1 + cm²E[X]²)).
    '''
    if c < 0: raise ParameterDomainError(f'c must be nonnegative, got {c}')
    if m < 1: raise ParameterDomainError(f'm must be at least 1, got {m}')
    if not 0 < eps < ex: raise ParameterDomainError(f'ε must lie in (0, E[X]) = (0, {ex}), got {eps}')
    if ex2 < ex ** 2 * (1 - 1e-12): raise ParameterDomainError(f'E[X²] = {ex2} is below E[X]² = {ex ** 2}')
    cm2 = c * m ** 2
    return (
        ex2 / (m * eps ** 2) * math.log2(1 + cm2 * (ex - eps) ** 2)
        - math.log2(1 - cm2 * eps * (2 * ex - eps) / (1 + cm2 * ex ** 2))
    )



def delta_limit(ex: float, eps: float) -> float:
    'δ_M as M → ∞ with c ∝ 1/M or c fixed: −log₂(1 − ε(2E[X] − ε)/E[X]²).'
    if not 0 < eps < ex: raise ParameterDomainError(f'ε must lie in (0, E[X]) = (0, {ex}), got {eps}')
    return -math.log2(1 - eps * (2 * ex - eps) / ex ** 2)



def log_sum_lower(c: float, m: int, ex: float, ex2: float, eps: float) -> float:
    'log₂(1 + cm²E[X]²) − δ_m, the guaranteed lower bound on E[log₂(1 + cS_m²)].'
    return math.log2(1 + c * m ** 2 * ex ** 2) - delta_m(c, m, ex, ex2, eps)



def log_sum_mc(c: float, m: int, trials: int, stream: RandomStream) -> RateEstimate:
    'E[log₂(1 + cS_m²)] for X = √(2 − 2cos θ), θ uniform, the |det| of a uniform phase pair block.'
    if m < 1: raise ParameterDomainError(f'm must be at least 1, got {m}')
    def sampler(generator: np.random.Generator, n: int) -> np.ndarray:
        x = np.sqrt(2 - 2 * np.cos(2 * math.pi * generator.random((n, m))))
        return np.log2(1 + c * x.sum(axis=1) ** 2)
    return monte_carlo(sampler, trials, stream)



def uniform_gap_limit() -> float:
    'lim_{L→∞} bound on C_sum − R_in for uniform phase fading: 4log₂π − 4.'
    return 4 * math.log2(math.pi) - 4



def amplitude_gap_limit(edet: float) -> float:
    'lim_{L→∞} bound on C_sum − R_in when the density depends on |x| only: 4 − 4log₂ E[|det 𝐇₁|].'
    if not 0 < edet <= 2: raise ParameterDomainError(f'E[|det H1|] must lie in (0, 2], got {edet}')
    return 4 - 4 * math.log2(edet)



def _mimo_upper_numerator(p: float, pairs: int) -> float:
    return 1 + p * (4 * pairs + 3) + p ** 2 * (2 * pairs + 1) * (2 * pairs + 2)



def uniform_finite_bound(p: float, pairs: int, eps: float = DEFAULT_EPS) -> float:
    'Upper bound on R_mimo − R_in for uniform phase fading with M relay pairs; tends to 4log₂π − 4 + 2δ_∞ as M → ∞.'
    if p <= 0: raise ParameterDomainError(f'power must be positive, got {p}')
    c = p ** 2 / (1 + p * (2 * pairs + 2))
    denominator = 1 + p * (2 * pairs + 2) + 16 / math.pi ** 2 * p ** 2 * pairs ** 2
    return 2 * math.log2(_mimo_upper_numerator(p, pairs) / denominator) + 2 * delta_m(c, pairs, UNIFORM_ABS_DET, ABS_DET_SQUARED, eps)



def amplitude_finite_bound(p: float, pairs: int, edet: float, edet2: float, eps: float = DEFAULT_EPS) -> float:
    'Upper bound on R_mimo − R_in for an amplitude law with M relay pairs, from E[|det 𝐇₁|] and E[|det 𝐇₁|²].'
    if p <= 0: raise ParameterDomainError(f'power must be positive, got {p}')
    denominator = 1 + p ** 2 * pairs ** 2 * edet ** 2
    return 2 * math.log2(_mimo_upper_numerator(p, pairs) / denominator) + 2 * delta_m(p ** 2, pairs, edet, edet2, eps)



def abs_det_samples(batch: np.ndarray) -> np.ndarray:
    '|det| of every matrix of a (n, 2, 2) batch.'
    return np.abs(det2(batch))



def expected_abs_det_mc(model: FadingModel, trials: int, stream: RandomStream) -> RateEstimate:
    'E[|det 𝐇₁|]: 3π/8 for Rayleigh, 4/π for uniform phase.'
    return monte_carlo(lambda generator, n: abs_det_samples(model.sample(generator, (n, 2, 2))), trials, stream)



def expected_abs_det_squared_mc(model: FadingModel, trials: int, stream: RandomStream) -> RateEstimate:
    'E[|det 𝐇₁|²], 2 for every unit second moment law.'
    return monte_carlo(lambda generator, n: abs_det_samples(model.sample(generator, (n, 2, 2))) ** 2, trials, stream)



def abs_det_moments(model: FadingModel, trials: int, stream: RandomStream) -> tuple[float, float]:
    '(E[|det 𝐇₁|], E[|det 𝐇₁|²]): exact for uniform phase and Rayleigh fading, Monte Carlo on common draws otherwise.'
    match model.kind:
        case FadingKindEnum.UNIFORM_PHASE: return UNIFORM_ABS_DET, ABS_DET_SQUARED
        case FadingKindEnum.RAYLEIGH: return RAYLEIGH_ABS_DET, ABS_DET_SQUARED
    return expected_abs_det_mc(model, trials, stream).mean, expected_abs_det_squared_mc(model, trials, stream).mean



def gap_vs_relays(
    model: FadingModel, p: float, relays_list: list[int], trials: int, stream: RandomStream, eps: float = DEFAULT_EPS,
) -> list[GapReport]:
    '''
    R_mimo − R_in for every L with its bound attached: the two relay bound at L = 2, the L → ∞ limit otherwise.
    L number k of the list draws from `stream.substream(k)`; the moments of |det 𝐇₁| an amplitude law needs come from
    `stream.substream(len(relays_list))`.
    '''
    if any(relays < 2 for relays in relays_list): raise ParameterDomainError('every L must be at least 2')
    uniform = model.kind == FadingKindEnum.UNIFORM_PHASE
    edet, edet2 = abs_det_moments(model, trials, stream.substream(len(relays_list)))

    reports = []
    for k, relays in enumerate(relays_list):
        gap = gap_mc(model, relays, p, trials, stream.substream(k, 0))
        bound_std_error = 0.0
        if relays == 2 and uniform:
            kind, bound = GapBoundKindEnum.UNIFORM_TWO_RELAY, UNIFORM_TWO_RELAY_BOUND
        elif relays == 2:
            estimate = amplitude_gap_bound_mc(model, trials, stream.substream(k, 1))
            kind, bound, bound_std_error = GapBoundKindEnum.AMPLITUDE_TWO_RELAY, estimate.mean, estimate.std_error
        elif uniform:
            kind, bound = GapBoundKindEnum.UNIFORM_LIMIT, uniform_gap_limit()
        else:
            kind, bound = GapBoundKindEnum.AMPLITUDE_LIMIT, amplitude_gap_limit(edet)

        pairs = relays // 2
        finite = uniform_finite_bound(p, pairs, eps) if uniform else amplitude_finite_bound(p, pairs, edet, edet2, eps)
        reports.append(GapReport(
            model=model.name, p=p, relays=relays, gap_estimate=gap,
            bound=bound, bound_std_error=bound_std_error, bound_kind=kind, finite_bound=finite,
            limit_slack=2 * delta_limit(edet, eps),
        ))
        logger.info('{} L={} P={:.4g}: gap={:.4f}±{:.4f}, {} bound {:.4f}', model.name, relays, p, gap.mean, gap.std_error, kind.value, bound)
    return reports
