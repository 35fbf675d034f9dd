import math

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from ergodic_in.base import DimensionMismatchError, ParameterDomainError, RandomStream, RateEstimate, draw_samples, monte_carlo
from ergodic_in.fading import FadingModel
from ergodic_in.neutralization import asymptotic_sinr



def db_to_linear(p_db: float) -> float:
    return 10 ** (p_db / 10)



def linear_to_db(p: float) -> float:
    if p <= 0: raise ParameterDomainError(f'only a positive power has a dB value, got {p}')
    return 10 * math.log10(p)



def _check_rate_args(relays: int, p: float):
    if relays < 2: raise DimensionMismatchError(f'at least two relays are needed, got L = {relays}')
    if p < 0 or not math.isfinite(p): raise ParameterDomainError(f'power must be finite and nonnegative, got {p}')



def rate_in_samples(h: np.ndarray, p: float) -> np.ndarray:
    '∑_i log₂(1 + SINR_i) in the vanishing quantization error limit, per first hop matrix of a (n, L, 2) batch.'
    return np.log2(1 + asymptotic_sinr(h, p, 1)) + np.log2(1 + asymptotic_sinr(h, p, 2))



def rate_mimo_samples(h: np.ndarray, p: float) -> np.ndarray:
    '''
    log₂ det(𝐈₂ + P𝐇†𝐇) per matrix of a (n, L, 2) batch, through the 2×2 Gram matrix [[a, b], [b*, d]] of the columns.
    '''
    a = np.sum(np.abs(h[..., 0]) ** 2, axis=-1)
    d = np.sum(np.abs(h[..., 1]) ** 2, axis=-1)
    b = np.sum(np.conj(h[..., 0]) * h[..., 1], axis=-1)
    det = (1 + p * a) * (1 + p * d) - p ** 2 * np.abs(b) ** 2
    return np.log2(np.maximum(det, 1.0))



def _first_hop_sampler(model: FadingModel, relays: int, p: float, integrand):
    return lambda generator, n: integrand(model.sample(generator, (n, relays, 2)), p)



def rate_in_mc(model: FadingModel, relays: int, p: float, trials: int, stream: RandomStream) -> RateEstimate:
    'R_in, the achievable ergodic sum rate of interference neutralization with M = ⌊L/2⌋ relay pairs.'
    _check_rate_args(relays, p)
    return monte_carlo(_first_hop_sampler(model, relays, p, rate_in_samples), trials, stream)



def rate_mimo_mc(model: FadingModel, relays: int, p: float, trials: int, stream: RandomStream) -> RateEstimate:
    'R_mimo = E[log₂ det(𝐈 + P𝐇𝐇†)], the cut-set upper bound on the ergodic sum capacity.'
    _check_rate_args(relays, p)
    return monte_carlo(_first_hop_sampler(model, relays, p, rate_mimo_samples), trials, stream)



def _paired_samples(model: FadingModel, relays: int, p: float, trials: int, stream: RandomStream) -> np.ndarray:
    'Columns (R_in, R_mimo) on common draws.'
    _check_rate_args(relays, p)
    integrand = lambda h, power: np.stack([rate_in_samples(h, power), rate_mimo_samples(h, power)], axis=-1)
    return draw_samples(_first_hop_sampler(model, relays, p, integrand), trials, stream)



class RatePoint(BaseModel):
    '''
    R_in and R_mimo at one (model, L, P) on common draws, with their paired gap and ratio. The standard error of the gap
    comes from the per-trial differences; the ratio uses the delta method.
    '''
    r_in: RateEstimate = Field(description='Achievable sum rate R_in.')
    r_mimo: RateEstimate = Field(description='Cut-set upper bound R_mimo.')
    gap: RateEstimate = Field(description='R_mimo − R_in.')
    ratio: RateEstimate = Field(description='R_in / R_mimo.')

    model_config = ConfigDict(frozen=True)



def _ratio_estimate(samples: np.ndarray) -> RateEstimate:
    trials = samples.shape[0]
    mean_in, mean_mimo = samples.mean(axis=0)
    if mean_mimo <= 0: return RateEstimate.exact(0.0, trials)
    ratio = float(mean_in / mean_mimo)
    if trials == 1: return RateEstimate.exact(ratio)
    cov = np.cov(samples, rowvar=False, ddof=1)
    variance = (cov[0, 0] - 2 * ratio * cov[0, 1] + ratio ** 2 * cov[1, 1]) / mean_mimo ** 2
    return RateEstimate(mean=ratio, std_error=math.sqrt(max(variance, 0.0) / trials), trials=trials)



def rate_point_mc(model: FadingModel, relays: int, p: float, trials: int, stream: RandomStream) -> RatePoint:
    '''
    One pass over the first hop draws of `rate_in_mc` / `rate_mimo_mc` for the same stream, so `r_in` and `r_mimo` equal
    what those return.
    '''
    samples = _paired_samples(model, relays, p, trials, stream)
    point = RatePoint(
        r_in=RateEstimate.from_samples(samples[:, 0]),
        r_mimo=RateEstimate.from_samples(samples[:, 1]),
        gap=RateEstimate.from_samples(samples[:, 1] - samples[:, 0]),
        ratio=_ratio_estimate(samples),
    )
    logger.debug('{} L={} P={:.4g}: R_in={:.4f} R_mimo={:.4f}', model.name, relays, p, point.r_in.mean, point.r_mimo.mean)
    return point



def gap_mc(model: FadingModel, relays: int, p: float, trials: int, stream: RandomStream) -> RateEstimate:
    'R_mimo − R_in on common draws.'
    return rate_point_mc(model, relays, p, trials, stream).gap



def rate_ratio_mc(model: FadingModel, relays: int, p: float, trials: int, stream: RandomStream) -> RateEstimate:
    'R_in / R_mimo on common draws.'
    return rate_point_mc(model, relays, p, trials, stream).ratio



def _uniform_x(p: float) -> float:
    return 2 * p ** 2 / (1 + 4 * p + 2 * p ** 2)



def rate_in_closed_uniform(p: float) -> float:
    '''
    R_in for uniform phase fading and L = 2:
    2log₂(1 + 2P²/(1 + 4P)) + 2log₂(1 + √(1 − x²)) − 2 with x = 2P²/(1 + 4P + 2P²).
    '''
    if p < 0: raise ParameterDomainError(f'power must be nonnegative, got {p}')
    return 2 * math.log2(1 + 2 * p ** 2 / (1 + 4 * p)) + 2 * log_cos_identity(_uniform_x(p))



def rate_mimo_closed_uniform(p: float) -> float:
    'R_mimo for uniform phase fading and L = 2: log₂(1 + 4P + 2P²) + log₂(1 + √(1 − x²)) − 1.'
    if p < 0: raise ParameterDomainError(f'power must be nonnegative, got {p}')
    return math.log2(1 + 4 * p + 2 * p ** 2) + log_cos_identity(_uniform_x(p))



def log_cos_identity(x: float) -> float:
    '''
    E[log₂(1 − x·cos φ)] for φ uniform on [0, 2π), in closed form: log₂(1 + √(1 − x²)) − 1, for |x| ≤ 1.
    '''
    if abs(x) > 1: raise ParameterDomainError(f'|x| must be at most 1, got {x}')
    return math.log2(1 + math.sqrt(max(0.0, 1 - x ** 2))) - 1



def log_cos_mc(x: float, trials: int, stream: RandomStream) -> RateEstimate:
    if abs(x) > 1: raise ParameterDomainError(f'|x| must be at most 1, got {x}')
    return monte_carlo(lambda generator, n: np.log2(1 - x * np.cos(2 * math.pi * generator.random(n))), trials, stream)



def jensen_upper(p: float, pairs: int) -> float:
    '2log₂(1 + P(2M + 1)), an upper bound on R_mimo with L = 2M + 1 relays.'
    if p < 0: raise ParameterDomainError(f'power must be nonnegative, got {p}')
    if pairs < 1: raise ParameterDomainError(f'M must be at least 1, got {pairs}')
    return 2 * math.log2(1 + p * (2 * pairs + 1))
