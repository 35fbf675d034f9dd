'''
Ergodic interference alignment over the fading K-user interference channel with i.i.d. coefficients and uniform power
allocation across time, and its per-user gap from the sum capacity.
'''
import math
from typing import ClassVar

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import integrate

from ergodic_in.base import RandomStream, RateEstimate, monte_carlo
from ergodic_in.fading import FadingModel



HALF_LOG_THREE_HALVES = 0.5 * math.log2(1.5)



class IcConfig(BaseModel):
    k: int = Field(description='Number of users K.', ge=2)
    p: float = Field(description='Transmit power P, linear.', gt=0, allow_inf_nan=False)
    model: FadingModel = Field(description='Law of the channel coefficients h_{i,j}.')

    _example: ClassVar[dict] = {'k': 3, 'p': 10.0, 'model': {'kind': 'rayleigh'}}
    model_config = ConfigDict(frozen=True, json_schema_extra={'examples': [_example]})

    def sum_rate(self, per_user: RateEstimate) -> float:
        'All users see the same law, so the sum rate is K times the per-user rate.'
        return self.k * per_user.mean



def _gains(model: FadingModel, generator: np.random.Generator, n: int, count: int) -> list[np.ndarray]:
    'Independent squared magnitudes |h|²; the phases never enter the interference channel bounds.'
    return list(model.sample_amplitude(generator, (count, n)) ** 2)



def rate_ia_mc(cfg: IcConfig, trials: int, stream: RandomStream) -> RateEstimate:
    'Per-user rate ½E[log₂(1 + 2|h_{i,i}|²P)] of ergodic interference alignment.'
    def sampler(generator: np.random.Generator, n: int) -> np.ndarray:
        (h_ii,) = _gains(cfg.model, generator, n, 1)
        return 0.5 * np.log2(1 + 2 * h_ii * cfg.p)
    return monte_carlo(sampler, trials, stream)



def _pairwise_upper(h11: np.ndarray, h12: np.ndarray, h22: np.ndarray, p: float) -> np.ndarray:
    return np.log2(1 + (h12 + h11) * p / np.minimum(1.0, h12 / h22))



def pairwise_upper_mc(cfg: IcConfig, trials: int, stream: RandomStream) -> RateEstimate:
    '''
    Upper bound E[log₂(1 + (|h₁₂|² + |h₁₁|²)P / min{1, |h₁₂|²/|h₂₂|²})] on R₁ + R₂. Coefficients are i.i.d., so every
    pair of users has the same bound.
    '''
    def sampler(generator: np.random.Generator, n: int) -> np.ndarray:
        h11, h12, h22 = _gains(cfg.model, generator, n, 3)
        return _pairwise_upper(h11, h12, h22, cfg.p)
    return monte_carlo(sampler, trials, stream)



def instant_gap(h11: np.ndarray, h22: np.ndarray, h12: np.ndarray, p: float) -> np.ndarray:
    'Δ(|h₁₁|², |h₂₂|², |h₁₂|²): the pairwise upper bound minus both alignment rates for one realization.'
    return _pairwise_upper(h11, h12, h22, p) - 0.5 * np.log2(1 + 2 * h11 * p) - 0.5 * np.log2(1 + 2 * h22 * p)



def instant_gap_bound(h11: np.ndarray, h22: np.ndarray, h12: np.ndarray) -> np.ndarray:
    'log₂(3/2) + ½|log₂(|h₂₂|²/|h₁₂|²)| + ½|log₂(|h₁₁|²/|h₁₂|²)|, a P-free bound on `instant_gap`.'
    return 2 * HALF_LOG_THREE_HALVES + 0.5 * np.abs(np.log2(h22 / h12)) + 0.5 * np.abs(np.log2(h11 / h12))



def ic_observed_gap_mc(cfg: IcConfig, trials: int, stream: RandomStream) -> RateEstimate:
    '(pairwise upper − 2·R_ia) / 2 on common draws, the gap the per-user bound has to cover.'
    def sampler(generator: np.random.Generator, n: int) -> np.ndarray:
        h11, h12, h22 = _gains(cfg.model, generator, n, 3)
        return 0.5 * instant_gap(h11, h22, h12, cfg.p)
    return monte_carlo(sampler, trials, stream)



def gain_ratio_samples(model: FadingModel, generator: np.random.Generator, n: int) -> np.ndarray:
    '|h₁,₁|²/|h₁,₂|² for independent coefficients; for Rayleigh fading its density is 1/(x + 1)².'
    h1, h2 = _gains(model, generator, n, 2)
    return h1 / h2



def abs_log_ratio_samples(model: FadingModel, generator: np.random.Generator, n: int) -> np.ndarray:
    return np.abs(np.log2(gain_ratio_samples(model, generator, n)))



def ia_gap_bound_mc(model: FadingModel, trials: int, stream: RandomStream) -> RateEstimate:
    '''
    Per-user gap bound ½log₂(3/2) + ½E[|log₂(|h₁,₁|²/|h₁,₂|²)|] between the sum capacity over K and ergodic
    interference alignment. It holds for every P and contains none.
    '''
    estimate = monte_carlo(lambda generator, n: abs_log_ratio_samples(model, generator, n), trials, stream)
    return RateEstimate(
        mean=HALF_LOG_THREE_HALVES + 0.5 * estimate.mean, std_error=0.5 * estimate.std_error, trials=estimate.trials,
    )



def rate_ia_rayleigh_quad(p: float) -> float:
    '½∫₀^∞ log₂(1 + 2Px)e^(−x) dx, the Rayleigh per-user alignment rate by quadrature.'
    value, _ = integrate.quad(lambda x: 0.5 * math.log2(1 + 2 * p * x) * math.exp(-x), 0, math.inf)
    return value



def abs_log_ratio_integral() -> float:
    '∫₀^∞ |log₂ x|/(x + 1)² dx, E[|log₂(|h₁,₁|²/|h₁,₂|²)|] for Rayleigh fading (= 2).'
    density = lambda x: abs(math.log2(x)) / (x + 1) ** 2
    below, _ = integrate.quad(density, 0, 1)
    above, _ = integrate.quad(density, 1, math.inf)
    return below + above
