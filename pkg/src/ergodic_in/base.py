import math
from typing import Annotated, Callable, ClassVar, Final

import numpy as np
from joblib import Parallel, delayed
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, field_validator



CHUNK_TRIALS: Final[int] = 1 << 14



class ErgodicError(ValueError):
    'Root of the domain errors raised by `ergodic_in`.'



class DimensionMismatchError(ErgodicError):
    'A matrix does not have the shape an operation or a quantizer requires.'



class DegenerateCellError(ErgodicError):
    '''
    A 2×2 block of a quantization center is numerically singular, so det*/|det| (the unit modulus amplification factor)
    is undefined.
    '''



class ParameterDomainError(ErgodicError):
    'A scalar parameter is outside the domain of the formula it feeds.'



class RandomStream(BaseModel):
    '''
    Counter-based random stream keyed by `(seed, key...)`.

    Every draw in the package comes from `generator()`, a Philox generator seeded by
    `SeedSequence(seed, spawn_key=key)`. Independent pieces of work (a Monte Carlo chunk, a hop, a sweep point) take
    their own `substream(...)`, so the order in which workers run them never changes a result.
    '''
    seed: int = Field(description='Experiment seed.', ge=0, lt=2**64)
    key: Annotated[tuple[int, ...], Field(description='Position of this stream in the experiment tree.')] = ()

    _example: ClassVar[dict] = {'seed': 7, 'key': [3, 0]}
    model_config = ConfigDict(frozen=True, json_schema_extra={'examples': [_example]})

    @field_validator('key', mode='after')
    @classmethod
    def validate_key(cls, value: tuple[int, ...]):
        if any(k < 0 for k in value): raise ValueError('stream key components must be nonnegative')
        return value

    def substream(self, *key: int) -> 'RandomStream':
        return RandomStream(seed=self.seed, key=self.key + tuple(key))

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(self.seed, spawn_key=self.key)))



class RateEstimate(BaseModel):
    '''
    Monte Carlo estimate of an expectation, in bits/sec/Hz unless stated otherwise.

    `std_error` is the unbiased sample standard deviation over √trials; it is 0 for a single trial or for a
    deterministic integrand.
    '''
    mean: float = Field(description='Sample mean.', allow_inf_nan=False)
    std_error: float = Field(description='Standard error of the mean.', ge=0, allow_inf_nan=False)
    trials: int = Field(description='Number of trials behind the estimate.', ge=1)

    _example: ClassVar[dict] = {'mean': 0.910079, 'std_error': 0.0021, 'trials': 100000}
    model_config = ConfigDict(frozen=True, json_schema_extra={'examples': [_example]})

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> 'RateEstimate':
        samples = np.asarray(samples, dtype=float).ravel()
        n = samples.size
        se = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(mean=float(np.mean(samples)), std_error=se, trials=n)

    @classmethod
    def exact(cls, value: float, trials: int = 1) -> 'RateEstimate':
        return cls(mean=value, std_error=0.0, trials=trials)

    def lower(self, k: float = 3.0) -> float:
        return self.mean - k * self.std_error

    def upper(self, k: float = 3.0) -> float:
        return self.mean + k * self.std_error

    def agrees_with(self, value: float, k: float = 3.0, atol: float = 1e-12) -> bool:
        'True when `value` lies within k standard errors (plus a rounding allowance) of the mean.'
        return abs(self.mean - value) <= k * self.std_error + atol



def chunk_plan(trials: int) -> list[int]:
    'Chunk sizes for `trials` Monte Carlo trials; depends on `trials` only.'
    if trials < 1: raise ParameterDomainError(f'trials must be at least 1, got {trials}')
    full, rest = divmod(trials, CHUNK_TRIALS)
    return [CHUNK_TRIALS] * full + ([rest] if rest else [])



def draw_samples(sampler: Callable[[np.random.Generator, int], np.ndarray], trials: int, stream: RandomStream) -> np.ndarray:
    '''
    Run `sampler(generator, n)` over the chunk plan of `trials` and concatenate the per-trial values in chunk order.

    Chunks run through `joblib.Parallel` on threads; the worker count comes from the surrounding
    `joblib.parallel_config` (one worker when unset). Chunk `c` always draws from `stream.substream(c)`.
    '''
    sizes = chunk_plan(trials)
    logger.debug('drawing {} trials in {} chunks from stream {}', trials, len(sizes), stream.key)
    parts = Parallel(prefer='threads')(
        delayed(sampler)(stream.substream(c).generator(), n) for c, n in enumerate(sizes)
    )
    return np.concatenate(parts, axis=0)



def monte_carlo(sampler: Callable[[np.random.Generator, int], np.ndarray], trials: int, stream: RandomStream) -> RateEstimate:
    return RateEstimate.from_samples(draw_samples(sampler, trials, stream))
