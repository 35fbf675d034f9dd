import math
from functools import partial
from typing import Annotated, Callable, ClassVar

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import stats

from ergodic_in.base import DimensionMismatchError, ParameterDomainError, RandomStream
from ergodic_in.enum import FadingKindEnum, HopEnum



AMPLITUDE_CHECK_DRAWS = 100_000
AMPLITUDE_CHECK_TOLERANCE = 0.05

AmplitudeSampler = Callable[[np.random.Generator, tuple[int, ...]], np.ndarray]



def _nakagami_amplitude(m: float, generator: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    return stats.nakagami.rvs(m, size=shape, random_state=generator)



class FadingModel(BaseModel):
    '''
    Distribution of the i.i.d. channel coefficients h_{i,j}[t] and g_{j,i}[t].

    Every variant draws the phase uniformly on [0, 2π) independently of the amplitude, so f(x) depends on |x| only, and
    every variant has E[|x|²] = 1. An `AMPLITUDE_LAW` sampler must already be normalized; construction draws
    100 000 amplitudes from a fixed stream and refuses the sampler when the second moment is off by more than 5%.
    '''
    kind: FadingKindEnum = Field(description='Fading law.')
    amplitude: Annotated[AmplitudeSampler | None, Field(
        description='Sampler of |x| taking (generator, shape); only for AMPLITUDE_LAW.',
        exclude=True,
    )] = None
    label: Annotated[str | None, Field(description='Short name used in logs and CSV rows.')] = None

    _examples: ClassVar[list[dict]] = [{'kind': FadingKindEnum.UNIFORM_PHASE}, {'kind': FadingKindEnum.RAYLEIGH}]
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, json_schema_extra={'examples': _examples})

    @model_validator(mode='after')
    def validate_amplitude(self):
        if self.kind != FadingKindEnum.AMPLITUDE_LAW:
            if self.amplitude is not None: raise ValueError(f'`amplitude` is only allowed for {FadingKindEnum.AMPLITUDE_LAW.value}')
            return self
        if self.amplitude is None: raise ValueError(f'{FadingKindEnum.AMPLITUDE_LAW.value} requires an `amplitude` sampler')

        draws = np.asarray(self.amplitude(RandomStream(seed=0).generator(), (AMPLITUDE_CHECK_DRAWS,)), dtype=float)
        if draws.shape != (AMPLITUDE_CHECK_DRAWS,): raise ValueError('`amplitude` must return an array of the requested shape')
        if not np.all(np.isfinite(draws)) or np.any(draws < 0): raise ValueError('`amplitude` must return finite nonnegative values')
        second_moment = float(np.mean(draws ** 2))
        if abs(second_moment - 1) > AMPLITUDE_CHECK_TOLERANCE:
            raise ValueError(f'`amplitude` must satisfy E[|x|^2] = 1, measured {second_moment:.4f}')
        return self

    @classmethod
    def uniform_phase(cls) -> 'FadingModel':
        return cls(kind=FadingKindEnum.UNIFORM_PHASE)

    @classmethod
    def rayleigh(cls) -> 'FadingModel':
        return cls(kind=FadingKindEnum.RAYLEIGH)

    @classmethod
    def amplitude_law(cls, sampler: AmplitudeSampler, label: str | None = None) -> 'FadingModel':
        return cls(kind=FadingKindEnum.AMPLITUDE_LAW, amplitude=sampler, label=label)

    @classmethod
    def nakagami(cls, m: float) -> 'FadingModel':
        'Nakagami-m amplitude with spread Ω = 1 (m = 1 is Rayleigh in law).'
        if m < 0.5: raise ParameterDomainError(f'Nakagami shape must be at least 0.5, got {m}')
        return cls.amplitude_law(partial(_nakagami_amplitude, m), label=f'nakagami-{m:g}')

    @property
    def name(self) -> str:
        return self.label or self.kind.value

    def sample_amplitude(self, generator: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
        'Draws of |x| alone.'
        match self.kind:
            case FadingKindEnum.UNIFORM_PHASE: return np.ones(shape)
            case FadingKindEnum.RAYLEIGH: return np.sqrt(generator.standard_exponential(shape))
            case FadingKindEnum.AMPLITUDE_LAW:
                draws = np.asarray(self.amplitude(generator, shape), dtype=float)
                if not np.all(np.isfinite(draws)): raise ParameterDomainError(f'{self.name} sampler produced a non-finite amplitude')
                return np.abs(draws)

    def sample(self, generator: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
        'Complex coefficients of the given shape.'
        if self.kind == FadingKindEnum.RAYLEIGH:
            return (generator.standard_normal(shape) + 1j * generator.standard_normal(shape)) / math.sqrt(2)
        phase = 2 * math.pi * generator.random(shape)
        if self.kind == FadingKindEnum.UNIFORM_PHASE: return np.cos(phase) + 1j * np.sin(phase)
        return self.sample_amplitude(generator, shape) * np.exp(1j * phase)



class ChannelMatrix(BaseModel):
    '''
    Complex channel matrix of one hop at one time index.

    - `FIRST`: 𝐇[t], L×2, entry (j, i) is h_{j,i}, the gain from source i to relay j.
    - `SECOND`: 𝐆[t], 2×L, entry (i, j) is g_{i,j}, the gain from relay j to destination i.
    '''
    hop: HopEnum = Field(description='Hop the matrix belongs to.')
    entries: np.ndarray = Field(description='Row-major complex entries, shape (rows, cols).')

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator('entries', mode='before')
    @classmethod
    def validate_entries(cls, value):
        entries = np.array(value, dtype=complex)
        if entries.ndim != 2 or entries.size == 0: raise ValueError('entries must be a nonempty 2-D array')
        if not np.all(np.isfinite(entries)): raise ValueError('entries must be finite')
        return entries

    @model_validator(mode='after')
    def validate_hop_shape(self):
        if self.hop == HopEnum.FIRST and self.cols != 2: raise ValueError(f'a first hop matrix is L×2, got {self.rows}×{self.cols}')
        if self.hop == HopEnum.SECOND and self.rows != 2: raise ValueError(f'a second hop matrix is 2×L, got {self.rows}×{self.cols}')
        return self

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def relays(self) -> int:
        return self.rows if self.hop == HopEnum.FIRST else self.cols



class PairBlock(BaseModel):
    '''
    Channels of relay pair m: 𝐇_m (sources to relays 2m−1, 2m) and 𝐆_m (relays 2m−1, 2m to destinations), with
    𝐆_m = [[g_{1,2m−1}, g_{2,2m−1}], [g_{1,2m}, g_{2,2m}]].
    '''
    h: np.ndarray = Field(description='𝐇_m, 2×2.')
    g: np.ndarray = Field(description='𝐆_m, 2×2.')

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator('h', 'g', mode='before')
    @classmethod
    def validate_block(cls, value):
        block = np.array(value, dtype=complex)
        if block.shape != (2, 2): raise ValueError('pair blocks are 2×2')
        return block



def sample_batch(model: FadingModel, rows: int, cols: int, count: int, stream: RandomStream) -> np.ndarray:
    'count i.i.d. matrices, shape (count, rows, cols).'
    if min(rows, cols, count) < 1: raise DimensionMismatchError(f'dimensions must be positive, got {count}×{rows}×{cols}')
    return model.sample(stream.generator(), (count, rows, cols))



def sample_matrix(model: FadingModel, rows: int, cols: int, stream: RandomStream, hop: HopEnum | None = None) -> ChannelMatrix:
    '''
    One matrix with i.i.d. entries. Without `hop`, a matrix with 2 columns is a first hop matrix and one with 2 rows a
    second hop matrix; pass `hop` for a 2×2 second hop draw.
    '''
    if hop is None:
        if cols != 2 and rows != 2: raise DimensionMismatchError(f'a {rows}×{cols} matrix belongs to neither hop, which are L×2 and 2×L')
        hop = HopEnum.FIRST if cols == 2 else HopEnum.SECOND
    if (hop == HopEnum.FIRST and cols != 2) or (hop == HopEnum.SECOND and rows != 2):
        raise DimensionMismatchError(f'a {hop.value} hop matrix cannot be {rows}×{cols}')
    return ChannelMatrix(hop=hop, entries=sample_batch(model, rows, cols, 1, stream)[0])



def _check_square2(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m)
    if m.shape[-2:] != (2, 2): raise DimensionMismatchError(f'expected 2×2 matrices, got shape {m.shape}')
    return m



def det2(m: np.ndarray) -> complex | np.ndarray:
    'm₁₁m₂₂ − m₁₂m₂₁, over any leading batch dimensions.'
    m = _check_square2(m)
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    return complex(det) if m.ndim == 2 else det



def f2_map(m: np.ndarray) -> np.ndarray:
    'F₂([[a₁₁, a₁₂], [a₂₁, a₂₂]]) = [[a₂₂, a₁₂], [a₂₁, a₁₁]]; works on any dtype and batch shape.'
    m = _check_square2(m)
    top = np.stack([m[..., 1, 1], m[..., 0, 1]], axis=-1)
    bottom = np.stack([m[..., 1, 0], m[..., 0, 0]], axis=-1)
    return np.stack([top, bottom], axis=-2)



def _check_pairs(relays: int, pairs: int):
    if pairs < 1: raise DimensionMismatchError(f'at least one relay pair is needed, got M = {pairs}')
    if relays < 2 * pairs: raise DimensionMismatchError(f'{pairs} relay pairs need L ≥ {2 * pairs} relays, got L = {relays}')



def f_map_array(a: np.ndarray, pairs: int) -> np.ndarray:
    '''
    F(𝐀) = [F₂(𝐀₁), …, F₂(𝐀_M)] over leading batch dimensions: (..., L, 2) → (..., 2, 2M). Rows beyond 2M are ignored.
    '''
    a = np.asarray(a)
    if a.shape[-1] != 2: raise DimensionMismatchError(f'expected L×2 matrices, got shape {a.shape}')
    _check_pairs(a.shape[-2], pairs)
    blocks = f2_map(a[..., :2 * pairs, :].reshape(a.shape[:-2] + (pairs, 2, 2)))
    return np.swapaxes(blocks, -3, -2).reshape(a.shape[:-2] + (2, 2 * pairs))



def f_map_inverse_array(g: np.ndarray, pairs: int) -> np.ndarray:
    '(..., 2, 2M) → (..., 2M, 2), the inverse of `f_map_array` on the first 2M rows.'
    g = np.asarray(g)
    if g.shape[-2] != 2: raise DimensionMismatchError(f'expected 2×L matrices, got shape {g.shape}')
    _check_pairs(g.shape[-1], pairs)
    blocks = np.swapaxes(g[..., :, :2 * pairs].reshape(g.shape[:-2] + (2, pairs, 2)), -3, -2)
    return f2_map(blocks).reshape(g.shape[:-2] + (2 * pairs, 2))



def f_map(h: ChannelMatrix, pairs: int) -> ChannelMatrix:
    'F applied to a first hop matrix; only relays 1..2M are used.'
    if h.hop != HopEnum.FIRST: raise DimensionMismatchError('F maps first hop matrices')
    return ChannelMatrix(hop=HopEnum.SECOND, entries=f_map_array(h.entries, pairs))



def f_map_inverse(g: ChannelMatrix, pairs: int) -> ChannelMatrix:
    if g.hop != HopEnum.SECOND: raise DimensionMismatchError('the inverse of F maps second hop matrices')
    return ChannelMatrix(hop=HopEnum.FIRST, entries=f_map_inverse_array(g.entries, pairs))



def block_dets(h: np.ndarray, pairs: int) -> np.ndarray:
    'det(𝐇_m) for m = 1..M over leading batch dimensions: (..., L, 2) → (..., M).'
    h = np.asarray(h)
    _check_pairs(h.shape[-2], pairs)
    return det2(h[..., :2 * pairs, :].reshape(h.shape[:-2] + (pairs, 2, 2)))



def split_blocks(h: ChannelMatrix, g: ChannelMatrix) -> list[PairBlock]:
    '(𝐇_m, 𝐆_m) for every full relay pair shared by the two hops.'
    if h.hop != HopEnum.FIRST or g.hop != HopEnum.SECOND: raise DimensionMismatchError('expected a first and a second hop matrix')
    pairs = min(h.rows, g.cols) // 2
    _check_pairs(min(h.rows, g.cols), pairs)
    return [
        PairBlock(h=h.entries[2 * m:2 * m + 2, :], g=g.entries[:, 2 * m:2 * m + 2].T)
        for m in range(pairs)
    ]
