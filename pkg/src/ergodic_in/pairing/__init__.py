import math
from typing import Annotated, ClassVar, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ergodic_in.base import DimensionMismatchError, ParameterDomainError, RandomStream
from ergodic_in.enum import HopEnum, QuantizerKindEnum
from ergodic_in.fading import ChannelMatrix, f_map_array, f_map_inverse_array



Dims = tuple[Annotated[int, Field(ge=1)], Annotated[int, Field(ge=1)]]



class GridQuantizer(BaseModel):
    '''
    Uniform lattice quantizer of the channel space.

    Every entry is quantized on its real and imaginary parts separately to the nearest point of Δ(ℤ + jℤ), using the
    half-open cell −Δ/2 ≤ re(a) − re(q) < Δ/2 (and the same for the imaginary part). Only centers with |re|, |im| ≤ ΔN
    exist, so a matrix with an entry beyond that range is in no cell.
    '''
    kind: Literal[QuantizerKindEnum.GRID] = QuantizerKindEnum.GRID
    delta: float = Field(description='Quantization interval Δ.', gt=0, allow_inf_nan=False)
    n: int = Field(description='Range parameter N: centers per axis run from −ΔN to ΔN.', ge=1)
    dims: Dims = Field(description='(rows, cols) of the quantized matrices.')

    _example: ClassVar[dict] = {'kind': 'grid', 'delta': 0.5, 'n': 4, 'dims': [2, 2]}
    model_config = ConfigDict(frozen=True, json_schema_extra={'examples': [_example]})

    @property
    def code_width(self) -> int:
        return 2

    def cardinality(self) -> int:
        'Number of cells, (2N + 1)^(2·rows·cols).'
        return (2 * self.n + 1) ** (2 * self.dims[0] * self.dims[1])

    def with_dims(self, dims: tuple[int, int]) -> 'GridQuantizer':
        return self.model_copy(update={'dims': tuple(dims)})

    def codes(self, batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        '''
        Integer cell coordinates of a batch (..., rows, cols) as (..., rows, cols, 2) with the real index first, and a
        (...) mask of the matrices that fall inside the covered range.
        '''
        codes = np.stack([
            np.floor(batch.real / self.delta + 0.5),
            np.floor(batch.imag / self.delta + 0.5),
        ], axis=-1).astype(np.int64)
        valid = np.all(np.abs(codes) <= self.n, axis=(-3, -2, -1))
        return codes, valid

    def centers(self, codes: np.ndarray) -> np.ndarray:
        return self.delta * (codes[..., 0] + 1j * codes[..., 1])

    def in_range(self, codes: np.ndarray) -> bool:
        return bool(np.all(np.abs(codes) <= self.n))

    def corners(self, centers: np.ndarray, generator: np.random.Generator, count: int) -> np.ndarray:
        'Random cell corners around each center: every real and imaginary part moves by ±Δ/2.'
        shape = (count,) + centers.shape
        re_sign = generator.choice([-1.0, 1.0], size=shape)
        im_sign = generator.choice([-1.0, 1.0], size=shape)
        return centers + self.delta / 2 * (re_sign + 1j * im_sign)



class PhaseQuantizer(BaseModel):
    '''
    Angle quantizer for unit modulus channels: bin k of an entry is centered at exp(j2πk/N) and covers angles in
    [2πk/N − π/N, 2πk/N + π/N). Every matrix is in exactly one cell.
    '''
    kind: Literal[QuantizerKindEnum.PHASE] = QuantizerKindEnum.PHASE
    n: int = Field(description='Number of angle bins per entry.', ge=1)
    dims: Dims = Field(description='(rows, cols) of the quantized matrices.')

    _example: ClassVar[dict] = {'kind': 'phase', 'n': 32, 'dims': [2, 2]}
    model_config = ConfigDict(frozen=True, json_schema_extra={'examples': [_example]})

    @property
    def code_width(self) -> int:
        return 1

    def cardinality(self) -> int:
        'Number of cells, N^(rows·cols).'
        return self.n ** (self.dims[0] * self.dims[1])

    def with_dims(self, dims: tuple[int, int]) -> 'PhaseQuantizer':
        return self.model_copy(update={'dims': tuple(dims)})

    def codes(self, batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        bins = np.floor(np.angle(batch) / (2 * math.pi / self.n) + 0.5).astype(np.int64) % self.n
        return bins[..., np.newaxis], np.ones(batch.shape[:-2], dtype=bool)

    def centers(self, codes: np.ndarray) -> np.ndarray:
        return np.exp(2j * math.pi * codes[..., 0] / self.n)

    def in_range(self, codes: np.ndarray) -> bool:
        return bool(np.all((codes >= 0) & (codes < self.n)))

    def corners(self, centers: np.ndarray, generator: np.random.Generator, count: int) -> np.ndarray:
        'Random cell corners around each center: every entry rotates by ±π/N.'
        sign = generator.choice([-1.0, 1.0], size=(count,) + centers.shape)
        return centers * np.exp(1j * math.pi / self.n * sign)



Quantizer = GridQuantizer | PhaseQuantizer



class CellId(BaseModel):
    '''
    A quantization cell, the region 𝒜₁(𝐐) (first hop) or 𝒜₂(𝐐) (second hop) around the quantized matrix 𝐐.

    `coords` lists the integer coordinates entry by entry in row-major order: a (re-index, im-index) pair per entry for
    a grid cell, one angle bin per entry for a phase cell.
    '''
    kind: QuantizerKindEnum = Field(description='Quantizer family the cell belongs to.')
    hop: HopEnum = Field(description='Hop of the quantized matrices.')
    shape: tuple[int, int] = Field(description='(rows, cols) of the quantized matrices.')
    coords: tuple[int, ...] = Field(description='Flattened integer coordinates.')

    _example: ClassVar[dict] = {'kind': 'phase', 'hop': 'first', 'shape': [2, 2], 'coords': [0, 8, 8, 16]}
    model_config = ConfigDict(frozen=True, json_schema_extra={'examples': [_example]})

    @model_validator(mode='after')
    def validate_coords(self):
        if self.kind == QuantizerKindEnum.SCHEDULE: raise ValueError('a schedule resolves to a grid quantizer before cells exist')
        width = 2 if self.kind == QuantizerKindEnum.GRID else 1
        if len(self.coords) != self.shape[0] * self.shape[1] * width:
            raise ValueError(f'a {self.kind.value} cell of shape {self.shape} has {self.shape[0] * self.shape[1] * width} coordinates')
        return self

    @classmethod
    def from_codes(cls, kind: QuantizerKindEnum, hop: HopEnum, codes: np.ndarray) -> 'CellId':
        'Build a cell from a (rows, cols, width) coordinate array.'
        return cls(kind=kind, hop=hop, shape=codes.shape[:2], coords=tuple(codes.ravel().tolist()))

    def array(self) -> np.ndarray:
        return np.array(self.coords, dtype=np.int64).reshape(self.shape + (-1,))



def _check_dims(q: Quantizer, shape: tuple[int, ...]):
    if tuple(shape[-2:]) != tuple(q.dims):
        raise DimensionMismatchError(f'quantizer expects {q.dims[0]}×{q.dims[1]} matrices, got {shape[-2]}×{shape[-1]}')



def codes(q: Quantizer, batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    'Vectorized `quantize`: coordinates (..., rows, cols, width) and the in-range mask.'
    batch = np.asarray(batch)
    _check_dims(q, batch.shape)
    return q.codes(batch)



def quantize(q: Quantizer, m: ChannelMatrix) -> CellId | None:
    'The cell containing `m`, or None when a grid entry is outside the covered range.'
    cell_codes, valid = codes(q, m.entries)
    if not valid: return None
    return CellId.from_codes(q.kind, m.hop, cell_codes)



def center(q: Quantizer, cell: CellId) -> ChannelMatrix:
    'The quantized matrix 𝐐 of a cell.'
    if cell.kind != q.kind: raise DimensionMismatchError(f'{cell.kind.value} cell given to a {q.kind.value} quantizer')
    _check_dims(q, cell.shape)
    cell_codes = cell.array()
    if not q.in_range(cell_codes): raise ParameterDomainError(f'cell {cell.coords} is outside the quantizer range')
    return ChannelMatrix(hop=cell.hop, entries=q.centers(cell_codes))



def _map_coords(cell_codes: np.ndarray, mapping, pairs: int) -> np.ndarray:
    # F permutes entries, so it acts on each coordinate plane separately.
    return np.moveaxis(mapping(np.moveaxis(cell_codes, -1, 0), pairs), 0, -1)



def codes_image_under_f(cell_codes: np.ndarray, pairs: int) -> np.ndarray:
    'Vectorized `cell_image_under_f` on first hop coordinates (..., 2M, 2, width).'
    return _map_coords(cell_codes, f_map_array, pairs)



def cell_image_under_f(cell: CellId, pairs: int) -> CellId:
    '''
    The second hop cell whose center is F(center(cell)), for a first hop cell of a 2M×2 quantizer.

    F only permutes entries and the cell shape is the same for every entry, so F maps the cell 𝒜₁(𝐐) onto 𝒜₂(F(𝐐))
    exactly and `quantize(F(H)) == cell_image_under_f(quantize(H))`.
    '''
    if cell.hop != HopEnum.FIRST or cell.shape != (2 * pairs, 2):
        raise DimensionMismatchError(f'expected a first hop {2 * pairs}×2 cell, got a {cell.hop.value} hop {cell.shape} cell')
    image = codes_image_under_f(cell.array(), pairs)
    return CellId.from_codes(cell.kind, HopEnum.SECOND, image)



def cell_preimage_under_f(cell: CellId, pairs: int) -> CellId:
    if cell.hop != HopEnum.SECOND or cell.shape != (2, 2 * pairs):
        raise DimensionMismatchError(f'expected a second hop 2×{2 * pairs} cell, got a {cell.hop.value} hop {cell.shape} cell')
    preimage = _map_coords(cell.array(), f_map_inverse_array, pairs)
    return CellId.from_codes(cell.kind, HopEnum.FIRST, preimage)



def corner_probes(q: Quantizer, cell: CellId, count: int, stream: RandomStream) -> np.ndarray:
    '''
    `count` matrices on corners of the cell, shape (count, rows, cols).

    A grid corner moves every real and imaginary part of the center by ±Δ/2; a phase corner rotates every entry of the
    center by ±π/N. Signs are drawn independently per entry.
    '''
    if count < 1: raise ParameterDomainError(f'count must be at least 1, got {count}')
    return q.corners(center(q, cell).entries, stream.generator(), count)



class QuantizerSchedule(BaseModel):
    '''
    Asymptotic parameter schedule of a block of n_B channel uses: Δ = n_B^(−1/(96M)), N = max(1, round(n_B^(1/(48M)))),
    δ = n_B^(−1/3). ΔN grows without bound while Δ shrinks, so the quantization error vanishes and the covered range
    fills the channel space. At desk scale N is still 1.
    '''
    delta: float = Field(description='Quantization interval Δ.', gt=0)
    n: int = Field(description='Range parameter N.', ge=1)
    tolerance: float = Field(description='Concentration tolerance δ.', gt=0)

    def quantizer(self, dims: tuple[int, int]) -> GridQuantizer:
        return GridQuantizer(delta=self.delta, n=self.n, dims=dims)



def default_schedule(n_b: int, pairs: int) -> QuantizerSchedule:
    if n_b < 2: raise ParameterDomainError(f'the schedule needs n_B ≥ 2, got {n_b}')
    if pairs < 1: raise ParameterDomainError(f'the schedule needs M ≥ 1, got {pairs}')
    log_n = math.log(n_b)
    return QuantizerSchedule(
        delta=math.exp(-log_n / (96 * pairs)),
        n=max(1, round(math.exp(log_n / (48 * pairs)))),
        tolerance=math.exp(-log_n / 3),
    )



def concentration_probability_bound(card_first: int, card_second: int, n_b: int, delta: float) -> float:
    '''
    Lower bound 1 − (card(𝒬₁) + card(𝒬₂)) / (2 n_B δ²), clamped at 0, on the probability that every cell frequency of
    a block lies within δ of its probability on both hops.
    '''
    if n_b < 1 or delta <= 0: raise ParameterDomainError('n_B and δ must be positive')
    return max(0.0, 1 - (card_first + card_second) / (2 * n_b * delta ** 2))
