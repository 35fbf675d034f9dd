from typing import ClassVar

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ergodic_in.base import DimensionMismatchError, ParameterDomainError, RandomStream
from ergodic_in.enum import HopEnum
from ergodic_in.fading import ChannelMatrix, FadingModel
from ergodic_in.pairing import CellId, Quantizer, cell_image_under_f, codes, concentration_probability_bound



class IndexSets(BaseModel):
    '''
    𝒯(𝐐) for every occupied cell of one hop: the 1-based time indices t ∈ {1, …, n_B} whose channel falls in the cell,
    in increasing order. Cells are kept in order of first occurrence.
    '''
    hop: HopEnum = Field(description='Hop the indices were collected on.')
    n_b: int = Field(description='Block length n_B the indices are drawn from.', ge=0)
    cells: dict[CellId, list[int]] = Field(description='Time indices per cell.', default_factory=dict)

    model_config = ConfigDict(frozen=True)

    @model_validator(mode='after')
    def validate_cells(self):
        seen: set[int] = set()
        for cell, indices in self.cells.items():
            if cell.hop != self.hop: raise ValueError(f'{cell.hop.value} hop cell in {self.hop.value} hop index sets')
            if any(t < 1 or t > self.n_b for t in indices): raise ValueError(f'time indices must lie in 1..{self.n_b}')
            if seen.intersection(indices) or len(set(indices)) != len(indices): raise ValueError('index lists must be disjoint')
            seen.update(indices)
        return self

    def cardinality(self, cell: CellId) -> int:
        return len(self.cells.get(cell, []))

    def covered(self) -> int:
        'Number of time indices inside some cell.'
        return sum(len(indices) for indices in self.cells.values())



def _group_codes(flat: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    '''
    Distinct rows of `flat` in order of first occurrence, with the positions of each.
    '''
    if flat.shape[0] == 0: return flat, []
    unique, first, inverse = np.unique(flat, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    by_first = np.argsort(first, kind='stable')
    rank = np.empty_like(by_first)
    rank[by_first] = np.arange(by_first.size)
    order = np.argsort(rank[inverse], kind='stable')
    counts = np.bincount(rank[inverse], minlength=unique.shape[0])
    return unique[by_first], np.split(order, np.cumsum(counts)[:-1])



def build_index_sets(q: Quantizer, seq: list[ChannelMatrix] | np.ndarray, hop: HopEnum | None = None) -> IndexSets:
    '''
    Collect 𝒯₁ (first hop) or 𝒯₂ (second hop) over a block.

    `seq` is a list of `ChannelMatrix` or an (n_B, rows, cols) array; an array needs `hop`, since 2×2 matrices belong
    to either hop. A list carries its own hop, and a `hop` given with it must agree. Out of range matrices (grid
    quantizer) appear in no list.
    '''
    if isinstance(seq, np.ndarray):
        if hop is None: raise DimensionMismatchError('the hop of an array block must be given')
        batch = seq
    else:
        if not seq: return IndexSets(hop=hop or HopEnum.FIRST, n_b=0)
        hops = {m.hop for m in seq}
        if len(hops) > 1: raise DimensionMismatchError('a block mixes first and second hop matrices')
        if hop is not None and hop not in hops: raise DimensionMismatchError(f'{hops.pop().value} hop matrices given as {hop.value} hop')
        hop = hops.pop()
        batch = np.stack([m.entries for m in seq])

    n_b = batch.shape[0]
    cell_codes, valid = codes(q, batch)
    positions = np.flatnonzero(valid)
    unique, groups = _group_codes(cell_codes[positions].reshape(positions.size, int(np.prod(cell_codes.shape[1:]))))
    shape = tuple(q.dims)
    cells = {
        CellId(kind=q.kind, hop=hop, shape=shape, coords=tuple(row.tolist())): (positions[group] + 1).tolist()
        for row, group in zip(unique, groups)
    }
    return IndexSets(hop=hop, n_b=n_b, cells=cells)



def match_pairs(first: IndexSets, second: IndexSets, pairs: int) -> list[tuple[int, int]]:
    '''
    Pair the first k indices of 𝒯₁(𝐐) with the first k indices of 𝒯₂(F(𝐐)), k = min of the two cardinalities, for
    every first hop cell 𝐐. Unmatched indices stay idle.
    '''
    if first.hop != HopEnum.FIRST or second.hop != HopEnum.SECOND: raise DimensionMismatchError('expected first then second hop index sets')
    matched: list[tuple[int, int]] = []
    for cell, t1 in first.cells.items():
        t2 = second.cells.get(cell_image_under_f(cell, pairs), [])
        matched.extend(zip(t1, t2))
    return matched



class ConcentrationReport(BaseModel):
    '''
    Empirical frequency of the event "every cell frequency is within δ of its probability, on both hops" over repeated
    blocks, next to its guaranteed lower bound. The cell probability is the frequency pooled over all repetitions.
    '''
    repetitions: int = Field(description='Number of blocks drawn.', ge=1)
    n_b: int = Field(description='Block length.', ge=1)
    tolerance: float = Field(description='δ.', gt=0)
    event_frequency: float = Field(description='Fraction of blocks where the event held.', ge=0, le=1)
    max_deviation: float = Field(description='Largest cell deviation seen over all blocks and both hops.', ge=0)
    bound: float = Field(description='Guaranteed lower bound on the event probability.', ge=0, le=1)

    _example: ClassVar[dict] = {
        'repetitions': 100, 'n_b': 10000, 'tolerance': 0.05, 'event_frequency': 1.0, 'max_deviation': 0.012, 'bound': 0.36,
    }
    model_config = ConfigDict(frozen=True, json_schema_extra={'examples': [_example]})

    @property
    def honors_bound(self) -> bool:
        # Three binomial standard errors of slack at the bound.
        slack = 3 * (self.bound * (1 - self.bound) / self.repetitions) ** 0.5
        return self.event_frequency >= self.bound - slack



def _cell_frequencies(q: Quantizer, batches: np.ndarray) -> np.ndarray:
    'Per repetition cell frequencies, shape (repetitions, occupied cells).'
    repetitions, n_b = batches.shape[:2]
    cell_codes, valid = codes(q, batches)
    flat = cell_codes.reshape(repetitions * n_b, -1)
    keep = valid.reshape(-1)
    _, inverse = np.unique(flat[keep], axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    width = int(inverse.max()) + 1 if inverse.size else 1
    rep = np.repeat(np.arange(repetitions), n_b)[keep]
    return np.bincount(rep * width + inverse, minlength=repetitions * width).reshape(repetitions, width) / n_b



def index_set_concentration(
    q: Quantizer, model: FadingModel, n_b: int, tolerance: float, repetitions: int, stream: RandomStream,
) -> ConcentrationReport:
    '''
    Draw `repetitions` blocks of n_B first hop (q.dims) and second hop (transposed dims) matrices and measure how often
    all cell frequencies concentrate within `tolerance`.
    '''
    if repetitions < 1 or n_b < 1: raise ParameterDomainError('repetitions and n_B must be positive')
    rows, cols = q.dims
    second_q = q.with_dims((cols, rows))
    generator_first, generator_second = stream.substream(0).generator(), stream.substream(1).generator()
    first = model.sample(generator_first, (repetitions, n_b, rows, cols))
    second = model.sample(generator_second, (repetitions, n_b, cols, rows))

    deviations = []
    for quantizer, batches in ((q, first), (second_q, second)):
        freqs = _cell_frequencies(quantizer, batches)
        deviations.append(np.max(np.abs(freqs - freqs.mean(axis=0)), axis=1))
    worst = np.maximum(*deviations)

    return ConcentrationReport(
        repetitions=repetitions,
        n_b=n_b,
        tolerance=tolerance,
        event_frequency=float(np.mean(worst <= tolerance)),
        max_deviation=float(worst.max()),
        bound=concentration_probability_bound(q.cardinality(), second_q.cardinality(), n_b, tolerance),
    )
