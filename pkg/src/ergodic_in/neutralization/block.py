from typing import ClassVar

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from ergodic_in.base import DimensionMismatchError, ParameterDomainError, RandomStream
from ergodic_in.enum import HopEnum, SinrEstimatorEnum
from ergodic_in.fading import FadingModel, f_map_array
from ergodic_in.neutralization import DET_FLOOR, gain_diagonal, sinr_batch
from ergodic_in.pairing import Quantizer
from ergodic_in.pairing.matching import build_index_sets, match_pairs



CORNER_PROBES = 8



class BlockResult(BaseModel):
    '''
    Outcome of one block of n_B channel uses on each hop.

    `rate1`/`rate2` average log₂(1 + SINR_i) over all n_B slots with idle slots counting 0, the achievable rate of the
    block. `matched_rate1`/`matched_rate2` average over the matched pairs only.
    '''
    n_b: int = Field(description='Block length n_B.', ge=1)
    rate1: float = Field(description='Rate of user 1 per channel use.', ge=0)
    rate2: float = Field(description='Rate of user 2 per channel use.', ge=0)
    matched_rate1: float = Field(description='Mean rate of user 1 over matched pairs.', ge=0)
    matched_rate2: float = Field(description='Mean rate of user 2 over matched pairs.', ge=0)
    matched_fraction: float = Field(description='Fraction of first hop slots forwarded in a matched pair.', ge=0, le=1)
    matched_pairs: int = Field(description='Pairs that carried data.', ge=0)
    degenerate_pairs: int = Field(description='Matched pairs skipped because their cell center is singular.', ge=0)

    _example: ClassVar[dict] = {
        'n_b': 100000, 'rate1': 0.2, 'rate2': 0.2, 'matched_rate1': 2.19, 'matched_rate2': 2.19,
        'matched_fraction': 0.09, 'matched_pairs': 9100, 'degenerate_pairs': 0,
    }
    model_config = ConfigDict(frozen=True, json_schema_extra={'examples': [_example]})

    @classmethod
    def idle(cls, n_b: int, degenerate_pairs: int = 0) -> 'BlockResult':
        'A block in which no pair carried data.'
        return cls(
            n_b=n_b, rate1=0.0, rate2=0.0, matched_rate1=0.0, matched_rate2=0.0,
            matched_fraction=0.0, matched_pairs=0, degenerate_pairs=degenerate_pairs,
        )

    @property
    def sum_rate(self) -> float:
        return self.rate1 + self.rate2



def _cell_min_sinr(
    h: np.ndarray, g: np.ndarray, centers: np.ndarray, diagonal: np.ndarray, p: float,
    quant: Quantizer, pairs: int, stream: RandomStream,
) -> np.ndarray:
    '''
    Minimum SINR over the realized pair, the cell centers (𝐐, F(𝐐)) and CORNER_PROBES random corner pairs of the two
    cells, all under the center based gains.
    '''
    generator = stream.generator()
    image_centers = f_map_array(centers, pairs)
    candidates = [sinr_batch(h, g, p, diagonal), sinr_batch(centers, image_centers, p, diagonal)]
    first_q, second_q = quant.with_dims((2 * pairs, 2)), quant.with_dims((2, 2 * pairs))
    h_corners = first_q.corners(centers, generator, CORNER_PROBES)
    g_corners = second_q.corners(image_centers, generator, CORNER_PROBES)
    candidates.extend(sinr_batch(h_corner, g_corner, p, diagonal) for h_corner, g_corner in zip(h_corners, g_corners))
    return np.min(np.stack(candidates), axis=0)



def simulate_block(
    model: FadingModel,
    relays: int,
    p: float,
    n_b: int,
    quant: Quantizer,
    stream: RandomStream,
    estimator: SinrEstimatorEnum = SinrEstimatorEnum.REALIZED,
    det_floor: float = DET_FLOOR,
) -> BlockResult:
    '''
    Ergodic interference neutralization over one block.

    Draws n_B first hop and n_B second hop realizations, keeps relays 1..2M, collects the time index sets of every cell,
    pairs 𝒯₁(𝐐) with 𝒯₂(F(𝐐)) and forwards each matched first hop slot with the gains of its cell center 𝐐. `quant`
    fixes the quantizer family and parameters; its dims are replaced by 2M×2 and 2×2M for the two hops.
    '''
    pairs = relays // 2
    if pairs < 1: raise DimensionMismatchError(f'at least two relays are needed, got {relays}')
    if n_b < 1: raise ParameterDomainError(f'n_B must be at least 1, got {n_b}')

    h = model.sample(stream.substream(0).generator(), (n_b, relays, 2))[:, :2 * pairs, :]
    g = model.sample(stream.substream(1).generator(), (n_b, 2, relays))[:, :, :2 * pairs]
    first_q, second_q = quant.with_dims((2 * pairs, 2)), quant.with_dims((2, 2 * pairs))

    matched = match_pairs(
        build_index_sets(first_q, h, HopEnum.FIRST),
        build_index_sets(second_q, g, HopEnum.SECOND),
        pairs,
    )
    if not matched:
        logger.debug('block n_B={}: no matched pairs', n_b)
        return BlockResult.idle(n_b)
    t1 = np.array([a for a, _ in matched], dtype=np.int64) - 1
    t2 = np.array([b for _, b in matched], dtype=np.int64) - 1

    h_matched, g_matched = h[t1], g[t2]
    centers = first_q.centers(first_q.codes(h_matched)[0])
    diagonal, degenerate = gain_diagonal(centers, p, det_floor)
    usable = ~np.any(degenerate, axis=-1)
    h_matched, g_matched, centers, diagonal = h_matched[usable], g_matched[usable], centers[usable], diagonal[usable]
    if not usable.any():
        logger.debug('block n_B={}: every matched pair is degenerate', n_b)
        return BlockResult.idle(n_b, degenerate_pairs=len(matched))

    if estimator == SinrEstimatorEnum.CELL_MIN:
        sinr = _cell_min_sinr(h_matched, g_matched, centers, diagonal, p, quant, pairs, stream.substream(2))
    else:
        sinr = sinr_batch(h_matched, g_matched, p, diagonal)
    rates = np.log2(1 + sinr)

    used = int(usable.sum())
    degenerate_count = len(matched) - used
    logger.debug('block n_B={}: {} matched pairs, {} degenerate, estimator {}', n_b, used, degenerate_count, estimator.value)
    totals = rates.sum(axis=0)
    means = totals / used
    return BlockResult(
        n_b=n_b,
        rate1=float(totals[0] / n_b),
        rate2=float(totals[1] / n_b),
        matched_rate1=float(means[0]),
        matched_rate2=float(means[1]),
        matched_fraction=used / n_b,
        matched_pairs=used,
        degenerate_pairs=degenerate_count,
    )
