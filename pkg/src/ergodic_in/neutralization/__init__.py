import math
from typing import ClassVar, Final

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ergodic_in.base import DegenerateCellError, DimensionMismatchError, ParameterDomainError, RandomStream, RateEstimate, draw_samples
from ergodic_in.fading import ChannelMatrix, FadingModel, block_dets



DET_FLOOR: Final[float] = 1e-9
LAMBDA: Final[np.ndarray] = np.array([1.0, -1.0]) # diag(1, −1)



def gamma_factor(p: float) -> float:
    'γ = √(P / (1 + 2P)), the amplification magnitude meeting the relay power constraint.'
    if p < 0: raise ParameterDomainError(f'power must be nonnegative, got {p}')
    return math.sqrt(p / (1 + 2 * p))



def _as_array(m: ChannelMatrix | np.ndarray) -> np.ndarray:
    return m.entries if isinstance(m, ChannelMatrix) else np.asarray(m, dtype=complex)



def _pairs_of(h: np.ndarray) -> int:
    if h.shape[-1] != 2 or h.shape[-2] < 2: raise DimensionMismatchError(f'expected L×2 first hop matrices with L ≥ 2, got shape {h.shape}')
    return h.shape[-2] // 2



def unit_factors(q_center: np.ndarray, det_floor: float = DET_FLOOR) -> tuple[np.ndarray, np.ndarray]:
    '''
    det(𝐐_m)*/|det(𝐐_m)| per pair over leading batch dimensions, (..., 2M, 2) → (..., M), and the mask of pairs whose
    block is degenerate (|det| ≤ det_floor). Degenerate pairs get the factor 1.
    '''
    q_center = np.asarray(q_center)
    dets = block_dets(q_center, _pairs_of(q_center))
    magnitude = np.abs(dets)
    degenerate = magnitude <= det_floor
    safe = np.where(degenerate, 1.0, magnitude)
    return np.where(degenerate, 1.0, np.conj(dets) / safe), degenerate



def gain_diagonal(q_center: np.ndarray, p: float, det_floor: float = DET_FLOOR) -> tuple[np.ndarray, np.ndarray]:
    'Diagonal of Γ, (..., 2M): block m carries (+γu_m, −γu_m). Returned with the degenerate pair mask.'
    u, degenerate = unit_factors(q_center, det_floor)
    diagonal = gamma_factor(p) * u[..., :, np.newaxis] * LAMBDA
    return diagonal.reshape(u.shape[:-1] + (2 * u.shape[-1],)), degenerate



class RelayGains(BaseModel):
    '''
    Amplification of the 2M used relays. Relay pair m forwards with γ·u_m·Λ, u_m = det(𝐐_m)*/|det(𝐐_m)|, so Γ is
    block diagonal with diagonal blocks diag(γu_m, −γu_m) and every nonzero entry has magnitude γ.
    '''
    p: float = Field(description='Transmit power P, linear.', ge=0, allow_inf_nan=False)
    unit: np.ndarray = Field(description='u_m per relay pair, unit modulus.')

    _example: ClassVar[dict] = {'p': 1.0, 'unit': [1.0 + 0.0j]}
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, json_schema_extra={'examples': [_example]})

    @field_validator('unit', mode='before')
    @classmethod
    def validate_unit(cls, value):
        unit = np.array(value, dtype=complex).reshape(-1)
        if unit.size == 0: raise ValueError('at least one relay pair is needed')
        if not np.allclose(np.abs(unit), 1.0, rtol=0, atol=1e-12): raise ValueError('amplification factors must have unit modulus')
        return unit

    @property
    def pairs(self) -> int:
        return self.unit.size

    @property
    def gamma(self) -> float:
        return gamma_factor(self.p)

    @property
    def diagonal(self) -> np.ndarray:
        return (self.gamma * self.unit[:, np.newaxis] * LAMBDA).reshape(-1)

    @property
    def matrix(self) -> np.ndarray:
        'Γ, 2M×2M.'
        return np.diag(self.diagonal)



def relay_gain_matrix(q_center: ChannelMatrix | np.ndarray, p: float, det_floor: float = DET_FLOOR) -> RelayGains:
    q_center = _as_array(q_center)
    if q_center.ndim != 2 or q_center.shape[0] % 2: raise DimensionMismatchError(f'expected a 2M×2 center, got shape {q_center.shape}')
    u, degenerate = unit_factors(q_center, det_floor)
    if degenerate.any():
        raise DegenerateCellError(f'relay pairs {np.flatnonzero(degenerate) + 1} have |det| ≤ {det_floor}')
    return RelayGains(p=p, unit=u)



def effective_channel(g: ChannelMatrix | np.ndarray, gains: RelayGains, h: ChannelMatrix | np.ndarray) -> np.ndarray:
    '𝐆Γ𝐇, the 2×2 end-to-end channel from the sources to the destinations.'
    g, h = _as_array(g), _as_array(h)
    size = 2 * gains.pairs
    if g.shape != (2, size) or h.shape != (size, 2):
        raise DimensionMismatchError(f'{gains.pairs} relay pairs need a 2×{size} and a {size}×2 matrix, got {g.shape} and {h.shape}')
    return (g * gains.diagonal) @ h



class SinrPair(BaseModel):
    sinr1: float = Field(description='SINR at destination 1.', ge=0, allow_inf_nan=False)
    sinr2: float = Field(description='SINR at destination 2.', ge=0, allow_inf_nan=False)

    _example: ClassVar[dict] = {'sinr1': 0.8, 'sinr2': 0.8}
    model_config = ConfigDict(frozen=True, json_schema_extra={'examples': [_example]})

    def rates(self) -> tuple[float, float]:
        'log₂(1 + SINR_i).'
        return math.log2(1 + self.sinr1), math.log2(1 + self.sinr2)



def sinr_batch(h: np.ndarray, g: np.ndarray, p: float, diagonal: np.ndarray) -> np.ndarray:
    '''
    SINR at both destinations over leading batch dimensions, (..., 2).

    With Γ = diag(`diagonal`) the received signal at destination i is [𝐆Γ𝐇]_{i,i}, the interference
    [𝐆Γ𝐇]_{i,3−i} and the forwarded relay noise has power ∑_j |[𝐆Γ]_{i,j}|² on top of the unit receiver noise.
    Writing 𝐆 = F(𝐇) + Δ this is the quantization error form, with the residual interference coming from ΔΓ𝐇 only.
    '''
    g_gamma = g * diagonal[..., np.newaxis, :]
    end_to_end = g_gamma @ h
    signal = p * np.abs(np.diagonal(end_to_end, axis1=-2, axis2=-1)) ** 2
    interference = p * np.abs(np.diagonal(end_to_end[..., :, ::-1], axis1=-2, axis2=-1)) ** 2
    noise = 1 + np.sum(np.abs(g_gamma) ** 2, axis=-1)
    return signal / (interference + noise)



def sinr_exact(
    h: ChannelMatrix | np.ndarray,
    g: ChannelMatrix | np.ndarray,
    p: float,
    q_center: ChannelMatrix | np.ndarray | None = None,
    det_floor: float = DET_FLOOR,
) -> SinrPair:
    '''
    SINR of the realized pair (𝐇, 𝐆) when the relays amplify with the gains of `q_center` (the quantized first hop
    matrix of the cell, 𝐇 itself by default).
    '''
    h, g = _as_array(h), _as_array(g)
    gains = relay_gain_matrix(h if q_center is None else q_center, p, det_floor)
    size = 2 * gains.pairs
    if h.shape != (size, 2) or g.shape != (2, size):
        raise DimensionMismatchError(f'{gains.pairs} relay pairs need a {size}×2 and a 2×{size} matrix, got {h.shape} and {g.shape}')
    sinr1, sinr2 = sinr_batch(h, g, p, gains.diagonal)
    return SinrPair(sinr1=float(sinr1), sinr2=float(sinr2))



def noise_power_af(h: np.ndarray, p: float, dest: int) -> np.ndarray:
    'σ²_AF,i = γ² ∑_m (|h_{2m−1, 3−i}|² + |h_{2m, 3−i}|²) over the first 2M rows, over leading batch dimensions.'
    h = np.asarray(h)
    pairs = _pairs_of(h)
    return gamma_factor(p) ** 2 * np.sum(np.abs(h[..., :2 * pairs, 2 - dest]) ** 2, axis=-1)



def asymptotic_sinr(h: ChannelMatrix | np.ndarray, p: float, dest: int) -> float | np.ndarray:
    '''
    Limit of the SINR at destination `dest` as the quantization error vanishes:
    Pγ²(∑_m |det 𝐇_m|)² / (1 + σ²_AF,i), with M = ⌊L/2⌋. Works over leading batch dimensions (..., L, 2).
    '''
    if dest not in (1, 2): raise ParameterDomainError(f'destination must be 1 or 2, got {dest}')
    h = _as_array(h)
    pairs = _pairs_of(h)
    det_sum = np.sum(np.abs(block_dets(h, pairs)), axis=-1)
    sinr = p * gamma_factor(p) ** 2 * det_sum ** 2 / (1 + noise_power_af(h, p, dest))
    return float(sinr) if h.ndim == 2 else sinr



def relay_transmit_power(h: ChannelMatrix | np.ndarray, p: float) -> np.ndarray:
    '''
    Power γ²(P|h_{j,1}|² + P|h_{j,2}|² + 1) radiated by each relay j for one first hop realization, over leading batch
    dimensions (..., L, 2) → (..., L). Its mean over unit second moment fading is exactly P.
    '''
    h = _as_array(h)
    if h.shape[-1] != 2: raise DimensionMismatchError(f'expected L×2 first hop matrices, got shape {h.shape}')
    return gamma_factor(p) ** 2 * (p * np.sum(np.abs(h) ** 2, axis=-1) + 1)



def relay_power_mc(model: FadingModel, relays: int, p: float, trials: int, stream: RandomStream) -> list[RateEstimate]:
    'Per relay Monte Carlo mean of the transmit power, one estimate per relay.'
    if relays < 2: raise DimensionMismatchError(f'at least two relays are needed, got {relays}')
    powers = draw_samples(lambda gen, n: relay_transmit_power(model.sample(gen, (n, relays, 2)), p), trials, stream)
    estimates = [RateEstimate.from_samples(powers[:, j]) for j in range(relays)]
    logger.debug('relay power at P = {}: {}', p, [round(e.mean, 4) for e in estimates])
    return estimates
