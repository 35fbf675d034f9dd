from enum import Enum, IntEnum



class ExitCodeEnum(IntEnum):
    '''
    Process exit codes of the `ergodic-in` command line.
    '''
    SUCCESS = 0 # Every requested row was written, or every verification check passed.
    USAGE_ERROR = 1 # Unknown flag or subcommand, or a configuration that does not validate.
    RUNTIME_ERROR = 2 # Something failed while computing or writing, or a verification check failed.



class FadingKindEnum(str, Enum):
    '''
    Fading laws of the i.i.d. channel coefficients. All of them draw the phase uniformly on [0, 2π) and are normalized to
    E[|x|²] = 1.

    - UNIFORM_PHASE: |x| = 1, only the phase is random.
    - RAYLEIGH: x ~ CN(0, 1).
    - AMPLITUDE_LAW: |x| follows a user supplied (pre-normalized) sampler, phase independent and uniform.
    '''
    UNIFORM_PHASE = 'uniform-phase'
    RAYLEIGH = 'rayleigh'
    AMPLITUDE_LAW = 'amplitude-law'



class HopEnum(str, Enum):
    '''
    - FIRST: sources to relays, L×2 matrices.
    - SECOND: relays to destinations, 2×L matrices.
    '''
    FIRST = 'first'
    SECOND = 'second'



class QuantizerKindEnum(str, Enum):
    GRID = 'grid' # Δ(ℤ + jℤ) lattice, per real and imaginary part.
    PHASE = 'phase' # N angle bins per entry, for unit modulus channels.
    SCHEDULE = 'schedule' # Grid quantizer with (Δ, N) taken from the asymptotic schedule.



class SinrEstimatorEnum(str, Enum):
    '''
    How a matched pair is turned into a rate.

    - REALIZED: the SINR of the realized (first hop, second hop) pair.
    - CELL_MIN: the minimum over the cell center, the realized matrix and sampled cell corners, approximating the minimum
      over the whole cell.
    '''
    REALIZED = 'realized'
    CELL_MIN = 'cell-min'



class GapBoundKindEnum(str, Enum):
    '''
    Upper bound attached to an observed R_mimo − R_in gap.
    '''
    UNIFORM_TWO_RELAY = 'uniform-two-relay' # Uniform phase, L = 2: at most 4.
    AMPLITUDE_TWO_RELAY = 'amplitude-two-relay' # Amplitude law, L = 2: amplitude-only expectation.
    UNIFORM_LIMIT = 'uniform-limit' # Uniform phase, L → ∞: 4 log π − 4.
    AMPLITUDE_LIMIT = 'amplitude-limit' # Amplitude law, L → ∞: 4 − 4 log E[|det H₁|].



class QuantityEnum(str, Enum):
    '''
    Values of the `quantity` column of the CSV output.
    '''
    R_IN = 'r_in'
    R_MIMO = 'r_mimo'
    RATIO = 'ratio' # R_in / R_mimo
    GAP = 'gap'
    BOUND_T2 = 'bound_t2'
    BOUND_T3 = 'bound_t3'
    BOUND_FINITE = 'bound_finite' # Finite M bound whose L → ∞ value is the limit line.
    LIMIT_T4 = 'limit_t4'
    LIMIT_T5 = 'limit_t5'
    DELTA_LIMIT = 'delta_limit'
    R_IA = 'r_ia'
    IC_UPPER = 'ic_upper'
    IC_GAP = 'ic_gap'
    PAIRING_RATE = 'pairing_rate'
    PAIRING_RATE_MATCHED = 'pairing_rate_matched'
    MATCHED_FRACTION = 'matched_fraction'



class VerifySuiteEnum(str, Enum):
    LEMMAS = 'lemmas'
    CONSTANTS = 'constants'
    NEUTRALIZATION = 'neutralization'
    GAPS = 'gaps'
    IC = 'ic'
    ALL = 'all'



class CommandEnum(str, Enum):
    RATES = 'rates' # R_in and R_mimo against P.
    GAP_VS_POWER = 'gap-vs-power'
    GAP_VS_RELAYS = 'gap-vs-relays'
    PAIRING_SIM = 'pairing-sim' # Block simulation of ergodic interference neutralization.
    IC_GAP = 'ic-gap' # Ergodic interference alignment over the K-user interference channel.
    CONSTANTS = 'constants'
    VERIFY = 'verify'



class ModelChoiceEnum(str, Enum):
    '''
    Fading laws selectable from the command line. NAKAGAMI builds an amplitude law with shape `nakagami_m`.
    '''
    UNIFORM_PHASE = 'uniform-phase'
    RAYLEIGH = 'rayleigh'
    NAKAGAMI = 'nakagami'
