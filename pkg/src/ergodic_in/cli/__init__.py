'''
`ergodic-in`, the experiment runner. Every subcommand sweeps its (L, P) grid and writes long format CSV rows; `verify`
runs the self checks and prints a pass/fail table.

Configuration comes, lowest precedence first, from the `SimConfig` defaults, a `--config` file of `key=value` lines,
the `ERGODIC_SEED` environment variable and the command line flags.
'''
import argparse
import csv
import io
import math
import os
import sys
from pathlib import Path
from typing import Annotated, ClassVar, Iterator, TextIO

import numpy as np
from joblib import parallel_config
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ergodic_in.base import ErgodicError, ParameterDomainError, RandomStream, RateEstimate
from ergodic_in.cli.verify import CheckResult, run_suite
from ergodic_in.enum import (
    CommandEnum, ExitCodeEnum, GapBoundKindEnum, ModelChoiceEnum, QuantityEnum, QuantizerKindEnum, SinrEstimatorEnum,
    VerifySuiteEnum,
)
from ergodic_in.fading import FadingModel
from ergodic_in.gaps import (
    RAYLEIGH_ABS_DET, UNIFORM_ABS_DET, amplitude_gap_limit, expected_abs_det_mc, expected_abs_det_squared_mc, gap_vs_relays,
)
from ergodic_in.icgap import IcConfig, ia_gap_bound_mc, ic_observed_gap_mc, pairwise_upper_mc, rate_ia_mc
from ergodic_in.neutralization.block import simulate_block
from ergodic_in.pairing import GridQuantizer, PhaseQuantizer, Quantizer, default_schedule
from ergodic_in.rates import db_to_linear, rate_in_mc, rate_point_mc



SEED_ENV = 'ERGODIC_SEED'
CSV_FIELDS = ['model', 'L', 'p_db', 'quantity', 'estimate', 'std_error', 'trials', 'seed']
CONSTANT_FIELDS = ['name', 'closed_form', 'estimate', 'std_error', 'trials', 'seed']
CHECK_FIELDS = ['check', 'status', 'detail']
DEFAULT_RELAYS = [2]
DEFAULT_RELAY_SWEEP = [2, 4, 8, 16, 32, 64]

BOUND_QUANTITY = {
    GapBoundKindEnum.UNIFORM_TWO_RELAY: QuantityEnum.BOUND_T2,
    GapBoundKindEnum.AMPLITUDE_TWO_RELAY: QuantityEnum.BOUND_T3,
    GapBoundKindEnum.UNIFORM_LIMIT: QuantityEnum.LIMIT_T4,
    GapBoundKindEnum.AMPLITUDE_LIMIT: QuantityEnum.LIMIT_T5,
}



class UsageError(ErgodicError):
    'Bad command line or configuration file.'



class QuantizerSpec(BaseModel):
    '''
    Quantizer choice of `pairing-sim`, written `phase:N`, `grid:Δ:N` or `schedule` on the command line. The matrix
    dimensions are filled in per L.
    '''
    kind: QuantizerKindEnum = Field(description='Quantizer family.', default=QuantizerKindEnum.PHASE)
    delta: float = Field(description='Grid interval Δ.', gt=0, default=0.1, allow_inf_nan=False)
    n: int = Field(description='Angle bins (phase) or range parameter (grid).', ge=1, default=32)

    _examples: ClassVar[list[dict]] = [{'kind': 'phase', 'n': 32}, {'kind': 'grid', 'delta': 0.1, 'n': 20}, {'kind': 'schedule'}]
    model_config = ConfigDict(frozen=True, json_schema_extra={'examples': _examples})

    def build(self, dims: tuple[int, int], n_b: int, pairs: int) -> Quantizer:
        match self.kind:
            case QuantizerKindEnum.GRID: return GridQuantizer(delta=self.delta, n=self.n, dims=dims)
            case QuantizerKindEnum.PHASE: return PhaseQuantizer(n=self.n, dims=dims)
            case QuantizerKindEnum.SCHEDULE: return default_schedule(n_b, pairs).quantizer(dims)



class SimConfig(BaseModel):
    'One validated experiment configuration.'
    command: CommandEnum = Field(description='Subcommand to run.')
    model: ModelChoiceEnum = Field(description='Fading law.', default=ModelChoiceEnum.RAYLEIGH)
    nakagami_m: float = Field(description='Nakagami shape m, for `model = nakagami`.', ge=0.5, default=2.0, allow_inf_nan=False)
    relays: Annotated[list[Annotated[int, Field(ge=2)]] | None, Field(
        description='Relay counts L; `gap-vs-relays` sweeps 2 to 64 and the rest use L = 2 when unset.',
    )] = None
    power_db: list[float] = Field(description='Transmit powers in dB.', default=[0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0], min_length=1)
    trials: int = Field(description='Monte Carlo trials per estimate.', ge=1, default=100_000)
    block_length: int = Field(description='Channel uses n_B per hop in `pairing-sim`.', ge=1, default=100_000)
    quantizer: QuantizerSpec = Field(description='Quantizer of `pairing-sim`.', default_factory=QuantizerSpec)
    estimator: SinrEstimatorEnum = Field(description='SINR estimator of `pairing-sim`.', default=SinrEstimatorEnum.REALIZED)
    seed: int = Field(description='Experiment seed.', ge=0, lt=2**64, default=0)
    output: Annotated[Path | None, Field(description='CSV destination; standard output when unset.')] = None
    threads: int = Field(description='Monte Carlo worker threads.', ge=1, default_factory=lambda: os.cpu_count() or 1)
    suite: VerifySuiteEnum = Field(description='Suite of `verify`.', default=VerifySuiteEnum.ALL)
    eps: float = Field(description='ε of the finite relay bounds.', gt=0, default=0.3, allow_inf_nan=False)
    users: int = Field(description='Users K of `ic-gap`.', ge=2, default=2)

    _example: ClassVar[dict] = {'command': 'rates', 'model': 'rayleigh', 'relays': [2], 'power_db': [0, 20, 40], 'trials': 100000, 'seed': 7}
    model_config = ConfigDict(frozen=True, json_schema_extra={'examples': [_example]})

    @field_validator('power_db', mode='after')
    @classmethod
    def validate_power_db(cls, value: list[float]):
        if not all(math.isfinite(p) for p in value): raise ValueError('powers must be finite')
        return value

    def fading_model(self) -> FadingModel:
        match self.model:
            case ModelChoiceEnum.UNIFORM_PHASE: return FadingModel.uniform_phase()
            case ModelChoiceEnum.RAYLEIGH: return FadingModel.rayleigh()
            case ModelChoiceEnum.NAKAGAMI: return FadingModel.nakagami(self.nakagami_m)

    def relay_list(self) -> list[int]:
        if self.relays is not None: return self.relays
        return DEFAULT_RELAY_SWEEP if self.command == CommandEnum.GAP_VS_RELAYS else DEFAULT_RELAYS

    def powers(self) -> list[tuple[float, float]]:
        '(dB, linear) pairs.'
        return [(p_db, db_to_linear(p_db)) for p_db in self.power_db]



class ResultRow(BaseModel):
    model: str = Field(description='Fading model name.')
    relays: int = Field(description='L, or K for the interference channel rows.', serialization_alias='L')
    p_db: float = Field(description='Transmit power in dB.')
    quantity: QuantityEnum = Field(description='What `estimate` is.')
    estimate: float = Field(description='Value.')
    std_error: float = Field(description='Standard error, 0 for a closed form.', ge=0)
    trials: int = Field(description='Trials behind the value.', ge=0)
    seed: int = Field(description='Experiment seed.')

    @classmethod
    def of(
        cls, cfg: SimConfig, model: FadingModel, relays: int, p_db: float, quantity: QuantityEnum, estimate: RateEstimate,
    ) -> 'ResultRow':
        return cls(
            model=model.name, relays=relays, p_db=p_db, quantity=quantity,
            estimate=estimate.mean, std_error=estimate.std_error, trials=estimate.trials, seed=cfg.seed,
        )

    def csv_record(self) -> dict:
        return self.model_dump(mode='json', by_alias=True)



def parse_power_list(text: str) -> list[float]:
    '`start:stop:step` (stop included when it is on the grid) or a comma list, in dB.'
    text = text.strip()
    if ':' not in text: return [float(part) for part in text.split(',') if part.strip()]
    parts = text.split(':')
    if len(parts) != 3: raise ParameterDomainError(f'a power range is start:stop:step, got {text!r}')
    start, stop, step = (float(part) for part in parts)
    if step <= 0 or stop < start: raise ParameterDomainError(f'a power range needs step > 0 and stop ≥ start, got {text!r}')
    count = math.floor((stop - start) / step + 1e-9) + 1
    return [round(start + k * step, 12) for k in range(count)]



def parse_relays(text: str) -> list[int]:
    return [int(part) for part in text.split(',') if part.strip()]



def parse_quantizer(text: str) -> QuantizerSpec:
    '`phase:N`, `grid:Δ:N` or `schedule`.'
    kind, *args = text.strip().split(':')
    match QuantizerKindEnum(kind), args:
        case QuantizerKindEnum.PHASE, [n]: return QuantizerSpec(kind=QuantizerKindEnum.PHASE, n=int(n))
        case QuantizerKindEnum.GRID, [delta, n]: return QuantizerSpec(kind=QuantizerKindEnum.GRID, delta=float(delta), n=int(n))
        case QuantizerKindEnum.SCHEDULE, []: return QuantizerSpec(kind=QuantizerKindEnum.SCHEDULE)
    raise ParameterDomainError(f'quantizer is phase:N, grid:DELTA:N or schedule, got {text!r}')



VALUE_PARSERS = {'power_db': parse_power_list, 'relays': parse_relays, 'quantizer': parse_quantizer}



def read_config_file(path: Path) -> dict:
    '''
    `key=value` lines; blank lines and `#` comments are skipped, keys are `SimConfig` field names written with `-` or
    `_`. List and quantizer values use the command line syntax.
    '''
    try:
        lines = path.read_text(encoding='utf-8').splitlines()
    except OSError as e:
        raise UsageError(f'cannot read config file {path}: {e}') from e

    values = {}
    for number, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith('#'): continue
        key, sep, value = line.partition('=')
        if not sep: raise UsageError(f'{path}:{number}: expected key=value, got {line!r}')
        key, value = key.strip().replace('-', '_'), value.strip()
        if key not in SimConfig.model_fields or key == 'command': raise UsageError(f'{path}:{number}: unknown key {key!r}')
        try:
            values[key] = VALUE_PARSERS[key](value) if key in VALUE_PARSERS else value
        except ValueError as e:
            raise UsageError(f'{path}:{number}: {e}') from e
    return values



class ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)



def build_parser() -> ArgumentParser:
    # Flags left out of the namespace when absent, so only explicit flags override the file and the environment.
    common = ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument('--config', type=Path, help='key=value configuration file')
    common.add_argument('--model', choices=[m.value for m in ModelChoiceEnum])
    common.add_argument('--nakagami-m', dest='nakagami_m', type=float)
    common.add_argument('--relays', type=parse_relays, help='comma list of relay counts L')
    common.add_argument('--power-db', dest='power_db', type=parse_power_list, help='start:stop:step or comma list, in dB')
    common.add_argument('--trials', type=int)
    common.add_argument('--block-length', dest='block_length', type=int, help='channel uses n_B per hop')
    common.add_argument('--quantizer', type=parse_quantizer, help='phase:N, grid:DELTA:N or schedule')
    common.add_argument('--estimator', choices=[e.value for e in SinrEstimatorEnum])
    common.add_argument('--seed', type=int)
    common.add_argument('--output', type=Path, help='CSV file, standard output when omitted')
    common.add_argument('--threads', type=int)
    common.add_argument('--suite', choices=[s.value for s in VerifySuiteEnum])
    common.add_argument('--eps', type=float)
    common.add_argument('--users', type=int, help='users K of the interference channel')
    common.add_argument('-v', '--verbose', action='count', help='-v for INFO, -vv for DEBUG logs on stderr')

    parser = ArgumentParser(prog='ergodic-in', description='Ergodic interference neutralization experiments.')
    commands = parser.add_subparsers(dest='command', required=True)
    for command, help_text in (
        (CommandEnum.RATES, 'R_in and R_mimo against P'),
        (CommandEnum.GAP_VS_POWER, 'R_mimo − R_in and its bounds against P'),
        (CommandEnum.GAP_VS_RELAYS, 'R_mimo − R_in and its bounds against L'),
        (CommandEnum.PAIRING_SIM, 'block simulation of the pairing scheme'),
        (CommandEnum.IC_GAP, 'ergodic interference alignment gap over the interference channel'),
        (CommandEnum.CONSTANTS, 'closed form constants next to their Monte Carlo estimates'),
        (CommandEnum.VERIFY, 'self checks'),
    ):
        commands.add_parser(command.value, parents=[common], help=help_text)
    return parser



def resolve_config(argv: list[str]) -> tuple[SimConfig, int]:
    'The validated configuration and the verbosity of a command line.'
    flags = vars(build_parser().parse_args(argv))
    verbosity = flags.pop('verbose', 0)
    config_path = flags.pop('config', None)

    values = read_config_file(config_path) if config_path is not None else {}
    if (env_seed := os.environ.get(SEED_ENV)) is not None:
        try:
            values['seed'] = int(env_seed)
        except ValueError as e:
            raise UsageError(f'{SEED_ENV} must be an integer, got {env_seed!r}') from e
    values.update(flags)
    try:
        return SimConfig.model_validate(values), verbosity
    except ValidationError as e:
        raise UsageError(str(e)) from e



def configure_logging(verbosity: int):
    logger.remove()
    logger.enable('ergodic_in')
    level = 'WARNING' if verbosity == 0 else 'INFO' if verbosity == 1 else 'DEBUG'
    logger.add(sys.stderr, level=level, format='{time:HH:mm:ss} | {level: <7} | {message}', diagnose=False)



def _point_stream(cfg: SimConfig, relays: int, p_db: float) -> RandomStream:
    # Keyed by the values of L and P, so a row is reproduced by a run of its own point alone.
    command = list(CommandEnum).index(cfg.command)
    high, low = divmod(int(np.float64(p_db).view(np.uint64)), 1 << 32)
    return RandomStream(seed=cfg.seed).substream(command, relays, high, low)



def rates_rows(cfg: SimConfig) -> Iterator[ResultRow]:
    model = cfg.fading_model()
    for relays in cfg.relay_list():
        for p_db, p in cfg.powers():
            point = rate_point_mc(model, relays, p, cfg.trials, _point_stream(cfg, relays, p_db))
            logger.info('rates {} L={} {} dB: R_in={:.4f} R_mimo={:.4f}', model.name, relays, p_db, point.r_in.mean, point.r_mimo.mean)
            yield ResultRow.of(cfg, model, relays, p_db, QuantityEnum.R_IN, point.r_in)
            yield ResultRow.of(cfg, model, relays, p_db, QuantityEnum.R_MIMO, point.r_mimo)
            yield ResultRow.of(cfg, model, relays, p_db, QuantityEnum.RATIO, point.ratio)



def gap_rows(cfg: SimConfig) -> Iterator[ResultRow]:
    'Rows of `gap-vs-power` and `gap-vs-relays`; the two differ in their default L.'
    model = cfg.fading_model()
    for relays in cfg.relay_list():
        for p_db, p in cfg.powers():
            (report,) = gap_vs_relays(model, p, [relays], cfg.trials, _point_stream(cfg, relays, p_db), cfg.eps)
            bound = RateEstimate(mean=report.bound, std_error=report.bound_std_error, trials=cfg.trials)
            yield ResultRow.of(cfg, model, relays, p_db, QuantityEnum.GAP, report.gap_estimate)
            yield ResultRow.of(cfg, model, relays, p_db, BOUND_QUANTITY[report.bound_kind], bound)
            if report.finite_bound is not None:
                yield ResultRow.of(cfg, model, relays, p_db, QuantityEnum.BOUND_FINITE, RateEstimate.exact(report.finite_bound, cfg.trials))
            if report.limit_slack is not None:
                yield ResultRow.of(cfg, model, relays, p_db, QuantityEnum.DELTA_LIMIT, RateEstimate.exact(report.limit_slack, cfg.trials))



def pairing_rows(cfg: SimConfig) -> Iterator[ResultRow]:
    model = cfg.fading_model()
    for relays in cfg.relay_list():
        pairs = relays // 2
        for p_db, p in cfg.powers():
            stream = _point_stream(cfg, relays, p_db)
            quant = cfg.quantizer.build((2 * pairs, 2), cfg.block_length, pairs)
            result = simulate_block(model, relays, p, cfg.block_length, quant, stream.substream(0), cfg.estimator)
            reference = rate_in_mc(model, relays, p, cfg.trials, stream.substream(1))
            logger.info(
                'pairing {} L={} {} dB: {:.4f} per use, {:.1%} matched, R_in={:.4f}',
                model.name, relays, p_db, result.sum_rate, result.matched_fraction, reference.mean,
            )
            n_b = cfg.block_length
            yield ResultRow.of(cfg, model, relays, p_db, QuantityEnum.PAIRING_RATE, RateEstimate.exact(result.sum_rate, n_b))
            yield ResultRow.of(
                cfg, model, relays, p_db, QuantityEnum.PAIRING_RATE_MATCHED,
                RateEstimate.exact(result.matched_rate1 + result.matched_rate2, max(result.matched_pairs, 1)),
            )
            yield ResultRow.of(cfg, model, relays, p_db, QuantityEnum.MATCHED_FRACTION, RateEstimate.exact(result.matched_fraction, n_b))
            yield ResultRow.of(cfg, model, relays, p_db, QuantityEnum.R_IN, reference)



def ic_rows(cfg: SimConfig) -> Iterator[ResultRow]:
    'Per-user rows of the K-user interference channel; the L column holds K.'
    model = cfg.fading_model()
    for p_db, p in cfg.powers():
        ic = IcConfig(k=cfg.users, p=p, model=model)
        stream = _point_stream(cfg, cfg.users, p_db)
        yield ResultRow.of(cfg, model, cfg.users, p_db, QuantityEnum.R_IA, rate_ia_mc(ic, cfg.trials, stream.substream(0)))
        yield ResultRow.of(cfg, model, cfg.users, p_db, QuantityEnum.IC_UPPER, pairwise_upper_mc(ic, cfg.trials, stream.substream(1)))
        yield ResultRow.of(cfg, model, cfg.users, p_db, QuantityEnum.IC_GAP, ia_gap_bound_mc(model, cfg.trials, stream.substream(2)))
        yield ResultRow.of(cfg, model, cfg.users, p_db, QuantityEnum.GAP, ic_observed_gap_mc(ic, cfg.trials, stream.substream(3)))



def _limit_estimate(edet: RateEstimate) -> RateEstimate:
    # 4 − 4log₂ E|det| with the delta method error.
    return RateEstimate(
        mean=amplitude_gap_limit(edet.mean), std_error=4 * edet.std_error / (math.log(2) * edet.mean), trials=edet.trials,
    )



def constant_records(cfg: SimConfig) -> Iterator[dict]:
    stream = RandomStream(seed=cfg.seed).substream(list(CommandEnum).index(CommandEnum.CONSTANTS))
    rayleigh, uniform = FadingModel.rayleigh(), FadingModel.uniform_phase()
    abs_det_rayleigh = expected_abs_det_mc(rayleigh, cfg.trials, stream.substream(0))
    abs_det_uniform = expected_abs_det_mc(uniform, cfg.trials, stream.substream(1))
    for name, closed_form, estimate in (
        ('abs_det_rayleigh', RAYLEIGH_ABS_DET, abs_det_rayleigh),
        ('abs_det_uniform', UNIFORM_ABS_DET, abs_det_uniform),
        ('abs_det_squared_rayleigh', 2.0, expected_abs_det_squared_mc(rayleigh, cfg.trials, stream.substream(2))),
        ('uniform_gap_limit', 4 * math.log2(math.pi) - 4, _limit_estimate(abs_det_uniform)),
        ('rayleigh_gap_limit', 4 - 4 * math.log2(RAYLEIGH_ABS_DET), _limit_estimate(abs_det_rayleigh)),
        ('ia_gap_rayleigh', 0.5 * math.log2(6), ia_gap_bound_mc(rayleigh, cfg.trials, stream.substream(3))),
    ):
        yield {
            'name': name, 'closed_form': closed_form, 'estimate': estimate.mean,
            'std_error': estimate.std_error, 'trials': estimate.trials, 'seed': cfg.seed,
        }



ROW_COMMANDS = {
    CommandEnum.RATES: rates_rows,
    CommandEnum.GAP_VS_POWER: gap_rows,
    CommandEnum.GAP_VS_RELAYS: gap_rows,
    CommandEnum.PAIRING_SIM: pairing_rows,
    CommandEnum.IC_GAP: ic_rows,
}



def _write(out: TextIO, fields: list[str], records: Iterator[dict]):
    writer = csv.DictWriter(out, fieldnames=fields, lineterminator='\n')
    writer.writeheader()
    for record in records:
        writer.writerow(record)



def execute(cfg: SimConfig, out: TextIO) -> ExitCodeEnum:
    match cfg.command:
        case CommandEnum.VERIFY:
            results: list[CheckResult] = run_suite(cfg.suite, cfg.trials, RandomStream(seed=cfg.seed).substream(
                list(CommandEnum).index(CommandEnum.VERIFY),
            ))
            _write(out, CHECK_FIELDS, ({'check': r.name, 'status': r.status, 'detail': r.detail} for r in results))
            return ExitCodeEnum.SUCCESS if all(r.passed for r in results) else ExitCodeEnum.RUNTIME_ERROR
        case CommandEnum.CONSTANTS:
            _write(out, CONSTANT_FIELDS, constant_records(cfg))
        case command:
            _write(out, CSV_FIELDS, (row.csv_record() for row in ROW_COMMANDS[command](cfg)))
    return ExitCodeEnum.SUCCESS



def run(argv: list[str]) -> int:
    try:
        cfg, verbosity = resolve_config(argv)
    except SystemExit as e: # --help
        return e.code if isinstance(e.code, int) else ExitCodeEnum.SUCCESS
    except (UsageError, ValueError) as e:
        print(f'ergodic-in: {e}', file=sys.stderr)
        return ExitCodeEnum.USAGE_ERROR

    configure_logging(verbosity)
    logger.info('{} with seed {} on {} threads', cfg.command.value, cfg.seed, cfg.threads)
    try:
        with parallel_config(n_jobs=cfg.threads, prefer='threads'):
            # A failed run writes nothing.
            buffer = io.StringIO()
            code = execute(cfg, buffer)
    except Exception as e:
        logger.error('{} failed: {}', cfg.command.value, e)
        logger.opt(exception=e).debug('traceback')
        return ExitCodeEnum.RUNTIME_ERROR

    if cfg.output is None:
        sys.stdout.write(buffer.getvalue())
    else:
        cfg.output.write_text(buffer.getvalue(), encoding='utf-8', newline='')
    return code



def main(argv: list[str] | None = None) -> int:
    return int(run(sys.argv[1:] if argv is None else argv))
