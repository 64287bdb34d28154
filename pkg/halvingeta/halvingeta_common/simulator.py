"""Seeded Monte Carlo of block arrivals and difficulty retargets.

Two granularities draw from the same distribution:

- per_block draws every block time as an exponential with rate H / (2^32 * D)
  and retargets D <- D * R / t after each full interval;
- per_interval draws each interval's ratio r ~ Erlang(blocks, blocks) and
  scales it by the expected interval time.

Trials are split into chunks whose size depends only on the config. Chunk c
draws from SeedSequence(seed, spawn_key=(c,)), so the output is the same for
any number of workers.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Any, Iterable, Optional, TextIO

import numpy as np
from joblib import Parallel, delayed

from halvingeta.halvingeta_common.models import HalvingError, HeaderRecord, RetargetParams
from halvingeta.halvingeta_common.units import round_to_minute

logger = logging.getLogger(__name__)

TWO_POW_32 = 2.0**32
DEFAULT_SEED = 2016
MAX_SEED = 2**64

PER_INTERVAL_CHUNK = 1 << 16
# Upper bound on exponential draws held in memory at once by a per_block chunk.
PER_BLOCK_DRAWS = 1 << 21


class SimulationError(HalvingError):
    """Raised for an invalid simulation config or an unanswerable statistic."""


class Granularity(enum.Enum):
    PER_BLOCK = "per_block"
    PER_INTERVAL = "per_interval"


@dataclass(frozen=True)
class SimulationConfig:
    """One simulated halving: n intervals, the last holding M of k blocks (M defaults to k).

    `hashrate` defaults to the equilibrium rate 2^32 * D / block_target.
    `hashrate_factor` multiplies the hashrate from interval `step_interval` on.
    """

    k: int = 2016
    n: int = 1
    M: Optional[int] = None
    hashrate: Optional[float] = None
    initial_difficulty: float = 1.0
    trials: int = 100_000
    seed: int = DEFAULT_SEED
    granularity: Granularity = Granularity.PER_INTERVAL
    retarget: bool = True
    block_target: float = 10.0
    hashrate_factor: float = 1.0
    step_interval: int = 1
    workers: int = 1

    def __post_init__(self):
        if self.M is None:
            object.__setattr__(self, "M", self.k)
        if not isinstance(self.granularity, Granularity):
            try:
                object.__setattr__(self, "granularity", Granularity(self.granularity))
            except ValueError:
                raise SimulationError(f"unknown granularity {self.granularity!r}")

        if self.k < 3:
            raise SimulationError(f"k must be >= 3, got {self.k}")
        if self.n < 1:
            raise SimulationError(f"n must be >= 1, got {self.n}")
        if not 1 <= self.M <= self.k:
            raise SimulationError(f"M must be in [1, {self.k}], got {self.M}")
        if self.trials < 1:
            raise SimulationError(f"trials must be >= 1, got {self.trials}")
        if not 0 <= self.seed < MAX_SEED:
            raise SimulationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not self.initial_difficulty > 0:
            raise SimulationError("initial difficulty must be positive")
        if self.hashrate is not None and not self.hashrate > 0:
            raise SimulationError("hashrate must be positive")
        if not self.block_target > 0:
            raise SimulationError("block target must be positive")
        if not self.hashrate_factor > 0:
            raise SimulationError("hashrate factor must be positive")
        if not 1 <= self.step_interval <= self.n:
            raise SimulationError(f"step interval must be in [1, {self.n}]")
        if self.workers == 0:
            raise SimulationError("workers must be non-zero")

    @property
    def params(self) -> RetargetParams:
        return RetargetParams(self.k, self.block_target)

    @property
    def base_hashrate(self) -> float:
        if self.hashrate is not None:
            return self.hashrate
        return TWO_POW_32 * self.initial_difficulty / self.block_target

    @property
    def total_blocks(self) -> int:
        return (self.n - 1) * self.k + self.M

    def chunk_size(self) -> int:
        if self.granularity is Granularity.PER_BLOCK:
            return max(1, PER_BLOCK_DRAWS // self.k)
        return PER_INTERVAL_CHUNK

    def chunks(self) -> list[tuple[int, int]]:
        """(chunk index, rows) covering all trials in order."""
        size = self.chunk_size()
        full, rest = divmod(self.trials, size)
        out = [(index, size) for index in range(full)]
        if rest:
            out.append((full, rest))
        return out

    def to_mapping(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "n": self.n,
            "M": self.M,
            "hashrate": self.base_hashrate,
            "initial_difficulty": self.initial_difficulty,
            "trials": self.trials,
            "seed": self.seed,
            "granularity": self.granularity.value,
            "retarget": self.retarget,
            "block_target": self.block_target,
            "hashrate_factor": self.hashrate_factor,
            "step_interval": self.step_interval,
        }


@dataclass(frozen=True)
class SimulatedInterval:
    s: float
    t: float
    r: float
    difficulty: float


@dataclass(frozen=True)
class SimulationSummary:
    mean_T: float
    var_T: float
    se_mean: float
    se_var: float
    cov_adjacent: Optional[float]
    se_cov: Optional[float]
    trials: int

    def to_mapping(self) -> dict[str, Any]:
        return {
            "mean_T": self.mean_T,
            "var_T": self.var_T,
            "se_mean": self.se_mean,
            "se_var": self.se_var,
            "cov_adjacent": self.cov_adjacent,
            "se_cov": self.se_cov,
            "trials": self.trials,
        }


@dataclass(frozen=True)
class CovarianceEstimate:
    value: float
    se: float
    pairs: int
    lag: int


@dataclass
class _Chunk:
    t: np.ndarray
    s: Optional[np.ndarray] = None
    difficulty: Optional[np.ndarray] = None


def _rng(seed: int, chunk_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk_index,)))


def _speed(config: SimulationConfig, interval: int) -> float:
    return config.hashrate_factor if interval >= config.step_interval else 1.0


def _per_interval_chunk(config: SimulationConfig, rng, rows: int, detail: bool) -> _Chunk:
    k, n, R = config.k, config.n, config.params.retarget_target
    H = config.base_hashrate

    times = np.empty((rows, n))
    expected = np.empty((rows, n)) if detail else None
    difficulty = np.empty((rows, n)) if detail else None

    # Expected minutes per block at the base hashrate, i.e. 2^32 * D / H.
    if config.retarget:
        per_block = config.block_target / rng.gamma(k, 1.0 / k, size=rows)
    else:
        per_block = np.full(rows, TWO_POW_32 * config.initial_difficulty / H)

    for i in range(1, n + 1):
        blocks = k if i < n else config.M
        r = rng.gamma(blocks, 1.0 / blocks, size=rows)
        s = blocks * per_block / _speed(config, i)
        t = r * s
        times[:, i - 1] = t

        if detail:
            expected[:, i - 1] = s
            difficulty[:, i - 1] = per_block * H / TWO_POW_32

        if config.retarget and i < n:
            per_block = per_block * R / t

    return _Chunk(times, expected, difficulty)


def _block_sums(rng, rows: int, blocks: int, mean_block: np.ndarray) -> np.ndarray:
    return rng.standard_exponential((rows, blocks)).sum(axis=1) * mean_block


def _per_block_chunk(config: SimulationConfig, rng, rows: int, detail: bool) -> _Chunk:
    k, n, R = config.k, config.n, config.params.retarget_target
    H = config.base_hashrate

    times = np.empty((rows, n))
    expected = np.empty((rows, n)) if detail else None
    difficulty = np.empty((rows, n)) if detail else None

    D = np.full(rows, float(config.initial_difficulty))
    if config.retarget:
        t0 = _block_sums(rng, rows, k, TWO_POW_32 * D / H)
        D = D * R / t0

    for i in range(1, n + 1):
        blocks = k if i < n else config.M
        mean_block = TWO_POW_32 * D / (H * _speed(config, i))
        t = _block_sums(rng, rows, blocks, mean_block)
        times[:, i - 1] = t

        if detail:
            expected[:, i - 1] = blocks * mean_block
            difficulty[:, i - 1] = D

        if config.retarget and i < n:
            D = D * R / t

    return _Chunk(times, expected, difficulty)


def _simulate_chunk(config: SimulationConfig, chunk_index: int, rows: int, detail: bool = False):
    rng = _rng(config.seed, chunk_index)
    if config.granularity is Granularity.PER_BLOCK:
        return _per_block_chunk(config, rng, rows, detail)
    return _per_interval_chunk(config, rng, rows, detail)


def simulate_intervals(config: SimulationConfig) -> np.ndarray:
    """Interval times t_1..t_n for every trial, shape (trials, n)."""
    chunks = config.chunks()
    logger.info(
        "simulating %d trials in %d chunks (%s, workers=%d)",
        config.trials,
        len(chunks),
        config.granularity.value,
        config.workers,
    )
    results = Parallel(n_jobs=config.workers)(
        delayed(_simulate_chunk)(config, index, rows) for index, rows in chunks
    )
    return np.concatenate([chunk.t for chunk in results], axis=0)


def simulate_times(config: SimulationConfig) -> np.ndarray:
    """Total time to the halving, T, for every trial."""
    return simulate_intervals(config).sum(axis=1)


def trace(config: SimulationConfig, trial: int = 0) -> list[SimulatedInterval]:
    """The intervals of one trial, drawn from the same stream as `run`."""
    if not 0 <= trial < config.trials:
        raise SimulationError(f"trial must be in [0, {config.trials}), got {trial}")

    size = config.chunk_size()
    index, row = divmod(trial, size)
    rows = dict(config.chunks())[index]
    chunk = _simulate_chunk(config, index, rows, detail=True)

    return [
        SimulatedInterval(
            s=float(chunk.s[row, i]),
            t=float(chunk.t[row, i]),
            r=float(chunk.t[row, i] / chunk.s[row, i]),
            difficulty=float(chunk.difficulty[row, i]),
        )
        for i in range(config.n)
    ]


def _pair_statistic(normalized: np.ndarray, lag: int) -> CovarianceEstimate:
    """Pooled covariance of columns j and j+lag; standard error over trials."""
    deviations = normalized - normalized.mean()
    products = deviations[:, :-lag] * deviations[:, lag:]
    per_trial = products.mean(axis=1)
    trials = per_trial.shape[0]
    return CovarianceEstimate(
        value=float(per_trial.mean()),
        se=float(per_trial.std(ddof=1) / math.sqrt(trials)),
        pairs=int(products.size),
        lag=lag,
    )


def _full_intervals(config: SimulationConfig, intervals: np.ndarray) -> np.ndarray:
    return intervals[:, : config.n - 1] / config.params.retarget_target


def summarize(config: SimulationConfig, intervals: np.ndarray) -> SimulationSummary:
    times = intervals.sum(axis=1)
    trials = times.shape[0]
    mean = float(times.mean())

    if trials > 1:
        var = float(times.var(ddof=1))
        m4 = float(np.mean((times - mean) ** 4))
        se_mean = math.sqrt(var / trials)
        se_var = math.sqrt(max(m4 - var**2 * (trials - 3) / (trials - 1), 0.0) / trials)
    else:
        var = se_mean = se_var = 0.0

    cov = se_cov = None
    if config.n >= 3 and trials > 1:
        estimate = _pair_statistic(_full_intervals(config, intervals), lag=1)
        cov, se_cov = estimate.value, estimate.se

    return SimulationSummary(
        mean_T=mean,
        var_T=var,
        se_mean=se_mean,
        se_var=se_var,
        cov_adjacent=cov,
        se_cov=se_cov,
        trials=trials,
    )


def run(config: SimulationConfig) -> SimulationSummary:
    return summarize(config, simulate_intervals(config))


def estimate_covariance(config: SimulationConfig, lag: int = 1) -> CovarianceEstimate:
    """Cov(t_i / R, t_{i+lag} / R) over full intervals, pooled across trials."""
    if lag < 1:
        raise SimulationError(f"lag must be >= 1, got {lag}")
    if config.n < lag + 2:
        raise SimulationError(
            f"lag-{lag} covariance needs n >= {lag + 2} so that {lag + 1} full intervals exist"
        )
    if config.trials < 2:
        raise SimulationError("covariance needs at least 2 trials")

    return _pair_statistic(_full_intervals(config, simulate_intervals(config)), lag)


def sample_erlang(shape: int, rate: float, count: int, seed: int = DEFAULT_SEED) -> np.ndarray:
    """Exact Erlang(shape, rate) draws (numpy's gamma sampler with integer shape)."""
    if int(shape) != shape or shape < 1:
        raise SimulationError(f"shape must be a positive integer, got {shape}")
    if not rate > 0:
        raise SimulationError(f"rate must be positive, got {rate}")
    if count < 0:
        raise SimulationError(f"count must be >= 0, got {count}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return rng.gamma(shape, 1.0 / rate, size=count)


def simulate_headers(
    count: int,
    k: int = 2016,
    hashrate: Optional[float] = None,
    initial_difficulty: float = 1.0,
    start_height: int = 0,
    start_time: datetime = datetime(2009, 1, 3, 18, 15, tzinfo=timezone.utc),
    seed: int = DEFAULT_SEED,
    block_target: float = 10.0,
    retarget: bool = True,
) -> list[HeaderRecord]:
    """Headers start_height .. start_height+count-1 from the per-block process.

    Difficulty retargets at every height divisible by k. The interval in
    progress at start_height is assumed to have run at the target pace so far.
    """
    if count < 1:
        raise SimulationError(f"count must be >= 1, got {count}")

    H = hashrate if hashrate is not None else TWO_POW_32 * initial_difficulty / block_target
    R = k * block_target
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    gaps = rng.standard_exponential(count)

    start = round_to_minute(start_time)
    elapsed = 0.0
    boundary = -(start_height % k) * block_target
    D = float(initial_difficulty)
    out = []

    for offset in range(count):
        height = start_height + offset
        if retarget and offset > 0 and height % k == 0:
            D = D * R / (elapsed - boundary)
            boundary = elapsed

        elapsed += gaps[offset] * TWO_POW_32 * D / H
        instant = start + timedelta(seconds=round(elapsed * 60.0))
        out.append(HeaderRecord(height=height, time=instant, difficulty=D))

    return out


def write_raw(values: Iterable[float], stream: TextIO) -> None:
    """One value per line, full precision."""
    for value in values:
        stream.write(repr(float(value)) + "\n")
