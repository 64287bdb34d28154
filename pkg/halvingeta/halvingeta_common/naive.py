"""Constant-difficulty model: block times are iid exponential with a 10-minute mean.

T is a sum of N exponentials, so E[T] = 10 min * N and V[T] = 100 min^2 * N.
Intervals use the normal approximation, which is poor for small N (below
about 30 blocks the Erlang skew is visible); the raw formula is still returned.
"""

from __future__ import annotations

import logging
import math
from typing import Iterable

from scipy.special import erfinv

from halvingeta.halvingeta_common.models import ConfidenceInterval, ParameterError, Prediction

logger = logging.getLogger(__name__)

BLOCK_TARGET = 10.0
DEFAULT_LEVELS = (0.683, 0.955)
NORMALITY_THRESHOLD = 30


def _check_blocks(blocks: int) -> None:
    if blocks < 0:
        raise ParameterError(f"blocks remaining must be >= 0, got {blocks}")


def naive_eta(blocks: int, block_target: float = BLOCK_TARGET) -> float:
    _check_blocks(blocks)
    return block_target * blocks


def naive_variance(blocks: int, block_target: float = BLOCK_TARGET) -> float:
    _check_blocks(blocks)
    return block_target**2 * blocks


def naive_stddev(blocks: int, block_target: float = BLOCK_TARGET) -> float:
    _check_blocks(blocks)
    return block_target * math.sqrt(blocks)


def naive_stddev_from_eta(eta: float, block_target: float = BLOCK_TARGET) -> float:
    """sigma = sqrt(10 min * E[T]), for when only an ETA is known."""
    if eta < 0:
        raise ParameterError(f"ETA must be >= 0 minutes, got {eta}")
    return math.sqrt(block_target * eta)


def normal_quantile(level: float) -> float:
    """Two-sided standard-normal quantile: P(|Z| <= z) = level."""
    if not 0.0 < level < 1.0:
        raise ParameterError(f"confidence level must be in (0, 1), got {level}")
    return math.sqrt(2.0) * float(erfinv(level))


def confidence_interval(eta: float, stddev: float, level: float) -> ConfidenceInterval:
    if stddev < 0:
        raise ParameterError(f"standard deviation must be >= 0, got {stddev}")
    half_width = normal_quantile(level) * stddev
    return ConfidenceInterval(level=level, lower=eta - half_width, upper=eta + half_width)


def confidence_intervals(
    eta: float, stddev: float, levels: Iterable[float] = DEFAULT_LEVELS
) -> tuple[ConfidenceInterval, ...]:
    return tuple(confidence_interval(eta, stddev, level) for level in levels)


def naive_prediction(
    blocks: int,
    levels: Iterable[float] = DEFAULT_LEVELS,
    block_target: float = BLOCK_TARGET,
) -> Prediction:
    eta = naive_eta(blocks, block_target)
    stddev = naive_stddev(blocks, block_target)
    warnings = ()

    if 0 < blocks < NORMALITY_THRESHOLD:
        message = (
            f"only {blocks} blocks remaining; the normal approximation behind the "
            f"intervals is rough below {NORMALITY_THRESHOLD} blocks"
        )
        logger.warning(message)
        warnings = (message,)

    return Prediction(
        model="naive",
        eta=eta,
        variance=stddev**2,
        stddev=stddev,
        blocks_remaining=blocks,
        intervals=confidence_intervals(eta, stddev, levels),
        warnings=warnings,
    )
