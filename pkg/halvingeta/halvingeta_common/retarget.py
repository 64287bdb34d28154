"""Retarget-aware halving model.

Intervals of k blocks start and end at retargets. Interval i has ratio
r_i = t_i / s_i ~ Erlang(k, k), and after a retarget the next interval takes
t_{i+1} = (r_{i+1} / r_i) * R where R = k * block_target. The final interval
holds M blocks with r_n ~ Erlang(M, M) and t_n = (r_n / r_{n-1}) * M * block_target.
Interval 0 (the one before the current) is treated as random, so the model is
unconditional on the difficulty actually observed.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Iterable

from halvingeta.halvingeta_common.models import (
    ParameterError,
    Prediction,
    RetargetParams,
    RetargetPosition,
)
from halvingeta.halvingeta_common.naive import DEFAULT_LEVELS, confidence_intervals
from halvingeta.halvingeta_common.schedule import is_halving_height

logger = logging.getLogger(__name__)

DEFAULT_PARAMS = RetargetParams()

# Constant of the far-horizon approximation, as published.
SIMPLIFIED_CONSTANT = 8133000.0


class CovarianceMode(enum.Enum):
    """Adjacent-interval covariance coefficient.

    PRINTED is -k/(k+1)^2 with the final cross term not scaled by M.
    DERIVED is -k/(k-1)^2, which is what k/(k-1) - (k/(k-1))^2 reduces to,
    with the cross term scaled by M. The simulator agrees with DERIVED.
    """

    PRINTED = "printed"
    DERIVED = "derived"


DEFAULT_COVARIANCE_MODE = CovarianceMode.DERIVED


class VarianceForm(enum.Enum):
    FULL = "full"
    SIMPLIFIED = "simplified"


@dataclass(frozen=True)
class ErlangMoments:
    mean: float
    mean_inv: float
    second: float
    second_inv: float
    variance: float


def erlang_moments(shape: int, rate: float) -> ErlangMoments:
    """Closed-form moments of Erlang(shape, rate), including E[1/r] and E[1/r^2]."""
    if shape < 3:
        raise ParameterError(f"E[1/r^2] needs shape >= 3, got {shape}")
    if not rate > 0:
        raise ParameterError(f"rate must be positive, got {rate}")

    return ErlangMoments(
        mean=shape / rate,
        mean_inv=rate / (shape - 1),
        second=shape * (shape + 1) / rate**2,
        second_inv=rate**2 / ((shape - 1) * (shape - 2)),
        variance=shape / rate**2,
    )


def schedule_drift_factor(params: RetargetParams = DEFAULT_PARAMS) -> float:
    """E[1/r] for r ~ Erlang(k, k): each retarget interval runs k/(k-1) long."""
    return params.k / (params.k - 1)


def retarget_eta(pos: RetargetPosition, params: RetargetParams = DEFAULT_PARAMS) -> float:
    params.require_variance_support()
    pos = pos.normalized(params)
    return schedule_drift_factor(params) * (
        (pos.n - 1) * params.retarget_target + pos.M * params.block_target
    )


def covariance_coefficient(
    params: RetargetParams = DEFAULT_PARAMS, mode: CovarianceMode = DEFAULT_COVARIANCE_MODE
) -> float:
    """Cov(r_i / r_{i-1}, r_{i+1} / r_i)."""
    k = params.k
    if mode is CovarianceMode.PRINTED:
        return -k / (k + 1) ** 2
    return -k / (k - 1) ** 2


def _ratio_variance(k: int) -> float:
    # V[r_i / r_{i-1}] for full intervals
    return k * (2 * k - 1) / ((k - 2) * (k - 1) ** 2)


def retarget_variance(
    pos: RetargetPosition,
    params: RetargetParams = DEFAULT_PARAMS,
    mode: CovarianceMode = DEFAULT_COVARIANCE_MODE,
) -> float:
    """V[T] in min^2, including covariance between adjacent intervals.

    With n=1 there are no full intervals and no adjacent pairs; the (n-1) term is
    zero and the pair counts clamp at zero.
    """
    params.require_variance_support()
    pos = pos.normalized(params)

    k, n, M = params.k, pos.n, pos.M
    R, b = params.retarget_target, params.block_target
    C = covariance_coefficient(params, mode)

    full_pairs = max(n - 2, 0)
    final_pairs = 1 if n >= 2 else 0

    full = R**2 * (_ratio_variance(k) * (n - 1) + 2 * full_pairs * C)
    if mode is CovarianceMode.PRINTED:
        cross = 2 * R * b * C * final_pairs
    else:
        cross = 2 * R * b * M * C * final_pairs
    last = b**2 * M * k**2 * (k + M - 1) / ((k - 2) * (k - 1) ** 2)

    return full + cross + last


def marginal_variance_per_interval(
    params: RetargetParams = DEFAULT_PARAMS, mode: CovarianceMode = DEFAULT_COVARIANCE_MODE
) -> float:
    """dV[T]/dn: variance added by one more full interval before the halving."""
    params.require_variance_support()
    return params.retarget_target**2 * (
        _ratio_variance(params.k) + 2 * covariance_coefficient(params, mode)
    )


def simplified_variance(M: int, params: RetargetParams = DEFAULT_PARAMS) -> float:
    """Far-horizon approximation: variance of the first and last intervals only."""
    if not 1 <= M <= params.k:
        raise ParameterError(f"M must be in [1, {params.k}], got {M}")
    k = params.k
    return params.block_target**2 * (M + M**2 / k + SIMPLIFIED_CONSTANT / k)


def position_from_heights(
    current: int, halving: int, params: RetargetParams = DEFAULT_PARAMS
) -> RetargetPosition:
    """Locate the halving relative to the current height.

    The current interval counts as interval 1 even when it is partly elapsed.
    """
    if current < 0:
        raise ParameterError(f"current height must be >= 0, got {current}")
    if current >= halving:
        raise ParameterError(f"current height {current} is not below halving height {halving}")
    if not is_halving_height(halving):
        raise ParameterError(f"{halving} is not a halving height")

    M = halving % params.k or params.k
    final_start = halving - M

    if current >= final_start:
        return RetargetPosition(1, M)

    return RetargetPosition(1 + math.ceil((final_start - current) / params.k), M)


def position_from_blocks_remaining(
    blocks: int, params: RetargetParams = DEFAULT_PARAMS
) -> RetargetPosition:
    """Position for N remaining blocks, assuming we stand at a retarget boundary."""
    if blocks < 1:
        raise ParameterError(f"blocks remaining must be >= 1, got {blocks}")
    n = math.ceil(blocks / params.k)
    return RetargetPosition(n, blocks - (n - 1) * params.k)


def retarget_prediction(
    blocks: int,
    pos: RetargetPosition,
    params: RetargetParams = DEFAULT_PARAMS,
    mode: CovarianceMode = DEFAULT_COVARIANCE_MODE,
    form: VarianceForm = VarianceForm.FULL,
    levels: Iterable[float] = DEFAULT_LEVELS,
) -> Prediction:
    """Prediction for `blocks` remaining blocks with the halving at `pos`.

    At a boundary start blocks == pos.blocks() and the ETA is retarget_eta(pos).
    Otherwise the ETA applies the drift factor to the blocks actually remaining.
    """
    pos = pos.normalized(params)
    warnings = ()

    if blocks == pos.blocks(params):
        eta = retarget_eta(pos, params)
    else:
        eta = schedule_drift_factor(params) * blocks * params.block_target
        message = (
            f"start is {pos.blocks(params) - blocks} blocks into a retarget interval; "
            "the variance treats that partial interval as a full one"
        )
        logger.warning(message)
        warnings = (message,)

    if form is VarianceForm.SIMPLIFIED:
        variance = simplified_variance(pos.M, params)
    else:
        variance = retarget_variance(pos, params, mode)

    stddev = math.sqrt(variance)
    return Prediction(
        model="retarget",
        eta=eta,
        variance=variance,
        stddev=stddev,
        blocks_remaining=blocks,
        intervals=confidence_intervals(eta, stddev, levels),
        position=pos,
        warnings=warnings,
    )


def variance_profile(
    M: int,
    params: RetargetParams = DEFAULT_PARAMS,
    mode: CovarianceMode = DEFAULT_COVARIANCE_MODE,
    max_intervals: int = 10,
) -> list[tuple[int, float, float]]:
    """(n, ETA, sigma) for n = 1..max_intervals with the halving M blocks into interval n."""
    out = []
    for n in range(1, max_intervals + 1):
        pos = RetargetPosition(n, M)
        out.append((n, retarget_eta(pos, params), math.sqrt(retarget_variance(pos, params, mode))))
    return out
