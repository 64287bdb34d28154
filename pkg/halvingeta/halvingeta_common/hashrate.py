"""Point corrections to the halving ETA for hashrate changes.

A shift is signed minutes: negative moves the halving earlier. None of these
rules change the variance; there is no model for hashrate uncertainty.
"""

from __future__ import annotations

import dataclasses
import enum
import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

from halvingeta.halvingeta_common.models import HalvingError, Prediction, RetargetParams

logger = logging.getLogger(__name__)

DEFAULT_PARAMS = RetargetParams()

# Largest |x| for which the linear step rule is used.
STEP_THRESHOLD = 0.15


class HashrateError(HalvingError):
    """Raised for invalid hashrates or a shift rule applied outside its range."""


class ChangeKind(enum.Enum):
    STEP_FAR = "step_far"
    GRADUAL = "gradual"
    STEP_NEAR = "step_near"


@dataclass(frozen=True)
class Shift:
    minutes: float
    rule: str
    warning: Optional[str] = None


@dataclass(frozen=True)
class HashrateChange:
    kind: ChangeKind
    old: float = 1.0
    new: float = 1.0
    blocks_remaining: Optional[int] = None

    @property
    def fraction(self) -> float:
        return self.new / self.old - 1.0


def require_hashrate(rate: float, name: str = "hashrate") -> float:
    if not rate > 0:
        raise HashrateError(f"{name} must be positive, got {rate}")
    return rate


def gradual_shift(h1: float, h2: float, params: RetargetParams = DEFAULT_PARAMS) -> Shift:
    """-ln(H2/H1) retarget intervals; valid for any size of change spread over a long period."""
    require_hashrate(h1, "old hashrate")
    require_hashrate(h2, "new hashrate")
    return Shift(-math.log(h2 / h1) * params.retarget_target, ChangeKind.GRADUAL.value)


def step_shift_far(x: float, params: RetargetParams = DEFAULT_PARAMS) -> Shift:
    """A step change by fraction x, more than one retarget interval before the halving.

    Linear rule -x * R for |x| <= STEP_THRESHOLD; beyond that the log rule is used
    and the result carries a warning.
    """
    if abs(x) <= STEP_THRESHOLD:
        return Shift(-x * params.retarget_target, ChangeKind.STEP_FAR.value)

    if x <= -1.0:
        raise HashrateError(f"a step change of {x:+.0%} leaves no hashrate")

    warning = (
        f"step change of {x:+.1%} exceeds the linear rule's +/-{STEP_THRESHOLD:.0%} range; "
        "used the logarithmic rule instead"
    )
    logger.warning(warning)
    shift = gradual_shift(1.0, 1.0 + x, params)
    return Shift(shift.minutes, ChangeKind.STEP_FAR.value, warning)


def step_shift_near(
    x: float, blocks_remaining: int, params: RetargetParams = DEFAULT_PARAMS
) -> Shift:
    """A step change inside the final retarget interval: proportional to blocks left."""
    if blocks_remaining < 0:
        raise HashrateError(f"blocks remaining must be >= 0, got {blocks_remaining}")
    if blocks_remaining >= params.k:
        raise HashrateError(
            f"{blocks_remaining} blocks remaining is not within the final retarget "
            f"interval of {params.k} blocks; use the far step rule"
        )
    return Shift(-x * blocks_remaining * params.block_target, ChangeKind.STEP_NEAR.value)


def shift_for_change(change: HashrateChange, params: RetargetParams = DEFAULT_PARAMS) -> Shift:
    require_hashrate(change.old, "old hashrate")
    require_hashrate(change.new, "new hashrate")

    if change.kind is ChangeKind.GRADUAL:
        return gradual_shift(change.old, change.new, params)
    if change.kind is ChangeKind.STEP_FAR:
        return step_shift_far(change.fraction, params)
    if change.blocks_remaining is None:
        raise HashrateError("a near step change needs the number of blocks remaining")
    return step_shift_near(change.fraction, change.blocks_remaining, params)


def apply_shift(prediction: Prediction, shift: Union[Shift, float]) -> Prediction:
    """Translate ETA and interval endpoints; variance is left as it was."""
    minutes = shift.minutes if isinstance(shift, Shift) else float(shift)
    warnings = prediction.warnings
    if isinstance(shift, Shift) and shift.warning:
        warnings = warnings + (shift.warning,)

    return dataclasses.replace(
        prediction,
        eta=prediction.eta + minutes,
        intervals=tuple(interval.shifted(minutes) for interval in prediction.intervals),
        shift=prediction.shift + minutes,
        warnings=warnings,
    )
