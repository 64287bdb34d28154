"""The subsidy schedule: 50 BTC, halved every 210000 blocks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

from halvingeta.halvingeta_common.models import ParameterError
from halvingeta.halvingeta_common.units import MINUTES_PER, Unit

HALVING_INTERVAL = 210000
INITIAL_SUBSIDY = 50.0
BLOCK_TARGET_MINUTES = 10.0


@dataclass(frozen=True)
class ScheduleRow:
    epoch: int
    height: int
    subsidy: float
    cumulative_supply: float
    years_from_genesis: float

    def to_mapping(self) -> dict[str, Any]:
        return {
            "epoch": self.epoch,
            "height": self.height,
            "subsidy": self.subsidy,
            "cumulative_supply": self.cumulative_supply,
            "years_from_genesis": self.years_from_genesis,
        }


def _check_height(height: int) -> None:
    if height < 0:
        raise ParameterError(f"block height must be >= 0, got {height}")


def epoch_of(height: int) -> int:
    _check_height(height)
    return height // HALVING_INTERVAL


def halving_height(epoch: int) -> int:
    if epoch < 0:
        raise ParameterError(f"epoch must be >= 0, got {epoch}")
    return epoch * HALVING_INTERVAL


def subsidy_at_height(height: int) -> float:
    """Idealized real-valued reward; no satoshi truncation."""
    return math.ldexp(INITIAL_SUBSIDY, -epoch_of(height))


def next_halving_height(height: int) -> int:
    return halving_height(epoch_of(height) + 1)


def is_halving_height(height: int) -> bool:
    return height > 0 and height % HALVING_INTERVAL == 0


def total_supply_limit() -> float:
    # 210000 * sum(50 * 2**-i) = 210000 * 100
    return HALVING_INTERVAL * INITIAL_SUBSIDY * 2


def partial_supply(epochs: int) -> float:
    """Coins issued by the end of the first `epochs` epochs."""
    if epochs < 0:
        raise ParameterError(f"epochs must be >= 0, got {epochs}")
    return total_supply_limit() - math.ldexp(total_supply_limit(), -epochs)


def schedule_table(epochs: int) -> list[ScheduleRow]:
    """Rows for epochs 0..epochs inclusive."""
    if epochs < 0:
        raise ParameterError(f"epochs must be >= 0, got {epochs}")

    minutes_per_year = MINUTES_PER[Unit.YEAR]
    return [
        ScheduleRow(
            epoch=epoch,
            height=halving_height(epoch),
            subsidy=subsidy_at_height(halving_height(epoch)),
            cumulative_supply=partial_supply(epoch + 1),
            years_from_genesis=halving_height(epoch) * BLOCK_TARGET_MINUTES / minutes_per_year,
        )
        for epoch in range(epochs + 1)
    ]
