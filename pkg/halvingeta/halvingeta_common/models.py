from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Mapping, Optional


class HalvingError(Exception):
    """Base class for every error raised by halvingeta."""


class ParameterError(HalvingError, ValueError):
    """Raised when a model parameter is outside its valid range."""


@dataclass(frozen=True)
class RetargetParams:
    """Retarget interval length and block target time (minutes)."""

    k: int = 2016
    block_target: float = 10.0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2:
            raise ParameterError(f"k must be an integer >= 2, got {self.k!r}")
        if not self.block_target > 0:
            raise ParameterError(f"block target must be positive, got {self.block_target!r}")

    @property
    def retarget_target(self) -> float:
        return self.k * self.block_target

    def require_variance_support(self) -> None:
        # The inverse-square Erlang moment needs shape >= 3.
        if self.k < 3:
            raise ParameterError(f"variance formulas need k >= 3, got k={self.k}")

    def to_mapping(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "block_target": self.block_target,
            "retarget_target": self.retarget_target,
        }


@dataclass(frozen=True)
class RetargetPosition:
    """Where the halving lands: M blocks into interval n (current interval is 1)."""

    n: int
    M: int

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"n must be >= 1, got {self.n}")
        if self.M < 0:
            raise ParameterError(f"M must be >= 0, got {self.M}")

    def normalized(self, params: RetargetParams) -> "RetargetPosition":
        """Map M=0 to M=k of the previous interval and check M <= k."""
        if self.M == 0:
            if self.n == 1:
                raise ParameterError("M=0 with n=1 leaves no blocks before the halving")
            return RetargetPosition(self.n - 1, params.k)
        if self.M > params.k:
            raise ParameterError(f"M must be <= k={params.k}, got {self.M}")
        return self

    def blocks(self, params: RetargetParams) -> int:
        return (self.n - 1) * params.k + self.M

    def to_mapping(self) -> dict[str, Any]:
        return {"n": self.n, "M": self.M}


@dataclass(frozen=True)
class ConfidenceInterval:
    level: float
    lower: float
    upper: float

    def shifted(self, minutes: float) -> "ConfidenceInterval":
        return ConfidenceInterval(self.level, self.lower + minutes, self.upper + minutes)

    def to_mapping(self) -> dict[str, Any]:
        return {"level": self.level, "lower_minutes": self.lower, "upper_minutes": self.upper}


@dataclass(frozen=True)
class Prediction:
    """A halving-time estimate: ETA, spread and intervals, all in minutes."""

    model: str
    eta: float
    variance: float
    stddev: float
    blocks_remaining: int
    intervals: tuple[ConfidenceInterval, ...] = ()
    position: Optional[RetargetPosition] = None
    start: Optional[datetime] = None
    shift: float = 0.0
    warnings: tuple[str, ...] = ()

    @classmethod
    def from_variance(cls, model: str, eta: float, variance: float, blocks_remaining: int, **kwargs):
        return cls(
            model=model,
            eta=eta,
            variance=variance,
            stddev=math.sqrt(variance),
            blocks_remaining=blocks_remaining,
            **kwargs,
        )


@dataclass(frozen=True)
class HeaderRecord:
    height: int
    time: datetime
    difficulty: float


@dataclass(frozen=True)
class ChainSnapshot:
    """The most recent headers, ascending and contiguous, ending at the tip."""

    recent: tuple[HeaderRecord, ...]

    @property
    def tip(self) -> HeaderRecord:
        return self.recent[-1]

    @property
    def first(self) -> HeaderRecord:
        return self.recent[0]

    def __len__(self):
        return len(self.recent)


@dataclass
class OutputReport:
    """What a CLI command reports; `to_mapping` is the documented JSON shape."""

    command: str
    inputs_echo: dict[str, Any]
    model: Optional[str] = None
    eta_minutes: Optional[float] = None
    stddev_minutes: Optional[float] = None
    variance: Optional[float] = None
    eta_timestamp: Optional[str] = None
    intervals: list[dict[str, Any]] = field(default_factory=list)
    shift_minutes: Optional[float] = None
    warnings: list[str] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict)

    def to_mapping(self) -> dict[str, Any]:
        out = {
            "command": self.command,
            "model": self.model,
            "eta_minutes": self.eta_minutes,
            "stddev_minutes": self.stddev_minutes,
            "variance": self.variance,
            "eta_timestamp": self.eta_timestamp,
            "intervals": self.intervals,
            "shift_minutes": self.shift_minutes,
            "warnings": self.warnings,
            "inputs_echo": self.inputs_echo,
        }
        out.update(self.extra)
        return out

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "OutputReport":
        known = {
            "command",
            "model",
            "eta_minutes",
            "stddev_minutes",
            "variance",
            "eta_timestamp",
            "intervals",
            "shift_minutes",
            "warnings",
            "inputs_echo",
        }
        return cls(
            command=values["command"],
            inputs_echo=dict(values.get("inputs_echo", {})),
            model=values.get("model"),
            eta_minutes=values.get("eta_minutes"),
            stddev_minutes=values.get("stddev_minutes"),
            variance=values.get("variance"),
            eta_timestamp=values.get("eta_timestamp"),
            intervals=list(values.get("intervals", [])),
            shift_minutes=values.get("shift_minutes"),
            warnings=list(values.get("warnings", [])),
            extra={key: value for key, value in values.items() if key not in known},
        )
