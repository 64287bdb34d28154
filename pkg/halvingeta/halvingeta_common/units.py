"""Minutes as the one internal time unit, plus UTC calendar arithmetic."""

from __future__ import annotations

import enum
from datetime import datetime, timedelta, timezone

from halvingeta.halvingeta_common.models import HalvingError


class UnitsError(HalvingError):
    """Raised for unparsable timestamps and out-of-range calendar arithmetic."""


class Unit(enum.Enum):
    MINUTE = "minute"
    HOUR = "hour"
    DAY = "day"
    WEEK = "week"
    MONTH = "month"
    YEAR = "year"


# Display constants, rounded month and year included.
MINUTES_PER = {
    Unit.MINUTE: 1.0,
    Unit.HOUR: 60.0,
    Unit.DAY: 1440.0,
    Unit.WEEK: 10080.0,
    Unit.MONTH: 43830.0,
    Unit.YEAR: 526000.0,
}


def parse_unit(name) -> Unit:
    if isinstance(name, Unit):
        return name
    try:
        return Unit(str(name).lower().rstrip("s"))
    except ValueError:
        choices = ", ".join(unit.value for unit in Unit)
        raise UnitsError(f"unknown unit {name!r} (choose from {choices})")


def to_unit(minutes: float, unit) -> float:
    return minutes / MINUTES_PER[parse_unit(unit)]


def from_unit(value: float, unit) -> float:
    return value * MINUTES_PER[parse_unit(unit)]


def format_duration(minutes: float) -> str:
    """Render minutes as e.g. '38day+40min' or '12hr+20min'."""
    total = int(round(minutes))
    sign = "-" if total < 0 else ""
    total = abs(total)

    days, rest = divmod(total, 1440)
    hours, mins = divmod(rest, 60)

    parts = []
    if days:
        parts.append(f"{days}day")
    if hours:
        parts.append(f"{hours}hr")
    if mins or not parts:
        parts.append(f"{mins}min")

    return sign + "+".join(parts)


def round_to_minute(instant: datetime) -> datetime:
    floored = instant.replace(second=0, microsecond=0)
    if instant - floored >= timedelta(seconds=30):
        floored += timedelta(minutes=1)
    return floored


def as_utc(instant: datetime) -> datetime:
    if instant.tzinfo is None:
        return instant.replace(tzinfo=timezone.utc)
    return instant.astimezone(timezone.utc)


def add_duration(instant: datetime, minutes: float) -> datetime:
    """Add a (possibly negative) number of minutes; result at 1-minute resolution."""
    try:
        return round_to_minute(as_utc(instant) + timedelta(minutes=minutes))
    except OverflowError:
        raise UnitsError(f"{format_timestamp(instant)} + {minutes} min is out of range")


def parse_timestamp(text: str) -> datetime:
    """Parse ISO-8601 ('2016-06-02T23:50Z', '2016-06-02 23:50'); no offset means UTC."""
    cleaned = text.strip()
    if cleaned.endswith(("Z", "z")):
        cleaned = cleaned[:-1] + "+00:00"

    try:
        parsed = datetime.fromisoformat(cleaned)
    except ValueError:
        raise UnitsError(f"'{text}': not an ISO-8601 timestamp")

    return round_to_minute(as_utc(parsed))


def format_timestamp(instant: datetime) -> str:
    return as_utc(instant).strftime("%Y-%m-%d %H:%M")


def from_unix(seconds: int) -> datetime:
    try:
        return datetime.fromtimestamp(seconds, tz=timezone.utc)
    except (OverflowError, OSError, ValueError):
        raise UnitsError(f"unix time {seconds!r} is out of range")


def to_unix(instant: datetime) -> int:
    return int(as_utc(instant).timestamp())


def now() -> datetime:
    return round_to_minute(datetime.now(timezone.utc))


def isoformat_utc(instant: datetime) -> str:
    return as_utc(instant).strftime("%Y-%m-%dT%H:%MZ")
