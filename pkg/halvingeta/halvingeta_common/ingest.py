"""Chain data in, model inputs out.

Snapshot files hold one JSON object per line:
{"height": int, "time": unix seconds, "difficulty": number}, ascending and
contiguous. The HTTP endpoint serves the same objects as a JSON array from
GET <base>/headers?count=W.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional

import requests

from halvingeta.halvingeta_common.models import (
    ChainSnapshot,
    HalvingError,
    HeaderRecord,
    RetargetParams,
    RetargetPosition,
)
from halvingeta.halvingeta_common.retarget import DEFAULT_PARAMS, position_from_heights
from halvingeta.halvingeta_common.schedule import next_halving_height
from halvingeta.halvingeta_common.simulator import TWO_POW_32
from halvingeta.halvingeta_common.units import UnitsError, from_unix, to_unix

logger = logging.getLogger(__name__)


class SnapshotError(HalvingError):
    """Raised when a snapshot is missing, malformed, or not contiguous."""


class FetchError(HalvingError):
    """Raised when headers cannot be fetched from an endpoint."""


class EndpointUnreachable(FetchError):
    pass


class EndpointStatusError(FetchError):
    pass


class EndpointSchemaError(FetchError):
    pass


@dataclass(frozen=True)
class HeaderAdapter:
    """Names of the header fields in a source's JSON objects."""

    height: str = "height"
    time: str = "time"
    difficulty: str = "difficulty"

    def record(self, values: Any, where: str, error=SnapshotError) -> HeaderRecord:
        if not isinstance(values, Mapping):
            raise error(f"{where}: expected a JSON object")

        fields = {}
        for name, key in (("height", self.height), ("time", self.time)):
            if key not in values:
                raise error(f"{where}: missing field '{key}'")
            value = values[key]
            if isinstance(value, bool) or not isinstance(value, int):
                raise error(f"{where}: field '{key}' must be an integer")
            fields[name] = value

        if self.difficulty not in values:
            raise error(f"{where}: missing field '{self.difficulty}'")
        difficulty = values[self.difficulty]
        if (
            isinstance(difficulty, bool)
            or not isinstance(difficulty, (int, float))
            or not math.isfinite(difficulty)
            or difficulty <= 0
        ):
            raise error(f"{where}: field '{self.difficulty}' must be a positive number")

        if fields["height"] < 0:
            raise error(f"{where}: field '{self.height}' must be >= 0")

        try:
            instant = from_unix(fields["time"])
        except UnitsError as e:
            raise error(f"{where}: {e}")

        return HeaderRecord(height=fields["height"], time=instant, difficulty=float(difficulty))


GENERIC_ADAPTER = HeaderAdapter()
# Explorer APIs in the blockstream/esplora style name the block time 'timestamp'.
EXPLORER_ADAPTER = HeaderAdapter(time="timestamp")


@dataclass(frozen=True)
class ModelInputs:
    blocks_remaining: int
    halving_height: int
    position: RetargetPosition


def build_snapshot(records: Iterable[HeaderRecord], source: str = "snapshot", error=SnapshotError):
    records = tuple(records)
    if not records:
        raise error(f"{source}: empty snapshot")

    for previous, record in zip(records, records[1:]):
        if record.height != previous.height + 1:
            raise error(
                f"{source}: heights not contiguous, gap between {previous.height} "
                f"and {record.height}"
            )

    return ChainSnapshot(records)


def load_snapshot_file(path, adapter: HeaderAdapter = GENERIC_ADAPTER) -> ChainSnapshot:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise SnapshotError(f"{path}: no such file")
    except (OSError, UnicodeDecodeError) as e:
        raise SnapshotError(f"{path}: {e}")

    records = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        where = f"{path}:{number}"
        try:
            values = json.loads(line)
        except json.JSONDecodeError as e:
            raise SnapshotError(f"{where}: invalid JSON ({e.msg})")
        records.append(adapter.record(values, where))

    snapshot = build_snapshot(records, str(path))
    logger.info("loaded %d headers from %s (tip %d)", len(snapshot), path, snapshot.tip.height)
    return snapshot


def write_snapshot_file(snapshot: ChainSnapshot, path) -> None:
    with open(path, "w", encoding="utf-8") as out:
        for record in snapshot.recent:
            out.write(
                json.dumps(
                    {
                        "height": record.height,
                        "time": to_unix(record.time),
                        "difficulty": record.difficulty,
                    }
                )
                + "\n"
            )


def fetch_snapshot_http(
    endpoint: str,
    window: int,
    timeout: float = 10.0,
    adapter: HeaderAdapter = GENERIC_ADAPTER,
    session: Optional[requests.Session] = None,
) -> ChainSnapshot:
    """GET <endpoint>/headers?count=window and validate the result."""
    if window < 1:
        raise FetchError(f"window must be >= 1, got {window}")

    url = endpoint.rstrip("/") + "/headers"
    logger.info("fetching %d headers from %s", window, url)

    if session is None:
        with requests.Session() as owned:
            return _fetch(owned, url, window, timeout, adapter)
    return _fetch(session, url, window, timeout, adapter)


def _fetch(session, url, window, timeout, adapter) -> ChainSnapshot:
    try:
        response = session.get(url, params={"count": window}, timeout=timeout)
        response.raise_for_status()
    except requests.HTTPError as e:
        raise EndpointStatusError(f"{url}: HTTP {e.response.status_code}")
    except (requests.ConnectionError, requests.Timeout) as e:
        raise EndpointUnreachable(f"{url}: {e.__class__.__name__}")
    except requests.RequestException as e:
        raise FetchError(f"{url}: {e}")

    try:
        payload = response.json()
    except ValueError:
        raise EndpointSchemaError(f"{url}: response is not JSON")

    if not isinstance(payload, list):
        raise EndpointSchemaError(f"{url}: expected a JSON array of headers")

    records = [
        adapter.record(values, f"{url}[{index}]", error=EndpointSchemaError)
        for index, values in enumerate(payload)
    ]
    snapshot = build_snapshot(records[-window:], url, error=EndpointSchemaError)
    logger.info("fetched %d headers (tip %d)", len(snapshot), snapshot.tip.height)
    return snapshot


def estimate_hashrate(snapshot: ChainSnapshot) -> float:
    """Hashes per minute: H = 2^32 * mean(D) * (blocks - 1) / elapsed."""
    if len(snapshot) < 2:
        raise SnapshotError("estimating hashrate needs at least 2 headers")

    elapsed = (snapshot.tip.time - snapshot.first.time).total_seconds() / 60.0
    if elapsed <= 0:
        raise SnapshotError(
            f"timestamps from height {snapshot.first.height} to {snapshot.tip.height} "
            f"do not increase (elapsed {elapsed:g} min)"
        )

    mean_difficulty = sum(record.difficulty for record in snapshot.recent) / len(snapshot)
    return TWO_POW_32 * mean_difficulty * (len(snapshot) - 1) / elapsed


def model_inputs(snapshot: ChainSnapshot, params: RetargetParams = DEFAULT_PARAMS) -> ModelInputs:
    tip = snapshot.tip.height
    halving = next_halving_height(tip)
    return ModelInputs(
        blocks_remaining=halving - tip,
        halving_height=halving,
        position=position_from_heights(tip, halving, params),
    )
