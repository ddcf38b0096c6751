"""Stream scan datasets, assign content-hash identifiers, dedupe and sample."""

from __future__ import annotations

import base64
import binascii
import csv
import hashlib
import json
import logging
import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from statistics import NormalDist
from typing import Any, Iterable, Iterator, Mapping, Optional, Sequence

from fwscope.errors import SchemaError, ValidationError
from fwscope.model import MonthDate, normalize_country_code

log = logging.getLogger(__name__)

SOURCES = ("censys_banner", "censys_public", "shodan", "fixture")
FIELD_SEPARATOR = "\x1f"

# serialized names, used both for I/O and for the canonical hash
RECORD_FIELDS = (
    "ip",
    "country_code",
    "manufacturer",
    "product",
    "device_type",
    "body",
    "scanned_at",
    "source",
)


@dataclass(frozen=True)
class ScanRecord:
    record_id: str
    body: str
    scanned_at: MonthDate
    source: str = "fixture"
    ip: Optional[str] = None
    country_code: Optional[str] = None
    manufacturer: Optional[str] = None
    model: Optional[str] = None
    device_type: Optional[str] = None

    def fields(self) -> dict[str, str]:
        """Present fields under their serialized names (unknowns omitted)."""
        values = {
            "ip": self.ip,
            "country_code": self.country_code,
            "manufacturer": self.manufacturer,
            "product": self.model,
            "device_type": self.device_type,
            "body": self.body,
            "scanned_at": str(self.scanned_at),
            "source": self.source,
        }
        return {k: v for k, v in values.items() if v is not None}

    def to_row(self) -> dict[str, str]:
        row = {"record_id": self.record_id}
        row.update(self.fields())
        return row


def canonical_hash(fields: Mapping[str, Any]) -> str:
    """SHA-256 over ``name=value`` pairs sorted by name and joined by 0x1F.

    ``None`` values count as absent and are left out entirely, so a missing
    field and an empty one hash differently.
    """
    present = {k: v for k, v in fields.items() if v is not None}
    if not present:
        raise ValidationError("canonical_hash needs at least one field")
    payload = FIELD_SEPARATOR.join(f"{name}={present[name]}" for name in sorted(present))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _text(value: Any) -> Optional[str]:
    if value is None:
        return None
    if not isinstance(value, str):
        value = str(value)
    value = value.strip()
    return value or None


def record_from_mapping(row: Mapping[str, Any], default_source: str = "fixture") -> ScanRecord:
    """Validate one input row and build a normalized record.

    Raises ``ValidationError`` when the row breaks the schema.
    """
    if not isinstance(row, Mapping):
        raise ValidationError("row is not an object")
    body = row.get("body")
    if body is None and row.get("body_b64") is not None:
        try:
            body = base64.b64decode(row["body_b64"], validate=True).decode("utf-8", errors="replace")
        except (binascii.Error, ValueError, TypeError) as exc:
            raise ValidationError(f"bad body_b64: {exc}") from exc
    if body is None:
        raise ValidationError("missing body")
    if not isinstance(body, str):
        raise ValidationError("body must be a string")
    scanned = row.get("scanned_at")
    if not isinstance(scanned, str):
        raise ValidationError("missing scanned_at")
    scanned_at = MonthDate.parse(scanned)
    source = _text(row.get("source")) or default_source
    if source not in SOURCES:
        raise ValidationError(f"unknown source {source!r}")
    manufacturer = _text(row.get("manufacturer"))
    model = _text(row.get("product"))
    device_type = _text(row.get("device_type"))
    ip = _text(row.get("ip"))
    country = normalize_country_code(_text(row.get("country_code")))
    draft = ScanRecord(
        record_id="",
        body=body,
        scanned_at=scanned_at,
        source=source,
        ip=ip,
        country_code=country,
        manufacturer=manufacturer,
        model=model,
        device_type=device_type,
    )
    return replace(draft, record_id=canonical_hash(draft.fields()))


@dataclass
class ReadCounts:
    read: int = 0
    skipped: int = 0
    errors: list[str] = field(default_factory=list)

    @property
    def total_rows(self) -> int:
        return self.read + self.skipped


def _jsonl_rows(handle) -> Iterator[tuple[int, Any]]:
    for lineno, line in enumerate(handle, start=1):
        if not line.strip():
            continue
        try:
            yield lineno, json.loads(line)
        except json.JSONDecodeError as exc:
            yield lineno, exc


def _csv_rows(handle) -> Iterator[tuple[int, Any]]:
    reader = csv.DictReader(handle)
    for row in reader:
        # DictReader puts overflow cells under the None key
        if None in row:
            yield reader.line_num, ValidationError("too many cells")
            continue
        yield reader.line_num, {k: v for k, v in row.items() if v not in (None, "") or k == "body"}


def read_records(
    path: str | Path,
    format: str = "jsonl",
    counts: Optional[ReadCounts] = None,
    default_source: str = "fixture",
) -> Iterator[ScanRecord]:
    """Yield valid records in file order, skipping (and counting) bad rows.

    More than half of the rows failing validation raises ``SchemaError`` once
    the file is exhausted; that almost always means the format is wrong.
    """
    if format not in ("jsonl", "csv"):
        raise ValidationError(f"unsupported format {format!r}")
    counts = counts if counts is not None else ReadCounts()
    path = Path(path)
    newline = "" if format == "csv" else None
    with path.open("r", encoding="utf-8", newline=newline) as handle:
        rows = _jsonl_rows(handle) if format == "jsonl" else _csv_rows(handle)
        for lineno, row in rows:
            try:
                if isinstance(row, Exception):
                    raise ValidationError(str(row))
                record = record_from_mapping(row, default_source=default_source)
            except ValidationError as exc:
                counts.skipped += 1
                if len(counts.errors) < 20:
                    counts.errors.append(f"{path.name}:{lineno}: {exc}")
                continue
            counts.read += 1
            yield record
    if counts.skipped * 2 > counts.total_rows:
        raise SchemaError(
            f"{path}: {counts.skipped} of {counts.total_rows} rows malformed; "
            f"is this really {format}?"
        )
    if counts.skipped:
        log.warning("%s: skipped %d malformed rows", path, counts.skipped)


@dataclass
class DedupeCounts:
    kept: int = 0
    dropped: int = 0


def dedupe(records: Iterable[ScanRecord], counts: Optional[DedupeCounts] = None) -> Iterator[ScanRecord]:
    """Keep the first record for each ``record_id``."""
    counts = counts if counts is not None else DedupeCounts()
    seen: set[str] = set()
    for record in records:
        if record.record_id in seen:
            counts.dropped += 1
            continue
        seen.add(record.record_id)
        counts.kept += 1
        yield record


def z_for_confidence(confidence: float) -> float:
    """Two-sided z-score rounded to two decimals (0.99 -> 2.58, 0.95 -> 1.96)."""
    if not 0 < confidence < 1:
        raise ValidationError(f"confidence must lie in (0, 1), got {confidence}")
    return round(NormalDist().inv_cdf(1 - (1 - confidence) / 2), 2)


@dataclass(frozen=True)
class SamplePlan:
    population_n: Optional[int]
    confidence_z: float = 2.58
    margin_e: float = 0.01
    assumed_p: float = 0.5

    def __post_init__(self) -> None:
        if not 0 < self.margin_e < 1:
            raise ValidationError(f"margin must lie in (0, 1), got {self.margin_e}")
        if not 0 < self.assumed_p < 1:
            raise ValidationError(f"assumed proportion must lie in (0, 1), got {self.assumed_p}")
        if self.confidence_z <= 0:
            raise ValidationError("z must be positive")
        if self.population_n is not None and self.population_n < 0:
            raise ValidationError("population must be non-negative")

    @property
    def computed_n(self) -> int:
        return sample_size(self)


def sample_size(plan: SamplePlan) -> int:
    """Cochran's sample size with finite-population correction.

    ``population_n=None`` means an effectively infinite population, which
    skips the correction.
    """
    z, p, e = plan.confidence_z, plan.assumed_p, plan.margin_e
    n0 = z * z * p * (1 - p) / (e * e)
    if plan.population_n is None:
        return math.ceil(n0)
    big_n = plan.population_n
    if big_n == 0:
        return 0
    n = n0 / (1 + (n0 - 1) / big_n)
    return min(math.ceil(n), big_n)


def draw_sample(records: Sequence[ScanRecord], n: int, seed: int) -> list[ScanRecord]:
    """Uniform sample without replacement, returned in ``record_id`` order.

    Input order does not matter: the population is sorted by id before the
    seeded generator draws from it.
    """
    if n < 0 or n > len(records):
        raise ValidationError(f"cannot draw {n} of {len(records)} records")
    population = sorted(records, key=lambda r: r.record_id)
    chosen = random.Random(seed).sample(population, n)
    return sorted(chosen, key=lambda r: r.record_id)
