"""Keyword/regex rule sets and firmware fact extraction from scan records."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional

from fwscope.errors import RuleLoadError, ValidationError
from fwscope.ingest import ScanRecord
from fwscope.model import (
    DeviceIdentity,
    FirmwareVersion,
    MonthDate,
    normalize_country_code,
    normalize_device_type,
    normalize_label,
    parse_version,
)

TARGET_FIELDS = ("body", "manufacturer", "product", "device_type")
CAPTURE_ROLES = ("version", "date", "manufacturer", "model", "device_type")
METADATA = "metadata"


@dataclass(frozen=True)
class ExtractionRule:
    rule_id: str
    pattern: str
    captures: Mapping[str, str]
    target_field: str = "body"
    priority: int = 100
    compiled: re.Pattern = field(default=None, compare=False, repr=False)

    @property
    def sort_key(self) -> tuple[int, str]:
        return (self.priority, self.rule_id)

    @property
    def captures_version(self) -> bool:
        return "version" in self.captures.values()

    def to_json(self) -> dict:
        return {
            "id": self.rule_id,
            "target_field": self.target_field,
            "pattern": self.pattern,
            "captures": dict(self.captures),
            "priority": self.priority,
        }


# rule files use the portable named-group spelling (?<name>...)
_NAMED_GROUP = re.compile(r"\(\?<(?![=!])")
_LOOKBEHIND = re.compile(r"\(\?<[=!]")
_BACKREF = re.compile(r"(?<!\\)(?:\\\\)*\\(?:[1-9]|k<)|\(\?P=")


def translate_pattern(pattern: str) -> str:
    """Rewrite the portable regex dialect into Python ``re`` syntax.

    Lookbehind and backreferences are outside the dialect and rejected.
    """
    if _LOOKBEHIND.search(pattern):
        raise ValueError("lookbehind is not allowed")
    if _BACKREF.search(pattern):
        raise ValueError("backreferences are not allowed")
    return _NAMED_GROUP.sub("(?P<", pattern)


def make_rule(
    rule_id: str,
    pattern: str,
    captures: Mapping[str, str] | None = None,
    target_field: str = "body",
    priority: int = 100,
) -> ExtractionRule:
    captures = dict(captures or {})
    if not isinstance(rule_id, str) or not rule_id:
        raise RuleLoadError("rule without an id")
    if target_field not in TARGET_FIELDS:
        raise RuleLoadError(f"rule {rule_id!r}: unknown target_field {target_field!r}")
    if isinstance(priority, bool) or not isinstance(priority, int):
        raise RuleLoadError(f"rule {rule_id!r}: priority must be an integer")
    try:
        compiled = re.compile(translate_pattern(pattern))
    except (re.error, ValueError, TypeError) as exc:
        raise RuleLoadError(f"rule {rule_id!r}: pattern does not compile: {exc}") from exc
    for group, role in captures.items():
        if role not in CAPTURE_ROLES:
            raise RuleLoadError(f"rule {rule_id!r}: unknown capture role {role!r}")
        if group not in compiled.groupindex:
            raise RuleLoadError(f"rule {rule_id!r}: pattern has no group named {group!r}")
    return ExtractionRule(
        rule_id=rule_id,
        pattern=pattern,
        captures=captures,
        target_field=target_field,
        priority=priority,
        compiled=compiled,
    )


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[ExtractionRule, ...] = ()

    def __post_init__(self) -> None:
        ids = Counter(r.rule_id for r in self.rules)
        dupes = sorted(i for i, n in ids.items() if n > 1)
        if dupes:
            raise RuleLoadError(f"duplicate rule id(s): {', '.join(dupes)}")
        object.__setattr__(self, "rules", tuple(sorted(self.rules, key=lambda r: r.sort_key)))

    def __iter__(self):
        return iter(self.rules)

    def __len__(self) -> int:
        return len(self.rules)

    @classmethod
    def from_json(cls, items: list) -> "RuleSet":
        if not isinstance(items, list):
            raise RuleLoadError("rule file must hold a JSON list of rule objects")
        rules = []
        for i, item in enumerate(items):
            if not isinstance(item, dict):
                raise RuleLoadError(f"rule #{i} is not an object")
            if "pattern" not in item:
                raise RuleLoadError(f"rule {item.get('id', '#' + str(i))!r}: missing pattern")
            rules.append(
                make_rule(
                    item.get("id"),
                    item["pattern"],
                    item.get("captures", {}),
                    item.get("target_field", "body"),
                    item.get("priority", 100),
                )
            )
        return cls(tuple(rules))

    def to_json(self) -> list[dict]:
        return [r.to_json() for r in self.rules]


def load_rules(path: str | Path) -> RuleSet:
    with open(path, encoding="utf-8") as handle:
        try:
            items = json.load(handle)
        except json.JSONDecodeError as exc:
            raise RuleLoadError(f"{path}: not valid JSON: {exc}") from exc
    return RuleSet.from_json(items)


def starter_rules_path() -> Path:
    return Path(__file__).parent / "data" / "starter_rules.json"


_MONTHS = {
    name: i
    for i, name in enumerate(
        ["jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec"], start=1
    )
}
_DATE_FORMATS = (
    (re.compile(r"(\d{4})-(\d{1,2})-(\d{1,2})"), ("y", "m", "d")),
    (re.compile(r"(\d{4})/(\d{1,2})/(\d{1,2})"), ("y", "m", "d")),
    (re.compile(r"(\d{1,2})\.(\d{1,2})\.(\d{4})"), ("d", "m", "y")),
    (re.compile(r"([A-Za-z]{3})\.? (\d{4})"), ("mon", "y")),
    (re.compile(r"(\d{4})-(\d{1,2})"), ("y", "m")),
)


def parse_fw_date(raw: str) -> Optional[MonthDate]:
    """Parse a firmware date to month precision; ``None`` when unrecognized.

    Ambiguous forms such as ``11/2019`` and two-digit years are rejected.
    """
    text = raw.strip()
    for regex, layout in _DATE_FORMATS:
        m = regex.fullmatch(text)
        if m is None:
            continue
        parts = dict(zip(layout, m.groups()))
        if "mon" in parts:
            month = _MONTHS.get(parts["mon"].lower())
            if month is None:
                return None
        else:
            month = int(parts["m"])
        if "d" in parts and not 1 <= int(parts["d"]) <= 31:
            return None
        try:
            return MonthDate(int(parts["y"]), month)
        except ValidationError:
            return None
    return None


@dataclass(frozen=True)
class FirmwareObservation:
    record_id: str
    identity: DeviceIdentity
    installed_version: Optional[FirmwareVersion] = None
    installed_date: Optional[MonthDate] = None
    general_fw_date: Optional[MonthDate] = None
    matched_rules: tuple[str, ...] = ()
    # field name -> rule_id (or "metadata" for identity fallbacks)
    provenance: Mapping[str, str] = field(default_factory=dict)

    @property
    def extracted(self) -> bool:
        return (
            self.installed_version is not None
            or self.installed_date is not None
            or self.general_fw_date is not None
        )

    def to_row(self) -> dict:
        ident = self.identity
        return {
            "record_id": self.record_id,
            "manufacturer": ident.manufacturer,
            "model": ident.model,
            "device_type": ident.device_type,
            "country_code": ident.country_code,
            "installed_version": self.installed_version.raw if self.installed_version else None,
            "installed_date": str(self.installed_date) if self.installed_date else None,
            "general_fw_date": str(self.general_fw_date) if self.general_fw_date else None,
            "matched_rules": list(self.matched_rules),
            "provenance": dict(sorted(self.provenance.items())),
        }

    @classmethod
    def from_row(cls, row: Mapping) -> "FirmwareObservation":
        def month(key: str) -> Optional[MonthDate]:
            value = row.get(key)
            return MonthDate.parse(value) if value else None

        version = row.get("installed_version")
        return cls(
            record_id=row["record_id"],
            identity=DeviceIdentity(
                manufacturer=row.get("manufacturer"),
                model=row.get("model"),
                device_type=row.get("device_type"),
                country_code=row.get("country_code"),
            ),
            installed_version=parse_version(version) if version else None,
            installed_date=month("installed_date"),
            general_fw_date=month("general_fw_date"),
            matched_rules=tuple(row.get("matched_rules") or ()),
            provenance=dict(row.get("provenance") or {}),
        )


def _target_text(record: ScanRecord, target: str) -> Optional[str]:
    if target == "body":
        return record.body
    if target == "product":
        return record.model
    return getattr(record, target)


def extract(record: ScanRecord, rules: RuleSet) -> FirmwareObservation:
    """Apply ``rules`` in priority order; the first capture for each field wins.

    A date captured by a rule that also declares a version capture is taken
    as the installed firmware date, any other date as a general firmware
    date. Identity fields nobody captured fall back to record metadata.
    """
    found: dict[str, object] = {}
    provenance: dict[str, str] = {}
    matched: list[str] = []
    for rule in rules.rules:
        text = _target_text(record, rule.target_field)
        if not text:
            continue
        m = rule.compiled.search(text)
        if m is None:
            continue
        contributed = False
        groups = sorted(rule.captures.items(), key=lambda kv: rule.compiled.groupindex[kv[0]])
        for group, role in groups:
            value = m.group(group)
            if value is None or not value.strip():
                continue
            if role == "date":
                slot = "installed_date" if rule.captures_version else "general_fw_date"
            else:
                slot = role
            if slot in found:
                continue
            parsed = _convert(slot, value)
            if parsed is None:
                continue
            found[slot] = parsed
            provenance[slot] = rule.rule_id
            contributed = True
        if contributed:
            matched.append(rule.rule_id)

    fallbacks = {
        "manufacturer": normalize_label(record.manufacturer),
        "model": normalize_label(record.model),
        "device_type": normalize_device_type(record.device_type),
    }
    for slot, value in fallbacks.items():
        if slot not in found and value is not None:
            found[slot] = value
            provenance[slot] = METADATA

    identity = DeviceIdentity(
        manufacturer=found.get("manufacturer"),
        model=found.get("model"),
        device_type=found.get("device_type"),
        country_code=normalize_country_code(record.country_code),
    )
    return FirmwareObservation(
        record_id=record.record_id,
        identity=identity,
        installed_version=found.get("version"),
        installed_date=found.get("installed_date"),
        general_fw_date=found.get("general_fw_date"),
        matched_rules=tuple(matched),
        provenance=provenance,
    )


def _convert(slot: str, value: str):
    if slot == "version":
        version = parse_version(value.strip())
        return version if version.comparable else None
    if slot in ("installed_date", "general_fw_date"):
        return parse_fw_date(value)
    if slot == "device_type":
        return normalize_device_type(value)
    return normalize_label(value)


@dataclass
class Coverage:
    total: int = 0
    extracted: int = 0
    with_version: int = 0
    with_installed_date: int = 0
    with_general_date: int = 0
    rule_hits: Counter = field(default_factory=Counter)

    def add(self, obs: FirmwareObservation) -> None:
        self.total += 1
        self.extracted += obs.extracted
        self.with_version += obs.installed_version is not None
        self.with_installed_date += obs.installed_date is not None
        self.with_general_date += obs.general_fw_date is not None
        self.rule_hits.update(obs.matched_rules)

    def merge(self, other: "Coverage") -> "Coverage":
        return Coverage(
            total=self.total + other.total,
            extracted=self.extracted + other.extracted,
            with_version=self.with_version + other.with_version,
            with_installed_date=self.with_installed_date + other.with_installed_date,
            with_general_date=self.with_general_date + other.with_general_date,
            rule_hits=self.rule_hits + other.rule_hits,
        )

    def fraction(self, count: int) -> Optional[float]:
        return count / self.total if self.total else None

    @property
    def coverage(self) -> Optional[float]:
        return self.fraction(self.extracted)

    def to_json(self) -> dict:
        return {
            "total": self.total,
            "extracted": self.extracted,
            "coverage": self.coverage,
            "with_version": self.with_version,
            "with_installed_date": self.with_installed_date,
            "with_general_date": self.with_general_date,
            "rule_hits": dict(sorted(self.rule_hits.items())),
        }


def extraction_coverage(observations: Iterable[FirmwareObservation]) -> Coverage:
    cov = Coverage()
    for obs in observations:
        cov.add(obs)
    return cov
