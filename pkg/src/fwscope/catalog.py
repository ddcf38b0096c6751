"""Per-model firmware histories: load, resolve the latest release, match devices."""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from fwscope.errors import CatalogError, ValidationError
from fwscope.model import (
    DeviceIdentity,
    FirmwareVersion,
    MonthDate,
    normalize_label,
    parse_version,
    version_order_key,
)

CATALOG_COLUMNS = ("manufacturer", "model", "version", "release_date")
ALIAS_COLUMNS = ("manufacturer", "from_model", "to_model")

ModelKey = tuple[str, str]


@dataclass(frozen=True)
class CatalogEntry:
    manufacturer: str
    model: str
    version: FirmwareVersion
    release_date: MonthDate

    @property
    def key(self) -> ModelKey:
        return (self.manufacturer, self.model)


@dataclass(frozen=True)
class LatestFirmware:
    """Latest release for a model; catalog lookups always fill both fields."""

    version: Optional[FirmwareVersion]
    release_date: Optional[MonthDate]


@dataclass(frozen=True)
class AliasEntry:
    manufacturer: str
    from_model: str
    to_model: str


def _latest_key(entry: CatalogEntry) -> tuple:
    return (entry.release_date, version_order_key(entry.version), entry.version.raw)


@dataclass
class Catalog:
    entries: dict[ModelKey, list[CatalogEntry]] = field(default_factory=dict)
    aliases: dict[ModelKey, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self._by_model: dict[str, set[str]] = defaultdict(set)
        for manufacturer, model in self.entries:
            self._by_model[model].add(manufacturer)
        self._latest: dict[ModelKey, CatalogEntry] = {
            key: max(rows, key=_latest_key) for key, rows in self.entries.items()
        }

    @classmethod
    def from_entries(cls, entries: Iterable[CatalogEntry]) -> "Catalog":
        grouped: dict[ModelKey, list[CatalogEntry]] = defaultdict(list)
        seen: set[tuple[str, str, str]] = set()
        for entry in entries:
            ident = (entry.manufacturer, entry.model, entry.version.raw)
            if ident in seen:
                raise CatalogError(f"duplicate catalog row {ident}")
            seen.add(ident)
            grouped[entry.key].append(entry)
        return cls(entries=dict(grouped))

    def __len__(self) -> int:
        return sum(len(rows) for rows in self.entries.values())

    @property
    def models(self) -> list[ModelKey]:
        return sorted(self.entries)

    def manufacturers_for(self, model: str) -> set[str]:
        return self._by_model.get(model, set())

    def resolve_alias(self, manufacturer: str, model: str) -> str:
        seen = {model}
        while (manufacturer, model) in self.aliases:
            model = self.aliases[(manufacturer, model)]
            if model in seen:
                raise CatalogError(f"alias cycle through {manufacturer}/{model}")
            seen.add(model)
        return model

    def with_aliases(self, aliases: Iterable[AliasEntry]) -> "Catalog":
        """Return a copy that also resolves ``aliases``; validated here."""
        table: dict[ModelKey, str] = {}
        for alias in aliases:
            key = (alias.manufacturer, alias.from_model)
            if key in table:
                raise CatalogError(f"alias {key} defined twice")
            if (alias.manufacturer, alias.to_model) not in self.entries:
                raise CatalogError(
                    f"alias target {alias.manufacturer}/{alias.to_model} is not in the catalog"
                )
            table[key] = alias.to_model
        out = Catalog(entries=self.entries, aliases=table)
        for manufacturer, model in table:
            out.resolve_alias(manufacturer, model)
        return out

    def latest(self, key: ModelKey) -> Optional[LatestFirmware]:
        entry = self._latest.get(key)
        if entry is None:
            return None
        return LatestFirmware(version=entry.version, release_date=entry.release_date)

    def release_date_of(self, key: ModelKey, version: FirmwareVersion) -> Optional[MonthDate]:
        """Release date of ``version`` for a model, matched ignoring zero padding.

        When several catalog rows tie (say "3" and "3.0"), the earliest
        release wins.
        """
        target = version_order_key(version)
        dates = [e.release_date for e in self.entries.get(key, ()) if version_order_key(e.version) == target]
        return min(dates) if dates else None


def _read_csv(path: str | Path, required: tuple[str, ...], what: str):
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise CatalogError(f"{path}: {what} is missing column(s): {', '.join(missing)}")
        for row in reader:
            yield reader.line_num, row


def _required(row: dict, column: str, path, lineno: int) -> str:
    value = normalize_label(row.get(column))
    if value is None:
        raise CatalogError(f"{path}:{lineno}: empty {column}")
    return value


def load_catalog(path: str | Path) -> Catalog:
    entries: list[CatalogEntry] = []
    seen: dict[tuple[str, str, str], int] = {}
    for lineno, row in _read_csv(path, CATALOG_COLUMNS, "catalog"):
        manufacturer = _required(row, "manufacturer", path, lineno)
        model = _required(row, "model", path, lineno)
        raw_version = (row.get("version") or "").strip()
        if not raw_version:
            raise CatalogError(f"{path}:{lineno}: empty version")
        try:
            released = MonthDate.parse(row.get("release_date") or "")
        except ValidationError as exc:
            raise CatalogError(f"{path}:{lineno}: {exc}") from exc
        ident = (manufacturer, model, raw_version)
        if ident in seen:
            raise CatalogError(
                f"{path}:{lineno}: duplicate row for {manufacturer}/{model} version {raw_version} "
                f"(first seen on line {seen[ident]})"
            )
        seen[ident] = lineno
        entries.append(CatalogEntry(manufacturer, model, parse_version(raw_version), released))
    return Catalog.from_entries(entries)


def load_aliases(path: str | Path) -> list[AliasEntry]:
    out = []
    for lineno, row in _read_csv(path, ALIAS_COLUMNS, "alias table"):
        out.append(
            AliasEntry(
                manufacturer=_required(row, "manufacturer", path, lineno),
                from_model=_required(row, "from_model", path, lineno),
                to_model=_required(row, "to_model", path, lineno),
            )
        )
    return out


def latest_for_model(catalog: Catalog, manufacturer: str, model: str) -> Optional[LatestFirmware]:
    """Latest release by date, version breaking ties; ``None`` if the model is unknown."""
    manufacturer = normalize_label(manufacturer)
    model = normalize_label(model)
    if manufacturer is None or model is None:
        return None
    model = catalog.resolve_alias(manufacturer, model)
    return catalog.latest((manufacturer, model))


def match_device(identity: DeviceIdentity, catalog: Catalog) -> Optional[ModelKey]:
    """Exact match on (manufacturer, model) after normalization and aliasing.

    Without a manufacturer, the model matches only when exactly one catalog
    manufacturer carries it (directly or through an alias).
    """
    model = identity.model
    if model is None:
        return None
    if identity.manufacturer is not None:
        resolved = catalog.resolve_alias(identity.manufacturer, model)
        key = (identity.manufacturer, resolved)
        return key if key in catalog.entries else None
    candidates = set()
    for manufacturer in catalog.manufacturers_for(model):
        candidates.add((manufacturer, catalog.resolve_alias(manufacturer, model)))
    for manufacturer, source in catalog.aliases:
        if source == model:
            candidates.add((manufacturer, catalog.resolve_alias(manufacturer, source)))
    if len(candidates) != 1:
        return None
    return candidates.pop()
