"""Aggregate per-device results into summary tables and export them."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

from fwscope.catalog import ModelKey
from fwscope.errors import ValidationError
from fwscope.ingest import ScanRecord
from fwscope.metrics import FreshnessMetrics, RuleApplied
from fwscope.model import DeviceIdentity, MonthDate, VersionJump, normalize_label
from fwscope.stats import (
    FACTORS,
    METRICS,
    AnovaResult,
    describe,
    group_descriptives,
    one_way_anova,
    pool_small_groups,
)

log = logging.getLogger(__name__)

NULLNESS_FIELDS = ("ip", "country_code", "manufacturer", "product", "device_type", "body")
RANK_DEPTH = 2


@dataclass(frozen=True)
class DeviceResult:
    """Everything known about one analysed device."""

    record_id: str
    identity: DeviceIdentity
    metrics: FreshnessMetrics
    extracted: bool
    matched: Optional[ModelKey] = None
    installed_version: Optional[str] = None
    installed_date: Optional[MonthDate] = None
    general_fw_date: Optional[MonthDate] = None
    installed_date_source: Optional[str] = None
    latest_version: Optional[str] = None
    latest_date: Optional[MonthDate] = None
    matched_rules: tuple[str, ...] = ()

    def factor_value(self, factor: str) -> Optional[str]:
        if factor == "country":
            return self.identity.country_code
        if factor == "device_type":
            return self.identity.device_type
        if factor == "manufacturer":
            return self.matched[0] if self.matched else self.identity.manufacturer
        raise KeyError(factor)

    def metric_value(self, metric: str) -> Optional[int]:
        m = self.metrics
        return {"AiF": m.aif_months, "AlF": m.alf_months, "TB": m.tb_months}[metric]

    def to_row(self) -> dict[str, Any]:
        m = self.metrics
        return {
            "record_id": self.record_id,
            "manufacturer": self.identity.manufacturer,
            "model": self.identity.model,
            "device_type": self.identity.device_type,
            "country_code": self.identity.country_code,
            "extracted": self.extracted,
            "installed_version": self.installed_version,
            "installed_date": _s(self.installed_date),
            "general_fw_date": _s(self.general_fw_date),
            "installed_date_source": self.installed_date_source,
            "catalog_manufacturer": self.matched[0] if self.matched else None,
            "catalog_model": self.matched[1] if self.matched else None,
            "latest_version": self.latest_version,
            "latest_date": _s(self.latest_date),
            "rule_applied": m.rule_applied.value,
            "tb_months": m.tb_months,
            "aif_months": m.aif_months,
            "alf_months": m.alf_months,
            "up_to_date": m.up_to_date,
            "version_jump": m.version_jump.value if m.version_jump else None,
            "data_quality": sorted(m.data_quality),
            "matched_rules": list(self.matched_rules),
        }

    @classmethod
    def from_row(cls, row: Mapping[str, Any]) -> "DeviceResult":
        matched = None
        if row.get("catalog_manufacturer") and row.get("catalog_model"):
            matched = (row["catalog_manufacturer"], row["catalog_model"])
        metrics = FreshnessMetrics(
            rule_applied=RuleApplied(row["rule_applied"]),
            tb_months=row.get("tb_months"),
            aif_months=row.get("aif_months"),
            alf_months=row.get("alf_months"),
            up_to_date=row.get("up_to_date"),
            version_jump=VersionJump(row["version_jump"]) if row.get("version_jump") else None,
            data_quality=frozenset(row.get("data_quality") or ()),
        )
        return cls(
            record_id=row["record_id"],
            identity=DeviceIdentity(
                manufacturer=row.get("manufacturer"),
                model=row.get("model"),
                device_type=row.get("device_type"),
                country_code=row.get("country_code"),
            ),
            metrics=metrics,
            extracted=bool(row.get("extracted")),
            matched=matched,
            installed_version=row.get("installed_version"),
            installed_date=_md(row.get("installed_date")),
            general_fw_date=_md(row.get("general_fw_date")),
            installed_date_source=row.get("installed_date_source"),
            latest_version=row.get("latest_version"),
            latest_date=_md(row.get("latest_date")),
            matched_rules=tuple(row.get("matched_rules") or ()),
        )


def _s(value) -> Optional[str]:
    return None if value is None else str(value)


def _md(value) -> Optional[MonthDate]:
    return None if value in (None, "") else MonthDate.parse(value)


def field_nullness(records: Iterable[ScanRecord]) -> dict[str, Any]:
    """Share of records with each metadata field absent (empty body counts)."""
    n = 0
    missing: Counter = Counter()
    for record in records:
        n += 1
        fields = record.fields()
        for name in NULLNESS_FIELDS:
            if not fields.get(name):
                missing[name] += 1
    fractions = {name: (missing[name] / n if n else None) for name in NULLNESS_FIELDS}
    return {"records": n, "missing": {k: missing[k] for k in NULLNESS_FIELDS}, "null_fraction": fractions}


@dataclass(frozen=True)
class ExclusionSpec:
    excluded_models: tuple[ModelKey, ...]
    reason: str = ""

    @classmethod
    def parse(cls, specs: Sequence[str], reason: str = "") -> "ExclusionSpec":
        """Build from ``manufacturer/model`` strings."""
        models = []
        for spec in specs:
            manufacturer, sep, model = spec.partition("/")
            manufacturer, model = normalize_label(manufacturer), normalize_label(model)
            if not sep or manufacturer is None or model is None:
                raise ValidationError(f"exclusion {spec!r} is not manufacturer/model")
            models.append((manufacturer, model))
        return cls(tuple(models), reason)


def _fraction(num: int, den: int) -> Optional[float]:
    return round(num / den, 6) if den else None


def _months(x: float) -> float:
    return round(x, 2)


def _desc_json(values: Sequence[int]) -> Optional[dict]:
    if not values:
        return None
    d = describe("all", values)
    return {"n": d.n, "mean": _months(d.mean), "std_dev": _months(d.std_dev), "min": d.min, "max": d.max}


def anova_json(result: AnovaResult) -> dict:
    return {
        "factor": result.factor,
        "metric": result.metric,
        "f_stat": "inf" if math.isinf(result.f_stat) else round(result.f_stat, 4),
        "df_between": result.df_between,
        "df_within": result.df_within,
        "p_value": float(f"{result.p_value:.6e}"),
        "eta_squared": round(result.eta_squared, 4),
        "n": result.n,
        "groups": len(result.group_counts),
    }


@dataclass
class Section:
    """Aggregates over one set of devices (baseline or an exclusion variant)."""

    counts: dict[str, int]
    fractions: dict[str, Optional[float]]
    rules_applied: dict[str, int]
    metrics: dict[str, Optional[dict]]
    tb_distribution: list[dict]
    factors: dict[str, dict]
    anova: list[dict]
    rankings: list[dict] = field(default_factory=list)
    anova_results: list[AnovaResult] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "counts": self.counts,
            "fractions": self.fractions,
            "rules_applied": self.rules_applied,
            "metrics": self.metrics,
            "tb_distribution": self.tb_distribution,
            "factors": self.factors,
            "anova": self.anova,
        }


def _aggregated(d: DeviceResult, include_provisional: bool) -> bool:
    return (
        d.extracted
        and d.matched is not None
        and not d.metrics.flagged
        and (include_provisional or not d.metrics.provisional)
    )


def summarize(
    devices: Sequence[DeviceResult],
    include_provisional: bool = True,
    min_group_size: int = 2,
) -> Section:
    total = len(devices)
    extracted = [d for d in devices if d.extracted]
    matched = [d for d in extracted if d.matched is not None]
    counted = [d for d in matched if include_provisional or not d.metrics.provisional]
    latest = sum(1 for d in counted if d.metrics.up_to_date is True)
    flagged = sum(1 for d in counted if d.metrics.flagged)
    agg = [d for d in devices if _aggregated(d, include_provisional)]
    counts = {
        "total": total,
        "extracted": len(extracted),
        "unextracted": total - len(extracted),
        "matched": len(matched),
        "unmatched": len(extracted) - len(matched),
        "running_latest": latest,
        "flagged": flagged,
        "provisional_excluded": len(matched) - len(counted),
        "aggregated": len(agg),
    }
    fractions = {
        "extracted": _fraction(len(extracted), total),
        "matched": _fraction(len(matched), total),
        "running_latest": _fraction(latest, len(matched)),
    }
    rules = Counter(d.metrics.rule_applied.value for d in devices)

    metric_values = {m: [v for d in agg if (v := d.metric_value(m)) is not None] for m in METRICS}
    tb_hist = Counter(metric_values["TB"])

    factors: dict[str, dict] = {}
    rankings: list[dict] = []
    anova_rows: list[dict] = []
    anova_results: list[AnovaResult] = []
    for factor in FACTORS:
        unknown = sum(1 for d in agg if d.factor_value(factor) is None)
        block: dict[str, Any] = {"unknown": unknown, "rankings": {}, "spread_of_means": {}}
        for metric in METRICS:
            groups: dict[str, list[int]] = {}
            for d in agg:
                key, value = d.factor_value(factor), d.metric_value(metric)
                if key is not None and value is not None:
                    groups.setdefault(key, []).append(value)
            rows = group_descriptives(groups)[:-1]  # drop the overall row
            ranked = sorted(rows, key=lambda r: (-r.mean, r.group_key))
            for rank, r in enumerate(ranked, start=1):
                rankings.append({"factor": factor, "metric": metric, "rank": rank, **r.to_json()})
            block["rankings"][metric] = {
                "groups": len(ranked),
                "top": [r.to_json() for r in ranked[:RANK_DEPTH]],
                "bottom": [r.to_json() for r in ranked[-RANK_DEPTH:]] if ranked else [],
            }
            means = [r.mean for r in ranked]
            block["spread_of_means"][metric] = _months(describe("m", means).std_dev) if means else None

            pooled = pool_small_groups(groups, min_group_size)
            try:
                result = one_way_anova(pooled)
            except ValidationError as exc:
                anova_rows.append({"factor": factor, "metric": metric, "error": str(exc)})
                continue
            result = replace(result, factor=factor, metric=metric)
            anova_results.append(result)
            anova_rows.append(anova_json(result))
        factors[factor] = block

    return Section(
        counts=counts,
        fractions=fractions,
        rules_applied={r.value: rules.get(r.value, 0) for r in RuleApplied},
        metrics={m: _desc_json(metric_values[m]) for m in METRICS},
        tb_distribution=[{"months": k, "count": tb_hist[k]} for k in sorted(tb_hist)],
        factors=factors,
        anova=anova_rows,
        rankings=rankings,
        anova_results=anova_results,
    )


@dataclass
class PipelineSummary:
    baseline: Section
    exclusion: Optional[dict] = None
    excluded: Optional[Section] = None
    ingest: Optional[dict] = None
    exploration: Optional[dict] = None
    coverage: Optional[dict] = None
    accounting: Optional[dict] = None
    as_of: Optional[str] = None
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        exclusion = None
        if self.exclusion is not None:
            exclusion = {**self.exclusion, "summary": self.excluded.to_json()}
        return {
            "as_of": self.as_of,
            "ingest": self.ingest,
            "exploration": self.exploration,
            "coverage": self.coverage,
            "accounting": self.accounting,
            "baseline": self.baseline.to_json(),
            "exclusion": exclusion,
            "warnings": list(self.warnings),
        }


def build_summary(
    devices: Iterable[DeviceResult],
    exclusions: Optional[ExclusionSpec] = None,
    include_provisional: bool = True,
    min_group_size: int = 2,
) -> PipelineSummary:
    """Baseline aggregates, plus a second pass without excluded models if given."""
    devices = sorted(devices, key=lambda d: d.record_id)
    baseline = summarize(devices, include_provisional, min_group_size)
    summary = PipelineSummary(baseline=baseline)
    if exclusions is None:
        return summary

    excluded = set(exclusions.excluded_models)
    matched_models = {d.matched for d in devices if d.matched is not None}
    for key in sorted(excluded - matched_models):
        msg = f"excluded model {key[0]}/{key[1]} has no matched devices"
        log.warning(msg)
        summary.warnings.append(msg)
    kept = [d for d in devices if d.matched not in excluded]
    removed = Counter(d.matched for d in devices if d.matched in excluded and d.extracted)
    variant = summarize(kept, include_provisional, min_group_size)
    summary.excluded = variant
    summary.exclusion = {
        "models": [f"{m}/{n}" for m, n in sorted(excluded)],
        "reason": exclusions.reason,
        "removed_devices": {f"{m}/{n}": removed[(m, n)] for m, n in sorted(excluded)},
    }
    return summary


# -- export -----------------------------------------------------------------

METRICS_COLUMNS = (
    "record_id",
    "manufacturer",
    "model",
    "device_type",
    "country_code",
    "extracted",
    "installed_version",
    "installed_date",
    "general_fw_date",
    "installed_date_source",
    "catalog_manufacturer",
    "catalog_model",
    "latest_version",
    "latest_date",
    "rule_applied",
    "tb_months",
    "aif_months",
    "alf_months",
    "up_to_date",
    "version_jump",
    "data_quality",
    "matched_rules",
)
ANOVA_COLUMNS = ("variant", "factor", "metric", "f_stat", "df_between", "df_within", "p_value", "eta_squared", "n", "groups", "error")
RANKING_COLUMNS = ("variant", "factor", "metric", "rank", "group", "n", "mean", "std_dev", "min", "max")


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ";".join(str(v) for v in value)
    return str(value)


def _csv_text(columns: Sequence[str], rows: Iterable[Mapping[str, Any]], fmt: Mapping[str, str] = {}) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        out = []
        for col in columns:
            value = row.get(col)
            if col in fmt and isinstance(value, (int, float)) and not isinstance(value, bool):
                value = format(value, fmt[col])
            out.append(_cell(value))
        writer.writerow(out)
    return buf.getvalue()


def summary_json_text(summary: PipelineSummary) -> str:
    return json.dumps(summary.to_json(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def export(
    summary: PipelineSummary,
    devices: Iterable[DeviceResult],
    out_dir: str | Path,
    formats: Sequence[str] = ("json", "csv"),
) -> list[Path]:
    """Write ``summary.json`` and the CSV tables; output is byte-stable."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def write(name: str, text: str) -> None:
        path = out / name
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        written.append(path)

    if "json" in formats:
        write("summary.json", summary_json_text(summary))
    if "csv" in formats:
        rows = [d.to_row() for d in sorted(devices, key=lambda d: d.record_id)]
        write("metrics.csv", _csv_text(METRICS_COLUMNS, rows))
        variants = [("baseline", summary.baseline)]
        if summary.excluded is not None:
            variants.append(("excluded", summary.excluded))
        anova_rows = [{"variant": name, **row} for name, sec in variants for row in sec.anova]
        write(
            "anova.csv",
            _csv_text(ANOVA_COLUMNS, anova_rows, {"f_stat": ".4f", "eta_squared": ".4f", "p_value": ".6e"}),
        )
        rank_rows = [{"variant": name, **row} for name, sec in variants for row in sec.rankings]
        write("rankings.csv", _csv_text(RANKING_COLUMNS, rank_rows, {"mean": ".2f", "std_dev": ".2f"}))
    return written
