"""Stage functions and the end-to-end pipeline run."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Optional, Sequence

from fwscope.catalog import Catalog, LatestFirmware, ModelKey, load_aliases, load_catalog, match_device
from fwscope.errors import ValidationError
from fwscope.ingest import (
    DedupeCounts,
    ReadCounts,
    SamplePlan,
    ScanRecord,
    dedupe,
    draw_sample,
    read_records,
    sample_size,
    z_for_confidence,
)
from fwscope.metrics import DEFAULT_AS_OF, compute_metrics
from fwscope.model import MonthDate, parse_version
from fwscope.report import (
    DeviceResult,
    ExclusionSpec,
    PipelineSummary,
    build_summary,
    export,
    field_nullness,
)
from fwscope.rules import FirmwareObservation, RuleSet, extract, extraction_coverage, load_rules, starter_rules_path

log = logging.getLogger(__name__)

EXTRACT_CHUNK = 2048


@contextmanager
def stage(name: str):
    """Tag any exception escaping the block with the failing stage name."""
    try:
        yield
    except Exception as exc:
        if not hasattr(exc, "stage"):
            exc.stage = name
        raise


@dataclass
class PipelineConfig:
    inputs: Sequence[Path]
    catalog: Path
    out_dir: Path
    rules: Optional[Path] = None
    aliases: Optional[Path] = None
    format: str = "jsonl"
    as_of: MonthDate = DEFAULT_AS_OF
    seed: int = 0
    sample_confidence: Optional[float] = None
    sample_margin: Optional[float] = None
    sample_n: Optional[int] = None
    sample_proportion: float = 0.5
    exclude_models: Sequence[str] = ()
    exclusion_reason: str = ""
    threads: int = 1
    include_provisional: bool = True
    min_group_size: int = 2
    keep_intermediate: bool = False

    def __post_init__(self) -> None:
        self.inputs = [Path(p) for p in self.inputs]
        self.catalog = Path(self.catalog)
        self.out_dir = Path(self.out_dir)
        self.rules = Path(self.rules) if self.rules else starter_rules_path()
        self.aliases = Path(self.aliases) if self.aliases else None

    @property
    def sampling(self) -> bool:
        return self.sample_n is not None or self.sample_confidence is not None

    def exclusions(self) -> Optional[ExclusionSpec]:
        if not self.exclude_models:
            return None
        return ExclusionSpec.parse(self.exclude_models, self.exclusion_reason)

    def validate(self) -> None:
        """Check every referenced file and setting before any work starts."""
        if not self.inputs:
            raise ValidationError("no input files given")
        files = [("input", p) for p in self.inputs] + [("catalog", self.catalog), ("rules", self.rules)]
        if self.aliases is not None:
            files.append(("aliases", self.aliases))
        for what, path in files:
            if not path.is_file():
                raise ValidationError(f"{what} file not found: {path}")
        if self.format not in ("jsonl", "csv"):
            raise ValidationError(f"unsupported format {self.format!r}")
        if self.threads < 1:
            raise ValidationError("threads must be >= 1")
        if self.min_group_size < 1:
            raise ValidationError("min_group_size must be >= 1")
        if self.sample_n is not None:
            if self.sample_n <= 0:
                raise ValidationError("sample size must be positive")
            if self.sample_confidence is not None or self.sample_margin is not None:
                raise ValidationError("give either an explicit sample size or confidence/margin, not both")
        if (self.sample_confidence is None) != (self.sample_margin is None):
            raise ValidationError("sample confidence and margin go together")
        if self.sample_confidence is not None:
            SamplePlan(None, z_for_confidence(self.sample_confidence), self.sample_margin, self.sample_proportion)
        self.exclusions()


# -- JSONL helpers ------------------------------------------------------------


def write_jsonl(path: str | Path, rows: Iterable[Mapping[str, Any]]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for row in rows:
            handle.write(json.dumps(row, sort_keys=True, ensure_ascii=False))
            handle.write("\n")
            n += 1
    return n


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: not JSON: {exc}") from exc


# -- stages -------------------------------------------------------------------


@dataclass
class IngestResult:
    records: list[ScanRecord]
    read: ReadCounts = field(default_factory=ReadCounts)
    dedupe: DedupeCounts = field(default_factory=DedupeCounts)
    sample: Optional[dict] = None

    @property
    def sampled_out(self) -> int:
        return self.dedupe.kept - len(self.records)

    def to_json(self) -> dict:
        return {
            "rows": self.read.total_rows,
            "read": self.read.read,
            "skipped": self.read.skipped,
            "duplicates": self.dedupe.dropped,
            "deduplicated": self.dedupe.kept,
            "sample": self.sample,
            "sampled_out": self.sampled_out,
            "analyzed": len(self.records),
        }


def ingest_stage(
    inputs: Sequence[Path],
    format: str = "jsonl",
    seed: int = 0,
    sample_n: Optional[int] = None,
    sample_confidence: Optional[float] = None,
    sample_margin: Optional[float] = None,
    sample_proportion: float = 0.5,
) -> IngestResult:
    read = ReadCounts()
    counts = DedupeCounts()

    def stream() -> Iterator[ScanRecord]:
        for path in inputs:
            yield from read_records(path, format, read)

    records = list(dedupe(stream(), counts))
    result = IngestResult(records, read, counts)
    population = len(records)
    if sample_confidence is not None:
        plan = SamplePlan(population, z_for_confidence(sample_confidence), sample_margin, sample_proportion)
        n = sample_size(plan)
        result.sample = {
            "population": population,
            "confidence": sample_confidence,
            "z": plan.confidence_z,
            "margin": sample_margin,
            "proportion": sample_proportion,
            "n": n,
            "seed": seed,
        }
        result.records = draw_sample(records, n, seed)
    elif sample_n is not None:
        result.sample = {"population": population, "n": sample_n, "seed": seed}
        result.records = draw_sample(records, sample_n, seed)
    log.info(
        "ingest: rows=%d skipped=%d duplicates=%d analyzed=%d",
        read.total_rows,
        read.skipped,
        counts.dropped,
        len(result.records),
    )
    return result


def extract_all(records: Sequence[ScanRecord], rules: RuleSet, threads: int = 1) -> list[FirmwareObservation]:
    """Extraction in input order; worker count never changes the result."""
    if threads <= 1 or len(records) <= EXTRACT_CHUNK:
        return [extract(r, rules) for r in records]
    chunks = [records[i : i + EXTRACT_CHUNK] for i in range(0, len(records), EXTRACT_CHUNK)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = pool.map(lambda chunk: [extract(r, rules) for r in chunk], chunks)
        return [obs for part in parts for obs in part]


@dataclass(frozen=True)
class MatchResult:
    observation: FirmwareObservation
    model: Optional[ModelKey] = None
    latest: Optional[LatestFirmware] = None
    installed_date_source: Optional[str] = None

    def to_row(self) -> dict:
        row = self.observation.to_row()
        row.update(
            {
                "catalog_manufacturer": self.model[0] if self.model else None,
                "catalog_model": self.model[1] if self.model else None,
                "latest_version": self.latest.version.raw if self.latest and self.latest.version else None,
                "latest_date": str(self.latest.release_date) if self.latest and self.latest.release_date else None,
                "installed_date_source": self.installed_date_source,
            }
        )
        return row

    @classmethod
    def from_row(cls, row: Mapping) -> "MatchResult":
        obs = FirmwareObservation.from_row(row)
        model = None
        if row.get("catalog_manufacturer") and row.get("catalog_model"):
            model = (row["catalog_manufacturer"], row["catalog_model"])
        latest = None
        if row.get("latest_version") or row.get("latest_date"):
            latest = LatestFirmware(
                version=parse_version(row["latest_version"]) if row.get("latest_version") else None,
                release_date=MonthDate.parse(row["latest_date"]) if row.get("latest_date") else None,
            )
        return cls(obs, model, latest, row.get("installed_date_source"))


def match_observation(obs: FirmwareObservation, catalog: Catalog) -> MatchResult:
    """Match to a catalog model and fill a missing installed date from it.

    When the banner gives a version but no date, the catalog's release date
    for that version (if listed) becomes the installed date.
    """
    source = "banner" if obs.installed_date is not None else None
    key = match_device(obs.identity, catalog)
    if key is None:
        return MatchResult(obs, None, None, source)
    if obs.installed_date is None and obs.installed_version is not None:
        released = catalog.release_date_of(key, obs.installed_version)
        if released is not None:
            provenance = {**obs.provenance, "installed_date": "catalog"}
            obs = replace(obs, installed_date=released, provenance=provenance)
            source = "catalog"
    return MatchResult(obs, key, catalog.latest(key), source)


def analyze_match(match: MatchResult, as_of: MonthDate = DEFAULT_AS_OF) -> DeviceResult:
    obs = match.observation
    metrics = compute_metrics(obs, match.latest, as_of)
    latest = match.latest
    return DeviceResult(
        record_id=obs.record_id,
        identity=obs.identity,
        metrics=metrics,
        extracted=obs.extracted,
        matched=match.model,
        installed_version=obs.installed_version.raw if obs.installed_version else None,
        installed_date=obs.installed_date,
        general_fw_date=obs.general_fw_date,
        installed_date_source=match.installed_date_source,
        latest_version=latest.version.raw if latest and latest.version else None,
        latest_date=latest.release_date if latest else None,
        matched_rules=obs.matched_rules,
    )


def load_catalog_with_aliases(catalog_path: Path, aliases_path: Optional[Path]) -> Catalog:
    catalog = load_catalog(catalog_path)
    if aliases_path is not None:
        catalog = catalog.with_aliases(load_aliases(aliases_path))
    return catalog


def accounting(ingest: IngestResult, summary: PipelineSummary) -> dict:
    counts = summary.baseline.counts
    parts = {
        "skipped": ingest.read.skipped,
        "duplicates": ingest.dedupe.dropped,
        "sampled_out": ingest.sampled_out,
        "unextracted": counts["unextracted"],
        "unmatched": counts["unmatched"],
        "provisional_excluded": counts["provisional_excluded"],
        "flagged": counts["flagged"],
        "aggregated": counts["aggregated"],
    }
    return {"input_rows": ingest.read.total_rows, **parts, "balanced": sum(parts.values()) == ingest.read.total_rows}


def run_pipeline(config: PipelineConfig) -> tuple[PipelineSummary, list[DeviceResult]]:
    """ingest, dedupe, sample, extract, match, metrics, stats, report."""
    with stage("validate"):
        config.validate()
    with stage("load-rules"):
        rules = load_rules(config.rules)
    with stage("load-catalog"):
        catalog = load_catalog_with_aliases(config.catalog, config.aliases)
    with stage("ingest"):
        ingest = ingest_stage(
            config.inputs,
            config.format,
            config.seed,
            config.sample_n,
            config.sample_confidence,
            config.sample_margin,
            config.sample_proportion,
        )
    with stage("extract"):
        observations = extract_all(ingest.records, rules, config.threads)
        coverage = extraction_coverage(observations)
        log.info("extract: extracted=%d of %d", coverage.extracted, coverage.total)
    with stage("match"):
        matches = [match_observation(obs, catalog) for obs in observations]
        log.info("match: matched=%d", sum(1 for m in matches if m.model is not None))
    with stage("metrics"):
        devices = [analyze_match(m, config.as_of) for m in matches]
    with stage("report"):
        summary = build_summary(devices, config.exclusions(), config.include_provisional, config.min_group_size)
        summary.as_of = str(config.as_of)
        summary.ingest = ingest.to_json()
        summary.exploration = field_nullness(ingest.records)
        summary.coverage = coverage.to_json()
        summary.accounting = accounting(ingest, summary)
        if not summary.accounting["balanced"]:
            log.error("record accounting does not balance: %s", summary.accounting)
    with stage("export"):
        export(summary, devices, config.out_dir)
        if config.keep_intermediate:
            out = config.out_dir
            write_jsonl(out / "records.jsonl", (r.to_row() for r in ingest.records))
            write_jsonl(out / "observations.jsonl", (o.to_row() for o in observations))
            write_jsonl(out / "matches.jsonl", (m.to_row() for m in matches))
            write_jsonl(out / "metrics.jsonl", (d.to_row() for d in devices))
    log.info("run: wrote outputs to %s", config.out_dir)
    return summary, devices
