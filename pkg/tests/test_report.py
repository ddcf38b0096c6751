from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

import jsonschema
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fwscope.errors import ValidationError
from fwscope.ingest import ScanRecord, canonical_hash
from fwscope.metrics import FUTURE_DATE, FreshnessMetrics, RuleApplied, evaluate_rules
from fwscope.model import DeviceIdentity, MonthDate, parse_version
from fwscope.report import (
    DeviceResult,
    ExclusionSpec,
    build_summary,
    export,
    field_nullness,
    summarize,
    summary_json_text,
)

SCHEMA = json.loads((Path(__file__).resolve().parents[1] / "docs" / "summary.schema.json").read_text())
AS_OF = MonthDate(2020, 4)


def record(i: int, **meta) -> ScanRecord:
    return ScanRecord(canonical_hash({"body": str(i)}), str(i), AS_OF, **meta)


def device(i, model=("zte", "h108n"), country="VE", dtype="router", ifd=(2019, 11), lfd=(2019, 11), flags=(), rule=None):
    m = evaluate_rules(
        None, parse_version("1.0"), MonthDate(*ifd) if ifd else None, parse_version("1.0"), MonthDate(*lfd), AS_OF
    )
    if flags:
        m = FreshnessMetrics(m.rule_applied, m.tb_months, m.aif_months, m.alf_months, m.up_to_date, None, frozenset(flags))
    if rule is not None:
        m = FreshnessMetrics(rule, None, m.aif_months, None, None)
    return DeviceResult(
        record_id=f"{i:04d}",
        identity=DeviceIdentity(model[0] if model else None, model[1] if model else None, dtype, country),
        metrics=m,
        extracted=True,
        matched=model,
    )


def test_field_nullness():
    records = [record(i, country_code=None if i < 4 else "VE") for i in range(10)]
    out = field_nullness(records)
    assert out["null_fraction"]["country_code"] == pytest.approx(0.4)
    full = [record(i, ip="1.1.1.1", country_code="VE", manufacturer="m", model="p", device_type="router") for i in range(3)]
    assert set(field_nullness(full)["null_fraction"].values()) == {0.0}
    assert field_nullness([])["null_fraction"]["ip"] is None


def test_empty_summary():
    section = summarize([])
    assert set(section.counts.values()) == {0}
    assert set(section.fractions.values()) == {None}
    assert all(v is None for v in section.metrics.values())
    assert all("error" in row for row in section.anova)


def test_rankings_follow_oracle_sort():
    ages = {"VE": [10, 12], "BR": [30, 30], "RU": [5, 7], "US": [11, 11], "DE": [30, 30]}
    devices = []
    i = 0
    for country, values in ages.items():
        for aif in values:
            installed = AS_OF.shift(-aif)
            devices.append(device(i, country=country, ifd=(installed.year, installed.month), lfd=(2020, 1)))
            i += 1
    section = summarize(devices)
    expected = sorted(ages, key=lambda c: (-sum(ages[c]) / len(ages[c]), c))
    block = section.factors["country"]["rankings"]["AiF"]
    assert [r["group"] for r in block["top"]] == expected[:2] == ["BR", "DE"]
    assert [r["group"] for r in block["bottom"]] == expected[-2:]
    full = [r["group"] for r in section.rankings if r["factor"] == "country" and r["metric"] == "AiF"]
    assert full == expected


def test_flagged_and_unknown_factor_handling():
    devices = [
        device(0),
        device(1, flags=(FUTURE_DATE,)),
        device(2, country=None),
        device(3, model=None),
    ]
    section = summarize(devices)
    c = section.counts
    assert (c["matched"], c["unmatched"], c["flagged"], c["aggregated"]) == (3, 1, 1, 2)
    assert section.factors["country"]["unknown"] == 1
    assert c["running_latest"] == 3  # flags do not remove a device from the census


def test_provisional_exclusion():
    devices = [device(0), device(1, rule=RuleApplied.GENERAL_DATE_ONLY)]
    assert summarize(devices).counts["aggregated"] == 2
    strict = summarize(devices, include_provisional=False)
    assert strict.counts["provisional_excluded"] == 1 and strict.counts["aggregated"] == 1


def test_exclusion_variant():
    devices = [device(i) for i in range(9)] + [device(9, model=("d-link", "dir-860l"), ifd=(2018, 1))]
    summary = build_summary(devices, ExclusionSpec.parse(["ZTE/H108N", "acme/none"], "edition label"))
    base, variant = summary.baseline.counts, summary.excluded.counts
    assert base["running_latest"] == 9 and variant["running_latest"] == 0
    removed = summary.exclusion["removed_devices"]["zte/h108n"]
    assert variant["matched"] == base["matched"] - removed
    assert summary.warnings == ["excluded model acme/none has no matched devices"]
    assert summary.baseline.fractions["running_latest"] == pytest.approx(0.9)
    assert summary.excluded.fractions["running_latest"] == 0.0


def test_exclusion_spec_parse():
    assert ExclusionSpec.parse([" ZTE / H108N "]).excluded_models == (("zte", "h108n"),)
    with pytest.raises(ValidationError):
        ExclusionSpec.parse(["h108n"])


def test_device_row_roundtrip():
    d = device(5, flags=(FUTURE_DATE,))
    assert DeviceResult.from_row(json.loads(json.dumps(d.to_row()))) == d


def test_export_deterministic_and_valid(tmp_path):
    devices = [device(i, country=c) for i, c in enumerate(["VE", "VE", "BR", "BR", "RU"])]
    devices.append(device(9, country="RU", ifd=(2018, 1)))
    summary = build_summary(devices, ExclusionSpec.parse(["zte/h108n"]))
    a, b = tmp_path / "a", tmp_path / "b"
    export(summary, devices, a)
    export(build_summary(list(reversed(devices)), ExclusionSpec.parse(["zte/h108n"])), list(reversed(devices)), b)
    for name in ("summary.json", "metrics.csv", "anova.csv", "rankings.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    jsonschema.validate(json.loads((a / "summary.json").read_text()), SCHEMA)
    assert "\r" not in (a / "metrics.csv").read_text()


def test_export_empty(tmp_path):
    export(build_summary([]), [], tmp_path)
    doc = json.loads((tmp_path / "summary.json").read_text())
    jsonschema.validate(doc, SCHEMA)
    assert doc["baseline"]["counts"]["total"] == 0
    assert (tmp_path / "metrics.csv").read_text().count("\n") == 1


def test_export_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        export(build_summary([]), [], blocker / "out")


def test_number_formatting():
    devices = [device(i, country=c, ifd=(2019, m)) for i, (c, m) in enumerate([("A", 1), ("A", 2), ("B", 7), ("B", 9)])]
    text = summary_json_text(build_summary(devices))
    doc = json.loads(text)
    row = next(r for r in doc["baseline"]["anova"] if r["factor"] == "country" and r["metric"] == "AiF")
    assert row["eta_squared"] == round(row["eta_squared"], 4)
    assert text.endswith("\n") and text == summary_json_text(build_summary(devices))


device_specs = st.lists(
    st.tuples(
        st.booleans(),
        st.sampled_from([None, ("zte", "h108n"), ("d-link", "dir-860l")]),
        st.sampled_from([None, "VE", "BR"]),
        st.integers(2015, 2021),
        st.sampled_from([None, RuleApplied.GENERAL_DATE_ONLY]),
    ),
    max_size=30,
)


@given(device_specs, st.booleans())
def test_count_accounting_identity(specs, include_provisional):
    devices = []
    for i, (extracted, model, country, year, rule) in enumerate(specs):
        d = device(i, model=model, country=country, ifd=(year, 6), lfd=(2019, 11), rule=rule)
        devices.append(replace(d, extracted=extracted))
    c = summarize(devices, include_provisional).counts
    parts = c["unextracted"] + c["unmatched"] + c["provisional_excluded"] + c["flagged"] + c["aggregated"]
    assert parts == c["total"]
    assert c["running_latest"] <= c["matched"] <= c["extracted"] <= c["total"]
