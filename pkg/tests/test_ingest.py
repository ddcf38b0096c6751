from __future__ import annotations

import base64
import hashlib
import json
import math
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats as sps

from fwscope.errors import SchemaError, ValidationError
from fwscope.ingest import (
    DedupeCounts,
    ReadCounts,
    SamplePlan,
    ScanRecord,
    canonical_hash,
    dedupe,
    draw_sample,
    read_records,
    record_from_mapping,
    sample_size,
    z_for_confidence,
)
from fwscope.model import MonthDate

BASE = {"body": "<html>Firmware ver. 1.2</html>", "scanned_at": "2020-04", "source": "censys_banner"}


def test_canonical_hash_against_hashlib():
    fields = {"body": "x", "scanned_at": "2020-04", "ip": None}
    expected = hashlib.sha256("body=x\x1fscanned_at=2020-04".encode()).hexdigest()
    assert canonical_hash(fields) == expected


field_maps = st.dictionaries(
    st.sampled_from(["ip", "body", "product", "manufacturer", "scanned_at", "source"]),
    st.one_of(st.none(), st.text(max_size=8)),
    min_size=1,
).filter(lambda d: any(v is not None for v in d.values()))


@given(field_maps, st.randoms())
def test_canonical_hash_order_invariant(fields, rnd):
    items = list(fields.items())
    rnd.shuffle(items)
    assert canonical_hash(dict(items)) == canonical_hash(fields)


def test_record_from_mapping_normalizes():
    rec = record_from_mapping({**BASE, "country_code": "ve", "product": " H108N "})
    assert rec.country_code == "VE" and rec.model == "H108N"
    assert rec.record_id == canonical_hash(rec.fields())
    again = record_from_mapping(rec.to_row())
    assert again == rec


def test_body_b64():
    encoded = base64.b64encode(BASE["body"].encode()).decode()
    rec = record_from_mapping({"body_b64": encoded, "scanned_at": "2020-04", "source": "censys_banner"})
    assert rec == record_from_mapping(BASE)


@pytest.mark.parametrize(
    "row",
    [
        {"scanned_at": "2020-04"},
        {"body": "x"},
        {"body": "x", "scanned_at": "April"},
        {"body": "x", "scanned_at": "2020-04", "source": "zoomeye"},
        {"body": 3, "scanned_at": "2020-04"},
        ["body"],
    ],
)
def test_record_rejects(row):
    with pytest.raises(ValidationError):
        record_from_mapping(row)


def test_read_jsonl_counts_skips(write_jsonl, tmp_path):
    path = write_jsonl([BASE, {"body": "y", "scanned_at": "2020-02"}, {"scanned_at": "2020-04"}])
    with open(path, "a") as handle:
        handle.write("{broken\n\n")
    counts = ReadCounts()
    records = list(read_records(path, "jsonl", counts))
    assert len(records) == 2 and counts.skipped == 2 and counts.total_rows == 4
    assert records[1].source == "fixture"


def test_read_csv(tmp_path):
    path = tmp_path / "in.csv"
    path.write_text(
        'body,scanned_at,source,product\n"Firmware ver. 1.2, see ""docs""",2020-04,shodan,H108N\n'
        "x,2020-04,shodan,a,too-many\n",
        encoding="utf-8",
    )
    counts = ReadCounts()
    records = list(read_records(path, "csv", counts))
    assert [r.body for r in records] == ['Firmware ver. 1.2, see "docs"']
    assert counts.skipped == 1


def test_mostly_malformed_is_schema_error(write_jsonl):
    path = write_jsonl([BASE, {"nope": 1}, {"nope": 2}])
    with pytest.raises(SchemaError):
        list(read_records(path))


def test_dedupe_counts(write_jsonl):
    shuffled = dict(reversed(list(BASE.items())))
    path = write_jsonl([BASE, shuffled, {**BASE, "ip": "1.2.3.4"}])
    counts = DedupeCounts()
    kept = list(dedupe(read_records(path), counts))
    assert len(kept) == 2 and counts.dropped == 1


def _rec(i: int) -> ScanRecord:
    body = f"body {i}"
    return ScanRecord(canonical_hash({"body": body}), body, MonthDate(2020, 4))


@given(st.lists(st.integers(0, 20), max_size=40))
def test_dedupe_idempotent(ids):
    records = [_rec(i) for i in ids]
    once = list(dedupe(records))
    assert list(dedupe(once)) == once
    assert len(once) == len(set(ids))


def test_sample_size_reference_values():
    assert sample_size(SamplePlan(1_060_000, 2.58, 0.01, 0.5)) == 16384
    assert sample_size(SamplePlan(None, 2.58, 0.01, 0.5)) == 16641
    assert sample_size(SamplePlan(100, 2.58, 0.01, 0.5)) == 100
    assert sample_size(SamplePlan(0)) == 0


def test_sample_size_by_hand():
    # n0 = z^2 p(1-p) / e^2, then n0 / (1 + (n0 - 1) / N)
    n0 = 1.96**2 * 0.25 / 0.05**2
    assert sample_size(SamplePlan(5000, 1.96, 0.05)) == math.ceil(n0 / (1 + (n0 - 1) / 5000))


@given(st.integers(1, 10**7), st.integers(1, 10**7))
def test_sample_size_monotone_in_population(a, b):
    lo, hi = sorted((a, b))
    assert sample_size(SamplePlan(lo)) <= sample_size(SamplePlan(hi)) <= sample_size(SamplePlan(None))


@given(st.floats(0.005, 0.2), st.floats(0.005, 0.2))
def test_sample_size_monotone_in_margin(a, b):
    lo, hi = sorted((a, b))
    assert sample_size(SamplePlan(50_000, 2.58, hi)) <= sample_size(SamplePlan(50_000, 2.58, lo))


def test_z_for_confidence():
    assert z_for_confidence(0.99) == 2.58
    assert z_for_confidence(0.95) == 1.96
    with pytest.raises(ValidationError):
        z_for_confidence(1.0)


@pytest.mark.parametrize("kwargs", [{"margin_e": 0}, {"assumed_p": 1}, {"confidence_z": -1}, {"population_n": -5}])
def test_sample_plan_rejects(kwargs):
    with pytest.raises(ValidationError):
        SamplePlan(**{"population_n": 10, **kwargs})


def test_draw_sample_deterministic_and_order_free():
    records = [_rec(i) for i in range(200)]
    a = draw_sample(records, 30, seed=7)
    b = draw_sample(list(reversed(records)), 30, seed=7)
    assert a == b and len(set(a)) == 30
    assert [r.record_id for r in a] == sorted(r.record_id for r in a)
    assert draw_sample(records, 30, seed=8) != a
    with pytest.raises(ValidationError):
        draw_sample(records, 201, seed=1)


def test_draw_sample_is_uniform():
    # inclusion counts over many seeds should be flat across the population
    records = [_rec(i) for i in range(40)]
    hits = Counter()
    trials = 2000
    for seed in range(trials):
        hits.update(r.record_id for r in draw_sample(records, 10, seed))
    observed = [hits[r.record_id] for r in records]
    _, p = sps.chisquare(observed)
    assert p > 1e-3


def test_fixture_reads(fixtures):
    counts = ReadCounts()
    records = list(read_records(fixtures / "scan_1000.jsonl", "jsonl", counts))
    assert counts.total_rows == 1000 and 0 < counts.skipped < 500
    assert all(json.dumps(r.to_row()) for r in records)
