from __future__ import annotations

import random

import pytest

from fwscope.catalog import (
    AliasEntry,
    Catalog,
    CatalogEntry,
    latest_for_model,
    load_aliases,
    load_catalog,
    match_device,
)
from fwscope.errors import CatalogError
from fwscope.model import DeviceIdentity, MonthDate, parse_version

HEADER = "manufacturer,model,version,release_date\n"


def write(tmp_path, text, name="catalog.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def catalog_of(*rows):
    return Catalog.from_entries(
        CatalogEntry(m, mo, parse_version(v), MonthDate.parse(d)) for m, mo, v, d in rows
    )


def test_three_rows(tmp_path):
    path = write(tmp_path, HEADER + "D-Link,DIR-860L,1.0,2018-01\nD-Link,DIR-860L,1.1,2019-06-15\nD-Link,DIR-860L,1.2,2020-02\n")
    catalog = load_catalog(path)
    assert len(catalog) == 3 and catalog.models == [("d-link", "dir-860l")]
    latest = latest_for_model(catalog, "D-Link", "DIR-860L")
    assert latest.version.raw == "1.2" and latest.release_date == MonthDate(2020, 2)


def test_duplicate_row_names_line(tmp_path):
    path = write(tmp_path, HEADER + "a,b,1.0,2018-01\nA,B,1.0,2019-01\n")
    with pytest.raises(CatalogError, match=r"catalog.csv:3: duplicate"):
        load_catalog(path)


@pytest.mark.parametrize(
    "text, needle",
    [
        ("manufacturer,model,version\na,b,1\n", "missing column"),
        (HEADER + "a,b,,2018-01\n", "empty version"),
        (HEADER + "a,,1.0,2018-01\n", "empty model"),
        (HEADER + "a,b,1.0,Jan 2018\n", ":2:"),
    ],
)
def test_load_errors(tmp_path, text, needle):
    with pytest.raises(CatalogError, match=needle):
        load_catalog(write(tmp_path, text))


def test_full_scale_synthetic_catalog(tmp_path):
    # 401 models carrying 1,899 rows between them
    rnd = random.Random(401)
    sizes = [1] * 401
    for _ in range(1899 - 401):
        sizes[rnd.randrange(401)] += 1
    lines = [HEADER]
    for i, size in enumerate(sizes):
        for j in range(size):
            year = 2005 + rnd.randrange(15)
            lines.append(f"vendor{i % 37},model-{i},{j + 1}.{rnd.randrange(10)},{year}-{rnd.randint(1, 12):02d}\n")
    catalog = load_catalog(write(tmp_path, "".join(lines)))
    assert len(catalog.models) == 401 and len(catalog) == 1899
    for key in catalog.models:
        latest = catalog.latest(key)
        assert all(latest.release_date >= e.release_date for e in catalog.entries[key])


def test_latest_tie_breaks():
    cat = catalog_of(("x", "m", "1.0", "2018-01"), ("x", "m", "2.0", "2019-06"))
    assert latest_for_model(cat, "x", "m").version.raw == "2.0"
    cat = catalog_of(("x", "m", "2.0", "2019-06"), ("x", "m", "2.1", "2019-06"))
    assert latest_for_model(cat, "x", "m").version.raw == "2.1"
    # date beats version: a re-released older line does not count as older
    cat = catalog_of(("x", "m", "3.0", "2017-01"), ("x", "m", "2.9", "2018-01"))
    assert latest_for_model(cat, "x", "m").version.raw == "2.9"
    # equal versions up to padding fall back to the raw string
    cat = catalog_of(("x", "m", "2", "2019-06"), ("x", "m", "2.0", "2019-06"))
    assert latest_for_model(cat, "x", "m").version.raw == "2.0"
    assert latest_for_model(cat, "x", "other") is None
    assert latest_for_model(cat, None, "m") is None


def test_release_date_of_ignores_padding():
    cat = catalog_of(("x", "m", "1.10", "2018-01"), ("x", "m", "2.0", "2019-06"))
    assert cat.release_date_of(("x", "m"), parse_version("2")) == MonthDate(2019, 6)
    assert cat.release_date_of(("x", "m"), parse_version("1.1")) is None


CAT = catalog_of(
    ("d-link", "dir-860l", "1.10", "2018-01"),
    ("zte", "h108n", "2.5", "2019-11"),
    ("acme", "box", "1.0", "2018-01"),
    ("other", "box", "1.0", "2018-01"),
)


@pytest.mark.parametrize(
    "identity, expected",
    [
        (DeviceIdentity("d-link", "dir-860l"), ("d-link", "dir-860l")),
        (DeviceIdentity("d-link", "dir-999"), None),
        (DeviceIdentity(None, "dir-860l"), ("d-link", "dir-860l")),
        (DeviceIdentity(None, "box"), None),
        (DeviceIdentity("zte", None), None),
        (DeviceIdentity("tp-link", "dir-860l"), None),
    ],
)
def test_match_device(identity, expected):
    assert match_device(identity, CAT) == expected


def test_aliases(tmp_path):
    path = write(tmp_path, "manufacturer,from_model,to_model\nD-Link,DIR860L,DIR-860L\nD-Link,DIR 860L,DIR-860L\n", "aliases.csv")
    cat = CAT.with_aliases(load_aliases(path))
    assert match_device(DeviceIdentity("d-link", "dir 860l"), cat) == ("d-link", "dir-860l")
    assert match_device(DeviceIdentity(None, "dir860l"), cat) == ("d-link", "dir-860l")
    once = cat.resolve_alias("d-link", "dir860l")
    assert cat.resolve_alias("d-link", once) == once == "dir-860l"
    assert latest_for_model(cat, "D-Link", "DIR860L").version.raw == "1.10"


def test_alias_chain_rejected():
    # targets must be catalog models, so chains cannot form
    with pytest.raises(CatalogError, match="not in the catalog"):
        CAT.with_aliases([AliasEntry("d-link", "dir860", "dir860l"), AliasEntry("d-link", "dir860l", "dir-860l")])


def test_alias_validation():
    with pytest.raises(CatalogError, match="not in the catalog"):
        CAT.with_aliases([AliasEntry("zte", "h108", "h109")])
    with pytest.raises(CatalogError, match="twice"):
        CAT.with_aliases([AliasEntry("zte", "a", "h108n"), AliasEntry("zte", "a", "h108n")])
    cyclic = catalog_of(("x", "a", "1", "2018-01"), ("x", "b", "1", "2018-01"))
    with pytest.raises(CatalogError, match="cycle"):
        cyclic.with_aliases([AliasEntry("x", "a", "b"), AliasEntry("x", "b", "a")])


def test_bundled_catalog(fixtures):
    catalog = load_catalog(fixtures / "catalog_40.csv").with_aliases(load_aliases(fixtures / "aliases.csv"))
    assert len(catalog.models) == 40
    assert latest_for_model(catalog, "ZTE", "H108N").version.raw == "2.5"
