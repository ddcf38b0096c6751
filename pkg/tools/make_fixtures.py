"""Regenerate the bundled fixtures under src/fwscope/data/fixtures/.

    python tools/make_fixtures.py

Output is fully determined by the seeds below; rerunning reproduces the
committed files byte for byte.
"""

from __future__ import annotations

import csv
import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "fwscope" / "data" / "fixtures"

# manufacturer, model (display spelling), device type, banner style
MODELS = [
    ("MikroTik", "RB750Gr3", "router", "routeros"),
    ("MikroTik", "RB951Ui-2HnD", "router", "routeros"),
    ("MikroTik", "hAP-ac2", "router", "routeros"),
    ("MikroTik", "CCR1009", "router", "routeros"),
    ("MikroTik", "CRS326", "network device", "routeros"),
    ("ZTE", "H108N", "router", "html"),
    ("ZTE", "ZXHN-H267A", "router", "html"),
    ("ZTE", "F660", "modem", "html"),
    ("ZTE", "ZXV10-W300", "modem", "html"),
    ("D-Link", "DIR-860L", "router", "html"),
    ("D-Link", "DIR-615", "router", "html"),
    ("D-Link", "DCS-930L", "camera", "camera"),
    ("D-Link", "DIR-842", "router", "html"),
    ("D-Link", "DSL-2750U", "modem", "html"),
    ("Hikvision", "DS-2CD2032", "camera", "camera"),
    ("Hikvision", "DS-7608NI", "dvr", "camera"),
    ("Hikvision", "DS-2CD2142", "camera", "camera"),
    ("Dahua Technology", "IPC-HDW4431C", "camera", "camera"),
    ("Dahua Technology", "NVR4104", "dvr", "camera"),
    ("TP-Link", "Archer-C7", "router", "html"),
    ("TP-Link", "TL-WR841N", "router", "html"),
    ("TP-Link", "TL-WA901ND", "access point", "html"),
    ("Netgear", "R7000", "router", "html"),
    ("Netgear", "WNR2000", "router", "html"),
    ("Netgear", "DGN2200", "modem", "html"),
    ("Cisco", "RV320", "firewall", "html"),
    ("Cisco", "SPA112", "voip", "released"),
    ("Ubiquiti", "UniFi-AP-AC-LR", "access point", "html"),
    ("Ubiquiti", "EdgeRouter-X", "router", "html"),
    ("Ubiquiti", "NanoStation-M5", "access point", "html"),
    ("Huawei", "HG8245H", "router", "html"),
    ("Huawei", "B593", "modem", "html"),
    ("ZyXEL", "NBG6515", "router", "html"),
    ("ZyXEL", "P-660HN", "modem", "html"),
    ("Brother", "HL-L2340D", "printer", "printer"),
    ("Brother", "MFC-J470DW", "printer", "printer"),
    ("HP", "OfficeJet-Pro-8610", "printer", "printer"),
    ("Algo", "8180", "voip", "released"),
    ("AVM", "FritzBox-7490", "router", "html"),
    ("AVM", "FritzDECT-200", "smart home", "buildonly"),
]

UNKNOWN_MODELS = [("Acme", "XR-1000", "router"), ("Tenda", "AC6", "router"), ("Foscam", "FI9821W", "camera")]
COUNTRIES = ["VE", "BR", "RU", "US", "DE", "CN", "IT", "FR", "ID", "IN", "BS", "ET", "LI", "HT", "MX"]
COUNTRY_WEIGHTS = [14, 10, 9, 8, 7, 7, 5, 5, 4, 4, 2, 2, 1, 1, 3]
MONTHS = ["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"]


def month_index(year: int, month: int) -> int:
    return year * 12 + month - 1


def from_index(i: int) -> tuple[int, int]:
    return i // 12, i % 12 + 1


def make_catalog(rng: random.Random) -> dict[tuple[str, str], list[tuple[str, tuple[int, int]]]]:
    catalog = {}
    for manufacturer, model, _, style in MODELS:
        n = rng.randint(2, 6)
        start = month_index(2012, 1) + rng.randint(0, 60)
        dates = sorted(rng.sample(range(start, month_index(2020, 3) + 1), n))
        if style == "routeros":
            major, minor = 6, rng.randint(38, 42)
            versions = []
            for _ in range(n):
                minor += rng.randint(0, 2)
                versions.append(f"{major}.{minor}.{len(versions) + 1}")
        else:
            major, minor = rng.randint(1, 4), 0
            versions = []
            for _ in range(n):
                if rng.random() < 0.3:
                    major, minor = major + 1, 0
                else:
                    minor += 1
                versions.append(f"{major}.{minor}")
        catalog[(manufacturer, model)] = list(zip(versions, [from_index(d) for d in dates]))
    # the edition-numbered router: every unit reports the catalog's latest label
    catalog[("ZTE", "H108N")] = [("2.3", (2016, 5)), ("2.4", (2017, 9)), ("2.5", (2019, 11))]
    # a release after the 2020-04 reference month, to exercise future-date flags
    catalog[("Netgear", "WNR2000")].append(("9.9", (2020, 7)))
    return catalog


def fmt_date(rng: random.Random, ym: tuple[int, int]) -> str:
    year, month = ym
    day = rng.randint(1, 28)
    style = rng.randrange(5)
    if style == 0:
        return f"{year:04d}-{month:02d}-{day:02d}"
    if style == 1:
        return f"{year:04d}/{month:02d}/{day:02d}"
    if style == 2:
        return f"{day:02d}.{month:02d}.{year:04d}"
    if style == 3:
        return f"{MONTHS[month - 1]} {year}"
    return f"{year:04d}-{month:02d}"


def banner(rng, manufacturer, model, style, version, date, device_type):
    """Body text in one of the shapes the starter rules understand."""
    if style == "routeros":
        return f"MikroTik RouterOS {version} (stable)\r\nLogin: "
    if style == "camera":
        shown = f"V{version}" if rng.random() < 0.5 else version
        return (
            f'<html><head><title>{model}</title></head><body>'
            f'<span class="fw-version">{shown}</span><p>Model: {model}</p>'
            f"<p>Device type: {device_type}</p></body></html>"
        )
    if style == "printer":
        return (
            f"<html><body><h1>{manufacturer} {model}</h1>"
            f"<td>Firmware Version: {version}</td>"
            + (f"<td>Build date: {fmt_date(rng, date)}</td>" if date and rng.random() < 0.6 else "")
            + "</body></html>"
        )
    if style == "released":
        return (
            f"<html><body>Model: {model}<br>Manufacturer: {manufacturer}<br>"
            f"Firmware released {fmt_date(rng, date)}</body></html>"
        )
    if style == "buildonly":
        return f"<html><body><b>{model}</b> Build date: {fmt_date(rng, date)}</body></html>"
    date_part = f" ({fmt_date(rng, date)})" if date and rng.random() < 0.5 else ""
    mfr = f"Manufacturer: {manufacturer}<br>" if rng.random() < 0.5 else ""
    return (
        f"<html><head><title>{model}</title></head><body>{mfr}"
        f"<div>Product: {model}</div><div>Firmware ver. {version}{date_part}</div></body></html>"
    )


def random_ip(rng: random.Random) -> str:
    return ".".join(str(rng.randint(1, 254)) for _ in range(4))


def device_row(rng, catalog, choice, *, version_policy="mixed"):
    manufacturer, model, device_type, style = choice
    history = catalog[(manufacturer, model)]
    released = [h for h in history if h[1] <= (2020, 4)]
    r = rng.random()
    if version_policy == "latest":
        version, date = history[-1]
    elif version_policy == "old" and len(released) > 1:
        version, date = rng.choice(released[:-1])
    elif r < 0.82:
        version, date = rng.choice(history)
    elif r < 0.92:
        version, date = f"{rng.randint(1, 9)}.{rng.randint(10, 99)}", (2016, rng.randint(1, 12))
    else:
        version, date = history[-1][0], (2021, 2)
    shown_model = model
    if model == "DIR-860L" and rng.random() < 0.3:
        shown_model = "DIR860L"
    body = banner(rng, manufacturer, shown_model, style, version, date, device_type)
    row = {"body": body, "scanned_at": rng.choice(["2020-02", "2020-04"])}
    if rng.random() < 0.97:
        row["ip"] = random_ip(rng)
    if rng.random() < 0.93:
        code = rng.choices(COUNTRIES, COUNTRY_WEIGHTS)[0]
        row["country_code"] = code.lower() if rng.random() < 0.1 else code
    if rng.random() < 0.85:
        row["manufacturer"] = manufacturer
    if style in ("routeros", "buildonly") or rng.random() < 0.6:
        row["product"] = shown_model
    if rng.random() < 0.74:
        row["device_type"] = device_type
    row["source"] = rng.choice(["censys_banner", "censys_public"])
    return row


def noise_row(rng) -> dict:
    row = {"body": rng.choice(["<html><body>Login required</body></html>", "", "220 FTP ready\r\n"]),
           "scanned_at": "2020-04", "source": "censys_banner"}
    if rng.random() < 0.5:
        row["country_code"] = rng.choice(COUNTRIES)
    return row


def unknown_model_row(rng) -> dict:
    manufacturer, model, device_type = rng.choice(UNKNOWN_MODELS)
    return {
        "body": f"<html><body>Product: {model}<div>Firmware ver. 1.{rng.randint(0, 9)}</div></body></html>",
        "scanned_at": "2020-04",
        "ip": random_ip(rng),
        "country_code": rng.choice(COUNTRIES),
        "manufacturer": manufacturer,
        "device_type": device_type,
        "source": "censys_banner",
    }


MALFORMED_LINES = [
    '{"scanned_at": "2020-04", "manufacturer": "ZTE"}',
    '{"body": "<html></html>", "scanned_at": "April 2020"}',
    '{"body": "Firmware ver. 1.2", "scanned_at": "2020-04", "source": "zoomeye"}',
    '{"body": "truncated',
    '["not", "an", "object"]',
    '{"body": 42, "scanned_at": "2020-04"}',
]


def write_jsonl(path: Path, lines: list[str]) -> None:
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def write_catalog(path: Path, catalog) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["manufacturer", "model", "version", "release_date"])
        for (manufacturer, model), history in catalog.items():
            for version, (year, month) in history:
                writer.writerow([manufacturer, model, version, f"{year:04d}-{month:02d}"])


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    rng = random.Random(20200415)
    catalog = make_catalog(rng)
    write_catalog(OUT / "catalog_40.csv", catalog)
    (OUT / "aliases.csv").write_text("manufacturer,from_model,to_model\nD-Link,DIR860L,DIR-860L\n", encoding="utf-8")

    weights = [30 if m[0] == "MikroTik" else 12 if m[0] == "ZTE" else 3 for m in MODELS]
    rows: list[str] = []
    while len(rows) < 940:
        r = rng.random()
        if r < 0.05:
            row = noise_row(rng)
        elif r < 0.09:
            row = unknown_model_row(rng)
        else:
            row = device_row(rng, catalog, rng.choices(MODELS, weights)[0])
        rows.append(json.dumps(row))
    # exact duplicates, some with reordered keys
    for _ in range(40):
        original = json.loads(rng.choice(rows))
        keys = list(original)
        if rng.random() < 0.5:
            rng.shuffle(keys)
        rows.append(json.dumps({k: original[k] for k in keys}))
    rng.shuffle(rows)
    for i in range(20):
        rows.insert(rng.randrange(len(rows)), MALFORMED_LINES[i % len(MALFORMED_LINES)])
    assert len(rows) == 1000
    write_jsonl(OUT / "scan_1000.jsonl", rows)

    # dominant-model fixture: one always-latest router dwarfs the rest
    drng = random.Random(2450)
    h108n = next(m for m in MODELS if m[1] == "H108N")
    others = [m for m in MODELS if m[1] != "H108N" and m[3] != "buildonly" and m[3] != "released"]
    drows = []
    for _ in range(360):
        drows.append(json.dumps(device_row(drng, catalog, h108n, version_policy="latest")))
    for i in range(40):
        choice = drng.choice(others)
        policy = "latest" if i % 20 == 0 else "old"
        drows.append(json.dumps(device_row(drng, catalog, choice, version_policy=policy)))
    drng.shuffle(drows)
    write_jsonl(OUT / "dominant_400.jsonl", drows)

    # paginated source fixture: two pages of five records
    prng = random.Random(7)
    records = [device_row(prng, catalog, prng.choice(MODELS)) for _ in range(10)]
    pages = {
        "pages": [
            {"cursor": None, "records": records[:5], "next_cursor": "page-2"},
            {"cursor": "page-2", "records": records[5:], "next_cursor": None},
        ]
    }
    (OUT / "source_pages.json").write_text(json.dumps(pages, indent=1) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
