"""Independent recomputation of the pipeline summary, used to freeze goldens.

Deliberately shares no code with the fwscope package: it re-derives record
ids, rule extraction, catalog matching, the metric dispatch table and every
aggregate from first principles (ANOVA via scipy). Run it to regenerate

    tests/golden/scan_1000.json      full run over the 1,000-row fixture
    tests/golden/dominant_400.json   baseline vs. dominant-model exclusion

    python tools/reference_summary.py
"""

from __future__ import annotations

import base64
import csv
import hashlib
import json
import re
import statistics
from collections import Counter, defaultdict
from pathlib import Path

from scipy import stats as sps

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "src" / "fwscope" / "data" / "fixtures"
RULES = ROOT / "src" / "fwscope" / "data" / "starter_rules.json"
GOLDEN = ROOT / "tests" / "golden"
AS_OF = (2020, 4)

SOURCES = {"censys_banner", "censys_public", "shodan", "fixture"}
TYPES = {
    "access point", "camera", "dvr", "firewall", "industrial controller", "media device", "misc",
    "modem", "nas", "network device", "printer", "router", "smart home", "voip",
}
TYPE_SYNONYMS = {
    "ap": "access point", "wap": "access point", "wireless access point": "access point",
    "ip camera": "camera", "webcam": "camera", "nvr": "dvr", "plc": "industrial controller",
    "scada": "industrial controller", "ics": "industrial controller", "switch": "network device",
    "network": "network device", "storage": "nas", "mfp": "printer", "home automation": "smart home",
    "smart-home": "smart home", "smarthome": "smart home", "gateway": "router", "cpe": "router",
    "voip phone": "voip", "sip phone": "voip", "media player": "media device", "tv": "media device",
    "dsl modem": "modem", "cable modem": "modem",
}
MONTH_NAMES = "jan feb mar apr may jun jul aug sep oct nov dec".split()


# -- small helpers ----------------------------------------------------------------


def label(value):
    if value is None:
        return None
    text = " ".join(str(value).split()).lower()
    return text or None


def dtype(value):
    text = label(value)
    if text is None:
        return None
    if text in TYPES:
        return text
    if text in TYPE_SYNONYMS:
        return TYPE_SYNONYMS[text]
    if text.endswith("s") and text[:-1] in TYPES:
        return text[:-1]
    return "misc"


def country(value):
    if value is None:
        return None
    text = str(value).strip()
    return text.upper() if re.fullmatch(r"[A-Za-z]{2}", text) else None


def month_of(text):
    m = re.fullmatch(r"(\d{4})-(\d{2})(?:-(\d{2}))?", text.strip())
    if not m:
        return None
    y, mo = int(m.group(1)), int(m.group(2))
    if m.group(3) and not 1 <= int(m.group(3)) <= 31:
        return None
    if not (1 <= mo <= 12 and 1990 <= y <= 2100):
        return None
    return (y, mo)


def months(a, b):
    return (b[0] - a[0]) * 12 + b[1] - a[1]


def fw_date(text):
    text = text.strip()
    for pat, order in (
        (r"(\d{4})-(\d{1,2})-(\d{1,2})", "ymd"),
        (r"(\d{4})/(\d{1,2})/(\d{1,2})", "ymd"),
        (r"(\d{1,2})\.(\d{1,2})\.(\d{4})", "dmy"),
        (r"([A-Za-z]{3})\.? (\d{4})", "Ny"),
        (r"(\d{4})-(\d{1,2})", "ym"),
    ):
        m = re.fullmatch(pat, text)
        if not m:
            continue
        parts = dict(zip(order, m.groups()))
        if "N" in parts:
            if parts["N"].lower() not in MONTH_NAMES:
                return None
            mo = MONTH_NAMES.index(parts["N"].lower()) + 1
        else:
            mo = int(parts["m"])
        if "d" in parts and not 1 <= int(parts["d"]) <= 31:
            return None
        y = int(parts["y"])
        if not (1 <= mo <= 12 and 1990 <= y <= 2100):
            return None
        return (y, mo)
    return None


def version(raw):
    """(numeric components, suffix) or None when not comparable."""
    text = raw.strip()
    if text[:1] in "vV":
        text = text[1:]
    m = re.match(r"(\d+(?:[._-]\d+)*)(?:([._-])(.*))?$", text, re.S)
    if not m:
        return None
    comps = tuple(int(p) for p in re.split(r"[._-]", m.group(1)))
    suffix = (m.group(3) or "") if m.group(2) else ""
    return comps, suffix


def trimmed(v):
    comps = list(v[0])
    while comps and comps[-1] == 0:
        comps.pop()
    return tuple(comps), v[1]


def same_version(a, b):
    return trimmed(a) == trimmed(b)


# -- ingest --------------------------------------------------------------------


def load_rows(path):
    total = skipped = 0
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        total += 1
        try:
            row = json.loads(line)
        except ValueError:
            skipped += 1
            continue
        rec = normalize(row)
        if rec is None:
            skipped += 1
            continue
        records.append(rec)
    return total, skipped, records


def normalize(row):
    if not isinstance(row, dict):
        return None
    body = row.get("body")
    if body is None and row.get("body_b64") is not None:
        body = base64.b64decode(row["body_b64"]).decode("utf-8", "replace")
    if not isinstance(body, str) or not isinstance(row.get("scanned_at"), str):
        return None
    scanned = month_of(row["scanned_at"])
    if scanned is None:
        return None

    def text(key):
        v = row.get(key)
        if v is None:
            return None
        v = str(v).strip()
        return v or None

    source = text("source") or "fixture"
    if source not in SOURCES:
        return None
    rec = {
        "ip": text("ip"),
        "country_code": country(text("country_code")),
        "manufacturer": text("manufacturer"),
        "product": text("product"),
        "device_type": text("device_type"),
        "body": body,
        "scanned_at": "%04d-%02d" % scanned,
        "source": source,
    }
    present = sorted((k, v) for k, v in rec.items() if v is not None)
    rec["id"] = hashlib.sha256("\x1f".join(f"{k}={v}" for k, v in present).encode()).hexdigest()
    return rec


# -- extraction ----------------------------------------------------------------


def load_rules():
    rules = json.loads(RULES.read_text(encoding="utf-8"))
    out = []
    for r in sorted(rules, key=lambda r: (r["priority"], r["id"])):
        compiled = re.compile(r["pattern"].replace("(?<", "(?P<"))
        caps = sorted(r["captures"].items(), key=lambda kv: compiled.groupindex[kv[0]])
        out.append((r["id"], r["target_field"], compiled, caps, "version" in r["captures"].values()))
    return out


def extract(rec, rules):
    found, used = {}, []
    for rid, target, rx, caps, has_version in rules:
        haystack = rec.get(target)
        if not haystack:
            continue
        m = rx.search(haystack)
        if not m:
            continue
        hit = False
        for group, role in caps:
            value = m.group(group)
            if value is None or not value.strip():
                continue
            slot = ("ifd" if has_version else "gfd") if role == "date" else role
            if slot in found:
                continue
            if slot == "version":
                parsed = version(value)
                parsed = (value.strip(), parsed) if parsed else None
            elif slot in ("ifd", "gfd"):
                parsed = fw_date(value)
            elif slot == "device_type":
                parsed = dtype(value)
            else:
                parsed = label(value)
            if parsed is None:
                continue
            found[slot] = parsed
            hit = True
        if hit:
            used.append(rid)
    for slot, value in (
        ("manufacturer", label(rec["manufacturer"])),
        ("model", label(rec["product"])),
        ("device_type", dtype(rec["device_type"])),
    ):
        if slot not in found and value is not None:
            found[slot] = value
    found["country"] = rec["country_code"]
    found["rules"] = used
    return found


# -- catalog -------------------------------------------------------------------


def load_catalog(path, alias_path):
    history = defaultdict(list)
    with open(path, encoding="utf-8", newline="") as handle:
        for row in csv.DictReader(handle):
            key = (label(row["manufacturer"]), label(row["model"]))
            raw = row["version"].strip()
            history[key].append((month_of(row["release_date"]), version(raw), raw))
    aliases = {}
    if alias_path:
        with open(alias_path, encoding="utf-8", newline="") as handle:
            for row in csv.DictReader(handle):
                aliases[(label(row["manufacturer"]), label(row["from_model"]))] = label(row["to_model"])
    return history, aliases


def latest_of(rows):
    def key(r):
        comps, suffix = trimmed(r[1]) if r[1] else ((), "")
        return (r[0], r[1] is not None, comps, suffix, r[2])

    best = max(rows, key=key)
    return best[2], best[1], best[0]


def resolve(aliases, manufacturer, model):
    while (manufacturer, model) in aliases:
        model = aliases[(manufacturer, model)]
    return model


def match(obs, history, aliases):
    model = obs.get("model")
    if model is None:
        return None
    manufacturer = obs.get("manufacturer")
    if manufacturer is not None:
        key = (manufacturer, resolve(aliases, manufacturer, model))
        return key if key in history else None
    options = {(mf, resolve(aliases, mf, model)) for (mf, mo) in history if mo == model}
    options |= {(mf, resolve(aliases, mf, src)) for (mf, src) in aliases if src == model}
    return options.pop() if len(options) == 1 else None


# -- metric dispatch -------------------------------------------------------------


def evaluate(gfd, ifv, ifd, lfv, lfd, as_of=AS_OF):
    """Returns a dict mirroring the modelling-rule table."""
    full = ifv is not None and ifd is not None and lfv is not None and lfd is not None
    has_latest = lfv is not None and lfd is not None
    if full:
        rule = "Full"
    elif ifd is not None:
        rule = "InstalledDateOnly"
    elif has_latest:
        rule = "LatestOnly"
    elif gfd is not None:
        rule = "GeneralDateOnly"
    elif ifv is not None and lfv is not None:
        rule = "VersionCompareOnly"
    else:
        return {"rule": "NoCalculation", "TB": None, "AiF": None, "AlF": None, "latest": None, "flags": set()}
    start = ifd or gfd
    out = {
        "rule": rule,
        "AiF": months(start, as_of) if start else None,
        "AlF": months(lfd, as_of) if has_latest else None,
        "TB": months(ifd, lfd) if full else None,
    }
    if full:
        out["latest"] = ifd == lfd
    elif ifv is not None and lfv is not None:
        out["latest"] = same_version(ifv[1], lfv) and ifv[1][1] == lfv[1]
    elif ifd is not None and lfd is not None:
        out["latest"] = ifd == lfd
    else:
        out["latest"] = None
    flags = set()
    if out["TB"] is not None and out["TB"] < 0:
        flags.add("negative_tb")
    for d in (gfd, ifd, lfd if has_latest else None):
        if d is not None and d > as_of:
            flags.add("future_date")
    out["flags"] = flags
    return out


# -- aggregation -----------------------------------------------------------------


def analyse(records, history, aliases, rules):
    devices = []
    for rec in sorted(records, key=lambda r: r["id"]):
        obs = extract(rec, rules)
        extracted = any(k in obs for k in ("version", "ifd", "gfd"))
        key = match(obs, history, aliases)
        ifv, ifd, lfv, lfd = obs.get("version"), obs.get("ifd"), None, None
        if key is not None:
            rows = history[key]
            if ifd is None and ifv is not None:
                dates = [d for d, v, _ in rows if v and same_version(v, ifv[1])]
                ifd = min(dates) if dates else None
            _, lfv, lfd = latest_of(rows)
        metrics = evaluate(obs.get("gfd"), ifv, ifd, lfv, lfd)
        devices.append(
            {
                "extracted": extracted,
                "matched": key,
                "country": obs["country"],
                "device_type": obs.get("device_type"),
                "manufacturer": key[0] if key else obs.get("manufacturer"),
                "rules": obs["rules"],
                "has_version": ifv is not None,
                "has_ifd": obs.get("ifd") is not None,
                "has_gfd": obs.get("gfd") is not None,
                **metrics,
            }
        )
    return devices


def pop_stats(name, values):
    return {
        "group": name,
        "n": len(values),
        "mean": statistics.fmean(values),
        "std_dev": statistics.pstdev(values),
        "min": min(values),
        "max": max(values),
    }


def anova(groups):
    small = [v for k in sorted(groups) if len(groups[k]) < 2 for v in groups[k]]
    kept = {k: v for k, v in groups.items() if len(v) >= 2}
    if small:
        kept["(other)"] = kept.get("(other)", []) + small
    if len(kept) < 2:
        return {"error": "fewer than two groups"}
    n = sum(len(v) for v in kept.values())
    if n <= len(kept):
        return {"error": "no residual degrees of freedom"}
    flat = [x for v in kept.values() for x in v]
    if max(flat) == min(flat):
        return {"error": "no variance"}
    grand = statistics.fmean(flat)
    ssb = sum(len(v) * (statistics.fmean(v) - grand) ** 2 for v in kept.values())
    ssw = sum((x - statistics.fmean(v)) ** 2 for v in kept.values() for x in v)
    res = {"df_between": len(kept) - 1, "df_within": n - len(kept), "n": n, "groups": len(kept)}
    if ssw == 0:
        res.update(f_stat="inf", p_value=0.0, eta_squared=1.0)
        return res
    f, p = sps.f_oneway(*[kept[k] for k in sorted(kept)])
    res.update(f_stat=float(f), p_value=float(p), eta_squared=ssb / (ssb + ssw))
    return res


def summarize(devices):
    extracted = [d for d in devices if d["extracted"]]
    matched = [d for d in extracted if d["matched"]]
    latest = sum(1 for d in matched if d["latest"] is True)
    agg = [d for d in matched if not d["flags"]]
    out = {
        "counts": {
            "total": len(devices),
            "extracted": len(extracted),
            "unextracted": len(devices) - len(extracted),
            "matched": len(matched),
            "unmatched": len(extracted) - len(matched),
            "running_latest": latest,
            "flagged": len(matched) - len(agg),
            "provisional_excluded": 0,
            "aggregated": len(agg),
        },
        "fractions": {
            "extracted": len(extracted) / len(devices) if devices else None,
            "matched": len(matched) / len(devices) if devices else None,
            "running_latest": latest / len(matched) if matched else None,
        },
        "rules_applied": dict(Counter(d["rule"] for d in devices)),
        "metrics": {},
        "tb_distribution": dict(sorted(Counter(d["TB"] for d in agg if d["TB"] is not None).items())),
        "rankings": {},
        "anova": {},
    }
    for metric in ("AiF", "AlF", "TB"):
        values = [d[metric] for d in agg if d[metric] is not None]
        out["metrics"][metric] = pop_stats("all", values) if values else None
    for factor in ("country", "device_type", "manufacturer"):
        for metric in ("AiF", "AlF", "TB"):
            groups = defaultdict(list)
            for d in agg:
                if d[factor] is not None and d[metric] is not None:
                    groups[d[factor]].append(d[metric])
            rows = sorted((pop_stats(k, v) for k, v in groups.items()), key=lambda r: (-r["mean"], r["group"]))
            out["rankings"][f"{factor}/{metric}"] = rows
            out["anova"][f"{factor}/{metric}"] = anova(groups)
    return out


def run(inputs, catalog, aliases, exclude=None):
    rules = load_rules()
    history, alias_table = load_catalog(catalog, aliases)
    total = skipped = 0
    seen, unique = set(), []
    for path in inputs:
        t, s, recs = load_rows(path)
        total, skipped = total + t, skipped + s
        for r in recs:
            if r["id"] not in seen:
                seen.add(r["id"])
                unique.append(r)
    devices = analyse(unique, history, alias_table, rules)
    cov = Counter()
    for d in devices:
        cov.update(d["rules"])
    fields = ("ip", "country_code", "manufacturer", "product", "device_type", "body")
    result = {
        "exploration": {
            "records": len(unique),
            "missing": {f: sum(1 for r in unique if not r[f]) for f in fields},
        },
        "ingest": {"rows": total, "skipped": skipped, "duplicates": total - skipped - len(unique), "analyzed": len(unique)},
        "coverage": {
            "total": len(devices),
            "extracted": sum(d["extracted"] for d in devices),
            "with_version": sum(d["has_version"] for d in devices),
            "with_installed_date": sum(d["has_ifd"] for d in devices),
            "with_general_date": sum(d["has_gfd"] for d in devices),
            "rule_hits": dict(sorted(cov.items())),
        },
        "baseline": summarize(devices),
    }
    if exclude:
        key = tuple(label(p) for p in exclude.split("/"))
        result["excluded_model"] = exclude
        result["excluded"] = summarize([d for d in devices if d["matched"] != key])
    return result


def main() -> None:
    GOLDEN.mkdir(parents=True, exist_ok=True)
    cat, ali = FIXTURES / "catalog_40.csv", FIXTURES / "aliases.csv"
    goldens = {
        "scan_1000.json": run([FIXTURES / "scan_1000.jsonl"], cat, ali),
        "dominant_400.json": run([FIXTURES / "dominant_400.jsonl"], cat, ali, exclude="ZTE/H108N"),
    }
    for name, doc in goldens.items():
        (GOLDEN / name).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        print(name, json.dumps(doc["baseline"]["counts"]))
        if "excluded" in doc:
            print("  excluded", json.dumps(doc["excluded"]["counts"]), doc["excluded"]["fractions"])


if __name__ == "__main__":
    main()
