"""Compare an exported summary against a reference-script golden.

The reference keeps full precision; the export rounds months to 2 d.p.,
eta squared and F to 4 d.p., p to 7 significant digits and fractions to
6 d.p. Tolerances below are exactly those rounding steps.
"""

from __future__ import annotations

import csv
import io
import math

MONTHS_TOL = 0.005 + 1e-9
FOUR_DP = 5e-5 + 1e-12
FRACTION_TOL = 5e-7 + 1e-12


def _close_row(got: dict, want: dict, where: str) -> list[str]:
    errors = []
    for key in ("group", "n", "min", "max"):
        if got[key] != want[key]:
            errors.append(f"{where}: {key} {got[key]!r} != {want[key]!r}")
    for key in ("mean", "std_dev"):
        if abs(float(got[key]) - want[key]) > MONTHS_TOL:
            errors.append(f"{where}: {key} {got[key]} vs {want[key]}")
    return errors


def compare_section(section: dict, golden: dict, label: str) -> list[str]:
    errors = []
    if section["counts"] != golden["counts"]:
        errors.append(f"{label}: counts {section['counts']} != {golden['counts']}")
    for key, want in golden["fractions"].items():
        got = section["fractions"][key]
        if (got is None) != (want is None) or (want is not None and abs(got - want) > FRACTION_TOL):
            errors.append(f"{label}: fraction {key} {got} vs {want}")
    nonzero = {k: v for k, v in section["rules_applied"].items() if v}
    if nonzero != golden["rules_applied"]:
        errors.append(f"{label}: rules_applied {nonzero} != {golden['rules_applied']}")
    for metric, want in golden["metrics"].items():
        got = section["metrics"][metric]
        if want is None or got is None:
            if got != want:
                errors.append(f"{label}: metric {metric} {got} vs {want}")
            continue
        errors += _close_row({"group": "all", **got}, want, f"{label}/{metric}")
    tb = {str(row["months"]): row["count"] for row in section["tb_distribution"]}
    if tb != golden["tb_distribution"]:
        errors.append(f"{label}: tb_distribution differs")
    for key, rows in golden["rankings"].items():
        factor, metric = key.split("/")
        block = section["factors"][factor]["rankings"][metric]
        if block["groups"] != len(rows):
            errors.append(f"{label}/{key}: {block['groups']} groups != {len(rows)}")
            continue
        for got, want in zip(block["top"], rows[:2]):
            errors += _close_row(got, want, f"{label}/{key}/top")
        for got, want in zip(block["bottom"], rows[-2:] if rows else []):
            errors += _close_row(got, want, f"{label}/{key}/bottom")
    anova = {f"{r['factor']}/{r['metric']}": r for r in section["anova"]}
    for key, want in golden["anova"].items():
        got = anova[key]
        if "error" in want or "error" in got:
            if ("error" in want) != ("error" in got):
                errors.append(f"{label}/{key}: anova error mismatch {got} vs {want}")
            continue
        for k in ("df_between", "df_within", "n", "groups"):
            if got[k] != want[k]:
                errors.append(f"{label}/{key}: {k} {got[k]} != {want[k]}")
        if want["f_stat"] == "inf" or got["f_stat"] == "inf":
            if got["f_stat"] != want["f_stat"]:
                errors.append(f"{label}/{key}: F {got['f_stat']} vs {want['f_stat']}")
        elif abs(got["f_stat"] - want["f_stat"]) > FOUR_DP:
            errors.append(f"{label}/{key}: F {got['f_stat']} vs {want['f_stat']}")
        if abs(got["eta_squared"] - want["eta_squared"]) > FOUR_DP:
            errors.append(f"{label}/{key}: eta2 {got['eta_squared']} vs {want['eta_squared']}")
        if not math.isclose(got["p_value"], want["p_value"], rel_tol=1e-6, abs_tol=1e-12):
            errors.append(f"{label}/{key}: p {got['p_value']} vs {want['p_value']}")
    return errors


def compare_rankings_csv(text: str, section: dict, variant: str) -> list[str]:
    """Full ranking tables of one golden section, not only the top/bottom excerpt."""
    errors = []
    rows = [r for r in csv.DictReader(io.StringIO(text)) if r["variant"] == variant]
    for key, want in section["rankings"].items():
        factor, metric = key.split("/")
        got = [r for r in rows if r["factor"] == factor and r["metric"] == metric]
        if [r["group"] for r in got] != [w["group"] for w in want]:
            errors.append(f"{variant}/{key}: ranking order differs")
            continue
        for g, w in zip(got, want):
            g = {**g, "n": int(g["n"]), "min": int(g["min"]), "max": int(g["max"])}
            errors += _close_row(g, w, f"{variant}/{key}/csv")
    return errors


def compare_summary(summary: dict, golden: dict) -> list[str]:
    errors = []
    ingest = summary["ingest"]
    for key, want in golden["ingest"].items():
        if ingest[key] != want:
            errors.append(f"ingest {key}: {ingest[key]} != {want}")
    coverage = {k: summary["coverage"][k] for k in golden["coverage"]}
    if coverage != golden["coverage"]:
        errors.append(f"coverage {coverage} != {golden['coverage']}")
    if summary["exploration"]["missing"] != golden["exploration"]["missing"]:
        errors.append("exploration missing-counts differ")
    errors += compare_section(summary["baseline"], golden["baseline"], "baseline")
    if "excluded" in golden:
        errors += compare_section(summary["exclusion"]["summary"], golden["excluded"], "excluded")
    return errors
