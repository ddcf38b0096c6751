"""Per-device firmware freshness: TB, AiF, AlF and the up-to-date flag."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from fwscope.catalog import LatestFirmware
from fwscope.model import (
    FirmwareVersion,
    MonthDate,
    VersionJump,
    compare_versions,
    months_between,
)
from fwscope.rules import FirmwareObservation

DEFAULT_AS_OF = MonthDate(2020, 4)


class RuleApplied(str, enum.Enum):
    FULL = "Full"
    INSTALLED_DATE_ONLY = "InstalledDateOnly"
    LATEST_ONLY = "LatestOnly"
    GENERAL_DATE_ONLY = "GeneralDateOnly"
    VERSION_COMPARE_ONLY = "VersionCompareOnly"
    NO_CALCULATION = "NoCalculation"


# rows the original rule table marks as not yet processed
PROVISIONAL_RULES = frozenset({RuleApplied.GENERAL_DATE_ONLY, RuleApplied.VERSION_COMPARE_ONLY})

NEGATIVE_TB = "negative_tb"
FUTURE_DATE = "future_date"


@dataclass(frozen=True)
class FreshnessMetrics:
    rule_applied: RuleApplied
    tb_months: Optional[int] = None
    aif_months: Optional[int] = None
    alf_months: Optional[int] = None
    up_to_date: Optional[bool] = None
    version_jump: Optional[VersionJump] = None
    data_quality: frozenset[str] = frozenset()

    @property
    def flagged(self) -> bool:
        return bool(self.data_quality)

    @property
    def provisional(self) -> bool:
        return self.rule_applied in PROVISIONAL_RULES


def evaluate_rules(
    general_date: Optional[MonthDate],
    installed_version: Optional[FirmwareVersion],
    installed_date: Optional[MonthDate],
    latest_version: Optional[FirmwareVersion],
    latest_date: Optional[MonthDate],
    as_of: MonthDate,
) -> FreshnessMetrics:
    """Pick the most informative applicable modelling rule and evaluate it.

    Order: full set (TB), installed date (AiF), latest release (AlF),
    general date (AiF), version comparison, nothing. The installed-date and
    latest-release rows combine; a general date stands in for a missing
    installed date when computing AiF.
    """
    full = None not in (installed_version, installed_date, latest_version, latest_date)
    has_latest = latest_version is not None and latest_date is not None
    has_versions = installed_version is not None and latest_version is not None

    if full:
        rule = RuleApplied.FULL
    elif installed_date is not None:
        rule = RuleApplied.INSTALLED_DATE_ONLY
    elif has_latest:
        rule = RuleApplied.LATEST_ONLY
    elif general_date is not None:
        rule = RuleApplied.GENERAL_DATE_ONLY
    elif has_versions:
        rule = RuleApplied.VERSION_COMPARE_ONLY
    else:
        return FreshnessMetrics(rule_applied=RuleApplied.NO_CALCULATION)

    age_from = installed_date if installed_date is not None else general_date
    aif = months_between(age_from, as_of) if age_from is not None else None
    alf = months_between(latest_date, as_of) if has_latest else None
    tb = months_between(installed_date, latest_date) if full else None
    jump = compare_versions(installed_version, latest_version) if has_versions else None

    if full:
        up_to_date = installed_date == latest_date
    elif has_versions:
        up_to_date = jump is VersionJump.EQUAL
    elif installed_date is not None and latest_date is not None:
        up_to_date = installed_date == latest_date
    else:
        up_to_date = None

    flags = set()
    if tb is not None and tb < 0:
        flags.add(NEGATIVE_TB)
    dates = (general_date, installed_date, latest_date if has_latest else None)
    if any(d is not None and d > as_of for d in dates):
        flags.add(FUTURE_DATE)

    return FreshnessMetrics(
        rule_applied=rule,
        tb_months=tb,
        aif_months=aif,
        alf_months=alf,
        up_to_date=up_to_date,
        version_jump=jump,
        data_quality=frozenset(flags),
    )


def compute_metrics(
    obs: FirmwareObservation,
    latest: Optional[LatestFirmware],
    as_of: MonthDate = DEFAULT_AS_OF,
) -> FreshnessMetrics:
    return evaluate_rules(
        obs.general_fw_date,
        obs.installed_version,
        obs.installed_date,
        latest.version if latest is not None else None,
        latest.release_date if latest is not None else None,
        as_of,
    )


def classify_up_to_date(obs: FirmwareObservation, latest: Optional[LatestFirmware]) -> Optional[bool]:
    """Version equality when both versions are known, else equal release dates."""
    if latest is None:
        return None
    if obs.installed_version is not None and latest.version is not None:
        return compare_versions(obs.installed_version, latest.version) is VersionJump.EQUAL
    if obs.installed_date is not None and latest.release_date is not None:
        return obs.installed_date == latest.release_date
    return None
