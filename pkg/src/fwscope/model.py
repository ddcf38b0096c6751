"""Core value types: calendar months, firmware versions and device identities."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Optional

from fwscope.errors import ValidationError

MIN_YEAR = 1990
MAX_YEAR = 2100


@dataclass(frozen=True, order=True)
class MonthDate:
    """A Gregorian year/month pair; all firmware ages are counted in these."""

    year: int
    month: int

    def __post_init__(self) -> None:
        if not 1 <= self.month <= 12:
            raise ValidationError(f"month out of range: {self.month}")
        if not MIN_YEAR <= self.year <= MAX_YEAR:
            raise ValidationError(f"year out of range: {self.year}")

    @classmethod
    def parse(cls, text: str) -> "MonthDate":
        """Parse ``YYYY-MM`` (a trailing ``-DD`` is accepted and dropped)."""
        m = _ISO_MONTH.fullmatch(text.strip())
        if m is None:
            raise ValidationError(f"expected YYYY-MM or YYYY-MM-DD, got {text!r}")
        year, month, day = m.group(1), m.group(2), m.group(3)
        if day is not None and not 1 <= int(day) <= 31:
            raise ValidationError(f"day out of range in {text!r}")
        return cls(int(year), int(month))

    def shift(self, months: int) -> "MonthDate":
        index = self.year * 12 + (self.month - 1) + months
        return MonthDate(index // 12, index % 12 + 1)

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


_ISO_MONTH = re.compile(r"(\d{4})-(\d{2})(?:-(\d{2}))?")


def months_between(a: MonthDate, b: MonthDate) -> int:
    """Whole calendar months from ``a`` to ``b``; negative when ``b`` precedes ``a``."""
    return (b.year - a.year) * 12 + (b.month - a.month)


class VersionJump(str, enum.Enum):
    EQUAL = "Equal"
    MAJOR = "MajorJump"
    MINOR = "MinorJump"
    PATCH_OR_OTHER = "PatchOrOther"
    INCOMPARABLE = "Incomparable"


@dataclass(frozen=True)
class FirmwareVersion:
    raw: str
    components: tuple[int, ...]
    suffix: str = ""

    @property
    def comparable(self) -> bool:
        return bool(self.components)

    def __str__(self) -> str:
        return self.raw


_SEPARATORS = re.compile(r"([._-])")
_NUMERIC = re.compile(r"[0-9]+")


def parse_version(raw: str) -> FirmwareVersion:
    """Split a vendor version string into numeric components and a suffix.

    A single leading ``v``/``V`` is dropped, the rest is split on ``.``, ``-``
    and ``_``. The leading run of purely numeric segments becomes the
    components; whatever follows the separator after that run is the suffix.
    Input without a leading numeric segment yields empty components.
    """
    text = raw.strip()
    if text[:1] in ("v", "V"):
        text = text[1:]
    pieces = _SEPARATORS.split(text)
    # pieces alternates segment, separator, segment, ...
    components: list[int] = []
    i = 0
    while i < len(pieces) and _NUMERIC.fullmatch(pieces[i]):
        components.append(int(pieces[i]))
        i += 2
    if not components:
        return FirmwareVersion(raw=raw, components=(), suffix="")
    suffix = "".join(pieces[i:])
    return FirmwareVersion(raw=raw, components=tuple(components), suffix=suffix)


def _padded(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    width = max(len(a), len(b))
    return a + (0,) * (width - len(a)), b + (0,) * (width - len(b))


def compare_versions(installed: FirmwareVersion, latest: FirmwareVersion) -> VersionJump:
    if not installed.comparable or not latest.comparable:
        return VersionJump.INCOMPARABLE
    a, b = _padded(installed.components, latest.components)
    if a == b and installed.suffix == latest.suffix:
        return VersionJump.EQUAL
    if a[0] != b[0]:
        return VersionJump.MAJOR
    if len(a) > 1 and a[1] != b[1]:
        return VersionJump.MINOR
    return VersionJump.PATCH_OR_OTHER


def version_order_key(version: FirmwareVersion) -> tuple:
    """Sort key placing higher versions later; trailing zeros are ignored."""
    comps = list(version.components)
    while comps and comps[-1] == 0:
        comps.pop()
    return (version.comparable, tuple(comps), version.suffix)


_WS = re.compile(r"\s+")


def normalize_label(value: Optional[str]) -> Optional[str]:
    """Lowercase and collapse whitespace; blank input means unknown (``None``)."""
    if value is None:
        return None
    text = _WS.sub(" ", value).strip().lower()
    return text or None


# closed device-type vocabulary, keyed by accepted spellings
DEVICE_TYPES = (
    "access point",
    "camera",
    "dvr",
    "firewall",
    "industrial controller",
    "media device",
    "misc",
    "modem",
    "nas",
    "network device",
    "printer",
    "router",
    "smart home",
    "voip",
)

_DEVICE_TYPE_SYNONYMS = {
    "ap": "access point",
    "wap": "access point",
    "wireless access point": "access point",
    "ip camera": "camera",
    "webcam": "camera",
    "nvr": "dvr",
    "plc": "industrial controller",
    "scada": "industrial controller",
    "ics": "industrial controller",
    "switch": "network device",
    "network": "network device",
    "storage": "nas",
    "mfp": "printer",
    "home automation": "smart home",
    "smart-home": "smart home",
    "smarthome": "smart home",
    "gateway": "router",
    "cpe": "router",
    "voip phone": "voip",
    "sip phone": "voip",
    "media player": "media device",
    "tv": "media device",
    "dsl modem": "modem",
    "cable modem": "modem",
}


def normalize_device_type(value: Optional[str]) -> Optional[str]:
    """Map a free-text device type onto the closed vocabulary.

    Recognized spellings map to their canonical term; any other non-blank
    value becomes ``"misc"``.
    """
    label = normalize_label(value)
    if label is None:
        return None
    if label in DEVICE_TYPES:
        return label
    if label in _DEVICE_TYPE_SYNONYMS:
        return _DEVICE_TYPE_SYNONYMS[label]
    if label.endswith("s") and label[:-1] in DEVICE_TYPES:
        return label[:-1]
    return "misc"


_COUNTRY = re.compile(r"[A-Za-z]{2}")


def normalize_country_code(value: Optional[str]) -> Optional[str]:
    if value is None:
        return None
    text = value.strip()
    if not _COUNTRY.fullmatch(text):
        return None
    return text.upper()


@dataclass(frozen=True)
class DeviceIdentity:
    """Who a device is. ``None`` in any field means unknown."""

    manufacturer: Optional[str] = None
    model: Optional[str] = None
    device_type: Optional[str] = None
    country_code: Optional[str] = None

    @classmethod
    def normalized(
        cls,
        manufacturer: Optional[str] = None,
        model: Optional[str] = None,
        device_type: Optional[str] = None,
        country_code: Optional[str] = None,
    ) -> "DeviceIdentity":
        return cls(
            manufacturer=normalize_label(manufacturer),
            model=normalize_label(model),
            device_type=normalize_device_type(device_type),
            country_code=normalize_country_code(country_code),
        )
