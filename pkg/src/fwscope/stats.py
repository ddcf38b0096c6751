"""Group descriptives and one-way ANOVA with eta squared effect sizes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from fwscope.errors import ValidationError

OVERALL = "overall"
POOLED = "(other)"
FACTORS = ("country", "device_type", "manufacturer")
METRICS = ("AiF", "AlF", "TB")

_EPS = 1e-16
_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete beta continued fraction
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, 10_000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def regularized_beta(x: float, a: float, b: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    # the continued fraction converges quickly only below the mean
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_upper_tail(f: float, df1: int, df2: int) -> float:
    """P(F >= f) for an F(df1, df2) variate."""
    if df1 < 1 or df2 < 1:
        raise ValueError("degrees of freedom must be >= 1")
    if f < 0 or math.isnan(f):
        raise ValueError(f"F must be non-negative, got {f}")
    if math.isinf(f):
        return 0.0
    if f == 0:
        return 1.0
    x = df2 / (df2 + df1 * f)
    return min(1.0, max(0.0, regularized_beta(x, df2 / 2.0, df1 / 2.0)))


@dataclass(frozen=True)
class GroupDescriptives:
    group_key: str
    n: int
    mean: float
    std_dev: float
    min: float
    max: float

    def to_json(self) -> dict:
        return {
            "group": self.group_key,
            "n": self.n,
            "mean": round(self.mean, 2),
            "std_dev": round(self.std_dev, 2),
            "min": self.min,
            "max": self.max,
        }


def describe(key: str, values: Sequence[float]) -> GroupDescriptives:
    """Descriptives for one group; ``std_dev`` is the population sigma."""
    if not values:
        raise ValidationError(f"group {key!r} is empty")
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / n
    # keep min <= mean <= max under rounding
    mean = min(max(mean, min(values)), max(values))
    return GroupDescriptives(key, n, mean, math.sqrt(var), min(values), max(values))


def group_descriptives(values: Mapping[str, Sequence[float]]) -> list[GroupDescriptives]:
    """Per-group rows in key order, followed by an ``overall`` row."""
    rows = [describe(str(key), values[key]) for key in sorted(values)]
    if rows:
        pooled = [v for key in sorted(values) for v in values[key]]
        rows.append(describe(OVERALL, pooled))
    return rows


@dataclass(frozen=True)
class AnovaResult:
    f_stat: float
    df_between: int
    df_within: int
    p_value: float
    eta_squared: float
    ss_between: float
    ss_within: float
    group_counts: Mapping[str, int]
    factor: Optional[str] = None
    metric: Optional[str] = None

    @property
    def ss_total(self) -> float:
        return self.ss_between + self.ss_within

    @property
    def n(self) -> int:
        return sum(self.group_counts.values())


def one_way_anova(values: Mapping[str, Sequence[float]]) -> AnovaResult:
    """Between/within sums of squares, F, its upper-tail p and eta squared.

    Raises ``ValidationError`` for fewer than two groups, no residual degrees
    of freedom, or data without any variance. Perfectly separated groups
    (zero within-group variance) give F = inf, p = 0 and eta squared = 1.
    """
    groups = {str(k): list(v) for k, v in values.items()}
    if len(groups) < 2:
        raise ValidationError("ANOVA needs at least two groups")
    for key, vals in groups.items():
        if not vals:
            raise ValidationError(f"group {key!r} is empty")
    k = len(groups)
    n = sum(len(v) for v in groups.values())
    if n <= k:
        raise ValidationError("ANOVA needs more observations than groups")
    grand = math.fsum(x for v in groups.values() for x in v) / n
    means = {key: math.fsum(v) / len(v) for key, v in groups.items()}
    ss_between = math.fsum(len(v) * (means[key] - grand) ** 2 for key, v in groups.items())
    ss_within = math.fsum((x - means[key]) ** 2 for key, v in groups.items() for x in v)
    ss_total = math.fsum((x - grand) ** 2 for v in groups.values() for x in v)
    scale = max(abs(x) for v in groups.values() for x in v)
    if ss_total <= n * (1e-14 * scale) ** 2:
        raise ValidationError("ANOVA needs variance in the data")
    # float residue of an exact zero
    if ss_within <= 1e-13 * ss_total:
        ss_within = 0.0
    if ss_between <= 1e-13 * ss_total:
        ss_between = 0.0
    df_between, df_within = k - 1, n - k
    if ss_within == 0.0:
        f_stat, p_value, eta = math.inf, 0.0, 1.0
    else:
        f_stat = (ss_between / df_between) / (ss_within / df_within)
        p_value = f_upper_tail(f_stat, df_between, df_within)
        eta = ss_between / (ss_between + ss_within)
    return AnovaResult(
        f_stat=f_stat,
        df_between=df_between,
        df_within=df_within,
        p_value=p_value,
        eta_squared=eta,
        ss_between=ss_between,
        ss_within=ss_within,
        group_counts={key: len(v) for key, v in sorted(groups.items())},
    )


def pool_small_groups(
    values: Mapping[str, Sequence[float]], min_size: int = 2
) -> dict[str, list[float]]:
    """Merge groups smaller than ``min_size`` into one pooled group."""
    out: dict[str, list[float]] = {}
    pooled: list[float] = []
    for key in sorted(values):
        vals = list(values[key])
        if len(vals) < min_size:
            pooled.extend(vals)
        else:
            out[key] = vals
    if pooled:
        out.setdefault(POOLED, []).extend(pooled)
    return out


@dataclass
class GroupAccumulator:
    """Order-independent per-group running totals; partial results merge exactly."""

    groups: dict[str, list[int]] = field(default_factory=dict)

    def add(self, key: str, value: int) -> None:
        self.groups.setdefault(key, []).append(value)

    def merge(self, other: "GroupAccumulator") -> "GroupAccumulator":
        out = GroupAccumulator({k: sorted(v) for k, v in self.groups.items()})
        for key, vals in other.groups.items():
            out.groups.setdefault(key, []).extend(vals)
            out.groups[key].sort()
        return out

    def values(self) -> dict[str, list[int]]:
        return {k: sorted(v) for k, v in sorted(self.groups.items())}
