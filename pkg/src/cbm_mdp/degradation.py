"""Tool-wear ingestion and per-epoch health-degradation probabilities.

Wear curves are reduced to Euler wear rates, split by tool age (levels up to
``NEW_TOOL_MAX_LEVEL`` count as a new tool), averaged per operating
condition, and converted into the probability of dropping one health level
during a decision epoch.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean
from typing import Iterable, Mapping, Sequence, TextIO

NEW_TOOL_MAX_LEVEL = 3
AGE_CLASSES = ("new", "old")
WEAR_COLUMNS = ("case", "time_min", "wear_mm", "op_condition")


class WearDataError(ValueError):
    """Malformed or insufficient wear data."""


class SuspiciousWearWarning(UserWarning):
    pass


class ClampedProbabilityWarning(UserWarning):
    pass


class OutOfModelWarning(UserWarning):
    pass


@dataclass(frozen=True)
class WearRecord:
    case_id: str
    time: float
    wear: float
    op_condition: int


@dataclass(frozen=True)
class HealthMap:
    """Ascending degradation percentages at which the health code increments.

    With ``thresholds = (7, 14, 24, 34, 44)`` code 1 covers [0, 7), code 2
    [7, 14), ..., code 5 [34, 44) and the failure code 6 everything from 44 on.
    """

    thresholds: tuple[float, ...] = (7.0, 14.0, 24.0, 34.0, 44.0)

    def __post_init__(self):
        t = self.thresholds
        if not t or t[0] <= 0 or any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError(f"thresholds must be positive and strictly ascending: {t}")

    @property
    def levels(self) -> int:
        return len(self.thresholds)

    @property
    def failure_code(self) -> int:
        return len(self.thresholds) + 1

    def level_width(self, level: int) -> float:
        """Width in percent of working level ``level`` (1-based)."""
        lower = 0.0 if level == 1 else self.thresholds[level - 2]
        return self.thresholds[level - 1] - lower


@dataclass(frozen=True)
class TaylorLifeParams:
    C: float
    exponent: float

    def __post_init__(self):
        if self.C <= 0 or self.exponent <= 0:
            raise ValueError("Taylor constants must be positive")


@dataclass
class DegradationTable:
    """One-step degradation probability per (operating condition, age class)."""

    prob: dict[tuple[int, str], float]
    rates: dict[tuple[int, str], float] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for key, p in self.prob.items():
            if key[1] not in AGE_CLASSES:
                raise ValueError(f"unknown age class {key[1]!r}")
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability {p} for {key} outside [0, 1]")

    @property
    def conditions(self) -> list[int]:
        return sorted({e for e, _ in self.prob})

    def missing(self, num_conditions: int) -> list[tuple[int, str]]:
        return [
            (e, a) for e in range(1, num_conditions + 1) for a in AGE_CLASSES if (e, a) not in self.prob
        ]

    def lookup(self, op_condition: int, health: int, new_tool_max_level: int = NEW_TOOL_MAX_LEVEL) -> float:
        key = (op_condition, age_class(health, new_tool_max_level))
        try:
            return self.prob[key]
        except KeyError:
            raise KeyError(f"no degradation probability for condition {key[0]}, {key[1]} tool") from None

    @classmethod
    def from_columns(cls, new: Sequence[float], old: Sequence[float]) -> "DegradationTable":
        prob = {(i + 1, "new"): float(p) for i, p in enumerate(new)}
        prob.update({(i + 1, "old"): float(p) for i, p in enumerate(old)})
        return cls(prob)


DEFAULT_DEGRADATION = DegradationTable.from_columns(new=(0.1, 0.2, 0.3, 0.4), old=(0.2, 0.3, 0.4, 0.5))


def age_class(health: int, new_tool_max_level: int = NEW_TOOL_MAX_LEVEL) -> str:
    return "new" if health <= new_tool_max_level else "old"


def parse_wear_csv(source: str | Path | TextIO) -> list[WearRecord]:
    """Read ``case,time_min,wear_mm,op_condition`` rows.

    All malformed rows are collected and reported together, by line number.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            text = fh.read()
    else:
        text = source.read()
    if not text.strip():
        raise WearDataError("empty wear file")
    reader = csv.DictReader(io.StringIO(text))
    missing = [c for c in WEAR_COLUMNS if c not in (reader.fieldnames or [])]
    if missing:
        raise WearDataError(f"missing columns: {', '.join(missing)}")
    records, problems = [], []
    for row in reader:
        line = reader.line_num
        try:
            time, wear = float(row["time_min"]), float(row["wear_mm"])
            cond = int(row["op_condition"])
        except (TypeError, ValueError):
            problems.append(f"line {line}: non-numeric field in {dict(row)}")
            continue
        if not (math.isfinite(time) and math.isfinite(wear)):
            problems.append(f"line {line}: non-finite value")
            continue
        if time < 0 or wear < 0:
            problems.append(f"line {line}: negative time or wear")
            continue
        if cond < 1:
            problems.append(f"line {line}: op_condition must be >= 1")
            continue
        records.append(WearRecord(row["case"].strip(), time, wear, cond))
    if problems:
        raise WearDataError("; ".join(problems))
    if not records:
        raise WearDataError("wear file has a header but no rows")
    return records


def group_cases(records: Iterable[WearRecord]) -> dict[str, list[WearRecord]]:
    cases: dict[str, list[WearRecord]] = defaultdict(list)
    for r in records:
        cases[r.case_id].append(r)
    return dict(cases)


def check_wear_records(records: Iterable[WearRecord]) -> list[str]:
    """Report (never repair) ordering, monotonicity and condition-mixing issues per case."""
    issues = []
    for case, recs in group_cases(records).items():
        if len({r.op_condition for r in recs}) > 1:
            issues.append(f"case {case}: mixes operating conditions")
        for a, b in zip(recs, recs[1:]):
            if b.time < a.time:
                issues.append(f"case {case}: time decreases at t={b.time}")
            elif b.wear < a.wear:
                issues.append(f"case {case}: wear decreases at t={b.time}")
    return issues


def wear_rate(records: Sequence[WearRecord]) -> float:
    """Euler wear rate (mm/min) between the first and last records."""
    if len(records) < 2:
        raise WearDataError("wear rate needs at least two records")
    first, last = records[0], records[-1]
    span = last.time - first.time
    if span <= 0:
        raise WearDataError(f"non-positive time span {span} in case {first.case_id}")
    rate = (last.wear - first.wear) / span
    if rate < 0:
        warnings.warn(f"negative net wear rate {rate} in case {first.case_id}", SuspiciousWearWarning)
    return rate


def rate_to_epoch_probability(rate: float, epoch_seconds: float, wear_per_level: float) -> float:
    """Share of one health level consumed per epoch, clamped to 1."""
    if wear_per_level <= 0:
        raise ValueError("wear_per_level must be positive")
    if epoch_seconds <= 0:
        raise ValueError("epoch_seconds must be positive")
    p = rate * epoch_seconds / 60.0 / wear_per_level
    if p > 1.0:
        warnings.warn(f"degradation probability {p:.4g} clamped to 1", ClampedProbabilityWarning)
        return 1.0
    return max(p, 0.0)


def wear_to_lambda(percent: float, healthmap: HealthMap) -> int:
    if percent < 0:
        raise ValueError("degradation percent must be nonnegative")
    return 1 + sum(1 for t in healthmap.thresholds if percent >= t)


def exogenous_lambda(usage_fraction: float, healthmap: HealthMap) -> int:
    """Health code for a tool that has consumed ``usage_fraction`` of its life."""
    if not 0.0 <= usage_fraction <= 1.0:
        raise ValueError("usage fraction must lie in [0, 1]")
    return wear_to_lambda(usage_fraction * 100.0, healthmap)


def taylor_life(cutting_speed: float, params: TaylorLifeParams) -> float:
    """Tool life from V * life**n = C."""
    if cutting_speed <= 0:
        raise ValueError("cutting speed must be positive")
    life = (params.C / cutting_speed) ** (1.0 / params.exponent)
    if not 0.0 < life <= 1.0:
        warnings.warn(f"tool life {life:.4g} outside (0, 1]", OutOfModelWarning)
    return life


def _segment_rates(
    cases: Mapping[str, list[WearRecord]],
    healthmap: HealthMap,
    full_wear_mm: float,
    new_tool_max_level: int,
) -> dict[tuple[int, str], list[float]]:
    rates: dict[tuple[int, str], list[float]] = defaultdict(list)
    for recs in cases.values():
        cond = recs[0].op_condition
        split = {"new": [], "old": []}
        for r in recs:
            level = wear_to_lambda(100.0 * r.wear / full_wear_mm, healthmap)
            split[age_class(level, new_tool_max_level)].append(r)
        for cls, seg in split.items():
            if len(seg) >= 2:
                rates[(cond, cls)].append(wear_rate(seg))
    return rates


def build_degradation_table(
    records: Sequence[WearRecord],
    healthmap: HealthMap,
    epoch_seconds: float,
    rounding: int | None = 1,
    full_wear_mm: float = 1.0,
    conditions: Iterable[int] | None = None,
    new_tool_max_level: int = NEW_TOOL_MAX_LEVEL,
) -> DegradationTable:
    """Degradation table from wear curves.

    Each case is split at the new/old tool boundary, an Euler rate is taken on
    each side, and rates are averaged per (condition, age class). New-tool rates
    are scaled by the width of health level 1, old-tool rates by the width of
    the first old level. ``conditions`` lists the operating conditions that must
    be covered; by default whatever the records contain.
    """
    if full_wear_mm <= 0:
        raise ValueError("full_wear_mm must be positive")
    rates = _segment_rates(group_cases(records), healthmap, full_wear_mm, new_tool_max_level)
    wanted = sorted(set(conditions)) if conditions is not None else sorted({r.op_condition for r in records})
    missing = [f"{e}/{a}" for e in wanted for a in AGE_CLASSES if not rates.get((e, a))]
    if missing:
        raise WearDataError(f"no usable wear cases for operating condition(s): {', '.join(missing)}")

    width_mm = {
        "new": healthmap.level_width(1) / 100.0 * full_wear_mm,
        "old": healthmap.level_width(new_tool_max_level + 1) / 100.0 * full_wear_mm,
    }
    prob, mean_rates = {}, {}
    for e in wanted:
        for cls in AGE_CLASSES:
            mean_rates[(e, cls)] = fmean(rates[(e, cls)])
            p = rate_to_epoch_probability(mean_rates[(e, cls)], epoch_seconds, width_mm[cls])
            prob[(e, cls)] = round(p, rounding) if rounding is not None else p
    return DegradationTable(prob, mean_rates)


def write_table_csv(table: DegradationTable, dest: str | Path | TextIO) -> None:
    rows = sorted(table.prob.items(), key=lambda kv: (AGE_CLASSES.index(kv[0][1]), kv[0][0]))

    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["op_condition", "age_class", "probability"])
        for (e, cls), p in rows:
            w.writerow([e, cls, repr(p)])

    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            emit(fh)
    else:
        emit(dest)


def read_table_csv(source: str | Path) -> DegradationTable:
    with open(source, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["op_condition", "age_class", "probability"]:
            raise WearDataError(f"{source}: expected op_condition,age_class,probability")
        return DegradationTable({(int(r["op_condition"]), r["age_class"]): float(r["probability"]) for r in reader})
