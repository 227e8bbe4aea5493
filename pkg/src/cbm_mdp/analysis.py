"""Decision histograms over solved policies and the trend summary built from them."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from .mdp import Policy


@dataclass
class DecisionHistogram:
    bins: dict[str, int]

    @property
    def total(self) -> int:
        return sum(self.bins.values())


def vector_label(vector: Sequence[int]) -> str:
    return ",".join(str(int(x)) for x in vector)


def parse_label(label: str) -> tuple[int, ...]:
    return tuple(int(x) for x in label.split(","))


def vector_labeler(decisions: Sequence[Sequence[int]]) -> Callable[[int], str]:
    """Label decision ids by their comma-joined vector, e.g. ``"3,1"``."""
    labels = [vector_label(d) for d in decisions]
    return lambda decision_id: labels[decision_id]


def policy_histogram(policy: Policy, labeler: Callable[[int], str]) -> DecisionHistogram:
    counts = Counter(int(d) for d in policy.decision)
    bins: Counter[str] = Counter()
    for d, c in counts.items():
        bins[labeler(d)] += c
    return DecisionHistogram(dict(bins))


@dataclass(frozen=True)
class TrendReport:
    major: int
    minor: int
    other_maintenance: int
    no_maintenance: int
    all_assigned: int
    partially_assigned: int
    none_assigned: int
    task_frequency: dict[int, int]

    @property
    def major_at_least_minor(self) -> bool:
        return self.major >= self.minor

    @property
    def all_assigned_dominates(self) -> bool:
        return self.all_assigned > self.partially_assigned

    @property
    def highest_task_at_least_first(self) -> bool:
        tasks = sorted(self.task_frequency)
        if not tasks:
            return True
        return self.task_frequency[tasks[-1]] >= self.task_frequency[tasks[0]]

    def text(self) -> str:
        def verdict(ok: bool) -> str:
            return "PASS" if ok else "FAIL"

        tasks = sorted(self.task_frequency)
        lines = [
            "maintenance policy:",
            f"  major (some machine at intensity 3):  {self.major}",
            f"  minor (every intensity at most 1):    {self.minor}",
            f"    of which no maintenance at all:     {self.no_maintenance}",
            f"  other (highest intensity exactly 2):  {self.other_maintenance}",
            f"  [{verdict(self.major_at_least_minor)}] major >= minor",
            "assignment policy:",
            f"  all machines assigned:  {self.all_assigned}",
            f"  partially assigned:     {self.partially_assigned}",
            f"  no machine assigned:    {self.none_assigned}",
            f"  [{verdict(self.all_assigned_dominates)}] all assigned > partially assigned",
        ]
        if tasks:
            lines += [
                "  task frequency: " + ", ".join(f"task {t}: {self.task_frequency[t]}" for t in tasks),
                f"  [{verdict(self.highest_task_at_least_first)}] task {tasks[-1]} >= task {tasks[0]}",
            ]
        return "\n".join(lines) + "\n"


def trend_report(maintenance: DecisionHistogram, assignment: DecisionHistogram, num_tasks: int) -> TrendReport:
    """Summarize both histograms; depends on nothing but their labels and counts."""
    major = minor = other = idle = 0
    for label, count in maintenance.bins.items():
        d = parse_label(label)
        if max(d) >= 3:
            major += count
        elif max(d) == 2:
            other += count
        else:
            minor += count
            idle += count if max(d) == 0 else 0

    full = partial = none = 0
    freq = {t: 0 for t in range(1, num_tasks + 1)}
    for label, count in assignment.bins.items():
        a = parse_label(label)
        busy = [x for x in a if x]
        if len(busy) == len(a):
            full += count
        elif busy:
            partial += count
        else:
            none += count
        for t in busy:
            freq[t] += count
    return TrendReport(major, minor, other, idle, full, partial, none, freq)


def export_histogram_csv(histogram: DecisionHistogram, destination: str | Path) -> None:
    with open(destination, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["decision_label", "count"])
        for label in sorted(histogram.bins):
            w.writerow([label, histogram.bins[label]])


def read_histogram_csv(source: str | Path) -> DecisionHistogram:
    with open(source, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["decision_label", "count"]:
            raise ValueError(f"{source}: expected decision_label,count")
        return DecisionHistogram({row["decision_label"]: int(row["count"]) for row in reader})
