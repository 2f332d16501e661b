"""Core survival data model: subject records, risk/counting indicators, event grids.

Times are plain 64-bit floats and are compared exactly; ingestion controls
rounding, and no epsilon merging is ever applied to the event grid.
"""

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

SubjectId = int | str


@dataclass(frozen=True)
class SubjectRecord:
    """One individual's covariates, arm assignment, observed time, and event flag.

    ``observed_time`` is the earlier of the event time and the censoring time;
    ``event`` is True when the event itself (not censoring) was observed.
    Covariates are a flat vector; callers that split it into a continuous
    block followed by a binary block declare the split where it matters (the
    coarsening scheme), not here.
    """

    id: SubjectId
    covariates: tuple[float, ...]
    arm: int
    observed_time: float
    event: bool

    def __post_init__(self):
        if self.arm not in (0, 1):
            raise ValueError(f"arm must be 0 or 1, got {self.arm!r}")
        if not (math.isfinite(self.observed_time) and self.observed_time >= 0.0):
            raise ValueError(
                f"observed_time must be finite and nonnegative, got {self.observed_time!r}"
            )


@dataclass(frozen=True)
class Cohort:
    """A collection of subjects observed on the window [0, horizon]."""

    subjects: tuple[SubjectRecord, ...]
    horizon: float

    def __post_init__(self):
        object.__setattr__(self, "subjects", tuple(self.subjects))
        if not self.subjects:
            raise ValueError("cohort must contain at least one subject")
        if not (math.isfinite(self.horizon) and self.horizon > 0.0):
            raise ValueError(f"horizon must be finite and positive, got {self.horizon!r}")
        ids = [s.id for s in self.subjects]
        if len(set(ids)) != len(ids):
            raise ValueError("subject ids must be unique")

    @cached_property
    def by_id(self) -> dict[SubjectId, SubjectRecord]:
        return {s.id: s for s in self.subjects}

    @cached_property
    def covariate_matrix(self) -> np.ndarray:
        """Subjects-by-dimensions float matrix, in subject order."""
        d = len(self.subjects[0].covariates)
        if any(len(s.covariates) != d for s in self.subjects):
            raise ValueError("all subjects must share one covariate dimension")
        return np.array([s.covariates for s in self.subjects], dtype=float)

    def arm_count(self, arm: int) -> int:
        return sum(1 for s in self.subjects if s.arm == arm)


@dataclass(frozen=True)
class EventGrid:
    """Distinct observed event times in (0, horizon], ascending, with the
    (subject id, arm) pairs of the events occurring at each time."""

    times: tuple[float, ...]
    events: tuple[tuple[tuple[SubjectId, int], ...], ...]

    def __post_init__(self):
        if len(self.times) != len(self.events):
            raise ValueError("times and event groups must align")
        if any(t2 <= t1 for t1, t2 in zip(self.times, self.times[1:])):
            raise ValueError("grid times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)


def at_risk(subject: SubjectRecord, t: float) -> int:
    """At-risk indicator at time t: 1 iff observed_time >= t.

    Left-continuous convention: a subject whose observed time equals t is
    still at risk at t.
    """
    return 1 if subject.observed_time >= t else 0


def counting(subject: SubjectRecord, t: float) -> int:
    """Counting-process value at t: 1 iff the event occurred at or before t."""
    return 1 if (subject.event and subject.observed_time <= t) else 0


def build_event_grid(cohort: Cohort) -> EventGrid:
    """Collect the distinct event times in (0, horizon] with their events.

    Tied events at one time are grouped into a single grid step; the order of
    events within a step follows the subject order of the cohort and carries
    no meaning (all per-step quantities are sums).
    """
    groups: dict[float, list[tuple[SubjectId, int]]] = {}
    for s in cohort.subjects:
        if s.event and 0.0 < s.observed_time <= cohort.horizon:
            groups.setdefault(s.observed_time, []).append((s.id, s.arm))
    times = sorted(groups)
    return EventGrid(
        times=tuple(times),
        events=tuple(tuple(groups[t]) for t in times),
    )
