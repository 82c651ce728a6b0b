"""Sample-based and event-based scoring of hypothesis annotations against a reference.

All interval geometry is half-open, ``[start, end)``. Times are resolved to
whole microseconds before any comparison so that boundary decisions (touching
intervals, exactly-half-covered label windows) are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .annotations import EventList, seizure_intervals

TICKS_PER_SECOND = 1_000_000
SECONDS_PER_DAY = 86_400
LABEL_RATE = 1  # Hz


def to_ticks(seconds: float) -> int:
    return int(round(seconds * TICKS_PER_SECOND))


def from_ticks(ticks: int) -> float:
    return ticks / TICKS_PER_SECOND


@dataclass(frozen=True, order=True)
class Interval:
    start: float
    end: float

    def __post_init__(self):
        if not self.end > self.start:
            raise ValueError(f"empty interval [{self.start}, {self.end})")

    @property
    def length(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class ScoringParams:
    """Event-scoring rules; all values in seconds.

    ``merge_gap`` defaults to the sum of the two tolerances. ``min_overlap``
    of 0 means any positive overlap counts.
    """

    pre_ictal_tolerance: float = 30.0
    post_ictal_tolerance: float = 60.0
    merge_gap: float | None = None
    max_event_duration: float = 300.0
    min_overlap: float = 0.0

    def __post_init__(self):
        if self.merge_gap is None:
            object.__setattr__(self, "merge_gap", self.pre_ictal_tolerance + self.post_ictal_tolerance)
        for name in ("pre_ictal_tolerance", "post_ictal_tolerance", "merge_gap", "min_overlap"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.max_event_duration > 0:
            raise ValueError("max_event_duration must be positive")

    def as_dict(self) -> dict:
        return {
            "preIctalTolerance": self.pre_ictal_tolerance,
            "postIctalTolerance": self.post_ictal_tolerance,
            "mergeGap": self.merge_gap,
            "maxEventDuration": self.max_event_duration,
            "minOverlap": self.min_overlap,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ScoringParams:
        return cls(
            pre_ictal_tolerance=d.get("preIctalTolerance", 30.0),
            post_ictal_tolerance=d.get("postIctalTolerance", 60.0),
            merge_gap=d.get("mergeGap"),
            max_event_duration=d.get("maxEventDuration", 300.0),
            min_overlap=d.get("minOverlap", 0.0),
        )


SAMPLE = "sample"
EVENT = "event"


@dataclass(frozen=True)
class ScoreCounts:
    tp: int
    fp: int
    ref_true: int
    total_duration: float
    kind: str | None = None

    def __post_init__(self):
        if min(self.tp, self.fp, self.ref_true) < 0:
            raise ValueError("counts must be non-negative")
        if self.tp > self.ref_true:
            raise ValueError(f"tp={self.tp} exceeds reference positives {self.ref_true}")

    @property
    def fn(self) -> int:
        return self.ref_true - self.tp

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "refTrue": self.ref_true,
            "totalDuration": self.total_duration,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ScoreCounts:
        return cls(d["tp"], d["fp"], d["refTrue"], d["totalDuration"], d.get("kind"))


@dataclass(frozen=True)
class Metrics:
    """Derived rates; ``None`` marks an undefined value."""

    sensitivity: float | None
    precision: float | None
    f1: float | None
    fp_per_day: float

    def as_dict(self) -> dict:
        return {
            "sensitivity": self.sensitivity,
            "precision": self.precision,
            "f1": self.f1,
            "fpPerDay": self.fp_per_day,
        }


@dataclass(frozen=True)
class LabelMask:
    labels: np.ndarray
    recording_duration: float

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=bool)
        if labels.shape != (math.ceil(self.recording_duration),):
            raise ValueError("label count must equal ceil(recording duration)")
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.labels.size


# ---------------------------------------------------------------------------
# interval helpers on integer ticks


def _union(ticks: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    out: list[list[int]] = []
    # touching intervals cover a contiguous stretch and are joined as well
    for s, e in sorted(ticks):
        if out and s <= out[-1][1]:
            out[-1][1] = max(out[-1][1], e)
        else:
            out.append([s, e])
    return [(s, e) for s, e in out]


def _merge_gaps(ticks: list[tuple[int, int]], gap: int) -> list[tuple[int, int]]:
    out: list[list[int]] = []
    for s, e in ticks:
        if out and s - out[-1][1] < gap:
            out[-1][1] = max(out[-1][1], e)
        else:
            out.append([s, e])
    return [(s, e) for s, e in out]


def _split(ticks: list[tuple[int, int]], max_len: int) -> list[tuple[int, int]]:
    out = []
    for s, e in ticks:
        while e - s > max_len:
            out.append((s, s + max_len))
            s += max_len
        out.append((s, e))
    return out


def _preprocess_ticks(ticks: Iterable[tuple[int, int]], params: ScoringParams) -> list[tuple[int, int]]:
    merged = _merge_gaps(_union(t for t in ticks if t[1] > t[0]), to_ticks(params.merge_gap))
    return _split(merged, to_ticks(params.max_event_duration))


def preprocess_events(intervals: Sequence[Interval], params: ScoringParams = ScoringParams()) -> list[Interval]:
    """Union overlapping intervals, merge close neighbours, then split long events.

    Merging happens first so that it cannot undo splits: neighbours closer than
    ``params.merge_gap`` are joined, then anything longer than
    ``params.max_event_duration`` is cut into consecutive full-length chunks
    followed by the remainder.
    """
    ticks = [(to_ticks(iv.start), to_ticks(iv.end)) for iv in intervals]
    return [Interval(from_ticks(s), from_ticks(e)) for s, e in _preprocess_ticks(ticks, params)]


# ---------------------------------------------------------------------------
# sample-based scoring


def intervals_to_mask(intervals: Iterable[tuple[float, float]], recording_duration: float) -> LabelMask:
    n = math.ceil(recording_duration)
    window = TICKS_PER_SECOND // LABEL_RATE
    overlap = np.zeros(n, dtype=np.int64)
    for s, e in _union((to_ticks(a), to_ticks(b)) for a, b in intervals):
        e = min(e, n * window)
        if e <= s:
            continue
        first, last = s // window, (e - 1) // window
        if first == last:
            overlap[first] += e - s
            continue
        overlap[first] += (first + 1) * window - s
        overlap[first + 1 : last] += window
        overlap[last] += e - last * window
    # strictly more than half the window
    return LabelMask(2 * overlap > window, recording_duration)


def events_to_mask(events: EventList) -> LabelMask:
    """Per-second seizure labels: a window is positive when seizures cover more than half of it."""
    return intervals_to_mask(seizure_intervals(events), events.recording_duration)


def score_samples(ref: LabelMask, hyp: LabelMask) -> ScoreCounts:
    if len(ref) != len(hyp):
        raise ValueError(f"mask lengths differ: {len(ref)} vs {len(hyp)}")
    r, h = ref.labels, hyp.labels
    return ScoreCounts(
        tp=int(np.sum(r & h)),
        fp=int(np.sum(~r & h)),
        ref_true=int(np.sum(r)),
        total_duration=float(len(r)) / LABEL_RATE,
        kind=SAMPLE,
    )


# ---------------------------------------------------------------------------
# event-based scoring


def _overlap(a: tuple[int, int], b: tuple[int, int]) -> int:
    return min(a[1], b[1]) - max(a[0], b[0])


def score_intervals(
    ref: Iterable[tuple[float, float]],
    hyp: Iterable[tuple[float, float]],
    recording_duration: float,
    params: ScoringParams = ScoringParams(),
) -> ScoreCounts:
    """Event counts for raw ``(start, end)`` second pairs of one recording."""
    ref_t = _preprocess_ticks(((to_ticks(s), to_ticks(e)) for s, e in ref), params)
    hyp_t = _preprocess_ticks(((to_ticks(s), to_ticks(e)) for s, e in hyp), params)
    end = to_ticks(recording_duration)
    pre, post = to_ticks(params.pre_ictal_tolerance), to_ticks(params.post_ictal_tolerance)
    extended = [(max(0, s - pre), min(end, e + post)) for s, e in ref_t]
    need = max(1, to_ticks(params.min_overlap))

    hit_hyp = [False] * len(hyp_t)
    tp = 0
    for ext in extended:
        detected = False
        for j, h in enumerate(hyp_t):
            if _overlap(ext, h) >= need:
                detected = True
                hit_hyp[j] = True
        tp += detected
    return ScoreCounts(
        tp=tp,
        fp=hit_hyp.count(False),
        ref_true=len(ref_t),
        total_duration=float(recording_duration),
        kind=EVENT,
    )


def score_events(ref: EventList, hyp: EventList, params: ScoringParams = ScoringParams()) -> ScoreCounts:
    """Any-overlap event scoring with tolerances, merging and splitting.

    A preprocessed reference event is detected when some preprocessed
    hypothesis event overlaps it once it has been widened by the pre- and
    post-ictal tolerances (clipped to the recording). Hypothesis events that
    overlap no widened reference are false positives. Confidence values are
    ignored.
    """
    if ref.recording_duration != hyp.recording_duration:
        raise ValueError(
            f"recording durations differ: {ref.recording_duration} vs {hyp.recording_duration}"
        )
    return score_intervals(
        seizure_intervals(ref), seizure_intervals(hyp), ref.recording_duration, params
    )


def score_run(
    ref: EventList, hyp: EventList, params: ScoringParams = ScoringParams()
) -> tuple[ScoreCounts, ScoreCounts]:
    """Sample counts and event counts for one recording."""
    if ref.recording_duration != hyp.recording_duration:
        raise ValueError(
            f"recording durations differ: {ref.recording_duration} vs {hyp.recording_duration}"
        )
    samples = score_samples(events_to_mask(ref), events_to_mask(hyp))
    return samples, score_events(ref, hyp, params)


def aggregate_counts(per_run: Iterable[ScoreCounts]) -> ScoreCounts:
    per_run = list(per_run)
    kinds = {c.kind for c in per_run}
    if len(kinds) > 1:
        raise ValueError(f"cannot aggregate mixed count kinds {sorted(map(str, kinds))}")
    return ScoreCounts(
        tp=sum(c.tp for c in per_run),
        fp=sum(c.fp for c in per_run),
        ref_true=sum(c.ref_true for c in per_run),
        total_duration=float(sum(c.total_duration for c in per_run)),
        kind=kinds.pop() if kinds else None,
    )


def compute_metrics(counts: ScoreCounts) -> Metrics:
    if not counts.total_duration > 0:
        raise ValueError("total duration must be positive to compute rates")
    sensitivity = counts.tp / counts.ref_true if counts.ref_true else None
    detections = counts.tp + counts.fp
    precision = counts.tp / detections if detections else None
    if sensitivity is None or precision is None:
        f1 = None
    elif sensitivity + precision == 0:
        f1 = 0.0
    else:
        f1 = 2 * sensitivity * precision / (sensitivity + precision)
    return Metrics(
        sensitivity=sensitivity,
        precision=precision,
        f1=f1,
        fp_per_day=counts.fp * SECONDS_PER_DAY / counts.total_duration,
    )
