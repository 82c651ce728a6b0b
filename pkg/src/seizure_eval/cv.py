"""Cross-validation fold planning for personalized and subject-independent models."""

from __future__ import annotations

import hashlib
import json
import logging
import random
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta
from typing import Iterable, Mapping, Sequence

log = logging.getLogger(__name__)

PERSONALIZED = "personalized"
SUBJECT_INDEPENDENT = "subjectIndependent"
HOUR = 3600.0
# seconds of slack when comparing region boundaries
TIME_EPS = 1e-6
MIN_SEIZURES_PERSONALIZED = 3
MIN_HOURS_PERSONALIZED = 1.5
LONG_SPAN = timedelta(days=7)


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class TimelineSegment:
    """One recording of a subject placed on the wall clock.

    ``seizure_onsets`` are offsets in seconds from the segment start. When they
    are unknown, only ``seizure_count`` is given and each seizure is assumed to
    be available for training only once the whole segment is.
    """

    subject: str
    run: str
    start: datetime
    duration: float
    seizure_count: int = 0
    seizure_onsets: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"segment {self.run} has non-positive duration")
        if self.seizure_onsets is not None:
            onsets = tuple(sorted(self.seizure_onsets))
            object.__setattr__(self, "seizure_onsets", onsets)
            object.__setattr__(self, "seizure_count", len(onsets))

    @property
    def end(self) -> datetime:
        return self.start + timedelta(seconds=self.duration)


@dataclass(frozen=True)
class Region:
    """A stretch of data. ``run`` of None means all data of the subject."""

    subject: str
    run: str | None = None
    start: datetime | None = None
    offset: float | None = None
    length: float | None = None

    @property
    def whole_subject(self) -> bool:
        return self.run is None

    @property
    def abs_start(self) -> datetime:
        return self.start + timedelta(seconds=self.offset)

    @property
    def abs_end(self) -> datetime:
        return self.start + timedelta(seconds=self.offset + self.length)


@dataclass(frozen=True)
class Fold:
    train: tuple[Region, ...]
    test: tuple[Region, ...]

    @property
    def train_subjects(self) -> set[str]:
        return {r.subject for r in self.train}

    @property
    def test_subjects(self) -> set[str]:
        return {r.subject for r in self.test}


@dataclass(frozen=True)
class FoldPlan:
    scheme: str
    kind: str
    folds: tuple[Fold, ...]
    params: dict = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    def to_json(self) -> str:
        def region(r: Region) -> dict:
            d = asdict(r)
            d["start"] = r.start.isoformat() if r.start else None
            return d

        doc = {
            "scheme": self.scheme,
            "kind": self.kind,
            "params": self.params,
            "warnings": list(self.warnings),
            "folds": [
                {
                    "fold": i,
                    "train": [region(r) for r in f.train],
                    "test": [region(r) for r in f.test],
                }
                for i, f in enumerate(self.folds)
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> FoldPlan:
        doc = json.loads(text)

        def region(d: dict) -> Region:
            start = datetime.fromisoformat(d["start"]) if d["start"] else None
            return Region(d["subject"], d["run"], start, d["offset"], d["length"])

        folds = tuple(
            Fold(tuple(map(region, f["train"])), tuple(map(region, f["test"])))
            for f in sorted(doc["folds"], key=lambda f: f["fold"])
        )
        return cls(doc["scheme"], doc["kind"], folds, doc["params"], tuple(doc["warnings"]))

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


# ---------------------------------------------------------------------------
# personalized: time-series cross-validation


def personalized_exclusion_reason(timeline: Sequence[TimelineSegment]) -> str | None:
    """Why a subject cannot get a personalized plan, or None when it can."""
    seizures = sum(s.seizure_count for s in timeline)
    hours = sum(s.duration for s in timeline) / HOUR
    if seizures < MIN_SEIZURES_PERSONALIZED:
        return f"{seizures} seizures (< {MIN_SEIZURES_PERSONALIZED})"
    if hours < MIN_HOURS_PERSONALIZED:
        return f"{hours:.2f} h of data (< {MIN_HOURS_PERSONALIZED} h)"
    return None


def _clip(segments, offsets, lo: float, hi: float) -> tuple[Region, ...]:
    out = []
    for seg, off in zip(segments, offsets):
        a, b = max(lo, off), min(hi, off + seg.duration)
        if b - a > TIME_EPS:
            out.append(Region(seg.subject, seg.run, seg.start, a - off, b - a))
    return tuple(out)


def plan_tscv(
    timeline: Sequence[TimelineSegment],
    mode: str = "variable",
    initial_train_hours: float = 5.0,
    min_initial_seizures: int = 1,
    step_hours: float = 1.0,
) -> FoldPlan:
    """Chronological folds for one subject.

    Time is wall-clock from the first sample; gaps between recordings count as
    elapsed time. The first training window covers ``initial_train_hours`` and
    grows by whole steps until it contains ``min_initial_seizures`` seizures.
    Each fold tests on the next ``step_hours`` (the last one may be shorter).
    In ``variable`` mode training covers everything before the test window; in
    ``fixed`` mode it is a sliding window as long as the first one.
    """
    if mode not in ("variable", "fixed"):
        raise ValueError(f"unknown TSCV mode {mode!r}")
    if not timeline:
        raise PlanError("empty timeline")
    subjects = {s.subject for s in timeline}
    if len(subjects) != 1:
        raise PlanError(f"timeline mixes subjects {sorted(subjects)}")
    subject = subjects.pop()
    segments = sorted(timeline, key=lambda s: (s.start, s.run))
    t0 = segments[0].start
    offsets = [(s.start - t0).total_seconds() for s in segments]
    end = max(off + s.duration for s, off in zip(segments, offsets))

    onset_times, whole_times = [], []
    for seg, off in zip(segments, offsets):
        if seg.seizure_onsets is not None:
            onset_times.extend(off + o for o in seg.seizure_onsets)
        else:
            whole_times.extend([off + seg.duration] * seg.seizure_count)
    if not onset_times and not whole_times:
        raise PlanError(f"subject {subject} has no seizures; a personalized model cannot be trained")

    def seizures_before(t: float) -> int:
        return sum(x < t for x in onset_times) + sum(x <= t for x in whole_times)

    step = step_hours * HOUR
    train_end = initial_train_hours * HOUR
    while seizures_before(train_end) < min_initial_seizures:
        if train_end >= end:
            raise PlanError(
                f"subject {subject}: fewer than {min_initial_seizures} seizures in the recording"
            )
        train_end += step
    if train_end >= end:
        raise PlanError(
            f"subject {subject}: {end / HOUR:.2f} h recorded, not enough for "
            f"{train_end / HOUR:.2f} h of training plus a test window"
        )

    window = train_end
    warnings = []
    if timedelta(seconds=window) > LONG_SPAN:
        warnings.append(f"subject {subject}: initial training window spans {window / HOUR:.1f} h")
    folds = []
    k = 0
    while train_end + k * step < end:
        test_lo = train_end + k * step
        test_hi = min(test_lo + step, end)
        train_lo = 0.0 if mode == "variable" else test_lo - window
        train = _clip(segments, offsets, train_lo, test_lo)
        test = _clip(segments, offsets, test_lo, test_hi)
        k += 1
        if not test or not train:
            log.debug("subject %s: skipping window [%s, %s) without data", subject, test_lo, test_hi)
            continue
        folds.append(Fold(train, test))

    params = {
        "mode": mode,
        "initialTrainHours": initial_train_hours,
        "minInitialSeizures": min_initial_seizures,
        "stepHours": step_hours,
        "subject": subject,
        "firstTrainEndSeconds": train_end,
    }
    return FoldPlan(f"tscv-{mode}", PERSONALIZED, tuple(folds), params, tuple(warnings))


# ---------------------------------------------------------------------------
# subject-independent


def _subject_fold(test: Iterable[str], everyone: Sequence[str]) -> Fold:
    test = sorted(set(test))
    return Fold(
        train=tuple(Region(s) for s in everyone if s not in test),
        test=tuple(Region(s) for s in test),
    )


def _unique(subjects: Iterable[str]) -> list[str]:
    subjects = list(subjects)
    if len(set(subjects)) != len(subjects):
        raise PlanError("duplicate subject ids")
    return sorted(subjects)


def plan_loo(subjects: Iterable[str]) -> FoldPlan:
    everyone = _unique(subjects)
    if len(everyone) < 2:
        raise PlanError("leave-one-subject-out needs at least 2 subjects")
    folds = tuple(_subject_fold([s], everyone) for s in everyone)
    return FoldPlan("loo", SUBJECT_INDEPENDENT, folds, {"subjects": len(everyone)})


def plan_kfold(subjects: Iterable[str], k: int, seed: int) -> FoldPlan:
    """Seeded shuffle, then ``k`` contiguous groups whose sizes differ by at most one."""
    everyone = _unique(subjects)
    n = len(everyone)
    if not 2 <= k <= n:
        raise PlanError(f"k must be in [2, {n}], got {k}")
    order = list(everyone)
    random.Random(seed).shuffle(order)
    size, extra = divmod(n, k)
    folds, pos = [], 0
    for i in range(k):
        width = size + (i < extra)
        folds.append(_subject_fold(order[pos : pos + width], everyone))
        pos += width
    return FoldPlan("kfold", SUBJECT_INDEPENDENT, tuple(folds), {"k": k, "seed": seed, "subjects": n})


def plan_fixed(split: Mapping[str, str | Iterable[str]]) -> FoldPlan:
    """Single fold from an explicit ``subject -> "train" | "test"`` assignment.

    A subject may map to a collection of roles; listing both is an error.
    """
    roles = {s: {r} if isinstance(r, str) else set(r) for s, r in split.items()}
    bad = sorted(s for s, r in roles.items() if not r or not r <= {"train", "test"})
    if bad:
        raise PlanError(f"subjects with unknown role: {bad}")
    both = sorted(s for s, r in roles.items() if len(r) > 1)
    if both:
        raise PlanError(f"subjects in both train and test: {both}")
    train = sorted(s for s, r in roles.items() if r == {"train"})
    test = sorted(s for s, r in roles.items() if r == {"test"})
    if not test:
        raise PlanError("fixed split has no test subjects")
    if not train:
        raise PlanError("fixed split has no training subjects")
    fold = Fold(tuple(Region(s) for s in train), tuple(Region(s) for s in test))
    return FoldPlan("fixed", SUBJECT_INDEPENDENT, (fold,), {"train": len(train), "test": len(test)})


def plan_fixed_sets(train: Iterable[str], test: Iterable[str]) -> FoldPlan:
    roles: dict[str, set[str]] = {}
    for s in train:
        roles.setdefault(s, set()).add("train")
    for s in test:
        roles.setdefault(s, set()).add("test")
    return plan_fixed(roles)


# ---------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class Violation:
    fold: int | None
    rule: str
    message: str


@dataclass
class PlanReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "plan verified: no violations"
        return "\n".join(
            f"fold {v.fold if v.fold is not None else '-'}: [{v.rule}] {v.message}"
            for v in self.violations
        )


def _regions_overlap(a: Region, b: Region) -> bool:
    if a.subject != b.subject:
        return False
    if a.whole_subject or b.whole_subject:
        return True
    if a.run != b.run:
        return False
    return min(a.offset + a.length, b.offset + b.length) - max(a.offset, b.offset) > TIME_EPS


def verify_plan(plan: FoldPlan, kind: str) -> PlanReport:
    """Check a plan's independence guarantees; every problem is reported, none raised."""
    report = PlanReport()
    add = report.violations.append
    if kind not in (PERSONALIZED, SUBJECT_INDEPENDENT):
        raise ValueError(f"unknown plan kind {kind!r}")
    for i, fold in enumerate(plan.folds):
        if not fold.test:
            add(Violation(i, "empty", "fold has no test data"))
        for a in fold.train:
            for b in fold.test:
                if _regions_overlap(a, b):
                    add(Violation(i, "overlap", f"{a} appears in both train and test"))
        if kind == PERSONALIZED:
            timed = [r for r in fold.train + fold.test if r.whole_subject or r.start is None]
            if timed:
                add(Violation(i, "chronology", "regions without timing information"))
                continue
            if len(fold.train_subjects | fold.test_subjects) > 1:
                add(Violation(i, "subject", "personalized fold mixes subjects"))
            if fold.train and fold.test:
                last_train = max(r.abs_end for r in fold.train)
                first_test = min(r.abs_start for r in fold.test)
                if (last_train - first_test).total_seconds() > TIME_EPS:
                    add(
                        Violation(
                            i,
                            "chronology",
                            f"training data ends at {last_train}, after test start {first_test}",
                        )
                    )
        else:
            shared = fold.train_subjects & fold.test_subjects
            if shared:
                add(Violation(i, "independence", f"subjects in train and test: {sorted(shared)}"))

    if kind == SUBJECT_INDEPENDENT and plan.scheme in ("loo", "kfold"):
        everyone = set()
        tested: dict[str, int] = {}
        for fold in plan.folds:
            everyone |= fold.train_subjects | fold.test_subjects
            for s in fold.test_subjects:
                tested[s] = tested.get(s, 0) + 1
        for s in sorted(everyone):
            if tested.get(s, 0) != 1:
                add(Violation(None, "coverage", f"subject {s} is tested {tested.get(s, 0)} times"))
    return report
