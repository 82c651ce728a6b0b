"""Seizure annotation files: event model, type vocabulary and TSV (de)serialization.

One annotation file describes one recording. Each data row is an event with
seven tab-separated columns::

    onset  duration  eventType  confidence  channels  dateTime  recordingDuration

Absent optional values are written ``n/a``. Recordings without seizures carry
a single ``bckg`` row spanning the whole recording.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from datetime import datetime
from decimal import Decimal
from typing import Iterable, Sequence

COLUMNS = (
    "onset",
    "duration",
    "eventType",
    "confidence",
    "channels",
    "dateTime",
    "recordingDuration",
)
NA = "n/a"
ALL_CHANNELS = "all"
BACKGROUND = "bckg"
SEIZURE = "sz"
DATETIME_FORMAT = "%Y-%m-%d %H:%M:%S"
# absorbs decimal-text rounding on the event-end check
END_TOLERANCE = 1e-6


# ILAE 2017 expanded classification. Codes are built by joining path segments
# with "-"; multi-word segments use "_".
_FOCAL_MOTOR = (
    "automatisms",
    "atonic",
    "clonic",
    "epileptic_spasms",
    "hyperkinetic",
    "myoclonic",
    "tonic",
)
_FOCAL_NONMOTOR = ("autonomic", "behavior_arrest", "cognitive", "emotional", "sensory")
_AWARENESS = {"a": None, "ia": None, "ua": None}

_HIERARCHY: dict = {
    "foc": {
        **{aw: {"m": _FOCAL_MOTOR, "nm": _FOCAL_NONMOTOR} for aw in _AWARENESS},
        "f2b": {},
    },
    "gen": {
        "m": (
            "tonic_clonic",
            "clonic",
            "tonic",
            "myoclonic",
            "myoclonic_tonic_clonic",
            "myoclonic_atonic",
            "atonic",
            "epileptic_spasms",
        ),
        "nm": ("typical", "atypical", "myoclonic", "eyelid_myoclonia"),
    },
    "uon": {
        "m": ("tonic_clonic", "epileptic_spasms"),
        "nm": ("behavior_arrest",),
    },
}


def _expand(prefix: str, node) -> Iterable[str]:
    yield prefix
    if isinstance(node, dict):
        for key, child in node.items():
            yield from _expand(f"{prefix}-{key}", child)
    else:
        for leaf in node:
            yield f"{prefix}-{leaf}"


SEIZURE_TYPES: frozenset[str] = frozenset(_expand(SEIZURE, _HIERARCHY))
EVENT_TYPES: frozenset[str] = SEIZURE_TYPES | {BACKGROUND}


class AnnotationError(ValueError):
    """Base class for annotation parsing and validation failures.

    ``row`` is the 1-based data row (0 for the header) and ``column`` the
    column name, when the failure can be pinned to a cell.
    """

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class HeaderError(AnnotationError):
    pass


class FieldValueError(AnnotationError):
    """A cell could not be converted to the type its column requires."""


class UnknownEventTypeError(AnnotationError):
    pass


class ConfidenceRangeError(AnnotationError):
    pass


class InconsistentRecordingError(AnnotationError):
    """Rows disagree on dateTime or recordingDuration."""


class EventBoundsError(AnnotationError):
    pass


class MissingRecordingInfoError(AnnotationError):
    pass


def validate_type_code(code: str) -> list[str]:
    """Return the ancestry of ``code`` from the root down to ``code`` itself.

    >>> validate_type_code("sz-gen-m-tonic_clonic")
    ['sz', 'sz-gen', 'sz-gen-m', 'sz-gen-m-tonic_clonic']
    """
    if code == BACKGROUND:
        return [BACKGROUND]
    if code not in SEIZURE_TYPES:
        raise UnknownEventTypeError(f"unknown event type {code!r}")
    parts = code.split("-")
    return ["-".join(parts[: i + 1]) for i in range(len(parts))]


def is_seizure(code: str) -> bool:
    return code in SEIZURE_TYPES


@dataclass(frozen=True)
class Event:
    onset: float
    duration: float
    event_type: str
    date_time: datetime
    recording_duration: float
    confidence: float | None = None
    # None when absent, "all", or a tuple of channel names
    channels: tuple[str, ...] | str | None = None

    def __post_init__(self):
        validate_type_code(self.event_type)
        if not self.recording_duration > 0:
            raise EventBoundsError(f"recordingDuration must be positive, got {self.recording_duration}")
        if not self.onset >= 0:
            raise EventBoundsError(f"onset must be non-negative, got {self.onset}")
        if not self.duration > 0:
            raise EventBoundsError(f"duration must be positive, got {self.duration}")
        if self.onset + self.duration > self.recording_duration + END_TOLERANCE:
            raise EventBoundsError(
                f"event [{self.onset}, {self.onset + self.duration}) ends after "
                f"recording end {self.recording_duration}"
            )
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise ConfidenceRangeError(f"confidence {self.confidence} outside [0, 1]")
        if isinstance(self.channels, str):
            if self.channels != ALL_CHANNELS:
                raise FieldValueError(f"channels must be a name list or {ALL_CHANNELS!r}")
        elif self.channels is not None:
            chans = tuple(self.channels)
            if not chans or any(not c or any(s in c for s in ",\t\n") for c in chans):
                raise FieldValueError(f"invalid channel list {chans!r}")
            object.__setattr__(self, "channels", chans)

    @property
    def end(self) -> float:
        return self.onset + self.duration

    @property
    def is_seizure(self) -> bool:
        return is_seizure(self.event_type)


@dataclass(frozen=True)
class EventList:
    """Events of one recording, kept sorted by onset."""

    date_time: datetime
    recording_duration: float
    events: tuple[Event, ...] = field(default=())

    def __post_init__(self):
        events = tuple(sorted(self.events, key=lambda e: (e.onset, e.duration, e.event_type)))
        for ev in events:
            if ev.date_time != self.date_time or ev.recording_duration != self.recording_duration:
                raise InconsistentRecordingError(
                    "event recording metadata differs from the list's dateTime/recordingDuration"
                )
        bckg = [ev for ev in events if ev.event_type == BACKGROUND]
        if bckg:
            if len(events) != len(bckg):
                raise EventBoundsError("a bckg event cannot coexist with other events")
            for ev in bckg:
                if ev.onset != 0 or abs(ev.duration - self.recording_duration) > END_TOLERANCE:
                    raise EventBoundsError("a bckg event must span the whole recording")
        object.__setattr__(self, "events", events)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    @property
    def seizures(self) -> tuple[Event, ...]:
        return tuple(ev for ev in self.events if ev.is_seizure)

    def with_events(self, events: Iterable[Event]) -> EventList:
        return replace(self, events=tuple(events))

    @classmethod
    def from_intervals(
        cls,
        intervals: Iterable[tuple[float, float]],
        date_time: datetime,
        recording_duration: float,
        event_type: str = SEIZURE,
    ) -> EventList:
        """Build a list of ``event_type`` events from ``(start, end)`` pairs in seconds."""
        events = [
            Event(
                onset=start,
                duration=end - start,
                event_type=event_type,
                date_time=date_time,
                recording_duration=recording_duration,
            )
            for start, end in intervals
        ]
        return cls(date_time=date_time, recording_duration=recording_duration, events=tuple(events))


def events_of_type(events: EventList, type_filter: str) -> EventList:
    """Keep the events whose ancestry contains ``type_filter``."""
    validate_type_code(type_filter)
    kept = [ev for ev in events if type_filter in validate_type_code(ev.event_type)]
    return events.with_events(kept)


def format_number(value: float, min_decimals: int = 1) -> str:
    """Shortest round-tripping fixed-point rendering with at least ``min_decimals`` decimals."""
    if not math.isfinite(value):
        raise ValueError(f"cannot render non-finite value {value!r}")
    text = format(Decimal(repr(float(value))), "f")
    if text.startswith("-0") and float(value) == 0:
        text = text[1:]
    whole, _, frac = text.partition(".")
    frac = frac.ljust(min_decimals, "0")
    return f"{whole}.{frac}"


def _format_row(ev: Event) -> str:
    if ev.channels is None:
        channels = NA
    elif isinstance(ev.channels, str):
        channels = ev.channels
    else:
        channels = ",".join(ev.channels)
    cells = (
        format_number(ev.onset),
        format_number(ev.duration),
        ev.event_type,
        NA if ev.confidence is None else format_number(ev.confidence),
        channels,
        ev.date_time.strftime(DATETIME_FORMAT),
        format_number(ev.recording_duration, min_decimals=2),
    )
    return "\t".join(cells)


def serialize_annotation_tsv(events: EventList, bckg_filler: bool = False) -> str:
    """Render ``events`` as annotation TSV text.

    An empty list is written as a single ``bckg`` row spanning the recording
    when ``bckg_filler`` is set; otherwise only the header is written.
    """
    rows = list(events.events)
    if not rows and bckg_filler:
        rows = [background_event(events.date_time, events.recording_duration)]
    lines = ["\t".join(COLUMNS)] + [_format_row(ev) for ev in rows]
    return "\n".join(lines) + "\n"


def background_event(date_time: datetime, recording_duration: float) -> Event:
    return Event(
        onset=0.0,
        duration=recording_duration,
        event_type=BACKGROUND,
        date_time=date_time,
        recording_duration=recording_duration,
    )


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise FieldValueError(f"not a number: {text!r}", row, column) from None
    if not math.isfinite(value):
        raise FieldValueError(f"not a finite number: {text!r}", row, column)
    return value


def _parse_channels(text: str, row: int):
    if text == NA:
        return None
    if text == ALL_CHANNELS:
        return ALL_CHANNELS
    names = tuple(name.strip() for name in text.split(","))
    if any(not n for n in names):
        raise FieldValueError(f"empty channel name in {text!r}", row, "channels")
    return names


def parse_annotation_tsv(
    text: str,
    date_time: datetime | None = None,
    recording_duration: float | None = None,
) -> EventList:
    """Parse annotation TSV text into an :class:`EventList`.

    ``date_time`` and ``recording_duration`` are only needed for files with a
    header and no data rows. When given alongside rows they must agree with
    them.
    """
    lines = [line.rstrip("\r") for line in text.split("\n")]
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise HeaderError("empty annotation file", 0)
    header = [cell.strip() for cell in lines[0].split("\t")]
    if tuple(header) != COLUMNS:
        raise HeaderError(f"expected columns {list(COLUMNS)}, got {header}", 0)

    events: list[Event] = []
    ref_dt, ref_dur = date_time, recording_duration
    for row, line in enumerate(lines[1:], start=1):
        if not line.strip():
            raise FieldValueError("blank row", row)
        cells = [cell.strip() for cell in line.split("\t")]
        if len(cells) != len(COLUMNS):
            raise FieldValueError(f"expected {len(COLUMNS)} cells, got {len(cells)}", row)
        rec = dict(zip(COLUMNS, cells))

        onset = _parse_float(rec["onset"], row, "onset")
        duration = _parse_float(rec["duration"], row, "duration")
        rec_dur = _parse_float(rec["recordingDuration"], row, "recordingDuration")
        event_type = rec["eventType"]
        try:
            validate_type_code(event_type)
        except UnknownEventTypeError:
            raise UnknownEventTypeError(f"unknown event type {event_type!r}", row, "eventType") from None
        confidence = None
        if rec["confidence"] != NA:
            confidence = _parse_float(rec["confidence"], row, "confidence")
            if not 0.0 <= confidence <= 1.0:
                raise ConfidenceRangeError(f"confidence {confidence} outside [0, 1]", row, "confidence")
        try:
            dt = datetime.strptime(rec["dateTime"], DATETIME_FORMAT)
        except ValueError:
            raise FieldValueError(f"bad dateTime {rec['dateTime']!r}", row, "dateTime") from None
        channels = _parse_channels(rec["channels"], row)

        if ref_dt is None:
            ref_dt = dt
        elif dt != ref_dt:
            raise InconsistentRecordingError(f"dateTime {dt} differs from {ref_dt}", row, "dateTime")
        if ref_dur is None:
            ref_dur = rec_dur
        elif rec_dur != ref_dur:
            raise InconsistentRecordingError(
                f"recordingDuration {rec_dur} differs from {ref_dur}", row, "recordingDuration"
            )
        try:
            events.append(
                Event(
                    onset=onset,
                    duration=duration,
                    event_type=event_type,
                    date_time=dt,
                    recording_duration=rec_dur,
                    confidence=confidence,
                    channels=channels,
                )
            )
        except EventBoundsError as exc:
            raise EventBoundsError(str(exc), row, "onset") from None

    if ref_dt is None or ref_dur is None:
        raise MissingRecordingInfoError(
            "file has no data rows; dateTime and recordingDuration must be supplied"
        )
    try:
        return EventList(date_time=ref_dt, recording_duration=ref_dur, events=tuple(events))
    except AnnotationError as exc:
        raise type(exc)(str(exc)) from None


def read_annotation_file(path, **kwargs) -> EventList:
    with open(path, encoding="utf-8") as fh:
        return parse_annotation_tsv(fh.read(), **kwargs)


def write_annotation_file(path, events: EventList, bckg_filler: bool = False) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(serialize_annotation_tsv(events, bckg_filler=bckg_filler))


def seizure_intervals(events: EventList | Sequence[Event]) -> list[tuple[float, float]]:
    return [(ev.onset, ev.end) for ev in events if ev.is_seizure]
