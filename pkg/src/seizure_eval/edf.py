"""Minimal EDF (16-bit European Data Format) reader and writer.

Only plain EDF is handled: a 256-byte fixed header, 256 bytes per signal and
little-endian int16 data records. EDF+ annotation channels are not supported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

# symmetric digital range so that 0 uV in a symmetric physical range is stored exactly
DIGITAL_MIN = -32767
DIGITAL_MAX = 32767

# scale factors to microvolts
_UNIT_SCALE = {
    "uv": 1.0,
    "µv": 1.0,
    "μv": 1.0,
    "mv": 1e3,
    "v": 1e6,
    "nv": 1e-3,
}

_SIGNAL_FIELDS = (
    ("label", 16),
    ("transducer", 80),
    ("dimension", 8),
    ("physical_min", 8),
    ("physical_max", 8),
    ("digital_min", 8),
    ("digital_max", 8),
    ("prefilter", 80),
    ("samples_per_record", 8),
    ("reserved", 32),
)


class EDFError(ValueError):
    pass


class EDFUnitError(EDFError):
    """A signal's physical dimension cannot be converted to microvolts."""


@dataclass(frozen=True)
class Recording:
    """Multichannel EEG in microvolts, shape ``(n_channels, n_samples)``."""

    channel_names: tuple[str, ...]
    data: np.ndarray
    sampling_rate: float
    start: datetime
    montage: str = "unknown"

    def __post_init__(self):
        names = tuple(self.channel_names)
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError("data must be 2-D (channels, samples)")
        if data.shape[0] != len(names):
            raise ValueError(f"{len(names)} channel names for {data.shape[0]} signals")
        if len(set(names)) != len(names):
            raise ValueError(f"channel names not unique: {names}")
        if not self.sampling_rate > 0:
            raise ValueError("sampling rate must be positive")
        object.__setattr__(self, "channel_names", names)
        object.__setattr__(self, "data", data)

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sampling_rate

    def channel(self, name: str) -> np.ndarray:
        return self.data[self.channel_names.index(name)]


@dataclass(frozen=True)
class CanonicalRecording(Recording):
    """Recording whose first channels are the canonical electrodes in canonical order."""

    montage: str = "average"
    n_canonical: int = 19
    zero_filled: tuple[str, ...] = field(default=())

    @property
    def canonical_names(self) -> tuple[str, ...]:
        return self.channel_names[: self.n_canonical]

    @property
    def extra_channels(self) -> tuple[str, ...]:
        return self.channel_names[self.n_canonical :]


def _field(raw: bytes, name: str) -> str:
    try:
        return raw.decode("ascii").strip()
    except UnicodeDecodeError:
        raise EDFError(f"non-ASCII bytes in header field {name}") from None


def _parse_start(date: str, time: str) -> datetime:
    try:
        day, month, yy = (int(p) for p in date.split("."))
        hh, mm, ss = (int(p) for p in time.split("."))
    except ValueError:
        raise EDFError(f"bad start date/time {date!r} {time!r}") from None
    year = 1900 + yy if yy >= 85 else 2000 + yy
    return datetime(year, month, day, hh, mm, ss)


def unit_scale(dimension: str) -> float:
    key = dimension.strip().lower()
    if key not in _UNIT_SCALE:
        raise EDFUnitError(f"physical dimension {dimension!r} is not a voltage")
    return _UNIT_SCALE[key]


def read_edf(content: bytes, keep_unknown_units: bool = False) -> Recording:
    """Decode EDF bytes into a :class:`Recording` in microvolts.

    Signals with a non-voltage physical dimension raise :class:`EDFUnitError`
    unless ``keep_unknown_units`` is set, in which case their physical values
    are kept unscaled.
    """
    if len(content) < 256:
        raise EDFError("truncated header")
    fixed = content[:256]
    try:
        header_bytes = int(_field(fixed[184:192], "header bytes"))
        n_records = int(_field(fixed[236:244], "number of records"))
        record_duration = float(_field(fixed[244:252], "record duration"))
        ns = int(_field(fixed[252:256], "number of signals"))
    except ValueError:
        raise EDFError("malformed numeric field in header") from None
    start = _parse_start(_field(fixed[168:176], "startdate"), _field(fixed[176:184], "starttime"))
    if ns <= 0:
        raise EDFError("no signals")
    if header_bytes != 256 * (ns + 1):
        raise EDFError(f"header size {header_bytes} inconsistent with {ns} signals")
    if len(content) < header_bytes:
        raise EDFError("truncated signal header")

    sig = {}
    offset = 256
    for name, width in _SIGNAL_FIELDS:
        sig[name] = [
            _field(content[offset + i * width : offset + (i + 1) * width], name) for i in range(ns)
        ]
        offset += width * ns
    try:
        spr = [int(v) for v in sig["samples_per_record"]]
        pmin = [float(v) for v in sig["physical_min"]]
        pmax = [float(v) for v in sig["physical_max"]]
        dmin = [int(v) for v in sig["digital_min"]]
        dmax = [int(v) for v in sig["digital_max"]]
    except ValueError:
        raise EDFError("malformed numeric field in signal header") from None
    if len(set(spr)) != 1:
        raise EDFError(f"signals have different sample rates: {spr}")
    if spr[0] <= 0 or record_duration <= 0:
        raise EDFError("non-positive samples per record or record duration")

    record_bytes = 2 * sum(spr)
    data_bytes = len(content) - header_bytes
    if n_records == -1:
        if data_bytes % record_bytes:
            raise EDFError("data section is not a whole number of records")
        n_records = data_bytes // record_bytes
    if n_records <= 0 or data_bytes == 0:
        raise EDFError("empty data section")
    if data_bytes < n_records * record_bytes:
        raise EDFError(f"truncated data: expected {n_records} records of {record_bytes} bytes")
    if data_bytes > n_records * record_bytes:
        raise EDFError("data section longer than the declared number of records")

    raw = np.frombuffer(content, dtype="<i2", count=n_records * sum(spr), offset=header_bytes)
    raw = raw.reshape(n_records, ns, spr[0]).transpose(1, 0, 2).reshape(ns, -1).astype(np.float64)
    data = np.empty_like(raw)
    for i in range(ns):
        if dmax[i] == dmin[i] or pmax[i] == pmin[i]:
            raise EDFError(f"degenerate range for signal {sig['label'][i]!r}")
        gain = (pmax[i] - pmin[i]) / (dmax[i] - dmin[i])
        physical = (raw[i] - dmin[i]) * gain + pmin[i]
        try:
            scale = unit_scale(sig["dimension"][i])
        except EDFUnitError:
            if not keep_unknown_units:
                raise EDFUnitError(
                    f"signal {sig['label'][i]!r}: physical dimension "
                    f"{sig['dimension'][i]!r} is not a voltage"
                ) from None
            scale = 1.0
        data[i] = physical * scale

    names = _dedupe(sig["label"])
    return Recording(
        channel_names=names,
        data=data,
        sampling_rate=spr[0] / record_duration,
        start=start,
    )


def _dedupe(labels: list[str]) -> tuple[str, ...]:
    seen: dict[str, int] = {}
    out = []
    for label in labels:
        if label in seen:
            seen[label] += 1
            out.append(f"{label}-{seen[label]}")
        else:
            seen[label] = 1
            out.append(label)
    return tuple(out)


def physical_range(signal: np.ndarray) -> tuple[float, float]:
    """Symmetric range covering ``signal``, rounded up to a power of ten microvolts."""
    peak = float(np.max(np.abs(signal))) if signal.size else 0.0
    if not math.isfinite(peak):
        raise EDFError("signal contains non-finite values")
    if peak == 0.0:
        return -1.0, 1.0
    bound = 10.0 ** math.ceil(math.log10(peak))
    if bound < peak:
        bound *= 10.0
    return -bound, bound


def _num(value: float, width: int = 8) -> str:
    if float(value).is_integer() and len(str(int(value))) <= width:
        return str(int(value))
    text = repr(float(value))
    if len(text) <= width:
        return text
    for digits in range(width, 0, -1):
        text = f"{value:.{digits}g}"
        if len(text) <= width:
            return text
    raise EDFError(f"cannot fit {value} into {width} characters")


def _pad(text: str, width: int) -> bytes:
    raw = text.encode("ascii", errors="replace")
    if len(raw) > width:
        raw = raw[:width]
    return raw.ljust(width, b" ")


def _record_layout(n_samples: int, fs: float) -> tuple[float, int, int]:
    """Pick (record duration, samples per record, record count)."""
    if float(fs).is_integer() and n_samples % int(fs) == 0:
        return 1.0, int(fs), n_samples // int(fs)
    duration = n_samples / fs
    text = _num(duration)
    if float(text) * fs == n_samples:
        return float(text), n_samples, 1
    raise EDFError(
        f"{n_samples} samples at {fs} Hz cannot be stored as whole EDF records"
    )


def write_edf(
    recording: Recording,
    physical_ranges: dict[str, tuple[float, float]] | None = None,
    patient: str = "X X X X",
    recording_id: str = "Startdate X X X X",
) -> bytes:
    """Encode ``recording`` as EDF bytes.

    Each channel gets the symmetric power-of-ten range from
    :func:`physical_range` unless overridden in ``physical_ranges``.
    Canonical recordings label their electrodes ``<name>-Avg``.
    """
    ns = len(recording.channel_names)
    if ns == 0:
        raise EDFError("recording has no channels")
    if recording.n_samples == 0:
        raise EDFError("recording has no samples")
    record_duration, spr, n_records = _record_layout(recording.n_samples, recording.sampling_rate)

    labels = list(recording.channel_names)
    if isinstance(recording, CanonicalRecording) and recording.montage == "average":
        labels[: recording.n_canonical] = [f"{n}-Avg" for n in recording.canonical_names]

    ranges = []
    for name, signal in zip(recording.channel_names, recording.data):
        lo, hi = (physical_ranges or {}).get(name) or physical_range(signal)
        if lo == hi:
            raise EDFError(f"degenerate physical range for {name!r}")
        if signal.size and (signal.min() < lo or signal.max() > hi):
            raise EDFError(f"signal {name!r} exceeds its physical range [{lo}, {hi}]")
        ranges.append((lo, hi))

    start = recording.start
    header = bytearray()
    header += _pad("0", 8)
    header += _pad(patient, 80)
    header += _pad(recording_id, 80)
    header += _pad(start.strftime("%d.%m.%y"), 8)
    header += _pad(start.strftime("%H.%M.%S"), 8)
    header += _pad(str(256 * (ns + 1)), 8)
    header += _pad("", 44)
    header += _pad(str(n_records), 8)
    header += _pad(_num(record_duration), 8)
    header += _pad(str(ns), 4)

    per_signal = {
        "label": labels,
        "transducer": ["AgAgCl electrode"] * ns,
        "dimension": ["uV"] * ns,
        "physical_min": [_num(lo) for lo, _ in ranges],
        "physical_max": [_num(hi) for _, hi in ranges],
        "digital_min": [str(DIGITAL_MIN)] * ns,
        "digital_max": [str(DIGITAL_MAX)] * ns,
        "prefilter": [""] * ns,
        "samples_per_record": [str(spr)] * ns,
        "reserved": [""] * ns,
    }
    for name, width in _SIGNAL_FIELDS:
        for value in per_signal[name]:
            header += _pad(value, width)

    digital = np.empty(recording.data.shape, dtype="<i2")
    for i, (lo, hi) in enumerate(ranges):
        # ranges may have been rounded to fit 8 characters
        lo, hi = float(_num(lo)), float(_num(hi))
        scaled = (recording.data[i] - lo) / (hi - lo) * (DIGITAL_MAX - DIGITAL_MIN) + DIGITAL_MIN
        digital[i] = np.clip(np.round(scaled), DIGITAL_MIN, DIGITAL_MAX)
    body = digital.reshape(ns, n_records, spr).transpose(1, 0, 2).tobytes()
    return bytes(header) + body


def read_edf_file(path, **kwargs) -> Recording:
    with open(path, "rb") as fh:
        return read_edf(fh.read(), **kwargs)


def write_edf_file(path, recording: Recording, **kwargs) -> None:
    with open(path, "wb") as fh:
        fh.write(write_edf(recording, **kwargs))
