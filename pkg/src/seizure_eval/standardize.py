"""Bring recordings to the canonical form: 19 ordered 10-20 electrodes,
common-average reference, 256 Hz."""

from __future__ import annotations

import logging
import re
import warnings
from fractions import Fraction

import numpy as np
from scipy import signal as sps

from .edf import CanonicalRecording, Recording

log = logging.getLogger(__name__)

CANONICAL_CHANNELS = (
    "Fp1", "F3", "C3", "P3", "O1", "F7", "T3", "T5", "Fz", "Cz",
    "Pz", "Fp2", "F4", "C4", "P4", "O2", "F8", "T4", "T6",
)  # fmt: skip
TARGET_RATE = 256.0
# cutoff as a fraction of the output Nyquist frequency
CUTOFF_RATIO = 0.9

_MODERN_ALIASES = {"t7": "T3", "t8": "T4", "p7": "T5", "p8": "T6"}
_BY_LOWER = {name.lower(): name for name in CANONICAL_CHANNELS}
_PREFIX = re.compile(r"^(eeg)\s+", re.IGNORECASE)
_SUFFIX = re.compile(r"-(ref|le|avg)$", re.IGNORECASE)


class StandardizationError(ValueError):
    pass


class MissingChannelError(StandardizationError):
    def __init__(self, missing):
        self.missing = tuple(missing)
        super().__init__(
            f"missing canonical channels {list(self.missing)}; pass zero_fill_missing=True to zero-fill"
        )


class BipolarMontageError(StandardizationError):
    pass


class SamplingRateError(StandardizationError):
    pass


def _electrode(token: str) -> str | None:
    token = token.strip().lower()
    return _BY_LOWER.get(token) or _MODERN_ALIASES.get(token)


def normalize_channel_name(name: str) -> str:
    """Map a source channel label to its canonical electrode name.

    Labels that do not resolve to one of the 19 electrodes come back unchanged.

    >>> normalize_channel_name("EEG FP1-REF")
    'Fp1'
    >>> normalize_channel_name("T7")
    'T3'
    """
    bare = _SUFFIX.sub("", _PREFIX.sub("", name.strip()))
    return _electrode(bare) or name


def is_bipolar_label(name: str) -> bool:
    parts = _PREFIX.sub("", name.strip()).split("-")
    return len(parts) == 2 and all(_electrode(p) for p in parts)


def normalize_channel_names(recording: Recording) -> Recording:
    names = tuple(normalize_channel_name(n) for n in recording.channel_names)
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise StandardizationError(f"several source channels map to {dupes}")
    return Recording(
        channel_names=names,
        data=recording.data,
        sampling_rate=recording.sampling_rate,
        start=recording.start,
        montage=recording.montage,
    )


def common_average(data: np.ndarray, use: np.ndarray | None = None) -> np.ndarray:
    """Subtract the per-sample mean over rows ``use`` (all rows by default) from those rows."""
    out = np.array(data, dtype=np.float64, copy=True)
    rows = np.arange(out.shape[0]) if use is None else np.flatnonzero(use)
    if rows.size:
        # averaging deviations from the first row keeps identical channels
        # exactly identical to their mean
        pivot = out[rows[0]].copy()
        mean = pivot + (out[rows] - pivot).mean(axis=0)
        out[rows] -= mean
    return out


def rereference_common_average(
    recording: Recording, exclude: tuple[str, ...] = ()
) -> CanonicalRecording:
    """Common-average reference over the canonical electrodes.

    The recording must already carry the 19 electrodes (any order). Channels in
    ``exclude`` (zero-filled electrodes) are left out of the average and left
    untouched. Non-canonical channels are kept unchanged after the 19.
    """
    names = recording.channel_names
    missing = [c for c in CANONICAL_CHANNELS if c not in names]
    if missing:
        raise MissingChannelError(missing)
    order = [names.index(c) for c in CANONICAL_CHANNELS]
    extras = [i for i, n in enumerate(names) if n not in CANONICAL_CHANNELS]
    canon = recording.data[order]
    use = np.array([c not in exclude for c in CANONICAL_CHANNELS])
    canon = common_average(canon, use)
    data = np.vstack([canon, recording.data[extras]]) if extras else canon
    return CanonicalRecording(
        channel_names=CANONICAL_CHANNELS + tuple(names[i] for i in extras),
        data=data,
        sampling_rate=recording.sampling_rate,
        start=recording.start,
        montage="average",
        zero_filled=tuple(c for c in CANONICAL_CHANNELS if c in exclude),
    )


def resample_signal(x: np.ndarray, in_rate: float, out_rate: float) -> np.ndarray:
    """Polyphase windowed-sinc resampling along the last axis.

    The low-pass cutoff sits at 0.9 of the lower Nyquist frequency. The output
    holds ``round(n * out_rate / in_rate)`` samples.
    """
    if not out_rate > 0:
        raise ValueError(f"target rate must be positive, got {out_rate}")
    x = np.asarray(x, dtype=np.float64)
    if in_rate == out_rate:
        return x
    ratio = Fraction(out_rate / in_rate).limit_denominator(10_000)
    up, down = ratio.numerator, ratio.denominator
    max_rate = max(up, down)
    half_len = 10 * max_rate
    taps = sps.firwin(2 * half_len + 1, CUTOFF_RATIO / max_rate, window=("kaiser", 5.0))
    y = sps.resample_poly(x, up, down, axis=-1, window=taps)
    n_out = int(round(x.shape[-1] * out_rate / in_rate))
    if y.shape[-1] >= n_out:
        return y[..., :n_out]
    pad = [(0, 0)] * (y.ndim - 1) + [(0, n_out - y.shape[-1])]
    return np.pad(y, pad, mode="edge")


def resample(recording: Recording, target_rate: float = TARGET_RATE, allow_upsampling: bool = False):
    """Resample every channel of ``recording`` to ``target_rate``.

    Sources slower than the target are refused unless ``allow_upsampling``.
    The same recording object is returned when the rate already matches.
    """
    if not target_rate > 0:
        raise ValueError(f"target rate must be positive, got {target_rate}")
    if recording.sampling_rate == target_rate:
        return recording
    if recording.sampling_rate < target_rate:
        if not allow_upsampling:
            raise SamplingRateError(
                f"source rate {recording.sampling_rate} Hz is below {target_rate} Hz"
            )
        warnings.warn(
            f"upsampling from {recording.sampling_rate} Hz to {target_rate} Hz", stacklevel=2
        )
    data = resample_signal(recording.data, recording.sampling_rate, target_rate)
    kwargs = dict(
        channel_names=recording.channel_names,
        data=data,
        sampling_rate=float(target_rate),
        start=recording.start,
        montage=recording.montage,
    )
    if isinstance(recording, CanonicalRecording):
        return CanonicalRecording(
            **kwargs, n_canonical=recording.n_canonical, zero_filled=recording.zero_filled
        )
    return Recording(**kwargs)


def canonicalize(
    recording: Recording,
    zero_fill_missing: bool = False,
    target_rate: float = TARGET_RATE,
    allow_upsampling: bool = False,
) -> CanonicalRecording:
    """Rename, select/zero-fill, re-reference and resample ``recording``."""
    named = normalize_channel_names(recording)
    present = [c for c in CANONICAL_CHANNELS if c in named.channel_names]
    if not present and any(is_bipolar_label(n) for n in recording.channel_names):
        raise BipolarMontageError(
            "recording only has bipolar derivations; a common-average montage cannot be "
            "rebuilt from them. Use bipolar passthrough (montage='bipolar') instead."
        )
    missing = [c for c in CANONICAL_CHANNELS if c not in present]
    if missing and not zero_fill_missing:
        raise MissingChannelError(missing)
    if missing:
        log.warning("zero-filling missing channels %s", missing)
        zeros = np.zeros((len(missing), named.n_samples))
        named = Recording(
            channel_names=named.channel_names + tuple(missing),
            data=np.vstack([named.data, zeros]),
            sampling_rate=named.sampling_rate,
            start=named.start,
        )
    car = rereference_common_average(named, exclude=tuple(missing))
    return resample(car, target_rate, allow_upsampling=allow_upsampling)


def bipolar_passthrough(
    recording: Recording, target_rate: float = TARGET_RATE, allow_upsampling: bool = False
) -> Recording:
    """Keep the source bipolar derivations, only resampling them."""
    rec = Recording(
        channel_names=recording.channel_names,
        data=recording.data,
        sampling_rate=recording.sampling_rate,
        start=recording.start,
        montage="bipolar",
    )
    return resample(rec, target_rate, allow_upsampling=allow_upsampling)
