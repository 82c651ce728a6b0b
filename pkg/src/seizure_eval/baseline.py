"""Line-length threshold detector used to exercise the pipeline end to end.

It is not a seizure detection algorithm worth reporting; it only produces
deterministic hypothesis files from canonical recordings.
"""

from __future__ import annotations

import numpy as np

from .edf import Recording
from .standardize import CANONICAL_CHANNELS, StandardizationError, normalize_channel_name


def detection_channels(recording: Recording, montage: str, zero_filled=()) -> np.ndarray:
    """Rows of ``recording.data`` the detector looks at.

    Canonical recordings use their 19 electrodes minus zero-filled ones;
    bipolar recordings use every channel.
    """
    if montage == "bipolar":
        return recording.data
    names = tuple(normalize_channel_name(n) for n in recording.channel_names[: len(CANONICAL_CHANNELS)])
    if montage != "average" or names != CANONICAL_CHANNELS:
        raise StandardizationError(
            "baseline detection needs a canonical recording or an explicit bipolar montage"
        )
    keep = [i for i, n in enumerate(names) if n not in set(zero_filled)]
    return recording.data[keep]


def line_length(data: np.ndarray, fs: float, window: float = 1.0) -> np.ndarray:
    """Mean over channels of summed absolute differences per window, in µV/s.

    A trailing partial window is scored over its own length.
    """
    step = int(round(window * fs))
    if step <= 0:
        raise ValueError("window shorter than one sample")
    n = data.shape[1]
    diffs = np.abs(np.diff(data, axis=1, prepend=data[:, :1])).mean(axis=0)
    starts = np.arange(0, n, step)
    sums = np.add.reduceat(diffs, starts) if n else np.zeros(0)
    lengths = np.minimum(starts + step, n) - starts
    return sums / (lengths / fs)


def detect(
    recording: Recording,
    threshold: float,
    window: float = 1.0,
    montage: str = "average",
    zero_filled=(),
) -> list[tuple[float, float]]:
    """Return ``(start, end)`` seconds of consecutive windows whose line length exceeds ``threshold``."""
    data = detection_channels(recording, montage, zero_filled)
    fs = recording.sampling_rate
    ll = line_length(data, fs, window)
    above = ll > threshold
    duration = recording.n_samples / fs
    events = []
    i = 0
    while i < above.size:
        if not above[i]:
            i += 1
            continue
        j = i
        while j < above.size and above[j]:
            j += 1
        events.append((i * window, min(j * window, duration)))
        i = j
    return events
