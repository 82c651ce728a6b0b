"""Deterministic synthetic source dataset with injected high-amplitude bursts.

Run as a script to (re)build the committed fixture::

    python3 tests/synthetic.py tests/fixtures/synthetic_source
"""

from __future__ import annotations

import sys
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from seizure_eval import annotations as ann
from seizure_eval.edf import Recording, write_edf

FS = 256.0
RUN_SECONDS = 30
SEED = 20240
# Source labels: 19 scalp electrodes (partly with modern names) plus two ear references.
SOURCE_LABELS = (
    "EEG FP1-REF", "EEG F3-REF", "EEG C3-REF", "EEG P3-REF", "EEG O1-REF", "EEG F7-REF",
    "EEG T7-REF", "EEG P7-REF", "EEG FZ-REF", "EEG CZ-REF", "EEG PZ-REF", "EEG FP2-REF",
    "EEG F4-REF", "EEG C4-REF", "EEG P4-REF", "EEG O2-REF", "EEG F8-REF", "EEG T8-REF",
    "EEG P8-REF", "EEG A1-REF", "EEG A2-REF",
)
# channels that carry the burst (left hemisphere), so re-referencing does not cancel it
BURST_CHANNELS = (0, 1, 2, 3, 4, 5, 6, 7)
NOISE_UV = 5.0
BURST_UV = 150.0
BURST_HZ = 7.0

# subject -> per-run list of (onset, duration) bursts annotated as seizures
LAYOUT = {
    "alpha": [[(6.0, 8.0)], [], [(15.0, 10.0)], []],
    "beta": [[], [(3.0, 6.0), (20.0, 5.0)], [], [(10.0, 12.0)]],
    "gamma": [[(0.0, 5.0)], [(24.0, 6.0)], [], []],
}
SEIZURE_TYPES = ("sz", "sz-foc-ia", "sz-gen-m-tonic_clonic")


def make_run(rng: np.random.Generator, bursts) -> np.ndarray:
    n = int(RUN_SECONDS * FS)
    data = rng.normal(0.0, NOISE_UV, size=(len(SOURCE_LABELS), n))
    t = np.arange(n) / FS
    for onset, duration in bursts:
        lo, hi = int(onset * FS), int((onset + duration) * FS)
        for k, ch in enumerate(BURST_CHANNELS):
            data[ch, lo:hi] += BURST_UV * np.sin(2 * np.pi * BURST_HZ * t[lo:hi] + 0.3 * k)
    return np.round(data, 1)


def build_source(root, seed: int = SEED) -> Path:
    """Write the source tree ``<root>/<subject>/run<k>.edf`` plus ``.tsv`` annotations."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    base = datetime(2021, 3, 4, 9, 0, 0)
    for s, (subject, runs) in enumerate(sorted(LAYOUT.items())):
        folder = root / subject
        folder.mkdir(parents=True, exist_ok=True)
        for k, bursts in enumerate(runs):
            start = base + timedelta(days=s, minutes=5 * k)
            data = make_run(rng, bursts)
            rec = Recording(SOURCE_LABELS, data, FS, start)
            ranges = {name: (-1000.0, 1000.0) for name in SOURCE_LABELS}
            (folder / f"run{k}.edf").write_bytes(write_edf(rec, physical_ranges=ranges))
            events = ann.EventList(
                start,
                float(RUN_SECONDS),
                tuple(
                    ann.Event(onset, duration, SEIZURE_TYPES[(i + k) % len(SEIZURE_TYPES)], start, float(RUN_SECONDS))
                    for i, (onset, duration) in enumerate(bursts)
                ),
            )
            (folder / f"run{k}.tsv").write_text(
                ann.serialize_annotation_tsv(events, bckg_filler=True), encoding="utf-8"
            )
    return root


if __name__ == "__main__":
    build_source(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent / "fixtures" / "synthetic_source")
