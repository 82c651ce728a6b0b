"""Hypothesis strategies shared by several test modules."""

from __future__ import annotations

from datetime import datetime

from hypothesis import strategies as st

from seizure_eval import annotations as ann

SEIZURE_CODES = sorted(ann.SEIZURE_TYPES)

datetimes = st.datetimes(min_value=datetime(1990, 1, 1), max_value=datetime(2040, 12, 31)).map(
    lambda d: d.replace(microsecond=0)
)
# decimal-looking seconds such as those found in annotation files
seconds = st.integers(min_value=0, max_value=10**7).map(lambda n: n / 1000)
channel_names = st.text(
    alphabet=st.characters(whitelist_categories=("Lu", "Ll", "Nd"), whitelist_characters="-_"),
    min_size=1,
    max_size=8,
).filter(lambda s: s.strip() == s and s not in (ann.NA, ann.ALL_CHANNELS))


@st.composite
def event_lists(draw, max_events: int = 8) -> ann.EventList:
    dt = draw(datetimes)
    duration = draw(st.integers(min_value=1, max_value=10**7)) / 100
    if draw(st.booleans()):
        duration = float(max(1, round(duration)))
    events = []
    for _ in range(draw(st.integers(0, max_events))):
        onset = draw(st.integers(0, int(duration * 1000) - 1)) / 1000
        length = draw(st.integers(1, max(1, int((duration - onset) * 1000)))) / 1000
        if onset + length > duration + ann.END_TOLERANCE:
            continue
        confidence = draw(st.none() | st.floats(0, 1, allow_nan=False))
        channels = draw(st.none() | st.just(ann.ALL_CHANNELS) | st.lists(channel_names, min_size=1, max_size=4).map(tuple))
        events.append(
            ann.Event(onset, length, draw(st.sampled_from(SEIZURE_CODES)), dt, duration, confidence, channels)
        )
    return ann.EventList(dt, duration, tuple(events))
