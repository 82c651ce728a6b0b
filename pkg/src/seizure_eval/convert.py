"""Conversion of source seizure datasets into the canonical BIDS-EEG layout.

Every source format is reduced to a list of :class:`SourceRun` (EDF path plus
seizure intervals); the shared writer then canonicalizes signals, writes the
EDF, events TSV and sidecar JSON, and records checksums so that a rerun skips
files whose source and outputs are unchanged.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import timedelta
from pathlib import Path

from . import annotations as ann
from .bids import DEFAULT_TASK, RunId
from .edf import read_edf_file, write_edf
from .standardize import bipolar_passthrough, canonicalize

log = logging.getLogger(__name__)

SOURCE_FORMATS = ("generic", "chbmit", "tuh", "siena", "seizeit")
REPORT_NAME = "conversion_report.json"

# TUH seizure labels to vocabulary codes
TUH_LABELS = {
    "seiz": "sz",
    "fnsz": "sz-foc",
    "gnsz": "sz-gen",
    "spsz": "sz-foc-a",
    "cpsz": "sz-foc-ia",
    "absz": "sz-gen-nm",
    "tnsz": "sz-gen-m-tonic",
    "cnsz": "sz-gen-m-clonic",
    "tcsz": "sz-gen-m-tonic_clonic",
    "atsz": "sz-gen-m-atonic",
    "mysz": "sz-gen-m-myoclonic",
}


@dataclass
class SourceRun:
    subject: str
    edf: Path
    # (onset s, end s, event type)
    seizures: list[tuple[float, float, str]] = field(default_factory=list)
    annotation_files: list[Path] = field(default_factory=list)
    error: str | None = None


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# source discovery


def _subject_dirs(root: Path) -> list[Path]:
    return sorted(p for p in root.iterdir() if p.is_dir())


def discover_generic(root: Path) -> list[SourceRun]:
    """``<root>/<subject>/**/<name>.edf`` with an optional ``<name>.tsv`` annotation file."""
    runs = []
    for subj in _subject_dirs(root):
        for edf in sorted(subj.rglob("*.edf")):
            run = SourceRun(subj.name, edf)
            tsv = edf.with_suffix(".tsv")
            if tsv.is_file():
                run.annotation_files.append(tsv)
                try:
                    if _has_rows(tsv):
                        events = ann.read_annotation_file(tsv)
                        run.seizures = [(e.onset, e.end, e.event_type) for e in events.seizures]
                except ann.AnnotationError as exc:
                    run.error = f"{tsv.name}: {exc}"
            runs.append(run)
    return runs


def _has_rows(path: Path) -> bool:
    lines = [l for l in path.read_text(encoding="utf-8").splitlines() if l.strip()]
    return len(lines) > 1


def parse_tuh_csv(text: str) -> list[tuple[float, float, str]]:
    """Seizure rows of a TUH ``.csv_bi``/``.csv`` file; per-channel duplicates collapse."""
    body = "\n".join(l for l in text.splitlines() if l.strip() and not l.lstrip().startswith("#"))
    seen = set()
    out = []
    for row in csv.DictReader(io.StringIO(body)):
        label = row["label"].strip().lower()
        if label not in TUH_LABELS:
            continue
        item = (float(row["start_time"]), float(row["stop_time"]), TUH_LABELS[label])
        if item not in seen:
            seen.add(item)
            out.append(item)
    return sorted(out)


def discover_tuh(root: Path) -> list[SourceRun]:
    runs = []
    for subj in _subject_dirs(root):
        for edf in sorted(subj.rglob("*.edf")):
            run = SourceRun(subj.name, edf)
            for suffix in (".csv_bi", ".csv"):
                path = edf.with_suffix(suffix)
                if path.is_file():
                    run.annotation_files.append(path)
                    try:
                        run.seizures = parse_tuh_csv(path.read_text(encoding="utf-8"))
                    except (KeyError, ValueError) as exc:
                        run.error = f"{path.name}: {exc}"
                    break
            runs.append(run)
    return runs


_CHB_FILE = re.compile(r"^File Name:\s*(\S+)", re.M)
_CHB_SZ = re.compile(r"Seizure\s*(?:\d+\s*)?(Start|End) Time:\s*(\d+(?:\.\d+)?)\s*seconds", re.I)


def parse_chbmit_summary(text: str) -> dict[str, list[tuple[float, float, str]]]:
    """Seizures per EDF file name from a ``chbNN-summary.txt`` file."""
    out: dict[str, list[tuple[float, float, str]]] = {}
    blocks = _CHB_FILE.split(text)
    # split yields [preamble, name1, body1, name2, body2, ...]
    for name, body in zip(blocks[1::2], blocks[2::2]):
        starts, ends = [], []
        for which, value in _CHB_SZ.findall(body):
            (starts if which.lower() == "start" else ends).append(float(value))
        if len(starts) != len(ends):
            raise ValueError(f"{name}: unmatched seizure start/end times")
        out[name] = [(s, e, "sz") for s, e in zip(starts, ends)]
    return out


def discover_chbmit(root: Path) -> list[SourceRun]:
    runs = []
    for subj in _subject_dirs(root):
        seizures: dict = {}
        summaries = sorted(subj.glob("*summary*.txt"))
        for summary in summaries:
            seizures.update(parse_chbmit_summary(summary.read_text(encoding="utf-8", errors="replace")))
        for edf in sorted(subj.glob("*.edf")):
            runs.append(SourceRun(subj.name, edf, seizures.get(edf.name, []), summaries))
    return runs


_SIENA_FIELD = re.compile(r"^\s*(File name|Registration start time|Seizure start time|Seizure end time)\s*:\s*(\S+)", re.I | re.M)


def _clock(text: str) -> timedelta:
    hh, mm, ss = (int(p) for p in re.split(r"[.:]", text))
    return timedelta(hours=hh, minutes=mm, seconds=ss)


def parse_siena_list(text: str) -> dict[str, list[tuple[float, float, str]]]:
    """Seizures per EDF file from a ``Seizures-list-PNxx.txt`` file (clock times, wrapping at midnight)."""
    out: dict[str, list[tuple[float, float, str]]] = {}
    current: dict[str, str] = {}
    day = timedelta(days=1)
    for key, value in _SIENA_FIELD.findall(text):
        key = key.lower()
        if key == "file name":
            current = {"file": value}
            continue
        current[key] = value
        if key == "seizure end time" and {"registration start time", "seizure start time"} <= current.keys():
            reg = _clock(current["registration start time"])
            onset = (_clock(current["seizure start time"]) - reg) % day
            end = (_clock(value) - reg) % day
            if end <= onset:
                end += day
            out.setdefault(current["file"], []).append((onset.total_seconds(), end.total_seconds(), "sz"))
    return out


def discover_siena(root: Path) -> list[SourceRun]:
    runs = []
    for subj in _subject_dirs(root):
        seizures: dict = {}
        lists = sorted(subj.glob("Seizures-list-*.txt"))
        for path in lists:
            seizures.update(parse_siena_list(path.read_text(encoding="utf-8", errors="replace")))
        for edf in sorted(subj.glob("*.edf")):
            runs.append(SourceRun(subj.name, edf, seizures.get(edf.name, []), lists))
    return runs


DISCOVER = {
    "generic": discover_generic,
    "seizeit": discover_generic,
    "tuh": discover_tuh,
    "chbmit": discover_chbmit,
    "siena": discover_siena,
}


# ---------------------------------------------------------------------------
# conversion


def _montage_for(fmt: str) -> str:
    return "bipolar" if fmt == "chbmit" else "average"


def convert_run(fmt: str, source: SourceRun, run_id: RunId, destination: Path) -> dict:
    """Convert one recording; returns its report entry."""
    entry = {
        "source": str(source.edf),
        "subject": source.subject,
        "run": run_id.stem,
        "actions": [],
        "warnings": [],
        "errors": [],
    }
    try:
        if source.error:
            raise ValueError(source.error)
        raw = read_edf_file(source.edf)
        if fmt == "chbmit":
            rec = bipolar_passthrough(raw)
            entry["actions"].append("bipolar passthrough (montage=bipolar)")
            zero_filled: tuple[str, ...] = ()
        else:
            rec = canonicalize(raw, zero_fill_missing=(fmt == "tuh"))
            zero_filled = rec.zero_filled
            entry["actions"].append("renamed, common-average referenced")
            if zero_filled:
                entry["warnings"].append(f"zero-filled missing channels: {', '.join(zero_filled)}")
        if raw.sampling_rate != rec.sampling_rate:
            entry["actions"].append(f"resampled {raw.sampling_rate:g} Hz -> {rec.sampling_rate:g} Hz")

        duration = rec.n_samples / rec.sampling_rate
        events = []
        for onset, end, code in source.seizures:
            end = min(end, duration)
            if end <= onset:
                entry["warnings"].append(f"seizure at {onset} s lies outside the converted recording")
                continue
            events.append(
                ann.Event(onset=onset, duration=end - onset, event_type=code,
                          date_time=rec.start, recording_duration=duration)
            )
        event_list = ann.EventList(rec.start, duration, tuple(events))

        out_dir = destination / run_id.relative_dir()
        out_dir.mkdir(parents=True, exist_ok=True)
        edf_path = out_dir / run_id.filename("eeg", "edf")
        tsv_path = out_dir / run_id.filename("events", "tsv")
        json_path = out_dir / run_id.filename("eeg", "json")
        edf_path.write_bytes(write_edf(rec))
        tsv_path.write_text(ann.serialize_annotation_tsv(event_list, bckg_filler=True), encoding="utf-8")
        sidecar = {
            "TaskName": run_id.task,
            "SamplingFrequency": rec.sampling_rate,
            "EEGReference": "bipolar" if rec.montage == "bipolar" else "average",
            "montage": rec.montage,
            "EEGChannelCount": len(rec.channel_names),
            "RecordingDuration": duration,
            "ZeroFilledChannels": list(zero_filled),
            "SourceFile": source.edf.name,
        }
        json_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        entry["sourceSha256"] = sha256_file(source.edf)
        entry["annotationSha256"] = {p.name: sha256_file(p) for p in source.annotation_files}
        entry["outputs"] = {
            p.name: sha256_file(p) for p in (edf_path, tsv_path, json_path)
        }
        entry["seizures"] = len(events)
        entry["durationSeconds"] = duration
        entry["sourceDurationSeconds"] = raw.duration
    except Exception as exc:  # per-file failure must not stop the dataset
        log.exception("conversion of %s failed", source.edf)
        entry["errors"].append(f"{type(exc).__name__}: {exc}")
    return entry


def _up_to_date(entry: dict | None, source: SourceRun, run_id: RunId, destination: Path) -> bool:
    if not entry or entry.get("errors") or "outputs" not in entry:
        return False
    if entry.get("sourceSha256") != sha256_file(source.edf):
        return False
    if entry.get("annotationSha256") != {p.name: sha256_file(p) for p in source.annotation_files}:
        return False
    out_dir = destination / run_id.relative_dir()
    for name, digest in entry["outputs"].items():
        path = out_dir / name
        if not path.is_file() or sha256_file(path) != digest:
            return False
    return True


def _convert_job(args):
    return convert_run(*args)


def convert_dataset(
    fmt: str,
    source_root,
    destination,
    dataset_name: str | None = None,
    task: str = DEFAULT_TASK,
    workers: int = 1,
) -> dict:
    """Convert a source tree into a canonical BIDS tree and return the conversion report.

    Subjects are renumbered ``01, 02, ...`` in sorted source order, all runs go
    into session ``01`` and are numbered from ``00`` in sorted file order.
    """
    if fmt not in SOURCE_FORMATS:
        raise ValueError(f"unknown source format {fmt!r}; choose from {SOURCE_FORMATS}")
    source_root, destination = Path(source_root), Path(destination)
    destination.mkdir(parents=True, exist_ok=True)
    report_path = destination / REPORT_NAME
    previous = {}
    if report_path.is_file():
        previous = {e["source"]: e for e in json.loads(report_path.read_text())["files"]}

    report = {"sourceFormat": fmt, "montage": _montage_for(fmt), "files": [], "errors": []}
    try:
        sources = DISCOVER[fmt](source_root)
    except Exception as exc:
        report["errors"].append(f"{type(exc).__name__}: {exc}")
        sources = []
    subjects = sorted({s.subject for s in sources})
    sub_ids = {s: f"{i + 1:02d}" for i, s in enumerate(subjects)}
    counters: dict[str, int] = {}
    jobs, kept = [], []
    for src in sources:
        n = counters.get(src.subject, 0)
        counters[src.subject] = n + 1
        rid = RunId(sub_ids[src.subject], "01", f"{n:02d}", task)
        old = previous.get(str(src.edf))
        if _up_to_date(old, src, rid, destination):
            kept.append({**old, "actions": ["unchanged (checksums match)"], "warnings": old.get("warnings", [])})
        else:
            jobs.append((fmt, src, rid, destination))

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_convert_job, jobs))
    else:
        done = [_convert_job(j) for j in jobs]
    report["files"] = sorted(kept + done, key=lambda e: e["run"])

    description = {
        "Name": dataset_name or source_root.name,
        "BIDSVersion": "1.8.0",
        "DatasetType": "raw",
        "SourceFormat": fmt,
    }
    (destination / "dataset_description.json").write_text(
        json.dumps(description, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    lines = ["participant_id\tsource_id"] + [f"sub-{sub_ids[s]}\t{s}" for s in subjects]
    (destination / "participants.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    report["errorCount"] = len(report["errors"]) + sum(len(e["errors"]) for e in report["files"])
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return report

