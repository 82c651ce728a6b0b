"""BIDS-EEG layout: indexing dataset trees and locating derivative annotation files."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

DEFAULT_TASK = "szMonitoring"
DEFAULT_DERIVATIVE = "szDetection"

_NAME = re.compile(
    r"^sub-(?P<subject>[A-Za-z0-9]+)_ses-(?P<session>[A-Za-z0-9]+)"
    r"_task-(?P<task>[A-Za-z0-9]+)_run-(?P<run>\d+)_(?P<suffix>eeg|events)\.(?P<ext>edf|json|tsv)$"
)


@dataclass(frozen=True, order=True)
class RunId:
    subject: str
    session: str
    run: str
    task: str = DEFAULT_TASK

    @property
    def stem(self) -> str:
        return f"sub-{self.subject}_ses-{self.session}_task-{self.task}_run-{self.run}"

    def relative_dir(self) -> Path:
        return Path(f"sub-{self.subject}", f"ses-{self.session}", "eeg")

    def filename(self, suffix: str, ext: str) -> str:
        return f"{self.stem}_{suffix}.{ext}"


def parse_bids_name(name: str) -> tuple[RunId, str, str] | None:
    """Split a BIDS file name into (run id, suffix, extension), or None if it does not match."""
    m = _NAME.match(name)
    if m is None:
        return None
    rid = RunId(m["subject"], m["session"], m["run"], m["task"])
    return rid, m["suffix"], m["ext"]


@dataclass(frozen=True)
class RunEntry:
    run: RunId
    eeg: Path
    events: Path | None
    sidecar: Path | None
    sidecar_data: dict | None = None


@dataclass
class DatasetIndex:
    root: Path
    runs: list[RunEntry] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    @property
    def subjects(self) -> list[str]:
        return sorted({r.run.subject for r in self.runs})

    def sessions(self, subject: str) -> list[str]:
        return sorted({r.run.session for r in self.runs if r.run.subject == subject})

    def runs_of(self, subject: str, session: str | None = None) -> list[RunEntry]:
        return [
            r
            for r in self.runs
            if r.run.subject == subject and (session is None or r.run.session == session)
        ]


def index_dataset(root, task: str = DEFAULT_TASK) -> DatasetIndex:
    """Index every ``sub-*/ses-*/eeg/*_eeg.edf`` recording under ``root``.

    Problems never abort indexing: a missing ``dataset_description.json`` or an
    unparseable file name is a warning, a recording without its events file or
    a malformed sidecar is an error entry. Runs with errors stay indexed.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} does not exist")
    index = DatasetIndex(root=root)
    if not (root / "dataset_description.json").is_file():
        index.warnings.append(f"{root}: missing dataset_description.json")

    for eeg_dir in sorted(root.glob("sub-*/ses-*/eeg")):
        for path in sorted(eeg_dir.iterdir()):
            parsed = parse_bids_name(path.name)
            if parsed is None:
                index.warnings.append(f"{path}: file name does not follow the BIDS pattern")
                continue
            rid, suffix, ext = parsed
            if (suffix, ext) != ("eeg", "edf"):
                continue
            if rid.task != task:
                index.warnings.append(f"{path}: task {rid.task!r} is not {task!r}")
                continue
            if path.parent.relative_to(root) != rid.relative_dir():
                index.warnings.append(f"{path}: stored outside {rid.relative_dir()}")
            events = path.with_name(rid.filename("events", "tsv"))
            sidecar = path.with_name(rid.filename("eeg", "json"))
            sidecar_data = None
            if not events.is_file():
                index.errors.append(f"{path}: no matching events file {events.name}")
                events = None
            if sidecar.is_file():
                try:
                    sidecar_data = json.loads(sidecar.read_text(encoding="utf-8"))
                except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                    index.errors.append(f"{sidecar}: malformed JSON ({exc})")
            else:
                sidecar = None
            index.runs.append(RunEntry(rid, path, events, sidecar, sidecar_data))

    if not index.runs:
        index.warnings.append(f"{root}: no recordings found")
    index.runs.sort(key=lambda r: r.run)
    return index


def derivative_path_for(run: RunId, derivative_name: str = DEFAULT_DERIVATIVE, root=None) -> Path:
    """Where a detector's events file for ``run`` lives, relative to ``root`` if given."""
    rel = Path(derivative_name, f"sub-{run.subject}", f"ses-{run.session}", run.filename("events", "tsv"))
    return Path(root) / rel if root is not None else rel


def index_derivative(root, derivative_name: str = DEFAULT_DERIVATIVE) -> dict[RunId, Path]:
    """Map run ids to the events files found in a derivative folder."""
    base = Path(root) / derivative_name
    found: dict[RunId, Path] = {}
    for path in sorted(base.glob("sub-*/ses-*/*_events.tsv")):
        parsed = parse_bids_name(path.name)
        if parsed is None:
            continue
        rid = parsed[0]
        if derivative_path_for(rid, derivative_name, root) == path:
            found[rid] = path
    return found


@dataclass(frozen=True)
class Pairing:
    pairs: list[tuple[Path, Path, Path]]
    # runs without a hypothesis file: (reference events, recording)
    missing: list[tuple[Path, Path]]
    run_ids: list[RunId]
    missing_ids: list[RunId]


def pair_hypothesis_with_reference(
    index: DatasetIndex, derivative_name: str = DEFAULT_DERIVATIVE, derivative_root=None
) -> Pairing:
    """Match each indexed run's reference events file with its detector output.

    Runs without a reference events file are skipped (they are already error
    entries in the index). ``derivative_root`` defaults to the dataset root.
    """
    hyp = index_derivative(derivative_root or index.root, derivative_name)
    pairs, missing, ids, missing_ids = [], [], [], []
    for entry in index.runs:
        if entry.events is None:
            continue
        if entry.run in hyp:
            pairs.append((entry.events, hyp[entry.run], entry.eeg))
            ids.append(entry.run)
        else:
            missing.append((entry.events, entry.eeg))
            missing_ids.append(entry.run)
    return Pairing(pairs, missing, ids, missing_ids)
