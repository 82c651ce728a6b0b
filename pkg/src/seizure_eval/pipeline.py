"""Dataset-level operations behind the command line: detect, score and plan."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import annotations as ann
from . import cv
from .baseline import detect
from .bids import DEFAULT_DERIVATIVE, DatasetIndex, derivative_path_for, index_dataset, pair_hypothesis_with_reference
from .edf import read_edf_file
from .reporting import (
    SCHEMA_VERSION,
    ReportError,
    dataset_column,
    dump_structured,
    summarize_dataset,
    summarize_subject,
)
from .scoring import ScoringParams, score_run

log = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    pass


def _montage(entry) -> str:
    data = entry.sidecar_data or {}
    return data.get("montage") or data.get("EEGReference") or "unknown"


# ---------------------------------------------------------------------------
# baseline detection


def _detect_job(args) -> dict:
    entry, out_path, rel_path, threshold, window = args
    result = {"run": entry.run.stem, "output": rel_path.as_posix(), "errors": [], "events": 0}
    try:
        montage = _montage(entry)
        zero_filled = (entry.sidecar_data or {}).get("ZeroFilledChannels", [])
        rec = read_edf_file(entry.eeg)
        ref = ann.read_annotation_file(entry.events)
        intervals = detect(rec, threshold, window, montage=montage, zero_filled=zero_filled)
        dur = ref.recording_duration
        intervals = [(s, min(e, dur)) for s, e in intervals if s < dur]
        hyp = ann.EventList.from_intervals(intervals, ref.date_time, dur)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(ann.serialize_annotation_tsv(hyp, bckg_filler=True), encoding="utf-8")
        result["events"] = len(hyp)
    except Exception as exc:  # reported per run
        result["errors"].append(f"{type(exc).__name__}: {exc}")
    return result


def detect_dataset(
    root, derivative: str = DEFAULT_DERIVATIVE, threshold: float = 2000.0, window: float = 1.0,
    workers: int = 1, task: str = "szMonitoring",
) -> dict:
    index = index_dataset(root, task=task)
    jobs = [
        (
            entry,
            derivative_path_for(entry.run, derivative, index.root),
            derivative_path_for(entry.run, derivative),
            threshold,
            window,
        )
        for entry in index.runs
        if entry.events is not None
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_detect_job, jobs))
    else:
        runs = [_detect_job(j) for j in jobs]
    errors = list(index.errors) + [e for r in runs for e in r["errors"]]
    return {
        "derivative": derivative,
        "threshold": threshold,
        "window": window,
        "runs": runs,
        "errors": errors,
        "warnings": list(index.warnings),
    }


# ---------------------------------------------------------------------------
# scoring


def _score_job(args):
    run_id, ref_path, hyp_path, params, type_filter = args
    ref = ann.read_annotation_file(ref_path)
    if hyp_path is None:
        hyp = ann.EventList(ref.date_time, ref.recording_duration)
    else:
        hyp = ann.read_annotation_file(
            hyp_path, date_time=ref.date_time, recording_duration=ref.recording_duration
        )
    if type_filter:
        ref = ann.events_of_type(ref, type_filter)
    return run_id, score_run(ref, hyp, params)


def score_dataset(
    root,
    derivative: str = DEFAULT_DERIVATIVE,
    params: ScoringParams = ScoringParams(),
    dataset_name: str | None = None,
    scenario: str = "subjectIndependent-single",
    training_dataset: str | None = None,
    type_filter: str | None = None,
    workers: int = 1,
    derivative_root=None,
    task: str = "szMonitoring",
    fold_plan_digests: dict | None = None,
) -> tuple[bytes, list[str]]:
    """Score every run of a dataset; returns the structured result document and error entries.

    Runs without a hypothesis file are scored against an empty hypothesis.
    """
    index = index_dataset(root, task=task)
    pairing = pair_hypothesis_with_reference(index, derivative, derivative_root)
    if not pairing.pairs and not pairing.missing:
        raise PipelineError(f"no scorable runs under {root}")
    jobs = [
        (rid, ref, hyp, params, type_filter)
        for rid, (ref, hyp, _eeg) in zip(pairing.run_ids, pairing.pairs)
    ] + [
        (rid, ref, None, params, type_filter)
        for rid, (ref, _eeg) in zip(pairing.missing_ids, pairing.missing)
    ]
    jobs.sort(key=lambda j: j[0])
    errors = list(index.errors)
    results = []
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_score_job, j) for j in jobs]
            for job, fut in zip(jobs, futures):
                try:
                    results.append(fut.result())
                except Exception as exc:
                    errors.append(f"{job[0].stem}: {type(exc).__name__}: {exc}")
    else:
        for job in jobs:
            try:
                results.append(_score_job(job))
            except Exception as exc:
                errors.append(f"{job[0].stem}: {type(exc).__name__}: {exc}")

    per_subject: dict[str, list] = {}
    run_docs = []
    for rid, (samples, events) in results:
        per_subject.setdefault(rid.subject, []).append((samples, events))
        run_docs.append(
            {
                "run": rid.stem,
                "subject": rid.subject,
                "hypothesisMissing": rid in pairing.missing_ids,
                "sample": samples.as_dict(),
                "event": events.as_dict(),
            }
        )
    if not per_subject:
        raise PipelineError("no run could be scored: " + "; ".join(errors))

    montages = sorted({_montage(e) for e in index.runs})
    montage = montages[0] if len(montages) == 1 else "mixed"
    warnings = list(index.warnings)
    if len(montages) > 1:
        warnings.append(f"recordings use different montages: {montages}")
    if scenario == "subjectIndependent-cross" and montage == "bipolar":
        warnings.append(
            "test recordings use a bipolar montage; the model may have been trained on "
            "common-average data"
        )
    if not dataset_name:
        desc = Path(root) / "dataset_description.json"
        dataset_name = json.loads(desc.read_text())["Name"] if desc.is_file() else Path(root).name
    try:
        result = summarize_dataset(
            dataset_name,
            [summarize_subject(s, runs) for s, runs in sorted(per_subject.items())],
            scenario=scenario,
            training_dataset=training_dataset,
            montage=montage,
            warnings=warnings,
        )
    except ReportError as exc:
        raise PipelineError(str(exc)) from None
    doc = {
        "schemaVersion": SCHEMA_VERSION,
        "type": "datasetResult",
        "datasetColumn": dataset_column(dataset_name),
        "derivative": derivative,
        "typeFilter": type_filter,
        "scoringParams": params.as_dict(),
        "foldPlanDigests": dict(fold_plan_digests or {}),
        "result": result.to_dict(),
        "runs": run_docs,
        "missingHypotheses": [rid.stem for rid in pairing.missing_ids],
        "errors": errors,
    }
    return dump_structured(doc), errors


# ---------------------------------------------------------------------------
# planning


def build_timelines(index: DatasetIndex) -> dict[str, list[cv.TimelineSegment]]:
    timelines: dict[str, list[cv.TimelineSegment]] = {}
    for entry in index.runs:
        if entry.events is None:
            continue
        events = ann.read_annotation_file(entry.events)
        seg = cv.TimelineSegment(
            subject=entry.run.subject,
            run=entry.run.stem,
            start=events.date_time,
            duration=events.recording_duration,
            seizure_onsets=tuple(ev.onset for ev in events.seizures),
        )
        timelines.setdefault(entry.run.subject, []).append(seg)
    return timelines


def plan_dataset(
    root,
    scheme: str,
    k: int | None = None,
    seed: int = 0,
    split: dict | None = None,
    initial_train_hours: float = 5.0,
    step_hours: float = 1.0,
    task: str = "szMonitoring",
) -> tuple[bytes, list[str]]:
    """Build and verify a fold plan; returns the plan document and any violations."""
    index = index_dataset(root, task=task)
    timelines = build_timelines(index)
    subjects = sorted(timelines)
    doc: dict = {"schemaVersion": SCHEMA_VERSION, "type": "foldPlan", "scheme": scheme}
    violations: list[str] = []
    if scheme in ("tscv-variable", "tscv-fixed"):
        mode = scheme.split("-")[1]
        plans, excluded = {}, {}
        for subject in subjects:
            reason = cv.personalized_exclusion_reason(timelines[subject])
            if reason is None:
                try:
                    plan = cv.plan_tscv(
                        timelines[subject], mode, initial_train_hours=initial_train_hours,
                        step_hours=step_hours,
                    )
                except cv.PlanError as exc:
                    reason = str(exc)
            if reason is not None:
                log.info("subject %s excluded from personalized plan: %s", subject, reason)
                excluded[subject] = reason
                continue
            report = cv.verify_plan(plan, cv.PERSONALIZED)
            if not report.ok:
                violations += [f"subject {subject}: {line}" for line in str(report).splitlines()]
            plans[subject] = json.loads(plan.to_json())
        doc["kind"] = cv.PERSONALIZED
        doc["subjects"] = plans
        doc["excluded"] = excluded
    else:
        if scheme == "loo":
            plan = cv.plan_loo(subjects)
        elif scheme == "kfold":
            plan = cv.plan_kfold(subjects, k if k is not None else 5, seed)
        elif scheme == "fixed":
            if split is None:
                raise PipelineError("fixed scheme needs a split mapping")
            plan = cv.plan_fixed(split)
        else:
            raise PipelineError(f"unknown scheme {scheme!r}")
        report = cv.verify_plan(plan, cv.SUBJECT_INDEPENDENT)
        if not report.ok:
            violations += str(report).splitlines()
        doc["kind"] = cv.SUBJECT_INDEPENDENT
        doc["plan"] = json.loads(plan.to_json())
    return dump_structured(doc), violations
