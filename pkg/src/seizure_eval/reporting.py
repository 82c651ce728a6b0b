"""Per-subject and per-dataset summaries, model cards and the reproducibility checklist."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .scoring import EVENT, SAMPLE, Metrics, ScoreCounts, aggregate_counts, compute_metrics

SCHEMA_VERSION = 1
SCENARIOS = ("personalized", "subjectIndependent-single", "subjectIndependent-cross")
METRIC_NAMES = ("f1", "sensitivity", "precision", "fpPerDay")
KINDS = (EVENT, SAMPLE)
STANDARD_DATASETS = ("CHB-MIT", "TUH", "Siena", "SeizeIT")
_ALIASES = {"chbmit": "CHB-MIT", "tuh": "TUH", "tusz": "TUH", "siena": "Siena", "seizeit": "SeizeIT", "seizeit1": "SeizeIT"}
NOT_EVALUATED = "-"
UNDEFINED = "n/a"


class ReportError(ValueError):
    pass


def dataset_column(name: str) -> str:
    key = re.sub(r"[^a-z0-9]", "", name.lower())
    return _ALIASES.get(key, name)


@dataclass(frozen=True)
class SubjectResult:
    subject: str
    sample_counts: ScoreCounts
    event_counts: ScoreCounts

    @property
    def sample_metrics(self) -> Metrics:
        return compute_metrics(self.sample_counts)

    @property
    def event_metrics(self) -> Metrics:
        return compute_metrics(self.event_counts)

    def metrics(self, kind: str) -> Metrics:
        return self.event_metrics if kind == EVENT else self.sample_metrics

    def counts(self, kind: str) -> ScoreCounts:
        return self.event_counts if kind == EVENT else self.sample_counts

    def to_dict(self) -> dict:
        return {
            "subject": self.subject,
            "sample": {"counts": self.sample_counts.as_dict(), "metrics": self.sample_metrics.as_dict()},
            "event": {"counts": self.event_counts.as_dict(), "metrics": self.event_metrics.as_dict()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> SubjectResult:
        return cls(
            d["subject"],
            ScoreCounts.from_dict(d["sample"]["counts"]),
            ScoreCounts.from_dict(d["event"]["counts"]),
        )


def summarize_subject(subject: str, runs: Sequence[tuple[ScoreCounts, ScoreCounts]]) -> SubjectResult:
    """Sum run counts per scoring mode; metrics are derived from the sums."""
    if not runs:
        raise ReportError(f"subject {subject} has no scored runs")
    samples = aggregate_counts(r[0] for r in runs)
    events = aggregate_counts(r[1] for r in runs)
    if samples.kind not in (SAMPLE, None) or events.kind not in (EVENT, None):
        raise ReportError("runs must be (sample counts, event counts) pairs")
    return SubjectResult(subject, samples, events)


@dataclass(frozen=True)
class DatasetResult:
    dataset: str
    per_subject: tuple[SubjectResult, ...]
    scenario: str = "subjectIndependent-single"
    training_dataset: str | None = None
    montage: str = "average"
    # kind -> metric -> value (None when no subject has it defined)
    overall: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)
    weighted: dict = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "scenario": self.scenario,
            "trainingDataset": self.training_dataset,
            "montage": self.montage,
            "overall": self.overall,
            "skippedUndefined": self.skipped,
            "durationWeighted": self.weighted,
            "perSubject": [s.to_dict() for s in self.per_subject],
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> DatasetResult:
        return summarize_dataset(
            d["dataset"],
            [SubjectResult.from_dict(s) for s in d["perSubject"]],
            scenario=d["scenario"],
            training_dataset=d.get("trainingDataset"),
            montage=d.get("montage", "average"),
            warnings=d.get("warnings", ()),
        )


def summarize_dataset(
    dataset: str,
    subjects: Sequence[SubjectResult],
    scenario: str = "subjectIndependent-single",
    training_dataset: str | None = None,
    montage: str = "average",
    warnings: Iterable[str] = (),
) -> DatasetResult:
    """Unweighted mean over subjects of each defined metric.

    Subjects whose metric is undefined are left out of that mean and counted in
    ``skipped``. Means weighted by each subject's scored duration are kept as a
    supplement.
    """
    if not subjects:
        raise ReportError(f"dataset {dataset} has no subjects")
    if scenario not in SCENARIOS:
        raise ReportError(f"unknown scenario {scenario!r}")
    if scenario == "subjectIndependent-cross" and not training_dataset:
        raise ReportError("cross-dataset results need a training dataset")
    overall, skipped, weighted = {}, {}, {}
    for kind in KINDS:
        overall[kind], skipped[kind], weighted[kind] = {}, {}, {}
        for name in METRIC_NAMES:
            pairs = [
                (s.metrics(kind).as_dict()[name], s.counts(kind).total_duration) for s in subjects
            ]
            defined = [(v, w) for v, w in pairs if v is not None]
            skipped[kind][name] = len(pairs) - len(defined)
            overall[kind][name] = sum(v for v, _ in defined) / len(defined) if defined else None
            total_w = sum(w for _, w in defined)
            weighted[kind][name] = sum(v * w for v, w in defined) / total_w if total_w > 0 else None
    return DatasetResult(
        dataset=dataset,
        per_subject=tuple(sorted(subjects, key=lambda s: s.subject)),
        scenario=scenario,
        training_dataset=training_dataset,
        montage=montage,
        overall=overall,
        skipped=skipped,
        weighted=weighted,
        warnings=tuple(warnings),
    )


def dump_structured(doc: dict) -> bytes:
    return (json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8")


def dataset_result_document(result: DatasetResult, scoring: dict | None = None, plans: Mapping[str, str] | None = None) -> bytes:
    doc = {
        "schemaVersion": SCHEMA_VERSION,
        "type": "datasetResult",
        "result": result.to_dict(),
        "scoringParams": scoring,
        "foldPlanDigests": dict(plans or {}),
    }
    return dump_structured(doc)


def load_dataset_result(content: bytes | str) -> DatasetResult:
    doc = json.loads(content)
    if doc.get("type") != "datasetResult":
        raise ReportError("not a dataset result document")
    return DatasetResult.from_dict(doc["result"])


# ---------------------------------------------------------------------------
# model card


@dataclass
class ModelCard:
    model_name: str
    developers: str = ""
    institution: str = ""
    email: str = ""
    source_link: str = ""
    citation: str = ""
    description: str = ""
    results: list[DatasetResult] = field(default_factory=list)
    scoring_params: dict | None = None
    fold_plan_digests: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schemaVersion": SCHEMA_VERSION,
            "type": "modelCard",
            "modelName": self.model_name,
            "contact": {
                "developers": self.developers,
                "institution": self.institution,
                "email": self.email,
            },
            "modelDetails": {
                "sourceLink": self.source_link,
                "citation": self.citation,
                "description": self.description,
            },
            "scoringParams": self.scoring_params,
            "foldPlanDigests": dict(self.fold_plan_digests),
            "results": [r.to_dict() for r in self.results],
        }

    @classmethod
    def from_dict(cls, d: dict) -> ModelCard:
        if d.get("schemaVersion") != SCHEMA_VERSION or d.get("type") != "modelCard":
            raise ReportError("unsupported model card document")
        return cls(
            model_name=d["modelName"],
            developers=d["contact"]["developers"],
            institution=d["contact"]["institution"],
            email=d["contact"]["email"],
            source_link=d["modelDetails"]["sourceLink"],
            citation=d["modelDetails"]["citation"],
            description=d["modelDetails"]["description"],
            results=[DatasetResult.from_dict(r) for r in d["results"]],
            scoring_params=d.get("scoringParams"),
            fold_plan_digests=d.get("foldPlanDigests", {}),
        )


def parse_model_card(content: bytes | str) -> ModelCard:
    return ModelCard.from_dict(json.loads(content))


def format_metric(name: str, value: float | None) -> str:
    if value is None:
        return UNDEFINED
    if name == "fpPerDay":
        return f"{value:.2f}"
    return f"{100 * value:.1f}"


_ROW_LABELS = {"f1": "F1-score", "sensitivity": "Sensitivity", "precision": "Precision", "fpPerDay": "FP/day"}
_SECTION_TITLES = {
    "personalized": "Subject-specific models",
    "subjectIndependent-single": "Subject-independent models, cross-validated within one dataset",
    "subjectIndependent-cross": "Subject-independent models, trained on a different dataset",
}


def _render_table(rows: list[list[str]]) -> list[str]:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for j, row in enumerate(rows):
        lines.append(" | ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if j == 1:
            lines.append("-+-".join("-" * w for w in widths))
    return lines


def _section(scenario: str, results: list[DatasetResult], columns: list[str]) -> list[str]:
    cross = scenario == "subjectIndependent-cross"
    lead = ["Training", "Metric"] if cross else ["Metric"]
    head1 = [""] * len(lead) + ["Event-based"] + [""] * (len(columns) - 1) + ["Sample-based"] + [""] * (len(columns) - 1)
    head2 = lead + columns + columns
    rows = [head1, head2]
    groups = sorted({r.training_dataset or "" for r in results}) if cross else [None]
    if cross and not groups:
        groups = [""]
    for group in groups:
        by_col = {
            dataset_column(r.dataset): r
            for r in results
            if not cross or (r.training_dataset or "") == group
        }
        for k, name in enumerate(METRIC_NAMES):
            row = ([group if k == 0 else ""] if cross else []) + [_ROW_LABELS[name]]
            for kind in KINDS:
                for col in columns:
                    res = by_col.get(col)
                    if res is None or (scenario == "personalized" and col == "TUH"):
                        row.append(NOT_EVALUATED)
                    else:
                        row.append(format_metric(name, res.overall[kind][name]))
            rows.append(row)
    return [_SECTION_TITLES[scenario], ""] + _render_table(rows)


def render_model_card(card: ModelCard) -> str:
    extra = sorted({dataset_column(r.dataset) for r in card.results} - set(STANDARD_DATASETS))
    columns = list(STANDARD_DATASETS) + extra
    lines = [
        f"Model card: {card.model_name}",
        "",
        "Contact details",
        f"  Developers:     {card.developers}",
        f"  Institution:    {card.institution}",
        f"  Contact email:  {card.email}",
        "",
        "Model details",
        f"  Source code:    {card.source_link}",
        f"  Citation:       {card.citation}",
        f"  Description:    {card.description}",
        "",
        "Results (percentages except FP/day; '-' not evaluated, 'n/a' undefined)",
        "",
    ]
    for scenario in SCENARIOS:
        lines += _section(scenario, [r for r in card.results if r.scenario == scenario], columns)
        lines.append("")
    montages = sorted({(dataset_column(r.dataset), r.montage) for r in card.results if r.montage != "average"})
    for col, montage in montages:
        lines.append(f"Note: {col} evaluated with montage={montage}")
    if card.scoring_params:
        params = ", ".join(f"{k}={v}" for k, v in sorted(card.scoring_params.items()))
        lines.append(f"Scoring parameters: {params}")
    return "\n".join(lines).rstrip() + "\n"


def emit_model_card(card: ModelCard, fmt: str = "structured") -> bytes:
    """Serialize ``card`` as a versioned JSON document or as a plain-text table."""
    if not card.results:
        raise ReportError("model card has no results")
    if fmt == "structured":
        return dump_structured(card.to_dict())
    if fmt in ("human", "humanReadable", "text"):
        return render_model_card(card).encode("utf-8")
    raise ValueError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# reproducibility checklist

CHECKLIST: dict[str, tuple[tuple[str, str], ...]] = {
    "Models and algorithms": (
        ("models.description", "Mathematical setting, algorithm and model with assumptions and parameters"),
        ("models.input", "Input data: sampling frequency and channel count"),
        ("models.complexity", "Time, space and sample-size complexity"),
    ),
    "Datasets": (
        ("datasets.description", "Subjects, seizures, seizure types and recording duration"),
        ("datasets.splits", "Train/validation/test splits respecting subject independence and chronology"),
        ("datasets.exclusions", "Excluded data and every pre-processing step"),
        ("datasets.link", "Download link"),
        ("datasets.collection", "For new data: collection process, annotation protocol, quality control, BIDS-EEG/HED-SCORE version"),
    ),
    "Code": (
        ("code.dependencies", "Dependency list with pinned versions"),
        ("code.training", "Training code"),
        ("code.evaluation", "Evaluation code"),
        ("code.models", "(Pre-)trained models"),
        ("code.readme", "README with results table and the exact commands that produce it"),
    ),
    "Experimental results": (
        ("results.hyperparameters", "Hyper-parameter ranges, selection method and final values"),
        ("results.runs", "Number of training and evaluation runs"),
        ("results.statistics", "Definition of the reported measures and statistics"),
        ("results.metrics", "Sensitivity, precision, F1-score and false alarms per day"),
        ("results.public_datasets", "Results on the public CHB-MIT, TUH, Siena and SeizeIT1 datasets"),
        ("results.runtime", "Average runtime or energy cost"),
        ("results.infrastructure", "Computing infrastructure"),
    ),
}
CHECKLIST_KEYS = tuple(key for items in CHECKLIST.values() for key, _ in items)


def _answer(value) -> tuple[bool, str]:
    if isinstance(value, bool):
        return value, ""
    if isinstance(value, str):
        return bool(value.strip()), value.strip()
    if isinstance(value, Mapping):
        return bool(value.get("done")), str(value.get("note", ""))
    done, note = value
    return bool(done), str(note)


def emit_checklist(answers: Mapping[str, object]) -> bytes:
    """Render the checklist; answers map item keys to a bool, a note, or ``(done, note)``."""
    unknown = sorted(set(answers) - set(CHECKLIST_KEYS))
    if unknown:
        raise ReportError(f"unknown checklist item(s): {', '.join(unknown)}")
    lines = ["Reproducibility checklist", ""]
    missing = 0
    for section, items in CHECKLIST.items():
        lines.append(section)
        for key, text in items:
            done, note = _answer(answers[key]) if key in answers else (False, "")
            missing += not done
            mark = "[x]" if done else "[ ]"
            lines.append(f"  {mark} {text} ({key})" + (f" - {note}" if note else ""))
        lines.append("")
    lines.append(f"Completed: {len(CHECKLIST_KEYS) - missing}/{len(CHECKLIST_KEYS)}; missing: {missing}")
    return ("\n".join(lines) + "\n").encode("utf-8")
