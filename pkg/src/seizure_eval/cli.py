"""Command-line entry point: ``seizure-eval {convert,detect-baseline,score,plan,report}``.

Every subcommand exits with status 0 only when it produced no error entries.
``score`` and ``plan`` accept a JSON run manifest; explicit flags override it.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .bids import DEFAULT_DERIVATIVE, DEFAULT_TASK
from .convert import SOURCE_FORMATS, convert_dataset
from .cv import FoldPlan
from .pipeline import PipelineError, detect_dataset, plan_dataset, score_dataset
from .reporting import (
    SCENARIOS,
    ModelCard,
    ReportError,
    dump_structured,
    emit_checklist,
    emit_model_card,
    load_dataset_result,
)
from .scoring import ScoringParams

log = logging.getLogger("seizure_eval")

EXIT_OK = 0
EXIT_ERRORS = 1
EXIT_USAGE = 2

PLAN_SCHEMES = ("tscv-variable", "tscv-fixed", "loo", "kfold", "fixed")


@dataclass
class RunManifest:
    """Everything needed to reproduce a score or plan invocation."""

    dataset_root: Path
    derivative: str = DEFAULT_DERIVATIVE
    derivative_root: Path | None = None
    dataset_name: str | None = None
    scoring: ScoringParams = field(default_factory=ScoringParams)
    scenario: str = "subjectIndependent-single"
    training_dataset: str | None = None
    type_filter: str | None = None
    plan: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    fold_plans: list[Path] = field(default_factory=list)
    seed: int = 0
    task: str = DEFAULT_TASK

    @classmethod
    def from_dict(cls, d: dict, base: Path = Path(".")) -> RunManifest:
        def path(p):
            return None if p is None else (base / p if not Path(p).is_absolute() else Path(p))

        if "datasetRoot" not in d:
            raise ValueError("manifest lacks datasetRoot")
        scenario = d.get("scenario", "subjectIndependent-single")
        if scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {scenario!r}")
        return cls(
            dataset_root=path(d["datasetRoot"]),
            derivative=d.get("derivative", DEFAULT_DERIVATIVE),
            derivative_root=path(d.get("derivativeRoot")),
            dataset_name=d.get("datasetName"),
            scoring=ScoringParams.from_dict(d.get("scoringParams", {})),
            scenario=scenario,
            training_dataset=d.get("trainingDataset"),
            type_filter=d.get("typeFilter"),
            plan=dict(d.get("plan", {})),
            outputs={k: path(v) for k, v in d.get("outputs", {}).items()},
            fold_plans=[path(p) for p in d.get("foldPlans", [])],
            seed=int(d.get("seed", 0)),
            task=d.get("task", DEFAULT_TASK),
        )

    @classmethod
    def load(cls, path) -> RunManifest:
        path = Path(path)
        manifest = cls.from_dict(json.loads(path.read_text(encoding="utf-8")), path.parent)
        manifest.check_paths()
        return manifest

    def check_paths(self) -> None:
        required = [self.dataset_root, *self.fold_plans]
        if self.derivative_root is not None:
            required.append(self.derivative_root)
        missing = [str(p) for p in required if not p.exists()]
        missing += [
            str(p.parent) for p in self.outputs.values() if p is not None and not p.parent.is_dir()
        ]
        if missing:
            raise FileNotFoundError(f"manifest paths do not exist: {', '.join(missing)}")


def _write(data: bytes, out: Path | None) -> None:
    if out is None:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        out.write_bytes(data)
        log.info("wrote %s", out)


def _report_errors(errors) -> int:
    for e in errors:
        print(f"error: {e}", file=sys.stderr)
    return EXIT_ERRORS if errors else EXIT_OK


# ---------------------------------------------------------------------------
# subcommands


def cmd_convert(args) -> int:
    report = convert_dataset(
        args.format, args.source, args.destination, dataset_name=args.name, task=args.task,
        workers=args.workers,
    )
    n = len(report["files"])
    print(f"converted {n} recording(s) into {args.destination}; {report['errorCount']} error(s)")
    errors = list(report["errors"]) + [
        f"{e['source']}: {msg}" for e in report["files"] for msg in e["errors"]
    ]
    for e in report["files"]:
        for w in e["warnings"]:
            print(f"warning: {e['run']}: {w}", file=sys.stderr)
    return _report_errors(errors)


def cmd_detect(args) -> int:
    report = detect_dataset(
        args.root, derivative=args.derivative, threshold=args.threshold, window=args.window,
        workers=args.workers, task=args.task,
    )
    if args.output:
        args.output.write_bytes(dump_structured(report))
    n = sum(r["events"] for r in report["runs"])
    print(f"{len(report['runs'])} run(s), {n} hypothesis event(s) written to {args.derivative}")
    return _report_errors(report["errors"])


def _scoring_from(args, base: ScoringParams) -> ScoringParams:
    pre = base.pre_ictal_tolerance if args.pre_tol is None else args.pre_tol
    post = base.post_ictal_tolerance if args.post_tol is None else args.post_tol
    if args.merge_gap is not None:
        gap = args.merge_gap
    elif args.pre_tol is None and args.post_tol is None:
        gap = base.merge_gap
    else:
        gap = None
    return ScoringParams(
        pre_ictal_tolerance=pre,
        post_ictal_tolerance=post,
        merge_gap=gap,
        max_event_duration=base.max_event_duration if args.max_event_dur is None else args.max_event_dur,
        min_overlap=base.min_overlap if args.min_overlap is None else args.min_overlap,
    )


def _manifest_from(args) -> RunManifest:
    if args.manifest is not None:
        manifest = RunManifest.load(args.manifest)
    elif args.root is not None:
        manifest = RunManifest(dataset_root=args.root)
    else:
        raise ValueError("give a dataset root or --manifest")
    if args.root is not None:
        manifest.dataset_root = args.root
    for attr in ("derivative", "dataset_name", "scenario", "training_dataset", "type_filter", "task"):
        value = getattr(args, attr, None)
        if value is not None:
            setattr(manifest, attr, value)
    if getattr(args, "seed", None) is not None:
        manifest.seed = args.seed
    return manifest


def cmd_score(args) -> int:
    manifest = _manifest_from(args)
    if args.derivative_root is not None:
        manifest.derivative_root = args.derivative_root
    if args.fold_plan:
        manifest.fold_plans = list(args.fold_plan)
    params = _scoring_from(args, manifest.scoring)
    digests = {}
    for path in manifest.fold_plans:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        plans = {"": doc["plan"]} if "plan" in doc else {f"/{s}": p for s, p in doc.get("subjects", {}).items()}
        for suffix, plan in sorted(plans.items()):
            digests[Path(path).name + suffix] = FoldPlan.from_json(json.dumps(plan)).digest()
    document, errors = score_dataset(
        manifest.dataset_root,
        derivative=manifest.derivative,
        params=params,
        dataset_name=manifest.dataset_name,
        scenario=manifest.scenario,
        training_dataset=manifest.training_dataset,
        type_filter=manifest.type_filter,
        workers=args.workers,
        derivative_root=manifest.derivative_root,
        task=manifest.task,
        fold_plan_digests=digests,
    )
    _write(document, args.output or manifest.outputs.get("score"))
    return _report_errors(errors)


def cmd_plan(args) -> int:
    manifest = _manifest_from(args)
    plan = dict(manifest.plan)
    scheme = args.scheme or plan.get("scheme")
    if scheme is None:
        raise ValueError("no plan scheme given")
    split = plan.get("split")
    if args.split is not None:
        split = json.loads(args.split.read_text(encoding="utf-8"))
    document, violations = plan_dataset(
        manifest.dataset_root,
        scheme,
        k=args.k if args.k is not None else plan.get("k"),
        seed=manifest.seed,
        split=split,
        initial_train_hours=plan.get("initialTrainHours", 5.0) if args.initial_train_hours is None else args.initial_train_hours,
        step_hours=plan.get("stepHours", 1.0) if args.step_hours is None else args.step_hours,
        task=manifest.task,
    )
    if violations:
        print("fold plan failed verification; nothing written", file=sys.stderr)
        return _report_errors(violations)
    excluded = json.loads(document).get("excluded", {})
    for subject, reason in sorted(excluded.items()):
        print(f"excluded subject {subject}: {reason}", file=sys.stderr)
    _write(document, args.output or manifest.outputs.get("plan"))
    return EXIT_OK


def cmd_report(args) -> int:
    info = {}
    if args.card_info is not None:
        info = json.loads(args.card_info.read_text(encoding="utf-8"))
    results, scoring, digests = [], None, {}
    for path in args.results:
        raw = path.read_bytes()
        doc = json.loads(raw)
        results.append(load_dataset_result(raw))
        if scoring is None:
            scoring = doc.get("scoringParams")
        elif doc.get("scoringParams") != scoring:
            print(f"warning: {path} was scored with different parameters", file=sys.stderr)
        digests.update(doc.get("foldPlanDigests", {}))
    card = ModelCard(
        model_name=args.model_name or info.get("modelName", "unnamed model"),
        developers=info.get("developers", ""),
        institution=info.get("institution", ""),
        email=info.get("email", ""),
        source_link=info.get("sourceLink", ""),
        citation=info.get("citation", ""),
        description=info.get("description", ""),
        results=results,
        scoring_params=scoring,
        fold_plan_digests=digests,
    )
    _write(emit_model_card(card, args.format), args.output)
    if args.checklist is not None:
        answers = json.loads(args.checklist.read_text(encoding="utf-8"))
        _write(emit_checklist(answers), args.checklist_output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seizure-eval", description="Seizure detection evaluation tools.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert a source dataset into a canonical BIDS tree")
    p.add_argument("format", choices=SOURCE_FORMATS)
    p.add_argument("source", type=Path)
    p.add_argument("destination", type=Path)
    p.add_argument("--name", help="dataset name stored in dataset_description.json")
    p.add_argument("--task", default=DEFAULT_TASK)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("detect-baseline", help="write line-length threshold detections as a derivative")
    p.add_argument("root", type=Path)
    p.add_argument("--derivative", default=DEFAULT_DERIVATIVE)
    p.add_argument("--threshold", type=float, default=2000.0, help="line length in uV/s (default 2000)")
    p.add_argument("--window", type=float, default=1.0, help="window length in s (default 1)")
    p.add_argument("--task", default=DEFAULT_TASK)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--output", type=Path, help="write the detection report here")
    p.set_defaults(func=cmd_detect)

    defaults = ScoringParams()
    p = sub.add_parser("score", help="score a derivative against the reference annotations")
    p.add_argument("root", type=Path, nargs="?")
    p.add_argument("--manifest", type=Path)
    p.add_argument("--derivative")
    p.add_argument("--derivative-root", type=Path)
    p.add_argument("--dataset-name")
    p.add_argument("--scenario", choices=SCENARIOS)
    p.add_argument("--training-dataset")
    p.add_argument("--type", dest="type_filter", help="score only reference events of this type")
    p.add_argument("--task")
    p.add_argument("--pre-tol", type=float, help=f"pre-ictal tolerance s (default {defaults.pre_ictal_tolerance:g})")
    p.add_argument("--post-tol", type=float, help=f"post-ictal tolerance s (default {defaults.post_ictal_tolerance:g})")
    p.add_argument("--merge-gap", type=float, help="merge gap s (default pre + post tolerance)")
    p.add_argument("--max-event-dur", type=float, help=f"split length s (default {defaults.max_event_duration:g})")
    p.add_argument("--min-overlap", type=float, help=f"minimum overlap s (default {defaults.min_overlap:g})")
    p.add_argument("--fold-plan", type=Path, action="append", help="plan file whose digest is recorded")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--output", type=Path)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("plan", help="write a verified cross-validation fold plan")
    p.add_argument("root", type=Path, nargs="?")
    p.add_argument("--manifest", type=Path)
    p.add_argument("--scheme", choices=PLAN_SCHEMES)
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--split", type=Path, help='JSON mapping subject -> "train" | "test"')
    p.add_argument("--initial-train-hours", type=float)
    p.add_argument("--step-hours", type=float)
    p.add_argument("--task")
    p.add_argument("-o", "--output", type=Path)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("report", help="build a model card from dataset result documents")
    p.add_argument("results", type=Path, nargs="+")
    p.add_argument("--model-name")
    p.add_argument("--card-info", type=Path, help="JSON with contact and model details")
    p.add_argument("--format", choices=("structured", "human"), default="structured")
    p.add_argument("-o", "--output", type=Path)
    p.add_argument("--checklist", type=Path, help="JSON answers for the reproducibility checklist")
    p.add_argument("--checklist-output", type=Path)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (PipelineError, ReportError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
