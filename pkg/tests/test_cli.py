import json
import shutil
from datetime import datetime, timedelta

import pytest

from seizure_eval import annotations as ann
from seizure_eval import cv
from seizure_eval.bids import RunId, derivative_path_for
from seizure_eval.cli import RunManifest, main

HOUR = 3600.0
T0 = datetime(2020, 3, 1, 8, 0, 0)


def add_run(root, rid, start, duration, seizures=(), hypothesis=None):
    folder = root / rid.relative_dir()
    folder.mkdir(parents=True, exist_ok=True)
    (folder / rid.filename("eeg", "edf")).write_bytes(b"")
    events = tuple(ann.Event(o, d, "sz", start, duration) for o, d in seizures)
    ref = ann.EventList(start, duration, events)
    ann.write_annotation_file(folder / rid.filename("events", "tsv"), ref, bckg_filler=True)
    if hypothesis is not None:
        path = derivative_path_for(rid, "szDetection", root)
        path.parent.mkdir(parents=True, exist_ok=True)
        hyp = ann.EventList(start, duration, tuple(ann.Event(o, d, "sz", start, duration) for o, d in hypothesis))
        ann.write_annotation_file(path, hyp)


def small_dataset(root, hypothesis="same"):
    (root).mkdir(parents=True, exist_ok=True)
    (root / "dataset_description.json").write_text(json.dumps({"Name": "Siena"}))
    layout = {"01": [[(100, 40)], []], "02": [[(10, 5), (900, 60)]], "03": [[], [(2000, 90)]]}
    for subject, runs in layout.items():
        for r, seizures in enumerate(runs):
            hyp = seizures if hypothesis == "same" else None
            add_run(root, RunId(subject, "01", f"{r:02d}"), T0 + timedelta(hours=r), 3600.0, seizures, hyp)
    return root


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


# ---------------------------------------------------------------------------
# score


def test_score_identity(tmp_path, capsys):
    root = small_dataset(tmp_path / "ds")
    code, out, _ = run(["score", root], capsys)
    assert code == 0
    doc = json.loads(out)
    overall = doc["result"]["overall"]
    assert overall["event"]["f1"] == 1.0 and overall["sample"]["f1"] == 1.0
    assert overall["event"]["sensitivity"] == 1.0
    assert all(r["event"]["fp"] == 0 for r in doc["runs"])
    assert doc["result"]["dataset"] == "Siena" and doc["type"] == "datasetResult"


def test_score_empty_derivative(tmp_path, capsys):
    root = small_dataset(tmp_path / "ds", hypothesis=None)
    (root / "szDetection").mkdir()
    code, out, _ = run(["score", root], capsys)
    assert code == 0
    doc = json.loads(out)
    assert len(doc["missingHypotheses"]) == 5
    for subject in doc["result"]["perSubject"]:
        assert subject["event"]["counts"]["fp"] == 0
        assert subject["event"]["counts"]["tp"] == 0
    assert doc["result"]["overall"]["event"]["sensitivity"] == 0.0


def test_score_matches_golden_file(fixtures_dir, tmp_path, capsys):
    out = tmp_path / "score.json"
    code, _, _ = run(["score", fixtures_dir / "golden_bids", "-o", out], capsys)
    assert code == 0
    doc = json.loads(out.read_text())
    golden = json.loads((fixtures_dir / "golden_score.json").read_text())
    got = {
        r["run"]: {kind: {k: r[kind][k] for k in ("tp", "fp", "fn")} for kind in ("event", "sample")}
        for r in doc["runs"]
    }
    assert got == golden["runs"]
    subjects = {
        s["subject"]: {kind: {k: s[kind]["counts"][k] for k in ("tp", "fp", "fn")} for kind in ("event", "sample")}
        for s in doc["result"]["perSubject"]
    }
    assert subjects == golden["subjects"]


def test_score_flags_change_params(tmp_path, capsys):
    root = small_dataset(tmp_path / "ds")
    code, out, _ = run(["score", root, "--pre-tol", "10", "--post-tol", "20", "--min-overlap", "1"], capsys)
    assert code == 0
    params = json.loads(out)["scoringParams"]
    assert params["preIctalTolerance"] == 10 and params["mergeGap"] == 30 and params["minOverlap"] == 1


def test_score_without_runs(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    code, _, err = run(["score", tmp_path / "empty"], capsys)
    assert code == 2 and "error" in err


def test_score_reports_unreadable_runs(tmp_path, capsys):
    root = small_dataset(tmp_path / "ds")
    broken = derivative_path_for(RunId("01", "01", "00"), "szDetection", root)
    broken.write_text("onset\tnonsense\n")
    code, out, err = run(["score", root, "-o", tmp_path / "out.json"], capsys)
    assert code == 1
    assert "sub-01_ses-01_task-szMonitoring_run-00" in err


def test_score_with_manifest(tmp_path, capsys):
    root = small_dataset(tmp_path / "ds")
    plan = tmp_path / "plan.json"
    assert run(["plan", root, "--scheme", "loo", "-o", plan], capsys)[0] == 0
    manifest = tmp_path / "run.json"
    manifest.write_text(
        json.dumps(
            {
                "datasetRoot": "ds",
                "datasetName": "CHB-MIT",
                "scoringParams": {"minOverlap": 0.5},
                "foldPlans": ["plan.json"],
                "outputs": {"score": "score.json"},
            }
        )
    )
    code, _, _ = run(["score", "--manifest", manifest], capsys)
    assert code == 0
    doc = json.loads((tmp_path / "score.json").read_text())
    assert doc["result"]["dataset"] == "CHB-MIT"
    assert doc["scoringParams"]["minOverlap"] == 0.5
    assert list(doc["foldPlanDigests"]) == ["plan.json"]


def test_manifest_with_missing_paths(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"datasetRoot": "nowhere"}))
    with pytest.raises(FileNotFoundError):
        RunManifest.load(path)
    assert main(["score", "--manifest", str(path)]) == 2


# ---------------------------------------------------------------------------
# plan


def subjects_dataset(root, n):
    for i in range(n):
        add_run(root, RunId(f"{i + 1:02d}", "01", "00"), T0, HOUR, [(100, 10)])
    return root


def test_plan_loo(tmp_path, capsys):
    root = subjects_dataset(tmp_path / "ds", 5)
    code, out, _ = run(["plan", root, "--scheme", "loo"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["type"] == "foldPlan" and len(doc["plan"]["folds"]) == 5


def test_plan_kfold_is_deterministic(tmp_path, capsys):
    root = subjects_dataset(tmp_path / "ds", 7)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert run(["plan", root, "--scheme", "kfold", "--k", "3", "--seed", "42", "-o", out], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    sizes = sorted(len(f["test"]) for f in json.loads(a.read_text())["plan"]["folds"])
    assert sizes == [2, 2, 3]


def test_plan_personalized_exclusion(tmp_path, capsys):
    root = tmp_path / "ds"
    add_run(root, RunId("01", "01", "00"), T0, 10 * HOUR, [(HOUR, 30), (7 * HOUR, 30)])
    add_run(root, RunId("02", "01", "00"), T0, 10 * HOUR, [(HOUR, 30), (6 * HOUR, 30), (8 * HOUR, 30)])
    code, out, err = run(["plan", root, "--scheme", "tscv-variable"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert "2 seizures" in doc["excluded"]["01"]
    assert "excluded subject 01" in err
    assert list(doc["subjects"]) == ["02"]
    assert len(doc["subjects"]["02"]["folds"]) == 5


def test_plan_fixed_split(tmp_path, capsys):
    root = subjects_dataset(tmp_path / "ds", 3)
    split = tmp_path / "split.json"
    split.write_text(json.dumps({"01": "train", "02": "train", "03": "test"}))
    code, out, _ = run(["plan", root, "--scheme", "fixed", "--split", split], capsys)
    assert code == 0
    assert len(json.loads(out)["plan"]["folds"]) == 1


def test_plan_verification_failure_aborts(tmp_path, capsys, monkeypatch):
    root = subjects_dataset(tmp_path / "ds", 3)
    bad = cv.FoldPlan("loo", cv.SUBJECT_INDEPENDENT, (cv.Fold((cv.Region("01"),), (cv.Region("01"),)),))
    monkeypatch.setattr(cv, "plan_loo", lambda subjects: bad)
    out = tmp_path / "plan.json"
    code, _, err = run(["plan", root, "--scheme", "loo", "-o", out], capsys)
    assert code == 1
    assert "independence" in err and not out.exists()


def test_plan_needs_scheme(tmp_path, capsys):
    root = subjects_dataset(tmp_path / "ds", 2)
    assert run(["plan", root], capsys)[0] == 2


# ---------------------------------------------------------------------------
# report


def test_report_from_score(tmp_path, capsys):
    root = small_dataset(tmp_path / "ds")
    score = tmp_path / "score.json"
    assert run(["score", root, "--scenario", "personalized", "-o", score], capsys)[0] == 0
    info = tmp_path / "info.json"
    info.write_text(json.dumps({"developers": "Team", "email": "t@example.org"}))
    checklist = tmp_path / "answers.json"
    checklist.write_text(json.dumps({"code.evaluation": True}))
    code, out, _ = run(
        ["report", score, "--model-name", "demo", "--card-info", info, "--format", "human",
         "--checklist", checklist, "--checklist-output", tmp_path / "checklist.txt"],
        capsys,
    )
    assert code == 0
    assert "Model card: demo" in out and "Team" in out
    assert "Completed: 1/" in (tmp_path / "checklist.txt").read_text()


def test_report_structured_is_stable(tmp_path, capsys):
    root = small_dataset(tmp_path / "ds")
    score = tmp_path / "score.json"
    run(["score", root, "-o", score], capsys)
    first = run(["report", score], capsys)[1]
    second = run(["report", score], capsys)[1]
    assert first == second and json.loads(first)["type"] == "modelCard"


def test_report_unknown_checklist_key(tmp_path, capsys):
    root = small_dataset(tmp_path / "ds")
    score = tmp_path / "score.json"
    run(["score", root, "-o", score], capsys)
    checklist = tmp_path / "answers.json"
    checklist.write_text(json.dumps({"foo": True}))
    code, _, err = run(["report", score, "--checklist", checklist, "-o", tmp_path / "card.json"], capsys)
    assert code == 2 and "foo" in err


# ---------------------------------------------------------------------------
# convert and detect


def test_convert_and_detect(fixtures_dir, tmp_path, capsys):
    src = tmp_path / "src"
    shutil.copytree(fixtures_dir / "synthetic_source" / "alpha", src / "alpha")
    code, out, _ = run(["convert", "generic", src, tmp_path / "bids", "--name", "Synthetic"], capsys)
    assert code == 0 and "converted 4 recording(s)" in out
    code, out, _ = run(["detect-baseline", tmp_path / "bids", "-o", tmp_path / "detect.json"], capsys)
    assert code == 0
    report = json.loads((tmp_path / "detect.json").read_text())
    assert len(report["runs"]) == 4 and report["threshold"] == 2000.0


def test_convert_reports_errors(tmp_path, capsys):
    (tmp_path / "src" / "p").mkdir(parents=True)
    (tmp_path / "src" / "p" / "bad.edf").write_bytes(b"nope")
    code, _, err = run(["convert", "generic", tmp_path / "src", tmp_path / "bids"], capsys)
    assert code == 1 and "bad.edf" in err
