from datetime import datetime, timedelta

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seizure_eval.cv import (
    HOUR,
    PERSONALIZED,
    SUBJECT_INDEPENDENT,
    Fold,
    FoldPlan,
    PlanError,
    Region,
    TimelineSegment,
    personalized_exclusion_reason,
    plan_fixed,
    plan_fixed_sets,
    plan_kfold,
    plan_loo,
    plan_tscv,
    verify_plan,
)

T0 = datetime(2021, 5, 1, 8, 0, 0)


def single(hours, onsets_h):
    return [TimelineSegment("s1", "00", T0, hours * HOUR, seizure_onsets=tuple(h * HOUR for h in onsets_h))]


def bounds(regions):
    """(start, end) in hours relative to T0 for a single contiguous set of regions."""
    lo = min((r.abs_start - T0).total_seconds() for r in regions) / HOUR
    hi = max((r.abs_end - T0).total_seconds() for r in regions) / HOUR
    return pytest.approx(lo), pytest.approx(hi)


# ---------------------------------------------------------------------------
# TSCV


def test_tscv_variable_example():
    plan = plan_tscv(single(8, [2]), "variable")
    assert len(plan.folds) == 3
    expected = [((0, 5), (5, 6)), ((0, 6), (6, 7)), ((0, 7), (7, 8))]
    for fold, (train, test) in zip(plan.folds, expected):
        assert bounds(fold.train) == train
        assert bounds(fold.test) == test
    assert verify_plan(plan, PERSONALIZED).ok


def test_tscv_fixed_example():
    plan = plan_tscv(single(8, [2]), "fixed")
    assert bounds(plan.folds[1].train) == (1, 6)
    assert bounds(plan.folds[1].test) == (6, 7)
    assert all(sum(r.length for r in f.train) == pytest.approx(5 * HOUR) for f in plan.folds)


def test_tscv_late_first_seizure():
    plan = plan_tscv(single(8, [5.5]), "variable")
    assert bounds(plan.folds[0].train) == (0, 6)
    assert bounds(plan.folds[0].test) == (6, 7)


def test_tscv_partial_last_hour():
    plan = plan_tscv(single(7.5, [1]), "variable")
    assert bounds(plan.folds[-1].test) == (7, 7.5)


def test_tscv_no_seizures():
    with pytest.raises(PlanError, match="no seizures"):
        plan_tscv(single(8, []))


def test_tscv_insufficient_duration():
    with pytest.raises(PlanError):
        plan_tscv(single(5, [1]))
    with pytest.raises(PlanError):
        plan_tscv(single(8, [7.5]))


def test_tscv_counts_gaps_as_elapsed_time():
    segs = [
        TimelineSegment("s1", "00", T0, 3 * HOUR, seizure_onsets=(HOUR,)),
        TimelineSegment("s1", "01", T0 + timedelta(hours=4), 4 * HOUR),
    ]
    plan = plan_tscv(segs)
    # training ends at wall-clock hour 5, i.e. one hour into the second run
    assert bounds(plan.folds[0].train) == (0, 5)
    assert sum(r.length for r in plan.folds[0].train) == pytest.approx(4 * HOUR)
    assert [r.run for r in plan.folds[0].test] == ["01"]


def test_tscv_rejects_mixed_subjects():
    segs = single(8, [1]) + [TimelineSegment("s2", "00", T0, HOUR)]
    with pytest.raises(PlanError):
        plan_tscv(segs)


def test_segment_duration_must_be_positive():
    with pytest.raises(ValueError):
        TimelineSegment("s1", "00", T0, 0.0)


def test_exclusion_reasons():
    assert "seizures" in personalized_exclusion_reason(single(10, [1, 2]))
    assert "h of data" in personalized_exclusion_reason(single(1, [0.1, 0.2, 0.3]))
    assert personalized_exclusion_reason(single(10, [1, 2, 3])) is None


# ---------------------------------------------------------------------------
# subject-independent


@pytest.mark.parametrize("n", [5, 2])
def test_loo(n):
    subjects = [f"{i:02d}" for i in range(n)]
    plan = plan_loo(subjects)
    assert len(plan.folds) == n
    assert all(len(f.train) == n - 1 and len(f.test) == 1 for f in plan.folds)
    assert verify_plan(plan, SUBJECT_INDEPENDENT).ok


def test_loo_single_subject():
    with pytest.raises(PlanError):
        plan_loo(["01"])


def test_kfold_even():
    plan = plan_kfold([f"{i:02d}" for i in range(10)], 5, seed=1)
    assert [len(f.test) for f in plan.folds] == [2] * 5


def test_kfold_uneven():
    plan = plan_kfold([f"{i:02d}" for i in range(7)], 3, seed=1)
    assert sorted(len(f.test) for f in plan.folds) == [2, 2, 3]


def test_kfold_reproducible():
    subjects = [f"{i:02d}" for i in range(9)]
    assert plan_kfold(subjects, 3, 42).to_json() == plan_kfold(subjects, 3, 42).to_json()


@pytest.mark.parametrize("k", [1, 11])
def test_kfold_invalid_k(k):
    with pytest.raises(PlanError):
        plan_kfold([str(i) for i in range(10)], k, 0)


def test_kfold_seed_changes_partition():
    subjects = [f"{i:02d}" for i in range(20)]
    partitions = {
        frozenset(frozenset(f.test_subjects) for f in plan_kfold(subjects, 4, seed).folds) for seed in range(10)
    }
    assert len(partitions) > 1


def test_fixed_split():
    plan = plan_fixed({"A": "train", "B": "train", "C": "test"})
    assert len(plan.folds) == 1
    assert plan.folds[0].train_subjects == {"A", "B"} and plan.folds[0].test_subjects == {"C"}


def test_fixed_split_errors():
    with pytest.raises(PlanError, match="both"):
        plan_fixed_sets(["A", "B"], ["B"])
    with pytest.raises(PlanError, match="no test"):
        plan_fixed({"A": "train"})
    with pytest.raises(PlanError):
        plan_fixed({"A": "validation", "B": "test"})


# ---------------------------------------------------------------------------
# verification


def test_chronology_violation():
    run = dict(subject="s1", run="00", start=T0)
    fold = Fold(train=(Region(offset=0, length=2 * HOUR, **run),), test=(Region(offset=HOUR, length=HOUR, **run),))
    report = verify_plan(FoldPlan("tscv-variable", PERSONALIZED, (fold,)), PERSONALIZED)
    rules = {v.rule for v in report.violations}
    assert "chronology" in rules and "overlap" in rules
    assert all(v.fold == 0 for v in report.violations)


def test_train_after_test_without_overlap():
    run = dict(subject="s1", run="00", start=T0)
    fold = Fold(train=(Region(offset=2 * HOUR, length=HOUR, **run),), test=(Region(offset=0, length=HOUR, **run),))
    report = verify_plan(FoldPlan("tscv-variable", PERSONALIZED, (fold,)), PERSONALIZED)
    assert [v.rule for v in report.violations] == ["chronology"]
    assert "fold 0" in str(report)


def test_independence_violation():
    fold = Fold(train=(Region("A"), Region("B")), test=(Region("B"),))
    report = verify_plan(FoldPlan("fixed", SUBJECT_INDEPENDENT, (fold,)), SUBJECT_INDEPENDENT)
    assert "independence" in {v.rule for v in report.violations}


def test_coverage_violation():
    fold = Fold(train=(Region("A"),), test=(Region("B"),))
    report = verify_plan(FoldPlan("loo", SUBJECT_INDEPENDENT, (fold, fold)), SUBJECT_INDEPENDENT)
    assert {v.rule for v in report.violations} == {"coverage"}


# ---------------------------------------------------------------------------
# properties


@st.composite
def timelines(draw):
    n = draw(st.integers(1, 4))
    t = T0
    segments = []
    for i in range(n):
        t += timedelta(seconds=draw(st.integers(0, 3 * 3600)))
        duration = draw(st.integers(600, 12 * 3600))
        onsets = draw(st.lists(st.integers(0, duration - 1), max_size=4))
        segments.append(TimelineSegment("s", f"{i:02d}", t, float(duration), seizure_onsets=tuple(map(float, onsets))))
        t += timedelta(seconds=duration)
    return segments


def tscv_or_none(timeline, mode):
    try:
        return plan_tscv(timeline, mode)
    except PlanError:
        return None


def covered(regions):
    return sum(r.length for r in regions)


@settings(max_examples=150, deadline=None)
@given(timelines(), st.sampled_from(["variable", "fixed"]))
def test_tscv_properties(timeline, mode):
    plan = tscv_or_none(timeline, mode)
    if plan is None:
        return
    assert verify_plan(plan, PERSONALIZED).ok
    for fold in plan.folds:
        assert max(r.abs_end for r in fold.train) <= min(r.abs_start for r in fold.test)
    if mode == "variable":
        for a, b in zip(plan.folds, plan.folds[1:]):
            assert covered(a.train) < covered(b.train)
            assert max(r.abs_end for r in a.train) <= max(r.abs_end for r in b.train)
    # test windows are disjoint and cover all recorded data after the first training window
    t0 = min(s.start for s in timeline)
    first = plan.params["firstTrainEndSeconds"]
    expected = sum(
        max(0.0, (s.end - t0).total_seconds() - max(first, (s.start - t0).total_seconds())) for s in timeline
    )
    tests = [r for f in plan.folds for r in f.test]
    assert sum(r.length for r in tests) == pytest.approx(expected, abs=1e-3)
    ordered = sorted(tests, key=lambda r: r.abs_start)
    for a, b in zip(ordered, ordered[1:]):
        assert a.abs_end <= b.abs_start + timedelta(microseconds=1)


subject_sets = st.sets(st.text("abcdefgh", min_size=1, max_size=4), min_size=2, max_size=15)


@settings(max_examples=100, deadline=None)
@given(subject_sets, st.data())
def test_subject_independent_properties(subjects, data):
    k = data.draw(st.integers(2, len(subjects)))
    seed = data.draw(st.integers(0, 2**31))
    for plan in (plan_loo(subjects), plan_kfold(subjects, k, seed)):
        assert verify_plan(plan, SUBJECT_INDEPENDENT).ok
        tested = [s for f in plan.folds for s in f.test_subjects]
        assert sorted(tested) == sorted(subjects)
        for fold in plan.folds:
            assert not fold.train_subjects & fold.test_subjects
            assert fold.train_subjects | fold.test_subjects == subjects
    sizes = [len(f.test) for f in plan_kfold(subjects, k, seed).folds]
    assert max(sizes) - min(sizes) <= 1


@settings(max_examples=50, deadline=None)
@given(subject_sets, st.integers(0, 2**31))
def test_kfold_with_k_equal_n_is_loo(subjects, seed):
    kfold = plan_kfold(subjects, len(subjects), seed)
    loo = plan_loo(subjects)
    as_set = lambda plan: {(frozenset(f.train_subjects), frozenset(f.test_subjects)) for f in plan.folds}
    assert as_set(kfold) == as_set(loo)


@settings(max_examples=50, deadline=None)
@given(timelines())
def test_plan_json_round_trip(timeline):
    plan = tscv_or_none(timeline, "variable") or plan_loo(["a", "b", "c"])
    back = FoldPlan.from_json(plan.to_json())
    assert back == plan and back.digest() == plan.digest()
