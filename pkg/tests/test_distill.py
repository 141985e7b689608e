"""Distillation builder: execution labeling and dual-teacher harvest."""

import json

import pytest

from verirank.distill import (
    DistillRecord,
    SeedExample,
    build_candidate_pool,
    distill_labels,
    export_dataset,
    load_dataset,
    load_seeds,
)
from verirank.domain import Candidate, LabeledCandidate
from verirank.oracle import ExecutionResult, MiniBackend, MockBackend, source_digest
from verirank.testing import ScriptedGenerator, ScriptedTeacher, code_digest

GOOD = "module inv(input a, output y); assign y = ~a; endmodule"
WRONG = "module inv(input a, output y); assign y = a; endmodule"
TB = json.dumps({"inputs": [{"a": 0}, {"a": 1}], "expected": [{"y": 1}, {"y": 0}]})

SEED = SeedExample(spec="Invert the input.", reference=GOOD, testbench=TB)


def test_reference_passes_its_own_testbench():
    pool = build_candidate_pool(SEED, ScriptedGenerator([SEED.reference]), MiniBackend(), k=1)
    assert len(pool) == 1 and pool[0].label == "pass"


def test_mixed_pool_labels_by_execution():
    sources = [GOOD] * 6 + [WRONG] * 4
    pool = build_candidate_pool(SEED, ScriptedGenerator(sources), MiniBackend(), k=10)
    labels = [row.label for row in pool]
    assert len(pool) == 10
    assert labels.count("pass") == 6 and labels.count("fail") == 4


def test_infra_error_rows_are_excluded_not_failed():
    flaky = {source_digest(GOOD): "pass", source_digest(WRONG): ExecutionResult("infra_error")}
    backend = MockBackend(flaky)
    sources = [GOOD] * 9 + [WRONG]
    pool = build_candidate_pool(SEED, ScriptedGenerator(sources), backend, k=10)
    assert len(pool) == 9
    assert all(row.label == "pass" for row in pool)


def test_timeout_rows_are_excluded():
    backend = MockBackend({source_digest(GOOD): ExecutionResult("timeout")})
    pool = build_candidate_pool(SEED, ScriptedGenerator([GOOD]), backend, k=3)
    assert pool == []


def test_compile_error_is_the_candidates_fault():
    backend = MiniBackend()
    broken = "module inv(input a output y);"
    pool = build_candidate_pool(SEED, ScriptedGenerator([broken]), backend, k=1)
    assert len(pool) == 1 and pool[0].label == "fail"


def _pool_with_labels(rows):
    pool = []
    for i, (source, label) in enumerate(rows):
        pool.append(
            LabeledCandidate(Candidate("p", f"c{i}", source, "g"), label)
        )
    return pool


def test_t1_priority_short_circuits_t2():
    pool = _pool_with_labels([(GOOD, "pass"), (WRONG, "fail")])
    t1 = ScriptedTeacher("T1", {code_digest(GOOD): "pass", code_digest(WRONG): "fail"})
    t2 = ScriptedTeacher("T2", {})
    records = distill_labels(pool, SEED.spec, t1, t2)
    assert [r.teacher for r in records] == ["T1", "T1"]
    assert t1.calls == 2 and t2.calls == 0


def test_t2_fallback_when_t1_wrong():
    pool = _pool_with_labels([(GOOD, "pass")])
    t1 = ScriptedTeacher("T1", {code_digest(GOOD): "fail"})  # wrong
    t2 = ScriptedTeacher("T2", {code_digest(GOOD): "pass"})  # right
    records = distill_labels(pool, SEED.spec, t1, t2)
    assert len(records) == 1 and records[0].teacher == "T2"
    assert t2.calls == 1


def test_both_wrong_drops_the_row():
    pool = _pool_with_labels([(GOOD, "pass"), (WRONG, "fail")])
    t1 = ScriptedTeacher("T1", {code_digest(GOOD): "fail", code_digest(WRONG): "pass"})
    t2 = ScriptedTeacher("T2", {code_digest(GOOD): "fail", code_digest(WRONG): "pass"})
    records = distill_labels(pool, SEED.spec, t1, t2)
    assert records == []


def test_t2_query_count_equals_t1_mismatches():
    rows = [(f"module m{i}; endmodule", "pass" if i % 3 else "fail") for i in range(12)]
    pool = _pool_with_labels(rows)
    t1_right = {code_digest(s): lab for (s, lab), i in zip(rows, range(12)) if i % 2 == 0}
    t1 = ScriptedTeacher("T1", t1_right)  # anything absent predicts "fail"
    t2 = ScriptedTeacher("T2", {code_digest(s): lab for s, lab in rows})
    distill_labels(pool, SEED.spec, t1, t2)
    t1_mismatches = sum(
        1 for s, lab in rows if t1.predictions.get(code_digest(s), "fail") != lab
    )
    assert t2.calls == t1_mismatches


def test_teacher_failure_falls_through():
    pool = _pool_with_labels([(GOOD, "pass")])

    def t1(spec, code):
        raise RuntimeError("teacher offline")

    t2 = ScriptedTeacher("T2", {code_digest(GOOD): "pass"})
    records = distill_labels(pool, SEED.spec, t1, t2)
    assert len(records) == 1 and records[0].teacher == "T2"


def test_label_fidelity_never_overwritten():
    pool = _pool_with_labels([(GOOD, "fail")])  # execution says fail
    t1 = ScriptedTeacher("T1", {code_digest(GOOD): "fail"})
    records = distill_labels(pool, SEED.spec, t1, ScriptedTeacher("T2", {}))
    assert records[0].label == "fail"


def test_filtering_monotone():
    rows = [(f"module k{i}; endmodule", "pass") for i in range(8)]
    pool = _pool_with_labels(rows)
    half = {code_digest(s): "pass" for (s, _), i in zip(rows, range(8)) if i < 4}
    records = distill_labels(pool, SEED.spec, ScriptedTeacher("T1", half),
                             ScriptedTeacher("T2", {}))
    assert len(records) <= len(pool)
    assert len(records) == 4


def test_export_and_manifest(tmp_path):
    records = [
        DistillRecord("s", GOOD, "pass", "looks right", "T1"),
        DistillRecord("s", GOOD, "pass", "confirmed", "T2"),
        DistillRecord("s", WRONG, "fail", "wrong polarity", "T1"),
    ]
    out = export_dataset(records, tmp_path / "distill.jsonl")
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 3
    manifest = json.loads((tmp_path / "distill.manifest.json").read_text())
    assert manifest["records"] == 3
    assert manifest["by_label"] == {"pass": 2, "fail": 1}
    assert manifest["by_teacher"] == {"T1": 2, "T2": 1}
    assert load_dataset(out) == records


def test_export_empty(tmp_path):
    out = export_dataset([], tmp_path / "empty.jsonl")
    assert out.read_text() == ""
    manifest = json.loads((tmp_path / "empty.manifest.json").read_text())
    assert manifest["records"] == 0


def test_load_seeds_validation(tmp_path):
    path = tmp_path / "seeds.jsonl"
    path.write_text(json.dumps({"spec": "s", "reference": GOOD, "testbench": TB}) + "\n")
    seeds = load_seeds(path)
    assert seeds[0].reference == GOOD
    bad = tmp_path / "bad.jsonl"
    bad.write_text(json.dumps({"spec": "s", "reference": GOOD}) + "\n")
    from verirank.errors import MissingFieldError

    with pytest.raises(MissingFieldError):
        load_seeds(bad)


def test_record_invariants():
    with pytest.raises(ValueError):
        DistillRecord("s", GOOD, "pass", "", "T1")
    with pytest.raises(ValueError):
        DistillRecord("s", GOOD, "maybe", "r", "T1")
    with pytest.raises(ValueError):
        DistillRecord("s", GOOD, "pass", "r", "T3")
