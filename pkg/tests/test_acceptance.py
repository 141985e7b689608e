"""Acceptance suite: one test per release criterion, at its stated tolerance.

Runs hermetically: mock gateway transports, the mini execution backend, and
no network access. Each criterion prints a single PASS line on success (use
``pytest tests/test_acceptance.py -v -s``); a pytest failure is the FAIL.
"""

import itertools
import json
import random
import time
from fractions import Fraction
from itertools import combinations

from verirank.domain import Candidate, LabeledCandidate, PASS
from verirank.gateway import Verdict
from verirank.harness import RunConfig, run_benchmark
from verirank.metrics import (
    PairedSample,
    ProblemOutcome,
    _average_ranks,
    pass_at_k,
    reranked_pass_at_1,
    suite_pass_at_k,
    upper_bound_ratio,
    wilcoxon_signed_rank,
)
from verirank.distill import distill_labels
from verirank.oracle import ExecutionResult, source_digest
from verirank.rerank import (
    prefilter_syntax,
    score_codet,
    score_discriminator,
    score_random,
    select,
)
from verirank.reporting import ReportRow, aggregate_report, format_percent, format_ratio
from verirank.syntax import check_syntax, tokenize
from verirank.testing import ScriptedTeacher, code_digest


def done(number: int, name: str) -> None:
    print(f"[acceptance] criterion {number} ({name}): PASS")


# ---------------------------------------------------------------------- 1


def test_criterion_01_pass_at_k_oracle_equivalence():
    started = time.perf_counter()
    checked = 0
    for n in range(1, 9):
        for c in range(n + 1):
            labels = [1] * c + [0] * (n - c)
            for k in range(1, n + 1):
                subsets = list(combinations(range(n), k))
                oracle = sum(
                    1 for subset in subsets if any(labels[i] for i in subset)
                ) / len(subsets)
                assert abs(pass_at_k(n, c, k) - oracle) <= 1e-12, (n, c, k)
                checked += 1
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0, f"oracle sweep took {elapsed:.3f}s"
    assert checked == sum((n + 1) * n for n in range(1, 9))
    done(1, "pass@k oracle equivalence")


# ---------------------------------------------------------------------- 2


def _table_rows(fixtures_dir, block):
    with open(fixtures_dir / "table1.json") as fh:
        rows = json.load(fh)[block]
    return [ReportRow.make(r["model"], r["pass1"], r["reranked"], r["passk"]) for r in rows]


def test_criterion_02_table_reproduction(fixtures_dir):
    rtllm = aggregate_report(_table_rows(fixtures_dir, "rtllm"))
    resbench = aggregate_report(_table_rows(fixtures_dir, "resbench"))
    rtllm_ours = dict(rtllm.average.reranked)["Ours"]
    resbench_ours = dict(resbench.average.reranked)["Ours"]
    assert format_percent(rtllm_ours) == "50.40"
    assert format_percent(rtllm.average.passk) == "58.33"
    assert format_percent(resbench_ours) == "62.90"
    assert format_percent(resbench.average.passk) == "67.26"
    assert format_ratio(upper_bound_ratio("50.40", "58.33")) == "0.864"
    assert format_ratio(upper_bound_ratio("62.90", "67.26")) == "0.935"
    done(2, "table reproduction + upper-bound ratios")


# ---------------------------------------------------------------------- 3


def _exact_reranked(report, labels):
    pairs = []
    for rec in report.decisions:
        pairs.append((rec["selected_candidate_id"],
                      labels[(rec["problem_id"], rec["selected_candidate_id"])]))
    return reranked_pass_at_1(pairs)


def _config(suite, tmp_path, tag, **overrides):
    paths = suite.write(tmp_path / "data")
    defaults = dict(
        problems_path=str(paths["problems"]),
        candidates_path=str(paths["candidates"]),
        strategy="vcdrnk",
        k=5,
        m=5,
        output_dir=str(tmp_path / f"run-{tag}"),
        cache_dir=str(tmp_path / "cache"),
    )
    defaults.update(overrides)
    return RunConfig(**defaults)


def test_criterion_03_perfect_selector_bound(suite, tmp_path):
    k = 5
    bound = suite_pass_at_k(
        [ProblemOutcome(p.id, k, suite.correct_in_first(p.id, k)) for p in suite.problems],
        k,
    )
    perfect = run_benchmark(
        _config(suite, tmp_path, "perfect", judge={"kind": "mock", "accuracy": 1.0})
    )
    assert perfect.summary["errored"] == {}
    assert _exact_reranked(perfect, suite.labels) == bound  # exact rational equality

    for tag, overrides in (
        ("prob", {"strategy": "probability"}),
        ("rank", {"strategy": "coderank"}),
        ("codet", {"strategy": "codet"}),
        ("rand", {"strategy": "random"}),
        ("noisy", {"strategy": "vcdrnk", "judge": {"kind": "mock", "accuracy": 0.75}}),
    ):
        report = run_benchmark(_config(suite, tmp_path, tag, **overrides))
        assert report.summary["errored"] == {}
        assert _exact_reranked(report, suite.labels) <= bound, tag
    done(3, "perfect-selector bound")


# ---------------------------------------------------------------------- 4


def test_criterion_04_null_selector_control(suite):
    k = 5
    sliced = {}
    for problem in suite.problems:
        pool = suite.pools[problem.id]
        survivors = prefilter_syntax(pool).survivors[:k]
        sliced[problem.id] = [c for c in pool.candidates[:k]]
        assert survivors[:k] == tuple(sliced[problem.id])  # suite has no broken sources
    p_i = {
        pid: Fraction(
            sum(1 for c in cands if suite.labels[(pid, c.candidate_id)] == PASS), k
        )
        for pid, cands in sliced.items()
    }
    pass1 = suite_pass_at_k(
        [ProblemOutcome(pid, k, suite.correct_in_first(pid, k)) for pid in sliced], 1
    )
    assert sum(p_i.values()) / len(p_i) * 100 == pass1  # same quantity, two routes

    repetitions = 200
    total_correct = 0
    for seed in range(repetitions):
        for pid, cands in sliced.items():
            decision = select(score_random(pid, cands, seed=seed))
            if suite.labels[(pid, decision.selected_candidate_id)] == PASS:
                total_correct += 1
    mean = repetitions * float(sum(p_i.values()))
    variance = repetitions * float(sum(p * (1 - p) for p in p_i.values()))
    half_width = 2.576 * variance**0.5  # 99% normal interval
    assert abs(total_correct - mean) <= half_width, (total_correct, mean, half_width)
    done(4, "null-selector control within 99% interval")


# ---------------------------------------------------------------------- 5


def test_criterion_05_majority_vote_exact(suite):
    problem = suite.problems[0]
    candidate = suite.pools[problem.id].candidates[0]
    for m in (1, 3, 5, 7):
        for pattern in itertools.product(("pass", "fail"), repeat=m):
            def judge(prob, cand, nonce, _pattern=pattern):
                j = int(nonce.split("-")[1]) - 1
                return Verdict(_pattern[j], "r", "r", "clean")

            vector = score_discriminator(problem, [candidate], judge, m=m)
            score = vector.scores[0][1]
            count = sum(1 for p in pattern if p == "pass")
            assert score == count / m  # exact, count-based
            assert vector.votes == ((candidate.candidate_id, count, m),)
            if m % 2 == 1:
                assert score != 0.5
    done(5, "majority voting count/m over all patterns")


# ---------------------------------------------------------------------- 6


def test_criterion_06_distillation_fidelity():
    rng = random.Random(60)
    rows = []
    for i in range(30):
        source = f"module fixture_{i}(input a, output y); assign y = a; endmodule"
        label = "pass" if rng.random() < 0.5 else "fail"
        rows.append(LabeledCandidate(Candidate("p", f"c{i:02d}", source, "g"), label))
    flip = {"pass": "fail", "fail": "pass"}
    t1_right = {row.candidate.source for row in rows[:17]}
    t2_right = {row.candidate.source for row in rows[17:25]}
    t1 = ScriptedTeacher(
        "T1",
        {
            code_digest(row.candidate.source): (
                row.label if row.candidate.source in t1_right else flip[row.label]
            )
            for row in rows
        },
    )
    t2 = ScriptedTeacher(
        "T2",
        {
            code_digest(row.candidate.source): (
                row.label if row.candidate.source in t2_right else flip[row.label]
            )
            for row in rows
        },
    )
    records = distill_labels(rows, "spec text", t1, t2)
    # (a) T2 is consulted exactly when T1 misses
    assert t1.calls == 30
    assert t2.calls == 30 - 17 == 13
    # (b) every record keeps its execution label
    truth = {row.candidate.source: row.label for row in rows}
    assert all(rec.label == truth[rec.code] for rec in records)
    # (c) rows both teachers miss are absent
    assert len(records) == 17 + 8
    kept = {rec.code for rec in records}
    for row in rows[25:]:
        assert row.candidate.source not in kept
    assert {rec.teacher for rec in records} == {"T1", "T2"}
    done(6, "distillation fidelity on 30-row fixture")


# ---------------------------------------------------------------------- 7


def _consensus_fixture(spec_rows):
    """spec_rows: list of (cid, bits). Returns candidates, tests, oracle."""
    cands = [Candidate("p", cid, f"module {cid}; endmodule", "g") for cid, _ in spec_rows]
    bits = {source_digest(c.source): row for c, (_, row) in zip(cands, spec_rows)}
    tests = [str(i) for i in range(len(spec_rows[0][1]))]

    def oracle(source, test):
        return ExecutionResult("pass" if bits[source_digest(source)][int(test)] else "fail")

    return cands, tests, oracle


CODET_FIXTURES = [
    # (rows, expected scores, expected selection)
    ([("a", (1, 1)), ("b", (1, 1)), ("c", (0, 0))],
     {"a": 4, "b": 4, "c": 0}, "a"),
    ([("a", (1, 1, 1)), ("b", (1, 1, 1)), ("c", (1, 0, 0)), ("d", (0, 0, 0))],
     {"a": 6, "b": 6, "c": 1, "d": 0}, "a"),
    # a large agreeing group outranks a lone stronger candidate
    ([("a", (1, 1)), ("b", (1, 0)), ("c", (1, 0)), ("d", (1, 0)), ("e", (0, 0))],
     {"a": 2, "b": 3, "c": 3, "d": 3, "e": 0}, "b"),
    ([("a", (1, 1, 1, 1, 0)), ("b", (1, 1, 1, 1, 0)), ("c", (1, 1, 1, 1, 1)),
      ("d", (0, 0, 1, 0, 0)), ("e", (0, 0, 1, 0, 0)), ("f", (0, 0, 1, 0, 0))],
     {"a": 8, "b": 8, "c": 5, "d": 3, "e": 3, "f": 3}, "a"),
    # degenerate: identical vectors everywhere
    ([("a", (1, 0, 1)), ("b", (1, 0, 1)), ("c", (1, 0, 1)), ("d", (1, 0, 1))],
     {"a": 8, "b": 8, "c": 8, "d": 8}, "a"),
]


def test_criterion_07_codet_consensus():
    for rows, expected_scores, expected_pick in CODET_FIXTURES:
        cands, tests, oracle = _consensus_fixture(rows)
        vector = score_codet(cands, tests, oracle)
        assert {cid: int(s) for cid, s in vector.scores} == expected_scores
        for group in vector.groups:
            assert group.group_score == len(group.members) * sum(group.pass_vector)
        assert select(vector).selected_candidate_id == expected_pick
    done(7, "execution-consensus group scores and selection")


# ---------------------------------------------------------------------- 8


def test_criterion_08_wilcoxon_exactness():
    for n in range(5, 11):
        pairs = [PairedSample(f"d{i}", float(i + 1), 0.0) for i in range(n)]
        result = wilcoxon_signed_rank(pairs, "greater")
        assert result.pvalue == 2.0**-n, n
    rng = random.Random(808)
    for trial in range(20):
        n = rng.randint(5, 12)
        diffs = [rng.choice([-4, -3, -2, -1, 1, 2, 3, 4]) for _ in range(n)]
        pairs = [PairedSample(f"d{i}", float(d), 0.0) for i, d in enumerate(diffs)]
        ranks = _average_ranks([abs(d) for d in diffs])
        w_obs = sum(r for r, d in zip(ranks, diffs) if d > 0)
        ge = le = total = 0
        for signs in itertools.product((1, 0), repeat=n):
            w = sum(r for r, s in zip(ranks, signs) if s)
            total += 1
            ge += w >= w_obs
            le += w <= w_obs
        assert wilcoxon_signed_rank(pairs, "greater").pvalue == ge / total, trial
        expected_two = min(1.0, 2 * min(ge, le) / total)
        assert wilcoxon_signed_rank(pairs, "two-sided").pvalue == expected_two, trial
    done(8, "Wilcoxon exact enumeration agreement")


# ---------------------------------------------------------------------- 9


def test_criterion_09_syntax_gate_corpus_and_fuzz(corpus_dir):
    valid_files = sorted((corpus_dir / "valid").glob("*.v"))
    invalid_files = sorted((corpus_dir / "invalid").glob("*.v"))
    assert len(valid_files) + len(invalid_files) >= 40
    mistakes = []
    for path in valid_files:
        if not check_syntax(path.read_text(encoding="utf-8", errors="replace")).ok:
            mistakes.append(path.name)
    for path in invalid_files:
        if check_syntax(path.read_text(encoding="utf-8", errors="replace")).ok:
            mistakes.append(path.name)
    assert mistakes == []

    rng = random.Random(20260810)
    printable = "".join(chr(c) for c in range(32, 127))
    verilogish = (
        "module endmodule wire reg assign always begin end if else case endcase "
        "input output ( ) [ ] { } ; , : = <= + - * / & | ^ ~ ! ? @ # 4'b1010 "
        "8'hFF 1'bz \" ` \\ posedge negedge $display 0 1 9 _ a b y clk"
    ).split(" ")
    slowest = 0.0
    for i in range(100_000):
        roll = rng.random()
        if roll < 0.60:
            size = rng.randint(0, 64)
        elif roll < 0.90:
            size = rng.randint(64, 256)
        elif roll < 0.99:
            size = rng.randint(256, 1024)
        else:
            size = rng.randint(1024, 4096)
        if i % 3 == 0:
            text = " ".join(rng.choice(verilogish) for _ in range(max(1, size // 6)))[:size]
        elif i % 3 == 1:
            text = "".join(rng.choice(printable) for _ in range(size))
        else:
            text = bytes(rng.randrange(256) for _ in range(size)).decode(
                "latin-1", errors="replace"
            )
        started = time.perf_counter()
        report = check_syntax(text)  # must never raise
        elapsed = time.perf_counter() - started
        slowest = max(slowest, elapsed)
        assert elapsed < 1.0, f"input {i} ({len(text)} bytes) took {elapsed:.2f}s"
        if report.ok:
            keywords = {t.lexeme for t in tokenize(text) if t.kind == "keyword"}
            assert "module" in keywords, repr(text[:120])
    done(9, f"syntax gate corpus + 1e5-input fuzz (slowest {slowest * 1e3:.1f} ms)")


# --------------------------------------------------------------------- 10


def test_criterion_10_hermetic_end_to_end(suite, tmp_path):
    config = _config(suite, tmp_path, "hermetic")
    started = time.perf_counter()
    first = run_benchmark(config)
    first_elapsed = time.perf_counter() - started
    assert first_elapsed < 60.0, f"first run took {first_elapsed:.1f}s"
    assert first.summary["network_calls"] == 0
    assert all(e["transport"] != "http" for e in first.summary["gateway_log"])

    decisions_path = first.output_dir / "decisions.jsonl"
    first_bytes = decisions_path.read_bytes()

    second = run_benchmark(_config(suite, tmp_path, "hermetic"))
    assert second.summary["network_calls"] == 0
    assert decisions_path.read_bytes() == first_bytes
    cached = [e for e in second.summary["gateway_log"] if e["cached"]]
    assert cached, "warm cache was not used on the rerun"
    assert all(e["transport"] != "http" for e in second.summary["gateway_log"])
    done(10, f"hermetic end-to-end ({first_elapsed:.1f}s, byte-identical rerun)")
