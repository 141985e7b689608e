"""Synthetic benchmark suite: combinational problems with labels known by
construction and verified through the mini execution backend.

Each problem is a small two-operand (or mux) template at a random width.
Candidates mix the reference implementation (with cosmetic variants),
behavioral mutants that provably differ on the stimulus, constant stubs,
and, optionally, syntax-broken sources. The authoritative label for every
candidate is its mini-backend execution result; the builder asserts that
reference copies execute to pass, which cross-checks the Verilog semantics
against an independent Python model of each template.
"""
from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass
from pathlib import Path

from verirank.domain import Candidate, CandidatePool, Problem
from verirank.oracle import STATUS_PASS, MiniBackend, execute

_MAX_ROWS = 48


def _mask(w: int) -> int:
    return (1 << w) - 1


@dataclass(frozen=True)
class _Template:
    name: str
    inputs: tuple[tuple[str, str], ...]  # (name, "w" or "1")
    out_width: str  # "w", "w1" (w+1), "2w", or "1"
    ref_expr: str
    mutant_exprs: tuple[str, ...]
    py: callable


def _width_of(spec: str, w: int) -> int:
    return {"w": w, "w1": w + 1, "2w": 2 * w, "1": 1}[spec]


TEMPLATES = (
    _Template("xor", (("a", "w"), ("b", "w")), "w", "a ^ b",
              ("a & b", "a | b", "~(a ^ b)"),
              lambda env, w: env["a"] ^ env["b"]),
    _Template("and", (("a", "w"), ("b", "w")), "w", "a & b",
              ("a | b", "a ^ b", "a & ~b"),
              lambda env, w: env["a"] & env["b"]),
    _Template("or", (("a", "w"), ("b", "w")), "w", "a | b",
              ("a & b", "~(a | b)", "a ^ b"),
              lambda env, w: env["a"] | env["b"]),
    _Template("xnor", (("a", "w"), ("b", "w")), "w", "~(a ^ b)",
              ("a ^ b", "a & b", "~(a & b)"),
              lambda env, w: (~(env["a"] ^ env["b"])) & _mask(w)),
    _Template("add", (("a", "w"), ("b", "w")), "w1", "a + b",
              ("a - b", "a + b + 1", "a"),
              lambda env, w: env["a"] + env["b"]),
    _Template("sub", (("a", "w"), ("b", "w")), "w", "a - b",
              ("a + b", "b - a", "a"),
              lambda env, w: (env["a"] - env["b"]) & _mask(w)),
    _Template("mux", (("s", "1"), ("a", "w"), ("b", "w")), "w", "s ? a : b",
              ("s ? b : a", "a", "b"),
              lambda env, w: env["a"] if env["s"] else env["b"]),
    _Template("gt", (("a", "w"), ("b", "w")), "1", "a > b",
              ("a < b", "a >= b", "a == b"),
              lambda env, w: int(env["a"] > env["b"])),
    _Template("parity", (("a", "w"), ("b", "w")), "1", "^(a ^ b)",
              ("~^(a ^ b)", "&(a ^ b)", "|a"),
              lambda env, w: bin(env["a"] ^ env["b"]).count("1") & 1),
    _Template("pack", (("a", "w"), ("b", "w")), "2w", "{a, b}",
              ("{b, a}", "{a, a}", "{2{b}}"),
              lambda env, w: (env["a"] << w) | env["b"]),
)


def _source(template: _Template, w: int, expr: str, note: str = "") -> str:
    ports = []
    for name, width in template.inputs:
        bits = _width_of(width, w)
        rng = f"[{bits - 1}:0] " if bits > 1 else ""
        ports.append(f"input {rng}{name}")
    out_bits = _width_of(template.out_width, w)
    out_rng = f"[{out_bits - 1}:0] " if out_bits > 1 else ""
    ports.append(f"output {out_rng}y")
    header = ", ".join(ports)
    body = f"  assign y = {expr};\n"
    if note:
        body = f"  // {note}\n" + body
    return f"module {template.name}_{w}({header});\n{body}endmodule\n"


def _break_syntax(source: str, kind: int) -> str:
    if kind == 0:
        return source.replace("endmodule", "")  # missing endmodule
    if kind == 1:
        return source.replace(";\nendmodule", "\nendmodule")  # dropped semicolon
    if kind == 2:
        return source.replace("assign y =", "assign y = ((")  # unbalanced parens
    return source.replace("module", "module module", 1)  # keyword as name


def _stimulus(template: _Template, w: int, rng: random.Random) -> tuple[str, list[dict]]:
    names = [name for name, _ in template.inputs]
    widths = [_width_of(width, w) for _, width in template.inputs]
    total_bits = sum(widths)
    if total_bits <= 6:
        combos = list(itertools.product(*[range(1 << b) for b in widths]))
    else:
        combos = {tuple((_mask(b)) for b in widths), tuple(0 for _ in widths)}
        while len(combos) < _MAX_ROWS:
            combos.add(tuple(rng.randrange(1 << b) for b in widths))
        combos = sorted(combos)
    rows = [dict(zip(names, combo)) for combo in combos]
    expected = [{"y": template.py(env, w)} for env in rows]
    return json.dumps({"inputs": rows, "expected": expected}), rows


@dataclass
class SuiteData:
    problems: list[Problem]
    pools: dict[str, CandidatePool]
    labels: dict[tuple[str, str], str]

    def correct_in_first(self, pid: str, k: int) -> int:
        pool = self.pools[pid]
        return sum(
            1
            for cand in pool.candidates[:k]
            if self.labels[(pid, cand.candidate_id)] == "pass"
        )

    def write(self, out_dir) -> dict[str, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {
            "problems": out_dir / "problems.jsonl",
            "candidates": out_dir / "candidates.jsonl",
            "labels": out_dir / "labels.jsonl",
        }
        with open(paths["problems"], "w") as fh:
            for p in self.problems:
                fh.write(json.dumps(p.to_record()) + "\n")
        with open(paths["candidates"], "w") as fh:
            for pid in [p.id for p in self.problems]:
                for c in self.pools[pid].candidates:
                    fh.write(json.dumps(c.to_record()) + "\n")
        with open(paths["labels"], "w") as fh:
            for (pid, cid), label in sorted(self.labels.items()):
                fh.write(
                    json.dumps(
                        {"problem_id": pid, "candidate_id": cid, "label": label}
                    )
                    + "\n"
                )
        return paths


def build_suite(
    n_problems: int = 50,
    n_candidates: int = 10,
    seed: int = 7,
    broken_fraction: float = 0.0,
) -> SuiteData:
    rng = random.Random(seed)
    backend = MiniBackend()
    problems: list[Problem] = []
    pools: dict[str, CandidatePool] = {}
    labels: dict[tuple[str, str], str] = {}
    for idx in range(n_problems):
        template = TEMPLATES[idx % len(TEMPLATES)]
        w = rng.choice([1, 2, 3, 4]) if template.name != "mux" else rng.choice([2, 3, 4])
        pid = f"p{idx:03d}_{template.name}{w}"
        testbench, _rows = _stimulus(template, w, rng)
        problem = Problem(
            id=pid,
            spec=(
                f"Implement a module named {template.name}_{w} computing "
                f"y = {template.ref_expr} over the declared ports."
            ),
            benchmark="synthetic",
            testbench=testbench,
        )
        problems.append(problem)

        n_correct = rng.choice([0, 1, 1, 2, 2, 3, 4])
        n_broken = 0
        if broken_fraction > 0:
            n_broken = max(1, int(broken_fraction * n_candidates))
        # (source, must_pass): reference copies must execute to pass; mutant
        # and broken labels come from execution alone.
        sources: list[tuple[str, bool]] = []
        for i in range(n_correct):
            note = "" if i == 0 else f"variant {i}"
            sources.append((_source(template, w, template.ref_expr, note), True))
        mutants = itertools.cycle(template.mutant_exprs + ("0", "{1'b1}"))
        while len(sources) < n_candidates - n_broken:
            sources.append((_source(template, w, next(mutants)), False))
        for i in range(n_broken):
            sources.append(
                (_break_syntax(_source(template, w, template.ref_expr), i % 4), False)
            )
        rng.shuffle(sources)

        candidates = []
        must_pass_ids = set()
        for j, (source, must_pass) in enumerate(sources, start=1):
            n_tok = rng.randint(5, 20)
            logprobs = tuple(-rng.uniform(0.05, 3.0) for _ in range(n_tok))
            cid = f"c{j:02d}"
            if must_pass:
                must_pass_ids.add(cid)
            candidates.append(
                Candidate(
                    problem_id=pid,
                    candidate_id=cid,
                    source=source,
                    generator="synthgen",
                    token_logprobs=logprobs,
                )
            )
        pool = CandidatePool(problem_id=pid, candidates=tuple(candidates))
        pools[pid] = pool

        for cand in candidates:
            result = execute(cand, testbench, backend)
            label = "pass" if result.status == STATUS_PASS else "fail"
            labels[(pid, cand.candidate_id)] = label
            if cand.candidate_id in must_pass_ids:
                assert label == "pass", (
                    f"{pid}/{cand.candidate_id}: reference copy failed execution: "
                    f"{result.stdout_excerpt}"
                )
    return SuiteData(problems=problems, pools=pools, labels=labels)
