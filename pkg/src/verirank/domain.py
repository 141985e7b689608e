"""Problems, candidate pools, labels, and the JSONL files they live in.

Datasets are JSON Lines, one record per line. Loaded structures are frozen
dataclasses: immutable after construction and safe to share across threads.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .errors import (
    DatasetParseError,
    DuplicateIdError,
    InsufficientCandidatesError,
    MissingFieldError,
    OrphanCandidateError,
)

PASS = "pass"
FAIL = "fail"
LABELS = (PASS, FAIL)


@dataclass(frozen=True)
class Problem:
    """One benchmark item: a natural-language spec plus optional testbench."""

    id: str
    spec: str
    benchmark: str
    testbench: str | None = None
    tags: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.id:
            raise ValueError("problem id must be nonempty")
        if not self.spec:
            raise ValueError(f"problem {self.id!r}: spec must be nonempty")
        if self.testbench is not None and not self.testbench:
            raise ValueError(f"problem {self.id!r}: testbench present but empty")

    def to_record(self) -> dict:
        rec: dict = {"id": self.id, "spec": self.spec, "benchmark": self.benchmark}
        if self.testbench is not None:
            rec["testbench"] = self.testbench
        if self.tags:
            rec["tags"] = list(self.tags)
        return rec


@dataclass(frozen=True)
class Candidate:
    """One generated Verilog source for a problem."""

    problem_id: str
    candidate_id: str
    source: str
    generator: str
    token_logprobs: tuple[float, ...] | None = None
    syntax_ok: bool | None = None  # tri-state: None = not yet checked

    def __post_init__(self):
        if not self.problem_id or not self.candidate_id:
            raise ValueError("candidate needs nonempty problem_id and candidate_id")
        if self.token_logprobs is not None:
            for lp in self.token_logprobs:
                if lp > 0:
                    raise ValueError(
                        f"candidate {self.candidate_id!r}: token log-probability "
                        f"{lp} > 0"
                    )

    def to_record(self) -> dict:
        rec: dict = {
            "problem_id": self.problem_id,
            "candidate_id": self.candidate_id,
            "source": self.source,
            "generator": self.generator,
        }
        if self.token_logprobs is not None:
            rec["token_logprobs"] = list(self.token_logprobs)
        return rec


@dataclass(frozen=True)
class CandidatePool:
    """All candidates for one problem, in the generator's sampling order.

    The stored order is canonical: downstream tie-breaking always refers to
    it, so it must never be re-sorted.
    """

    problem_id: str
    candidates: tuple[Candidate, ...]

    @property
    def n(self) -> int:
        return len(self.candidates)


@dataclass(frozen=True)
class LabeledCandidate:
    candidate: Candidate
    label: str

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"label must be one of {LABELS}, got {self.label!r}")


@dataclass(frozen=True)
class RunManifest:
    run_id: str
    config_digest: str
    created_at: str
    strategy: str
    k: int
    m: int
    seeds: dict[str, int]

    def __post_init__(self):
        if self.k < 1 or self.m < 1:
            raise ValueError("k and m must be >= 1")

    def to_record(self) -> dict:
        return {
            "run_id": self.run_id,
            "config_digest": self.config_digest,
            "created_at": self.created_at,
            "strategy": self.strategy,
            "k": self.k,
            "m": self.m,
            "seeds": dict(self.seeds),
        }


def canonical_digest(payload) -> str:
    """sha256 over a canonical JSON encoding; field order never matters."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _iter_jsonl(path: Path) -> Iterator[tuple[int, dict]]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetParseError(
                    f"invalid JSON: {exc.msg}", path=str(path), line=lineno
                ) from exc
            if not isinstance(obj, dict):
                raise DatasetParseError(
                    "record is not a JSON object", path=str(path), line=lineno
                )
            yield lineno, obj


def _require(obj: dict, name: str, path: str, lineno: int):
    value = obj.get(name)
    if value is None:
        raise MissingFieldError(f"missing field {name!r}", path=path, line=lineno)
    return value


def load_problems(path) -> list[Problem]:
    """Load problems.jsonl; order preserved, ids unique."""
    path = Path(path)
    problems: list[Problem] = []
    seen: dict[str, int] = {}
    for lineno, obj in _iter_jsonl(path):
        pid = str(_require(obj, "id", str(path), lineno))
        spec = str(_require(obj, "spec", str(path), lineno))
        benchmark = str(_require(obj, "benchmark", str(path), lineno))
        tags = tuple(str(t) for t in obj.get("tags") or ())
        testbench = obj.get("testbench")
        try:
            problem = Problem(
                id=pid, spec=spec, benchmark=benchmark, testbench=testbench, tags=tags
            )
        except ValueError as exc:
            raise DatasetParseError(str(exc), path=str(path), line=lineno) from exc
        if problem.id in seen:
            raise DuplicateIdError(
                f"duplicate problem id {problem.id!r} "
                f"(lines {seen[problem.id]} and {lineno})",
                path=str(path),
                line=lineno,
            )
        seen[problem.id] = lineno
        problems.append(problem)
    return problems


def load_candidates(path, problems: list[Problem]) -> dict[str, CandidatePool]:
    """Load candidates.jsonl grouped into per-problem pools.

    Generator order within each pool is the file order and is preserved.
    """
    path = Path(path)
    known = {p.id for p in problems}
    grouped: dict[str, list[Candidate]] = {}
    seen: dict[tuple[str, str], int] = {}
    for lineno, obj in _iter_jsonl(path):
        pid = str(_require(obj, "problem_id", str(path), lineno))
        cid = str(_require(obj, "candidate_id", str(path), lineno))
        source = str(_require(obj, "source", str(path), lineno))
        generator = str(_require(obj, "generator", str(path), lineno))
        logprobs = obj.get("token_logprobs")
        if pid not in known:
            raise OrphanCandidateError(
                f"candidate {cid!r} references unknown problem {pid!r}",
                path=str(path),
                line=lineno,
            )
        if (pid, cid) in seen:
            raise DuplicateIdError(
                f"duplicate candidate id {cid!r} in pool {pid!r} "
                f"(lines {seen[(pid, cid)]} and {lineno})",
                path=str(path),
                line=lineno,
            )
        seen[(pid, cid)] = lineno
        try:
            candidate = Candidate(
                problem_id=pid,
                candidate_id=cid,
                source=source,
                generator=generator,
                token_logprobs=None if logprobs is None else tuple(float(x) for x in logprobs),
            )
        except ValueError as exc:
            raise DatasetParseError(str(exc), path=str(path), line=lineno) from exc
        grouped.setdefault(pid, []).append(candidate)
    return {
        pid: CandidatePool(problem_id=pid, candidates=tuple(cands))
        for pid, cands in grouped.items()
    }


def load_labels(path) -> dict[tuple[str, str], str]:
    """Load labels.jsonl: {"problem_id", "candidate_id", "label"} records."""
    path = Path(path)
    labels: dict[tuple[str, str], str] = {}
    for lineno, obj in _iter_jsonl(path):
        pid = str(_require(obj, "problem_id", str(path), lineno))
        cid = str(_require(obj, "candidate_id", str(path), lineno))
        label = str(_require(obj, "label", str(path), lineno))
        if label not in LABELS:
            raise DatasetParseError(
                f"label must be one of {LABELS}, got {label!r}",
                path=str(path),
                line=lineno,
            )
        key = (pid, cid)
        if key in labels:
            raise DuplicateIdError(
                f"duplicate label for candidate {cid!r} of problem {pid!r}",
                path=str(path),
                line=lineno,
            )
        labels[key] = label
    return labels


def _write_jsonl(records: list[dict], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def serialize_problems(problems: list[Problem], path) -> None:
    _write_jsonl([p.to_record() for p in problems], path)


def serialize_candidates(pools: dict[str, CandidatePool], path) -> None:
    records = []
    for pid in pools:
        records.extend(c.to_record() for c in pools[pid].candidates)
    _write_jsonl(records, path)


def validate_pool(pool: CandidatePool, k: int) -> CandidatePool:
    """Check a pool supports a top-k slice and return the first k candidates."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if pool.n < k:
        raise InsufficientCandidatesError(pool.problem_id, pool.n, k)
    if pool.n == k:
        return pool
    return CandidatePool(problem_id=pool.problem_id, candidates=pool.candidates[:k])
