"""Distillation dataset builder: generate, execute-label, harvest reasoning.

For each seed (spec, reference, testbench): sample k candidates, label each
by execution, then ask the primary teacher to judge; a row is kept with the
primary teacher's reasoning when its prediction matches the execution label,
otherwise the secondary teacher gets one chance. Rows both teachers miss are
dropped. Execution labels are ground truth and are never overwritten by a
teacher.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .domain import FAIL, LABELS, PASS, Candidate, LabeledCandidate
from .errors import DatasetParseError, MissingFieldError
from .oracle import (
    STATUS_INFRA_ERROR,
    STATUS_PASS,
    STATUS_TIMEOUT,
    execute,
    source_digest,
)

log = logging.getLogger(__name__)

T1 = "T1"
T2 = "T2"


@dataclass(frozen=True)
class SeedExample:
    spec: str
    reference: str
    testbench: str

    def __post_init__(self):
        if not (self.spec and self.reference and self.testbench):
            raise ValueError("seed examples need nonempty spec, reference, testbench")


@dataclass(frozen=True)
class DistillRecord:
    spec: str
    code: str
    label: str
    reasoning: str
    teacher: str

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"label must be one of {LABELS}, got {self.label!r}")
        if not self.reasoning:
            raise ValueError("reasoning must be nonempty")
        if self.teacher not in (T1, T2):
            raise ValueError(f"teacher must be {T1} or {T2}, got {self.teacher!r}")

    def to_record(self) -> dict:
        return {
            "spec": self.spec,
            "code": self.code,
            "label": self.label,
            "reasoning": self.reasoning,
            "teacher": self.teacher,
        }


def load_seeds(path) -> list[SeedExample]:
    path = Path(path)
    seeds: list[SeedExample] = []
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
            for name in ("spec", "reference", "testbench"):
                if not obj.get(name):
                    raise MissingFieldError(
                        f"missing field {name!r}", path=str(path), line=lineno
                    )
            seeds.append(
                SeedExample(
                    spec=str(obj["spec"]),
                    reference=str(obj["reference"]),
                    testbench=str(obj["testbench"]),
                )
            )
    return seeds


def build_candidate_pool(
    seed: SeedExample,
    generator,
    backend,
    k: int = 10,
    problem_id: str | None = None,
    generator_name: str = "generator",
) -> list[LabeledCandidate]:
    """Sample k candidates and label each by execution.

    Rows whose execution ends in infra_error or timeout are excluded rather
    than coerced to fail; compile errors are the candidate's fault and label
    fail.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    pid = problem_id or f"seed-{source_digest(seed.spec)[:12]}"
    labeled: list[LabeledCandidate] = []
    for j in range(1, k + 1):
        source = generator.sample(seed.spec, j)
        candidate = Candidate(
            problem_id=pid,
            candidate_id=f"cand-{j:03d}",
            source=source,
            generator=generator_name,
        )
        result = execute(candidate, seed.testbench, backend)
        if result.status in (STATUS_INFRA_ERROR, STATUS_TIMEOUT):
            log.warning(
                "excluding candidate %s/%s from labeling: %s (%s)",
                pid,
                candidate.candidate_id,
                result.status,
                result.stdout_excerpt[:120],
            )
            continue
        label = PASS if result.status == STATUS_PASS else FAIL
        labeled.append(LabeledCandidate(candidate=candidate, label=label))
    if not labeled:
        log.warning("seed %s produced no labelable candidates", pid)
    return labeled


def _query(teacher, spec: str, code: str, name: str):
    try:
        return teacher(spec, code)
    except Exception as exc:
        log.warning("teacher %s failed (treated as mismatch): %s", name, exc)
        return None


def distill_labels(
    pool: list[LabeledCandidate],
    spec: str,
    t1,
    t2,
) -> list[DistillRecord]:
    """Harvest reasoning with primary-teacher priority and secondary fallback."""
    records: list[DistillRecord] = []
    for row in pool:
        code = row.candidate.source
        verdict = _query(t1, spec, code, T1)
        if verdict is not None and verdict.prediction == row.label:
            records.append(
                DistillRecord(
                    spec=spec,
                    code=code,
                    label=row.label,
                    reasoning=verdict.reasoning or verdict.raw,
                    teacher=T1,
                )
            )
            continue
        verdict = _query(t2, spec, code, T2)
        if verdict is not None and verdict.prediction == row.label:
            records.append(
                DistillRecord(
                    spec=spec,
                    code=code,
                    label=row.label,
                    reasoning=verdict.reasoning or verdict.raw,
                    teacher=T2,
                )
            )
    return records


def export_dataset(records: list[DistillRecord], path) -> Path:
    """Write records as JSONL plus a sidecar manifest with counts."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_record(), ensure_ascii=False) + "\n")
    manifest = {
        "records": len(records),
        "by_label": {
            PASS: sum(1 for r in records if r.label == PASS),
            FAIL: sum(1 for r in records if r.label == FAIL),
        },
        "by_teacher": {
            T1: sum(1 for r in records if r.teacher == T1),
            T2: sum(1 for r in records if r.teacher == T2),
        },
    }
    manifest_path = path.with_suffix(".manifest.json")
    manifest_path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return path


def load_dataset(path) -> list[DistillRecord]:
    path = Path(path)
    records: list[DistillRecord] = []
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
            records.append(
                DistillRecord(
                    spec=obj["spec"],
                    code=obj["code"],
                    label=obj["label"],
                    reasoning=obj["reasoning"],
                    teacher=obj["teacher"],
                )
            )
    return records
