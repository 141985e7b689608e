"""Reranking strategies: syntax prefilter, scorers, and argmax selection.

Every strategy produces a ScoreVector over the candidates that survived the
syntax gate, in generator order; ``select`` takes the argmax and breaks exact
ties by the lowest generator-order index, so runs are reproducible.
"""
from __future__ import annotations

import hashlib
import logging
import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence

from .domain import Candidate, CandidatePool, Problem
from .errors import (
    AuthenticationError,
    EmbeddingDimensionError,
    MissingLogprobsError,
    StrategyUnavailableError,
)
from .gateway import Verdict
from .oracle import STATUS_PASS, ExecutionResult
from .syntax import check_syntax

log = logging.getLogger(__name__)

STRATEGIES = ("probability", "coderank", "codet", "vcdrnk", "random")


@dataclass(frozen=True)
class ConsensusGroup:
    """Candidates sharing one test-outcome bit vector."""

    pass_vector: tuple[int, ...]
    members: tuple[str, ...]

    @property
    def group_score(self) -> int:
        return len(self.members) * sum(self.pass_vector)


@dataclass(frozen=True)
class ScoreVector:
    problem_id: str
    strategy: str
    scores: tuple[tuple[str, float], ...]
    votes: tuple[tuple[str, int, int], ...] | None = None  # (cid, passes, m)
    groups: tuple[ConsensusGroup, ...] | None = None

    def __post_init__(self):
        for cid, score in self.scores:
            if not math.isfinite(score):
                raise ValueError(f"{cid}: score must be finite, got {score!r}")


@dataclass(frozen=True)
class RerankDecision:
    problem_id: str
    selected_candidate_id: str
    score_vector: ScoreVector
    prefiltered_out: tuple[str, ...]
    tie_broken: bool
    syntax_fallback: bool = False


@dataclass(frozen=True)
class PrefilterResult:
    survivors: tuple[Candidate, ...]
    removed: tuple[str, ...]
    fallback: bool = False


def prefilter_syntax(pool: CandidatePool) -> PrefilterResult:
    """Drop candidates that fail the syntax gate, preserving order.

    If every candidate fails, the full pool survives (flagged) so a
    selection is still produced.
    """
    survivors: list[Candidate] = []
    removed: list[str] = []
    for cand in pool.candidates:
        ok = cand.syntax_ok
        if ok is None:
            ok = check_syntax(cand.source).ok
        if ok:
            survivors.append(cand)
        else:
            removed.append(cand.candidate_id)
    if not survivors:
        return PrefilterResult(survivors=pool.candidates, removed=(), fallback=True)
    return PrefilterResult(survivors=tuple(survivors), removed=tuple(removed))


def select(
    score_vector: ScoreVector,
    prefiltered_out: Sequence[str] = (),
    syntax_fallback: bool = False,
) -> RerankDecision:
    """Argmax over scores; exact ties go to the earliest candidate."""
    if not score_vector.scores:
        raise ValueError("cannot select from an empty score vector")
    best_index = max(
        range(len(score_vector.scores)), key=lambda i: score_vector.scores[i][1]
    )
    best_score = score_vector.scores[best_index][1]
    ties = sum(1 for _, s in score_vector.scores if s == best_score)
    return RerankDecision(
        problem_id=score_vector.problem_id,
        selected_candidate_id=score_vector.scores[best_index][0],
        score_vector=score_vector,
        prefiltered_out=tuple(prefiltered_out),
        tie_broken=ties > 1,
        syntax_fallback=syntax_fallback,
    )


# ---------------------------------------------------------------- strategies


def score_probability(candidates: Sequence[Candidate]) -> ScoreVector:
    """Mean token log-probability (length-normalized)."""
    if not candidates:
        raise ValueError("no candidates to score")
    scores: list[tuple[str, float]] = []
    for cand in candidates:
        if not cand.token_logprobs:
            raise MissingLogprobsError(cand.candidate_id)
        scores.append(
            (cand.candidate_id, sum(cand.token_logprobs) / len(cand.token_logprobs))
        )
    return ScoreVector(
        problem_id=candidates[0].problem_id,
        strategy="probability",
        scores=tuple(scores),
    )


def _cosine(a: Sequence[float], b: Sequence[float]) -> float:
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


def score_embedding(
    problem: Problem, candidates: Sequence[Candidate], embedder
) -> ScoreVector:
    """Cosine similarity between the spec embedding and each source embedding."""
    if not candidates:
        raise ValueError("no candidates to score")
    embed = embedder.embed if hasattr(embedder, "embed") else embedder
    spec_vec = list(embed(problem.spec))
    scores: list[tuple[str, float]] = []
    for cand in candidates:
        try:
            vec = list(embed(cand.source))
        except Exception as exc:
            raise StrategyUnavailableError(
                f"embedder failed on candidate {cand.candidate_id!r}: {exc}"
            ) from exc
        if len(vec) != len(spec_vec):
            raise EmbeddingDimensionError(
                f"candidate {cand.candidate_id!r}: embedding dimension "
                f"{len(vec)} != {len(spec_vec)}"
            )
        scores.append((cand.candidate_id, _cosine(spec_vec, vec)))
    return ScoreVector(
        problem_id=problem.id, strategy="coderank", scores=tuple(scores)
    )


_WS_RE = re.compile(r"\s+")


def dedupe_tests(tests: Sequence[str]) -> list[str]:
    """Drop textual duplicates (whitespace-normalized), keeping first-seen order."""
    seen: set[str] = set()
    unique: list[str] = []
    for test in tests:
        key = _WS_RE.sub(" ", test.strip())
        if key and key not in seen:
            seen.add(key)
            unique.append(test)
    return unique


def score_codet(
    candidates: Sequence[Candidate],
    tests: Sequence[str],
    oracle,
) -> ScoreVector:
    """Execution-consensus scoring.

    Every (candidate, test) pair runs to a pass bit; candidates grouped by
    identical bit vectors form consensus groups scored
    |members| x |tests the group passes|. An oracle failure on a pair counts
    as a failed bit; scoring never aborts.
    """
    if not candidates:
        raise ValueError("no candidates to score")
    if not tests:
        raise ValueError("codet needs at least one test")
    run = oracle.run if hasattr(oracle, "run") else oracle
    vectors: dict[str, tuple[int, ...]] = {}
    for cand in candidates:
        bits: list[int] = []
        for test in tests:
            try:
                result = run(cand.source, test)
                status = result.status if isinstance(result, ExecutionResult) else result
                bits.append(1 if status == STATUS_PASS else 0)
            except Exception as exc:
                log.warning(
                    "codet execution failed for %s: %s", cand.candidate_id, exc
                )
                bits.append(0)
        vectors[cand.candidate_id] = tuple(bits)
    grouped: dict[tuple[int, ...], list[str]] = {}
    for cand in candidates:
        grouped.setdefault(vectors[cand.candidate_id], []).append(cand.candidate_id)
    groups = tuple(
        ConsensusGroup(pass_vector=vec, members=tuple(members))
        for vec, members in grouped.items()
    )
    score_of = {vec: g.group_score for vec, g in zip(grouped, groups)}
    scores = tuple(
        (cand.candidate_id, float(score_of[vectors[cand.candidate_id]]))
        for cand in candidates
    )
    return ScoreVector(
        problem_id=candidates[0].problem_id,
        strategy="codet",
        scores=scores,
        groups=groups,
    )


JudgeFn = Callable[[Problem, Candidate, str], Verdict]


def score_discriminator(
    problem: Problem,
    candidates: Sequence[Candidate],
    judge: JudgeFn,
    m: int = 5,
) -> ScoreVector:
    """Majority voting: m independent judge passes per candidate.

    The score is exactly (pass verdicts) / m. A failed or unparseable pass
    counts as a fail vote and is logged; if no pass anywhere succeeds (or
    authentication fails outright) the strategy is unavailable.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if not candidates:
        raise ValueError("no candidates to score")
    scores: list[tuple[str, float]] = []
    votes: list[tuple[str, int, int]] = []
    any_success = False
    for cand in candidates:
        passes = 0
        for j in range(1, m + 1):
            try:
                verdict = judge(problem, cand, f"vote-{j}")
                any_success = True
                if verdict.prediction == "pass":
                    passes += 1
            except AuthenticationError:
                raise StrategyUnavailableError(
                    "judge endpoint rejected credentials"
                ) from None
            except Exception as exc:
                log.warning(
                    "judge pass %d failed for %s (counted as fail): %s",
                    j,
                    cand.candidate_id,
                    exc,
                )
        scores.append((cand.candidate_id, passes / m))
        votes.append((cand.candidate_id, passes, m))
    if not any_success:
        raise StrategyUnavailableError("every judge pass failed; judge unavailable")
    return ScoreVector(
        problem_id=problem.id,
        strategy="vcdrnk",
        scores=tuple(scores),
        votes=tuple(votes),
    )


def score_random(
    problem_id: str, candidates: Sequence[Candidate], seed: int = 0
) -> ScoreVector:
    """Seeded uniform control: platform-stable scores from a keyed digest."""
    if not candidates:
        raise ValueError("no candidates to score")
    scores: list[tuple[str, float]] = []
    for cand in candidates:
        key = f"{seed}\x00{problem_id}\x00{cand.candidate_id}".encode("utf-8")
        digest = hashlib.sha256(key).digest()
        u = int.from_bytes(digest[:8], "big") / 2**64
        scores.append((cand.candidate_id, u))
    return ScoreVector(problem_id=problem_id, strategy="random", scores=tuple(scores))
