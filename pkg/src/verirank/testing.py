"""Scripted transports, judges, teachers, and generators for offline runs.

The mock judge transport sits behind the ordinary gateway client, so the
full prompt-build / cache / verdict-parse path is exercised while never
opening a network connection. Labels are keyed by a digest of the exact code
block the judge prompt carries.
"""
from __future__ import annotations

import hashlib
import math
import random
from typing import Mapping, Sequence

from .domain import FAIL, PASS, Candidate
from .errors import GatewayError, TransientTransportError
from .gateway import (
    ChatRequest,
    JudgeConfig,
    Verdict,
    extract_code_block,
    truncate_to_budget,
)


def code_digest(code: str) -> str:
    return hashlib.sha256(code.encode("utf-8")).hexdigest()


def judge_label_map(
    candidates: Sequence[Candidate],
    labels: Mapping[tuple[str, str], str],
    config: JudgeConfig = JudgeConfig(),
) -> dict[str, str]:
    """Digest->label map matching what a judge prompt will actually contain."""
    mapping: dict[str, str] = {}
    for cand in candidates:
        label = labels.get((cand.problem_id, cand.candidate_id))
        if label is None:
            continue
        shown = truncate_to_budget(cand.source, config.char_budget)
        mapping[code_digest(shown)] = label
    return mapping


def _decide(label: str, accuracy: float, seed: int, digest: str, nonce: str) -> str:
    if accuracy >= 1.0:
        return label
    key = f"{seed}\x00{digest}\x00{nonce}".encode("utf-8")
    u = int.from_bytes(hashlib.sha256(key).digest()[:8], "big") / 2**64
    if u < accuracy:
        return label
    return FAIL if label == PASS else PASS


_MOCK_BODY = """\
1. CODE SEMANTIC ANALYSIS: the module was compared against the recorded
   ground-truth behavior for this exact source.
2. TEST CASE GENERATION: representative input vectors were considered,
   including all-zeros, all-ones, and boundary operands.
3. FUNCTIONAL CORRECTNESS ASSESSMENT: the candidate {assessment}.

VERDICT: {verdict}"""


class MockJudgeTransport:
    """Answers judge prompts from a label table, with optional noise."""

    name = "mock"

    def __init__(
        self,
        labels_by_digest: Mapping[str, str],
        accuracy: float = 1.0,
        seed: int = 0,
    ):
        self.labels = dict(labels_by_digest)
        self.accuracy = accuracy
        self.seed = seed
        self.calls = 0

    def post_chat(self, request: ChatRequest) -> str:
        self.calls += 1
        code = extract_code_block(request.messages[-1][1])
        digest = code_digest(code)
        label = self.labels.get(digest, FAIL)
        decided = _decide(label, self.accuracy, self.seed, digest, request.seed_nonce)
        verdict = "PASS" if decided == PASS else "FAIL"
        assessment = (
            "matches the specified behavior" if decided == PASS
            else "deviates from the specified behavior"
        )
        return _MOCK_BODY.format(assessment=assessment, verdict=verdict)

    def post_embedding(self, model: str, text: str) -> list[float]:
        raise GatewayError("mock judge transport does not embed")


class MockEmbedderTransport:
    """Deterministic unit vectors derived from the text digest."""

    name = "mock"

    def __init__(self, dim: int = 64):
        self.dim = dim
        self.calls = 0

    def post_embedding(self, model: str, text: str) -> list[float]:
        self.calls += 1
        seed = int.from_bytes(
            hashlib.sha256(f"{model}\x00{text}".encode()).digest()[:8], "big"
        )
        rng = random.Random(seed)
        vec = [rng.gauss(0.0, 1.0) for _ in range(self.dim)]
        norm = math.sqrt(sum(v * v for v in vec))
        return [v / norm for v in vec]

    def post_chat(self, request: ChatRequest) -> str:
        raise GatewayError("mock embedder transport does not chat")


class FlakyTransport:
    """Fails transiently a fixed number of times, then delegates."""

    name = "mock"

    def __init__(self, failures: int, inner):
        self.remaining = failures
        self.inner = inner
        self.calls = 0

    def _maybe_fail(self):
        self.calls += 1
        if self.remaining > 0:
            self.remaining -= 1
            raise TransientTransportError("synthetic transient failure")

    def post_chat(self, request: ChatRequest) -> str:
        self._maybe_fail()
        return self.inner.post_chat(request)

    def post_embedding(self, model: str, text: str) -> list[float]:
        self._maybe_fail()
        return self.inner.post_embedding(model, text)


class CannedChatTransport:
    """Replays a fixed response (or per-call sequence) for any chat request."""

    name = "mock"

    def __init__(self, responses):
        if isinstance(responses, str):
            responses = [responses]
        self.responses = list(responses)
        self.calls = 0

    def post_chat(self, request: ChatRequest) -> str:
        idx = min(self.calls, len(self.responses) - 1)
        self.calls += 1
        return self.responses[idx]

    def post_embedding(self, model: str, text: str) -> list[float]:
        raise GatewayError("canned chat transport does not embed")


class ScriptedGenerator:
    """Yields pre-written candidate sources per sampling index."""

    def __init__(self, sources: Sequence[str]):
        self.sources = list(sources)
        self.calls = 0

    def sample(self, spec: str, j: int) -> str:
        self.calls += 1
        return self.sources[(j - 1) % len(self.sources)]


class ScriptedTeacher:
    """Teacher with a fixed prediction per code digest; counts queries."""

    def __init__(self, name: str, predictions: Mapping[str, str], reasoning: str = ""):
        self.name = name
        self.predictions = dict(predictions)
        self.reasoning = reasoning or f"{name} reviewed the implementation in detail."
        self.calls = 0

    def __call__(self, spec: str, code: str) -> Verdict:
        self.calls += 1
        prediction = self.predictions.get(code_digest(code), FAIL)
        return Verdict(
            prediction=prediction,
            reasoning=self.reasoning,
            raw=f"{self.reasoning}\nVERDICT: {prediction.upper()}",
            parse_quality="clean",
        )


class LabelAwareTeacher:
    """Predicts the true label with a given accuracy (deterministic noise)."""

    def __init__(
        self,
        name: str,
        labels_by_digest: Mapping[str, str],
        accuracy: float = 1.0,
        seed: int = 0,
    ):
        self.name = name
        self.labels = dict(labels_by_digest)
        self.accuracy = accuracy
        self.seed = seed
        self.calls = 0

    def __call__(self, spec: str, code: str) -> Verdict:
        self.calls += 1
        digest = code_digest(code)
        label = self.labels.get(digest, FAIL)
        prediction = _decide(label, self.accuracy, self.seed, digest, self.name)
        return Verdict(
            prediction=prediction,
            reasoning=f"{self.name} simulated review of the candidate.",
            raw=f"simulated review\nVERDICT: {prediction.upper()}",
            parse_quality="clean",
        )
