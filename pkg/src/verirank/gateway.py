"""Chat-completion and embedding client layer.

Speaks the OpenAI-compatible JSON schema (``/chat/completions`` and
``/embeddings``) through a pluggable transport. Every response is cached on
disk, content-addressed over (endpoint, model, messages, temperature,
seed_nonce); with a warm cache a whole evaluation run replays offline and
bit-identically. Transient failures retry with exponential backoff
(base 1 s, factor 2, at most 5 attempts); authentication failures never
retry.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
import uuid
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Protocol

from .domain import Candidate, Problem, canonical_digest
from .errors import (
    AuthenticationError,
    CacheMissError,
    ExhaustedRetriesError,
    MalformedResponseError,
    TransientTransportError,
    UnparseableVerdictError,
)

log = logging.getLogger(__name__)

_ROLES = ("system", "user", "assistant")

JUDGE_SYSTEM_TEMPLATE = """\
You are a meticulous Verilog design reviewer. Given a design specification
and a candidate Verilog implementation, decide whether the implementation
functionally satisfies the specification.

Work through these three numbered sections, each under its own heading:

1. CODE SEMANTIC ANALYSIS: explain what the implementation actually does:
   interface, datapath, control flow, and edge-case behavior.
2. TEST CASE GENERATION: devise concrete input stimuli, including corner
   cases, and state the output the specification requires for each.
3. FUNCTIONAL CORRECTNESS ASSESSMENT: compare the implementation's behavior
   on those stimuli against the specification and call out any mismatch.

After the three sections, output exactly one final line:
VERDICT: PASS
or
VERDICT: FAIL"""

JUDGE_USER_TEMPLATE = """\
Specification:
{spec}

Candidate implementation:
```verilog
{code}
```"""

TRUNCATION_MARKER = "\n// ...truncated..."


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.0
    seed_nonce: str = ""
    max_tokens: int = 1024

    def __post_init__(self):
        if not self.messages:
            raise ValueError("a chat request needs at least one message")
        for role, _ in self.messages:
            if role not in _ROLES:
                raise ValueError(f"unknown role {role!r}")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class Verdict:
    prediction: str  # "pass" | "fail"
    reasoning: str
    raw: str
    parse_quality: str  # "clean" | "salvaged"


def chat_cache_key(request: ChatRequest) -> str:
    return canonical_digest(
        {
            "endpoint": "chat/completions",
            "model": request.model,
            "messages": [list(m) for m in request.messages],
            "temperature": request.temperature,
            "seed_nonce": request.seed_nonce,
        }
    )


def embedding_cache_key(model: str, text: str) -> str:
    return canonical_digest({"endpoint": "embeddings", "model": model, "text": text})


def prompt_template_hash() -> str:
    blob = JUDGE_SYSTEM_TEMPLATE + "\x00" + JUDGE_USER_TEMPLATE + "\x00" + TRUNCATION_MARKER
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class JudgeConfig:
    model: str = "verilog-judge"
    temperature: float = 0.6
    max_tokens: int = 1024
    char_budget: int = 12000


def truncate_to_budget(text: str, budget: int) -> str:
    if len(text) <= budget:
        return text
    return text[:budget] + TRUNCATION_MARKER


def build_judge_prompt(
    problem: Problem, candidate: Candidate, config: JudgeConfig = JudgeConfig()
) -> ChatRequest:
    """Deterministic judge request; the caller varies seed_nonce per vote."""
    spec = truncate_to_budget(problem.spec, config.char_budget)
    code = truncate_to_budget(candidate.source, config.char_budget)
    return ChatRequest(
        model=config.model,
        messages=(
            ("system", JUDGE_SYSTEM_TEMPLATE),
            ("user", JUDGE_USER_TEMPLATE.format(spec=spec, code=code)),
        ),
        temperature=config.temperature,
        max_tokens=config.max_tokens,
    )


_VERDICT_RE = re.compile(r"^[ \t]*verdict[ \t]*:[ \t]*(pass|fail)\b", re.IGNORECASE | re.MULTILINE)
_SALVAGE_RE = re.compile(r"\b(pass|fail)\b", re.IGNORECASE)


def parse_verdict(response: str) -> Verdict:
    """Extract the binary prediction; salvage from keywords when needed."""
    matches = list(_VERDICT_RE.finditer(response))
    if matches:
        last = matches[-1]
        reasoning = response[: last.start()].strip() or response.strip()
        return Verdict(
            prediction=last.group(1).lower(),
            reasoning=reasoning,
            raw=response,
            parse_quality="clean",
        )
    salvaged = list(_SALVAGE_RE.finditer(response))
    if salvaged:
        return Verdict(
            prediction=salvaged[-1].group(1).lower(),
            reasoning=response.strip(),
            raw=response,
            parse_quality="salvaged",
        )
    raise UnparseableVerdictError(response)


# ------------------------------------------------------------- transports


class Transport(Protocol):
    name: str

    def post_chat(self, request: ChatRequest) -> str: ...

    def post_embedding(self, model: str, text: str) -> list[float]: ...


class HttpTransport:
    """OpenAI-compatible JSON-over-HTTP transport; credential from env."""

    name = "http"

    def __init__(
        self,
        base_url: str,
        api_key_env: str = "VERIRANK_API_KEY",
        timeout: float = 120.0,
        session=None,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.timeout = timeout
        if session is None:
            import requests

            session = requests.Session()
        self._session = session

    def _post(self, path: str, payload: dict) -> dict:
        import requests

        key = os.environ.get(self.api_key_env, "")
        if not key:
            raise AuthenticationError(
                f"credential environment variable {self.api_key_env} is not set"
            )
        try:
            resp = self._session.post(
                f"{self.base_url}{path}",
                json=payload,
                headers={"Authorization": f"Bearer {key}"},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise TransientTransportError(str(exc)) from exc
        if resp.status_code in (401, 403):
            raise AuthenticationError(f"endpoint rejected credentials ({resp.status_code})")
        if resp.status_code in (408, 429) or resp.status_code >= 500:
            raise TransientTransportError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise MalformedResponseError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise MalformedResponseError("response body is not JSON") from exc

    def post_chat(self, request: ChatRequest) -> str:
        payload = {
            "model": request.model,
            "messages": [{"role": r, "content": c} for r, c in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        if request.seed_nonce:
            payload["seed"] = int(
                hashlib.sha256(request.seed_nonce.encode()).hexdigest()[:8], 16
            )
        data = self._post("/chat/completions", payload)
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponseError("no choices[0].message.content") from exc
        if not isinstance(content, str):
            raise MalformedResponseError("message content is not a string")
        return content

    def post_embedding(self, model: str, text: str) -> list[float]:
        data = self._post("/embeddings", {"model": model, "input": text})
        try:
            vector = data["data"][0]["embedding"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponseError("no data[0].embedding") from exc
        if not isinstance(vector, list):
            raise MalformedResponseError("embedding is not a list")
        return [float(x) for x in vector]


class CacheOnlyTransport:
    """Hermetic mode: every request must already be in the cache."""

    name = "cache-only"

    def post_chat(self, request: ChatRequest) -> str:
        raise CacheMissError(
            f"cache miss for chat request {chat_cache_key(request)[:12]}… "
            "(offline mode)"
        )

    def post_embedding(self, model: str, text: str) -> list[float]:
        raise CacheMissError("cache miss for embedding request (offline mode)")


# ----------------------------------------------------------------- client


@dataclass
class CallLogEntry:
    kind: str  # "chat" | "embedding"
    digest: str
    transport: str
    cached: bool
    attempts: int


class GatewayClient:
    """Caching, retrying front end over a transport.

    Shareable across threads: the disk cache is written atomically
    (temp file + rename), in-memory state is append-only, and a semaphore
    bounds the number of in-flight transport requests.
    """

    def __init__(
        self,
        transport,
        cache_dir=None,
        max_attempts: int = 5,
        backoff_base: float = 1.0,
        backoff_factor: float = 2.0,
        sleep=time.sleep,
        max_inflight: int = 8,
    ):
        self.transport = transport
        self.cache_dir = Path(cache_dir) if cache_dir else None
        if self.cache_dir:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.backoff_factor = backoff_factor
        self._sleep = sleep
        self._inflight = threading.Semaphore(max_inflight)
        self.call_log: list[CallLogEntry] = []

    # cache ------------------------------------------------------------

    def _cache_path(self, digest: str) -> Path:
        return self.cache_dir / f"{digest}.json"

    def _cache_read(self, digest: str):
        if not self.cache_dir:
            return None
        path = self._cache_path(digest)
        if not path.exists():
            return None
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except (OSError, ValueError):
            return None

    def _cache_write(self, digest: str, payload: dict) -> None:
        if not self.cache_dir:
            return
        path = self._cache_path(digest)
        tmp = path.with_suffix(f".tmp-{uuid.uuid4().hex}")
        tmp.write_text(
            json.dumps(payload, ensure_ascii=False, sort_keys=True), encoding="utf-8"
        )
        os.replace(tmp, path)

    # retry ------------------------------------------------------------

    def _with_retries(self, fn):
        attempts = 0
        delay = self.backoff_base
        while True:
            attempts += 1
            try:
                with self._inflight:
                    return fn(), attempts
            except TransientTransportError as exc:
                if attempts >= self.max_attempts:
                    raise ExhaustedRetriesError(
                        f"gave up after {attempts} attempts: {exc}"
                    ) from exc
                self._sleep(delay)
                delay *= self.backoff_factor

    # endpoints ----------------------------------------------------------

    def complete_chat(self, request: ChatRequest) -> str:
        digest = chat_cache_key(request)
        cached = self._cache_read(digest)
        if cached is not None:
            self.call_log.append(CallLogEntry("chat", digest, "cache", True, 0))
            return cached["response"]
        response, attempts = self._with_retries(lambda: self.transport.post_chat(request))
        self._cache_write(digest, {"kind": "chat", "digest": digest, "response": response})
        self.call_log.append(
            CallLogEntry("chat", digest, self.transport.name, False, attempts)
        )
        return response

    def embed(self, text: str, model: str = "embedder") -> list[float]:
        digest = embedding_cache_key(model, text)
        cached = self._cache_read(digest)
        if cached is not None:
            self.call_log.append(CallLogEntry("embedding", digest, "cache", True, 0))
            return [float(x) for x in cached["vector"]]
        vector, attempts = self._with_retries(
            lambda: self.transport.post_embedding(model, text)
        )
        self._cache_write(digest, {"kind": "embedding", "digest": digest, "vector": vector})
        self.call_log.append(
            CallLogEntry("embedding", digest, self.transport.name, False, attempts)
        )
        return vector

    def network_call_count(self) -> int:
        return sum(1 for e in self.call_log if e.transport == "http")


# ------------------------------------------------------- gateway consumers


class GatewayJudge:
    """Judge interface over a gateway client: prompt, call, parse."""

    def __init__(self, client: GatewayClient, config: JudgeConfig = JudgeConfig()):
        self.client = client
        self.config = config

    def __call__(self, problem: Problem, candidate: Candidate, nonce: str) -> Verdict:
        request = replace(
            build_judge_prompt(problem, candidate, self.config), seed_nonce=nonce
        )
        return parse_verdict(self.client.complete_chat(request))


_FENCE_RE = re.compile(r"```(?:[a-zA-Z0-9_+-]*)\n(.*?)\n?```", re.DOTALL)


def extract_code_block(text: str) -> str:
    """Last fenced block if any, else the raw text."""
    blocks = _FENCE_RE.findall(text)
    return blocks[-1] if blocks else text.strip()


def extract_code_blocks(text: str) -> list[str]:
    return [b for b in _FENCE_RE.findall(text) if b.strip()]


GENERATOR_SYSTEM = (
    "You are an expert RTL engineer. Reply with exactly one synthesizable "
    "Verilog-2001 module inside a ```verilog fence and nothing else."
)


class GatewayGenerator:
    """Samples candidate implementations from a chat endpoint."""

    def __init__(
        self,
        client: GatewayClient,
        model: str = "verilog-coder",
        temperature: float = 0.8,
        max_tokens: int = 2048,
    ):
        self.client = client
        self.model = model
        self.temperature = temperature
        self.max_tokens = max_tokens

    def sample(self, spec: str, j: int) -> str:
        request = ChatRequest(
            model=self.model,
            messages=(
                ("system", GENERATOR_SYSTEM),
                ("user", f"Implement the following specification:\n\n{spec}"),
            ),
            temperature=self.temperature,
            seed_nonce=f"gen-{j}",
            max_tokens=self.max_tokens,
        )
        return extract_code_block(self.client.complete_chat(request))


TESTGEN_SYSTEM = (
    "You write tests for Verilog designs. Reply with each test in its own "
    "fenced code block and nothing else."
)


class GatewayTestGenerator:
    """Asks a chat endpoint for per-candidate test programs."""

    def __init__(self, client: GatewayClient, model: str = "verilog-coder",
                 temperature: float = 0.8, max_tokens: int = 2048):
        self.client = client
        self.model = model
        self.temperature = temperature
        self.max_tokens = max_tokens

    def generate_tests(self, problem: Problem, candidate: Candidate, count: int = 5) -> list[str]:
        request = ChatRequest(
            model=self.model,
            messages=(
                ("system", TESTGEN_SYSTEM),
                (
                    "user",
                    f"Write {count} tests for this specification:\n{problem.spec}\n\n"
                    f"Candidate under test:\n```verilog\n{candidate.source}\n```",
                ),
            ),
            temperature=self.temperature,
            seed_nonce=f"testgen-{candidate.candidate_id}",
            max_tokens=self.max_tokens,
        )
        return extract_code_blocks(self.client.complete_chat(request))[:count]
