"""Gateway client: prompts, verdict parsing, caching, retries."""

import dataclasses

import pytest

from verirank.domain import Candidate, Problem
from verirank.errors import (
    AuthenticationError,
    CacheMissError,
    ExhaustedRetriesError,
    UnparseableVerdictError,
)
from verirank.gateway import (
    CacheOnlyTransport,
    ChatRequest,
    GatewayClient,
    JudgeConfig,
    TRUNCATION_MARKER,
    build_judge_prompt,
    chat_cache_key,
    parse_verdict,
    prompt_template_hash,
)
from verirank.testing import (
    CannedChatTransport,
    FlakyTransport,
    MockEmbedderTransport,
    MockJudgeTransport,
    code_digest,
)

PROBLEM = Problem(id="p1", spec="Build a 2-input xor gate.", benchmark="demo")
CAND = Candidate("p1", "c1", "module x(input a, b, output y); assign y = a ^ b; endmodule", "g")


def test_judge_prompt_carries_three_dimensions_and_verdict_rule():
    request = build_judge_prompt(PROBLEM, CAND)
    system = request.messages[0][1]
    assert "CODE SEMANTIC ANALYSIS" in system
    assert "TEST CASE GENERATION" in system
    assert "FUNCTIONAL CORRECTNESS ASSESSMENT" in system
    assert "VERDICT: PASS" in system and "VERDICT: FAIL" in system
    user = request.messages[1][1]
    assert PROBLEM.spec in user and CAND.source in user


def test_judge_prompt_truncates_with_marker():
    big = dataclasses.replace(CAND, source="x" * 20000)
    request = build_judge_prompt(PROBLEM, big, JudgeConfig(char_budget=500))
    user = request.messages[1][1]
    assert TRUNCATION_MARKER in user
    assert len(user) < 20000
    # still a well-formed request
    assert request.messages[0][0] == "system"


def test_judge_prompt_deterministic():
    assert build_judge_prompt(PROBLEM, CAND) == build_judge_prompt(PROBLEM, CAND)


def test_parse_verdict_clean():
    verdict = parse_verdict("analysis here\nmore\nVERDICT: PASS")
    assert (verdict.prediction, verdict.parse_quality) == ("pass", "clean")
    assert "analysis" in verdict.reasoning


def test_parse_verdict_uses_last_verdict_line():
    verdict = parse_verdict("VERDICT: PASS\nreconsidering...\nverdict: fail")
    assert verdict.prediction == "fail"


def test_parse_verdict_salvage():
    verdict = parse_verdict("the code fails the spec. fail.")
    assert (verdict.prediction, verdict.parse_quality) == ("fail", "salvaged")


def test_parse_verdict_salvage_ignores_inflected_forms():
    verdict = parse_verdict("it passes every check: pass")
    assert verdict.prediction == "pass"
    with pytest.raises(UnparseableVerdictError):
        parse_verdict("it passes and then it failed")  # no standalone keyword


def test_parse_verdict_empty_errors():
    with pytest.raises(UnparseableVerdictError):
        parse_verdict("")


def test_chat_request_validation():
    with pytest.raises(ValueError):
        ChatRequest(model="m", messages=())
    with pytest.raises(ValueError):
        ChatRequest(model="m", messages=(("robot", "hi"),))
    with pytest.raises(ValueError):
        ChatRequest(model="m", messages=(("user", "hi"),), temperature=-1)


def test_cache_key_sensitivity():
    base = ChatRequest(model="m", messages=(("user", "hi"),), seed_nonce="vote-1")
    assert chat_cache_key(base) == chat_cache_key(dataclasses.replace(base))
    assert chat_cache_key(base) != chat_cache_key(
        dataclasses.replace(base, seed_nonce="vote-2")
    )
    assert chat_cache_key(base) != chat_cache_key(dataclasses.replace(base, model="m2"))
    assert chat_cache_key(base) != chat_cache_key(
        dataclasses.replace(base, temperature=0.5)
    )


def test_cache_hit_skips_transport(tmp_path):
    transport = CannedChatTransport("hello\nVERDICT: PASS")
    client = GatewayClient(transport, cache_dir=tmp_path, sleep=lambda s: None)
    request = ChatRequest(model="m", messages=(("user", "q"),))
    first = client.complete_chat(request)
    assert transport.calls == 1
    second = client.complete_chat(request)
    assert second == first
    assert transport.calls == 1  # served from disk
    assert client.call_log[1].cached is True
    # a fresh client over the same cache dir also hits
    other = GatewayClient(CannedChatTransport("different"), cache_dir=tmp_path)
    assert other.complete_chat(request) == first


def test_retry_backoff_schedule(tmp_path):
    sleeps = []
    transport = FlakyTransport(2, CannedChatTransport("ok"))
    client = GatewayClient(
        transport, cache_dir=tmp_path, sleep=sleeps.append, backoff_base=1.0
    )
    out = client.complete_chat(ChatRequest(model="m", messages=(("user", "q"),)))
    assert out == "ok"
    assert sleeps == [1.0, 2.0]
    assert client.call_log[-1].attempts == 3


def test_retries_exhausted(tmp_path):
    transport = FlakyTransport(99, CannedChatTransport("never"))
    client = GatewayClient(transport, cache_dir=tmp_path, sleep=lambda s: None)
    with pytest.raises(ExhaustedRetriesError):
        client.complete_chat(ChatRequest(model="m", messages=(("user", "q"),)))
    assert transport.calls == 5  # max attempts


def test_authentication_error_not_retried(tmp_path):
    class AuthFail:
        name = "mock"

        def post_chat(self, request):
            raise AuthenticationError("bad credential")

        def post_embedding(self, model, text):
            raise AuthenticationError("bad credential")

    sleeps = []
    client = GatewayClient(AuthFail(), cache_dir=tmp_path, sleep=sleeps.append)
    with pytest.raises(AuthenticationError):
        client.complete_chat(ChatRequest(model="m", messages=(("user", "q"),)))
    assert sleeps == []


def test_embedding_cached_and_stable(tmp_path):
    client = GatewayClient(MockEmbedderTransport(dim=16), cache_dir=tmp_path)
    v1 = client.embed("some text")
    v2 = client.embed("some text")
    assert v1 == v2
    assert len(v1) == 16
    assert client.call_log[1].cached
    v3 = client.embed("other text")
    assert len(v3) == 16 and v3 != v1


def test_cache_only_transport_raises_on_miss(tmp_path):
    client = GatewayClient(CacheOnlyTransport(), cache_dir=tmp_path)
    with pytest.raises(CacheMissError):
        client.complete_chat(ChatRequest(model="m", messages=(("user", "q"),)))


def test_cache_only_transport_serves_warm_cache(tmp_path):
    request = ChatRequest(model="m", messages=(("user", "q"),))
    warm = GatewayClient(CannedChatTransport("warmed"), cache_dir=tmp_path)
    warm.complete_chat(request)
    offline = GatewayClient(CacheOnlyTransport(), cache_dir=tmp_path)
    assert offline.complete_chat(request) == "warmed"
    assert offline.network_call_count() == 0


def test_prompt_template_hash_tracks_edits(monkeypatch):
    before = prompt_template_hash()
    assert before == prompt_template_hash()
    import verirank.gateway as gw

    monkeypatch.setattr(gw, "JUDGE_SYSTEM_TEMPLATE", gw.JUDGE_SYSTEM_TEMPLATE + " edited")
    assert prompt_template_hash() != before


def test_mock_judge_transport_reads_label_table():
    labels = {code_digest(CAND.source): "pass"}
    transport = MockJudgeTransport(labels)
    request = build_judge_prompt(PROBLEM, CAND)
    response = transport.post_chat(request)
    assert parse_verdict(response).prediction == "pass"
    # unknown code defaults to fail
    other = dataclasses.replace(CAND, source="module z; endmodule")
    response2 = transport.post_chat(build_judge_prompt(PROBLEM, other))
    assert parse_verdict(response2).prediction == "fail"


def test_mock_judge_accuracy_noise_is_deterministic():
    labels = {code_digest(CAND.source): "pass"}
    t1 = MockJudgeTransport(labels, accuracy=0.5, seed=1)
    t2 = MockJudgeTransport(labels, accuracy=0.5, seed=1)
    request = build_judge_prompt(PROBLEM, CAND)
    seq1 = [
        parse_verdict(t1.post_chat(dataclasses.replace(request, seed_nonce=f"v{i}"))).prediction
        for i in range(12)
    ]
    seq2 = [
        parse_verdict(t2.post_chat(dataclasses.replace(request, seed_nonce=f"v{i}"))).prediction
        for i in range(12)
    ]
    assert seq1 == seq2
    assert len(set(seq1)) == 2  # noise actually flips some votes
