"""Run orchestration: configuration, the rerank pipeline, and persistence.

A run walks each problem through validate-pool -> syntax prefilter ->
strategy scorer -> argmax selection, then evaluates against ground-truth
labels when they are available (from a labels file or by executing sliced
candidates against the problem testbench). Per-problem failures quarantine
that problem as ``errored`` without aborting the run. Output layout:

    manifest.json    run identity, config digest, seeds, prompt hash
    decisions.jsonl  one record per problem, sorted by id (deterministic)
    report.json      summary metrics + volatile timing block
    report.csv/.txt  table row(s) with an averages line
    cache/           content-addressed gateway cache, shared across runs
"""
from __future__ import annotations

import concurrent.futures
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

from . import reporting
from .domain import (
    FAIL,
    PASS,
    Candidate,
    CandidatePool,
    RunManifest,
    canonical_digest,
    load_candidates,
    load_labels,
    load_problems,
    validate_pool,
)
from .errors import ComparisonError, ConfigError, TooFewSamplesError
from .gateway import (
    CacheOnlyTransport,
    GatewayClient,
    GatewayGenerator,
    GatewayJudge,
    GatewayTestGenerator,
    HttpTransport,
    JudgeConfig,
    prompt_template_hash,
)
from .metrics import (
    PairedSample,
    ProblemOutcome,
    discriminator_nll,
    reranked_pass_at_1,
    suite_pass_at_k,
    wilcoxon_signed_rank,
)
from .oracle import STATUS_PASS, execute, make_backend
from .rerank import (
    STRATEGIES,
    dedupe_tests,
    prefilter_syntax,
    score_codet,
    score_discriminator,
    score_embedding,
    score_probability,
    score_random,
    select,
)
from .testing import MockEmbedderTransport, MockJudgeTransport, judge_label_map

log = logging.getLogger(__name__)


@dataclass
class RunConfig:
    problems_path: str
    candidates_path: str | None = None
    generator: dict | None = None
    labels_path: str | None = None
    strategy: str = "vcdrnk"
    k: int = 5
    m: int = 5
    backend: str = "mini"
    backend_options: dict = field(default_factory=dict)
    judge: dict = field(default_factory=lambda: {"kind": "mock", "accuracy": 1.0})
    embedder: dict = field(default_factory=lambda: {"kind": "mock"})
    testgen: dict = field(default_factory=lambda: {"kind": "testbench"})
    codet_tests: int = 5
    seeds: dict = field(default_factory=lambda: {"random": 0, "judge": 0})
    output_dir: str = "runs/latest"
    cache_dir: str | None = None
    report_formats: tuple = ("json", "csv", "txt")
    workers: int = 1
    model_label: str = "pool"

    def validate(self) -> None:
        if bool(self.candidates_path) == bool(self.generator):
            raise ConfigError(
                "exactly one of candidates_path / generator must be configured"
            )
        if self.strategy not in STRATEGIES:
            raise ConfigError(
                f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}"
            )
        if self.k < 1 or self.m < 1:
            raise ConfigError("k and m must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @classmethod
    def from_file(cls, path, **overrides) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        data.update({k: v for k, v in overrides.items() if v is not None})
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "report_formats" in data:
            data["report_formats"] = tuple(data["report_formats"])
        return cls(**data)

    def resolved(self) -> dict:
        """Digest-relevant view of the configuration."""
        return {
            "problems_path": self.problems_path,
            "candidates_path": self.candidates_path,
            "generator": self.generator,
            "labels_path": self.labels_path,
            "strategy": self.strategy,
            "k": self.k,
            "m": self.m,
            "backend": self.backend,
            "backend_options": self.backend_options,
            "judge": self.judge,
            "embedder": self.embedder,
            "testgen": self.testgen,
            "codet_tests": self.codet_tests,
            "seeds": self.seeds,
            "model_label": self.model_label,
            "prompt_template_hash": prompt_template_hash(),
        }


@dataclass
class ComparisonSummary:
    n_pairs: int
    statistic: float | None
    pvalue: float | None
    significant: bool | None
    alpha: float
    alternative: str
    note: str = ""


@dataclass
class RunReport:
    manifest: RunManifest
    decisions: list[dict]
    summary: dict
    latency: dict
    output_dir: Path
    k: int

    @property
    def decision_records(self) -> list[dict]:
        return self.decisions


class _Stopwatch:
    def __init__(self):
        self.stages: dict[str, float] = {}

    def add(self, stage: str, seconds: float) -> None:
        self.stages[stage] = self.stages.get(stage, 0.0) + seconds

    def timed(self, stage: str):
        watch = self

        class _Ctx:
            def __enter__(self):
                self.start = time.perf_counter()
                return self

            def __exit__(self, *exc):
                watch.add(stage, time.perf_counter() - self.start)
                return False

        return _Ctx()


def _file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _build_transport(spec: dict, label_map=None):
    kind = spec.get("kind", "mock")
    if kind == "mock":
        if label_map is None:
            raise ConfigError("mock judge requires ground-truth labels")
        return MockJudgeTransport(
            label_map,
            accuracy=float(spec.get("accuracy", 1.0)),
            seed=int(spec.get("seed", 0)),
        )
    if kind == "http":
        if "base_url" not in spec:
            raise ConfigError("http endpoint needs base_url")
        return HttpTransport(
            spec["base_url"], api_key_env=spec.get("api_key_env", "VERIRANK_API_KEY")
        )
    if kind == "cache-only":
        return CacheOnlyTransport()
    raise ConfigError(f"unknown endpoint kind {kind!r}")


def _build_embedder_client(spec: dict, cache_dir):
    kind = spec.get("kind", "mock")
    if kind == "mock":
        transport = MockEmbedderTransport(dim=int(spec.get("dim", 64)))
    elif kind == "http":
        transport = HttpTransport(
            spec["base_url"], api_key_env=spec.get("api_key_env", "VERIRANK_API_KEY")
        )
    elif kind == "cache-only":
        transport = CacheOnlyTransport()
    else:
        raise ConfigError(f"unknown embedder kind {kind!r}")
    client = GatewayClient(transport, cache_dir=cache_dir)
    model = spec.get("model", "embedder")

    class _Embedder:
        def embed(self, text: str):
            return client.embed(text, model=model)

    return _Embedder(), client


def _generate_pools(config: RunConfig, problems, cache_dir, clients: list):
    from .testing import CannedChatTransport

    spec = config.generator or {}
    kind = spec.get("kind", "canned")
    if kind == "canned":
        transport = CannedChatTransport(spec.get("responses", []))
    elif kind == "http":
        transport = HttpTransport(
            spec["base_url"], api_key_env=spec.get("api_key_env", "VERIRANK_API_KEY")
        )
    elif kind == "cache-only":
        transport = CacheOnlyTransport()
    else:
        raise ConfigError(f"unknown generator kind {kind!r}")
    client = GatewayClient(transport, cache_dir=cache_dir)
    clients.append(client)
    generator = GatewayGenerator(
        client,
        model=spec.get("model", "verilog-coder"),
        temperature=float(spec.get("temperature", 0.8)),
    )
    n = int(spec.get("n", 10))
    pools = {}
    for problem in problems:
        candidates = tuple(
            Candidate(
                problem_id=problem.id,
                candidate_id=f"gen-{j:03d}",
                source=generator.sample(problem.spec, j),
                generator=spec.get("model", kind),
            )
            for j in range(1, n + 1)
        )
        pools[problem.id] = CandidatePool(problem_id=problem.id, candidates=candidates)
    return pools


def _label_sliced(config, problems_by_id, sliced, labels_file, watch):
    """Ground-truth labels for every sliced candidate, where obtainable."""
    labels: dict[tuple[str, str], str] = {}
    backend = None
    with watch.timed("label"):
        for pid, pool in sliced.items():
            problem = problems_by_id[pid]
            for cand in pool.candidates:
                key = (pid, cand.candidate_id)
                if labels_file and key in labels_file:
                    labels[key] = labels_file[key]
                    continue
                if problem.testbench is None:
                    continue
                if backend is None:
                    backend = make_backend(config.backend, config.backend_options)
                result = execute(cand, problem.testbench, backend)
                if result.status in ("infra_error", "timeout"):
                    log.warning(
                        "cannot label %s/%s: %s", pid, cand.candidate_id, result.status
                    )
                    continue
                labels[key] = PASS if result.status == STATUS_PASS else FAIL
    return labels


def _make_scorer(config: RunConfig, labels, sliced, cache_dir, clients: list):
    strategy = config.strategy
    if strategy == "probability":
        return lambda problem, cands: score_probability(cands)
    if strategy == "random":
        seed = int(config.seeds.get("random", 0))
        return lambda problem, cands: score_random(problem.id, cands, seed=seed)
    if strategy == "coderank":
        embedder, client = _build_embedder_client(config.embedder, cache_dir)
        clients.append(client)
        return lambda problem, cands: score_embedding(problem, cands, embedder)
    if strategy == "vcdrnk":
        judge_config = JudgeConfig(
            model=config.judge.get("model", "verilog-judge"),
            temperature=float(config.judge.get("temperature", 0.6)),
            max_tokens=int(config.judge.get("max_tokens", 1024)),
        )
        label_map = None
        if config.judge.get("kind", "mock") == "mock":
            every = [c for pool in sliced.values() for c in pool.candidates]
            label_map = judge_label_map(every, labels, judge_config)
        judge_spec = dict(config.judge)
        judge_spec.setdefault("seed", int(config.seeds.get("judge", 0)))
        transport = _build_transport(judge_spec, label_map)
        client = GatewayClient(transport, cache_dir=cache_dir)
        clients.append(client)
        judge = GatewayJudge(client, judge_config)
        return lambda problem, cands: score_discriminator(
            problem, cands, judge, m=config.m
        )
    if strategy == "codet":
        testgen_kind = config.testgen.get("kind", "testbench")
        backend = make_backend(config.backend, config.backend_options)
        if testgen_kind == "testbench":
            def scorer(problem, cands):
                if problem.testbench is None:
                    raise ConfigError(
                        f"problem {problem.id!r} has no testbench for codet"
                    )
                tests = dedupe_tests([problem.testbench])
                return score_codet(cands, tests, backend)

            return scorer
        transport = _build_transport(config.testgen)
        client = GatewayClient(transport, cache_dir=cache_dir)
        clients.append(client)
        generator = GatewayTestGenerator(
            client, model=config.testgen.get("model", "verilog-coder")
        )

        def scorer(problem, cands):
            pooled: list[str] = []
            for cand in cands:
                pooled.extend(
                    generator.generate_tests(problem, cand, config.codet_tests)
                )
            tests = dedupe_tests(pooled)
            return score_codet(cands, tests, backend)

        return scorer
    raise ConfigError(f"unknown strategy {strategy!r}")


def _run_problem(problem, pool, scorer, watch):
    with watch.timed("prefilter"):
        pf = prefilter_syntax(pool)
    with watch.timed("score"):
        vector = scorer(problem, list(pf.survivors))
    with watch.timed("select"):
        decision = select(
            vector, prefiltered_out=pf.removed, syntax_fallback=pf.fallback
        )
    return decision


def run_benchmark(config: RunConfig) -> RunReport:
    total_start = time.perf_counter()
    config.validate()
    watch = _Stopwatch()
    out_dir = Path(config.output_dir)
    cache_dir = Path(config.cache_dir) if config.cache_dir else out_dir / "cache"
    clients: list[GatewayClient] = []

    with watch.timed("load"):
        problems = load_problems(config.problems_path)
        problems_by_id = {p.id: p for p in problems}
        if config.candidates_path:
            pools = load_candidates(config.candidates_path, problems)
            pools_digest = _file_digest(config.candidates_path)
        else:
            pools = _generate_pools(config, problems, cache_dir, clients)
            pools_digest = canonical_digest(
                {pid: [c.source for c in pool.candidates] for pid, pool in pools.items()}
            )
        labels_file = load_labels(config.labels_path) if config.labels_path else None

    errored: dict[str, str] = {}
    sliced: dict[str, CandidatePool] = {}
    for problem in problems:
        pool = pools.get(problem.id)
        if pool is None:
            errored[problem.id] = "no candidates loaded for this problem"
            continue
        try:
            sliced[problem.id] = validate_pool(pool, config.k)
        except Exception as exc:
            errored[problem.id] = f"{type(exc).__name__}: {exc}"

    labels = _label_sliced(config, problems_by_id, sliced, labels_file, watch)
    scorer = _make_scorer(config, labels, sliced, cache_dir, clients)

    decisions: dict[str, dict] = {}

    def process(pid: str):
        problem = problems_by_id[pid]
        return _run_problem(problem, sliced[pid], scorer, watch)

    pids = sorted(sliced)
    if config.workers > 1:
        with concurrent.futures.ThreadPoolExecutor(config.workers) as pool_exec:
            futures = {pid: pool_exec.submit(process, pid) for pid in pids}
            results = {}
            for pid, fut in futures.items():
                try:
                    results[pid] = fut.result()
                except Exception as exc:
                    errored[pid] = f"{type(exc).__name__}: {exc}"
    else:
        results = {}
        for pid in pids:
            try:
                results[pid] = process(pid)
            except Exception as exc:
                errored[pid] = f"{type(exc).__name__}: {exc}"

    with watch.timed("metrics"):
        outcomes: list[ProblemOutcome] = []
        reranked_pairs: list[tuple[str, str]] = []
        nll_scored: list[tuple[float, str]] = []
        for pid, decision in sorted(results.items()):
            pool = sliced[pid]
            known = {
                cand.candidate_id: labels.get((pid, cand.candidate_id))
                for cand in pool.candidates
            }
            rec = {
                "problem_id": pid,
                "strategy": config.strategy,
                "selected_candidate_id": decision.selected_candidate_id,
                "scores": [[cid, score] for cid, score in decision.score_vector.scores],
                "prefiltered_out": list(decision.prefiltered_out),
                "syntax_fallback": decision.syntax_fallback,
                "tie_broken": decision.tie_broken,
                "label": known.get(decision.selected_candidate_id),
                "labels": {cid: lab for cid, lab in known.items() if lab is not None},
            }
            decisions[pid] = rec
            if all(lab is not None for lab in known.values()):
                outcomes.append(
                    ProblemOutcome(
                        problem_id=pid,
                        n=pool.n,
                        correct_count=sum(1 for lab in known.values() if lab == PASS),
                    )
                )
            if rec["label"] is not None:
                reranked_pairs.append((decision.selected_candidate_id, rec["label"]))
            if decision.score_vector.votes is not None:
                for cid, passes, m in decision.score_vector.votes:
                    if known.get(cid) is not None:
                        nll_scored.append((passes / m, known[cid]))

        summary: dict = {
            "problems": len(problems),
            "decided": len(results),
            "errored": dict(sorted(errored.items())),
            "labeled_problems": len(outcomes),
            "strategy": config.strategy,
            "k": config.k,
            "m": config.m,
        }
        pass1 = passk = reranked = None
        if outcomes:
            pass1 = suite_pass_at_k(outcomes, 1)
            passk = suite_pass_at_k(outcomes, config.k)
            summary["pass1"] = reporting.format_percent(pass1)
            summary["passk"] = reporting.format_percent(passk)
        if reranked_pairs:
            reranked = reranked_pass_at_1(reranked_pairs)
            summary["reranked_pass1"] = {
                config.strategy: reporting.format_percent(reranked)
            }
        if nll_scored:
            summary["discriminator_nll"] = round(discriminator_nll(nll_scored), 6)

    config_digest = canonical_digest(config.resolved())
    run_id = canonical_digest(
        {
            "config": config_digest,
            "problems": _file_digest(config.problems_path),
            "pools": pools_digest,
        }
    )[:16]
    manifest = RunManifest(
        run_id=run_id,
        config_digest=config_digest,
        created_at=datetime.now(timezone.utc).isoformat(),
        strategy=config.strategy,
        k=config.k,
        m=config.m,
        seeds={name: int(v) for name, v in config.seeds.items()},
    )

    with watch.timed("emit"):
        out_dir.mkdir(parents=True, exist_ok=True)
        manifest_record = manifest.to_record()
        manifest_record["prompt_template_hash"] = prompt_template_hash()
        (out_dir / "manifest.json").write_text(
            json.dumps(manifest_record, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        decision_lines = [
            json.dumps(decisions[pid], sort_keys=True, ensure_ascii=False)
            for pid in sorted(decisions)
        ]
        for pid in sorted(errored):
            decision_lines.append(
                json.dumps(
                    {"problem_id": pid, "errored": errored[pid]}, sort_keys=True
                )
            )
        (out_dir / "decisions.jsonl").write_text(
            "\n".join(decision_lines) + ("\n" if decision_lines else ""),
            encoding="utf-8",
        )
        row = reporting.ReportRow.make(
            model=config.model_label,
            pass1=pass1,
            reranked={config.strategy: reranked},
            passk=passk,
        )
        table = reporting.aggregate_report([row])
        if "csv" in config.report_formats:
            (out_dir / "report.csv").write_text(
                reporting.render_csv(table, config.k), encoding="utf-8"
            )
        if "txt" in config.report_formats:
            (out_dir / "report.txt").write_text(
                reporting.render_text(table, config.k), encoding="utf-8"
            )

    total = time.perf_counter() - total_start
    latency = {stage: round(sec, 6) for stage, sec in watch.stages.items()}
    latency["total"] = round(total, 6)
    network_calls = sum(c.network_call_count() for c in clients)
    gateway_log = [
        {"kind": e.kind, "transport": e.transport, "cached": e.cached}
        for client in clients
        for e in client.call_log
    ]
    report_payload = {
        "run_id": run_id,
        "config_digest": config_digest,
        "summary": summary,
        "network_calls": network_calls,
    }
    if "json" in config.report_formats:
        volatile = dict(report_payload)
        volatile["created_at"] = manifest.created_at
        volatile["latency"] = latency
        (out_dir / "report.json").write_text(
            json.dumps(volatile, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    report = RunReport(
        manifest=manifest,
        decisions=[decisions[pid] for pid in sorted(decisions)],
        summary=summary,
        latency=latency,
        output_dir=out_dir,
        k=config.k,
    )
    report.summary["network_calls"] = network_calls
    report.summary["gateway_log"] = gateway_log
    return report


def load_decisions(path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    return records


def _paired_outcomes(records_a, records_b) -> list[PairedSample]:
    by_id_a = {r["problem_id"]: r for r in records_a if "errored" not in r}
    by_id_b = {r["problem_id"]: r for r in records_b if "errored" not in r}
    if set(by_id_a) != set(by_id_b):
        raise ComparisonError(
            "runs cover different problem sets: "
            f"{sorted(set(by_id_a) ^ set(by_id_b))[:5]}..."
        )
    pairs = []
    for pid in sorted(by_id_a):
        la = by_id_a[pid].get("label")
        lb = by_id_b[pid].get("label")
        if la is None or lb is None:
            raise ComparisonError(f"problem {pid!r} lacks a ground-truth label")
        pairs.append(
            PairedSample(label=pid, a=1.0 if la == PASS else 0.0, b=1.0 if lb == PASS else 0.0)
        )
    return pairs


def compare_strategies(
    report_a,
    report_b,
    alternative: str = "greater",
    alpha: float = 0.01,
) -> ComparisonSummary:
    """Wilcoxon signed-rank comparison of per-problem selection outcomes."""
    records_a = report_a.decision_records if isinstance(report_a, RunReport) else report_a
    records_b = report_b.decision_records if isinstance(report_b, RunReport) else report_b
    pairs = _paired_outcomes(records_a, records_b)
    try:
        result = wilcoxon_signed_rank(pairs, alternative=alternative)
    except TooFewSamplesError as exc:
        return ComparisonSummary(
            n_pairs=len(pairs),
            statistic=None,
            pvalue=None,
            significant=None,
            alpha=alpha,
            alternative=alternative,
            note=f"not comparable: {exc}",
        )
    return ComparisonSummary(
        n_pairs=len(pairs),
        statistic=result.statistic,
        pvalue=result.pvalue,
        significant=result.pvalue < alpha,
        alpha=alpha,
        alternative=alternative,
    )


def recompute_summary(run_dir, labels_path=None) -> dict:
    """Rebuild metric summaries from persisted decisions (+ optional labels)."""
    run_dir = Path(run_dir)
    records = load_decisions(run_dir / "decisions.jsonl")
    extra = load_labels(labels_path) if labels_path else {}
    outcomes = []
    reranked_pairs = []
    k = None
    for rec in records:
        if "errored" in rec:
            continue
        pid = rec["problem_id"]
        known = dict(rec.get("labels") or {})
        for cid, _ in rec.get("scores", []):
            if (pid, cid) in extra:
                known[cid] = extra[(pid, cid)]
        pool_ids = [cid for cid, _ in rec.get("scores", [])] + list(
            rec.get("prefiltered_out", [])
        )
        k = max(k or 0, len(pool_ids))
        selected = rec["selected_candidate_id"]
        label = extra.get((pid, selected), rec.get("label"))
        if label is not None:
            reranked_pairs.append((selected, label))
        if pool_ids and all(cid in known for cid in pool_ids):
            outcomes.append(
                ProblemOutcome(
                    problem_id=pid,
                    n=len(pool_ids),
                    correct_count=sum(1 for cid in pool_ids if known[cid] == PASS),
                )
            )
    summary: dict = {"decided": len([r for r in records if "errored" not in r])}
    if outcomes and k:
        summary["pass1"] = reporting.format_percent(suite_pass_at_k(outcomes, 1))
        summary["passk"] = reporting.format_percent(suite_pass_at_k(outcomes, k))
    if reranked_pairs:
        summary["reranked_pass1"] = reporting.format_percent(
            reranked_pass_at_1(reranked_pairs)
        )
    return summary
