"""verirank: pick one trustworthy Verilog implementation out of many.

Pipeline: load candidate pools, drop what fails the syntax gate, score the
survivors with a reranking strategy (judge majority voting, execution
consensus, token probability, embedding similarity, or a seeded random
control), select the argmax, and evaluate against execution ground truth.
"""

from .combinational import StimulusTable, evaluate_combinational
from .distill import (
    DistillRecord,
    SeedExample,
    build_candidate_pool,
    distill_labels,
    export_dataset,
)
from .domain import (
    FAIL,
    PASS,
    Candidate,
    CandidatePool,
    LabeledCandidate,
    Problem,
    RunManifest,
    load_candidates,
    load_labels,
    load_problems,
    validate_pool,
)
from .gateway import (
    ChatRequest,
    GatewayClient,
    GatewayJudge,
    HttpTransport,
    JudgeConfig,
    Verdict,
    build_judge_prompt,
    parse_verdict,
)
from .harness import RunConfig, RunReport, compare_strategies, run_benchmark
from .metrics import (
    PairedSample,
    ProblemOutcome,
    discriminator_nll,
    pass_at_k,
    reranked_pass_at_1,
    suite_pass_at_k,
    upper_bound_ratio,
    wilcoxon_signed_rank,
)
from .oracle import ExecutionResult, ExternalBackend, MiniBackend, MockBackend, execute
from .rerank import (
    ConsensusGroup,
    RerankDecision,
    ScoreVector,
    prefilter_syntax,
    score_codet,
    score_discriminator,
    score_embedding,
    score_probability,
    score_random,
    select,
)
from .reporting import ReportRow, aggregate_report, format_percent
from .syntax import SyntaxReport, check_syntax, extract_module_interface, tokenize

__version__ = "0.1.0"

__all__ = [
    "StimulusTable", "evaluate_combinational",
    "DistillRecord", "SeedExample", "build_candidate_pool", "distill_labels",
    "export_dataset",
    "FAIL", "PASS", "Candidate", "CandidatePool", "LabeledCandidate", "Problem",
    "RunManifest", "load_candidates", "load_labels", "load_problems",
    "validate_pool",
    "ChatRequest", "GatewayClient", "GatewayJudge", "HttpTransport",
    "JudgeConfig", "Verdict", "build_judge_prompt", "parse_verdict",
    "RunConfig", "RunReport", "compare_strategies", "run_benchmark",
    "PairedSample", "ProblemOutcome", "discriminator_nll", "pass_at_k",
    "reranked_pass_at_1", "suite_pass_at_k", "upper_bound_ratio",
    "wilcoxon_signed_rank",
    "ExecutionResult", "ExternalBackend", "MiniBackend", "MockBackend", "execute",
    "ConsensusGroup", "RerankDecision", "ScoreVector", "prefilter_syntax",
    "score_codet", "score_discriminator", "score_embedding", "score_probability",
    "score_random", "select",
    "ReportRow", "aggregate_report", "format_percent",
    "SyntaxReport", "check_syntax", "extract_module_interface", "tokenize",
    "__version__",
]
