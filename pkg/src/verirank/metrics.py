"""Evaluation math: pass@k, reranked pass@1, judge NLL, Wilcoxon testing.

pass@k follows the unbiased estimator

    pass@k = 1 - C(n-c, k) / C(n, k)

computed through the numerically stable product form
prod_{i=0..k-1} (n-c-i)/(n-i); factorials are never formed. Percentages are
kept as exact rationals internally and rounded (half-up, 2 decimals) only
when a report is emitted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

from .domain import LABELS, PASS
from .errors import TooFewSamplesError

EXACT_ENUMERATION_LIMIT = 12  # Wilcoxon switches to the normal approximation above


@dataclass(frozen=True)
class ProblemOutcome:
    """Correct-candidate count for one problem's pool."""

    problem_id: str
    n: int
    correct_count: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"{self.problem_id}: n must be >= 1")
        if not 0 <= self.correct_count <= self.n:
            raise ValueError(
                f"{self.problem_id}: need 0 <= correct_count <= n, "
                f"got c={self.correct_count}, n={self.n}"
            )


@dataclass(frozen=True)
class PairedSample:
    label: str
    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError(f"{self.label}: paired values must be finite")


def pass_at_k_fraction(n: int, c: int, k: int) -> Fraction:
    """Exact-rational pass@k for a single problem."""
    if k < 1 or k > n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if c < 0 or c > n:
        raise ValueError(f"need 0 <= c <= n, got c={c}, n={n}")
    if c == 0:
        return Fraction(0)
    if n - c < k:
        return Fraction(1)
    miss = Fraction(1)
    for i in range(k):
        miss *= Fraction(n - c - i, n - i)
    return 1 - miss


def pass_at_k(n: int, c: int, k: int) -> float:
    """Probability that at least one of k drawn candidates is correct."""
    return float(pass_at_k_fraction(n, c, k))


def suite_pass_at_k(outcomes: Sequence[ProblemOutcome], k: int) -> Fraction:
    """Mean per-problem pass@k over a suite, as an exact percent."""
    if not outcomes:
        raise ValueError("suite_pass_at_k needs at least one outcome")
    for out in outcomes:
        if k > out.n:
            raise ValueError(f"{out.problem_id}: k={k} exceeds pool size n={out.n}")
    total = sum(
        (pass_at_k_fraction(out.n, out.correct_count, k) for out in outcomes),
        Fraction(0),
    )
    return total / len(outcomes) * 100


def reranked_pass_at_1(decisions: Sequence[tuple[object, str]]) -> Fraction:
    """Fraction of problems whose selected candidate passed, as exact percent.

    Each entry is (selected candidate or its id, ground-truth label).
    """
    if not decisions:
        raise ValueError("reranked_pass_at_1 needs at least one decision")
    correct = 0
    for _, label in decisions:
        if label not in LABELS:
            raise ValueError(f"label must be one of {LABELS}, got {label!r}")
        if label == PASS:
            correct += 1
    return Fraction(correct, len(decisions)) * 100


def discriminator_nll(
    scored: Sequence[tuple[float, str]], eps: float = 1e-12
) -> float:
    """Mean binary negative log-likelihood of judge scores against labels."""
    if not scored:
        raise ValueError("discriminator_nll needs at least one scored candidate")
    total = 0.0
    for score, label in scored:
        if label not in LABELS:
            raise ValueError(f"label must be one of {LABELS}, got {label!r}")
        f = min(max(score, eps), 1.0 - eps)
        total += -math.log(f) if label == PASS else -math.log(1.0 - f)
    return total / len(scored)


class WilcoxonResult(NamedTuple):
    statistic: float
    pvalue: float


def _average_ranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j + 2) / 2.0  # positions i..j hold ranks i+1..j+1
        for t in range(i, j + 1):
            ranks[order[t]] = avg
        i = j + 1
    return ranks


def _exact_tail_counts(ranks: Sequence[float], w_plus: float) -> tuple[int, int, int]:
    """Counts of sign assignments with W+ >= / <= the observed value.

    Ranks can be half-integers after tie averaging, so everything is doubled
    to stay in integer arithmetic; the distribution is built by subset-sum
    convolution over the doubled ranks.
    """
    doubled = [int(round(2 * r)) for r in ranks]
    total = sum(doubled)
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in doubled:
        for s in range(total, r - 1, -1):
            counts[s] += counts[s - r]
    w2 = int(round(2 * w_plus))
    ge = sum(counts[w2:])
    le = sum(counts[: w2 + 1])
    return ge, le, 2 ** len(ranks)


def _norm_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _approx_p(
    ranks: Sequence[float], w_plus: float, alternative: str
) -> float:
    n = len(ranks)
    mu = n * (n + 1) / 4.0
    tie_term = 0.0
    seen: dict[float, int] = {}
    for r in ranks:
        seen[r] = seen.get(r, 0) + 1
    for count in seen.values():
        tie_term += count**3 - count
    sigma2 = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0
    sigma = math.sqrt(sigma2)
    if sigma == 0.0:
        return 1.0
    if alternative == "greater":
        return min(1.0, _norm_sf((w_plus - mu - 0.5) / sigma))
    z = (abs(w_plus - mu) - 0.5) / sigma
    return min(1.0, 2.0 * _norm_sf(z))


def wilcoxon_signed_rank(
    pairs: Sequence[PairedSample], alternative: str = "two-sided"
) -> WilcoxonResult:
    """Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped; tied absolute differences receive average
    ranks. With n <= 12 nonzero differences the p-value is exact over all 2^n
    sign assignments; beyond that a tie-corrected normal approximation with
    continuity correction is used. ``alternative="greater"`` tests whether
    the ``a`` side tends to exceed ``b``.
    """
    if alternative not in ("two-sided", "greater"):
        raise ValueError(f"unknown alternative {alternative!r}")
    diffs = [p.a - p.b for p in pairs]
    nonzero = [d for d in diffs if d != 0.0]
    n = len(nonzero)
    if n < 5:
        raise TooFewSamplesError(
            f"need at least 5 nonzero differences, got {n} "
            f"(of {len(diffs)} pairs)"
        )
    ranks = _average_ranks([abs(d) for d in nonzero])
    w_plus = sum(r for r, d in zip(ranks, nonzero) if d > 0)
    w_minus = sum(r for r, d in zip(ranks, nonzero) if d < 0)
    if n <= EXACT_ENUMERATION_LIMIT:
        ge, le, denom = _exact_tail_counts(ranks, w_plus)
        if alternative == "greater":
            p = ge / denom
        else:
            p = min(1.0, 2 * min(ge, le) / denom)
    else:
        p = _approx_p(ranks, w_plus, alternative)
    statistic = w_minus if alternative == "greater" else min(w_plus, w_minus)
    return WilcoxonResult(statistic=statistic, pvalue=p)


def upper_bound_ratio(reranked_avg, passk_avg) -> Fraction:
    """Reranked average as a fraction of the pass@k ceiling."""
    top = _as_fraction(reranked_avg)
    bottom = _as_fraction(passk_avg)
    if bottom == 0:
        raise ZeroDivisionError("pass@k average is zero")
    return top / bottom


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as an exact number")
