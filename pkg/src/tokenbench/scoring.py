"""Blended workload prices, cohort min-max normalization, composites, and headline metrics.

All scoring is pure computation over an immutable snapshot: raw factors come
from the latency summaries, eval runs, and registry prices; normalization is
min-max within the stated scope with a fixed orientation per factor (speed,
quality, reliability higher-is-better; TTFT and price lower-is-better).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, NamedTuple

from .evals import EvalRun
from .probes import DEFAULT_CONDITIONS
from .registry import Endpoint, EndpointId, FactorWeights, Registry, WorkloadPreset

if TYPE_CHECKING:
    from .store import Snapshot

# Suites entering the quality composite, uniformly weighted by default.
QUALITY_SUITES = ("mmlu_pro", "gpqa_diamond", "math_500", "aime_2025", "humaneval_plus")

# The suite whose tokens-to-solution and accuracy feed the headline metrics.
HEADLINE_SUITE = "math_500"

SCOPE_FULL = "full"


class ScoringError(ValueError):
    pass


class RawFactors(NamedTuple):
    speed: float  # tokens/sec
    ttft_p50: float  # seconds
    blended_price: float  # USD per 1M tokens
    quality: float  # 0-100
    reliability: float  # 0-1


class NormalizedFactors(NamedTuple):
    speed: float
    ttft: float
    price: float
    quality: float
    reliability: float


@dataclass(frozen=True)
class FactorVector:
    endpoint: EndpointId
    raw: RawFactors
    normalized: NormalizedFactors
    cohort: str  # model id, or "full" for registry-wide normalization
    preset: str


@dataclass(frozen=True)
class CompositeScore:
    endpoint: EndpointId
    preset: str
    scope: str
    score: float
    rank: int  # 1-based within the ranked scope; 0 when unranked
    normalized: NormalizedFactors
    raw: RawFactors

    def validate(self) -> None:
        if not 0.0 <= self.score <= 1.0 + 1e-12:
            raise ScoringError(f"composite score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class HeadlineMetrics:
    endpoint: EndpointId
    j_ca: float  # joules per correct answer; inf when accuracy is 0
    c_ca: float  # dollars per correct answer
    j_per_token: float
    price_per_token: float  # USD per token (blended)
    tokens_to_solution: float
    accuracy: float


def blended_price(prices: Endpoint, preset: WorkloadPreset, cache_hit: float = 0.0) -> float:
    """Workload-weighted blend of input, cached-input, and output prices (USD / 1M tokens)."""
    if not 0.0 <= cache_hit <= 1.0:
        raise ScoringError("cache_hit must be in [0, 1]")
    r_in = preset.input_ratio / (preset.input_ratio + preset.output_ratio)
    r_out = 1.0 - r_in
    input_price = (1.0 - cache_hit) * prices.price_input + cache_hit * prices.effective_cached_price
    return r_in * input_price + r_out * prices.price_output


def minmax_normalize(values: list[float], orientation: str = "higher_better") -> list[float]:
    """Min-max to [0, 1]; a degenerate all-equal cohort maps to all 1.0."""
    if not values:
        raise ScoringError("minmax_normalize requires at least one value")
    if orientation not in ("higher_better", "lower_better"):
        raise ScoringError(f"unknown orientation {orientation!r}")
    lo, hi = min(values), max(values)
    if hi == lo:
        return [1.0] * len(values)
    scaled = [(v - lo) / (hi - lo) for v in values]
    if orientation == "lower_better":
        scaled = [1.0 - s for s in scaled]
    return scaled


def reliability_score(completion_rate: float, ttft_p50: float, ttft_p99: float) -> float:
    """Completion rate discounted by tail dispersion; always lands in [0, 1].

    The tail term is 1 when P99 equals P50 and decays linearly to 0 as P99
    reaches 10x P50. This definition is artifact-defined, not taken from a
    published formula, and is replaceable.
    """
    if ttft_p50 <= 0:
        tail = 1.0
    else:
        tail = 1.0 - min(1.0, (ttft_p99 / ttft_p50 - 1.0) / 9.0)
    return min(1.0, max(0.0, completion_rate)) * tail


def normalize_factors(raw_by_endpoint: dict[EndpointId, RawFactors], cohort: str,
                      preset: str) -> dict[EndpointId, FactorVector]:
    endpoints = sorted(raw_by_endpoint)
    columns = list(zip(*(raw_by_endpoint[e] for e in endpoints)))
    orientations = ("higher_better", "lower_better", "lower_better", "higher_better", "higher_better")
    normalized_columns = [minmax_normalize(list(col), orient)
                          for col, orient in zip(columns, orientations)]
    result = {}
    for i, endpoint in enumerate(endpoints):
        result[endpoint] = FactorVector(
            endpoint=endpoint,
            raw=raw_by_endpoint[endpoint],
            normalized=NormalizedFactors(*(col[i] for col in normalized_columns)),
            cohort=cohort,
            preset=preset,
        )
    return result


def composite(factors: FactorVector, preset: WorkloadPreset) -> CompositeScore:
    """Weighted sum of the normalized factor vector under the preset's weights."""
    if factors.preset != preset.name:
        raise ScoringError(
            f"factor vector was normalized for preset {factors.preset!r}, not {preset.name!r}")
    score = float(sum(w * n for w, n in zip(preset.weights, factors.normalized)))
    result = CompositeScore(
        endpoint=factors.endpoint, preset=preset.name, scope=factors.cohort,
        score=score, rank=0, normalized=factors.normalized, raw=factors.raw,
    )
    result.validate()
    return result


def headline(j_per_token: float, price_per_token: float, eval_run: EvalRun) -> HeadlineMetrics:
    """Joules and dollars per correct answer: rate * tokens-to-solution / accuracy.

    An endpoint that fails every task is infinitely expensive regardless of
    how cheap its tokens are, so accuracy 0 yields the infinite sentinel.
    """
    if eval_run.tokens_to_solution is None:
        raise ScoringError(f"{eval_run.endpoint}: eval run has no reasoning tasks; "
                           "tokens_to_solution undefined")
    t = eval_run.tokens_to_solution
    a = eval_run.accuracy
    if a == 0.0:
        j_ca = c_ca = math.inf
    else:
        j_ca = j_per_token * t / a
        c_ca = price_per_token * t / a
    return HeadlineMetrics(
        endpoint=eval_run.endpoint, j_ca=j_ca, c_ca=c_ca,
        j_per_token=j_per_token, price_per_token=price_per_token,
        tokens_to_solution=t, accuracy=a,
    )


# --- snapshot-backed factor assembly and ranking ---------------------------


def quality_from_runs(runs: list[EvalRun], suites: tuple[str, ...] = QUALITY_SUITES) -> float:
    """0-100 quality composite from the most recent run per configured suite."""
    latest: dict[str, EvalRun] = {}
    for run in runs:
        if run.suite in suites:
            if run.suite not in latest or run.window[1] > latest[run.suite].window[1]:
                latest[run.suite] = run
    missing = [s for s in suites if s not in latest]
    if missing:
        raise ScoringError(f"missing eval runs for suites {missing}")
    return 100.0 * sum(latest[s].accuracy for s in suites) / len(suites)


def build_raw_factors(registry: Registry, snapshot: "Snapshot", preset: WorkloadPreset,
                      endpoints: list[Endpoint], cache_hit: float = 0.0,
                      quality_suites: tuple[str, ...] = QUALITY_SUITES) -> dict[EndpointId, RawFactors]:
    summaries = {}
    for s in snapshot.records("latency_summaries"):
        if s.conditions == DEFAULT_CONDITIONS:
            summaries[s.endpoint] = s
    runs_by_endpoint: dict[EndpointId, list[EvalRun]] = {}
    for run in snapshot.records("eval_runs"):
        runs_by_endpoint.setdefault(run.endpoint, []).append(run)

    raw = {}
    for endpoint in endpoints:
        summary = summaries.get(endpoint.id)
        if summary is None:
            raise ScoringError(f"{endpoint.id}: missing factor 'speed/ttft' "
                               "(no latency summary at the default conditions)")
        try:
            quality = quality_from_runs(runs_by_endpoint.get(endpoint.id, []), quality_suites)
        except ScoringError as exc:
            raise ScoringError(f"{endpoint.id}: missing factor 'quality' ({exc})") from None
        raw[endpoint.id] = RawFactors(
            speed=summary.output_speed,
            ttft_p50=summary.ttft_p50,
            blended_price=blended_price(endpoint, preset, cache_hit),
            quality=quality,
            reliability=reliability_score(summary.completion_rate, summary.ttft_p50,
                                          summary.ttft_p99),
        )
    return raw


def rank_leaderboard(registry: Registry, snapshot: "Snapshot", preset: WorkloadPreset,
                     scope: str = SCOPE_FULL, cache_hit: float = 0.0,
                     quality_suites: tuple[str, ...] = QUALITY_SUITES) -> list[CompositeScore]:
    """Normalize within the stated scope and rank by descending composite.

    `scope` is either "full" (registry-wide normalization, the Table-3 style)
    or "cohort:<model>" (within-model, the Table-2 style). Ties break by
    lexicographic endpoint id.
    """
    if scope == SCOPE_FULL:
        endpoints = sorted(registry.endpoints, key=lambda e: e.id)
        cohort_label = SCOPE_FULL
    elif scope.startswith("cohort:"):
        model = scope.split(":", 1)[1]
        if model not in registry.models:
            raise ScoringError(f"unknown model {model!r} in scope {scope!r}")
        endpoints = sorted((e for e in registry.endpoints if e.id.model == model),
                           key=lambda e: e.id)
        cohort_label = model
    else:
        raise ScoringError(f"unknown scope {scope!r} (expected 'full' or 'cohort:<model>')")
    if not endpoints:
        raise ScoringError(f"no endpoints in scope {scope!r}")

    raw = build_raw_factors(registry, snapshot, preset, endpoints, cache_hit, quality_suites)
    vectors = normalize_factors(raw, cohort_label, preset.name)
    scores = [composite(vectors[e.id], preset) for e in endpoints]
    scores.sort(key=lambda s: (-s.score, s.endpoint))
    return [replace(s, rank=i + 1) for i, s in enumerate(scores)]
