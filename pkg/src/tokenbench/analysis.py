"""Cross-endpoint analyses: within-model ranges, preset overlap, weight sensitivity,
factor ablation, bootstrap intervals, and leave-one-out robustness.

Everything here is pure computation over an immutable snapshot; resamples
and perturbations are seeded and reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .probes import DEFAULT_CONDITIONS, ProbeRecord, summarize
from .registry import FACTOR_NAMES, EndpointId, FactorWeights, Registry, WorkloadPreset, cohort
from .scoring import (QUALITY_SUITES, CompositeScore, RawFactors, blended_price, composite,
                      normalize_factors, build_raw_factors, rank_leaderboard, reliability_score)
from .tasks import parse_context_suite
from .util import nearest_rank

if TYPE_CHECKING:
    from .store import Snapshot


class AnalysisError(ValueError):
    pass


# --- within-model ranges ----------------------------------------------------

# (axis name, gap kind); the 12 measurement axes reported per model cohort.
WITHIN_MODEL_AXES = [
    ("output_speed", "ratio"),
    ("ttft_p50", "ratio"),
    ("ttft_p99", "ratio"),
    ("blended_price_3to1", "ratio"),
    ("quality", "points"),
    ("aime_accuracy", "points"),
    ("code_accuracy", "points"),
    ("effective_context", "ratio"),
    ("fidelity", "points"),
    ("j_per_token", "ratio"),
    ("j_per_correct", "ratio"),
    ("usd_per_correct", "ratio"),
]

AIME_SUITE = "aime_2025"
CODE_SUITE = "humaneval_plus"


@dataclass(frozen=True)
class AxisRange:
    axis: str
    min: float
    max: float
    gap: float
    gap_kind: str  # "ratio" (max/min) or "points" (max - min)


@dataclass(frozen=True)
class WithinModelRange:
    model: str
    axes: list[AxisRange]


def _latest_accuracy(snapshot: "Snapshot", endpoint: EndpointId, suite: str) -> float | None:
    best = None
    for run in snapshot.records("eval_runs"):
        if run.endpoint == endpoint and run.suite == suite:
            if best is None or run.window[1] > best.window[1]:
                best = run
    return None if best is None else best.accuracy


def _effective_context(snapshot: "Snapshot", endpoint: EndpointId,
                       threshold: float = 0.90) -> float:
    """Largest context-sweep level retaining >= threshold accuracy, from stored runs."""
    best = 0
    for run in snapshot.records("eval_runs"):
        if run.endpoint != endpoint:
            continue
        level = parse_context_suite(run.suite)
        if level is not None and run.accuracy >= threshold:
            best = max(best, level)
    return float(best)


def axis_values(registry: Registry, snapshot: "Snapshot",
                model: str) -> dict[str, dict[EndpointId, float]]:
    """Per-axis value maps for a model cohort; raises if any axis is missing a value."""
    members = cohort(registry, model)
    if not members:
        raise AnalysisError(f"empty cohort for model {model!r}")
    chat = registry.presets.get("chat")
    if chat is None:
        from .registry import builtin_presets

        chat = next(p for p in builtin_presets() if p.name == "chat")

    summaries = {s.endpoint: s for s in snapshot.records("latency_summaries")
                 if s.conditions == DEFAULT_CONDITIONS}
    energy = {r.endpoint: r for r in snapshot.records("energy_estimates")}
    fidelity = {r.endpoint: r for r in snapshot.records("fidelity")}
    headline = {r.endpoint: r for r in snapshot.records("headline")}
    quality = {e.id: None for e in members}
    for e in members:
        runs = [r for r in snapshot.records("eval_runs") if r.endpoint == e.id]
        latest = {}
        for run in runs:
            if run.suite in QUALITY_SUITES:
                if run.suite not in latest or run.window[1] > latest[run.suite].window[1]:
                    latest[run.suite] = run
        if len(latest) == len(QUALITY_SUITES):
            quality[e.id] = 100.0 * sum(r.accuracy for r in latest.values()) / len(latest)

    values: dict[str, dict[EndpointId, float]] = {axis: {} for axis, _ in WITHIN_MODEL_AXES}
    for e in members:
        eid = e.id
        for axis, getter in (
            ("output_speed", lambda: summaries[eid].output_speed),
            ("ttft_p50", lambda: summaries[eid].ttft_p50),
            ("ttft_p99", lambda: summaries[eid].ttft_p99),
            ("blended_price_3to1", lambda: blended_price(e, chat)),
            ("quality", lambda: quality[eid]),
            ("aime_accuracy", lambda: _scaled(_latest_accuracy(snapshot, eid, AIME_SUITE))),
            ("code_accuracy", lambda: _scaled(_latest_accuracy(snapshot, eid, CODE_SUITE))),
            ("effective_context", lambda: _effective_context(snapshot, eid)),
            ("fidelity", lambda: fidelity[eid].f),
            ("j_per_token", lambda: energy[eid].j_per_token),
            ("j_per_correct", lambda: headline[eid].j_ca),
            ("usd_per_correct", lambda: headline[eid].c_ca),
        ):
            try:
                value = getter()
            except KeyError:
                value = None
            if value is None:
                raise AnalysisError(f"{eid}: missing axis {axis!r} in snapshot")
            values[axis][eid] = value
    return values


def _scaled(accuracy: float | None) -> float | None:
    return None if accuracy is None else 100.0 * accuracy


def _axis_range(axis: str, kind: str, vals: Sequence[float]) -> AxisRange:
    lo, hi = min(vals), max(vals)
    if kind == "ratio":
        gap = hi / lo if lo > 0 else math.inf
    else:
        gap = hi - lo
    return AxisRange(axis=axis, min=lo, max=hi, gap=gap, gap_kind=kind)


def within_model(registry: Registry, snapshot: "Snapshot", model: str) -> WithinModelRange:
    """Min, max, and ratio-or-gap across one model's endpoints, on all 12 axes."""
    values = axis_values(registry, snapshot, model)
    axes = [_axis_range(axis, kind, list(values[axis].values()))
            for axis, kind in WITHIN_MODEL_AXES]
    return WithinModelRange(model=model, axes=axes)


# --- ranking overlap --------------------------------------------------------


def topk_overlap(ranking_a: Sequence[CompositeScore], ranking_b: Sequence[CompositeScore],
                 k: int) -> int:
    universe_a = {s.endpoint for s in ranking_a}
    universe_b = {s.endpoint for s in ranking_b}
    if universe_a != universe_b:
        raise AnalysisError("rankings cover different endpoint universes")
    if k > len(universe_a):
        raise AnalysisError(f"k={k} exceeds the universe size {len(universe_a)}")
    top_a = {s.endpoint for s in ranking_a[:k]}
    top_b = {s.endpoint for s in ranking_b[:k]}
    return len(top_a & top_b)


@dataclass(frozen=True)
class OverlapMatrix:
    presets: list[str]
    cells: list[list[int]]
    k: int

    def validate(self) -> None:
        n = len(self.presets)
        for i in range(n):
            if self.cells[i][i] != self.k:
                raise AnalysisError("overlap matrix diagonal must equal k")
            for j in range(n):
                if self.cells[i][j] != self.cells[j][i]:
                    raise AnalysisError("overlap matrix must be symmetric")


def overlap_matrix(registry: Registry, snapshot: "Snapshot", presets: list[WorkloadPreset],
                   k: int = 10, scope: str = "full") -> OverlapMatrix:
    if len(presets) < 2:
        raise AnalysisError("overlap_matrix needs at least two presets")
    rankings = [rank_leaderboard(registry, snapshot, p, scope=scope) for p in presets]
    n = len(presets)
    cells = [[topk_overlap(rankings[i], rankings[j], k) for j in range(n)] for i in range(n)]
    matrix = OverlapMatrix(presets=[p.name for p in presets], cells=cells, k=k)
    matrix.validate()
    return matrix


# --- weight perturbation and ablation ---------------------------------------


def perturb_weights(preset: WorkloadPreset, factor: str, delta: float) -> WorkloadPreset:
    """Shift one factor weight by delta, redistributing the rest proportionally."""
    if factor not in FACTOR_NAMES:
        raise AnalysisError(f"unknown factor {factor!r}")
    index = FACTOR_NAMES.index(factor)
    w = preset.weights[index]
    target = w + delta
    if not 0.0 <= target <= 1.0:
        raise AnalysisError(f"perturbed weight {target} for {factor!r} falls outside [0, 1]")
    if w == 1.0 and delta != 0.0:
        raise AnalysisError(f"cannot redistribute: {factor!r} already carries all weight")
    scale = (1.0 - target) / (1.0 - w)
    weights = [target if i == index else preset.weights[i] * scale
               for i in range(len(FACTOR_NAMES))]
    perturbed = replace(preset, weights=FactorWeights(*weights))
    perturbed.validate()
    return perturbed


def ablation_weights(preset: WorkloadPreset, factor: str) -> WorkloadPreset:
    """Zero one factor and rescale the rest to sum to 1."""
    index = FACTOR_NAMES.index(factor)
    w = preset.weights[index]
    if w >= 1.0:
        raise AnalysisError(f"cannot ablate {factor!r}: it carries the entire weight")
    weights = [0.0 if i == index else preset.weights[i] / (1.0 - w)
               for i in range(len(FACTOR_NAMES))]
    ablated = replace(preset, weights=FactorWeights(*weights))
    ablated.validate()
    return ablated


def spearman_rho(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman rank correlation with average ranks for ties."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise AnalysisError("spearman_rho needs two equally sized sequences of length >= 2")

    def average_ranks(values: Sequence[float]) -> np.ndarray:
        arr = np.asarray(values, dtype=float)
        order = np.argsort(arr, kind="stable")
        ranks = np.empty(len(arr), dtype=float)
        i = 0
        while i < len(arr):
            j = i
            while j + 1 < len(arr) and arr[order[j + 1]] == arr[order[i]]:
                j += 1
            ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
            i = j + 1
        return ranks

    ra, rb = average_ranks(xs), average_ranks(ys)
    ra -= ra.mean()
    rb -= rb.mean()
    denom = math.sqrt(float(ra @ ra) * float(rb @ rb))
    if denom == 0.0:
        return 1.0  # all-tied rankings are identical
    return float(ra @ rb) / denom


@dataclass(frozen=True)
class AblationRow:
    preset: str
    ablated_factor: str
    weights: FactorWeights
    spearman_vs_full: float
    topk_overlap: int
    k: int


def ablate(registry: Registry, snapshot: "Snapshot", preset: WorkloadPreset, factor: str,
           k: int = 10, scope: str = "full") -> AblationRow:
    ablated_preset = ablation_weights(preset, factor)
    full = rank_leaderboard(registry, snapshot, preset, scope=scope)
    partial = rank_leaderboard(registry, snapshot, ablated_preset, scope=scope)
    rank_full = {s.endpoint: s.rank for s in full}
    rank_partial = {s.endpoint: s.rank for s in partial}
    endpoints = sorted(rank_full)
    rho = spearman_rho([rank_full[e] for e in endpoints], [rank_partial[e] for e in endpoints])
    return AblationRow(
        preset=preset.name, ablated_factor=factor, weights=ablated_preset.weights,
        spearman_vs_full=rho, topk_overlap=topk_overlap(full, partial, k), k=k,
    )


def ablation_report(registry: Registry, snapshot: "Snapshot", preset: WorkloadPreset,
                    k: int = 10, scope: str = "full") -> list[AblationRow]:
    return [ablate(registry, snapshot, preset, factor, k=k, scope=scope)
            for factor in FACTOR_NAMES]


@dataclass(frozen=True)
class SensitivityRow:
    preset: str
    factor: str
    delta: float
    feasible: bool  # False when the shift would push the weight outside [0, 1]
    max_rank_shift_top_k: int | None
    leader_changed: bool | None


def sensitivity_report(registry: Registry, snapshot: "Snapshot", presets: list[WorkloadPreset],
                       delta: float = 0.10, k: int = 10,
                       scope: str = "full") -> list[SensitivityRow]:
    """Re-rank under +/-delta single-factor perturbations; one row per (preset, factor, sign)."""
    rows = []
    for preset in presets:
        baseline = rank_leaderboard(registry, snapshot, preset, scope=scope)
        base_rank = {s.endpoint: s.rank for s in baseline}
        top = [s.endpoint for s in baseline[:k]]
        leader = baseline[0].endpoint
        for factor in FACTOR_NAMES:
            for signed in (delta, -delta):
                try:
                    perturbed = perturb_weights(preset, factor, signed)
                except AnalysisError:
                    rows.append(SensitivityRow(preset.name, factor, signed, False, None, None))
                    continue
                ranking = rank_leaderboard(registry, snapshot, perturbed, scope=scope)
                new_rank = {s.endpoint: s.rank for s in ranking}
                max_shift = max(abs(new_rank[e] - base_rank[e]) for e in top)
                rows.append(SensitivityRow(
                    preset.name, factor, signed, True, max_shift,
                    ranking[0].endpoint != leader,
                ))
    return rows


# --- bootstrap --------------------------------------------------------------


@dataclass(frozen=True)
class BootstrapCI:
    endpoint: EndpointId
    preset: str
    n_resamples: int
    median: float
    lower: float
    upper: float

    def validate(self) -> None:
        if not self.lower <= self.median <= self.upper:
            raise AnalysisError("bootstrap interval must bracket its median")


def bootstrap_ci(registry: Registry, snapshot: "Snapshot", endpoint: EndpointId,
                 preset: WorkloadPreset, n: int = 1000, seed: int = 0,
                 scope: str = "full", window_seconds: float = 86_400.0,
                 quality_suites: tuple[str, ...] = QUALITY_SUITES) -> BootstrapCI:
    """Percentile bootstrap of one endpoint's composite score.

    Each resample draws with replacement from the endpoint's probe window
    and eval-run pool, recomputes its raw factors, renormalizes within the
    scope (other endpoints held at their observed values), and recomputes
    the composite. Intervals use the same nearest-rank rule as the probe
    percentiles.
    """
    probe_pool: list[ProbeRecord] = [
        r for r in snapshot.records("probe_records")
        if r.endpoint == endpoint and r.conditions == DEFAULT_CONDITIONS
        and snapshot.as_of - window_seconds <= r.request_time <= snapshot.as_of]
    eval_pool = [r for r in snapshot.records("eval_runs")
                 if r.endpoint == endpoint and r.suite in quality_suites]
    if not probe_pool or not eval_pool:
        raise AnalysisError(f"{endpoint}: empty probe window or eval pool")

    if scope == "full":
        endpoints = sorted(registry.endpoints, key=lambda e: e.id)
        cohort_label = "full"
    else:
        model = scope.split(":", 1)[1]
        endpoints = [e for e in registry.endpoints if e.id.model == model]
        cohort_label = model
    baseline = build_raw_factors(registry, snapshot, preset, endpoints,
                                 quality_suites=quality_suites)
    target = registry.endpoint(endpoint)
    baseline_quality_runs = {r.suite: r for r in eval_pool}
    price = blended_price(target, preset)

    rng = np.random.default_rng(seed)
    scores = []
    for _ in range(n):
        probes = [probe_pool[i] for i in rng.integers(0, len(probe_pool), size=len(probe_pool))]
        evals = [eval_pool[i] for i in rng.integers(0, len(eval_pool), size=len(eval_pool))]
        summary = summarize(probes)
        by_suite: dict[str, list[float]] = {}
        for run in evals:
            by_suite.setdefault(run.suite, []).append(run.accuracy)
        # Suites absent from a resample fall back to their observed accuracy.
        accuracies = {s: (sum(v) / len(v) if (v := by_suite.get(s)) else
                          baseline_quality_runs[s].accuracy) for s in quality_suites}
        quality = 100.0 * sum(accuracies[s] for s in quality_suites) / len(quality_suites)
        raw = dict(baseline)
        raw[endpoint] = RawFactors(
            speed=summary.output_speed,
            ttft_p50=summary.ttft_p50,
            blended_price=price,
            quality=quality,
            reliability=reliability_score(summary.completion_rate, summary.ttft_p50,
                                          summary.ttft_p99),
        )
        vectors = normalize_factors(raw, cohort_label, preset.name)
        scores.append(composite(vectors[endpoint], preset).score)

    scores.sort()
    ci = BootstrapCI(
        endpoint=endpoint, preset=preset.name, n_resamples=n,
        median=nearest_rank(scores, 0.50),
        lower=nearest_rank(scores, 0.025),
        upper=nearest_rank(scores, 0.975),
    )
    ci.validate()
    return ci


# --- leave-one-out robustness -----------------------------------------------


def leave_one_out(registry: Registry, snapshot: "Snapshot", model: str,
                  axes: list[str] | None = None) -> dict[str, float]:
    """Max relative change of each axis's reported gap over all single-endpoint drops."""
    values = axis_values(registry, snapshot, model)
    kinds = dict(WITHIN_MODEL_AXES)
    if axes is None:
        axes = ["output_speed", "blended_price_3to1", "fidelity", "j_per_correct"]
    members = sorted(values[axes[0]])
    if len(members) < 3:
        raise AnalysisError(f"cohort for {model!r} too small for leave-one-out (need >= 3)")
    result = {}
    for axis in axes:
        vals = values[axis]
        full = _axis_range(axis, kinds[axis], list(vals.values())).gap
        worst = 0.0
        for dropped in members:
            remaining = [v for e, v in vals.items() if e != dropped]
            gap = _axis_range(axis, kinds[axis], remaining).gap
            if full != 0:
                worst = max(worst, abs(gap - full) / abs(full))
            elif gap != 0:
                worst = math.inf
        result[axis] = worst
    return result
