"""End-to-end measurement pipeline: probes, evals, fingerprints, energy, scoring.

Glues the measurement loops together against one client (normally the
simulator fleet) and fills a store, from which a snapshot can be exported.
The same code path backs the `simulate` CLI command and fixture generation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import energy as energy_model
from .client import EndpointClient
from .evals import run_eval_suite
from .fingerprint import (Fingerprint, calibrate_z, capture_fingerprint, fidelity,
                          make_reference_set, select_reference)
from .probes import DEFAULT_CONDITIONS, ProbeConditions, ProbePlan, schedule_probes, summarize
from .registry import EndpointId, Registry
from .scoring import HEADLINE_SUITE, blended_price, headline, rank_leaderboard
from .store import Store, Snapshot, export_snapshot
from .tasks import (EvalTask, arithmetic_suite, choice_suite, code_suite, context_suite_name,
                    retrieval_suite)
from .util import VirtualClock, derive_seed

# suite name -> (generator kind, task count, is_reasoning)
DEFAULT_SUITE_PLAN: dict[str, tuple[str, int, bool]] = {
    "mmlu_pro": ("choice", 500, False),
    "gpqa_diamond": ("choice", 200, False),
    "math_500": ("arithmetic", 200, True),
    "aime_2025": ("arithmetic", 400, False),
    "humaneval_plus": ("code", 500, False),
}

DEFAULT_CONTEXT_LEVELS = [16_000, 32_000, 65_000, 90_000, 110_000, 130_000, 200_000]


@dataclass
class PipelineConfig:
    days: float = 1.0
    probe_plan: ProbePlan = field(default_factory=lambda: ProbePlan(cadence_minutes=5.0))
    suite_plan: dict[str, tuple[str, int, bool]] = field(
        default_factory=lambda: dict(DEFAULT_SUITE_PLAN))
    context_levels: list[int] = field(default_factory=lambda: list(DEFAULT_CONTEXT_LEVELS))
    context_tasks_per_level: int = 40
    eval_seed: int = 2026
    refset_prompts: int = 16
    refset_positions: int = 4
    refset_top_k: int = 12
    refset_seed: int = 7
    fidelity_z: float | None = None  # None: calibrate on the full-precision holdout
    eval_parallelism: int = 1
    snapshot_version: str = "v1.0"


def generate_suite(suite: str, kind: str, n: int, is_reasoning: bool, seed: int) -> list[EvalTask]:
    if kind == "arithmetic":
        return arithmetic_suite(suite, n, seed, is_reasoning=is_reasoning)
    if kind == "choice":
        return choice_suite(suite, n, seed)
    if kind == "code":
        return code_suite(suite, n, seed)
    raise ValueError(f"unknown suite kind {kind!r}")


def run_probe_stage(registry: Registry, client: EndpointClient, store: Store,
                    clock: VirtualClock, config: PipelineConfig,
                    endpoints: list[EndpointId] | None = None) -> int:
    ids = endpoints if endpoints is not None else sorted(e.id for e in registry.endpoints)
    return schedule_probes(ids, client, config.probe_plan, store, clock, days=config.days)


def run_summary_stage(store: Store, as_of: float) -> int:
    """One latency summary per (endpoint, conditions) seen in the probe table."""
    groups: dict[tuple[EndpointId, ProbeConditions], list] = {}
    for record in store.records("probe_records"):
        groups.setdefault((record.endpoint, record.conditions), []).append(record)
    for records in groups.values():
        store.append(summarize(records))
    return len(groups)


def run_eval_stage(registry: Registry, client: EndpointClient, store: Store,
                   config: PipelineConfig, now: float,
                   endpoints: list[EndpointId] | None = None) -> int:
    """Daily suites plus the context sweep, same prompt sets for every endpoint."""
    ids = endpoints if endpoints is not None else sorted(e.id for e in registry.endpoints)
    by_id = {e.id: e for e in registry.endpoints}
    suites = {
        suite: generate_suite(suite, kind, n, reasoning,
                              derive_seed(config.eval_seed, suite))
        for suite, (kind, n, reasoning) in config.suite_plan.items()
    }
    context_suites = {
        level: retrieval_suite(context_suite_name("aa_lcr", level),
                               config.context_tasks_per_level,
                               derive_seed(config.eval_seed, "ctx", level), level)
        for level in config.context_levels
    }
    written = 0
    for eid in ids:
        prices = by_id[eid]
        for tasks in suites.values():
            store.append(run_eval_suite(client, eid, tasks, prices, now=now,
                                        parallelism=config.eval_parallelism))
            written += 1
        for tasks in context_suites.values():
            store.append(run_eval_suite(client, eid, tasks, prices, now=now))
            written += 1
    return written


def run_fingerprint_stage(registry: Registry, client: EndpointClient, store: Store,
                          config: PipelineConfig, now: float,
                          endpoints: list[EndpointId] | None = None) -> float:
    """Capture fingerprints, pick per-cohort references, calibrate Z, score fidelity.

    When no explicit Z is configured it is calibrated so that every
    full-precision endpoint (the labeled-faithful holdout) maps to f >= 99.5.
    Returns the Z used.
    """
    ids = endpoints if endpoints is not None else sorted(e.id for e in registry.endpoints)
    refset = make_reference_set(config.refset_prompts, config.refset_positions,
                                config.refset_top_k, config.refset_seed)
    fingerprints: dict[EndpointId, Fingerprint] = {}
    for eid in ids:
        fp = capture_fingerprint(client, eid, refset, now=now)
        fingerprints[eid] = fp
        store.append(fp)

    by_model: dict[str, dict[EndpointId, Fingerprint]] = {}
    for eid, fp in fingerprints.items():
        by_model.setdefault(eid.model, {})[eid] = fp

    references: dict[str, tuple[EndpointId, bool]] = {
        model: select_reference(group, registry) for model, group in by_model.items()
    }
    z = config.fidelity_z
    if z is None:
        holdout = []
        for model, group in by_model.items():
            ref_id, _ = references[model]
            holdout += [(group[eid], group[ref_id]) for eid in group
                        if eid.precision in ("BF16", "FP16")]
        z = calibrate_z(holdout).z
    for model, group in sorted(by_model.items()):
        ref_id, second_tier = references[model]
        for eid in sorted(group):
            store.append(fidelity(group[eid], group[ref_id], z,
                                  ref_first_party=not second_tier))
    return z


def run_energy_stage(registry: Registry, store: Store,
                     endpoints: list[EndpointId] | None = None) -> int:
    ids = endpoints if endpoints is not None else sorted(e.id for e in registry.endpoints)
    summaries = {s.endpoint: s for s in store.records("latency_summaries")
                 if s.conditions == DEFAULT_CONDITIONS}
    by_id = {e.id: e for e in registry.endpoints}
    written = 0
    for eid in ids:
        endpoint = by_id[eid]
        summary = summaries.get(eid)
        if summary is None or summary.output_speed <= 0:
            continue
        store.append(energy_model.estimate(
            endpoint, registry.hardware_for(endpoint), registry.region_for(endpoint),
            tokens_per_sec=summary.output_speed))
        written += 1
    return written


def run_scoring_stage(registry: Registry, store: Store,
                      headline_suite: str = HEADLINE_SUITE) -> int:
    """Full-scope composites for every registry preset, plus the headline table."""
    chat = registry.presets["chat"]
    energy_by_id = {r.endpoint: r for r in store.records("energy_estimates")}
    by_id = {e.id: e for e in registry.endpoints}
    written = 0
    for eid in sorted(by_id):
        estimate = energy_by_id.get(eid)
        runs = [r for r in store.records("eval_runs")
                if r.endpoint == eid and r.suite == headline_suite]
        if estimate is None or not runs:
            continue
        latest = max(runs, key=lambda r: r.window[1])
        price_per_token = blended_price(by_id[eid], chat) / 1e6
        store.append(headline(estimate.j_per_token, price_per_token, latest))
        written += 1
    for name in sorted(registry.presets):
        for score in rank_leaderboard(registry, store, registry.presets[name], scope="full"):
            store.append(score)
            written += 1
    return written


def run_pipeline(registry: Registry, client: EndpointClient, store: Store,
                 clock: VirtualClock, config: PipelineConfig) -> Snapshot:
    run_probe_stage(registry, client, store, clock, config)
    as_of = clock.now()
    run_summary_stage(store, as_of)
    run_eval_stage(registry, client, store, config, now=as_of)
    run_fingerprint_stage(registry, client, store, config, now=as_of)
    run_energy_stage(registry, store)
    run_scoring_stage(registry, store)
    return export_snapshot(store, as_of=as_of, version=config.snapshot_version,
                           registry_hash=registry.content_hash())
