from __future__ import annotations

import statistics
from concurrent.futures import ThreadPoolExecutor

import pytest

from tokenbench.client import StatusEvent, StreamRequest, TokenEvent
from tokenbench.fingerprint import sym_kl
from tokenbench.registry import EndpointId
from tokenbench.simulator import SimulatorError, UnknownEndpointError, spawn_fleet
from tokenbench.tasks import build_probe_prompt

from conftest import make_spec

EID = EndpointId("acme", "model-a", "reference", "BF16", "standard", "us-east")
PROMPT = build_probe_prompt(1_000, "2026-01-01", 0)


def drain_events(fleet, eid, request):
    return list(fleet.stream(eid, request))


def test_spawn_fleet_sizes_and_duplicates():
    specs = [make_spec(EndpointId("p", "model-a", f"sku{i}", "BF16", "standard", "us-east"),
                       seed=i) for i in range(19)]
    assert len(spawn_fleet(specs)) == 19
    empty = spawn_fleet([])
    with pytest.raises(UnknownEndpointError):
        next(iter(empty.stream(EID, StreamRequest(PROMPT, 4))))
    with pytest.raises(SimulatorError, match="duplicate"):
        spawn_fleet([specs[0], specs[0]])


def test_identical_fleets_answer_identically():
    specs = [make_spec(EID, ttft_log_sigma=0.4, jitter_cv=0.3, error_rate=0.1, seed=9)]
    fleet_a, fleet_b = spawn_fleet(specs), spawn_fleet(specs)
    request = StreamRequest(PROMPT, 32)
    for _ in range(5):
        events_a = drain_events(fleet_a, EID, request)
        events_b = drain_events(fleet_b, EID, request)
        assert events_a == events_b


def test_ordinal_advances_the_draws():
    fleet = spawn_fleet([make_spec(EID, ttft_log_sigma=0.4, seed=9)])
    request = StreamRequest(PROMPT, 4)
    first = drain_events(fleet, EID, request)
    second = drain_events(fleet, EID, request)
    assert first[0].timestamp != second[0].timestamp


def test_timestamps_strictly_increasing():
    fleet = spawn_fleet([make_spec(EID, jitter_cv=0.5, ttft_log_sigma=0.2, seed=3)])
    events = drain_events(fleet, EID, StreamRequest(PROMPT, 64))
    stamps = [e.timestamp for e in events]
    assert stamps == sorted(stamps)
    assert all(b > a for a, b in zip(stamps, stamps[1:]))
    assert isinstance(events[-1], StatusEvent) and events[-1].status == "ok"


def test_ttft_median_recovery_500_probes():
    fleet = spawn_fleet([make_spec(EID, ttft_median=0.25, ttft_log_sigma=0.3, seed=11)])
    request = StreamRequest(PROMPT, 2)
    ttfts = []
    for _ in range(500):
        events = drain_events(fleet, EID, request)
        ttfts.append(events[0].timestamp - fleet.clock.now())
    assert statistics.median(ttfts) == pytest.approx(0.25, rel=0.05)


def test_tokens_per_sec_recovery_over_300_tokens():
    fleet = spawn_fleet([make_spec(EID, tokens_per_sec=250.0, jitter_cv=0.4, seed=5)])
    events = [e for e in drain_events(fleet, EID, StreamRequest(PROMPT, 301))
              if isinstance(e, TokenEvent)]
    gaps = [b.timestamp - a.timestamp for a, b in zip(events, events[1:])]
    assert 1.0 / statistics.fmean(gaps) == pytest.approx(250.0, rel=0.05)


def test_error_rate_one_always_fails():
    fleet = spawn_fleet([make_spec(EID, error_rate=1.0, seed=2)])
    for _ in range(20):
        events = drain_events(fleet, EID, StreamRequest(PROMPT, 8))
        assert len(events) == 1
        assert events[0].status == "error"


def test_error_rate_recovery():
    fleet = spawn_fleet([make_spec(EID, error_rate=0.2, seed=4)])
    failures = sum(
        drain_events(fleet, EID, StreamRequest(PROMPT, 2))[-1].status == "error"
        for _ in range(500))
    assert failures / 500 == pytest.approx(0.2, abs=0.05)


def test_temperature_zero_only():
    fleet = spawn_fleet([make_spec(EID)])
    with pytest.raises(SimulatorError, match="temperature"):
        next(iter(fleet.stream(EID, StreamRequest(PROMPT, 4, temperature=0.7))))


def test_epsilon_zero_matches_family_reference():
    fleet = spawn_fleet([make_spec(EID, perturbation_epsilon=0.0)])
    events = drain_events(fleet, EID, StreamRequest(PROMPT, 4, logprobs_top_k=20))
    for position, event in enumerate(e for e in events if isinstance(e, TokenEvent)):
        ref = fleet.reference_distribution(EID.model, PROMPT, position)
        top_ref = dict(sorted(ref.items(), key=lambda kv: (-kv[1], kv[0]))[:20])
        assert event.top_probs == top_ref


def test_epsilon_perturbs_every_position():
    fleet = spawn_fleet([make_spec(EID, perturbation_epsilon=0.3)])
    events = [e for e in drain_events(fleet, EID, StreamRequest(PROMPT, 8, logprobs_top_k=20))
              if isinstance(e, TokenEvent)]
    for position, event in enumerate(events):
        ref = fleet.reference_distribution(EID.model, PROMPT, position)
        top_ref = dict(sorted(ref.items(), key=lambda kv: (-kv[1], kv[0]))[:20])
        assert event.top_probs != top_ref


def test_top_probs_sum_at_most_one():
    fleet = spawn_fleet([make_spec(EID, perturbation_epsilon=0.15, seed=8)])
    events = drain_events(fleet, EID, StreamRequest(PROMPT, 8, logprobs_top_k=10))
    for event in events:
        if isinstance(event, TokenEvent):
            assert sum(event.top_probs.values()) <= 1.0 + 1e-12
            assert len(event.top_probs) == 10


def test_perturbation_monotone_in_epsilon():
    """Larger epsilon moves the output distribution further from the reference."""
    request = StreamRequest(PROMPT, 6, logprobs_top_k=20)
    divergences = []
    for eps in (0.0, 0.05, 0.1, 0.2, 0.3):
        fleet = spawn_fleet([make_spec(EID, perturbation_epsilon=eps, seed=77)])
        events = [e for e in drain_events(fleet, EID, request) if isinstance(e, TokenEvent)]
        total = 0.0
        for position, event in enumerate(events):
            ref = fleet.reference_distribution(EID.model, PROMPT, position)
            total += sym_kl(event.top_probs, dict(sorted(ref.items(),
                                                         key=lambda kv: (-kv[1], kv[0]))[:20]))
        divergences.append(total)
    assert divergences == sorted(divergences)
    assert divergences[0] == 0.0
    assert all(b > a for a, b in zip(divergences, divergences[1:]))


def test_concurrent_streams_are_isolated():
    fleet = spawn_fleet([make_spec(EID, jitter_cv=0.2, ttft_log_sigma=0.1, seed=6)])
    request = StreamRequest(PROMPT, 32)
    with ThreadPoolExecutor(max_workers=100) as pool:
        results = list(pool.map(lambda _: drain_events(fleet, EID, request), range(100)))
    # Every stream is complete and internally consistent.
    for events in results:
        assert events[-1].status == "ok"
        stamps = [e.timestamp for e in events]
        assert stamps == sorted(stamps)
    # The set of responses equals a sequential run of the same 100 ordinals.
    twin = spawn_fleet([make_spec(EID, jitter_cv=0.2, ttft_log_sigma=0.1, seed=6)])
    sequential = [drain_events(twin, EID, request) for _ in range(100)]
    key = lambda events: tuple(round(e.timestamp, 12) for e in events)
    assert sorted(map(key, results)) == sorted(map(key, sequential))


def test_thinking_phase_marked():
    fleet = spawn_fleet([make_spec(EID, thinking_tokens=150, tokens_per_sec=50.0, seed=12)])
    events = [e for e in drain_events(fleet, EID, StreamRequest(PROMPT, 10))
              if isinstance(e, TokenEvent)]
    thinking = [e for e in events if e.thinking]
    visible = [e for e in events if not e.thinking]
    assert len(thinking) == 150
    assert len(visible) == 10
    assert thinking[-1].timestamp < visible[0].timestamp
