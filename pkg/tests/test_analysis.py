from __future__ import annotations

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tokenbench.analysis import (AnalysisError, ablate, ablation_weights, bootstrap_ci,
                                 leave_one_out, overlap_matrix, perturb_weights,
                                 sensitivity_report, spearman_rho, topk_overlap, within_model)
from tokenbench.energy import EnergyAssumptions, EnergyEstimate
from tokenbench.evals import EvalRun
from tokenbench.fingerprint import FidelityResult, classify
from tokenbench.probes import DEFAULT_CONDITIONS, LatencySummary
from tokenbench.registry import EndpointId, FactorWeights, builtin_presets
from tokenbench.scoring import (QUALITY_SUITES, CompositeScore, HeadlineMetrics,
                                NormalizedFactors, RawFactors, rank_leaderboard)
from tokenbench.store import Snapshot, Store, export_snapshot

from conftest import make_endpoint, make_registry
from test_probes import make_record

CHAT = next(p for p in builtin_presets() if p.name == "chat")
PRESETS = {p.name: p for p in builtin_presets()}


def endpoint_row(i: int, model="model-a", speed=100.0, ttft50=0.2, ttft99=0.4,
                 quality=0.8, aime=0.5, code=0.8, ctx=90_000, fid=99.8, j=0.3,
                 tts=290.0, price_in=0.5, price_out=1.5):
    eid = EndpointId(f"p{i:02d}", model, "sku", "BF16", "standard", "us-east")
    endpoint = make_endpoint(provider=f"p{i:02d}", model=model, sku="sku",
                             price_input=price_in, price_output=price_out)
    return eid, endpoint, dict(speed=speed, ttft50=ttft50, ttft99=ttft99, quality=quality,
                               aime=aime, code=code, ctx=ctx, fid=fid, j=j, tts=tts)


def synth_snapshot(rows, registry) -> Snapshot:
    """Build a fully populated snapshot from per-endpoint planted values."""
    store = Store()
    as_of = 86_400.0
    for eid, _, vals in rows:
        store.append(LatencySummary(
            endpoint=eid, conditions=DEFAULT_CONDITIONS, window=(0.0, as_of),
            ttft_p50=vals["ttft50"], ttft_p95=vals["ttft99"] * 0.9, ttft_p99=vals["ttft99"],
            output_speed=vals["speed"], jitter=0.001, completion_rate=1.0, error_rate=0.0,
            n_probes=50))
        accuracies = {"mmlu_pro": vals["quality"], "gpqa_diamond": vals["quality"],
                      "math_500": vals["quality"], "aime_2025": vals["aime"],
                      "humaneval_plus": vals["code"]}
        for suite, acc in accuracies.items():
            n = 100
            store.append(EvalRun(
                endpoint=eid, suite=suite, window=(0.0, as_of), accuracy=round(acc * n) / n,
                tokens_to_solution=vals["tts"] if suite == "math_500" else None,
                input_tokens=1000, output_tokens=2000, thinking_tokens=500, wall_clock=10.0,
                dollar_cost=0.001, n_tasks=n))
        for level in (65_000, 90_000, 130_000):
            store.append(EvalRun(
                endpoint=eid, suite=f"aa_lcr_{level}", window=(0.0, as_of),
                accuracy=0.95 if level <= vals["ctx"] else 0.5, tokens_to_solution=None,
                input_tokens=100, output_tokens=100, thinking_tokens=0, wall_clock=1.0,
                dollar_cost=0.0001, n_tasks=20))
        store.append(EnergyEstimate(
            endpoint=eid, j_per_token=vals["j"], kwh_per_mtok=vals["j"] / 3.6,
            gco2_per_mtok=vals["j"] / 3.6 * 380, assumptions=EnergyAssumptions(),
            sharing_factor=1.0, throughput_used=vals["speed"]))
        ref = rows[0][0]
        store.append(FidelityResult(endpoint=eid, reference_endpoint=ref, kl_sym=0.01,
                                    f=vals["fid"], flag=classify(vals["fid"]),
                                    second_tier=True))
        acc = round(vals["quality"] * 100) / 100
        store.append(HeadlineMetrics(
            endpoint=eid, j_ca=vals["j"] * vals["tts"] / acc,
            c_ca=1e-6 * vals["tts"] / acc, j_per_token=vals["j"], price_per_token=1e-6,
            tokens_to_solution=vals["tts"], accuracy=acc))
    return export_snapshot(store, as_of=as_of, version="v-test",
                           registry_hash=registry.content_hash())


@pytest.fixture(scope="module")
def planted():
    rows = [
        endpoint_row(0, speed=248.0, ttft50=0.36, ttft99=1.20, quality=0.70, aime=0.40,
                     code=0.78, ctx=65_000, fid=91.8, j=0.62, tts=470.0, price_in=0.52,
                     price_out=1.04),
        endpoint_row(1, speed=600.0, ttft50=0.25, ttft99=0.60, quality=0.74, aime=0.45,
                     code=0.81, ctx=90_000, fid=96.0, j=0.40, tts=380.0),
        endpoint_row(2, speed=1200.0, ttft50=0.22, ttft99=0.55, quality=0.76, aime=0.48,
                     code=0.83, ctx=90_000, fid=99.6, j=0.30, tts=330.0),
        endpoint_row(3, speed=2988.0, ttft50=0.18, ttft99=0.42, quality=0.78, aime=0.51,
                     code=0.86, ctx=130_000, fid=100.0, j=0.18, tts=290.0, price_in=0.1,
                     price_out=0.5),
    ]
    registry = make_registry([e for _, e, _ in rows])
    return rows, registry, synth_snapshot(rows, registry)


def test_within_model_axes_and_anchors(planted):
    rows, registry, snapshot = planted
    result = within_model(registry, snapshot, "model-a")
    assert len(result.axes) == 12
    by_axis = {a.axis: a for a in result.axes}
    speed = by_axis["output_speed"]
    assert (speed.min, speed.max) == (248.0, 2988.0)
    assert speed.gap == pytest.approx(2988 / 248, rel=1e-12)
    assert speed.gap_kind == "ratio"
    fid = by_axis["fidelity"]
    assert fid.gap == pytest.approx(8.2, rel=1e-12)
    assert fid.gap_kind == "points"
    assert by_axis["effective_context"].gap == pytest.approx(2.0, rel=1e-12)  # 130K/65K
    # brute-force oracle for the planted quality composites
    composites = [100 * (3 * v["quality"] + v["aime"] + v["code"]) / 5 for _, _, v in rows]
    assert by_axis["quality"].gap == pytest.approx(max(composites) - min(composites), abs=1e-9)
    assert by_axis["j_per_token"].gap == pytest.approx(0.62 / 0.18, rel=1e-12)


def test_within_model_single_endpoint_cohort():
    row = endpoint_row(0, model="model-solo")
    registry = make_registry([row[1]])
    snapshot = synth_snapshot([row], registry)
    result = within_model(registry, snapshot, "model-solo")
    for axis in result.axes:
        assert axis.min == axis.max
        assert axis.gap == pytest.approx(1.0 if axis.gap_kind == "ratio" else 0.0)


def test_within_model_missing_axis_named():
    row = endpoint_row(0, model="model-a")
    registry = make_registry([row[1]])
    store = Store()
    snapshot = export_snapshot(store, as_of=1.0, version="v", registry_hash="h")
    with pytest.raises(AnalysisError, match="output_speed|missing"):
        within_model(registry, snapshot, "model-a")


def ranking_of(endpoints: list[EndpointId]) -> list[CompositeScore]:
    return [CompositeScore(endpoint=e, preset="chat", scope="full", score=1.0 - i * 0.01,
                           rank=i + 1, normalized=NormalizedFactors(1, 1, 1, 1, 1),
                           raw=RawFactors(1, 1, 1, 1, 1))
            for i, e in enumerate(endpoints)]


def test_topk_overlap_trivials():
    ids = [EndpointId(f"p{i}", "m", "s", "BF16", "standard", "us-east") for i in range(20)]
    a = ranking_of(ids)
    assert topk_overlap(a, ranking_of(ids), 10) == 10
    assert topk_overlap(a, ranking_of(ids[10:] + ids[:10]), 10) == 0
    with pytest.raises(AnalysisError, match="universe"):
        topk_overlap(a, ranking_of(ids[:10]), 5)
    with pytest.raises(AnalysisError, match="exceeds"):
        topk_overlap(a, ranking_of(ids), 25)


def test_topk_overlap_against_brute_force_oracle():
    rng = random.Random(7)
    ids = [EndpointId(f"p{i}", "m", "s", "BF16", "standard", "us-east") for i in range(30)]
    for _ in range(1000):
        a, b = list(ids), list(ids)
        rng.shuffle(a)
        rng.shuffle(b)
        k = rng.randint(1, 30)
        expected = len({*a[:k]} & {*b[:k]})
        assert topk_overlap(ranking_of(a), ranking_of(b), k) == expected


def test_overlap_matrix_symmetric_diagonal(planted):
    rows, registry, snapshot = planted
    presets = [PRESETS[n] for n in ("chat", "rag", "reasoning")]
    matrix = overlap_matrix(registry, snapshot, presets, k=3)
    assert matrix.presets == ["chat", "rag", "reasoning"]
    for i in range(3):
        assert matrix.cells[i][i] == 3
        for j in range(3):
            assert matrix.cells[i][j] == matrix.cells[j][i]


def test_overlap_matrix_uniform_endpoints_all_k():
    rows = [endpoint_row(i) for i in range(5)]  # identical raw factors everywhere
    registry = make_registry([e for _, e, _ in rows])
    snapshot = synth_snapshot(rows, registry)
    matrix = overlap_matrix(registry, snapshot, [PRESETS["chat"], PRESETS["batch"]], k=5)
    assert all(cell == 5 for row in matrix.cells for cell in row)


def test_perturb_weights_acceptance_vector():
    perturbed = perturb_weights(CHAT, "price", 0.10)
    expected = (0.175, 0.2625, 0.30, 0.175, 0.0875)
    for got, want in zip(perturbed.weights, expected):
        assert got == pytest.approx(want, abs=1e-12)
    assert sum(perturbed.weights) == pytest.approx(1.0, abs=1e-12)


def test_perturb_weights_trivials():
    assert tuple(perturb_weights(CHAT, "speed", 0.0).weights) == tuple(CHAT.weights)
    low = PRESETS["reasoning"]  # reliability weight 0.05
    with pytest.raises(AnalysisError, match="outside"):
        perturb_weights(low, "reliability", -0.10)
    with pytest.raises(AnalysisError, match="unknown factor"):
        perturb_weights(CHAT, "nonsense", 0.1)


@given(st.sampled_from([p.name for p in builtin_presets()]),
       st.sampled_from(["speed", "ttft", "price", "quality", "reliability"]),
       st.floats(min_value=-0.10, max_value=0.10))
@settings(max_examples=100, deadline=None)
def test_perturb_weights_sum_and_proportions(preset_name, factor, delta):
    preset = PRESETS[preset_name]
    index = ["speed", "ttft", "price", "quality", "reliability"].index(factor)
    w = preset.weights[index]
    if not 0.0 <= w + delta <= 1.0 or w == 1.0:
        return
    perturbed = perturb_weights(preset, factor, delta)
    assert sum(perturbed.weights) == pytest.approx(1.0, abs=1e-12)
    # untouched weights keep their mutual proportions exactly
    others = [(a, b) for i, (a, b) in enumerate(zip(preset.weights, perturbed.weights))
              if i != index and a > 0]
    ratios = {round(b / a, 12) for a, b in others}
    assert len(ratios) <= 1


def test_ablation_weights_chat_without_ttft():
    ablated = ablation_weights(CHAT, "ttft")
    expected = (0.2857142857, 0.0, 0.2857142857, 0.2857142857, 0.1428571428)
    for got, want in zip(ablated.weights, expected):
        assert got == pytest.approx(want, abs=0.005)
    assert sum(ablated.weights) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(AnalysisError, match="entire weight"):
        ablation_weights(WorkloadPresetAllSpeed(), "speed")


def WorkloadPresetAllSpeed():
    from tokenbench.registry import WorkloadPreset

    return WorkloadPreset("only-speed", 1.0, 1.0, FactorWeights(1.0, 0.0, 0.0, 0.0, 0.0))


def test_ablate_zero_weight_factor_is_noop(planted):
    rows, registry, snapshot = planted
    row = ablate(registry, snapshot, PRESETS["batch"], "ttft", k=3)  # batch has w_ttft = 0
    assert row.spearman_vs_full == pytest.approx(1.0, abs=1e-12)
    assert row.topk_overlap == 3


def test_ablate_report_row(planted):
    rows, registry, snapshot = planted
    row = ablate(registry, snapshot, CHAT, "quality", k=3)
    assert row.weights.quality == 0.0
    assert -1.0 <= row.spearman_vs_full <= 1.0
    assert 0 <= row.topk_overlap <= 3


def test_spearman_properties():
    rng = random.Random(3)
    for _ in range(100):
        n = rng.randint(2, 40)
        ranks = list(range(1, n + 1))
        rng.shuffle(ranks)
        assert spearman_rho(ranks, ranks) == pytest.approx(1.0, abs=1e-12)
        reversed_ranking = [n + 1 - r for r in ranks]
        assert spearman_rho(ranks, reversed_ranking) == pytest.approx(-1.0, abs=1e-12)
        other = list(ranks)
        rng.shuffle(other)
        assert spearman_rho(ranks, other) == pytest.approx(spearman_rho(other, ranks), abs=1e-12)


def test_spearman_average_ranks_for_ties():
    # hand-computed: x = (1, 2, 2, 4), y = (1, 2, 3, 4)
    # average ranks of x: (1, 2.5, 2.5, 4)
    x, y = [1.0, 2.0, 2.0, 4.0], [1.0, 2.0, 3.0, 4.0]
    rx = np.array([1.0, 2.5, 2.5, 4.0])
    ry = np.array([1.0, 2.0, 3.0, 4.0])
    expected = float(np.corrcoef(rx, ry)[0, 1])
    assert spearman_rho(x, y) == pytest.approx(expected, rel=1e-12)


def test_sensitivity_uniform_endpoints_no_shifts():
    rows = [endpoint_row(i) for i in range(6)]
    registry = make_registry([e for _, e, _ in rows])
    snapshot = synth_snapshot(rows, registry)
    report = sensitivity_report(registry, snapshot, [CHAT, PRESETS["rag"]], delta=0.10, k=4)
    assert len(report) == 2 * 5 * 2  # presets x factors x signs
    for row in report:
        if row.feasible:
            assert row.max_rank_shift_top_k == 0
            assert row.leader_changed is False


def test_sensitivity_dominant_leader_invariant(planted):
    rows, registry, snapshot = planted
    report = sensitivity_report(registry, snapshot, [CHAT], delta=0.10, k=3)
    # p03 dominates every factor, so no 10pp swing can dethrone it
    for row in report:
        if row.feasible:
            assert row.leader_changed is False


def test_sensitivity_infeasible_rows_marked():
    rows = [endpoint_row(i) for i in range(4)]
    registry = make_registry([e for _, e, _ in rows])
    snapshot = synth_snapshot(rows, registry)
    report = sensitivity_report(registry, snapshot, [PRESETS["batch"]], delta=0.10, k=2)
    ttft_down = next(r for r in report if r.factor == "ttft" and r.delta == -0.10)
    assert not ttft_down.feasible  # batch has zero TTFT weight


def test_bootstrap_degenerate_data_zero_width(planted):
    # identical probes and identical eval runs: every resample is the same
    rows, registry, _ = planted
    eid = rows[0][0]
    snapshot = synth_snapshot(rows, registry)
    probe = make_record(0.2, request_time=snapshot.as_of - 100.0)
    object.__setattr__(probe, "endpoint", eid)
    snapshot.tables["probe_records"] = [probe] * 40
    ci = bootstrap_ci(registry, snapshot, eid, CHAT, n=200, seed=5)
    assert ci.lower == ci.median == ci.upper


def test_bootstrap_same_seed_bit_reproducible(planted):
    rows, registry, snapshot = planted
    eid = rows[1][0]
    probes = []
    rng = random.Random(9)
    for i in range(40):
        p = make_record(0.2 + 0.1 * rng.random(), request_time=snapshot.as_of - 50.0 + i * 0.1)
        object.__setattr__(p, "endpoint", eid)
        probes.append(p)
    snapshot.tables["probe_records"] = probes
    a = bootstrap_ci(registry, snapshot, eid, CHAT, n=300, seed=42)
    b = bootstrap_ci(registry, snapshot, eid, CHAT, n=300, seed=42)
    assert (a.median, a.lower, a.upper) == (b.median, b.lower, b.upper)
    c = bootstrap_ci(registry, snapshot, eid, CHAT, n=300, seed=43)
    assert (a.lower, a.upper) != (c.lower, c.upper)


def test_bootstrap_width_shrinks_with_window_size(planted):
    rows, registry, snapshot = planted
    eid = rows[1][0]
    rng = random.Random(11)

    def probes(n):
        out = []
        for i in range(n):
            p = make_record(0.2 + 0.2 * rng.random(),
                            request_time=snapshot.as_of - 80.0 + i * 0.001)
            object.__setattr__(p, "endpoint", eid)
            out.append(p)
        return out

    snapshot.tables["probe_records"] = probes(50)
    narrow = bootstrap_ci(registry, snapshot, eid, CHAT, n=400, seed=1)
    snapshot.tables["probe_records"] = probes(200)
    wide = bootstrap_ci(registry, snapshot, eid, CHAT, n=400, seed=1)
    ratio = (narrow.upper - narrow.lower) / max(wide.upper - wide.lower, 1e-12)
    # 4x the data should shrink the interval by about 2x, within a factor of 2
    assert 1.0 <= ratio <= 4.0


def test_leave_one_out_hand_enumeration():
    rows = [endpoint_row(0, speed=1.0), endpoint_row(1, speed=2.0), endpoint_row(2, speed=4.0)]
    registry = make_registry([e for _, e, _ in rows])
    snapshot = synth_snapshot(rows, registry)
    result = leave_one_out(registry, snapshot, "model-a", axes=["output_speed"])
    # full ratio 4; dropping the max -> 2 (50% change); dropping the min -> 2 (50%)
    assert result["output_speed"] == pytest.approx(0.5, rel=1e-12)


def test_leave_one_out_non_extremal_drop_is_stable(planted):
    rows, registry, snapshot = planted
    result = leave_one_out(registry, snapshot, "model-a")
    values = {eid: vals["speed"] for eid, _, vals in rows}
    # brute force: recompute the ratio for every drop
    full = max(values.values()) / min(values.values())
    worst = max(abs(max(v for e2, v in values.items() if e2 != e) /
                    min(v for e2, v in values.items() if e2 != e) - full) / full
                for e in values)
    assert result["output_speed"] == pytest.approx(worst, rel=1e-9)


def test_leave_one_out_requires_three(planted):
    rows, registry, _ = planted
    small = [endpoint_row(0), endpoint_row(1)]
    reg = make_registry([e for _, e, _ in small])
    snap = synth_snapshot(small, reg)
    with pytest.raises(AnalysisError, match="too small"):
        leave_one_out(reg, snap, "model-a")
