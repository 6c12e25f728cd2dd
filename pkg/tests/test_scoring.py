from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tokenbench.evals import EvalRun
from tokenbench.registry import EndpointId, FactorWeights, WorkloadPreset, builtin_presets
from tokenbench.scoring import (CompositeScore, FactorVector, NormalizedFactors, RawFactors,
                                ScoringError, blended_price, composite, headline,
                                minmax_normalize, normalize_factors, reliability_score)

from conftest import make_endpoint

EID = EndpointId("acme", "model-a", "reference", "BF16", "standard", "us-east")
CHAT = next(p for p in builtin_presets() if p.name == "chat")
RAG = next(p for p in builtin_presets() if p.name == "rag")


def test_blended_price_chat_hand_arithmetic():
    prices = make_endpoint(price_input=0.1, price_output=0.5)
    assert blended_price(prices, CHAT) == pytest.approx(0.75 * 0.1 + 0.25 * 0.5, rel=1e-12)
    assert blended_price(prices, CHAT) == pytest.approx(0.20, rel=1e-12)


def test_blended_price_symmetric_ratio():
    even = WorkloadPreset("even", 1.0, 1.0, FactorWeights(0.2, 0.2, 0.2, 0.2, 0.2))
    prices = make_endpoint(price_input=0.7, price_output=0.7)
    assert blended_price(prices, even) == pytest.approx(0.7, rel=1e-12)


def test_blended_price_rag_cheaper_on_input_cheap_endpoint():
    prices = make_endpoint(price_input=0.1, price_output=0.9)
    assert blended_price(prices, RAG) < blended_price(prices, CHAT)


def test_blended_price_cache_hits_use_cached_price():
    prices = make_endpoint(price_input=0.4, price_output=0.8, price_cached_input=0.1)
    full = blended_price(prices, CHAT, cache_hit=0.0)
    cached = blended_price(prices, CHAT, cache_hit=1.0)
    assert cached < full
    assert cached == pytest.approx(0.75 * 0.1 + 0.25 * 0.8, rel=1e-12)
    # no cached price on record: cache hits change nothing
    plain = make_endpoint(price_input=0.4, price_output=0.8)
    assert blended_price(plain, CHAT, cache_hit=0.7) == pytest.approx(
        blended_price(plain, CHAT), rel=1e-12)


def test_minmax_normalize_cases():
    assert minmax_normalize([248.0, 2988.0]) == [0.0, 1.0]
    assert minmax_normalize([5.0]) == [1.0]
    assert minmax_normalize([3.0, 3.0, 3.0]) == [1.0, 1.0, 1.0]
    assert minmax_normalize([0.18, 0.36], orientation="lower_better") == [1.0, 0.0]


@given(st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=1, max_size=40))
@settings(max_examples=80, deadline=None)
def test_minmax_normalize_bounds(values):
    for orientation in ("higher_better", "lower_better"):
        out = minmax_normalize(values, orientation)
        assert all(0.0 <= v <= 1.0 for v in out)


def vector(norm: tuple[float, ...], preset: str = "chat") -> FactorVector:
    return FactorVector(endpoint=EID, raw=RawFactors(1, 1, 1, 1, 1),
                        normalized=NormalizedFactors(*norm), cohort="full", preset=preset)


def test_composite_trivials():
    assert composite(vector((1.0,) * 5), CHAT).score == pytest.approx(1.0, abs=1e-12)
    assert composite(vector((0.5,) * 5), CHAT).score == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ScoringError, match="preset"):
        composite(vector((1.0,) * 5, preset="rag"), CHAT)


def test_composite_matches_brute_force_dot_product():
    norm = (0.3, 0.9, 0.1, 0.7, 0.5)
    expected = sum(w * n for w, n in zip(CHAT.weights, norm))
    assert composite(vector(norm), CHAT).score == pytest.approx(expected, abs=1e-12)


@given(st.integers(min_value=0, max_value=4), st.floats(min_value=0.0, max_value=1.0),
       st.floats(min_value=0.0, max_value=1.0))
@settings(max_examples=60, deadline=None)
def test_composite_monotone_per_factor(index, low, high):
    lo, hi = sorted((low, high))
    base = [0.5] * 5
    worse, better = list(base), list(base)
    worse[index], better[index] = lo, hi
    assert composite(vector(tuple(better)), CHAT).score >= \
        composite(vector(tuple(worse)), CHAT).score - 1e-12


def eval_run(tokens_to_solution=2900.0, accuracy=0.78) -> EvalRun:
    n = 50
    solved = round(accuracy * n)
    return EvalRun(endpoint=EID, suite="math_500", window=(0.0, 1.0), accuracy=solved / n,
                   tokens_to_solution=tokens_to_solution, input_tokens=100, output_tokens=100,
                   thinking_tokens=0, wall_clock=1.0, dollar_cost=0.0, n_tasks=n)


def test_headline_worked_example():
    result = headline(0.18, 1e-6, eval_run(2900.0, 0.78))
    assert result.j_ca == pytest.approx(0.18 * 2900 / 0.78, abs=1e-9)
    assert result.j_ca == pytest.approx(669.23, abs=0.01)


def test_headline_identity_and_linearity():
    assert headline(0.42, 1e-6, eval_run(1.0, 1.0)).j_ca == pytest.approx(0.42, rel=1e-12)
    single = headline(0.3, 2e-6, eval_run(100.0, 0.5))
    double = headline(0.3, 2e-6, eval_run(200.0, 0.5))
    assert double.j_ca == pytest.approx(2 * single.j_ca, rel=1e-12)
    assert double.c_ca == pytest.approx(2 * single.c_ca, rel=1e-12)


def test_headline_zero_accuracy_is_infinite():
    result = headline(0.18, 1e-6, eval_run(2900.0, 0.0))
    assert math.isinf(result.j_ca) and result.j_ca > 0
    assert math.isinf(result.c_ca)


def test_headline_requires_reasoning_tokens():
    run = EvalRun(endpoint=EID, suite="mmlu_pro", window=(0.0, 1.0), accuracy=0.5,
                  tokens_to_solution=None, input_tokens=1, output_tokens=1,
                  thinking_tokens=0, wall_clock=1.0, dollar_cost=0.0, n_tasks=2)
    with pytest.raises(ScoringError, match="tokens_to_solution"):
        headline(0.18, 1e-6, run)


def test_headline_strictly_monotone():
    base = headline(0.2, 1e-6, eval_run(100.0, 0.5))
    assert headline(0.2, 1e-6, eval_run(100.0, 0.6)).j_ca < base.j_ca
    assert headline(0.3, 1e-6, eval_run(100.0, 0.5)).j_ca > base.j_ca
    assert headline(0.2, 2e-6, eval_run(100.0, 0.5)).c_ca > base.c_ca


def test_reliability_always_in_unit_interval():
    assert reliability_score(1.0, 0.2, 0.2) == 1.0
    assert reliability_score(1.0, 0.1, 1.0) == 0.0  # p99 = 10x p50 zeroes the tail term
    assert reliability_score(0.5, 0.2, 0.38) == pytest.approx(0.45, rel=1e-9)


@given(st.floats(min_value=0, max_value=1), st.floats(min_value=1e-4, max_value=10.0),
       st.floats(min_value=0.0, max_value=100.0))
@settings(max_examples=100, deadline=None)
def test_reliability_bounds(completion, p50, spread):
    value = reliability_score(completion, p50, p50 + spread)
    assert 0.0 <= value <= 1.0


def test_normalize_factors_orientations():
    raw = {
        EndpointId("a", "m", "s", "BF16", "standard", "us-east"):
            RawFactors(speed=100, ttft_p50=0.2, blended_price=1.0, quality=70, reliability=0.9),
        EndpointId("b", "m", "s", "BF16", "standard", "us-east"):
            RawFactors(speed=200, ttft_p50=0.4, blended_price=0.5, quality=80, reliability=0.8),
    }
    vectors = normalize_factors(raw, "m", "chat")
    a, b = (vectors[k] for k in sorted(vectors))
    assert a.normalized == NormalizedFactors(0.0, 1.0, 0.0, 0.0, 1.0)
    assert b.normalized == NormalizedFactors(1.0, 0.0, 1.0, 1.0, 0.0)


@given(st.lists(st.tuples(st.floats(min_value=1, max_value=1e4),
                          st.floats(min_value=0.01, max_value=10),
                          st.floats(min_value=0.01, max_value=50),
                          st.floats(min_value=0, max_value=100),
                          st.floats(min_value=0, max_value=1)),
                min_size=2, max_size=12, unique=True),
       st.floats(min_value=0.1, max_value=10), st.floats(min_value=-5, max_value=5))
@settings(max_examples=50, deadline=None)
def test_rank_invariant_under_affine_speed_transform(rows, scale, shift):
    """Min-max normalization absorbs positive affine transforms of a raw factor."""
    ids = [EndpointId(f"p{i}", "m", "s", "BF16", "standard", "us-east")
           for i in range(len(rows))]
    raw = {eid: RawFactors(*row) for eid, row in zip(ids, rows)}
    transformed = {eid: RawFactors(r.speed * scale + shift, r.ttft_p50, r.blended_price,
                                   r.quality, r.reliability) for eid, r in raw.items()}

    def order(table):
        vectors = normalize_factors(table, "m", "chat")
        scores = [composite(vectors[eid], CHAT) for eid in ids]
        return [s.endpoint for s in sorted(scores, key=lambda s: (-s.score, s.endpoint))]

    assert order(raw) == order(transformed)
