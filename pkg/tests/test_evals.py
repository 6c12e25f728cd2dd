from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tokenbench.evals import EvalError, effective_context, quality_composite, run_eval_suite
from tokenbench.registry import EndpointId
from tokenbench.simulator import FamilyProfile, spawn_fleet
from tokenbench.tasks import (arithmetic_suite, choice_suite, code_suite, context_suite_name,
                              retrieval_suite, verify)

from conftest import make_endpoint, make_spec

EID = EndpointId("acme", "model-a", "reference", "BF16", "standard", "us-east")
PRICES = make_endpoint()


def profile(base: float, **kwargs) -> dict[str, FamilyProfile]:
    return {"model-a": FamilyProfile(model="model-a", default_success=base, **kwargs)}


def test_accuracy_tracks_base_success():
    fleet = spawn_fleet([make_spec(EID, seed=5)], profiles=profile(0.80))
    tasks = arithmetic_suite("math_500", 100, seed=1, is_reasoning=True)
    run = run_eval_suite(fleet, EID, tasks, PRICES)
    assert run.accuracy == pytest.approx(0.80, abs=0.08)
    assert run.n_tasks == 100
    assert run.eval_errors == 0


def test_penalty_equal_to_base_zeroes_accuracy():
    fleet = spawn_fleet([make_spec(EID, accuracy_penalty=0.80, seed=5)], profiles=profile(0.80))
    tasks = arithmetic_suite("math_500", 40, seed=1, is_reasoning=True)
    run = run_eval_suite(fleet, EID, tasks, PRICES)
    assert run.accuracy == 0.0
    assert run.tokens_to_solution is None  # nothing solved


def test_tokens_to_solution_matches_planted_verbosity():
    fleet = spawn_fleet([make_spec(EID, answer_tokens=290, seed=3)], profiles=profile(0.9))
    tasks = arithmetic_suite("math_500", 10, seed=2, is_reasoning=True)
    run = run_eval_suite(fleet, EID, tasks, PRICES)
    assert run.tokens_to_solution == pytest.approx(290, abs=1e-9)
    assert run.thinking_tokens > 0
    assert run.output_tokens >= run.thinking_tokens


def test_dollar_cost_identity():
    fleet = spawn_fleet([make_spec(EID, seed=7)], profiles=profile(0.85))
    tasks = code_suite("humaneval_plus", 25, seed=4)
    run = run_eval_suite(fleet, EID, tasks, PRICES)
    expected = (run.input_tokens * PRICES.price_input +
                run.output_tokens * PRICES.price_output) / 1e6
    assert run.dollar_cost == pytest.approx(expected, abs=1e-9)


def test_single_suite_and_nonempty_enforced():
    fleet = spawn_fleet([make_spec(EID)])
    with pytest.raises(EvalError, match="non-empty"):
        run_eval_suite(fleet, EID, [], PRICES)
    mixed = arithmetic_suite("a", 2, 1) + arithmetic_suite("b", 2, 1)
    with pytest.raises(EvalError, match="multiple suites"):
        run_eval_suite(fleet, EID, mixed, PRICES)


def test_client_failures_count_as_unsolved():
    fleet = spawn_fleet([make_spec(EID, error_rate=0.5, seed=9)], profiles=profile(1.0))
    tasks = choice_suite("mmlu_pro", 60, seed=1)
    run = run_eval_suite(fleet, EID, tasks, PRICES)
    assert run.eval_errors > 0
    assert run.accuracy <= 1.0 - run.eval_errors / run.n_tasks + 1e-9


def test_total_failure_raises():
    fleet = spawn_fleet([make_spec(EID, error_rate=1.0)])
    tasks = choice_suite("mmlu_pro", 5, seed=1)
    with pytest.raises(EvalError, match="every task"):
        run_eval_suite(fleet, EID, tasks, PRICES)


def context_family(level: int):
    return retrieval_suite(context_suite_name("aa_lcr", level), 30, seed=6, context_length=level)


def test_effective_context_planted_cliff():
    fleet = spawn_fleet([make_spec(EID, context_cliff_tokens=100_000, seed=11)])
    levels = [16_000, 65_000, 90_000, 130_000, 200_000]
    assert effective_context(fleet, EID, context_family, levels) == 90_000


def test_effective_context_extremes():
    passes_all = spawn_fleet([make_spec(EID, seed=12)])  # default cliff: effectively unbounded
    levels = [16_000, 65_000, 130_000]
    assert effective_context(passes_all, EID, context_family, levels) == 130_000
    always_fails = spawn_fleet([make_spec(EID, seed=13)],
                               profiles=profile(0.5, context_base_success=0.5))
    assert effective_context(always_fails, EID, context_family, levels) == 0
    with pytest.raises(ValueError, match="level"):
        effective_context(passes_all, EID, context_family, [])


def test_effective_context_monotone_in_passing_levels():
    fleet = spawn_fleet([make_spec(EID, context_cliff_tokens=100_000, seed=14)])
    short = effective_context(fleet, EID, context_family, [16_000, 90_000])
    longer = effective_context(fleet, EID, context_family, [16_000, 90_000, 95_000])
    assert longer >= short


def make_run(suite: str, accuracy: float, n: int = 10):
    from tokenbench.evals import EvalRun

    return EvalRun(endpoint=EID, suite=suite, window=(0.0, 1.0), accuracy=accuracy,
                   tokens_to_solution=None, input_tokens=10, output_tokens=10,
                   thinking_tokens=0, wall_clock=1.0, dollar_cost=0.0, n_tasks=n)


def test_quality_composite_trivials():
    runs = {"a": make_run("a", 1.0), "b": make_run("b", 1.0)}
    assert quality_composite(runs, {"a": 0.5, "b": 0.5}).q == 100.0
    runs = {"a": make_run("a", 0.6), "b": make_run("b", 0.8)}
    assert quality_composite(runs, {"a": 0.5, "b": 0.5}).q == pytest.approx(70.0)
    with pytest.raises(EvalError, match="missing"):
        quality_composite({"a": make_run("a", 0.5)}, {"a": 0.5, "b": 0.5})


@given(st.lists(st.integers(min_value=0, max_value=10), min_size=3, max_size=3),
       st.integers(min_value=1, max_value=5))
@settings(max_examples=40, deadline=None)
def test_quality_composite_linear_in_accuracies(solved_counts, divisor):
    weights = {f"s{i}": 1 / 3 for i in range(3)}
    base = quality_composite(
        {f"s{i}": make_run(f"s{i}", c / 10) for i, c in enumerate(solved_counts)}, weights).q
    # scaling every per-suite accuracy by 1/divisor scales q by 1/divisor
    scaled = quality_composite(
        {f"s{i}": make_run(f"s{i}", c / (10 * divisor), n=10 * divisor)
         for i, c in enumerate(solved_counts)}, weights).q
    assert scaled == pytest.approx(base / divisor, rel=1e-9, abs=1e-12)


def test_verifiers():
    t = arithmetic_suite("s", 1, seed=1)[0]
    assert verify(t, f"the answer is {t.reference_answer}")
    assert not verify(t, "no numbers here")
    c = choice_suite("s", 1, seed=1)[0]
    assert verify(c, f" {c.reference_answer} ")
    assert not verify(c, c.reference_answer + " extra")
    k = code_suite("s", 1, seed=1)[0]
    assert verify(k, k.reference_answer.upper() + "(): return 1")
