"""Verifiable task-suite runs: accuracy, tokens to solution, cost, quality composite.

Thinking tokens count toward both tokens-to-solution and the billed output
total, since thinking dominates output cost on reasoning endpoints. The
`output_tokens` total therefore includes thinking tokens; `thinking_tokens`
reports the subset separately.
"""

from __future__ import annotations

import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

from .client import EndpointClient, StreamRequest, drain
from .registry import Endpoint, EndpointId
from .tasks import EvalTask, count_tokens, verify

REASONING_TOKEN_BUDGET = 512
SHORT_TOKEN_BUDGET = 24


class EvalError(RuntimeError):
    pass


@dataclass(frozen=True)
class EvalRun:
    endpoint: EndpointId
    suite: str
    window: tuple[float, float]
    accuracy: float
    tokens_to_solution: float | None  # mean output+thinking tokens over solved reasoning tasks
    input_tokens: int
    output_tokens: int  # includes thinking tokens (they are billed as output)
    thinking_tokens: int
    wall_clock: float
    dollar_cost: float
    n_tasks: int
    eval_errors: int = 0

    def validate(self) -> None:
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError("accuracy must be in [0, 1]")
        solved = self.accuracy * self.n_tasks
        if abs(solved - round(solved)) > 1e-6:
            raise ValueError("accuracy * n_tasks must be an integer solved-task count")
        if self.n_tasks < 1:
            raise ValueError("n_tasks must be >= 1")


@dataclass(frozen=True)
class QualityScore:
    endpoint: EndpointId
    q: float  # 0-100
    per_suite: dict[str, float]


@dataclass
class _TaskOutcome:
    solved: bool
    errored: bool
    input_tokens: int
    generated_tokens: int
    thinking_tokens: int
    duration: float


TASK_RETRIES = 3


def _run_task(client: EndpointClient, endpoint: EndpointId, task: EvalTask,
              now: float) -> _TaskOutcome:
    """One verified task; transport failures retry, a still-failing task counts unsolved."""
    budget = REASONING_TOKEN_BUDGET if task.is_reasoning else SHORT_TOKEN_BUDGET
    request = StreamRequest(prompt=task.prompt, max_tokens=budget, reasoning=task.is_reasoning)
    duration = 0.0
    result = None
    for _ in range(TASK_RETRIES):
        try:
            result = drain(client, endpoint, request, request_time=now)
        except Exception:
            return _TaskOutcome(False, True, count_tokens(task.prompt), 0, 0, duration)
        if result.status is not None:
            duration += max(0.0, result.status.timestamp - now)
        if result.ok:
            break
    if result is None or not result.ok:
        return _TaskOutcome(False, True, count_tokens(task.prompt), len(result.tokens),
                            sum(t.thinking for t in result.tokens), duration)
    solved = verify(task, result.visible_text)
    return _TaskOutcome(
        solved=solved,
        errored=False,
        input_tokens=count_tokens(task.prompt),
        generated_tokens=len(result.tokens),
        thinking_tokens=sum(t.thinking for t in result.tokens),
        duration=duration,
    )


def run_eval_suite(client: EndpointClient, endpoint: EndpointId, tasks: list[EvalTask],
                   prices: Endpoint, now: float = 0.0, parallelism: int = 1) -> EvalRun:
    """Run one suite at temperature 0; a failed task counts unsolved, a fully failed run raises."""
    if not tasks:
        raise EvalError("run_eval_suite requires a non-empty task list")
    suites = {t.suite for t in tasks}
    if len(suites) > 1:
        raise EvalError(f"tasks span multiple suites: {sorted(suites)}")

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(lambda t: _run_task(client, endpoint, t, now), tasks))
    else:
        outcomes = [_run_task(client, endpoint, t, now) for t in tasks]

    errors = sum(o.errored for o in outcomes)
    if errors == len(tasks):
        raise EvalError(f"{endpoint}: every task in suite {tasks[0].suite!r} failed")

    solved_reasoning = [o.generated_tokens for o, t in zip(outcomes, tasks)
                        if t.is_reasoning and o.solved]
    input_total = sum(o.input_tokens for o in outcomes)
    output_total = sum(o.generated_tokens for o in outcomes)
    run = EvalRun(
        endpoint=endpoint,
        suite=tasks[0].suite,
        window=(now, now),
        accuracy=sum(o.solved for o in outcomes) / len(tasks),
        tokens_to_solution=statistics.fmean(solved_reasoning) if solved_reasoning else None,
        input_tokens=input_total,
        output_tokens=output_total,
        thinking_tokens=sum(o.thinking_tokens for o in outcomes),
        wall_clock=sum(o.duration for o in outcomes),
        dollar_cost=(input_total * prices.price_input + output_total * prices.price_output) / 1e6,
        n_tasks=len(tasks),
        eval_errors=errors,
    )
    run.validate()
    return run


def measure_accuracy(client: EndpointClient, endpoint: EndpointId,
                     tasks: list[EvalTask], now: float = 0.0) -> float:
    """Accuracy only; used by the context sweep where cost accounting is irrelevant."""
    outcomes = [_run_task(client, endpoint, t, now) for t in tasks]
    return sum(o.solved for o in outcomes) / len(tasks)


def effective_context(client: EndpointClient, endpoint: EndpointId,
                      task_family: Callable[[int], list[EvalTask]],
                      levels: list[int], now: float = 0.0,
                      threshold: float = 0.90) -> int:
    """Largest context length at which the retrieval eval retains >= 90% accuracy; 0 if none."""
    if not levels:
        raise ValueError("effective_context requires at least one level")
    if sorted(levels) != list(levels):
        raise ValueError("levels must be ascending")
    best = 0
    for level in levels:
        if measure_accuracy(client, endpoint, task_family(level), now) >= threshold:
            best = level
    return best


def quality_composite(runs: dict[str, EvalRun], suite_weights: dict[str, float]) -> QualityScore:
    """q = 100 * sum_s w_s * accuracy_s over the configured suites."""
    if abs(sum(suite_weights.values()) - 1.0) > 1e-9:
        raise ValueError(f"suite weights sum to {sum(suite_weights.values())}, expected 1.0")
    missing = [s for s in suite_weights if s not in runs]
    if missing:
        raise EvalError(f"missing eval runs for suites: {missing}")
    endpoints = {run.endpoint for run in runs.values()}
    if len(endpoints) != 1:
        raise EvalError("quality_composite mixes runs from different endpoints")
    per_suite = {s: runs[s].accuracy for s in suite_weights}
    q = 100.0 * sum(w * per_suite[s] for s, w in suite_weights.items())
    return QualityScore(endpoint=next(iter(endpoints)), q=q, per_suite=per_suite)
