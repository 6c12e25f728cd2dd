"""Synthetic verifiable eval tasks and prompt construction.

Stand-in suites for the public evals: deterministic arithmetic, multiple
choice, retrieval, and code-shaped tasks with machine-checkable answers.
Each prompt is self-contained, so any endpoint that can read the prompt can
in principle solve the task; the simulator does exactly that.

Tokenization throughout the project is whitespace splitting, which keeps
token counts exact and language-independent.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .util import derive_seed

VERIFIERS = ("exact_match", "numeric_match", "contains")

_WORDS = (
    "system stream latency request answer window provider region batch token "
    "context measure sample output signal steady buffer vector anchor router "
    "compute silicon thermal matrix packet ledger probe ratio margin cohort "
    "quantile jitter summary network channel uplink archive record index "
    "replica shard broker queue socket cache kernel tensor branch commit"
).split()


def filler_words(n: int, seed: int) -> list[str]:
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(_WORDS), size=max(n, 0))
    return [_WORDS[i] for i in idx]


def count_tokens(text: str) -> int:
    return len(text.split())


@dataclass(frozen=True)
class EvalTask:
    id: str
    suite: str
    prompt: str
    context_length: int
    verifier: str  # exact_match | numeric_match | contains
    reference_answer: str
    is_reasoning: bool = False

    def validate(self) -> None:
        if not self.reference_answer:
            raise ValueError(f"task {self.id}: reference_answer must be non-empty")
        if self.verifier not in VERIFIERS:
            raise ValueError(f"task {self.id}: unknown verifier {self.verifier!r}")
        if self.context_length > max(count_tokens(self.prompt), self.context_length):
            raise ValueError(f"task {self.id}: context_length exceeds prompt bound")


def verify(task: EvalTask, response: str) -> bool:
    text = " ".join(response.split())
    if task.verifier == "exact_match":
        return text == task.reference_answer
    if task.verifier == "numeric_match":
        numbers = re.findall(r"-?\d+(?:\.\d+)?", text)
        if not numbers:
            return False
        try:
            return abs(float(numbers[-1]) - float(task.reference_answer)) <= 1e-9
        except ValueError:
            return False
    if task.verifier == "contains":
        return task.reference_answer.lower() in text.lower()
    raise ValueError(f"unknown verifier {task.verifier!r}")


# --- generators -------------------------------------------------------------

def arithmetic_suite(suite: str, n: int, seed: int, is_reasoning: bool = False) -> list[EvalTask]:
    rng = np.random.default_rng(derive_seed("suite", suite, seed))
    tasks = []
    for i in range(n):
        a = int(rng.integers(100, 9999))
        b = int(rng.integers(100, 9999))
        op, answer = ("+", a + b) if rng.random() < 0.5 else ("*", a * b)
        prompt = f"[task {suite}:{i}/{n}] Compute {a} {op} {b}. Reply with the number only."
        tasks.append(EvalTask(
            id=f"{suite}:{i}", suite=suite, prompt=prompt,
            context_length=count_tokens(prompt), verifier="numeric_match",
            reference_answer=str(answer), is_reasoning=is_reasoning,
        ))
    return tasks


def choice_suite(suite: str, n: int, seed: int) -> list[EvalTask]:
    rng = np.random.default_rng(derive_seed("suite", suite, seed))
    letters = "ABCD"
    tasks = []
    for i in range(n):
        values = rng.choice(10_000, size=4, replace=False)
        correct = int(rng.integers(0, 4))
        options = " ".join(f"{letters[j]}={values[j]}" for j in range(4))
        prompt = (f"[task {suite}:{i}/{n}] Which letter labels the value {values[correct]}? "
                  f"Options: {options}. Reply with the letter only.")
        tasks.append(EvalTask(
            id=f"{suite}:{i}", suite=suite, prompt=prompt,
            context_length=count_tokens(prompt), verifier="exact_match",
            reference_answer=letters[correct],
        ))
    return tasks


def code_suite(suite: str, n: int, seed: int) -> list[EvalTask]:
    rng = np.random.default_rng(derive_seed("suite", suite, seed))
    tasks = []
    for i in range(n):
        a, b = int(rng.integers(2, 99)), int(rng.integers(2, 99))
        prompt = (f"[task {suite}:{i}/{n}] Write a python function named solution_{i} "
                  f"returning {a} * {b}.")
        tasks.append(EvalTask(
            id=f"{suite}:{i}", suite=suite, prompt=prompt,
            context_length=count_tokens(prompt), verifier="contains",
            reference_answer=f"def solution_{i}",
        ))
    return tasks


def retrieval_suite(suite: str, n: int, seed: int, context_length: int,
                    haystack_tokens: int = 240) -> list[EvalTask]:
    """Needle-in-haystack retrieval at a declared context length.

    The declared length drives endpoint behavior (long-context degradation);
    the embedded haystack is capped so suites stay cheap to generate.
    """
    rng = np.random.default_rng(derive_seed("suite", suite, seed, context_length))
    tasks = []
    for i in range(n):
        key = int(rng.integers(0, 100))
        value = f"v{int(rng.integers(100000, 999999))}"
        filler = " ".join(filler_words(haystack_tokens, derive_seed(suite, i, "hay")))
        prompt = (f"[task {suite}:{i}/{n}] [ctx {context_length}] Excerpt of a "
                  f"{context_length}-token document follows. {filler} "
                  f"Note that key k{key} holds value {value}. {filler} "
                  f"What value does key k{key} hold? Reply with the value only.")
        tasks.append(EvalTask(
            id=f"{suite}:{i}", suite=suite, prompt=prompt,
            context_length=context_length, verifier="exact_match",
            reference_answer=value,
        ))
    return tasks


def context_suite_name(base: str, level: int) -> str:
    return f"{base}_{level}"


def parse_context_suite(suite: str, base: str = "aa_lcr") -> int | None:
    """Inverse of context_suite_name; returns the level or None."""
    m = re.fullmatch(re.escape(base) + r"_(\d+)", suite)
    return int(m.group(1)) if m else None


# --- prompt parsing (used by the simulator to actually solve tasks) --------

_TASK_RE = re.compile(r"^\[task ([\w.:-]+):(\d+)/(\d+)\]")
_CTX_RE = re.compile(r"\[ctx (\d+)\]")
_ARITH_RE = re.compile(r"Compute (\d+) ([+*]) (\d+)\.")
_CHOICE_RE = re.compile(r"Which letter labels the value (\d+)\? Options: (.+?)\. Reply")
_RETRIEVAL_RE = re.compile(r"What value does key (k\d+) hold\?")
_CODE_RE = re.compile(r"function named (solution_\d+) returning (\d+) \* (\d+)")


@dataclass(frozen=True)
class ParsedTask:
    key: str  # "<suite>:<index>", stable across endpoints
    answer: str
    declared_context: int
    is_context_probe: bool = False  # carries an explicit [ctx N] header
    index: int = 0
    total: int = 1  # suite size, from the task header


def parse_task_prompt(prompt: str) -> ParsedTask | None:
    header = _TASK_RE.match(prompt)
    if header is None:
        return None
    key = f"{header.group(1)}:{header.group(2)}"
    index, total = int(header.group(2)), int(header.group(3))
    ctx = _CTX_RE.search(prompt)
    declared = int(ctx.group(1)) if ctx else count_tokens(prompt)

    args = dict(declared_context=declared, is_context_probe=ctx is not None,
                index=index, total=total)
    m = _ARITH_RE.search(prompt)
    if m:
        a, op, b = int(m.group(1)), m.group(2), int(m.group(3))
        return ParsedTask(key, str(a + b if op == "+" else a * b), **args)
    m = _CHOICE_RE.search(prompt)
    if m:
        target = m.group(1)
        for part in m.group(2).split():
            letter, _, value = part.partition("=")
            if value == target:
                return ParsedTask(key, letter, **args)
        return None
    m = _CODE_RE.search(prompt)
    if m:
        name, a, b = m.group(1), int(m.group(2)), int(m.group(3))
        return ParsedTask(key, f"def {name}(): return {a * b}", **args)
    m = _RETRIEVAL_RE.search(prompt)
    if m:
        needle = re.search(rf"key {m.group(1)} holds value (v\d+)", prompt)
        if needle:
            return ParsedTask(key, needle.group(1), **args)
    return None


def build_probe_prompt(input_length: int, day: str, rotation_seed: int) -> str:
    """Fixed daily probe prompt of exactly `input_length` whitespace tokens."""
    header = f"[probe {day}]"
    body = filler_words(input_length - count_tokens(header),
                        derive_seed("probe-prompt", day, rotation_seed, input_length))
    return " ".join([header, *body])
