"""Deterministic simulated endpoint fleet.

Serves streaming token responses with configurable latency distributions,
throughput jitter, fault injection, output-distribution perturbation
(emulating quantization), and planted task-success rates. Fully
deterministic given (spec seed, request content, request ordinal).

Two clock modes: "virtual" computes all timestamps without sleeping (the
whole acceptance suite runs in seconds); "real" sleeps between events and
stamps wall time. Consumers read timestamps off the events either way.
"""

from __future__ import annotations

import json
import math
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator

import numpy as np

from .client import StatusEvent, StreamEvent, StreamRequest, TokenEvent
from .registry import EndpointId
from .tasks import ParsedTask, filler_words, parse_task_prompt
from .util import VirtualClock, WallClock, derive_seed, hash_uniform, sha256_hex

# Token positions carry a distribution over this many candidate tokens;
# requests may ask for any top-k up to the support size.
DISTRIBUTION_SUPPORT = 32

# A terminal status event lands this long after the final token so that
# timestamps stay strictly increasing within a stream.
STATUS_GAP = 1e-6


class SimulatorError(ValueError):
    pass


class UnknownEndpointError(SimulatorError):
    pass


@dataclass(frozen=True)
class SimEndpointSpec:
    """Behavioral parameters for one simulated endpoint.

    `answer_tokens`, `thinking_tokens`, and `context_cliff_tokens` plant the
    reasoning verbosity, thinking phase, and long-context degradation point
    that the eval loop measures.
    """

    endpoint_id: EndpointId
    ttft_median: float  # seconds; lognormal median
    ttft_log_sigma: float  # lognormal shape
    tokens_per_sec: float
    jitter_cv: float  # coefficient of variation of inter-token gaps
    error_rate: float
    perturbation_epsilon: float  # output-distribution noise vs the family reference
    accuracy_penalty: float  # subtracted from the family base task-success probability
    seed: int
    answer_tokens: int = 24  # total tokens per eval answer (thinking pads up to this)
    thinking_tokens: int = 0  # thinking-phase tokens on freeform responses
    context_cliff_tokens: int | None = None  # declared context beyond which success degrades

    def validate(self) -> None:
        if self.ttft_median <= 0:
            raise SimulatorError(f"{self.endpoint_id}: ttft_median must be > 0")
        if self.ttft_log_sigma < 0 or self.jitter_cv < 0:
            raise SimulatorError(f"{self.endpoint_id}: shape parameters must be >= 0")
        if self.tokens_per_sec <= 0:
            raise SimulatorError(f"{self.endpoint_id}: tokens_per_sec must be > 0")
        # The upper bound is inclusive so always-failing endpoints are expressible.
        if not 0.0 <= self.error_rate <= 1.0:
            raise SimulatorError(f"{self.endpoint_id}: error_rate must be in [0, 1]")
        if self.perturbation_epsilon < 0:
            raise SimulatorError(f"{self.endpoint_id}: perturbation_epsilon must be >= 0")
        if not 0.0 <= self.accuracy_penalty < 1.0:
            raise SimulatorError(f"{self.endpoint_id}: accuracy_penalty must be in [0, 1)")
        if self.answer_tokens < 1:
            raise SimulatorError(f"{self.endpoint_id}: answer_tokens must be >= 1")


@dataclass(frozen=True)
class FamilyProfile:
    """Per-model-family behavior shared by every endpoint serving it."""

    model: str
    base_success: dict[str, float] = field(default_factory=dict)  # suite -> probability
    sensitivity: dict[str, float] = field(default_factory=dict)  # suite -> penalty multiplier
    default_success: float = 0.80
    context_base_success: float = 0.97  # retrieval success below the context cliff
    context_above_cliff: float = 0.50  # and beyond it
    default_context_cliff: int = 10**9

    def success_probability(self, suite: str, spec: SimEndpointSpec, declared_context: int,
                            is_context_probe: bool = False) -> float:
        cliff = spec.context_cliff_tokens if spec.context_cliff_tokens is not None \
            else self.default_context_cliff
        if is_context_probe:
            return self.context_above_cliff if declared_context > cliff \
                else self.context_base_success
        if declared_context > cliff:
            return self.context_above_cliff
        base = self.base_success.get(suite, self.default_success)
        penalty = spec.accuracy_penalty * self.sensitivity.get(suite, 1.0)
        return min(1.0, max(0.0, base - penalty))


class SimFleet:
    """A set of simulated endpoints behind the shared EndpointClient interface.

    Thread-safe: per-stream state is fully isolated; the only shared mutable
    state is the per-endpoint request counter.
    """

    def __init__(self, specs: list[SimEndpointSpec],
                 profiles: dict[str, FamilyProfile] | None = None,
                 clock: VirtualClock | WallClock | None = None,
                 mode: str = "virtual") -> None:
        if mode not in ("virtual", "real"):
            raise SimulatorError(f"unknown clock mode {mode!r}")
        self.specs: dict[EndpointId, SimEndpointSpec] = {}
        for spec in specs:
            spec.validate()
            if spec.endpoint_id in self.specs:
                raise SimulatorError(f"duplicate endpoint id {spec.endpoint_id}")
            self.specs[spec.endpoint_id] = spec
        self.profiles = dict(profiles or {})
        self.mode = mode
        self.clock = clock if clock is not None else (VirtualClock() if mode == "virtual" else WallClock())
        self._ordinals: dict[EndpointId, int] = {eid: 0 for eid in self.specs}
        self._lock = threading.Lock()
        self._sha_cache: dict[str, str] = {}

    def __len__(self) -> int:
        return len(self.specs)

    def profile_for(self, model: str) -> FamilyProfile:
        if model not in self.profiles:
            self.profiles[model] = FamilyProfile(model=model)
        return self.profiles[model]

    def reference_distribution(self, model: str, prompt: str, position: int) -> dict[str, float]:
        """The family's canonical token distribution at (prompt, position)."""
        return _mix_distribution(model, sha256_hex(prompt), position, epsilon=0.0, endpoint_seed=0)

    def stream(self, endpoint: EndpointId, request: StreamRequest) -> Iterator[StreamEvent]:
        if endpoint not in self.specs:
            raise UnknownEndpointError(f"unknown endpoint {endpoint}")
        if request.temperature != 0.0:
            raise SimulatorError("only temperature 0 is supported")
        spec = self.specs[endpoint]
        with self._lock:
            ordinal = self._ordinals[endpoint]
            self._ordinals[endpoint] = ordinal + 1
        return self._generate(spec, request, ordinal)

    # Draw order on the per-request RNG is a stable contract relied on by
    # fixture calibration: (1) ttft standard normal, (2) error uniform,
    # (3) gap vector.
    def _prompt_sha(self, prompt: str) -> str:
        sha = self._sha_cache.get(prompt)
        if sha is None:
            sha = sha256_hex(prompt)
            if len(self._sha_cache) < 4096:
                self._sha_cache[prompt] = sha
        return sha

    def _generate(self, spec: SimEndpointSpec, request: StreamRequest,
                  ordinal: int) -> Iterator[StreamEvent]:
        prompt_sha = self._prompt_sha(request.prompt)
        rng = np.random.default_rng(derive_seed("req", spec.seed, prompt_sha, ordinal))
        z = rng.standard_normal()
        ttft = spec.ttft_median * math.exp(spec.ttft_log_sigma * z)
        failed = rng.random() < spec.error_rate
        start = self.clock.now()

        if failed:
            yield from self._emit([], start, ttft, "error", "injected fault")
            return

        thinking_texts, visible_texts = self._plan_tokens(spec, request, prompt_sha, ordinal)
        texts = thinking_texts + visible_texts
        n_gaps = max(0, len(texts) - 1)
        if spec.jitter_cv == 0 or n_gaps == 0:
            gaps = np.full(n_gaps, 1.0 / spec.tokens_per_sec)
        else:
            shape = 1.0 / spec.jitter_cv**2
            gaps = rng.gamma(shape, spec.jitter_cv**2 / spec.tokens_per_sec, size=n_gaps)

        events: list[TokenEvent] = []
        offsets = ttft + np.concatenate(([0.0], np.cumsum(gaps)))
        k = request.logprobs_top_k
        for i, text in enumerate(texts):
            top = None
            if k > 0:
                dist = _mix_distribution(spec.endpoint_id.model, prompt_sha, i,
                                         spec.perturbation_epsilon, spec.seed)
                top = dict(sorted(dist.items(), key=lambda kv: (-kv[1], kv[0]))[:k])
            events.append(TokenEvent(
                timestamp=start + float(offsets[i]),
                token_id=derive_seed("tok", text) % 2**31,
                text=(" " if i else "") + text,
                thinking=i < len(thinking_texts),
                top_probs=top,
            ))
        yield from self._emit(events, start, float(offsets[-1]) if len(texts) else ttft, "ok", "")

    def _plan_tokens(self, spec: SimEndpointSpec, request: StreamRequest,
                     prompt_sha: str, ordinal: int) -> tuple[list[str], list[str]]:
        parsed = parse_task_prompt(request.prompt)
        if parsed is not None:
            return self._plan_answer(spec, request, parsed)
        n_visible = max(1, request.max_tokens)
        visible = filler_words(n_visible, derive_seed("resp", spec.seed, prompt_sha, ordinal))
        thinking = filler_words(spec.thinking_tokens, derive_seed("think", spec.seed, prompt_sha, ordinal)) \
            if spec.thinking_tokens else []
        return thinking, visible

    def _plan_answer(self, spec: SimEndpointSpec, request: StreamRequest,
                     parsed: ParsedTask) -> tuple[list[str], list[str]]:
        suite = parsed.key.rsplit(":", 1)[0]
        profile = self.profile_for(spec.endpoint_id.model)
        p = profile.success_probability(suite, spec, parsed.declared_context,
                                        parsed.is_context_probe)
        solved = _stratified_success(spec.seed, suite, parsed.index, parsed.total, p)
        answer = parsed.answer if solved else _wrong_answer(parsed.answer)
        visible = answer.split()
        thinking: list[str] = []
        if request.reasoning:
            # Deliberation pads the response up to the endpoint's verbosity.
            budget = min(spec.answer_tokens, max(1, request.max_tokens))
            thinking = filler_words(max(0, budget - len(visible)),
                                    derive_seed("think", spec.seed, parsed.key))
        return thinking, visible

    def _emit(self, tokens: list[TokenEvent], start: float,
              last_offset: float, status: str, detail: str) -> Iterator[StreamEvent]:
        if self.mode == "real":
            prev = start
            for event in tokens:
                time.sleep(max(0.0, event.timestamp - prev))
                prev = event.timestamp
                yield replace(event, timestamp=time.time())
            time.sleep(max(0.0, (start + last_offset + STATUS_GAP) - prev))
            yield StatusEvent(timestamp=time.time(), status=status, detail=detail)
            return
        yield from tokens
        yield StatusEvent(timestamp=start + last_offset + STATUS_GAP, status=status, detail=detail)


def spawn_fleet(specs: list[SimEndpointSpec], profiles: dict[str, FamilyProfile] | None = None,
                clock: VirtualClock | WallClock | None = None, mode: str = "virtual") -> SimFleet:
    return SimFleet(specs, profiles=profiles, clock=clock, mode=mode)


def _stratified_success(seed: int, suite: str, index: int, total: int, p: float) -> bool:
    """Seeded per-(task, endpoint) success draw, stratified across the suite.

    Tasks map onto a shifted 1/n lattice through a seeded stride permutation,
    so which tasks an endpoint solves looks random while the realized suite
    accuracy equals the configured probability to within one task (exactly,
    whenever p*n is an integer). Keeps planted accuracies reproducible
    without binomial noise.
    """
    total = max(1, total)
    phase = hash_uniform("solve-phase", seed, suite)
    stride = 1 + derive_seed("solve-stride", seed, suite) % total
    while math.gcd(stride, total) != 1:
        stride += 1
    position = (index * stride) % total
    u = (phase + (position + 0.5) / total) % 1.0
    return u < p


def _wrong_answer(answer: str) -> str:
    """A deterministic incorrect response of the same shape as the right one."""
    if answer.startswith("def "):
        return "def helper(): return 0"
    if answer.startswith("v") and answer[1:].isdigit():
        return "v000000"
    if answer.lstrip("-").isdigit():
        return str(int(answer) + 1)
    if len(answer) == 1 and answer.isalpha():
        return chr(ord("A") + (ord(answer) - ord("A") + 1) % 4)
    return answer + "?"


def _mix_distribution(model: str, prompt_sha: str, position: int,
                      epsilon: float, endpoint_seed: int) -> dict[str, float]:
    """(1 - eps) * family reference + eps * endpoint-seeded noise, shared support.

    The mixture is monotone in eps under symmetrized KL against the
    reference, which is what the fidelity flag thresholds exercise.
    Independent of request ordinal so repeated captures agree.
    """
    ref_rng = np.random.default_rng(derive_seed("refdist", model, prompt_sha, position))
    ids = ref_rng.choice(50_000, size=DISTRIBUTION_SUPPORT, replace=False)
    decay = np.exp(-0.45 * np.arange(DISTRIBUTION_SUPPORT))
    ref = decay * ref_rng.uniform(0.5, 1.5, size=DISTRIBUTION_SUPPORT)
    ref /= ref.sum()
    probs = ref
    if epsilon > 0:
        noise_rng = np.random.default_rng(
            derive_seed("noisedist", endpoint_seed, prompt_sha, position))
        noise = noise_rng.uniform(0.0, 1.0, size=DISTRIBUTION_SUPPORT)
        noise /= noise.sum()
        probs = (1.0 - epsilon) * ref + epsilon * noise
    return {f"t{ids[i]}": float(probs[i]) for i in range(DISTRIBUTION_SUPPORT)}


# --- fleet persistence ------------------------------------------------------

SIM_FLEET_COLUMNS = [
    "provider", "model", "sku", "precision", "decoding", "region",
    "ttft_median", "ttft_log_sigma", "tokens_per_sec", "jitter_cv", "error_rate",
    "perturbation_epsilon", "accuracy_penalty", "seed",
    "answer_tokens", "thinking_tokens", "context_cliff_tokens",
]


def load_fleet_specs(path: Path | str) -> list[SimEndpointSpec]:
    import csv

    specs = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is not None and list(reader.fieldnames) != SIM_FLEET_COLUMNS:
            raise SimulatorError(f"{path}: header does not match {SIM_FLEET_COLUMNS}")
        for row in reader:
            specs.append(SimEndpointSpec(
                endpoint_id=EndpointId(row["provider"], row["model"], row["sku"],
                                       row["precision"], row["decoding"], row["region"]),
                ttft_median=float(row["ttft_median"]),
                ttft_log_sigma=float(row["ttft_log_sigma"]),
                tokens_per_sec=float(row["tokens_per_sec"]),
                jitter_cv=float(row["jitter_cv"]),
                error_rate=float(row["error_rate"]),
                perturbation_epsilon=float(row["perturbation_epsilon"]),
                accuracy_penalty=float(row["accuracy_penalty"]),
                seed=int(row["seed"]),
                answer_tokens=int(row["answer_tokens"]) if row["answer_tokens"] else 24,
                thinking_tokens=int(row["thinking_tokens"]) if row["thinking_tokens"] else 0,
                context_cliff_tokens=int(row["context_cliff_tokens"]) if row["context_cliff_tokens"] else None,
            ))
    return specs


def save_fleet_specs(specs: list[SimEndpointSpec], path: Path | str) -> None:
    import csv

    from .util import fmt_float

    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SIM_FLEET_COLUMNS)
        for s in sorted(specs, key=lambda s: s.endpoint_id):
            writer.writerow([
                *s.endpoint_id,
                fmt_float(s.ttft_median), fmt_float(s.ttft_log_sigma),
                fmt_float(s.tokens_per_sec), fmt_float(s.jitter_cv), fmt_float(s.error_rate),
                fmt_float(s.perturbation_epsilon), fmt_float(s.accuracy_penalty), str(s.seed),
                str(s.answer_tokens), str(s.thinking_tokens),
                "" if s.context_cliff_tokens is None else str(s.context_cliff_tokens),
            ])


def load_family_profiles(path: Path | str) -> dict[str, FamilyProfile]:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    profiles = {}
    for model, cfg in raw.items():
        profiles[model] = FamilyProfile(
            model=model,
            base_success={k: float(v) for k, v in cfg.get("base_success", {}).items()},
            sensitivity={k: float(v) for k, v in cfg.get("sensitivity", {}).items()},
            default_success=float(cfg.get("default_success", 0.80)),
            context_base_success=float(cfg.get("context_base_success", 0.97)),
            context_above_cliff=float(cfg.get("context_above_cliff", 0.50)),
            default_context_cliff=int(cfg.get("default_context_cliff", 10**9)),
        )
    return profiles


def save_family_profiles(profiles: dict[str, FamilyProfile], path: Path | str) -> None:
    raw = {
        model: {
            "base_success": p.base_success,
            "sensitivity": p.sensitivity,
            "default_success": p.default_success,
            "context_base_success": p.context_base_success,
            "context_above_cliff": p.context_above_cliff,
            "default_context_cliff": p.default_context_cliff,
        }
        for model, p in sorted(profiles.items())
    }
    Path(path).write_text(json.dumps(raw, indent=2, sort_keys=True) + "\n", encoding="utf-8")
