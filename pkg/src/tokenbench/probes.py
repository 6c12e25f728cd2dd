"""Timed streaming probes and latency/throughput aggregation.

A probe is one timed streaming request under controlled conditions; a
summary is the nearest-rank percentile and throughput aggregate over a
window of them. Probes with a non-ok status are excluded from latency
percentiles and speed but included in completion/error rates.
"""

from __future__ import annotations

import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .client import EndpointClient, StreamRequest, TokenEvent, drain
from .registry import EndpointId
from .tasks import build_probe_prompt, count_tokens
from .util import VirtualClock, WallClock, day_of, nearest_rank, sha256_hex

if TYPE_CHECKING:
    from .store import Store

INPUT_LENGTHS = (1_000, 10_000, 100_000)
CONCURRENCY_LEVELS = (1, 10, 100)
PROBE_REGIONS = ("us-east", "eu-central", "apac-singapore")

PROBE_STATUSES = ("ok", "http_error", "timeout", "truncated")


@dataclass(frozen=True)
class ProbeConditions:
    input_length: int = 10_000
    concurrency: int = 1
    region: str = "us-east"

    def validate(self) -> None:
        if self.input_length not in INPUT_LENGTHS:
            raise ValueError(f"input_length must be one of {INPUT_LENGTHS}")
        if self.concurrency not in CONCURRENCY_LEVELS:
            raise ValueError(f"concurrency must be one of {CONCURRENCY_LEVELS}")


# The leaderboard default: 10K input, single stream, US-East.
DEFAULT_CONDITIONS = ProbeConditions()


@dataclass(frozen=True)
class ProbeRecord:
    endpoint: EndpointId
    conditions: ProbeConditions
    request_time: float
    ttft: float
    ttfv: float | None  # first post-thinking token; reasoning endpoints only
    inter_token_gaps: list[float]
    total_time: float
    output_tokens: int
    status: str
    response_hash: str
    prompt_set_day: str  # ISO date

    def validate(self) -> None:
        if self.status not in PROBE_STATUSES:
            raise ValueError(f"unknown probe status {self.status!r}")
        if self.ttft < 0 or self.total_time < 0:
            raise ValueError("ttft and total_time must be >= 0")
        if self.ttft > self.total_time:
            raise ValueError(f"ttft ({self.ttft}) exceeds total_time ({self.total_time})")
        if self.ttfv is not None and self.ttfv < self.ttft:
            raise ValueError("ttfv must be >= ttft")
        if self.status == "ok" and self.output_tokens >= 1:
            if self.output_tokens != len(self.inter_token_gaps) + 1:
                raise ValueError("output_tokens must equal len(inter_token_gaps) + 1 on ok probes")


@dataclass(frozen=True)
class LatencySummary:
    endpoint: EndpointId
    conditions: ProbeConditions
    window: tuple[float, float]
    ttft_p50: float
    ttft_p95: float
    ttft_p99: float
    output_speed: float  # tokens/sec, decode phase, mean over ok probes
    jitter: float  # stdev of inter-token gaps, pooled over ok probes
    completion_rate: float
    error_rate: float
    n_probes: int

    def validate(self) -> None:
        if self.n_probes < 1:
            raise ValueError("n_probes must be >= 1")
        if not self.ttft_p50 <= self.ttft_p95 <= self.ttft_p99:
            raise ValueError("ttft percentiles must be monotone")


def run_probe(client: EndpointClient, endpoint: EndpointId, conditions: ProbeConditions,
              prompt: str, *, now: float, deadline: float = 300.0,
              max_tokens: int = 64) -> ProbeRecord:
    """Issue one timed streaming request at time `now` (caller's clock).

    Endpoint failures are encoded in the record status, never raised; only a
    violated precondition (wrong prompt length) raises.
    """
    actual = count_tokens(prompt)
    if abs(actual - conditions.input_length) > 0.02 * conditions.input_length:
        raise ValueError(
            f"prompt length {actual} not within 2% of conditions.input_length {conditions.input_length}")

    request = StreamRequest(prompt=prompt, max_tokens=max_tokens)
    tokens: list[TokenEvent] = []
    status = "truncated"  # stream ended without a terminal status
    last_ts = None
    request_time = now
    try:
        stream = client.stream(endpoint, request)
        for event in stream:
            if event.timestamp - request_time > deadline:
                status = "timeout"
                last_ts = request_time + deadline
                break
            last_ts = event.timestamp
            if isinstance(event, TokenEvent):
                tokens.append(event)
            else:
                status = "ok" if event.status == "ok" else "http_error"
    except Exception:
        status = "http_error"

    if last_ts is None:
        last_ts = request_time

    ttft = tokens[0].timestamp - request_time if tokens else max(0.0, last_ts - request_time)
    ttfv = None
    if tokens and tokens[0].thinking:
        visible = [t for t in tokens if not t.thinking]
        ttfv = visible[0].timestamp - request_time if visible else None
    gaps = [tokens[i].timestamp - tokens[i - 1].timestamp for i in range(1, len(tokens))]
    if status != "ok":
        gaps = gaps if status == "timeout" else []
        if status == "http_error":
            tokens = []
    record = ProbeRecord(
        endpoint=endpoint,
        conditions=conditions,
        request_time=request_time,
        ttft=ttft,
        ttfv=ttfv,
        inter_token_gaps=gaps,
        total_time=max(ttft, last_ts - request_time),
        output_tokens=len(tokens),
        status=status,
        response_hash=sha256_hex("".join(t.text for t in tokens)),
        prompt_set_day=day_of(request_time).isoformat(),
    )
    record.validate()
    return record


def summarize(records: list[ProbeRecord]) -> LatencySummary:
    """Aggregate a homogeneous window of probes into percentiles and rates."""
    if not records:
        raise ValueError("summarize requires at least one probe record")
    key = (records[0].endpoint, records[0].conditions)
    if any((r.endpoint, r.conditions) != key for r in records):
        raise ValueError("summarize requires homogeneous (endpoint, conditions) records")

    ok = [r for r in records if r.status == "ok"]
    ttfts = sorted(r.ttft for r in ok)
    speeds = [r.output_tokens / (r.total_time - r.ttft) for r in ok
              if r.total_time > r.ttft and r.output_tokens > 0]
    pooled_gaps = [g for r in ok for g in r.inter_token_gaps]
    if ttfts:
        p50, p95, p99 = (nearest_rank(ttfts, p) for p in (0.50, 0.95, 0.99))
    else:
        p50 = p95 = p99 = 0.0
    summary = LatencySummary(
        endpoint=key[0],
        conditions=key[1],
        window=(min(r.request_time for r in records), max(r.request_time for r in records)),
        ttft_p50=p50, ttft_p95=p95, ttft_p99=p99,
        output_speed=statistics.fmean(speeds) if speeds else 0.0,
        jitter=statistics.pstdev(pooled_gaps) if len(pooled_gaps) > 1 else 0.0,
        completion_rate=len(ok) / len(records),
        error_rate=1.0 - len(ok) / len(records),
        n_probes=len(records),
    )
    summary.validate()
    return summary


@dataclass(frozen=True)
class ProbePlan:
    """Cadence, condition rotation, and the seeded daily prompt rotation."""

    cadence_minutes: float
    conditions_cycle: tuple[ProbeConditions, ...] = (DEFAULT_CONDITIONS,)
    rotation_seed: int = 0
    max_tokens: int = 64
    deadline: float = 300.0

    def validate(self) -> None:
        if self.cadence_minutes <= 0:
            raise ValueError("cadence must be positive")
        if not self.conditions_cycle:
            raise ValueError("conditions cycle must be non-empty")
        for c in self.conditions_cycle:
            c.validate()


@dataclass
class _PromptCache:
    plan: ProbePlan
    cache: dict[tuple[str, int], str] = field(default_factory=dict)

    def get(self, day: str, input_length: int) -> str:
        key = (day, input_length)
        if key not in self.cache:
            self.cache[key] = build_probe_prompt(input_length, day, self.plan.rotation_seed)
        return self.cache[key]


def schedule_probes(endpoints: list[EndpointId], client: EndpointClient, plan: ProbePlan,
                    store: "Store", clock: VirtualClock | WallClock, days: float = 1.0,
                    concurrency_workers: int = 100) -> int:
    """Run the probe loop for `days`, appending every record to the store.

    Prompt sets rotate at each UTC date boundary. With a virtual clock the
    loop advances time itself; probe failures are recorded, never raised.
    Returns the number of records written.
    """
    plan.validate()
    prompts = _PromptCache(plan)
    ticks = int(round(days * 24 * 60 / plan.cadence_minutes))
    written = 0
    pool = ThreadPoolExecutor(max_workers=concurrency_workers)
    try:
        for tick in range(ticks):
            conditions = plan.conditions_cycle[tick % len(plan.conditions_cycle)]
            now = clock.now()
            prompt = prompts.get(day_of(now).isoformat(), conditions.input_length)

            for endpoint in endpoints:
                if conditions.concurrency == 1:
                    records = [run_probe(client, endpoint, conditions, prompt,
                                         deadline=plan.deadline, max_tokens=plan.max_tokens, now=now)]
                else:
                    # Sustain the configured number of simultaneous streams; one
                    # record per stream, aggregation stays a single-writer phase.
                    records = list(pool.map(
                        lambda _i, _e=endpoint: run_probe(client, _e, conditions, prompt,
                                                          deadline=plan.deadline,
                                                          max_tokens=plan.max_tokens, now=now),
                        range(conditions.concurrency)))
                for record in records:
                    store.append(record)
                    written += 1
            if isinstance(clock, VirtualClock):
                clock.advance(plan.cadence_minutes * 60)
    finally:
        pool.shutdown(wait=True)
    return written
