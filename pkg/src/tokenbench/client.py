"""In-process streaming client interface shared by the probe, eval, and fingerprint loops.

The simulator fleet implements this protocol; a live-provider client would be
a drop-in replacement. Probe code consumes the timestamps carried on stream
events, never the host clock, so virtual-clock and real-sleep backends are
observationally identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Protocol

from .registry import EndpointId


@dataclass(frozen=True)
class StreamRequest:
    prompt: str
    max_tokens: int
    temperature: float = 0.0
    logprobs_top_k: int = 0  # 0 = no distributions on token events
    reasoning: bool = False  # opt in to a thinking phase on endpoints that support one


@dataclass(frozen=True, slots=True)
class TokenEvent:
    timestamp: float
    token_id: int
    text: str
    thinking: bool = False
    # token text -> probability for the top-k alternatives at this position;
    # present only when the request asked for logprobs. Probabilities sum to <= 1.
    top_probs: dict[str, float] | None = None


@dataclass(frozen=True, slots=True)
class StatusEvent:
    timestamp: float
    status: str  # "ok" | "error"
    detail: str = ""


StreamEvent = TokenEvent | StatusEvent


class EndpointClient(Protocol):
    def stream(self, endpoint: EndpointId, request: StreamRequest) -> Iterator[StreamEvent]:
        """Issue one streaming request; yields token events then exactly one StatusEvent."""
        ...


@dataclass
class StreamResult:
    """A fully drained stream, split into the pieces the measurement loops need."""

    request_time: float
    tokens: list[TokenEvent] = field(default_factory=list)
    status: StatusEvent | None = None

    @property
    def ok(self) -> bool:
        return self.status is not None and self.status.status == "ok"

    @property
    def visible_text(self) -> str:
        return "".join(t.text for t in self.tokens if not t.thinking)

    @property
    def full_text(self) -> str:
        return "".join(t.text for t in self.tokens)


def drain(client: EndpointClient, endpoint: EndpointId, request: StreamRequest,
          request_time: float) -> StreamResult:
    result = StreamResult(request_time=request_time)
    for event in client.stream(endpoint, request):
        if isinstance(event, TokenEvent):
            result.tokens.append(event)
        else:
            result.status = event
    return result
