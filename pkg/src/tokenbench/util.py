"""Shared low-level helpers: seeding, hashing, percentiles, clocks, canonical formatting."""

from __future__ import annotations

import hashlib
import math
import threading
import time
from datetime import date, datetime, timezone

# Epoch used by the virtual clock so prompt rotation days are real dates.
VIRTUAL_EPOCH = datetime(2026, 1, 1, tzinfo=timezone.utc).timestamp()


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def derive_seed(*parts: object) -> int:
    """Stable 64-bit seed from heterogeneous parts (order-sensitive)."""
    h = hashlib.sha256("|".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(h[:8], "big")


def hash_uniform(*parts: object) -> float:
    """Deterministic uniform in [0, 1) keyed on the given parts."""
    return derive_seed(*parts) / 2**64


def nearest_rank(sorted_values: list[float], p: float) -> float:
    """Nearest-rank percentile: the ceil(p*n)-th order statistic (1-indexed).

    Exact on small n and reproducible across languages; `sorted_values`
    must already be ascending and non-empty.
    """
    if not sorted_values:
        raise ValueError("nearest_rank on empty input")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"percentile p must be in (0, 1], got {p}")
    k = max(1, math.ceil(p * len(sorted_values)))
    return sorted_values[k - 1]


def day_of(timestamp: float) -> date:
    return datetime.fromtimestamp(timestamp, tz=timezone.utc).date()


class VirtualClock:
    """Monotonic simulated clock; `advance` is the only way time passes."""

    def __init__(self, start: float = VIRTUAL_EPOCH) -> None:
        self._now = start
        self._lock = threading.Lock()

    def now(self) -> float:
        return self._now

    def advance(self, seconds: float) -> float:
        if seconds < 0:
            raise ValueError("cannot advance a clock backwards")
        with self._lock:
            self._now += seconds
            return self._now


class WallClock:
    """Real time; satisfies the same interface as VirtualClock."""

    def now(self) -> float:
        return time.time()


# --- canonical number formatting (pinned so CSV golden files are stable) ---

def fmt_float(x: float) -> str:
    """9 significant digits; stable under a parse/format round-trip."""
    if x != x:
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return format(x, ".9g")


def fmt_timestamp(t: float) -> str:
    """Fixed-point microsecond epoch seconds (9 significant digits would lose sub-second order)."""
    return format(t, ".6f")
