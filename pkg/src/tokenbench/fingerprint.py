"""Output-distribution fingerprints and endpoint fidelity.

A fingerprint is the set of truncated token-level output distributions on a
fixed reference prompt set, forced-decoded so positions align across
endpoints. Fidelity maps the mean symmetrized KL divergence against a
first-party (or best-available) reference onto a 0-100 scale with a
three-way flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .client import EndpointClient, StreamRequest, TokenEvent, drain
from .registry import FULL_PRECISIONS, EndpointId, Registry
from .tasks import filler_words
from .util import derive_seed, sha256_hex

SUPPORT_FLOOR = 1e-6  # probability assigned to tokens absent from a truncated support

FLAG_FAITHFUL = "faithful"
FLAG_DRIFTED = "drifted"
FLAG_QUANTIZED = "quantized_or_modified"

FAITHFUL_MIN = 99.5
DRIFTED_MIN = 95.0


class FingerprintError(ValueError):
    pass


class LogprobsUnsupportedError(FingerprintError):
    """The endpoint does not return token log-probabilities; fidelity is undefined for it."""


@dataclass(frozen=True)
class ReferenceSet:
    prompts: tuple[str, ...]
    positions_per_prompt: int = 8
    top_k: int = 20
    seed: int = 0

    def validate(self) -> None:
        if not self.prompts:
            raise FingerprintError("reference set needs at least one prompt")
        if self.positions_per_prompt < 1:
            raise FingerprintError("positions_per_prompt must be >= 1")
        if self.top_k < 2:
            raise FingerprintError("top_k must be >= 2")

    def content_hash(self) -> str:
        """64-bit content id; binds fingerprints to the exact prompt set and truncation."""
        body = "\x1f".join(self.prompts)
        return sha256_hex(f"{body}|{self.positions_per_prompt}|{self.top_k}|{self.seed}")[:16]


def make_reference_set(n_prompts: int = 1024, positions_per_prompt: int = 8,
                       top_k: int = 20, seed: int = 0) -> ReferenceSet:
    """Deterministic reference prompt set; prompts are fixed short passages."""
    prompts = tuple(
        " ".join(filler_words(12, derive_seed("refset-prompt", seed, i)))
        for i in range(n_prompts)
    )
    refset = ReferenceSet(prompts, positions_per_prompt, top_k, seed)
    refset.validate()
    return refset


@dataclass(frozen=True)
class Fingerprint:
    endpoint: EndpointId
    refset_hash: str
    # (prompt_index, position) -> token text -> probability, truncated to top-k
    distributions: dict[tuple[int, int], dict[str, float]]
    capture_time: float

    def validate(self) -> None:
        for key, dist in self.distributions.items():
            if not dist:
                raise FingerprintError(f"empty distribution at {key}")
            total = sum(dist.values())
            if total > 1.0 + 1e-9 or any(p <= 0 or p > 1 for p in dist.values()):
                raise FingerprintError(f"distribution at {key} is not a truncated probability map")


@dataclass(frozen=True)
class FidelityResult:
    endpoint: EndpointId
    reference_endpoint: EndpointId
    kl_sym: float
    f: float  # 0-100
    flag: str
    second_tier: bool  # reference is not a true first-party endpoint


def capture_fingerprint(client: EndpointClient, endpoint: EndpointId, refset: ReferenceSet,
                        now: float = 0.0, retries: int = 3) -> Fingerprint:
    """One truncated distribution per (prompt, position), aligned by forced decoding."""
    refset.validate()
    distributions: dict[tuple[int, int], dict[str, float]] = {}
    for prompt_index, prompt in enumerate(refset.prompts):
        request = StreamRequest(prompt=prompt, max_tokens=refset.positions_per_prompt,
                                logprobs_top_k=refset.top_k)
        result = None
        for _ in range(max(1, retries)):
            result = drain(client, endpoint, request, request_time=now)
            if result.ok:
                break
        if result is None or not result.ok:
            raise FingerprintError(f"{endpoint}: probe stream failed on reference prompt {prompt_index}")
        positions = [t for t in result.tokens][: refset.positions_per_prompt]
        for position, token in enumerate(positions):
            if token.top_probs is None:
                raise LogprobsUnsupportedError(
                    f"{endpoint}: no token log-probabilities in stream; fingerprint undefined")
            distributions[(prompt_index, position)] = dict(token.top_probs)
    fp = Fingerprint(endpoint=endpoint, refset_hash=refset.content_hash(),
                     distributions=distributions, capture_time=now)
    fp.validate()
    return fp


def sym_kl(p: dict[str, float], q: dict[str, float]) -> float:
    """Symmetrized KL (nats) on the union support after flooring and renormalization.

    Both distributions are extended to the union of their supports with a
    1e-6 floor on absent tokens, renormalized, and then KL(p||q) + KL(q||p)
    is computed. Zero iff the smoothed distributions are equal.
    """
    if not p or not q:
        raise FingerprintError("sym_kl requires non-empty distributions")
    support = sorted(set(p) | set(q))
    pv = [p.get(t, SUPPORT_FLOOR) for t in support]
    qv = [q.get(t, SUPPORT_FLOOR) for t in support]
    ps, qs = sum(pv), sum(qv)
    total = 0.0
    for a, b in zip(pv, qv):
        a, b = a / ps, b / qs
        total += a * math.log(a / b) + b * math.log(b / a)
    return max(0.0, total)


def fidelity(fp: Fingerprint, ref: Fingerprint, z: float,
             ref_first_party: bool = True) -> FidelityResult:
    """Mean per-position sym_kl mapped to f = 100*(1 - kl/z), clamped to [0, 100]."""
    if fp.refset_hash != ref.refset_hash:
        raise FingerprintError("fingerprints were captured on different reference sets")
    if z <= 0:
        raise FingerprintError("normalization constant z must be > 0")
    keys = fp.distributions.keys()
    if keys != ref.distributions.keys():
        raise FingerprintError("fingerprints cover different (prompt, position) sets")
    mean_kl = sum(sym_kl(fp.distributions[k], ref.distributions[k]) for k in keys) / len(keys)
    f = min(100.0, max(0.0, 100.0 * (1.0 - mean_kl / z)))
    return FidelityResult(endpoint=fp.endpoint, reference_endpoint=ref.endpoint,
                          kl_sym=mean_kl, f=f, flag=classify(f),
                          second_tier=not ref_first_party)


def classify(f: float) -> str:
    """Three-way flag with closed-left bins: [99.5, 100], [95, 99.5), [0, 95)."""
    if f >= FAITHFUL_MIN:
        return FLAG_FAITHFUL
    if f >= DRIFTED_MIN:
        return FLAG_DRIFTED
    return FLAG_QUANTIZED


@dataclass(frozen=True)
class ZCalibration:
    z: float
    margin: float  # min over holdout pairs of (f - 99.5) at the returned z


def calibrate_z(holdout: list[tuple[Fingerprint, Fingerprint]],
                z_floor: float = 1e-3) -> ZCalibration:
    """Smallest z mapping every labeled-faithful holdout pair to f >= 99.5."""
    if not holdout:
        raise FingerprintError("calibrate_z requires a non-empty holdout")
    kls = []
    for fp, ref in holdout:
        keys = fp.distributions.keys()
        kls.append(sum(sym_kl(fp.distributions[k], ref.distributions[k]) for k in keys) / len(keys))
    z = max(max(kls) / ((100.0 - FAITHFUL_MIN) / 100.0), z_floor)
    # Guarantee the postcondition under floating-point rounding.
    while any(100.0 * (1.0 - kl / z) < FAITHFUL_MIN for kl in kls):
        z = math.nextafter(z, math.inf)
    margin = min(100.0 * (1.0 - kl / z) for kl in kls) - FAITHFUL_MIN
    return ZCalibration(z=z, margin=margin)


def select_reference(cohort_fingerprints: dict[EndpointId, Fingerprint],
                     registry: Registry) -> tuple[EndpointId, bool]:
    """Pick the fidelity reference for a cohort.

    First-party full-precision endpoints win outright; otherwise the
    full-precision endpoint with the lowest mean pairwise divergence
    (equivalently, highest mean pairwise fidelity). Ties break
    lexicographically. Returns (reference id, second_tier).
    """
    if not cohort_fingerprints:
        raise FingerprintError("select_reference requires at least one fingerprint")
    by_id = {e.id: e for e in registry.endpoints}
    unknown = [eid for eid in cohort_fingerprints if eid not in by_id]
    if unknown:
        raise FingerprintError(f"fingerprints for endpoints not in the registry: {unknown}")
    candidates = [eid for eid in cohort_fingerprints
                  if eid.precision in FULL_PRECISIONS and by_id[eid].first_party]
    second_tier = not candidates
    if second_tier:
        candidates = [eid for eid in cohort_fingerprints if eid.precision in FULL_PRECISIONS]
    if not candidates:
        candidates = list(cohort_fingerprints)  # no full-precision endpoint at all
    if len(candidates) == 1:
        return sorted(candidates)[0], second_tier

    def mean_divergence(eid: EndpointId) -> float:
        me = cohort_fingerprints[eid]
        others = [fp for other, fp in cohort_fingerprints.items() if other != eid]
        per_pair = []
        for fp in others:
            keys = me.distributions.keys()
            per_pair.append(sum(sym_kl(me.distributions[k], fp.distributions[k]) for k in keys)
                            / len(keys))
        return sum(per_pair) / len(per_pair)

    return min(sorted(candidates), key=mean_divergence), second_tier


@dataclass(frozen=True)
class SkuClassSummary:
    precision: str
    n: int
    mean_f: float
    mean_eval_delta: dict[str, float]  # suite -> mean accuracy delta vs the reference endpoint


def fidelity_by_sku(results: list[FidelityResult], registry: Registry,
                    eval_accuracy: dict[tuple[EndpointId, str], float] | None = None,
                    delta_suites: tuple[str, ...] = ()) -> list[SkuClassSummary]:
    """Group fidelity results by precision class with mean f and eval deltas vs reference."""
    known = {e.id for e in registry.endpoints}
    for r in results:
        if r.endpoint not in known:
            raise FingerprintError(f"fidelity result for unknown endpoint {r.endpoint}")
    groups: dict[str, list[FidelityResult]] = {}
    for r in results:
        groups.setdefault(r.endpoint.precision, []).append(r)
    summaries = []
    for precision in sorted(groups):
        rows = groups[precision]
        deltas: dict[str, float] = {}
        if eval_accuracy is not None:
            for suite in delta_suites:
                pairs = [(eval_accuracy.get((r.endpoint, suite)),
                          eval_accuracy.get((r.reference_endpoint, suite))) for r in rows]
                usable = [(a, b) for a, b in pairs if a is not None and b is not None]
                if usable:
                    deltas[suite] = sum(a - b for a, b in usable) / len(usable)
        summaries.append(SkuClassSummary(
            precision=precision, n=len(rows),
            mean_f=sum(r.f for r in rows) / len(rows),
            mean_eval_delta=deltas,
        ))
    return summaries
