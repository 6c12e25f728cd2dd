"""Append-only measurement store and snapshot import/export.

Records live in memory with optional newline-delimited persistence per
record kind; snapshots serialize every table to CSV with a pinned canonical
formatting (fixed column order, 9-significant-digit decimals, LF endings)
so golden files are stable across platforms and export/import round-trips
are byte-identical.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable

from .energy import EnergyAssumptions, EnergyEstimate
from .evals import EvalRun
from .fingerprint import FidelityResult, Fingerprint
from .probes import ProbeConditions, ProbeRecord, LatencySummary
from .registry import EndpointId, Registry
from .scoring import CompositeScore, HeadlineMetrics, NormalizedFactors, RawFactors
from .util import fmt_float, fmt_timestamp

KINDS = ("probe_records", "latency_summaries", "eval_runs", "fingerprints",
         "fidelity", "energy_estimates", "composite_scores", "headline")

ID_COLS = ["provider", "model", "sku", "precision", "decoding", "region"]
REF_ID_COLS = ["ref_" + c for c in ID_COLS]


class StoreError(ValueError):
    pass


def _opt(value: float | None, fmt: Callable[[float], str] = fmt_float) -> str:
    return "" if value is None else fmt(value)


def _parse_opt(text: str) -> float | None:
    return None if text == "" else float(text)


def _eid(row: dict[str, str], prefix: str = "") -> EndpointId:
    return EndpointId(*(row[prefix + c] for c in ID_COLS))


def record_time(record: Any) -> float:
    """The record's place on the timeline; structural records report 0."""
    if isinstance(record, ProbeRecord):
        return record.request_time
    if isinstance(record, (LatencySummary, EvalRun)):
        return record.window[1]
    if isinstance(record, Fingerprint):
        return record.capture_time
    return 0.0


# --- per-kind CSV codecs ----------------------------------------------------

COLUMNS: dict[str, list[str]] = {
    "probe_records": ID_COLS + [
        "input_length", "concurrency", "probe_region", "request_time", "ttft", "ttfv",
        "total_time", "output_tokens", "status", "response_hash", "prompt_set_day",
        "inter_token_gaps"],
    "latency_summaries": ID_COLS + [
        "input_length", "concurrency", "probe_region", "window_start", "window_end",
        "ttft_p50", "ttft_p95", "ttft_p99", "output_speed", "jitter",
        "completion_rate", "error_rate", "n_probes"],
    "eval_runs": ID_COLS + [
        "suite", "window_start", "window_end", "accuracy", "tokens_to_solution",
        "input_tokens", "output_tokens", "thinking_tokens", "wall_clock",
        "dollar_cost", "n_tasks", "eval_errors"],
    "fingerprints": ID_COLS + [
        "refset_hash", "capture_time", "prompt_index", "position", "token", "probability"],
    "fidelity": ID_COLS + REF_ID_COLS + ["kl_sym", "f", "flag", "second_tier"],
    "energy_estimates": ID_COLS + [
        "j_per_token", "kwh_per_mtok", "gco2_per_mtok", "utilization", "pue", "sparsity",
        "sharing_factor", "throughput_used", "utilization_provenance", "pue_provenance",
        "sparsity_provenance"],
    "composite_scores": ID_COLS + [
        "preset", "scope", "score", "rank", "speed_norm", "ttft_norm", "price_norm",
        "quality_norm", "reliability_norm", "raw_speed", "raw_ttft_p50",
        "raw_blended_price", "raw_quality", "raw_reliability"],
    "headline": ID_COLS + [
        "j_ca", "c_ca", "j_per_token", "price_per_token", "tokens_to_solution", "accuracy"],
}


def rows_of(kind: str, records: Iterable[Any]) -> list[list[str]]:
    rows: list[list[str]] = []
    for r in records:
        if kind == "probe_records":
            rows.append([*r.endpoint, str(r.conditions.input_length), str(r.conditions.concurrency),
                         r.conditions.region, fmt_timestamp(r.request_time), fmt_float(r.ttft),
                         _opt(r.ttfv), fmt_float(r.total_time), str(r.output_tokens), r.status,
                         r.response_hash, r.prompt_set_day,
                         " ".join(fmt_float(g) for g in r.inter_token_gaps)])
        elif kind == "latency_summaries":
            rows.append([*r.endpoint, str(r.conditions.input_length), str(r.conditions.concurrency),
                         r.conditions.region, fmt_timestamp(r.window[0]), fmt_timestamp(r.window[1]),
                         fmt_float(r.ttft_p50), fmt_float(r.ttft_p95), fmt_float(r.ttft_p99),
                         fmt_float(r.output_speed), fmt_float(r.jitter), fmt_float(r.completion_rate),
                         fmt_float(r.error_rate), str(r.n_probes)])
        elif kind == "eval_runs":
            rows.append([*r.endpoint, r.suite, fmt_timestamp(r.window[0]), fmt_timestamp(r.window[1]),
                         fmt_float(r.accuracy), _opt(r.tokens_to_solution), str(r.input_tokens),
                         str(r.output_tokens), str(r.thinking_tokens), fmt_float(r.wall_clock),
                         fmt_float(r.dollar_cost), str(r.n_tasks), str(r.eval_errors)])
        elif kind == "fingerprints":
            for (prompt_index, position), dist in sorted(r.distributions.items()):
                for token, prob in sorted(dist.items(), key=lambda kv: (-kv[1], kv[0])):
                    rows.append([*r.endpoint, r.refset_hash, fmt_timestamp(r.capture_time),
                                 str(prompt_index), str(position), token, fmt_float(prob)])
        elif kind == "fidelity":
            rows.append([*r.endpoint, *r.reference_endpoint, fmt_float(r.kl_sym), fmt_float(r.f),
                         r.flag, str(r.second_tier).lower()])
        elif kind == "energy_estimates":
            a = r.assumptions
            rows.append([*r.endpoint, fmt_float(r.j_per_token), fmt_float(r.kwh_per_mtok),
                         fmt_float(r.gco2_per_mtok), fmt_float(a.utilization), fmt_float(a.pue),
                         fmt_float(a.sparsity), fmt_float(r.sharing_factor),
                         fmt_float(r.throughput_used), a.provenance["utilization"],
                         a.provenance["pue"], a.provenance["sparsity"]])
        elif kind == "composite_scores":
            rows.append([*r.endpoint, r.preset, r.scope, fmt_float(r.score), str(r.rank),
                         *(fmt_float(v) for v in r.normalized), *(fmt_float(v) for v in r.raw)])
        elif kind == "headline":
            rows.append([*r.endpoint, fmt_float(r.j_ca), fmt_float(r.c_ca),
                         fmt_float(r.j_per_token), fmt_float(r.price_per_token),
                         fmt_float(r.tokens_to_solution), fmt_float(r.accuracy)])
        else:
            raise StoreError(f"unknown record kind {kind!r}")
    return rows


def parse_table(kind: str, rows: list[dict[str, str]]) -> list[Any]:
    records: list[Any] = []
    if kind == "fingerprints":
        grouped: dict[tuple[EndpointId, str, str], dict[tuple[int, int], dict[str, float]]] = {}
        for row in rows:
            key = (_eid(row), row["refset_hash"], row["capture_time"])
            dist = grouped.setdefault(key, {})
            dist.setdefault((int(row["prompt_index"]), int(row["position"])), {})[row["token"]] = \
                float(row["probability"])
        for (eid, refset_hash, capture_time), dists in grouped.items():
            records.append(Fingerprint(endpoint=eid, refset_hash=refset_hash,
                                       distributions=dists, capture_time=float(capture_time)))
        return records
    for row in rows:
        if kind == "probe_records":
            records.append(ProbeRecord(
                endpoint=_eid(row),
                conditions=ProbeConditions(int(row["input_length"]), int(row["concurrency"]),
                                           row["probe_region"]),
                request_time=float(row["request_time"]), ttft=float(row["ttft"]),
                ttfv=_parse_opt(row["ttfv"]), total_time=float(row["total_time"]),
                output_tokens=int(row["output_tokens"]), status=row["status"],
                response_hash=row["response_hash"], prompt_set_day=row["prompt_set_day"],
                inter_token_gaps=[float(g) for g in row["inter_token_gaps"].split()],
            ))
        elif kind == "latency_summaries":
            records.append(LatencySummary(
                endpoint=_eid(row),
                conditions=ProbeConditions(int(row["input_length"]), int(row["concurrency"]),
                                           row["probe_region"]),
                window=(float(row["window_start"]), float(row["window_end"])),
                ttft_p50=float(row["ttft_p50"]), ttft_p95=float(row["ttft_p95"]),
                ttft_p99=float(row["ttft_p99"]), output_speed=float(row["output_speed"]),
                jitter=float(row["jitter"]), completion_rate=float(row["completion_rate"]),
                error_rate=float(row["error_rate"]), n_probes=int(row["n_probes"]),
            ))
        elif kind == "eval_runs":
            records.append(EvalRun(
                endpoint=_eid(row), suite=row["suite"],
                window=(float(row["window_start"]), float(row["window_end"])),
                accuracy=float(row["accuracy"]),
                tokens_to_solution=_parse_opt(row["tokens_to_solution"]),
                input_tokens=int(row["input_tokens"]), output_tokens=int(row["output_tokens"]),
                thinking_tokens=int(row["thinking_tokens"]), wall_clock=float(row["wall_clock"]),
                dollar_cost=float(row["dollar_cost"]), n_tasks=int(row["n_tasks"]),
                eval_errors=int(row["eval_errors"]),
            ))
        elif kind == "fidelity":
            records.append(FidelityResult(
                endpoint=_eid(row), reference_endpoint=_eid(row, "ref_"),
                kl_sym=float(row["kl_sym"]), f=float(row["f"]), flag=row["flag"],
                second_tier=row["second_tier"] == "true",
            ))
        elif kind == "energy_estimates":
            records.append(EnergyEstimate(
                endpoint=_eid(row), j_per_token=float(row["j_per_token"]),
                kwh_per_mtok=float(row["kwh_per_mtok"]), gco2_per_mtok=float(row["gco2_per_mtok"]),
                assumptions=EnergyAssumptions(
                    utilization=float(row["utilization"]), pue=float(row["pue"]),
                    sparsity=float(row["sparsity"]),
                    provenance={"utilization": row["utilization_provenance"],
                                "pue": row["pue_provenance"],
                                "sparsity": row["sparsity_provenance"]}),
                sharing_factor=float(row["sharing_factor"]),
                throughput_used=float(row["throughput_used"]),
            ))
        elif kind == "composite_scores":
            records.append(CompositeScore(
                endpoint=_eid(row), preset=row["preset"], scope=row["scope"],
                score=float(row["score"]), rank=int(row["rank"]),
                normalized=NormalizedFactors(*(float(row[c]) for c in (
                    "speed_norm", "ttft_norm", "price_norm", "quality_norm", "reliability_norm"))),
                raw=RawFactors(*(float(row[c]) for c in (
                    "raw_speed", "raw_ttft_p50", "raw_blended_price", "raw_quality",
                    "raw_reliability"))),
            ))
        elif kind == "headline":
            records.append(HeadlineMetrics(
                endpoint=_eid(row), j_ca=float(row["j_ca"]), c_ca=float(row["c_ca"]),
                j_per_token=float(row["j_per_token"]),
                price_per_token=float(row["price_per_token"]),
                tokens_to_solution=float(row["tokens_to_solution"]),
                accuracy=float(row["accuracy"]),
            ))
        else:
            raise StoreError(f"unknown record kind {kind!r}")
    return records


_KIND_BY_TYPE = {
    ProbeRecord: "probe_records",
    LatencySummary: "latency_summaries",
    EvalRun: "eval_runs",
    Fingerprint: "fingerprints",
    FidelityResult: "fidelity",
    EnergyEstimate: "energy_estimates",
    CompositeScore: "composite_scores",
    HeadlineMetrics: "headline",
}


class Store:
    """Append-only, in-memory-indexed record store with optional JSONL persistence.

    Multiple loops may append concurrently; each kind has one serialization
    point, and acknowledged records are never mutated or deleted.
    """

    def __init__(self, directory: Path | str | None = None) -> None:
        self.directory = Path(directory) if directory is not None else None
        self._tables: dict[str, list[Any]] = {kind: [] for kind in KINDS}
        self._locks: dict[str, threading.Lock] = {kind: threading.Lock() for kind in KINDS}
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
            for kind in KINDS:
                path = self.directory / f"{kind}.jsonl"
                if path.exists():
                    with path.open(encoding="utf-8") as fh:
                        rows = [dict(zip(COLUMNS[kind], json.loads(line))) for line in fh]
                    self._tables[kind] = parse_table(kind, rows)

    def append(self, record: Any) -> str:
        """Validate and durably append; returns the record kind as acknowledgment."""
        kind = _KIND_BY_TYPE.get(type(record))
        if kind is None:
            raise StoreError(f"cannot store records of type {type(record).__name__}")
        validate = getattr(record, "validate", None)
        if validate is not None:
            validate()
        with self._locks[kind]:
            self._tables[kind].append(record)
            if self.directory is not None:
                with (self.directory / f"{kind}.jsonl").open("a", encoding="utf-8") as fh:
                    for row in rows_of(kind, [record]):
                        fh.write(json.dumps(row) + "\n")
        return kind

    def records(self, kind: str) -> list[Any]:
        if kind not in self._tables:
            raise StoreError(f"unknown record kind {kind!r}")
        return list(self._tables[kind])

    def count(self, kind: str) -> int:
        return len(self._tables[kind])

    def query_window(self, kind: str, window: tuple[float, float],
                     endpoint: EndpointId | None = None,
                     conditions: ProbeConditions | None = None,
                     suite: str | None = None) -> list[Any]:
        """Records with timestamps in [start, end), matching the key, in append order."""
        start, end = window
        if end < start:
            raise StoreError(f"invalid window [{start}, {end})")
        out = []
        for record in self._tables[kind]:
            if not start <= record_time(record) < end:
                continue
            if endpoint is not None and record.endpoint != endpoint:
                continue
            if conditions is not None and getattr(record, "conditions", None) != conditions:
                continue
            if suite is not None and getattr(record, "suite", None) != suite:
                continue
            out.append(record)
        return out


# --- snapshots --------------------------------------------------------------


@dataclass
class Snapshot:
    version: str
    as_of: float
    registry_hash: str
    tables: dict[str, list[Any]] = field(default_factory=lambda: {k: [] for k in KINDS})

    def records(self, kind: str) -> list[Any]:
        if kind not in self.tables:
            raise StoreError(f"unknown record kind {kind!r}")
        return self.tables[kind]

    def validate(self, registry: Registry | None = None) -> None:
        for kind in KINDS:
            for record in self.tables.get(kind, []):
                if record_time(record) > self.as_of:
                    raise StoreError(f"{kind} record at {record_time(record)} is newer than "
                                     f"snapshot as_of {self.as_of}")
        if registry is not None:
            if registry.content_hash() != self.registry_hash:
                raise StoreError("snapshot registry_hash does not match the provided registry")
            known = {e.id for e in registry.endpoints}
            for kind in KINDS:
                for record in self.tables.get(kind, []):
                    if record.endpoint not in known:
                        raise StoreError(f"{kind} record references unknown endpoint "
                                         f"{record.endpoint}")


def export_snapshot(store: Store, as_of: float, version: str, registry_hash: str) -> Snapshot:
    snap = Snapshot(version=version, as_of=as_of, registry_hash=registry_hash,
                    tables={kind: store.records(kind) for kind in KINDS})
    snap.validate()
    return snap


def save_snapshot(snapshot: Snapshot, path: Path | str) -> None:
    """Write manifest + one CSV per table with canonical formatting."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    manifest = {"version": snapshot.version, "as_of": fmt_timestamp(snapshot.as_of),
                "registry_hash": snapshot.registry_hash}
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                        encoding="utf-8")
    for kind in KINDS:
        lines = [",".join(COLUMNS[kind])]
        lines += [",".join(row) for row in rows_of(kind, snapshot.tables[kind])]
        (root / f"{kind}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def import_snapshot(path: Path | str, registry: Registry | None = None) -> Snapshot:
    """Load a snapshot directory; verifies the registry hash when a registry is given."""
    import csv

    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise StoreError(f"{root}: no manifest.json; not a snapshot directory")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    tables: dict[str, list[Any]] = {}
    for kind in KINDS:
        file = root / f"{kind}.csv"
        if not file.exists():
            raise StoreError(f"{root}: missing table {kind}.csv")
        with file.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is not None and list(reader.fieldnames) != COLUMNS[kind]:
                raise StoreError(f"{kind}.csv: header does not match the canonical column order")
            tables[kind] = parse_table(kind, list(reader))
    snap = Snapshot(version=manifest["version"], as_of=float(manifest["as_of"]),
                    registry_hash=manifest["registry_hash"], tables=tables)
    snap.validate(registry)
    return snap
