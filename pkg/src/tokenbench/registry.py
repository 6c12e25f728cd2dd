"""Identity model: endpoints, providers, model families, hardware, regions, workload presets.

A registry is loaded from a directory of CSV files (one per entity type),
fully cross-referenced and validated, and immutable afterwards, so it is
safe to share read-only across concurrent measurement loops.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple

from .util import fmt_float, sha256_hex

PRECISIONS = ("BF16", "FP8", "INT8", "FP16", "OTHER")
FULL_PRECISIONS = ("BF16", "FP16")
DECODINGS = ("standard", "speculative", "other")

PROVIDER_CATEGORIES = (
    "frontier_lab",
    "hyperscaler",
    "custom_silicon",
    "serverless_gpu",
    "aggregator",
    "raw_gpu_cloud",
    "decentralized",
    "multimodal_specialist",
)

FACTOR_NAMES = ("speed", "ttft", "price", "quality", "reliability")


class RegistryError(ValueError):
    """Parse failure, dangling reference, or invariant violation at load time."""


class DanglingReferenceError(RegistryError):
    pass


class FactorWeights(NamedTuple):
    """Preset weights over the five core factors; must sum to 1."""

    speed: float
    ttft: float
    price: float
    quality: float
    reliability: float


class EndpointId(NamedTuple):
    """The unit of analysis: one specific serving configuration."""

    provider: str
    model: str
    sku: str
    precision: str
    decoding: str
    region: str

    def __str__(self) -> str:
        return "/".join(self)

    @classmethod
    def parse(cls, text: str) -> "EndpointId":
        parts = text.split("/")
        if len(parts) != 6:
            raise ValueError(f"endpoint id needs 6 '/'-separated fields, got {text!r}")
        return cls(*parts)

    def validate(self) -> None:
        for name, value in zip(self._fields, self):
            if not value:
                raise RegistryError(f"endpoint id field {name!r} must be non-empty")
        if self.precision not in PRECISIONS:
            raise RegistryError(f"unknown precision {self.precision!r} (expected one of {PRECISIONS})")
        if self.decoding not in DECODINGS:
            raise RegistryError(f"unknown decoding {self.decoding!r} (expected one of {DECODINGS})")


@dataclass(frozen=True)
class Endpoint:
    id: EndpointId
    price_input: float  # USD per 1M tokens
    price_output: float
    price_cached_input: float | None = None  # defaults to price_input (no cache benefit)
    batch_discount: float = 0.0
    advertised_context: int = 128_000
    hardware_class: str = ""
    first_party: bool = False
    disclosed_quantization: bool = False

    @property
    def effective_cached_price(self) -> float:
        return self.price_input if self.price_cached_input is None else self.price_cached_input

    def validate(self) -> None:
        self.id.validate()
        if self.price_input < 0 or self.price_output < 0:
            raise RegistryError(f"{self.id}: prices must be >= 0")
        if self.price_cached_input is not None:
            if self.price_cached_input < 0:
                raise RegistryError(f"{self.id}: price_cached_input must be >= 0")
            if self.price_cached_input > self.price_input:
                raise RegistryError(
                    f"{self.id}: price_cached_input ({self.price_cached_input}) exceeds price_input ({self.price_input})"
                )
        if not 0.0 <= self.batch_discount <= 1.0:
            raise RegistryError(f"{self.id}: batch_discount must be in [0, 1]")
        if self.advertised_context <= 0:
            raise RegistryError(f"{self.id}: advertised_context must be > 0")


@dataclass(frozen=True)
class Provider:
    id: str
    name: str
    category: str

    def validate(self) -> None:
        if self.category not in PROVIDER_CATEGORIES:
            raise RegistryError(
                f"provider {self.id!r}: category {self.category!r} not one of {PROVIDER_CATEGORIES}"
            )


@dataclass(frozen=True)
class ModelFamily:
    id: str
    name: str
    first_party_provider: str | None
    open_weights: bool

    def validate(self) -> None:
        if not self.open_weights and not self.first_party_provider:
            raise RegistryError(f"model {self.id!r}: closed models must name a first_party_provider")


@dataclass(frozen=True)
class HardwareClass:
    name: str
    tdp_watts: float
    default_pue: float
    sharing_factor: float = 1.0  # streams amortizing one device

    def validate(self) -> None:
        if self.tdp_watts <= 0:
            raise RegistryError(f"hardware {self.name!r}: tdp_watts must be > 0")
        if self.default_pue < 1.0:
            raise RegistryError(f"hardware {self.name!r}: default_pue must be >= 1.0")
        if self.sharing_factor < 1.0:
            raise RegistryError(f"hardware {self.name!r}: sharing_factor must be >= 1")


@dataclass(frozen=True)
class Region:
    id: str
    grid_intensity: float  # gCO2eq per kWh
    pue_override: float | None = None

    def validate(self) -> None:
        if self.grid_intensity < 0:
            raise RegistryError(f"region {self.id!r}: grid_intensity must be >= 0")
        if self.pue_override is not None and self.pue_override < 1.0:
            raise RegistryError(f"region {self.id!r}: pue_override must be >= 1.0")


@dataclass(frozen=True)
class WorkloadPreset:
    name: str
    input_ratio: float
    output_ratio: float
    weights: FactorWeights

    def validate(self) -> None:
        if self.input_ratio <= 0 or self.output_ratio <= 0:
            raise RegistryError(f"preset {self.name!r}: both ratio parts must be > 0")
        for factor, w in zip(FACTOR_NAMES, self.weights):
            if not 0.0 <= w <= 1.0:
                raise RegistryError(f"preset {self.name!r}: weight {factor} must be in [0, 1]")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise RegistryError(f"preset {self.name!r}: weights sum to {sum(self.weights)}, expected 1.0")


@dataclass
class Registry:
    endpoints: list[Endpoint] = field(default_factory=list)
    providers: dict[str, Provider] = field(default_factory=dict)
    models: dict[str, ModelFamily] = field(default_factory=dict)
    hardware: dict[str, HardwareClass] = field(default_factory=dict)
    regions: dict[str, Region] = field(default_factory=dict)
    presets: dict[str, WorkloadPreset] = field(default_factory=dict)

    def endpoint(self, eid: EndpointId) -> Endpoint:
        for e in self.endpoints:
            if e.id == eid:
                return e
        raise KeyError(f"unknown endpoint {eid}")

    def hardware_for(self, endpoint: Endpoint) -> HardwareClass:
        return self.hardware[endpoint.hardware_class]

    def region_for(self, endpoint: Endpoint) -> Region:
        return self.regions[endpoint.id.region]

    def content_hash(self) -> str:
        """Hash of the canonical serialization; identifies registry versions in snapshots."""
        buf = io.StringIO()
        for name, rows in _serialize_tables(self).items():
            buf.write(name + "\n")
            buf.write(rows)
        return sha256_hex(buf.getvalue())

    def validate(self) -> None:
        for provider in self.providers.values():
            provider.validate()
        for model in self.models.values():
            model.validate()
            if model.first_party_provider and model.first_party_provider not in self.providers:
                raise DanglingReferenceError(
                    f"model {model.id!r} references unknown provider {model.first_party_provider!r}"
                )
        for hw in self.hardware.values():
            hw.validate()
        for region in self.regions.values():
            region.validate()
        for preset in self.presets.values():
            preset.validate()
        seen: set[EndpointId] = set()
        for endpoint in self.endpoints:
            endpoint.validate()
            if endpoint.id in seen:
                raise RegistryError(f"duplicate endpoint id {endpoint.id}")
            seen.add(endpoint.id)
            if endpoint.id.provider not in self.providers:
                raise DanglingReferenceError(
                    f"endpoint {endpoint.id} references unknown provider {endpoint.id.provider!r}"
                )
            if endpoint.id.model not in self.models:
                raise DanglingReferenceError(
                    f"endpoint {endpoint.id} references unknown model {endpoint.id.model!r}"
                )
            if endpoint.hardware_class not in self.hardware:
                raise DanglingReferenceError(
                    f"endpoint {endpoint.id} references unknown hardware class {endpoint.hardware_class!r}"
                )
            if endpoint.id.region not in self.regions:
                raise DanglingReferenceError(
                    f"endpoint {endpoint.id} references unknown region {endpoint.id.region!r}"
                )


def cohort(registry: Registry, model: str) -> list[Endpoint]:
    """All endpoints serving `model`, in lexicographic id order."""
    if model not in registry.models:
        raise KeyError(f"unknown model {model!r}")
    return sorted((e for e in registry.endpoints if e.id.model == model), key=lambda e: e.id)


# --- the built-in workload preset catalog ---

_PRESET_ROWS = [
    # name, in_ratio, out_ratio, (speed, ttft, price, quality, reliability)
    ("chat", 3, 1, (0.20, 0.30, 0.20, 0.20, 0.10)),
    ("voice_agent", 5, 1, (0.10, 0.50, 0.10, 0.15, 0.15)),
    ("coding_agent", 1, 3, (0.20, 0.10, 0.15, 0.40, 0.15)),
    ("generic_agent", 10, 1, (0.15, 0.20, 0.20, 0.30, 0.15)),
    ("rag", 20, 1, (0.10, 0.20, 0.30, 0.25, 0.15)),
    ("reasoning", 1, 5, (0.20, 0.05, 0.25, 0.45, 0.05)),
    ("batch", 5, 1, (0.05, 0.00, 0.65, 0.20, 0.10)),
    ("long_context", 50, 1, (0.05, 0.10, 0.40, 0.30, 0.15)),
    ("multimodal_vision", 5, 1, (0.15, 0.20, 0.20, 0.30, 0.15)),
    ("multimodal_voice", 1, 1, (0.10, 0.40, 0.20, 0.20, 0.10)),
]


def builtin_presets() -> list[WorkloadPreset]:
    """The 10 stock workload presets (input:output ratio plus factor weights)."""
    presets = [
        WorkloadPreset(name, float(ir), float(orat), FactorWeights(*w))
        for name, ir, orat, w in _PRESET_ROWS
    ]
    for p in presets:
        p.validate()
    return presets


# Regional grid intensity defaults, gCO2eq/kWh (30-day rolling averages).
_REGION_ROWS = [
    ("us-east", 380.0),
    ("us-west", 250.0),
    ("us-texas", 400.0),
    ("eu-central", 320.0),
    ("eu-nordic", 50.0),
    ("eu-france", 80.0),
    ("apac-singapore", 480.0),
    ("apac-tokyo", 500.0),
    ("china-hangzhou", 580.0),
]


def builtin_regions() -> list[Region]:
    return [Region(rid, intensity) for rid, intensity in _REGION_ROWS]


# --- CSV persistence -------------------------------------------------------

ENDPOINT_COLUMNS = [
    "provider", "model", "sku", "precision", "decoding", "region",
    "price_input", "price_output", "price_cached_input", "batch_discount",
    "advertised_context", "hardware_class", "first_party", "disclosed_quantization",
]
PROVIDER_COLUMNS = ["id", "name", "category"]
MODEL_COLUMNS = ["id", "name", "first_party_provider", "open_weights"]
HARDWARE_COLUMNS = ["name", "tdp_watts", "default_pue", "sharing_factor"]
REGION_COLUMNS = ["id", "grid_intensity", "pue_override"]
PRESET_COLUMNS = ["name", "input_ratio", "output_ratio", "w_s", "w_t", "w_p", "w_q", "w_r"]

REGISTRY_FILES = {
    "endpoints.csv": ENDPOINT_COLUMNS,
    "providers.csv": PROVIDER_COLUMNS,
    "models.csv": MODEL_COLUMNS,
    "hardware.csv": HARDWARE_COLUMNS,
    "regions.csv": REGION_COLUMNS,
    "presets.csv": PRESET_COLUMNS,
}


def _bool(text: str, where: str) -> bool:
    if text in ("true", "True", "1"):
        return True
    if text in ("false", "False", "0"):
        return False
    raise RegistryError(f"{where}: cannot parse boolean from {text!r}")


def _float(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise RegistryError(f"{where}: cannot parse number from {text!r}") from None


def _read_rows(path: Path, columns: list[str]) -> Iterator[dict[str, str]]:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return  # empty file: empty collection, not an error
        if list(reader.fieldnames) != columns:
            raise RegistryError(f"{path.name}: header {reader.fieldnames} does not match {columns}")
        yield from reader


def load_registry(path: Path | str) -> Registry:
    """Load and cross-validate a registry directory; raises RegistryError on any defect."""
    root = Path(path)
    reg = Registry()

    for row in _read_rows(root / "providers.csv", PROVIDER_COLUMNS):
        reg.providers[row["id"]] = Provider(row["id"], row["name"], row["category"])
    for row in _read_rows(root / "models.csv", MODEL_COLUMNS):
        reg.models[row["id"]] = ModelFamily(
            row["id"], row["name"], row["first_party_provider"] or None,
            _bool(row["open_weights"], f"models.csv:{row['id']}"),
        )
    for row in _read_rows(root / "hardware.csv", HARDWARE_COLUMNS):
        reg.hardware[row["name"]] = HardwareClass(
            row["name"],
            _float(row["tdp_watts"], "hardware.csv"),
            _float(row["default_pue"], "hardware.csv"),
            _float(row["sharing_factor"], "hardware.csv") if row["sharing_factor"] else 1.0,
        )
    for row in _read_rows(root / "regions.csv", REGION_COLUMNS):
        reg.regions[row["id"]] = Region(
            row["id"],
            _float(row["grid_intensity"], "regions.csv"),
            _float(row["pue_override"], "regions.csv") if row["pue_override"] else None,
        )
    for row in _read_rows(root / "presets.csv", PRESET_COLUMNS):
        reg.presets[row["name"]] = WorkloadPreset(
            row["name"],
            _float(row["input_ratio"], "presets.csv"),
            _float(row["output_ratio"], "presets.csv"),
            FactorWeights(*(_float(row[c], "presets.csv") for c in ("w_s", "w_t", "w_p", "w_q", "w_r"))),
        )
    for row in _read_rows(root / "endpoints.csv", ENDPOINT_COLUMNS):
        eid = EndpointId(row["provider"], row["model"], row["sku"],
                         row["precision"], row["decoding"], row["region"])
        reg.endpoints.append(Endpoint(
            id=eid,
            price_input=_float(row["price_input"], f"endpoints.csv:{eid}"),
            price_output=_float(row["price_output"], f"endpoints.csv:{eid}"),
            price_cached_input=(_float(row["price_cached_input"], f"endpoints.csv:{eid}")
                                if row["price_cached_input"] else None),
            batch_discount=_float(row["batch_discount"], f"endpoints.csv:{eid}") if row["batch_discount"] else 0.0,
            advertised_context=int(_float(row["advertised_context"], f"endpoints.csv:{eid}")),
            hardware_class=row["hardware_class"],
            first_party=_bool(row["first_party"], f"endpoints.csv:{eid}"),
            disclosed_quantization=_bool(row["disclosed_quantization"], f"endpoints.csv:{eid}"),
        ))

    reg.validate()
    return reg


def _csv_text(columns: list[str], rows: list[list[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    return buf.getvalue()


def _serialize_tables(reg: Registry) -> dict[str, str]:
    opt = lambda v: "" if v is None else fmt_float(v)
    tables = {
        "endpoints.csv": _csv_text(ENDPOINT_COLUMNS, [
            [*e.id, fmt_float(e.price_input), fmt_float(e.price_output),
             opt(e.price_cached_input), fmt_float(e.batch_discount),
             str(e.advertised_context), e.hardware_class,
             str(e.first_party).lower(), str(e.disclosed_quantization).lower()]
            for e in sorted(reg.endpoints, key=lambda e: e.id)
        ]),
        "providers.csv": _csv_text(PROVIDER_COLUMNS, [
            [p.id, p.name, p.category] for p in sorted(reg.providers.values(), key=lambda p: p.id)
        ]),
        "models.csv": _csv_text(MODEL_COLUMNS, [
            [m.id, m.name, m.first_party_provider or "", str(m.open_weights).lower()]
            for m in sorted(reg.models.values(), key=lambda m: m.id)
        ]),
        "hardware.csv": _csv_text(HARDWARE_COLUMNS, [
            [h.name, fmt_float(h.tdp_watts), fmt_float(h.default_pue), fmt_float(h.sharing_factor)]
            for h in sorted(reg.hardware.values(), key=lambda h: h.name)
        ]),
        "regions.csv": _csv_text(REGION_COLUMNS, [
            [r.id, fmt_float(r.grid_intensity), opt(r.pue_override)]
            for r in sorted(reg.regions.values(), key=lambda r: r.id)
        ]),
        "presets.csv": _csv_text(PRESET_COLUMNS, [
            [p.name, fmt_float(p.input_ratio), fmt_float(p.output_ratio),
             *(fmt_float(w) for w in p.weights)]
            for p in sorted(reg.presets.values(), key=lambda p: p.name)
        ]),
    }
    return tables


def save_registry(reg: Registry, path: Path | str) -> None:
    """Write the registry as its canonical CSV file set (load/save round-trips identically)."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    for name, text in _serialize_tables(reg).items():
        (root / name).write_text(text, encoding="utf-8")
