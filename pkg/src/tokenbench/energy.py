"""Modeled energy: joules per token, kWh and gCO2 per million tokens.

Energy is computed, not metered: hardware thermal design power, modeled
utilization, facility PUE, sparsity savings, and measured decode throughput
combine into a per-token joule figure, amortized across the streams sharing
one device. Every estimate carries the provenance of its assumptions so
downstream consumers can separate disclosed from modeled figures.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .registry import Endpoint, EndpointId, HardwareClass, Region

DEFAULT_UTILIZATION = 0.70
JOULES_PER_KWH = 3.6e6

PROVENANCE_VALUES = ("disclosed", "regional_default", "modeled")


class EnergyError(ValueError):
    pass


@dataclass(frozen=True)
class EnergyAssumptions:
    utilization: float = DEFAULT_UTILIZATION
    pue: float = 1.2
    sparsity: float = 0.0
    provenance: dict[str, str] = field(default_factory=lambda: {
        "utilization": "modeled", "pue": "regional_default", "sparsity": "modeled"})

    def validate(self) -> None:
        if not 0.0 < self.utilization <= 1.0:
            raise EnergyError("utilization must be in (0, 1]")
        if self.pue < 1.0:
            raise EnergyError("pue must be >= 1.0")
        if not 0.0 <= self.sparsity < 1.0:
            raise EnergyError("sparsity must be in [0, 1)")
        for key in ("utilization", "pue", "sparsity"):
            if self.provenance.get(key) not in PROVENANCE_VALUES:
                raise EnergyError(f"missing or invalid provenance for {key!r}")


@dataclass(frozen=True)
class EnergyEstimate:
    endpoint: EndpointId
    j_per_token: float
    kwh_per_mtok: float
    gco2_per_mtok: float
    assumptions: EnergyAssumptions
    sharing_factor: float
    throughput_used: float

    def validate(self) -> None:
        if self.j_per_token <= 0:
            raise EnergyError("j_per_token must be > 0")
        if abs(self.kwh_per_mtok - self.j_per_token * 1e6 / JOULES_PER_KWH) > 1e-9 * max(1.0, self.kwh_per_mtok):
            raise EnergyError("kwh_per_mtok does not satisfy the energy identity")


def resolve_assumptions(hw: HardwareClass, region: Region,
                        disclosed_utilization: float | None = None,
                        disclosed_pue: float | None = None,
                        sparsity: float = 0.0) -> EnergyAssumptions:
    """Resolution order for PUE: provider disclosure, then region override, then hardware default."""
    if disclosed_pue is not None:
        pue, pue_src = disclosed_pue, "disclosed"
    elif region.pue_override is not None:
        pue, pue_src = region.pue_override, "regional_default"
    else:
        pue, pue_src = hw.default_pue, "modeled"
    if disclosed_utilization is not None:
        utilization, util_src = disclosed_utilization, "disclosed"
    else:
        utilization, util_src = DEFAULT_UTILIZATION, "modeled"
    assumptions = EnergyAssumptions(
        utilization=utilization, pue=pue, sparsity=sparsity,
        provenance={"utilization": util_src, "pue": pue_src, "sparsity": "modeled"},
    )
    assumptions.validate()
    return assumptions


def joules_per_token(hw: HardwareClass, assumptions: EnergyAssumptions,
                     tokens_per_sec: float) -> float:
    """TDP * utilization * PUE * (1 - sparsity) / throughput, amortized per stream."""
    if tokens_per_sec <= 0:
        raise EnergyError("tokens_per_sec must be > 0")
    assumptions.validate()
    device = hw.tdp_watts * assumptions.utilization * assumptions.pue * (1.0 - assumptions.sparsity)
    return device / tokens_per_sec / hw.sharing_factor


def kwh_and_co2(j_per_token: float, region: Region) -> tuple[float, float]:
    """kWh per 1M tokens and gCO2eq per 1M tokens for the endpoint's grid region."""
    if j_per_token <= 0:
        raise EnergyError("j_per_token must be > 0")
    kwh = j_per_token * 1e6 / JOULES_PER_KWH
    return kwh, kwh * region.grid_intensity


def estimate(endpoint: Endpoint, hw: HardwareClass, region: Region,
             tokens_per_sec: float, disclosed_utilization: float | None = None,
             disclosed_pue: float | None = None, sparsity: float = 0.0) -> EnergyEstimate:
    assumptions = resolve_assumptions(hw, region, disclosed_utilization, disclosed_pue, sparsity)
    j = joules_per_token(hw, assumptions, tokens_per_sec)
    kwh, gco2 = kwh_and_co2(j, region)
    result = EnergyEstimate(
        endpoint=endpoint.id, j_per_token=j, kwh_per_mtok=kwh, gco2_per_mtok=gco2,
        assumptions=assumptions, sharing_factor=hw.sharing_factor, throughput_used=tokens_per_sec,
    )
    result.validate()
    return result


# Vendor-spec thermal design power per hardware class, with regional-default PUE.
_HARDWARE_ROWS = [
    ("NVIDIA H100 SXM5", 700.0, 1.20),
    ("NVIDIA H200 SXM5", 700.0, 1.20),
    ("NVIDIA B200", 1000.0, 1.15),
    ("NVIDIA H800", 700.0, 1.30),
    ("Google TPU v5e", 230.0, 1.10),
    ("Google TPU v6", 350.0, 1.10),
    ("AWS Trainium2", 300.0, 1.20),
    ("Cerebras WSE-3", 23000.0, 1.20),
    ("Groq LPU", 215.0, 1.20),
    ("SambaNova SN40L", 750.0, 1.20),
]


def builtin_hardware_table() -> list[HardwareClass]:
    """The stock 10-class TDP table (watts per chip; wafer for WSE-3)."""
    return [HardwareClass(name, tdp, pue) for name, tdp, pue in _HARDWARE_ROWS]
