from __future__ import annotations

from pathlib import Path

import pytest

from tokenbench.registry import (Endpoint, EndpointId, ModelFamily, Provider, Region, Registry,
                                 builtin_presets, builtin_regions, save_registry)
from tokenbench.energy import builtin_hardware_table
from tokenbench.simulator import SimEndpointSpec

REPO_ROOT = Path(__file__).resolve().parents[1]
FIXTURE_DIR = REPO_ROOT / "fixtures"


def make_endpoint(provider="acme", model="model-a", sku="reference", precision="BF16",
                  decoding="standard", region="us-east", price_input=0.5, price_output=1.5,
                  hardware_class="NVIDIA H100 SXM5", **kwargs) -> Endpoint:
    return Endpoint(
        id=EndpointId(provider, model, sku, precision, decoding, region),
        price_input=price_input, price_output=price_output,
        hardware_class=hardware_class, **kwargs,
    )


def make_registry(endpoints: list[Endpoint]) -> Registry:
    reg = Registry()
    for e in endpoints:
        reg.endpoints.append(e)
        if e.id.provider not in reg.providers:
            reg.providers[e.id.provider] = Provider(e.id.provider, e.id.provider, "serverless_gpu")
        if e.id.model not in reg.models:
            reg.models[e.id.model] = ModelFamily(e.id.model, e.id.model, None, True)
    for hw in builtin_hardware_table():
        reg.hardware[hw.name] = hw
    for region in builtin_regions():
        reg.regions[region.id] = region
    for preset in builtin_presets():
        reg.presets[preset.name] = preset
    reg.validate()
    return reg


def make_spec(endpoint_id: EndpointId, *, ttft_median=0.25, ttft_log_sigma=0.0,
              tokens_per_sec=100.0, jitter_cv=0.0, error_rate=0.0,
              perturbation_epsilon=0.0, accuracy_penalty=0.0, seed=1,
              **kwargs) -> SimEndpointSpec:
    return SimEndpointSpec(
        endpoint_id=endpoint_id, ttft_median=ttft_median, ttft_log_sigma=ttft_log_sigma,
        tokens_per_sec=tokens_per_sec, jitter_cv=jitter_cv, error_rate=error_rate,
        perturbation_epsilon=perturbation_epsilon, accuracy_penalty=accuracy_penalty,
        seed=seed, **kwargs,
    )


@pytest.fixture(scope="session")
def small_registry_dir(tmp_path_factory) -> Path:
    endpoints = [
        make_endpoint(provider="acme", model="model-a", sku="reference"),
        make_endpoint(provider="acme", model="model-a", sku="turbo", precision="FP8",
                      price_input=0.25, price_output=0.8),
        make_endpoint(provider="bolt", model="model-a", sku="fast", decoding="speculative",
                      region="eu-central", price_input=0.4, price_output=1.2),
        make_endpoint(provider="bolt", model="model-b", sku="reference", price_input=1.0,
                      price_output=3.0),
    ]
    reg = make_registry(endpoints)
    path = tmp_path_factory.mktemp("registry")
    save_registry(reg, path)
    return path


@pytest.fixture(scope="session")
def fixture_registry():
    from tokenbench.registry import load_registry

    return load_registry(FIXTURE_DIR / "registry")


@pytest.fixture(scope="session")
def fixture_snapshot(fixture_registry):
    from tokenbench.store import import_snapshot

    return import_snapshot(FIXTURE_DIR / "snapshot" / "v1.0", registry=fixture_registry)
