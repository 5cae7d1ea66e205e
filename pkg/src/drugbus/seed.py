"""Deterministic demo fixtures: provider configs, catalogs, and a registry.

Same seed, same bytes. The first provider is always Zoch Pharmacy in Accra
with the Blopen Gel record as its first catalog row, so a freshly seeded
federation has one guaranteed findable drug. The second provider (when
present) answers in the legacy alphabetical wire variant, giving the bus
adapters something real to normalize.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from decimal import Decimal
from importlib import resources
from pathlib import Path

from .catalog import CatalogEntry, write_catalog
from .geo import GeoPoint
from .registry import Registry, ServiceRegistration

__all__ = ["SeededProvider", "SeedManifest", "load_name_pool", "seed_fixtures"]

DEFAULT_BASE_PORT = 8732

ANCHOR_VENDOR = "Zoch Pharmacy"
ANCHOR_LOCATION = GeoPoint(5.6037, -0.1870)
ANCHOR_ENTRY = CatalogEntry(
    name="Blopen Gel",
    description="Deep penetrating gel for aching joints and muscles",
    selling_price=Decimal("5.0000"),
    quantity=12,
    substitutes=("Deep Heat Gel",),
)

_VENDOR_POOL = (
    "Adom Pharmacy",
    "Mensah Chemists",
    "Osei Drug Store",
    "Akoto Pharmacy",
    "Boateng Meds",
    "Owusu Pharmacy",
    "Asante Chemists",
    "Appiah Drug Mart",
    "Danquah Pharmacy",
    "Ofori Remedies",
    "Annan Pharmacy",
    "Tetteh Chemists",
    "Quartey Pharmacy",
    "Amoah Drug Store",
    "Baah Pharmacy",
    "Darko Chemists",
    "Gyasi Pharmacy",
    "Nkrumah Meds",
    "Sarpong Pharmacy",
    "Yeboah Chemists",
)

_STREETS = (
    "Ring Road",
    "High Street",
    "Market Lane",
    "Harbour Road",
    "Station Road",
    "Castle Avenue",
    "Independence Avenue",
    "Liberation Road",
)

_CITIES = (
    "Accra",
    "Kumasi",
    "Tamale",
    "Takoradi",
    "Cape Coast",
    "Tema",
    "Ho",
    "Sunyani",
    "Koforidua",
    "Obuasi",
)

_FORMS = (
    "Tablets",
    "Capsules",
    "Syrup",
    "Ointment",
    "Suspension",
    "Drops",
    "Lozenges",
    "Cream",
    "Spray",
    "Balm",
)

_USES = (
    "joint and muscle pain",
    "seasonal allergies",
    "mild fever and headache",
    "chest congestion",
    "stomach upset",
    "skin irritation",
    "sore throat",
    "blocked sinuses",
    "minor cuts and burns",
    "restful sleep",
)


@dataclass(frozen=True)
class SeededProvider:
    index: int
    vendor_name: str
    port: int
    config_path: Path
    catalog_path: Path
    registration: ServiceRegistration


@dataclass(frozen=True)
class SeedManifest:
    out_dir: Path
    registry_path: Path
    providers: tuple[SeededProvider, ...]


def load_name_pool() -> tuple[str, ...]:
    text = (
        resources.files("drugbus.data").joinpath("drug_names.txt").read_text("utf-8")
    )
    return tuple(line.strip() for line in text.splitlines() if line.strip())


def _vendor_name(rng: random.Random, index: int, taken: set[str]) -> str:
    pool = list(_VENDOR_POOL)
    rng.shuffle(pool)
    for name in pool:
        if name not in taken:
            return name
    return f"{pool[0]} {index}"


def _address(rng: random.Random) -> str:
    return f"{rng.randrange(1, 200)} {rng.choice(_STREETS)}, {rng.choice(_CITIES)}"


def _price(rng: random.Random) -> Decimal:
    return Decimal(rng.randrange(100, 25000)) / 100


def _description(rng: random.Random) -> str:
    return f"{rng.choice(_FORMS)} for {rng.choice(_USES)}"


def _substitutes(
    rng: random.Random, name: str, candidates: list[str]
) -> tuple[str, ...]:
    others = [c for c in candidates if c.casefold() != name.casefold()]
    count = rng.choice((0, 0, 1, 1, 2))
    count = min(count, len(others))
    return tuple(rng.sample(others, count)) if count else ()


def _catalog_entries(
    rng: random.Random, pool: tuple[str, ...], drugs: int, anchored: bool
) -> list[CatalogEntry]:
    entries: list[CatalogEntry] = []
    names: list[str] = []
    if anchored:
        entries.append(ANCHOR_ENTRY)
        names.append(ANCHOR_ENTRY.name)
        if drugs >= 2:
            # The anchor's advertised substitute should be findable here too.
            names.append("Deep Heat Gel")
    reserved = {n.casefold() for n in names}
    free = [n for n in pool if n.casefold() not in reserved]
    remaining = drugs - len(names)
    if remaining > 0:
        if remaining > len(free):
            raise ValueError(
                f"cannot seed {drugs} drugs from a pool of {len(pool)} names"
            )
        names.extend(rng.sample(free, remaining))
    for name in names[len(entries) :]:
        entries.append(
            CatalogEntry(
                name=name,
                description=_description(rng),
                selling_price=_price(rng),
                quantity=rng.randrange(0, 40),
                substitutes=_substitutes(rng, name, names),
            )
        )
    return entries


def seed_fixtures(
    out_dir: Path | str,
    *,
    providers: int,
    drugs: int,
    rng_seed: int,
    base_port: int = DEFAULT_BASE_PORT,
) -> SeedManifest:
    """Write N provider directories plus a registry file under out_dir."""
    if providers < 1:
        raise ValueError("providers must be positive")
    if drugs < 1:
        raise ValueError("drugs must be positive")
    if rng_seed < 1:
        raise ValueError("rng_seed must be positive")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(rng_seed)
    pool = load_name_pool()
    registry = Registry(out_dir / "registry.txt")
    base_time = datetime(2024, 1, 1, tzinfo=timezone.utc)

    seeded: list[SeededProvider] = []
    taken_vendors: set[str] = set()
    for index in range(1, providers + 1):
        if index == 1:
            vendor = ANCHOR_VENDOR
            location = ANCHOR_LOCATION
        else:
            vendor = _vendor_name(rng, index, taken_vendors)
            location = GeoPoint(
                round(rng.uniform(4.8, 10.9), 4), round(rng.uniform(-3.2, 1.1), 4)
            )
        taken_vendors.add(vendor)
        port = base_port + index - 1
        provider_dir = out_dir / f"provider-{index}"
        provider_dir.mkdir(parents=True, exist_ok=True)
        catalog_path = provider_dir / "catalog.txt"
        config_path = provider_dir / "config.json"

        write_catalog(
            catalog_path, _catalog_entries(rng, pool, drugs, anchored=index == 1)
        )
        variant = "legacy_alphabetical" if index == 2 else "canonical"
        config = {
            "vendor_name": vendor,
            "vendor_address": _address(rng),
            "port": port,
            "catalog": "catalog.txt",
            "response_variant": variant,
        }
        config_path.write_text(
            json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        registration = registry.register(
            vendor,
            f"http://127.0.0.1:{port}",
            location,
            service_id="".join(rng.choice("0123456789abcdef") for _ in range(12)),
            registered_at=base_time + timedelta(seconds=index - 1),
        )
        seeded.append(
            SeededProvider(
                index=index,
                vendor_name=vendor,
                port=port,
                config_path=config_path,
                catalog_path=catalog_path,
                registration=registration,
            )
        )

    return SeedManifest(
        out_dir=out_dir,
        registry_path=registry.path,
        providers=tuple(seeded),
    )
