"""In-process federation plumbing shared by the tests.

Providers run as ASGI apps behind a routing transport, so the bus exercises
its real HTTP stack (URLs, timeouts, cancellation) without sockets. Fault
injection is per port: down means connect refusal, hanging means no answer
within any timeout a test would use, delay shifts arrival order.
"""

from __future__ import annotations

import asyncio
import socket
import time
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from decimal import Decimal
from pathlib import Path

import httpx

from drugbus.catalog import Catalog, CatalogEntry
from drugbus.esb import ServiceBus
from drugbus.geo import GeoPoint
from drugbus.provider import ProviderConfig, build_app
from drugbus.querylog import QueryLog
from drugbus.registry import Registry, ServiceRegistration


class FederationTransport(httpx.AsyncBaseTransport):
    def __init__(self):
        self._apps: dict[str, httpx.AsyncBaseTransport] = {}
        self._down: set[str] = set()
        self._hanging: set[str] = set()
        self._delays: dict[str, float] = {}

    @staticmethod
    def _key(port: int, host: str) -> str:
        return f"{host}:{port}"

    def add_app(self, port: int, app, host: str = "127.0.0.1") -> None:
        self._apps[self._key(port, host)] = httpx.ASGITransport(app=app)

    def mark_down(self, port: int, host: str = "127.0.0.1") -> None:
        self._down.add(self._key(port, host))

    def mark_hanging(self, port: int, host: str = "127.0.0.1") -> None:
        self._hanging.add(self._key(port, host))

    def set_delay(self, port: int, seconds: float, host: str = "127.0.0.1") -> None:
        self._delays[self._key(port, host)] = seconds

    def clear_faults(self) -> None:
        self._down.clear()
        self._hanging.clear()
        self._delays.clear()

    async def handle_async_request(self, request: httpx.Request) -> httpx.Response:
        key = f"{request.url.host}:{request.url.port}"
        if key in self._down:
            raise httpx.ConnectError("connection refused", request=request)
        if key in self._hanging:
            await asyncio.sleep(3600)
        delay = self._delays.get(key)
        if delay:
            await asyncio.sleep(delay)
        transport = self._apps.get(key)
        if transport is None:
            raise httpx.ConnectError(f"no route to {key}", request=request)
        return await transport.handle_async_request(request)


def make_entry(
    name: str,
    price: str = "5.0000",
    description: str | None = None,
    quantity: int = 10,
    substitutes: tuple[str, ...] = (),
) -> CatalogEntry:
    return CatalogEntry(
        name=name,
        description=f"{name} preparation" if description is None else description,
        selling_price=Decimal(price),
        quantity=quantity,
        substitutes=tuple(substitutes),
    )


def provider_app(
    vendor: str,
    entries,
    *,
    variant: str = "canonical",
    address: str = "1 Market Lane, Accra",
):
    config = ProviderConfig(
        vendor_name=vendor,
        vendor_address=address,
        port=8000,
        catalog_path=Path("unused"),
        response_variant=variant,
    )
    return build_app(config, Catalog(tuple(entries)))


@dataclass
class ProviderSetup:
    vendor: str
    entries: tuple[CatalogEntry, ...]
    location: GeoPoint = field(default_factory=lambda: GeoPoint(5.6, -0.2))
    variant: str = "canonical"
    address: str = "1 Market Lane, Accra"


@dataclass
class Federation:
    bus: ServiceBus
    transport: FederationTransport
    registrations: tuple[ServiceRegistration, ...]
    ports: tuple[int, ...]


def build_federation(
    tmp_path: Path,
    setups: list[ProviderSetup],
    *,
    query_log: QueryLog | None = None,
    fanout_cap: int = 32,
    base_port: int = 9001,
) -> Federation:
    transport = FederationTransport()
    registry = Registry(tmp_path / "registry.txt")
    base_time = datetime(2024, 1, 1, tzinfo=timezone.utc)
    registrations = []
    ports = []
    for i, setup in enumerate(setups, start=1):
        port = base_port + i - 1
        transport.add_app(
            port,
            provider_app(
                setup.vendor,
                setup.entries,
                variant=setup.variant,
                address=setup.address,
            ),
        )
        registrations.append(
            registry.register(
                setup.vendor,
                f"http://127.0.0.1:{port}",
                setup.location,
                service_id=f"svc{i:04d}",
                registered_at=base_time + timedelta(seconds=i),
            )
        )
        ports.append(port)
    bus = ServiceBus(
        registry, query_log=query_log, transport=transport, fanout_cap=fanout_cap
    )
    return Federation(
        bus=bus,
        transport=transport,
        registrations=tuple(registrations),
        ports=tuple(ports),
    )


def free_port() -> int:
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind(("127.0.0.1", 0))
        return probe.getsockname()[1]
    finally:
        probe.close()


def wait_for_http(url: str, timeout_s: float = 10.0) -> None:
    """Poll until the URL answers at all, for freshly spawned servers."""
    deadline = time.monotonic() + timeout_s
    last_error: Exception | None = None
    while time.monotonic() < deadline:
        try:
            httpx.get(url, timeout=1.0)
            return
        except httpx.HTTPError as exc:
            last_error = exc
            time.sleep(0.05)
    raise TimeoutError(f"{url} did not come up within {timeout_s}s: {last_error}")
