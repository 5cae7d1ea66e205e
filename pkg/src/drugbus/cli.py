"""Operator entry point.

One binary, subcommands for every role: run the bus, run a provider,
manage the registry, seed demo fixtures, and search from the terminal.
Exit codes: 0 success, 1 user error, 2 runtime failure. Tables are
human-aligned by default and `|`-delimited under --porcelain.
"""

from __future__ import annotations

import logging
import socket
import sys
from pathlib import Path

import click
import httpx

from .catalog import CatalogError, load_catalog
from .esb import ServiceBus
from .gateway import build_app as build_gateway_app
from .geo import InvalidLocation
from .provider import BadConfig, build_app as build_provider_app, load_config
from .querylog import QueryLog
from .registry import (
    DuplicateEndpoint,
    InvalidUrl,
    Registry,
    RegistrationStatus,
    RegistryError,
    RegistryFileError,
    UnknownService,
)
from .seed import DEFAULT_BASE_PORT, seed_fixtures

DEFAULT_BUS_PORT = 8720
DEFAULT_BUS_URL = f"http://127.0.0.1:{DEFAULT_BUS_PORT}"


class RuntimeFailure(click.ClickException):
    """Environment or downstream failure, as opposed to a usage mistake."""

    exit_code = 2


def _fail_usage(message: str) -> "click.ClickException":
    # ClickException defaults to exit code 1: user error.
    return click.ClickException(message)


def _print_table(
    headers: tuple[str, ...], rows: list[tuple[str, ...]], porcelain: bool
) -> None:
    if porcelain:
        for row in rows:
            click.echo("|".join(row))
        return
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    click.echo("  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)).rstrip())
    for row in rows:
        click.echo("  ".join(c.ljust(widths[i]) for i, c in enumerate(row)).rstrip())


def _check_port_free(host: str, port: int) -> None:
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as exc:
        raise RuntimeFailure(f"cannot bind {host}:{port}: {exc}") from None
    finally:
        probe.close()


def _serve(app, host: str, port: int) -> None:
    import uvicorn

    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(asctime)s %(name)s %(message)s"
    )
    uvicorn.run(app, host=host, port=port, log_config=None, access_log=False)


def _parse_at(value: str) -> tuple[float, float]:
    parts = value.split(",")
    if len(parts) != 2:
        raise click.BadParameter("expected LAT,LON")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise click.BadParameter(f"not a number pair: {value!r}") from None


@click.group()
def cli() -> None:
    """Federated drug availability: bus, providers, registry, search."""


@cli.group()
def bus() -> None:
    """Run the service bus."""


@bus.command("serve")
@click.option("--registry", "registry_path", required=True, type=click.Path())
@click.option("--port", default=DEFAULT_BUS_PORT, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--assets", type=click.Path(), default=None, help="UI bundle directory served at /app.")
@click.option("--log", "log_path", type=click.Path(), default=None, help="Query analytics log file.")
def bus_serve(
    registry_path: str, port: int, host: str, assets: str | None, log_path: str | None
) -> None:
    """Run the gateway + ESB against a registry file."""
    try:
        registry = Registry.load(registry_path)
    except RegistryFileError as exc:
        raise RuntimeFailure(str(exc)) from None
    query_log = QueryLog(log_path) if log_path else None
    service_bus = ServiceBus(registry, query_log=query_log)
    app = build_gateway_app(
        service_bus, assets_dir=Path(assets) if assets else None
    )
    _check_port_free(host, port)
    active = len(registry.list_active())
    click.echo(f"bus ready on http://{host}:{port} ({active} active providers)")
    _serve(app, host, port)


@cli.group()
def provider() -> None:
    """Run a vendor's drug lookup service."""


@provider.command("serve")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--host", default="127.0.0.1", show_default=True)
def provider_serve(config_path: str, host: str) -> None:
    """Serve one provider from its config document."""
    try:
        config = load_config(config_path)
        catalog = load_catalog(config.catalog_path)
    except (BadConfig, CatalogError) as exc:
        raise RuntimeFailure(str(exc)) from None
    app = build_provider_app(config, catalog)
    _check_port_free(host, config.port)
    click.echo(
        f"{config.vendor_name} ready on http://{host}:{config.port} "
        f"({len(catalog.entries)} drugs)"
    )
    _serve(app, host, config.port)


@cli.group("registry")
def registry_group() -> None:
    """Manage the bus's provider registrations."""


def _open_registry(path: str, create: bool = False) -> Registry:
    try:
        return Registry.load_or_create(path) if create else Registry.load(path)
    except RegistryError as exc:
        raise _fail_usage(str(exc)) from None


@registry_group.command("add")
@click.option("--registry", "registry_path", required=True, type=click.Path())
@click.option("--vendor", required=True)
@click.option("--url", required=True)
@click.option("--lat", required=True, type=float)
@click.option("--lon", required=True, type=float)
@click.option("--porcelain", is_flag=True)
def registry_add(
    registry_path: str, vendor: str, url: str, lat: float, lon: float, porcelain: bool
) -> None:
    """Register a provider endpoint."""
    reg_store = _open_registry(registry_path, create=True)
    try:
        registration = reg_store.register(vendor, url, (lat, lon))
    except (InvalidUrl, InvalidLocation, DuplicateEndpoint, ValueError) as exc:
        raise _fail_usage(str(exc)) from None
    if porcelain:
        click.echo(registration.to_line())
    else:
        click.echo(
            f"registered {registration.service_id}: {registration.vendor_name} "
            f"at {registration.base_url}"
        )


@registry_group.command("remove")
@click.option("--registry", "registry_path", required=True, type=click.Path())
@click.option("--id", "service_id", required=True)
def registry_remove(registry_path: str, service_id: str) -> None:
    """Drop a registration."""
    reg_store = _open_registry(registry_path)
    try:
        removed = reg_store.remove(service_id)
    except UnknownService as exc:
        raise _fail_usage(str(exc)) from None
    click.echo(f"removed {removed.service_id}: {removed.vendor_name}")


@registry_group.command("list")
@click.option("--registry", "registry_path", required=True, type=click.Path())
@click.option("--porcelain", is_flag=True)
def registry_list(registry_path: str, porcelain: bool) -> None:
    """Print all registrations in registration order."""
    reg_store = _open_registry(registry_path)
    rows = [
        (
            reg.service_id,
            reg.vendor_name,
            reg.base_url,
            repr(reg.location.latitude),
            repr(reg.location.longitude),
            reg.status.value,
            reg.to_line().rsplit("|", 1)[-1],
        )
        for reg in reg_store.list_all()
    ]
    _print_table(
        ("ID", "VENDOR", "URL", "LAT", "LON", "STATUS", "REGISTERED"), rows, porcelain
    )


def _set_status_command(
    registry_path: str, service_id: str, status: RegistrationStatus
) -> None:
    reg_store = _open_registry(registry_path)
    try:
        updated = reg_store.set_status(service_id, status)
    except UnknownService as exc:
        raise _fail_usage(str(exc)) from None
    click.echo(f"{updated.service_id} {updated.status.value}")


@registry_group.command("suspend")
@click.option("--registry", "registry_path", required=True, type=click.Path())
@click.option("--id", "service_id", required=True)
def registry_suspend(registry_path: str, service_id: str) -> None:
    """Exclude a registration from searches without dropping it."""
    _set_status_command(registry_path, service_id, RegistrationStatus.SUSPENDED)


@registry_group.command("resume")
@click.option("--registry", "registry_path", required=True, type=click.Path())
@click.option("--id", "service_id", required=True)
def registry_resume(registry_path: str, service_id: str) -> None:
    """Bring a suspended registration back into searches."""
    _set_status_command(registry_path, service_id, RegistrationStatus.ACTIVE)


@cli.command()
@click.option("--drug", required=True)
@click.option("--at", "at_text", default=None, help="Search point as LAT,LON.")
@click.option("--bus", "bus_url", default=DEFAULT_BUS_URL, show_default=True)
@click.option("--timeout-ms", type=int, default=None)
@click.option("--porcelain", is_flag=True)
def search(
    drug: str,
    at_text: str | None,
    bus_url: str,
    timeout_ms: int | None,
    porcelain: bool,
) -> None:
    """Query the bus and print the ranked hits."""
    params: dict[str, str] = {"drug": drug}
    if at_text is not None:
        lat, lon = _parse_at(at_text)
        params["lat"] = repr(lat)
        params["lon"] = repr(lon)
    if timeout_ms is not None:
        params["timeout_ms"] = str(timeout_ms)
    client_timeout = 10.0 + (timeout_ms or 0) / 1000.0
    try:
        response = httpx.get(
            f"{bus_url.rstrip('/')}/api/search",
            params=params,
            headers={"Accept": "application/json"},
            timeout=client_timeout,
        )
    except httpx.HTTPError as exc:
        raise RuntimeFailure(f"bus unreachable at {bus_url}: {exc}") from None
    if response.status_code >= 500:
        raise RuntimeFailure(_api_error(response))
    if response.status_code >= 400:
        raise _fail_usage(_api_error(response))

    document = response.json()
    rows = [
        (
            hit["VendorName"],
            hit["Price"],
            hit.get("DistanceKm", ""),
            hit["name"],
            hit["ServiceId"],
        )
        for hit in document["Drug"]
    ]
    _print_table(
        ("VENDOR", "PRICE", "DISTANCE_KM", "DRUG", "SERVICE_ID"), rows, porcelain
    )
    diagnostics = document["Diagnostics"]
    summary = (
        f"{len(rows)} hits, {diagnostics['ProvidersQueried']} providers queried, "
        f"{len(diagnostics['Failures'])} failures, "
        f"{diagnostics['NotFoundCount']} not found"
    )
    click.echo(summary, err=porcelain)


def _api_error(response: httpx.Response) -> str:
    try:
        document = response.json()
        return f"{document['Code']}: {document['Message']}"
    except (ValueError, KeyError):
        return f"HTTP {response.status_code}"


@cli.command()
@click.option("--providers", default=3, show_default=True, type=int)
@click.option("--drugs", default=12, show_default=True, type=int)
@click.option("--out", "out_dir", default="demo", show_default=True, type=click.Path())
@click.option("--rng-seed", default=1, show_default=True, type=int)
@click.option("--base-port", default=DEFAULT_BASE_PORT, show_default=True, type=int)
@click.option("--porcelain", is_flag=True)
def seed(
    providers: int,
    drugs: int,
    out_dir: str,
    rng_seed: int,
    base_port: int,
    porcelain: bool,
) -> None:
    """Write demo provider configs, catalogs, and a registry."""
    try:
        manifest = seed_fixtures(
            out_dir,
            providers=providers,
            drugs=drugs,
            rng_seed=rng_seed,
            base_port=base_port,
        )
    except ValueError as exc:
        raise _fail_usage(str(exc)) from None
    except OSError as exc:
        raise RuntimeFailure(f"cannot write fixtures: {exc}") from None
    rows = [
        (
            f"provider-{p.index}",
            p.vendor_name,
            str(p.port),
            str(p.config_path),
        )
        for p in manifest.providers
    ]
    _print_table(("PROVIDER", "VENDOR", "PORT", "CONFIG"), rows, porcelain)
    click.echo(f"registry: {manifest.registry_path}", err=porcelain)


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return 1
    except RuntimeFailure as exc:
        exc.show()
        return 2
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    return 0
