"""The bus's collection of approved provider services.

Registrations are persisted in a single human-readable ``|``-delimited file,
loaded at bus start and rewritten atomically on every mutation:

    service_id|vendor_name|base_url|lat|lon|status|registered_at

Timestamps are RFC 3339 UTC. Health probing is advisory only: it reports
reachability for diagnostics and never mutates a registration's status.
"""

from __future__ import annotations

import os
import tempfile
import threading
import uuid
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from urllib.parse import urlsplit

import httpx

from .geo import GeoPoint, InvalidLocation

__all__ = [
    "InvalidLocation",
    "InvalidUrl",
    "DuplicateEndpoint",
    "UnknownService",
    "RegistryError",
    "RegistryFileError",
    "RegistrationStatus",
    "ServiceRegistration",
    "ProbeResult",
    "Registry",
    "REGISTRY_HEADER",
]

REGISTRY_HEADER = "service_id|vendor_name|base_url|lat|lon|status|registered_at"

_FORBIDDEN = ("|", ";", "\n", "\r")


class RegistryError(Exception):
    """Base class for registry failures."""


class InvalidUrl(RegistryError):
    pass


class DuplicateEndpoint(RegistryError):
    pass


class UnknownService(RegistryError):
    def __init__(self, service_id: str):
        super().__init__(f"no service registered with id {service_id!r}")
        self.service_id = service_id


class RegistryFileError(RegistryError):
    def __init__(self, path: os.PathLike | str, line_number: int, reason: str):
        super().__init__(f"{path}, line {line_number}: {reason}")
        self.line_number = line_number


class RegistrationStatus(str, Enum):
    ACTIVE = "active"
    SUSPENDED = "suspended"


def _utc_now() -> datetime:
    return datetime.now(timezone.utc)


def format_timestamp(value: datetime) -> str:
    """RFC 3339 UTC, with a Z suffix."""
    if value.tzinfo is None:
        raise ValueError("timestamps must be timezone-aware")
    value = value.astimezone(timezone.utc)
    return value.isoformat().replace("+00:00", "Z")


def parse_timestamp(text: str) -> datetime:
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    value = datetime.fromisoformat(text)
    if value.tzinfo is None:
        raise ValueError(f"timestamp {text!r} lacks a UTC offset")
    return value.astimezone(timezone.utc)


def normalize_base_url(url: str) -> str:
    """Validate and normalize a provider root URL.

    Must be absolute http(s) with a host; scheme and host are lowercased and
    a single trailing slash is dropped, so equality means "same endpoint".
    """
    url = url.strip()
    for ch in _FORBIDDEN + (" ",):
        if ch in url:
            raise InvalidUrl(f"URL must not contain {ch!r}: {url!r}")
    parts = urlsplit(url)
    if parts.scheme not in ("http", "https"):
        raise InvalidUrl(f"URL must be absolute http(s): {url!r}")
    if not parts.hostname:
        raise InvalidUrl(f"URL has no host: {url!r}")
    if parts.query or parts.fragment:
        raise InvalidUrl(f"URL must not carry a query or fragment: {url!r}")
    netloc = parts.netloc.lower()
    path = parts.path.rstrip("/")
    return f"{parts.scheme.lower()}://{netloc}{path}"


def _vendor_field(value: str) -> str:
    value = value.strip()
    if not value:
        raise ValueError("vendor_name must be non-empty")
    for ch in _FORBIDDEN:
        if ch in value:
            raise ValueError(f"vendor_name must not contain {ch!r}")
    return value


@dataclass(frozen=True)
class ServiceRegistration:
    """An approved provider endpoint known to the bus."""

    service_id: str
    vendor_name: str
    base_url: str
    location: GeoPoint
    status: RegistrationStatus
    registered_at: datetime

    @property
    def sort_key(self) -> tuple[datetime, str]:
        return (self.registered_at, self.service_id)

    def to_line(self) -> str:
        return "|".join(
            (
                self.service_id,
                self.vendor_name,
                self.base_url,
                repr(self.location.latitude),
                repr(self.location.longitude),
                self.status.value,
                format_timestamp(self.registered_at),
            )
        )


@dataclass(frozen=True)
class ProbeResult:
    reachable: bool
    reason: str | None = None

    def __str__(self) -> str:
        return "reachable" if self.reachable else f"unreachable({self.reason})"


def _parse_line(path: Path, line_number: int, line: str) -> ServiceRegistration:
    parts = line.split("|")
    if len(parts) != 7:
        raise RegistryFileError(
            path, line_number, f"expected 7 |-separated fields, got {len(parts)}"
        )
    service_id, vendor, url, lat_text, lon_text, status_text, ts_text = parts
    if not service_id.strip():
        raise RegistryFileError(path, line_number, "empty service_id")
    try:
        vendor = _vendor_field(vendor)
        url = normalize_base_url(url)
        location = GeoPoint(float(lat_text), float(lon_text))
        status = RegistrationStatus(status_text)
        registered_at = parse_timestamp(ts_text)
    except (ValueError, InvalidUrl, InvalidLocation) as exc:
        raise RegistryFileError(path, line_number, str(exc)) from None
    return ServiceRegistration(
        service_id=service_id.strip(),
        vendor_name=vendor,
        base_url=url,
        location=location,
        status=status,
        registered_at=registered_at,
    )


class Registry:
    """Persistent set of provider registrations.

    Reads may run concurrently; mutations are serialized under a lock and
    rewrite the backing file atomically, so readers observe either the
    before or the after state, never a torn one.
    """

    def __init__(self, path: os.PathLike | str):
        self._path = Path(path)
        self._lock = threading.RLock()
        self._by_id: dict[str, ServiceRegistration] = {}

    @property
    def path(self) -> Path:
        return self._path

    @classmethod
    def load(cls, path: os.PathLike | str) -> "Registry":
        registry = cls(path)
        try:
            text = registry._path.read_text(encoding="utf-8")
        except OSError as exc:
            raise RegistryFileError(
                path, 0, f"cannot read registry: {exc.strerror or exc}"
            ) from None
        lines = text.splitlines()
        if not lines or lines[0] != REGISTRY_HEADER:
            raise RegistryFileError(
                path, 1, f"header must be exactly {REGISTRY_HEADER!r}"
            )
        seen_urls: dict[str, str] = {}
        for line_number, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            reg = _parse_line(registry._path, line_number, line)
            if reg.service_id in registry._by_id:
                raise RegistryFileError(
                    path, line_number, f"duplicate service_id {reg.service_id!r}"
                )
            if reg.base_url in seen_urls:
                raise RegistryFileError(
                    path, line_number, f"duplicate base_url {reg.base_url!r}"
                )
            seen_urls[reg.base_url] = reg.service_id
            registry._by_id[reg.service_id] = reg
        return registry

    @classmethod
    def load_or_create(cls, path: os.PathLike | str) -> "Registry":
        if Path(path).exists():
            return cls.load(path)
        registry = cls(path)
        registry.save()
        return registry

    def save(self) -> None:
        with self._lock:
            rows = [REGISTRY_HEADER]
            rows.extend(
                reg.to_line()
                for reg in sorted(self._by_id.values(), key=lambda r: r.sort_key)
            )
            payload = "\n".join(rows) + "\n"
            self._path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp_name = tempfile.mkstemp(
                dir=self._path.parent, prefix=self._path.name, suffix=".tmp"
            )
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as handle:
                    handle.write(payload)
                os.replace(tmp_name, self._path)
            except BaseException:
                try:
                    os.unlink(tmp_name)
                except OSError:
                    pass
                raise

    def register(
        self,
        vendor_name: str,
        base_url: str,
        location: GeoPoint | tuple[float, float],
        *,
        service_id: str | None = None,
        registered_at: datetime | None = None,
    ) -> ServiceRegistration:
        """Add an approved provider. Persisted before return."""
        vendor_name = _vendor_field(vendor_name)
        base_url = normalize_base_url(base_url)
        if not isinstance(location, GeoPoint):
            location = GeoPoint(*location)
        with self._lock:
            for existing in self._by_id.values():
                if existing.base_url == base_url:
                    raise DuplicateEndpoint(
                        f"{base_url} is already registered as {existing.service_id}"
                    )
            if service_id is None:
                service_id = uuid.uuid4().hex
            if service_id in self._by_id:
                raise DuplicateEndpoint(f"service_id {service_id!r} already in use")
            reg = ServiceRegistration(
                service_id=service_id,
                vendor_name=vendor_name,
                base_url=base_url,
                location=location,
                status=RegistrationStatus.ACTIVE,
                registered_at=registered_at or _utc_now(),
            )
            self._by_id[service_id] = reg
            self.save()
            return reg

    def remove(self, service_id: str) -> ServiceRegistration:
        with self._lock:
            try:
                reg = self._by_id.pop(service_id)
            except KeyError:
                raise UnknownService(service_id) from None
            self.save()
            return reg

    def set_status(
        self, service_id: str, status: RegistrationStatus
    ) -> ServiceRegistration:
        with self._lock:
            try:
                reg = self._by_id[service_id]
            except KeyError:
                raise UnknownService(service_id) from None
            updated = replace(reg, status=RegistrationStatus(status))
            self._by_id[service_id] = updated
            self.save()
            return updated

    def get(self, service_id: str) -> ServiceRegistration | None:
        with self._lock:
            return self._by_id.get(service_id)

    def list_all(self) -> list[ServiceRegistration]:
        with self._lock:
            return sorted(self._by_id.values(), key=lambda r: r.sort_key)

    def list_active(self) -> list[ServiceRegistration]:
        """Active registrations in deterministic order: registered_at, then id."""
        return [
            reg
            for reg in self.list_all()
            if reg.status is RegistrationStatus.ACTIVE
        ]

    def probe(
        self,
        service_id: str,
        *,
        timeout: float = 1.0,
        client: httpx.Client | None = None,
    ) -> ProbeResult:
        """GET the provider's /health with a short timeout. Never mutates status."""
        reg = self.get(service_id)
        if reg is None:
            raise UnknownService(service_id)
        owned = client is None
        if client is None:
            client = httpx.Client(timeout=timeout)
        try:
            response = client.get(f"{reg.base_url}/health")
        except httpx.TimeoutException:
            return ProbeResult(False, "timeout")
        except httpx.ConnectError as exc:
            return ProbeResult(False, f"connection refused: {exc}")
        except httpx.HTTPError as exc:
            return ProbeResult(False, f"{type(exc).__name__}: {exc}")
        finally:
            if owned:
                client.close()
        if response.status_code == 200:
            return ProbeResult(True)
        return ProbeResult(False, f"HTTP {response.status_code}")
