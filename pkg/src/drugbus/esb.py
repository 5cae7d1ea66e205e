"""The service bus: concurrent fan-out of one search to every active provider.

One search becomes up to ``fanout_cap`` simultaneous provider calls, each
bounded by its own timeout. Every call ends in exactly one of three
outcomes: a hit, a definite not-found, or a failure. A dead or slow
provider costs only its own row; the survivors' hits come back ranked and
the whole search never takes much longer than one provider timeout.

Aggregation is a deterministic fold over the outcome set, so response
arrival order can change latencies but never the result.
"""

from __future__ import annotations

import asyncio
import dataclasses
import logging
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import Callable, Iterable, Sequence

import httpx

from .geo import GeoPoint, haversine_km
from .querylog import QueryLog, QueryLogRecord, ReportEntry, consumption_report
from .registry import Registry, RegistrationStatus, ServiceRegistration, UnknownService
from .wire import (
    DrugDetail,
    DrugInfo,
    WireError,
    encode_drug_path_segment,
    parse_drug_detail,
    parse_drug_info,
)

__all__ = [
    "DEFAULT_TIMEOUT_S",
    "DEFAULT_FANOUT_CAP",
    "EsbError",
    "NoProviders",
    "ProviderUnavailable",
    "DetailNotFound",
    "UnknownService",
    "FailureKind",
    "SearchRequest",
    "ProviderFailure",
    "RankedHit",
    "AggregatedResult",
    "rank_hits",
    "ServiceBus",
]

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT_S = 2.0
DEFAULT_FANOUT_CAP = 32


class EsbError(Exception):
    """Base class for bus-level failures."""


class NoProviders(EsbError):
    """The registry holds no active providers; distinct from zero hits."""


class ProviderUnavailable(EsbError):
    """A detail relay could not get a usable answer from the provider."""


class DetailNotFound(EsbError):
    """The provider answered, but does not stock the requested drug."""


class FailureKind(str, Enum):
    TIMEOUT = "timeout"
    CONNECT = "connect"
    BAD_RESPONSE = "bad_response"


@dataclass(frozen=True)
class SearchRequest:
    """One federated search: what to find, where from, how patient to be."""

    drug_name: str
    search_point: GeoPoint | None = None
    per_provider_timeout: float = DEFAULT_TIMEOUT_S
    max_results: int | None = None

    def __post_init__(self) -> None:
        name = self.drug_name.strip()
        if not name:
            raise ValueError("drug_name must be non-empty after trimming")
        object.__setattr__(self, "drug_name", name)
        if not self.per_provider_timeout > 0:
            raise ValueError("per_provider_timeout must be positive")
        if self.max_results is not None and self.max_results < 1:
            raise ValueError("max_results must be positive when given")


@dataclass(frozen=True)
class ProviderFailure:
    service_id: str
    vendor_name: str
    kind: FailureKind
    detail: str


@dataclass(frozen=True)
class RankedHit:
    info: DrugInfo
    service_id: str
    distance_km: float | None = None


@dataclass(frozen=True)
class AggregatedResult:
    """Everything one search produced, in its final presentation order.

    Conservation: every queried provider lands in exactly one bucket, so
    providers_queried == len(hits) + truncated_hits + len(failures)
    + not_found_count. truncated_hits is nonzero only when the request's
    max_results cut ranked hits off the tail.
    """

    query: str
    hits: tuple[RankedHit, ...]
    providers_queried: int
    failures: tuple[ProviderFailure, ...]
    not_found_count: int
    truncated_hits: int = 0

    def canonical_lines(self) -> list[str]:
        """Latency-free rendering; equal searches must render byte-equal."""
        lines = [
            f"query={self.query}",
            f"providers_queried={self.providers_queried}",
            f"not_found={self.not_found_count}",
            f"truncated={self.truncated_hits}",
        ]
        for hit in self.hits:
            distance = "" if hit.distance_km is None else repr(hit.distance_km)
            lines.append(
                "hit|"
                + "|".join(
                    (
                        hit.info.drug_name,
                        hit.info.price_text,
                        hit.info.description,
                        hit.info.vendor_name,
                        hit.service_id,
                        distance,
                    )
                )
            )
        for failure in self.failures:
            lines.append(
                f"failure|{failure.service_id}|{failure.vendor_name}|{failure.kind.value}"
            )
        return lines


# Internal per-provider terminal states. Exactly one per queried provider.
@dataclass(frozen=True)
class _Hit:
    info: DrugInfo


@dataclass(frozen=True)
class _NotFound:
    pass


@dataclass(frozen=True)
class _Failed:
    kind: FailureKind
    detail: str


@dataclass(frozen=True)
class _Outcome:
    registration: ServiceRegistration
    result: _Hit | _NotFound | _Failed
    latency_s: float


def rank_hits(
    hits: Iterable[RankedHit], search_point: GeoPoint | None
) -> tuple[RankedHit, ...]:
    """Order hits by closeness, then price, vendor, service id.

    Without a search point the distance tier drops out and price leads.
    The key chain is total over distinct registrations (service_id is
    unique), so the order is deterministic however the hits arrived.
    """
    ordered = list(hits)
    if search_point is not None:
        for hit in ordered:
            if hit.distance_km is None:
                raise ValueError(
                    "ranking with a search point requires distance_km on every hit"
                )
        ordered.sort(
            key=lambda h: (
                h.distance_km,
                h.info.price,
                h.info.vendor_name,
                h.service_id,
            )
        )
    else:
        ordered.sort(key=lambda h: (h.info.price, h.info.vendor_name, h.service_id))
    return tuple(ordered)


class ServiceBus:
    """Orchestrates searches and detail relays over the registry's providers.

    transport lets tests route provider calls in-process; clock injects
    query-log timestamps. Neither changes behavior otherwise.
    """

    def __init__(
        self,
        registry: Registry,
        *,
        query_log: QueryLog | None = None,
        fanout_cap: int = DEFAULT_FANOUT_CAP,
        transport: httpx.AsyncBaseTransport | None = None,
        clock: Callable[[], datetime] | None = None,
    ):
        if fanout_cap < 1:
            raise ValueError("fanout_cap must be positive")
        self._registry = registry
        self._query_log = query_log
        self._fanout_cap = fanout_cap
        self._transport = transport
        self._clock = clock or (lambda: datetime.now(timezone.utc))

    @property
    def registry(self) -> Registry:
        return self._registry

    @property
    def query_log(self) -> QueryLog | None:
        return self._query_log

    def _client(self) -> httpx.AsyncClient:
        # Timeouts are enforced per call with wait_for, not by the client.
        return httpx.AsyncClient(transport=self._transport, timeout=None)

    async def orchestrate_search(
        self,
        request: SearchRequest,
        registrations: Sequence[ServiceRegistration] | None = None,
    ) -> AggregatedResult:
        """Fan the search out, gather outcomes, rank, log, return."""
        if registrations is None:
            registrations = self._registry.list_active()
        if not registrations:
            raise NoProviders("no active providers registered")
        encoded = encode_drug_path_segment(request.drug_name)
        semaphore = asyncio.Semaphore(self._fanout_cap)
        async with self._client() as client:
            outcomes = await asyncio.gather(
                *(
                    self._query_provider(
                        client, reg, encoded, request.per_provider_timeout, semaphore
                    )
                    for reg in registrations
                )
            )

        hits: list[RankedHit] = []
        failures: list[ProviderFailure] = []
        not_found = 0
        for outcome in outcomes:
            result = outcome.result
            if isinstance(result, _Hit):
                distance = None
                if request.search_point is not None:
                    distance = haversine_km(
                        request.search_point, outcome.registration.location
                    )
                hits.append(
                    RankedHit(
                        info=result.info,
                        service_id=outcome.registration.service_id,
                        distance_km=distance,
                    )
                )
            elif isinstance(result, _NotFound):
                not_found += 1
            else:
                failures.append(
                    ProviderFailure(
                        service_id=outcome.registration.service_id,
                        vendor_name=outcome.registration.vendor_name,
                        kind=result.kind,
                        detail=result.detail,
                    )
                )

        ranked = rank_hits(hits, request.search_point)
        truncated = 0
        if request.max_results is not None and len(ranked) > request.max_results:
            truncated = len(ranked) - request.max_results
            ranked = ranked[: request.max_results]
        result = AggregatedResult(
            query=request.drug_name,
            hits=ranked,
            providers_queried=len(registrations),
            failures=tuple(failures),
            not_found_count=not_found,
            truncated_hits=truncated,
        )
        self._append_log(request, ranked)
        return result

    def _append_log(
        self, request: SearchRequest, ranked: tuple[RankedHit, ...]
    ) -> None:
        if self._query_log is None:
            return
        record = QueryLogRecord(
            timestamp=self._clock(),
            drug_name=request.drug_name,
            search_point=request.search_point,
            hit_vendors=tuple(hit.info.vendor_name for hit in ranked),
        )
        try:
            self._query_log.append(record)
        except OSError as exc:
            # Analytics must never fail a search.
            logger.warning("query log append failed: %s", exc)

    async def _query_provider(
        self,
        client: httpx.AsyncClient,
        registration: ServiceRegistration,
        encoded_name: str,
        timeout_s: float,
        semaphore: asyncio.Semaphore,
    ) -> _Outcome:
        url = f"{registration.base_url}/getdruginfo/{encoded_name}"
        start = time.perf_counter()

        def done(result: _Hit | _NotFound | _Failed) -> _Outcome:
            return _Outcome(
                registration=registration,
                result=result,
                latency_s=time.perf_counter() - start,
            )

        try:
            async with semaphore:
                response = await asyncio.wait_for(client.get(url), timeout_s)
        except asyncio.TimeoutError:
            return done(
                _Failed(FailureKind.TIMEOUT, f"no response within {timeout_s}s")
            )
        except httpx.TimeoutException:
            return done(
                _Failed(FailureKind.TIMEOUT, f"no response within {timeout_s}s")
            )
        except httpx.ConnectError as exc:
            return done(_Failed(FailureKind.CONNECT, str(exc) or "connection failed"))
        except httpx.HTTPError as exc:
            return done(_Failed(FailureKind.BAD_RESPONSE, f"{type(exc).__name__}: {exc}"))

        if response.status_code == 404:
            return done(_NotFound())
        if response.status_code != 200:
            return done(
                _Failed(FailureKind.BAD_RESPONSE, f"HTTP {response.status_code}")
            )
        try:
            info = parse_drug_info(response.content)
        except WireError as exc:
            return done(_Failed(FailureKind.BAD_RESPONSE, str(exc)))
        # The registry, not the provider's body, owns vendor identity.
        if info.vendor_name != registration.vendor_name:
            info = dataclasses.replace(info, vendor_name=registration.vendor_name)
        return done(_Hit(info))

    async def fetch_detail(
        self,
        service_id: str,
        drug_name: str,
        *,
        timeout_s: float = DEFAULT_TIMEOUT_S,
    ) -> DrugDetail:
        """Relay a detail request to one active provider."""
        registration = self._registry.get(service_id)
        if registration is None or registration.status is not RegistrationStatus.ACTIVE:
            raise UnknownService(service_id)
        url = f"{registration.base_url}/getdrugdetail/{encode_drug_path_segment(drug_name)}"
        try:
            async with self._client() as client:
                response = await asyncio.wait_for(client.get(url), timeout_s)
        except (asyncio.TimeoutError, httpx.TimeoutException):
            raise ProviderUnavailable(
                f"{registration.vendor_name}: no response within {timeout_s}s"
            ) from None
        except httpx.HTTPError as exc:
            raise ProviderUnavailable(f"{registration.vendor_name}: {exc}") from None
        if response.status_code == 404:
            raise DetailNotFound(
                f"{registration.vendor_name} does not list {drug_name!r}"
            )
        if response.status_code != 200:
            raise ProviderUnavailable(
                f"{registration.vendor_name}: HTTP {response.status_code}"
            )
        try:
            return parse_drug_detail(response.content)
        except WireError as exc:
            raise ProviderUnavailable(
                f"{registration.vendor_name}: unusable response: {exc}"
            ) from None

    def consumption_report(
        self, bucket: str, cell_degrees: float | None = None
    ) -> list[ReportEntry]:
        """Aggregate the query log; empty report when no log is configured."""
        records = self._query_log.records() if self._query_log else []
        return consumption_report(records, bucket, cell_degrees)
