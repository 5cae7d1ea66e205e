"""Consumer-facing HTTP API over the bus, plus static hosting for the UI.

Endpoints:

    GET /api/search?drug=NAME[&lat=..&lon=..][&timeout_ms=..]
    GET /api/detail?service_id=ID&drug=NAME
    GET /api/report?bucket=drug|region[&cell=DEGREES]
    GET /app[/...]        static UI bundle, entry-document fallback

Responses default to XML and switch to a field-for-field JSON rendering
when the Accept header strictly prefers application/json. JSON field names
equal the XML element names. Every 4xx/5xx body carries a machine-readable
Code plus a human Message.

The gateway is a projection layer: it never reorders, drops, or re-prices
hits. Hit order and Price strings pass through byte-identical.
"""

from __future__ import annotations

import logging
import xml.etree.ElementTree as ET
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import FileResponse, JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

from .esb import (
    AggregatedResult,
    DetailNotFound,
    NoProviders,
    ProviderUnavailable,
    SearchRequest,
    ServiceBus,
)
from .geo import GeoPoint, InvalidLocation
from .querylog import BadBucket, ReportEntry
from .registry import UnknownService
from .wire import DrugDetail, serialize_drug_detail

__all__ = ["build_app", "prefers_json"]

logger = logging.getLogger(__name__)


def prefers_json(accept: str | None) -> bool:
    """True when the Accept header rates application/json strictly above
    application/xml. Ties, wildcards alone, and absence all mean XML."""
    if not accept:
        return False

    qualities: dict[str, float] = {}
    for item in accept.split(","):
        parts = item.split(";")
        media_type = parts[0].strip().lower()
        if not media_type:
            continue
        q = 1.0
        for param in parts[1:]:
            name, _, value = param.partition("=")
            if name.strip().lower() == "q":
                try:
                    q = float(value.strip())
                except ValueError:
                    q = 0.0
        qualities[media_type] = max(q, qualities.get(media_type, 0.0))

    def score(exact: str, family: str) -> float:
        for candidate in (exact, family, "*/*"):
            if candidate in qualities:
                return qualities[candidate]
        return 0.0

    return score("application/json", "application/*") > score(
        "application/xml", "application/*"
    )


def _xml_bytes(root: ET.Element) -> bytes:
    return ET.tostring(root, encoding="utf-8", xml_declaration=False)


def _error_response(status: int, code: str, message: str, as_json: bool) -> Response:
    if as_json:
        return JSONResponse({"Code": code, "Message": message}, status_code=status)
    root = ET.Element("Error")
    ET.SubElement(root, "Code").text = code
    ET.SubElement(root, "Message").text = message
    return Response(
        content=_xml_bytes(root), media_type="application/xml", status_code=status
    )


def _search_xml(result: AggregatedResult) -> bytes:
    root = ET.Element("SearchResults")
    ET.SubElement(root, "Query").text = result.query
    for hit in result.hits:
        drug = ET.SubElement(root, "Drug")
        ET.SubElement(drug, "name").text = hit.info.drug_name
        ET.SubElement(drug, "Price").text = hit.info.price_text
        ET.SubElement(drug, "Description").text = hit.info.description
        ET.SubElement(drug, "VendorName").text = hit.info.vendor_name
        ET.SubElement(drug, "ServiceId").text = hit.service_id
        if hit.distance_km is not None:
            ET.SubElement(drug, "DistanceKm").text = f"{hit.distance_km:.3f}"
    diagnostics = ET.SubElement(root, "Diagnostics")
    ET.SubElement(diagnostics, "ProvidersQueried").text = str(result.providers_queried)
    failures = ET.SubElement(diagnostics, "Failures")
    for failure in result.failures:
        element = ET.SubElement(failures, "Failure")
        ET.SubElement(element, "Vendor").text = failure.vendor_name
        ET.SubElement(element, "Kind").text = failure.kind.value
    ET.SubElement(diagnostics, "NotFoundCount").text = str(result.not_found_count)
    return _xml_bytes(root)


def _search_json(result: AggregatedResult) -> dict:
    drugs = []
    for hit in result.hits:
        entry = {
            "name": hit.info.drug_name,
            "Price": hit.info.price_text,
            "Description": hit.info.description,
            "VendorName": hit.info.vendor_name,
            "ServiceId": hit.service_id,
        }
        if hit.distance_km is not None:
            entry["DistanceKm"] = f"{hit.distance_km:.3f}"
        drugs.append(entry)
    return {
        "Query": result.query,
        "Drug": drugs,
        "Diagnostics": {
            "ProvidersQueried": result.providers_queried,
            "Failures": [
                {"Vendor": f.vendor_name, "Kind": f.kind.value}
                for f in result.failures
            ],
            "NotFoundCount": result.not_found_count,
        },
    }


def _detail_json(detail: DrugDetail) -> dict:
    return {
        "name": detail.drug_name,
        "Quantity": detail.quantity,
        "VendorAddress": detail.vendor_address,
        "Substitutes": list(detail.substitutes),
    }


def _report_xml(entries: list[ReportEntry]) -> bytes:
    root = ET.Element("Report")
    for entry in entries:
        element = ET.SubElement(root, "Entry")
        ET.SubElement(element, "Key").text = entry.key
        ET.SubElement(element, "Count").text = str(entry.count)
    return _xml_bytes(root)


def _resolve_asset(root: Path, relative: str) -> Path | None:
    """Map a requested path to a file under root, or the entry document for
    client-side routes. Anything escaping root is rejected."""
    try:
        candidate = (root / relative).resolve() if relative else root / "index.html"
        root = root.resolve()
        if candidate != root and not candidate.is_relative_to(root):
            return None
        if candidate.is_file():
            return candidate
    except OSError:
        return None
    index = root / "index.html"
    return index if index.is_file() else None


def build_app(bus: ServiceBus, *, assets_dir: Path | None = None) -> FastAPI:
    app = FastAPI(docs_url=None, redoc_url=None, openapi_url=None)

    @app.exception_handler(StarletteHTTPException)
    async def http_error(request: Request, exc: StarletteHTTPException) -> Response:
        codes = {404: "NotFound", 405: "MethodNotAllowed"}
        code = codes.get(exc.status_code, f"HTTP{exc.status_code}")
        return _error_response(
            exc.status_code, code, str(exc.detail), prefers_json(request.headers.get("accept"))
        )

    @app.get("/api/search")
    async def search(request: Request) -> Response:
        as_json = prefers_json(request.headers.get("accept"))
        params = request.query_params

        drug = params.get("drug")
        if drug is None or not drug.strip():
            return _error_response(
                400, "MissingDrug", "query parameter 'drug' is required", as_json
            )
        lat_text, lon_text = params.get("lat"), params.get("lon")
        if (lat_text is None) != (lon_text is None):
            return _error_response(
                400,
                "HalfLocation",
                "lat and lon must be given together or not at all",
                as_json,
            )
        point = None
        if lat_text is not None:
            try:
                point = GeoPoint(float(lat_text), float(lon_text))
            except (ValueError, InvalidLocation) as exc:
                return _error_response(400, "BadLocation", str(exc), as_json)
        timeout_s = None
        timeout_text = params.get("timeout_ms")
        if timeout_text is not None:
            try:
                timeout_s = int(timeout_text) / 1000.0
            except ValueError:
                return _error_response(
                    400, "BadTimeout", f"timeout_ms must be an integer: {timeout_text!r}", as_json
                )

        try:
            search_request = (
                SearchRequest(drug_name=drug, search_point=point)
                if timeout_s is None
                else SearchRequest(
                    drug_name=drug, search_point=point, per_provider_timeout=timeout_s
                )
            )
        except ValueError as exc:
            return _error_response(400, "BadRequest", str(exc), as_json)

        try:
            result = await bus.orchestrate_search(search_request)
        except NoProviders as exc:
            return _error_response(503, "NoProviders", str(exc), as_json)
        logger.info(
            "search %r hits=%d failures=%d not_found=%d",
            result.query,
            len(result.hits),
            len(result.failures),
            result.not_found_count,
        )
        if as_json:
            return JSONResponse(_search_json(result))
        return Response(content=_search_xml(result), media_type="application/xml")

    @app.get("/api/detail")
    async def detail(request: Request) -> Response:
        as_json = prefers_json(request.headers.get("accept"))
        params = request.query_params
        service_id = params.get("service_id")
        drug = params.get("drug")
        if not service_id or not drug or not drug.strip():
            return _error_response(
                400,
                "MissingParameter",
                "query parameters 'service_id' and 'drug' are required",
                as_json,
            )
        try:
            found = await bus.fetch_detail(service_id, drug.strip())
        except UnknownService as exc:
            return _error_response(400, "UnknownService", str(exc), as_json)
        except DetailNotFound as exc:
            return _error_response(404, "NotFound", str(exc), as_json)
        except ProviderUnavailable as exc:
            return _error_response(502, "ProviderUnavailable", str(exc), as_json)
        if as_json:
            return JSONResponse(_detail_json(found))
        return Response(
            content=serialize_drug_detail(found), media_type="application/xml"
        )

    @app.get("/api/report")
    async def report(request: Request) -> Response:
        as_json = prefers_json(request.headers.get("accept"))
        params = request.query_params
        bucket = params.get("bucket")
        cell = None
        cell_text = params.get("cell")
        if cell_text is not None:
            try:
                cell = float(cell_text)
            except ValueError:
                return _error_response(
                    400, "BadBucket", f"cell must be a number: {cell_text!r}", as_json
                )
        try:
            entries = bus.consumption_report(bucket or "", cell)
        except BadBucket as exc:
            return _error_response(400, "BadBucket", str(exc), as_json)
        if as_json:
            return JSONResponse(
                {"Entry": [{"Key": e.key, "Count": e.count} for e in entries]}
            )
        return Response(content=_report_xml(entries), media_type="application/xml")

    if assets_dir is not None:

        @app.get("/app")
        @app.get("/app/{asset_path:path}")
        async def serve_asset(request: Request, asset_path: str = "") -> Response:
            resolved = _resolve_asset(assets_dir, asset_path)
            if resolved is None:
                return _error_response(
                    404,
                    "NotFound",
                    "no such asset",
                    prefers_json(request.headers.get("accept")),
                )
            return FileResponse(resolved)

    return app
