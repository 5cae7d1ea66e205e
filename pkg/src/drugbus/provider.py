"""A vendor's drug lookup service.

Serves the wire contract over plain HTTP GET:

    /getdruginfo/{name}    200 XML | 404 (no body)
    /getdrugdetail/{name}  200 XML | 404
    /health                200

Paths are matched case-insensitively; the name segment is percent-decoded
strictly, so a malformed escape is a 400, never a silent best guess. One
provider process serves one vendor's catalog, immutable after load.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import PlainTextResponse

from .catalog import Catalog, load_catalog
from .wire import (
    BadEncoding,
    DrugDetail,
    DrugInfo,
    decode_drug_path_segment,
    serialize_drug_detail,
    serialize_drug_info,
    serialize_drug_info_legacy,
)

__all__ = [
    "RESPONSE_VARIANTS",
    "BadConfig",
    "ProviderConfig",
    "load_config",
    "build_app",
]

RESPONSE_VARIANTS = ("canonical", "legacy_alphabetical")


class BadConfig(Exception):
    def __init__(self, path: os.PathLike | str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


@dataclass(frozen=True)
class ProviderConfig:
    """Identity and serving parameters for one vendor's service."""

    vendor_name: str
    vendor_address: str
    port: int
    catalog_path: Path
    response_variant: str = "canonical"

    def __post_init__(self) -> None:
        if self.response_variant not in RESPONSE_VARIANTS:
            raise ValueError(
                f"response_variant must be one of {RESPONSE_VARIANTS}, "
                f"got {self.response_variant!r}"
            )
        if not (1 <= self.port <= 65535):
            raise ValueError(f"port out of range: {self.port}")


def load_config(path: os.PathLike | str) -> ProviderConfig:
    """Read a provider config document (JSON). Catalog path resolves
    relative to the config file's own directory."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise BadConfig(path, f"cannot read config: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise BadConfig(path, f"not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise BadConfig(path, "config document must be a JSON object")
    missing = [
        key
        for key in ("vendor_name", "vendor_address", "port", "catalog")
        if key not in raw
    ]
    if missing:
        raise BadConfig(path, f"missing keys: {', '.join(missing)}")
    try:
        return ProviderConfig(
            vendor_name=str(raw["vendor_name"]),
            vendor_address=str(raw["vendor_address"]),
            port=int(raw["port"]),
            catalog_path=(path.parent / str(raw["catalog"])).resolve(),
            response_variant=str(raw.get("response_variant", "canonical")),
        )
    except (TypeError, ValueError) as exc:
        raise BadConfig(path, str(exc)) from None


def _split_raw_path(request: Request) -> tuple[str, str] | None:
    """Pull (operation, encoded name) from the request's undecoded path.

    Works from raw bytes because the server's own decoding is lenient;
    the contract wants malformed escapes rejected, not guessed at.
    """
    raw = request.scope.get("raw_path")
    if raw is None:
        return None
    raw = raw.split(b"?", 1)[0]
    parts = raw.split(b"/", 2)
    # parts[0] is the empty chunk before the leading slash.
    operation = parts[1] if len(parts) > 1 else b""
    segment = parts[2] if len(parts) > 2 else b""
    return (
        decode_drug_path_segment(operation),
        decode_drug_path_segment(segment),
    )


def build_app(config: ProviderConfig, catalog: Catalog) -> FastAPI:
    app = FastAPI(docs_url=None, redoc_url=None, openapi_url=None)

    if config.response_variant == "legacy_alphabetical":
        serialize = serialize_drug_info_legacy
    else:
        serialize = serialize_drug_info

    @app.get("/{rest:path}")
    async def dispatch(request: Request, rest: str) -> Response:
        try:
            split = _split_raw_path(request)
            if split is None:
                # No raw bytes in the scope; fall back to the decoded path.
                head, _, tail = rest.partition("/")
                split = (head, tail)
            operation, name = split
        except BadEncoding as exc:
            return PlainTextResponse(f"BadEncoding: {exc}", status_code=400)

        operation = operation.lower()
        if operation == "health" and not name:
            return PlainTextResponse("ok")
        if operation not in ("getdruginfo", "getdrugdetail"):
            return Response(status_code=404)
        entry = catalog.lookup(name) if name else None
        if entry is None:
            return Response(status_code=404)
        if operation == "getdruginfo":
            body = serialize(
                DrugInfo(
                    drug_name=entry.name,
                    price=entry.selling_price,
                    description=entry.description,
                    vendor_name=config.vendor_name,
                )
            )
        else:
            body = serialize_drug_detail(
                DrugDetail(
                    drug_name=entry.name,
                    quantity=entry.quantity,
                    vendor_address=config.vendor_address,
                    substitutes=entry.substitutes,
                )
            )
        return Response(content=body, media_type="application/xml")

    return app


def app_from_files(config_path: os.PathLike | str) -> FastAPI:
    """Convenience for serving: load config + catalog, build the app."""
    config = load_config(config_path)
    catalog = load_catalog(config.catalog_path)
    return build_app(config, catalog)
