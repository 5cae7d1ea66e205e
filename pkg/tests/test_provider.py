"""Provider HTTP surface: lookup, detail, health, path handling, config."""

import asyncio
import json
import xml.etree.ElementTree as ET
from decimal import Decimal

import httpx
import pytest

from drugbus.catalog import Catalog, CatalogEntry
from drugbus.provider import BadConfig, app_from_files, load_config
from drugbus.wire import parse_drug_detail, parse_drug_info, validate_against_schema

from support import make_entry, provider_app

GEL = make_entry(
    "Blopen Gel",
    price="5.0000",
    description="Deep penetrating gel for aching joints and muscles",
    quantity=12,
    substitutes=("Deep Heat Gel",),
)


def get(app, path, **kwargs):
    async def _go():
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://provider"
        ) as client:
            return await client.get(path, **kwargs)

    return asyncio.run(_go())


class TestLookup:
    def test_known_drug_returns_canonical_xml(self):
        app = provider_app("Zoch Pharmacy", [GEL])
        response = get(app, "/getdruginfo/blopen%20gel")
        assert response.status_code == 200
        assert response.headers["content-type"].startswith("application/xml")
        info = parse_drug_info(response.content)
        assert info.drug_name == "Blopen Gel"
        assert info.price_text == "5.0000"
        assert info.vendor_name == "Zoch Pharmacy"
        ok, diagnostics = validate_against_schema(response.content)
        assert ok, diagnostics

    def test_lookup_name_is_case_insensitive(self):
        app = provider_app("V", [GEL])
        assert get(app, "/getdruginfo/BLOPEN%20GEL").status_code == 200

    def test_path_operation_is_case_insensitive(self):
        app = provider_app("V", [GEL])
        assert get(app, "/GetDrugInfo/blopen%20gel").status_code == 200
        assert get(app, "/GETDRUGDETAIL/blopen%20gel").status_code == 200

    def test_miss_is_404_with_empty_body(self):
        app = provider_app("V", [GEL])
        response = get(app, "/getdruginfo/absent")
        assert response.status_code == 404
        assert response.content == b""

    def test_malformed_escape_is_400(self):
        app = provider_app("V", [GEL])
        response = get(app, "/getdruginfo/blopen%zzgel")
        assert response.status_code == 400
        assert "BadEncoding" in response.text

    def test_unknown_operation_is_404(self):
        app = provider_app("V", [GEL])
        assert get(app, "/orderdrug/blopen%20gel").status_code == 404

    def test_vendor_name_always_comes_from_config(self):
        app = provider_app("Mensah Chemists", [GEL])
        info = parse_drug_info(get(app, "/getdruginfo/blopen%20gel").content)
        assert info.vendor_name == "Mensah Chemists"

    def test_first_match_wins_when_the_store_is_corrupted(self):
        # Load-time uniqueness is bypassed on purpose here.
        corrupted = Catalog(
            (
                CatalogEntry("Aspirin", "earlier", Decimal("1.0000"), 1),
                CatalogEntry("ASPIRIN", "later", Decimal("9.0000"), 1),
            )
        )
        from drugbus.provider import ProviderConfig, build_app
        from pathlib import Path

        config = ProviderConfig("V", "addr", 8000, Path("unused"))
        info = parse_drug_info(
            get(build_app(config, corrupted), "/getdruginfo/aspirin").content
        )
        assert info.description == "earlier"
        assert info.price == Decimal("1.0000")

    def test_encoded_slash_stays_inside_the_name_segment(self):
        entry = make_entry("a/b")
        app = provider_app("V", [entry])
        assert get(app, "/getdruginfo/a%2Fb").status_code == 200


class TestLegacyVariant:
    def test_alphabetical_order_with_namespace_and_declaration(self):
        app = provider_app("V", [GEL], variant="legacy_alphabetical")
        body = get(app, "/getdruginfo/blopen%20gel").content
        assert body.startswith(b"<?xml")
        root = ET.fromstring(body)
        local = [child.tag.rsplit("}", 1)[-1] for child in root]
        assert local == ["Description", "Name", "Price", "VendorName"]

    def test_legacy_body_parses_to_the_same_values(self):
        canonical = provider_app("V", [GEL])
        legacy = provider_app("V", [GEL], variant="legacy_alphabetical")
        a = parse_drug_info(get(canonical, "/getdruginfo/blopen%20gel").content)
        b = parse_drug_info(get(legacy, "/getdruginfo/blopen%20gel").content)
        assert a == b


class TestDetail:
    def test_detail_document(self):
        app = provider_app("V", [GEL], address="12 Harbour Road, Tema")
        detail = parse_drug_detail(get(app, "/getdrugdetail/blopen%20gel").content)
        assert detail.quantity == 12
        assert detail.vendor_address == "12 Harbour Road, Tema"
        assert detail.substitutes == ("Deep Heat Gel",)

    def test_out_of_stock_is_still_listed(self):
        app = provider_app("V", [make_entry("Aspirin", quantity=0)])
        detail = parse_drug_detail(get(app, "/getdrugdetail/aspirin").content)
        assert detail.quantity == 0


class TestHealth:
    def test_health_answers_200(self):
        app = provider_app("V", [])
        assert get(app, "/health").status_code == 200
        assert get(app, "/HEALTH").status_code == 200

    def test_root_is_404(self):
        app = provider_app("V", [])
        assert get(app, "/").status_code == 404


class TestConfig:
    def write(self, tmp_path, payload):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(payload), encoding="utf-8")
        return path

    def base(self):
        return {
            "vendor_name": "V",
            "vendor_address": "addr",
            "port": 8732,
            "catalog": "catalog.txt",
        }

    def test_loads_and_resolves_catalog_relative_to_config(self, tmp_path):
        config = load_config(self.write(tmp_path, self.base()))
        assert config.catalog_path == (tmp_path / "catalog.txt").resolve()
        assert config.response_variant == "canonical"

    def test_missing_keys_are_named(self, tmp_path):
        payload = self.base()
        del payload["vendor_address"]
        with pytest.raises(BadConfig) as excinfo:
            load_config(self.write(tmp_path, payload))
        assert "vendor_address" in str(excinfo.value)

    def test_bad_json(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(BadConfig):
            load_config(path)

    def test_unknown_variant(self, tmp_path):
        payload = self.base() | {"response_variant": "soap"}
        with pytest.raises(BadConfig):
            load_config(self.write(tmp_path, payload))

    def test_port_out_of_range(self, tmp_path):
        payload = self.base() | {"port": 70000}
        with pytest.raises(BadConfig):
            load_config(self.write(tmp_path, payload))

    def test_app_from_files_serves_the_catalog(self, tmp_path):
        (tmp_path / "catalog.txt").write_text(
            "name|description|selling_price|quantity|substitutes\n"
            "Aspirin|pain relief|2.5000|4|\n",
            encoding="utf-8",
        )
        app = app_from_files(self.write(tmp_path, self.base()))
        info = parse_drug_info(get(app, "/getdruginfo/aspirin").content)
        assert info.price_text == "2.5000"
