"""Vendor drug catalogs: the flat-file store behind each provider service.

Catalog file format (UTF-8, one record per line):

    name|description|selling_price|quantity|substitutes

Fields are separated by ``|``; the substitutes field holds zero or more drug
names separated by ``;``. Literal ``|`` and ``;`` are forbidden inside
fields. Prices are written with 4 fractional digits. Example row:

    Blopen Gel|Deep penetrating gel for aching joints and muscles|5.0000|12|Deep Heat Gel
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Iterator

from .wire import BadPrice, format_price, normalize_price

CATALOG_HEADER = "name|description|selling_price|quantity|substitutes"

_FORBIDDEN = ("|", ";", "\n", "\r")


class CatalogError(Exception):
    """Base class for catalog load failures."""


class FileUnreadable(CatalogError):
    def __init__(self, path: os.PathLike | str, reason: str):
        super().__init__(f"cannot read catalog {path}: {reason}")
        self.path = Path(path)


class CatalogParseError(CatalogError):
    def __init__(self, line_number: int, reason: str):
        super().__init__(f"line {line_number}: {reason}")
        self.line_number = line_number


class DuplicateName(CatalogError):
    def __init__(self, name: str, line_number: int):
        super().__init__(
            f"line {line_number}: duplicate drug name {name!r} "
            "(names are unique case-insensitively)"
        )
        self.name = name
        self.line_number = line_number


def _field_text(value: str, label: str, *, required: bool) -> str:
    for ch in _FORBIDDEN:
        if ch in value:
            raise ValueError(f"{label} must not contain {ch!r}")
    value = value.strip() if required else value
    if required and not value:
        raise ValueError(f"{label} must be non-empty")
    return value


@dataclass(frozen=True)
class CatalogEntry:
    """One drug record in a vendor's own store.

    Carries more than the public lookup contract: stock quantity and the
    substitute names surfaced by the detail endpoint.
    """

    name: str
    description: str
    selling_price: Decimal
    quantity: int
    substitutes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "name", _field_text(self.name, "name", required=True))
        object.__setattr__(
            self,
            "description",
            _field_text(self.description, "description", required=False),
        )
        object.__setattr__(self, "selling_price", normalize_price(self.selling_price))
        if not isinstance(self.quantity, int) or isinstance(self.quantity, bool):
            raise TypeError("quantity must be int")
        if self.quantity < 0:
            raise ValueError("quantity must be >= 0")
        subs = tuple(
            _field_text(s, "substitute", required=True) for s in self.substitutes
        )
        seen: set[str] = set()
        for sub in subs:
            folded = sub.casefold()
            if folded == self.name.casefold():
                raise ValueError(f"substitute {sub!r} duplicates the entry itself")
            if folded in seen:
                raise ValueError(f"duplicate substitute {sub!r}")
            seen.add(folded)
        object.__setattr__(self, "substitutes", subs)

    def to_line(self) -> str:
        return "|".join(
            (
                self.name,
                self.description,
                format_price(self.selling_price),
                str(self.quantity),
                ";".join(self.substitutes),
            )
        )


@dataclass(frozen=True)
class Catalog:
    """An ordered, immutable collection of entries for one vendor.

    Lookup returns the FIRST entry whose name matches case-insensitively, in
    file order. Uniqueness of names is enforced at load time, not here, so
    deliberately corrupted fixtures can exercise the first-match rule.
    """

    entries: tuple[CatalogEntry, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[CatalogEntry]:
        return iter(self.entries)

    def lookup(self, drug_name: str) -> CatalogEntry | None:
        wanted = drug_name.casefold()
        for entry in self.entries:
            if entry.name.casefold() == wanted:
                return entry
        return None


def parse_catalog_line(line: str, line_number: int) -> CatalogEntry:
    parts = line.split("|")
    if len(parts) != 5:
        raise CatalogParseError(
            line_number, f"expected 5 |-separated fields, got {len(parts)}"
        )
    name, description, price_text, quantity_text, substitutes_text = parts
    try:
        price = normalize_price(price_text.strip())
    except BadPrice as exc:
        raise CatalogParseError(line_number, str(exc)) from None
    try:
        quantity = int(quantity_text.strip())
    except ValueError:
        raise CatalogParseError(
            line_number, f"quantity {quantity_text!r} is not an integer"
        ) from None
    substitutes = tuple(s.strip() for s in substitutes_text.split(";") if s.strip())
    try:
        return CatalogEntry(
            name=name,
            description=description,
            selling_price=price,
            quantity=quantity,
            substitutes=substitutes,
        )
    except (TypeError, ValueError) as exc:
        raise CatalogParseError(line_number, str(exc)) from None


def load_catalog(path: os.PathLike | str) -> Catalog:
    """Load and validate a catalog file.

    Rejects a bad header, malformed rows (with their line number), and
    duplicate names under case-insensitive comparison.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FileUnreadable(path, exc.strerror or str(exc)) from None
    except UnicodeDecodeError as exc:
        raise FileUnreadable(path, f"not valid UTF-8 ({exc})") from None

    lines = text.splitlines()
    if not lines or lines[0] != CATALOG_HEADER:
        raise CatalogParseError(1, f"header must be exactly {CATALOG_HEADER!r}")

    entries: list[CatalogEntry] = []
    seen: dict[str, int] = {}
    for line_number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        entry = parse_catalog_line(line, line_number)
        folded = entry.name.casefold()
        if folded in seen:
            raise DuplicateName(entry.name, line_number)
        seen[folded] = line_number
        entries.append(entry)
    return Catalog(tuple(entries))


def write_catalog(path: os.PathLike | str, entries: Iterable[CatalogEntry]) -> None:
    """Write a catalog file in the exact on-disk format load_catalog reads."""
    lines = [CATALOG_HEADER]
    lines.extend(entry.to_line() for entry in entries)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
