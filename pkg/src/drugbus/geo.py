"""Geolocation primitives: validated points and great-circle distance."""

from __future__ import annotations

import math
from dataclasses import dataclass

EARTH_RADIUS_KM = 6371.0


class InvalidLocation(ValueError):
    """Latitude or longitude out of bounds (or not a finite number)."""


@dataclass(frozen=True)
class GeoPoint:
    """A point on the globe, degrees. Latitude in [-90, 90], longitude in [-180, 180]."""

    latitude: float
    longitude: float

    def __post_init__(self) -> None:
        lat, lon = float(self.latitude), float(self.longitude)
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise InvalidLocation("latitude and longitude must be finite numbers")
        if not -90.0 <= lat <= 90.0:
            raise InvalidLocation(f"latitude {lat} outside [-90, 90]")
        if not -180.0 <= lon <= 180.0:
            raise InvalidLocation(f"longitude {lon} outside [-180, 180]")
        object.__setattr__(self, "latitude", lat)
        object.__setattr__(self, "longitude", lon)


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points on a spherical Earth, km.

    Symmetric, zero for identical coordinates, and never exceeds half the
    Earth's circumference (pi * 6371 km).
    """
    phi1 = math.radians(a.latitude)
    phi2 = math.radians(b.latitude)
    dphi = phi2 - phi1
    dlambda = math.radians(b.longitude - a.longitude)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(
        dlambda / 2.0
    ) ** 2
    # Rounding can push h a hair past 1; clamp so sqrt stays real.
    h = min(1.0, max(0.0, h))
    return 2.0 * EARTH_RADIUS_KM * math.atan2(math.sqrt(h), math.sqrt(1.0 - h))
