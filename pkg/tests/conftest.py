import json

import pytest

from geotrips.zones import ZoneSet, load_zones


def square_ring(lat0: float, lon0: float, size: float):
    """GeoJSON ring ([lon, lat], closed) for an axis-aligned square."""
    return [
        [lon0, lat0],
        [lon0 + size, lat0],
        [lon0 + size, lat0 + size],
        [lon0, lat0 + size],
        [lon0, lat0],
    ]


def square_feature(zone_id: str, lat0: float, lon0: float, size: float = 0.2):
    return {
        "type": "Feature",
        "properties": {"zone_id": zone_id, "name": zone_id.title()},
        "geometry": {"type": "Polygon", "coordinates": [square_ring(lat0, lon0, size)]},
    }


def feature_collection(*features):
    return {"type": "FeatureCollection", "features": list(features)}


@pytest.fixture
def four_zone_map() -> ZoneSet:
    """Four disjoint 0.2-degree squares in a 2x2 layout around NYC latitudes."""
    return load_zones(
        feature_collection(
            square_feature("alpha", 40.0, -74.0),
            square_feature("beta", 40.0, -73.7),
            square_feature("gamma", 40.3, -74.0),
            square_feature("delta", 40.3, -73.7),
        )
    )


@pytest.fixture
def four_zone_geojson(tmp_path):
    path = tmp_path / "zones.geojson"
    path.write_text(
        json.dumps(
            feature_collection(
                square_feature("alpha", 40.0, -74.0),
                square_feature("beta", 40.0, -73.7),
                square_feature("gamma", 40.3, -74.0),
                square_feature("delta", 40.3, -73.7),
            )
        )
    )
    return str(path)
