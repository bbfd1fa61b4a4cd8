import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neighbourtext.errors import InputError
from neighbourtext.geo import (
    AttributeSource,
    Gazetteer,
    GeoPoint,
    SpatialUnit,
    aggregate_attributes,
    assign_point,
    haversine_km,
    load_attribute_sources,
    load_gazetteer,
    read_unit_attributes,
    write_unit_attributes,
)

from conftest import oracle_haversine

lats = st.floats(-90, 90, allow_nan=False)
lons = st.floats(-180, 180, allow_nan=False)
points = st.builds(GeoPoint, lats, lons)


def brute_force_aggregate(units, zones, k_max, max_km):
    out_entries, out_support = {}, {}
    for u in units:
        cands = []
        for z in zones:
            d = oracle_haversine(u.centre.lat, u.centre.lon, z.centroid.lat, z.centroid.lon)
            if d <= max_km:
                cands.append((d, z.zone_id, z))
        cands.sort(key=lambda t: (t[0], t[1]))
        chosen = [z for _, _, z in cands[:k_max]]
        if not chosen:
            continue
        out_support[u.unit_id] = len(chosen)
        for a in {a for z in chosen for a in z.values}:
            vals = [z.values[a] for z in chosen if a in z.values]
            out_entries[(u.unit_id, a)] = math.fsum(vals) / len(vals)
    return out_entries, out_support


def brute_force_assign(p, units, max_km):
    best = None
    for u in sorted(units, key=lambda u: u.unit_id):
        d = oracle_haversine(p.lat, p.lon, u.centre.lat, u.centre.lon)
        if best is None or d < best[0] - 1e-12:
            best = (d, u.unit_id)
    if best is None or best[0] > max_km:
        return None
    return best[1]


def random_instance(rng, n_units, n_zones, spread=0.03):
    units = [
        SpatialUnit(f"U{i:03d}", f"Unit {i}", GeoPoint(51.5 + rng.uniform(-spread, spread), rng.uniform(-spread, spread)))
        for i in range(n_units)
    ]
    zones = []
    for i in range(n_zones):
        vals = {"imd": rng.uniform(0, 50), "price": rng.uniform(1e5, 1e6)}
        if rng.random() < 0.1:
            del vals["price"]
        zones.append(
            AttributeSource(f"Z{i:04d}", GeoPoint(51.5 + rng.uniform(-spread, spread), rng.uniform(-spread, spread)), vals)
        )
    return units, zones


class TestGeoPoint:
    def test_rejects_out_of_range(self):
        with pytest.raises(InputError):
            GeoPoint(91, 0)
        with pytest.raises(InputError):
            GeoPoint(0, 180.5)
        with pytest.raises(InputError):
            GeoPoint(float("nan"), 0)

    def test_gazetteer_sorted_and_unique(self):
        g = Gazetteer([SpatialUnit("b", "B", GeoPoint(0, 0)), SpatialUnit("a", "A", GeoPoint(0, 0))])
        assert g.unit_ids == ["a", "b"]
        with pytest.raises(InputError):
            Gazetteer([SpatialUnit("a", "A", GeoPoint(0, 0)), SpatialUnit("a", "B", GeoPoint(1, 1))])


class TestHaversine:
    def test_identical_points(self):
        assert haversine_km(GeoPoint(51.5, 0.0), GeoPoint(51.5, 0.0)) == 0.0

    def test_one_degree_of_latitude(self):
        # on one meridian the distance is R * dphi: 6371 * pi / 180
        d = haversine_km(GeoPoint(0.0, 0.0), GeoPoint(1.0, 0.0))
        assert d == pytest.approx(111.195, abs=1e-3)
        assert d == pytest.approx(oracle_haversine(0.0, 0.0, 1.0, 0.0), abs=1e-12)

    def test_symmetry_random_pairs(self):
        rng = random.Random(1)
        for _ in range(1000):
            a = GeoPoint(rng.uniform(-90, 90), rng.uniform(-180, 180))
            b = GeoPoint(rng.uniform(-90, 90), rng.uniform(-180, 180))
            assert haversine_km(a, b) == haversine_km(b, a)

    @given(points, points, points)
    @settings(max_examples=300, deadline=None)
    def test_triangle_inequality(self, a, b, c):
        assert haversine_km(a, c) <= haversine_km(a, b) + haversine_km(b, c) + 1e-9

    @given(points, points)
    @settings(max_examples=200, deadline=None)
    def test_non_negative(self, a, b):
        assert haversine_km(a, b) >= 0.0


class TestAssignPoint:
    def setup_method(self):
        self.g = Gazetteer(
            [
                SpatialUnit("B", "Beta", GeoPoint(51.5, -0.005)),
                SpatialUnit("A", "Alpha", GeoPoint(51.5, 0.005)),
                SpatialUnit("C", "Gamma", GeoPoint(51.6, 0.0)),
            ]
        )

    def test_point_at_centre(self):
        assert assign_point(GeoPoint(51.6, 0.0), self.g, 1.0) == "C"

    def test_far_point(self):
        assert assign_point(GeoPoint(40.0, 0.0), self.g, 1.0) is None

    def test_equidistant_goes_to_smaller_id(self):
        p = GeoPoint(51.5, 0.0)
        da = haversine_km(p, self.g["A"].centre)
        db = haversine_km(p, self.g["B"].centre)
        assert abs(da - db) <= 1e-12
        assert assign_point(p, self.g, 1.0) == "A" == brute_force_assign(p, self.g.units, 1.0)

    def test_empty_gazetteer(self):
        assert assign_point(GeoPoint(0, 0), Gazetteer([]), 1.0) is None

    def test_rejects_non_positive_radius(self):
        with pytest.raises(InputError):
            assign_point(GeoPoint(0, 0), self.g, 0.0)

    def test_never_beyond_max_km(self):
        rng = random.Random(5)
        units, _ = random_instance(rng, 30, 0)
        g = Gazetteer(units)
        for _ in range(500):
            p = GeoPoint(51.5 + rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05))
            uid = assign_point(p, g, 0.5)
            assert uid == brute_force_assign(p, units, 0.5)
            if uid is not None:
                assert haversine_km(p, g[uid].centre) <= 0.5


class TestAggregate:
    def test_mean_of_two(self):
        g = Gazetteer([SpatialUnit("u", "U", GeoPoint(51.5, 0.0))])
        zones = [
            AttributeSource("z1", GeoPoint(51.501, 0.0), {"imd": 10.0}),
            AttributeSource("z2", GeoPoint(51.499, 0.0), {"imd": 20.0}),
        ]
        t = aggregate_attributes(g, zones, 10, 1.0)
        assert t.entries == {("u", "imd"): 15.0}
        assert t.support == {"u": 2}

    def test_unit_without_zones_is_absent(self):
        g = Gazetteer([SpatialUnit("u", "U", GeoPoint(51.5, 0.0))])
        t = aggregate_attributes(g, [AttributeSource("z", GeoPoint(52.0, 0.0), {"imd": 1.0})], 10, 1.0)
        assert t.entries == {} and t.support == {}

    def test_empty_sources(self):
        g = Gazetteer([SpatialUnit("u", "U", GeoPoint(51.5, 0.0))])
        assert aggregate_attributes(g, [], 10, 1.0).support == {}

    def test_twelve_zones_uses_ten_closest(self):
        rng = random.Random(3)
        g = Gazetteer([SpatialUnit("u", "U", GeoPoint(51.5, 0.0))])
        zones = [
            AttributeSource(f"z{i:02d}", GeoPoint(51.5 + rng.uniform(-0.006, 0.006), rng.uniform(-0.006, 0.006)), {"imd": float(i)})
            for i in range(12)
        ]
        assert all(haversine_km(g["u"].centre, z.centroid) <= 1.0 for z in zones)
        t = aggregate_attributes(g, zones, 10, 1.0)
        entries, support = brute_force_aggregate(g.units, zones, 10, 1.0)
        assert support == {"u": 10} == t.support
        assert t.entries == entries

    def test_distance_tie_by_zone_id(self):
        g = Gazetteer([SpatialUnit("u", "U", GeoPoint(51.5, 0.0))])
        zones = [
            AttributeSource("zb", GeoPoint(51.501, 0.0), {"imd": 2.0}),
            AttributeSource("za", GeoPoint(51.501, 0.0), {"imd": 1.0}),
        ]
        assert aggregate_attributes(g, zones, 1, 1.0).entries == {("u", "imd"): 1.0}

    def test_missing_value_excluded_from_that_attribute(self):
        g = Gazetteer([SpatialUnit("u", "U", GeoPoint(51.5, 0.0))])
        zones = [
            AttributeSource("z1", GeoPoint(51.501, 0.0), {"imd": 10.0, "price": 5.0}),
            AttributeSource("z2", GeoPoint(51.499, 0.0), {"imd": 20.0}),
        ]
        t = aggregate_attributes(g, zones, 10, 1.0)
        assert t.get("u", "price") == 5.0 and t.get("u", "imd") == 15.0 and t.support["u"] == 2

    def test_matches_brute_force_random(self):
        rng = random.Random(11)
        for _ in range(5):
            units, zones = random_instance(rng, rng.randint(1, 50), rng.randint(0, 1000))
            t = aggregate_attributes(Gazetteer(units), zones, 10, 1.0)
            entries, support = brute_force_aggregate(units, zones, 10, 1.0)
            assert t.entries == entries and t.support == support

    def test_input_order_does_not_matter(self):
        rng = random.Random(2)
        units, zones = random_instance(rng, 20, 300)
        a = aggregate_attributes(Gazetteer(units), zones)
        shuffled_z = zones[:]
        shuffled_u = units[:]
        rng.shuffle(shuffled_z)
        rng.shuffle(shuffled_u)
        b = aggregate_attributes(Gazetteer(shuffled_u), shuffled_z)
        assert a.entries == b.entries and a.support == b.support

    def test_support_bounds(self):
        rng = random.Random(4)
        units, zones = random_instance(rng, 30, 800)
        t = aggregate_attributes(Gazetteer(units), zones, 7, 1.0)
        assert all(1 <= s <= 7 for s in t.support.values())


class TestFiles:
    def test_gazetteer_and_attribute_files(self, tmp_path):
        (tmp_path / "g.csv").write_text("unit_id,name,lat,lon\nu2,Camden,51.54,-0.14\nu1,Hackney,51.55,-0.05\n")
        (tmp_path / "z.csv").write_text("zone_id,lat,lon,imd,price\nE1,51.541,-0.141,30.5,\nE2,51.551,-0.051,12,450000\n")
        g = load_gazetteer(tmp_path / "g.csv")
        assert g.unit_ids == ["u1", "u2"] and g["u2"].name == "Camden"
        zones = load_attribute_sources(tmp_path / "z.csv")
        assert zones[0].values == {"imd": 30.5}
        assert zones[1].values == {"imd": 12.0, "price": 450000.0}
        t = aggregate_attributes(g, zones)
        write_unit_attributes(t, tmp_path / "ua.csv")
        back = read_unit_attributes(tmp_path / "ua.csv")
        assert back.entries == t.entries and back.support == t.support

    def test_bad_coordinate_reports_line(self, tmp_path):
        (tmp_path / "g.csv").write_text("unit_id,name,lat,lon\nu1,A,51.5,0\nu2,B,200,0\n")
        with pytest.raises(InputError, match=":3:"):
            load_gazetteer(tmp_path / "g.csv")

    def test_non_finite_attribute_rejected(self, tmp_path):
        (tmp_path / "z.csv").write_text("zone_id,lat,lon,imd\nE1,51.5,0,inf\n")
        with pytest.raises(InputError):
            load_attribute_sources(tmp_path / "z.csv")
