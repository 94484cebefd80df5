#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "urbanpulse/civil_time.hpp"
#include "urbanpulse/csv.hpp"
#include "urbanpulse/geo.hpp"

using namespace urbanpulse;

namespace {

std::string square_feature(const std::string& id, double x0, double y0, double x1, double y1) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                R"({"type":"Feature","properties":{"zone_id":"%s"},"geometry":{"type":"Polygon","coordinates":)"
                R"([[[%g,%g],[%g,%g],[%g,%g],[%g,%g],[%g,%g]]]}})",
                id.c_str(), x0, y0, x1, y0, x1, y1, x0, y1, x0, y0);
  return buf;
}

std::string collection(const std::vector<std::string>& features) {
  std::string s = R"({"type":"FeatureCollection","features":[)";
  for (std::size_t i = 0; i < features.size(); ++i) s += (i ? "," : "") + features[i];
  return s + "]}";
}

}  // namespace

TEST(LoadZones, UnitSquareCentroid) {
  const auto zs = load_zones(collection({square_feature("A", 0, 0, 1, 1)}));
  ASSERT_EQ(zs.size(), 1u);
  EXPECT_DOUBLE_EQ(zs.zones()[0].centroid.lon, 0.5);
  EXPECT_DOUBLE_EQ(zs.zones()[0].centroid.lat, 0.5);
}

TEST(LoadZones, EmptyCollectionIsValid) { EXPECT_TRUE(load_zones(collection({})).empty()); }

TEST(LoadZones, DuplicateIdRejected) {
  EXPECT_THROW(load_zones(collection({square_feature("A", 0, 0, 1, 1), square_feature("A", 2, 2, 3, 3)})),
               ValidationError);
}

TEST(LoadZones, ParseErrorNamesFeatureIndex) {
  const std::string bad = collection({square_feature("A", 0, 0, 1, 1),
                                      R"({"type":"Feature","properties":{},"geometry":{"type":"Polygon","coordinates":[]}})"});
  try {
    load_zones(bad);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("feature 1"), std::string::npos) << e.what();
  }
}

TEST(LoadZones, RejectsOpenRingAndShortRing) {
  const std::string open =
      R"({"type":"FeatureCollection","features":[{"type":"Feature","properties":{"zone_id":"A"},)"
      R"("geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1]]]}}]})";
  EXPECT_THROW(load_zones(open), ParseError);
  const std::string short_ring =
      R"({"type":"FeatureCollection","features":[{"type":"Feature","properties":{"zone_id":"A"},)"
      R"("geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[0,0]]]}}]})";
  EXPECT_THROW(load_zones(short_ring), ParseError);
  EXPECT_THROW(load_zones("not json"), ParseError);
}

TEST(LoadZones, MultiPolygonAndHoles) {
  const std::string doc =
      R"({"type":"FeatureCollection","features":[{"type":"Feature","properties":{"zone_id":"M"},)"
      R"("geometry":{"type":"MultiPolygon","coordinates":[)"
      R"([[[0,0],[4,0],[4,4],[0,4],[0,0]],[[1,1],[3,1],[3,3],[1,3],[1,1]]],)"
      R"([[[10,0],[11,0],[11,1],[10,1],[10,0]]]]}}]})";
  const auto zs = load_zones(doc);
  ASSERT_EQ(zs.size(), 1u);
  EXPECT_EQ(zs.point_to_zone({0.5, 0.5}), "M");
  EXPECT_EQ(zs.point_to_zone({2.0, 2.0}), std::nullopt);  // inside the hole
  EXPECT_EQ(zs.point_to_zone({10.5, 0.5}), "M");
  // frame area 12 centred at (2,2); square area 1 at (10.5,0.5)
  EXPECT_NEAR(zs.zones()[0].centroid.lon, (12 * 2.0 + 1 * 10.5) / 13.0, 1e-12);
  EXPECT_NEAR(zs.zones()[0].centroid.lat, (12 * 2.0 + 1 * 0.5) / 13.0, 1e-12);
}

TEST(PointToZone, InteriorExteriorAndSharedEdge) {
  const auto zs = load_zones(collection({square_feature("B", 1, 0, 2, 1), square_feature("A", 0, 0, 1, 1)}));
  EXPECT_EQ(point_to_zone({0.5, 0.5}, zs), "A");
  EXPECT_EQ(point_to_zone({5, 5}, zs), std::nullopt);
  // On the shared edge both polygons contain the point; the smaller id wins.
  const GeoPoint edge{1.0, 0.5};
  EXPECT_TRUE(zs.find("A")->contains(edge));
  EXPECT_TRUE(zs.find("B")->contains(edge));
  EXPECT_EQ(point_to_zone(edge, zs), "A");
  EXPECT_EQ(point_to_zone({0.0, 0.0}, zs), "A");  // vertex
}

TEST(PointToZone, CentroidMapsBackForConvexZones) {
  std::vector<std::string> f;
  for (int i = 0; i < 5; ++i) f.push_back(square_feature("Z" + std::to_string(i), i, 0, i + 1, 1));
  const auto zs = load_zones(collection(f));
  for (const auto& z : zs.zones()) EXPECT_EQ(zs.point_to_zone(z.centroid), z.zone_id);
}

TEST(Haversine, IdentityAndOneDegree) {
  EXPECT_EQ(haversine_m({103.8, 1.3}, {103.8, 1.3}), 0.0);
  const double d = haversine_m({0, 0}, {1, 0});
  EXPECT_NEAR(d, 111195.0, 1.0);
  EXPECT_NEAR(d, oracle::equator_arc_m(1.0), 1e-6);
}

TEST(Haversine, SymmetryAndTriangleInequality) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lon(-180, 180), lat(-90, 90);
  for (int i = 0; i < 100; ++i) {
    const GeoPoint a{lon(rng), lat(rng)}, b{lon(rng), lat(rng)}, c{lon(rng), lat(rng)};
    EXPECT_EQ(haversine_m(a, b), haversine_m(b, a));
    EXPECT_GE(haversine_m(a, b), 0.0);
    const double ab = haversine_m(a, b), bc = haversine_m(b, c), ac = haversine_m(a, c);
    EXPECT_LE(ac, (ab + bc) * (1 + 1e-6));
  }
}

TEST(GeoJson, RoundTripKeepsZones) {
  const auto zs = load_zones(collection({square_feature("A", 0, 0, 1, 1), square_feature("B", 1, 0, 2, 1)}));
  const auto again = load_zones(zones_to_geojson(zs).dump());
  ASSERT_EQ(again.size(), 2u);
  EXPECT_EQ(again.zones()[1].zone_id, "B");
  EXPECT_EQ(again.zones()[1].centroid, zs.zones()[1].centroid);
}

TEST(CivilTime, ParseFormatAndDaytype) {
  const auto t = parse_instant("2017-06-30T19:02:00");
  EXPECT_EQ(format_instant(t), "2017-06-30T19:02:00");
  EXPECT_EQ(t.minute_of_day(), 19 * 60 + 2);
  EXPECT_EQ(parse_instant("2017-06-30 19:02"), t);
  EXPECT_EQ(daytype_of(parse_date("2017-07-01")), DayType::Weekend);  // Saturday
  EXPECT_EQ(daytype_of(parse_date("2017-07-03")), DayType::Weekday);  // Monday
  EXPECT_THROW(parse_date("2017-02-30"), ParseError);
  EXPECT_THROW(parse_instant("2017-06-30T25:00:00"), ParseError);
}

TEST(Csv, QuotedFieldsAndRoundTripNumbers) {
  const auto f = csv::split_line(R"(a,"b,c","d ""e""",)");
  ASSERT_EQ(f.size(), 4u);
  EXPECT_EQ(f[1], "b,c");
  EXPECT_EQ(f[2], "d \"e\"");
  EXPECT_EQ(f[3], "");
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.125}) EXPECT_EQ(*csv::parse_double(csv::format_double(v)), v);
  EXPECT_FALSE(csv::parse_double("nan"));
  EXPECT_FALSE(csv::parse_int("3.5"));
}
