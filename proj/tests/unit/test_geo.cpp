/*
 * Copyright 2026 The isoval Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "isoval/error.hpp"
#include "isoval/geo.hpp"
#include "support/support.hpp"

using namespace isoval;
using isoval::testing::Gen;
using isoval::testing::vector_distance_km;

TEST_CASE("great-circle distance hits the analytic reference points") {
    const double pi = std::numbers::pi;
    CHECK(great_circle_distance({0, 0}, {0, 0}) == 0.0);
    CHECK(great_circle_distance({0, 0}, {0, 90}) == doctest::Approx(pi / 2 * kEarthRadiusKm).epsilon(1e-14));
    CHECK(std::abs(great_circle_distance({0, 0}, {0, 90}) - 10007.55) < 0.01);
    /// pi * R is 20015.1145 km; the commonly quoted 20015.09 is off by 0.02 km.
    CHECK(std::abs(great_circle_distance({0, 0}, {0, 180}) - 20015.1145) < 0.001);
    CHECK(great_circle_distance({90, 0}, {-90, 0}) == doctest::Approx(pi * kEarthRadiusKm).epsilon(1e-14));
}

TEST_CASE("haversine agrees with the 3D vector oracle") {
    Gen gen(11);
    for (int i = 0; i < 2000; ++i) {
        const Location a = gen.location();
        const Location b = gen.location();
        CHECK(great_circle_distance(a, b) == doctest::Approx(vector_distance_km(a, b)).epsilon(1e-9).scale(1.0));
    }
}

TEST_CASE("distance is a metric bounded by half the circumference") {
    Gen gen(12);
    const double max = std::numbers::pi * kEarthRadiusKm;
    for (int i = 0; i < 2000; ++i) {
        const Location a = gen.location();
        const Location b = gen.location();
        const Location c = gen.location();
        const double ab = great_circle_distance(a, b);
        CHECK(ab >= 0.0);
        CHECK(ab <= max + 1e-9);
        CHECK(ab == great_circle_distance(b, a));
        CHECK(ab <= great_circle_distance(a, c) + great_circle_distance(c, b) + 1e-9);
    }
}

TEST_CASE("longitude shifts by 360 degrees change nothing") {
    Gen gen(13);
    for (int i = 0; i < 500; ++i) {
        const double lat = gen.uniform(-90, 90);
        const double lon = gen.uniform(-180, 180);
        const Location other = gen.location();
        const Location a(lat, lon);
        const Location shifted(lat, lon + 360.0);
        CHECK(great_circle_distance(a, other) == doctest::Approx(great_circle_distance(shifted, other)).epsilon(1e-12));
    }
}

TEST_CASE("locations validate latitude and wrap longitude") {
    CHECK_THROWS_AS(Location(95, 0), DataError);
    CHECK_THROWS_AS(Location(-90.5, 0), DataError);
    CHECK_THROWS_AS(Location(std::nan(""), 0), DataError);
    CHECK(Location(0, 180).lon() == -180.0);
    CHECK(Location(0, 540).lon() == -180.0);
    CHECK(Location(0, -190).lon() == doctest::Approx(170.0));
    CHECK(Location(0, 359).lon() == doctest::Approx(-1.0));
    CHECK(Location(0, -1e-20).lon() < 180.0);
    CHECK(Location(90, 0).lat() == 90.0);
}

TEST_CASE("grid cells follow the cosine area weighting") {
    const auto one = build_grid({0, 1, 0, 1}, 1.0);
    REQUIRE(one.size() == 1);
    CHECK(one.weights()[0] == 1.0);
    CHECK(one.cells()[0] == Location(0.5, 0.5));

    const auto two = build_grid({0, 2, 0, 1}, 1.0);
    REQUIRE(two.size() == 2);
    const double c1 = std::cos(0.5 * std::numbers::pi / 180);
    const double c2 = std::cos(1.5 * std::numbers::pi / 180);
    CHECK(two.weights()[0] == doctest::Approx(c1 / (c1 + c2)).epsilon(1e-15));
    CHECK(two.weights()[1] == doctest::Approx(c2 / (c1 + c2)).epsilon(1e-15));

    CHECK_THROWS_AS(build_grid({0, 0, 0, 1}, 1.0), ConfigError);
    CHECK_THROWS_AS(build_grid({0, 0.5, 0, 1}, 1.0), ConfigError);
    CHECK_THROWS_AS(build_grid({0, 1, 0, 1}, 0.0), ConfigError);
    CHECK(build_grid({0, 1, 0, 1}, 0.1).size() == 100);
}

TEST_CASE("grid weights are positive and sum to one") {
    Gen gen(14);
    for (int i = 0; i < 50; ++i) {
        const double lat0 = gen.uniform(-89, 80);
        const double lon0 = gen.uniform(-180, 150);
        const BoundingBox b{lat0, std::min(90.0, lat0 + gen.uniform(1, 20)), lon0, lon0 + gen.uniform(1, 30)};
        const auto g = build_grid(b, gen.uniform(0.5, 2.0));
        double sum = 0.0;
        for (double w : g.weights()) {
            CHECK(w > 0.0);
            sum += w;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("radius clusters") {
    const std::vector<Location> equator{{0, 0}, {0, 1}, {0, 5}};
    CHECK(cluster_by_radius(equator, 0, 0.0) == std::vector<std::size_t>{0});
    CHECK(cluster_by_radius(equator, 0, 200.0) == std::vector<std::size_t>{0, 1});
    CHECK(cluster_by_radius(equator, 0, 30000.0) == std::vector<std::size_t>{0, 1, 2});
    CHECK_THROWS_AS(cluster_by_radius(equator, 3, 1.0), ConfigError);

    Gen gen(15);
    for (int i = 0; i < 100; ++i) {
        std::vector<Location> pts;
        for (int k = 0; k < 30; ++k) pts.push_back(gen.location_in({40, 50, 0, 20}));
        const std::size_t seed = gen.index(pts.size());
        const double r1 = gen.uniform(0, 500);
        const double r2 = r1 + gen.uniform(0, 500);
        const auto small = cluster_by_radius(pts, seed, r1);
        const auto large = cluster_by_radius(pts, seed, r2);
        CHECK(std::includes(large.begin(), large.end(), small.begin(), small.end()));
        CHECK(std::find(small.begin(), small.end(), seed) != small.end());
    }
}
