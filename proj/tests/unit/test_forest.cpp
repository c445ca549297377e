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

#include <algorithm>
#include <cmath>
#include <numbers>

#include "isoval/error.hpp"
#include "isoval/forest.hpp"
#include "support/support.hpp"

using namespace isoval;
using isoval::testing::Gen;

namespace {

Dataset synthetic(std::size_t n, std::uint64_t seed) {
    SyntheticConfig cfg;
    cfg.n_samples = n;
    cfg.features = default_feature_specs();
    cfg.seed = seed;
    return generate_synthetic(cfg).data;
}

RegressionTree constant_tree(std::vector<double> value) {
    RegressionTree::Node leaf;
    leaf.value = std::move(value);
    return RegressionTree({leaf});
}

}  // namespace

TEST_CASE("a single depth-0 tree without bagging predicts the training mean") {
    const auto d = synthetic(30, 1);
    ForestConfig cfg;
    cfg.n_trees = 1;
    cfg.max_depth = 0;
    cfg.bootstrap = false;
    const auto fwd = fit_forest(d, Direction::forward, cfg);
    const auto pred = predict_features(fwd, Location(50, 10));
    for (std::size_t j = 0; j < d.feature_count(); ++j) {
        const auto col = d.feature_column(j);
        double mean = 0.0;
        for (double v : col) mean += v;
        mean /= static_cast<double>(col.size());
        CHECK(pred[j] == doctest::Approx(mean).epsilon(1e-12));
    }
    CHECK(fwd.trees.front().depth() == 0);
}

TEST_CASE("a repeated training point gives a constant predictor") {
    std::vector<Sample> samples;
    for (int i = 0; i < 6; ++i) samples.push_back({"r" + std::to_string(i), Location(45, 5), "", {1.5, -2.0}});
    const Dataset d({"a", "b"}, samples);
    ForestConfig cfg;
    cfg.n_trees = 10;
    for (auto dir : {Direction::forward, Direction::backward}) {
        const auto model = fit_forest(d, dir, cfg);
        if (dir == Direction::forward) {
            CHECK(predict_features(model, Location(10, 100)) == std::vector<double>{1.5, -2.0});
        } else {
            const auto x = predict_location(model, {"q", Location(0, 0), "", {9.0, 9.0}});
            CHECK(x.lat() == doctest::Approx(45.0));
            CHECK(x.lon() == doctest::Approx(5.0));
        }
    }
}

TEST_CASE("ensemble prediction is the mean of tree outputs") {
    ForestModel m;
    m.direction = Direction::forward;
    m.input_names = {"lat", "lon"};
    m.output_names = {"f"};
    m.trees.push_back(constant_tree({0.0}));
    m.trees.push_back(constant_tree({2.0}));
    const std::vector<double> x{0.0, 0.0};
    CHECK(predict_forest(m, x) == std::vector<double>{1.0});

    m.trees = {constant_tree({3.0}), constant_tree({3.0}), constant_tree({3.0})};
    CHECK(predict_forest(m, x) == std::vector<double>{3.0});
}

TEST_CASE("backward outputs are valid locations") {
    ForestModel m;
    m.direction = Direction::backward;
    m.input_names = {"f"};
    m.output_names = {"lat", "lon"};
    m.trees.push_back(constant_tree({120.0, 200.0}));
    const auto x = predict_location(m, {"q", Location(0, 0), "", {1.0}});
    CHECK(x.lat() == 90.0);
    CHECK(x.lon() == doctest::Approx(-160.0));
}

TEST_CASE("forest training is deterministic across thread counts") {
    const auto d = synthetic(60, 2);
    ForestConfig cfg;
    cfg.n_trees = 25;
    cfg.seed = 77;
    const auto a = fit_forest(d, Direction::backward, cfg);
    cfg.threads = 4;
    const auto b = fit_forest(d, Direction::backward, cfg);
    const auto test = synthetic(20, 3);
    for (const auto& s : test.samples()) {
        const auto pa = predict_location(a, s);
        const auto pb = predict_location(b, s);
        CHECK(pa == pb);
    }
    CHECK(forest_rmse(a, test) == forest_rmse(b, test));
}

TEST_CASE("backward forest beats the centroid baseline") {
    const auto train = synthetic(100, 4);
    const auto test = synthetic(40, 5);
    ForestConfig cfg;
    cfg.n_trees = 100;
    cfg.seed = 1;
    const auto model = fit_forest(train, Direction::backward, cfg);
    double lat = 0.0;
    double lon = 0.0;
    for (const auto& s : train.samples()) {
        lat += s.location.lat();
        lon += s.location.lon();
    }
    const Location centroid(lat / 100.0, lon / 100.0);
    double acc = 0.0;
    for (const auto& s : test.samples()) acc += std::pow(great_circle_distance(centroid, s.location), 2);
    CHECK(forest_rmse(model, test) < std::sqrt(acc / 40.0));
}

TEST_CASE("backward RMSE is in kilometres") {
    ForestModel m;
    m.direction = Direction::backward;
    m.input_names = {"f"};
    m.output_names = {"lat", "lon"};
    m.trees.push_back(constant_tree({0.0, 1.0}));
    const Dataset one({"f"}, {{"a", Location(0, 0), "", {0.0}}});
    const double km = kEarthRadiusKm * std::numbers::pi / 180.0;
    CHECK(forest_rmse(m, one) == doctest::Approx(km).epsilon(1e-12));
    CHECK(std::abs(forest_rmse(m, one) - 111.19) < 0.01);
    const Dataset two({"f"}, {{"a", Location(0, 0), "", {0.0}}, {"b", Location(0, 2), "", {0.0}}});
    CHECK(forest_rmse(m, two) == doctest::Approx(km).epsilon(1e-12));
    const Dataset exact({"f"}, {{"a", Location(0, 1), "", {0.0}}});
    CHECK(forest_rmse(m, exact) == 0.0);
}

TEST_CASE("forward RMSE standardizes by the training sd") {
    ForestModel m;
    m.direction = Direction::forward;
    m.input_names = {"lat", "lon"};
    m.output_names = {"f", "g"};
    m.output_sd = {2.0, 1.0};
    m.trees.push_back(constant_tree({0.0, 0.0}));
    const Dataset one({"f", "g"}, {{"a", Location(0, 0), "", {2.0, 0.0}}});
    CHECK(forest_rmse(m, one) == doctest::Approx(std::sqrt(0.5)));
    const std::vector<double> scales{1.0, 1.0};
    CHECK(forest_rmse(m, one, scales) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("adding trees keeps predictions inside the span of tree outputs") {
    const auto d = synthetic(50, 6);
    Gen gen(41);
    ForestConfig small;
    small.n_trees = 10;
    small.seed = 9;
    ForestConfig large = small;
    large.n_trees = 40;
    const auto a = fit_forest(d, Direction::forward, small);
    const auto b = fit_forest(d, Direction::forward, large);
    for (int q = 0; q < 30; ++q) {
        const std::vector<double> x{gen.uniform(35, 60), gen.uniform(-10, 30)};
        const auto pa = predict_forest(a, x);
        const auto pb = predict_forest(b, x);
        for (std::size_t k = 0; k < pa.size(); ++k) {
            double lo = 1e300;
            double hi = -1e300;
            for (const auto& t : b.trees) {
                lo = std::min(lo, t.predict(x)[k]);
                hi = std::max(hi, t.predict(x)[k]);
            }
            CHECK(std::abs(pa[k] - pb[k]) <= hi - lo + 1e-12);
        }
    }
}

TEST_CASE("forest configuration is validated") {
    ForestConfig cfg;
    cfg.n_trees = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.min_leaf = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK(parse_direction("backward") == Direction::backward);
    CHECK_THROWS_AS(parse_direction("sideways"), ConfigError);
}
