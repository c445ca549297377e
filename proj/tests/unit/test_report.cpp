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
#include <limits>
#include <sstream>

#include "isoval/error.hpp"
#include "isoval/report.hpp"
#include "isoval/text.hpp"
#include "support/support.hpp"

using namespace isoval;
using isoval::testing::Gen;

namespace {

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

const OutputMeta kMeta{"0.1.0", "00ff00ff00ff00ff"};

}  // namespace

TEST_CASE("numbers round-trip through text") {
    Gen gen(71);
    for (int i = 0; i < 2000; ++i) {
        const double x = gen.normal() * std::pow(10.0, gen.uniform(-12, 12));
        const auto back = parse_number(format_number(x));
        REQUIRE(back.has_value());
        CHECK(*back == x);
    }
    CHECK(format_number(0.5) == "0.5");
    CHECK(format_number(-3.0) == "-3");
    CHECK(!parse_number("").has_value());
    CHECK(!parse_number("1.5x").has_value());
    CHECK(*parse_number(" 2\t") == 2.0);
    CHECK(!parse_number("   ").has_value());
    CHECK(*parse_number("-1e3") == -1000.0);
}

TEST_CASE("csv fields quote only when needed") {
    CHECK(csv_field("plain") == "plain");
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
    const auto parts = split_csv_record("x,\"a,b\",\"say \"\"hi\"\"\",");
    REQUIRE(parts.size() == 4);
    CHECK(parts[1] == "a,b");
    CHECK(parts[2] == "say \"hi\"");
    CHECK(parts[3].empty());
}

TEST_CASE("valuation JSON round trip") {
    ValuationResult r;
    r.method = ValuationMethod::tmc;
    r.seed = 42;
    r.permutations_used = 17;
    r.ids = {"s3", "s1", "s2"};
    r.values = {0.1, -1.0 / 3.0, 2.5e-9};
    r.convergence_history = {{5, 0.2}, {10, 0.01}};
    r.utility_full = -0.75;
    r.utility_empty = -1.5;
    const std::string text = valuation_to_json(r, kMeta);
    CHECK(text.find("\"config_hash\": \"00ff00ff00ff00ff\"") != std::string::npos);
    CHECK(text.find("\"mean_value\"") != std::string::npos);
    const auto back = valuation_from_json(text);
    CHECK(back.method == r.method);
    CHECK(back.seed == r.seed);
    CHECK(back.permutations_used == r.permutations_used);
    CHECK(back.ids == r.ids);
    CHECK(back.values == r.values);
    REQUIRE(back.convergence_history.size() == 2);
    CHECK(back.convergence_history[1].iteration == 10);
    CHECK(back.convergence_history[1].max_change == 0.01);
    CHECK(back.utility_full == r.utility_full);
    CHECK(back.utility_empty == r.utility_empty);

    CHECK_THROWS_AS(valuation_from_json("{"), DataError);
    CHECK_THROWS_AS(valuation_from_json("{\"values\": {}}"), DataError);
    CHECK_THROWS_AS(valuation_from_json("{\"method\": \"bogus\", \"values\": {}}"), DataError);
    CHECK_THROWS_AS(load_valuation("/nonexistent/values.json"), DataError);
}

TEST_CASE("histogram bins cover every value") {
    Gen gen(72);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> values(1 + gen.index(100));
        for (double& v : values) v = gen.normal();
        const std::size_t bins = 1 + gen.index(20);
        const auto h = histogram(values, bins);
        std::size_t total = 0;
        for (const auto& b : h) total += b.count;
        CHECK(total == values.size());
        if (h.size() > 1) {
            CHECK(h.size() == bins);
            CHECK(h.front().lower == *std::min_element(values.begin(), values.end()));
            CHECK(h.back().upper == *std::max_element(values.begin(), values.end()));
        }
    }
    const std::vector<double> v{0, 1, 2, 3, 4};
    const auto h = histogram(v, 2);
    CHECK(h[0].count == 2);
    CHECK(h[1].count == 3);
    CHECK(histogram(std::vector<double>{2, 2}, 4).size() == 1);
    CHECK(histogram(std::vector<double>{}, 4).empty());
    CHECK_THROWS_AS(histogram(v, 0), ConfigError);

    std::ostringstream out;
    write_histogram_csv(h, kMeta, out);
    const auto lines = lines_of(out.str());
    CHECK(lines[0] == "# isoval version=0.1.0 config_hash=00ff00ff00ff00ff");
    CHECK(lines[1] == "bin_lower,bin_upper,bin_center,count");
    CHECK(lines[2] == "0,2,1,2");
}

TEST_CASE("selection artifacts") {
    const Dataset train({"f"}, {{"a", Location(10, 20), "", {1.0}},
                                {"b", Location(11, 21), "", {1.0}},
                                {"c,d", Location(12, 22), "", {1.0}}});
    SelectionTrace trace;
    trace.steps = {{{}, 3, 2.0}, {{"b"}, 2, 1.5}, {{"a", "c,d"}, 0, 1.75}};
    trace.mode = RemovalMode::remove_low;
    trace.exhausted = true;

    std::ostringstream csv;
    write_trace_csv(trace, {}, csv);
    auto lines = lines_of(csv.str());
    REQUIRE(lines.size() == 4);
    CHECK(lines[0] == "step,train_size,rmse_after,removed_ids");
    CHECK(lines[1] == "0,3,2,");
    CHECK(lines[3] == "2,0,1.75,\"a;c,d\"");

    const std::string json = trace_to_json(trace, kMeta);
    CHECK(json.find("\"best_step\": 1") != std::string::npos);
    CHECK(json.find("\"exhausted\": true") != std::string::npos);

    std::ostringstream map;
    write_removed_map_csv(train, trace, kMeta, map);
    lines = lines_of(map.str());
    REQUIRE(lines.size() == 5);
    CHECK(lines[1] == "id,lat,lon,removed,removal_step");
    CHECK(lines[2] == "a,10,20,1,2");
    CHECK(lines[3] == "b,11,21,1,1");

    const std::vector<StrategyRow> rows{{"Random Removal", 2.0, 1.5, 3, 0.5}};
    std::ostringstream cmp;
    write_comparison_csv(rows, {}, cmp);
    lines = lines_of(cmp.str());
    CHECK(lines[0] == "Method,Initial RMSE,Best RMSE,Points Removed,Delta RMSE");
    CHECK(lines[1] == "Random Removal,2,1.5,3,0.5");
    CHECK(comparison_to_json(rows).find("\"points_removed\": 3") != std::string::npos);
}

TEST_CASE("rank and species artifacts") {
    RankComparison rc;
    rc.ids = {"a", "b"};
    rc.overlap = {0.0, 1.0};
    rc.jaccard = {0.0, 1.0};
    rc.rank_pairs = {{1, 2}, {2, 1}};
    rc.spearman = -1.0;
    std::ostringstream curves, pairs, species;
    write_rank_curves_csv(rc, {}, curves);
    write_rank_pairs_csv(rc, {}, pairs);
    CHECK(curves.str() == "k,overlap,jaccard\n1,0,0\n2,1,1\n");
    CHECK(pairs.str() == "id,rank_a,rank_b\na,1,2\nb,2,1\n");
    CHECK(rank_comparison_to_json(rc).find("\"spearman\": -1.0") != std::string::npos);

    const std::vector<SpeciesSummary> rows{{"Quercus robur", 2, 1.5, 1.5, 1.0, 2.0}};
    write_species_csv(rows, {}, species);
    CHECK(species.str() == "species,count,mean,median,min,max\nQuercus robur,2,1.5,1.5,1,2\n");
}

TEST_CASE("posterior grid csv") {
    auto grid = std::make_shared<const SpatialGrid>(std::vector<Location>{Location(0, 0), Location(0, 1)},
                                                    std::vector<double>{1, 1});
    const PosteriorGrid pg{grid, {0.25, 0.75}};
    std::ostringstream out;
    write_posterior_csv(pg, {}, out);
    CHECK(out.str() == "lat,lon,prob\n0,0,0.25\n0,1,0.75\n");
}

TEST_CASE("manifest round trip") {
    const std::vector<std::string> ids{"s1", "s7"};
    const std::string text = manifest_to_json(ids);
    CHECK(text.front() == '[');
    CHECK(manifest_from_json(text) == ids);
    CHECK(manifest_from_json("[]").empty());
    CHECK_THROWS_AS(manifest_from_json("{\"a\": 1}"), DataError);
}
