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
#include <numeric>

#include "isoval/error.hpp"
#include "isoval/selection.hpp"
#include "support/support.hpp"

using namespace isoval;
using isoval::testing::Gen;

namespace {

Dataset line_dataset(std::size_t n, double spacing_deg = 1.0) {
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < n; ++i) {
        samples.push_back({"p" + std::to_string(10 + i), Location(0, spacing_deg * static_cast<double>(i)),
                           i % 2 ? "Quercus robur" : "Quercus petraea", {static_cast<double>(i)}});
    }
    return Dataset({"f"}, samples);
}

ValuationResult make_values(const Dataset& d, std::vector<double> values) {
    ValuationResult r;
    r.method = ValuationMethod::exact;
    r.ids = d.ids();
    r.values = std::move(values);
    return r;
}

/// RMSE = 1 + sum over present "bad" points - 0.01 * present count.
FunctionUtility additive_utility(std::size_t n, std::vector<std::size_t> bad) {
    return FunctionUtility(n, [bad = std::move(bad)](std::span<const std::size_t> s) {
        double rmse = 1.0;
        for (std::size_t i : s) rmse += std::find(bad.begin(), bad.end(), i) != bad.end() ? 0.5 : -0.01;
        return -rmse;
    });
}

struct Bench {
    Dataset train;
    Dataset test;
    std::vector<std::string> corrupted;
};

Bench bench(std::uint64_t seed, std::size_t n, CorruptionLayout layout) {
    SyntheticConfig cfg;
    cfg.n_samples = n;
    cfg.features = {default_feature_specs()[0], default_feature_specs()[1]};
    cfg.corrupt_fraction = 0.1;
    cfg.corrupt_magnitude = 8.0;
    cfg.layout = layout;
    cfg.seed = seed;
    auto syn = generate_synthetic(cfg);
    cfg.n_samples = 30;
    cfg.corrupt_fraction = 0.0;
    cfg.id_prefix = "T";
    cfg.seed = seed + 1000;
    return {syn.data, generate_synthetic(cfg).data, syn.corrupted_ids};
}

UtilitySpec gp_spec() {
    UtilitySpec spec;
    spec.gp = {FeatureGpConfig{{KernelFamily::exponential, 800.0, 1.0}, 0.05, {}}};
    return spec;
}

}  // namespace

TEST_CASE("equal values remove in id order") {
    const auto d = line_dataset(5);
    const auto v = additive_utility(5, {});
    SelectionOptions opt;
    opt.stop = {0, 3};
    const auto trace = iterative_select(v, d, make_values(d, std::vector<double>(5, 0.25)), RemovalMode::remove_low, opt);
    REQUIRE(trace.steps.size() == 4);
    CHECK(trace.steps[0].removed_ids.empty());
    CHECK(trace.steps[1].removed_ids == std::vector<std::string>{"p10"});
    CHECK(trace.steps[2].removed_ids == std::vector<std::string>{"p11"});
    CHECK(trace.steps[3].removed_ids == std::vector<std::string>{"p12"});
}

TEST_CASE("remove-low drops harmful points and stops on patience") {
    const auto d = line_dataset(10);
    const auto v = additive_utility(10, {3, 7});
    std::vector<double> values(10, 1.0);
    values[3] = -2.0;
    values[7] = -1.0;
    SelectionOptions opt;
    opt.stop = {2, std::nullopt};
    const auto trace = iterative_select(v, d, make_values(d, values), RemovalMode::remove_low, opt);
    CHECK(trace.steps[1].removed_ids == std::vector<std::string>{"p13"});
    CHECK(trace.steps[2].removed_ids == std::vector<std::string>{"p17"});
    CHECK(trace.steps.size() == 5);
    CHECK(trace.best_step() == 2);
    CHECK(trace.removed_through(2) == 2);
    const auto row = summarize(trace, "x");
    CHECK(row.initial_rmse == doctest::Approx(1.92));
    CHECK(row.best_rmse == doctest::Approx(0.92));
    CHECK(row.points_removed == 2);
    CHECK(row.delta_rmse == doctest::Approx(1.0));

    const auto high = iterative_select(v, d, make_values(d, values), RemovalMode::remove_high, opt);
    CHECK(high.steps[1].removed_ids == std::vector<std::string>{"p10"});
}

TEST_CASE("trace invariants on random games") {
    Gen gen(61);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 3 + gen.index(15);
        const auto d = line_dataset(n, gen.uniform(0.1, 3.0));
        const auto table = gen.utility_table(n);
        const FunctionUtility v(n, [&](std::span<const std::size_t> s) {
            std::size_t m = 0;
            for (std::size_t i : s) m |= std::size_t{1} << i;
            return table[m];
        });
        std::vector<double> values(n);
        for (double& x : values) x = gen.normal();
        SelectionOptions opt;
        opt.stop = {gen.index(4), gen.coin() ? std::optional<std::size_t>(n) : std::nullopt};
        const auto mode = gen.coin() ? RemovalMode::remove_low : RemovalMode::remove_high;
        const auto base = make_values(d, values);

        const auto trace = iterative_select(v, d, base, mode, opt);
        CHECK(trace.steps.front().rmse_after == -table.back());
        for (std::size_t s = 1; s < trace.steps.size(); ++s) {
            CHECK(trace.steps[s].train_size < trace.steps[s - 1].train_size);
        }
        CHECK(trace.exhausted == (trace.steps.back().train_size == 0));

        // Strictly increasing transforms keep the trace.
        auto shifted = base;
        for (double& x : shifted.values) x = std::exp(x) * 3.0 + 1.0;
        const auto again = iterative_select(v, d, shifted, mode, opt);
        REQUIRE(again.steps.size() == trace.steps.size());
        for (std::size_t s = 0; s < trace.steps.size(); ++s) {
            CHECK(again.steps[s].removed_ids == trace.steps[s].removed_ids);
            CHECK(again.steps[s].rmse_after == trace.steps[s].rmse_after);
        }

        // A vanishing radius reproduces pointwise removal.
        const auto tiny = cluster_select(v, d, base, mode, 1e-9, opt);
        REQUIRE(tiny.steps.size() == trace.steps.size());
        for (std::size_t s = 0; s < trace.steps.size(); ++s) {
            CHECK(tiny.steps[s].removed_ids == trace.steps[s].removed_ids);
        }
    }
}

TEST_CASE("emptying the training set is flagged") {
    const auto d = line_dataset(3);
    const auto v = additive_utility(3, {});
    SelectionOptions opt;
    opt.stop = {0, 10};
    const auto trace = iterative_select(v, d, make_values(d, {1, 2, 3}), RemovalMode::remove_low, opt);
    CHECK(trace.exhausted);
    CHECK(trace.steps.size() == 4);
    CHECK(trace.steps.back().train_size == 0);
}

TEST_CASE("cluster removal takes every point within the radius") {
    std::vector<Sample> samples{{"a", Location(0, 0), "", {1.0}},
                                {"b", Location(0, 0.5), "", {1.0}},
                                {"c", Location(0, 5), "", {1.0}},
                                {"d", Location(0, 0.1), "", {1.0}}};
    const Dataset d({"f"}, samples);
    const auto v = additive_utility(4, {0, 3});
    SelectionOptions opt;
    opt.stop = {0, 2};
    const auto trace = cluster_select(v, d, make_values(d, {-1, 0, 1, -0.5}), RemovalMode::remove_low, 20.0, opt);
    REQUIRE(trace.steps.size() == 2);
    CHECK(trace.steps[1].removed_ids == std::vector<std::string>{"a", "d"});
    CHECK(trace.cluster_radius_km == 20.0);
    const auto wide = cluster_select(v, d, make_values(d, {-1, 0, 1, -0.5}), RemovalMode::remove_low, 100.0, opt);
    CHECK(wide.steps[1].removed_ids == std::vector<std::string>{"a", "b", "d"});
    CHECK_THROWS_AS(cluster_select(v, d, make_values(d, {0, 0, 0, 0}), RemovalMode::remove_low, 0.0, opt), ConfigError);
}

TEST_CASE("values must cover the training set") {
    const auto d = line_dataset(3);
    const auto v = additive_utility(3, {});
    auto r = make_values(d, {1, 2, 3});
    r.ids[1] = "zz";
    CHECK_THROWS_AS(iterative_select(v, d, r, RemovalMode::remove_low, {}), DataError);
    r = make_values(d, {1, 2, 3});
    r.ids.pop_back();
    r.values.pop_back();
    CHECK_THROWS_AS(iterative_select(v, d, r, RemovalMode::remove_low, {}), DataError);
}

TEST_CASE("step-0 RMSE equals the standalone model RMSE") {
    const auto b = bench(3, 20, CorruptionLayout::scattered);
    const auto spec = gp_spec();
    const ModelUtility v(b.train, b.test, spec);
    const auto values = random_values(b.train.ids(), 1);
    const auto trace = iterative_select(v, b.train, values, RemovalMode::remove_low, {});
    const double module = forward_rmse(fit_gp(b.train, spec.gp), b.test, v.scales());
    CHECK(std::abs(trace.steps.front().rmse_after - module) <= 1e-12);
}

TEST_CASE("revaluation hook receives the remaining points") {
    const auto d = line_dataset(6);
    const auto v = additive_utility(6, {1});
    std::vector<std::size_t> sizes;
    SelectionOptions opt;
    opt.stop = {0, 4};
    opt.revalue_every = 2;
    opt.revaluer = [&](const Utility& u, std::span<const std::string> ids) {
        sizes.push_back(ids.size());
        return exact_shapley(u, ids);
    };
    const auto trace = iterative_select(v, d, make_values(d, {0, 0, 0, 0, 0, 0}), RemovalMode::remove_low, opt);
    CHECK(sizes == std::vector<std::size_t>{4});
    CHECK(trace.steps.size() == 5);
    opt.revaluer = nullptr;
    CHECK_THROWS_AS(iterative_select(v, d, make_values(d, {0, 0, 0, 0, 0, 0}), RemovalMode::remove_low, opt),
                    ConfigError);
}

TEST_CASE("strategy comparison") {
    const auto b = bench(5, 30, CorruptionLayout::scattered);
    const ModelUtility v(b.train, b.test, gp_spec());
    CompareConfig cfg;
    cfg.budget = 0;
    const auto none = compare_strategies(v, b.train, cfg);
    REQUIRE(none.rows.size() == 3);
    CHECK(none.rows[0].method == "Random Removal");
    CHECK(none.rows[1].method == "Remove Low-Value with LOO");
    CHECK(none.rows[2].method == "Remove Low-Value with TMC-Shapley");
    for (const auto& row : none.rows) {
        CHECK(row.best_rmse == row.initial_rmse);
        CHECK(row.delta_rmse == 0.0);
        CHECK(row.points_removed == 0);
    }
    cfg.budget = 10;
    cfg.tmc.seed = 4;
    const auto some = compare_strategies(v, b.train, cfg);
    for (const auto& row : some.rows) {
        CHECK(row.delta_rmse >= 0.0);
        CHECK(row.points_removed <= 10);
        CHECK(row.initial_rmse == some.rows[0].initial_rmse);
    }
}

TEST_CASE("remove-low on corrupted synthetic data never ends above the start") {
    const auto b = bench(7, 40, CorruptionLayout::scattered);
    const ModelUtility v(b.train, b.test, gp_spec());
    TmcConfig tmc;
    tmc.seed = 2;
    const auto values = tmc_shapley(v, b.train.ids(), tmc);
    const auto trace = iterative_select(v, b.train, values, RemovalMode::remove_low, {});
    CHECK(trace.steps[trace.best_step()].rmse_after <= trace.steps.front().rmse_after);
}

TEST_CASE("cluster removal on regionally corrupted data") {
    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto b = bench(seed, 40, CorruptionLayout::clustered);
        const ModelUtility v(b.train, b.test, gp_spec());
        TmcConfig tmc;
        tmc.seed = seed;
        const auto values = tmc_shapley(v, b.train.ids(), tmc);
        const auto point = iterative_select(v, b.train, values, RemovalMode::remove_low, {});
        const auto cluster = cluster_select(v, b.train, values, RemovalMode::remove_low, 300.0, {});
        wins += cluster.steps[cluster.best_step()].rmse_after <= point.steps[point.best_step()].rmse_after;
    }
    MESSAGE("cluster best <= pointwise best in " << wins << "/10 seeds");
}

TEST_CASE("rank comparison") {
    const auto d = line_dataset(4);
    const auto a = make_values(d, {4, 3, 2, 1});
    const auto self = rank_compare(a, a);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(self.overlap[k] == 1.0);
        CHECK(self.jaccard[k] == 1.0);
    }
    CHECK(self.spearman == 1.0);

    const auto reversed = rank_compare(a, make_values(d, {1, 2, 3, 4}));
    CHECK(reversed.spearman == -1.0);
    CHECK(reversed.overlap[1] == 0.0);
    CHECK(reversed.jaccard[1] == 0.0);
    CHECK(reversed.overlap[3] == 1.0);
    CHECK(reversed.overlap[2] == doctest::Approx(2.0 / 3.0));
    CHECK(reversed.jaccard[2] == doctest::Approx(0.5));

    auto other = make_values(line_dataset(4), {1, 2, 3, 4});
    other.ids[0] = "q";
    CHECK_THROWS_AS(rank_compare(a, other), DataError);
}

TEST_CASE("rank curves ignore input id order") {
    Gen gen(62);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 2 + gen.index(30);
        const auto d = line_dataset(n);
        std::vector<double> va(n);
        std::vector<double> vb(n);
        for (std::size_t i = 0; i < n; ++i) {
            va[i] = gen.normal();
            vb[i] = gen.coin() ? va[i] + gen.normal(0, 0.3) : gen.normal();
        }
        const auto a = make_values(d, va);
        const auto b = make_values(d, vb);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), gen.engine());
        ValuationResult shuffled;
        for (std::size_t i : order) {
            shuffled.ids.push_back(b.ids[i]);
            shuffled.values.push_back(b.values[i]);
        }
        const auto x = rank_compare(a, b);
        const auto y = rank_compare(a, shuffled);
        CHECK(x.overlap == y.overlap);
        CHECK(x.jaccard == y.jaccard);
        CHECK(x.spearman == y.spearman);
        CHECK(x.overlap.back() == 1.0);
        CHECK(x.jaccard.back() == 1.0);
        CHECK(x.spearman >= -1.0);
        CHECK(x.spearman <= 1.0);
    }
}

TEST_CASE("species summaries") {
    const auto d = line_dataset(4);
    const auto single = species_summary(make_values(d, {1, 2, 3, 4}), d);
    CHECK(single.size() == 2);

    std::vector<Sample> samples{{"a", Location(0, 0), "A", {1.0}},
                                {"b", Location(0, 1), "A", {1.0}},
                                {"c", Location(0, 2), "B", {1.0}},
                                {"d", Location(0, 3), "B", {1.0}},
                                {"e", Location(0, 4), "", {1.0}}};
    const Dataset two({"f"}, samples);
    const auto rows = species_summary(make_values(two, {1, 1, 3, 3, 2}), two);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].species == "B");
    CHECK(rows[0].mean == 3.0);
    CHECK(rows[1].species == "(unlabeled)");
    CHECK(rows[2].species == "A");
    CHECK(rows[2].mean == 1.0);
    CHECK(rows[2].count == 2);

    const Dataset mono({"f"}, {samples[0], samples[1]});
    const auto one = species_summary(make_values(mono, {5, 7}), mono);
    REQUIRE(one.size() == 1);
    CHECK(one[0].median == 6.0);
    CHECK(one[0].min == 5.0);
    CHECK(one[0].max == 7.0);
}
