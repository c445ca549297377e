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

#include "isoval/selection.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <unordered_map>

#include "isoval/error.hpp"

namespace isoval {

RemovalMode parse_removal_mode(const std::string& name) {
    if (name == "remove_low") return RemovalMode::remove_low;
    if (name == "remove_high") return RemovalMode::remove_high;
    throw ConfigError("unknown removal mode '" + name + "'");
}

std::string to_string(RemovalMode mode) { return mode == RemovalMode::remove_low ? "remove_low" : "remove_high"; }

std::size_t SelectionTrace::best_step() const {
    std::size_t best = 0;
    for (std::size_t s = 1; s < steps.size(); ++s) {
        if (steps[s].rmse_after < steps[best].rmse_after) best = s;
    }
    return best;
}

std::size_t SelectionTrace::removed_through(std::size_t step) const {
    std::size_t total = 0;
    for (std::size_t s = 0; s <= step && s < steps.size(); ++s) total += steps[s].removed_ids.size();
    return total;
}

namespace {

std::vector<double> values_in_train_order(const ValuationResult& values, const Dataset& train) {
    if (values.ids.size() != train.size()) throw DataError("valuation does not cover the training set");
    std::unordered_map<std::string, double> by_id;
    for (std::size_t i = 0; i < values.ids.size(); ++i) by_id.emplace(values.ids[i], values.values[i]);
    std::vector<double> out;
    out.reserve(train.size());
    for (const Sample& s : train.samples()) {
        const auto it = by_id.find(s.id);
        if (it == by_id.end()) throw DataError("no value for training sample '" + s.id + "'");
        out.push_back(it->second);
    }
    return out;
}

std::vector<std::size_t> members_of(const std::vector<bool>& present) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < present.size(); ++i) {
        if (present[i]) out.push_back(i);
    }
    return out;
}

SelectionTrace run_selection(const Utility& utility, const Dataset& train, const ValuationResult& values,
                             RemovalMode mode, std::optional<double> radius_km, const SelectionOptions& options) {
    const std::size_t n = train.size();
    if (utility.size() != n) throw ConfigError("utility universe does not match the training set");
    std::vector<double> value = values_in_train_order(values, train);
    const auto locations = train.locations();

    SelectionTrace trace;
    trace.direction = options.direction;
    trace.valuation_method = values.method;
    trace.mode = mode;
    trace.cluster_radius_km = radius_km;

    std::vector<bool> present(n, true);
    std::vector<std::size_t> remaining = members_of(present);
    trace.steps.push_back({{}, n, -utility.evaluate(remaining)});

    const std::size_t max_removals = options.stop.max_removals.value_or(n / 2);
    double best = trace.steps.front().rmse_after;
    std::size_t stale = 0;
    std::size_t removed = 0;
    std::size_t step = 0;
    while (removed < max_removals && !remaining.empty()) {
        if (options.revalue_every > 0 && step > 0 && step % options.revalue_every == 0) {
            if (!options.revaluer) throw ConfigError("revalue_every is set but no revaluer was given");
            const SubsetUtility restricted(utility, remaining);
            std::vector<std::string> ids;
            for (std::size_t i : remaining) ids.push_back(train[i].id);
            const ValuationResult fresh = options.revaluer(restricted, ids);
            for (std::size_t k = 0; k < remaining.size(); ++k) value[remaining[k]] = fresh.value_of(ids[k]);
        }

        std::size_t pick = remaining.front();
        for (std::size_t i : remaining) {
            const bool better = mode == RemovalMode::remove_low ? value[i] < value[pick] : value[i] > value[pick];
            if (better || (value[i] == value[pick] && train[i].id < train[pick].id)) pick = i;
        }

        SelectionStep s;
        std::vector<std::size_t> cluster{pick};
        if (radius_km) {
            for (std::size_t i : remaining) {
                if (i != pick && great_circle_distance(locations[pick], locations[i]) <= *radius_km) {
                    cluster.push_back(i);
                }
            }
        }
        for (std::size_t i : cluster) {
            present[i] = false;
            s.removed_ids.push_back(train[i].id);
        }
        remaining = members_of(present);
        removed += cluster.size();
        ++step;
        s.train_size = remaining.size();
        s.rmse_after = -utility.evaluate(remaining);
        trace.steps.push_back(std::move(s));

        if (remaining.empty()) {
            trace.exhausted = true;
            break;
        }
        if (trace.steps.back().rmse_after < best) {
            best = trace.steps.back().rmse_after;
            stale = 0;
        } else if (options.stop.patience > 0 && ++stale >= options.stop.patience) {
            break;
        }
    }
    return trace;
}

}  // namespace

SelectionTrace iterative_select(const Utility& utility, const Dataset& train, const ValuationResult& values,
                                RemovalMode mode, const SelectionOptions& options) {
    return run_selection(utility, train, values, mode, std::nullopt, options);
}

SelectionTrace cluster_select(const Utility& utility, const Dataset& train, const ValuationResult& values,
                              RemovalMode mode, double radius_km, const SelectionOptions& options) {
    if (!(radius_km > 0.0)) throw ConfigError("cluster radius must be positive");
    return run_selection(utility, train, values, mode, radius_km, options);
}

StrategyRow summarize(const SelectionTrace& trace, std::string method) {
    StrategyRow row;
    row.method = std::move(method);
    row.initial_rmse = trace.steps.front().rmse_after;
    const std::size_t best = trace.best_step();
    row.best_rmse = trace.steps[best].rmse_after;
    row.points_removed = trace.removed_through(best);
    row.delta_rmse = row.initial_rmse - row.best_rmse;
    return row;
}

StrategyComparison compare_strategies(const Utility& utility, const Dataset& train, const CompareConfig& cfg,
                                      Direction direction) {
    const auto ids = train.ids();
    SelectionOptions options;
    options.stop = {cfg.patience, cfg.budget};
    options.direction = direction;

    StrategyComparison out;
    out.values.push_back(random_values(ids, cfg.seed));
    out.values.push_back(loo_values(utility, ids, cfg.threads));
    out.values.push_back(tmc_shapley(utility, ids, cfg.tmc));
    const char* names[] = {"Random Removal", "Remove Low-Value with LOO", "Remove Low-Value with TMC-Shapley"};
    for (std::size_t k = 0; k < out.values.size(); ++k) {
        out.traces.push_back(iterative_select(utility, train, out.values[k], RemovalMode::remove_low, options));
        out.rows.push_back(summarize(out.traces.back(), names[k]));
    }
    return out;
}

std::vector<std::size_t> descending_ranks(const ValuationResult& r) {
    std::vector<std::size_t> order(r.values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (r.values[a] != r.values[b]) return r.values[a] > r.values[b];
        return r.ids[a] < r.ids[b];
    });
    std::vector<std::size_t> rank(order.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) rank[order[pos]] = pos + 1;
    return rank;
}

RankComparison rank_compare(const ValuationResult& a, const ValuationResult& b) {
    if (a.ids.size() != b.ids.size()) throw DataError("valuations cover different numbers of samples");
    if (a.ids.empty()) throw DataError("cannot compare empty valuations");
    std::map<std::string, std::pair<std::size_t, std::size_t>> ranks;  // id -> (rank in a, rank in b)
    const auto ra = descending_ranks(a);
    const auto rb = descending_ranks(b);
    for (std::size_t i = 0; i < a.ids.size(); ++i) ranks[a.ids[i]].first = ra[i];
    for (std::size_t i = 0; i < b.ids.size(); ++i) {
        const auto it = ranks.find(b.ids[i]);
        if (it == ranks.end()) throw DataError("sample '" + b.ids[i] + "' appears in only one valuation");
        it->second.second = rb[i];
    }
    if (ranks.size() != a.ids.size()) throw DataError("valuation ids are not unique");

    const std::size_t n = ranks.size();
    RankComparison out;
    std::vector<std::size_t> at_rank_a(n), at_rank_b(n);  // rank-1 -> position in sorted id list
    std::size_t pos = 0;
    long long sum_sq = 0;
    for (const auto& [id, r] : ranks) {
        out.ids.push_back(id);
        out.rank_pairs.push_back(r);
        at_rank_a[r.first - 1] = pos;
        at_rank_b[r.second - 1] = pos;
        const long long d = static_cast<long long>(r.first) - static_cast<long long>(r.second);
        sum_sq += d * d;
        ++pos;
    }

    std::vector<bool> in_a(n, false), in_b(n, false);
    std::size_t shared = 0;
    for (std::size_t k = 1; k <= n; ++k) {
        const std::size_t x = at_rank_a[k - 1];
        in_a[x] = true;
        if (in_b[x]) ++shared;
        const std::size_t y = at_rank_b[k - 1];
        in_b[y] = true;
        if (in_a[y]) ++shared;
        const double kk = static_cast<double>(k);
        out.overlap.push_back(static_cast<double>(shared) / kk);
        out.jaccard.push_back(static_cast<double>(shared) / (2.0 * kk - static_cast<double>(shared)));
    }

    if (n == 1) {
        out.spearman = 1.0;
    } else {
        const long long nn = static_cast<long long>(n);
        out.spearman = 1.0 - 6.0 * static_cast<double>(sum_sq) / static_cast<double>(nn * (nn * nn - 1));
    }
    return out;
}

std::vector<SpeciesSummary> species_summary(const ValuationResult& values, const Dataset& train) {
    std::unordered_map<std::string, const Sample*> by_id;
    for (const Sample& s : train.samples()) by_id.emplace(s.id, &s);
    std::map<std::string, std::vector<double>> groups;
    for (std::size_t i = 0; i < values.ids.size(); ++i) {
        const auto it = by_id.find(values.ids[i]);
        if (it == by_id.end()) throw DataError("valued sample '" + values.ids[i] + "' is not in the dataset");
        const std::string& label = it->second->species;
        groups[label.empty() ? "(unlabeled)" : label].push_back(values.values[i]);
    }
    std::vector<SpeciesSummary> out;
    for (auto& [species, v] : groups) {
        std::sort(v.begin(), v.end());
        SpeciesSummary s;
        s.species = species;
        s.count = v.size();
        s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        const std::size_t m = v.size();
        s.median = m % 2 == 1 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
        s.min = v.front();
        s.max = v.back();
        out.push_back(std::move(s));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const SpeciesSummary& a, const SpeciesSummary& b) { return a.mean > b.mean; });
    return out;
}

}  // namespace isoval
