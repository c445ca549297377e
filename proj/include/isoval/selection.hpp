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

#ifndef ISOVAL_SELECTION_HPP
#define ISOVAL_SELECTION_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "isoval/dataset.hpp"
#include "isoval/forest.hpp"
#include "isoval/valuation.hpp"

namespace isoval {

enum class RemovalMode { remove_low, remove_high };

RemovalMode parse_removal_mode(const std::string& name);
std::string to_string(RemovalMode mode);

struct StopRule {
    /// Stop after this many consecutive steps without a new best RMSE; 0 disables.
    std::size_t patience = 5;
    /// Total points removed before stopping; nullopt means N / 2.
    std::optional<std::size_t> max_removals;
};

struct SelectionStep {
    std::vector<std::string> removed_ids;
    std::size_t train_size = 0;
    double rmse_after = 0.0;
};

struct SelectionTrace {
    std::vector<SelectionStep> steps;
    Direction direction = Direction::forward;
    ValuationMethod valuation_method = ValuationMethod::tmc;
    RemovalMode mode = RemovalMode::remove_low;
    std::optional<double> cluster_radius_km;
    /// Set when a removal emptied the training set.
    bool exhausted = false;

    /// Index of the step with the lowest RMSE (earliest on ties).
    std::size_t best_step() const;
    /// Points removed up to and including `step`.
    std::size_t removed_through(std::size_t step) const;
};

/// Recomputes values for the remaining points. Receives the utility restricted to the
/// remaining set and their ids.
using Revaluer = std::function<ValuationResult(const Utility&, std::span<const std::string>)>;

struct SelectionOptions {
    StopRule stop;
    Direction direction = Direction::forward;
    /// Recompute values every k removal steps (0 = never, the single-valuation default).
    std::size_t revalue_every = 0;
    Revaluer revaluer;
};

/// Removes the lowest- (or highest-) valued remaining point one at a time, re-scoring
/// the model after each removal. The RMSE of a subset is -utility.evaluate(subset), with
/// utility indices following `train`. Ties break by ascending id.
SelectionTrace iterative_select(const Utility& utility, const Dataset& train, const ValuationResult& values,
                                RemovalMode mode, const SelectionOptions& options);

/// As iterative_select, but each step also removes every remaining point within
/// `radius_km` of the selected one.
SelectionTrace cluster_select(const Utility& utility, const Dataset& train, const ValuationResult& values,
                              RemovalMode mode, double radius_km, const SelectionOptions& options);

struct StrategyRow {
    std::string method;
    double initial_rmse = 0.0;
    double best_rmse = 0.0;
    std::size_t points_removed = 0;
    double delta_rmse = 0.0;
};

struct StrategyComparison {
    std::vector<StrategyRow> rows;
    std::vector<SelectionTrace> traces;
    std::vector<ValuationResult> values;
};

struct CompareConfig {
    /// Maximum points removed per trace.
    std::size_t budget = 0;
    std::size_t patience = 5;
    std::uint64_t seed = 0;
    TmcConfig tmc;
    std::size_t threads = 1;
};

StrategyRow summarize(const SelectionTrace& trace, std::string method);

/// Remove-low traces driven by random, leave-one-out and TMC-Shapley values.
StrategyComparison compare_strategies(const Utility& utility, const Dataset& train, const CompareConfig& cfg,
                                      Direction direction = Direction::forward);

struct RankComparison {
    std::vector<std::string> ids;
    std::vector<double> overlap;  // k = 1..N at index k-1
    std::vector<double> jaccard;
    std::vector<std::pair<std::size_t, std::size_t>> rank_pairs;  // 1-based ranks, in `ids` order
    double spearman = 0.0;
};

/// 1-based descending ranks, ties broken by ascending id.
std::vector<std::size_t> descending_ranks(const ValuationResult& r);

RankComparison rank_compare(const ValuationResult& a, const ValuationResult& b);

struct SpeciesSummary {
    std::string species;
    std::size_t count = 0;
    double mean = 0.0;
    double median = 0.0;
    double min = 0.0;
    double max = 0.0;
};

/// Groups values by species label (empty labels become "(unlabeled)"), ordered by mean descending.
std::vector<SpeciesSummary> species_summary(const ValuationResult& values, const Dataset& train);

}  // namespace isoval

#endif  // ISOVAL_SELECTION_HPP
