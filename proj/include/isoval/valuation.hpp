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

#ifndef ISOVAL_VALUATION_HPP
#define ISOVAL_VALUATION_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "isoval/dataset.hpp"
#include "isoval/forest.hpp"
#include "isoval/isoscape.hpp"

namespace isoval {

// --- Utilities ----------------------------------------------------------------

/// Set function v(S) over subsets of a fixed universe {0, ..., size()-1}.
/// `subset` is always sorted ascending without duplicates. Implementations must be
/// pure and safe to call concurrently.
class Utility {
public:
    virtual ~Utility() = default;
    virtual std::size_t size() const = 0;
    virtual double evaluate(std::span<const std::size_t> subset) const = 0;

    double full() const;
    double empty() const { return evaluate({}); }
};

/// Wraps an arbitrary callable. Handy for hand-specified games.
class FunctionUtility final : public Utility {
public:
    using Fn = std::function<double(std::span<const std::size_t>)>;
    FunctionUtility(std::size_t size, Fn fn) : size_(size), fn_(std::move(fn)) {}
    std::size_t size() const override { return size_; }
    double evaluate(std::span<const std::size_t> subset) const override { return fn_(subset); }

private:
    std::size_t size_;
    Fn fn_;
};

/// v(S) looked up by bitmask (bit i set iff i in S); table.size() must be 2^n.
class TableUtility final : public Utility {
public:
    explicit TableUtility(std::vector<double> table);
    std::size_t size() const override { return size_; }
    double evaluate(std::span<const std::size_t> subset) const override;

private:
    std::size_t size_;
    std::vector<double> table_;
};

/// Memoizes another utility, keyed by subset membership.
class CachedUtility final : public Utility {
public:
    explicit CachedUtility(const Utility& inner) : inner_(inner) {}
    std::size_t size() const override { return inner_.size(); }
    double evaluate(std::span<const std::size_t> subset) const override;
    std::size_t cache_size() const;
    std::size_t inner_calls() const;

private:
    struct KeyHash {
        std::size_t operator()(const std::vector<std::uint64_t>& key) const noexcept;
    };
    const Utility& inner_;
    mutable std::mutex mutex_;
    mutable std::unordered_map<std::vector<std::uint64_t>, double, KeyHash> cache_;
    mutable std::size_t inner_calls_ = 0;
};

/// Restricts a utility to the members listed in `members` (universe indices, ascending):
/// local index i maps to members[i].
class SubsetUtility final : public Utility {
public:
    SubsetUtility(const Utility& inner, std::vector<std::size_t> members);
    std::size_t size() const override { return members_.size(); }
    double evaluate(std::span<const std::size_t> subset) const override;

private:
    const Utility& inner_;
    std::vector<std::size_t> members_;
};

enum class ModelKind { gp, forest };

ModelKind parse_model_kind(const std::string& name);
std::string to_string(ModelKind kind);

/// What to train and how to score it. Utility is -RMSE on the test set: standardized
/// feature RMSE forward, posterior RMSE (GP) or point-error RMSE (forest) backward.
struct UtilitySpec {
    ModelKind model_kind = ModelKind::gp;
    Direction direction = Direction::forward;
    /// One entry per feature, or one shared entry.
    std::vector<FeatureGpConfig> gp{FeatureGpConfig{}};
    ForestConfig forest;
    /// Backward GP only.
    std::shared_ptr<const SpatialGrid> grid;
    /// Per-cell prior; empty means the grid's area weights.
    std::vector<double> prior;
};

/// v(S) = -RMSE of the model trained on train[S] and scored on `test`.
///
/// Empty subsets use a data-free baseline: forward predicts the full training mean of
/// each feature; backward GP returns the prior itself as the posterior; backward forest
/// predicts the training centroid. Forward errors are always standardized by the full
/// training set's per-feature standard deviations so utilities are comparable across
/// subsets.
class ModelUtility final : public Utility {
public:
    ModelUtility(Dataset train, Dataset test, UtilitySpec spec);

    std::size_t size() const override { return train_.size(); }
    double evaluate(std::span<const std::size_t> subset) const override;

    /// RMSE (positive) of the model trained on train[subset].
    double rmse(std::span<const std::size_t> subset) const;
    double empty_rmse() const;

    const Dataset& train() const noexcept { return train_; }
    const Dataset& test() const noexcept { return test_; }
    const UtilitySpec& spec() const noexcept { return spec_; }
    const std::vector<double>& scales() const noexcept { return scales_; }

private:
    double gp_rmse(std::span<const std::size_t> subset) const;
    double forest_rmse_of(std::span<const std::size_t> subset) const;

    Dataset train_;
    Dataset test_;
    UtilitySpec spec_;
    std::vector<double> scales_;
    std::vector<double> train_means_;
    std::vector<Location> train_locations_;
    Eigen::MatrixXd train_targets_;
    Eigen::MatrixXd test_targets_;
    Eigen::MatrixXd train_train_;
    Eigen::MatrixXd train_test_;
    Eigen::MatrixXd train_grid_;
    Eigen::MatrixXd test_grid_sq_;
    std::vector<double> prior_;
    double empty_rmse_ = 0.0;
};

// --- Valuation results ---------------------------------------------------------

enum class ValuationMethod { exact, tmc, beta, loo, random };

ValuationMethod parse_valuation_method(const std::string& name);
std::string to_string(ValuationMethod method);

struct ConvergencePoint {
    std::size_t iteration = 0;
    double max_change = 0.0;
};

struct ValuationResult {
    ValuationMethod method = ValuationMethod::exact;
    std::vector<std::string> ids;
    std::vector<double> values;
    std::size_t permutations_used = 0;
    std::vector<ConvergencePoint> convergence_history;
    std::uint64_t seed = 0;
    std::optional<double> utility_full;
    std::optional<double> utility_empty;

    double value_of(const std::string& id) const;
    double mean() const;
};

// --- Estimators -----------------------------------------------------------------

struct ExactConfig {
    std::size_t max_players = 12;
    std::size_t threads = 1;
};

/// Shapley values by enumerating and memoizing all 2^N subset utilities.
ValuationResult exact_shapley(const Utility& v, std::span<const std::string> ids, const ExactConfig& cfg = {});

struct TmcConfig {
    /// Truncation threshold on |v(D) - v_prefix|; nullopt means 0.01 * |v(D)|.
    std::optional<double> tolerance;
    /// Permutations between convergence comparisons; 0 means N.
    std::size_t window = 0;
    /// Converged once mean|phi_t - phi_{t-window}| / mean|phi_t| falls below this.
    double rel_change = 0.01;
    /// 0 means 3N.
    std::size_t max_permutations = 0;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

/// Truncated Monte Carlo Shapley. Permutation t draws from derive_seed(seed, t) and the
/// running means are folded in permutation order, so any thread count gives the same result.
ValuationResult tmc_shapley(const Utility& v, std::span<const std::string> ids, const TmcConfig& cfg = {});

struct BetaConfig {
    double alpha = 1.0;
    double beta = 1.0;
    std::size_t iterations = 100;
    /// Use the inverse binomial coefficient in the weights, which does not reduce to
    /// Data Shapley at alpha = beta = 1. Kept for comparison only.
    bool paper_literal_weights = false;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

/// Cardinality weights w_1..w_n, computed in log-gamma space.
std::vector<double> beta_weights(std::size_t n, double alpha, double beta, bool paper_literal = false);

/// Monte Carlo Beta Shapley with uniform cardinality sampling.
ValuationResult beta_shapley(const Utility& v, std::span<const std::string> ids, const BetaConfig& cfg = {});

/// value_i = v(D) - v(D \ {i}).
ValuationResult loo_values(const Utility& v, std::span<const std::string> ids, std::size_t threads = 1);

/// Uniform [0, 1) draws; only meaningful as a removal order.
ValuationResult random_values(std::span<const std::string> ids, std::uint64_t seed);

}  // namespace isoval

#endif  // ISOVAL_VALUATION_HPP
