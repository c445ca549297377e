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

#include "isoval/valuation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>

#include "isoval/error.hpp"
#include "isoval/parallel.hpp"
#include "isoval/random.hpp"

namespace isoval {

// --- Utilities ----------------------------------------------------------------

double Utility::full() const {
    std::vector<std::size_t> all(size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return evaluate(all);
}

TableUtility::TableUtility(std::vector<double> table) : size_(0), table_(std::move(table)) {
    if (table_.empty() || !std::has_single_bit(table_.size())) {
        throw ConfigError("utility table size must be a power of two");
    }
    size_ = static_cast<std::size_t>(std::countr_zero(table_.size()));
}

double TableUtility::evaluate(std::span<const std::size_t> subset) const {
    std::size_t mask = 0;
    for (std::size_t i : subset) mask |= std::size_t{1} << i;
    return table_[mask];
}

std::size_t CachedUtility::KeyHash::operator()(const std::vector<std::uint64_t>& key) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint64_t w : key) {
        h ^= w + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
}

double CachedUtility::evaluate(std::span<const std::size_t> subset) const {
    std::vector<std::uint64_t> key((inner_.size() + 63) / 64, 0);
    for (std::size_t i : subset) key[i / 64] |= std::uint64_t{1} << (i % 64);
    {
        std::lock_guard lock(mutex_);
        const auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }
    const double value = inner_.evaluate(subset);
    std::lock_guard lock(mutex_);
    ++inner_calls_;
    cache_.emplace(std::move(key), value);
    return value;
}

std::size_t CachedUtility::cache_size() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
}

std::size_t CachedUtility::inner_calls() const {
    std::lock_guard lock(mutex_);
    return inner_calls_;
}

SubsetUtility::SubsetUtility(const Utility& inner, std::vector<std::size_t> members)
    : inner_(inner), members_(std::move(members)) {
    if (!std::is_sorted(members_.begin(), members_.end())) throw ConfigError("subset members must be ascending");
    for (std::size_t m : members_) {
        if (m >= inner_.size()) throw ConfigError("subset member outside the utility universe");
    }
}

double SubsetUtility::evaluate(std::span<const std::size_t> subset) const {
    std::vector<std::size_t> mapped;
    mapped.reserve(subset.size());
    for (std::size_t i : subset) mapped.push_back(members_.at(i));
    return inner_.evaluate(mapped);
}

ModelKind parse_model_kind(const std::string& name) {
    if (name == "gp") return ModelKind::gp;
    if (name == "forest") return ModelKind::forest;
    throw ConfigError("unknown model kind '" + name + "'");
}

std::string to_string(ModelKind kind) { return kind == ModelKind::gp ? "gp" : "forest"; }

namespace {

std::vector<Eigen::Index> to_eigen_indices(std::span<const std::size_t> subset) {
    std::vector<Eigen::Index> idx;
    idx.reserve(subset.size());
    for (std::size_t i : subset) idx.push_back(static_cast<Eigen::Index>(i));
    return idx;
}

}  // namespace

ModelUtility::ModelUtility(Dataset train, Dataset test, UtilitySpec spec)
    : train_(std::move(train)), test_(std::move(test)), spec_(std::move(spec)) {
    if (train_.feature_names() != test_.feature_names()) {
        throw DataError("training and test sets have different features");
    }
    train_targets_ = feature_matrix(train_);
    test_targets_ = feature_matrix(test_);
    train_locations_ = train_.locations();
    const auto test_locations = test_.locations();

    for (Eigen::Index j = 0; j < train_targets_.cols(); ++j) {
        const Eigen::VectorXd col = train_targets_.col(j);
        scales_.push_back(sample_sd(std::span<const double>(col.data(), static_cast<std::size_t>(col.size()))));
        train_means_.push_back(col.mean());
    }

    if (spec_.model_kind == ModelKind::gp) {
        if (spec_.gp.size() != 1 && spec_.gp.size() != train_.feature_count()) {
            throw ConfigError("need one GP configuration per feature or a single shared one");
        }
        for (const auto& cfg : spec_.gp) cfg.kernel.validate();
        train_train_ = distance_matrix(train_locations_, train_locations_);
    } else {
        spec_.forest.validate();
    }

    if (spec_.direction == Direction::forward) {
        for (std::size_t j = 0; j < scales_.size(); ++j) {
            if (!(scales_[j] > 0.0)) {
                throw DataError("feature '" + train_.feature_names()[j] + "' has zero training standard deviation");
            }
        }
        if (spec_.model_kind == ModelKind::gp) train_test_ = distance_matrix(train_locations_, test_locations);
        PredictionTable baseline{Eigen::MatrixXd(test_targets_.rows(), test_targets_.cols()), {}};
        for (Eigen::Index j = 0; j < baseline.means.cols(); ++j) {
            baseline.means.col(j).setConstant(train_means_[static_cast<std::size_t>(j)]);
        }
        empty_rmse_ = forward_rmse(baseline, test_targets_, scales_);
    } else if (spec_.model_kind == ModelKind::gp) {
        if (!spec_.grid) throw ConfigError("backward GP utility needs a spatial grid");
        prior_ = spec_.prior.empty() ? spec_.grid->weights() : spec_.prior;
        if (prior_.size() != spec_.grid->size()) throw ConfigError("prior does not match the grid");
        train_grid_ = distance_matrix(train_locations_, spec_.grid->cells());
        test_grid_sq_ = distance_matrix(test_locations, spec_.grid->cells()).array().square();
        const std::vector<double> flat = normalize_log_posterior(std::vector<double>(prior_.size(), 0.0), prior_);
        double total = 0.0;
        for (Eigen::Index t = 0; t < test_grid_sq_.rows(); ++t) {
            double acc = 0.0;
            for (Eigen::Index c = 0; c < test_grid_sq_.cols(); ++c) {
                acc += flat[static_cast<std::size_t>(c)] * test_grid_sq_(t, c);
            }
            total += std::sqrt(acc);
        }
        empty_rmse_ = total / static_cast<double>(test_grid_sq_.rows());
    } else {
        double lat = 0.0, lon = 0.0;
        for (const Location& x : train_locations_) {
            lat += x.lat();
            lon += x.lon();
        }
        const Location centroid(lat / static_cast<double>(train_locations_.size()),
                                lon / static_cast<double>(train_locations_.size()));
        double acc = 0.0;
        for (const Location& x : test_locations) {
            const double d = great_circle_distance(centroid, x);
            acc += d * d;
        }
        empty_rmse_ = std::sqrt(acc / static_cast<double>(test_locations.size()));
    }
}

double ModelUtility::empty_rmse() const { return empty_rmse_; }

double ModelUtility::gp_rmse(std::span<const std::size_t> subset) const {
    const auto idx = to_eigen_indices(subset);
    std::vector<Location> locations;
    locations.reserve(subset.size());
    for (std::size_t i : subset) locations.push_back(train_locations_[i]);
    const Eigen::MatrixXd distances = train_train_(idx, idx);
    const Eigen::MatrixXd targets = train_targets_(idx, Eigen::all);
    const IsoscapeModel model = fit_gp(std::move(locations), distances, targets, train_.feature_names(), spec_.gp);
    if (spec_.direction == Direction::forward) {
        const Eigen::MatrixXd cross = train_test_(idx, Eigen::all);
        return forward_rmse(predict_many(model, cross), test_targets_, scales_);
    }
    const Eigen::MatrixXd cross = train_grid_(idx, Eigen::all);
    return backward_rmse(predict_many(model, cross), test_targets_, test_grid_sq_, prior_);
}

double ModelUtility::forest_rmse_of(std::span<const std::size_t> subset) const {
    const ForestModel model = fit_forest(train_.subset(subset), spec_.direction, spec_.forest);
    return forest_rmse(model, test_, spec_.direction == Direction::forward ? std::span<const double>(scales_)
                                                                            : std::span<const double>());
}

double ModelUtility::rmse(std::span<const std::size_t> subset) const {
    if (subset.empty()) return empty_rmse_;
    try {
        return spec_.model_kind == ModelKind::gp ? gp_rmse(subset) : forest_rmse_of(subset);
    } catch (const NumericalError& e) {
        std::ostringstream msg;
        msg << e.what() << " (training subset of " << subset.size() << " samples starting at '"
            << train_[subset.front()].id << "')";
        throw NumericalError(msg.str());
    }
}

double ModelUtility::evaluate(std::span<const std::size_t> subset) const { return -rmse(subset); }

// --- Results ------------------------------------------------------------------

ValuationMethod parse_valuation_method(const std::string& name) {
    if (name == "exact") return ValuationMethod::exact;
    if (name == "tmc") return ValuationMethod::tmc;
    if (name == "beta") return ValuationMethod::beta;
    if (name == "loo") return ValuationMethod::loo;
    if (name == "random") return ValuationMethod::random;
    throw ConfigError("unknown valuation method '" + name + "'");
}

std::string to_string(ValuationMethod method) {
    switch (method) {
        case ValuationMethod::exact: return "exact";
        case ValuationMethod::tmc: return "tmc";
        case ValuationMethod::beta: return "beta";
        case ValuationMethod::loo: return "loo";
        case ValuationMethod::random: return "random";
    }
    return "unknown";
}

double ValuationResult::value_of(const std::string& id) const {
    const auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) throw DataError("no value for sample '" + id + "'");
    return values[static_cast<std::size_t>(it - ids.begin())];
}

double ValuationResult::mean() const {
    if (values.empty()) return 0.0;
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

// --- Estimators -------------------------------------------------------------------

namespace {

void check_ids(const Utility& v, std::span<const std::string> ids) {
    if (ids.size() != v.size()) throw ConfigError("id list does not match the utility universe");
    if (ids.empty()) throw ConfigError("cannot value an empty training set");
}

ValuationResult make_result(ValuationMethod method, std::span<const std::string> ids, std::uint64_t seed) {
    ValuationResult r;
    r.method = method;
    r.ids.assign(ids.begin(), ids.end());
    r.values.assign(ids.size(), 0.0);
    r.seed = seed;
    return r;
}

void insert_sorted(std::vector<std::size_t>& v, std::size_t x) { v.insert(std::upper_bound(v.begin(), v.end(), x), x); }

/// Marginal contributions along one random permutation, with truncation.
std::vector<double> permutation_marginals(const Utility& v, std::uint64_t seed, double v_full, double v_empty,
                                          double tolerance) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<double> marginals(n, 0.0);
    std::vector<std::size_t> prefix;
    prefix.reserve(n);
    double previous = v_empty;
    for (std::size_t j = 0; j < n; ++j) {
        // Once the running utility is within tolerance of v(D) every later position
        // reuses it, so the remaining marginals are all zero.
        if (std::abs(v_full - previous) < tolerance) break;
        insert_sorted(prefix, order[j]);
        const double current = j + 1 == n ? v_full : v.evaluate(prefix);
        marginals[order[j]] = current - previous;
        previous = current;
    }
    return marginals;
}

double mean_abs(const std::vector<double>& x) {
    double s = 0.0;
    for (double e : x) s += std::abs(e);
    return s / static_cast<double>(x.size());
}

}  // namespace

ValuationResult exact_shapley(const Utility& v, std::span<const std::string> ids, const ExactConfig& cfg) {
    check_ids(v, ids);
    const std::size_t n = v.size();
    constexpr std::size_t kHardCap = 24;
    if (n > std::min(cfg.max_players, kHardCap)) {
        std::ostringstream msg;
        msg << "exact Shapley enumerates 2^N subsets and is capped at N=" << std::min(cfg.max_players, kHardCap)
            << " (got N=" << n << "); use the tmc method instead";
        throw ConfigError(msg.str());
    }
    const std::size_t subsets = std::size_t{1} << n;
    std::vector<double> table(subsets);
    parallel_for(subsets, cfg.threads, [&](std::size_t mask) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (std::size_t{1} << i)) members.push_back(i);
        }
        table[mask] = v.evaluate(members);
    });

    // weight[s] = s! (n - s - 1)! / n! = 1 / (n * C(n-1, s))
    std::vector<double> weight(n);
    double binom = 1.0;
    for (std::size_t s = 0; s < n; ++s) {
        weight[s] = 1.0 / (static_cast<double>(n) * binom);
        binom = binom * static_cast<double>(n - 1 - s) / static_cast<double>(s + 1);
    }

    ValuationResult r = make_result(ValuationMethod::exact, ids, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t bit = std::size_t{1} << i;
        double phi = 0.0;
        for (std::size_t mask = 0; mask < subsets; ++mask) {
            if (mask & bit) continue;
            phi += weight[static_cast<std::size_t>(std::popcount(mask))] * (table[mask | bit] - table[mask]);
        }
        r.values[i] = phi;
    }
    r.permutations_used = subsets;
    r.utility_full = table[subsets - 1];
    r.utility_empty = table[0];
    return r;
}

ValuationResult tmc_shapley(const Utility& utility, std::span<const std::string> ids, const TmcConfig& cfg) {
    check_ids(utility, ids);
    const CachedUtility v(utility);
    const std::size_t n = v.size();
    const double v_full = v.full();
    const double v_empty = v.empty();
    const double tolerance = cfg.tolerance.value_or(0.01 * std::abs(v_full));
    if (!(tolerance >= 0.0)) throw ConfigError("TMC tolerance must be non-negative");
    if (!(cfg.rel_change >= 0.0)) throw ConfigError("TMC rel_change must be non-negative");
    const std::size_t window = cfg.window > 0 ? cfg.window : n;
    const std::size_t max_perms = cfg.max_permutations > 0 ? cfg.max_permutations : 3 * n;

    ValuationResult r = make_result(ValuationMethod::tmc, ids, cfg.seed);
    r.utility_full = v_full;
    r.utility_empty = v_empty;
    std::vector<double>& phi = r.values;
    std::deque<std::vector<double>> snapshots{phi};  // phi after t - window .. t

    const std::size_t batch = std::max<std::size_t>(1, resolve_threads(cfg.threads));
    std::size_t t = 0;
    bool converged = false;
    while (!converged && t < max_perms) {
        const std::size_t count = std::min(batch, max_perms - t);
        std::vector<std::vector<double>> marginals(count);
        parallel_for(count, cfg.threads, [&](std::size_t b) {
            marginals[b] = permutation_marginals(v, derive_seed(cfg.seed, t + b + 1), v_full, v_empty, tolerance);
        });
        for (std::size_t b = 0; b < count && !converged; ++b) {
            ++t;
            const double keep = static_cast<double>(t - 1) / static_cast<double>(t);
            const double step = 1.0 / static_cast<double>(t);
            double max_change = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double updated = keep * phi[i] + step * marginals[b][i];
                max_change = std::max(max_change, std::abs(updated - phi[i]));
                phi[i] = updated;
            }
            r.convergence_history.push_back({t, max_change});
            snapshots.push_back(phi);
            if (snapshots.size() > window + 1) snapshots.pop_front();
            if (t >= window) {
                const std::vector<double>& old = snapshots.front();
                double diff = 0.0;
                for (std::size_t i = 0; i < n; ++i) diff += std::abs(phi[i] - old[i]);
                diff /= static_cast<double>(n);
                const double scale = mean_abs(phi);
                converged = scale > 0.0 ? diff / scale < cfg.rel_change : diff == 0.0;
            }
        }
    }
    r.permutations_used = t;
    return r;
}

std::vector<double> beta_weights(std::size_t n, double alpha, double beta, bool paper_literal) {
    if (!(alpha > 0.0) || !(beta > 0.0)) throw ConfigError("Beta Shapley parameters must be positive");
    if (n == 0) throw ConfigError("Beta Shapley weights need n >= 1");
    auto lbeta = [](double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); };
    auto lchoose = [](double m, double k) { return std::lgamma(m + 1) - std::lgamma(k + 1) - std::lgamma(m - k + 1); };
    const double nn = static_cast<double>(n);
    std::vector<double> w(n);
    for (std::size_t k = 1; k <= n; ++k) {
        const double kk = static_cast<double>(k);
        const double binom = lchoose(nn - 1, kk - 1);
        const double log_w =
            std::log(nn) + (paper_literal ? -binom : binom) + lbeta(kk + beta - 1, nn - kk + alpha) - lbeta(alpha, beta);
        w[k - 1] = std::exp(log_w);
    }
    return w;
}

ValuationResult beta_shapley(const Utility& utility, std::span<const std::string> ids, const BetaConfig& cfg) {
    check_ids(utility, ids);
    if (cfg.iterations == 0) throw ConfigError("Beta Shapley needs at least one iteration");
    const CachedUtility v(utility);
    const std::size_t n = v.size();
    const std::vector<double> weights = beta_weights(n, cfg.alpha, cfg.beta, cfg.paper_literal_weights);

    ValuationResult r = make_result(ValuationMethod::beta, ids, cfg.seed);
    r.utility_full = v.full();
    r.utility_empty = v.empty();
    std::vector<double>& psi = r.values;
    std::vector<double> contribution(n);
    for (std::size_t round = 1; round <= cfg.iterations; ++round) {
        const std::uint64_t round_seed = derive_seed(cfg.seed, round);
        parallel_for(n, cfg.threads, [&](std::size_t j) {
            Rng rng(derive_seed(round_seed, j));
            std::uniform_int_distribution<std::size_t> cardinality(1, n);
            const std::size_t k = cardinality(rng);
            std::vector<std::size_t> others;
            others.reserve(n - 1);
            for (std::size_t i = 0; i < n; ++i) {
                if (i != j) others.push_back(i);
            }
            for (std::size_t s = 0; s + 1 < k; ++s) {
                std::uniform_int_distribution<std::size_t> pick(s, others.size() - 1);
                std::swap(others[s], others[pick(rng)]);
            }
            std::vector<std::size_t> subset(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k - 1));
            std::sort(subset.begin(), subset.end());
            const double without = v.evaluate(subset);
            insert_sorted(subset, j);
            const double with = v.evaluate(subset);
            contribution[j] = weights[k - 1] * (with - without);
        });
        const double keep = static_cast<double>(round - 1) / static_cast<double>(round);
        const double step = 1.0 / static_cast<double>(round);
        double max_change = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double updated = keep * psi[j] + step * contribution[j];
            max_change = std::max(max_change, std::abs(updated - psi[j]));
            psi[j] = updated;
        }
        r.convergence_history.push_back({round, max_change});
    }
    r.permutations_used = cfg.iterations;
    return r;
}

ValuationResult loo_values(const Utility& v, std::span<const std::string> ids, std::size_t threads) {
    check_ids(v, ids);
    const std::size_t n = v.size();
    if (n < 2) throw ConfigError("leave-one-out values need at least 2 samples");
    ValuationResult r = make_result(ValuationMethod::loo, ids, 0);
    const double v_full = v.full();
    parallel_for(n, threads, [&](std::size_t i) {
        std::vector<std::size_t> rest;
        rest.reserve(n - 1);
        for (std::size_t k = 0; k < n; ++k) {
            if (k != i) rest.push_back(k);
        }
        r.values[i] = v_full - v.evaluate(rest);
    });
    r.permutations_used = n;
    r.utility_full = v_full;
    r.utility_empty = v.empty();
    return r;
}

ValuationResult random_values(std::span<const std::string> ids, std::uint64_t seed) {
    ValuationResult r = make_result(ValuationMethod::random, ids, seed);
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (double& x : r.values) x = unit(rng);
    r.permutations_used = 1;
    return r;
}

}  // namespace isoval
