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

#include "isoval/isoscape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "isoval/error.hpp"

namespace isoval {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kVarianceClampFloor = -1e-10;
// A factorization whose smallest squared pivot falls below this fraction of the largest
// diagonal entry is treated as singular.
constexpr double kPivotFloor = 1e-13;

Eigen::MatrixXd kernel_matrix(const KernelConfig& kernel, const Eigen::MatrixXd& distances) {
    return distances.unaryExpr([&kernel](double d) { return kernel(d); });
}

struct Factorization {
    Eigen::MatrixXd lower;
    double jitter = 0.0;
};

std::optional<Factorization> factorize(const Eigen::MatrixXd& gram, double noise_variance) {
    const double max_diag = gram.diagonal().maxCoeff() + noise_variance;
    for (double jitter : kJitterLadder) {
        Eigen::MatrixXd a = gram;
        a.diagonal().array() += noise_variance + jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(a);
        if (llt.info() != Eigen::Success) continue;
        Eigen::MatrixXd lower = llt.matrixL();
        const double min_pivot = lower.diagonal().minCoeff();
        if (!(min_pivot * min_pivot > kPivotFloor * max_diag)) continue;
        return Factorization{std::move(lower), jitter};
    }
    return std::nullopt;
}

double clamp_variance(double v, const std::string& feature) {
    if (v >= 0.0) return v;
    if (v >= kVarianceClampFloor) return 0.0;
    std::ostringstream msg;
    msg << "negative predictive variance " << v << " for feature '" << feature << "'";
    throw NumericalError(msg.str());
}

}  // namespace

KernelFamily parse_kernel_family(const std::string& name) {
    if (name == "exponential") return KernelFamily::exponential;
    if (name == "matern32") return KernelFamily::matern32;
    throw ConfigError("unknown kernel family '" + name + "'");
}

std::string to_string(KernelFamily family) {
    return family == KernelFamily::exponential ? "exponential" : "matern32";
}

double KernelConfig::operator()(double great_circle_km) const noexcept {
    if (family == KernelFamily::exponential) {
        return signal_variance * std::exp(-great_circle_km / lengthscale_km);
    }
    const double chord = 2.0 * kEarthRadiusKm * std::sin(great_circle_km / (2.0 * kEarthRadiusKm));
    const double r = std::numbers::sqrt3 * chord / lengthscale_km;
    return signal_variance * (1.0 + r) * std::exp(-r);
}

void KernelConfig::validate() const {
    if (!(lengthscale_km > 0.0) || !std::isfinite(lengthscale_km)) {
        throw ConfigError("kernel lengthscale must be positive");
    }
    if (!(signal_variance > 0.0) || !std::isfinite(signal_variance)) {
        throw ConfigError("kernel signal variance must be positive");
    }
}

IsoscapeModel::IsoscapeModel(std::vector<Location> train_locations, std::vector<FeatureGp> features)
    : train_locations_(std::move(train_locations)), features_(std::move(features)) {}

Eigen::MatrixXd distance_matrix(std::span<const Location> a, std::span<const Location> b) {
    Eigen::MatrixXd d(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = great_circle_distance(a[i], b[j]);
        }
    }
    return d;
}

double sample_sd(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 2) return 0.0;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(n - 1));
}

IsoscapeModel fit_gp(std::vector<Location> locations, const Eigen::MatrixXd& distances,
                     const Eigen::MatrixXd& targets, std::span<const std::string> feature_names,
                     std::span<const FeatureGpConfig> configs) {
    const auto n = static_cast<Eigen::Index>(locations.size());
    if (n == 0) throw DataError("cannot fit a GP on an empty training set");
    if (distances.rows() != n || distances.cols() != n || targets.rows() != n) {
        throw ConfigError("GP fit inputs have inconsistent sizes");
    }
    const auto n_features = static_cast<std::size_t>(targets.cols());
    if (feature_names.size() != n_features) throw ConfigError("feature name count does not match targets");
    if (configs.size() != n_features && configs.size() != 1) {
        throw ConfigError("need one GP configuration per feature or a single shared one");
    }

    std::vector<FeatureGp> features;
    features.reserve(n_features);
    const KernelConfig* cached_kernel = nullptr;
    double cached_noise = 0.0;
    Eigen::MatrixXd gram;
    std::optional<Factorization> factor;
    for (std::size_t j = 0; j < n_features; ++j) {
        const FeatureGpConfig& cfg = configs.size() == 1 ? configs[0] : configs[j];
        cfg.kernel.validate();
        if (!(cfg.noise_variance >= 0.0)) throw ConfigError("noise variance must be non-negative");

        const Eigen::VectorXd y = targets.col(static_cast<Eigen::Index>(j));
        FeatureGp gp;
        gp.name = feature_names[j];
        gp.config = cfg;
        gp.mean = cfg.mean.kind == MeanPolicy::Kind::training_mean ? y.mean() : cfg.mean.value;
        gp.training_sd = sample_sd(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));

        // Features sharing a kernel and noise level share one factorization.
        if (cached_kernel == nullptr || !(*cached_kernel == cfg.kernel) || cached_noise != cfg.noise_variance) {
            gram = kernel_matrix(cfg.kernel, distances);
            factor = factorize(gram, cfg.noise_variance);
            if (!factor) {
                throw NumericalError("covariance matrix for feature '" + gp.name +
                                     "' is not positive definite after maximum jitter");
            }
            cached_kernel = &cfg.kernel;
            cached_noise = cfg.noise_variance;
        }
        gp.jitter = factor->jitter;
        gp.factor = factor->lower;
        const Eigen::VectorXd centered = y.array() - gp.mean;
        const Eigen::VectorXd half = gp.factor.triangularView<Eigen::Lower>().solve(centered);
        gp.weights = gp.factor.transpose().triangularView<Eigen::Upper>().solve(half);
        if (!gp.weights.allFinite()) throw NumericalError("non-finite GP weights for feature '" + gp.name + "'");
        features.push_back(std::move(gp));
    }
    return IsoscapeModel(std::move(locations), std::move(features));
}

Eigen::MatrixXd feature_matrix(const Dataset& d) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(d.size()), static_cast<Eigen::Index>(d.feature_count()));
    for (std::size_t j = 0; j < d.feature_count(); ++j) {
        const auto column = d.feature_column(j);
        for (std::size_t i = 0; i < column.size(); ++i) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = column[i];
        }
    }
    return m;
}

IsoscapeModel fit_gp(const Dataset& train, std::span<const FeatureGpConfig> configs) {
    auto locations = train.locations();
    const Eigen::MatrixXd distances = distance_matrix(locations, locations);
    const Eigen::MatrixXd targets = feature_matrix(train);
    return fit_gp(std::move(locations), distances, targets, train.feature_names(), configs);
}

IsoscapeModel fit_gp(const Dataset& train, const KernelConfig& kernel, std::span<const double> noise_variances,
                     MeanPolicy mean) {
    if (noise_variances.size() != train.feature_count()) {
        throw ConfigError("need one noise variance per feature");
    }
    std::vector<FeatureGpConfig> configs;
    for (double noise : noise_variances) configs.push_back({kernel, noise, mean});
    return fit_gp(train, configs);
}

PredictionTable predict_many(const IsoscapeModel& model, const Eigen::MatrixXd& distances) {
    const auto m = distances.cols();
    const auto f = static_cast<Eigen::Index>(model.feature_count());
    if (distances.rows() != static_cast<Eigen::Index>(model.train_size())) {
        throw ConfigError("prediction distance matrix does not match the training set");
    }
    PredictionTable table{Eigen::MatrixXd(m, f), Eigen::MatrixXd(m, f)};
    const FeatureGp* previous = nullptr;
    Eigen::MatrixXd cross;
    Eigen::VectorXd explained;
    for (Eigen::Index j = 0; j < f; ++j) {
        const FeatureGp& gp = model.features()[static_cast<std::size_t>(j)];
        const bool same_kernel = previous != nullptr && previous->config.kernel == gp.config.kernel;
        // fit_gp shares one factorization between features with equal kernel and noise.
        const bool same_factor = same_kernel && previous->config.noise_variance == gp.config.noise_variance &&
                                 previous->jitter == gp.jitter;
        if (!same_kernel) cross = kernel_matrix(gp.config.kernel, distances);
        if (!same_factor) {
            const Eigen::MatrixXd v = gp.factor.triangularView<Eigen::Lower>().solve(cross);
            explained = v.colwise().squaredNorm().transpose();
        }
        previous = &gp;

        table.means.col(j) = (cross.transpose() * gp.weights).array() + gp.mean;
        const double prior_var = gp.config.kernel.signal_variance + gp.config.noise_variance;
        for (Eigen::Index q = 0; q < m; ++q) {
            table.variances(q, j) = clamp_variance(prior_var - explained(q), gp.name);
        }
    }
    return table;
}

PredictionTable predict_many(const IsoscapeModel& model, std::span<const Location> queries) {
    return predict_many(model, distance_matrix(model.train_locations(), queries));
}

std::vector<Prediction> predict_forward(const IsoscapeModel& model, const Location& x) {
    const PredictionTable table = predict_many(model, std::span<const Location>(&x, 1));
    std::vector<Prediction> out;
    for (Eigen::Index j = 0; j < table.means.cols(); ++j) out.push_back({table.means(0, j), table.variances(0, j)});
    return out;
}

double log_likelihood(std::span<const Prediction> predictions, std::span<const std::optional<double>> y_star) {
    if (predictions.size() != y_star.size()) throw DataError("observation has the wrong number of features");
    double total = 0.0;
    for (std::size_t j = 0; j < y_star.size(); ++j) {
        if (!y_star[j]) throw DataError("observation is missing feature " + std::to_string(j));
        const double v = std::max(predictions[j].variance, std::numeric_limits<double>::min());
        const double r = *y_star[j] - predictions[j].mean;
        total += -0.5 * (kLog2Pi + std::log(v)) - r * r / (2.0 * v);
    }
    return total;
}

double log_likelihood(const IsoscapeModel& model, std::span<const std::optional<double>> y_star, const Location& x) {
    const auto predictions = predict_forward(model, x);
    return log_likelihood(predictions, y_star);
}

double likelihood(const IsoscapeModel& model, std::span<const std::optional<double>> y_star, const Location& x) {
    return std::exp(log_likelihood(model, y_star, x));
}

std::vector<double> normalize_log_posterior(std::span<const double> log_likelihoods, std::span<const double> prior) {
    if (log_likelihoods.size() != prior.size()) throw ConfigError("prior does not match the grid");
    bool any_prior = false;
    for (double p : prior) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError("prior weights must be finite and non-negative");
        any_prior = any_prior || p > 0.0;
    }
    if (!any_prior) throw ConfigError("prior weights are all zero");

    std::vector<double> log_post(prior.size());
    double max_lp = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < prior.size(); ++c) {
        log_post[c] = prior[c] > 0.0 && !std::isnan(log_likelihoods[c])
                          ? log_likelihoods[c] + std::log(prior[c])
                          : -std::numeric_limits<double>::infinity();
        max_lp = std::max(max_lp, log_post[c]);
    }
    if (!std::isfinite(max_lp)) throw NumericalError("no support on grid: every cell has zero posterior density");

    std::vector<double> probs(prior.size());
    double total = 0.0;
    for (std::size_t c = 0; c < prior.size(); ++c) {
        probs[c] = std::exp(log_post[c] - max_lp);
        total += probs[c];
    }
    for (double& p : probs) p /= total;
    return probs;
}

PosteriorGrid posterior(const IsoscapeModel& model, std::span<const std::optional<double>> y_star,
                        std::shared_ptr<const SpatialGrid> grid, std::span<const double> prior) {
    if (!grid) throw ConfigError("posterior needs a grid");
    const PredictionTable forecast = predict_many(model, grid->cells());
    std::vector<double> log_lik(grid->size());
    std::vector<Prediction> at_cell(model.feature_count());
    for (std::size_t c = 0; c < grid->size(); ++c) {
        for (std::size_t j = 0; j < at_cell.size(); ++j) {
            const auto r = static_cast<Eigen::Index>(c);
            const auto k = static_cast<Eigen::Index>(j);
            at_cell[j] = {forecast.means(r, k), forecast.variances(r, k)};
        }
        log_lik[c] = log_likelihood(at_cell, y_star);
    }
    auto probs = normalize_log_posterior(log_lik, prior);
    return {std::move(grid), std::move(probs)};
}

PosteriorGrid posterior(const IsoscapeModel& model, std::span<const std::optional<double>> y_star,
                        std::shared_ptr<const SpatialGrid> grid) {
    if (!grid) throw ConfigError("posterior needs a grid");
    const std::vector<double> prior = grid->weights();
    return posterior(model, y_star, std::move(grid), prior);
}

double posterior_rmse(const PosteriorGrid& pg, const Location& x_true) {
    double acc = 0.0;
    for (std::size_t c = 0; c < pg.probs.size(); ++c) {
        if (pg.probs[c] == 0.0) continue;
        const double d = great_circle_distance(x_true, pg.grid->cells()[c]);
        acc += pg.probs[c] * d * d;
    }
    return std::sqrt(acc);
}

double backward_rmse(const PredictionTable& grid_forecast, const Eigen::MatrixXd& targets,
                     const Eigen::MatrixXd& squared_distances, std::span<const double> prior) {
    const auto n_test = targets.rows();
    const auto n_cells = grid_forecast.means.rows();
    const auto n_features = targets.cols();
    if (n_test == 0) throw DataError("backward RMSE needs a non-empty test set");
    if (grid_forecast.means.cols() != n_features || squared_distances.rows() != n_test ||
        squared_distances.cols() != n_cells) {
        throw ConfigError("backward RMSE inputs have inconsistent sizes");
    }
    const Eigen::ArrayXXd log_var =
        grid_forecast.variances.array().max(std::numeric_limits<double>::min()).log();
    const Eigen::ArrayXXd inv_var = grid_forecast.variances.array().max(std::numeric_limits<double>::min()).inverse();
    const double log_norm = -0.5 * kLog2Pi * static_cast<double>(n_features);
    const Eigen::ArrayXd half_log_det = 0.5 * log_var.rowwise().sum();

    double total = 0.0;
    std::vector<double> log_lik(static_cast<std::size_t>(n_cells));
    for (Eigen::Index t = 0; t < n_test; ++t) {
        for (Eigen::Index c = 0; c < n_cells; ++c) {
            double quad = 0.0;
            for (Eigen::Index j = 0; j < n_features; ++j) {
                const double r = targets(t, j) - grid_forecast.means(c, j);
                quad += r * r * inv_var(c, j);
            }
            log_lik[static_cast<std::size_t>(c)] = log_norm - half_log_det(c) - 0.5 * quad;
        }
        const auto probs = normalize_log_posterior(log_lik, prior);
        double acc = 0.0;
        for (Eigen::Index c = 0; c < n_cells; ++c) acc += probs[static_cast<std::size_t>(c)] * squared_distances(t, c);
        total += std::sqrt(acc);
    }
    return total / static_cast<double>(n_test);
}

double backward_rmse(const IsoscapeModel& model, const Dataset& test, std::shared_ptr<const SpatialGrid> grid,
                     std::span<const double> prior) {
    if (!grid) throw ConfigError("backward RMSE needs a grid");
    const PredictionTable forecast = predict_many(model, grid->cells());
    const auto test_locations = test.locations();
    const Eigen::MatrixXd sq = distance_matrix(test_locations, grid->cells()).array().square();
    return backward_rmse(forecast, feature_matrix(test), sq, prior);
}

double forward_rmse(const PredictionTable& predictions, const Eigen::MatrixXd& targets, std::span<const double> scales) {
    if (targets.rows() == 0) throw DataError("forward RMSE needs a non-empty test set");
    if (predictions.means.rows() != targets.rows() || predictions.means.cols() != targets.cols() ||
        static_cast<Eigen::Index>(scales.size()) != targets.cols()) {
        throw ConfigError("forward RMSE inputs have inconsistent sizes");
    }
    double acc = 0.0;
    for (Eigen::Index j = 0; j < targets.cols(); ++j) {
        const double s = scales[static_cast<std::size_t>(j)];
        if (!(s > 0.0)) throw DataError("feature " + std::to_string(j) + " has zero training standard deviation");
        acc += ((targets.col(j) - predictions.means.col(j)) / s).squaredNorm();
    }
    return std::sqrt(acc / static_cast<double>(targets.size()));
}

double forward_rmse(const IsoscapeModel& model, const Dataset& test, std::span<const double> scales) {
    if (test.feature_count() != model.feature_count()) throw DataError("test set features do not match the model");
    const auto locations = test.locations();
    return forward_rmse(predict_many(model, locations), feature_matrix(test), scales);
}

double forward_rmse(const IsoscapeModel& model, const Dataset& test) {
    std::vector<double> scales;
    for (const FeatureGp& gp : model.features()) {
        if (!(gp.training_sd > 0.0)) throw DataError("feature '" + gp.name + "' has zero training standard deviation");
        scales.push_back(gp.training_sd);
    }
    return forward_rmse(model, test, scales);
}

double log_marginal_likelihood(const Eigen::MatrixXd& distances, std::span<const double> y,
                               const FeatureGpConfig& config) {
    config.kernel.validate();
    const auto n = static_cast<Eigen::Index>(y.size());
    if (distances.rows() != n || distances.cols() != n) throw ConfigError("distance matrix does not match targets");
    Eigen::VectorXd centered = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
    centered.array() -= config.mean.kind == MeanPolicy::Kind::training_mean ? centered.mean() : config.mean.value;
    const auto factor = factorize(kernel_matrix(config.kernel, distances), config.noise_variance);
    if (!factor) return -std::numeric_limits<double>::infinity();
    const auto lower = factor->lower.triangularView<Eigen::Lower>();
    const Eigen::VectorXd half = lower.solve(centered);
    const double log_det = 2.0 * factor->lower.diagonal().array().log().sum();
    return -0.5 * half.squaredNorm() - 0.5 * log_det - 0.5 * static_cast<double>(n) * kLog2Pi;
}

KernelConfig select_kernel(const Eigen::MatrixXd& distances, std::span<const double> y, KernelFamily family,
                           std::span<const double> lengthscales_km, std::span<const double> signal_variances,
                           double noise_variance) {
    if (lengthscales_km.empty() || signal_variances.empty()) throw ConfigError("kernel search grid is empty");
    KernelConfig best;
    double best_lml = -std::numeric_limits<double>::infinity();
    bool found = false;
    for (double ell : lengthscales_km) {
        for (double s2 : signal_variances) {
            FeatureGpConfig cfg{{family, ell, s2}, noise_variance, {}};
            const double lml = log_marginal_likelihood(distances, y, cfg);
            if (!found || lml > best_lml) {
                best = cfg.kernel;
                best_lml = lml;
                found = true;
            }
        }
    }
    return best;
}

}  // namespace isoval
