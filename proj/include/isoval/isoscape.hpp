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

#ifndef ISOVAL_ISOSCAPE_HPP
#define ISOVAL_ISOSCAPE_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "isoval/dataset.hpp"
#include "isoval/geo.hpp"

namespace isoval {

enum class KernelFamily { exponential, matern32 };

KernelFamily parse_kernel_family(const std::string& name);
std::string to_string(KernelFamily family);

/// Stationary covariance on the sphere, evaluated from great-circle distance.
/// The exponential kernel uses the geodesic distance directly; Matern-3/2 uses the
/// chord through the Earth, since it is only guaranteed positive definite there.
struct KernelConfig {
    KernelFamily family = KernelFamily::exponential;
    double lengthscale_km = 1000.0;
    double signal_variance = 1.0;

    double operator()(double great_circle_km) const noexcept;
    void validate() const;

    friend bool operator==(const KernelConfig&, const KernelConfig&) = default;
};

struct MeanPolicy {
    enum class Kind { training_mean, constant };
    Kind kind = Kind::training_mean;
    double value = 0.0;
};

struct FeatureGpConfig {
    KernelConfig kernel;
    double noise_variance = 1e-2;
    MeanPolicy mean;
};

/// One fitted independent GP. `factor` is the lower Cholesky factor of K + (noise + jitter) I
/// and `weights` solves that system against the centered targets.
struct FeatureGp {
    std::string name;
    FeatureGpConfig config;
    double mean = 0.0;
    double training_sd = 0.0;
    double jitter = 0.0;
    Eigen::MatrixXd factor;
    Eigen::VectorXd weights;
};

/// Per-feature independent GPs sharing one set of training locations. Immutable after fit.
class IsoscapeModel {
public:
    IsoscapeModel(std::vector<Location> train_locations, std::vector<FeatureGp> features);

    const std::vector<Location>& train_locations() const noexcept { return train_locations_; }
    const std::vector<FeatureGp>& features() const noexcept { return features_; }
    std::size_t feature_count() const noexcept { return features_.size(); }
    std::size_t train_size() const noexcept { return train_locations_.size(); }

private:
    std::vector<Location> train_locations_;
    std::vector<FeatureGp> features_;
};

struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
};

/// Diagonal jitter tried in order when the covariance factorization fails.
inline constexpr double kJitterLadder[] = {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6};

/// Great-circle distances, rows index `a`, columns index `b`.
Eigen::MatrixXd distance_matrix(std::span<const Location> a, std::span<const Location> b);

/// Fits one GP per column of `targets` (rows follow `locations`). `distances` is the
/// pairwise training distance matrix. Throws NumericalError naming the feature when the
/// factorization fails past the jitter ladder.
IsoscapeModel fit_gp(std::vector<Location> locations, const Eigen::MatrixXd& distances,
                     const Eigen::MatrixXd& targets, std::span<const std::string> feature_names,
                     std::span<const FeatureGpConfig> configs);

/// Dataset form. `configs` has one entry per feature, or a single entry shared by all.
IsoscapeModel fit_gp(const Dataset& train, std::span<const FeatureGpConfig> configs);

/// Convenience: one kernel for every feature, per-feature noise variances.
IsoscapeModel fit_gp(const Dataset& train, const KernelConfig& kernel, std::span<const double> noise_variances,
                     MeanPolicy mean = {});

/// Predictive mean and variance per feature; the variance includes the observation noise.
std::vector<Prediction> predict_forward(const IsoscapeModel& model, const Location& x);

/// Batched prediction. `distances` is train_size x M (training point to query point).
struct PredictionTable {
    Eigen::MatrixXd means;      // M x F
    Eigen::MatrixXd variances;  // M x F
};
PredictionTable predict_many(const IsoscapeModel& model, const Eigen::MatrixXd& distances);
PredictionTable predict_many(const IsoscapeModel& model, std::span<const Location> queries);

/// Log of the product of per-feature Gaussian densities.
double log_likelihood(std::span<const Prediction> predictions, std::span<const std::optional<double>> y_star);
double log_likelihood(const IsoscapeModel& model, std::span<const std::optional<double>> y_star, const Location& x);
double likelihood(const IsoscapeModel& model, std::span<const std::optional<double>> y_star, const Location& x);

/// Probability mass per grid cell.
struct PosteriorGrid {
    std::shared_ptr<const SpatialGrid> grid;
    std::vector<double> probs;
};

/// Normalizes log-likelihoods plus log-prior over cells. Cells with zero prior get zero
/// mass. Throws NumericalError if no cell has finite support.
std::vector<double> normalize_log_posterior(std::span<const double> log_likelihoods, std::span<const double> prior);

PosteriorGrid posterior(const IsoscapeModel& model, std::span<const std::optional<double>> y_star,
                        std::shared_ptr<const SpatialGrid> grid, std::span<const double> prior);

/// Uses the grid's own area weights as the prior.
PosteriorGrid posterior(const IsoscapeModel& model, std::span<const std::optional<double>> y_star,
                        std::shared_ptr<const SpatialGrid> grid);

/// sqrt(sum_c p_c d(x_true, cell_c)^2) in km.
double posterior_rmse(const PosteriorGrid& pg, const Location& x_true);

/// Mean over test samples of the per-sample posterior RMSE, km.
double backward_rmse(const IsoscapeModel& model, const Dataset& test, std::shared_ptr<const SpatialGrid> grid,
                     std::span<const double> prior);

/// RMSE over all (sample, feature) residuals, each divided by `scales[j]`.
double forward_rmse(const IsoscapeModel& model, const Dataset& test, std::span<const double> scales);

/// Standardizes by the model's own training standard deviations.
double forward_rmse(const IsoscapeModel& model, const Dataset& test);

/// Core of forward_rmse on precomputed predictions; `targets` is M x F.
double forward_rmse(const PredictionTable& predictions, const Eigen::MatrixXd& targets, std::span<const double> scales);

/// Core of backward_rmse: `grid_forecast` holds predictions at every grid cell,
/// `targets` the test features (M x F) and `squared_distances` the M x C squared
/// distances from each true test location to each cell.
double backward_rmse(const PredictionTable& grid_forecast, const Eigen::MatrixXd& targets,
                     const Eigen::MatrixXd& squared_distances, std::span<const double> prior);

/// Test features as an M x F matrix; throws DataError on missing values.
Eigen::MatrixXd feature_matrix(const Dataset& d);

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
double sample_sd(std::span<const double> values);

/// -1/2 y^T (K + noise I)^-1 y - 1/2 log|K + noise I| - n/2 log(2 pi), with y centered on its mean.
double log_marginal_likelihood(const Eigen::MatrixXd& distances, std::span<const double> y,
                               const FeatureGpConfig& config);

/// Coarse grid search over lengthscale x signal variance maximizing the marginal likelihood.
KernelConfig select_kernel(const Eigen::MatrixXd& distances, std::span<const double> y, KernelFamily family,
                           std::span<const double> lengthscales_km, std::span<const double> signal_variances,
                           double noise_variance);

}  // namespace isoval

#endif  // ISOVAL_ISOSCAPE_HPP
