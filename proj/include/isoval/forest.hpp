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

#ifndef ISOVAL_FOREST_HPP
#define ISOVAL_FOREST_HPP

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "isoval/dataset.hpp"
#include "isoval/geo.hpp"

namespace isoval {

/// forward: location -> features. backward: features -> location.
enum class Direction { forward, backward };

Direction parse_direction(const std::string& name);
std::string to_string(Direction direction);

struct ForestConfig {
    static constexpr std::size_t kAllFeatures = std::numeric_limits<std::size_t>::max();

    std::size_t n_trees = 200;
    /// nullopt: grow until leaves are pure or hit min_leaf. 0: a single leaf.
    std::optional<std::size_t> max_depth;
    std::size_t min_leaf = 2;
    /// nullopt: ceil(p / 3). kAllFeatures: every input at every split.
    std::optional<std::size_t> features_per_split;
    bool bootstrap = true;
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    void validate() const;
};

/// CART regression tree with vector-valued leaves.
class RegressionTree {
public:
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0.0;
        std::size_t left = 0;
        std::size_t right = 0;
        std::vector<double> value;
    };

    explicit RegressionTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}

    const std::vector<double>& predict(std::span<const double> input) const;
    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    std::size_t depth() const;

private:
    std::vector<Node> nodes_;
};

/// Grows one tree on rows `rows` of the row-major `inputs` (n x p) and `targets` (n x q).
/// `split_scales` divides each target when scoring splits (leaf values stay in target units).
RegressionTree grow_tree(std::span<const double> inputs, std::size_t n_inputs, std::span<const double> targets,
                         std::size_t n_targets, std::span<const std::size_t> rows,
                         std::span<const double> split_scales, const ForestConfig& config, std::uint64_t seed);

struct ForestModel {
    Direction direction = Direction::forward;
    std::vector<RegressionTree> trees;
    std::vector<std::string> input_names;
    std::vector<std::string> output_names;
    /// Training standard deviation of each output (used to standardize forward errors).
    std::vector<double> output_sd;
};

/// Bagged multi-output CART ensemble. Tree t is seeded with derive_seed(cfg.seed, t),
/// so serial and threaded training give identical forests.
ForestModel fit_forest(const Dataset& train, Direction direction, const ForestConfig& cfg);

/// Mean of the tree outputs. Backward outputs are clamped to valid latitude/longitude.
std::vector<double> predict_forest(const ForestModel& model, std::span<const double> input);

Location predict_location(const ForestModel& model, const Sample& sample);
std::vector<double> predict_features(const ForestModel& model, const Location& x);

/// Forward: standardized-feature RMSE (divide by `scales`, or by the model's output_sd
/// when `scales` is empty). Backward: RMSE of great-circle errors in km.
double forest_rmse(const ForestModel& model, const Dataset& test, std::span<const double> scales = {});

}  // namespace isoval

#endif  // ISOVAL_FOREST_HPP
