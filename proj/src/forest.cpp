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

#include "isoval/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "isoval/error.hpp"
#include "isoval/isoscape.hpp"
#include "isoval/parallel.hpp"
#include "isoval/random.hpp"

namespace isoval {

Direction parse_direction(const std::string& name) {
    if (name == "forward") return Direction::forward;
    if (name == "backward") return Direction::backward;
    throw ConfigError("unknown direction '" + name + "'");
}

std::string to_string(Direction direction) { return direction == Direction::forward ? "forward" : "backward"; }

void ForestConfig::validate() const {
    if (n_trees < 1) throw ConfigError("forest needs at least one tree");
    if (min_leaf < 1) throw ConfigError("forest min_leaf must be at least 1");
    if (features_per_split && *features_per_split == 0) throw ConfigError("features_per_split must be positive");
}

const std::vector<double>& RegressionTree::predict(std::span<const double> input) const {
    std::size_t at = 0;
    while (nodes_[at].feature >= 0) {
        const Node& n = nodes_[at];
        at = input[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes_[at].value;
}

std::size_t RegressionTree::depth() const {
    std::vector<std::size_t> level(nodes_.size(), 0);
    std::size_t deepest = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        deepest = std::max(deepest, level[i]);
        if (nodes_[i].feature >= 0) {
            level[nodes_[i].left] = level[i] + 1;
            level[nodes_[i].right] = level[i] + 1;
        }
    }
    return deepest;
}

namespace {

class TreeBuilder {
public:
    TreeBuilder(std::span<const double> inputs, std::size_t p, std::span<const double> targets, std::size_t q,
                std::span<const double> scales, const ForestConfig& cfg, std::uint64_t seed)
        : inputs_(inputs), p_(p), targets_(targets), q_(q), scales_(scales), cfg_(cfg), rng_(seed) {
        if (!cfg.features_per_split) {
            mtry_ = (p + 2) / 3;
        } else {
            mtry_ = std::min(*cfg.features_per_split, p);
        }
        mtry_ = std::max<std::size_t>(mtry_, 1);
        candidates_.resize(p);
    }

    std::vector<RegressionTree::Node> build(std::vector<std::size_t> rows) {
        grow(rows, 0);
        return std::move(nodes_);
    }

private:
    double x(std::size_t row, std::size_t f) const { return inputs_[row * p_ + f]; }
    double y(std::size_t row, std::size_t k) const { return targets_[row * q_ + k] / scales_[k]; }

    std::vector<double> leaf_value(std::span<const std::size_t> rows) const {
        std::vector<double> v(q_, 0.0);
        for (std::size_t r : rows) {
            for (std::size_t k = 0; k < q_; ++k) v[k] += targets_[r * q_ + k];
        }
        for (double& e : v) e /= static_cast<double>(rows.size());
        return v;
    }

    std::size_t grow(std::vector<std::size_t>& rows, std::size_t depth) {
        const std::size_t id = nodes_.size();
        nodes_.push_back({});
        nodes_[id].value = leaf_value(rows);

        const std::size_t n = rows.size();
        const bool depth_ok = !cfg_.max_depth || depth < *cfg_.max_depth;
        if (!depth_ok || n < 2 * cfg_.min_leaf) return id;

        std::vector<double> total(q_, 0.0), total_sq(q_, 0.0);
        for (std::size_t r : rows) {
            for (std::size_t k = 0; k < q_; ++k) {
                const double v = y(r, k);
                total[k] += v;
                total_sq[k] += v * v;
            }
        }
        double parent_sse = 0.0;
        for (std::size_t k = 0; k < q_; ++k) parent_sse += total_sq[k] - total[k] * total[k] / static_cast<double>(n);
        if (!(parent_sse > 1e-12 * static_cast<double>(n))) return id;

        std::iota(candidates_.begin(), candidates_.end(), std::size_t{0});
        for (std::size_t i = 0; i < mtry_; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, p_ - 1);
            std::swap(candidates_[i], candidates_[pick(rng_)]);
        }

        double best_gain = 0.0;
        int best_feature = -1;
        double best_threshold = 0.0;
        std::vector<std::size_t> sorted = rows;
        std::vector<double> left(q_), left_sq(q_);
        for (std::size_t c = 0; c < mtry_; ++c) {
            const std::size_t f = candidates_[c];
            std::stable_sort(sorted.begin(), sorted.end(),
                             [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
            std::fill(left.begin(), left.end(), 0.0);
            std::fill(left_sq.begin(), left_sq.end(), 0.0);
            for (std::size_t i = 0; i + 1 < n; ++i) {
                for (std::size_t k = 0; k < q_; ++k) {
                    const double v = y(sorted[i], k);
                    left[k] += v;
                    left_sq[k] += v * v;
                }
                const std::size_t n_left = i + 1;
                const std::size_t n_right = n - n_left;
                if (n_left < cfg_.min_leaf || n_right < cfg_.min_leaf) continue;
                const double lo = x(sorted[i], f);
                const double hi = x(sorted[i + 1], f);
                if (!(lo < hi)) continue;
                double child_sse = 0.0;
                for (std::size_t k = 0; k < q_; ++k) {
                    const double right = total[k] - left[k];
                    const double right_sq = total_sq[k] - left_sq[k];
                    child_sse += left_sq[k] - left[k] * left[k] / static_cast<double>(n_left);
                    child_sse += right_sq - right * right / static_cast<double>(n_right);
                }
                const double gain = parent_sse - child_sse;
                if (gain > best_gain + 1e-12 * parent_sse) {
                    best_gain = gain;
                    best_feature = static_cast<int>(f);
                    best_threshold = 0.5 * (lo + hi);
                }
            }
        }
        if (best_feature < 0) return id;

        std::vector<std::size_t> left_rows, right_rows;
        for (std::size_t r : rows) {
            (x(r, static_cast<std::size_t>(best_feature)) <= best_threshold ? left_rows : right_rows).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();
        nodes_[id].feature = best_feature;
        nodes_[id].threshold = best_threshold;
        nodes_[id].value.clear();
        const std::size_t l = grow(left_rows, depth + 1);
        const std::size_t r = grow(right_rows, depth + 1);
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    std::span<const double> inputs_;
    std::size_t p_;
    std::span<const double> targets_;
    std::size_t q_;
    std::span<const double> scales_;
    const ForestConfig& cfg_;
    Rng rng_;
    std::size_t mtry_ = 1;
    std::vector<std::size_t> candidates_;
    std::vector<RegressionTree::Node> nodes_;
};

struct Table {
    std::vector<double> values;  // row-major
    std::size_t cols = 0;
};

Table location_table(const Dataset& d) {
    Table t{{}, 2};
    for (const Sample& s : d.samples()) {
        t.values.push_back(s.location.lat());
        t.values.push_back(s.location.lon());
    }
    return t;
}

Table feature_table(const Dataset& d) {
    Table t{{}, d.feature_count()};
    for (const Sample& s : d.samples()) {
        for (std::size_t j = 0; j < s.features.size(); ++j) {
            if (!s.features[j]) throw DataError("sample '" + s.id + "' has a missing feature; apply a missing-data policy first");
            t.values.push_back(*s.features[j]);
        }
    }
    return t;
}

}  // namespace

RegressionTree grow_tree(std::span<const double> inputs, std::size_t n_inputs, std::span<const double> targets,
                         std::size_t n_targets, std::span<const std::size_t> rows,
                         std::span<const double> split_scales, const ForestConfig& config, std::uint64_t seed) {
    if (rows.empty()) throw DataError("cannot grow a tree on no rows");
    if (split_scales.size() != n_targets) throw ConfigError("split scales do not match target count");
    TreeBuilder builder(inputs, n_inputs, targets, n_targets, split_scales, config, seed);
    return RegressionTree(builder.build(std::vector<std::size_t>(rows.begin(), rows.end())));
}

ForestModel fit_forest(const Dataset& train, Direction direction, const ForestConfig& cfg) {
    cfg.validate();
    const Table locations = location_table(train);
    const Table features = feature_table(train);
    const Table& inputs = direction == Direction::forward ? locations : features;
    const Table& targets = direction == Direction::forward ? features : locations;

    ForestModel model;
    model.direction = direction;
    if (direction == Direction::forward) {
        model.input_names = {"lat", "lon"};
        model.output_names = train.feature_names();
    } else {
        model.input_names = train.feature_names();
        model.output_names = {"lat", "lon"};
    }

    const std::size_t n = train.size();
    const std::size_t q = targets.cols;
    std::vector<double> split_scales(q, 1.0);
    for (std::size_t k = 0; k < q; ++k) {
        std::vector<double> column(n);
        for (std::size_t i = 0; i < n; ++i) column[i] = targets.values[i * q + k];
        model.output_sd.push_back(sample_sd(column));
        if (model.output_sd.back() > 0.0) split_scales[k] = model.output_sd.back();
    }

    std::vector<std::optional<RegressionTree>> trees(cfg.n_trees);
    parallel_for(cfg.n_trees, cfg.threads, [&](std::size_t t) {
        const std::uint64_t tree_seed = derive_seed(cfg.seed, t);
        Rng rng(tree_seed);
        std::vector<std::size_t> rows(n);
        if (cfg.bootstrap) {
            std::uniform_int_distribution<std::size_t> draw(0, n - 1);
            for (auto& r : rows) r = draw(rng);
        } else {
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }
        trees[t].emplace(grow_tree(inputs.values, inputs.cols, targets.values, q, rows, split_scales, cfg,
                                   derive_seed(tree_seed, 1)));
    });
    for (auto& t : trees) model.trees.push_back(std::move(*t));
    return model;
}

std::vector<double> predict_forest(const ForestModel& model, std::span<const double> input) {
    if (input.size() != model.input_names.size()) throw DataError("forest input has the wrong dimension");
    std::vector<double> out(model.output_names.size(), 0.0);
    for (const RegressionTree& tree : model.trees) {
        const auto& v = tree.predict(input);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += v[k];
    }
    for (double& v : out) v /= static_cast<double>(model.trees.size());
    if (model.direction == Direction::backward) {
        out[0] = std::clamp(out[0], -90.0, 90.0);
        out[1] = normalize_longitude(out[1]);
    }
    return out;
}

Location predict_location(const ForestModel& model, const Sample& sample) {
    if (model.direction != Direction::backward) throw ConfigError("predict_location needs a backward forest");
    std::vector<double> input;
    for (const auto& f : sample.features) {
        if (!f) throw DataError("sample '" + sample.id + "' has a missing feature");
        input.push_back(*f);
    }
    const auto out = predict_forest(model, input);
    return Location(out[0], out[1]);
}

std::vector<double> predict_features(const ForestModel& model, const Location& x) {
    if (model.direction != Direction::forward) throw ConfigError("predict_features needs a forward forest");
    const double input[2] = {x.lat(), x.lon()};
    return predict_forest(model, input);
}

double forest_rmse(const ForestModel& model, const Dataset& test, std::span<const double> scales) {
    double acc = 0.0;
    std::size_t count = 0;
    if (model.direction == Direction::backward) {
        for (const Sample& s : test.samples()) {
            const double d = great_circle_distance(predict_location(model, s), s.location);
            acc += d * d;
            ++count;
        }
        return std::sqrt(acc / static_cast<double>(count));
    }
    const std::span<const double> sd = scales.empty() ? std::span<const double>(model.output_sd) : scales;
    if (sd.size() != model.output_names.size() || test.feature_count() != model.output_names.size()) {
        throw DataError("test set features do not match the forest");
    }
    for (std::size_t k = 0; k < sd.size(); ++k) {
        if (!(sd[k] > 0.0)) throw DataError("feature '" + model.output_names[k] + "' has zero training standard deviation");
    }
    for (const Sample& s : test.samples()) {
        const auto pred = predict_features(model, s.location);
        for (std::size_t k = 0; k < pred.size(); ++k) {
            if (!s.features[k]) throw DataError("test sample '" + s.id + "' has a missing feature");
            const double r = (*s.features[k] - pred[k]) / sd[k];
            acc += r * r;
            ++count;
        }
    }
    return std::sqrt(acc / static_cast<double>(count));
}

}  // namespace isoval
