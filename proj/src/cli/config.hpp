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

#ifndef ISOVAL_CLI_CONFIG_HPP
#define ISOVAL_CLI_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "isoval/dataset.hpp"
#include "isoval/forest.hpp"
#include "isoval/isoscape.hpp"
#include "isoval/selection.hpp"
#include "isoval/valuation.hpp"

namespace isoval::cli {

/// Stream indices passed to derive_seed so every random consumer gets its own seed.
enum SeedStream : std::uint64_t {
    kSeedSynthetic = 1,
    kSeedSyntheticTest = 2,
    kSeedSplit = 3,
    kSeedValuation = 4,
    kSeedForest = 5,
    kSeedRandomBaseline = 6,
};

struct DataConfig {
    std::optional<std::filesystem::path> csv;
    std::optional<std::filesystem::path> test_csv;
    std::optional<SyntheticConfig> synthetic;
    /// Size of an independent noise-free-of-corruption synthetic test set (0 = split instead).
    std::size_t clean_test_samples = 0;
    double test_fraction = 0.2;
    MissingPolicy missing = MissingPolicy::median_impute;
};

struct GpSettings {
    KernelFamily family = KernelFamily::exponential;
    double lengthscale_km = 1000.0;
    /// nullopt: the feature's training variance.
    std::optional<double> signal_variance;
    /// nullopt: noise_ratio times the feature's training variance.
    std::optional<double> noise_variance;
    double noise_ratio = 0.05;
    bool search = false;
};

struct GridSettings {
    std::optional<BoundingBox> bbox;
    double resolution_deg = 1.0;
};

struct ModelConfig {
    ModelKind kind = ModelKind::gp;
    Direction direction = Direction::forward;
    GpSettings gp;
    ForestConfig forest;
    GridSettings grid;
};

struct ValuationSettings {
    ValuationMethod method = ValuationMethod::tmc;
    TmcConfig tmc;
    BetaConfig beta;
    ExactConfig exact;
    std::size_t histogram_bins = 20;
};

struct SelectionSettings {
    std::string mode = "iterative";  // iterative | cluster | compare
    RemovalMode removal = RemovalMode::remove_low;
    double radius_km = 100.0;
    StopRule stop;
    std::optional<std::size_t> budget;
    std::size_t revalue_every = 0;
    std::optional<std::filesystem::path> values;
};

struct ReportSettings {
    std::optional<std::filesystem::path> values_a;
    std::optional<std::filesystem::path> values_b;
    std::vector<std::string> posterior_ids;
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::filesystem::path out = "isoval_out";
    std::size_t threads = 1;
    DataConfig data;
    ModelConfig model;
    ValuationSettings valuation;
    SelectionSettings selection;
    ReportSettings report;
    /// FNV-1a of the merged configuration, excluding execution-only keys (out, threads).
    std::string hash;
};

/// Merges `file_doc` with flag overrides (flags win) and validates every key.
RunConfig parse_run_config(nlohmann::json doc);

nlohmann::json read_config_file(const std::filesystem::path& path);

/// 16 hex digits of 64-bit FNV-1a.
std::string fnv1a_hex(const std::string& text);

}  // namespace isoval::cli

#endif  // ISOVAL_CLI_CONFIG_HPP
