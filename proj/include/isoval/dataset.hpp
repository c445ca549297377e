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

#ifndef ISOVAL_DATASET_HPP
#define ISOVAL_DATASET_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "isoval/geo.hpp"

namespace isoval {

/// One reference specimen. `features` is aligned with the owning dataset's feature_names.
struct Sample {
    std::string id;
    Location location;
    std::string species;
    std::vector<std::optional<double>> features;

    bool complete() const noexcept;
};

/// Non-empty collection of samples sharing one ordered feature-name set; ids are unique.
class Dataset {
public:
    Dataset(std::vector<std::string> feature_names, std::vector<Sample> samples);

    std::size_t size() const noexcept { return samples_.size(); }
    std::size_t feature_count() const noexcept { return feature_names_.size(); }
    const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
    const std::vector<Sample>& samples() const noexcept { return samples_; }
    const Sample& operator[](std::size_t i) const { return samples_[i]; }

    std::vector<Location> locations() const;
    std::vector<std::string> ids() const;
    bool complete() const noexcept;

    /// Values of feature `j` across all samples; throws DataError if any is missing.
    std::vector<double> feature_column(std::size_t j) const;

    /// Samples at `indices`, in the given order. Throws DataError if empty.
    Dataset subset(std::span<const std::size_t> indices) const;

private:
    std::vector<std::string> feature_names_;
    std::vector<Sample> samples_;
};

// --- CSV ingestion ---------------------------------------------------------

struct CsvSchema {
    std::string id_column = "id";
    std::string latitude_column = "latitude";
    std::string longitude_column = "longitude";
    std::string species_column = "species";
    /// Empty: every column other than the four above is a feature.
    std::vector<std::string> feature_columns;
};

/// Parses `id,latitude,longitude,species,<features...>`. Empty cells are missing values;
/// lines starting with '#' are comments.
Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
Dataset read_csv(std::istream& in, const CsvSchema& schema = {});
void write_csv(const Dataset& d, std::ostream& out);

// --- Missing data -----------------------------------------------------------

enum class MissingPolicy { median_impute, listwise_delete };

MissingPolicy parse_missing_policy(const std::string& name);
std::string to_string(MissingPolicy policy);

/// Per-feature medians over non-missing values (even counts average the two middle values).
std::vector<double> feature_medians(const Dataset& d);

/// Replaces every missing value of feature j with medians[j].
Dataset impute(const Dataset& d, std::span<const double> medians);

/// Single-dataset form: medians come from `d` itself.
Dataset apply_missing_policy(const Dataset& d, MissingPolicy policy);

struct TrainTest {
    Dataset train;
    Dataset test;
};

/// Split-aware form: medians are computed on `train` and applied to both sides.
TrainTest apply_missing_policy(const TrainTest& data, MissingPolicy policy);

// --- Splitting --------------------------------------------------------------

/// Seeded random partition; |test| = floor(test_fraction * N). Original order is kept
/// within each side. Throws ConfigError if either side would be empty.
TrainTest split(const Dataset& d, double test_fraction, std::uint64_t seed);

// --- Synthetic isoscapes ----------------------------------------------------

struct FieldTerm {
    enum class Kind { linear_lat, linear_lon, sinusoid };
    Kind kind = Kind::sinusoid;
    /// Slope per degree for linear terms, amplitude for sinusoids.
    double coefficient = 1.0;
    double wavelength_deg = 20.0;
    /// Direction of the sinusoid's wave vector, clockwise from north.
    double bearing_deg = 0.0;
    double phase_rad = 0.0;
};

struct FeatureSpec {
    std::string name;
    double offset = 0.0;
    std::vector<FieldTerm> terms;
    double noise_sd = 0.0;
};

enum class CorruptionLayout { scattered, clustered };

struct SyntheticConfig {
    std::size_t n_samples = 100;
    BoundingBox bbox{35.0, 60.0, -10.0, 30.0};
    std::vector<FeatureSpec> features;
    std::vector<std::string> species{"Quercus robur", "Quercus petraea"};
    double corrupt_fraction = 0.0;
    double corrupt_magnitude = 5.0;
    CorruptionLayout layout = CorruptionLayout::scattered;
    std::size_t corrupt_clusters = 2;
    /// Consecutive samples sharing one sampling site; replicates fall within site_radius_km.
    std::size_t replicates_per_site = 1;
    double site_radius_km = 5.0;
    std::string id_prefix = "S";
    std::uint64_t seed = 0;
};

struct SyntheticData {
    Dataset data;
    /// Ids of samples whose features were perturbed, ascending.
    std::vector<std::string> corrupted_ids;
};

/// Smooth isoscape field of `spec` at `x` (no noise). Terms are relative to the bbox center.
double ground_truth(const FeatureSpec& spec, const BoundingBox& bbox, const Location& x);

/// Five isotope ratios (d13C, d2H, d15N, d18O, d34S) with low-frequency fields.
std::vector<FeatureSpec> default_feature_specs();

SyntheticData generate_synthetic(const SyntheticConfig& config);

}  // namespace isoval

#endif  // ISOVAL_DATASET_HPP
