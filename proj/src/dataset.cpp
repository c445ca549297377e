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

#include "isoval/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "isoval/error.hpp"
#include "isoval/random.hpp"
#include "isoval/text.hpp"

namespace isoval {

bool Sample::complete() const noexcept {
    return std::all_of(features.begin(), features.end(), [](const auto& f) { return f.has_value(); });
}

Dataset::Dataset(std::vector<std::string> feature_names, std::vector<Sample> samples)
    : feature_names_(std::move(feature_names)), samples_(std::move(samples)) {
    if (samples_.empty()) throw DataError("dataset is empty");
    std::unordered_set<std::string> names(feature_names_.begin(), feature_names_.end());
    if (names.size() != feature_names_.size()) throw DataError("duplicate feature names");
    std::unordered_set<std::string> seen;
    for (const Sample& s : samples_) {
        if (s.features.size() != feature_names_.size()) {
            throw DataError("sample '" + s.id + "' does not match the dataset feature set");
        }
        if (!seen.insert(s.id).second) throw DataError("duplicate sample id '" + s.id + "'");
    }
}

std::vector<Location> Dataset::locations() const {
    std::vector<Location> out;
    out.reserve(samples_.size());
    for (const Sample& s : samples_) out.push_back(s.location);
    return out;
}

std::vector<std::string> Dataset::ids() const {
    std::vector<std::string> out;
    out.reserve(samples_.size());
    for (const Sample& s : samples_) out.push_back(s.id);
    return out;
}

bool Dataset::complete() const noexcept {
    return std::all_of(samples_.begin(), samples_.end(), [](const Sample& s) { return s.complete(); });
}

std::vector<double> Dataset::feature_column(std::size_t j) const {
    std::vector<double> out;
    out.reserve(samples_.size());
    for (const Sample& s : samples_) {
        if (!s.features.at(j)) {
            throw DataError("sample '" + s.id + "' is missing feature '" + feature_names_[j] + "'");
        }
        out.push_back(*s.features[j]);
    }
    return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    std::vector<Sample> picked;
    picked.reserve(indices.size());
    for (std::size_t i : indices) picked.push_back(samples_.at(i));
    return Dataset(feature_names_, std::move(picked));
}

// --- CSV --------------------------------------------------------------------

namespace {

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string row_error(std::size_t line, const std::string& column, const std::string& what) {
    std::ostringstream msg;
    msg << "row " << line << ", column '" << column << "': " << what;
    return msg.str();
}

}  // namespace

Dataset read_csv(std::istream& in, const CsvSchema& schema) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        header = split_csv_record(line);
        break;
    }
    if (header.empty()) throw DataError("CSV input has no header");
    for (auto& h : header) h = trim(h);

    std::unordered_map<std::string, std::size_t> column_of;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (!column_of.emplace(header[c], c).second) throw DataError("duplicate CSV column '" + header[c] + "'");
    }
    auto require = [&](const std::string& name) {
        const auto it = column_of.find(name);
        if (it == column_of.end()) throw DataError("CSV header lacks required column '" + name + "'");
        return it->second;
    };
    const std::size_t id_col = require(schema.id_column);
    const std::size_t lat_col = require(schema.latitude_column);
    const std::size_t lon_col = require(schema.longitude_column);
    const std::size_t species_col = require(schema.species_column);

    std::vector<std::string> feature_names = schema.feature_columns;
    if (feature_names.empty()) {
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (c != id_col && c != lat_col && c != lon_col && c != species_col) feature_names.push_back(header[c]);
        }
    }
    if (feature_names.empty()) throw DataError("CSV header has no feature columns");
    std::vector<std::size_t> feature_cols;
    for (const auto& name : feature_names) feature_cols.push_back(require(name));

    std::vector<Sample> samples;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r" || line.front() == '#') continue;
        std::vector<std::string> cells;
        try {
            cells = split_csv_record(line);
        } catch (const DataError& e) {
            throw DataError("row " + std::to_string(line_no) + ": " + e.what());
        }
        if (cells.size() != header.size()) {
            std::ostringstream msg;
            msg << "row " << line_no << ": expected " << header.size() << " fields, found " << cells.size();
            throw DataError(msg.str());
        }
        Sample s;
        s.id = trim(cells[id_col]);
        if (s.id.empty()) throw DataError(row_error(line_no, schema.id_column, "empty id"));
        const auto lat = parse_number(cells[lat_col]);
        if (!lat) throw DataError(row_error(line_no, schema.latitude_column, "not a number"));
        const auto lon = parse_number(cells[lon_col]);
        if (!lon) throw DataError(row_error(line_no, schema.longitude_column, "not a number"));
        if (*lat < -90.0 || *lat > 90.0) {
            throw DataError(row_error(line_no, schema.latitude_column, "latitude outside [-90, 90]"));
        }
        if (*lon < -180.0 || *lon > 180.0) {
            throw DataError(row_error(line_no, schema.longitude_column, "longitude outside [-180, 180]"));
        }
        s.location = Location(*lat, *lon);
        s.species = trim(cells[species_col]);
        for (std::size_t k = 0; k < feature_cols.size(); ++k) {
            const std::string cell = trim(cells[feature_cols[k]]);
            if (cell.empty()) {
                s.features.emplace_back(std::nullopt);
                continue;
            }
            const auto value = parse_number(cell);
            if (!value || !std::isfinite(*value)) {
                throw DataError(row_error(line_no, feature_names[k], "not a finite number"));
            }
            s.features.emplace_back(*value);
        }
        samples.push_back(std::move(s));
    }
    if (samples.empty()) throw DataError("CSV input has no data rows");
    return Dataset(std::move(feature_names), std::move(samples));
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file " + path.string());
    return read_csv(in, schema);
}

void write_csv(const Dataset& d, std::ostream& out) {
    out << "id,latitude,longitude,species";
    for (const auto& name : d.feature_names()) out << ',' << csv_field(name);
    out << '\n';
    for (const Sample& s : d.samples()) {
        out << csv_field(s.id) << ',' << format_number(s.location.lat()) << ','
            << format_number(s.location.lon()) << ',' << csv_field(s.species);
        for (const auto& f : s.features) {
            out << ',';
            if (f) out << format_number(*f);
        }
        out << '\n';
    }
}

// --- Missing data -----------------------------------------------------------

MissingPolicy parse_missing_policy(const std::string& name) {
    if (name == "median_impute") return MissingPolicy::median_impute;
    if (name == "listwise_delete") return MissingPolicy::listwise_delete;
    throw ConfigError("unknown missing-data policy '" + name + "'");
}

std::string to_string(MissingPolicy policy) {
    return policy == MissingPolicy::median_impute ? "median_impute" : "listwise_delete";
}

std::vector<double> feature_medians(const Dataset& d) {
    std::vector<double> medians;
    medians.reserve(d.feature_count());
    for (std::size_t j = 0; j < d.feature_count(); ++j) {
        std::vector<double> present;
        for (const Sample& s : d.samples()) {
            if (s.features[j]) present.push_back(*s.features[j]);
        }
        if (present.empty()) {
            throw DataError("feature '" + d.feature_names()[j] + "' is missing for every sample");
        }
        std::sort(present.begin(), present.end());
        const std::size_t n = present.size();
        medians.push_back(n % 2 == 1 ? present[n / 2] : 0.5 * (present[n / 2 - 1] + present[n / 2]));
    }
    return medians;
}

Dataset impute(const Dataset& d, std::span<const double> medians) {
    if (medians.size() != d.feature_count()) throw DataError("median vector does not match feature count");
    std::vector<Sample> samples = d.samples();
    for (Sample& s : samples) {
        for (std::size_t j = 0; j < s.features.size(); ++j) {
            if (!s.features[j]) s.features[j] = medians[j];
        }
    }
    return Dataset(d.feature_names(), std::move(samples));
}

namespace {

Dataset drop_incomplete(const Dataset& d, const char* which) {
    std::vector<Sample> kept;
    for (const Sample& s : d.samples()) {
        if (s.complete()) kept.push_back(s);
    }
    if (kept.empty()) {
        throw DataError(std::string("listwise deletion removed every sample from the ") + which + " set");
    }
    return Dataset(d.feature_names(), std::move(kept));
}

}  // namespace

Dataset apply_missing_policy(const Dataset& d, MissingPolicy policy) {
    if (policy == MissingPolicy::listwise_delete) return drop_incomplete(d, "input");
    if (d.complete()) return d;
    const auto medians = feature_medians(d);
    return impute(d, medians);
}

TrainTest apply_missing_policy(const TrainTest& data, MissingPolicy policy) {
    if (policy == MissingPolicy::listwise_delete) {
        return {drop_incomplete(data.train, "training"), drop_incomplete(data.test, "test")};
    }
    if (data.train.feature_names() != data.test.feature_names()) {
        throw DataError("training and test sets have different features");
    }
    const auto medians = feature_medians(data.train);
    return {impute(data.train, medians), impute(data.test, medians)};
}

// --- Splitting --------------------------------------------------------------

TrainTest split(const Dataset& d, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test fraction must lie in (0, 1)");
    const std::size_t n = d.size();
    // The epsilon absorbs representation error such as 0.29 * 100 = 28.999999999999996.
    const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(n) + 1e-9));
    if (n_test == 0 || n_test >= n) {
        std::ostringstream msg;
        msg << "test fraction " << test_fraction << " leaves an empty side for N=" << n;
        throw ConfigError(msg.str());
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> test_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
    std::sort(test_idx.begin(), test_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    return {d.subset(train_idx), d.subset(test_idx)};
}

// --- Synthetic isoscapes ----------------------------------------------------

double ground_truth(const FeatureSpec& spec, const BoundingBox& bbox, const Location& x) {
    const double dlat = x.lat() - 0.5 * (bbox.lat_min + bbox.lat_max);
    const double dlon = x.lon() - 0.5 * (bbox.lon_min + bbox.lon_max);
    double value = spec.offset;
    for (const FieldTerm& t : spec.terms) {
        switch (t.kind) {
            case FieldTerm::Kind::linear_lat:
                value += t.coefficient * dlat;
                break;
            case FieldTerm::Kind::linear_lon:
                value += t.coefficient * dlon;
                break;
            case FieldTerm::Kind::sinusoid: {
                const double b = t.bearing_deg * std::numbers::pi / 180.0;
                const double along = std::cos(b) * dlat + std::sin(b) * dlon;
                value += t.coefficient * std::sin(2.0 * std::numbers::pi * along / t.wavelength_deg + t.phase_rad);
                break;
            }
        }
    }
    return value;
}

std::vector<FeatureSpec> default_feature_specs() {
    using K = FieldTerm::Kind;
    return {
        {"d13C", -27.0, {{K::linear_lat, -0.06}, {K::sinusoid, 1.2, 40.0, 60.0, 0.3}}, 0.25},
        {"d2H", -60.0, {{K::linear_lat, -1.2}, {K::sinusoid, 8.0, 45.0, 100.0, 1.1}}, 2.0},
        {"d15N", 2.0, {{K::linear_lon, 0.05}, {K::sinusoid, 1.5, 35.0, 20.0, 2.0}}, 0.3},
        {"d18O", 25.0, {{K::linear_lat, -0.15}, {K::sinusoid, 1.4, 50.0, 130.0, 0.7}}, 0.3},
        {"d34S", 5.0, {{K::linear_lon, -0.08}, {K::sinusoid, 2.0, 38.0, 45.0, 1.6}}, 0.5},
    };
}

SyntheticData generate_synthetic(const SyntheticConfig& config) {
    if (config.n_samples < 2) throw ConfigError("synthetic generator needs at least 2 samples");
    if (config.features.empty()) throw ConfigError("synthetic generator needs at least one feature");
    if (config.species.empty()) throw ConfigError("synthetic generator needs at least one species label");
    const BoundingBox& box = config.bbox;
    if (!(box.lat_min < box.lat_max) || !(box.lon_min < box.lon_max) || box.lat_min < -90.0 || box.lat_max > 90.0) {
        throw ConfigError("synthetic bounding box is invalid");
    }
    if (!(config.corrupt_fraction >= 0.0 && config.corrupt_fraction <= 1.0)) {
        throw ConfigError("corrupt_fraction must lie in [0, 1]");
    }
    if (!std::isfinite(config.corrupt_magnitude)) throw ConfigError("corrupt_magnitude must be finite");
    for (const FeatureSpec& f : config.features) {
        if (!(f.noise_sd >= 0.0)) throw ConfigError("noise_sd of feature '" + f.name + "' must be non-negative");
        for (const FieldTerm& t : f.terms) {
            if (t.kind == FieldTerm::Kind::sinusoid && !(t.wavelength_deg > 0.0)) {
                throw ConfigError("sinusoid wavelength of feature '" + f.name + "' must be positive");
            }
        }
    }
    const std::size_t n = config.n_samples;
    const std::size_t n_corrupt =
        static_cast<std::size_t>(std::llround(config.corrupt_fraction * static_cast<double>(n)));
    if (config.layout == CorruptionLayout::clustered && n_corrupt > 0 && config.corrupt_clusters == 0) {
        throw ConfigError("clustered corruption needs at least one cluster");
    }

    if (config.replicates_per_site == 0) throw ConfigError("replicates_per_site must be at least 1");
    if (!(config.site_radius_km >= 0.0)) throw ConfigError("site_radius_km must be non-negative");
    const std::size_t replicates = config.replicates_per_site;

    Rng rng(config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const std::size_t width = std::max<std::size_t>(4, std::to_string(n).size());
    std::vector<std::string> feature_names;
    for (const FeatureSpec& f : config.features) feature_names.push_back(f.name);

    std::vector<Sample> samples(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::string number = std::to_string(i + 1);
        samples[i].id = config.id_prefix + std::string(width - number.size(), '0') + number;
        if (i % replicates != 0) {
            // Replicate trees scatter uniformly over a disc around the site's first sample.
            const Location& site = samples[i - i % replicates].location;
            const double r = config.site_radius_km * std::sqrt(unit(rng));
            const double theta = 2.0 * std::numbers::pi * unit(rng);
            const double km_per_deg = kEarthRadiusKm * std::numbers::pi / 180.0;
            const double lat = std::clamp(site.lat() + r * std::cos(theta) / km_per_deg, box.lat_min, box.lat_max);
            const double lon = site.lon() + r * std::sin(theta) / (km_per_deg * std::cos(site.lat() * std::numbers::pi / 180.0));
            samples[i].location = Location(lat, lon);
            continue;
        }
        const double lat = box.lat_min + (box.lat_max - box.lat_min) * unit(rng);
        const double lon = box.lon_min + (box.lon_max - box.lon_min) * unit(rng);
        samples[i].location = Location(lat, lon);
    }
    for (Sample& s : samples) {
        s.species = config.species[static_cast<std::size_t>(unit(rng) * static_cast<double>(config.species.size())) %
                                   config.species.size()];
    }
    for (Sample& s : samples) {
        for (const FeatureSpec& f : config.features) {
            const double truth = ground_truth(f, box, s.location);
            const double noise = f.noise_sd > 0.0 ? f.noise_sd * gauss(rng) : 0.0;
            s.features.emplace_back(truth + noise);
        }
    }

    std::vector<std::size_t> corrupted;
    std::vector<double> signs;
    if (n_corrupt > 0) {
        if (config.layout == CorruptionLayout::scattered) {
            std::vector<std::size_t> order(n);
            for (std::size_t i = 0; i < n; ++i) order[i] = i;
            std::shuffle(order.begin(), order.end(), rng);
            corrupted.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_corrupt));
            for (std::size_t k = 0; k < n_corrupt; ++k) signs.push_back(unit(rng) < 0.5 ? -1.0 : 1.0);
        } else {
            // Each cluster grows around a random sample by taking its nearest unclaimed
            // neighbours; one shared sign per cluster gives a regional bias.
            const std::size_t clusters = std::min(config.corrupt_clusters, n_corrupt);
            std::vector<std::size_t> centers;
            std::vector<double> cluster_sign;
            std::vector<bool> claimed(n, false);
            while (centers.size() < clusters) {
                const auto c = static_cast<std::size_t>(unit(rng) * static_cast<double>(n)) % n;
                if (claimed[c]) continue;
                claimed[c] = true;
                centers.push_back(c);
                cluster_sign.push_back(unit(rng) < 0.5 ? -1.0 : 1.0);
                corrupted.push_back(c);
                signs.push_back(cluster_sign.back());
            }
            for (std::size_t k = clusters; k < n_corrupt; ++k) {
                const std::size_t c = k % clusters;
                std::size_t best = n;
                double best_d = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (claimed[i]) continue;
                    const double d = great_circle_distance(samples[centers[c]].location, samples[i].location);
                    if (best == n || d < best_d) {
                        best = i;
                        best_d = d;
                    }
                }
                claimed[best] = true;
                corrupted.push_back(best);
                signs.push_back(cluster_sign[c]);
            }
        }
        for (std::size_t k = 0; k < corrupted.size(); ++k) {
            Sample& s = samples[corrupted[k]];
            for (std::size_t j = 0; j < config.features.size(); ++j) {
                *s.features[j] += signs[k] * config.corrupt_magnitude * config.features[j].noise_sd;
            }
        }
    }

    std::sort(corrupted.begin(), corrupted.end());
    std::vector<std::string> corrupted_ids;
    for (std::size_t i : corrupted) corrupted_ids.push_back(samples[i].id);
    return {Dataset(std::move(feature_names), std::move(samples)), std::move(corrupted_ids)};
}

}  // namespace isoval
