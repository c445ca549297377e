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

#include "cli/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "isoval/error.hpp"
#include "isoval/random.hpp"

namespace isoval::cli {

using nlohmann::json;

namespace {

/// Typed accessor over one JSON object that rejects keys it was never asked about.
class Section {
public:
    Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ConfigError("config section '" + path_ + "' must be an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return node_.contains(key) && !node_.at(key).is_null();
    }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return node_.at(key);
    }

    template <typename T>
    T get(const std::string& key, T fallback) {
        if (!has(key)) return fallback;
        try {
            return node_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError("config key '" + name(key) + "' has the wrong type");
        }
    }

    template <typename T>
    std::optional<T> optional(const std::string& key) {
        if (!has(key)) return std::nullopt;
        return get<T>(key, T{});
    }

    std::optional<Section> child(const std::string& key) {
        if (!has(key)) return std::nullopt;
        return Section(node_.at(key), name(key));
    }

    std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        for (const auto& [key, value] : node_.items()) {
            if (!seen_.contains(key)) throw ConfigError("unknown config key '" + name(key) + "'");
        }
    }

private:
    const json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

BoundingBox parse_bbox(const json& node, const std::string& where) {
    if (!node.is_array() || node.size() != 4) {
        throw ConfigError("'" + where + "' must be [lat_min, lat_max, lon_min, lon_max]");
    }
    try {
        BoundingBox b{node[0].get<double>(), node[1].get<double>(), node[2].get<double>(), node[3].get<double>()};
        if (!(b.lat_min < b.lat_max) || !(b.lon_min < b.lon_max)) throw ConfigError("'" + where + "' is degenerate");
        return b;
    } catch (const json::exception&) {
        throw ConfigError("'" + where + "' must hold four numbers");
    }
}

FieldTerm::Kind parse_term_kind(const std::string& s) {
    if (s == "linear_lat") return FieldTerm::Kind::linear_lat;
    if (s == "linear_lon") return FieldTerm::Kind::linear_lon;
    if (s == "sinusoid") return FieldTerm::Kind::sinusoid;
    throw ConfigError("unknown field term kind '" + s + "'");
}

FeatureSpec parse_feature_spec(const json& node, const std::string& where, double noise_scale) {
    const auto defaults = default_feature_specs();
    if (node.is_string()) {
        const auto name = node.get<std::string>();
        for (FeatureSpec f : defaults) {
            if (f.name == name) {
                f.noise_sd *= noise_scale;
                return f;
            }
        }
        throw ConfigError("'" + where + "': no built-in feature named '" + name + "'");
    }
    Section s(node, where);
    FeatureSpec f;
    f.name = s.get<std::string>("name", "");
    if (f.name.empty()) throw ConfigError("'" + where + ".name' is required");
    f.offset = s.get<double>("offset", 0.0);
    f.noise_sd = s.get<double>("noise_sd", 0.0) * noise_scale;
    if (s.has("terms")) {
        const json& terms = s.raw("terms");
        if (!terms.is_array()) throw ConfigError("'" + where + ".terms' must be an array");
        for (std::size_t i = 0; i < terms.size(); ++i) {
            Section t(terms[i], where + ".terms[" + std::to_string(i) + "]");
            FieldTerm term;
            term.kind = parse_term_kind(t.get<std::string>("kind", "sinusoid"));
            term.coefficient = t.get<double>("coefficient", 1.0);
            term.wavelength_deg = t.get<double>("wavelength_deg", 20.0);
            term.bearing_deg = t.get<double>("bearing_deg", 0.0);
            term.phase_rad = t.get<double>("phase_rad", 0.0);
            t.finish();
            f.terms.push_back(term);
        }
    }
    s.finish();
    return f;
}

SyntheticConfig parse_synthetic(Section& s, std::uint64_t seed) {
    SyntheticConfig c;
    c.seed = derive_seed(seed, kSeedSynthetic);
    c.n_samples = s.get<std::size_t>("n_samples", c.n_samples);
    if (s.has("bbox")) c.bbox = parse_bbox(s.raw("bbox"), s.name("bbox"));
    const double noise_scale = s.get<double>("noise_scale", 1.0);
    if (!(noise_scale >= 0.0)) throw ConfigError("'" + s.name("noise_scale") + "' must be non-negative");
    if (s.has("features")) {
        const json& feats = s.raw("features");
        if (!feats.is_array() || feats.empty()) throw ConfigError("'" + s.name("features") + "' must be a non-empty array");
        for (std::size_t i = 0; i < feats.size(); ++i) {
            c.features.push_back(parse_feature_spec(feats[i], s.name("features") + "[" + std::to_string(i) + "]", noise_scale));
        }
    } else {
        for (FeatureSpec f : default_feature_specs()) {
            f.noise_sd *= noise_scale;
            c.features.push_back(std::move(f));
        }
    }
    if (s.has("species")) c.species = s.get<std::vector<std::string>>("species", {});
    c.corrupt_fraction = s.get<double>("corrupt_fraction", c.corrupt_fraction);
    c.corrupt_magnitude = s.get<double>("corrupt_magnitude", c.corrupt_magnitude);
    const auto layout = s.get<std::string>("layout", "scattered");
    if (layout == "scattered") {
        c.layout = CorruptionLayout::scattered;
    } else if (layout == "clustered") {
        c.layout = CorruptionLayout::clustered;
    } else {
        throw ConfigError("'" + s.name("layout") + "' must be 'scattered' or 'clustered'");
    }
    c.corrupt_clusters = s.get<std::size_t>("clusters", c.corrupt_clusters);
    c.id_prefix = s.get<std::string>("id_prefix", c.id_prefix);
    c.replicates_per_site = s.get<std::size_t>("replicates_per_site", c.replicates_per_site);
    c.site_radius_km = s.get<double>("site_radius_km", c.site_radius_km);
    return c;
}

}  // namespace

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    try {
        return json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
}

RunConfig parse_run_config(json doc) {
    if (doc.is_null()) doc = json::object();
    RunConfig rc;
    Section root(doc, "");
    rc.seed = root.get<std::uint64_t>("seed", 0);
    rc.out = root.get<std::string>("out", rc.out.string());
    rc.threads = root.get<std::size_t>("threads", 1);

    // data
    if (auto data = root.child("data")) {
        if (data->has("csv")) rc.data.csv = data->get<std::string>("csv", "");
        if (data->has("test_csv")) rc.data.test_csv = data->get<std::string>("test_csv", "");
        if (auto syn = data->child("synthetic")) {
            rc.data.clean_test_samples = syn->get<std::size_t>("clean_test_samples", 0);
            rc.data.synthetic = parse_synthetic(*syn, rc.seed);
            syn->finish();
        }
        rc.data.test_fraction = data->get<double>("test_fraction", rc.data.test_fraction);
        rc.data.missing = parse_missing_policy(data->get<std::string>("missing_policy", "median_impute"));
        data->finish();
    }
    if (rc.data.csv && rc.data.synthetic) throw ConfigError("'data.csv' and 'data.synthetic' are mutually exclusive");

    // model
    rc.model.forest.seed = derive_seed(rc.seed, kSeedForest);
    rc.model.forest.threads = rc.threads;
    if (auto model = root.child("model")) {
        rc.model.kind = parse_model_kind(model->get<std::string>("kind", "gp"));
        rc.model.direction = parse_direction(model->get<std::string>("direction", "forward"));
        if (auto gp = model->child("gp")) {
            rc.model.gp.family = parse_kernel_family(gp->get<std::string>("family", "exponential"));
            rc.model.gp.lengthscale_km = gp->get<double>("lengthscale_km", rc.model.gp.lengthscale_km);
            auto auto_or_number = [&](const std::string& key) -> std::optional<double> {
                if (!gp->has(key)) return std::nullopt;
                const json& v = gp->raw(key);
                if (v.is_string() && v.get<std::string>() == "auto") return std::nullopt;
                if (!v.is_number()) throw ConfigError("'" + gp->name(key) + "' must be a number or \"auto\"");
                return v.get<double>();
            };
            rc.model.gp.signal_variance = auto_or_number("signal_variance");
            rc.model.gp.noise_variance = auto_or_number("noise_variance");
            rc.model.gp.noise_ratio = gp->get<double>("noise_ratio", rc.model.gp.noise_ratio);
            rc.model.gp.search = gp->get<bool>("search", false);
            auto positive = [&](const std::string& key, std::optional<double> v, bool allow_zero) {
                if (v && !(std::isfinite(*v) && (allow_zero ? *v >= 0.0 : *v > 0.0))) {
                    throw ConfigError("'" + gp->name(key) + "' must be " + (allow_zero ? "non-negative" : "positive"));
                }
            };
            positive("lengthscale_km", rc.model.gp.lengthscale_km, false);
            positive("signal_variance", rc.model.gp.signal_variance, false);
            positive("noise_variance", rc.model.gp.noise_variance, true);
            positive("noise_ratio", rc.model.gp.noise_ratio, true);
            gp->finish();
        }
        if (auto forest = model->child("forest")) {
            rc.model.forest.n_trees = forest->get<std::size_t>("n_trees", rc.model.forest.n_trees);
            rc.model.forest.max_depth = forest->optional<std::size_t>("max_depth");
            rc.model.forest.min_leaf = forest->get<std::size_t>("min_leaf", rc.model.forest.min_leaf);
            if (forest->has("features_per_split")) {
                const json& v = forest->raw("features_per_split");
                if (v.is_string() && v.get<std::string>() == "all") {
                    rc.model.forest.features_per_split = ForestConfig::kAllFeatures;
                } else if (v.is_number_unsigned()) {
                    rc.model.forest.features_per_split = v.get<std::size_t>();
                } else {
                    throw ConfigError("'model.forest.features_per_split' must be a count or \"all\"");
                }
            }
            rc.model.forest.bootstrap = forest->get<bool>("bootstrap", true);
            if (forest->has("seed")) rc.model.forest.seed = forest->get<std::uint64_t>("seed", 0);
            forest->finish();
            rc.model.forest.validate();
        }
        if (auto grid = model->child("grid")) {
            if (grid->has("bbox")) rc.model.grid.bbox = parse_bbox(grid->raw("bbox"), "model.grid.bbox");
            rc.model.grid.resolution_deg = grid->get<double>("resolution_deg", rc.model.grid.resolution_deg);
            if (!(rc.model.grid.resolution_deg > 0.0)) throw ConfigError("'model.grid.resolution_deg' must be positive");
            grid->finish();
        }
        model->finish();
    }

    // valuation
    rc.valuation.tmc.seed = derive_seed(rc.seed, kSeedValuation);
    rc.valuation.beta.seed = derive_seed(rc.seed, kSeedValuation);
    rc.valuation.tmc.threads = rc.valuation.beta.threads = rc.valuation.exact.threads = rc.threads;
    if (auto val = root.child("valuation")) {
        rc.valuation.method = parse_valuation_method(val->get<std::string>("method", "tmc"));
        rc.valuation.tmc.tolerance = val->optional<double>("tolerance");
        rc.valuation.tmc.window = val->get<std::size_t>("window", 0);
        rc.valuation.tmc.rel_change = val->get<double>("rel_change", rc.valuation.tmc.rel_change);
        rc.valuation.tmc.max_permutations = val->get<std::size_t>("max_permutations", 0);
        rc.valuation.beta.alpha = val->get<double>("alpha", 1.0);
        rc.valuation.beta.beta = val->get<double>("beta", 1.0);
        rc.valuation.beta.iterations = val->get<std::size_t>("iterations", rc.valuation.beta.iterations);
        rc.valuation.beta.paper_literal_weights = val->get<bool>("paper_literal_weights", false);
        rc.valuation.exact.max_players = val->get<std::size_t>("max_players", rc.valuation.exact.max_players);
        rc.valuation.histogram_bins = val->get<std::size_t>("histogram_bins", rc.valuation.histogram_bins);
        if (rc.valuation.histogram_bins == 0) throw ConfigError("'valuation.histogram_bins' must be positive");
        val->finish();
    }

    // selection
    if (auto sel = root.child("selection")) {
        rc.selection.mode = sel->get<std::string>("mode", rc.selection.mode);
        if (rc.selection.mode != "iterative" && rc.selection.mode != "cluster" && rc.selection.mode != "compare") {
            throw ConfigError("'selection.mode' must be iterative, cluster or compare");
        }
        rc.selection.removal = parse_removal_mode(sel->get<std::string>("removal", "remove_low"));
        rc.selection.radius_km = sel->get<double>("radius_km", rc.selection.radius_km);
        rc.selection.stop.patience = sel->get<std::size_t>("patience", rc.selection.stop.patience);
        rc.selection.stop.max_removals = sel->optional<std::size_t>("max_removals");
        rc.selection.budget = sel->optional<std::size_t>("budget");
        rc.selection.revalue_every = sel->get<std::size_t>("revalue_every", 0);
        if (sel->has("values")) rc.selection.values = sel->get<std::string>("values", "");
        sel->finish();
    }

    // report
    if (auto rep = root.child("report")) {
        if (rep->has("values_a")) rc.report.values_a = rep->get<std::string>("values_a", "");
        if (rep->has("values_b")) rc.report.values_b = rep->get<std::string>("values_b", "");
        rc.report.posterior_ids = rep->get<std::vector<std::string>>("posterior_ids", {});
        rep->finish();
    }
    root.finish();

    if (rc.model.kind == ModelKind::forest && rc.model.direction == Direction::backward && !rc.report.posterior_ids.empty()) {
        throw ConfigError("posterior exports require model.kind = gp with direction = backward");
    }

    json hashed = doc;
    hashed.erase("out");
    hashed.erase("threads");
    rc.hash = fnv1a_hex(hashed.dump());
    return rc;
}

}  // namespace isoval::cli
