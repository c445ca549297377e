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

#include "isoval/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "cli/config.hpp"
#include "isoval/error.hpp"
#include "isoval/random.hpp"
#include "isoval/report.hpp"
#include "isoval/text.hpp"

#ifndef ISOVAL_VERSION
#define ISOVAL_VERSION "0.0.0"
#endif

namespace isoval {

namespace {

using nlohmann::json;
using cli::RunConfig;

struct Prepared {
    TrainTest data;
    std::vector<std::string> corrupted_ids;
};

OutputMeta meta_of(const RunConfig& rc) { return {ISOVAL_VERSION, rc.hash}; }

/// Writes `body` to out/name, creating the directory on demand.
void write_file(const RunConfig& rc, const std::string& name, const std::function<void(std::ostream&)>& body) {
    std::error_code ec;
    std::filesystem::create_directories(rc.out, ec);
    if (ec) throw ConfigError("cannot create output directory " + rc.out.string() + ": " + ec.message());
    const auto path = rc.out / name;
    std::ofstream file(path, std::ios::binary);
    if (!file) throw ConfigError("cannot write " + path.string());
    body(file);
    file.flush();
    if (!file) throw ConfigError("failed while writing " + path.string());
}

void write_text(const RunConfig& rc, const std::string& name, const std::string& text) {
    write_file(rc, name, [&](std::ostream& o) { o << text << '\n'; });
}

SyntheticData make_clean_test(const RunConfig& rc) {
    SyntheticConfig cfg = *rc.data.synthetic;
    cfg.n_samples = rc.data.clean_test_samples;
    cfg.corrupt_fraction = 0.0;
    cfg.id_prefix += "T";
    cfg.seed = derive_seed(rc.seed, cli::kSeedSyntheticTest);
    return generate_synthetic(cfg);
}

Prepared prepare_data(const RunConfig& rc) {
    const auto& dc = rc.data;
    std::optional<Dataset> all;
    std::optional<Dataset> test;
    std::vector<std::string> corrupted;
    if (dc.synthetic) {
        auto syn = generate_synthetic(*dc.synthetic);
        all = std::move(syn.data);
        corrupted = std::move(syn.corrupted_ids);
        if (dc.clean_test_samples > 0) test = make_clean_test(rc).data;
    } else if (dc.csv) {
        all = load_csv(*dc.csv);
        if (dc.test_csv) test = load_csv(*dc.test_csv);
    } else {
        throw ConfigError("no dataset configured: set data.csv or data.synthetic");
    }
    TrainTest tt = test ? TrainTest{std::move(*all), std::move(*test)}
                        : split(*all, dc.test_fraction, derive_seed(rc.seed, cli::kSeedSplit));
    if (tt.train.feature_names() != tt.test.feature_names()) {
        throw DataError("training and test files have different feature columns");
    }
    return {apply_missing_policy(tt, dc.missing), std::move(corrupted)};
}

std::vector<FeatureGpConfig> gp_configs(const RunConfig& rc, const Dataset& train) {
    const auto& gs = rc.model.gp;
    const Eigen::MatrixXd distances = gs.search ? distance_matrix(train.locations(), train.locations()) : Eigen::MatrixXd{};
    std::vector<FeatureGpConfig> out;
    for (std::size_t j = 0; j < train.feature_count(); ++j) {
        const auto column = train.feature_column(j);
        const double sd = sample_sd(column);
        const double var = sd > 0.0 ? sd * sd : 1.0;
        FeatureGpConfig c;
        c.kernel.family = gs.family;
        c.kernel.lengthscale_km = gs.lengthscale_km;
        c.kernel.signal_variance = gs.signal_variance.value_or(var);
        c.noise_variance = gs.noise_variance.value_or(gs.noise_ratio * var);
        if (gs.search) {
            const double lengths[] = {250.0, 500.0, 1000.0, 2000.0, 4000.0};
            const double signals[] = {0.25 * var, 0.5 * var, var, 2.0 * var, 4.0 * var};
            c.kernel = select_kernel(distances, column, gs.family, lengths, signals, c.noise_variance);
        }
        c.kernel.validate();
        if (!(c.noise_variance >= 0.0)) throw ConfigError("noise variance must be non-negative");
        out.push_back(c);
    }
    return out;
}

BoundingBox grid_bbox(const RunConfig& rc, const TrainTest& tt) {
    if (rc.model.grid.bbox) return *rc.model.grid.bbox;
    if (rc.data.synthetic) return rc.data.synthetic->bbox;
    const double res = rc.model.grid.resolution_deg;
    BoundingBox b{90.0, -90.0, 180.0, -180.0};
    for (const Dataset* d : {&tt.train, &tt.test}) {
        for (const auto& s : d->samples()) {
            b.lat_min = std::min(b.lat_min, s.location.lat());
            b.lat_max = std::max(b.lat_max, s.location.lat());
            b.lon_min = std::min(b.lon_min, s.location.lon());
            b.lon_max = std::max(b.lon_max, s.location.lon());
        }
    }
    b.lat_min = std::max(-90.0, std::floor(b.lat_min / res) * res);
    b.lat_max = std::min(90.0, std::floor(b.lat_max / res) * res + res);
    b.lon_min = std::max(-180.0, std::floor(b.lon_min / res) * res);
    b.lon_max = std::min(180.0, std::floor(b.lon_max / res) * res + res);
    return b;
}

UtilitySpec utility_spec(const RunConfig& rc, const TrainTest& tt) {
    UtilitySpec spec;
    spec.model_kind = rc.model.kind;
    spec.direction = rc.model.direction;
    spec.forest = rc.model.forest;
    if (spec.model_kind == ModelKind::gp) {
        spec.gp = gp_configs(rc, tt.train);
        if (spec.direction == Direction::backward) {
            spec.grid = std::make_shared<const SpatialGrid>(build_grid(grid_bbox(rc, tt), rc.model.grid.resolution_deg));
        }
    }
    return spec;
}

ValuationResult run_valuation(const RunConfig& rc, const Utility& utility, std::span<const std::string> ids) {
    const auto& vs = rc.valuation;
    switch (vs.method) {
        case ValuationMethod::exact:
            return exact_shapley(utility, ids, vs.exact);
        case ValuationMethod::tmc:
            return tmc_shapley(utility, ids, vs.tmc);
        case ValuationMethod::beta:
            return beta_shapley(utility, ids, vs.beta);
        case ValuationMethod::loo:
            return loo_values(utility, ids, rc.threads);
        case ValuationMethod::random: {
            auto r = random_values(ids, derive_seed(rc.seed, cli::kSeedRandomBaseline));
            r.utility_full = utility.full();
            r.utility_empty = utility.empty();
            return r;
        }
    }
    throw ConfigError("unsupported valuation method");
}

void write_valuation(const RunConfig& rc, const ValuationResult& r) {
    const auto meta = meta_of(rc);
    write_text(rc, "values.json", valuation_to_json(r, meta));
    const auto bins = histogram(r.values, rc.valuation.histogram_bins);
    write_file(rc, "histogram.csv", [&](std::ostream& o) { write_histogram_csv(bins, meta, o); });
}

int cmd_generate(const RunConfig& rc, std::ostream& out) {
    if (!rc.data.synthetic) throw ConfigError("generate requires data.synthetic");
    const auto syn = generate_synthetic(*rc.data.synthetic);
    const auto meta = meta_of(rc);
    write_file(rc, "samples.csv", [&](std::ostream& o) {
        write_csv_header_block(meta, o);
        write_csv(syn.data, o);
    });
    write_text(rc, "manifest.json", manifest_to_json(syn.corrupted_ids));
    out << "wrote " << syn.data.size() << " samples (" << syn.corrupted_ids.size() << " corrupted) to "
        << (rc.out / "samples.csv").string() << '\n';
    if (rc.data.clean_test_samples > 0) {
        const auto test = make_clean_test(rc);
        write_file(rc, "test.csv", [&](std::ostream& o) {
            write_csv_header_block(meta, o);
            write_csv(test.data, o);
        });
        out << "wrote " << test.data.size() << " clean test samples to " << (rc.out / "test.csv").string() << '\n';
    }
    return kExitOk;
}

int cmd_value(const RunConfig& rc, std::ostream& out) {
    const auto prepared = prepare_data(rc);
    const ModelUtility utility(prepared.data.train, prepared.data.test, utility_spec(rc, prepared.data));
    const auto ids = prepared.data.train.ids();
    const auto r = run_valuation(rc, utility, ids);
    write_valuation(rc, r);
    out << "method " << to_string(r.method) << ", " << r.ids.size() << " samples";
    if (r.method == ValuationMethod::tmc) out << ", " << r.permutations_used << " permutations";
    if (r.method == ValuationMethod::beta) out << ", " << r.permutations_used << " rounds";
    out << ", mean value " << format_number(r.mean()) << '\n';
    if (r.utility_full && r.utility_empty) {
        double sum = 0.0;
        for (double v : r.values) sum += v;
        out << "v(D) " << format_number(*r.utility_full) << ", v(empty) " << format_number(*r.utility_empty)
            << ", sum of values " << format_number(sum) << '\n';
    }
    return kExitOk;
}

void write_trace_files(const RunConfig& rc, const std::string& suffix, const Dataset& train,
                       const SelectionTrace& trace) {
    const auto meta = meta_of(rc);
    write_text(rc, "trace" + suffix + ".json", trace_to_json(trace, meta));
    write_file(rc, "trace" + suffix + ".csv", [&](std::ostream& o) { write_trace_csv(trace, meta, o); });
    write_file(rc, "removed_map" + suffix + ".csv",
               [&](std::ostream& o) { write_removed_map_csv(train, trace, meta, o); });
}

int cmd_select(const RunConfig& rc, std::ostream& out) {
    const auto prepared = prepare_data(rc);
    const auto& train = prepared.data.train;
    const ModelUtility utility(train, prepared.data.test, utility_spec(rc, prepared.data));
    const auto ids = train.ids();
    const auto& ss = rc.selection;
    const auto meta = meta_of(rc);

    if (ss.mode == "compare") {
        CompareConfig cc;
        cc.budget = ss.budget.value_or(ss.stop.max_removals.value_or(train.size() / 2));
        cc.patience = ss.stop.patience;
        cc.seed = derive_seed(rc.seed, cli::kSeedRandomBaseline);
        cc.tmc = rc.valuation.tmc;
        cc.threads = rc.threads;
        const auto cmp = compare_strategies(utility, train, cc, rc.model.direction);
        write_file(rc, "comparison.csv", [&](std::ostream& o) { write_comparison_csv(cmp.rows, meta, o); });
        write_text(rc, "comparison.json", comparison_to_json(cmp.rows, meta));
        const char* suffixes[] = {"_random", "_loo", "_tmc"};
        for (std::size_t k = 0; k < cmp.traces.size(); ++k) write_trace_files(rc, suffixes[k], train, cmp.traces[k]);
        for (const auto& row : cmp.rows) {
            out << row.method << ": initial " << format_number(row.initial_rmse) << ", best "
                << format_number(row.best_rmse) << ", removed " << row.points_removed << ", delta "
                << format_number(row.delta_rmse) << '\n';
        }
        return kExitOk;
    }

    ValuationResult values;
    if (ss.values) {
        values = load_valuation(*ss.values);
    } else {
        values = run_valuation(rc, utility, ids);
        write_valuation(rc, values);
    }

    SelectionOptions options;
    options.stop = ss.stop;
    options.direction = rc.model.direction;
    options.revalue_every = ss.revalue_every;
    if (ss.revalue_every > 0) {
        options.revaluer = [&rc](const Utility& u, std::span<const std::string> sub_ids) {
            return run_valuation(rc, u, sub_ids);
        };
    }
    const auto trace = ss.mode == "cluster" ? cluster_select(utility, train, values, ss.removal, ss.radius_km, options)
                                            : iterative_select(utility, train, values, ss.removal, options);
    write_trace_files(rc, "", train, trace);
    const auto row = summarize(trace, "selection");
    out << ss.mode << " " << to_string(ss.removal) << ": initial " << format_number(row.initial_rmse) << ", best "
        << format_number(row.best_rmse) << " after " << row.points_removed << " removals";
    if (trace.exhausted) out << " (training set exhausted)";
    out << '\n';
    return kExitOk;
}

int cmd_report(const RunConfig& rc, std::ostream& out) {
    const auto& rs = rc.report;
    const auto meta = meta_of(rc);
    const bool have_data = rc.data.synthetic || rc.data.csv;
    if (!rs.values_a && rs.posterior_ids.empty()) {
        throw ConfigError("report needs report.values_a (and values_b for a rank comparison) or report.posterior_ids");
    }
    if (rs.values_b && !rs.values_a) throw ConfigError("report.values_b given without report.values_a");

    std::optional<Prepared> prepared;
    if (have_data) prepared = prepare_data(rc);

    if (rs.values_a) {
        const auto a = load_valuation(*rs.values_a);
        if (rs.values_b) {
            const auto b = load_valuation(*rs.values_b);
            const auto rank = rank_compare(a, b);
            write_text(rc, "rank_comparison.json", rank_comparison_to_json(rank, meta));
            write_file(rc, "rank_curves.csv", [&](std::ostream& o) { write_rank_curves_csv(rank, meta, o); });
            write_file(rc, "rank_pairs.csv", [&](std::ostream& o) { write_rank_pairs_csv(rank, meta, o); });
            out << "spearman " << format_number(rank.spearman) << " over " << rank.ids.size() << " samples\n";
        }
        if (prepared) {
            const auto rows = species_summary(a, prepared->data.train);
            write_file(rc, "species_summary.csv", [&](std::ostream& o) { write_species_csv(rows, meta, o); });
            out << rows.size() << " species summarized\n";
        } else if (!rs.values_b) {
            throw ConfigError("a species summary needs a dataset (data.csv or data.synthetic)");
        }
    }

    if (!rs.posterior_ids.empty()) {
        if (rc.model.kind != ModelKind::gp || rc.model.direction != Direction::backward) {
            throw ConfigError("posterior exports require model.kind = gp and model.direction = backward");
        }
        if (!prepared) throw ConfigError("posterior exports need a dataset (data.csv or data.synthetic)");
        const auto& tt = prepared->data;
        const auto spec = utility_spec(rc, tt);
        const auto model = fit_gp(tt.train, spec.gp);
        for (const auto& id : rs.posterior_ids) {
            const Sample* found = nullptr;
            for (const Dataset* d : {&tt.test, &tt.train}) {
                for (const auto& s : d->samples()) {
                    if (s.id == id) {
                        found = &s;
                        break;
                    }
                }
                if (found) break;
            }
            if (!found) throw DataError("posterior sample '" + id + "' is not in the dataset");
            const auto pg = posterior(model, found->features, spec.grid);
            write_file(rc, "posterior_" + id + ".csv", [&](std::ostream& o) { write_posterior_csv(pg, meta, o); });
            out << "posterior for " << id << ": rmse " << format_number(posterior_rmse(pg, found->location))
                << " km\n";
        }
    }
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Shapley data valuation for isoscape provenance models", "isoval"};
    app.set_version_flag("--version", ISOVAL_VERSION);
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::size_t> threads;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON configuration file");
        sub->add_option("--seed", seed, "master seed (overrides config)");
        sub->add_option("--out", out_dir, "output directory (overrides config)");
        sub->add_option("--threads", threads, "worker threads, 0 for all cores (overrides config)");
    };

    auto* gen = app.add_subcommand("generate", "write a synthetic dataset and its corruption manifest");
    auto* val = app.add_subcommand("value", "compute data values for every training sample");
    auto* sel = app.add_subcommand("select", "run value-guided data selection experiments");
    auto* rep = app.add_subcommand("report", "rank agreement, species summaries and posterior maps");
    for (auto* sub : {gen, val, sel, rep}) add_common(sub);

    std::optional<std::string> method;
    val->add_option("--method", method, "exact | tmc | beta | loo | random");
    std::optional<std::string> sel_method;
    std::optional<std::string> values_path;
    std::optional<std::string> mode;
    std::optional<std::string> removal;
    std::optional<std::size_t> revalue_every;
    std::optional<double> radius;
    sel->add_option("--method", sel_method, "valuation method driving the removal order");
    sel->add_option("--values", values_path, "precomputed values.json to drive the removal order");
    sel->add_option("--mode", mode, "iterative | cluster | compare");
    sel->add_option("--removal", removal, "remove_low | remove_high");
    sel->add_option("--revalue-every", revalue_every, "recompute values every k removals (0 = never)");
    sel->add_option("--radius-km", radius, "cluster removal radius");
    std::optional<std::string> values_a;
    std::optional<std::string> values_b;
    rep->add_option("--values-a", values_a, "first values.json");
    rep->add_option("--values-b", values_b, "second values.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        json doc = config_path.empty() ? json::object() : cli::read_config_file(config_path);
        if (!doc.is_object()) throw ConfigError("config file must hold a JSON object");
        auto section = [&](const char* key) -> json& {
            json& node = doc[key];
            if (node.is_null()) node = json::object();
            return node;
        };
        if (seed) doc["seed"] = *seed;
        if (out_dir) doc["out"] = *out_dir;
        if (threads) doc["threads"] = *threads;
        if (method) section("valuation")["method"] = *method;
        if (sel_method) section("valuation")["method"] = *sel_method;
        if (values_path) section("selection")["values"] = *values_path;
        if (mode) section("selection")["mode"] = *mode;
        if (removal) section("selection")["removal"] = *removal;
        if (revalue_every) section("selection")["revalue_every"] = *revalue_every;
        if (radius) section("selection")["radius_km"] = *radius;
        if (values_a) section("report")["values_a"] = *values_a;
        if (values_b) section("report")["values_b"] = *values_b;

        const RunConfig rc = cli::parse_run_config(std::move(doc));
        if (gen->parsed()) return cmd_generate(rc, out);
        if (val->parsed()) return cmd_value(rc, out);
        if (sel->parsed()) return cmd_select(rc, out);
        return cmd_report(rc, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace isoval
