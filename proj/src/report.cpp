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

#include "isoval/report.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "isoval/error.hpp"
#include "isoval/text.hpp"

namespace isoval {

using Json = nlohmann::ordered_json;

namespace {

void attach_meta(Json& doc, const OutputMeta& meta) {
    if (meta.empty()) return;
    Json m = Json::object();
    if (!meta.tool_version.empty()) m["tool_version"] = meta.tool_version;
    if (!meta.config_hash.empty()) m["config_hash"] = meta.config_hash;
    doc["meta"] = std::move(m);
}

std::string dump(const Json& doc) { return doc.dump(2) + "\n"; }

std::string join_ids(const std::vector<std::string>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i > 0) out += ';';
        out += ids[i];
    }
    return out;
}

}  // namespace

void write_csv_header_block(const OutputMeta& meta, std::ostream& out) {
    if (meta.empty()) return;
    out << "# isoval";
    if (!meta.tool_version.empty()) out << " version=" << meta.tool_version;
    if (!meta.config_hash.empty()) out << " config_hash=" << meta.config_hash;
    out << '\n';
}

std::string valuation_to_json(const ValuationResult& r, const OutputMeta& meta) {
    Json doc = Json::object();
    attach_meta(doc, meta);
    doc["method"] = to_string(r.method);
    doc["seed"] = r.seed;
    doc["permutations_used"] = r.permutations_used;
    Json values = Json::object();
    for (std::size_t i = 0; i < r.ids.size(); ++i) values[r.ids[i]] = r.values[i];
    doc["values"] = std::move(values);
    Json history = Json::array();
    for (const auto& p : r.convergence_history) history.push_back({{"iteration", p.iteration}, {"max_change", p.max_change}});
    doc["convergence_history"] = std::move(history);
    if (r.utility_full) doc["utility_full"] = *r.utility_full;
    if (r.utility_empty) doc["utility_empty"] = *r.utility_empty;
    doc["mean_value"] = r.mean();
    return dump(doc);
}

ValuationResult valuation_from_json(const std::string& text) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw DataError(std::string("invalid valuation JSON: ") + e.what());
    }
    try {
        ValuationResult r;
        r.method = parse_valuation_method(doc.at("method").get<std::string>());
        r.seed = doc.value("seed", std::uint64_t{0});
        r.permutations_used = doc.value("permutations_used", std::size_t{0});
        for (const auto& [id, value] : doc.at("values").items()) {
            r.ids.push_back(id);
            r.values.push_back(value.get<double>());
        }
        if (doc.contains("convergence_history")) {
            for (const auto& p : doc["convergence_history"]) {
                r.convergence_history.push_back({p.at("iteration").get<std::size_t>(), p.at("max_change").get<double>()});
            }
        }
        if (doc.contains("utility_full")) r.utility_full = doc["utility_full"].get<double>();
        if (doc.contains("utility_empty")) r.utility_empty = doc["utility_empty"].get<double>();
        return r;
    } catch (const Json::exception& e) {
        throw DataError(std::string("malformed valuation JSON: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(std::string("malformed valuation JSON: ") + e.what());
    }
}

ValuationResult load_valuation(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open valuation file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return valuation_from_json(buf.str());
}

std::vector<HistogramBin> histogram(std::span<const double> values, std::size_t bins) {
    if (bins == 0) throw ConfigError("histogram needs at least one bin");
    if (values.empty()) return {};
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it, hi = *hi_it;
    if (lo == hi) return {{lo, hi, values.size()}};
    const double width = (hi - lo) / static_cast<double>(bins);
    std::vector<HistogramBin> out(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        out[b].lower = lo + width * static_cast<double>(b);
        out[b].upper = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
    }
    for (double v : values) {
        auto b = static_cast<std::size_t>((v - lo) / width);
        out[std::min(b, bins - 1)].count += 1;
    }
    return out;
}

void write_histogram_csv(std::span<const HistogramBin> bins, const OutputMeta& meta, std::ostream& out) {
    write_csv_header_block(meta, out);
    out << "bin_lower,bin_upper,bin_center,count\n";
    for (const auto& b : bins) {
        out << format_number(b.lower) << ',' << format_number(b.upper) << ','
            << format_number(0.5 * (b.lower + b.upper)) << ',' << b.count << '\n';
    }
}

std::string trace_to_json(const SelectionTrace& trace, const OutputMeta& meta) {
    Json doc = Json::object();
    attach_meta(doc, meta);
    doc["direction"] = to_string(trace.direction);
    doc["valuation_method"] = to_string(trace.valuation_method);
    doc["mode"] = to_string(trace.mode);
    doc["cluster_radius_km"] = trace.cluster_radius_km ? Json(*trace.cluster_radius_km) : Json(nullptr);
    doc["exhausted"] = trace.exhausted;
    doc["best_step"] = trace.best_step();
    Json steps = Json::array();
    for (std::size_t s = 0; s < trace.steps.size(); ++s) {
        const auto& step = trace.steps[s];
        steps.push_back({{"step", s}, {"removed_ids", step.removed_ids}, {"train_size", step.train_size},
                         {"rmse_after", step.rmse_after}});
    }
    doc["steps"] = std::move(steps);
    return dump(doc);
}

void write_trace_csv(const SelectionTrace& trace, const OutputMeta& meta, std::ostream& out) {
    write_csv_header_block(meta, out);
    out << "step,train_size,rmse_after,removed_ids\n";
    for (std::size_t s = 0; s < trace.steps.size(); ++s) {
        const auto& step = trace.steps[s];
        out << s << ',' << step.train_size << ',' << format_number(step.rmse_after) << ','
            << csv_field(join_ids(step.removed_ids)) << '\n';
    }
}

void write_comparison_csv(std::span<const StrategyRow> rows, const OutputMeta& meta, std::ostream& out) {
    write_csv_header_block(meta, out);
    out << "Method,Initial RMSE,Best RMSE,Points Removed,Delta RMSE\n";
    for (const auto& r : rows) {
        out << csv_field(r.method) << ',' << format_number(r.initial_rmse) << ',' << format_number(r.best_rmse) << ','
            << r.points_removed << ',' << format_number(r.delta_rmse) << '\n';
    }
}

std::string comparison_to_json(std::span<const StrategyRow> rows, const OutputMeta& meta) {
    Json doc = Json::object();
    attach_meta(doc, meta);
    Json list = Json::array();
    for (const auto& r : rows) {
        list.push_back({{"method", r.method}, {"initial_rmse", r.initial_rmse}, {"best_rmse", r.best_rmse},
                        {"points_removed", r.points_removed}, {"delta_rmse", r.delta_rmse}});
    }
    doc["strategies"] = std::move(list);
    return dump(doc);
}

void write_removed_map_csv(const Dataset& train, const SelectionTrace& trace, const OutputMeta& meta,
                           std::ostream& out) {
    std::unordered_map<std::string, std::size_t> removed_at;
    for (std::size_t s = 0; s < trace.steps.size(); ++s) {
        for (const auto& id : trace.steps[s].removed_ids) removed_at.emplace(id, s);
    }
    write_csv_header_block(meta, out);
    out << "id,lat,lon,removed,removal_step\n";
    for (const Sample& sample : train.samples()) {
        const auto it = removed_at.find(sample.id);
        out << csv_field(sample.id) << ',' << format_number(sample.location.lat()) << ','
            << format_number(sample.location.lon()) << ',' << (it != removed_at.end() ? 1 : 0) << ',';
        if (it != removed_at.end()) out << it->second;
        out << '\n';
    }
}

std::string rank_comparison_to_json(const RankComparison& rc, const OutputMeta& meta) {
    Json doc = Json::object();
    attach_meta(doc, meta);
    doc["spearman"] = rc.spearman;
    doc["overlap"] = rc.overlap;
    doc["jaccard"] = rc.jaccard;
    Json pairs = Json::array();
    for (std::size_t i = 0; i < rc.ids.size(); ++i) {
        pairs.push_back({{"id", rc.ids[i]}, {"rank_a", rc.rank_pairs[i].first}, {"rank_b", rc.rank_pairs[i].second}});
    }
    doc["rank_pairs"] = std::move(pairs);
    return dump(doc);
}

void write_rank_curves_csv(const RankComparison& rc, const OutputMeta& meta, std::ostream& out) {
    write_csv_header_block(meta, out);
    out << "k,overlap,jaccard\n";
    for (std::size_t k = 0; k < rc.overlap.size(); ++k) {
        out << k + 1 << ',' << format_number(rc.overlap[k]) << ',' << format_number(rc.jaccard[k]) << '\n';
    }
}

void write_rank_pairs_csv(const RankComparison& rc, const OutputMeta& meta, std::ostream& out) {
    write_csv_header_block(meta, out);
    out << "id,rank_a,rank_b\n";
    for (std::size_t i = 0; i < rc.ids.size(); ++i) {
        out << csv_field(rc.ids[i]) << ',' << rc.rank_pairs[i].first << ',' << rc.rank_pairs[i].second << '\n';
    }
}

void write_species_csv(std::span<const SpeciesSummary> rows, const OutputMeta& meta, std::ostream& out) {
    write_csv_header_block(meta, out);
    out << "species,count,mean,median,min,max\n";
    for (const auto& r : rows) {
        out << csv_field(r.species) << ',' << r.count << ',' << format_number(r.mean) << ','
            << format_number(r.median) << ',' << format_number(r.min) << ',' << format_number(r.max) << '\n';
    }
}

void write_posterior_csv(const PosteriorGrid& pg, const OutputMeta& meta, std::ostream& out) {
    write_csv_header_block(meta, out);
    out << "lat,lon,prob\n";
    for (std::size_t c = 0; c < pg.probs.size(); ++c) {
        const Location& x = pg.grid->cells()[c];
        out << format_number(x.lat()) << ',' << format_number(x.lon()) << ',' << format_number(pg.probs[c]) << '\n';
    }
}

std::string manifest_to_json(std::span<const std::string> ids) {
    Json list = Json::array();
    for (const auto& id : ids) list.push_back(id);
    return list.dump(2) + "\n";
}

std::vector<std::string> manifest_from_json(const std::string& text) {
    try {
        return Json::parse(text).get<std::vector<std::string>>();
    } catch (const Json::exception& e) {
        throw DataError(std::string("invalid manifest JSON: ") + e.what());
    }
}

}  // namespace isoval
