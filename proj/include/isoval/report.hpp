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

#ifndef ISOVAL_REPORT_HPP
#define ISOVAL_REPORT_HPP

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "isoval/dataset.hpp"
#include "isoval/isoscape.hpp"
#include "isoval/selection.hpp"
#include "isoval/valuation.hpp"

namespace isoval {

/// Provenance stamped on every CLI artifact: a `# ...` line atop CSV files and a
/// "meta" object in JSON documents. Empty fields are omitted.
struct OutputMeta {
    std::string tool_version;
    std::string config_hash;

    bool empty() const noexcept { return tool_version.empty() && config_hash.empty(); }
};

void write_csv_header_block(const OutputMeta& meta, std::ostream& out);

// Valuation results: {meta, method, seed, permutations_used, values: {id: value},
// convergence_history: [{iteration, max_change}], utility_full, utility_empty, mean_value}
std::string valuation_to_json(const ValuationResult& r, const OutputMeta& meta = {});
ValuationResult valuation_from_json(const std::string& text);
ValuationResult load_valuation(const std::filesystem::path& path);

struct HistogramBin {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
};

/// Equal-width bins spanning [min, max] of the values; the last bin is closed.
std::vector<HistogramBin> histogram(std::span<const double> values, std::size_t bins);
void write_histogram_csv(std::span<const HistogramBin> bins, const OutputMeta& meta, std::ostream& out);

// Selection
std::string trace_to_json(const SelectionTrace& trace, const OutputMeta& meta = {});
/// step,train_size,rmse_after,removed_ids (ids joined by ';')
void write_trace_csv(const SelectionTrace& trace, const OutputMeta& meta, std::ostream& out);
/// Method,Initial RMSE,Best RMSE,Points Removed,Delta RMSE
void write_comparison_csv(std::span<const StrategyRow> rows, const OutputMeta& meta, std::ostream& out);
std::string comparison_to_json(std::span<const StrategyRow> rows, const OutputMeta& meta = {});
/// id,lat,lon,removed,removal_step (removal_step empty for kept points)
void write_removed_map_csv(const Dataset& train, const SelectionTrace& trace, const OutputMeta& meta,
                           std::ostream& out);

// Rank agreement and species summaries
std::string rank_comparison_to_json(const RankComparison& rc, const OutputMeta& meta = {});
/// k,overlap,jaccard
void write_rank_curves_csv(const RankComparison& rc, const OutputMeta& meta, std::ostream& out);
/// id,rank_a,rank_b
void write_rank_pairs_csv(const RankComparison& rc, const OutputMeta& meta, std::ostream& out);
/// species,count,mean,median,min,max
void write_species_csv(std::span<const SpeciesSummary> rows, const OutputMeta& meta, std::ostream& out);

/// lat,lon,prob per cell.
void write_posterior_csv(const PosteriorGrid& pg, const OutputMeta& meta, std::ostream& out);

/// Bare JSON array of corrupted sample ids.
std::string manifest_to_json(std::span<const std::string> ids);
std::vector<std::string> manifest_from_json(const std::string& text);

}  // namespace isoval

#endif  // ISOVAL_REPORT_HPP
