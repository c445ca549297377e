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

#include "isoval/geo.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "isoval/error.hpp"

namespace isoval {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

}  // namespace

double normalize_longitude(double lon_deg) {
    double wrapped = std::fmod(lon_deg + 180.0, 360.0);
    if (wrapped < 0.0) wrapped += 360.0;
    wrapped -= 180.0;
    // fmod can round up to exactly 180 for tiny negative inputs
    if (wrapped >= 180.0) wrapped -= 360.0;
    return wrapped;
}

Location::Location(double lat_deg, double lon_deg) {
    if (!std::isfinite(lat_deg) || !std::isfinite(lon_deg)) {
        throw DataError("location coordinates must be finite");
    }
    if (lat_deg < -90.0 || lat_deg > 90.0) {
        std::ostringstream msg;
        msg << "latitude " << lat_deg << " outside [-90, 90]";
        throw DataError(msg.str());
    }
    lat_ = lat_deg;
    lon_ = normalize_longitude(lon_deg);
}

double great_circle_distance(const Location& a, const Location& b) noexcept {
    const double half_dlat = 0.5 * (b.lat() - a.lat()) * kDegToRad;
    const double half_sum_lat = 0.5 * (b.lat() + a.lat()) * kDegToRad;
    const double half_dlon = 0.5 * (b.lon() - a.lon()) * kDegToRad;

    const double s_dlat = std::sin(half_dlat), c_dlat = std::cos(half_dlat);
    const double s_sum = std::sin(half_sum_lat), c_sum = std::cos(half_sum_lat);
    const double s_dlon = std::sin(half_dlon), c_dlon = std::cos(half_dlon);

    // h = hav(angle) and 1 - h, each written as a sum of squares so neither
    // loses precision near coincident or antipodal points.
    const double h = s_dlat * s_dlat * c_dlon * c_dlon + c_sum * c_sum * s_dlon * s_dlon;
    const double one_minus_h = c_dlat * c_dlat * c_dlon * c_dlon + s_sum * s_sum * s_dlon * s_dlon;
    return 2.0 * kEarthRadiusKm * std::atan2(std::sqrt(h), std::sqrt(one_minus_h));
}

bool BoundingBox::contains(const Location& x) const noexcept {
    return x.lat() >= lat_min && x.lat() <= lat_max && x.lon() >= lon_min && x.lon() <= lon_max;
}

SpatialGrid::SpatialGrid(std::vector<Location> cells, std::vector<double> weights, double resolution_deg)
    : cells_(std::move(cells)), weights_(std::move(weights)), resolution_deg_(resolution_deg) {
    if (cells_.empty()) throw ConfigError("spatial grid has no cells");
    if (cells_.size() != weights_.size()) throw ConfigError("spatial grid cell/weight count mismatch");
    double total = 0.0;
    for (double w : weights_) {
        if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("spatial grid weights must be positive");
        total += w;
    }
    for (double& w : weights_) w /= total;
}

SpatialGrid build_grid(const BoundingBox& bbox, double resolution_deg) {
    if (!(resolution_deg > 0.0)) throw ConfigError("grid resolution must be positive");
    if (!(bbox.lat_min < bbox.lat_max) || !(bbox.lon_min < bbox.lon_max)) {
        throw ConfigError("grid bounding box is degenerate");
    }
    if (bbox.lat_min < -90.0 || bbox.lat_max > 90.0) throw ConfigError("grid latitude outside [-90, 90]");

    // Small slack so e.g. a 1.0 span at 0.1 resolution yields 10 rows, not 9.
    constexpr double kSlack = 1e-9;
    const auto rows = static_cast<std::size_t>(std::floor((bbox.lat_max - bbox.lat_min) / resolution_deg + kSlack));
    const auto cols = static_cast<std::size_t>(std::floor((bbox.lon_max - bbox.lon_min) / resolution_deg + kSlack));
    if (rows == 0 || cols == 0) {
        throw ConfigError("grid bounding box is smaller than one cell at the requested resolution");
    }

    std::vector<Location> cells;
    std::vector<double> weights;
    cells.reserve(rows * cols);
    weights.reserve(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const double lat = bbox.lat_min + (static_cast<double>(r) + 0.5) * resolution_deg;
        const double w = std::cos(lat * kDegToRad);
        for (std::size_t c = 0; c < cols; ++c) {
            const double lon = bbox.lon_min + (static_cast<double>(c) + 0.5) * resolution_deg;
            cells.emplace_back(lat, lon);
            weights.push_back(w);
        }
    }
    return SpatialGrid(std::move(cells), std::move(weights), resolution_deg);
}

std::vector<std::size_t> cluster_by_radius(std::span<const Location> points, std::size_t seed_index,
                                           double radius_km) {
    if (seed_index >= points.size()) throw ConfigError("cluster seed index out of range");
    if (!(radius_km >= 0.0)) throw ConfigError("cluster radius must be non-negative");
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (i == seed_index || great_circle_distance(points[seed_index], points[i]) <= radius_km) {
            members.push_back(i);
        }
    }
    return members;
}

}  // namespace isoval
