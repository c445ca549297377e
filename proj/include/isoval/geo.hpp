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

#ifndef ISOVAL_GEO_HPP
#define ISOVAL_GEO_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace isoval {

/// IUGG mean Earth radius.
inline constexpr double kEarthRadiusKm = 6371.0088;

/// A point on the sphere. Latitude is checked, longitude is wrapped into [-180, 180).
class Location {
public:
    Location() = default;
    Location(double lat_deg, double lon_deg);

    double lat() const noexcept { return lat_; }
    double lon() const noexcept { return lon_; }

    friend bool operator==(const Location&, const Location&) = default;

private:
    double lat_ = 0.0;
    double lon_ = 0.0;
};

/// Wraps any finite longitude into [-180, 180).
double normalize_longitude(double lon_deg);

/// Haversine great-circle distance in km.
double great_circle_distance(const Location& a, const Location& b) noexcept;

struct BoundingBox {
    double lat_min = 0.0;
    double lat_max = 0.0;
    double lon_min = 0.0;
    double lon_max = 0.0;

    bool contains(const Location& x) const noexcept;
};

/// Discretized integration domain: cell centers plus area weights summing to one.
class SpatialGrid {
public:
    /// Normalizes `weights`; throws ConfigError if empty, mismatched or non-positive.
    SpatialGrid(std::vector<Location> cells, std::vector<double> weights, double resolution_deg = 0.0);

    std::size_t size() const noexcept { return cells_.size(); }
    const std::vector<Location>& cells() const noexcept { return cells_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    double resolution_deg() const noexcept { return resolution_deg_; }

private:
    std::vector<Location> cells_;
    std::vector<double> weights_;
    double resolution_deg_;
};

/// Regular lat/lon lattice of cell centers with cos(latitude) area weights.
SpatialGrid build_grid(const BoundingBox& bbox, double resolution_deg);

/// Indices (ascending) of all points within `radius_km` of points[seed_index], seed included.
std::vector<std::size_t> cluster_by_radius(std::span<const Location> points, std::size_t seed_index,
                                           double radius_km);

}  // namespace isoval

#endif  // ISOVAL_GEO_HPP
