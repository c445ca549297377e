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

#ifndef ISOVAL_TESTS_SUPPORT_HPP
#define ISOVAL_TESTS_SUPPORT_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "isoval/geo.hpp"

namespace isoval::testing {

/// Small seeded generator for property tests.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    double normal(double mean = 0.0, double sd = 1.0) { return std::normal_distribution<double>(mean, sd)(rng_); }
    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
    bool coin() { return index(2) == 1; }

    Location location() { return {uniform(-90.0, 90.0), uniform(-180.0, 180.0)}; }
    Location location_in(const BoundingBox& b) { return {uniform(b.lat_min, b.lat_max), uniform(b.lon_min, b.lon_max)}; }

    /// Random set-function table over n players (bitmask indexed).
    std::vector<double> utility_table(std::size_t n) {
        std::vector<double> t(std::size_t{1} << n);
        for (auto& v : t) v = normal();
        return t;
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

/// Central angle via 3D unit vectors: atan2(|p x q|, p . q).
inline double vector_distance_km(const Location& a, const Location& b) {
    const double d = std::numbers::pi / 180.0;
    auto unit = [d](const Location& x) {
        return std::array<double, 3>{std::cos(x.lat() * d) * std::cos(x.lon() * d),
                                     std::cos(x.lat() * d) * std::sin(x.lon() * d), std::sin(x.lat() * d)};
    };
    const auto p = unit(a);
    const auto q = unit(b);
    const double cx = p[1] * q[2] - p[2] * q[1];
    const double cy = p[2] * q[0] - p[0] * q[2];
    const double cz = p[0] * q[1] - p[1] * q[0];
    const double dot = p[0] * q[0] + p[1] * q[1] + p[2] * q[2];
    return kEarthRadiusKm * std::atan2(std::sqrt(cx * cx + cy * cy + cz * cz), dot);
}

/// Shapley values by averaging marginals over all n! orderings.
template <typename V>
std::vector<double> permutation_shapley(std::size_t n, V&& v) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> phi(n, 0.0);
    double count = 0.0;
    do {
        std::size_t mask = 0;
        double prev = v(mask);
        for (std::size_t i : order) {
            mask |= std::size_t{1} << i;
            const double cur = v(mask);
            phi[i] += cur - prev;
            prev = cur;
        }
        count += 1.0;
    } while (std::next_permutation(order.begin(), order.end()));
    for (auto& p : phi) p /= count;
    return phi;
}

inline std::vector<std::string> make_ids(std::size_t n, const std::string& prefix = "z") {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(i + 1));
    return ids;
}

}  // namespace isoval::testing

#endif  // ISOVAL_TESTS_SUPPORT_HPP
