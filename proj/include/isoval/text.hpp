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

#ifndef ISOVAL_TEXT_HPP
#define ISOVAL_TEXT_HPP

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace isoval {

/// Shortest decimal form that round-trips to the same double.
std::string format_number(double value);

/// Full-string parse after trimming blanks; nullopt on any other trailing characters or empty input.
std::optional<double> parse_number(std::string_view text);

/// Splits one CSV record (RFC 4180 quoting, no embedded newlines).
std::vector<std::string> split_csv_record(std::string_view line);

/// Quotes a field if it contains a comma, quote, or leading/trailing space.
std::string csv_field(std::string_view field);

}  // namespace isoval

#endif  // ISOVAL_TEXT_HPP
