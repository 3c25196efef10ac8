// Copyright 2026 The regimen-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Minimal CSV reading and writing for the result and dataset files. Fields
// are never quoted on output unless they contain a comma or quote.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace regimen::csv {

using Row = std::vector<std::string>;

struct Table {
  Row header;
  std::vector<Row> rows;

  /// Index of a header column; throws std::out_of_range if absent.
  std::size_t column(std::string_view name) const;
};

std::string format_double(double v);  // %.17g
std::string escape(std::string_view field);
std::string join(const Row& row);
Row parse_line(std::string_view line);

Table read(const std::filesystem::path& path);
/// Writes to a temporary sibling and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const Table& table);
void write_text_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace regimen::csv
