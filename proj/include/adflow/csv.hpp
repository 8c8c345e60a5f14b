// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace adflow {

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

/// Writes `header` and `rows` as a UTF-8 CSV file with '\n' line endings.
void write_csv(const std::filesystem::path& path, const std::string& header,
               const std::vector<std::string>& rows);

/// Reads a CSV written by write_csv: first line is the header, fields are
/// split on commas (no quoting).
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path,
                                               std::string* header = nullptr);

}  // namespace adflow
