// SPDX-License-Identifier: Apache-2.0
//
// `MAGIC v1 key=value ...` first lines of checkpoint files.
#pragma once

#include <map>
#include <sstream>
#include <string>

#include "adflow/errors.hpp"

namespace adflow::detail {

inline std::map<std::string, std::string> parse_header(const std::string& line,
                                                       const std::string& magic) {
  std::istringstream is(line);
  std::string found, version;
  is >> found >> version;
  if (found != magic || version != "v1") {
    throw IoError("expected a " + magic + " v1 checkpoint, got '" + line.substr(0, 40) + "'");
  }
  std::map<std::string, std::string> fields;
  std::string token;
  while (is >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw IoError("malformed checkpoint header token " + token);
    fields[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return fields;
}

inline int header_int(const std::map<std::string, std::string>& fields, const std::string& key) {
  const auto it = fields.find(key);
  if (it == fields.end()) throw IoError("checkpoint header lacks " + key);
  try {
    std::size_t used = 0;
    const int v = std::stoi(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw IoError("checkpoint header field " + key + " is not an integer");
  }
}

}  // namespace adflow::detail
