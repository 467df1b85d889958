#pragma once

#include <string>

#include "json.hpp"

namespace zsrc {

// Write to path via a temp file + rename so partially written artifacts never
// appear under the final name.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

nlohmann::json parse_json_file(const std::string& path);

// Shortest-round-trip decimal for a double (17 significant digits are enough
// for bit-exact reload).
std::string format_double(double x);

}  // namespace zsrc
