#pragma once

#include <string_view>

#include <json.hpp>

namespace critfilt {

/// Parses the TOML subset used by run configs into a JSON object: comments,
/// [section] and [dotted.section] headers, bare or dotted keys, and values
/// that are strings, integers, floats, booleans or (nested, multi-line)
/// arrays.  Throws ConfigError naming the line on malformed input.
nlohmann::json parse_toml_subset(std::string_view text);

}  // namespace critfilt
