#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

namespace critfilt {

/// Raw little-endian float64 payload `<stem>.f8` with a JSON sidecar
/// `<stem>.json` holding {"shape", "dtype": "f8", "order": "row-major"}.
struct ArrayData {
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

void write_array(const std::filesystem::path& stem, std::span<const double> values,
                 std::vector<std::size_t> shape);
ArrayData read_array(const std::filesystem::path& stem);

/// Accepts a stem, or a path ending in .f8 or .json.
std::filesystem::path array_stem(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& value);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace critfilt
