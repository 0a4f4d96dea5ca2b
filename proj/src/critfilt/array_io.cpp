#include "critfilt/array_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>

#include "critfilt/error.hpp"

namespace critfilt {

namespace {

std::filesystem::path with_suffix(std::filesystem::path stem, const char* suffix) {
  stem += suffix;
  return stem;
}

std::uint64_t swap_bytes(std::uint64_t v) {
  std::uint64_t out = 0;
  for (int i = 0; i < 8; ++i) out |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
  return out;
}

void to_little_endian(std::vector<double>& values) {
  if constexpr (std::endian::native == std::endian::little) return;
  for (auto& v : values) v = std::bit_cast<double>(swap_bytes(std::bit_cast<std::uint64_t>(v)));
}

}  // namespace

std::filesystem::path array_stem(const std::filesystem::path& path) {
  const auto ext = path.extension();
  if (ext == ".f8" || ext == ".json") return std::filesystem::path(path).replace_extension();
  return path;
}

void write_array(const std::filesystem::path& stem, std::span<const double> values,
                 std::vector<std::size_t> shape) {
  const std::size_t count = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  if (count != values.size()) throw ContractError("array shape does not match value count for " + stem.string());
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());

  std::vector<double> payload(values.begin(), values.end());
  to_little_endian(payload);
  std::ofstream out(with_suffix(stem, ".f8"), std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size() * 8));
  if (!out) throw IoError("cannot write " + with_suffix(stem, ".f8").string());

  write_json(with_suffix(stem, ".json"), {{"shape", shape}, {"dtype", "f8"}, {"order", "row-major"}});
}

ArrayData read_array(const std::filesystem::path& path) {
  const auto stem = array_stem(path);
  const auto meta = read_json(with_suffix(stem, ".json"));
  ArrayData data;
  try {
    if (meta.at("dtype") != "f8" || meta.value("order", "row-major") != "row-major")
      throw IoError(stem.string() + ": only row-major f8 arrays are supported");
    data.shape = meta.at("shape").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(stem.string() + ".json: " + e.what());
  }
  const std::size_t count =
      std::accumulate(data.shape.begin(), data.shape.end(), std::size_t{1}, std::multiplies<>());

  std::ifstream in(with_suffix(stem, ".f8"), std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open " + with_suffix(stem, ".f8").string());
  if (static_cast<std::size_t>(in.tellg()) != count * 8)
    throw IoError(with_suffix(stem, ".f8").string() + ": payload size does not match shape");
  in.seekg(0);
  data.values.resize(count);
  in.read(reinterpret_cast<char*>(data.values.data()), static_cast<std::streamsize>(count * 8));
  if (!in) throw IoError("cannot read " + with_suffix(stem, ".f8").string());
  to_little_endian(data.values);
  return data;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& value) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << value.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace critfilt
