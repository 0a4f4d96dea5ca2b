#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "critfilt/inference.hpp"

namespace critfilt {

/// p(k) = amplitude / (1 + k / knee)^slope
struct PowerLaw {
  double amplitude = 4.0;
  double knee = 1.0;
  double slope = 2.0;
  double operator()(double k) const;
};

enum class ResponseKind { identity, mask, fourier_sampling };

struct ResponseSpec {
  ResponseKind kind = ResponseKind::identity;
  double keep_fraction = 0.5;
  std::optional<std::filesystem::path> mask_file;
  std::optional<std::filesystem::path> modes_file;
  std::size_t mode_count = 0;
  /// Mean |k| of the sampled modes, in units of the largest |k|.
  double radial_scale = 0.15;
  /// Also measure the zero mode (total flux) in random fourier sampling.
  bool include_zero_mode = false;
  std::uint64_t seed = 1;
};

struct NoiseSpec {
  bool estimate = false;
  /// Variance used to draw synthetic noise and, when fixed, in the likelihood.
  double variance = 1.0;
  double beta = 2.0000002;
  std::optional<double> q;
  /// q as a multiple of the data variance; overrides q.
  std::optional<double> q_relative;
};

struct RunConfig {
  std::vector<std::size_t> shape;
  std::vector<double> pixel_size;  ///< empty: unit total volume
  BinningOptions binning;
  std::optional<PowerLaw> truth;
  LocalFunction nonlinearity;
  ResponseSpec response;
  NoiseSpec noise;
  InferenceConfig inference;
  std::filesystem::path output = "out";
  std::optional<std::filesystem::path> data;
  std::uint64_t seed = 0;
  /// Draws used by the moments command unless a fixed sample count is set.
  std::size_t moment_samples = 20;
  bool verbose = false;
  nlohmann::json raw;

  void set_seed(std::uint64_t value);
};

/// Relative paths inside the config resolve against base_dir.  Unknown keys
/// are rejected.
RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig parse_run_config_text(const std::string& text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

struct Problem {
  SpacePtr grid;
  BinningPtr binning;
  LinearMap response;
  /// Kept pixels (mask) or sampled flat mode indices (fourier_sampling).
  std::vector<std::size_t> selection;
};

Problem build_problem(const RunConfig& cfg);
MeasurementSetup build_setup(const RunConfig& cfg, const Problem& problem, const Field& data);
LogSpectrum truth_spectrum(const RunConfig& cfg, const Problem& problem);

struct SyntheticData {
  Field excitation;
  Field signal;
  Field data;
  LogSpectrum truth;
};

/// xi ~ G(0, 1), s = A xi, d = R f(s) + n with n ~ G(0, variance).
SyntheticData synthesize(const RunConfig& cfg, const Problem& problem);

struct BenchReport {
  RunHistory reformulated;
  RunHistory legacy;
  double reference_kl = 0.0;
};

/// Each command writes its artifacts, a manifest.json and a gnuplot script
/// into `out`.
SyntheticData cmd_synth(const RunConfig& cfg, const std::filesystem::path& out);
InferenceResult cmd_reconstruct(const RunConfig& cfg, const std::filesystem::path& out,
                                const IterationObserver& observer = {});
BenchReport cmd_bench(const RunConfig& cfg, const std::filesystem::path& out,
                      const IterationObserver& observer = {});
PosteriorMoments cmd_moments(const RunConfig& cfg, const std::filesystem::path& state_dir,
                             const std::filesystem::path& out);

nlohmann::json record_to_json(const IterationRecord& record);

}  // namespace critfilt
