#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <memory>
#include <optional>
#include <string>

#include "critfilt.h"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> iterations;
  std::optional<std::size_t> samples;
  std::string data;
  std::string state;
  bool verbose = false;
};

using ConfigPtr = std::unique_ptr<cf_config, decltype(&cf_config_free)>;
using ResultPtr = std::unique_ptr<cf_result, decltype(&cf_result_free)>;

int exit_code(cf_status status) {
  switch (status) {
    case CF_OK: return 0;
    case CF_NUMERIC: return 3;
    case CF_INTERNAL: return 1;
    default: return 2;
  }
}

int report(cf_status status, const char* command) {
  if (status != CF_OK) std::fprintf(stderr, "critfilt %s: %s\n", command, cf_last_error());
  return exit_code(status);
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "run configuration (TOML)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "output directory (default: [output] directory)");
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_flag("--verbose", o.verbose, "print per-iteration progress");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint reconstruction of correlated signals and their power spectra"};
  app.set_version_flag("--version", std::string(cf_version()));
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "draw a signal from the configured prior and simulate data");
  add_common(synth, o);

  auto* recon = app.add_subcommand("reconstruct", "infer signal, spectrum and (optionally) noise level");
  add_common(recon, o);
  recon->add_option("--data", o.data, "data array (overrides [data] path)");
  recon->add_option("--iterations", o.iterations, "outer iterations");
  recon->add_option("--samples", o.samples, "constant sample count per iteration");

  auto* bench = app.add_subcommand("bench", "compare the KL convergence of the legacy and reformulated filters");
  add_common(bench, o);
  bench->add_option("--data", o.data, "data array (default: synthesize from the true spectrum)");
  bench->add_option("--iterations", o.iterations, "outer iterations per method");
  bench->add_option("--samples", o.samples, "constant sample count per iteration");

  auto* moments = app.add_subcommand("moments", "posterior moments from a saved reconstruction state");
  add_common(moments, o);
  moments->add_option("--state", o.state, "reconstruction output directory")->required();
  moments->add_option("--data", o.data, "data array (overrides [data] path)");
  moments->add_option("--samples", o.samples, "number of posterior samples");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  cf_config* raw = nullptr;
  if (cf_config_load(o.config.c_str(), &raw) != CF_OK) {
    std::fprintf(stderr, "critfilt: %s\n", cf_last_error());
    return 2;
  }
  ConfigPtr config(raw, cf_config_free);
  if (o.seed) cf_config_set_seed(config.get(), *o.seed);
  if (o.iterations) cf_config_set_iterations(config.get(), *o.iterations);
  if (!o.out.empty()) cf_config_set_output(config.get(), o.out.c_str());
  if (!o.data.empty()) cf_config_set_data(config.get(), o.data.c_str());
  cf_config_set_verbose(config.get(), o.verbose ? 1 : 0);

  if (synth->parsed()) return report(cf_synth(config.get(), nullptr), "synth");

  if (o.samples) cf_config_set_samples(config.get(), *o.samples);

  if (moments->parsed()) {
    if (o.samples && *o.samples == 0) {
      std::fprintf(stderr, "critfilt moments: --samples must be >= 1\n");
      return 2;
    }
    return report(cf_moments(config.get(), o.state.c_str(), nullptr), "moments");
  }

  cf_result* result_raw = nullptr;
  const bool is_bench = bench->parsed();
  const cf_status status =
      is_bench ? cf_bench(config.get(), nullptr, &result_raw) : cf_reconstruct(config.get(), nullptr, &result_raw);
  ResultPtr result(result_raw, cf_result_free);
  if (result) {
    const std::size_t n = cf_result_iterations(result.get(), 0);
    if (is_bench) {
      const std::size_t m = cf_result_iterations(result.get(), 1);
      std::printf("reformulated KL %.10g after %zu iterations\n", n ? cf_result_kl(result.get(), 0, n - 1) : 0.0, n);
      std::printf("legacy KL       %.10g after %zu iterations\n", m ? cf_result_kl(result.get(), 1, m - 1) : 0.0, m);
      std::printf("reference KL    %.10g\n", cf_result_reference_kl(result.get()));
    } else {
      std::printf("%zu iterations, %s", n, cf_result_converged(result.get()) ? "converged" : "not converged");
      if (n) std::printf(", final KL %.10g", cf_result_kl(result.get(), 0, n - 1));
      std::printf("\n");
    }
    std::printf("outputs in %s\n", cf_config_output(config.get()));
  }
  return report(status, is_bench ? "bench" : "reconstruct");
}
