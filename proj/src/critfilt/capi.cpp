#include "critfilt.h"

#include <cmath>
#include <cstdio>
#include <limits>
#include <new>
#include <string>
#include <vector>

#include "critfilt/error.hpp"
#include "critfilt/pipeline.hpp"
#include "critfilt/solvers.hpp"
#include "critfilt/version.hpp"

struct cf_config {
  critfilt::RunConfig run;
  std::string output;
};

struct cf_result {
  std::vector<std::vector<double>> curves;
  double reference_kl = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  std::string failure;
};

namespace {

thread_local std::string last_error;

cf_status fail(cf_status status, const std::string& message) {
  last_error = message;
  return status;
}

template <class Body>
cf_status guarded(Body&& body) {
  try {
    last_error.clear();
    return body();
  } catch (const critfilt::ConfigError& e) {
    return fail(CF_CONFIG, e.what());
  } catch (const critfilt::ContractError& e) {
    return fail(CF_CONFIG, e.what());
  } catch (const critfilt::IoError& e) {
    return fail(CF_IO, e.what());
  } catch (const critfilt::NumericError& e) {
    return fail(CF_NUMERIC, e.what());
  } catch (const critfilt::ConvergenceError& e) {
    return fail(CF_NUMERIC, e.what());
  } catch (const critfilt::StallError& e) {
    return fail(CF_NUMERIC, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(CF_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(CF_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(CF_INTERNAL, e.what());
  } catch (...) {
    return fail(CF_INTERNAL, "unknown error");
  }
}

std::filesystem::path output_dir(const cf_config* config, const char* out_dir) {
  return out_dir ? std::filesystem::path(out_dir) : config->run.output;
}

critfilt::IterationObserver progress(const cf_config* config, const char* tag) {
  if (!config->run.verbose) return {};
  return [tag](const critfilt::IterationRecord& r) {
    std::fprintf(stderr, "[%s] iteration %zu  KL %.10g  H %.10g  samples %zu  %.2fs\n", tag, r.iteration, r.kl,
                 r.hamiltonian, r.samples, r.wall_time);
  };
}

std::vector<double> kl_curve(const critfilt::RunHistory& h) {
  std::vector<double> out;
  for (const auto& r : h.records) out.push_back(r.kl);
  return out;
}

}  // namespace

extern "C" {

const char* cf_last_error(void) { return last_error.c_str(); }

const char* cf_version(void) { return critfilt::kVersion; }

cf_status cf_config_load(const char* path, cf_config** out) {
  if (!path || !out) return fail(CF_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    auto* c = new cf_config{critfilt::load_run_config(path), {}};
    c->output = c->run.output.string();
    *out = c;
    return CF_OK;
  });
}

cf_status cf_config_parse(const char* text, const char* base_dir, cf_config** out) {
  if (!text || !out) return fail(CF_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    auto* c = new cf_config{critfilt::parse_run_config_text(text, base_dir ? base_dir : "."), {}};
    c->output = c->run.output.string();
    *out = c;
    return CF_OK;
  });
}

void cf_config_free(cf_config* config) { delete config; }

cf_status cf_config_set_seed(cf_config* config, uint64_t seed) {
  if (!config) return fail(CF_INVALID_ARGUMENT, "null config");
  config->run.set_seed(seed);
  return CF_OK;
}

cf_status cf_config_set_iterations(cf_config* config, size_t iterations) {
  if (!config) return fail(CF_INVALID_ARGUMENT, "null config");
  config->run.inference.outer_iterations = iterations;
  return CF_OK;
}

cf_status cf_config_set_samples(cf_config* config, size_t samples) {
  if (!config) return fail(CF_INVALID_ARGUMENT, "null config");
  config->run.inference.schedule.fixed = samples;
  return CF_OK;
}

cf_status cf_config_set_output(cf_config* config, const char* directory) {
  if (!config || !directory) return fail(CF_INVALID_ARGUMENT, "null argument");
  config->run.output = directory;
  config->output = directory;
  return CF_OK;
}

cf_status cf_config_set_data(cf_config* config, const char* path) {
  if (!config || !path) return fail(CF_INVALID_ARGUMENT, "null argument");
  if (*path) config->run.data = std::filesystem::path(path);
  else config->run.data.reset();
  return CF_OK;
}

cf_status cf_config_set_verbose(cf_config* config, int verbose) {
  if (!config) return fail(CF_INVALID_ARGUMENT, "null config");
  config->run.verbose = verbose != 0;
  return CF_OK;
}

const char* cf_config_output(const cf_config* config) { return config ? config->output.c_str() : ""; }

cf_status cf_synth(const cf_config* config, const char* out_dir) {
  if (!config) return fail(CF_INVALID_ARGUMENT, "null config");
  return guarded([&] {
    critfilt::cmd_synth(config->run, output_dir(config, out_dir));
    return CF_OK;
  });
}

cf_status cf_reconstruct(const cf_config* config, const char* out_dir, cf_result** result) {
  if (!config) return fail(CF_INVALID_ARGUMENT, "null config");
  return guarded([&] {
    const auto run = critfilt::cmd_reconstruct(config->run, output_dir(config, out_dir), progress(config, "reconstruct"));
    auto* r = new cf_result;
    r->curves.push_back(kl_curve(run.history));
    r->converged = run.history.converged;
    if (run.history.failure) r->failure = *run.history.failure;
    if (result) *result = r;
    else delete r;
    if (run.history.failure) return fail(CF_NUMERIC, *run.history.failure);
    return CF_OK;
  });
}

cf_status cf_bench(const cf_config* config, const char* out_dir, cf_result** result) {
  if (!config) return fail(CF_INVALID_ARGUMENT, "null config");
  return guarded([&] {
    const auto report = critfilt::cmd_bench(config->run, output_dir(config, out_dir), progress(config, "bench"));
    auto* r = new cf_result;
    r->curves = {kl_curve(report.reformulated), kl_curve(report.legacy)};
    r->reference_kl = report.reference_kl;
    r->converged = report.reformulated.converged;
    if (report.reformulated.failure) r->failure = "reformulated: " + *report.reformulated.failure;
    if (report.legacy.failure) r->failure += (r->failure.empty() ? "" : "; ") + std::string("legacy: ") + *report.legacy.failure;
    const bool failed = !r->failure.empty();
    const std::string message = r->failure;
    if (result) *result = r;
    else delete r;
    if (failed) return fail(CF_NUMERIC, message);
    return CF_OK;
  });
}

cf_status cf_moments(const cf_config* config, const char* state_dir, const char* out_dir) {
  if (!config || !state_dir) return fail(CF_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    critfilt::cmd_moments(config->run, state_dir, output_dir(config, out_dir));
    return CF_OK;
  });
}

size_t cf_result_curve_count(const cf_result* result) { return result ? result->curves.size() : 0; }

size_t cf_result_iterations(const cf_result* result, size_t curve) {
  if (!result || curve >= result->curves.size()) return 0;
  return result->curves[curve].size();
}

double cf_result_kl(const cf_result* result, size_t curve, size_t iteration) {
  if (!result || curve >= result->curves.size() || iteration >= result->curves[curve].size())
    return std::numeric_limits<double>::quiet_NaN();
  return result->curves[curve][iteration];
}

double cf_result_reference_kl(const cf_result* result) {
  return result ? result->reference_kl : std::numeric_limits<double>::quiet_NaN();
}

int cf_result_converged(const cf_result* result) { return result && result->converged ? 1 : 0; }

const char* cf_result_failure(const cf_result* result) {
  return result && !result->failure.empty() ? result->failure.c_str() : nullptr;
}

void cf_result_free(cf_result* result) { delete result; }

}  // extern "C"
