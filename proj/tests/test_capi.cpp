#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>

#include "critfilt.h"

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("critfilt_test_capi_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kSmall = R"(
seed = 3
[grid]
shape = [64]
[spectrum]
amplitude = 4.0
knee = 1.0
slope = 2.0
initial = 0.05
[response]
kind = "mask"
keep_fraction = 0.7
[noise]
variance = 0.1
[inference]
iterations = 3
samples = 2
[output]
directory = "recon"
[data]
path = "synth/data"
)";

struct Config {
  cf_config* ptr = nullptr;
  ~Config() { cf_config_free(ptr); }
};

struct Result {
  cf_result* ptr = nullptr;
  ~Result() { cf_result_free(ptr); }
};

}  // namespace

TEST_CASE("null handles and bad input are reported") {
  CHECK(std::string(cf_version()).size() > 0);
  cf_config* out = nullptr;
  CHECK(cf_config_parse(nullptr, nullptr, &out) == CF_INVALID_ARGUMENT);
  CHECK(cf_config_parse(kSmall, nullptr, nullptr) == CF_INVALID_ARGUMENT);
  CHECK(cf_config_set_seed(nullptr, 1) == CF_INVALID_ARGUMENT);
  CHECK(cf_synth(nullptr, nullptr) == CF_INVALID_ARGUMENT);
  CHECK(cf_moments(nullptr, "x", nullptr) == CF_INVALID_ARGUMENT);
  CHECK(std::string(cf_last_error()).size() > 0);

  CHECK(cf_config_parse("[grid]\nshape = [64]\nbogus = 1", nullptr, &out) == CF_CONFIG);
  CHECK(out == nullptr);
  CHECK(std::string(cf_last_error()).find("bogus") != std::string::npos);
  CHECK(cf_config_load("/nonexistent/config.toml", &out) == CF_CONFIG);

  CHECK(cf_result_curve_count(nullptr) == 0);
  CHECK(std::isnan(cf_result_kl(nullptr, 0, 0)));
  CHECK(cf_result_failure(nullptr) == nullptr);
  cf_config_free(nullptr);
  cf_result_free(nullptr);
}

TEST_CASE("synth, reconstruct and moments through the C interface") {
  const auto dir = scratch("pipeline");
  Config cfg;
  REQUIRE(cf_config_parse(kSmall, dir.c_str(), &cfg.ptr) == CF_OK);
  CHECK(fs::path(cf_config_output(cfg.ptr)) == dir / "recon");

  REQUIRE(cf_synth(cfg.ptr, (dir / "synth").c_str()) == CF_OK);
  CHECK(fs::exists(dir / "synth" / "data.f8"));
  CHECK(fs::exists(dir / "synth" / "manifest.json"));

  Result rec;
  REQUIRE(cf_reconstruct(cfg.ptr, nullptr, &rec.ptr) == CF_OK);
  REQUIRE(cf_result_curve_count(rec.ptr) == 1);
  CHECK(cf_result_iterations(rec.ptr, 0) == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::isfinite(cf_result_kl(rec.ptr, 0, i)));
  CHECK(std::isnan(cf_result_kl(rec.ptr, 0, 3)));
  CHECK(cf_result_failure(rec.ptr) == nullptr);
  for (const char* f : {"t.f8", "alpha.f8", "power.f8", "signal.f8", "samples.f8", "history.jsonl", "binning.json",
                        "manifest.json", "plot.gp"})
    CHECK(fs::exists(dir / "recon" / f));

  CHECK(cf_config_set_samples(cfg.ptr, 4) == CF_OK);
  REQUIRE(cf_moments(cfg.ptr, (dir / "recon").c_str(), (dir / "moments").c_str()) == CF_OK);
  CHECK(fs::exists(dir / "moments" / "variance.f8"));
  CHECK(cf_moments(cfg.ptr, (dir / "missing").c_str(), (dir / "moments2").c_str()) == CF_CONFIG);
}

TEST_CASE("bench result carries both curves and the reference") {
  const auto dir = scratch("bench");
  Config cfg;
  REQUIRE(cf_config_parse(kSmall, dir.c_str(), &cfg.ptr) == CF_OK);
  REQUIRE(cf_config_set_data(cfg.ptr, "") == CF_OK);
  REQUIRE(cf_config_set_iterations(cfg.ptr, 1) == CF_OK);
  Result res;
  REQUIRE(cf_bench(cfg.ptr, (dir / "bench").c_str(), &res.ptr) == CF_OK);
  REQUIRE(cf_result_curve_count(res.ptr) == 2);
  CHECK(cf_result_iterations(res.ptr, 0) == 1);
  CHECK(cf_result_iterations(res.ptr, 1) == 1);
  CHECK(std::isfinite(cf_result_reference_kl(res.ptr)));
  CHECK(fs::exists(dir / "bench" / "bench.json"));
}

TEST_CASE("solver failures return CF_NUMERIC with a partial result") {
  const auto dir = scratch("numeric");
  Config cfg;
  REQUIRE(cf_config_parse(kSmall, dir.c_str(), &cfg.ptr) == CF_OK);
  REQUIRE(cf_synth(cfg.ptr, (dir / "synth").c_str()) == CF_OK);
  Config strict;
  std::string fixed = kSmall;
  fixed.replace(fixed.find("samples = 2"), 11, "samples = 2\ncg_tol = 1e-14\ncg_max_iter = 1");
  REQUIRE(cf_config_parse(fixed.c_str(), dir.c_str(), &strict.ptr) == CF_OK);
  Result res;
  CHECK(cf_reconstruct(strict.ptr, nullptr, &res.ptr) == CF_NUMERIC);
  REQUIRE(res.ptr != nullptr);
  CHECK(cf_result_failure(res.ptr) != nullptr);
  CHECK(fs::exists(dir / "recon" / "manifest.json"));
}
