#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("critfilt_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = std::string("\"") + CRITFILT_CLI + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<double> doubles(const fs::path& path) {
  const std::string raw = slurp(path);
  std::vector<double> v(raw.size() / 8);
  std::memcpy(v.data(), raw.data(), v.size() * 8);
  return v;
}

fs::path write_config(const fs::path& dir, const std::string& extra = "", const std::string& f = "identity") {
  const auto path = dir / "run.toml";
  std::ofstream(path) << "seed = 4\n[grid]\nshape = [64]\n[spectrum]\namplitude = 4.0\nknee = 1.0\nslope = 2.0\n"
                      << "initial = 0.05\n[nonlinearity]\nlabel = \"" << f << "\"\n[response]\nkind = \"mask\"\n"
                      << "[noise]\nvariance = 0.1\n[inference]\niterations = 2\nsamples = 2\n" << extra
                      << "[output]\ndirectory = \"recon\"\n[data]\npath = \"synth/data\"\n";
  return path;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  const auto dir = scratch("usage");
  CHECK(run("") == 2);
  CHECK(run("--help") == 0);
  CHECK(run("frobnicate") == 2);
  CHECK(run("synth") == 2);
  CHECK(run("synth --config " + (dir / "absent.toml").string()) == 2);
  std::ofstream(dir / "bad.toml") << "[grid]\nshape = [64]\nunknown_key = 3\n";
  CHECK(run("synth --config " + (dir / "bad.toml").string()) == 2);
  std::ofstream(dir / "broken.toml") << "[grid\n";
  CHECK(run("reconstruct --config " + (dir / "broken.toml").string()) == 2);
}

TEST_CASE("synth is deterministic and reconstruct runs on its output") {
  const auto dir = scratch("pipeline");
  const auto cfg = write_config(dir);
  REQUIRE(run("synth --config " + cfg.string() + " --out " + (dir / "synth").string()) == 0);
  REQUIRE(run("synth --config " + cfg.string() + " --out " + (dir / "again").string()) == 0);
  for (const char* f : {"data.f8", "signal.f8", "excitation.f8", "truth_power.f8", "mask.f8"}) {
    CAPTURE(f);
    CHECK(slurp(dir / "synth" / f) == slurp(dir / "again" / f));
    CHECK(!slurp(dir / "synth" / f).empty());
  }
  REQUIRE(run("synth --config " + cfg.string() + " --seed 5 --out " + (dir / "other").string()) == 0);
  CHECK(slurp(dir / "synth" / "data.f8") != slurp(dir / "other" / "data.f8"));

  CHECK(run("reconstruct --config " + cfg.string()) == 0);
  CHECK(fs::exists(dir / "recon" / "history.jsonl"));
  CHECK(run("moments --config " + cfg.string() + " --state " + (dir / "recon").string() + " --samples 3 --out " +
            (dir / "moments").string()) == 0);
  CHECK(fs::exists(dir / "moments" / "variance.f8"));
  CHECK(run("moments --config " + cfg.string() + " --state " + (dir / "recon").string() + " --samples 0") == 2);

  // Data from a different grid is a config error.
  const auto wide = dir / "wide";
  fs::create_directories(wide);
  std::string text = slurp(cfg);
  text.replace(text.find("[64]"), 4, "[128]");
  std::ofstream(wide / "run.toml") << text;
  CHECK(run("reconstruct --config " + (wide / "run.toml").string() + " --data " + (dir / "synth" / "data").string()) == 2);
}

TEST_CASE("zero iterations write the initialization") {
  const auto dir = scratch("init");
  const auto cfg = write_config(dir);
  REQUIRE(run("synth --config " + cfg.string() + " --out " + (dir / "synth").string()) == 0);
  REQUIRE(run("reconstruct --config " + cfg.string() + " --iterations 0") == 0);
  for (double a : doubles(dir / "recon" / "alpha.f8")) CHECK(a == doctest::Approx(0.5 * std::log(0.05)).epsilon(1e-15));
  const auto t = doubles(dir / "recon" / "t.f8");
  double worst = 0.0;
  for (double v : t) worst = std::max(worst, std::abs(v));
  CHECK(worst > 0.0);
  CHECK(worst < 1e-2);
  CHECK(slurp(dir / "recon" / "history.jsonl").empty());
}

TEST_CASE("numerical failures exit with 3 and leave partial outputs") {
  const auto dir = scratch("numeric");
  const auto cfg = write_config(dir, "cg_tol = 1e-14\ncg_max_iter = 1\n");
  REQUIRE(run("synth --config " + cfg.string() + " --out " + (dir / "synth").string()) == 0);
  CHECK(run("reconstruct --config " + cfg.string()) == 3);
  CHECK(fs::exists(dir / "recon" / "manifest.json"));
  CHECK(slurp(dir / "recon" / "manifest.json").find("failure") != std::string::npos);
}

TEST_CASE("bench needs a linear model") {
  const auto dir = scratch("bench");
  CHECK(run("bench --config " + write_config(dir, "", "tanh").string()) == 2);
  const auto cfg = write_config(dir);
  REQUIRE(run("synth --config " + cfg.string() + " --out " + (dir / "synth").string()) == 0);
  CHECK(run("bench --config " + cfg.string() + " --iterations 1 --out " + (dir / "b").string()) == 0);
  CHECK(fs::exists(dir / "b" / "bench.json"));
}
