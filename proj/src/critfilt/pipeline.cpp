#include "critfilt/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "critfilt/array_io.hpp"
#include "critfilt/error.hpp"
#include "critfilt/harmonic.hpp"
#include "critfilt/toml_subset.hpp"
#include "critfilt/version.hpp"

namespace critfilt {

namespace fs = std::filesystem;
using nlohmann::json;

double PowerLaw::operator()(double k) const { return amplitude / std::pow(1.0 + k / knee, slope); }

void RunConfig::set_seed(std::uint64_t value) {
  seed = value;
  inference.seed = value;
}

namespace {

// Stream ids of the job seed that are not used by inference iterations.
constexpr std::uint64_t kSynthStream = std::uint64_t{1} << 40;
constexpr std::uint64_t kResponseStream = (std::uint64_t{1} << 40) + 1;
constexpr std::uint64_t kMomentStream = (std::uint64_t{1} << 40) + 2;

// Typed access to one config section; every key must be consumed.
class Section {
 public:
  Section(const json& doc, std::string name) : name_(std::move(name)) {
    if (!doc.contains(name_)) return;
    node_ = &doc.at(name_);
    if (!node_->is_object()) throw ConfigError("[" + name_ + "] must be a section");
  }

  bool present() const { return node_ != nullptr; }
  bool has(const std::string& key) const { return node_ && node_->contains(key); }

  std::optional<double> number(const std::string& key) {
    const json* v = take(key);
    if (!v) return std::nullopt;
    if (!v->is_number()) fail(key, "expected a number");
    return v->get<double>();
  }

  std::optional<std::size_t> count(const std::string& key) {
    const json* v = take(key);
    if (!v) return std::nullopt;
    if (!v->is_number_integer() || v->get<long long>() < 0) fail(key, "expected a nonnegative integer");
    return v->get<std::size_t>();
  }

  std::optional<bool> boolean(const std::string& key) {
    const json* v = take(key);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) fail(key, "expected true or false");
    return v->get<bool>();
  }

  std::optional<std::string> string(const std::string& key) {
    const json* v = take(key);
    if (!v) return std::nullopt;
    if (!v->is_string()) fail(key, "expected a string");
    return v->get<std::string>();
  }

  std::optional<std::vector<double>> numbers(const std::string& key) {
    const json* v = take(key);
    if (!v) return std::nullopt;
    return number_list(key, *v);
  }

  std::optional<std::vector<std::size_t>> counts(const std::string& key) {
    const json* v = take(key);
    if (!v) return std::nullopt;
    if (!v->is_array()) fail(key, "expected a list of integers");
    std::vector<std::size_t> out;
    for (const auto& e : *v) {
      if (!e.is_number_integer() || e.get<long long>() < 0) fail(key, "expected a list of nonnegative integers");
      out.push_back(e.get<std::size_t>());
    }
    return out;
  }

  std::optional<std::vector<std::vector<double>>> number_lists(const std::string& key) {
    const json* v = take(key);
    if (!v) return std::nullopt;
    if (!v->is_array()) fail(key, "expected a list of number lists");
    std::vector<std::vector<double>> out;
    for (const auto& e : *v) out.push_back(number_list(key, e));
    return out;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError("[" + name_ + "] " + key + ": " + what);
  }

  void finish() const {
    if (!node_) return;
    for (const auto& [key, value] : node_->items())
      if (!used_.count(key)) throw ConfigError("[" + name_ + "] unknown key '" + key + "'");
  }

 private:
  const json* take(const std::string& key) {
    if (!node_ || !node_->contains(key)) return nullptr;
    used_.insert(key);
    return &node_->at(key);
  }

  std::vector<double> number_list(const std::string& key, const json& v) const {
    if (!v.is_array()) fail(key, "expected a list of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) fail(key, "expected a list of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::string name_;
  const json* node_ = nullptr;
  std::set<std::string> used_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

void positive(Section& s, const std::string& key, double v) {
  if (!(v > 0.0) || !std::isfinite(v)) s.fail(key, "must be positive");
}

void parse_grid(const json& doc, RunConfig& cfg) {
  Section s(doc, "grid");
  if (!s.present()) throw ConfigError("[grid] section is required");
  const auto shape = s.counts("shape");
  if (!shape) s.fail("shape", "is required");
  if (shape->empty() || shape->size() > 2) s.fail("shape", "must have one or two axes");
  for (auto n : *shape)
    if (n < 2) s.fail("shape", "every axis needs at least 2 pixels");
  cfg.shape = *shape;
  if (auto px = s.numbers("pixel_size")) {
    if (px->size() != shape->size()) s.fail("pixel_size", "needs one entry per axis");
    for (double v : *px) positive(s, "pixel_size", v);
    cfg.pixel_size = *px;
  }
  s.finish();
}

void parse_binning(const json& doc, RunConfig& cfg) {
  Section s(doc, "binning");
  if (auto scheme = s.string("scheme")) {
    if (*scheme == "auto") cfg.binning.scheme = BinningScheme::automatic;
    else if (*scheme == "distinct") cfg.binning.scheme = BinningScheme::distinct;
    else if (*scheme == "log") cfg.binning.scheme = BinningScheme::logarithmic;
    else s.fail("scheme", "must be auto, distinct or log");
  }
  if (auto n = s.count("log_bins")) {
    if (*n < 4) s.fail("log_bins", "must be at least 4");
    cfg.binning.log_bins = *n;
  }
  s.finish();
}

void parse_spectrum(const json& doc, RunConfig& cfg) {
  Section s(doc, "spectrum");
  if (s.has("amplitude") || s.has("knee") || s.has("slope")) {
    PowerLaw law;
    if (auto v = s.number("amplitude")) law.amplitude = *v;
    if (auto v = s.number("knee")) law.knee = *v;
    if (auto v = s.number("slope")) law.slope = *v;
    positive(s, "amplitude", law.amplitude);
    positive(s, "knee", law.knee);
    if (!std::isfinite(law.slope)) s.fail("slope", "must be finite");
    cfg.truth = law;
  }
  if (auto v = s.number("initial")) {
    positive(s, "initial", *v);
    cfg.inference.initial_power = *v;
  }
  if (auto v = s.number("sigma")) {
    positive(s, "sigma", *v);
    cfg.inference.sigma = *v;
  }
  s.finish();
}

void parse_nonlinearity(const json& doc, RunConfig& cfg) {
  Section s(doc, "nonlinearity");
  const std::string label = s.string("label").value_or("identity");
  if (label == "custom") {
    auto breaks = s.numbers("breakpoints");
    auto coeffs = s.number_lists("coefficients");
    if (!breaks || !coeffs) s.fail("label", "custom needs breakpoints and coefficients");
    cfg.nonlinearity = piecewise_polynomial("custom", *breaks, *coeffs);
  } else {
    try {
      cfg.nonlinearity = builtin(label);
    } catch (const ConfigError& e) {
      s.fail("label", e.what());
    }
  }
  s.finish();
}

void parse_response(const json& doc, const fs::path& base, RunConfig& cfg) {
  Section s(doc, "response");
  auto& r = cfg.response;
  const std::string kind = s.string("kind").value_or("identity");
  if (kind == "identity") r.kind = ResponseKind::identity;
  else if (kind == "mask") r.kind = ResponseKind::mask;
  else if (kind == "fourier_sampling") r.kind = ResponseKind::fourier_sampling;
  else s.fail("kind", "must be identity, mask or fourier_sampling");
  if (auto v = s.number("keep_fraction")) {
    if (!(*v > 0.0 && *v <= 1.0)) s.fail("keep_fraction", "must lie in (0, 1]");
    r.keep_fraction = *v;
  }
  if (auto v = s.string("mask_file")) r.mask_file = resolve(base, *v);
  if (auto v = s.string("modes_file")) r.modes_file = resolve(base, *v);
  if (auto v = s.count("mode_count")) r.mode_count = *v;
  if (auto v = s.number("radial_scale")) {
    positive(s, "radial_scale", *v);
    r.radial_scale = *v;
  }
  if (auto v = s.boolean("include_zero_mode")) r.include_zero_mode = *v;
  if (auto v = s.count("seed")) r.seed = *v;
  if (r.kind == ResponseKind::fourier_sampling && !r.modes_file && r.mode_count == 0)
    s.fail("mode_count", "fourier_sampling needs mode_count or modes_file");
  s.finish();
}

void parse_noise(const json& doc, RunConfig& cfg) {
  Section s(doc, "noise");
  auto& n = cfg.noise;
  const std::string mode = s.string("mode").value_or("fixed");
  if (mode == "fixed") n.estimate = false;
  else if (mode == "estimate") n.estimate = true;
  else s.fail("mode", "must be fixed or estimate");
  if (auto v = s.number("variance")) {
    if (!(*v >= 0.0) || !std::isfinite(*v)) s.fail("variance", "must be nonnegative");
    n.variance = *v;
  }
  if (auto v = s.number("beta")) {
    if (!(*v > 1.0)) s.fail("beta", "must exceed 1");
    n.beta = *v;
  }
  if (auto v = s.number("q")) {
    positive(s, "q", *v);
    n.q = *v;
  }
  if (auto v = s.number("q_relative")) {
    positive(s, "q_relative", *v);
    n.q_relative = *v;
  }
  s.finish();
}

void parse_inference(const json& doc, RunConfig& cfg) {
  Section s(doc, "inference");
  auto& c = cfg.inference;
  if (auto v = s.count("iterations")) c.outer_iterations = *v;
  if (auto v = s.count("samples_initial")) c.schedule.initial = *v;
  if (auto v = s.count("samples_double_every")) c.schedule.double_every = *v;
  if (auto v = s.count("samples_cap")) c.schedule.cap = *v;
  if (auto v = s.count("samples")) c.schedule.fixed = *v;
  if (auto v = s.boolean("antithetic")) c.sampling.antithetic = *v;
  if (auto v = s.count("excitation_steps")) c.excitation_newton.max_steps = *v;
  if (auto v = s.count("spectrum_steps")) c.amplitude_newton.max_steps = *v;
  if (auto v = s.number("grad_tol")) c.excitation_newton.grad_tol = c.amplitude_newton.grad_tol = *v;
  if (auto v = s.number("step_damping")) c.excitation_newton.step_damping = c.amplitude_newton.step_damping = *v;
  if (auto v = s.number("line_search_shrink"))
    c.excitation_newton.line_search_shrink = c.amplitude_newton.line_search_shrink = *v;
  if (auto v = s.number("cg_tol")) c.excitation_newton.cg.rel_tol = c.amplitude_newton.cg.rel_tol = *v;
  if (auto v = s.number("sample_cg_tol")) c.sampling.cg.rel_tol = *v;
  if (auto v = s.count("cg_max_iter"))
    c.excitation_newton.cg.max_iter = c.amplitude_newton.cg.max_iter = c.sampling.cg.max_iter = *v;
  if (auto v = s.boolean("update_spectrum")) c.update_spectrum = *v;
  if (auto v = s.number("convergence_tol")) c.convergence_tol = *v;
  if (auto v = s.count("convergence_window")) c.convergence_window = *v;
  if (auto v = s.count("legacy_probes")) c.legacy_probes = *v;
  s.finish();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("[inference] ") + e.what());
  }
}

void parse_output(const json& doc, const fs::path& base, RunConfig& cfg) {
  Section s(doc, "output");
  if (auto v = s.string("directory")) cfg.output = resolve(base, *v);
  if (auto v = s.count("moment_samples")) {
    if (*v < 1) s.fail("moment_samples", "must be >= 1");
    cfg.moment_samples = *v;
  }
  s.finish();
  Section d(doc, "data");
  if (auto v = d.string("path")) cfg.data = resolve(base, *v);
  d.finish();
}

}  // namespace

RunConfig parse_run_config(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config must be a table");
  static const std::set<std::string> known{"seed",     "grid",  "binning",   "spectrum", "nonlinearity",
                                           "response", "noise", "inference", "output",   "data"};
  for (const auto& [key, value] : doc.items())
    if (!known.count(key)) throw ConfigError("unknown config entry '" + key + "'");

  RunConfig cfg;
  cfg.raw = doc;
  cfg.nonlinearity = builtin("identity");
  if (doc.contains("seed")) {
    const auto& v = doc.at("seed");
    if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError("seed: expected a nonnegative integer");
    cfg.set_seed(v.get<std::uint64_t>());
  }
  parse_grid(doc, cfg);
  parse_binning(doc, cfg);
  parse_spectrum(doc, cfg);
  parse_nonlinearity(doc, cfg);
  parse_response(doc, base_dir, cfg);
  parse_noise(doc, cfg);
  parse_inference(doc, cfg);
  parse_output(doc, base_dir, cfg);
  return cfg;
}

RunConfig parse_run_config_text(const std::string& text, const fs::path& base_dir) {
  return parse_run_config(parse_toml_subset(text), base_dir);
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config_text(buffer.str(), path.has_parent_path() ? path.parent_path() : fs::path("."));
}

namespace {

std::vector<std::size_t> random_mask(const RunConfig& cfg, const SpacePtr& grid) {
  Rng rng = split_stream(cfg.response.seed, kResponseStream);
  std::bernoulli_distribution keep(cfg.response.keep_fraction);
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < grid->size(); ++i)
    if (keep(rng)) kept.push_back(i);
  return kept;
}

std::vector<std::size_t> mask_from_file(const fs::path& path, const SpacePtr& grid) {
  const auto arr = read_array(path);
  if (arr.values.size() != grid->size()) throw ConfigError("[response] mask_file size does not match the grid");
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < arr.values.size(); ++i)
    if (arr.values[i] != 0.0) kept.push_back(i);
  return kept;
}

std::vector<std::size_t> modes_from_file(const fs::path& path, const SpacePtr& grid) {
  const auto arr = read_array(path);
  std::vector<std::size_t> modes;
  for (double v : arr.values) {
    if (!(v >= 0.0) || v != std::floor(v) || v >= static_cast<double>(grid->size()))
      throw ConfigError("[response] modes_file entries must be flat mode indices of the grid");
    modes.push_back(static_cast<std::size_t>(v));
  }
  return modes;
}

// Uniform angles, exponentially distributed radii; at most one mode of every
// +-k pair.  The zero mode is only listed (first) when requested.
std::vector<std::size_t> random_modes(const RunConfig& cfg, const SpacePtr& grid) {
  const auto harmonic = Space::harmonic_of(grid);
  const auto& shape = grid->shape();
  const std::size_t want = cfg.response.mode_count;
  if (want * 2 + 1 > grid->size()) throw ConfigError("[response] mode_count exceeds the independent modes");
  std::size_t half = shape[0] / 2;
  for (auto n : shape) half = std::min(half, n / 2);
  const double mean_radius = std::max(1.0, cfg.response.radial_scale * static_cast<double>(half));

  Rng rng = split_stream(cfg.response.seed, kResponseStream);
  std::exponential_distribution<double> radius(1.0 / mean_radius);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::set<std::size_t> taken{0};
  std::vector<std::size_t> modes;
  if (cfg.response.include_zero_mode) modes.push_back(0);
  const std::size_t want_total = want + modes.size();
  const std::size_t max_attempts = 1000 * want + 100000;
  for (std::size_t attempt = 0; modes.size() < want_total; ++attempt) {
    if (attempt == max_attempts) throw ConfigError("[response] could not place mode_count distinct modes");
    const double r = radius(rng);
    const double phi = angle(rng);
    std::vector<long> k;
    if (shape.size() == 1) k = {std::lround(r * std::cos(phi))};
    else k = {std::lround(r * std::cos(phi)), std::lround(r * std::sin(phi))};
    std::size_t flat = 0;
    bool inside = true;
    for (std::size_t a = 0; a < shape.size(); ++a) {
      const long n = static_cast<long>(shape[a]);
      if (k[a] > n / 2 || k[a] < -((n - 1) / 2)) inside = false;
      flat = flat * shape[a] + static_cast<std::size_t>(((k[a] % n) + n) % n);
    }
    if (!inside || taken.count(flat)) continue;
    taken.insert(flat);
    taken.insert(harmonic->negated_index(flat));
    modes.push_back(flat);
  }
  return modes;
}

}  // namespace

Problem build_problem(const RunConfig& cfg) {
  const auto grid = cfg.pixel_size.empty() ? Space::unit_grid(cfg.shape) : Space::grid(cfg.shape, cfg.pixel_size);
  const auto binning = PowerBinning::build(Space::harmonic_of(grid), cfg.binning);
  if (binning->count() < 4) throw ConfigError("[binning] needs at least 3 nonzero-mode bins for the smoothness prior");

  const auto& r = cfg.response;
  std::vector<std::size_t> selection;
  switch (r.kind) {
    case ResponseKind::identity:
      selection.resize(grid->size());
      for (std::size_t i = 0; i < selection.size(); ++i) selection[i] = i;
      break;
    case ResponseKind::mask:
      selection = r.mask_file ? mask_from_file(*r.mask_file, grid) : random_mask(cfg, grid);
      if (selection.empty()) throw ConfigError("[response] mask keeps no pixels");
      break;
    case ResponseKind::fourier_sampling:
      selection = r.modes_file ? modes_from_file(*r.modes_file, grid) : random_modes(cfg, grid);
      if (selection.empty()) throw ConfigError("[response] no sampled modes");
      break;
  }
  if (r.kind == ResponseKind::fourier_sampling)
    return {grid, binning, fourier_sampling_response(grid, selection), std::move(selection)};
  std::vector<bool> keep(grid->size(), false);
  for (auto i : selection) keep[i] = true;
  return {grid, binning, mask_response(grid, keep), std::move(selection)};
}

MeasurementSetup build_setup(const RunConfig& cfg, const Problem& problem, const Field& data) {
  require_space(data.space(), problem.response.target(), "data");
  if (cfg.noise.estimate) {
    EstimatedNoise est{initial_noise_eta(data), cfg.noise.beta, 2e-5};
    if (cfg.noise.q_relative) est.q = *cfg.noise.q_relative * std::exp(est.eta[0]);
    else if (cfg.noise.q) est.q = *cfg.noise.q;
    return {problem.response, cfg.nonlinearity, NoiseModel::estimated(std::move(est))};
  }
  if (!(cfg.noise.variance > 0.0)) throw ConfigError("[noise] variance must be positive for inference");
  return {problem.response, cfg.nonlinearity,
          NoiseModel::fixed(Field::constant(problem.response.target(), cfg.noise.variance))};
}

LogSpectrum truth_spectrum(const RunConfig& cfg, const Problem& problem) {
  if (!cfg.truth) throw ConfigError("[spectrum] amplitude, knee and slope are required for a true spectrum");
  const auto kappa = problem.binning->kappa();
  std::vector<double> power(kappa.size());
  for (std::size_t b = 0; b < power.size(); ++b) power[b] = (*cfg.truth)(kappa[b]);
  return LogSpectrum::from_power(problem.binning, power);
}

SyntheticData synthesize(const RunConfig& cfg, const Problem& problem) {
  auto truth = truth_spectrum(cfg, problem);
  Rng excitation_rng = split_stream(cfg.seed, kSynthStream, 0);
  Rng noise_rng = split_stream(cfg.seed, kSynthStream, 1);
  Field xi = draw_white_excitation(problem.binning->harmonic(), excitation_rng);
  Field s = amplitude_operator(truth).apply(xi);
  Field d = problem.response.apply(apply(cfg.nonlinearity, s));
  if (cfg.noise.variance > 0.0) {
    const std::vector<double> var(d.size(), cfg.noise.variance);
    d += draw_gaussian(d.space(), var, noise_rng);
  }
  return {std::move(xi), std::move(s), std::move(d), std::move(truth)};
}

namespace {

std::vector<std::size_t> complex_shape(const SpacePtr& space) {
  auto shape = space->shape();
  shape.push_back(2);
  return shape;
}

void write_field(const fs::path& dir, const std::string& name, const Field& f) {
  if (f.space()->is_complex()) write_array(dir / name, f.scalars(), complex_shape(f.space()));
  else if (f.space()->kind() == SpaceKind::position) write_array(dir / name, f.scalars(), f.space()->shape());
  else write_array(dir / name, f.scalars(), {f.size()});
}

void write_vector(const fs::path& dir, const std::string& name, std::span<const double> v) {
  write_array(dir / name, v, {v.size()});
}

void write_selection(const fs::path& dir, const RunConfig& cfg, const Problem& problem) {
  if (cfg.response.kind == ResponseKind::fourier_sampling) {
    const std::vector<double> modes(problem.selection.begin(), problem.selection.end());
    write_vector(dir, "modes", modes);
  } else {
    std::vector<double> mask(problem.grid->size(), 0.0);
    for (auto i : problem.selection) mask[i] = 1.0;
    write_array(dir / "mask", mask, problem.grid->shape());
  }
}

json manifest(const std::string& command, const RunConfig& cfg, const std::vector<std::string>& files) {
  return {{"command", command}, {"seed", cfg.seed}, {"version", kVersion}, {"files", files}, {"config", cfg.raw}};
}

// Spectrum table without the zero-mode bin: kappa, power, truth (NaN if unknown).
void write_spectrum_table(const fs::path& dir, const LogSpectrum& spectrum, const std::optional<LogSpectrum>& truth) {
  const auto kappa = spectrum.binning()->kappa();
  const auto power = spectrum.power();
  std::vector<double> truth_power;
  if (truth) truth_power = truth->power();
  std::vector<double> table;
  for (std::size_t b = 1; b < kappa.size(); ++b) {
    table.push_back(kappa[b]);
    table.push_back(power[b]);
    table.push_back(truth ? truth_power[b] : std::numeric_limits<double>::quiet_NaN());
  }
  write_array(dir / "spectrum", table, {kappa.size() - 1, 3});
}

std::string array_clause(const SpacePtr& grid) {
  const auto& shape = grid->shape();
  if (shape.size() == 1) return "binary array=(" + std::to_string(shape[0]) + ") format='%float64'";
  return "binary array=(" + std::to_string(shape[1]) + "," + std::to_string(shape[0]) + ") format='%float64'";
}

struct PlotInputs {
  SpacePtr grid;
  bool envelope = false;
  bool relative_error = false;
  bool moments = false;
  std::optional<fs::path> truth_signal;
  std::size_t spectrum_rows = 0;
};

void write_plot_script(const fs::path& dir, const PlotInputs& in) {
  std::ofstream gp(dir / "plot.gp", std::ios::trunc);
  const std::string arr = array_clause(in.grid);
  gp << "# run inside this directory: gnuplot plot.gp\n"
     << "set terminal pngcairo size 1000,700\n";
  if (in.grid->shape().size() == 1) {
    gp << "set output 'reconstruction.png'\nset xlabel 'pixel'\nplot ";
    if (in.envelope)
      gp << "'envelope.f8' binary record=(" << in.grid->size()
         << ") format='%3float64' using 1:2:3 with filledcurves lc rgb '#cccccc' title 'mean +- std', ";
    gp << "'signal.f8' " << arr << " with lines lw 2 title 'reconstruction'";
    if (in.truth_signal)
      gp << ", '" << in.truth_signal->string() << "' " << arr << " with lines dt 2 title 'truth'";
    gp << '\n';
    if (in.moments)
      gp << "set output 'nonlinear.png'\nplot 'mean_nonlinear.f8' " << arr
         << " with lines title 'posterior mean of f(s)'\n";
  } else {
    gp << "set view map\nset size ratio -1\n";
    gp << "set output 'reconstruction.png'\nplot 'signal.f8' " << arr << " with image title 'reconstruction'\n";
    if (in.moments)
      gp << "set output 'nonlinear.png'\nplot 'mean_nonlinear.f8' " << arr << " with image title 'mean f(s)'\n";
    if (in.relative_error)
      gp << "set output 'relative_error.png'\nplot 'relative_error.f8' " << arr
         << " with image title 'relative uncertainty'\n";
    if (in.truth_signal)
      gp << "set output 'truth.png'\nplot '" << in.truth_signal->string() << "' " << arr
         << " with image title 'truth'\n";
  }
  if (in.spectrum_rows > 0) {
    gp << "set output 'spectrum.png'\nunset view\nset size noratio\nset logscale xy\nset xlabel '|k|'\n"
       << "plot 'spectrum.f8' binary record=(" << in.spectrum_rows
       << ") format='%3float64' using 1:2 with lines lw 2 title 'reconstruction', "
       << "'' binary record=(" << in.spectrum_rows << ") format='%3float64' using 1:3 with lines dt 2 title 'truth'\n";
  }
  if (!gp) throw IoError("cannot write plot script");
}

Field read_data(const RunConfig& cfg, const Problem& problem) {
  if (!cfg.data) throw ConfigError("no data given; set [data] path or pass --data");
  ArrayData arr;
  try {
    arr = read_array(*cfg.data);
  } catch (const IoError& e) {
    throw ConfigError(std::string("data: ") + e.what());
  }
  if (arr.values.size() != problem.response.target()->size())
    throw ConfigError("data has " + std::to_string(arr.values.size()) + " values but the response produces " +
                      std::to_string(problem.response.target()->size()));
  return Field(problem.response.target(), std::move(arr.values));
}

// Truth written by synth next to the data, when shapes agree.
std::optional<fs::path> sibling_truth(const RunConfig& cfg, const SpacePtr& grid) {
  if (!cfg.data) return std::nullopt;
  const auto stem = array_stem(*cfg.data).parent_path() / "signal";
  try {
    if (read_array(stem).values.size() == grid->size()) return fs::absolute(stem).concat(".f8");
  } catch (const IoError&) {
  }
  return std::nullopt;
}

void write_history(const fs::path& path, const RunHistory& history) {
  std::ofstream out(path, std::ios::trunc);
  for (const auto& r : history.records) out << record_to_json(r).dump() << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

std::vector<std::string> write_moments(const fs::path& out, const PosteriorMoments& m) {
  write_field(out, "mean_signal", m.mean_signal);
  write_field(out, "mean_nonlinear", m.mean_nonlinear);
  write_field(out, "variance", m.variance);
  std::vector<std::string> files{"mean_signal", "mean_nonlinear", "variance"};
  if (m.relative_error) {
    write_field(out, "relative_error", *m.relative_error);
    files.push_back("relative_error");
  }
  if (m.mean_signal.space()->shape().size() == 1) {
    std::vector<double> env;
    for (std::size_t i = 0; i < m.mean_signal.size(); ++i) {
      const double sd = std::sqrt(m.variance[i]);
      env.insert(env.end(), {static_cast<double>(i), m.mean_signal[i] - sd, m.mean_signal[i] + sd});
    }
    write_array(out / "envelope", env, {m.mean_signal.size(), 3});
    files.push_back("envelope");
  }
  return files;
}

}  // namespace

nlohmann::json record_to_json(const IterationRecord& r) {
  json j{{"iteration", r.iteration},
         {"kl", r.kl},
         {"hamiltonian", r.hamiltonian},
         {"excitation_grad_norm", r.excitation_grad_norm},
         {"spectrum_grad_norm", r.spectrum_grad_norm},
         {"samples", r.samples},
         {"excitation_steps", r.excitation_steps},
         {"spectrum_steps", r.spectrum_steps},
         {"wall_time", r.wall_time}};
  if (r.noise_grad_norm) j["noise_grad_norm"] = *r.noise_grad_norm;
  return j;
}

SyntheticData cmd_synth(const RunConfig& cfg, const fs::path& out) {
  const auto problem = build_problem(cfg);
  auto synth = synthesize(cfg, problem);
  fs::create_directories(out);
  write_field(out, "excitation", synth.excitation);
  write_field(out, "signal", synth.signal);
  write_field(out, "nonlinear_signal", apply(cfg.nonlinearity, synth.signal));
  write_field(out, "data", synth.data);
  write_vector(out, "truth_power", synth.truth.power());
  write_vector(out, "kappa", problem.binning->kappa());
  write_selection(out, cfg, problem);
  write_json(out / "binning.json", problem.binning->to_json());
  write_spectrum_table(out, synth.truth, synth.truth);
  write_plot_script(out, {problem.grid, false, false, false, fs::absolute(out / "signal.f8"),
                          problem.binning->count() - 1});
  write_json(out / "manifest.json",
             manifest("synth", cfg,
                      {"excitation", "signal", "nonlinear_signal", "data", "truth_power", "kappa",
                       cfg.response.kind == ResponseKind::fourier_sampling ? "modes" : "mask", "spectrum"}));
  return synth;
}

InferenceResult cmd_reconstruct(const RunConfig& cfg, const fs::path& out, const IterationObserver& observer) {
  const auto problem = build_problem(cfg);
  const Field data = read_data(cfg, problem);
  const auto setup = build_setup(cfg, problem, data);
  auto result = run_inference(data, setup, problem.binning, cfg.inference, observer);

  fs::create_directories(out);
  const auto& state = result.state;
  std::vector<std::string> files{"t", "alpha", "tau", "power", "kappa", "signal", "nonlinear", "spectrum"};
  write_field(out, "t", state.t);
  write_vector(out, "alpha", state.spectrum.alpha());
  write_vector(out, "tau", state.spectrum.tau());
  write_vector(out, "power", state.spectrum.power());
  write_vector(out, "kappa", problem.binning->kappa());
  const Field signal = amplitude_operator(state.spectrum).apply(state.t);
  write_field(out, "signal", signal);
  write_field(out, "nonlinear", apply(cfg.nonlinearity, signal));
  if (state.noise_eta) {
    write_field(out, "eta", *state.noise_eta);
    Field variance = *state.noise_eta;
    for (std::size_t i = 0; i < variance.size(); ++i) variance[i] = std::exp(variance[i]);
    write_field(out, "noise_variance", variance);
    files.insert(files.end(), {"eta", "noise_variance"});
  }
  std::optional<LogSpectrum> truth;
  if (cfg.truth) truth = truth_spectrum(cfg, problem);
  write_spectrum_table(out, state.spectrum, truth);

  PlotInputs plot{problem.grid, false, false, false, sibling_truth(cfg, problem.grid), problem.binning->count() - 1};
  if (!result.samples.samples.empty()) {
    const auto moments = posterior_moments(state.t, result.samples, state.spectrum, cfg.nonlinearity);
    const auto moment_files = write_moments(out, moments);
    files.insert(files.end(), moment_files.begin(), moment_files.end());
    std::vector<double> samples;
    for (const auto& xi : result.samples.samples) samples.insert(samples.end(), xi.scalars().begin(), xi.scalars().end());
    auto shape = complex_shape(state.t.space());
    shape.insert(shape.begin(), result.samples.size());
    write_array(out / "samples", samples, shape);
    files.push_back("samples");
    plot.moments = true;
    plot.envelope = problem.grid->shape().size() == 1;
    plot.relative_error = moments.relative_error.has_value();
  }
  write_history(out / "history.jsonl", result.history);
  write_json(out / "binning.json", problem.binning->to_json());
  write_plot_script(out, plot);
  auto man = manifest("reconstruct", cfg, files);
  man["iterations"] = result.history.records.size();
  man["converged"] = result.history.converged;
  man["failure"] = result.history.failure ? json(*result.history.failure) : json(nullptr);
  write_json(out / "manifest.json", man);
  return result;
}

BenchReport cmd_bench(const RunConfig& cfg, const fs::path& out, const IterationObserver& observer) {
  if (cfg.nonlinearity.label != "identity")
    throw ConfigError("[nonlinearity] bench compares against the legacy filter and needs label = \"identity\"");
  if (cfg.noise.estimate) throw ConfigError("[noise] bench needs mode = \"fixed\"");
  const auto problem = build_problem(cfg);
  const Field data = cfg.data ? read_data(cfg, problem) : synthesize(cfg, problem).data;
  const auto setup = build_setup(cfg, problem, data);
  InferenceConfig ic = cfg.inference;
  ic.stop_on_convergence = false;

  BenchReport report;
  report.reformulated = run_inference(data, setup, problem.binning, ic, observer).history;
  report.legacy = run_legacy_inference(data, setup, problem.binning, ic, observer).history;
  report.reference_kl =
      reference_kl(data, setup, truth_spectrum(cfg, problem), ic, std::max<std::size_t>(ic.outer_iterations, 1));

  fs::create_directories(out);
  write_history(out / "reformulated.jsonl", report.reformulated);
  write_history(out / "legacy.jsonl", report.legacy);
  const std::size_t rows = std::max(report.reformulated.records.size(), report.legacy.records.size());
  std::vector<double> table;
  std::vector<double> new_kl, old_kl;
  for (std::size_t i = 0; i < rows; ++i) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double a = i < report.reformulated.records.size() ? report.reformulated.records[i].kl : nan;
    const double b = i < report.legacy.records.size() ? report.legacy.records[i].kl : nan;
    table.insert(table.end(), {static_cast<double>(i + 1), a, b, report.reference_kl});
    new_kl.push_back(a);
    old_kl.push_back(b);
  }
  write_array(out / "kl", table, {rows, 4});
  json summary{{"iterations", rows},
               {"reformulated_kl", new_kl},
               {"legacy_kl", old_kl},
               {"reference_kl", report.reference_kl},
               {"reformulated_failure", report.reformulated.failure ? json(*report.reformulated.failure) : json()},
               {"legacy_failure", report.legacy.failure ? json(*report.legacy.failure) : json()}};
  write_json(out / "bench.json", summary);
  {
    std::ofstream gp(out / "plot.gp", std::ios::trunc);
    gp << "set terminal pngcairo size 1000,700\nset output 'convergence.png'\n"
       << "set logscale y\nset xlabel 'iteration'\nset ylabel 'KL estimate'\n";
    if (rows > 0)
      gp << "plot 'kl.f8' binary record=(" << rows << ") format='%4float64' using 1:2 with lines lw 2 title 'reformulated', "
         << "'' binary record=(" << rows << ") format='%4float64' using 1:3 with lines lw 2 title 'legacy', "
         << "'' binary record=(" << rows << ") format='%4float64' using 1:4 with lines dt 2 title 'reference'\n";
    if (!gp) throw IoError("cannot write plot script");
  }
  write_json(out / "manifest.json", manifest("bench", cfg, {"kl", "reformulated.jsonl", "legacy.jsonl", "bench.json"}));
  return report;
}

PosteriorMoments cmd_moments(const RunConfig& cfg, const fs::path& state_dir, const fs::path& out) {
  const auto problem = build_problem(cfg);
  const Field data = read_data(cfg, problem);
  auto setup = build_setup(cfg, problem, data);

  auto load = [&](const char* name) {
    try {
      return read_array(state_dir / name);
    } catch (const IoError& e) {
      throw ConfigError(std::string("state: ") + e.what());
    }
  };
  auto t_arr = load("t");
  if (t_arr.values.size() != problem.binning->harmonic()->scalar_count())
    throw ConfigError("state t does not match the grid");
  auto alpha = load("alpha");
  if (alpha.values.size() != problem.binning->count()) throw ConfigError("state alpha does not match the binning");
  if (setup.noise.is_estimated()) {
    auto eta = load("eta");
    if (eta.values.size() != data.size()) throw ConfigError("state eta does not match the data");
    setup.noise.set_eta(Field(data.space(), std::move(eta.values)));
  }
  const Field t(problem.binning->harmonic(), std::move(t_arr.values));
  const LogSpectrum spectrum(problem.binning, std::move(alpha.values));

  const std::size_t count = cfg.inference.schedule.fixed ? cfg.inference.schedule.fixed : cfg.moment_samples;
  const SamplingJob job{t, &setup, spectrum, count, cfg.seed, kMomentStream, cfg.inference.sampling};
  const auto samples = draw_sample_set(job);
  const auto moments = posterior_moments(t, samples, spectrum, cfg.nonlinearity);

  fs::create_directories(out);
  auto files = write_moments(out, moments);
  write_field(out, "signal", amplitude_operator(spectrum).apply(t));
  files.push_back("signal");
  write_plot_script(out, {problem.grid, problem.grid->shape().size() == 1, moments.relative_error.has_value(), true,
                          sibling_truth(cfg, problem.grid), 0});
  auto man = manifest("moments", cfg, files);
  man["samples"] = samples.size();
  write_json(out / "manifest.json", man);
  return moments;
}

}  // namespace critfilt
