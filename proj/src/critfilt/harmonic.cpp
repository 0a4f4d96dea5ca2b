#include "critfilt/harmonic.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <utility>

#include "critfilt/error.hpp"

namespace critfilt {

namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(const std::vector<std::size_t>& shape, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(shape, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::vector<int> dims(shape.begin(), shape.end());
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    auto* buffer = fftw_alloc_complex(n);
    fftw_plan plan = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), buffer, buffer, sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(buffer);
    if (!plan) throw Error("FFTW planning failed");
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<std::vector<std::size_t>, int>, fftw_plan> plans_;
};

void execute(const std::vector<std::size_t>& shape, int sign, std::complex<double>* data) {
  auto plan = PlanCache::instance().get(shape, sign);
  auto* p = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(plan, p, p);
}

}  // namespace

Rng split_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    0x5eedu};
  return Rng(seq);
}

Field harmonic_transform(const Field& position) {
  const auto& grid = position.space();
  require(grid && grid->kind() == SpaceKind::position, "harmonic_transform needs a position field");
  Field out(Space::harmonic_of(grid));
  auto modes = out.modes();
  const auto x = position.scalars();
  for (std::size_t i = 0; i < x.size(); ++i) modes[i] = x[i];
  execute(grid->shape(), FFTW_FORWARD, modes.data());
  out *= grid->pixel_volume();
  return out;
}

std::vector<std::complex<double>> adjoint_transform_complex(const Field& harmonic) {
  const auto& space = harmonic.space();
  require(space && space->kind() == SpaceKind::harmonic, "adjoint_transform needs a harmonic field");
  std::vector<std::complex<double>> buffer(harmonic.modes().begin(), harmonic.modes().end());
  execute(space->shape(), FFTW_BACKWARD, buffer.data());
  const double dk = space->pixel_volume();
  for (auto& v : buffer) v *= dk;
  return buffer;
}

Field adjoint_transform(const Field& harmonic) {
  auto values = adjoint_transform_complex(harmonic);
  Field out(harmonic.space()->partner());
  auto x = out.scalars();
  for (std::size_t i = 0; i < values.size(); ++i) x[i] = values[i].real();
  return out;
}

Field draw_white(const SpacePtr& space, Rng& rng) {
  require(space && !space->is_complex(), "draw_white needs a real space");
  std::normal_distribution<double> normal;
  Field out(space);
  auto x = out.scalars();
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = normal(rng) / std::sqrt(space->weight(i));
  return out;
}

Field draw_white_excitation(const SpacePtr& harmonic, Rng& rng) {
  require(harmonic && harmonic->kind() == SpaceKind::harmonic,
          "draw_white_excitation needs a harmonic space");
  // A white real field mapped through the unitary transform stays white and
  // comes out Hermitian-symmetric.
  return harmonic_transform(draw_white(harmonic->partner(), rng));
}

Field draw_gaussian(const SpacePtr& space, std::span<const double> variances, Rng& rng) {
  require(space && !space->is_complex(), "draw_gaussian needs a real space");
  require(variances.size() == space->size(), "variance count mismatch");
  std::normal_distribution<double> normal;
  Field out(space);
  auto x = out.scalars();
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = normal(rng) * std::sqrt(variances[i]);
  return out;
}

}  // namespace critfilt
