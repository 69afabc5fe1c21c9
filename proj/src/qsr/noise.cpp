#include "qsr/noise.hpp"

#include <cmath>
#include <stdexcept>

namespace qsr {

PathGrid::PathGrid(double t_end, std::size_t steps) : t_end_(t_end), steps_(steps) {
  if (!(t_end > 0.0) || !std::isfinite(t_end)) {
    throw std::invalid_argument("grid: t_end must be positive and finite");
  }
  if (steps < 1) {
    throw std::invalid_argument("grid: steps must be >= 1");
  }
  dt_ = t_end_ / static_cast<double>(steps_);
}

namespace detail {

void brownian_into(const PathGrid& grid, const SeedPolicy& seeds,
                   std::uint64_t path_index, std::vector<double>& values) {
  rng::Stream stream = rng::make_stream(seeds.master_seed, path_index, rng::kNoiseStream);
  const double step_sd = std::sqrt(grid.dt());
  values.resize(grid.points());
  values[0] = 0.0;
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    values[k + 1] = values[k] + step_sd * stream.next_normal();
  }
}

void bridge_into(const PathGrid& grid, const SeedPolicy& seeds,
                 std::uint64_t path_index, std::vector<double>& values) {
  brownian_into(grid, seeds, path_index, values);
  const double terminal = values[grid.steps()];
  const double n = static_cast<double>(grid.steps());
  // k/steps is exact at k == steps, so the endpoint lands on 0 exactly.
  for (std::size_t k = 0; k <= grid.steps(); ++k) {
    values[k] -= (static_cast<double>(k) / n) * terminal;
  }
}

std::size_t terminal_level_from_unit(const LudersDecomposition& dec, double unit) {
  double cumulative = 0.0;
  std::size_t last_present = 0;
  bool any = false;
  for (std::size_t i = 0; i < dec.level_count(); ++i) {
    if (dec.probabilities[i] <= 0.0) continue;
    last_present = i;
    any = true;
    cumulative += dec.probabilities[i];
    if (unit < cumulative) return i;
  }
  if (!any) throw std::invalid_argument("terminal draw: all level probabilities are zero");
  return last_present;  // unit landed in the rounding tail
}

}  // namespace detail

NoisePath sample_brownian(const PathGrid& grid, const SeedPolicy& seeds,
                          std::uint64_t path_index) {
  NoisePath path{grid, NoiseKind::Brownian, {}};
  detail::brownian_into(grid, seeds, path_index, path.values);
  return path;
}

NoisePath sample_bridge(const PathGrid& grid, const SeedPolicy& seeds,
                        std::uint64_t path_index) {
  NoisePath path{grid, NoiseKind::Bridge, {}};
  detail::bridge_into(grid, seeds, path_index, path.values);
  return path;
}

std::size_t sample_terminal_level(const LudersDecomposition& dec,
                                  const SeedPolicy& seeds, std::uint64_t path_index) {
  rng::Stream stream = rng::make_stream(seeds.master_seed, path_index, rng::kTerminalStream);
  return detail::terminal_level_from_unit(dec, stream.next_unit());
}

}  // namespace qsr
