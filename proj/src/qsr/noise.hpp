#pragma once

#include <cstdint>
#include <vector>

#include "qsr/rng.hpp"
#include "qsr/spectrum.hpp"

namespace qsr {

// Uniform time grid on [0, t_end] with steps+1 points.
class PathGrid {
 public:
  PathGrid(double t_end, std::size_t steps);

  double t_end() const noexcept { return t_end_; }
  std::size_t steps() const noexcept { return steps_; }
  std::size_t points() const noexcept { return steps_ + 1; }
  double dt() const noexcept { return dt_; }
  // time(0) == 0 and time(steps) == t_end exactly.
  double time(std::size_t k) const noexcept {
    return t_end_ * (static_cast<double>(k) / static_cast<double>(steps_));
  }

 private:
  double t_end_;
  std::size_t steps_;
  double dt_;
};

enum class NoiseKind { Brownian, Bridge };

struct NoisePath {
  PathGrid grid;
  NoiseKind kind;
  std::vector<double> values;  // values[0] == 0; Bridge: values[steps] == 0 exactly
};

struct SeedPolicy {
  std::uint64_t master_seed = 0;
};

NoisePath sample_brownian(const PathGrid& grid, const SeedPolicy& seeds,
                          std::uint64_t path_index);

// Bridge built as B_t - (t/T) B_T from a fresh Brownian path on the same grid;
// the endpoint is pinned to 0 exactly.
NoisePath sample_bridge(const PathGrid& grid, const SeedPolicy& seeds,
                        std::uint64_t path_index);

// Draws the terminal-energy level with probability pi_i, from a stream
// separate from the path noise so the two are independent.
std::size_t sample_terminal_level(const LudersDecomposition& dec,
                                  const SeedPolicy& seeds, std::uint64_t path_index);

namespace detail {
// In-place variants for hot loops; reuse the vector's capacity.
void brownian_into(const PathGrid& grid, const SeedPolicy& seeds,
                   std::uint64_t path_index, std::vector<double>& values);
void bridge_into(const PathGrid& grid, const SeedPolicy& seeds,
                 std::uint64_t path_index, std::vector<double>& values);
std::size_t terminal_level_from_unit(const LudersDecomposition& dec, double unit);
}  // namespace detail

}  // namespace qsr
