#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qsr/closedform.hpp"
#include "qsr/noise.hpp"
#include "qsr/spectrum.hpp"

namespace qsr {

// Per-path time series of the closed-form solution on the full grid.
struct TrajectoryRecord {
  TrajectoryRecord(const PathGrid& g, std::size_t levels)
      : grid(g), level_count(levels) {}

  PathGrid grid;
  std::size_t level_count;
  std::vector<double> xi;
  std::vector<double> energy;      // H_t
  std::vector<double> variance;    // V_t
  std::vector<double> entropy;     // S_t
  std::vector<double> innovation;  // W_t, W[0] = 0
  std::vector<double> probabilities;  // points x level_count, row-major
  std::size_t sampled_level = 0;
  std::size_t terminal_level = 0;

  std::span<const double> probabilities_at(std::size_t k) const {
    return {probabilities.data() + k * level_count, level_count};
  }
};

// Computes the full closed-form trajectory for one path into `out`
// (buffers are reused across calls). `level` is the sampled terminal level.
void compute_trajectory(const ModelKind& model, const Spectrum& spectrum,
                        const LudersDecomposition& dec, const NoisePath& noise,
                        std::size_t level, TrajectoryRecord& out);

// Per-level data for a commuting (diagonal) observable.
struct ObservableTable {
  std::vector<double> level_mean;        // <phi_i|G|phi_i>
  std::vector<double> level_second;      // <phi_i|G^2|phi_i>
  std::vector<double> level_variance;    // terminal V^G on level i
};

ObservableTable make_observable_table(std::span<const double> observable,
                                      const LudersDecomposition& dec,
                                      const Spectrum& spectrum);

struct EnsembleSetup {
  ModelKind model;
  PathGrid grid{1.0, 1};
  const Spectrum* spectrum = nullptr;
  const LudersDecomposition* dec = nullptr;
  SeedPolicy seeds;
  std::vector<std::size_t> output_indices;  // sorted grid indices
  std::optional<ObservableTable> observable;
};

// Scalar functionals accumulated along each path.
struct PathFunctionals {
  std::uint32_t sampled_level = 0;
  std::uint32_t terminal_level = 0;
  double innovation_terminal = 0.0;      // W at the terminal innovation index
  double innovation_qv = 0.0;            // sum (dW)^2 up to that index
  double entropy_quadrature = 0.0;       // 1/2 int sigma_s^2 V_s ds, left-point
  double entropy_final = 0.0;            // S at the last grid point
  double variance_final = 0.0;           // V at the last grid point
  double terminal_observable_variance = 0.0;
};

enum class Series : std::size_t {
  Xi = 0,
  Energy,
  Variance,
  Entropy,
  Innovation,
  ObservableMean,
  ObservableVariance,
  Count
};

// Ensemble results: per-path rows at the output times plus per-path scalars.
// Reductions happen later in canonical path order, so results are identical
// for any thread count.
class EnsembleResult {
 public:
  EnsembleResult(std::uint64_t n_paths, std::size_t n_out, std::size_t levels,
                 bool with_observable);

  std::uint64_t n_paths() const { return n_paths_; }
  std::size_t n_out() const { return n_out_; }
  std::size_t level_count() const { return levels_; }
  bool has_observable() const { return with_observable_; }

  double& value(Series s, std::uint64_t path, std::size_t out_idx);
  double value(Series s, std::uint64_t path, std::size_t out_idx) const;
  double& pi_value(std::uint64_t path, std::size_t out_idx, std::size_t level);
  double pi_value(std::uint64_t path, std::size_t out_idx, std::size_t level) const;

  // Copies one output-time column across paths (canonical order).
  std::vector<double> column(Series s, std::size_t out_idx) const;
  std::vector<double> pi_column(std::size_t level, std::size_t out_idx) const;

  std::vector<PathFunctionals>& functionals() { return functionals_; }
  const std::vector<PathFunctionals>& functionals() const { return functionals_; }

 private:
  std::uint64_t n_paths_;
  std::size_t n_out_;
  std::size_t levels_;
  bool with_observable_;
  std::vector<std::vector<double>> tables_;  // per series, n_paths * n_out
  std::vector<double> pi_table_;             // n_paths * n_out * levels
  std::vector<PathFunctionals> functionals_;
};

EnsembleResult run_closedform_ensemble(const EnsembleSetup& setup,
                                       std::uint64_t n_paths, unsigned threads);

// Default decimation: about `target` evenly spaced grid indices, always
// including 0 and steps.
std::vector<std::size_t> default_output_indices(std::size_t steps, std::size_t target);

// Snaps arbitrary times onto grid indices (nearest), deduplicated and sorted.
std::vector<std::size_t> snap_times_to_grid(const PathGrid& grid,
                                            std::span<const double> times);

}  // namespace qsr
