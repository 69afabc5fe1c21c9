#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsr/closedform.hpp"
#include "qsr/spectrum.hpp"

namespace qsr {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_name(field) {}
  std::string field_name;
};

// One experiment = one config document + one seed.
struct RunConfig {
  ModelKind model{AsymptoticModel{}};
  double t_end = 0.0;  // grid horizon: t_end (asymptotic) or T (finite time)
  std::size_t steps = 0;
  std::uint64_t n_paths = 0;
  std::uint64_t master_seed = 0;
  unsigned threads = 0;  // 0 = hardware concurrency; never affects results

  std::vector<Level> levels;
  std::vector<Amplitude> psi0;
  std::optional<std::vector<double>> observable;

  bool want_summary = true;
  bool want_trajectories = false;
  std::optional<std::vector<double>> output_times;
  std::vector<std::uint64_t> trajectory_paths;

  std::vector<std::size_t> convergence_steps{256, 1024, 4096};
  std::uint64_t convergence_paths = 256;
  std::vector<std::size_t> timechange_steps{1024, 2048, 4096};
  std::uint64_t timechange_paths = 64;

  static RunConfig from_json_text(const std::string& text);
  static RunConfig from_file(const std::string& path);

  // Canonical serialization (threads excluded: it never changes outputs).
  std::string canonical_text() const;
  // FNV-1a over the canonical text; stable across reruns and thread counts.
  std::string config_hash() const;
};

}  // namespace qsr
