#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace qsr {

using Amplitude = std::complex<double>;

inline constexpr double kNormTolerance = 1e-12;

struct Level {
  double energy = 0.0;
  std::size_t multiplicity = 1;
};

// Hamiltonian spectrum in its own eigenbasis: strictly increasing energies,
// one contiguous basis block per level.
class Spectrum {
 public:
  explicit Spectrum(std::vector<Level> levels);

  std::size_t level_count() const noexcept { return levels_.size(); }
  std::size_t dimension() const noexcept { return dimension_; }
  double energy(std::size_t level) const { return levels_[level].energy; }
  std::size_t block_offset(std::size_t level) const { return offsets_[level]; }
  std::size_t block_size(std::size_t level) const { return levels_[level].multiplicity; }
  std::span<const Level> levels() const noexcept { return levels_; }

  // Energy of each basis vector (dimension() entries).
  std::vector<double> basis_energies() const;
  // Level index of each basis vector.
  std::vector<std::size_t> basis_levels() const;

 private:
  std::vector<Level> levels_;
  std::vector<std::size_t> offsets_;
  std::size_t dimension_ = 0;
};

// Normalized complex amplitudes over the eigenbasis.
class InitialState {
 public:
  explicit InitialState(std::vector<Amplitude> amplitudes);

  std::span<const Amplitude> amplitudes() const noexcept { return amplitudes_; }
  std::size_t dimension() const noexcept { return amplitudes_.size(); }

 private:
  std::vector<Amplitude> amplitudes_;
};

struct LudersDecomposition {
  std::vector<double> probabilities;                  // one entry per level
  std::vector<std::vector<Amplitude>> luders_states;  // full-dimension unit vectors; empty when absent
  bool present(std::size_t level) const { return !luders_states[level].empty(); }
  std::size_t level_count() const { return probabilities.size(); }
};

// Projects the initial state onto each energy eigenspace and renormalizes.
// Levels carrying zero weight are kept with probability 0 and no state.
LudersDecomposition decompose(const Spectrum& spectrum, const InitialState& psi0);

// sum_i sqrt(pi_i) |phi_i>; reproduces the decomposed state's per-level
// projections exactly under the inherited-phase convention.
std::vector<Amplitude> reconstruct_initial_state(const LudersDecomposition& dec,
                                                 const Spectrum& spectrum);

struct InitialMoments {
  double energy_mean = 0.0;      // sum pi_i E_i
  double energy_variance = 0.0;  // sum pi_i (E_i - mean)^2
  double shannon_entropy = 0.0;  // -sum pi_i ln pi_i
  double reduction_time = 0.0;   // 1 / energy_variance; callers fold in sigma^2
};

InitialMoments initial_moments(const LudersDecomposition& dec, const Spectrum& spectrum);

}  // namespace qsr
