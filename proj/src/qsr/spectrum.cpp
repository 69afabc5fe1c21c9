#include "qsr/spectrum.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace qsr {

Spectrum::Spectrum(std::vector<Level> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) {
    throw std::invalid_argument("spectrum: at least one energy level is required");
  }
  offsets_.reserve(levels_.size());
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    const Level& level = levels_[i];
    if (!std::isfinite(level.energy)) {
      throw std::invalid_argument("spectrum: energy must be finite");
    }
    if (level.multiplicity < 1) {
      throw std::invalid_argument("spectrum: multiplicity must be >= 1");
    }
    if (i > 0 && !(level.energy > levels_[i - 1].energy)) {
      throw std::invalid_argument("spectrum: energies must be strictly increasing");
    }
    offsets_.push_back(dimension_);
    dimension_ += level.multiplicity;
  }
}

std::vector<double> Spectrum::basis_energies() const {
  std::vector<double> out;
  out.reserve(dimension_);
  for (const Level& level : levels_) {
    out.insert(out.end(), level.multiplicity, level.energy);
  }
  return out;
}

std::vector<std::size_t> Spectrum::basis_levels() const {
  std::vector<std::size_t> out;
  out.reserve(dimension_);
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    out.insert(out.end(), levels_[i].multiplicity, i);
  }
  return out;
}

InitialState::InitialState(std::vector<Amplitude> amplitudes)
    : amplitudes_(std::move(amplitudes)) {
  if (amplitudes_.empty()) {
    throw std::invalid_argument("initial state: amplitude vector is empty");
  }
  double norm_sq = 0.0;
  for (const Amplitude& a : amplitudes_) {
    if (!std::isfinite(a.real()) || !std::isfinite(a.imag())) {
      throw std::invalid_argument("initial state: amplitudes must be finite");
    }
    norm_sq += std::norm(a);
  }
  if (std::abs(norm_sq - 1.0) > kNormTolerance) {
    throw std::invalid_argument("initial state: squared norm deviates from 1 by " +
                                std::to_string(std::abs(norm_sq - 1.0)) +
                                " (tolerance 1e-12)");
  }
}

LudersDecomposition decompose(const Spectrum& spectrum, const InitialState& psi0) {
  if (psi0.dimension() != spectrum.dimension()) {
    throw std::invalid_argument("decompose: state dimension " +
                                std::to_string(psi0.dimension()) +
                                " does not match spectrum dimension " +
                                std::to_string(spectrum.dimension()));
  }
  const std::size_t n_levels = spectrum.level_count();
  const auto amps = psi0.amplitudes();

  LudersDecomposition dec;
  dec.probabilities.assign(n_levels, 0.0);
  dec.luders_states.resize(n_levels);

  for (std::size_t i = 0; i < n_levels; ++i) {
    const std::size_t offset = spectrum.block_offset(i);
    const std::size_t size = spectrum.block_size(i);
    double weight = 0.0;
    for (std::size_t b = 0; b < size; ++b) {
      weight += std::norm(amps[offset + b]);
    }
    dec.probabilities[i] = weight;
    if (weight > 0.0) {
      // Phase convention: the state inherits the phase of the projection,
      // so sum_i sqrt(pi_i) |phi_i> reconstructs psi0 exactly.
      std::vector<Amplitude> state(spectrum.dimension(), Amplitude{0.0, 0.0});
      const double inv_norm = 1.0 / std::sqrt(weight);
      for (std::size_t b = 0; b < size; ++b) {
        state[offset + b] = amps[offset + b] * inv_norm;
      }
      dec.luders_states[i] = std::move(state);
    }
  }
  return dec;
}

std::vector<Amplitude> reconstruct_initial_state(const LudersDecomposition& dec,
                                                 const Spectrum& spectrum) {
  std::vector<Amplitude> psi(spectrum.dimension(), Amplitude{0.0, 0.0});
  for (std::size_t i = 0; i < dec.level_count(); ++i) {
    if (!dec.present(i)) continue;
    const double root = std::sqrt(dec.probabilities[i]);
    const std::size_t offset = spectrum.block_offset(i);
    for (std::size_t b = 0; b < spectrum.block_size(i); ++b) {
      psi[offset + b] = root * dec.luders_states[i][offset + b];
    }
  }
  return psi;
}

InitialMoments initial_moments(const LudersDecomposition& dec, const Spectrum& spectrum) {
  if (dec.level_count() != spectrum.level_count()) {
    throw std::invalid_argument("initial_moments: level count mismatch");
  }
  InitialMoments m;
  for (std::size_t i = 0; i < dec.level_count(); ++i) {
    m.energy_mean += dec.probabilities[i] * spectrum.energy(i);
  }
  for (std::size_t i = 0; i < dec.level_count(); ++i) {
    const double d = spectrum.energy(i) - m.energy_mean;
    m.energy_variance += dec.probabilities[i] * d * d;
    const double p = dec.probabilities[i];
    if (p > 0.0) m.shannon_entropy -= p * std::log(p);
  }
  m.reduction_time = m.energy_variance > 0.0
                         ? 1.0 / m.energy_variance
                         : std::numeric_limits<double>::infinity();
  return m;
}

}  // namespace qsr
