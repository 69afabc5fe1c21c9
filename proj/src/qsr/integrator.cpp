#include "qsr/integrator.hpp"

#include <cmath>
#include <stdexcept>

namespace qsr {

double state_norm(std::span<const Amplitude> state) {
  double norm_sq = 0.0;
  for (const Amplitude& a : state) norm_sq += std::norm(a);
  return std::sqrt(norm_sq);
}

void normalize_state(std::vector<Amplitude>& state) {
  const double norm = state_norm(state);
  if (!(norm > 0.0)) {
    throw std::runtime_error("normalize_state: state collapsed to zero norm");
  }
  const double inv = 1.0 / norm;
  for (Amplitude& a : state) a *= inv;
}

void euler_step_general(std::vector<Amplitude>& state, const GeneralModel& gm,
                        double sigma_scale, double d_w, double dt,
                        const Spectrum& spectrum) {
  if (!gm.noise_gain) {
    throw std::invalid_argument("euler step: noise gain function is required");
  }
  if (state.size() != spectrum.dimension()) {
    throw std::invalid_argument("euler step: state dimension mismatch");
  }
  if (!(dt > 0.0)) {
    throw std::invalid_argument("euler step: dt must be positive");
  }

  const std::size_t n_levels = spectrum.level_count();

  // Pre-step expectation of L over the level weights.
  double l_mean = 0.0;
  std::size_t basis = 0;
  for (std::size_t i = 0; i < n_levels; ++i) {
    const double l_value = gm.noise_gain(spectrum.energy(i));
    double weight = 0.0;
    for (std::size_t b = 0; b < spectrum.block_size(i); ++b, ++basis) {
      weight += std::norm(state[basis]);
    }
    l_mean += weight * l_value;
  }

  basis = 0;
  for (std::size_t i = 0; i < n_levels; ++i) {
    const double e = spectrum.energy(i);
    const double l_centered = gm.noise_gain(e) - l_mean;
    const double k_value = gm.phase_gain ? gm.phase_gain(e) : 0.0;
    const Amplitude vol{sigma_scale * l_centered, sigma_scale * k_value};
    // drift = -iE - |vol|^2 / 2 (K and L commute with H, so vol^dagger vol is scalar
    // per basis state)
    const Amplitude drift{-0.5 * std::norm(vol), -e};
    const Amplitude factor = 1.0 + drift * dt + vol * d_w;
    for (std::size_t b = 0; b < spectrum.block_size(i); ++b, ++basis) {
      state[basis] *= factor;
    }
  }
  normalize_state(state);
}

void euler_step_standard(std::vector<Amplitude>& state, const ModelKind& model,
                         double t, double d_w, double dt, const Spectrum& spectrum) {
  if (const auto horizon = model_horizon(model)) {
    // sigma_t diverges at the horizon; the scheme stops one step short and the
    // closed-form terminal rule covers the last interval.
    if (t + dt > *horizon - dt * (1.0 - 1e-9)) {
      throw std::invalid_argument("euler step: step reaches beyond horizon - dt");
    }
  }
  static const GeneralModel standard{[](double e) { return 0.5 * e; }, nullptr};
  euler_step_general(state, standard, model_sigma_at(model, t), d_w, dt, spectrum);
}

std::vector<Amplitude> ancillary_exact(std::span<const Amplitude> psi0, double sigma,
                                       double xi, double t, const Spectrum& spectrum) {
  if (psi0.size() != spectrum.dimension()) {
    throw std::invalid_argument("ancillary_exact: state dimension mismatch");
  }
  if (t < 0.0) {
    throw std::invalid_argument("ancillary_exact: t must be >= 0");
  }
  std::vector<Amplitude> out(psi0.begin(), psi0.end());
  std::size_t basis = 0;
  for (std::size_t i = 0; i < spectrum.level_count(); ++i) {
    const double e = spectrum.energy(i);
    const double gain = 0.5 * sigma * e * xi - 0.25 * sigma * sigma * e * e * t;
    const Amplitude factor = std::polar(std::exp(gain), -e * t);
    for (std::size_t b = 0; b < spectrum.block_size(i); ++b, ++basis) {
      out[basis] *= factor;
    }
  }
  return out;
}

ObservableMoments observable_expectations(std::span<const Amplitude> state,
                                          std::span<const double> observable,
                                          const Spectrum& spectrum) {
  if (state.size() != spectrum.dimension() || observable.size() != spectrum.dimension()) {
    throw std::invalid_argument("observable_expectations: dimension mismatch");
  }
  const std::vector<double> energies = spectrum.basis_energies();

  double norm_sq = 0.0;
  double g_mean = 0.0;
  double h_mean = 0.0;
  for (std::size_t b = 0; b < state.size(); ++b) {
    const double w = std::norm(state[b]);
    norm_sq += w;
    g_mean += w * observable[b];
    h_mean += w * energies[b];
  }
  if (!(norm_sq > 0.0)) {
    throw std::invalid_argument("observable_expectations: zero-norm state");
  }
  g_mean /= norm_sq;
  h_mean /= norm_sq;

  ObservableMoments m;
  m.mean = g_mean;
  for (std::size_t b = 0; b < state.size(); ++b) {
    const double w = std::norm(state[b]) / norm_sq;
    const double dg = observable[b] - g_mean;
    const double dh = energies[b] - h_mean;
    m.variance += w * dg * dg;
    m.energy_covariance += w * dg * dh;
    m.spread_energy_coupling += w * dg * dg * dh;
    m.energy_third_moment += w * dh * dh * dh;
  }
  return m;
}

}  // namespace qsr
