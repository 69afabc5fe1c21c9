#include "qsr/closedform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qsr {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

double model_sigma(const ModelKind& model) {
  return std::visit([](const auto& m) { return m.sigma; }, model);
}

std::optional<double> model_horizon(const ModelKind& model) {
  if (const auto* ft = std::get_if<FiniteTimeModel>(&model)) return ft->horizon;
  return std::nullopt;
}

double model_sigma_at(const ModelKind& model, double t) {
  if (const auto* ft = std::get_if<FiniteTimeModel>(&model)) {
    return ft->sigma * ft->horizon / (ft->horizon - t);
  }
  return std::get<AsymptoticModel>(model).sigma;
}

ModelKind make_asymptotic(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("model: sigma must be positive and finite");
  }
  return AsymptoticModel{sigma};
}

ModelKind make_finite_time(double sigma, double horizon) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("model: sigma must be positive and finite");
  }
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw std::invalid_argument("model: horizon must be positive and finite");
  }
  return FiniteTimeModel{sigma, horizon};
}

std::vector<double> information_path(const ModelKind& model, std::size_t level,
                                     const NoisePath& noise, const Spectrum& spectrum) {
  if (level >= spectrum.level_count()) {
    throw std::invalid_argument("information_path: level index out of range");
  }
  const auto horizon = model_horizon(model);
  if (horizon) {
    if (noise.kind != NoiseKind::Bridge) {
      throw std::invalid_argument("information_path: finite-time model needs bridge noise");
    }
    if (noise.grid.t_end() != *horizon) {
      throw std::invalid_argument("information_path: bridge duration does not match horizon");
    }
  } else if (noise.kind != NoiseKind::Brownian) {
    throw std::invalid_argument("information_path: asymptotic model needs Brownian noise");
  }

  const double drift = model_sigma(model) * spectrum.energy(level);
  std::vector<double> xi(noise.grid.points());
  for (std::size_t k = 0; k < xi.size(); ++k) {
    xi[k] = drift * noise.grid.time(k) + noise.values[k];
  }
  return xi;
}

namespace detail {

std::vector<double> log_priors(std::span<const double> pi0) {
  std::vector<double> out(pi0.size());
  for (std::size_t i = 0; i < pi0.size(); ++i) {
    out[i] = pi0[i] > 0.0 ? std::log(pi0[i]) : kNegInf;
  }
  return out;
}

void posterior_weights(const ModelKind& model, std::span<const double> energies,
                       std::span<const double> log_pi0, double xi, double t,
                       std::span<double> out) {
  const std::size_t n = energies.size();
  const double sigma = model_sigma(model);
  const auto horizon = model_horizon(model);

  if (horizon && t > *horizon) {
    throw std::invalid_argument("conditional_probabilities: t exceeds the horizon");
  }

  if (horizon && !(*horizon - t > 0.0)) {
    // Left limit at t == T: one-hot on the argmax of the interior exponent
    // numerator; ties resolved to the lowest level index.
    std::size_t best = 0;
    double best_score = kNegInf;
    for (std::size_t i = 0; i < n; ++i) {
      if (log_pi0[i] == kNegInf) continue;
      const double e = energies[i];
      const double score = sigma * xi * e - 0.5 * sigma * sigma * e * e * t;
      if (score > best_score) {
        best_score = score;
        best = i;
      }
    }
    for (std::size_t i = 0; i < n; ++i) out[i] = 0.0;
    out[best] = 1.0;
    return;
  }

  double max_exponent = kNegInf;
  for (std::size_t i = 0; i < n; ++i) {
    if (log_pi0[i] == kNegInf) {
      out[i] = kNegInf;
      continue;
    }
    const double e = energies[i];
    double exponent = sigma * e * xi - 0.5 * sigma * sigma * e * e * t;
    if (horizon) {
      exponent = (sigma * xi * e * *horizon -
                  0.5 * sigma * sigma * e * e * t * *horizon) /
                 (*horizon - t);
    }
    exponent += log_pi0[i];
    out[i] = exponent;
    max_exponent = std::max(max_exponent, exponent);
  }

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (out[i] == kNegInf) {
      out[i] = 0.0;
    } else {
      out[i] = std::exp(out[i] - max_exponent);
      total += out[i];
    }
  }
  const double inv = 1.0 / total;
  for (std::size_t i = 0; i < n; ++i) out[i] *= inv;
}

}  // namespace detail

std::vector<double> conditional_probabilities(const ModelKind& model,
                                              const Spectrum& spectrum,
                                              std::span<const double> pi0,
                                              double xi, double t) {
  if (pi0.size() != spectrum.level_count()) {
    throw std::invalid_argument("conditional_probabilities: prior size mismatch");
  }
  if (t < 0.0) {
    throw std::invalid_argument("conditional_probabilities: t must be >= 0");
  }
  const std::vector<double> energies = [&] {
    std::vector<double> e(spectrum.level_count());
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = spectrum.energy(i);
    return e;
  }();
  const std::vector<double> log_pi0 = detail::log_priors(pi0);
  std::vector<double> out(pi0.size());
  detail::posterior_weights(model, energies, log_pi0, xi, t, out);
  return out;
}

std::pair<double, double> energy_and_variance(std::span<const double> probabilities,
                                              const Spectrum& spectrum) {
  if (probabilities.size() != spectrum.level_count()) {
    throw std::invalid_argument("energy_and_variance: probability size mismatch");
  }
  double mean = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    mean += probabilities[i] * spectrum.energy(i);
  }
  double variance = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double d = spectrum.energy(i) - mean;
    variance += probabilities[i] * d * d;
  }
  return {mean, variance};
}

double shannon_entropy(std::span<const double> probabilities) {
  double s = 0.0;
  for (double p : probabilities) {
    if (p > 0.0) s -= p * std::log(p);
  }
  return s;
}

double conditional_expectation_of(const std::function<double(double)>& f,
                                  std::span<const double> probabilities,
                                  const Spectrum& spectrum) {
  if (probabilities.size() != spectrum.level_count()) {
    throw std::invalid_argument("conditional_expectation_of: probability size mismatch");
  }
  double out = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    out += probabilities[i] * f(spectrum.energy(i));
  }
  return out;
}

std::vector<Amplitude> state_vector(std::span<const double> probabilities,
                                    const LudersDecomposition& dec,
                                    const Spectrum& spectrum, double t) {
  if (probabilities.size() != dec.level_count() ||
      dec.level_count() != spectrum.level_count()) {
    throw std::invalid_argument("state_vector: level count mismatch");
  }
  std::vector<Amplitude> psi(spectrum.dimension(), Amplitude{0.0, 0.0});
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    if (probabilities[i] == 0.0) continue;
    if (!dec.present(i)) {
      throw std::invalid_argument(
          "state_vector: nonzero weight on a level absent from the decomposition");
    }
    const double e = spectrum.energy(i);
    const Amplitude phase = std::polar(std::sqrt(probabilities[i]), -e * t);
    const auto& phi = dec.luders_states[i];
    const std::size_t offset = spectrum.block_offset(i);
    const std::size_t size = spectrum.block_size(i);
    for (std::size_t b = 0; b < size; ++b) {
      psi[offset + b] = phase * phi[offset + b];
    }
  }
  return psi;
}

std::vector<double> innovation_path(const ModelKind& model, const PathGrid& grid,
                                    std::span<const double> xi,
                                    std::span<const double> energy_expectation) {
  if (xi.size() != grid.points() || energy_expectation.size() != grid.points()) {
    throw std::invalid_argument("innovation_path: series length does not match grid");
  }
  const double sigma = model_sigma(model);
  const auto horizon = model_horizon(model);
  const double dt = grid.dt();

  std::vector<double> w(grid.points());
  w[0] = 0.0;
  for (std::size_t k = 0; k + 1 < grid.points(); ++k) {
    const double d_xi = xi[k + 1] - xi[k];
    if (horizon) {
      const double correction =
          (xi[k] - sigma * *horizon * energy_expectation[k]) / (*horizon - grid.time(k));
      w[k + 1] = w[k] + d_xi + correction * dt;
    } else {
      w[k + 1] = w[k] + d_xi - sigma * energy_expectation[k] * dt;
    }
  }
  return w;
}

std::vector<double> conditioned_energy_curve(const ModelKind& model,
                                             const Spectrum& spectrum,
                                             std::span<const double> pi0,
                                             std::size_t level, const NoisePath& noise) {
  if (level >= pi0.size() || pi0[level] <= 0.0) {
    throw std::invalid_argument(
        "conditioned_energy_curve: conditioning level must carry positive probability");
  }
  const std::vector<double> xi = information_path(model, level, noise, spectrum);
  const std::vector<double> log_pi0 = detail::log_priors(pi0);
  std::vector<double> energies(spectrum.level_count());
  for (std::size_t i = 0; i < energies.size(); ++i) energies[i] = spectrum.energy(i);

  std::vector<double> weights(spectrum.level_count());
  std::vector<double> curve(noise.grid.points());
  for (std::size_t k = 0; k < curve.size(); ++k) {
    detail::posterior_weights(model, energies, log_pi0, xi[k], noise.grid.time(k), weights);
    double mean = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) mean += weights[i] * energies[i];
    curve[k] = mean;
  }
  return curve;
}

}  // namespace qsr
