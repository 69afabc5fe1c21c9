#pragma once

#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "qsr/noise.hpp"
#include "qsr/spectrum.hpp"

namespace qsr {

// Reduction completes as t -> infinity.
struct AsymptoticModel {
  double sigma = 1.0;
};

// Reduction completes exactly at t == horizon; the coupling grows like
// sigma * T / (T - t).
struct FiniteTimeModel {
  double sigma = 1.0;
  double horizon = 1.0;
};

using ModelKind = std::variant<AsymptoticModel, FiniteTimeModel>;

double model_sigma(const ModelKind& model);
std::optional<double> model_horizon(const ModelKind& model);
// sigma (asymptotic) or sigma*T/(T-t) (finite time).
double model_sigma_at(const ModelKind& model, double t);

ModelKind make_asymptotic(double sigma);
ModelKind make_finite_time(double sigma, double horizon);

// xi_t = sigma * E_level * t + noise_t. The noise kind must match the model
// (Brownian for asymptotic, bridge with matching horizon for finite time).
std::vector<double> information_path(const ModelKind& model, std::size_t level,
                                     const NoisePath& noise, const Spectrum& spectrum);

// Posterior level probabilities given the observation (xi, t), starting from
// prior pi0. Log-sum-exp stabilized; zero-prior levels stay at zero.
// Finite time at t == horizon returns the one-hot left limit (argmax of the
// interior exponent; ties resolved to the lowest level index).
std::vector<double> conditional_probabilities(const ModelKind& model,
                                              const Spectrum& spectrum,
                                              std::span<const double> pi0,
                                              double xi, double t);

// (H_t, V_t) from a probability vector over levels.
std::pair<double, double> energy_and_variance(std::span<const double> probabilities,
                                              const Spectrum& spectrum);

// -sum p ln p, with 0 ln 0 = 0.
double shannon_entropy(std::span<const double> probabilities);

// sum_i p_i f(E_i) for bounded f.
double conditional_expectation_of(const std::function<double(double)>& f,
                                  std::span<const double> probabilities,
                                  const Spectrum& spectrum);

// |psi_t> = sum_i e^{-i E_i t} sqrt(pi_it) |phi_i>; unit norm by construction.
std::vector<Amplitude> state_vector(std::span<const double> probabilities,
                                    const LudersDecomposition& dec,
                                    const Spectrum& spectrum, double t);

// Innovation reconstructed from (xi, H) by left-point Ito sums; W[0] = 0.
// Asymptotic:  W_t = xi_t - sigma * int_0^t H_s ds
// Finite time: W_t = xi_t + int_0^t (xi_s - sigma*T*H_s) / (T - s) ds
std::vector<double> innovation_path(const ModelKind& model, const PathGrid& grid,
                                    std::span<const double> xi,
                                    std::span<const double> energy_expectation);

// H_t path conditioned on terminal level k (xi driven by E_k); converges to
// E_k for large t (asymptotic) and reaches it exactly at t == horizon.
std::vector<double> conditioned_energy_curve(const ModelKind& model,
                                             const Spectrum& spectrum,
                                             std::span<const double> pi0,
                                             std::size_t level, const NoisePath& noise);

namespace detail {

// Allocation-free posterior kernel used by the ensemble engine. log_pi0 holds
// ln(pi0_i) for present levels and -inf for absent ones; `out` receives the
// normalized probabilities.
void posterior_weights(const ModelKind& model, std::span<const double> energies,
                       std::span<const double> log_pi0, double xi, double t,
                       std::span<double> out);

std::vector<double> log_priors(std::span<const double> pi0);

}  // namespace detail

}  // namespace qsr
