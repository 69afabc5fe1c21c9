#pragma once

#include <functional>
#include <span>
#include <vector>

#include "qsr/closedform.hpp"
#include "qsr/spectrum.hpp"

namespace qsr {

// Energy functions defining the volatility operator of the general stationary
// norm-preserving equation: vol = sigma_scale * (i K(H) + L(H) - <L(H)>).
// The drift is fixed by norm preservation: -iH - vol^dagger vol / 2.
struct GeneralModel {
  std::function<double(double)> noise_gain;  // L; required
  std::function<double(double)> phase_gain;  // K; null means 0
};

// One Euler-Maruyama step of the nonlinear state equation, evaluated with the
// pre-step energy expectation and followed by explicit renormalization.
// The standard step is the general step with K = 0, L(x) = x/2 and
// sigma_scale = sigma (asymptotic) or sigma*T/(T-t) (finite time); for the
// finite-time model the step must satisfy t + dt <= T - dt.
void euler_step_standard(std::vector<Amplitude>& state, const ModelKind& model,
                         double t, double d_w, double dt, const Spectrum& spectrum);
void euler_step_general(std::vector<Amplitude>& state, const GeneralModel& gm,
                        double sigma_scale, double d_w, double dt,
                        const Spectrum& spectrum);

double state_norm(std::span<const Amplitude> state);
void normalize_state(std::vector<Amplitude>& state);

// Exact solution of the ancillary linear equation:
// |phi_t> = exp(-iHt + (sigma/2) H xi - (sigma^2/4) H^2 t) |phi_0>, unnormalized.
// Its squared norm equals sum_i pi_i exp(sigma E_i xi - sigma^2 E_i^2 t / 2).
std::vector<Amplitude> ancillary_exact(std::span<const Amplitude> psi0, double sigma,
                                       double xi, double t, const Spectrum& spectrum);

struct ObservableMoments {
  double mean = 0.0;                 // <G>
  double variance = 0.0;             // <(G-<G>)^2>
  double energy_covariance = 0.0;    // <(G-<G>)(H-<H>)>
  double spread_energy_coupling = 0.0;  // <(G-<G>)^2 (H-<H>)>
  double energy_third_moment = 0.0;  // <(H-<H>)^3>
};

// Moments of an observable diagonal in the energy eigenbasis.
ObservableMoments observable_expectations(std::span<const Amplitude> state,
                                          std::span<const double> observable,
                                          const Spectrum& spectrum);

}  // namespace qsr
