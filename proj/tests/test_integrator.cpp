#include <doctest.h>

#include <cmath>

#include "qsr/diagnostics.hpp"
#include "qsr/integrator.hpp"
#include "qsr/stats.hpp"
#include "qsr/trajectory.hpp"

using namespace qsr;

namespace {

const Spectrum& two_level() {
  static const Spectrum spectrum({{0.0, 1}, {1.0, 1}});
  return spectrum;
}

LudersDecomposition symmetric_dec() {
  const double r = 1.0 / std::sqrt(2.0);
  return decompose(two_level(), InitialState({{r, 0.0}, {r, 0.0}}));
}

}  // namespace

TEST_CASE("an eigenstate only rotates its phase") {
  const Spectrum spectrum({{2.0, 1}});
  std::vector<Amplitude> state{{1.0, 0.0}};
  const double dt = 1e-3;
  euler_step_standard(state, make_asymptotic(1.0), 0.0, 0.05, dt, spectrum);
  CHECK(std::abs(state[0]) == doctest::Approx(1.0).epsilon(1e-14));
  // phase advanced by approximately -E dt
  CHECK(std::arg(state[0]) == doctest::Approx(-2.0 * dt).epsilon(1e-2));

  // two-level one-hot state is invariant up to phase for any noise increment
  std::vector<Amplitude> one_hot{{0.0, 0.0}, {1.0, 0.0}};
  euler_step_standard(one_hot, make_asymptotic(1.0), 0.0, -0.3, dt, two_level());
  CHECK(std::abs(one_hot[0]) == 0.0);
  CHECK(std::abs(one_hot[1]) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("zero Hamiltonian and zero noise leave the state unchanged") {
  const Spectrum spectrum({{0.0, 2}});
  std::vector<Amplitude> state{{0.6, 0.0}, {0.0, 0.8}};
  euler_step_standard(state, make_asymptotic(1.0), 0.0, 0.0, 0.01, spectrum);
  CHECK(std::abs(state[0] - Amplitude{0.6, 0.0}) <= 1e-15);
  CHECK(std::abs(state[1] - Amplitude{0.0, 0.8}) <= 1e-15);
}

TEST_CASE("the standard step is the general step with L = x/2") {
  const Spectrum spectrum({{-1.0, 1}, {0.0, 2}, {2.0, 1}});
  std::vector<Amplitude> a{{0.5, 0.1}, {0.3, -0.2}, {0.4, 0.0}, {0.2, 0.65}};
  normalize_state(a);
  std::vector<Amplitude> b = a;

  const double sigma = 1.7, dw = 0.043, dt = 1e-3;
  euler_step_standard(a, make_asymptotic(sigma), 0.0, dw, dt, spectrum);
  const GeneralModel specialized{[](double e) { return 0.5 * e; }, nullptr};
  euler_step_general(b, specialized, sigma, dw, dt, spectrum);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].real() == b[i].real());  // bitwise: same code path
    CHECK(a[i].imag() == b[i].imag());
  }
}

TEST_CASE("norm drift without renormalization is second order in dt") {
  // With dW = +-sqrt(dt) the step's quadratic term cancels the drift exactly,
  // so the averaged norm defect scales like dt^2.
  const Spectrum spectrum({{0.0, 1}, {1.0, 1}});
  const double sigma = 1.0;

  auto norm_defect = [&](double dt) {
    double total = 0.0;
    for (double sign : {1.0, -1.0}) {
      std::vector<Amplitude> state{{1.0 / std::sqrt(2.0), 0.0},
                                   {0.5, 0.5}};  // mixed phases
      normalize_state(state);
      // raw Euler factors, no renormalization
      const double h = 0.5;  // <H> for equal weights
      double norm_sq = 0.0;
      for (std::size_t i = 0; i < 2; ++i) {
        const double e = spectrum.energy(i);
        const double vol = 0.5 * sigma * (e - h);
        const Amplitude drift{-0.5 * vol * vol, -e};
        const Amplitude factor = 1.0 + drift * dt + vol * sign * std::sqrt(dt);
        norm_sq += std::norm(state[i] * factor);
      }
      total += norm_sq - 1.0;
    }
    return std::abs(total / 2.0);
  };

  const double coarse = norm_defect(1e-2);
  const double fine = norm_defect(1e-3);
  CHECK(coarse / fine == doctest::Approx(100.0).epsilon(0.2));
}

TEST_CASE("renormalized steps keep unit norm") {
  std::vector<Amplitude> state{{0.6, 0.0}, {0.0, 0.8}};
  rng::Stream stream(3);
  const double dt = 1e-3;
  for (int k = 0; k < 1000; ++k) {
    euler_step_standard(state, make_asymptotic(1.0), k * dt,
                        std::sqrt(dt) * stream.next_normal(), dt, two_level());
    CHECK(std::abs(state_norm(state) - 1.0) <= 1e-10);
  }
}

TEST_CASE("finite-time stepping refuses to cross the guard") {
  std::vector<Amplitude> state{{1.0, 0.0}, {0.0, 0.0}};
  const ModelKind model = make_finite_time(1.0, 1.0);
  const double dt = 1.0 / 16.0;
  CHECK_THROWS_AS(euler_step_standard(state, model, 1.0 - dt, 0.0, dt, two_level()),
                  std::invalid_argument);
  euler_step_standard(state, model, 1.0 - 2.0 * dt, 0.0, dt, two_level());  // allowed
}

TEST_CASE("strong error against the closed form halves per 4x dt refinement") {
  // Oracle: the closed form driven by the same innovation increments solves
  // the state equation (Euler strong order 1/2).
  const auto dec = symmetric_dec();
  const SeedPolicy seeds{2718};
  const std::vector<std::size_t> ladder{64, 256, 1024};
  const auto study = run_convergence_study(make_asymptotic(1.0), 1.0, two_level(), dec,
                                           seeds, ladder, 64);
  REQUIRE(study.rows.size() == 3);
  CHECK(study.rows[2].rms_error < study.rows[1].rms_error);
  CHECK(study.rows[1].rms_error < study.rows[0].rms_error);
  for (std::size_t i = 1; i < 3; ++i) {
    CHECK(study.rows[i].order >= 0.339);  // >= order ~0.4 with sampling slack
  }
}

TEST_CASE("general model with pure phase gain keeps energy moments flat") {
  // K only rotates phases; the level weights are driftless, so <H> and <H^2>
  // stay put across the ensemble. The step must be fine enough that the
  // renormalized Euler scheme's own O(dt) weight bias stays below MC error.
  const Spectrum spectrum({{0.0, 1}, {1.0, 1}, {2.0, 1}});
  const auto dec = decompose(
      spectrum,
      InitialState({{std::sqrt(0.3), 0.0}, {std::sqrt(0.3), 0.0}, {std::sqrt(0.4), 0.0}}));
  const std::vector<Amplitude> psi0 = reconstruct_initial_state(dec, spectrum);
  const GeneralModel phase_only{[](double) { return 0.0; },
                                [](double e) { return 0.4 * e; }};

  const std::size_t n_paths = 500, n_steps = 4096;
  const double dt = 1.0 / 4096.0;
  std::vector<double> h1(n_paths), h2(n_paths);
  for (std::size_t p = 0; p < n_paths; ++p) {
    rng::Stream stream = rng::make_stream(414, p, rng::kNoiseStream);
    std::vector<Amplitude> state = psi0;
    for (std::size_t k = 0; k < n_steps; ++k) {
      euler_step_general(state, phase_only, 1.0, std::sqrt(dt) * stream.next_normal(),
                         dt, spectrum);
    }
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t b = 0; b < state.size(); ++b) {
      const double e = spectrum.energy(b);
      m1 += std::norm(state[b]) * e;
      m2 += std::norm(state[b]) * e * e;
    }
    h1[p] = m1;
    h2[p] = m2;
  }
  const auto m1 = stats::mean_se(h1);
  const auto m2 = stats::mean_se(h2);
  CHECK(std::abs(m1.mean - 1.1) <= std::max(4.0 * m1.se, 1e-9));
  CHECK(std::abs(m2.mean - 1.9) <= std::max(4.0 * m2.se, 1e-9));
}

TEST_CASE("general model variance drift is non-positive for any noise gain") {
  // L(x) = x^2 still reduces the energy variance on average (the drift of V is
  // -4 <(H-<H>)(L-<L>)>^2).
  const Spectrum spectrum({{0.0, 1}, {1.0, 1}, {2.0, 1}});
  const auto dec = decompose(
      spectrum,
      InitialState({{std::sqrt(0.2), 0.0}, {std::sqrt(0.5), 0.0}, {std::sqrt(0.3), 0.0}}));
  const std::vector<Amplitude> psi0 = reconstruct_initial_state(dec, spectrum);
  const GeneralModel quadratic{[](double e) { return e * e; }, nullptr};

  const std::size_t n_paths = 10000, n_steps = 64;
  const double dt = 0.5 / 64.0;
  std::vector<double> v_mid(n_paths), v_end(n_paths);
  double v0 = 0.0;
  {
    double h0 = 0.0;
    for (std::size_t b = 0; b < psi0.size(); ++b) h0 += std::norm(psi0[b]) * spectrum.energy(b);
    for (std::size_t b = 0; b < psi0.size(); ++b) {
      const double d = spectrum.energy(b) - h0;
      v0 += std::norm(psi0[b]) * d * d;
    }
  }
  for (std::size_t p = 0; p < n_paths; ++p) {
    rng::Stream stream = rng::make_stream(515, p, rng::kNoiseStream);
    std::vector<Amplitude> state = psi0;
    auto variance_of = [&](const std::vector<Amplitude>& s) {
      double h = 0.0;
      for (std::size_t b = 0; b < s.size(); ++b) h += std::norm(s[b]) * spectrum.energy(b);
      double v = 0.0;
      for (std::size_t b = 0; b < s.size(); ++b) {
        const double d = spectrum.energy(b) - h;
        v += std::norm(s[b]) * d * d;
      }
      return v;
    };
    for (std::size_t k = 0; k < n_steps; ++k) {
      euler_step_general(state, quadratic, 1.0, std::sqrt(dt) * stream.next_normal(), dt,
                         spectrum);
      if (k == n_steps / 2 - 1) v_mid[p] = variance_of(state);
    }
    v_end[p] = variance_of(state);
  }
  const auto mid = stats::mean_se(v_mid);
  const auto end = stats::mean_se(v_end);
  CHECK(mid.mean <= v0 + 3.0 * mid.se);
  CHECK(end.mean <= mid.mean + 3.0 * std::hypot(mid.se, end.se));
}

TEST_CASE("ancillary propagation: identity at t = 0 and the norm formula") {
  const Spectrum spectrum({{-1.0, 1}, {0.0, 2}, {2.0, 1}});
  const auto dec = decompose(
      spectrum, InitialState({{0.5, 0.0}, {0.5, 0.0}, {0.0, 0.5}, {0.5, 0.0}}));
  const std::vector<Amplitude> psi0 = reconstruct_initial_state(dec, spectrum);

  const auto at_zero = ancillary_exact(psi0, 1.0, 0.0, 0.0, spectrum);
  for (std::size_t b = 0; b < psi0.size(); ++b) {
    CHECK(std::abs(at_zero[b] - psi0[b]) <= 1e-15);
  }

  const double sigma = 1.3, xi = 0.7, t = 0.3;
  const auto phi = ancillary_exact(psi0, sigma, xi, t, spectrum);
  double norm_sq = 0.0;
  for (const Amplitude& a : phi) norm_sq += std::norm(a);
  double reference = 0.0;
  for (std::size_t i = 0; i < spectrum.level_count(); ++i) {
    const double e = spectrum.energy(i);
    reference += dec.probabilities[i] *
                 std::exp(sigma * e * xi - 0.5 * sigma * sigma * e * e * t);
  }
  CHECK(norm_sq == doctest::Approx(reference).epsilon(1e-12));

  // Normalizing reproduces the closed-form state at the same (xi, t).
  const auto posterior =
      conditional_probabilities(make_asymptotic(sigma), spectrum, dec.probabilities, xi, t);
  const auto closed = state_vector(posterior, dec, spectrum, t);
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (std::size_t b = 0; b < phi.size(); ++b) {
    CHECK(std::abs(phi[b] * inv - closed[b]) <= 1e-12);
  }
}

TEST_CASE("observable moments") {
  const Spectrum spectrum({{0.0, 1}, {1.0, 1}});
  const double r = 1.0 / std::sqrt(2.0);
  const std::vector<Amplitude> state{{r, 0.0}, {r, 0.0}};

  SUBCASE("G equal to the Hamiltonian collapses the definitions") {
    const std::vector<double> g{0.0, 1.0};
    const auto m = observable_expectations(state, g, spectrum);
    CHECK(m.energy_covariance == doctest::Approx(m.variance).epsilon(1e-14));
    CHECK(m.spread_energy_coupling == doctest::Approx(m.energy_third_moment).epsilon(1e-14));
  }

  SUBCASE("identity observable has no spread") {
    const std::vector<double> g{1.0, 1.0};
    const auto m = observable_expectations(state, g, spectrum);
    CHECK(m.mean == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(m.variance == 0.0);
    CHECK(m.energy_covariance == 0.0);
  }

  SUBCASE("moment oracle by direct summation") {
    // gamma_0 = sum w (g - G)(e - H) = 0.25, kappa_0 = 0 for the symmetric state.
    const std::vector<double> g{0.0, 1.0};
    const auto m = observable_expectations(state, g, spectrum);
    CHECK(m.energy_covariance == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(m.energy_third_moment == doctest::Approx(0.0).epsilon(1e-14));
  }

  SUBCASE("dimension mismatch is rejected") {
    CHECK_THROWS_AS(observable_expectations(state, std::vector<double>{1.0}, spectrum),
                    std::invalid_argument);
  }
}
