#include <doctest.h>

#include <cmath>
#include <random>

#include "qsr/closedform.hpp"
#include "qsr/stats.hpp"
#include "qsr/trajectory.hpp"

using namespace qsr;

namespace {

const Spectrum& two_level() {
  static const Spectrum spectrum({{0.0, 1}, {1.0, 1}});
  return spectrum;
}

LudersDecomposition symmetric_two_level_dec() {
  const double r = 1.0 / std::sqrt(2.0);
  return decompose(two_level(), InitialState({{r, 0.0}, {r, 0.0}}));
}

}  // namespace

TEST_CASE("information path reduces to the noise when the drift vanishes") {
  const PathGrid grid(1.0, 16);
  const NoisePath noise = sample_brownian(grid, SeedPolicy{1}, 0);
  const auto xi = information_path(make_asymptotic(1.0), 0, noise, two_level());
  for (std::size_t k = 0; k <= grid.steps(); ++k) {
    CHECK(xi[k] == noise.values[k]);  // E_0 = 0: xi is the Brownian path itself
  }
}

TEST_CASE("information path is the pure drift on a silent bridge") {
  const PathGrid grid(1.0, 8);
  NoisePath silent{grid, NoiseKind::Bridge, std::vector<double>(grid.points(), 0.0)};
  const auto xi = information_path(make_finite_time(1.0, 1.0), 1, silent, two_level());
  for (std::size_t k = 0; k <= grid.steps(); ++k) {
    CHECK(xi[k] == doctest::Approx(grid.time(k)).epsilon(1e-15));
  }
}

TEST_CASE("information path scales with sigma") {
  const PathGrid grid(1.0, 4);
  NoisePath silent{grid, NoiseKind::Brownian, std::vector<double>(grid.points(), 0.0)};
  const auto xi = information_path(make_asymptotic(2.0), 1, silent, two_level());
  CHECK(xi[4] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("information path rejects mismatched noise") {
  const PathGrid grid(1.0, 8);
  const NoisePath brownian = sample_brownian(grid, SeedPolicy{1}, 0);
  CHECK_THROWS_AS(information_path(make_finite_time(1.0, 1.0), 0, brownian, two_level()),
                  std::invalid_argument);
  const NoisePath bridge = sample_bridge(grid, SeedPolicy{1}, 0);
  CHECK_THROWS_AS(information_path(make_finite_time(1.0, 2.0), 0, bridge, two_level()),
                  std::invalid_argument);
}

TEST_CASE("no information at t = 0 returns the prior") {
  const std::vector<double> prior{0.3, 0.7};
  for (const ModelKind& model : {make_asymptotic(1.3), make_finite_time(0.7, 2.0)}) {
    const auto posterior = conditional_probabilities(model, two_level(), prior, 0.0, 0.0);
    CHECK(posterior[0] == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(posterior[1] == doctest::Approx(0.7).epsilon(1e-14));
  }
}

TEST_CASE("two-level posterior matches the Bayes kernel and a Monte Carlo oracle") {
  // Independent oracle 1: kernel-regression estimate of P(H = E_1 | xi_1 ~ 1)
  // from simulated (H, xi_1) pairs, drawn with the standard library generator.
  std::mt19937_64 gen(12345);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  const double window = 0.02;
  std::size_t hits = 0, total = 0;
  for (int i = 0; i < 2000000; ++i) {
    const double h = coin(gen) ? 1.0 : 0.0;
    const double xi1 = h + normal(gen);
    if (std::abs(xi1 - 1.0) <= window) {
      ++total;
      if (h == 1.0) ++hits;
    }
  }
  const double mc = static_cast<double>(hits) / static_cast<double>(total);

  // Independent oracle 2: extended-precision direct evaluation of
  // e^{1/2} / (1 + e^{1/2}).
  const long double exact = expl(0.5L) / (1.0L + expl(0.5L));
  CHECK(static_cast<double>(exact) == doctest::Approx(0.622459).epsilon(1e-6));
  CHECK(mc == doctest::Approx(static_cast<double>(exact)).epsilon(0.02));

  const std::vector<double> prior{0.5, 0.5};
  const auto posterior =
      conditional_probabilities(make_asymptotic(1.0), two_level(), prior, 1.0, 1.0);
  CHECK(posterior[1] == doctest::Approx(static_cast<double>(exact)).epsilon(1e-12));
  CHECK(posterior[0] == doctest::Approx(1.0 - static_cast<double>(exact)).epsilon(1e-12));
}

TEST_CASE("finite-time posterior is one-hot at the horizon") {
  const std::vector<double> prior{0.5, 0.5};
  const ModelKind model = make_finite_time(1.0, 1.0);
  // A path with H = E_1 pins xi_T = sigma T E_1.
  const auto at_horizon = conditional_probabilities(model, two_level(), prior, 1.0, 1.0);
  CHECK(at_horizon[0] == 0.0);
  CHECK(at_horizon[1] == 1.0);
  CHECK_THROWS_AS(conditional_probabilities(model, two_level(), prior, 0.0, 1.5),
                  std::invalid_argument);
}

TEST_CASE("zero-prior levels stay at zero") {
  const Spectrum spectrum({{0.0, 1}, {1.0, 1}, {2.0, 1}});
  const std::vector<double> prior{0.5, 0.0, 0.5};
  const auto posterior =
      conditional_probabilities(make_asymptotic(1.0), spectrum, prior, 2.0, 1.0);
  CHECK(posterior[1] == 0.0);
  CHECK(posterior[0] + posterior[2] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("posterior survives exponent scales that overflow naive weights") {
  const Spectrum spectrum({{0.0, 1}, {100.0, 1}});
  const std::vector<double> prior{0.5, 0.5};
  const auto posterior =
      conditional_probabilities(make_asymptotic(1.0), spectrum, prior, 50.0, 1.0);
  CHECK(std::isfinite(posterior[0]));
  CHECK(posterior[0] + posterior[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("energy and variance from probabilities") {
  CHECK(energy_and_variance(std::vector<double>{1.0, 0.0}, two_level()) ==
        std::pair<double, double>{0.0, 0.0});
  const auto [h, v] = energy_and_variance(std::vector<double>{0.5, 0.5}, two_level());
  CHECK(h == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
  // Oracle: for two levels (0,1), V = p0 p1.
  const auto [h2, v2] =
      energy_and_variance(std::vector<double>{0.377541, 0.622459}, two_level());
  CHECK(h2 == doctest::Approx(0.622459).epsilon(1e-12));
  CHECK(v2 == doctest::Approx(0.377541 * 0.622459).epsilon(1e-12));
  CHECK(v2 == doctest::Approx(0.235004).epsilon(1e-5));
}

TEST_CASE("state vector initial condition, collapse limit, and norm") {
  const auto dec = symmetric_two_level_dec();
  const std::vector<double> prior{0.5, 0.5};

  const auto at_zero = state_vector(prior, dec, two_level(), 0.0);
  CHECK(std::abs(at_zero[0] - Amplitude{1.0 / std::sqrt(2.0), 0.0}) <= 1e-14);
  CHECK(std::abs(at_zero[1] - Amplitude{1.0 / std::sqrt(2.0), 0.0}) <= 1e-14);

  const double t = 0.8;
  const auto collapsed = state_vector(std::vector<double>{0.0, 1.0}, dec, two_level(), t);
  CHECK(std::abs(collapsed[0]) == 0.0);
  CHECK(std::abs(collapsed[1] - std::polar(1.0, -t)) <= 1e-14);

  for (double p0 : {0.1, 0.42, 0.9}) {
    const auto psi = state_vector(std::vector<double>{p0, 1.0 - p0}, dec, two_level(), 0.3);
    double norm_sq = 0.0;
    for (const Amplitude& a : psi) norm_sq += std::norm(a);
    CHECK(norm_sq == doctest::Approx(1.0).epsilon(1e-12));
  }

  CHECK_THROWS_AS(
      state_vector(std::vector<double>{0.0, 1.0},
                   decompose(two_level(), InitialState({{1.0, 0.0}, {0.0, 0.0}})),
                   two_level(), 0.0),
      std::invalid_argument);
}

TEST_CASE("innovation rejects series that do not match the grid") {
  const PathGrid grid(1.0, 8);
  const std::vector<double> short_series(5, 0.0);
  const std::vector<double> full_series(9, 0.0);
  CHECK_THROWS_AS(
      innovation_path(make_asymptotic(1.0), grid, short_series, full_series),
      std::invalid_argument);
}

TEST_CASE("innovation equals the driving noise on a single level") {
  const Spectrum spectrum({{0.0, 1}});
  LudersDecomposition dec;
  dec.probabilities = {1.0};
  dec.luders_states = {{Amplitude{1.0, 0.0}}};
  const PathGrid grid(1.0, 64);
  const NoisePath noise = sample_brownian(grid, SeedPolicy{9}, 3);
  const auto xi = information_path(make_asymptotic(1.0), 0, noise, spectrum);
  std::vector<double> h(grid.points(), 0.0);
  const auto w = innovation_path(make_asymptotic(1.0), grid, xi, h);
  for (std::size_t k = 0; k <= grid.steps(); ++k) {
    CHECK(w[k] == doctest::Approx(noise.values[k]).epsilon(1e-12));
  }
}

TEST_CASE("innovation has unit-rate quadratic variation") {
  // Oracle: (dW)^2 = dt from the innovation representation.
  const PathGrid grid(1.0, 10000);
  const auto dec = symmetric_two_level_dec();
  TrajectoryRecord record(grid, 2);
  const NoisePath noise = sample_brownian(grid, SeedPolicy{21}, 1);
  compute_trajectory(make_asymptotic(1.0), two_level(), dec, noise, 1, record);
  double qv = 0.0;
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const double d = record.innovation[k + 1] - record.innovation[k];
    qv += d * d;
  }
  CHECK(qv == doctest::Approx(1.0).epsilon(0.05));
  CHECK(record.innovation[0] == 0.0);
}

TEST_CASE("terminal innovation is standard normal across the ensemble") {
  // Oracle: Brownian marginal N(0, 1) at t = 1.
  const PathGrid grid(1.0, 256);
  const auto dec = symmetric_two_level_dec();
  const SeedPolicy seeds{77};
  const std::size_t n = 10000;
  std::vector<double> terminal(n);
  TrajectoryRecord record(grid, 2);
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t level = sample_terminal_level(dec, seeds, p);
    const NoisePath noise = sample_brownian(grid, seeds, p);
    compute_trajectory(make_asymptotic(1.0), two_level(), dec, noise, level, record);
    terminal[p] = record.innovation[grid.steps()];
  }
  const auto m = stats::mean_se(terminal);
  CHECK(std::abs(m.mean) <= 0.03);
  CHECK(stats::sample_variance(terminal) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("conditional expectation of energy functions") {
  const std::vector<double> probs{0.5, 0.5};
  const Spectrum spectrum({{0.0, 1}, {2.0, 1}});
  CHECK(conditional_expectation_of([](double e) { return e; }, probs, spectrum) ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK(conditional_expectation_of([](double e) { return e * e; }, probs, spectrum) ==
        doctest::Approx(2.0).epsilon(1e-15));
  CHECK(conditional_expectation_of([](double e) { return e == 2.0 ? 1.0 : 0.0; }, probs,
                                   spectrum) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("shannon entropy basics") {
  CHECK(shannon_entropy(std::vector<double>{1.0, 0.0}) == 0.0);
  CHECK(shannon_entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-14));
  CHECK(shannon_entropy(std::vector<double>{0.25, 0.5, 0.25}) ==
        doctest::Approx(1.039720770839918).epsilon(1e-13));
}

TEST_CASE("conditioned energy curve converges to the conditioning level") {
  SUBCASE("single level stays constant") {
    const Spectrum spectrum({{1.5, 1}});
    const PathGrid grid(1.0, 32);
    const NoisePath noise = sample_brownian(grid, SeedPolicy{2}, 0);
    const auto curve = conditioned_energy_curve(make_asymptotic(1.0), spectrum,
                                                std::vector<double>{1.0}, 0, noise);
    for (double h : curve) CHECK(h == doctest::Approx(1.5).epsilon(1e-14));
  }

  SUBCASE("asymptotic: matches the martingale-factor expression and approaches E_1") {
    // Oracle: H_t = (pi1 E1 + pi0 E0 M_t) / (pi1 + pi0 M_t) with
    // M_t = exp(sigma (E0-E1) B_t - sigma^2 (E0-E1)^2 t / 2), evaluated with
    // the same sampled path.
    const PathGrid grid(60.0, 4096);
    const NoisePath noise = sample_brownian(grid, SeedPolicy{12}, 4);
    const std::vector<double> prior{0.5, 0.5};
    const auto curve =
        conditioned_energy_curve(make_asymptotic(1.0), two_level(), prior, 1, noise);
    for (std::size_t k : {std::size_t{16}, std::size_t{1024}, std::size_t{4096}}) {
      const double t = grid.time(k);
      const double m = std::exp(-noise.values[k] - 0.5 * t);
      const double expected = (0.5 * 1.0 + 0.5 * 0.0 * m) / (0.5 + 0.5 * m);
      CHECK(curve[k] == doctest::Approx(expected).epsilon(1e-10));
    }
    CHECK(curve[4096] == doctest::Approx(1.0).epsilon(1e-6));
  }

  SUBCASE("finite time: exactly E_k at the horizon") {
    const PathGrid grid(1.0, 64);
    const NoisePath noise = sample_bridge(grid, SeedPolicy{3}, 7);
    const std::vector<double> prior{0.5, 0.5};
    const auto curve = conditioned_energy_curve(make_finite_time(1.0, 1.0), two_level(),
                                                prior, 1, noise);
    CHECK(curve[64] == 1.0);
  }

  SUBCASE("conditioning on a zero-probability level is rejected") {
    const PathGrid grid(1.0, 4);
    const NoisePath noise = sample_brownian(grid, SeedPolicy{4}, 0);
    CHECK_THROWS_AS(conditioned_energy_curve(make_asymptotic(1.0), two_level(),
                                             std::vector<double>{1.0, 0.0}, 1, noise),
                    std::invalid_argument);
  }

  SUBCASE("terminal deviation shrinks as the horizon grows") {
    const SeedPolicy seeds{66};
    const std::vector<double> prior{0.5, 0.5};
    double previous = 2.0;
    for (double t_end : {4.0, 16.0, 64.0}) {
      const PathGrid grid(t_end, 1024);
      double worst = 0.0;
      for (std::size_t p = 0; p < 32; ++p) {
        const NoisePath noise = sample_brownian(grid, seeds, p);
        const auto curve =
            conditioned_energy_curve(make_asymptotic(1.0), two_level(), prior, 1, noise);
        worst = std::max(worst, std::abs(curve[1024] - 1.0));
      }
      CHECK(worst < previous);
      previous = worst;
    }
    CHECK(previous < 1e-3);
  }
}

TEST_CASE("Bayes self-consistency: recomputing from scratch equals chaining") {
  const Spectrum spectrum({{-1.0, 1}, {0.0, 1}, {2.0, 1}});
  const std::vector<double> prior{0.5, 0.3, 0.2};

  SUBCASE("asymptotic: the update is the same kernel over the increment") {
    const ModelKind model = make_asymptotic(0.8);
    const double xi_s = 0.4, s = 0.5;
    const double xi_t = 1.1, t = 1.25;
    const auto at_s = conditional_probabilities(model, spectrum, prior, xi_s, s);
    const auto chained =
        conditional_probabilities(model, spectrum, at_s, xi_t - xi_s, t - s);
    const auto direct = conditional_probabilities(model, spectrum, prior, xi_t, t);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(chained[i] == doctest::Approx(direct[i]).epsilon(1e-10));
    }
  }

  SUBCASE("finite time: chaining through the interior exponent") {
    const double sigma = 0.8, horizon = 2.0;
    const ModelKind model = make_finite_time(sigma, horizon);
    const double xi_s = 0.4, s = 0.5;
    const double xi_t = 1.1, t = 1.25;
    const auto at_s = conditional_probabilities(model, spectrum, prior, xi_s, s);
    const auto direct = conditional_probabilities(model, spectrum, prior, xi_t, t);
    auto exponent = [&](double e, double xi, double u) {
      return (sigma * xi * e * horizon - 0.5 * sigma * sigma * e * e * u * horizon) /
             (horizon - u);
    };
    double chained[3];
    double total = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      const double e = spectrum.energy(i);
      chained[i] = at_s[i] * std::exp(exponent(e, xi_t, t) - exponent(e, xi_s, s));
      total += chained[i];
    }
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(chained[i] / total == doctest::Approx(direct[i]).epsilon(1e-10));
    }
  }
}

TEST_CASE("trajectory records preserve the probability simplex") {
  const Spectrum spectrum({{-1.0, 1}, {0.0, 2}, {2.0, 1}});
  const auto dec = decompose(
      spectrum, InitialState({{0.5, 0.0}, {0.5, 0.0}, {0.5, 0.0}, {0.5, 0.0}}));
  const SeedPolicy seeds{55};
  for (const ModelKind& model : {make_asymptotic(1.0), make_finite_time(1.0, 2.0)}) {
    const PathGrid grid(2.0, 512);
    TrajectoryRecord record(grid, 3);
    for (std::size_t p = 0; p < 8; ++p) {
      const std::size_t level = sample_terminal_level(dec, seeds, p);
      const NoisePath noise = model_horizon(model)
                                  ? sample_bridge(grid, seeds, p)
                                  : sample_brownian(grid, seeds, p);
      compute_trajectory(model, spectrum, dec, noise, level, record);
      for (std::size_t k = 0; k <= grid.steps(); ++k) {
        const auto pi = record.probabilities_at(k);
        double sum = 0.0;
        double mean = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
          CHECK(pi[i] >= 0.0);
          sum += pi[i];
          mean += pi[i] * spectrum.energy(i);
        }
        CHECK(std::abs(sum - 1.0) <= 1e-10);
        CHECK(std::abs(mean - record.energy[k]) <= 1e-10);
        CHECK(record.variance[k] >= 0.0);
      }
      CHECK(record.innovation[0] == 0.0);
    }
  }
}

TEST_CASE("entropy increments track the drift -sigma_t^2 V dt / 2") {
  // Pooled regression of dS on the drift term recovers slope 1 on fine grids.
  // The volatility of S adds mean-zero noise, so the slope needs a wide
  // energy spread and a deep ensemble to resolve.
  const Spectrum spectrum({{0.0, 1}, {2.0, 1}});
  const double r = 1.0 / std::sqrt(2.0);
  const auto dec = decompose(spectrum, InitialState({{r, 0.0}, {r, 0.0}}));
  const PathGrid grid(2.0, 8192);
  const SeedPolicy seeds{101};
  const ModelKind model = make_asymptotic(1.0);
  TrajectoryRecord record(grid, 2);

  double sum_x = 0.0, sum_y = 0.0, sum_xx = 0.0, sum_xy = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < 2048; ++p) {
    const std::size_t level = sample_terminal_level(dec, seeds, p);
    const NoisePath noise = sample_brownian(grid, seeds, p);
    compute_trajectory(model, spectrum, dec, noise, level, record);
    for (std::size_t k = 0; k < grid.steps(); ++k) {
      const double x = -0.5 * record.variance[k] * grid.dt();
      const double y = record.entropy[k + 1] - record.entropy[k];
      sum_x += x;
      sum_y += y;
      sum_xx += x * x;
      sum_xy += x * y;
      ++count;
    }
  }
  const double n = static_cast<double>(count);
  const double slope =
      (sum_xy - sum_x * sum_y / n) / (sum_xx - sum_x * sum_x / n);
  CHECK(slope == doctest::Approx(1.0).epsilon(0.10));
}
