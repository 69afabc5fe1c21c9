#include "qsr/trajectory.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "qsr/integrator.hpp"

namespace qsr {

void compute_trajectory(const ModelKind& model, const Spectrum& spectrum,
                        const LudersDecomposition& dec, const NoisePath& noise,
                        std::size_t level, TrajectoryRecord& out) {
  const PathGrid& grid = noise.grid;
  const std::size_t points = grid.points();
  const std::size_t n_levels = spectrum.level_count();
  const double sigma = model_sigma(model);
  const auto horizon = model_horizon(model);
  const double dt = grid.dt();

  out.grid = grid;
  out.level_count = n_levels;
  out.xi.resize(points);
  out.energy.resize(points);
  out.variance.resize(points);
  out.entropy.resize(points);
  out.innovation.resize(points);
  out.probabilities.resize(points * n_levels);
  out.sampled_level = level;

  std::vector<double> energies(n_levels);
  for (std::size_t i = 0; i < n_levels; ++i) energies[i] = spectrum.energy(i);
  const std::vector<double> log_pi0 = detail::log_priors(dec.probabilities);

  const double drift = sigma * energies[level];
  for (std::size_t k = 0; k < points; ++k) {
    out.xi[k] = drift * grid.time(k) + noise.values[k];
  }

  for (std::size_t k = 0; k < points; ++k) {
    const double t = grid.time(k);
    std::span<double> pi{out.probabilities.data() + k * n_levels, n_levels};
    detail::posterior_weights(model, energies, log_pi0, out.xi[k], t, pi);

    double mean = 0.0;
    for (std::size_t i = 0; i < n_levels; ++i) mean += pi[i] * energies[i];
    double variance = 0.0;
    double entropy = 0.0;
    for (std::size_t i = 0; i < n_levels; ++i) {
      const double d = energies[i] - mean;
      variance += pi[i] * d * d;
      if (pi[i] > 0.0) entropy -= pi[i] * std::log(pi[i]);
    }
    out.energy[k] = mean;
    out.variance[k] = variance;
    out.entropy[k] = entropy;
  }

  out.innovation[0] = 0.0;
  for (std::size_t k = 0; k + 1 < points; ++k) {
    const double d_xi = out.xi[k + 1] - out.xi[k];
    if (horizon) {
      const double correction =
          (out.xi[k] - sigma * *horizon * out.energy[k]) / (*horizon - grid.time(k));
      out.innovation[k + 1] = out.innovation[k] + d_xi + correction * dt;
    } else {
      out.innovation[k + 1] = out.innovation[k] + d_xi - sigma * out.energy[k] * dt;
    }
  }

  const auto terminal_pi = out.probabilities_at(points - 1);
  std::size_t best = 0;
  double best_p = -1.0;
  for (std::size_t i = 0; i < n_levels; ++i) {
    if (terminal_pi[i] > best_p) {
      best_p = terminal_pi[i];
      best = i;
    }
  }
  out.terminal_level = best;
}

ObservableTable make_observable_table(std::span<const double> observable,
                                      const LudersDecomposition& dec,
                                      const Spectrum& spectrum) {
  if (observable.size() != spectrum.dimension()) {
    throw std::invalid_argument("observable: diagonal size must match dimension");
  }
  const std::size_t n_levels = spectrum.level_count();
  ObservableTable table;
  table.level_mean.assign(n_levels, 0.0);
  table.level_second.assign(n_levels, 0.0);
  table.level_variance.assign(n_levels, 0.0);
  for (std::size_t i = 0; i < n_levels; ++i) {
    if (!dec.present(i)) continue;
    const auto& phi = dec.luders_states[i];
    const std::size_t offset = spectrum.block_offset(i);
    const std::size_t size = spectrum.block_size(i);
    double mean = 0.0;
    double second = 0.0;
    for (std::size_t b = 0; b < size; ++b) {
      const double w = std::norm(phi[offset + b]);
      mean += w * observable[offset + b];
      second += w * observable[offset + b] * observable[offset + b];
    }
    table.level_mean[i] = mean;
    table.level_second[i] = second;
    table.level_variance[i] = second - mean * mean;
  }
  return table;
}

EnsembleResult::EnsembleResult(std::uint64_t n_paths, std::size_t n_out,
                               std::size_t levels, bool with_observable)
    : n_paths_(n_paths),
      n_out_(n_out),
      levels_(levels),
      with_observable_(with_observable) {
  const std::size_t n_series = static_cast<std::size_t>(Series::Count);
  tables_.resize(n_series);
  const std::size_t cells = static_cast<std::size_t>(n_paths) * n_out;
  for (std::size_t s = 0; s < n_series; ++s) {
    const bool observable_series = s >= static_cast<std::size_t>(Series::ObservableMean);
    if (observable_series && !with_observable) continue;
    tables_[s].assign(cells, 0.0);
  }
  pi_table_.assign(cells * levels, 0.0);
  functionals_.resize(n_paths);
}

double& EnsembleResult::value(Series s, std::uint64_t path, std::size_t out_idx) {
  return tables_[static_cast<std::size_t>(s)][path * n_out_ + out_idx];
}

double EnsembleResult::value(Series s, std::uint64_t path, std::size_t out_idx) const {
  return tables_[static_cast<std::size_t>(s)][path * n_out_ + out_idx];
}

double& EnsembleResult::pi_value(std::uint64_t path, std::size_t out_idx,
                                 std::size_t level) {
  return pi_table_[(path * n_out_ + out_idx) * levels_ + level];
}

double EnsembleResult::pi_value(std::uint64_t path, std::size_t out_idx,
                                std::size_t level) const {
  return pi_table_[(path * n_out_ + out_idx) * levels_ + level];
}

std::vector<double> EnsembleResult::column(Series s, std::size_t out_idx) const {
  std::vector<double> out(n_paths_);
  for (std::uint64_t p = 0; p < n_paths_; ++p) out[p] = value(s, p, out_idx);
  return out;
}

std::vector<double> EnsembleResult::pi_column(std::size_t level,
                                              std::size_t out_idx) const {
  std::vector<double> out(n_paths_);
  for (std::uint64_t p = 0; p < n_paths_; ++p) out[p] = pi_value(p, out_idx, level);
  return out;
}

namespace {

void run_one_path(const EnsembleSetup& setup, std::uint64_t path,
                  TrajectoryRecord& record, std::vector<double>& noise_values,
                  EnsembleResult& result) {
  const Spectrum& spectrum = *setup.spectrum;
  const LudersDecomposition& dec = *setup.dec;
  const auto horizon = model_horizon(setup.model);

  const std::size_t level = sample_terminal_level(dec, setup.seeds, path);
  if (horizon) {
    detail::bridge_into(setup.grid, setup.seeds, path, noise_values);
  } else {
    detail::brownian_into(setup.grid, setup.seeds, path, noise_values);
  }
  NoisePath noise{setup.grid, horizon ? NoiseKind::Bridge : NoiseKind::Brownian,
                  std::move(noise_values)};
  compute_trajectory(setup.model, spectrum, dec, noise, level, record);
  noise_values = std::move(noise.values);

  const std::size_t points = setup.grid.points();
  const std::size_t n_levels = spectrum.level_count();

  for (std::size_t j = 0; j < setup.output_indices.size(); ++j) {
    const std::size_t k = setup.output_indices[j];
    result.value(Series::Xi, path, j) = record.xi[k];
    result.value(Series::Energy, path, j) = record.energy[k];
    result.value(Series::Variance, path, j) = record.variance[k];
    result.value(Series::Entropy, path, j) = record.entropy[k];
    result.value(Series::Innovation, path, j) = record.innovation[k];
    for (std::size_t i = 0; i < n_levels; ++i) {
      result.pi_value(path, j, i) = record.probabilities[k * n_levels + i];
    }
    if (setup.observable) {
      const auto& table = *setup.observable;
      double mean = 0.0;
      double second = 0.0;
      for (std::size_t i = 0; i < n_levels; ++i) {
        const double p = record.probabilities[k * n_levels + i];
        mean += p * table.level_mean[i];
        second += p * table.level_second[i];
      }
      result.value(Series::ObservableMean, path, j) = mean;
      result.value(Series::ObservableVariance, path, j) = second - mean * mean;
    }
  }

  PathFunctionals& f = result.functionals()[path];
  f.sampled_level = static_cast<std::uint32_t>(level);
  f.terminal_level = static_cast<std::uint32_t>(record.terminal_level);

  // Finite time: the innovation statistics live on [0, T - dt]; the left-point
  // integrand 1/(T - s) is not defined at t = T.
  const std::size_t innov_end = horizon ? points - 2 : points - 1;
  f.innovation_terminal = record.innovation[innov_end];
  double qv = 0.0;
  for (std::size_t k = 0; k < innov_end; ++k) {
    const double dw = record.innovation[k + 1] - record.innovation[k];
    qv += dw * dw;
  }
  f.innovation_qv = qv;

  const double dt = setup.grid.dt();
  double quad = 0.0;
  for (std::size_t k = 0; k + 1 < points; ++k) {
    const double s = model_sigma_at(setup.model, setup.grid.time(k));
    quad += 0.5 * s * s * record.variance[k] * dt;
  }
  f.entropy_quadrature = quad;
  f.entropy_final = record.entropy[points - 1];
  f.variance_final = record.variance[points - 1];
  if (setup.observable) {
    f.terminal_observable_variance =
        setup.observable->level_variance[record.terminal_level];
  }
}

}  // namespace

EnsembleResult run_closedform_ensemble(const EnsembleSetup& setup,
                                       std::uint64_t n_paths, unsigned threads) {
  if (setup.spectrum == nullptr || setup.dec == nullptr) {
    throw std::invalid_argument("ensemble: setup is missing spectrum/decomposition");
  }
  if (n_paths == 0) {
    throw std::invalid_argument("ensemble: n_paths must be >= 1");
  }
  if (setup.output_indices.empty()) {
    throw std::invalid_argument("ensemble: no output indices");
  }

  EnsembleResult result(n_paths, setup.output_indices.size(),
                        setup.spectrum->level_count(), setup.observable.has_value());

  unsigned n_threads = threads == 0 ? std::thread::hardware_concurrency() : threads;
  if (n_threads == 0) n_threads = 1;
  n_threads = static_cast<unsigned>(
      std::min<std::uint64_t>(n_threads, n_paths));

  std::atomic<std::uint64_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&] {
    TrajectoryRecord record(setup.grid, setup.spectrum->level_count());
    std::vector<double> noise_values;
    try {
      for (;;) {
        const std::uint64_t path = next.fetch_add(1);
        if (path >= n_paths) break;
        run_one_path(setup, path, record, noise_values, result);
      }
    } catch (...) {
      std::scoped_lock lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
      next.store(n_paths);
    }
  };

  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return result;
}

std::vector<std::size_t> default_output_indices(std::size_t steps, std::size_t target) {
  std::vector<std::size_t> out;
  const std::size_t n = std::min(target, steps);
  out.reserve(n + 1);
  for (std::size_t j = 0; j <= n; ++j) {
    out.push_back((j * steps) / n);
  }
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::size_t> snap_times_to_grid(const PathGrid& grid,
                                            std::span<const double> times) {
  std::vector<std::size_t> out;
  out.reserve(times.size());
  for (double t : times) {
    if (!(t >= 0.0) || t > grid.t_end() * (1.0 + 1e-12)) {
      throw std::invalid_argument("output time outside [0, t_end]");
    }
    const double pos = t / grid.dt();
    const std::size_t k = static_cast<std::size_t>(
        std::llround(std::min(pos, static_cast<double>(grid.steps()))));
    out.push_back(k);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace qsr
