#include "qsr/runner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "qsr/csv.hpp"
#include "qsr/diagnostics.hpp"
#include "qsr/stats.hpp"
#include "qsr/trajectory.hpp"

namespace qsr {

using nlohmann::json;

namespace {

struct Prepared {
  Spectrum spectrum;
  LudersDecomposition dec;
  InitialMoments moments;
  PathGrid grid;
  EnsembleSetup setup;
  std::vector<double> output_times;
  std::size_t mgf_probe_index = 0;            // grid index (verification runs only)
  std::vector<std::size_t> probe_indices;     // quarter-point grid indices
};

// setup.spectrum / setup.dec point into the Prepared itself; callers bind them
// with bind_setup once the object has its final address.
Prepared prepare(const RunConfig& config, bool verification_probes) {
  Prepared prep{Spectrum(config.levels),
                {},
                {},
                PathGrid(config.t_end, config.steps),
                {},
                {}};
  prep.dec = decompose(prep.spectrum, InitialState(config.psi0));
  prep.moments = initial_moments(prep.dec, prep.spectrum);

  std::vector<std::size_t> indices;
  if (config.output_times) {
    indices = snap_times_to_grid(prep.grid, *config.output_times);
  } else {
    indices = default_output_indices(config.steps, 64);
  }
  if (verification_probes) {
    std::vector<std::size_t> extra{config.steps};
    const double sigma = model_sigma(config.model);
    // Quarter-point probes for the independence checks. For the asymptotic
    // model the quarter points sit within a few reduction times: beyond that
    // the reconstruction term sigma*t*(E_true - E_classified) amplifies rare
    // misclassifications quadratically in t.
    double probe_scale = prep.grid.t_end();
    if (!model_horizon(config.model) && prep.moments.energy_variance > 0.0) {
      probe_scale = std::min(probe_scale,
                             4.0 / (sigma * sigma * prep.moments.energy_variance));
    }
    const std::vector<double> quarter_times{0.25 * probe_scale, 0.5 * probe_scale,
                                            0.75 * probe_scale};
    prep.probe_indices = snap_times_to_grid(prep.grid, quarter_times);
    for (std::size_t k : prep.probe_indices) extra.push_back(k);
    // MGF probe: where the exponential estimators stay well behaved.
    if (model_horizon(config.model)) {
      prep.mgf_probe_index = config.steps / 2;
    } else {
      const double t_probe = std::min(1.0 / (sigma * sigma), prep.grid.t_end() / 2.0);
      prep.mgf_probe_index =
          snap_times_to_grid(prep.grid, std::vector<double>{t_probe}).front();
    }
    extra.push_back(prep.mgf_probe_index);
    // Decay-bound times {1,2,4,8} / (sigma^2 V0).
    if (prep.moments.energy_variance > 0.0) {
      for (double factor : {1.0, 2.0, 4.0, 8.0}) {
        const double t = factor / (sigma * sigma * prep.moments.energy_variance);
        if (t < prep.grid.t_end()) {
          extra.push_back(snap_times_to_grid(prep.grid, std::vector<double>{t}).front());
        }
      }
    }
    indices.insert(indices.end(), extra.begin(), extra.end());
    std::sort(indices.begin(), indices.end());
    indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  }

  prep.setup.model = config.model;
  prep.setup.grid = prep.grid;
  prep.setup.seeds = SeedPolicy{config.master_seed};
  prep.setup.output_indices = std::move(indices);
  if (config.observable) {
    prep.setup.observable =
        make_observable_table(*config.observable, prep.dec, prep.spectrum);
  }
  for (std::size_t k : prep.setup.output_indices) {
    prep.output_times.push_back(prep.grid.time(k));
  }
  return prep;
}

void bind_setup(Prepared& prep) {
  prep.setup.spectrum = &prep.spectrum;
  prep.setup.dec = &prep.dec;
}

json meta_json(const RunConfig& config, const Prepared& prep) {
  json meta;
  meta["seed"] = config.master_seed;
  meta["config_hash"] = config.config_hash();
  meta["model"] = model_horizon(config.model) ? "finite_time" : "asymptotic";
  meta["sigma"] = model_sigma(config.model);
  meta["steps"] = config.steps;
  meta["n_paths"] = config.n_paths;
  meta["initial"] = {{"H0", prep.moments.energy_mean},
                     {"V0", prep.moments.energy_variance},
                     {"S0", prep.moments.shannon_entropy}};
  return meta;
}

json results_json(const Report& report) {
  json tests = json::array();
  for (const TestResult& r : report.results()) {
    json entry;
    entry["name"] = r.name;
    entry["pass"] = r.pass;
    if (r.negative_control) entry["negative_control"] = true;
    if (r.skipped) entry["skipped"] = true;
    entry["statistic"] = r.statistic;
    entry["threshold"] = r.threshold;
    entry["detail"] = r.detail;
    tests.push_back(entry);
  }
  return tests;
}

std::string report_text(const Report& report) {
  std::string out;
  for (const TestResult& r : report.results()) {
    if (r.skipped) {
      out += "[skip] ";
    } else if (r.pass) {
      out += "[pass] ";
    } else {
      out += "[FAIL] ";
    }
    out += r.name;
    if (r.negative_control) out += " (negative control)";
    if (!r.skipped) {
      out += "  statistic=" + csv::format_double(r.statistic) +
             " threshold=" + csv::format_double(r.threshold);
    }
    out += "\n";
  }
  return out;
}

// Summary statistics per output time, reduced in canonical path order.
json summary_json(const RunConfig& config, const Prepared& prep,
                  const EnsembleResult& result) {
  json out;
  out["meta"] = meta_json(config, prep);
  out["times"] = prep.output_times;

  auto series_block = [&](Series s) {
    json block;
    std::vector<double> means, ses;
    for (std::size_t j = 0; j < result.n_out(); ++j) {
      const stats::MeanSE m = stats::mean_se(result.column(s, j));
      means.push_back(m.mean);
      ses.push_back(m.se);
    }
    block["mean"] = means;
    block["se"] = ses;
    return block;
  };

  out["series"]["H"] = series_block(Series::Energy);
  out["series"]["V"] = series_block(Series::Variance);
  out["series"]["S"] = series_block(Series::Entropy);
  out["series"]["W"] = series_block(Series::Innovation);
  if (result.has_observable()) {
    out["series"]["G"] = series_block(Series::ObservableMean);
    out["series"]["VG"] = series_block(Series::ObservableVariance);
  }
  for (std::size_t i = 0; i < result.level_count(); ++i) {
    json block;
    std::vector<double> means, ses;
    for (std::size_t j = 0; j < result.n_out(); ++j) {
      const stats::MeanSE m = stats::mean_se(result.pi_column(i, j));
      means.push_back(m.mean);
      ses.push_back(m.se);
    }
    block["mean"] = means;
    block["se"] = ses;
    out["series"]["pi_" + std::to_string(i)] = block;
  }

  std::vector<std::uint64_t> terminal(result.level_count(), 0);
  std::vector<std::uint64_t> sampled(result.level_count(), 0);
  for (const PathFunctionals& f : result.functionals()) {
    terminal[f.terminal_level]++;
    sampled[f.sampled_level]++;
  }
  out["terminal_frequencies"] = terminal;
  out["sampled_frequencies"] = sampled;
  return out;
}

std::string trajectories_csv(const RunConfig& config, const Prepared& prep) {
  const std::size_t n_levels = prep.spectrum.level_count();
  std::string out = "path_index,t,xi,H,V,S,W";
  for (std::size_t i = 0; i < n_levels; ++i) out += ",pi_" + std::to_string(i);
  out += "\n";

  TrajectoryRecord record(prep.grid, n_levels);
  std::vector<double> row(7 + n_levels);
  for (std::uint64_t path : config.trajectory_paths) {
    const std::size_t level = sample_terminal_level(prep.dec, prep.setup.seeds, path);
    const NoisePath noise = model_horizon(config.model)
                                ? sample_bridge(prep.grid, prep.setup.seeds, path)
                                : sample_brownian(prep.grid, prep.setup.seeds, path);
    compute_trajectory(config.model, prep.spectrum, prep.dec, noise, level, record);
    for (std::size_t k : prep.setup.output_indices) {
      row[0] = static_cast<double>(path);
      row[1] = prep.grid.time(k);
      row[2] = record.xi[k];
      row[3] = record.energy[k];
      row[4] = record.variance[k];
      row[5] = record.entropy[k];
      row[6] = record.innovation[k];
      for (std::size_t i = 0; i < n_levels; ++i) {
        row[7 + i] = record.probabilities[k * n_levels + i];
      }
      csv::append_row(out, row);
    }
  }
  return out;
}

VerificationContext make_context(const Prepared& prep, const EnsembleResult& result,
                                 const RunConfig& config) {
  VerificationContext ctx;
  ctx.setup = &prep.setup;
  ctx.result = &result;
  ctx.output_times = prep.output_times;
  ctx.initial_energy = prep.moments.energy_mean;
  ctx.initial_variance = prep.moments.energy_variance;
  ctx.initial_entropy = prep.moments.shannon_entropy;
  ctx.pi0 = prep.dec.probabilities;

  auto column_of = [&](std::size_t grid_index) {
    const auto& idx = prep.setup.output_indices;
    const auto it = std::find(idx.begin(), idx.end(), grid_index);
    if (it == idx.end()) {
      throw std::logic_error("verification probe missing from the output set");
    }
    return static_cast<std::size_t>(it - idx.begin());
  };
  const auto& probes = prep.probe_indices;
  ctx.probe_low = column_of(probes.front());
  ctx.probe_mid = column_of(probes[probes.size() / 2]);
  ctx.probe_high = column_of(probes.back());
  ctx.mgf_probe = column_of(prep.mgf_probe_index);

  const double sigma = model_sigma(config.model);
  // Finite time collapses exactly at T; a zero-variance start is already
  // collapsed; otherwise t_end must cover enough reduction timescales.
  ctx.collapse_complete =
      model_horizon(config.model).has_value() ||
      prep.moments.energy_variance == 0.0 ||
      sigma * sigma * prep.moments.energy_variance * prep.grid.t_end() >=
          kCollapseCompleteness;
  return ctx;
}

}  // namespace

RunOutput run_simulate(const RunConfig& config) {
  Prepared prep = prepare(config, false);
  bind_setup(prep);
  RunOutput out;
  if (config.want_summary) {
    const EnsembleResult result =
        run_closedform_ensemble(prep.setup, config.n_paths, config.threads);
    out.artifacts.push_back({"summary.json", summary_json(config, prep, result).dump(2) + "\n"});
  }
  if (config.want_trajectories) {
    out.artifacts.push_back({"trajectories.csv", trajectories_csv(config, prep)});
  }
  return out;
}

RunOutput run_verify(const RunConfig& config) {
  Prepared prep = prepare(config, true);
  bind_setup(prep);
  const EnsembleResult result =
      run_closedform_ensemble(prep.setup, config.n_paths, config.threads);
  const VerificationContext ctx = make_context(prep, result, config);

  Report report;
  check_energy_martingale(report, ctx);
  check_martingale_negative_control(report, ctx);
  check_variance_potential(report, ctx);
  check_entropy_monotone(report, ctx);
  check_born_rule(report, ctx);
  check_entropy_identity(report, ctx);
  check_innovation(report, ctx);
  check_independence(report, ctx);
  check_observable(report, ctx);
  check_exact_collapse(report, ctx);
  check_density_matrices(report, ctx);
  if (!model_horizon(config.model)) {
    // The ancillary equation and the change-of-measure density apply to the
    // constant-coupling model.
    check_ancillary_identity(report, config.model, prep.spectrum, prep.dec,
                             prep.setup.seeds, prep.grid.t_end());
    check_normalization_identity(report, config.model, prep.spectrum, prep.dec,
                                 prep.setup.seeds, prep.grid);
  }

  RunOutput out;
  out.passed = report.passed();
  json doc;
  doc["meta"] = meta_json(config, prep);
  doc["passed"] = out.passed;
  doc["tests"] = results_json(report);
  out.artifacts.push_back({"report.json", doc.dump(2) + "\n"});
  out.artifacts.push_back({"report.txt", report_text(report)});
  if (config.want_summary) {
    out.artifacts.push_back({"summary.json", summary_json(config, prep, result).dump(2) + "\n"});
  }
  return out;
}

RunOutput run_convergence(const RunConfig& config) {
  Prepared prep = prepare(config, false);
  bind_setup(prep);
  const ConvergenceReport study = run_convergence_study(
      config.model, prep.grid.t_end(), prep.spectrum, prep.dec, prep.setup.seeds,
      config.convergence_steps, config.convergence_paths);

  std::string table = "dt,rms_error,empirical_order\n";
  for (const ConvergenceRow& row : study.rows) {
    std::vector<double> cells{row.dt, row.rms_error, row.order};
    csv::append_row(table, cells);
  }

  Report report;
  report.add({.name = "convergence_terminal_error",
              .pass = study.rows.back().rms_error <= 0.05,
              .statistic = study.rows.back().rms_error,
              .threshold = 0.05,
              .detail = "RMS terminal-state error at the finest dt"});
  double worst_order = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < study.rows.size(); ++i) {
    worst_order = std::min(worst_order, study.rows[i].order);
  }
  report.add({.name = "convergence_order",
              .pass = worst_order >= 0.339,
              .statistic = worst_order,
              .threshold = 0.339,
              .detail = "min empirical order between adjacent rungs (strong order ~1/2)"});

  RunOutput out;
  out.passed = report.passed();
  json doc;
  doc["meta"] = meta_json(config, prep);
  doc["passed"] = out.passed;
  doc["tests"] = results_json(report);
  json rows = json::array();
  for (const ConvergenceRow& row : study.rows) {
    rows.push_back({{"steps", row.steps},
                    {"dt", row.dt},
                    {"rms_error", row.rms_error},
                    {"order", std::isnan(row.order) ? json() : json(row.order)}});
  }
  doc["rows"] = rows;
  out.artifacts.push_back({"report.json", doc.dump(2) + "\n"});
  out.artifacts.push_back({"convergence.csv", table});
  out.artifacts.push_back({"report.txt", report_text(report)});
  return out;
}

RunOutput run_timechange(const RunConfig& config) {
  const auto horizon = model_horizon(config.model);
  if (!horizon) {
    throw ConfigError("model", "timechange requires the finite_time model");
  }
  Prepared prep = prepare(config, false);
  bind_setup(prep);
  const TimechangeReport study = run_timechange_study(
      model_sigma(config.model), *horizon, prep.spectrum, prep.dec, prep.setup.seeds,
      config.timechange_steps, config.timechange_paths);

  Report report;
  report.add({.name = "timechange_monotone",
              .pass = study.monotone,
              .statistic = study.monotone ? 1.0 : 0.0,
              .threshold = 1.0,
              .detail = "max discrepancy decreases across the refinement ladder"});
  report.add({.name = "timechange_final_discrepancy",
              .pass = study.levels.back().max_discrepancy <= study.threshold,
              .statistic = study.levels.back().max_discrepancy,
              .threshold = study.threshold,
              .detail = "max |H_asym(tau(t)) - H_finite(t)| at the finest grid"});

  RunOutput out;
  out.passed = report.passed();
  json doc;
  doc["meta"] = meta_json(config, prep);
  doc["passed"] = out.passed;
  doc["tests"] = results_json(report);
  json levels = json::array();
  for (const TimechangeLevel& level : study.levels) {
    levels.push_back({{"steps", level.steps}, {"max_discrepancy", level.max_discrepancy}});
  }
  doc["levels"] = levels;
  out.artifacts.push_back({"report.json", doc.dump(2) + "\n"});
  out.artifacts.push_back({"report.txt", report_text(report)});
  return out;
}

}  // namespace qsr
