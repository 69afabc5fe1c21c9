// qsr command-line experiment runner. All work happens behind the shared
// library's C API; this binary parses flags, forwards overrides, and writes
// the returned artifacts to disk.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include <qsr/qsr.h>

namespace {

struct CommonOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::uint64_t paths = 0;
  bool paths_set = false;
  std::uint32_t threads = 0;
  bool threads_set = false;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "experiment config file (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", opts.out_dir, "output directory (default: .)");
  cmd->add_option("--seed", opts.seed, "override master_seed")
      ->trigger_on_parse()
      ->each([&](const std::string&) { opts.seed_set = true; });
  cmd->add_option("--paths", opts.paths, "override n_paths")
      ->trigger_on_parse()
      ->each([&](const std::string&) { opts.paths_set = true; });
  cmd->add_option("--threads", opts.threads,
                  "worker threads (affects speed only, never results)")
      ->trigger_on_parse()
      ->each([&](const std::string&) { opts.threads_set = true; });
}

int fail(const char* stage, qsr_status status) {
  std::cerr << "qsr: " << stage << " failed (" << qsr_status_name(status)
            << "): " << qsr_last_error() << "\n";
  return 2;
}

using run_fn = qsr_status (*)(const qsr_config*, qsr_result**);

int run_command(run_fn runner, const CommonOptions& opts, bool print_report) {
  qsr_config* config = nullptr;
  qsr_status status = qsr_config_from_file(opts.config_path.c_str(), &config);
  if (status != QSR_OK) return fail("config", status);
  std::unique_ptr<qsr_config, decltype(&qsr_config_free)> config_guard(config,
                                                                       &qsr_config_free);
  if (opts.seed_set) qsr_config_set_seed(config, opts.seed);
  if (opts.paths_set && qsr_config_set_paths(config, opts.paths) != QSR_OK) {
    return fail("--paths", QSR_ERROR_INVALID_ARGUMENT);
  }
  if (opts.threads_set) qsr_config_set_threads(config, opts.threads);

  qsr_result* result = nullptr;
  status = runner(config, &result);
  if (status != QSR_OK) return fail("run", status);
  std::unique_ptr<qsr_result, decltype(&qsr_result_free)> result_guard(result,
                                                                       &qsr_result_free);

  std::filesystem::create_directories(opts.out_dir);
  const std::size_t count = qsr_result_artifact_count(result);
  for (std::size_t i = 0; i < count; ++i) {
    const char* name = qsr_result_artifact_name(result, i);
    std::size_t size = 0;
    const char* data = qsr_result_artifact_data(result, i, &size);
    const std::filesystem::path path = std::filesystem::path(opts.out_dir) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) {
      std::cerr << "qsr: cannot write " << path << "\n";
      return 2;
    }
    out.write(data, static_cast<std::streamsize>(size));
    if (print_report && std::string(name) == "report.txt") {
      std::cout << std::string(data, size);
    }
  }

  const bool passed = qsr_result_passed(result) == 1;
  if (print_report) {
    std::cout << (passed ? "RESULT: pass" : "RESULT: FAIL") << "\n";
  }
  return passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo simulation and verification of energy-based "
               "stochastic state reduction"};
  app.require_subcommand(1);

  CommonOptions simulate_opts, verify_opts, convergence_opts, timechange_opts;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "run the ensemble; write summary.json (and trajectories.csv)");
  add_common(simulate, simulate_opts);
  CLI::App* verify = app.add_subcommand(
      "verify", "run the statistical verification suite; nonzero exit on failure");
  add_common(verify, verify_opts);
  CLI::App* convergence = app.add_subcommand(
      "convergence", "Euler-vs-closed-form strong-error ladder");
  add_common(convergence, convergence_opts);
  CLI::App* timechange = app.add_subcommand(
      "timechange", "time-change equivalence study (finite-time configs)");
  add_common(timechange, timechange_opts);

  CLI11_PARSE(app, argc, argv);

  if (simulate->parsed()) return run_command(&qsr_run_simulate, simulate_opts, false);
  if (verify->parsed()) return run_command(&qsr_run_verify, verify_opts, true);
  if (convergence->parsed()) return run_command(&qsr_run_convergence, convergence_opts, true);
  return run_command(&qsr_run_timechange, timechange_opts, true);
}
