#include "qsr/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace qsr {

using nlohmann::json;

namespace {

json require(const json& j, const char* key, const char* section) {
  if (!j.contains(key)) {
    throw ConfigError(std::string(section ? section : "") + key, "missing required field");
  }
  return j.at(key);
}

double positive_real(const json& v, const std::string& field) {
  if (!v.is_number()) throw ConfigError(field, "expected a number");
  const double x = v.get<double>();
  if (!(x > 0.0)) throw ConfigError(field, "must be > 0");
  return x;
}

std::vector<std::size_t> steps_ladder(const json& v, const std::string& field) {
  if (!v.is_array() || v.empty()) throw ConfigError(field, "expected a non-empty array");
  std::vector<std::size_t> out;
  for (const auto& e : v) {
    if (!e.is_number_unsigned()) throw ConfigError(field, "expected positive integers");
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("document", std::string("JSON parse error: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("document", "top level must be an object");

  RunConfig cfg;

  const std::string model = require(j, "model", nullptr).get<std::string>();
  const double sigma = positive_real(require(j, "sigma", nullptr), "sigma");
  if (model == "asymptotic") {
    if (j.contains("T")) throw ConfigError("T", "not allowed for the asymptotic model");
    cfg.t_end = positive_real(require(j, "t_end", nullptr), "t_end");
    cfg.model = make_asymptotic(sigma);
  } else if (model == "finite_time") {
    if (j.contains("t_end")) throw ConfigError("t_end", "not allowed for the finite_time model");
    cfg.t_end = positive_real(require(j, "T", nullptr), "T");
    cfg.model = make_finite_time(sigma, cfg.t_end);
  } else {
    throw ConfigError("model", "expected \"asymptotic\" or \"finite_time\"");
  }

  {
    const json v = require(j, "steps", nullptr);
    if (!v.is_number_unsigned()) throw ConfigError("steps", "expected a positive integer");
    cfg.steps = v.get<std::size_t>();
    if (cfg.steps < 2) throw ConfigError("steps", "must be >= 2");
  }
  {
    const json v = require(j, "n_paths", nullptr);
    if (!v.is_number_unsigned()) throw ConfigError("n_paths", "expected a positive integer");
    cfg.n_paths = v.get<std::uint64_t>();
    if (cfg.n_paths < 1) throw ConfigError("n_paths", "must be >= 1");
  }
  {
    const json v = require(j, "master_seed", nullptr);
    if (!v.is_number_unsigned()) throw ConfigError("master_seed", "expected an unsigned integer");
    cfg.master_seed = v.get<std::uint64_t>();
  }
  if (j.contains("threads")) {
    const json v = j.at("threads");
    if (!v.is_number_unsigned()) throw ConfigError("threads", "expected an unsigned integer");
    cfg.threads = v.get<unsigned>();
  }

  {
    const json spectrum = require(j, "spectrum", nullptr);
    const json levels = require(spectrum, "levels", "spectrum.");
    if (!levels.is_array() || levels.empty()) {
      throw ConfigError("spectrum.levels", "expected a non-empty array");
    }
    for (std::size_t i = 0; i < levels.size(); ++i) {
      const std::string field = "spectrum.levels[" + std::to_string(i) + "]";
      const json& entry = levels.at(i);
      if (!entry.is_object()) throw ConfigError(field, "expected an object");
      Level level;
      if (!entry.contains("energy") || !entry.at("energy").is_number()) {
        throw ConfigError(field + ".energy", "expected a number");
      }
      level.energy = entry.at("energy").get<double>();
      level.multiplicity = 1;
      if (entry.contains("multiplicity")) {
        if (!entry.at("multiplicity").is_number_unsigned()) {
          throw ConfigError(field + ".multiplicity", "expected a positive integer");
        }
        level.multiplicity = entry.at("multiplicity").get<std::size_t>();
      }
      cfg.levels.push_back(level);
    }
  }

  {
    const json psi0 = require(j, "psi0", nullptr);
    if (!psi0.is_array() || psi0.empty()) throw ConfigError("psi0", "expected a non-empty array");
    for (std::size_t i = 0; i < psi0.size(); ++i) {
      const std::string field = "psi0[" + std::to_string(i) + "]";
      const json& entry = psi0.at(i);
      if (!entry.is_array() || entry.size() != 2 || !entry.at(0).is_number() ||
          !entry.at(1).is_number()) {
        throw ConfigError(field, "expected an [re, im] pair");
      }
      cfg.psi0.emplace_back(entry.at(0).get<double>(), entry.at(1).get<double>());
    }
  }

  if (j.contains("observable")) {
    const json v = j.at("observable");
    if (!v.is_array()) throw ConfigError("observable", "expected an array of reals");
    std::vector<double> diag;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError("observable", "expected an array of reals");
      diag.push_back(e.get<double>());
    }
    if (diag.size() != cfg.psi0.size()) {
      throw ConfigError("observable", "length must equal the state dimension");
    }
    cfg.observable = std::move(diag);
  }

  if (j.contains("outputs")) {
    const json v = j.at("outputs");
    if (!v.is_array()) throw ConfigError("outputs", "expected an array of strings");
    cfg.want_summary = false;
    cfg.want_trajectories = false;
    for (const auto& e : v) {
      const std::string name = e.get<std::string>();
      if (name == "summary") cfg.want_summary = true;
      else if (name == "trajectories") cfg.want_trajectories = true;
      else if (name == "verify") continue;  // implied by the verify subcommand
      else throw ConfigError("outputs", "unknown output kind: " + name);
    }
  }

  if (j.contains("output_times")) {
    const json v = j.at("output_times");
    if (!v.is_array() || v.empty()) throw ConfigError("output_times", "expected a non-empty array");
    std::vector<double> times;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError("output_times", "expected an array of reals");
      times.push_back(e.get<double>());
    }
    cfg.output_times = std::move(times);
  }

  if (j.contains("trajectory_paths")) {
    const json v = j.at("trajectory_paths");
    if (!v.is_array()) throw ConfigError("trajectory_paths", "expected an array of path indices");
    for (const auto& e : v) {
      if (!e.is_number_unsigned()) throw ConfigError("trajectory_paths", "expected unsigned indices");
      cfg.trajectory_paths.push_back(e.get<std::uint64_t>());
    }
  }

  if (j.contains("convergence")) {
    const json v = j.at("convergence");
    if (v.contains("steps")) cfg.convergence_steps = steps_ladder(v.at("steps"), "convergence.steps");
    if (v.contains("paths")) {
      if (!v.at("paths").is_number_unsigned()) throw ConfigError("convergence.paths", "expected a positive integer");
      cfg.convergence_paths = v.at("paths").get<std::uint64_t>();
    }
  }
  if (j.contains("timechange")) {
    const json v = j.at("timechange");
    if (v.contains("steps")) cfg.timechange_steps = steps_ladder(v.at("steps"), "timechange.steps");
    if (v.contains("paths")) {
      if (!v.at("paths").is_number_unsigned()) throw ConfigError("timechange.paths", "expected a positive integer");
      cfg.timechange_paths = v.at("paths").get<std::uint64_t>();
    }
  }

  // Construction validates the physics inputs (ordering, normalization).
  const Spectrum spectrum(cfg.levels);
  if (cfg.psi0.size() != spectrum.dimension()) {
    throw ConfigError("psi0", "length " + std::to_string(cfg.psi0.size()) +
                                  " does not match spectrum dimension " +
                                  std::to_string(spectrum.dimension()));
  }
  try {
    InitialState state(cfg.psi0);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("psi0", e.what());
  }

  if (cfg.trajectory_paths.empty()) {
    const std::uint64_t count = std::min<std::uint64_t>(cfg.n_paths, 4);
    for (std::uint64_t p = 0; p < count; ++p) cfg.trajectory_paths.push_back(p);
  }
  for (std::uint64_t p : cfg.trajectory_paths) {
    if (p >= cfg.n_paths) throw ConfigError("trajectory_paths", "index beyond n_paths");
  }

  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("file", "cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str());
}

std::string RunConfig::canonical_text() const {
  json j;
  j["model"] = model_horizon(model) ? "finite_time" : "asymptotic";
  j["sigma"] = model_sigma(model);
  if (model_horizon(model)) j["T"] = t_end; else j["t_end"] = t_end;
  j["steps"] = steps;
  j["n_paths"] = n_paths;
  j["master_seed"] = master_seed;
  json levels_json = json::array();
  for (const Level& level : levels) {
    levels_json.push_back({{"energy", level.energy}, {"multiplicity", level.multiplicity}});
  }
  j["spectrum"] = {{"levels", levels_json}};
  json psi0_json = json::array();
  for (const Amplitude& a : psi0) psi0_json.push_back({a.real(), a.imag()});
  j["psi0"] = psi0_json;
  if (observable) j["observable"] = *observable;
  if (output_times) j["output_times"] = *output_times;
  j["trajectory_paths"] = trajectory_paths;
  j["outputs"] = json::array();
  if (want_summary) j["outputs"].push_back("summary");
  if (want_trajectories) j["outputs"].push_back("trajectories");
  j["convergence"] = {{"steps", convergence_steps}, {"paths", convergence_paths}};
  j["timechange"] = {{"steps", timechange_steps}, {"paths", timechange_paths}};
  return j.dump();
}

std::string RunConfig::config_hash() const {
  const std::string text = canonical_text();
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  char buffer[19];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(hash));
  return buffer;
}

}  // namespace qsr
