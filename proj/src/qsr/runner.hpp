#pragma once

#include <string>
#include <vector>

#include "qsr/config.hpp"

namespace qsr {

struct Artifact {
  std::string name;
  std::string bytes;
};

struct RunOutput {
  std::vector<Artifact> artifacts;
  bool passed = true;
};

// simulate: trajectory CSV (optional) + summary JSON.
RunOutput run_simulate(const RunConfig& config);
// verify: all diagnostics applicable to the config; report JSON + text.
RunOutput run_verify(const RunConfig& config);
// convergence: Euler-vs-closed-form strong error ladder; CSV + report.
RunOutput run_convergence(const RunConfig& config);
// timechange: Prop-15 equivalence ladder; report JSON + text.
RunOutput run_timechange(const RunConfig& config);

}  // namespace qsr
