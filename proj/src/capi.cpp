#include "qsr/qsr.h"

#include <exception>
#include <string>

#include "qsr/config.hpp"
#include "qsr/runner.hpp"

struct qsr_config {
  qsr::RunConfig config;
};

struct qsr_result {
  qsr::RunOutput output;
};

namespace {

thread_local std::string last_error;

void set_error(const std::string& message) { last_error = message; }

template <typename F>
qsr_status guarded(F&& f) {
  try {
    f();
    return QSR_OK;
  } catch (const qsr::ConfigError& e) {
    set_error(e.what());
    return QSR_ERROR_PARSE;
  } catch (const std::invalid_argument& e) {
    set_error(e.what());
    return QSR_ERROR_PARSE;
  } catch (const std::exception& e) {
    set_error(e.what());
    return QSR_ERROR_INTERNAL;
  } catch (...) {
    set_error("unknown failure");
    return QSR_ERROR_INTERNAL;
  }
}

using Runner = qsr::RunOutput (*)(const qsr::RunConfig&);

qsr_status run_with(Runner runner, const qsr_config* config, qsr_result** out_result) {
  if (config == nullptr || out_result == nullptr) {
    set_error("null handle");
    return QSR_ERROR_INVALID_ARGUMENT;
  }
  *out_result = nullptr;
  return guarded([&] {
    auto result = new qsr_result{runner(config->config)};
    *out_result = result;
  });
}

}  // namespace

extern "C" {

const char* qsr_version(void) { return "1.0.0"; }

const char* qsr_status_name(qsr_status status) {
  switch (status) {
    case QSR_OK: return "ok";
    case QSR_ERROR_INVALID_ARGUMENT: return "invalid argument";
    case QSR_ERROR_PARSE: return "parse error";
    case QSR_ERROR_INTERNAL: return "internal error";
  }
  return "unknown";
}

const char* qsr_last_error(void) { return last_error.c_str(); }

qsr_status qsr_config_from_file(const char* path, qsr_config** out_config) {
  if (path == nullptr || out_config == nullptr) {
    set_error("null argument");
    return QSR_ERROR_INVALID_ARGUMENT;
  }
  *out_config = nullptr;
  return guarded([&] {
    auto handle = new qsr_config{qsr::RunConfig::from_file(path)};
    *out_config = handle;
  });
}

qsr_status qsr_config_from_string(const char* text, qsr_config** out_config) {
  if (text == nullptr || out_config == nullptr) {
    set_error("null argument");
    return QSR_ERROR_INVALID_ARGUMENT;
  }
  *out_config = nullptr;
  return guarded([&] {
    auto handle = new qsr_config{qsr::RunConfig::from_json_text(text)};
    *out_config = handle;
  });
}

void qsr_config_free(qsr_config* config) { delete config; }

qsr_status qsr_config_set_seed(qsr_config* config, uint64_t seed) {
  if (config == nullptr) {
    set_error("null handle");
    return QSR_ERROR_INVALID_ARGUMENT;
  }
  config->config.master_seed = seed;
  return QSR_OK;
}

qsr_status qsr_config_set_paths(qsr_config* config, uint64_t n_paths) {
  if (config == nullptr || n_paths == 0) {
    set_error(config == nullptr ? "null handle" : "n_paths must be >= 1");
    return QSR_ERROR_INVALID_ARGUMENT;
  }
  config->config.n_paths = n_paths;
  // keep the default trajectory selection in range
  auto& selected = config->config.trajectory_paths;
  std::erase_if(selected, [&](uint64_t p) { return p >= n_paths; });
  if (selected.empty()) selected.push_back(0);
  return QSR_OK;
}

qsr_status qsr_config_set_threads(qsr_config* config, uint32_t threads) {
  if (config == nullptr) {
    set_error("null handle");
    return QSR_ERROR_INVALID_ARGUMENT;
  }
  config->config.threads = threads;
  return QSR_OK;
}

qsr_status qsr_run_simulate(const qsr_config* config, qsr_result** out_result) {
  return run_with(&qsr::run_simulate, config, out_result);
}

qsr_status qsr_run_verify(const qsr_config* config, qsr_result** out_result) {
  return run_with(&qsr::run_verify, config, out_result);
}

qsr_status qsr_run_convergence(const qsr_config* config, qsr_result** out_result) {
  return run_with(&qsr::run_convergence, config, out_result);
}

qsr_status qsr_run_timechange(const qsr_config* config, qsr_result** out_result) {
  return run_with(&qsr::run_timechange, config, out_result);
}

size_t qsr_result_artifact_count(const qsr_result* result) {
  return result == nullptr ? 0 : result->output.artifacts.size();
}

const char* qsr_result_artifact_name(const qsr_result* result, size_t index) {
  if (result == nullptr || index >= result->output.artifacts.size()) return nullptr;
  return result->output.artifacts[index].name.c_str();
}

const char* qsr_result_artifact_data(const qsr_result* result, size_t index,
                                     size_t* out_size) {
  if (result == nullptr || index >= result->output.artifacts.size()) {
    if (out_size != nullptr) *out_size = 0;
    return nullptr;
  }
  const std::string& bytes = result->output.artifacts[index].bytes;
  if (out_size != nullptr) *out_size = bytes.size();
  return bytes.c_str();
}

int qsr_result_passed(const qsr_result* result) {
  return result != nullptr && result->output.passed ? 1 : 0;
}

void qsr_result_free(qsr_result* result) { delete result; }

}  // extern "C"
