#include "csnet.h"

#include <cstring>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "experiment.hpp"

struct csnet_config {
  csnet::ExperimentConfig cfg;
};

namespace {

thread_local std::string g_last_error;

void copy_out(const std::string& s, char* out, size_t out_len) {
  if (!out || out_len == 0) return;
  size_t n = std::min(s.size(), out_len - 1);
  std::memcpy(out, s.data(), n);
  out[n] = '\0';
}

template <typename F>
int guarded(F&& f) {
  try {
    f();
    return CSNET_OK;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return CSNET_ERR_CONFIG;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CSNET_ERR_RUNTIME;
  }
}

}  // namespace

extern "C" {

const char* csnet_version(void) { return csnet::kVersion; }

const char* csnet_last_error(void) { return g_last_error.c_str(); }

csnet_config* csnet_config_create(void) { return new (std::nothrow) csnet_config; }

void csnet_config_free(csnet_config* cfg) { delete cfg; }

int csnet_config_load(csnet_config* cfg, const char* path) {
  if (!cfg || !path) {
    g_last_error = "null argument";
    return CSNET_ERR_CONFIG;
  }
  return guarded([&] {
    // parse fully before assigning so a bad file leaves cfg untouched
    csnet::ExperimentConfig parsed = csnet::parse_config_file(path);
    cfg->cfg = parsed;
  });
}

int csnet_config_set(csnet_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) {
    g_last_error = "null argument";
    return CSNET_ERR_CONFIG;
  }
  return guarded([&] { csnet::apply_config_entry(cfg->cfg, key, value); });
}

int csnet_config_get(const csnet_config* cfg, const char* key, char* out, size_t out_len) {
  if (!cfg || !key) {
    g_last_error = "null argument";
    return CSNET_ERR_CONFIG;
  }
  return guarded([&] {
    std::string canon = csnet::config_canonical(cfg->cfg);
    std::istringstream in(canon);
    std::string line;
    std::string prefix = std::string(key) + "=";
    while (std::getline(in, line)) {
      if (line.rfind(prefix, 0) == 0) {
        copy_out(line.substr(prefix.size()), out, out_len);
        return;
      }
    }
    throw std::invalid_argument("unknown config key '" + std::string(key) + "'");
  });
}

int csnet_run(const csnet_config* cfg) {
  if (!cfg) {
    g_last_error = "null argument";
    return CSNET_ERR_CONFIG;
  }
  return guarded([&] { csnet::run_experiment(cfg->cfg); });
}

int csnet_report(const char* const* run_dirs, size_t n_dirs, char* out, size_t out_len) {
  if (!run_dirs) {
    g_last_error = "null argument";
    return CSNET_ERR_CONFIG;
  }
  return guarded([&] {
    std::vector<std::string> dirs(run_dirs, run_dirs + n_dirs);
    copy_out(csnet::compare_report(dirs), out, out_len);
  });
}

int csnet_selftest(char* out, size_t out_len) {
  std::vector<std::string> lines;
  int failures = 0;
  int rc = guarded([&] { failures = csnet::selftest(lines); });
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  copy_out(text, out, out_len);
  if (rc != CSNET_OK) return rc;
  if (failures > 0) {
    g_last_error = std::to_string(failures) + " self-test check(s) failed";
    return CSNET_ERR_RUNTIME;
  }
  return CSNET_OK;
}

}  // extern "C"
