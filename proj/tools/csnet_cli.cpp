#include <CLI11.hpp>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "csnet.h"

namespace {

struct ConfigHandle {
  csnet_config* c = csnet_config_create();
  ~ConfigHandle() { csnet_config_free(c); }
};

int fail_with(int rc) {
  std::fprintf(stderr, "error: %s\n", csnet_last_error());
  return rc;
}

bool split_kv(const std::string& s, std::string& key, std::string& value) {
  std::size_t eq = s.find('=');
  if (eq == std::string::npos || eq == 0) return false;
  key = s.substr(0, eq);
  value = s.substr(eq + 1);
  return true;
}

int apply_sets(csnet_config* c, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    std::string k, v;
    if (!split_kv(s, k, v)) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", s.c_str());
      return CSNET_ERR_CONFIG;
    }
    if (int rc = csnet_config_set(c, k.c_str(), v.c_str()); rc != CSNET_OK) return fail_with(rc);
  }
  return CSNET_OK;
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& sets) {
  ConfigHandle h;
  if (int rc = csnet_config_load(h.c, config_path.c_str()); rc != CSNET_OK) return fail_with(rc);
  if (int rc = apply_sets(h.c, sets); rc != CSNET_OK) return rc;
  if (int rc = csnet_run(h.c); rc != CSNET_OK) return fail_with(rc);
  char out_dir[1024] = {0};
  csnet_config_get(h.c, "out_dir", out_dir, sizeof out_dir);
  std::printf("run complete: %s\n", out_dir);
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& vary,
              const std::vector<std::string>& sets) {
  // expand the cross product of every --vary key=v1,v2,...
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  for (const auto& spec : vary) {
    std::string k, vs;
    if (!split_kv(spec, k, vs)) {
      std::fprintf(stderr, "error: --vary expects key=v1,v2,..., got '%s'\n", spec.c_str());
      return CSNET_ERR_CONFIG;
    }
    std::vector<std::string> vals;
    std::size_t pos = 0;
    while (pos <= vs.size()) {
      std::size_t comma = vs.find(',', pos);
      if (comma == std::string::npos) comma = vs.size();
      if (comma > pos) vals.push_back(vs.substr(pos, comma - pos));
      pos = comma + 1;
    }
    if (vals.empty()) {
      std::fprintf(stderr, "error: --vary '%s' lists no values\n", spec.c_str());
      return CSNET_ERR_CONFIG;
    }
    axes.emplace_back(k, vals);
  }

  std::vector<std::vector<std::size_t>> combos{{}};
  for (const auto& [k, vals] : axes) {
    std::vector<std::vector<std::size_t>> next;
    for (const auto& combo : combos)
      for (std::size_t i = 0; i < vals.size(); ++i) {
        auto c = combo;
        c.push_back(i);
        next.push_back(std::move(c));
      }
    combos = std::move(next);
  }

  for (const auto& combo : combos) {
    ConfigHandle h;
    if (int rc = csnet_config_load(h.c, config_path.c_str()); rc != CSNET_OK) return fail_with(rc);
    if (int rc = apply_sets(h.c, sets); rc != CSNET_OK) return rc;
    char base[1024] = {0};
    csnet_config_get(h.c, "out_dir", base, sizeof base);
    std::string out_dir = base;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const auto& [k, vals] = axes[a];
      if (int rc = csnet_config_set(h.c, k.c_str(), vals[combo[a]].c_str()); rc != CSNET_OK)
        return fail_with(rc);
      out_dir += "/" + k + "-" + vals[combo[a]];
    }
    if (int rc = csnet_config_set(h.c, "out_dir", out_dir.c_str()); rc != CSNET_OK)
      return fail_with(rc);
    if (int rc = csnet_run(h.c); rc != CSNET_OK) return fail_with(rc);
    std::printf("run complete: %s\n", out_dir.c_str());
  }
  return 0;
}

int cmd_report(const std::vector<std::string>& dirs) {
  std::vector<const char*> ptrs;
  for (const auto& d : dirs) ptrs.push_back(d.c_str());
  std::string buf(1 << 16, '\0');
  int rc = csnet_report(ptrs.data(), ptrs.size(), buf.data(), buf.size());
  if (rc != CSNET_OK) return fail_with(rc);
  std::printf("%s", buf.c_str());
  return 0;
}

int cmd_selftest() {
  std::string buf(1 << 16, '\0');
  int rc = csnet_selftest(buf.data(), buf.size());
  std::printf("%s", buf.c_str());
  if (rc != CSNET_OK) return fail_with(rc);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("csnet ") + csnet_version() +
               " - C*-algebra network experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets, vary, dirs;

  auto* run = app.add_subcommand("run", "run one experiment from a config file");
  run->add_option("config", config_path, "key=value config file")->required();
  run->add_option("--set", sets, "override a config key (key=value), repeatable");

  auto* sweep = app.add_subcommand("sweep", "run a config over value grids");
  sweep->add_option("config", config_path, "key=value config file")->required();
  sweep->add_option("--vary", vary, "grid axis key=v1,v2,..., repeatable")->required();
  sweep->add_option("--set", sets, "override a config key (key=value), repeatable");

  auto* report = app.add_subcommand("report", "compare finished run directories");
  report->add_option("dirs", dirs, "two or more run directories")->required();

  app.add_subcommand("selftest", "run the built-in property checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return CSNET_ERR_CONFIG;
  }

  if (run->parsed()) return cmd_run(config_path, sets);
  if (sweep->parsed()) return cmd_sweep(config_path, vary, sets);
  if (report->parsed()) return cmd_report(dirs);
  return cmd_selftest();
}
