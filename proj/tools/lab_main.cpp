// Command-line front end over the C API: loads a JSON config, applies flag overrides, runs the
// scenario and prints the summary JSON on stdout. Exit codes: 0 ok, 1 numerical failure or
// divergence, 2 configuration error, 3 I/O error.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "lab/lab_c.h"

namespace {

int report(int code) {
  std::cerr << "lab: " << lab_last_error() << '\n';
  return code;
}

bool read_file(const std::string& path, std::string& text) {
  std::ifstream f(path);
  if (!f) return false;
  std::ostringstream ss;
  ss << f.rdbuf();
  text = ss.str();
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lab: run a scenario and print its summary"};
  std::string config_path, scenario, out;
  long long seed = -1;
  bool allow_infeasible = false, print_config = false;
  std::vector<std::string> sets;
  app.add_option("-c,--config", config_path, "JSON configuration file");
  app.add_option("-s,--scenario", scenario,
                 "profiles | corrections | reduced | inner | outer | stokes | simulate | glue");
  app.add_option("-o,--out", out, "output directory");
  app.add_option("--seed", seed, "random seed")->check(CLI::NonNegativeNumber);
  app.add_flag("--allow-infeasible", allow_infeasible, "run with exponents that violate the constraints");
  app.add_option("--set", sets, "override a config value, key=value with a dotted key")->take_all();
  app.add_flag("--print-config", print_config, "print the resolved configuration and exit");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return LAB_ERR_CONFIG;
  }

  lab_config* cfg = nullptr;
  if (!config_path.empty()) {
    std::string text;
    if (!read_file(config_path, text)) {
      std::cerr << "lab: cannot read " << config_path << '\n';
      return LAB_ERR_IO;
    }
    if (int rc = lab_config_load(&cfg, text.c_str())) return report(rc);
  } else if (int rc = lab_config_new(&cfg)) {
    return report(rc);
  }

  auto set = [&](const std::string& key, const std::string& value) {
    return lab_config_set(cfg, key.c_str(), value.c_str());
  };
  int rc = LAB_OK;
  if (const char* th = std::getenv("LAB_THREADS"); th && *th) rc = set("threads", th);
  if (!rc && !scenario.empty()) rc = set("scenario", nlohmann::json(scenario).dump());
  if (!rc && !out.empty()) rc = set("out", nlohmann::json(out).dump());
  if (!rc && seed >= 0) rc = set("seed", std::to_string(seed));
  if (!rc && allow_infeasible) rc = set("allow_infeasible", "true");
  for (const auto& s : sets) {
    if (rc) break;
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::cerr << "lab: --set expects key=value, got '" << s << "'\n";
      lab_config_free(cfg);
      return LAB_ERR_CONFIG;
    }
    rc = set(s.substr(0, eq), s.substr(eq + 1));
  }
  if (rc) {
    lab_config_free(cfg);
    return report(rc);
  }

  char* text = nullptr;
  if (print_config) {
    rc = lab_config_dump(cfg, &text);
    lab_config_free(cfg);
    if (rc) return report(rc);
    std::cout << text << '\n';
    lab_string_free(text);
    return 0;
  }

  lab_result* res = nullptr;
  rc = lab_run(cfg, &res);
  lab_config_free(cfg);
  if (rc) return report(rc);
  rc = lab_result_summary(res, &text);
  const int ok = lab_result_ok(res);
  lab_result_free(res);
  if (rc) return report(rc);
  std::cout << text << '\n';
  lab_string_free(text);
  return ok ? 0 : LAB_ERR_NUMERICAL;
}
