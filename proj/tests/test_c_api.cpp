#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <json.hpp>
#include <string>

#include "lab/lab_c.h"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string take(char* s) {
  std::string r = s ? s : "";
  lab_string_free(s);
  return r;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("lab_capi_" + name);
  fs::remove_all(p);
  return p;
}

// runs the CLI, returns its exit status and stdout
int cli(const std::string& args, std::string* out = nullptr) {
  const auto so = fs::temp_directory_path() / "lab_cli_stdout.txt";
  const std::string cmd = std::string(LAB_CLI_PATH) + " " + args + " > " + so.string() + " 2>/dev/null";
  const int st = std::system(cmd.c_str());
  if (out) {
    FILE* f = std::fopen(so.string().c_str(), "r");
    out->clear();
    for (int c; f && (c = std::fgetc(f)) != EOF;) out->push_back(char(c));
    if (f) std::fclose(f);
  }
  return WEXITSTATUS(st);
}

}  // namespace

TEST_CASE("config lifecycle and errors") {
  CHECK(std::string(lab_version()) == "1");
  lab_config* c = nullptr;
  REQUIRE(lab_config_new(&c) == LAB_OK);
  CHECK(lab_config_set(c, "simulate.n", "64") == LAB_OK);
  CHECK(lab_config_set(c, "simulate.nn", "64") == LAB_ERR_CONFIG);
  CHECK(std::string(lab_last_error()).find("simulate.nn") != std::string::npos);
  // a rejected set leaves the config untouched
  char* text = nullptr;
  REQUIRE(lab_config_dump(c, &text) == LAB_OK);
  CHECK(std::string(lab_last_error()).empty());
  const json d = json::parse(take(text));
  CHECK(d["simulate"]["n"] == 64);
  CHECK(!d["simulate"].contains("nn"));
  CHECK(lab_config_set(nullptr, "a", "1") == LAB_ERR_ARGUMENT);
  CHECK(lab_config_dump(c, nullptr) == LAB_ERR_ARGUMENT);
  lab_config_free(c);

  lab_config* bad = nullptr;
  CHECK(lab_config_load(&bad, "{not json") == LAB_ERR_CONFIG);
  CHECK(lab_config_load(&bad, R"({"outer": {"n": "x"}})") == LAB_ERR_CONFIG);
  CHECK(bad == nullptr);
  REQUIRE(lab_config_load(&bad, R"({"scenario": "reduced"})") == LAB_OK);
  lab_config_free(bad);
}

TEST_CASE("run through the C API") {
  const auto d = scratch("run");
  lab_config* c = nullptr;
  REQUIRE(lab_config_load(&c, json({{"scenario", "reduced"}, {"out", d.string()}}).dump().c_str()) == LAB_OK);
  lab_result* r = nullptr;
  REQUIRE(lab_run(c, &r) == LAB_OK);
  CHECK(lab_result_ok(r) == 1);
  char* s = nullptr;
  REQUIRE(lab_result_summary(r, &s) == LAB_OK);
  const json j = json::parse(take(s));
  CHECK(j["scenario"] == "reduced");
  CHECK(fs::exists(d / "summary.json"));
  lab_result_free(r);
  lab_config_free(c);
}

TEST_CASE("simulator handle") {
  lab_config* c = nullptr;
  REQUIRE(lab_config_new(&c) == LAB_OK);
  REQUIRE(lab_config_set(c, "simulate.n", "64") == LAB_OK);
  REQUIRE(lab_config_set(c, "simulate.T", "0.3") == LAB_OK);
  lab_sim* s = nullptr;
  REQUIRE(lab_sim_new(c, &s) == LAB_OK);
  double t = -1, e0 = 0, e1 = 0, lam = 0, x1 = 0, x2 = 0;
  CHECK(lab_sim_time(s, &t) == LAB_OK);
  CHECK(t == 0);
  CHECK(lab_sim_energy(s, &e0) == LAB_OK);
  CHECK(lab_sim_scale(s, &lam, &x1, &x2) == LAB_OK);
  CHECK(std::abs(x1 - 0.5) < 0.05);
  CHECK(lab_sim_advance(s, 1e-3) == LAB_OK);
  CHECK(lab_sim_advance(s, -1) == LAB_ERR_CONFIG);
  CHECK(lab_sim_time(s, &t) == LAB_OK);
  CHECK(t == doctest::Approx(1e-3));
  CHECK(lab_sim_energy(s, &e1) == LAB_OK);
  CHECK(e1 <= e0 * (1 + 1e-9));
  const auto p = scratch("ckpt");
  CHECK(lab_sim_save(s, p.string().c_str()) == LAB_OK);
  CHECK(lab_sim_advance(s, 1e-3) == LAB_OK);
  CHECK(lab_sim_load(s, p.string().c_str()) == LAB_OK);
  CHECK(lab_sim_time(s, &t) == LAB_OK);
  CHECK(t == doctest::Approx(1e-3));
  CHECK(lab_sim_load(s, "/nonexistent/ckpt") == LAB_ERR_IO);
  CHECK(lab_sim_time(nullptr, &t) == LAB_ERR_ARGUMENT);
  lab_sim_free(s);

  REQUIRE(lab_config_set(c, "simulate.n", "63") == LAB_OK);
  CHECK(lab_sim_new(c, &s) == LAB_ERR_CONFIG);
  lab_config_free(c);
}

TEST_CASE("command line") {
  std::string out;
  CHECK(cli("--print-config --set simulate.n=32", &out) == 0);
  CHECK(json::parse(out)["simulate"]["n"] == 32);
  CHECK(cli("--set simulate.bubbles[0].kapa=1") == 2);
  CHECK(cli("--set nokey") == 2);
  CHECK(cli("--config /nonexistent.json") == 3);
  CHECK(cli("--set exponents.gamma_star=0.4 --set exponents.nu3=0.99") == 2);
  CHECK(cli("--print-config --allow-infeasible --set exponents.gamma_star=0.4") == 0);

  // flags override the file
  const auto d = scratch("cli");
  fs::create_directories(d);
  const auto cfg = d / "c.json";
  {
    FILE* f = std::fopen(cfg.string().c_str(), "w");
    std::fputs(json({{"scenario", "profiles"}, {"seed", 5}}).dump().c_str(), f);
    std::fclose(f);
  }
  REQUIRE(cli("--config " + cfg.string() + " --scenario reduced --seed 7 --out " + (d / "o").string(), &out) == 0);
  const json s = json::parse(out);
  CHECK(s["scenario"] == "reduced");
  CHECK(s["config"]["seed"] == 7);
  CHECK(fs::exists(d / "o" / "lambda.csv"));
  std::string again;
  REQUIRE(cli("--config " + cfg.string() + " --scenario reduced --seed 7 --out " + (d / "o").string(), &again) == 0);
  CHECK(out == again);
}
