#include "lab/lab_c.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "lab/runner.hpp"
#include "lab/simulator.hpp"

using nlohmann::json;

struct lab_config {
  json user = json::object();
};

struct lab_result {
  json summary;
};

struct lab_sim {
  std::unique_ptr<lab::Simulator> sim;
  lab::SimState state;
  lab::Vec2 guess;
  double search_radius;
};

namespace {

thread_local std::string g_last_error;

int code_of(lab::ErrorKind k) { return lab::exit_code(k); }

template <class F>
int guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return LAB_OK;
  } catch (const lab::Error& e) {
    g_last_error = e.what();
    return code_of(e.kind());
  } catch (const json::exception& e) {
    g_last_error = std::string("config: ") + e.what();
    return LAB_ERR_CONFIG;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return LAB_ERR_NUMERICAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return LAB_ERR_NUMERICAL;
  }
}

int bad_argument(const char* what) {
  g_last_error = std::string("null argument: ") + what;
  return LAB_ERR_ARGUMENT;
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

}  // namespace

extern "C" {

const char* lab_version(void) { return lab::kSchemaVersion; }
const char* lab_last_error(void) { return g_last_error.c_str(); }
void lab_string_free(char* s) { std::free(s); }

int lab_config_new(lab_config** out) {
  if (!out) return bad_argument("out");
  return guarded([&] { *out = new lab_config; });
}

int lab_config_load(lab_config** out, const char* text) {
  if (!out || !text) return bad_argument("out/json_text");
  return guarded([&] {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      lab::fail(lab::ErrorKind::Config, std::string("config: invalid JSON: ") + e.what());
    }
    lab::parse_config(j);  // reject early
    auto* c = new lab_config;
    c->user = std::move(j);
    *out = c;
  });
}

int lab_config_set(lab_config* cfg, const char* path, const char* value) {
  if (!cfg || !path || !value) return bad_argument("cfg/path/value");
  return guarded([&] {
    json trial = cfg->user;
    lab::set_config_value(trial, path, value);
    lab::parse_config(trial);
    cfg->user = std::move(trial);
  });
}

int lab_config_dump(const lab_config* cfg, char** out) {
  if (!cfg || !out) return bad_argument("cfg/json_out");
  return guarded([&] { *out = dup(lab::parse_config(cfg->user).dump(2)); });
}

void lab_config_free(lab_config* cfg) { delete cfg; }

int lab_run(const lab_config* cfg, lab_result** out) {
  if (!cfg || !out) return bad_argument("cfg/out");
  return guarded([&] {
    auto* r = new lab_result;
    try {
      r->summary = lab::run_scenario(lab::parse_config(cfg->user));
    } catch (...) {
      delete r;
      throw;
    }
    *out = r;
  });
}

int lab_result_summary(const lab_result* r, char** out) {
  if (!r || !out) return bad_argument("result/json_out");
  return guarded([&] { *out = dup(r->summary.dump(2)); });
}

int lab_result_ok(const lab_result* r) { return r && r->summary.value("ok", false) ? 1 : 0; }

void lab_result_free(lab_result* r) { delete r; }

int lab_sim_new(const lab_config* cfg, lab_sim** out) {
  if (!cfg || !out) return bad_argument("cfg/out");
  return guarded([&] {
    const json c = lab::parse_config(cfg->user);
    auto sim = std::make_unique<lab::Simulator>(lab::simulation_config(c));
    auto st = sim->build_ansatz();
    const auto& b = sim->config().bubbles;
    const double L = sim->config().L;
    const lab::Vec2 g = b.empty() ? lab::Vec2(0.5 * L, 0.5 * L) : b.front().q;
    *out = new lab_sim{std::move(sim), std::move(st), g, lab::blowup_options(c).search_radius};
  });
}

int lab_sim_advance(lab_sim* s, double dt) {
  if (!s) return bad_argument("sim");
  return guarded([&] {
    lab::require(dt >= 0, lab::ErrorKind::Config, "advance: dt must be non-negative");
    s->sim->step(s->state, dt);
  });
}

int lab_sim_time(const lab_sim* s, double* t) {
  if (!s || !t) return bad_argument("sim/t");
  *t = s->state.t;
  g_last_error.clear();
  return LAB_OK;
}

int lab_sim_energy(const lab_sim* s, double* e) {
  if (!s || !e) return bad_argument("sim/e");
  return guarded([&] { *e = lab::grid_energy(s->sim->grid(), s->state.u); });
}

int lab_sim_scale(const lab_sim* s, double* lambda, double* xi1, double* xi2) {
  if (!s || !lambda || !xi1 || !xi2) return bad_argument("sim/lambda/xi");
  return guarded([&] {
    const auto est = lab::measure_scale(s->sim->grid(), s->state.u[2], s->guess, s->search_radius);
    lab::require(est.found, lab::ErrorKind::Numerical, "scale: no concentration found near the bubble");
    *lambda = est.lambda;
    *xi1 = est.xi[0];
    *xi2 = est.xi[1];
  });
}

int lab_sim_save(const lab_sim* s, const char* path) {
  if (!s || !path) return bad_argument("sim/path");
  return guarded([&] { lab::save_checkpoint(*s->sim, s->state, path); });
}

int lab_sim_load(lab_sim* s, const char* path) {
  if (!s || !path) return bad_argument("sim/path");
  return guarded([&] { s->state = lab::load_checkpoint(*s->sim, path); });
}

void lab_sim_free(lab_sim* s) { delete s; }

}  // extern "C"
