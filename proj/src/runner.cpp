#include "lab/runner.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lab/corrections.hpp"
#include "lab/exponents.hpp"
#include "lab/glue.hpp"
#include "lab/inner.hpp"
#include "lab/outer.hpp"
#include "lab/profile.hpp"
#include "lab/quadrature.hpp"
#include "lab/reduced.hpp"
#include "lab/simulator.hpp"
#include "lab/stokes.hpp"
#include "lab/track.hpp"

namespace lab {

using json = nlohmann::json;
namespace fs = std::filesystem;

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config:
      return kExitConfig;
    case ErrorKind::Io:
      return kExitIo;
    default:
      return kExitNumerical;
  }
}

// ---- configuration -------------------------------------------------------------------

json default_config() {
  const ExponentSet e;
  json c;
  c["scenario"] = "profiles";
  c["seed"] = 1;
  c["out"] = "lab_out";
  c["allow_infeasible"] = false;
  c["threads"] = 0;
  c["exponents"] = {{"gamma_star", e.gamma_star}, {"Theta", e.Theta}, {"gamma", e.gamma}, {"delta", e.delta},
                    {"nu", e.nu},           {"a", e.a},         {"nu1", e.nu1},     {"nu2", e.nu2},
                    {"nu3", e.nu3},         {"nu4", e.nu4},     {"a1", e.a1},       {"a2", e.a2},
                    {"m", e.m},             {"sigma0", e.sigma0}, {"sigma", e.sigma}, {"delta1", e.delta1},
                    {"delta2", e.delta2}};
  c["profiles"] = {{"levels", {65, 129, 257, 513}}, {"n_theta", 16},   {"rho_min", 1e-3},
                   {"rho_max", 20.0},               {"report_lo", 0.01}, {"report_hi", 10.0}};
  c["corrections"] = {{"T", 1e-2},
                      {"t_frac", 0.5},
                      {"omega0", 0.0},
                      {"track_samples", 400},
                      {"theta", 0.3},
                      {"radii", {1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.3}},
                      {"taus", {1e-4, 1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0, 1e3, 1e4}}};
  c["reduced"] = {{"T", 1e-3}, {"a0", {-1.0, 0.3}}, {"ratio", 0.85}, {"c1", 1.0},
                  {"c2", 1.0}, {"win_lo", 1e-4},    {"win_hi", 1e-1}};
  c["inner"] = {{"mode", -1},      {"R", 64.0},       {"radius_mult", 4.0}, {"a", 2.5},      {"b", 0.0},
                {"n_rho", 400},    {"rho_min", 1e-2}, {"n_times", 240},     {"tau_end", 1e7}, {"refine", true}};
  c["outer"] = {{"T", 1e-2}, {"n", 32}, {"steps", 20}, {"t_frac", 0.5}, {"background_amplitude", 1.0},
                {"q", {0.5, 0.5}}, {"stride", 4}, {"holder_pairs", 2000}, {"corrections", false}};
  c["stokes"] = {{"T", 0.05},       {"nu", 0.9},          {"a", 1.5},          {"M", {1.0, 0.3, -0.5}},
                 {"level", 0},      {"remaining", {0.1, 0.01}}, {"targets_y", {0.0, 1.0, 5.0, 30.0}}};
  c["simulate"] = {{"n", 256},
                   {"L", 1.0},
                   {"T", 0.05},
                   {"eps0", 1e-3},
                   {"viscosity", 1.0},
                   {"bubbles", {{{"q", {0.5, 0.5}}, {"kappa", 7.8}, {"omega", 0.0}}}},
                   {"core_radius", 0.49},
                   {"blend_start", 0.6},
                   {"shell_mu", 0.45},
                   {"background_amplitude", 0.0},
                   {"background_width", 0.15},
                   {"v0_amplitude", 0.0},
                   {"dt_max", 1e-3},
                   {"heat_cfl", 0.2},
                   {"transport_cfl", 0.5},
                   {"renorm_limit", 0.1},
                   {"t_max", 1.0},
                   {"snapshot_dt", 5e-4},
                   {"min_cells", 8.0},
                   {"max_cells", 40.0},
                   {"ball_factor", 10.0},
                   {"search_radius", 0.15},
                   {"write_fields", false},
                   {"checkpoint", false}};
  const GlueConfig g;
  c["glue"] = {{"T", g.T},
               {"eps0", g.eps0},
               {"v_block", g.v_block},
               {"corrections", g.corrections},
               {"iterations", g.iterations},
               {"t_end_frac", g.t_end_frac},
               {"q", {g.q[0], g.q[1]}},
               {"background_amplitude", g.background_amplitude},
               {"outer_n", g.outer_n},
               {"heat_steps", g.heat_steps},
               {"inner_n_rho", g.inner_n_rho},
               {"inner_steps", g.inner_steps},
               {"inner_angles", g.inner_angles},
               {"stokes_nodes", g.stokes_nodes},
               {"stokes_times", g.stokes_times},
               {"holder_pairs", g.holder_pairs},
               {"divergence_factor", g.divergence_factor}};
  return c;
}

namespace {

const char* type_name(const json& j) {
  if (j.is_boolean()) return "boolean";
  if (j.is_number_integer()) return "integer";
  if (j.is_number()) return "number";
  if (j.is_string()) return "string";
  if (j.is_array()) return "array";
  if (j.is_object()) return "object";
  return "null";
}

// merges `user` into `def` in place, checking keys and types against the default
void merge(json& def, const json& user, const std::string& path) {
  auto here = [&](const std::string& k) { return path.empty() ? k : path + "." + k; };
  if (def.is_object()) {
    require(user.is_object(), ErrorKind::Config, "config: " + (path.empty() ? std::string("<root>") : path) + ": expected an object");
    for (auto it = user.begin(); it != user.end(); ++it) {
      require(def.contains(it.key()), ErrorKind::Config, "config: unknown key " + here(it.key()));
      merge(def[it.key()], it.value(), here(it.key()));
    }
    return;
  }
  if (def.is_array()) {
    require(user.is_array(), ErrorKind::Config, "config: " + path + ": expected an array");
    json proto = def.empty() ? json() : def[0];
    json out = json::array();
    for (size_t i = 0; i < user.size(); ++i) {
      json d = proto;
      if (d.is_null()) d = user[i];
      merge(d, user[i], path + "[" + std::to_string(i) + "]");
      out.push_back(d);
    }
    def = out;
    return;
  }
  if (def.is_boolean()) {
    require(user.is_boolean(), ErrorKind::Config, "config: " + path + ": expected a boolean, got " + type_name(user));
  } else if (def.is_number_integer()) {
    const bool integral = user.is_number_integer() || (user.is_number_float() && std::floor(user.get<double>()) == user.get<double>());
    require(integral, ErrorKind::Config, "config: " + path + ": expected an integer, got " + type_name(user));
    def = json(user.get<int64_t>());
    return;
  } else if (def.is_number()) {
    require(user.is_number(), ErrorKind::Config, "config: " + path + ": expected a number, got " + type_name(user));
    def = json(user.get<double>());
    return;
  } else if (def.is_string()) {
    require(user.is_string(), ErrorKind::Config, "config: " + path + ": expected a string, got " + type_name(user));
  }
  def = user;
}

ExponentSet exponents_of(const json& c) {
  const json& e = c.at("exponents");
  ExponentSet x;
  x.gamma_star = e["gamma_star"];
  x.Theta = e["Theta"];
  x.gamma = e["gamma"];
  x.delta = e["delta"];
  x.nu = e["nu"];
  x.a = e["a"];
  x.nu1 = e["nu1"];
  x.nu2 = e["nu2"];
  x.nu3 = e["nu3"];
  x.nu4 = e["nu4"];
  x.a1 = e["a1"];
  x.a2 = e["a2"];
  x.m = e["m"];
  x.sigma0 = e["sigma0"];
  x.sigma = e["sigma"];
  x.delta1 = e["delta1"];
  x.delta2 = e["delta2"];
  return x;
}

Vec2 vec2_of(const json& a, const std::string& path) {
  require(a.size() == 2, ErrorKind::Config, "config: " + path + ": expected two numbers");
  return {a[0].get<double>(), a[1].get<double>()};
}

}  // namespace

json parse_config(const json& user) {
  json c = default_config();
  merge(c, user, "");
  static const char* scenarios[] = {"profiles", "corrections", "reduced", "inner", "outer", "stokes", "simulate", "glue"};
  const std::string s = c["scenario"];
  require(std::find(std::begin(scenarios), std::end(scenarios), s) != std::end(scenarios), ErrorKind::Config,
          "config: scenario: unknown scenario '" + s + "'");
  require(c["threads"].get<int64_t>() >= 0, ErrorKind::Config, "config: threads: must be non-negative");
  if (!c["allow_infeasible"].get<bool>()) {
    const auto rep = validate_exponents(exponents_of(c));
    if (!rep.feasible()) {
      std::string names;
      for (auto& n : rep.violated()) names += (names.empty() ? "" : ", ") + n;
      fail(ErrorKind::Config, "config: exponents: infeasible, violated constraints: " + names);
    }
  }
  return c;
}

void set_config_value(json& user, const std::string& path, const std::string& value) {
  require(!path.empty(), ErrorKind::Config, "override: empty key");
  json v;
  try {
    v = json::parse(value);
  } catch (const json::parse_error&) {
    v = value;
  }
  json* node = &user;
  std::string tok;
  std::istringstream ss(path);
  std::vector<std::string> parts;
  while (std::getline(ss, tok, '.')) parts.push_back(tok);
  for (size_t p = 0; p < parts.size(); ++p) {
    std::string key = parts[p];
    std::vector<size_t> idx;
    const auto br = key.find('[');
    if (br != std::string::npos) {
      std::string rest = key.substr(br);
      key = key.substr(0, br);
      size_t pos = 0;
      while (pos < rest.size()) {
        const auto close = rest.find(']', pos);
        require(rest[pos] == '[' && close != std::string::npos, ErrorKind::Config, "override: bad index in " + path);
        idx.push_back(std::stoul(rest.substr(pos + 1, close - pos - 1)));
        pos = close + 1;
      }
    }
    if (node->is_null()) *node = json::object();
    require(node->is_object(), ErrorKind::Config, "override: " + path + ": not an object at " + key);
    node = &(*node)[key];
    for (size_t i : idx) {
      if (node->is_null()) *node = json::array();
      require(node->is_array(), ErrorKind::Config, "override: " + path + ": not an array at " + key);
      if (node->size() <= i) {
        // extend with defaults so partial element overrides merge cleanly
        json def = default_config();
        json* d = &def;
        for (size_t q = 0; q <= p && d; ++q) {
          std::string k = parts[q].substr(0, parts[q].find('['));
          d = d->is_object() && d->contains(k) ? &(*d)[k] : nullptr;
        }
        json proto = d && d->is_array() && !d->empty() ? (*d)[0] : json::object();
        while (node->size() <= i) node->push_back(proto);
      }
      node = &(*node)[i];
    }
  }
  *node = v;
}

std::string config_hash(const json& cfg) {
  const std::string s = cfg.dump();
  uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---- scenarios ------------------------------------------------------------------------

namespace {

struct Out {
  fs::path dir;
  json files = json::array();
  std::string path(const std::string& name) {
    files.push_back(name);
    return (dir / name).string();
  }
};

std::ofstream open_csv(const std::string& p) {
  std::ofstream f(p);
  require(bool(f), ErrorKind::Io, "cannot open " + p);
  f.precision(12);
  return f;
}

void close_checked(std::ofstream& f, const std::string& p) {
  f.close();
  require(!f.fail(), ErrorKind::Io, "write failed: " + p);
}

json run_profiles(const json& c, Out& out) {
  const json& p = c["profiles"];
  const int n_theta = p["n_theta"];
  const double lo = p["report_lo"], hi = p["report_hi"];
  const std::string csv = out.path("kernel_residuals.csv");
  auto f = open_csv(csv);
  f << "k,j,n_rho,n_theta,residual\n";
  json table = json::array();
  double worst_ratio = INFINITY;
  for (int k = -1; k <= 1; ++k)
    for (int j = 1; j <= 2; ++j) {
      json res = json::array(), ratios = json::array();
      double prev = 0;
      int nt = n_theta;  // angular nodes double with each radial level
      for (auto& nj : p["levels"]) {
        const int n = nj;
        PolarGrid g({p["rho_min"].get<double>(), p["rho_max"].get<double>(), n, nt, Spacing::Geometric});
        nt *= 2;
        auto z = sample_field(g, [&](const PolarPoint& y) { return eval_kernel(k, j, y); });
        auto r = apply_linearized(z);
        double sup = 0;
        for (int i = 1; i + 1 < g.n_rho(); ++i) {
          const double rho = g.rho()[i];
          if (rho < lo || rho > hi) continue;
          for (int a = 0; a < g.n_theta(); ++a) sup = std::max(sup, r.at(i, a).norm());
        }
        f << k << ',' << j << ',' << n << ',' << g.n_theta() << ',' << sup << '\n';
        res.push_back(sup);
        if (prev > 0) {
          ratios.push_back(prev / sup);
          worst_ratio = std::min(worst_ratio, prev / sup);
        }
        prev = sup;
      }
      table.push_back({{"k", k}, {"j", j}, {"residuals", res}, {"ratios", ratios}});
    }
  close_checked(f, csv);
  const double E = dirichlet_energy_profile();
  return {{"kernel_residuals", table},
          {"worst_ratio", worst_ratio},
          {"energy", E},
          {"energy_rel_err", std::abs(E / (8 * kPi) - 1)},
          {"moment_rho_wrho2", moment_rho_wrho2()},
          {"moment_cosw_rho_wrho2", moment_cosw_rho_wrho2()}};
}

json run_corrections(const json& c, Out& out) {
  const json& p = c["corrections"];
  const double T = p["T"], t = p["t_frac"].get<double>() * T, th = p["theta"];
  const std::string gcsv = out.path("gamma.csv");
  auto g = open_csv(gcsv);
  g << "tau,gamma1,gamma2\n";
  json gam = json::array();
  for (auto& tj : p["taus"]) {
    const double tau = tj;
    const auto v = gamma_functions(tau);
    g << tau << ',' << v.g1 << ',' << v.g2 << '\n';
    gam.push_back({{"tau", tau}, {"gamma1", v.g1}, {"gamma2", v.g2}});
  }
  close_checked(g, gcsv);
  const auto tr = blowup_track(T, p["track_samples"], p["omega0"]);
  const ParamState s = tr.at(t);
  const std::string ecsv = out.path("error_terms.csv");
  auto e = open_csv(ecsv);
  e << "r,E0,E1,Em1,R1,Rm1,K0,K1\n";
  json rows = json::array();
  for (auto& rj : p["radii"]) {
    const double r = rj;
    const Vec2 x = s.xi() + r * Vec2(std::cos(th), std::sin(th));
    const auto E = evaluate_errors(tr, x, t);
    const auto R = evaluate_remainders(tr, x, t);
    const auto K = evaluate_K(tr, (x - s.xi()) / s.lambda, t);
    e << r << ',' << E.E0.norm() << ',' << E.E1.norm() << ',' << E.Em1.norm() << ',' << R.R1.norm() << ','
      << R.Rm1.norm() << ',' << K.K0().norm() << ',' << K.K1.norm() << '\n';
    rows.push_back({{"r", r},
                    {"E0", E.E0.norm()},
                    {"E1", E.E1.norm()},
                    {"Em1", E.Em1.norm()},
                    {"R1", R.R1.norm()},
                    {"Rm1", R.Rm1.norm()},
                    {"K0", K.K0().norm()},
                    {"K1", K.K1.norm()}});
  }
  close_checked(e, ecsv);
  return {{"gamma", gam}, {"lambda", s.lambda}, {"t", t}, {"error_terms", rows}};
}

json run_reduced(const json& c, Out& out) {
  const json& p = c["reduced"];
  const double T = p["T"];
  const cplx a0(p["a0"][0].get<double>(), p["a0"][1].get<double>());
  IntegroOptions o;
  o.ratio = p["ratio"];
  const auto sol = solve_lambda_integro(a0, T, o);
  const std::string csv = out.path("lambda.csv");
  auto f = open_csv(csv);
  f << "t,lambda,dlambda,lambda_star\n";
  double lo = INFINITY, hi = 0;
  const double u_last = T - sol.t.back();
  for (size_t i = 0; i < sol.t.size(); ++i) {
    const double ls = sol.t[i] < T ? lambda_star(sol.t[i], T) : 0;
    f << sol.t[i] << ',' << sol.lambda[i] << ',' << sol.dlambda[i] << ',' << ls << '\n';
    if (T - sol.t[i] <= 10 * u_last && ls > 0) {
      lo = std::min(lo, sol.lambda[i] / ls);
      hi = std::max(hi, sol.lambda[i] / ls);
    }
  }
  close_checked(f, csv);
  double ulo = INFINITY, uhi = -INFINITY;
  for (int i = 0; i < 10; ++i) {
    const double v = upsilon(sol.kappa, T, T * (1 - std::pow(10.0, -1 - 0.5 * i)));
    ulo = std::min(ulo, v);
    uhi = std::max(uhi, v);
  }
  const auto ab = leading_alpha_beta(p["c1"], p["c2"], T, exponents_of(c), p["win_lo"], p["win_hi"]);
  return {{"kappa", sol.kappa},
          {"iterations", sol.iterations},
          {"max_residual", sol.max_residual},
          {"final_decade_drift", (hi - lo) / lo},
          {"upsilon_variation", (uhi - ulo) / std::abs(uhi)},
          {"alpha_beta",
           {{"c_alpha", ab.c_alpha}, {"delta1", ab.delta1}, {"c_beta", ab.c_beta}, {"delta2", ab.delta2},
            {"dropped_rel", ab.dropped_rel}}}};
}

json run_inner(const json& c, Out& out) {
  const json& p = c["inner"];
  const int k = p["mode"];
  const double R = p["R"], M = p["radius_mult"], a = p["a"], b = p["b"];
  const int kk = std::min(std::abs(k), 2);
  auto base = [&](double r) { return std::pow(r, kk) / std::pow(1 + r, a + kk); };
  std::function<double(double)> hf = base;
  if (k == 1 || k == -1) {
    // orthogonal to Z_k on the solve ball, by a multiple of w_rho^2 Z_k
    auto w2 = [](double r) { return 4 / std::pow(1 + r * r, 2); };
    auto Z = [k](double r) { return mode_kernel(k, r); };
    const double MR = M * R;
    const double cc = quad::gk([&](double r) { return base(r) * Z(r) * r; }, 0.0, MR).value /
                      quad::gk([&](double r) { return w2(r) * Z(r) * Z(r) * r; }, 0.0, MR).value;
    hf = [=](double r) { return base(r) - cc * w2(r) * Z(r); };
  }
  const RadialForcing h = [hf](double r, double) { return cplx(hf(r), 0); };
  const auto tr = InnerTrack::constant(1, R);
  auto solve = [&](int n_rho, int n_times) {
    InnerSolveOptions o;
    const double tau_end = p["tau_end"];
    for (int i = 0; i <= n_times; ++i)
      o.times.push_back(i == 0 ? 0 : 1e-2 * std::pow(tau_end / 1e-2, (i - 1) / double(n_times - 1)));
    o.n_rho = n_rho;
    o.rho_min = p["rho_min"];
    o.radius_mult = M;
    if (k == 0) return solve_mode0_projected(h, tr, o);
    if (k == -1) return solve_mode_m1(h, tr, o);
    if (k == 1) return solve_mode1_div(h, tr, o);
    return solve_mode(k, h, tr, o);
  };
  const int n_rho = p["n_rho"], n_times = p["n_times"];
  const auto s = solve(n_rho, n_times);
  const auto one = [](double) { return 1.0; };
  const double sup = mode_sup_weighted(s, tr, one, 0, b);
  double ratio = 0;
  if (p["refine"].get<bool>()) ratio = mode_sup_weighted(solve(2 * n_rho, 2 * n_times), tr, one, 0, b) / sup;
  write_mode_csv(s, out.path("mode.csv"));
  return {{"mode", k},
          {"R", R},
          {"weighted_sup", sup},
          {"sup_over_logR", sup / std::log(R)},
          {"boundary_max", s.boundary_max},
          {"certification", json::parse(certification_json(k, NormKind::NuA, sup, ratio))}};
}

json run_outer(const json& c, Out& out) {
  const json& p = c["outer"];
  const ExponentSet ex = exponents_of(c);
  const double T = p["T"], t1 = p["t_frac"].get<double>() * T;
  DomainGrid grid = DomainGrid::unit_square(p["n"]);
  grid.q = vec2_of(p["q"], "outer.q");
  HeatOptions ho;
  ho.t0 = 0;
  ho.t1 = t1;
  ho.n_steps = p["steps"];
  const double A = p["background_amplitude"];
  const Vec2 q = grid.q;
  auto Z0 = [&](const Vec2& x) { return Vec3(-A * (x[0] - q[0]), -A * (x[1] - q[1]), 0); };
  const auto Z = solve_background_Z(Z0, grid, ho);
  // boundary data is zero, so the initial/boundary corner mismatch is sup |Z0| on the boundary
  double corner = 0;
  for (int i = 0; i <= grid.nx; ++i)
    for (int j = 0; j <= grid.ny; ++j)
      if (grid.on_boundary(i, j)) corner = std::max(corner, Z0(grid.node(i, j)).norm());
  write_heat_csv(Z.Z[0], out.path("background_z1.csv"));
  write_heat_csv(Z.Z[1], out.path("background_z2.csv"));
  SharpNormOptions so;
  so.T = T;
  so.gamma_star = ex.gamma_star;
  so.holder_pairs = p["holder_pairs"];
  so.seed = c["seed"];
  const auto norm = solution_norm_sharp({Z.Z[0], Z.Z[1], Z.Z[2]}, ex.Theta, ex.gamma, so);

  const auto field = GridField3::from(Z.Z);
  const auto tr = blowup_track(T, 400, 0, q);
  OuterIngredients in;
  in.track = &tr;
  in.gamma_star = ex.gamma_star;
  in.corrections = p["corrections"];
  in.phi = TimeField3::zero();
  in.psi.value = [&](const Vec2& x, double t) { return field.value(x, t); };
  in.psi.jacobian = [&](const Vec2& x, double t) { return field.jacobian(x, t); };
  in.v = [](const Vec2&, double) { return Vec2::Zero().eval(); };
  OuterWeights w;
  w.T = T;
  w.gamma_star = ex.gamma_star;
  w.Theta = ex.Theta;
  w.sigma0 = ex.sigma0;
  w.q = q;
  const std::vector<double> times{0.25 * t1, 0.5 * t1, t1};
  const auto rep = outer_rhs_report(in, w, grid_samples(grid, times, p["stride"]));
  return {{"div_at_q", Z.div_at_q},
          {"corner_defect", corner},
          {"sharp_norm", json::parse(norm.to_json())}, {"rhs", json::parse(rep.to_json())}};
}

json run_stokes(const json& c, Out& out) {
  const json& p = c["stokes"];
  const double T = p["T"], nu = p["nu"], a = p["a"];
  Mat2 M;
  M << p["M"][0].get<double>(), p["M"][1].get<double>(), p["M"][1].get<double>(), p["M"][2].get<double>();
  const auto F = ForcingTensor::weight_profile(T, nu, a, M);
  std::vector<SpaceTimePoint> targets, samples;
  for (auto& rj : p["remaining"]) {
    const double t = T * (1 - rj.get<double>());
    for (auto& yj : p["targets_y"]) targets.push_back({Vec2(yj.get<double>() * lambda_star(t, T), 0), t});
    for (double y = 0; y < 200; y *= 1.1, y += 0.01) samples.push_back({Vec2(y * lambda_star(t, T), 0), t});
  }
  ConvolutionOptions o;
  o.level = p["level"];
  o.threads = c["threads"];
  const auto cert = certify_decay(F, targets, samples, o);
  o.with_pressure = true;
  write_velocity_csv(convolve_velocity(F, targets, {}, o), out.path("velocity.csv"));
  return {{"certificate", json::parse(cert.to_json())}};
}

}  // namespace

SimConfig simulation_config(const json& c) {
  const json& p = c["simulate"];
  SimConfig sc;
  sc.n = p["n"];
  sc.L = p["L"];
  sc.T = p["T"];
  sc.eps0 = p["eps0"];
  sc.viscosity = p["viscosity"];
  sc.bubbles.clear();
  for (size_t i = 0; i < p["bubbles"].size(); ++i) {
    const json& b = p["bubbles"][i];
    sc.bubbles.push_back(Bubble{vec2_of(b["q"], "simulate.bubbles[" + std::to_string(i) + "].q"), b["kappa"], b["omega"]});
  }
  sc.core_radius = p["core_radius"];
  sc.blend_start = p["blend_start"];
  sc.shell_mu = p["shell_mu"];
  sc.background_amplitude = p["background_amplitude"];
  sc.background_width = p["background_width"];
  sc.v0_amplitude = p["v0_amplitude"];
  sc.dt_max = p["dt_max"];
  sc.heat_cfl = p["heat_cfl"];
  sc.transport_cfl = p["transport_cfl"];
  sc.renorm_limit = p["renorm_limit"];
  return sc;
}

BlowupRunOptions blowup_options(const json& c) {
  const json& p = c["simulate"];
  BlowupRunOptions o;
  o.t_max = p["t_max"];
  o.snapshot_dt = p["snapshot_dt"];
  o.min_cells = p["min_cells"];
  o.max_cells = p["max_cells"];
  o.ball_factor = p["ball_factor"];
  o.search_radius = p["search_radius"];
  return o;
}

namespace {

json run_simulate(const json& c, Out& out) {
  const json& p = c["simulate"];
  const SimConfig sc = simulation_config(c);
  const BlowupRunOptions o = blowup_options(c);
  Simulator sim(sc);
  const auto run = run_blowup(sim, o);

  const std::string csv = out.path("series.csv");
  auto f = open_csv(csv);
  f << "t,lambda,xi1,xi2,energy,energy_ball,max_v,renorm_deviation\n";
  for (auto& s : run.snapshots)
    f << s.t << ',' << s.lambda << ',' << s.xi[0] << ',' << s.xi[1] << ',' << s.energy << ',' << s.energy_ball << ','
      << s.max_v << ',' << s.renorm_deviation << '\n';
  close_checked(f, csv);
  {
    const std::string jp = out.path("diagnostics.json");
    std::ofstream d(jp);
    require(bool(d), ErrorKind::Io, "cannot open " + jp);
    d << run.to_json() << '\n';
  }
  if (p["write_fields"].get<bool>()) write_fields_csv(sim.grid(), run.final_state, out.path("fields.csv"));
  if (p["checkpoint"].get<bool>()) {
    save_checkpoint(sim, run.final_state, out.path("final.ckpt"));
    out.files.push_back("final.ckpt.json");
  }
  const auto& d = run.diagnostics;
  return {{"blowup_detected", d.blowup_detected},
          {"message", d.message},
          {"T_hat", d.T_hat},
          {"kappa_hat", d.kappa_hat},
          {"rate_variation", d.rate_variation},
          {"window_points", d.window_points},
          {"v_c_hat", d.v_c_hat},
          {"v_nu_hat", d.v_nu_hat},
          {"steps", run.steps},
          {"snapshots", run.snapshots.size()},
          {"final_lambda", run.final_lambda},
          {"final_energy_ball_over_8pi", run.final_energy_ball / (8 * kPi)},
          {"max_energy_increase", run.max_energy_increase},
          {"max_velocity", run.max_velocity}};
}

json run_glue(const json& c, Out& out, bool& ok) {
  const json& p = c["glue"];
  GlueConfig g;
  g.T = p["T"];
  g.exponents = exponents_of(c);
  g.eps0 = p["eps0"];
  g.v_block = p["v_block"];
  g.corrections = p["corrections"];
  g.iterations = p["iterations"];
  g.t_end_frac = p["t_end_frac"];
  g.q = vec2_of(p["q"], "glue.q");
  g.background_amplitude = p["background_amplitude"];
  g.outer_n = p["outer_n"];
  g.heat_steps = p["heat_steps"];
  g.inner_n_rho = p["inner_n_rho"];
  g.inner_steps = p["inner_steps"];
  g.inner_angles = p["inner_angles"];
  g.stokes_nodes = p["stokes_nodes"];
  g.stokes_times = p["stokes_times"];
  g.holder_pairs = p["holder_pairs"];
  g.seed = c["seed"];
  g.divergence_factor = p["divergence_factor"];
  const auto rep = run_gluing_iteration(g);
  const std::string jp = out.path("glue.json");
  std::ofstream f(jp);
  require(bool(f), ErrorKind::Io, "cannot open " + jp);
  f << rep.to_json() << '\n';
  ok = rep.status != "diverged";
  return json::parse(rep.to_json());
}

}  // namespace

json run_scenario(const json& cfg) {
  const std::string s = cfg.at("scenario");
  Out out;
  out.dir = cfg.at("out").get<std::string>();
  std::error_code ec;
  fs::create_directories(out.dir, ec);
  require(!ec, ErrorKind::Io, "cannot create output directory " + out.dir.string() + ": " + ec.message());

  bool ok = true;
  json results;
  if (s == "profiles") results = run_profiles(cfg, out);
  else if (s == "corrections") results = run_corrections(cfg, out);
  else if (s == "reduced") results = run_reduced(cfg, out);
  else if (s == "inner") results = run_inner(cfg, out);
  else if (s == "outer") results = run_outer(cfg, out);
  else if (s == "stokes") results = run_stokes(cfg, out);
  else if (s == "simulate") results = run_simulate(cfg, out);
  else if (s == "glue") results = run_glue(cfg, out, ok);
  else fail(ErrorKind::Config, "config: scenario: unknown scenario '" + s + "'");

  const std::string summary_name = "summary.json";
  out.files.push_back(summary_name);
  json summary{{"version", kSchemaVersion}, {"scenario", s},    {"config_hash", config_hash(cfg)},
               {"ok", ok},                  {"results", results}, {"files", out.files}, {"config", cfg}};
  const std::string sp = (out.dir / summary_name).string();
  std::ofstream f(sp);
  require(bool(f), ErrorKind::Io, "cannot open " + sp);
  f << summary.dump(2) << '\n';
  f.close();
  require(!f.fail(), ErrorKind::Io, "write failed: " + sp);
  return summary;
}

}  // namespace lab
