#include "lab/glue.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <map>

#include "lab/corrections.hpp"
#include "lab/inner.hpp"
#include "lab/outer.hpp"
#include "lab/reduced.hpp"
#include "lab/stokes.hpp"
#include "lab/track.hpp"

namespace lab {

namespace {

// mode-0 inner solution as a tangent field in y
Vec3 mode0_value(const ModeSolution& s, const Vec2& y, double t) {
  if (s.phi.empty()) return Vec3::Zero();
  auto radial = [&](size_t n, double rho) -> cplx {
    const auto& m = s.phi[n];
    if (rho <= m.rho.front()) return m.values.front();
    if (rho >= m.rho.back()) return 0;
    const size_t i = size_t(std::upper_bound(m.rho.begin(), m.rho.end(), rho) - m.rho.begin()) - 1;
    const double w = (rho - m.rho[i]) / (m.rho[i + 1] - m.rho[i]);
    return (1 - w) * m.values[i] + w * m.values[i + 1];
  };
  const PolarPoint p = PolarPoint::from_cartesian(y);
  cplx v;
  if (t <= s.t.front()) {
    v = radial(0, p.rho);
  } else if (t >= s.t.back()) {
    v = radial(s.t.size() - 1, p.rho);
  } else {
    const size_t n = size_t(std::upper_bound(s.t.begin(), s.t.end(), t) - s.t.begin()) - 1;
    const double w = (t - s.t[n]) / (s.t[n + 1] - s.t[n]);
    v = (1 - w) * radial(n, p.rho) + w * radial(n + 1, p.rho);
  }
  const Frame f = eval_frame(p);
  return v.real() * f.e1 + v.imag() * f.e2;
}

double mode_sup_diff(const ModeSolution& a, const ModeSolution& b) {
  double m = 0;
  for (size_t n = 0; n < a.phi.size() && n < b.phi.size(); ++n)
    for (size_t i = 0; i < a.phi[n].values.size(); ++i) m = std::max(m, std::abs(a.phi[n].values[i] - b.phi[n].values[i]));
  return m;
}

struct VelocityTable {
  std::vector<Vec2> x;
  std::vector<double> t;
  int nodes = 0;
  double Lx = 1, Ly = 1;
  std::vector<Vec2> v;  // index n * nodes^2 + i * nodes + j

  Vec2 at(const Vec2& p, double tt) const {
    if (v.empty() || p[0] < 0 || p[1] < 0 || p[0] > Lx || p[1] > Ly) return Vec2::Zero();
    size_t n = 0;
    double wt = 0;
    if (tt >= t.back()) {
      n = t.size() - 1;
    } else if (tt > t.front()) {
      n = size_t(std::upper_bound(t.begin(), t.end(), tt) - t.begin()) - 1;
      wt = (tt - t[n]) / (t[n + 1] - t[n]);
    }
    const double gx = std::min(p[0] / Lx * (nodes - 1), nodes - 1 - 1e-12);
    const double gy = std::min(p[1] / Ly * (nodes - 1), nodes - 1 - 1e-12);
    const int i = int(gx), j = int(gy);
    const double fx = gx - i, fy = gy - j;
    auto slice = [&](size_t m) {
      auto V = [&](int a, int b) { return v[m * nodes * nodes + size_t(a) * nodes + b]; };
      return Vec2((1 - fx) * ((1 - fy) * V(i, j) + fy * V(i, j + 1)) + fx * ((1 - fy) * V(i + 1, j) + fy * V(i + 1, j + 1)));
    };
    return wt == 0 ? slice(n) : Vec2((1 - wt) * slice(n) + wt * slice(n + 1));
  }
};

ParameterTrack track_from_integro(const IntegroSolution& sol, double T, double omega, const Vec2& q) {
  const size_t n = sol.t.size();
  return ParameterTrack::from_samples(T, sol.t, sol.lambda, std::vector<double>(n, q[0]), std::vector<double>(n, q[1]),
                                      std::vector<double>(n, omega), std::vector<double>(n, 0.0),
                                      std::vector<double>(n, 0.0));
}

}  // namespace

std::string GlueReport::to_json() const {
  nlohmann::json j;
  j["status"] = status;
  j["contracted"] = contracted;
  j["min_ratio"] = min_ratio;
  auto& h = j["history"];
  h = nlohmann::json::array();
  for (auto& it : history)
    h.push_back({{"k", it.k},
                 {"phi_norm", it.phi_norm},
                 {"psi_norm", it.psi_norm},
                 {"v_norm", it.v_norm},
                 {"kappa", it.kappa},
                 {"omega0", it.omega0},
                 {"a0_abs", it.a0_abs},
                 {"d_phi", it.d_phi},
                 {"d_psi", it.d_psi},
                 {"d_v", it.d_v},
                 {"d_kappa", it.d_kappa},
                 {"d_total", it.d_total},
                 {"ratio", it.ratio}});
  return j.dump(2);
}

GlueReport run_gluing_iteration(const GlueConfig& cfg) {
  require(cfg.iterations >= 1, ErrorKind::Config, "glue: iterations must be positive");
  require(cfg.t_end_frac > 0 && cfg.t_end_frac < 1, ErrorKind::Config, "glue: t_end_frac must lie in (0, 1)");
  require(cfg.eps0 >= 0, ErrorKind::Config, "glue: eps0 must be non-negative");
  require(cfg.stokes_nodes >= 2 && cfg.stokes_times >= 2, ErrorKind::Config, "glue: need at least 2 Stokes nodes and times");
  const double T = cfg.T, gs = cfg.exponents.gamma_star, t1 = cfg.t_end_frac * T;
  const ExponentSet& ex = cfg.exponents;

  DomainGrid grid = DomainGrid::unit_square(cfg.outer_n);
  grid.q = cfg.q;
  grid.validate();
  {
    // a node on q samples |grad U|^2 = 8/lambda^2 in the nonlinear term and the loop blows up
    const double fx = cfg.q[0] / grid.hx() - std::round(cfg.q[0] / grid.hx());
    const double fy = cfg.q[1] / grid.hy() - std::round(cfg.q[1] / grid.hy());
    require(std::hypot(fx, fy) > 0.25, ErrorKind::Config, "glue: q lies on (or next to) an outer grid node");
  }
  HeatOptions hopt;
  hopt.t0 = 0;
  hopt.t1 = t1;
  hopt.n_steps = cfg.heat_steps;

  // background Z* from planar Z0 = -A (x - q)
  const double A = cfg.background_amplitude;
  auto Zb = solve_background_Z([&](const Vec2& x) { return Vec3(-A * (x[0] - cfg.q[0]), -A * (x[1] - cfg.q[1]), 0); },
                               grid, hopt);
  const GridField3 Z = GridField3::from(Zb.Z);

  auto update_track = [&](const GridField3& psi, double& kappa, double& omega0, double& a0_abs) {
    // planar part of Psi* = Z* + psi at the end of the window
    auto planar = [&](const Vec2& x) {
      const Vec3 v = Z.value(x, t1) + psi.value(x, t1);
      return Vec2(v[0], v[1]);
    };
    const auto rhs = reduced_rhs_a0(planar, cfg.q, grid.hx());
    const auto sol = solve_lambda_integro(rhs.a0_star, T);
    kappa = sol.kappa;
    omega0 = rhs.omega0;
    a0_abs = std::abs(rhs.a0_star);
    return track_from_integro(sol, T, omega0, cfg.q);
  };

  GridField3 psi = GridField3::zero_like(Z);
  VelocityTable vel;
  ModeSolution phi_prev;
  double kappa = 0, omega0 = 0, a0 = 0;
  ParameterTrack track = update_track(psi, kappa, omega0, a0);

  const auto lstar = [T](double t) { return lambda_star(t, T); };
  InnerSolveOptions iopt;
  iopt.t0 = 0;
  iopt.t1 = t1;
  iopt.n_steps = cfg.inner_steps;
  iopt.n_rho = cfg.inner_n_rho;
  iopt.radius_mult = 2;

  GlueReport rep;
  rep.status = "max_iterations";
  double d_prev = 0;
  for (int k = 1; k <= cfg.iterations; ++k) {
    GlueIterate it;
    it.k = k;
    const GridField3 psi_old = psi;
    const VelocityTable vel_old = vel;

    // Psi* = Z* + psi as a smooth field at time t
    auto psi_star = [&](double t) {
      SmoothField f;
      f.value = [&, t](const Vec2& x) { return Vec3(Z.value(x, t) + psi_old.value(x, t)); };
      f.jacobian = [&, t](const Vec2& x) { return Mat32(Z.jacobian(x, t) + psi_old.jacobian(x, t)); };
      return f;
    };

    // (1) inner, mode 0: h = lambda^2 Q^{-1} tilde L_U[Psi*](xi + lambda y), projected on e^{i0 theta}
    InnerTrack itr;
    itr.lambda = [&](double t) { return track.at(t).lambda; };
    itr.R = [T, gs](double t) { return R_of(t, T, gs); };
    itr.dR = [T, gs](double t) { return -gs * R_of(t, T, gs) * lambda_star_dot(t, T) / lambda_star(t, T); };
    // tabulated on the solver times and a log-rho grid; the solver integrates h adaptively
    const int nr = 4 * cfg.inner_n_rho;
    const double lr0 = std::log(0.5 * iopt.rho_min), lr1 = std::log(2 * iopt.radius_mult * R_of(t1, T, gs));
    std::vector<double> ht;
    std::vector<std::vector<cplx>> table;
    for (int n = 0; n <= cfg.inner_steps; ++n) {
      const double t = t1 * n / cfg.inner_steps;
      ht.push_back(t);
      const SmoothField f = psi_star(t);
      const ParamState s = track.at(t);
      const Mat3 Qt = rotation_matrix({s.omega, s.alpha, s.beta}).transpose();
      std::vector<cplx> row(nr + 1);
      for (int i = 0; i <= nr; ++i) {
        const double rho = std::exp(lr0 + (lr1 - lr0) * i / nr);
        cplx acc = 0;
        for (int m = 0; m < cfg.inner_angles; ++m) {
          const PolarPoint p = PolarPoint::make(rho, 2 * kPi * m / cfg.inner_angles);
          const Vec2 y(rho * std::cos(p.theta), rho * std::sin(p.theta));
          const Vec3 loc = s.lambda * s.lambda * (Qt * tildeL_decomposed(f, s, s.xi() + s.lambda * y).definition);
          const Frame fr = eval_frame(p);
          acc += cplx(loc.dot(fr.e1), loc.dot(fr.e2));
        }
        row[i] = acc / double(cfg.inner_angles);
      }
      table.push_back(std::move(row));
    }
    RadialForcing h = [&](double rho, double t) {
      const double z = std::clamp((std::log(rho) - lr0) / (lr1 - lr0) * nr, 0.0, double(nr) - 1e-9);
      const int i = int(z);
      const double wr = z - i;
      const double zt = std::clamp(t / t1 * cfg.inner_steps, 0.0, double(cfg.inner_steps) - 1e-9);
      const int n = int(zt);
      const double w = zt - n;
      auto row = [&](int m) { return (1 - wr) * table[m][i] + wr * table[m][i + 1]; };
      return (1 - w) * row(n) + w * row(n + 1);
    };
    const ModeSolution phi = solve_mode0_projected(h, itr, iopt);
    it.phi_norm = mode_sup_weighted(phi, itr, lstar, ex.nu, ex.a);

    // (2) outer: psi_t = Lap psi + G[phi, Psi*, v], zero data
    OuterIngredients in;
    in.track = &track;
    in.gamma_star = gs;
    in.corrections = cfg.corrections;
    in.phi.value = [&](const Vec2& y, double t) { return mode0_value(phi, y, t); };
    in.psi.value = [&](const Vec2& x, double t) { return Vec3(Z.value(x, t) + psi_old.value(x, t)); };
    in.psi.jacobian = [&](const Vec2& x, double t) { return Mat32(Z.jacobian(x, t) + psi_old.jacobian(x, t)); };
    in.v = [&](const Vec2& x, double t) { return vel_old.at(x, t); };
    std::map<double, std::vector<Vec3>> rhs;
    auto rhs_at = [&](const Vec2& x, double t, int c) {
      auto r = rhs.find(t);
      if (r == rhs.end()) {
        std::vector<Vec3> all(grid.size(), Vec3::Zero());
        for (int i = 1; i < grid.nx; ++i)
          for (int j = 1; j < grid.ny; ++j) all[grid.id(i, j)] = assemble_outer_rhs(in, grid.node(i, j), t).total;
        r = rhs.emplace(t, std::move(all)).first;
      }
      const int i = int(std::lround(x[0] / grid.hx())), j = int(std::lround(x[1] / grid.hy()));
      return r->second[grid.id(i, j)][c];
    };
    std::array<HeatSolution, 3> ps;
    for (int c = 0; c < 3; ++c)
      ps[c] = solve_heat_dirichlet(
          grid, [&, c](const Vec2& x, double t) { return rhs_at(x, t, c); }, [](const Vec2&, double) { return 0.0; },
          [](const Vec2&) { return 0.0; }, hopt);
    psi = GridField3::from(ps);
    SharpNormOptions sopt;
    sopt.T = T;
    sopt.gamma_star = gs;
    sopt.holder_pairs = cfg.holder_pairs;
    sopt.seed = cfg.seed;
    it.psi_norm = solution_norm_sharp({ps[0], ps[1], ps[2]}, ex.Theta, ex.gamma, sopt).total();

    // (3) Stokes: v from eps0 (F(U + psi) - F(U)); the stress of U alone is a gradient
    vel = VelocityTable{};
    if (cfg.v_block && cfg.eps0 > 0) {
      ForcingTensor F;
      F.T = T;
      F.q = cfg.q;
      F.nu = ex.nu;
      F.a = ex.a;
      std::map<double, ParamState> states;  // the quadrature revisits the same times
      F.F = [&](const Vec2& x, double t) {
        auto st = states.find(t);
        if (st == states.end()) st = states.emplace(t, track.at(t)).first;
        const Mat32 gU = approx_U_grad(st->second, x), gp = psi.jacobian(x, t);
        const Mat2 M = gU.transpose() * gp + gp.transpose() * gU + gp.transpose() * gp;
        return Mat2(cfg.eps0 * (M - 0.5 * M.trace() * Mat2::Identity()));
      };
      vel.nodes = cfg.stokes_nodes;
      std::vector<SpaceTimePoint> targets;
      for (int n = 0; n < cfg.stokes_times; ++n) {
        const double t = t1 * (n + 1) / cfg.stokes_times;
        vel.t.push_back(t);
        for (int i = 0; i < vel.nodes; ++i)
          for (int j = 0; j < vel.nodes; ++j)
            targets.push_back({Vec2(double(i) / (vel.nodes - 1), double(j) / (vel.nodes - 1)), t});
      }
      ConvolutionOptions copt;
      copt.with_gradient = false;
      copt.panels_per_decade = 2;
      copt.n_theta = 16;
      const auto vs = convolve_velocity(F, targets, {}, copt);
      for (size_t m = 0; m < vs.size(); ++m) {
        vel.v.push_back(vs[m].v);
        const double ls = lambda_star(vs[m].t, T);
        it.v_norm = std::max(it.v_norm, std::pow(ls, 1 - ex.nu) * (1 + (vs[m].x - cfg.q).norm() / ls) * vs[m].v.norm());
      }
    }

    // (4) parameters from the reduced equation with the new Psi*
    const double kappa_old = kappa;
    track = update_track(psi, kappa, omega0, a0);
    it.kappa = kappa;
    it.omega0 = omega0;
    it.a0_abs = a0;

    auto rel = [](double d, double n) { return n > 0 ? d / n : d; };
    double phi_sup = 0;
    for (auto& m : phi.phi)
      for (auto& v : m.values) phi_sup = std::max(phi_sup, std::abs(v));
    const double psi_sup = psi.sup();
    double v_sup = 0, dv = 0;
    for (size_t m = 0; m < vel.v.size(); ++m) {
      v_sup = std::max(v_sup, vel.v[m].norm());
      dv = std::max(dv, (vel.v[m] - (vel_old.v.empty() ? Vec2::Zero().eval() : vel_old.v[m])).norm());
    }
    it.d_phi = rel(phi_prev.phi.empty() ? phi_sup : mode_sup_diff(phi, phi_prev), phi_sup);
    it.d_psi = rel(psi.sup_diff(psi_old), psi_sup);
    it.d_v = rel(dv, v_sup);
    it.d_kappa = rel(std::abs(kappa - kappa_old), kappa);
    it.d_total = std::max({it.d_phi, it.d_psi, it.d_v, it.d_kappa});
    it.ratio = k > 1 && d_prev > 0 ? it.d_total / d_prev : 0;
    d_prev = it.d_total;
    phi_prev = phi;
    rep.history.push_back(it);

    const bool finite = std::isfinite(it.phi_norm) && std::isfinite(it.psi_norm) && std::isfinite(it.v_norm) &&
                        std::isfinite(it.kappa) && std::isfinite(it.d_total);
    if (!finite || (k > 1 && it.ratio > cfg.divergence_factor)) {
      rep.status = "diverged";
      break;
    }
  }
  rep.min_ratio = 0;
  for (auto& it : rep.history)
    if (it.k > 1 && (rep.min_ratio == 0 || it.ratio < rep.min_ratio)) rep.min_ratio = it.ratio;
  rep.contracted = rep.min_ratio > 0 && rep.min_ratio < 1;
  return rep;
}

}  // namespace lab
