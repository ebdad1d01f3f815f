#include "lab/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "lab/track.hpp"

namespace lab {

namespace {

// C-infinity step: 1 on [0, a], 0 beyond b
double smooth_cutoff(double r, double a, double b) {
  if (r <= a) return 1;
  if (r >= b) return 0;
  const double s = (r - a) / (b - a);
  const double p = std::exp(-1 / s), m = std::exp(-1 / (1 - s));
  return m / (m + p);
}

// periodic minimal-image displacement x - q
Vec2 wrap(const Vec2& d, double L) {
  Vec2 w = d;
  for (int k = 0; k < 2; ++k) w[k] -= L * std::round(w[k] / L);
  return w;
}

double max_abs(const Field& f) {
  double m = 0;
  for (double v : f) m = std::max(m, std::abs(v));
  return m;
}

// periodic Catmull-Rom bicubic interpolation
double interp(const Field& f, int n, double h, double x, double y) {
  const double gx = x / h, gy = y / h;
  const int i0 = int(std::floor(gx)), j0 = int(std::floor(gy));
  const double fx = gx - i0, fy = gy - j0;
  auto w = [](double t, double* c) {
    const double t2 = t * t, t3 = t2 * t;
    c[0] = 0.5 * (-t3 + 2 * t2 - t);
    c[1] = 0.5 * (3 * t3 - 5 * t2 + 2);
    c[2] = 0.5 * (-3 * t3 + 4 * t2 + t);
    c[3] = 0.5 * (t3 - t2);
  };
  double cx[4], cy[4];
  w(fx, cx);
  w(fy, cy);
  double s = 0;
  for (int a = 0; a < 4; ++a) {
    const int i = ((i0 + a - 1) % n + n) % n;
    double row = 0;
    for (int b = 0; b < 4; ++b) {
      const int j = ((j0 + b - 1) % n + n) % n;
      row += cy[b] * f[size_t(i) * n + j];
    }
    s += cx[a] * row;
  }
  return s;
}

double bilinear(const Field& f, int n, double h, double x, double y) {
  const double gx = x / h, gy = y / h;
  const int i0 = int(std::floor(gx)), j0 = int(std::floor(gy));
  const double fx = gx - i0, fy = gy - j0;
  auto at = [&](int i, int j) { return f[size_t((i % n + n) % n) * n + size_t((j % n + n) % n)]; };
  return (1 - fx) * ((1 - fy) * at(i0, j0) + fy * at(i0, j0 + 1)) + fx * ((1 - fy) * at(i0 + 1, j0) + fy * at(i0 + 1, j0 + 1));
}

}  // namespace

double SimConfig::lambda0(const Bubble& b) const { return b.kappa * lambda_star(0, T); }

Simulator::Simulator(SimConfig cfg) : cfg_(std::move(cfg)) {
  require(cfg_.n >= 8 && cfg_.n % 2 == 0, ErrorKind::Config, "simulator: n must be even and at least 8");
  require(cfg_.L > 0 && cfg_.viscosity > 0, ErrorKind::Config, "simulator: L and viscosity must be positive");
  require(cfg_.T > 0 && cfg_.T < 1, ErrorKind::Config, "simulator: need 0 < T < 1");
  require(cfg_.eps0 >= 0, ErrorKind::Config, "simulator: eps0 must be non-negative");
  require(cfg_.dt_max > 0 && cfg_.heat_cfl > 0 && cfg_.transport_cfl > 0, ErrorKind::Config,
          "simulator: step limits must be positive");
  require(cfg_.dealias > 0 && cfg_.dealias <= 1, ErrorKind::Config, "simulator: dealias must lie in (0, 1]");
  require(cfg_.shell_mu >= 0 && cfg_.core_radius > 0 && cfg_.blend_start >= 0 && cfg_.blend_start < 1, ErrorKind::Config,
          "simulator: bad bubble geometry");
  grid_ = std::make_unique<PeriodicGrid>(cfg_.n, cfg_.L);
}

Simulator::~Simulator() = default;

SimState Simulator::build_ansatz() const {
  const auto& g = *grid_;
  const double L = cfg_.L, rc = cfg_.core_radius;
  require(rc < 0.5 * L, ErrorKind::Config, "ansatz: core_radius must be below L/2");
  for (size_t a = 0; a < cfg_.bubbles.size(); ++a)
    for (size_t b = a + 1; b < cfg_.bubbles.size(); ++b) {
      const double d = wrap(cfg_.bubbles[a].q - cfg_.bubbles[b].q, L).norm();
      require(d > 4 * rc, ErrorKind::Config, "ansatz: bubbles closer than 4 core radii");
    }
  for (auto& b : cfg_.bubbles) require(b.kappa > 0, ErrorKind::Config, "ansatz: kappa must be positive");
  const double shell = cfg_.shell_mu > 0 ? 1.0 : 0.0;
  const Vec3 far(0, 0, shell > 0 ? -1.0 : 1.0);

  SimState s;
  for (auto& c : s.u) c.assign(g.size(), 0.0);
  for (auto& c : s.v) c.assign(g.size(), 0.0);
  for (size_t id = 0; id < g.size(); ++id) {
    const Vec2 x = g.node(id);
    Vec3 u = far;
    for (auto& b : cfg_.bubbles) {
      const Vec2 d = wrap(x - b.q, L);
      const double r = d.norm();
      if (r >= rc) continue;
      const double lam = cfg_.lambda0(b);
      double w = kPi - 2 * std::atan(r / lam);
      if (shell > 0) w -= 2 * std::atan(r / cfg_.shell_mu);
      const double chi = smooth_cutoff(r, cfg_.blend_start * rc, rc);
      w = chi * w + (1 - chi) * (shell > 0 ? -kPi : 0.0);
      const double th = std::atan2(d[1], d[0]) + b.omega;
      u += Vec3(std::sin(w) * std::cos(th), std::sin(w) * std::sin(th), std::cos(w)) - far;
    }
    if (cfg_.background_amplitude != 0) {
      Vec3 z = Vec3::Zero();
      for (auto& b : cfg_.bubbles) {
        const Vec2 d = wrap(x - b.q, L);
        const double e = std::exp(-d.squaredNorm() / (2 * cfg_.background_width * cfg_.background_width));
        z.head<2>() -= cfg_.background_amplitude * e * d;
      }
      const Vec3 uh = u.normalized();
      u += z - z.dot(uh) * uh;
    }
    u.normalize();
    for (int c = 0; c < 3; ++c) s.u[c][id] = u[c];
    if (cfg_.v0_amplitude != 0) {
      const double k = 2 * kPi / L;
      s.v[0][id] = cfg_.v0_amplitude * std::sin(k * x[0]) * std::cos(k * x[1]);
      s.v[1][id] = -cfg_.v0_amplitude * std::cos(k * x[0]) * std::sin(k * x[1]);
    }
  }
  return s;
}

std::array<Field, 6> Simulator::director_gradients(const Director& u) const {
  std::array<Field, 6> d;
  for (int c = 0; c < 3; ++c) grid_->gradient(u[c], d[2 * c], d[2 * c + 1]);
  return d;
}

double Simulator::stable_dt(const SimState& s) const {
  auto d = director_gradients(s.u);
  double g2 = 0, vmax = 0;
  for (size_t id = 0; id < grid_->size(); ++id) {
    double a = 0;
    for (auto& f : d) a += f[id] * f[id];
    g2 = std::max(g2, a);
    vmax = std::max(vmax, std::hypot(s.v[0][id], s.v[1][id]));
  }
  double dt = cfg_.dt_max;
  if (g2 > 0) dt = std::min(dt, cfg_.heat_cfl / g2);
  if (vmax > 0) dt = std::min(dt, cfg_.transport_cfl * grid_->h() / vmax);
  return dt;
}

double Simulator::step_adaptive(SimState& s, double dt_cap) const {
  require(dt_cap > 0, ErrorKind::Contract, "step: dt must be positive");
  auto d = director_gradients(s.u);
  double g2 = 0, vmax = 0;
  for (size_t id = 0; id < grid_->size(); ++id) {
    double a = 0;
    for (auto& f : d) a += f[id] * f[id];
    g2 = std::max(g2, a);
    vmax = std::max(vmax, std::hypot(s.v[0][id], s.v[1][id]));
  }
  double dt = std::min(dt_cap, cfg_.dt_max);
  if (g2 > 0) dt = std::min(dt, cfg_.heat_cfl / g2);
  if (vmax > 0) dt = std::min(dt, cfg_.transport_cfl * grid_->h() / vmax);
  split_step(s, dt, d);
  return dt;
}

void Simulator::step(SimState& s, double dt) const {
  const double t_end = s.t + dt;
  while (s.t < t_end - 1e-14 * std::max(1.0, std::abs(t_end))) step_adaptive(s, t_end - s.t);
}

void Simulator::split_step(SimState& s, double dt, const std::array<Field, 6>& grads) const {
  const auto& g = *grid_;
  const int n = g.n(), nh = g.nh();
  const size_t N = g.size();
  const double t1 = s.t + dt;

  // exponential integrator weights e^{-nu k^2 dt} and (1 - e^{-nu k^2 dt}) / (nu k^2 dt)
  auto weights = [&](double nu, std::vector<double>& E, std::vector<double>& P) {
    E.resize(g.spec_size());
    P.resize(g.spec_size());
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < nh; ++j) {
        const double k2 = g.kx(i) * g.kx(i) + g.ky(j) * g.ky(j), z = nu * k2 * dt;
        const size_t id = size_t(i) * nh + j;
        E[id] = std::exp(-z);
        P[id] = z > 1e-8 ? -std::expm1(-z) / z : 1 - 0.5 * z;
      }
  };
  std::vector<double> E, P;

  // (i) momentum: v_t + v.grad v + grad p = nu Lap v - eps0 div F + forcing
  const bool flow = cfg_.eps0 != 0 || max_abs(s.v[0]) + max_abs(s.v[1]) > 0 || bool(cfg_.forcing_v);
  if (flow) {
    Velocity Nv{Field(N, 0.0), Field(N, 0.0)};
    if (max_abs(s.v[0]) + max_abs(s.v[1]) > 0) {
      Field a1, a2, b1, b2;
      g.gradient(s.v[0], a1, a2);
      g.gradient(s.v[1], b1, b2);
      for (size_t id = 0; id < N; ++id) {
        Nv[0][id] -= s.v[0][id] * a1[id] + s.v[1][id] * a2[id];
        Nv[1][id] -= s.v[0][id] * b1[id] + s.v[1][id] * b2[id];
      }
    }
    if (cfg_.eps0 != 0) {
      Stress F{Field(N), Field(N), Field(N)};
      for (size_t id = 0; id < N; ++id) {
        double xx = 0, xy = 0, yy = 0;
        for (int c = 0; c < 3; ++c) {
          xx += grads[2 * c][id] * grads[2 * c][id];
          xy += grads[2 * c][id] * grads[2 * c + 1][id];
          yy += grads[2 * c + 1][id] * grads[2 * c + 1][id];
        }
        F.f11[id] = 0.5 * (xx - yy);
        F.f12[id] = xy;
        F.f22[id] = 0.5 * (yy - xx);
      }
      auto dF = stress_divergence(g, F);
      for (int k = 0; k < 2; ++k)
        for (size_t id = 0; id < N; ++id) Nv[k][id] -= cfg_.eps0 * dF[k][id];
    }
    if (cfg_.forcing_v)
      for (size_t id = 0; id < N; ++id) {
        const Vec2 f = cfg_.forcing_v(g.node(id), t1);
        Nv[0][id] += f[0];
        Nv[1][id] += f[1];
      }
    Spectrum v1 = g.forward(s.v[0]), v2 = g.forward(s.v[1]);
    Spectrum n1 = g.forward(Nv[0]), n2 = g.forward(Nv[1]);
    g.truncate(n1, cfg_.dealias);
    g.truncate(n2, cfg_.dealias);
    weights(cfg_.viscosity, E, P);
    for (size_t id = 0; id < g.spec_size(); ++id) {
      v1[id] = E[id] * v1[id] + dt * P[id] * n1[id];
      v2[id] = E[id] * v2[id] + dt * P[id] * n2[id];
    }
    g.leray(v1, v2);
    s.v[0] = g.inverse(v1);
    s.v[1] = g.inverse(v2);
  }

  // (ii) transport by v: semi-Lagrangian with departure point x - dt v(x)
  const bool moving = max_abs(s.v[0]) + max_abs(s.v[1]) > 0;
  std::array<Field, 6> moved;
  if (moving) {
    Director u0 = s.u;
    const double L = g.L();
    for (size_t id = 0; id < N; ++id) {
      const Vec2 x = g.node(id);
      double xd = x[0] - dt * s.v[0][id], yd = x[1] - dt * s.v[1][id];
      xd -= L * std::floor(xd / L);
      yd -= L * std::floor(yd / L);
      for (int c = 0; c < 3; ++c) s.u[c][id] = interp(u0[c], n, g.h(), xd, yd);
    }
    for (size_t id = 0; id < N; ++id) {
      const double m = std::sqrt(s.u[0][id] * s.u[0][id] + s.u[1][id] * s.u[1][id] + s.u[2][id] * s.u[2][id]);
      for (int c = 0; c < 3; ++c) s.u[c][id] /= m;
    }
    moved = director_gradients(s.u);
  }
  const auto& D = moving ? moved : grads;

  // (iii) heat flow with the |grad u|^2 u term
  weights(1.0, E, P);
  Field G2(N);
  for (size_t id = 0; id < N; ++id) {
    double a = 0;
    for (int k = 0; k < 6; ++k) a += D[k][id] * D[k][id];
    G2[id] = a;
  }
  for (int c = 0; c < 3; ++c) {
    Field nl(N);
    for (size_t id = 0; id < N; ++id) nl[id] = G2[id] * s.u[c][id];
    if (cfg_.forcing_u)
      for (size_t id = 0; id < N; ++id) nl[id] += cfg_.forcing_u(g.node(id), t1)[c];
    Spectrum uh = g.forward(s.u[c]), nh_ = g.forward(nl);
    g.truncate(nh_, cfg_.dealias);
    for (size_t id = 0; id < g.spec_size(); ++id) uh[id] = E[id] * uh[id] + dt * P[id] * nh_[id];
    s.u[c] = g.inverse(uh);
  }

  // (iv) renormalization
  double dev = 0;
  for (size_t id = 0; id < N; ++id) {
    const double m = std::sqrt(s.u[0][id] * s.u[0][id] + s.u[1][id] * s.u[1][id] + s.u[2][id] * s.u[2][id]);
    dev = std::max(dev, std::abs(m - 1));
    for (int c = 0; c < 3; ++c) s.u[c][id] /= m;
  }
  s.renorm_deviation = dev;
  s.t = t1;
  require(dev <= cfg_.renorm_limit, ErrorKind::Resolution,
          "step: renormalization amplitude " + std::to_string(dev) + " exceeds the limit (blow-up under-resolved)");
}

// ---- stress and energy --------------------------------------------------------

Stress ericksen_stress(const PeriodicGrid& g, const Director& u) {
  const size_t N = g.size();
  Stress F{Field(N, 0.0), Field(N, 0.0), Field(N, 0.0)};
  Field gx, gy;
  for (int c = 0; c < 3; ++c) {
    g.gradient(u[c], gx, gy);
    for (size_t id = 0; id < N; ++id) {
      F.f11[id] += 0.5 * (gx[id] * gx[id] - gy[id] * gy[id]);
      F.f12[id] += gx[id] * gy[id];
      F.f22[id] += 0.5 * (gy[id] * gy[id] - gx[id] * gx[id]);
    }
  }
  return F;
}

Velocity stress_divergence(const PeriodicGrid& g, const Stress& F) {
  return {g.divergence(F.f11, F.f12), g.divergence(F.f12, F.f22)};
}

double potential_residual(const PeriodicGrid& g, const Director& u) {
  auto d = stress_divergence(g, ericksen_stress(g, u));
  const double full = std::hypot(l2_norm(d[0], g.h()), l2_norm(d[1], g.h()));
  if (full == 0) return 0;
  g.leray(d[0], d[1]);
  return std::hypot(l2_norm(d[0], g.h()), l2_norm(d[1], g.h())) / full;
}

namespace {

Field gradient_density(const PeriodicGrid& g, const Director& u) {
  Field e(g.size(), 0.0), gx, gy;
  for (int c = 0; c < 3; ++c) {
    g.gradient(u[c], gx, gy);
    for (size_t id = 0; id < g.size(); ++id) e[id] += gx[id] * gx[id] + gy[id] * gy[id];
  }
  return e;
}

}  // namespace

double grid_energy(const PeriodicGrid& g, const Director& u) {
  double s = 0;
  for (double v : gradient_density(g, u)) s += v;
  return s * g.h() * g.h();
}

double energy_concentration(const PeriodicGrid& g, const Director& u, double delta, const Vec2& q) {
  require(delta > g.h(), ErrorKind::Domain, "energy_concentration: delta below the grid scale");
  const auto e = gradient_density(g, u);
  double s = 0;
  for (size_t id = 0; id < g.size(); ++id)
    if (wrap(g.node(id) - q, g.L()).norm() <= delta) s += e[id];
  return s * g.h() * g.h();
}

// ---- blow-up tracking -----------------------------------------------------------

ScaleEstimate measure_scale(const PeriodicGrid& g, const Field& u3, const Vec2& guess, double search_radius) {
  ScaleEstimate est;
  const int n = g.n();
  const double h = g.h(), L = g.L();
  double best = 2;
  size_t arg = 0;
  for (size_t id = 0; id < g.size(); ++id)
    if (wrap(g.node(id) - guess, L).norm() <= search_radius && u3[id] < best) {
      best = u3[id];
      arg = id;
    }
  if (best >= 0) return est;
  est.xi = g.node(arg);
  const int rays = 16;
  double sum = 0;
  int hits = 0;
  const double dr = 0.25 * h;
  for (int k = 0; k < rays; ++k) {
    const Vec2 e(std::cos(2 * kPi * k / rays), std::sin(2 * kPi * k / rays));
    double prev = best, r_prev = 0;
    for (double r = dr; r < 0.5 * L; r += dr) {
      const Vec2 p = est.xi + r * e;
      const double v = bilinear(u3, n, h, p[0], p[1]);
      if (v >= 0) {
        sum += r_prev + (r - r_prev) * (-prev) / (v - prev);
        ++hits;
        break;
      }
      prev = v;
      r_prev = r;
    }
  }
  if (hits == rays) {
    est.lambda = sum / hits;
    est.found = true;
  }
  return est;
}

std::string BlowupDiagnostics::to_json() const {
  nlohmann::json j;
  j["blowup_detected"] = blowup_detected;
  j["message"] = message;
  j["fit_window"] = {{"lambda_lo", lambda_lo}, {"lambda_hi", lambda_hi}, {"points", window_points}};
  j["T_hat"] = T_hat;
  j["kappa_hat"] = kappa_hat;
  j["rate_variation"] = rate_variation;
  j["velocity_fit"] = {{"c_hat", v_c_hat}, {"nu_hat", v_nu_hat}};
  auto& s = j["series"];
  s = nlohmann::json::array();
  for (auto& p : series)
    s.push_back({{"t", p.t}, {"lambda", p.lambda}, {"xi", {p.xi[0], p.xi[1]}}, {"energy", p.energy},
                 {"energy_ball", p.energy_ball}, {"max_v", p.max_v}, {"renorm_deviation", p.renorm_deviation}});
  return j.dump(2);
}

BlowupDiagnostics track_blowup(const std::vector<Snapshot>& history, double lambda_lo, double lambda_hi) {
  BlowupDiagnostics d;
  d.series = history;
  d.lambda_lo = lambda_lo;
  d.lambda_hi = lambda_hi;
  if (history.size() < 10) {
    d.message = "fewer than 10 snapshots";
    return d;
  }
  for (auto& s : history) require(s.lambda > 0, ErrorKind::Contract, "track_blowup: non-positive scale");
  if (history.back().lambda > 0.9 * history.front().lambda) {
    d.message = "no blow-up in window";
    return d;
  }
  std::vector<double> t, l;
  for (auto& s : history)
    if (s.lambda >= lambda_lo && s.lambda <= lambda_hi) {
      t.push_back(s.t);
      l.push_back(s.lambda);
    }
  d.window_points = t.size();
  if (t.size() < 5) {
    d.message = "fewer than 5 snapshots in the fit window";
    return d;
  }
  // y = log lambda - log s + 2 log|log s| should be constant; scan T_hat on a log grid of T_hat - t_last
  auto residual = [&](double Th, double* mean) {
    double m = 0;
    std::vector<double> y(t.size());
    for (size_t k = 0; k < t.size(); ++k) {
      const double s = Th - t[k];
      y[k] = std::log(l[k]) - std::log(s) + 2 * std::log(std::abs(std::log(s)));
      m += y[k];
    }
    m /= double(y.size());
    double r = 0;
    for (double v : y) r += (v - m) * (v - m);
    if (mean) *mean = m;
    return r;
  };
  const double span = t.back() - t.front();
  const double s_hi = std::min(0.99 - (t.back() - t.front()), 1e3 * span);
  double best = INFINITY, Th = 0;
  if (s_hi > 1e-6 * span) {
    for (int k = 0; k <= 4000; ++k) {
      const double s = 1e-6 * span * std::pow(s_hi / (1e-6 * span), k / 4000.0);
      const double r = residual(t.back() + s, nullptr);
      if (r < best) {
        best = r;
        Th = t.back() + s;
      }
    }
  }
  if (std::isfinite(best)) {
    // golden-section polish on log(T_hat - t_last) around the grid minimum
    const double step = std::log(s_hi / (1e-6 * span)) / 4000.0;
    double a = std::log(Th - t.back()) - step, b = a + 2 * step;
    const double gr = 0.5 * (std::sqrt(5.0) - 1);
    auto f = [&](double z) { return residual(t.back() + std::exp(z), nullptr); };
    double c1 = b - gr * (b - a), c2 = a + gr * (b - a), f1 = f(c1), f2 = f(c2);
    for (int it = 0; it < 60; ++it) {
      if (f1 < f2) {
        b = c2, c2 = c1, f2 = f1, c1 = b - gr * (b - a), f1 = f(c1);
      } else {
        a = c1, c1 = c2, f1 = f2, c2 = a + gr * (b - a), f2 = f(c2);
      }
    }
    const double z = 0.5 * (a + b);
    if (f(z) < best) Th = t.back() + std::exp(z);
  }
  if (!std::isfinite(best)) {
    d.message = "rate fit failed";
    return d;
  }
  double m = 0;
  residual(Th, &m);
  d.T_hat = Th;
  d.kappa_hat = std::exp(m);
  double cmin = INFINITY, cmax = 0;
  for (size_t k = 0; k < t.size(); ++k) {
    const double s = Th - t[k], c = l[k] * std::pow(std::log(s), 2) / s;
    cmin = std::min(cmin, c);
    cmax = std::max(cmax, c);
  }
  d.rate_variation = cmax / cmin - 1;
  d.blowup_detected = true;
  d.message = "ok";

  // max|v| ~ c lambda^{nu-1}
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (auto& s : history)
    if (s.max_v > 0) {
      const double x = std::log(s.lambda), y = std::log(s.max_v);
      sx += x, sy += y, sxx += x * x, sxy += x * y;
      ++cnt;
    }
  if (cnt >= 3 && cnt * sxx - sx * sx > 0) {
    const double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    d.v_nu_hat = slope + 1;
    d.v_c_hat = std::exp((sy - slope * sx) / cnt);
  }
  return d;
}

std::string BlowupRun::to_json() const {
  nlohmann::json j = nlohmann::json::parse(diagnostics.to_json());
  j["steps"] = steps;
  j["max_energy_increase"] = max_energy_increase;
  j["max_velocity"] = max_velocity;
  j["final_energy_ball"] = final_energy_ball;
  j["final_lambda"] = final_lambda;
  return j.dump(2);
}

BlowupRun run_blowup(const Simulator& sim, const BlowupRunOptions& opt) {
  const auto& g = sim.grid();
  require(!sim.config().bubbles.empty(), ErrorKind::Config, "run_blowup: no bubble");
  BlowupRun run;
  SimState s = sim.build_ansatz();
  Vec2 guess = sim.config().bubbles.front().q;
  const double lo = opt.min_cells * g.h(), hi = opt.max_cells * g.h();

  auto snap = [&](const ScaleEstimate& e) {
    Snapshot p;
    p.t = s.t;
    p.lambda = e.lambda;
    p.xi = e.xi;
    p.energy = grid_energy(g, s.u);
    const double delta = opt.ball_factor * e.lambda;
    p.energy_ball = delta > g.h() ? energy_concentration(g, s.u, delta, e.xi) : 0.0;
    for (size_t id = 0; id < g.size(); ++id) p.max_v = std::max(p.max_v, std::hypot(s.v[0][id], s.v[1][id]));
    p.renorm_deviation = s.renorm_deviation;
    if (!run.snapshots.empty()) {
      const double prev = run.snapshots.back().energy;
      if (prev > 0) run.max_energy_increase = std::max(run.max_energy_increase, (p.energy - prev) / prev);
    }
    run.max_velocity = std::max(run.max_velocity, p.max_v);
    run.snapshots.push_back(p);
    if (p.lambda >= lo) {
      run.final_energy_ball = p.energy_ball;
      run.final_lambda = p.lambda;
    }
  };

  auto e = measure_scale(g, s.u[2], guess, opt.search_radius);
  require(e.found, ErrorKind::Config, "run_blowup: no bubble core found in the initial data");
  snap(e);
  double t_last = s.t, l_last = e.lambda;
  while (s.t < opt.t_max) {
    sim.step_adaptive(s, opt.t_max - s.t);
    ++run.steps;
    e = measure_scale(g, s.u[2], guess, opt.search_radius);
    if (!e.found) break;
    guess = e.xi;
    const bool small = e.lambda < lo;
    if (small || s.t - t_last >= opt.snapshot_dt || e.lambda <= (1 - opt.snapshot_shrink) * l_last) {
      snap(e);
      t_last = s.t;
      l_last = e.lambda;
    }
    if (small) break;
  }
  run.final_state = s;
  run.diagnostics = track_blowup(run.snapshots, lo, hi);
  return run;
}

// ---- checkpoints ----------------------------------------------------------------

namespace {
constexpr char kMagic[8] = {'L', 'A', 'B', 'S', 'I', 'M', '0', '1'};
}

void save_checkpoint(const Simulator& sim, const SimState& s, const std::string& path) {
  const auto& g = sim.grid();
  std::ofstream f(path, std::ios::binary);
  require(bool(f), ErrorKind::Io, "cannot open " + path);
  f.write(kMagic, 8);
  const int32_t n = g.n();
  const double hdr[3] = {g.L(), s.t, s.renorm_deviation};
  f.write(reinterpret_cast<const char*>(&n), sizeof n);
  f.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
  for (auto& c : s.u) f.write(reinterpret_cast<const char*>(c.data()), std::streamsize(c.size() * sizeof(double)));
  for (auto& c : s.v) f.write(reinterpret_cast<const char*>(c.data()), std::streamsize(c.size() * sizeof(double)));
  require(bool(f), ErrorKind::Io, "write failed: " + path);
  nlohmann::json m{{"format", "labsim"}, {"version", 1}, {"n", n}, {"L", g.L()}, {"t", s.t},
                   {"eps0", sim.config().eps0}, {"fields", {"u1", "u2", "u3", "v1", "v2"}}};
  std::ofstream mf(path + ".json");
  require(bool(mf), ErrorKind::Io, "cannot open " + path + ".json");
  mf << m.dump(2) << '\n';
}

SimState load_checkpoint(const Simulator& sim, const std::string& path) {
  const auto& g = sim.grid();
  std::ifstream f(path, std::ios::binary);
  require(bool(f), ErrorKind::Io, "cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  require(bool(f) && std::memcmp(magic, kMagic, 8) == 0, ErrorKind::Io, "not a simulator checkpoint: " + path);
  int32_t n = 0;
  double hdr[3];
  f.read(reinterpret_cast<char*>(&n), sizeof n);
  f.read(reinterpret_cast<char*>(hdr), sizeof hdr);
  require(bool(f) && n == g.n() && hdr[0] == g.L(), ErrorKind::Config, "checkpoint grid does not match the simulator");
  SimState s;
  s.t = hdr[1];
  s.renorm_deviation = hdr[2];
  for (auto& c : s.u) {
    c.resize(g.size());
    f.read(reinterpret_cast<char*>(c.data()), std::streamsize(c.size() * sizeof(double)));
  }
  for (auto& c : s.v) {
    c.resize(g.size());
    f.read(reinterpret_cast<char*>(c.data()), std::streamsize(c.size() * sizeof(double)));
  }
  require(bool(f), ErrorKind::Io, "truncated checkpoint: " + path);
  return s;
}

void write_fields_csv(const PeriodicGrid& g, const SimState& s, const std::string& path) {
  std::ofstream f(path);
  require(bool(f), ErrorKind::Io, "cannot open " + path);
  f.precision(12);
  f << "x1,x2,u1,u2,u3,v1,v2\n";
  for (size_t id = 0; id < g.size(); ++id) {
    const Vec2 x = g.node(id);
    f << x[0] << ',' << x[1] << ',' << s.u[0][id] << ',' << s.u[1][id] << ',' << s.u[2][id] << ',' << s.v[0][id] << ','
      << s.v[1][id] << '\n';
  }
}

}  // namespace lab
