#include "lab/outer.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <random>

namespace lab {

// ---- grid ---------------------------------------------------------------------

DomainGrid DomainGrid::unit_square(int n) {
  DomainGrid g;
  g.nx = g.ny = n;
  return g;
}

void DomainGrid::validate() const {
  require(nx >= 4 && ny >= 4, ErrorKind::Config, "domain grid: need at least 4 intervals per direction");
  require(Lx > 0 && Ly > 0, ErrorKind::Config, "domain grid: side lengths must be positive");
  require(delta_cut > 0, ErrorKind::Config, "domain grid: delta_cut must be positive");
  const double d = std::min({q[0], Lx - q[0], q[1], Ly - q[1]});
  require(d > 2 * delta_cut, ErrorKind::Config, "domain grid: dist(q, boundary) must exceed 2 delta_cut");
}

// ---- heat solver ----------------------------------------------------------------

namespace {

std::vector<double> step_times(const HeatOptions& opt) {
  std::vector<double> t = opt.times;
  if (t.empty()) {
    require(opt.n_steps >= 1 && opt.t1 > opt.t0, ErrorKind::Config, "heat: need t1 > t0 and n_steps >= 1");
    for (int n = 0; n <= opt.n_steps; ++n) t.push_back(opt.t0 + (opt.t1 - opt.t0) * n / opt.n_steps);
  }
  require(t.size() >= 2, ErrorKind::Config, "heat: need at least two times");
  for (size_t n = 1; n < t.size(); ++n) require(t[n] > t[n - 1], ErrorKind::Config, "heat: times must increase");
  return t;
}

}  // namespace

HeatSolution solve_heat_dirichlet(const DomainGrid& grid, const ScalarST& f, const ScalarST& g,
                                  const std::function<double(const Vec2&)>& init, const HeatOptions& opt) {
  grid.validate();
  require(bool(f) && bool(g) && bool(init), ErrorKind::Config, "heat: forcing, boundary data and initial data required");
  require(opt.store_every >= 1, ErrorKind::Config, "heat: store_every must be positive");
  const auto times = step_times(opt);
  const int nx = grid.nx, ny = grid.ny, mi = ny - 1;
  const double ax = 1 / (grid.hx() * grid.hx()), ay = 1 / (grid.hy() * grid.hy());
  auto k_of = [&](int i, int j) { return (i - 1) * mi + (j - 1); };
  const int n_int = (nx - 1) * mi;

  HeatSolution out;
  out.grid = grid;
  Eigen::VectorXd u(grid.size());
  for (int i = 0; i <= nx; ++i)
    for (int j = 0; j <= ny; ++j) u[grid.id(i, j)] = init(grid.node(i, j));
  out.t.push_back(times[0]);
  out.frames.push_back(u);

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  double dt_fact = -1;
  Eigen::VectorXd rhs(n_int), gb(grid.size());
  for (size_t n = 0; n + 1 < times.size(); ++n) {
    const double t1 = times[n + 1], dt = t1 - times[n];
    if (std::abs(dt - dt_fact) > 1e-12 * dt) {
      std::vector<Eigen::Triplet<double>> trip;
      trip.reserve(5 * n_int);
      for (int i = 1; i < nx; ++i)
        for (int j = 1; j < ny; ++j) {
          const int k = k_of(i, j);
          trip.emplace_back(k, k, 1 + 2 * dt * (ax + ay));
          if (i > 1) trip.emplace_back(k, k_of(i - 1, j), -dt * ax);
          if (i < nx - 1) trip.emplace_back(k, k_of(i + 1, j), -dt * ax);
          if (j > 1) trip.emplace_back(k, k_of(i, j - 1), -dt * ay);
          if (j < ny - 1) trip.emplace_back(k, k_of(i, j + 1), -dt * ay);
        }
      Eigen::SparseMatrix<double> A(n_int, n_int);
      A.setFromTriplets(trip.begin(), trip.end());
      solver.compute(A);
      require(solver.info() == Eigen::Success, ErrorKind::Numerical, "heat: factorization failed");
      dt_fact = dt;
    }
    for (int i = 0; i <= nx; ++i)
      for (int j = 0; j <= ny; ++j)
        if (grid.on_boundary(i, j)) gb[grid.id(i, j)] = g(grid.node(i, j), t1);
    for (int i = 1; i < nx; ++i)
      for (int j = 1; j < ny; ++j) {
        double b = u[grid.id(i, j)] + dt * f(grid.node(i, j), t1);
        if (i == 1) b += dt * ax * gb[grid.id(0, j)];
        if (i == nx - 1) b += dt * ax * gb[grid.id(nx, j)];
        if (j == 1) b += dt * ay * gb[grid.id(i, 0)];
        if (j == ny - 1) b += dt * ay * gb[grid.id(i, ny)];
        rhs[k_of(i, j)] = b;
      }
    Eigen::VectorXd w = solver.solve(rhs);
    require(solver.info() == Eigen::Success && w.allFinite(), ErrorKind::Numerical,
            "heat: solve failed or produced non-finite values");
    for (int i = 0; i <= nx; ++i)
      for (int j = 0; j <= ny; ++j) u[grid.id(i, j)] = grid.on_boundary(i, j) ? gb[grid.id(i, j)] : w[k_of(i, j)];
    if ((n + 1) % opt.store_every == 0 || n + 2 == times.size()) {
      out.t.push_back(t1);
      out.frames.push_back(u);
    }
  }
  return out;
}

// ---- weights ------------------------------------------------------------------

double OuterWeights::lambda(double t) const { return lambda_star(t, T); }
double OuterWeights::R(double t) const { return R_of(t, T, gamma_star); }

double OuterWeights::rho1(const Vec2& x, double t) const {
  const double l = lambda(t), lr = l * R(t);
  return (x - q).norm() <= 3 * lr ? std::pow(l, Theta) / lr : 0.0;
}

double OuterWeights::rho2(const Vec2& x, double t) const {
  const double l = lambda(t), r = (x - q).norm();
  return r >= l * R(t) ? std::pow(T, -sigma0) * std::pow(l, 1 - sigma0) / (r * r) : 0.0;
}

double OuterWeights::rho3() const { return std::pow(T, -sigma0); }

double weighted_rhs_norm(const std::function<Vec3(const Vec2&, double)>& f, const OuterWeights& w,
                         const std::vector<SpaceTimeSample>& samples) {
  double m = 0;
  for (auto& s : samples) m = std::max(m, f(s.x, s.t).norm() / w.total(s.x, s.t));
  return m;
}

std::vector<SpaceTimeSample> grid_samples(const DomainGrid& g, const std::vector<double>& times, int stride) {
  require(stride >= 1, ErrorKind::Config, "grid_samples: stride must be positive");
  std::vector<SpaceTimeSample> s;
  for (double t : times)
    for (int i = 0; i <= g.nx; i += stride)
      for (int j = 0; j <= g.ny; j += stride) s.push_back({g.node(i, j), t});
  return s;
}

// ---- sharp norm ------------------------------------------------------------------

double SharpNorm::total() const {
  double s = 0;
  for (double v : terms) s += v;
  return s;
}

std::string SharpNorm::to_json() const {
  nlohmann::json j{{"sup", terms[0]},          {"sup_gradient", terms[1]}, {"time_difference", terms[2]},
                   {"gradient_time_difference", terms[3]}, {"hessian", terms[4]}, {"holder", terms[5]},
                   {"total", total()}};
  return j.dump(2);
}

namespace {

// Gradients of every component at every node: second order, one-sided on the boundary.
struct FrameDerivatives {
  std::vector<Eigen::VectorXd> gx, gy;  // per component
  double hessian_sup = 0;               // interior nodes, Frobenius norm over components
};

FrameDerivatives frame_derivatives(const std::vector<const Eigen::VectorXd*>& u, const DomainGrid& g) {
  FrameDerivatives d;
  const double hx = g.hx(), hy = g.hy();
  for (auto* f : u) {
    Eigen::VectorXd gx(g.size()), gy(g.size());
    auto at = [&](int i, int j) { return (*f)[g.id(i, j)]; };
    for (int i = 0; i <= g.nx; ++i)
      for (int j = 0; j <= g.ny; ++j) {
        double dx, dy;
        if (i == 0) dx = (-3 * at(0, j) + 4 * at(1, j) - at(2, j)) / (2 * hx);
        else if (i == g.nx) dx = (3 * at(i, j) - 4 * at(i - 1, j) + at(i - 2, j)) / (2 * hx);
        else dx = (at(i + 1, j) - at(i - 1, j)) / (2 * hx);
        if (j == 0) dy = (-3 * at(i, 0) + 4 * at(i, 1) - at(i, 2)) / (2 * hy);
        else if (j == g.ny) dy = (3 * at(i, j) - 4 * at(i, j - 1) + at(i, j - 2)) / (2 * hy);
        else dy = (at(i, j + 1) - at(i, j - 1)) / (2 * hy);
        gx[g.id(i, j)] = dx;
        gy[g.id(i, j)] = dy;
      }
    d.gx.push_back(std::move(gx));
    d.gy.push_back(std::move(gy));
  }
  for (int i = 1; i < g.nx; ++i)
    for (int j = 1; j < g.ny; ++j) {
      double s = 0;
      for (auto* f : u) {
        auto at = [&](int a, int b) { return (*f)[g.id(a, b)]; };
        const double uxx = (at(i + 1, j) - 2 * at(i, j) + at(i - 1, j)) / (hx * hx);
        const double uyy = (at(i, j + 1) - 2 * at(i, j) + at(i, j - 1)) / (hy * hy);
        const double uxy = (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) + at(i - 1, j - 1)) / (4 * hx * hy);
        s += uxx * uxx + uyy * uyy + 2 * uxy * uxy;
      }
      d.hessian_sup = std::max(d.hessian_sup, std::sqrt(s));
    }
  return d;
}

double grad_diff(const FrameDerivatives& a, size_t ia, const FrameDerivatives& b, size_t ib) {
  double s = 0;
  for (size_t c = 0; c < a.gx.size(); ++c) {
    const double dx = a.gx[c][ia] - b.gx[c][ib], dy = a.gy[c][ia] - b.gy[c][ib];
    s += dx * dx + dy * dy;
  }
  return std::sqrt(s);
}

}  // namespace

SharpNorm solution_norm_sharp(const std::vector<HeatSolution>& psi, double Theta, double gamma,
                              const SharpNormOptions& opt) {
  require(!psi.empty(), ErrorKind::Config, "sharp norm: no components");
  require(gamma > 0 && gamma < 0.5, ErrorKind::Config, "sharp norm: gamma must lie in (0, 1/2)");
  require(opt.T > 0 && opt.T < 1, ErrorKind::Config, "sharp norm: need 0 < T < 1");
  const auto& g = psi[0].grid;
  const size_t nf = psi[0].frames.size();
  for (auto& p : psi)
    require(p.frames.size() == nf && p.grid.nx == g.nx && p.grid.ny == g.ny, ErrorKind::Contract,
            "sharp norm: components on different grids or time levels");
  require(nf >= 1, ErrorKind::Contract, "sharp norm: empty solution");
  const auto& t = psi[0].t;
  const double T = opt.T;
  auto lam = [&](double s) { return lambda_star(s, T); };
  auto Rr = [&](double s) { return R_of(s, T, opt.gamma_star); };

  std::vector<FrameDerivatives> D(nf);
  for (size_t n = 0; n < nf; ++n) {
    std::vector<const Eigen::VectorXd*> u;
    for (auto& p : psi) u.push_back(&p.frames[n]);
    D[n] = frame_derivatives(u, g);
  }
  auto value = [&](size_t n, size_t id) {
    double s = 0;
    for (auto& p : psi) s += p.frames[n][id] * p.frames[n][id];
    return std::sqrt(s);
  };
  auto vdiff = [&](size_t n, size_t m, size_t id) {
    double s = 0;
    for (auto& p : psi) s += std::pow(p.frames[n][id] - p.frames[m][id], 2);
    return std::sqrt(s);
  };

  SharpNorm out;
  const size_t last = nf - 1;
  const double l0 = lam(0);
  double sup = 0, gsup = 0, hsup = 0;
  for (size_t n = 0; n < nf; ++n) {
    hsup = std::max(hsup, D[n].hessian_sup);
    for (size_t id = 0; id < g.size(); ++id) {
      sup = std::max(sup, value(n, id));
      double g2 = 0;
      for (size_t c = 0; c < psi.size(); ++c) g2 += D[n].gx[c][id] * D[n].gx[c][id] + D[n].gy[c][id] * D[n].gy[c][id];
      gsup = std::max(gsup, std::sqrt(g2));
    }
  }
  out.terms[0] = std::pow(l0, -Theta) / (std::abs(std::log(T)) * l0 * Rr(0)) * sup;
  out.terms[1] = std::pow(l0, -Theta) * gsup;
  out.terms[4] = hsup;

  std::vector<size_t> active;  // frames strictly before T, excluding the stand-in for t = T
  for (size_t n = 0; n < last; ++n)
    if (t[n] < T) active.push_back(n);
  for (size_t n : active) {
    const double l = lam(t[n]);
    const double w3 = std::pow(l, -Theta - 1) / Rr(t[n]) / std::abs(std::log(T - t[n]));
    const double w4 = std::pow(l, -Theta);
    for (size_t id = 0; id < g.size(); ++id) {
      out.terms[2] = std::max(out.terms[2], w3 * vdiff(n, last, id));
      out.terms[3] = std::max(out.terms[3], w4 * grad_diff(D[n], id, D[last], id));
    }
  }

  // Hoelder quotient on seeded random admissible pairs
  if (!active.empty() && opt.holder_pairs > 0) {
    std::mt19937_64 rng(opt.seed);
    std::uniform_int_distribution<size_t> pick_frame(0, active.size() - 1);
    std::uniform_int_distribution<int> pick_i(0, g.nx), pick_j(0, g.ny);
    for (int k = 0; k < opt.holder_pairs; ++k) {
      const size_t n = active[pick_frame(rng)];
      const double l = lam(t[n]), lr = l * Rr(t[n]);
      const double dt_max = 0.25 * (T - t[n]);
      // admissible partner frames: contiguous range around n
      size_t lo = n, hi = n;
      while (lo > 0 && t[n] - t[lo - 1] < dt_max) --lo;
      while (hi + 1 < nf && t[hi + 1] - t[n] < dt_max) ++hi;
      const size_t m = std::uniform_int_distribution<size_t>(lo, hi)(rng);
      const int mx = int(std::floor(2 * lr / g.hx())), my = int(std::floor(2 * lr / g.hy()));
      const int i = pick_i(rng), j = pick_j(rng);
      const int di = std::uniform_int_distribution<int>(-mx, mx)(rng);
      const int dj = std::uniform_int_distribution<int>(-my, my)(rng);
      const int i2 = i + di, j2 = j + dj;
      if (i2 < 0 || i2 > g.nx || j2 < 0 || j2 > g.ny) continue;
      const double dx2 = std::pow(di * g.hx(), 2) + std::pow(dj * g.hy(), 2);
      if (dx2 > 4 * lr * lr) continue;
      const double dist = dx2 + std::abs(t[m] - t[n]);
      if (dist == 0) continue;
      const double q = std::pow(l, -Theta) * std::pow(lr, 2 * gamma) * grad_diff(D[n], g.id(i, j), D[m], g.id(i2, j2)) /
                       std::pow(dist, gamma);
      out.terms[5] = std::max(out.terms[5], q);
    }
  }
  return out;
}

// ---- background --------------------------------------------------------------------

BackgroundZ solve_background_Z(const std::function<Vec3(const Vec2&)>& Z0, const DomainGrid& grid,
                               const HeatOptions& opt, double div_tol) {
  require(bool(Z0), ErrorKind::Config, "background: Z0 missing");
  grid.validate();
  const double h = 1e-4 * std::min(grid.Lx, grid.Ly);
  double div = 0;
  for (int k = 0; k < 2; ++k) {
    Vec2 e = Vec2::Zero();
    e[k] = h;
    const Vec2 q = grid.q;
    div += (-Z0(q + 2 * e)[k] + 8 * Z0(q + e)[k] - 8 * Z0(q - e)[k] + Z0(q - 2 * e)[k]) / (12 * h);
  }
  require(div < -div_tol, ErrorKind::Config, "background: div z0(q) must be negative (got " + std::to_string(div) + ")");
  BackgroundZ B;
  B.div_at_q = div;
  auto zero = [](const Vec2&, double) { return 0.0; };
  for (int c = 0; c < 3; ++c)
    B.Z[c] = solve_heat_dirichlet(grid, zero, zero, [&](const Vec2& x) { return Z0(x)[c]; }, opt);
  return B;
}

// ---- outer right-hand side --------------------------------------------------------

CutoffValues cutoff_eta(double s) {
  if (s <= 1) return {1, 0, 0};
  if (s >= 2) return {0, 0, 0};
  const double u = s - 1, u2 = u * u;
  return {1 - u2 * u * (10 - 15 * u + 6 * u2), -30 * u2 * (1 - 2 * u + u2), -60 * u * (1 - 3 * u + 2 * u2)};
}

TimeField3 TimeField3::zero() {
  TimeField3 f;
  f.value = [](const Vec2&, double) { return Vec3::Zero().eval(); };
  f.jacobian = [](const Vec2&, double) { return Mat32::Zero().eval(); };
  return f;
}

Mat32 TimeField3::jac(const Vec2& x, double t, double h) const {
  if (jacobian) return jacobian(x, t);
  Mat32 J;
  for (int j = 0; j < 2; ++j) {
    Vec2 e = Vec2::Zero();
    e[j] = h;
    J.col(j) = (-value(x + 2 * e, t) + 8 * value(x + e, t) - 8 * value(x - e, t) + value(x - 2 * e, t)) / (12 * h);
  }
  return J;
}

const std::array<const char*, OuterRhs::kTerms>& OuterRhs::names() {
  static const std::array<const char*, kTerms> n{
      "cutoff_tildeL_psi", "psi_dot_U_Ut",   "cutoff_derivatives", "inner_transport",
      "outer_K",           "remainder_R1",   "nonlinear",          "corrections_dot_U_Ut",
      "drift_U",           "drift_perturbation", "drift_a"};
  return n;
}

namespace {

struct Composite {
  Vec3 A;  // eta Q phi
  Vec3 B;  // Psi* + Phi^0 + Phi^alpha + Phi^beta
  Vec3 U;
};

}  // namespace

OuterRhs assemble_outer_rhs(const OuterIngredients& in, const Vec2& x, double t) {
  require(in.track != nullptr, ErrorKind::Config, "outer rhs: parameter track missing");
  require(bool(in.phi.value), ErrorKind::Config, "outer rhs: inner solution phi missing");
  require(bool(in.psi.value), ErrorKind::Config, "outer rhs: outer field Psi* missing");
  require(bool(in.v), ErrorKind::Config, "outer rhs: velocity v missing");
  const auto& tr = *in.track;
  const ParamState s = tr.at(t);
  const double T = tr.T(), lam = s.lambda;
  const double R = R_of(t, T, in.gamma_star);
  const double Rdot = -in.gamma_star * R * lambda_star_dot(t, T) / lambda_star(t, T);
  const Mat3 Q = rotation_matrix({s.omega, s.alpha, s.beta});
  const auto [Pa, Pb] = phi_alpha_beta({s.omega, s.alpha, s.beta});

  auto eta_at = [&](const Vec2& z) { return cutoff_eta((z - s.xi()).norm() / (lam * R)).eta; };
  auto phi0_at = [&](const Vec2& z) -> Vec3 {
    if (!in.corrections) return Vec3::Zero();
    const Vec2 d = z - s.xi();
    return phi0_correction(tr, d.norm(), std::atan2(d[1], d[0]), t, in.history);
  };
  auto composite = [&](const Vec2& z) {
    Composite c;
    c.A = eta_at(z) * (Q * in.phi.value((z - s.xi()) / lam, t));
    c.B = in.psi.value(z, t);
    if (in.corrections) c.B += phi0_at(z) + Pa + Pb;
    c.U = approx_U(s, z);
    return c;
  };

  const Vec2 d = x - s.xi();
  const double r = d.norm();
  const Vec2 y = d / lam;
  const auto cut = cutoff_eta(r / (lam * R));
  const double eta = cut.eta, out_eta = 1 - eta;
  const Vec3 U = approx_U(s, x), Ut = approx_U_t(s, x);
  const Mat32 gU = approx_U_grad(s, x);
  const Vec3 psi = in.psi.value(x, t);
  const Vec3 phi = in.phi.value(y, t);
  const Mat32 Jy = in.phi.jac(y, t, 1e-4 * (1 + y.norm()));  // d/dy
  const Vec3 corr = in.corrections ? Vec3(phi0_at(x) + Pa + Pb) : Vec3::Zero();
  const Vec2 v = in.v(x, t);

  OuterRhs G;
  // 1: (1 - eta) tilde L_U[Psi*]
  if (out_eta != 0) {
    SmoothField P;
    P.value = [&](const Vec2& z) { return in.psi.value(z, t); };
    if (in.psi.jacobian) P.jacobian = [&](const Vec2& z) { return in.psi.jacobian(z, t); };
    P.fd_step = 1e-4;
    G.terms[0] = out_eta * tildeL_decomposed(P, s, x).definition;
  }
  // 2: (Psi*.U) U_t
  G.terms[1] = psi.dot(U) * Ut;
  // 3: Q(phi Lap eta + 2 grad eta . grad phi - phi d_t eta)
  if (cut.d1 != 0 || cut.d2 != 0) {
    const double lr = lam * R;
    const Vec2 xh = d / r;
    const Vec2 grad_eta = cut.d1 / lr * xh;
    const double lap_eta = cut.d2 / (lr * lr) + cut.d1 / (lr * r);
    const double sv = r / lr;
    const double ds_dt = -xh.dot(s.dxi()) / lr - sv * (s.dlambda * R + lam * Rdot) / lr;
    const Vec3 grad_dot = (Jy * grad_eta) / lam;
    G.terms[2] = Q * (phi * lap_eta + 2 * grad_dot - phi * cut.d1 * ds_dt);
  }
  // 4: eta Q(-(Q^{-1} Qdot) phi + lambda^{-1} lambdadot y.grad_y phi + lambda^{-1} xidot.grad_y phi)
  if (eta != 0)
    G.terms[3] = eta * (Q * (-q_inverse_q_dot(s) * phi + (s.dlambda / lam) * (Jy * y) + (Jy * s.dxi()) / lam));
  // 5, 6: (1 - eta)(K0 + K1 + Pi R_{-1}) - Pi tilde R_1
  const auto rem = evaluate_remainders(tr, x, t, in.history);
  if (out_eta != 0) {
    const auto K = evaluate_K(tr, y, t, in.history);
    G.terms[4] = out_eta * (K.K0() + K.K1 + project_orthogonal(rem.Rm1, U));
  }
  G.terms[5] = -project_orthogonal(rem.R1, U);

  // composite fields and their x-derivatives, shared by the nonlinear and drift terms
  const double h = 1e-3 * (lam + r);
  const bool drift = out_eta != 0 && v.norm() != 0;
  Vec3 zeta7;
  Mat32 J7, JD, Ja;
  {
    auto z7 = [](const Composite& c) { return Vec3(c.A + project_orthogonal(c.B, c.U)); };
    auto zD = [](const Composite& c) { return project_orthogonal(c.A + c.B, c.U); };
    auto ga = [&](const Composite& c) { return Vec3(correction_scalar(zD(c)) * c.U); };
    const Composite c0{eta * (Q * phi), psi + corr, U};
    zeta7 = z7(c0);
    for (int j = 0; j < 2; ++j) {
      Vec2 e = Vec2::Zero();
      e[j] = h;
      const Composite p1 = composite(x + e), p2 = composite(x + 2 * e), m1 = composite(x - e), m2 = composite(x - 2 * e);
      auto fd = [&](auto&& fn) { return Vec3((-fn(p2) + 8 * fn(p1) - 8 * fn(m1) + fn(m2)) / (12 * h)); };
      J7.col(j) = fd(z7);
      if (drift) {
        JD.col(j) = fd(zD);
        Ja.col(j) = fd(ga);
      }
    }
  }
  // 7: N_U[eta Q phi + Pi(Phi^0 + Phi^alpha + Phi^beta + Psi*)]
  {
    SmoothField Z;
    Z.value = [&](const Vec2&) { return zeta7; };
    Z.jacobian = [&](const Vec2&) { return J7; };
    G.terms[6] = evaluate_N_U(Z, s, x);
  }
  // 8: ((Phi^0 + Phi^alpha + Phi^beta).U) U_t
  G.terms[7] = corr.dot(U) * Ut;
  // 9-11: drift
  if (drift) {
    G.terms[8] = -out_eta * (gU * v);
    G.terms[9] = -out_eta * (JD * v);
    G.terms[10] = -out_eta * (Ja * v);
  }
  for (auto& term : G.terms) G.total += term;
  return G;
}

std::string OuterRhsReport::to_json() const {
  nlohmann::json j;
  for (int k = 0; k < OuterRhs::kTerms; ++k) j["terms"][OuterRhs::names()[k]] = term_norms[k];
  j["total"] = total_norm;
  return j.dump(2);
}

OuterRhsReport outer_rhs_report(const OuterIngredients& in, const OuterWeights& w,
                                const std::vector<SpaceTimeSample>& samples) {
  OuterRhsReport rep;
  for (auto& s : samples) {
    const auto G = assemble_outer_rhs(in, s.x, s.t);
    const double wt = w.total(s.x, s.t);
    for (int k = 0; k < OuterRhs::kTerms; ++k) rep.term_norms[k] = std::max(rep.term_norms[k], G.terms[k].norm() / wt);
    rep.total_norm = std::max(rep.total_norm, G.total.norm() / wt);
  }
  return rep;
}

void write_heat_csv(const HeatSolution& s, const std::string& path) {
  std::ofstream f(path);
  require(bool(f), ErrorKind::Io, "cannot open " + path);
  f.precision(12);
  f << "t,x1,x2,psi\n";
  const auto& g = s.grid;
  for (size_t n = 0; n < s.frames.size(); ++n)
    for (int i = 0; i <= g.nx; ++i)
      for (int j = 0; j <= g.ny; ++j) {
        const Vec2 x = g.node(i, j);
        f << s.t[n] << ',' << x[0] << ',' << x[1] << ',' << s.frames[n][g.id(i, j)] << '\n';
      }
}


// ---- gridded vector fields ---------------------------------------------------------------

GridField3 GridField3::from(const std::array<HeatSolution, 3>& s) {
  GridField3 f;
  f.g = s[0].grid;
  f.t = s[0].t;
  const int nx = f.g.nx, ny = f.g.ny;
  for (size_t n = 0; n < f.t.size(); ++n) {
    std::array<Eigen::VectorXd, 3> v, gx, gy;
    for (int c = 0; c < 3; ++c) {
      require(s[c].frames.size() == f.t.size(), ErrorKind::Contract, "GridField3: component frame counts differ");
      v[c] = s[c].frames[n];
      gx[c].setZero(v[c].size());
      gy[c].setZero(v[c].size());
      for (int i = 0; i <= nx; ++i)
        for (int j = 0; j <= ny; ++j) {
          const int il = std::max(i - 1, 0), ir = std::min(i + 1, nx);
          const int jl = std::max(j - 1, 0), jr = std::min(j + 1, ny);
          gx[c][f.g.id(i, j)] = (v[c][f.g.id(ir, j)] - v[c][f.g.id(il, j)]) / ((ir - il) * f.g.hx());
          gy[c][f.g.id(i, j)] = (v[c][f.g.id(i, jr)] - v[c][f.g.id(i, jl)]) / ((jr - jl) * f.g.hy());
        }
    }
    f.val.push_back(v);
    f.dx.push_back(gx);
    f.dy.push_back(gy);
  }
  return f;
}

GridField3 GridField3::zero_like(const GridField3& o) {
  GridField3 f = o;
  for (auto* a : {&f.val, &f.dx, &f.dy})
    for (auto& fr : *a)
      for (auto& c : fr) c.setZero();
  return f;
}

Vec3 GridField3::sample(const std::vector<std::array<Eigen::VectorXd, 3>>& arr, const Vec2& x, double tt) const {
  if (x[0] < 0 || x[1] < 0 || x[0] > g.Lx || x[1] > g.Ly) return Vec3::Zero();
  size_t n = 0;
  double wt = 0;
  if (tt >= t.back()) {
    n = t.size() - 1;
  } else if (tt > t.front()) {
    n = size_t(std::upper_bound(t.begin(), t.end(), tt) - t.begin()) - 1;
    wt = (tt - t[n]) / (t[n + 1] - t[n]);
  }
  const double gx = std::min(x[0] / g.hx(), g.nx - 1e-12), gy = std::min(x[1] / g.hy(), g.ny - 1e-12);
  const int i = int(gx), j = int(gy);
  const double fx = gx - i, fy = gy - j;
  auto at = [&](size_t m) {
    Vec3 r;
    for (int c = 0; c < 3; ++c) {
      const auto& v = arr[m][c];
      r[c] = (1 - fx) * ((1 - fy) * v[g.id(i, j)] + fy * v[g.id(i, j + 1)]) +
             fx * ((1 - fy) * v[g.id(i + 1, j)] + fy * v[g.id(i + 1, j + 1)]);
    }
    return r;
  };
  return wt == 0 ? at(n) : Vec3((1 - wt) * at(n) + wt * at(n + 1));
}

Vec3 GridField3::value(const Vec2& x, double tt) const { return sample(val, x, tt); }

Mat32 GridField3::jacobian(const Vec2& x, double tt) const {
  Mat32 J;
  J.col(0) = sample(dx, x, tt);
  J.col(1) = sample(dy, x, tt);
  return J;
}

double GridField3::sup() const {
  double m = 0;
  for (auto& fr : val)
    for (auto& c : fr) m = std::max(m, c.cwiseAbs().maxCoeff());
  return m;
}

double GridField3::sup_diff(const GridField3& o) const {
  require(o.val.size() == val.size(), ErrorKind::Contract, "GridField3: frame counts differ");
  double m = 0;
  for (size_t n = 0; n < val.size(); ++n)
    for (int c = 0; c < 3; ++c) m = std::max(m, (val[n][c] - o.val[n][c]).cwiseAbs().maxCoeff());
  return m;
}

}  // namespace lab
