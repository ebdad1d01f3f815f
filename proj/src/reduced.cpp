#include "lab/reduced.hpp"

#include <Eigen/Dense>
#include <boost/math/special_functions/expint.hpp>
#include <cmath>

#include "lab/quadrature.hpp"

namespace lab {

// ---- orthogonality integrals --------------------------------------------

namespace {

// int_0^{rmax} a(rho) rho drho from nodal values, trapezoid in the grid variable
double radial_integral(const PolarGrid& g, const std::vector<double>& a, double rmax) {
  const auto& rho = g.rho();
  const bool geo = g.spec().spacing == Spacing::Geometric;
  auto f = [&](size_t i) { return geo ? a[i] * rho[i] * rho[i] : a[i] * rho[i]; };
  auto var = [&](double r) { return geo ? std::log(r) : r; };
  double acc = 0.5 * a[0] * rho[0] * rho[0];  // [0, rho_min] with a ~ const
  for (size_t i = 0; i + 1 < rho.size(); ++i) {
    if (rho[i] >= rmax) break;
    double x0 = var(rho[i]), x1 = var(rho[i + 1]);
    if (rho[i + 1] <= rmax) {
      acc += 0.5 * (f(i) + f(i + 1)) * (x1 - x0);
    } else {
      double xe = var(rmax), th = (xe - x0) / (x1 - x0);
      double fe = f(i) + th * (f(i + 1) - f(i));
      acc += 0.5 * (f(i) + fe) * (xe - x0);
    }
  }
  return acc;
}

void require_cover(const PolarGrid& g, double R) {
  require(R > 0, ErrorKind::Domain, "orthogonality integral: R must be positive");
  if (g.rho().back() < 2 * R * (1 - 1e-12))
    fail(ErrorKind::Resolution, "orthogonality integral: grid ends at rho=" + std::to_string(g.rho().back()) +
                                    " but the ball needs 2R=" + std::to_string(2 * R));
}

double kernel_sq_radial(int k, double rho) {
  double w = eval_polar_profile(rho).w_rho, w2 = w * w;
  switch (k) {
    case 0: return rho * rho * w2;
    case 1: return w2;
    case -1: return rho * rho * rho * rho * w2;
  }
  fail(ErrorKind::Domain, "kernel mode must be -1, 0 or 1");
}

double logterm(double R) { return std::log(4 * R * R + 1); }

}  // namespace

double orthogonality_integral(const PolarGridField& h, int k, int j, double R) {
  const auto& g = h.grid;
  require_cover(g, R);
  std::vector<double> a(g.n_rho());
  for (int i = 0; i < g.n_rho(); ++i) {
    double acc = 0;
    for (int m = 0; m < g.n_theta(); ++m) acc += h.at(i, m).dot(eval_kernel(k, j, {g.rho()[i], g.theta()[m]}));
    a[i] = acc * g.dtheta();
  }
  return radial_integral(g, a, 2 * R);
}

double chi_kernel_norm(int k, int j, double R) {
  (void)j;  // |Z_{k,1}| = |Z_{k,2}|
  auto f = [k](double r) {
    double w = eval_polar_profile(r).w_rho;
    return 2 * kPi * r * w * w * kernel_sq_radial(k, r);
  };
  return quad::gk(f, 0.0, 2 * R, 1e-13).value;
}

PolarGridField hbar_projection(const PolarGridField& h, int k, double R) {
  PolarGridField out{h.grid, std::vector<Vec3>(h.values.size(), Vec3::Zero())};
  const auto& g = h.grid;
  for (int j = 1; j <= 2; ++j) {
    double c = orthogonality_integral(h, k, j, R) / chi_kernel_norm(k, j, R);
    for (int i = 0; i < g.n_rho(); ++i) {
      double rho = g.rho()[i];
      if (rho >= 2 * R) continue;
      double w = eval_polar_profile(rho).w_rho;
      for (int m = 0; m < g.n_theta(); ++m) out.at(i, m) += c * w * w * eval_kernel(k, j, {rho, g.theta()[m]});
    }
  }
  return out;
}

double rm1_projection_mode0_j1(double R, const ParamState& s) {
  const double a = s.alpha, b = s.beta;
  return kPi * (-16 * R * R / (4 * R * R + 1) + 4 * logterm(R)) *
         (s.domega * a * std::cos(a) * std::sin(b) - a * s.dalpha * std::cos(b) - s.domega * b * std::sin(a) -
          b * s.dbeta);
}

double rm1_projection_mode0_j2(double R, const ParamState& s) {
  return kPi * (-16 * R * R / (4 * R * R + 1) + 4 * logterm(R)) * s.dalpha * std::sin(s.beta);
}

double rm1_projection_mode1_j1(double R, const ParamState& s) {
  const double a = s.alpha, b = s.beta;
  return 8 * kPi * R * R / (4 * R * R + 1) *
         (s.domega * a * std::cos(a) * std::cos(b) + s.dalpha * a * std::sin(b) - s.domega * std::sin(a) + s.dbeta);
}

double rm1_projection_mode1_j2(double R, const ParamState& s) {
  const double a = s.alpha, b = s.beta;
  return -8 * kPi * R * R / (4 * R * R + 1) *
         (s.dalpha - s.domega * b * std::cos(a) * std::cos(b) - s.dalpha * b * std::sin(b) +
          s.domega * std::cos(a) * std::sin(b));
}

double rm1_projection_modem1_j1(double R, const ParamState& s) {
  const double a = s.alpha, b = s.beta, R2 = R * R;
  return 4 * kPi * (-4 * R2 * (2 * R2 + 1) / (4 * R2 + 1) + logterm(R)) *
         (-s.dbeta - s.domega * std::sin(a) + s.domega * a * std::cos(a) * std::cos(b) + s.dalpha * a * std::sin(b));
}

double rm1_projection_modem1_j2(double R, const ParamState& s) {
  const double a = s.alpha, b = s.beta, R2 = R * R;
  return 4 * kPi * (4 * R2 * (2 * R2 + 1) / (4 * R2 + 1) - logterm(R)) *
         (s.dalpha * (1 - b * std::sin(b) - 2 * std::cos(b)) + s.domega * std::cos(a) * (std::sin(b) - b * std::cos(b)));
}

// ---- a0* ------------------------------------------------------------------------

ReducedRHS reduced_rhs_a0(const std::function<Vec2(const Vec2&)>& psi, const Vec2& q, double h) {
  Mat2 J;
  for (int j = 0; j < 2; ++j) {
    Vec2 e = Vec2::Zero();
    e[j] = h;
    J.col(j) = (-psi(q + 2 * e) + 8 * psi(q + e) - 8 * psi(q - e) + psi(q - 2 * e)) / (12 * h);
  }
  cplx a0(J(0, 0) + J(1, 1), J(1, 0) - J(0, 1));
  if (!(a0.real() < 0))
    fail(ErrorKind::Assumption, "reduced_rhs_a0: div psi*(q) = " + std::to_string(a0.real()) +
                                    " is not negative; the construction needs div psi*(q) < 0");
  return {a0, std::arg(-a0)};
}

// ---- nonlocal equation -------------------------------------------------------

namespace {

// int_0^u dv / log^2 v = li(u) - u / log u, for 0 < u < 1
double inv_log2_integral(double u) {
  double L = std::log(u);
  double li = -boost::math::expint(1, -L);  // li(u) = Ei(log u) = -E1(-log u)
  return li - u / L;
}

// weights of int_{a}^{b'} phi(s)/(t-s) ds against the two hat functions of [a,b], in distances
// to t: da = t - a, db = t - b, dc = t - b' (all positive, dc <= da)
std::pair<double, double> piece_weights(double da, double db, double dc) {
  const double len = da - db;  // b - a
  const double part = da - dc;  // b' - a
  const double L = std::log(da / dc);
  // hat at a: (b-s)/(b-a) = ((t-s) - (t-b))/(b-a); hat at b: (s-a)/(b-a) = ((t-a) - (t-s))/(b-a)
  return {(part - db * L) / len, (da * L - part) / len};
}

struct Grid {
  std::vector<double> u;  // T - t at the nodes, decreasing from 2T
};

// lambda at the nodes from nodal lambda' (piecewise linear) and the log tail past the last node
std::vector<double> lambda_from_rate(const std::vector<double>& u, const std::vector<double>& d) {
  const size_t n = u.size();
  std::vector<double> lam(n);
  const double LN = std::log(u[n - 1]);
  const double kN = -d[n - 1] * LN * LN;
  lam[n - 1] = kN * inv_log2_integral(u[n - 1]);
  for (size_t i = n - 1; i-- > 0;) lam[i] = lam[i + 1] - 0.5 * (d[i] + d[i + 1]) * (u[i] - u[i + 1]);
  return lam;
}

// int_{-T}^{t - lam_t^2} lambda'/(t-s) ds with t given through ut = T - t, using nodal data on [u_0, u_last]
double lhs_at(const std::vector<double>& u, const std::vector<double>& d, double ut, double lam_t) {
  const double uc = ut + lam_t * lam_t;  // T - cutoff
  double acc = 0;
  for (size_t j = 0; j + 1 < u.size(); ++j) {
    if (u[j] <= uc) break;
    double da = u[j] - ut, db = u[j + 1] - ut;
    double dc = std::max(db, lam_t * lam_t);
    auto [wa, wb] = piece_weights(da, db, dc);
    acc += wa * d[j] + wb * d[j + 1];
  }
  return acc;
}

}  // namespace

IntegroSolution solve_lambda_integro(cplx a0_star, double T, const IntegroOptions& opt) {
  require(a0_star.real() < 0, ErrorKind::Assumption, "solve_lambda_integro: Re a0* must be negative");
  require(T > 0 && T < 0.5, ErrorKind::Domain, "solve_lambda_integro: need 0 < T < 1/2");
  require(opt.ratio > 0 && opt.ratio < 1, ErrorKind::Config, "solve_lambda_integro: ratio must lie in (0,1)");
  const double A = std::abs(a0_star);

  std::vector<double> u;
  for (double v = 2 * T; v >= opt.t_end_rel * T; v *= opt.ratio) u.push_back(v);
  const int n = static_cast<int>(u.size());
  require(n >= 4, ErrorKind::Config, "solve_lambda_integro: time grid too short");

  // initial guess from the leading-order law
  std::vector<double> lam(n), d(n);
  const double norm = A * std::abs(std::log(2 * T)) / std::abs(std::log(T));
  for (int i = 0; i < n; ++i) lam[i] = norm * lambda_star(T - u[i], T);

  IntegroSolution sol;
  double change = 1;
  int it = 0;
  for (; it < opt.max_iter && change > opt.tol; ++it) {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Constant(n, -A);
    M(0, 0) = 1;
    M(0, 1) = -1;
    rhs[0] = 0;
    for (int i = 1; i < n; ++i) {
      const double uc = u[i] + lam[i] * lam[i];
      for (int j = 0; j < i; ++j) {
        if (u[j] <= uc) break;
        double da = u[j] - u[i], db = u[j + 1] - u[i];
        double dc = std::max(db, lam[i] * lam[i]);
        auto [wa, wb] = piece_weights(da, db, dc);
        M(i, j) += wa;
        M(i, j + 1) += wb;
      }
    }
    Eigen::VectorXd sol_d = M.partialPivLu().solve(rhs);
    if (!sol_d.allFinite()) fail(ErrorKind::Numerical, "solve_lambda_integro: collocation system is singular");
    for (int i = 0; i < n; ++i) d[i] = sol_d[i];
    auto lam_new = lambda_from_rate(u, d);
    change = 0;
    for (int i = 0; i < n; ++i) change = std::max(change, std::abs(lam_new[i] - lam[i]) / std::abs(lam_new[i]));
    lam = lam_new;
  }
  if (change > opt.tol)
    fail(ErrorKind::Numerical, "solve_lambda_integro: cutoff iteration did not settle (last relative change " +
                                   std::to_string(change) + ")");

  sol.iterations = it;
  for (int i = 0; i < n; ++i) {
    sol.t.push_back(T - u[i]);
    sol.lambda.push_back(lam[i]);
    sol.dlambda.push_back(d[i]);
  }
  for (int i = 0; i + 1 < n; ++i) {
    double um = std::sqrt(u[i] * u[i + 1]);
    // lambda at the midpoint: lambda(t_{i+1}) minus the integral of the linear rate over [t_m, t_{i+1}]
    double th = (u[i] - um) / (u[i] - u[i + 1]);
    double dm = d[i] + th * (d[i + 1] - d[i]);
    double lm = lam[i + 1] - 0.5 * (dm + d[i + 1]) * (um - u[i + 1]);
    double r = (lhs_at(u, d, um, lm) + A) / A;
    sol.t_mid.push_back(T - um);
    sol.residual_mid.push_back(r);
    if (T - um >= 0) sol.max_residual = std::max(sol.max_residual, std::abs(r));
  }
  // kappa from the rate at t = T(1 - kappa_match_rel)
  const double uk = opt.kappa_match_rel * T;
  require(uk <= u.front() && uk >= u.back(), ErrorKind::Config, "solve_lambda_integro: kappa match point off grid");
  int i = 0;
  while (u[i + 1] > uk) ++i;
  double th = (u[i] - uk) / (u[i] - u[i + 1]);
  double dk = d[i] + th * (d[i + 1] - d[i]);
  sol.kappa = -dk * std::log(uk) * std::log(uk);
  return sol;
}

double integro_lhs(const IntegroSolution& sol, double T, double t) {
  const size_t n = sol.t.size();
  std::vector<double> u(n);
  for (size_t i = 0; i < n; ++i) u[i] = T - sol.t[i];
  const double ut = T - t;
  require(ut >= u.back() && ut <= u.front(), ErrorKind::Domain, "integro_lhs: t outside the solution grid");
  size_t i = 0;
  while (i + 2 < n && u[i + 1] > ut) ++i;
  double th = (u[i] - ut) / (u[i] - u[i + 1]);
  double dt = sol.dlambda[i] + th * (sol.dlambda[i + 1] - sol.dlambda[i]);
  double lt = sol.lambda[i + 1] - 0.5 * (dt + sol.dlambda[i + 1]) * (ut - u[i + 1]);
  return lhs_at(u, sol.dlambda, ut, lt);
}

double upsilon(double kappa, double T, double t) {
  const double ut = T - t;
  require(ut > 0 && ut < 1, ErrorKind::Domain, "upsilon: need 0 < T - t < 1");
  // int_{-T}^t lambda'(s)/(T-s) ds with v = log(T-s)
  auto f = [kappa](double v) { return -kappa / (v * v); };
  double I = quad::gk(f, std::log(ut), std::log(2 * T), 1e-14).value;
  double L = std::log(ut);
  return I + kappa / L;
}

double integro_lhs_ansatz(double kappa, double T, double t) {
  const double ut = T - t;
  require(ut > 0 && ut < T, ErrorKind::Domain, "integro_lhs_ansatz: need 0 < T - t < T");
  const double lam = kappa * inv_log2_integral(ut);
  // s ranges over [-T, t - lam^2]; with x = log((T-s) - ut) = log(t - s)
  auto f = [&](double x) {
    double us = ut + std::exp(x);
    double L = std::log(us);
    return -kappa / (L * L);
  };
  return quad::gk(f, std::log(lam * lam), std::log(2 * T - ut), 1e-13).value;
}

// ---- tilt angles ---------------------------------------------------------------------

AlphaBetaTrack leading_alpha_beta(double c1, double c2, double T, const ExponentSet& e, double win_lo,
                                  double win_hi, int n) {
  require(T > 0 && T < 1, ErrorKind::Domain, "leading_alpha_beta: need 0 < T < 1");
  require(win_lo > 0 && win_lo < win_hi && win_hi < 1 && n >= 3, ErrorKind::Config,
          "leading_alpha_beta: bad fitting window");
  const double g = e.gamma_star;
  // leading balance: |alpha'|, |beta'| = |c| / (8 pi lambda R^2); log R is dropped and reported
  AlphaBetaTrack out;
  std::vector<double> lu(n), lr(n);
  for (int i = 0; i < n; ++i) {
    double u = T * win_lo * std::pow(win_hi / win_lo, double(i) / (n - 1));
    double Lu = std::log(u);
    double l = std::abs(std::log(T)) * u / (Lu * Lu);
    double logR = -g * std::log(l), R2 = std::exp(2 * logR);
    lu[i] = Lu;
    lr[i] = -std::log(8 * kPi * l * R2);
    out.dropped_rel = std::max(out.dropped_rel, logR / R2);
  }
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) mx += lu[i] / n, my += lr[i] / n;
  double sxy = 0, sxx = 0;
  for (int i = 0; i < n; ++i) sxy += (lu[i] - mx) * (lr[i] - my), sxx += (lu[i] - mx) * (lu[i] - mx);
  const double slope = sxy / sxx;      // rate ~ K u^{slope}
  const double K = std::exp(my - slope * mx);
  const double d = slope + 1;
  // beta = c_beta u^d gives beta' = -c_beta d u^{d-1} = -c1 K u^{d-1}; alpha' = +c2 K u^{d-1}
  out.delta1 = out.delta2 = d;
  out.c_beta = c1 * K / d;
  out.c_alpha = -c2 * K / d;
  for (int i = 0; i < n; ++i) {
    double u = std::exp(lu[i]);
    out.t.push_back(T - u);
    out.alpha.push_back(out.c_alpha * std::pow(u, d));
    out.beta.push_back(out.c_beta * std::pow(u, d));
  }
  return out;
}

double moment_rho_wrho2() {
  return quad::half_line([](double r) {
           double w = eval_polar_profile(r).w_rho;
           return r * w * w;
         }, 1e-14).value;
}

double moment_cosw_rho_wrho2() {
  return quad::half_line([](double r) {
           auto p = eval_polar_profile(r);
           return p.cos_w * p.w_rho * p.w_rho * r;
         }, 1e-14).value;
}

}  // namespace lab
