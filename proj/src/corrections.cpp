#include "lab/corrections.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "lab/quadrature.hpp"

namespace lab {

// ---- heat factor --------------------------------------------------------

KValues heat_K(double zeta) {
  require(zeta >= 0, ErrorKind::Domain, "heat_K: negative argument");
  if (zeta < 1.0) {
    // K = 1/2 sum (-a)^n/(n+1)!, a = zeta/4; pw[n] = (-a)^n
    const double a = zeta / 4;
    double K = 0, dK = 0, d2K = 0, fact = 1;
    double pw[32];
    pw[0] = 1;
    for (int n = 1; n < 32; ++n) pw[n] = -a * pw[n - 1];
    for (int n = 0; n < 30; ++n) {
      fact *= (n + 1);
      K += pw[n] / fact;
      if (n >= 1) dK -= n * pw[n - 1] / fact;
      if (n >= 2) d2K += n * (n - 1) * pw[n - 2] / fact;
    }
    return {0.5 * K, dK / 8, d2K / 32};
  }
  const double e = std::exp(-zeta / 4);
  const double g = -std::expm1(-zeta / 4), g1 = e / 4, g2 = -e / 16;
  return {2 * g / zeta, 2 * g1 / zeta - 2 * g / (zeta * zeta),
          2 * g2 / zeta - 4 * g1 / (zeta * zeta) + 4 * g / (zeta * zeta * zeta)};
}

double heat_factor(double z, double t) {
  require(t > 0, ErrorKind::Domain, "heat_factor: time must be positive");
  require(z >= 0, ErrorKind::Domain, "heat_factor: negative length");
  return heat_K(z * z / t).K / t;
}

double heat_factor_zkz(double z, double t) {
  require(t > 0, ErrorKind::Domain, "heat_factor_zkz: time must be positive");
  double zeta = z * z / t;
  return 2 * zeta * heat_K(zeta).dK / t;
}

double heat_factor_combo(double z, double t) {
  require(t > 0, ErrorKind::Domain, "heat_factor_combo: time must be positive");
  double zeta = z * z / t;
  return -4 * zeta * zeta * heat_K(zeta).d2K / t;
}

namespace {
// kernels as functions of the lag d = t - s >= 0, with their d -> 0 limits
double k_lag(double z, double d) { return d > 0 ? heat_factor(z, d) : 2 / (z * z); }
double zkz_lag(double z, double d) { return d > 0 ? heat_factor_zkz(z, d) : -4 / (z * z); }
double combo_lag(double z, double d) { return d > 0 ? heat_factor_combo(z, d) : -16 / (z * z); }
}  // namespace

// ---- Gamma functions ----------------------------------------------------

GammaPair gamma_functions(double tau, QuadScheme scheme) {
  require(tau > 0, ErrorKind::Domain, "gamma_functions: tau must be positive");
  auto integrand = [tau](double rho, int which) {
    if (rho == 0 || rho > 1e60) return 0.0;  // integrand ~ rho^{-3} zeta-decay; overflow guard
    auto p = eval_polar_profile(rho);
    double zeta = tau * (1 + rho * rho);
    auto k = heat_K(zeta);
    double w3 = p.w_rho * p.w_rho * p.w_rho;
    double br = which == 1 ? k.K + 2 * zeta * k.dK * rho * rho / (1 + rho * rho) - 4 * p.cos_w * zeta * zeta * k.d2K
                           : k.K - zeta * zeta * k.d2K;
    return -rho * rho * rho * w3 * br;
  };
  GammaPair out{};
  // the integrand changes character at rho ~ 1 and at rho ~ tau^{-1/2}
  const double b = std::max(2.0, 10 / std::sqrt(tau));
  for (int which : {1, 2}) {
    auto f = [&](double r) { return integrand(r, which); };
    quad::Result r;
    if (scheme == QuadScheme::GaussKronrod) {
      auto a = quad::gk(f, 0.0, 1.0, 1e-13);
      auto m = quad::gk([&](double u) { return f(std::exp(u)) * std::exp(u); }, 0.0, std::log(b), 1e-13);
      auto t = quad::gk([&](double s) { return s > 0 ? f(b / s) * b / (s * s) : 0.0; }, 0.0, 1.0, 1e-13);
      r = {a.value + m.value + t.value, a.error + m.error + t.error};
    } else {
      auto a = quad::de(f, 0.0, 1.0, 1e-13);
      auto t = quad::de(f, 1.0, std::numeric_limits<double>::infinity(), 1e-13);
      r = {a.value + t.value, a.error + t.error};
    }
    if (!(r.error <= 1e-9 * std::max(1.0, std::abs(r.value))))
      fail(ErrorKind::Numerical, "gamma_functions: quadrature did not converge at tau=" + std::to_string(tau) +
                                     " (error estimate " + std::to_string(r.error) + ")");
    (which == 1 ? out.g1 : out.g2) = r.value;
  }
  return out;
}

// ---- rotations ----------------------------------------------------------

AJMatrices aj_matrices(double alpha, double beta) {
  const double ca = std::cos(alpha), sa = std::sin(alpha), cb = std::cos(beta), sb = std::sin(beta);
  AJMatrices m;
  m.A_ab << 0, -ca * cb, sa, ca * cb, 0, ca * sb, -sa, -ca * sb, 0;
  m.J1 << 0, -1, 0, 1, 0, 0, 0, 0, 0;
  m.A_b << 0, -sb, 0, sb, 0, -cb, 0, cb, 0;
  m.J2 << 0, 0, 0, 0, 0, -1, 0, 1, 0;
  return m;
}

Mat3 q_dot(const ParamState& s) {
  Mat3 Jz, Jx, Jy;
  Jz << 0, -1, 0, 1, 0, 0, 0, 0, 0;
  Jx << 0, 0, 0, 0, 0, -1, 0, 1, 0;
  Jy << 0, 0, 1, 0, 0, 0, -1, 0, 0;
  Mat3 q1 = rotation_z(s.omega), q2 = rotation_x(s.alpha), q3 = rotation_y(s.beta);
  return s.domega * Jz * q1 * q2 * q3 + s.dalpha * q1 * Jx * q2 * q3 + s.dbeta * q1 * q2 * Jy * q3;
}

Mat3 q_inverse_q_dot(const ParamState& s) {
  return rotation_matrix({s.omega, s.alpha, s.beta}).transpose() * q_dot(s);
}

// ---- approximate solution ----------------------------------------------

namespace {
Mat32 w_grad_y(const Vec2& y) {
  const double d = 1 + y.squaredNorm();
  Vec3 w = eval_bulk_profile(y);
  Mat32 g;
  for (int j = 0; j < 2; ++j) {
    Vec3 e = Vec3::Zero();
    e[j] = 2 / d;
    e[2] = 2 * y[j] / d;
    g.col(j) = e - w * (2 * y[j] / d);
  }
  return g;
}

struct Local {
  Vec2 y;
  double rho, theta, r;
  ProfileValues p;
  Frame f;
  Mat3 Q;
};

Local local_frame(const ParamState& s, const Vec2& x) {
  Local L;
  L.y = (x - s.xi()) / s.lambda;
  auto pp = PolarPoint::from_cartesian(L.y);
  L.rho = pp.rho;
  L.theta = pp.theta;
  L.r = (x - s.xi()).norm();
  L.p = eval_polar_profile(L.rho);
  L.f = eval_frame(pp);
  L.Q = rotation_matrix({s.omega, s.alpha, s.beta});
  return L;
}

Vec3 planar(cplx c) { return {c.real(), c.imag(), 0}; }
}  // namespace

Vec3 approx_U(const ParamState& s, const Vec2& x) {
  return rotation_matrix({s.omega, s.alpha, s.beta}) * eval_bulk_profile(Vec2((x - s.xi()) / s.lambda));
}

Vec3 approx_U_t(const ParamState& s, const Vec2& x) {
  Vec2 y = (x - s.xi()) / s.lambda;
  Vec2 ydot = -(s.dxi() + s.dlambda * y) / s.lambda;
  Mat3 Q = rotation_matrix({s.omega, s.alpha, s.beta});
  return q_dot(s) * eval_bulk_profile(y) + Q * (w_grad_y(y) * ydot);
}

Mat32 approx_U_grad(const ParamState& s, const Vec2& x) {
  Vec2 y = (x - s.xi()) / s.lambda;
  return rotation_matrix({s.omega, s.alpha, s.beta}) * w_grad_y(y) / s.lambda;
}

// ---- history quadrature -------------------------------------------------

cplx history_integral(const ParameterTrack& tr, double t, const std::function<double(double)>& g, double feature,
                      const HistoryOptions& opt) {
  const double T = tr.T();
  const double lo = -T;
  require(t > lo, ErrorKind::Domain, "history_integral: t must exceed -T");
  std::vector<double> nodes{lo, t};
  int native = 0;
  for (const auto& s : tr.samples())
    if (s.t > lo && s.t < t) {
      nodes.push_back(s.t);
      ++native;
    }
  if (t > tr.t_begin() && native < opt.min_native_samples)
    fail(ErrorKind::Resolution, "history_integral: only " + std::to_string(native) +
                                    " native samples before t; refine the parameter track");
  // grading toward s = t on the kernel scale
  const double span = t - lo;
  double d = std::max(feature, 1e-300) * 1e-3;
  while (d < span) {
    nodes.push_back(t - d);
    d *= 1.5;
  }
  // the constant-extension window [-T, t_begin] is smooth in s except through the kernel
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end(), [](double a, double b) { return std::abs(a - b) < 1e-300; }),
              nodes.end());

  // Romberg on the composite trapezoid: each panel is smooth, so the error expands in 4^{-k}
  auto f = [&](double s) { return tr.pdot(s) * g(t - s); };
  std::vector<cplx> vals(nodes.size());
  for (size_t i = 0; i < nodes.size(); ++i) vals[i] = f(nodes[i]);
  auto trap = [&]() {
    cplx acc = 0;
    for (size_t i = 0; i + 1 < nodes.size(); ++i) acc += 0.5 * (vals[i] + vals[i + 1]) * (nodes[i + 1] - nodes[i]);
    return acc;
  };
  std::vector<cplx> row{trap()};
  for (int level = 1; level <= opt.max_halvings; ++level) {
    std::vector<double> n2;
    std::vector<cplx> v2;
    n2.reserve(2 * nodes.size());
    v2.reserve(2 * nodes.size());
    for (size_t i = 0; i + 1 < nodes.size(); ++i) {
      double m = 0.5 * (nodes[i] + nodes[i + 1]);
      n2.push_back(nodes[i]);
      v2.push_back(vals[i]);
      n2.push_back(m);
      v2.push_back(f(m));
    }
    n2.push_back(nodes.back());
    v2.push_back(vals.back());
    nodes.swap(n2);
    vals.swap(v2);
    std::vector<cplx> next{trap()};
    double p4 = 1;
    for (size_t j = 0; j < row.size(); ++j) {
      p4 *= 4;
      next.push_back(next[j] + (next[j] - row[j]) / (p4 - 1));
    }
    cplx cur = next.back(), prev = row.back();
    row.swap(next);
    double scale = std::abs(cur);
    if (std::abs(cur - prev) <= opt.rel_tol * scale || scale < 1e-300) return cur;
  }
  fail(ErrorKind::Resolution, "history_integral: refinement did not reach the requested relative tolerance");
}

// ---- corrections ---------------------------------------------------------

Vec3 phi0_correction(const ParameterTrack& tr, double r, double theta, double t, const HistoryOptions& opt) {
  require(r >= 0, ErrorKind::Domain, "phi0_correction: negative radius");
  if (r == 0) return Vec3::Zero();
  const double lam = tr.at(t).lambda;
  const double z = std::sqrt(r * r + lam * lam);
  cplx I = history_integral(tr, t, [z](double d) { return k_lag(z, d); }, z * z, opt);
  return planar(-r * I * std::polar(1.0, theta));
}

std::pair<Vec3, Vec3> phi_alpha_beta(const RotationAngles& a) {
  Mat3 Q = rotation_matrix(a);
  return {Q * Vec3(0, a.alpha, 0), Q * Vec3(-a.beta, 0, 1)};
}

// ---- errors -----------------------------------------------------------------

ErrorTerms evaluate_errors(const ParamState& s, const Vec2& x) {
  auto L = local_frame(s, x);
  const double c = std::cos(L.theta), sn = std::sin(L.theta);
  const double sa = std::sin(s.alpha), sb = std::sin(s.beta), cb = std::cos(s.beta);
  const double rho = L.rho, d = 1 + rho * rho;
  const Vec3 &e1 = L.f.e1, &e2 = L.f.e2;
  (void)sa;
  ErrorTerms E;
  E.E0 = -L.Q * (s.dlambda / s.lambda * rho * L.p.w_rho * e1 + s.domega * rho * L.p.w_rho * e2);
  E.E1 = -s.dxi1 / s.lambda * L.p.w_rho * (L.Q * (c * e1 + sn * e2)) -
         s.dxi2 / s.lambda * L.p.w_rho * (L.Q * (sn * e1 - c * e2));
  E.Em1_2 = L.Q * (s.dalpha / d * Vec3(-2 * rho * sb * sn, 2 * rho * sb * c - (rho * rho - 1) * cb, 2 * rho * cb * sn));
  E.Em1_1 = L.Q * (s.dbeta / d * Vec3(rho * rho - 1, 0, -2 * rho * c));
  E.Em1 = E.Em1_1 + E.Em1_2;
  auto m = aj_matrices(s.alpha, s.beta);
  E.E0_tilt = s.domega * (L.Q * ((m.A_ab - m.J1) * eval_bulk_profile(L.y)));
  const double z2 = L.r * L.r + s.lambda * s.lambda;
  E.E0_slow = planar(2 * L.r / z2 * s.pdot() * std::polar(1.0, L.theta));
  return E;
}

ErrorTerms evaluate_errors(const ParameterTrack& tr, const Vec2& x, double t) { return evaluate_errors(tr.at(t), x); }

Vec3 remainder_m1_2(const ParamState& s, const Vec2& x) {
  auto L = local_frame(s, x);
  const double rho = L.rho, d = 1 + rho * rho, c = std::cos(L.theta), sn = std::sin(L.theta);
  const double ca = std::cos(s.alpha), cb = std::cos(s.beta), sb = std::sin(s.beta);
  const double a = s.alpha, ad = s.dalpha, wd = s.domega;
  Vec3 b(wd * a * ca * cb + ad * sb * (a + 2 * rho / d * sn),
         -ad * (1 - (rho * rho - 1) / d * cb + 2 * rho / d * sb * c),
         wd * a * ca * sb - ad * cb * (a + 2 * rho / d * sn));
  return L.Q * b;
}

Vec3 remainder_m1_1(const ParamState& s, const Vec2& x) {
  auto L = local_frame(s, x);
  const double rho = L.rho, d = 1 + rho * rho, c = std::cos(L.theta);
  const double ca = std::cos(s.alpha), sa = std::sin(s.alpha), cb = std::cos(s.beta), sb = std::sin(s.beta);
  const double b = s.beta, bd = s.dbeta, ad = s.dalpha, wd = s.domega;
  Vec3 v(2 / d * bd - wd * sa - bd,
         -wd * (ca * sb - b * ca * cb) + ad * (b * sb + cb),
         -wd * b * sa - bd * (b - 2 * rho / d * c));
  return L.Q * v;
}

Remainders evaluate_remainders(const ParameterTrack& tr, const Vec2& x, double t, const HistoryOptions& opt) {
  ParamState s = tr.at(t);
  Remainders R;
  R.Rm1_1 = remainder_m1_1(s, x);
  R.Rm1_2 = remainder_m1_2(s, x);
  R.Rm1 = R.Rm1_1 + R.Rm1_2;

  const Vec2 dx = x - s.xi();
  const double r = dx.norm();
  const double theta = std::atan2(dx.y(), dx.x());
  const double z = std::sqrt(r * r + s.lambda * s.lambda);
  const cplx eit = std::polar(1.0, theta);
  const cplx xid(s.dxi1, s.dxi2);
  cplx Icombo = history_integral(tr, t, [z](double d) { return combo_lag(z, d); }, z * z, opt);
  cplx Ik = history_integral(tr, t, [z](double d) { return k_lag(z, d); }, z * z, opt);
  cplx Izkz = history_integral(tr, t, [z](double d) { return zkz_lag(z, d); }, z * z, opt);
  const double z4 = z * z * z * z;
  // with phi0 = -r int pdot k the defect Phi_t - Laplace Phi + tilde E0 splits into these two
  R.R0 = planar(r * eit * (s.lambda * s.lambda / z4) * Icombo);
  // transport by the moving center: xidot int pdot k, plus the z-dependence through lambda and r
  R.R1 = planar(xid * Ik - (r / (z * z)) * eit * (s.lambda * s.dlambda - dx.dot(s.dxi())) * Izkz);
  return R;
}

KTerms evaluate_K(const ParameterTrack& tr, const Vec2& y, double t, const HistoryOptions& opt) {
  ParamState s = tr.at(t);
  const double lam = s.lambda;
  auto pp = PolarPoint::from_cartesian(y);
  const double rho = pp.rho;
  auto p = eval_polar_profile(rho);
  auto fr = eval_frame(pp);
  Mat3 Q = rotation_matrix({s.omega, s.alpha, s.beta});
  const Vec3 qe1 = Q * fr.e1, qe2 = Q * fr.e2;
  const double r = lam * rho;
  const double z = lam * std::sqrt(1 + rho * rho);
  const cplx rot = std::polar(1.0, -s.omega);
  const double w2 = p.w_rho * p.w_rho;

  KTerms K;
  cplx Ik = history_integral(tr, t, [z](double d) { return k_lag(z, d); }, z * z, opt) * rot;
  K.K01 = -(2 / lam) * rho * w2 * (Ik.real() * qe1 + Ik.imag() * qe2);

  // r k_z z_r = (r^2/z^2) z k_z. Coefficients follow from
  // K0 = tilde L[Phi0] + Pi(tilde E0) - E0 - Pi(tilde R0) with the radial form of tilde L.
  cplx Izr = history_integral(tr, t, [z](double d) { return zkz_lag(z, d); }, z * z, opt) * rot * (r * r / (z * z));
  cplx Ic = history_integral(tr, t, [z](double d) { return combo_lag(z, d); }, z * z, opt) * rot;
  K.K02 = -(1 / lam) * rho * w2 * (s.dlambda + 2 * Izr.real()) * qe1 -
          (1 / (4 * lam)) * rho * w2 * p.cos_w * Ic.real() * qe1 - (1 / (4 * lam)) * rho * w2 * Ic.imag() * qe2;

  cplx m = cplx(s.dxi1, -s.dxi2) * std::polar(1.0, pp.theta);
  K.K1 = (1 / lam) * p.w_rho * (m.real() * qe1 + m.imag() * qe2);
  return K;
}

// ---- tilde L ------------------------------------------------------------------

Mat32 SmoothField::jac(const Vec2& x) const {
  if (jacobian) return jacobian(x);
  Mat32 J;
  const double h = fd_step;
  for (int j = 0; j < 2; ++j) {
    Vec2 e = Vec2::Zero();
    e[j] = h;
    J.col(j) = (-value(x + 2 * e) + 8 * value(x + e) - 8 * value(x - e) + value(x - 2 * e)) / (12 * h);
  }
  return J;
}

TildeLParts tildeL_decomposed(const SmoothField& Phi, const ParamState& s, const Vec2& x) {
  auto L = local_frame(s, x);
  const Vec3 U = approx_U(s, x);
  const Mat32 gU = approx_U_grad(s, x);
  const Vec3 phi = Phi.value(x);
  const Mat32 J = Phi.jac(x);
  TildeLParts out;

  // definition
  double grad_sq = gU.col(0).squaredNorm() + gU.col(1).squaredNorm();
  Vec3 def = grad_sq * (phi - phi.dot(U) * U);
  for (int j = 0; j < 2; ++j) def -= 2 * (J.col(j).dot(U) + phi.dot(gU.col(j))) * gU.col(j);
  out.definition = def;

  // polar form
  const double c = std::cos(L.theta), sn = std::sin(L.theta);
  const Vec3 qe1 = L.Q * L.f.e1, qe2 = L.Q * L.f.e2;
  const Vec3 phi_r = c * J.col(0) + sn * J.col(1);
  const Vec3 phi_t_over_r = -sn * J.col(0) + c * J.col(1);  // (1/r) Phi_theta
  out.polar = -(2 / s.lambda) * L.p.w_rho * (phi_r.dot(U) * qe1 - phi_t_over_r.dot(U) * qe2);

  // div / curl decomposition, applied to Q^{-1} Phi so that Q reduces to the identity
  const Mat3 Qi = L.Q.transpose();
  const Mat32 Jt = Qi * J;  // rows: components of Q^{-1}Phi, columns: d/dx1, d/dx2
  const double div = Jt(0, 0) + Jt(1, 1);
  const double curl = Jt(1, 0) - Jt(0, 1);
  // conj(varphi) = (phi1, -phi2)
  const double divb = Jt(0, 0) - Jt(1, 1);
  const double curlb = -Jt(1, 0) - Jt(0, 1);
  const double w2 = L.p.w_rho * L.p.w_rho;
  const double lam = s.lambda, rho = L.rho;
  out.L0 = (1 / lam) * rho * w2 * (div * qe1 + curl * qe2);
  const double d1 = Jt(2, 0), d2 = Jt(2, 1);
  out.L1 = -2 / lam * L.p.w_rho * L.p.cos_w * ((d1 * c + d2 * sn) * qe1 + (d1 * sn - d2 * c) * qe2);
  const double c2 = std::cos(2 * L.theta), s2 = std::sin(2 * L.theta);
  out.L2 = (1 / lam) * rho * w2 * ((divb * c2 - curlb * s2) * qe1 + (divb * s2 + curlb * c2) * qe2);
  return out;
}

Vec3 tildeL_radial(cplx phi, cplx dphi, const ParamState& s, const Vec2& x) {
  auto L = local_frame(s, x);
  const cplx rot = std::polar(1.0, -s.omega);
  const double w2 = L.p.w_rho * L.p.w_rho;
  const Vec3 qe1 = L.Q * L.f.e1, qe2 = L.Q * L.f.e2;
  return (2 / s.lambda) * L.rho * w2 * ((rot * dphi).real() * qe1 + (rot * phi).imag() / L.r * qe2);
}

// ---- N_U --------------------------------------------------------------------

Vec3 evaluate_N_U(const SmoothField& zeta, const ParamState& s, const Vec2& x) {
  const Vec3 z = zeta.value(x);
  const double n2 = z.squaredNorm();
  require(n2 <= 1 + 1e-12, ErrorKind::Domain, "evaluate_N_U: |zeta| > 1");
  const Mat32 Jz = zeta.jac(x);
  const Vec3 U = approx_U(s, x);
  const Mat32 gU = approx_U_grad(s, x);
  const Vec3 Ut = approx_U_t(s, x);
  const double a = correction_scalar(z);
  const double root = std::sqrt(std::max(0.0, 1 - n2));
  Vec2 ga;
  for (int j = 0; j < 2; ++j) {
    double zz = z.dot(Jz.col(j));
    // on |zeta| = 1 the constraint forces zeta.d_j zeta = 0 and a is locally constant
    ga[j] = root > 1e-12 ? -zz / root : 0.0;
  }
  double S = 0;
  Vec3 tail = -a * Ut;
  for (int j = 0; j < 2; ++j) {
    Vec3 gaU = ga[j] * U + a * gU.col(j);
    S += 2 * gaU.dot(gU.col(j) + Jz.col(j)) + 2 * gU.col(j).dot(Jz.col(j)) + Jz.col(j).squaredNorm() +
         gaU.squaredNorm();
    tail += 2 * ga[j] * gU.col(j);
  }
  return S * z + tail;
}

}  // namespace lab
