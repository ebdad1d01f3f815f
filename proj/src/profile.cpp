#include "lab/profile.hpp"

#include <cmath>

#include "lab/quadrature.hpp"

namespace lab {

PolarPoint PolarPoint::make(double rho, double theta) {
  double t = std::fmod(theta, 2 * kPi);
  if (t < 0) t += 2 * kPi;
  if (t >= 2 * kPi) t = 0;
  return {rho, t};
}

PolarPoint PolarPoint::from_cartesian(const Vec2& y) { return make(y.norm(), std::atan2(y.y(), y.x())); }

ProfileValues eval_polar_profile(double rho) {
  require(rho >= 0, ErrorKind::Domain, "eval_polar_profile: negative radius");
  double d = rho * rho + 1;
  ProfileValues p;
  p.w = kPi - 2 * std::atan(rho);
  p.w_rho = -2 / d;
  p.sin_w = 2 * rho / d;
  p.cos_w = (rho * rho - 1) / d;
  if (std::isinf(rho)) {
    p.w = 0;
    p.sin_w = 0;
    p.cos_w = 1;
  }
  return p;
}

Vec3 eval_bulk_profile(const PolarPoint& y) {
  if (std::isinf(y.rho)) return {0, 0, 1};
  auto p = eval_polar_profile(y.rho);
  return {std::cos(y.theta) * p.sin_w, std::sin(y.theta) * p.sin_w, p.cos_w};
}

Vec3 eval_bulk_profile(const Vec2& y) {
  // Cartesian form 1/(1+|y|^2) (2y, |y|^2-1), avoids the angle entirely.
  double r2 = y.squaredNorm();
  double d = 1 + r2;
  return {2 * y.x() / d, 2 * y.y() / d, (r2 - 1) / d};
}

Frame eval_frame(const PolarPoint& y) {
  auto p = eval_polar_profile(y.rho);
  double c = std::cos(y.theta), s = std::sin(y.theta);
  return {{c * p.cos_w, s * p.cos_w, -p.sin_w}, {-s, c, 0}};
}

Mat3 rotation_z(double omega) {
  double c = std::cos(omega), s = std::sin(omega);
  Mat3 m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

Mat3 rotation_x(double alpha) {
  double c = std::cos(alpha), s = std::sin(alpha);
  Mat3 m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}

Mat3 rotation_y(double beta) {
  double c = std::cos(beta), s = std::sin(beta);
  Mat3 m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

Mat3 rotation_matrix(const RotationAngles& a) { return rotation_z(a.omega) * rotation_x(a.alpha) * rotation_y(a.beta); }

Vec3 eval_kernel(int k, int j, const PolarPoint& y) {
  require((k >= -1 && k <= 1) && (j == 1 || j == 2), ErrorKind::Domain,
          "eval_kernel: unsupported index (" + std::to_string(k) + "," + std::to_string(j) + ")");
  auto p = eval_polar_profile(y.rho);
  auto f = eval_frame(y);
  double c = std::cos(y.theta), s = std::sin(y.theta);
  switch (k) {
    case 0:
      return y.rho * p.w_rho * (j == 1 ? f.e1 : f.e2);
    case 1:
      return j == 1 ? Vec3(p.w_rho * (c * f.e1 + s * f.e2)) : Vec3(p.w_rho * (s * f.e1 - c * f.e2));
    default:
      return j == 1 ? Vec3(y.rho * y.rho * p.w_rho * (c * f.e1 - s * f.e2))
                    : Vec3(y.rho * y.rho * p.w_rho * (s * f.e1 + c * f.e2));
  }
}

double mode_kernel(int k, double rho) {
  double d = 1 + rho * rho;
  switch (k) {
    case 0:
      return rho / d;
    case 1:
      return 1 / d;
    case -1:
      return 2 * rho * rho / d;
    default:
      fail(ErrorKind::Domain, "mode_kernel: only k in {-1,0,1} carry a kernel");
  }
}

// ---- grids --------------------------------------------------------------

std::vector<double> make_radial_nodes(double rho_min, double rho_max, int n, Spacing spacing) {
  require(rho_min > 0 && rho_max > rho_min && n >= 4, ErrorKind::Config,
          "radial grid needs 0 < rho_min < rho_max and at least 4 nodes");
  std::vector<double> r(n);
  if (spacing == Spacing::Geometric) {
    double a = std::log(rho_min), b = std::log(rho_max);
    for (int i = 0; i < n; ++i) r[i] = std::exp(a + (b - a) * i / (n - 1));
  } else {
    for (int i = 0; i < n; ++i) r[i] = rho_min + (rho_max - rho_min) * i / (n - 1);
  }
  r.front() = rho_min;
  r.back() = rho_max;
  return r;
}

PolarGrid::PolarGrid(const GridSpec& spec) : spec_(spec) {
  require(spec.n_theta >= 4 && (spec.n_theta & (spec.n_theta - 1)) == 0, ErrorKind::Config,
          "grid.n_theta must be a power of two >= 4");
  rho_ = make_radial_nodes(spec.rho_min, spec.rho_max, spec.n_rho, spec.spacing);
  h_ = spec.spacing == Spacing::Geometric ? std::log(spec.rho_max / spec.rho_min) / (spec.n_rho - 1)
                                          : (spec.rho_max - spec.rho_min) / (spec.n_rho - 1);
  theta_.resize(spec.n_theta);
  for (int j = 0; j < spec.n_theta; ++j) theta_[j] = 2 * kPi * j / spec.n_theta;
}

PolarGridField sample_field(const PolarGrid& grid, const std::function<Vec3(const PolarPoint&)>& f) {
  PolarGridField out{grid, std::vector<Vec3>(grid.rho().size() * grid.theta().size())};
  for (int i = 0; i < grid.n_rho(); ++i)
    for (int j = 0; j < grid.n_theta(); ++j) out.at(i, j) = f({grid.rho()[i], grid.theta()[j]});
  return out;
}

RadialMode sample_mode(int k, const std::vector<double>& rho, Spacing spacing, const std::function<cplx(double)>& f) {
  RadialMode m{k, spacing, rho, std::vector<cplx>(rho.size())};
  for (size_t i = 0; i < rho.size(); ++i) m.values[i] = f(rho[i]);
  return m;
}

namespace {
template <class T>
T zero_like(const T& v) {
  if constexpr (std::is_arithmetic_v<T> || std::is_same_v<T, cplx>)
    return T(0);
  else
    return T(v * 0.0);
}
}  // namespace

template <class T>
void radial_derivatives(const std::vector<double>& rho, Spacing spacing, const std::vector<T>& f, std::vector<T>& d1,
                        std::vector<T>& d2) {
  const size_t n = rho.size();
  require(f.size() == n && n >= 4, ErrorKind::Contract, "radial_derivatives: size mismatch");
  double h = spacing == Spacing::Geometric ? std::log(rho[n - 1] / rho[0]) / (n - 1) : (rho[n - 1] - rho[0]) / (n - 1);
  d1.assign(n, zero_like(f[0]));
  d2.assign(n, zero_like(f[0]));
  for (size_t i = 0; i < n; ++i) {
    T fs, fss;
    if (i == 0) {
      fs = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2 * h);
      fss = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (h * h);
    } else if (i == n - 1) {
      fs = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2 * h);
      fss = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / (h * h);
    } else {
      fs = (f[i + 1] - f[i - 1]) / (2 * h);
      fss = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (h * h);
    }
    if (spacing == Spacing::Geometric) {
      // s = log rho: f_rho = f_s / rho, f_rhorho = (f_ss - f_s) / rho^2
      d1[i] = fs / rho[i];
      d2[i] = (fss - fs) / (rho[i] * rho[i]);
    } else {
      d1[i] = fs;
      d2[i] = fss;
    }
  }
}

template void radial_derivatives<double>(const std::vector<double>&, Spacing, const std::vector<double>&,
                                         std::vector<double>&, std::vector<double>&);
template void radial_derivatives<cplx>(const std::vector<double>&, Spacing, const std::vector<cplx>&,
                                       std::vector<cplx>&, std::vector<cplx>&);
template void radial_derivatives<Vec3>(const std::vector<double>&, Spacing, const std::vector<Vec3>&,
                                       std::vector<Vec3>&, std::vector<Vec3>&);

PolarGridField apply_linearized(const PolarGridField& phi, double tangency_tol) {
  const auto& g = phi.grid;
  const int nr = g.n_rho(), nt = g.n_theta();
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < nt; ++j) {
      Vec3 w = eval_bulk_profile(PolarPoint{g.rho()[i], g.theta()[j]});
      const Vec3& v = phi.at(i, j);
      if (std::abs(v.dot(w)) > tangency_tol * std::max(1.0, v.norm()))
        fail(ErrorKind::Contract, "apply_linearized: input not tangent to W at node (" + std::to_string(i) + "," +
                                      std::to_string(j) + ")");
    }

  PolarGridField out{g, std::vector<Vec3>(phi.values.size(), Vec3::Zero())};
  std::vector<Vec3> col(nr), d1, d2;
  const double dt = g.dtheta();
  for (int j = 0; j < nt; ++j) {
    for (int i = 0; i < nr; ++i) col[i] = phi.at(i, j);
    radial_derivatives(g.rho(), g.spec().spacing, col, d1, d2);
    const int jp = (j + 1) % nt, jm = (j + nt - 1) % nt;
    const double th = g.theta()[j];
    for (int i = 0; i < nr; ++i) {
      const double r = g.rho()[i];
      const Vec3 ft = (phi.at(i, jp) - phi.at(i, jm)) / (2 * dt);
      const Vec3 ftt = (phi.at(i, jp) - 2 * phi.at(i, j) + phi.at(i, jm)) / (dt * dt);
      auto p = eval_polar_profile(r);
      auto fr = eval_frame({r, th});
      Vec3 w = eval_bulk_profile(PolarPoint{r, th});
      Vec3 w_r = p.w_rho * fr.e1;
      Vec3 w_t = p.sin_w * fr.e2;
      Vec3 lap = d2[i] + d1[i] / r + ftt / (r * r);
      double cross = w_r.dot(d1[i]) + w_t.dot(ft) / (r * r);
      out.at(i, j) = lap + grad_w_sq(r) * phi.at(i, j) + 2 * cross * w;
    }
  }
  return out;
}

double mode_potential(int k, double rho) {
  auto p = eval_polar_profile(rho);
  double cos2w = p.cos_w * p.cos_w - p.sin_w * p.sin_w;
  return (k * k + 2.0 * k * p.cos_w + cos2w) / (rho * rho);
}

RadialMode apply_mode_operator(int k, const RadialMode& f) {
  std::vector<cplx> d1, d2;
  radial_derivatives(f.rho, f.spacing, f.values, d1, d2);
  RadialMode out = f;
  out.k = k;
  for (size_t i = 0; i < f.rho.size(); ++i) {
    double r = f.rho[i];
    out.values[i] = d2[i] + d1[i] / r - mode_potential(k, r) * f.values[i];
  }
  return out;
}

Vec3 project_orthogonal(const Vec3& phi, const Vec3& u) {
  require(std::abs(u.squaredNorm() - 1) < 1e-10, ErrorKind::Contract, "project_orthogonal: U is not unit length");
  return phi - phi.dot(u) * u;
}

std::vector<Vec3> project_orthogonal(const std::vector<Vec3>& phi, const std::vector<Vec3>& u) {
  require(phi.size() == u.size(), ErrorKind::Contract, "project_orthogonal: size mismatch");
  std::vector<Vec3> out(phi.size());
  for (size_t i = 0; i < phi.size(); ++i) out[i] = project_orthogonal(phi[i], u[i]);
  return out;
}

double correction_scalar(const Vec3& zeta) {
  double n2 = zeta.squaredNorm();
  require(n2 <= 1 + 1e-12, ErrorKind::Domain, "correction_scalar: |zeta| > 1");
  return std::sqrt(std::max(0.0, 1 - n2)) - 1;
}

double dirichlet_energy_profile(double rho_max) {
  require(rho_max >= 0, ErrorKind::Domain, "dirichlet_energy_profile: negative radius");
  auto density = [](double r) { return 2 * kPi * r * grad_w_sq(r); };
  if (std::isinf(rho_max)) return quad::half_line(density, 1e-14).value;
  return quad::gk(density, 0.0, rho_max, 1e-14).value;
}

double dirichlet_energy(const PolarGridField& u, double rho_lo, double rho_hi) {
  const auto& g = u.grid;
  const int nr = g.n_rho(), nt = g.n_theta();
  const double dt = g.dtheta();
  std::vector<double> ring(nr, 0.0);
  std::vector<Vec3> col(nr), d1, d2;
  for (int j = 0; j < nt; ++j) {
    for (int i = 0; i < nr; ++i) col[i] = u.at(i, j);
    radial_derivatives(g.rho(), g.spec().spacing, col, d1, d2);
    const int jp = (j + 1) % nt, jm = (j + nt - 1) % nt;
    for (int i = 0; i < nr; ++i) {
      const double r = g.rho()[i];
      Vec3 ft = (u.at(i, jp) - u.at(i, jm)) / (2 * dt);
      ring[i] += (d1[i].squaredNorm() + ft.squaredNorm() / (r * r)) * r * dt;
    }
  }
  double e = 0;
  for (int i = 0; i + 1 < nr; ++i) {
    double a = g.rho()[i], b = g.rho()[i + 1];
    if (a < rho_lo || b > rho_hi) continue;
    e += 0.5 * (ring[i] + ring[i + 1]) * (b - a);
  }
  return e;
}

}  // namespace lab
