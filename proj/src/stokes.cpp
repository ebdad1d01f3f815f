#include "lab/stokes.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <thread>

#include "lab/track.hpp"

namespace lab {

// ---- Oseen tensor ------------------------------------------------------------------

namespace {

struct OseenRadial {
  double alpha, dalpha, P, dP, P_r;  // S = alpha I + P xhat xhat, P_r = P / r
};

OseenRadial oseen_radial(double r, double t) {
  const double s = r * r / (4 * t);
  OseenRadial o;
  if (s < 1e-3) {
    // Taylor polynomials in r; the dropped terms are O(s^5) relative
    const double r2 = r * r, r4 = r2 * r2, r6 = r4 * r2, r8 = r4 * r4;
    const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
    o.alpha = (9 * r8 - 140 * r6 * t + 1600 * r4 * t2 - 11520 * r2 * t3 + 30720 * t4) / (245760 * kPi * t5);
    o.dalpha = r * (9 * r6 - 105 * r4 * t + 800 * r2 * t2 - 2880 * t3) / (30720 * kPi * t5);
    o.P_r = r * (-r6 + 15 * r4 * t - 160 * r2 * t2 + 960 * t3) / (30720 * kPi * t5);
    o.P = o.P_r * r;
    o.dP = r * (-4 * r6 + 45 * r4 * t - 320 * r2 * t2 + 960 * t3) / (15360 * kPi * t5);
    return o;
  }
  const double E = std::exp(-s), om = -std::expm1(-s);
  const double A = E / (4 * kPi * t), B = om / (2 * kPi * r * r);
  const double dA = -r * E / (8 * kPi * t * t);
  const double dB = E / (4 * kPi * t * r) - om / (kPi * r * r * r);
  o.alpha = A - B;
  o.dalpha = dA - dB;
  o.P = 2 * B - A;
  o.dP = 2 * dB - dA;
  o.P_r = o.P / r;
  return o;
}

}  // namespace

Mat2 oseen_tensor(const Vec2& x, double t) {
  require(t > 0, ErrorKind::Domain, "oseen_tensor: need t > 0");
  const double r = x.norm();
  auto o = oseen_radial(r, t);
  Mat2 S = o.alpha * Mat2::Identity();
  if (r > 0) S += o.P * (x / r) * (x / r).transpose();
  return S;
}

OseenGrad oseen_tensor_grad(const Vec2& x, double t) {
  require(t > 0, ErrorKind::Domain, "oseen_tensor: need t > 0");
  const double r = x.norm();
  auto o = oseen_radial(r, t);
  OseenGrad g;
  const Vec2 e = r > 0 ? Vec2(x / r) : Vec2::Zero();
  g.S = o.alpha * Mat2::Identity() + o.P * e * e.transpose();
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        g.dS[k](i, j) = o.dalpha * e[k] * (i == j) + o.dP * e[k] * e[i] * e[j] +
                        o.P_r * ((i == k) * e[j] + (j == k) * e[i] - 2 * e[i] * e[j] * e[k]);
  return g;
}

// ---- forcing ----------------------------------------------------------------------------

double ForcingTensor::lambda(double t) const { return lambda_star(t, T); }

std::array<Mat2, 2> ForcingTensor::gradient(const Vec2& x, double t) const {
  if (grad) return grad(x, t);
  const double h = 1e-3 * (lambda(t) + (x - q).norm());
  std::array<Mat2, 2> g;
  for (int k = 0; k < 2; ++k) {
    Vec2 e = Vec2::Zero();
    e[k] = h;
    g[k] = (-F(x + 2 * e, t) + 8 * F(x + e, t) - 8 * F(x - e, t) + F(x - 2 * e, t)) / (12 * h);
  }
  return g;
}

Vec2 ForcingTensor::divergence(const Vec2& x, double t) const {
  auto g = gradient(x, t);
  return {g[0](0, 0) + g[1](0, 1), g[0](1, 0) + g[1](1, 1)};
}

ForcingTensor ForcingTensor::zero(double T) {
  ForcingTensor f;
  f.T = T;
  f.F = [](const Vec2&, double) { return Mat2::Zero().eval(); };
  f.grad = [](const Vec2&, double) { return std::array<Mat2, 2>{Mat2::Zero(), Mat2::Zero()}; };
  return f;
}

ForcingTensor ForcingTensor::weight_profile(double T, double nu, double a, const Mat2& M, Vec2 q) {
  ForcingTensor f;
  f.T = T;
  f.nu = nu;
  f.a = a;
  f.q = q;
  f.F = [=](const Vec2& x, double t) -> Mat2 {
    double l = lambda_star(t, T), y = (x - q).norm() / l;
    return std::pow(l, nu - 2) / (1 + std::pow(y, a + 1)) * M;
  };
  f.grad = [=](const Vec2& x, double t) {
    double l = lambda_star(t, T);
    Vec2 y = (x - q) / l;
    double ry = y.norm(), d = 1 + std::pow(ry, a + 1);
    double c = ry > 0 ? -(a + 1) * std::pow(ry, a - 1) / (d * d) : 0.0;
    std::array<Mat2, 2> g;
    for (int k = 0; k < 2; ++k) g[k] = std::pow(l, nu - 3) * c * y[k] * M;
    return g;
  };
  return f;
}

// ---- quadrature ---------------------------------------------------------------------

namespace {

struct Node1D {
  double x, w;
};

// Gauss-Legendre, 4 nodes per panel, panels uniform in log over [lo, hi]; weights include the
// Jacobian of the log map times `power` extra factors of the abscissa
std::vector<Node1D> log_panels(double lo, double hi, double per_decade, int power) {
  using GL = boost::math::quadrature::gauss<double, 4>;
  const auto& ab = GL::abscissa();
  const auto& wt = GL::weights();
  const double ulo = std::log(lo), uhi = std::log(hi);
  const int np = std::max(1, int(std::ceil(per_decade * (uhi - ulo) / std::log(10.0))));
  const double du = (uhi - ulo) / np;
  std::vector<Node1D> out;
  for (int p = 0; p < np; ++p) {
    const double mid = ulo + (p + 0.5) * du;
    for (size_t m = 0; m < ab.size(); ++m)
      for (int sgn : {-1, 1}) {
        if (ab[m] == 0 && sgn > 0) continue;
        double u = mid + sgn * ab[m] * du / 2, x = std::exp(u);
        out.push_back({x, wt[m] * du / 2 * std::pow(x, power + 1)});
      }
  }
  return out;
}

// int_{R^2} f(z) dz where f concentrates near `x` (scale sx) and near `c` (scale sc). A smooth partition
// of unity |z-c|^4 / (|z-x|^4 + |z-c|^4) hands each piece to a polar rule around its own center.
template <class Acc, class Fn>
void plane_integral(const Vec2& x, double sx, const Vec2& c, double sc, double per_decade, int n_theta, Acc& acc,
                    Fn&& f) {
  const double d = (x - c).norm();
  double lo = std::min(sx, sc), hi = std::max(sx, sc);
  if (d > 0) lo = std::min(lo, d), hi = std::max(hi, d);
  const auto radial = log_panels(1e-4 * lo, 1e3 * hi, per_decade, 1);
  const double dth = 2 * kPi / n_theta;
  for (int which = 0; which < 2; ++which) {
    const Vec2& C = which == 0 ? x : c;
    const double off = which == 0 ? 0.0 : 0.5 * dth;
    for (int m = 0; m < n_theta; ++m) {
      const Vec2 e(std::cos(off + m * dth), std::sin(off + m * dth));
      for (auto& n : radial) {
        const Vec2 z = C + n.x * e;
        const double ax = (z - x).squaredNorm(), ac = (z - c).squaredNorm();
        const double a4 = ax * ax, c4 = ac * ac;
        const double part = which == 0 ? c4 / (a4 + c4) : a4 / (a4 + c4);
        if (part == 0) continue;
        f(z, n.w * dth * part, acc);
      }
    }
  }
}

struct Acc {
  Vec2 v = Vec2::Zero();
  Mat2 g = Mat2::Zero();
};

void accumulate_kernel(const Vec2& w, double tau, const Vec2& src, double weight, bool grad, Acc& acc) {
  if (grad) {
    auto og = oseen_tensor_grad(w, tau);
    acc.v += weight * og.S * src;
    for (int l = 0; l < 2; ++l) acc.g.col(l) += weight * og.dS[l] * src;
  } else {
    acc.v += weight * oseen_tensor(w, tau) * src;
  }
}

VelocitySample one_target(const ForcingTensor& F, const SpaceTimePoint& p, const InitialVelocity& v0,
                          const ConvolutionOptions& opt) {
  const double scale = std::pow(2.0, opt.level);
  const double ppd = opt.panels_per_decade * scale;
  const int nth = int(opt.n_theta * scale);
  const double t = p.t;
  require(t > 0 && t < F.T, ErrorKind::Domain, "convolve_velocity: need 0 < t < T");
  VelocitySample out;
  out.x = p.x;
  out.t = t;
  Acc total;

  if (v0.v0) {
    Acc a;
    plane_integral(p.x, std::sqrt(t), v0.center, v0.scale, ppd, nth, a, [&](const Vec2& z, double w, Acc& acc) {
      accumulate_kernel(p.x - z, t, v0.v0(z), w, opt.with_gradient, acc);
    });
    total.v += a.v;
    total.g += a.g;
  }

  const double tstar = std::min(t, (F.T - t) * (F.T - t));
  std::vector<Node1D> taus = log_panels(opt.tau_floor * tstar, tstar, opt.near_panels_per_decade * scale, 0);
  if (t > tstar * (1 + 1e-12)) {
    auto far = log_panels(tstar, t, opt.far_panels_per_decade * scale, 0);
    taus.insert(taus.end(), far.begin(), far.end());
  }
  for (auto& tn : taus) {
    const double tau = tn.x, s = t - tau;
    Acc a;
    plane_integral(p.x, std::sqrt(tau), F.q, F.lambda(s), ppd, nth, a, [&](const Vec2& z, double w, Acc& acc) {
      accumulate_kernel(p.x - z, tau, F.divergence(z, s), w, opt.with_gradient, acc);
    });
    total.v += tn.w * a.v;
    total.g += tn.w * a.g;
  }
  out.v = total.v;
  out.grad = total.g;
  if (opt.with_pressure) out.P = pressure_field(F, p.x, t, opt);
  if (!std::isfinite(out.v.norm()) || !std::isfinite(out.grad.norm()))
    fail(ErrorKind::Numerical, "convolve_velocity: quadrature produced a non-finite value");
  return out;
}

}  // namespace

int thread_count(int requested) {
  if (requested > 0) return requested;
  if (const char* s = std::getenv("LAB_THREADS")) {
    int n = std::atoi(s);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<VelocitySample> convolve_velocity(const ForcingTensor& F, const std::vector<SpaceTimePoint>& targets,
                                              const InitialVelocity& v0, const ConvolutionOptions& opt) {
  require(bool(F.F), ErrorKind::Config, "convolve_velocity: forcing is empty");
  std::vector<VelocitySample> out(targets.size());
  const int nt = std::min<int>(thread_count(opt.threads), std::max<size_t>(1, targets.size()));
  std::vector<std::exception_ptr> errs(nt);
  auto work = [&](int id) {
    try {
      for (size_t i = id; i < targets.size(); i += nt) out[i] = one_target(F, targets[i], v0, opt);
    } catch (...) {
      errs[id] = std::current_exception();
    }
  };
  if (nt == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nt; ++i) pool.emplace_back(work, i);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
  return out;
}

double pressure_field(const ForcingTensor& F, const Vec2& x, double t, const ConvolutionOptions& opt) {
  const double scale = std::pow(2.0, opt.level);
  const double l = F.lambda(t);
  double P = 0;
  plane_integral(x, l, F.q, l, opt.panels_per_decade * scale, int(opt.n_theta * scale), P,
                 [&](const Vec2& z, double w, double& acc) {
                   Vec2 d = x - z;
                   acc += w * d.dot(F.divergence(z, t)) / (2 * kPi * d.squaredNorm());
                 });
  return P;
}

double forcing_norm(const ForcingTensor& F, double nu, double a, const std::vector<SpaceTimePoint>& samples) {
  double s1 = 0, s2 = 0;
  for (auto& p : samples) {
    const double l = F.lambda(p.t), y = (p.x - F.q).norm() / l;
    auto g = F.gradient(p.x, p.t);
    const double gn = std::sqrt(g[0].squaredNorm() + g[1].squaredNorm());
    s1 = std::max(s1, std::pow(l, 2 - nu) * (1 + std::pow(y, a + 1)) * F.F(p.x, p.t).norm());
    s2 = std::max(s2, std::pow(l, 3 - nu) * (1 + std::pow(y, a + 2)) * gn);
  }
  return s1 + s2;
}

DecayCertificate certify_decay(const ForcingTensor& F, const std::vector<SpaceTimePoint>& targets,
                               const std::vector<SpaceTimePoint>& norm_samples, ConvolutionOptions opt) {
  DecayCertificate c;
  c.nu = F.nu;
  c.a = F.a;
  c.forcing_norm = forcing_norm(F, F.nu, F.a, norm_samples);
  require(c.forcing_norm > 0, ErrorKind::Config, "certify_decay: forcing norm vanishes");
  auto sups = [&](int level) {
    opt.level = level;
    opt.with_gradient = true;
    auto v = convolve_velocity(F, targets, {}, opt);
    double sv = 0, sg = 0;
    for (auto& s : v) {
      const double l = F.lambda(s.t), y1 = 1 + (s.x - F.q).norm() / l;
      sv = std::max(sv, std::pow(l, 1 - F.nu) * y1 * s.v.norm());
      sg = std::max(sg, std::pow(l, 2 - F.nu) * y1 * s.grad.norm());
    }
    return std::pair{sv / c.forcing_norm, sg / c.forcing_norm};
  };
  auto coarse = sups(opt.level);
  auto fine = sups(opt.level + 1);
  c.sup_v = fine.first;
  c.sup_grad = fine.second;
  c.refinement_v = fine.first / coarse.first;
  c.refinement_grad = fine.second / coarse.second;
  return c;
}

std::string DecayCertificate::to_json() const {
  nlohmann::json j{{"nu", nu},
                   {"a", a},
                   {"forcing_norm", forcing_norm},
                   {"sup_ratio", sup_v},
                   {"sup_ratio_grad", sup_grad},
                   {"refinement_ratio", refinement_v},
                   {"refinement_ratio_grad", refinement_grad}};
  return j.dump();
}

void write_velocity_csv(const std::vector<VelocitySample>& v, const std::string& path) {
  std::ofstream os(path);
  require(bool(os), ErrorKind::Io, "write_velocity_csv: cannot open " + path);
  os.precision(17);
  os << "t,x1,x2,v1,v2,P\n";
  for (auto& s : v) os << s.t << ',' << s.x[0] << ',' << s.x[1] << ',' << s.v[0] << ',' << s.v[1] << ',' << s.P << '\n';
}

}  // namespace lab
