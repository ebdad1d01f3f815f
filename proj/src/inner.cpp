#include "lab/inner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "lab/quadrature.hpp"
#include "lab/track.hpp"

namespace lab {

// ---- Fourier modes ------------------------------------------------------------------

ModeMap fourier_decompose(const PolarGridField& h, double tangency_tol) {
  const auto& g = h.grid;
  const int N = g.n_theta(), nr = g.n_rho();
  double hmax = 0;
  for (auto& v : h.values) hmax = std::max(hmax, v.norm());
  ModeMap out;
  for (int k = -N / 2; k < N / 2; ++k) out[k] = RadialMode{k, g.spec().spacing, g.rho(), std::vector<cplx>(nr)};
  std::vector<cplx> c(N);
  for (int i = 0; i < nr; ++i) {
    for (int m = 0; m < N; ++m) {
      PolarPoint y{g.rho()[i], g.theta()[m]};
      const Vec3& v = h.at(i, m);
      Vec3 W = eval_bulk_profile(y);
      if (std::abs(v.dot(W)) > tangency_tol * std::max(hmax, 1e-300))
        fail(ErrorKind::Contract, "fourier_decompose: field is not tangent to W at rho = " + std::to_string(y.rho));
      auto f = eval_frame(y);
      c[m] = cplx(v.dot(f.e1), v.dot(f.e2));
    }
    for (auto& [k, mode] : out) {
      cplx acc = 0;
      for (int m = 0; m < N; ++m) acc += c[m] * std::polar(1.0, -k * g.theta()[m]);
      mode.values[i] = acc / double(N);
    }
  }
  return out;
}

PolarGridField reconstruct(const ModeMap& modes, const PolarGrid& grid) {
  PolarGridField out{grid, std::vector<Vec3>(grid.rho().size() * grid.theta().size(), Vec3::Zero())};
  for (auto& [k, mode] : modes)
    require(mode.values.size() == grid.rho().size(), ErrorKind::Config, "reconstruct: mode and grid sizes differ");
  for (int i = 0; i < grid.n_rho(); ++i)
    for (int m = 0; m < grid.n_theta(); ++m) {
      PolarPoint y{grid.rho()[i], grid.theta()[m]};
      cplx c = 0;
      for (auto& [k, mode] : modes) c += mode.values[i] * std::polar(1.0, k * y.theta);
      auto f = eval_frame(y);
      out.at(i, m) = c.real() * f.e1 + c.imag() * f.e2;
    }
  return out;
}

PolarGridField lift_mode(const RadialMode& f, int n_theta) {
  const int n = static_cast<int>(f.rho.size());
  PolarGrid g({f.rho.front(), f.rho.back(), n, n_theta, f.spacing});
  for (int i = 0; i < n; ++i)
    require(std::abs(g.rho()[i] - f.rho[i]) <= 1e-9 * f.rho[i], ErrorKind::Config,
            "lift_mode: radial nodes are not evenly spaced in the declared spacing");
  ModeMap one{{f.k, f}};
  return reconstruct(one, g);
}

// ---- time and radius ----------------------------------------------------------------

InnerTrack InnerTrack::constant(double lambda, double R) {
  return {[lambda](double) { return lambda; }, [R](double) { return R; }, [](double) { return 0.0; }};
}

InnerTrack InnerTrack::blowup(double T, double g) {
  InnerTrack tr;
  tr.lambda = [T](double t) { return lambda_star(t, T); };
  tr.R = [T, g](double t) { return R_of(t, T, g); };
  tr.dR = [T, g](double t) { return -g * R_of(t, T, g) * lambda_star_dot(t, T) / lambda_star(t, T); };
  return tr;
}

std::vector<double> time_rescale(const std::vector<double>& t, const std::function<double(double)>& lambda,
                                 double tol) {
  std::vector<double> tau(t.size(), 0.0);
  for (size_t i = 1; i < t.size(); ++i) {
    require(t[i] > t[i - 1], ErrorKind::Domain, "time_rescale: times must increase");
    auto f = [&](double s) {
      double l = lambda(s);
      require(l > 0, ErrorKind::Domain, "time_rescale: lambda must be positive");
      return 1 / (l * l);
    };
    tau[i] = tau[i - 1] + quad::gk(f, t[i - 1], t[i], tol).value;
  }
  return tau;
}

// ---- solvers --------------------------------------------------------------------------

namespace {

enum class Scheme { Generic, Projected0, FluxM1, Ortho1 };

double w_rho(double r) { return -2 / (1 + r * r); }

// rho^2 times the mode-k potential, with the (k-1)^2 singular part split off analytically
double vhat(int k, double r) {
  double d = 1 + r * r;
  return (k - 1) * (k - 1) + r * r * (4.0 * (k - 2) / d + 8 * r * r / (d * d));
}

double zm1_sq(double r) {
  double z = 2 * r * r / (1 + r * r);
  return z * z;
}

// (I - dt A) with A tridiagonal (lo, di, up), solved by the Thomas algorithm
std::vector<cplx> implicit_solve(const std::vector<double>& lo, const std::vector<double>& di,
                                 const std::vector<double>& up, double dt, std::vector<cplx> rhs) {
  const size_t n = rhs.size();
  std::vector<double> cp(n);
  double b = 1 - dt * di[0];
  cp[0] = -dt * up[0] / b;
  rhs[0] /= b;
  for (size_t i = 1; i < n; ++i) {
    double a = -dt * lo[i];
    double m = (1 - dt * di[i]) - a * cp[i - 1];
    cp[i] = i + 1 < n ? -dt * up[i] / m : 0;
    rhs[i] = (rhs[i] - a * rhs[i - 1]) / m;
  }
  for (size_t i = n - 1; i-- > 0;) rhs[i] -= cp[i] * rhs[i + 1];
  return rhs;
}

// continuum orthogonality defect |int_0^b h Z rho| / int_0^b |h||Z| rho
double ortho_defect(const RadialForcing& h, int k, double t, double b) {
  auto re = quad::gk([&](double r) { return h(r, t).real() * mode_kernel(k, r) * r; }, 0.0, b, 1e-14).value;
  auto im = quad::gk([&](double r) { return h(r, t).imag() * mode_kernel(k, r) * r; }, 0.0, b, 1e-14).value;
  auto ab = quad::gk([&](double r) { return std::abs(h(r, t)) * mode_kernel(k, r) * r; }, 0.0, b, 1e-14).value;
  return ab > 0 ? std::abs(cplx(re, im)) / ab : 0.0;
}

ModeSolution run(int k, Scheme scheme, const RadialForcing& h, const InnerTrack& tr, const InnerSolveOptions& opt) {
  std::vector<double> times = opt.times;
  if (times.empty()) {
    require(opt.n_steps >= 1 && opt.t1 > opt.t0, ErrorKind::Config, "inner solve: need t1 > t0 and n_steps >= 1");
    for (int n = 0; n <= opt.n_steps; ++n) times.push_back(opt.t0 + (opt.t1 - opt.t0) * n / opt.n_steps);
  }
  require(times.size() >= 2, ErrorKind::Config, "inner solve: need at least two times");
  require(opt.n_rho >= 8, ErrorKind::Config, "inner solve: n_rho must be at least 8");
  require(opt.radius_mult > 0 && opt.rho_min > 0, ErrorKind::Config, "inner solve: bad radius settings");
  require(opt.store_every >= 1, ErrorKind::Config, "inner solve: store_every must be positive");
  const auto tau = time_rescale(times, tr.lambda);

  const int N = opt.n_rho, n = N - 1;
  const double M = opt.radius_mult;
  const double smin = opt.rho_min / (M * tr.R(times[0]));
  require(smin < 1, ErrorKind::Config, "inner solve: rho_min lies outside the ball");
  const double hx = -std::log(smin) / (N - 1);
  std::vector<double> s(N);
  for (int i = 0; i < N; ++i) s[i] = std::exp(std::log(smin) + i * hx);
  s[N - 1] = 1;
  const double eh = std::exp(0.5 * hx);
  const int kk = scheme == Scheme::Projected0 ? 0 : (scheme == Scheme::FluxM1 ? -1 : (scheme == Scheme::Ortho1 ? 1 : k));
  const double ghost = scheme == Scheme::FluxM1 ? 1.0 : std::exp(-std::abs(kk - 1) * hx);

  ModeSolution out;
  out.k = kk;
  std::vector<cplx> u(n, 0.0);
  std::vector<double> rho(N), lo(n), di(n), up(n);

  auto physical = [&](double t) {
    double MR = M * tr.R(t);
    for (int i = 0; i < N; ++i) rho[i] = MR * s[i];
  };
  auto store = [&](size_t step, cplx c0, cplx G) {
    RadialMode m{kk, Spacing::Geometric, rho, std::vector<cplx>(N, 0.0)};
    for (int i = 0; i < n; ++i) m.values[i] = scheme == Scheme::FluxM1 ? std::sqrt(zm1_sq(rho[i])) * u[i] : u[i];
    out.t.push_back(times[step]);
    out.tau.push_back(tau[step]);
    out.phi.push_back(std::move(m));
    if (scheme == Scheme::Projected0) {
      out.c0.push_back(c0);
      out.G.push_back(G);
    }
  };

  // moment kernel for mode 0 and its norm over the plane
  auto z0 = [](double r) { return r * w_rho(r); };
  const double z0_norm = scheme == Scheme::Projected0
                             ? quad::half_line([&](double r) {
                                 double w = w_rho(r), z = z0(r);
                                 return w * w * z * z * r;
                               }).value
                             : 1.0;

  physical(times[0]);
  store(0, 0.0, 0.0);
  for (size_t step = 0; step + 1 < times.size(); ++step) {
    const double t = times[step + 1];
    const double dt = tau[step + 1] - tau[step];
    physical(t);
    const double lam = tr.lambda(t), R = tr.R(t);
    const double drift = lam * lam * tr.dR(t) / R;
    const double MR = M * R;

    // operator rows
    for (int i = 0; i < n; ++i) {
      const double r = rho[i];
      if (scheme == Scheme::FluxM1) {
        double q = 1 / (r * r * zm1_sq(r) * hx * hx);
        double zp = zm1_sq(r * eh), zm = zm1_sq(r / eh);
        lo[i] = q * zm - drift / (2 * hx);
        up[i] = q * zp + drift / (2 * hx);
        di[i] = -q * (zp + zm);
      } else {
        double q = 1 / (r * r * hx * hx);
        lo[i] = q - drift / (2 * hx);
        up[i] = q + drift / (2 * hx);
        di[i] = -2 * q - vhat(kk, r) / (r * r);
      }
    }
    di[0] += lo[0] * ghost;

    // forcing
    std::vector<cplx> src(n);
    if (scheme == Scheme::Ortho1 || scheme == Scheme::FluxM1) {
      double d = ortho_defect(h, kk, t, MR);
      out.ortho_defect.push_back(d);
      if (d > opt.ortho_tol)
        fail(ErrorKind::Contract, "inner solve: forcing is not orthogonal to the mode " + std::to_string(kk) +
                                      " kernels at t = " + std::to_string(t) + " (relative defect " +
                                      std::to_string(d) + ")");
    }
    const double R2 = 2 * R;
    auto chi = [&](double r) { return r < R2 ? w_rho(r) * w_rho(r) : 0.0; };
    if (scheme == Scheme::FluxM1) {
      // flux of f0: Phi(rho) = int_0^rho h Z_{-1} r dr on half nodes, Simpson per cell in log rho
      auto g = [&](double r, bool shape) {
        double z = mode_kernel(-1, r);
        return (shape ? cplx(chi(r) * z) : h(r, t)) * z * r * r;
      };
      auto flux = [&](bool shape) {
        std::vector<cplx> Phi(N + 1, 0.0);  // Phi[i] at rho_{i-1/2}; Phi[N] on the circle
        for (int i = 0; i < N - 1; ++i)
          Phi[i + 1] = Phi[i] + hx / 6 * (g(rho[i] / eh, shape) + 4.0 * g(rho[i], shape) + g(rho[i] * eh, shape));
        Phi[N] = Phi[N - 1] + hx / 4 * (g(rho[N - 1] / eh, shape) + g(rho[N - 1], shape));
        return Phi;
      };
      auto Ph = flux(false), Ps = flux(true);
      const cplx c = Ph[N] / Ps[N];
      for (int i = 0; i < n; ++i) {
        double r = rho[i];
        src[i] = ((Ph[i + 1] - Ph[i]) - c * (Ps[i + 1] - Ps[i])) / (hx * r * r * zm1_sq(r));
      }
    } else {
      for (int i = 0; i < n; ++i) src[i] = h(rho[i], t);
      if (scheme == Scheme::Ortho1) {
        // trapezoid in log rho, the Dirichlet node included
        const double wN = rho[N - 1] * rho[N - 1] * hx * 0.5 * mode_kernel(1, rho[N - 1]);
        cplx a = wN * h(rho[N - 1], t);
        double b = 0;
        for (int i = 0; i < n; ++i) {
          double w = rho[i] * rho[i] * hx * (i == 0 ? 0.5 : 1.0) * mode_kernel(1, rho[i]);
          a += w * src[i];
          b += w * chi(rho[i]) * mode_kernel(1, rho[i]);
        }
        for (int i = 0; i < n; ++i) src[i] -= a / b * chi(rho[i]) * mode_kernel(1, rho[i]);
      }
    }

    std::vector<cplx> rhs(n);
    for (int i = 0; i < n; ++i) rhs[i] = u[i] + dt * src[i];
    auto ua = implicit_solve(lo, di, up, dt, rhs);
    cplx c0 = 0, G = 0;
    if (scheme == Scheme::Projected0) {
      std::vector<cplx> sh(n);
      for (int i = 0; i < n; ++i) sh[i] = dt * chi(rho[i]) * z0(rho[i]);
      auto ub = implicit_solve(lo, di, up, dt, sh);
      cplx ma = 0, mb = 0;
      for (int i = 0; i < n; ++i) {
        double w = rho[i] * rho[i] * hx * (i == 0 ? 0.5 : 1.0) * z0(rho[i]);
        ma += w * ua[i];
        mb += w * ub[i];
      }
      c0 = -ma / mb;
      for (int i = 0; i < n; ++i) ua[i] += c0 * ub[i];
      double hre = quad::gk([&](double r) { return h(r, t).real() * z0(r) * r; }, 0.0, MR, 1e-13).value;
      double him = quad::gk([&](double r) { return h(r, t).imag() * z0(r) * r; }, 0.0, MR, 1e-13).value;
      G = -c0 - cplx(hre, him) / z0_norm;
    }
    for (auto& v : ua)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag()) || std::abs(v) > 1e100)
        fail(ErrorKind::Numerical, "inner solve: step rejected at t = " + std::to_string(t) + " (non-finite state)");
    u = std::move(ua);
    if ((step + 1) % opt.store_every == 0 || step + 2 == times.size()) store(step + 1, c0, G);
  }
  for (auto& m : out.phi) out.boundary_max = std::max(out.boundary_max, std::abs(m.values.back()));
  return out;
}

}  // namespace

ModeSolution solve_mode(int k, const RadialForcing& h, const InnerTrack& tr, const InnerSolveOptions& opt) {
  return run(k, Scheme::Generic, h, tr, opt);
}

ModeSolution solve_mode0_projected(const RadialForcing& h, const InnerTrack& tr, const InnerSolveOptions& opt) {
  return run(0, Scheme::Projected0, h, tr, opt);
}

ModeSolution solve_mode_m1(const RadialForcing& h, const InnerTrack& tr, const InnerSolveOptions& opt) {
  return run(-1, Scheme::FluxM1, h, tr, opt);
}

ModeSolution solve_mode1_div(const RadialForcing& h, const InnerTrack& tr, const InnerSolveOptions& opt) {
  return run(1, Scheme::Ortho1, h, tr, opt);
}

double mode_sup_weighted(const ModeSolution& s, const InnerTrack& tr, const std::function<double(double)>& lstar,
                         double nu, double b, double report_mult) {
  double best = 0;
  for (size_t n = 0; n < s.phi.size(); ++n) {
    const double ls = lstar(s.t[n]);
    require(ls > 0, ErrorKind::Domain, "mode_sup_weighted: lambda_* must be positive");
    const double lim = report_mult * tr.R(s.t[n]) * (1 + 1e-12);
    const auto& m = s.phi[n];
    for (size_t i = 0; i < m.rho.size() && m.rho[i] <= lim; ++i)
      best = std::max(best, std::abs(m.values[i]) * std::pow(1 + m.rho[i], b) / std::pow(ls, nu));
  }
  return best;
}

// ---- mode -1 fundamental solution --------------------------------------------------

DriftBound fundamental_drift_bound(double rho, double eps) {
  require(rho > 0 && eps > 0, ErrorKind::Domain, "fundamental_drift_bound: need rho > 0 and eps > 0");
  // r^2 = rho^2 + 2 eps^2 u turns int_rho^inf r^5/(1+r^2)^2 e^{-r^2/2eps^2} dr into
  // eps^2 e^{-rho^2/2eps^2} int_0^inf r^4/(1+r^2)^2 e^{-u} du
  auto f = [&](double u) {
    double r2 = rho * rho + 2 * eps * eps * u;
    return r2 * r2 / ((1 + r2) * (1 + r2)) * std::exp(-u);
  };
  double I = quad::de(f, 0.0, std::numeric_limits<double>::infinity(), 1e-12).value;
  double d = 1 + rho * rho;
  DriftBound b;
  b.lhs = d * d / (2 * kPi * std::pow(rho, 5)) * std::exp(-rho * rho / (2 * eps * eps)) * I;
  b.rhs = (1 + std::pow(rho, 4)) / (2 * kPi * std::pow(rho, 5));
  b.envelope = d * d / (2 * kPi * std::pow(rho, 5)) * std::exp(-rho * rho / (2 * eps * eps));
  return b;
}

double log_zm1_sq_dd(double rho) {
  double d = 1 + rho * rho;
  return -4 / (rho * rho) + 4 * (rho * rho - 1) / (d * d);
}

// ---- weighted norms ----------------------------------------------------------------------

namespace {

// first and second theta derivatives of a periodic ring, by DFT (Nyquist term dropped from the first)
void angular_derivatives(const std::vector<double>& u, std::vector<double>& d1, std::vector<double>& d2) {
  const int N = static_cast<int>(u.size());
  std::vector<cplx> c(N);
  for (int k = 0; k < N; ++k) {
    cplx acc = 0;
    for (int m = 0; m < N; ++m) acc += u[m] * std::polar(1.0, -2 * kPi * k * m / N);
    c[k] = acc / double(N);
  }
  d1.assign(N, 0.0);
  d2.assign(N, 0.0);
  for (int k = 0; k < N; ++k) {
    int kk = k <= N / 2 ? k : k - N;
    for (int m = 0; m < N; ++m) {
      cplx e = c[k] * std::polar(1.0, 2 * kPi * k * m / N);
      if (2 * k != N) d1[m] += (cplx(0, kk) * e).real();
      d2[m] += -double(kk) * kk * e.real();
    }
  }
}

}  // namespace

NormKind parse_norm_kind(const std::string& s) {
  if (s == "nu_a") return NormKind::NuA;
  if (s == "star") return NormKind::Star;
  if (s == "in") return NormKind::In;
  if (s == "star2") return NormKind::Star2;
  if (s == "star3") return NormKind::Star3;
  fail(ErrorKind::Config, "unknown norm kind '" + s + "' (expected nu_a, star, in, star2, star3)");
}

std::string norm_kind_name(NormKind k) {
  switch (k) {
    case NormKind::NuA:
      return "nu_a";
    case NormKind::Star:
      return "star";
    case NormKind::In:
      return "in";
    case NormKind::Star2:
      return "star2";
    default:
      return "star3";
  }
}

double weighted_norm(const FieldSeries& f, const WeightedNormSpec& spec, const NormTrack& tr) {
  require(f.t.size() == f.frames.size(), ErrorKind::Config, "weighted_norm: times and frames differ in length");
  double best = 0;
  for (size_t n = 0; n < f.frames.size(); ++n) {
    const auto& F = f.frames[n];
    const auto& g = F.grid;
    const int nr = g.n_rho(), nt = g.n_theta();
    const double ls = tr.lambda_star(f.t[n]);
    require(ls > 0, ErrorKind::Domain, "weighted_norm: lambda_* must be positive");
    const double R = tr.R ? tr.R(f.t[n]) : 0.0;
    const double scale = std::pow(ls, spec.nu);

    if (spec.kind == NormKind::NuA) {
      for (int i = 0; i < nr; ++i)
        for (int m = 0; m < nt; ++m)
          best = std::max(best, F.at(i, m).norm() * std::pow(1 + g.rho()[i], spec.a) / scale);
      continue;
    }
    // derivatives of the Cartesian components
    std::vector<double> grad2(nr * nt, 0.0), hess2(nr * nt, 0.0);
    std::vector<double> line(nr), lt(nr), d1, d2, dt1, dt2;
    for (int c = 0; c < 3; ++c) {
      std::vector<double> uth(nr * nt), utth(nr * nt);
      for (int i = 0; i < nr; ++i) {
        std::vector<double> ring(nt), r1, r2;
        for (int m = 0; m < nt; ++m) ring[m] = F.at(i, m)[c];
        angular_derivatives(ring, r1, r2);
        for (int m = 0; m < nt; ++m) uth[g.index(i, m)] = r1[m], utth[g.index(i, m)] = r2[m];
      }
      for (int m = 0; m < nt; ++m) {
        for (int i = 0; i < nr; ++i) {
          line[i] = F.at(i, m)[c];
          lt[i] = uth[g.index(i, m)];
        }
        radial_derivatives(g.rho(), g.spec().spacing, line, d1, d2);
        radial_derivatives(g.rho(), g.spec().spacing, lt, dt1, dt2);
        for (int i = 0; i < nr; ++i) {
          const double r = g.rho()[i];
          const size_t id = g.index(i, m);
          const double utt = utth[id];
          grad2[id] += d1[i] * d1[i] + lt[i] * lt[i] / (r * r);
          double mixed = dt1[i] / r - lt[i] / (r * r);
          double ang = utt / (r * r) + d1[i] / r;
          hess2[id] += d2[i] * d2[i] + 2 * mixed * mixed + ang * ang;
        }
      }
    }
    const double lim = tr.domain_mult * R * (1 + 1e-12);
    for (int i = 0; i < nr; ++i) {
      const double r = g.rho()[i];
      if (r > lim) break;
      const double y1 = 1 + r;
      double wgt = 0;
      switch (spec.kind) {
        case NormKind::Star:
          wgt = std::max(std::pow(R, spec.delta * (5 - spec.a)) / (y1 * y1 * y1), std::pow(y1, 2 - spec.a));
          break;
        case NormKind::In:
          wgt = std::pow(y1, 2 - spec.a);
          break;
        case NormKind::Star2:
          wgt = R * R / y1;
          break;
        default:
          wgt = 1;
      }
      for (int m = 0; m < nt; ++m) {
        const size_t id = g.index(i, m);
        double num = F.at(i, m).norm() + y1 * std::sqrt(grad2[id]) + y1 * y1 * std::sqrt(hess2[id]);
        best = std::max(best, num / (scale * wgt));
      }
    }
  }
  return best;
}

FieldSeries lift_series(const ModeSolution& s, int n_theta) {
  FieldSeries f;
  f.t = s.t;
  for (auto& m : s.phi) f.frames.push_back(lift_mode(m, n_theta));
  return f;
}

void write_mode_csv(const ModeSolution& s, const std::string& path) {
  std::ofstream os(path);
  require(bool(os), ErrorKind::Io, "write_mode_csv: cannot open " + path);
  os.precision(17);
  os << "t,rho,re_phi,im_phi\n";
  for (size_t n = 0; n < s.phi.size(); ++n)
    for (size_t i = 0; i < s.phi[n].rho.size(); ++i)
      os << s.t[n] << ',' << s.phi[n].rho[i] << ',' << s.phi[n].values[i].real() << ','
         << s.phi[n].values[i].imag() << '\n';
}

std::string certification_json(int mode, NormKind kind, double value, double refinement_ratio) {
  nlohmann::json j{{"mode", mode}, {"norm_kind", norm_kind_name(kind)}, {"value", value},
                   {"refinement_ratio", refinement_ratio}};
  return j.dump();
}

}  // namespace lab
