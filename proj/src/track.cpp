#include "lab/track.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace lab {

namespace {

// second-order derivative on a nonuniform grid
std::vector<double> nonuniform_derivative(const std::vector<double>& t, const std::vector<double>& f) {
  const size_t n = t.size();
  std::vector<double> d(n, 0.0);
  if (n == 2) {
    d[0] = d[1] = (f[1] - f[0]) / (t[1] - t[0]);
    return d;
  }
  for (size_t i = 0; i < n; ++i) {
    size_t a = i == 0 ? 0 : (i == n - 1 ? n - 3 : i - 1);
    double x0 = t[a], x1 = t[a + 1], x2 = t[a + 2], x = t[i];
    // derivative of the Lagrange quadratic through (x0,x1,x2) at x
    double l0 = ((x - x1) + (x - x2)) / ((x0 - x1) * (x0 - x2));
    double l1 = ((x - x0) + (x - x2)) / ((x1 - x0) * (x1 - x2));
    double l2 = ((x - x0) + (x - x1)) / ((x2 - x0) * (x2 - x1));
    d[i] = l0 * f[a] + l1 * f[a + 1] + l2 * f[a + 2];
  }
  return d;
}

struct Hermite {
  double v, d;
};

Hermite hermite(double t0, double t1, double f0, double f1, double d0, double d1, double t) {
  double h = t1 - t0, s = (t - t0) / h;
  double s2 = s * s, s3 = s2 * s;
  double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s, h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  double g00 = (6 * s2 - 6 * s) / h, g10 = 3 * s2 - 4 * s + 1, g01 = (-6 * s2 + 6 * s) / h, g11 = 3 * s2 - 2 * s;
  return {h00 * f0 + h10 * h * d0 + h01 * f1 + h11 * h * d1, g00 * f0 + g10 * d0 + g01 * f1 + g11 * d1};
}

}  // namespace

ParameterTrack ParameterTrack::from_samples(double T, std::vector<double> t, std::vector<double> lambda,
                                            std::vector<double> xi1, std::vector<double> xi2,
                                            std::vector<double> omega, std::vector<double> alpha,
                                            std::vector<double> beta) {
  const size_t n = t.size();
  require(n >= 2, ErrorKind::Config, "parameter track needs at least two samples");
  for (auto* v : {&lambda, &xi1, &xi2, &omega, &alpha, &beta})
    require(v->size() == n, ErrorKind::Config, "parameter track columns differ in length");
  for (size_t i = 1; i < n; ++i)
    require(t[i] > t[i - 1], ErrorKind::Config, "parameter track times must be strictly increasing");
  for (size_t i = 0; i < n; ++i)
    require(lambda[i] > 0 || (i == n - 1 && t[i] >= T), ErrorKind::Config,
            "parameter track: lambda must be positive before T");
  auto dl = nonuniform_derivative(t, lambda), dx1 = nonuniform_derivative(t, xi1), dx2 = nonuniform_derivative(t, xi2),
       dw = nonuniform_derivative(t, omega), da = nonuniform_derivative(t, alpha), db = nonuniform_derivative(t, beta);
  ParameterTrack tr;
  tr.T_ = T;
  tr.samples_.resize(n);
  for (size_t i = 0; i < n; ++i)
    tr.samples_[i] = {t[i], lambda[i], xi1[i], xi2[i], omega[i], alpha[i], beta[i],
                      dl[i], dx1[i], dx2[i], dw[i], da[i], db[i]};
  return tr;
}

ParameterTrack ParameterTrack::from_function(double T, const std::vector<double>& times, StateFn fn) {
  require(times.size() >= 2, ErrorKind::Config, "parameter track needs at least two samples");
  ParameterTrack tr;
  tr.T_ = T;
  tr.fn_ = std::move(fn);
  for (double t : times) {
    ParamState s = tr.fn_(t);
    s.t = t;
    tr.samples_.push_back(s);
  }
  for (size_t i = 1; i < tr.samples_.size(); ++i)
    require(tr.samples_[i].t > tr.samples_[i - 1].t, ErrorKind::Config, "parameter track times must be increasing");
  return tr;
}

ParamState ParameterTrack::at(double t) const {
  if (fn_ && t >= samples_.front().t) {
    ParamState s = fn_(t);
    s.t = t;
    return s;
  }
  const auto& S = samples_;
  if (t <= S.front().t) {
    // linear continuation backwards in time
    ParamState s = S.front();
    double d = t - s.t;
    s.t = t;
    if (extension == HistoryExtension::Zero) {
      s.dlambda = s.dxi1 = s.dxi2 = s.domega = s.dalpha = s.dbeta = 0;
      return s;
    }
    s.lambda += d * s.dlambda;
    s.xi1 += d * s.dxi1;
    s.xi2 += d * s.dxi2;
    s.omega += d * s.domega;
    s.alpha += d * s.dalpha;
    s.beta += d * s.dbeta;
    return s;
  }
  require(t <= S.back().t * (1 + 1e-14) + 1e-300, ErrorKind::Domain, "parameter track evaluated past its last sample");
  if (t >= S.back().t) return S.back();
  auto it = std::upper_bound(S.begin(), S.end(), t, [](double x, const ParamState& s) { return x < s.t; });
  const ParamState& a = *(it - 1);
  const ParamState& b = *it;
  ParamState s;
  s.t = t;
  auto h = [&](double ParamState::*v, double ParamState::*dv, double ParamState::*out, double ParamState::*dout) {
    Hermite r = hermite(a.t, b.t, a.*v, b.*v, a.*dv, b.*dv, t);
    s.*out = r.v;
    s.*dout = r.d;
  };
  h(&ParamState::lambda, &ParamState::dlambda, &ParamState::lambda, &ParamState::dlambda);
  h(&ParamState::xi1, &ParamState::dxi1, &ParamState::xi1, &ParamState::dxi1);
  h(&ParamState::xi2, &ParamState::dxi2, &ParamState::xi2, &ParamState::dxi2);
  h(&ParamState::omega, &ParamState::domega, &ParamState::omega, &ParamState::domega);
  h(&ParamState::alpha, &ParamState::dalpha, &ParamState::alpha, &ParamState::dalpha);
  h(&ParamState::beta, &ParamState::dbeta, &ParamState::beta, &ParamState::dbeta);
  return s;
}

cplx ParameterTrack::pdot(double s) const {
  if (s < samples_.front().t) {
    if (extension == HistoryExtension::Zero) return 0;
    return samples_.front().pdot();
  }
  return at(s).pdot();
}

double lambda_star(double t, double T) {
  require(T > 0 && T < 1, ErrorKind::Domain, "lambda_star: need 0 < T < 1");
  require(t < T, ErrorKind::Domain, "lambda_star: need t < T");
  double l = std::log(T - t);
  return std::abs(std::log(T)) * (T - t) / (l * l);
}

double lambda_star_dot(double t, double T) {
  require(t < T, ErrorKind::Domain, "lambda_star_dot: need t < T");
  // d/dt of |log T|(T-t)/log^2(T-t)
  double l = std::log(T - t);
  return std::abs(std::log(T)) * (-1 / (l * l) + 2 / (l * l * l));
}

double R_of(double t, double T, double gamma_star) { return std::pow(lambda_star(t, T), -gamma_star); }

ParameterTrack blowup_track(double T, int n_samples, double omega0, Vec2 q) {
  // times clustered toward T, ending at T(1 - 1e-6)
  std::vector<double> times(n_samples);
  for (int i = 0; i < n_samples; ++i) times[i] = T * (1 - std::pow(1e-6, double(i) / (n_samples - 1)));
  times.front() = 0;
  return ParameterTrack::from_function(T, times, [T, omega0, q](double t) {
    ParamState s;
    s.lambda = lambda_star(t, T);
    s.dlambda = lambda_star_dot(t, T);
    s.omega = omega0;
    s.xi1 = q.x();
    s.xi2 = q.y();
    return s;
  });
}

void write_track_csv(const ParameterTrack& tr, const std::string& path) {
  std::ofstream f(path);
  if (!f) fail(ErrorKind::Io, "cannot write " + path);
  f << "t,lambda,xi1,xi2,omega,alpha,beta\n" << std::setprecision(17);
  for (auto& s : tr.samples())
    f << s.t << ',' << s.lambda << ',' << s.xi1 << ',' << s.xi2 << ',' << s.omega << ',' << s.alpha << ',' << s.beta
      << '\n';
  if (!f) fail(ErrorKind::Io, "write failed for " + path);
}

ParameterTrack read_track_csv(const std::string& path, double T) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::Io, "cannot read " + path);
  std::string line;
  std::getline(f, line);
  require(line.rfind("t,lambda,xi1,xi2,omega,alpha,beta", 0) == 0, ErrorKind::Config,
          path + ": expected header t,lambda,xi1,xi2,omega,alpha,beta");
  std::vector<double> c[7];
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    for (int k = 0; k < 7; ++k) {
      require(static_cast<bool>(std::getline(ss, cell, ',')), ErrorKind::Config, path + ": short row");
      c[k].push_back(std::stod(cell));
    }
  }
  return ParameterTrack::from_samples(T, c[0], c[1], c[2], c[3], c[4], c[5], c[6]);
}

}  // namespace lab
