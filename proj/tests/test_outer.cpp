#include <doctest.h>

#include <cmath>
#include <random>

#include "lab/outer.hpp"

using namespace lab;

namespace {

double sup_abs(const Eigen::VectorXd& v) { return v.cwiseAbs().maxCoeff(); }

auto zero_st = [](const Vec2&, double) { return 0.0; };
auto zero_init = [](const Vec2&) { return 0.0; };

// independent quintic cutoff: 1 - (10u^3 - 15u^4 + 6u^5), u = s - 1
double eta_ref(double s) {
  if (s <= 1) return 1;
  if (s >= 2) return 0;
  double u = s - 1;
  return 1 - 10 * std::pow(u, 3) + 15 * std::pow(u, 4) - 6 * std::pow(u, 5);
}

}  // namespace

TEST_CASE("domain validation") {
  auto g = DomainGrid::unit_square(16);
  CHECK_NOTHROW(g.validate());
  g.q = Vec2(0.15, 0.5);
  CHECK_THROWS_AS(g.validate(), Error);
  g.q = Vec2(0.5, 0.5);
  g.delta_cut = 0.3;
  CHECK_THROWS_AS(g.validate(), Error);
}

TEST_CASE("heat: zero data gives zero, missing data is rejected") {
  auto g = DomainGrid::unit_square(16);
  HeatOptions o;
  o.t1 = 0.1;
  o.n_steps = 10;
  auto s = solve_heat_dirichlet(g, zero_st, zero_st, zero_init, o);
  REQUIRE(s.frames.size() == 11);
  for (auto& f : s.frames) CHECK(sup_abs(f) == 0);
  CHECK_THROWS_AS(solve_heat_dirichlet(g, nullptr, zero_st, zero_init, o), Error);
}

TEST_CASE("heat: unit forcing grows linearly in time") {
  // interior value ~ t while the boundary layer sqrt(t) stays thin
  for (int n : {64, 128}) {
    auto g = DomainGrid::unit_square(n);
    HeatOptions o;
    for (double t = 0; t <= 1e-2 * (1 + 1e-12); t += 1e-2 / 200) o.times.push_back(t);
    auto s = solve_heat_dirichlet(g, [](const Vec2&, double) { return 1.0; }, zero_st, zero_init, o);
    // least-squares slope of log sup vs log t over the last decade
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (size_t k = 1; k < s.t.size(); ++k) {
      if (s.t[k] < 1e-3) continue;
      double lx = std::log(s.t[k]), ly = std::log(sup_abs(s.frames[k]));
      sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
      ++m;
    }
    double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    CAPTURE(n);
    CHECK(std::abs(slope - 1) < 0.1);
    CHECK(sup_abs(s.frames.back()) <= 1e-2 * (1 + 1e-12));
  }
}

TEST_CASE("heat: separable forcing matches the Fourier solution") {
  // f = sin(pi x) sin(2 pi y): psi = (1 - e^{-5 pi^2 t}) / (5 pi^2) sin(pi x) sin(2 pi y)
  auto g = DomainGrid::unit_square(128);
  HeatOptions o;
  o.t1 = 0.1;
  o.n_steps = 500;
  auto mode = [](const Vec2& x) { return std::sin(kPi * x[0]) * std::sin(2 * kPi * x[1]); };
  auto s = solve_heat_dirichlet(g, [&](const Vec2& x, double) { return mode(x); }, zero_st, zero_init, o);
  const double k = 5 * kPi * kPi;
  double err = 0;
  for (size_t n = 0; n < s.t.size(); n += 50)
    for (int i = 0; i <= g.nx; ++i)
      for (int j = 0; j <= g.ny; ++j) {
        double ex = (1 - std::exp(-k * s.t[n])) / k * mode(g.node(i, j));
        err = std::max(err, std::abs(s.frames[n][g.id(i, j)] - ex));
      }
  CHECK(err < 1e-4);
}

TEST_CASE("heat: maximum principle and linearity") {
  auto g = DomainGrid::unit_square(32);
  HeatOptions o;
  o.t1 = 0.05;
  o.n_steps = 40;
  auto init = [](const Vec2& x) { return std::sin(3 * kPi * x[0]) * std::sin(kPi * x[1]) + 0.5 * std::sin(kPi * x[0]) * std::sin(5 * kPi * x[1]); };
  auto s = solve_heat_dirichlet(g, zero_st, zero_st, init, o);
  for (size_t n = 1; n < s.frames.size(); ++n) CHECK(sup_abs(s.frames[n]) <= sup_abs(s.frames[n - 1]) * (1 + 1e-14));

  auto f = [](const Vec2& x, double t) { return std::cos(x[0] + 2 * t) * x[1]; };
  auto bd = [](const Vec2& x, double t) { return x[0] * x[0] - x[1] + t; };
  auto a = solve_heat_dirichlet(g, f, zero_st, zero_init, o);
  auto b = solve_heat_dirichlet(g, zero_st, bd, zero_init, o);
  auto c = solve_heat_dirichlet(g, zero_st, zero_st, init, o);
  auto all = solve_heat_dirichlet(
      g, [&](const Vec2& x, double t) { return 2 * f(x, t); }, [&](const Vec2& x, double t) { return -3 * bd(x, t); },
      [&](const Vec2& x) { return 0.5 * init(x); }, o);
  for (size_t n = 1; n < all.frames.size(); ++n) {
    Eigen::VectorXd comb = 2 * a.frames[n] - 3 * b.frames[n] + 0.5 * c.frames[n];
    CHECK((all.frames[n] - comb).cwiseAbs().maxCoeff() < 1e-12 * (1 + sup_abs(comb)));
  }
}

TEST_CASE("weights: supports, overlap annulus, weighted norm") {
  OuterWeights w;
  w.T = 1e-2;
  const double t = 0.5 * w.T, lr = w.lambda(t) * w.R(t);
  for (double s : {0.0, 0.5, 0.999, 1.0, 2.0, 3.0, 3.001, 10.0}) {
    Vec2 x = w.q + Vec2(s * lr, 0);
    CAPTURE(s);
    CHECK((w.rho1(x, t) > 0) == (s <= 3));
    CHECK((w.rho2(x, t) > 0) == (s >= 1));
    CHECK((w.rho1(x, t) > 0 && w.rho2(x, t) > 0) == (s >= 1 && s <= 3));
  }
  auto g = DomainGrid::unit_square(40);
  std::vector<SpaceTimeSample> samples = grid_samples(g, {0.0, 0.5 * w.T, 0.9 * w.T});
  for (double s = 0; s < 5; s += 0.05)
    for (double tt : {0.0, 0.5 * w.T, 0.9 * w.T})
      samples.push_back({w.q + Vec2(s * w.lambda(tt) * w.R(tt), 0), tt});
  auto r1 = [&](const Vec2& x, double tt) { return Vec3(w.rho1(x, tt), 0, 0); };
  CHECK(weighted_rhs_norm(r1, w, samples) <= 1);
  CHECK(weighted_rhs_norm([](const Vec2&, double) { return Vec3::Zero().eval(); }, w, samples) == 0);
  auto twice = [&](const Vec2& x, double tt) { return Vec3(0, 0, 2 * w.total(x, tt)); };
  CHECK(weighted_rhs_norm(twice, w, samples) == doctest::Approx(2).epsilon(1e-15));
}

TEST_CASE("sharp norm: zero, homogeneity, refinement on a concentrated forcing") {
  const double T = 0.1, gstar = 0.1, Theta = 0.05, gamma = 0.25;
  SharpNormOptions so;
  so.T = T;
  so.gamma_star = gstar;
  so.holder_pairs = 20000;
  // window [0, t_end] with lambda_*(t_end) = 0.02 keeps lambda_* R resolved
  double lo = 0, hi = T;
  for (int k = 0; k < 200; ++k) {
    double m = 0.5 * (lo + hi);
    (lambda_star(m, T) > 0.02 ? lo : hi) = m;
  }
  const double t_end = lo;
  auto forcing = [&](const Vec2& x, double t) {
    double l = lambda_star(t, T), lr = l * R_of(t, T, gstar);
    return std::pow(l, Theta) / lr * eta_ref((x - Vec2(0.5, 0.5)).norm() / (1.5 * lr));
  };
  std::vector<double> norms;
  for (int n : {64, 128}) {
    auto g = DomainGrid::unit_square(n);
    HeatOptions o;
    o.t1 = t_end;
    o.n_steps = n;
    auto s = solve_heat_dirichlet(g, forcing, zero_st, zero_init, o);
    auto N = solution_norm_sharp({s}, Theta, gamma, so);
    CHECK(std::isfinite(N.total()));
    CHECK(N.total() > 0);
    norms.push_back(N.total());
    if (n == 64) {
      HeatSolution s2 = s;
      for (auto& f : s2.frames) f *= -2.5;
      auto N2 = solution_norm_sharp({s2}, Theta, gamma, so);
      for (int k = 0; k < 6; ++k) CHECK(N2.terms[k] == doctest::Approx(2.5 * N.terms[k]).epsilon(1e-12));
      HeatSolution z = s;
      for (auto& f : z.frames) f.setZero();
      CHECK(solution_norm_sharp({z, z, z}, Theta, gamma, so).total() == 0);
      CHECK(N.to_json().find("\"holder\"") != std::string::npos);
    }
  }
  CAPTURE(norms[0]);
  CAPTURE(norms[1]);
  CHECK(std::abs(norms[1] / norms[0] - 1) < 0.2);
}

TEST_CASE("background Z*: divergence check and heat evolution") {
  auto g = DomainGrid::unit_square(64);
  HeatOptions o;
  o.t1 = 0.02;
  o.n_steps = 200;
  CHECK_THROWS_AS(solve_background_Z([](const Vec2&) { return Vec3::Zero().eval(); }, g, o), Error);
  // linear part -(x - q): divergence -2
  auto lin = [&](const Vec2& x) { return Vec3(-(x[0] - 0.5), -(x[1] - 0.5), 0); };
  HeatOptions o1 = o;
  o1.n_steps = 2;
  CHECK(solve_background_Z(lin, g, o1).div_at_q == doctest::Approx(-2).epsilon(1e-8));
  try {
    solve_background_Z([&](const Vec2& x) { return Vec3(-lin(x)); }, g, o1);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
  }
  // eigenmodes: planar part decays like e^{-5 pi^2 t}, the third like e^{-2 pi^2 t}
  auto z0 = [](const Vec2& x) {
    const double a = kPi * x[0], b = kPi * x[1];
    return Vec3(std::sin(2 * a) * std::sin(b) / (2 * kPi), std::sin(a) * std::sin(2 * b) / (2 * kPi), std::sin(a) * std::sin(b));
  };
  auto B = solve_background_Z(z0, g, o);
  CHECK(B.div_at_q == doctest::Approx(-2).epsilon(1e-6));
  double err = 0;
  for (size_t n = 0; n < B.Z[0].t.size(); n += 20) {
    const double t = B.Z[0].t[n];
    for (int i = 0; i <= g.nx; i += 4)
      for (int j = 0; j <= g.ny; j += 4) {
        Vec3 ex = z0(g.node(i, j));
        ex[0] *= std::exp(-5 * kPi * kPi * t);
        ex[1] *= std::exp(-5 * kPi * kPi * t);
        ex[2] *= std::exp(-2 * kPi * kPi * t);
        for (int c = 0; c < 3; ++c) err = std::max(err, std::abs(B.Z[c].frames[n][g.id(i, j)] - ex[c]));
      }
  }
  CHECK(err < 2e-3);
}

namespace {

OuterIngredients quiet(const ParameterTrack& tr) {
  OuterIngredients in;
  in.track = &tr;
  in.phi = TimeField3::zero();
  in.psi = TimeField3::zero();
  in.v = [](const Vec2&, double) { return Vec2::Zero().eval(); };
  in.corrections = false;
  return in;
}

}  // namespace

TEST_CASE("outer rhs: ingredients, bookkeeping, reduction to the K / remainder block") {
  const double T = 1e-2;
  const Vec2 q(0.5, 0.5);
  auto tr = blowup_track(T, 200, 0.4, q);
  auto in = quiet(tr);
  {
    auto bad = in;
    bad.track = nullptr;
    CHECK_THROWS_AS(assemble_outer_rhs(bad, q, 0.5 * T), Error);
    bad = in;
    bad.v = nullptr;
    CHECK_THROWS_AS(assemble_outer_rhs(bad, q, 0.5 * T), Error);
  }
  const double t = 0.7 * T;
  const ParamState s = tr.at(t);
  const double lr = s.lambda * R_of(t, T, in.gamma_star);
  for (double sr : {0.5, 1.5, 2.5, 10.0}) {
    const Vec2 x = s.xi() + sr * lr * Vec2(std::cos(0.3), std::sin(0.3));
    auto G = assemble_outer_rhs(in, x, t);
    const Vec3 U = approx_U(s, x);
    const auto K = evaluate_K(tr, (x - s.xi()) / s.lambda, t);
    const auto R = evaluate_remainders(tr, x, t);
    const Vec3 expect = (1 - eta_ref(sr)) * (K.K0() + K.K1 + project_orthogonal(R.Rm1, U)) - project_orthogonal(R.R1, U);
    CAPTURE(sr);
    CHECK((G.total - expect).norm() <= 1e-10 * (1 + expect.norm()));
    for (int k : {0, 1, 2, 3, 6, 7, 8, 9, 10}) { CAPTURE(k); CHECK(G.terms[k].norm() == 0); }
  }

  // nonzero phi, Psi*, v: the total is exactly the sum of the reported terms
  auto full = in;
  full.phi.value = [](const Vec2& y, double) { return Vec3(0.05 * std::exp(-y.squaredNorm() / 4), 0.02 * y[0] / (1 + y.squaredNorm()), 0); };
  full.phi.jacobian = nullptr;
  full.psi.value = [](const Vec2& x, double t) { return Vec3(0.1 * x[0], -0.05 * x[1] * x[1], 0.1 * t); };
  full.psi.jacobian = nullptr;
  full.v = [&](const Vec2& x, double) { return Vec2(0.3 * (x[1] - q[1]), -0.2); };
  for (double sr : {0.5, 1.5, 4.0}) {
    const Vec2 x = s.xi() + sr * lr * Vec2(std::cos(1.1), std::sin(1.1));
    auto G = assemble_outer_rhs(full, x, t);
    Vec3 sum = Vec3::Zero();
    for (auto& term : G.terms) sum += term;
    CHECK(G.total == sum);
    // drift terms present exactly off the inner core
    CHECK((G.terms[8].norm() > 0) == (sr > 1));
    CHECK((G.terms[2].norm() > 0) == (sr > 1 && sr < 2));
  }
  // v = 0: every drift term vanishes
  auto still = full;
  still.v = [](const Vec2&, double) { return Vec2::Zero().eval(); };
  auto G0 = assemble_outer_rhs(still, s.xi() + 3 * lr * Vec2(1, 0), t);
  for (int k : {8, 9, 10}) CHECK(G0.terms[k].norm() == 0);

  OuterWeights w;
  w.T = T;
  w.q = q;
  auto rep = outer_rhs_report(full, w, {{s.xi() + 3 * lr * Vec2(1, 0), t}, {s.xi() + 0.5 * lr * Vec2(0, 1), t}});
  CHECK(rep.total_norm > 0);
  CHECK(rep.to_json().find("drift_U") != std::string::npos);
}

TEST_CASE("outer rhs: corrections enter through N_U and the U_t term") {
  const double T = 1e-2;
  auto tr = blowup_track(T, 200, 0.0);
  auto in = quiet(tr);
  in.corrections = true;
  const double t = 0.5 * T;
  const ParamState s = tr.at(t);
  const Vec2 x = s.xi() + 3 * s.lambda * Vec2(0.6, 0.8);
  auto G = assemble_outer_rhs(in, x, t);
  const Vec3 U = approx_U(s, x);
  const Vec2 d = x - s.xi();
  const auto [Pa, Pb] = phi_alpha_beta({s.omega, s.alpha, s.beta});
  auto corr = [&](const Vec2& z) {
    const Vec2 e = z - s.xi();
    return Vec3(phi0_correction(tr, e.norm(), std::atan2(e[1], e[0]), t) + Pa + Pb);
  };
  CHECK((G.terms[7] - corr(x).dot(U) * approx_U_t(s, x)).norm() < 1e-12);
  SmoothField Z;
  Z.value = [&](const Vec2& z) { return project_orthogonal(corr(z), approx_U(s, z)); };
  Z.fd_step = 1e-3 * (s.lambda + d.norm());
  const Vec3 nu = evaluate_N_U(Z, s, x);
  CHECK((G.terms[6] - nu).norm() < 1e-9 * (1 + nu.norm()));
}

TEST_CASE("outer rhs: the drift term carries a positive power of T") {
  // v with unit S-norm: lambda^{nu-1} / (1 + |y|); (1 - eta) v.grad U weighted by rho_2 decays like T^eps
  const double nu = 0.9;
  std::vector<double> Ts{1e-2, 1e-3, 1e-4, 1e-5}, N;
  for (double T : Ts) {
    auto tr = blowup_track(T, 200, 0.0);
    auto in = quiet(tr);
    in.v = [T, nu](const Vec2& x, double t) {
      const double l = lambda_star(t, T);
      return Vec2(Vec2(0.6, 0.8) * std::pow(l, nu - 1) / (1 + x.norm() / l));
    };
    OuterWeights w;
    w.T = T;
    w.q = Vec2::Zero();
    std::vector<SpaceTimeSample> samples;
    for (double t : {0.0, 0.5 * T, 0.9 * T}) {
      const double lr = w.lambda(t) * w.R(t);
      for (double r = lr; r < 0.5; r *= 1.5) samples.push_back({Vec2(r, 0.3 * r), t});
    }
    double m = 0;
    for (auto& smp : samples) m = std::max(m, assemble_outer_rhs(in, smp.x, smp.t).terms[8].norm() / w.total(smp.x, smp.t));
    N.push_back(m);
  }
  for (size_t k = 1; k < N.size(); ++k) CHECK(N[k] < N[k - 1]);
  const double eps = std::log(N.front() / N.back()) / std::log(Ts.front() / Ts.back());
  CAPTURE(eps);
  CHECK(eps > 0);
}
