#include <doctest.h>

#include <cmath>
#include <random>

#include "lab/spectral.hpp"
#include "lab/stokes.hpp"
#include "lab/track.hpp"

using namespace lab;

TEST_CASE("Oseen tensor: symmetry, divergence, decay, derivative") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> ux(-3, 3), ut(-4, 1);
  for (int n = 0; n < 200; ++n) {
    Vec2 x(ux(rng), ux(rng));
    double t = std::pow(10.0, ut(rng));
    auto g = oseen_tensor_grad(x, t);
    CHECK(g.S(0, 1) == doctest::Approx(g.S(1, 0)).epsilon(1e-14));
    CHECK((g.S - oseen_tensor(x, t)).norm() <= 1e-14 * g.S.norm());
    // columns divergence-free: sum_i d_i S_ij
    const double scale = 1 / std::pow(x.squaredNorm() + t, 1.5);
    for (int j = 0; j < 2; ++j) CHECK(std::abs(g.dS[0](0, j) + g.dS[1](1, j)) < 1e-10 * scale);
    // analytic derivative against centered differences of S
    const double h = 1e-5 * std::sqrt(x.squaredNorm() + t);
    for (int k = 0; k < 2; ++k) {
      Vec2 e = Vec2::Zero();
      e[k] = h;
      Mat2 fd = (oseen_tensor(x + e, t) - oseen_tensor(x - e, t)) / (2 * h);
      CHECK((fd - g.dS[k]).norm() < 1e-6 * scale);
    }
  }
  // (|x|^2 + t) |S| bounded on a log-spaced grid
  double sup = 0;
  for (double r = 1e-4; r < 1e4; r *= 1.5)
    for (double t = 1e-6; t < 1e4; t *= 2) sup = std::max(sup, (r * r + t) * oseen_tensor(Vec2(r, 0), t).norm());
  CHECK(sup < 1);
  // series / closed form handover at |x|^2 = 4t/1000
  const double t = 0.3, r = std::sqrt(0.004 * t);
  auto lo = oseen_tensor_grad(Vec2(r * (1 - 1e-13), 0), t), hi = oseen_tensor_grad(Vec2(r * (1 + 1e-13), 0), t);
  CHECK((lo.S - hi.S).norm() < 1e-12 * lo.S.norm());
  CHECK((lo.dS[0] - hi.dS[0]).norm() < 1e-8 * lo.dS[0].norm());
  // far field: the Riesz part (2 xhat xhat - I) / (2 pi r^2)
  Mat2 far = oseen_tensor(Vec2(30, 0), 1.0);
  CHECK(far(0, 0) == doctest::Approx(1 / (2 * kPi * 900)).epsilon(1e-12));
  CHECK(far(1, 1) == doctest::Approx(-1 / (2 * kPi * 900)).epsilon(1e-12));
  CHECK_THROWS_AS(oseen_tensor(Vec2(1, 0), 0.0), Error);
}

TEST_CASE("convolution: zero forcing, linearity") {
  const double T = 0.05;
  std::vector<SpaceTimePoint> pts{{Vec2(0.01, 0.0), 0.9 * T}, {Vec2(0.0, 0.003), 0.99 * T}};
  auto z = convolve_velocity(ForcingTensor::zero(T), pts);
  for (auto& s : z) {
    CHECK(s.v.norm() == 0);
    CHECK(s.grad.norm() == 0);
  }
  Mat2 M;
  M << 1, 0.3, 0.3, -0.5;
  auto F = ForcingTensor::weight_profile(T, 0.9, 1.5, M);
  auto F3 = ForcingTensor::weight_profile(T, 0.9, 1.5, 3 * M);
  auto a = convolve_velocity(F, pts), b = convolve_velocity(F3, pts);
  for (size_t i = 0; i < pts.size(); ++i) {
    CHECK(a[i].v.norm() > 0);
    CHECK((b[i].v - 3 * a[i].v).norm() <= 1e-12 * b[i].v.norm());
    CHECK((b[i].grad - 3 * a[i].grad).norm() <= 1e-12 * b[i].grad.norm());
  }
}

TEST_CASE("convolution of divergence-free data is heat evolution") {
  // stream function e^{-|z|^2/4c}; the heat flow keeps it Gaussian, so v = curl of c/(c+t) e^{-|x|^2/4(c+t)}
  const double c = 0.02;
  auto curl = [](double cc, const Vec2& x) {
    double p = std::exp(-x.squaredNorm() / (4 * cc));
    return Vec2(x[1] / (2 * cc) * p, -x[0] / (2 * cc) * p);
  };
  InitialVelocity v0{[&](const Vec2& z) { return curl(c, z); }, Vec2::Zero(), std::sqrt(c)};
  std::vector<SpaceTimePoint> pts;
  for (double r : {0.0, 0.05, 0.2, 0.5})
    for (double t : {1e-3, 0.03}) pts.push_back({Vec2(r, 0.7 * r), t});
  ConvolutionOptions o;
  o.panels_per_decade = 8;
  o.n_theta = 48;
  auto v = convolve_velocity(ForcingTensor::zero(0.5), pts, v0, o);
  for (auto& s : v) {
    Vec2 ex = c / (c + s.t) * curl(c + s.t, s.x);
    CAPTURE(s.x);
    CAPTURE(s.t);
    CHECK((s.v - ex).norm() < 1e-6);
  }
}

TEST_CASE("pressure") {
  const double T = 0.05;
  // F = phi I: P_1 = N * Laplacian(phi) = phi
  ForcingTensor F;
  F.T = T;
  auto phi = [](const Vec2& z) { return std::exp(-z.squaredNorm() / 0.01); };
  F.F = [&](const Vec2& z, double) { return (phi(z) * Mat2::Identity()).eval(); };
  F.grad = [&](const Vec2& z, double) {
    std::array<Mat2, 2> g;
    for (int k = 0; k < 2; ++k) g[k] = -2 * z[k] / 0.01 * phi(z) * Mat2::Identity();
    return g;
  };
  ConvolutionOptions o;
  o.panels_per_decade = 8;
  o.n_theta = 48;
  for (Vec2 x : {Vec2(0, 0), Vec2(0.05, 0.02), Vec2(0.3, -0.1)})
    CHECK(std::abs(pressure_field(F, x, 0.5 * T, o) - phi(x)) < 1e-7);
  // constant F has no gradient and no pressure
  ForcingTensor C;
  C.T = T;
  C.F = [](const Vec2&, double) { return Mat2::Identity().eval(); };
  CHECK(pressure_field(C, Vec2(0.1, 0.2), 0.5 * T) == 0);
}

TEST_CASE("forcing norm") {
  const double T = 0.05, nu = 0.9, a = 1.5;
  Mat2 M;
  M << 0.6, 0, 0, 0.8;  // |M|_F = 1
  auto F = ForcingTensor::weight_profile(T, nu, a, M);
  std::vector<SpaceTimePoint> s;
  std::vector<double> rho;
  for (double y = 0; y < 50; y += 0.01) rho.push_back(y);
  for (double t : {0.1 * T, 0.9 * T})
    for (double y : rho) s.push_back({Vec2(y * lambda_star(t, T), 0), t});
  // exact profile: first term 1, second sup (a+1) y^a (1+y^{a+2}) / (1+y^{a+1})^2
  double g = 0;
  for (double y : rho) g = std::max(g, (a + 1) * std::pow(y, a) * (1 + std::pow(y, a + 2)) / std::pow(1 + std::pow(y, a + 1), 2));
  CHECK(forcing_norm(F, nu, a, s) == doctest::Approx(1 + g).epsilon(1e-12));
  CHECK(forcing_norm(ForcingTensor::zero(T), nu, a, s) == 0);
  auto F2 = ForcingTensor::weight_profile(T, nu, a, 2 * M);
  CHECK(forcing_norm(F2, nu, a, s) == doctest::Approx(2 * forcing_norm(F, nu, a, s)).epsilon(1e-13));
  // finite-difference gradient agrees with the analytic one
  ForcingTensor Ffd = F;
  Ffd.grad = nullptr;
  CHECK(forcing_norm(Ffd, nu, a, s) == doctest::Approx(1 + g).epsilon(1e-6));
}

TEST_CASE("weighted decay is refinement-stable and the quadratic term gains lambda^nu") {
  const double T = 0.05, nu = 0.9, a = 1.5;
  Mat2 M;
  M << 1, 0.3, 0.3, -0.5;
  auto F = ForcingTensor::weight_profile(T, nu, a, M);
  std::vector<SpaceTimePoint> targets, samples;
  std::vector<double> ts{T * (1 - 1e-1), T * (1 - 1e-2)};
  for (double t : ts)
    for (double y : {0.0, 1.0, 5.0, 30.0}) targets.push_back({Vec2(y * lambda_star(t, T), 0), t});
  for (double t : ts)
    for (double y = 0; y < 200; y *= 1.1, y += 0.01) samples.push_back({Vec2(y * lambda_star(t, T), 0), t});
  auto c = certify_decay(F, targets, samples);
  CHECK(std::isfinite(c.sup_v));
  CHECK(c.sup_v > 0);
  CHECK(std::abs(c.refinement_v - 1) < 0.2);
  CHECK(std::abs(c.refinement_grad - 1) < 0.2);
  CHECK(c.to_json().find("\"refinement_ratio\"") != std::string::npos);

  // v (x) v weighted as a forcing with a + 1 = 2: lambda^{2-nu} (1+|y|^2) |v|^2 ~ lambda^nu
  auto v = convolve_velocity(F, targets);
  std::vector<double> w;
  for (double t : ts) {
    double m = 0;
    for (auto& s : v)
      if (s.t == t) {
        double l = lambda_star(t, T), y = s.x.norm() / l;
        m = std::max(m, std::pow(l, 2 - nu) * (1 + y * y) * s.v.squaredNorm());
      }
    w.push_back(m / std::pow(lambda_star(t, T), nu));
  }
  CHECK(w[1] / w[0] > 0.5);
  CHECK(w[1] / w[0] < 2);
}

TEST_CASE("Leray projection") {
  PeriodicGrid g(64, 2 * kPi);
  Field f1(g.size()), f2(g.size()), p(g.size());
  std::mt19937 rng(11);
  std::normal_distribution<double> nd;
  for (size_t id = 0; id < g.size(); ++id) {
    Vec2 x = g.node(id);
    p[id] = std::sin(x[0]) * std::cos(2 * x[1]) + 0.3 * std::cos(3 * x[0] + x[1]);
    f1[id] = nd(rng);
    f2[id] = nd(rng);
  }
  // gradient fields vanish
  Field gx, gy;
  g.gradient(p, gx, gy);
  g.leray(gx, gy);
  CHECK(l2_norm(gx, g.h()) + l2_norm(gy, g.h()) < 1e-12);
  // divergence-free: unchanged
  Field c1 = gy, c2 = gx;
  g.gradient(p, c2, c1);
  for (auto& v : c1) v = -v;
  Field d1 = c1, d2 = c2;
  g.leray(d1, d2);
  double diff = 0;
  for (size_t i = 0; i < g.size(); ++i) diff = std::max(diff, std::abs(d1[i] - c1[i]) + std::abs(d2[i] - c2[i]));
  CHECK(diff < 1e-12);
  // random field: divergence-free after one pass, idempotent
  g.leray(f1, f2);
  auto div = g.divergence(f1, f2);
  double dmax = 0;
  for (double v : div) dmax = std::max(dmax, std::abs(v));
  CHECK(dmax < 1e-10);
  Field e1 = f1, e2 = f2;
  g.leray(e1, e2);
  diff = 0;
  for (size_t i = 0; i < g.size(); ++i) diff = std::max(diff, std::abs(e1[i] - f1[i]) + std::abs(e2[i] - f2[i]));
  CHECK(diff < 1e-12);
}
