#include <cmath>
#include <random>

#include "doctest.h"
#include "lab/profile.hpp"

using namespace lab;

TEST_CASE("polar profile closed forms") {
  auto p0 = eval_polar_profile(0);
  CHECK(p0.w == doctest::Approx(kPi));
  CHECK(p0.w_rho == doctest::Approx(-2));
  CHECK(p0.sin_w == 0);
  CHECK(p0.cos_w == doctest::Approx(-1));

  auto p1 = eval_polar_profile(1);
  CHECK(p1.w == doctest::Approx(kPi / 2));
  CHECK(p1.w_rho == doctest::Approx(-1));
  CHECK(p1.sin_w == doctest::Approx(1));
  CHECK(std::abs(p1.cos_w) < 1e-15);

  // pi - 2 atan(10) = 2 atan(1/10); values frozen from 40-digit evaluation
  auto p10 = eval_polar_profile(10);
  CHECK(std::abs(p10.w - 0.19933730498232405) < 1e-15);
  CHECK(std::abs(p10.sin_w - 20.0 / 101.0) < 1e-16);

  for (double r : {0.0, 1e-3, 0.3, 1.0, 7.0, 1e3}) {
    auto p = eval_polar_profile(r);
    CHECK(std::abs(std::sin(p.w) - p.sin_w) < 1e-14);
    CHECK(std::abs(std::cos(p.w) - p.cos_w) < 1e-14);
    CHECK(std::abs(p.sin_w + r * p.w_rho) < 1e-14);
  }
  CHECK_THROWS_AS(eval_polar_profile(-1e-9), Error);
}

TEST_CASE("bulk profile and frame") {
  Vec3 c = eval_bulk_profile(PolarPoint{0, 0.7});
  CHECK((c - Vec3(0, 0, -1)).norm() < 1e-15);
  Vec3 e = eval_bulk_profile(PolarPoint{1, 0});
  CHECK((e - Vec3(1, 0, 0)).norm() < 1e-15);
  Vec3 inf = eval_bulk_profile(PolarPoint{std::numeric_limits<double>::infinity(), 1.0});
  CHECK((inf - Vec3(0, 0, 1)).norm() < 1e-15);
  CHECK((eval_bulk_profile(PolarPoint{1e8, 2.0}) - Vec3(0, 0, 1)).norm() < 1e-7);

  auto f = eval_frame({1, 0});
  CHECK((f.e1 - Vec3(0, 0, -1)).norm() < 1e-15);
  CHECK((f.e2 - Vec3(0, 1, 0)).norm() < 1e-15);
  // origin: closed form with w = pi
  auto f0 = eval_frame({0, 0});
  CHECK((f0.e1 - Vec3(-1, 0, 0)).norm() < 1e-15);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> R(0, 50), T(0, 2 * kPi);
  for (int n = 0; n < 500; ++n) {
    PolarPoint y{R(rng), T(rng)};
    Vec3 w = eval_bulk_profile(y);
    auto fr = eval_frame(y);
    CHECK(std::abs(w.norm() - 1) < 1e-12);
    CHECK(std::abs(fr.e1.dot(fr.e2)) < 1e-12);
    CHECK(std::abs(fr.e1.norm() - 1) < 1e-12);
    CHECK(std::abs(fr.e2.norm() - 1) < 1e-12);
    CHECK(std::abs(fr.e1.dot(w)) < 1e-12);
    CHECK(std::abs(fr.e2.dot(w)) < 1e-12);
    Vec2 yc(y.rho * std::cos(y.theta), y.rho * std::sin(y.theta));
    CHECK((eval_bulk_profile(yc) - w).norm() < 1e-12);
  }
}

TEST_CASE("rotations") {
  CHECK((rotation_matrix({0, 0, 0}) - Mat3::Identity()).norm() < 1e-15);
  Vec3 v = rotation_matrix({kPi / 2, 0, 0}) * Vec3(1, 0, 0);
  CHECK((v - Vec3(0, 1, 0)).norm() < 1e-15);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> A(-4, 4);
  for (int n = 0; n < 100; ++n) {
    Mat3 q = rotation_matrix({A(rng), A(rng), A(rng)});
    CHECK((q.transpose() * q - Mat3::Identity()).norm() < 1e-12);
    CHECK(std::abs(q.determinant() - 1) < 1e-12);
  }
}

TEST_CASE("kernels") {
  CHECK((eval_kernel(0, 1, {1, 0}) - Vec3(0, 0, 1)).norm() < 1e-15);
  auto f = eval_frame({2, kPi / 2});
  Vec3 z11 = eval_kernel(1, 1, {2, kPi / 2});
  CHECK(std::abs(z11.dot(f.e1)) < 1e-15);
  CHECK(z11.dot(f.e2) == doctest::Approx(eval_polar_profile(2).w_rho));
  CHECK(eval_kernel(-1, 2, {0, 1.0}).norm() == 0);
  CHECK_THROWS_AS(eval_kernel(2, 1, {1, 0}), Error);
  CHECK_THROWS_AS(eval_kernel(0, 3, {1, 0}), Error);
  for (int k = -1; k <= 1; ++k)
    for (int j = 1; j <= 2; ++j)
      for (double r : {0.01, 0.5, 3.0})
        for (double t : {0.0, 1.0, 4.0}) CHECK(std::abs(eval_kernel(k, j, {r, t}).dot(eval_bulk_profile(PolarPoint{r, t}))) < 1e-14);
}

namespace {
double kernel_residual(int k, int j, int n_rho, int n_theta) {
  GridSpec s{1e-3, 20.0, n_rho, n_theta, Spacing::Geometric};
  PolarGrid g(s);
  auto z = sample_field(g, [&](const PolarPoint& y) { return eval_kernel(k, j, y); });
  auto r = apply_linearized(z);
  double sup = 0;
  for (int i = 1; i + 1 < g.n_rho(); ++i) {
    double rho = g.rho()[i];
    if (rho < 0.01 || rho > 10) continue;
    for (int jj = 0; jj < g.n_theta(); ++jj) sup = std::max(sup, r.at(i, jj).norm());
  }
  return sup;
}
}  // namespace

TEST_CASE("linearized operator annihilates kernels at second order") {
  for (int k = -1; k <= 1; ++k)
    for (int j = 1; j <= 2; ++j) {
      double r0 = kernel_residual(k, j, 129, 32);
      double r1 = kernel_residual(k, j, 257, 64);
      CAPTURE(k);
      CAPTURE(j);
      CHECK(r0 / r1 >= 3.5);
    }
}

TEST_CASE("linearized operator rejects non-tangent input and maps zero to zero") {
  PolarGrid g({1e-3, 10, 33, 8, Spacing::Geometric});
  auto zero = sample_field(g, [](const PolarPoint&) { return Vec3::Zero(); });
  auto out = apply_linearized(zero);
  for (auto& v : out.values) CHECK(v.norm() == 0);
  auto bad = sample_field(g, [](const PolarPoint& y) { return eval_bulk_profile(y); });
  CHECK_THROWS_AS(apply_linearized(bad), Error);
}

TEST_CASE("mode operator annihilates radial kernels") {
  for (int k : {-1, 0, 1}) {
    double prev = 0;
    for (int n : {201, 401, 801}) {
      auto r = make_radial_nodes(1e-3, 100, n, Spacing::Geometric);
      auto f = sample_mode(k, r, Spacing::Geometric, [&](double rho) { return cplx(mode_kernel(k, rho), 0); });
      auto l = apply_mode_operator(k, f);
      double sup = 0;
      for (int i = 1; i + 1 < n; ++i)
        if (r[i] >= 0.01 && r[i] <= 10) sup = std::max(sup, std::abs(l.values[i]));
      if (prev > 0) CHECK(prev / sup > 3.5);
      prev = sup;
    }
  }
}

TEST_CASE("full operator matches mode-wise lift on a pure mode field") {
  // phi = Re(f e^{ik theta}) E1 + Im(f e^{ik theta}) E2 with a smooth bump f
  const int k = 2;
  auto f = [](double r) { return cplx(r * r * std::exp(-r * r), 0.5 * r * r * std::exp(-r)); };
  PolarGrid g({1e-3, 30, 801, 64, Spacing::Geometric});
  auto phi = sample_field(g, [&](const PolarPoint& y) {
    auto fr = eval_frame(y);
    cplx v = f(y.rho) * std::polar(1.0, k * y.theta);
    return Vec3(v.real() * fr.e1 + v.imag() * fr.e2);
  });
  auto lphi = apply_linearized(phi);
  auto m = sample_mode(k, g.rho(), Spacing::Geometric, f);
  auto lm = apply_mode_operator(k, m);
  double err = 0, scale = 0;
  for (int i = 1; i + 1 < g.n_rho(); ++i) {
    if (g.rho()[i] < 0.05 || g.rho()[i] > 8) continue;
    for (int j = 0; j < g.n_theta(); ++j) {
      PolarPoint y{g.rho()[i], g.theta()[j]};
      auto fr = eval_frame(y);
      cplx v = lm.values[i] * std::polar(1.0, k * y.theta);
      Vec3 lift = v.real() * fr.e1 + v.imag() * fr.e2;
      err = std::max(err, (lift - lphi.at(i, j)).norm());
      scale = std::max(scale, lift.norm());
    }
  }
  CHECK(err / scale < 5e-3);
}

TEST_CASE("orthogonal projection") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> N;
  for (int n = 0; n < 200; ++n) {
    Vec3 u(N(rng), N(rng), N(rng));
    u.normalize();
    Vec3 a(N(rng), N(rng), N(rng)), b(N(rng), N(rng), N(rng));
    Vec3 pa = project_orthogonal(a, u);
    CHECK(std::abs(pa.dot(u)) < 1e-14);
    CHECK((project_orthogonal(pa, u) - pa).norm() < 1e-14);
    CHECK(std::abs(pa.dot(b) - a.dot(project_orthogonal(b, u))) < 1e-12);
    CHECK(project_orthogonal(u, u).norm() < 1e-15);
  }
  CHECK_THROWS_AS(project_orthogonal(Vec3(1, 0, 0), Vec3(2, 0, 0)), Error);
}

TEST_CASE("correction scalar") {
  CHECK(correction_scalar(Vec3::Zero()) == 0);
  CHECK(correction_scalar(Vec3(1, 0, 0)) == doctest::Approx(-1));
  CHECK(correction_scalar(Vec3(0.6, 0, 0)) == doctest::Approx(-0.2));
  CHECK_THROWS_AS(correction_scalar(Vec3(0.8, 0.8, 0)), Error);
  Vec3 u(0, 0, 1), z(0.3, -0.4, 0);
  CHECK(std::abs((u + z + correction_scalar(z) * u).norm() - 1) < 1e-15);
}

TEST_CASE("dirichlet energy") {
  CHECK(std::abs(dirichlet_energy_profile() / (8 * kPi) - 1) < 1e-10);
  // oracle: 8 pi [ -1/(1+rho^2) ]_0^1 = 4 pi
  CHECK(std::abs(dirichlet_energy_profile(1.0) - 4 * kPi) < 1e-12);
  PolarGrid g({1e-3, 5, 65, 16, Spacing::Geometric});
  auto c = sample_field(g, [](const PolarPoint&) { return Vec3(0, 0, 1); });
  CHECK(dirichlet_energy(c) == 0);
  PolarGrid fine({1e-4, 1.0, 801, 256, Spacing::Geometric});
  auto w = sample_field(fine, [](const PolarPoint& y) { return eval_bulk_profile(y); });
  CHECK(dirichlet_energy(w) == doctest::Approx(4 * kPi).epsilon(2e-4));
}
